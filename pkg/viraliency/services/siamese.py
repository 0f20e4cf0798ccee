"""
Siamese virality network.

One scoring branch (conv stack -> optional objectness fusion -> global pooling
-> inner product) shared by both images of a pair. The relative-virality logit
is s(a) - s(b) and the loss is the sigmoid cross-entropy of that logit against
t = 1 for a_more_viral, t = 0 for b_more_viral.

Parameters live in one ordered name -> array mapping:

    conv{i}.weight, conv{i}.bias      front-end
    fusion.weight, fusion.bias        objectness fusion (when enabled)
    head.weight, head.bias            inner product (K x L)
    eta                               pooling fractions (L,)

Both branches of a pair are evaluated in separate forward/backward calls on the
same parameter snapshot, so equal images give bitwise-equal scores and exactly
cancelling gradients.
"""
from collections import OrderedDict
from dataclasses import dataclass
from typing import Dict, Iterable, Optional, Tuple

import numpy as np

from viraliency.core.exceptions import ShapeMismatchError, StaleCacheError
from viraliency.schemas.data import PairLabel
from viraliency.schemas.model import ModelConfig, PoolingMode
from viraliency.services.pooling import (
    EtaVector,
    PoolResult,
    lena_backward_features,
    lena_eta_grad_from_result,
    pool_forward,
    pooling_etas,
)
from viraliency.services.tensor import (
    DTYPE,
    ConvParams,
    InnerProductParams,
    bilinear_resize,
    check_finite,
    conv2d_backward,
    conv2d_forward,
    inner_product_backward,
    inner_product_forward,
    relu_backward,
    relu_forward,
)

Params = Dict[str, np.ndarray]

ETA_KEY = "eta"
HEAD_WEIGHT = "head.weight"
HEAD_BIAS = "head.bias"
FUSION_WEIGHT = "fusion.weight"
FUSION_BIAS = "fusion.bias"


def conv_keys(index: int) -> Tuple[str, str]:
    return f"conv{index}.weight", f"conv{index}.bias"


def is_front_end(name: str) -> bool:
    """Conv and fusion parameters (frozen by freeze_front_end)."""
    return name.startswith("conv") or name.startswith("fusion.")


def expected_param_shapes(config: ModelConfig) -> "OrderedDict[str, Tuple[int, ...]]":
    """Parameter names and shapes in canonical (checkpoint) order."""
    shapes: "OrderedDict[str, Tuple[int, ...]]" = OrderedDict()
    in_channels = config.input_channels
    for index, layer in enumerate(config.conv_layers):
        weight, bias = conv_keys(index)
        shapes[weight] = (layer.out_channels, in_channels, layer.kernel, layer.kernel)
        shapes[bias] = (layer.out_channels,)
        in_channels = layer.out_channels
    channels = config.num_channels
    if config.objectness is not None:
        k = config.objectness.fusion_kernel
        shapes[FUSION_WEIGHT] = (channels, channels + config.objectness.num_side_maps, k, k)
        shapes[FUSION_BIAS] = (channels,)
    shapes[HEAD_WEIGHT] = (config.output_dim, channels)
    shapes[HEAD_BIAS] = (config.output_dim,)
    shapes[ETA_KEY] = (channels,)
    return shapes


def initial_params(config: ModelConfig, seed: int = 0) -> Params:
    """
    He-style uniform fan-in initialisation, zero biases, eta from eta_init.

    Weights are drawn from U(-sqrt(6/fan_in), sqrt(6/fan_in)) in canonical
    parameter order from one seeded generator.
    """
    rng = np.random.default_rng(seed)
    params: Params = OrderedDict()
    for name, shape in expected_param_shapes(config).items():
        if name == ETA_KEY:
            params[name] = np.asarray(config.eta_vector(), dtype=DTYPE)
        elif name.endswith(".weight"):
            fan_in = int(np.prod(shape[1:]))
            bound = np.sqrt(6.0 / fan_in)
            params[name] = rng.uniform(-bound, bound, size=shape)
        else:
            params[name] = np.zeros(shape, dtype=DTYPE)
    return params


def zeros_like_params(params: Params) -> Params:
    return OrderedDict((name, np.zeros_like(value)) for name, value in params.items())


def add_params(left: Params, right: Params) -> Params:
    return OrderedDict((name, left[name] + right[name]) for name in left)


def scale_params(params: Params, factor: float) -> Params:
    return OrderedDict((name, value * factor) for name, value in params.items())


# =============================================================================
# Objectness fusion
# =============================================================================

def _fusion_input(features: np.ndarray, side_maps: np.ndarray, fusion: ConvParams) -> np.ndarray:
    channels = features.shape[-3]
    side_channels = fusion.in_channels - channels
    if side_maps.ndim != features.ndim or side_maps.shape[-3] != side_channels:
        raise ShapeMismatchError(
            "side maps",
            f"{side_channels} maps per image, rank {features.ndim}",
            side_maps.shape,
        )
    if features.ndim == 4 and side_maps.shape[0] != features.shape[0]:
        raise ShapeMismatchError("side map batch", features.shape[0], side_maps.shape[0])
    resized = bilinear_resize(side_maps, features.shape[-2], features.shape[-1])
    return np.concatenate([features, resized], axis=-3)


def fuse_objectness(features: np.ndarray, side_maps: np.ndarray, fusion: ConvParams) -> np.ndarray:
    """
    Resize side maps to the feature resolution, concatenate along channels and
    apply the fusion convolution followed by ReLU.

    Args:
        features: (L, H, W) or (B, L, H, W)
        side_maps: (K', h, w) or (B, K', h, w), any h, w
        fusion: conv with L + K' input and L output channels, size-preserving

    Raises:
        ShapeMismatchError: K' differs from the fusion conv's extra inputs
    """
    features = np.asarray(features, dtype=DTYPE)
    side_maps = np.asarray(side_maps, dtype=DTYPE)
    return relu_forward(conv2d_forward(_fusion_input(features, side_maps, fusion), fusion))


# =============================================================================
# Network
# =============================================================================

@dataclass(frozen=True)
class ForwardCache:
    """Everything backward needs from one forward call."""
    version: int
    layer_inputs: Tuple[np.ndarray, ...]
    pre_activations: Tuple[np.ndarray, ...]
    fusion_input: Optional[np.ndarray]
    fusion_pre: Optional[np.ndarray]
    features: np.ndarray
    pool: PoolResult
    outputs: np.ndarray


class ViralityNet:
    """
    Shared-parameter scoring branch.

    Usage:
        net = ViralityNet.initialize(config, seed=0)
        scores, cache = net.forward(images)
        grads = net.backward(cache, grad_scores)
    """

    def __init__(self, config: ModelConfig, params: Params):
        self.config = config
        self._version = 0
        self._params: Params = OrderedDict()
        self.set_params(params)

    @classmethod
    def initialize(cls, config: ModelConfig, seed: int = 0) -> "ViralityNet":
        return cls(config, initial_params(config, seed))

    # -------------------------------------------------------------------------
    # Parameters
    # -------------------------------------------------------------------------

    @property
    def params(self) -> Params:
        """Read-only parameter arrays in canonical order."""
        return self._params

    @property
    def version(self) -> int:
        return self._version

    def set_params(self, params: Params) -> None:
        """Replace every parameter; caches from earlier forwards become stale."""
        expected = expected_param_shapes(self.config)
        if set(params) != set(expected):
            raise ShapeMismatchError("parameter names", list(expected), list(params))
        fresh: Params = OrderedDict()
        for name, shape in expected.items():
            value = np.array(params[name], dtype=DTYPE)
            if value.shape != shape:
                raise ShapeMismatchError(f"parameter {name} shape", shape, value.shape)
            check_finite(value, name, stage="parameter update")
            value.setflags(write=False)
            fresh[name] = value
        EtaVector(fresh[ETA_KEY])
        self._params = fresh
        self._version += 1

    @property
    def num_parameters(self) -> int:
        return int(sum(value.size for value in self._params.values()))

    @property
    def etas(self) -> EtaVector:
        """The eta vector the pooling layer applies (fixed 1/0 for GAP/GMP)."""
        return pooling_etas(self.config.pooling_mode, self.config.num_channels, EtaVector(self._params[ETA_KEY]))

    @property
    def eta_trainable(self) -> bool:
        return self.config.pooling_mode is PoolingMode.LENA

    def conv_params(self, index: int) -> ConvParams:
        layer = self.config.conv_layers[index]
        weight, bias = conv_keys(index)
        return ConvParams(self._params[weight], self._params[bias], layer.stride, layer.padding)

    def fusion_params(self) -> Optional[ConvParams]:
        if self.config.objectness is None:
            return None
        k = self.config.objectness.fusion_kernel
        return ConvParams(self._params[FUSION_WEIGHT], self._params[FUSION_BIAS], 1, k // 2)

    def head_params(self) -> InnerProductParams:
        return InnerProductParams(self._params[HEAD_WEIGHT], self._params[HEAD_BIAS])

    # -------------------------------------------------------------------------
    # Forward
    # -------------------------------------------------------------------------

    def _check_images(self, images: np.ndarray) -> np.ndarray:
        images = np.asarray(images, dtype=DTYPE)
        expected = (self.config.input_channels, self.config.input_height, self.config.input_width)
        if images.ndim == 3:
            images = images[np.newaxis]
        if images.ndim != 4 or images.shape[1:] != expected:
            raise ShapeMismatchError("input images", f"(B, {expected[0]}, {expected[1]}, {expected[2]})", images.shape)
        return images

    def features(self, images: np.ndarray, side_maps: Optional[np.ndarray] = None) -> np.ndarray:
        """Feature maps fed to global pooling, (B, L, H, W)."""
        return self._forward_features(self._check_images(images), side_maps)[4]

    def _forward_features(self, x: np.ndarray, side_maps: Optional[np.ndarray]):
        layer_inputs = []
        pre_activations = []
        for index, layer in enumerate(self.config.conv_layers):
            layer_inputs.append(x)
            pre = conv2d_forward(x, self.conv_params(index))
            check_finite(pre, f"conv{index} output")
            pre_activations.append(pre)
            x = relu_forward(pre) if layer.activation == "relu" else pre

        fusion_input = fusion_pre = None
        fusion = self.fusion_params()
        if fusion is not None:
            if side_maps is None:
                raise ShapeMismatchError(
                    "side maps", f"{self.config.objectness.num_side_maps} maps per image", None
                )
            side = np.asarray(side_maps, dtype=DTYPE)
            if side.ndim == 3:
                side = side[np.newaxis]
            fusion_input = _fusion_input(x, side, fusion)
            fusion_pre = conv2d_forward(fusion_input, fusion)
            check_finite(fusion_pre, "fusion output")
            x = relu_forward(fusion_pre)
        return tuple(layer_inputs), tuple(pre_activations), fusion_input, fusion_pre, x

    def forward(
        self,
        images: np.ndarray,
        side_maps: Optional[np.ndarray] = None,
    ) -> Tuple[np.ndarray, ForwardCache]:
        """
        Score a batch of images.

        Args:
            images: (B, C, H, W) or a single (C, H, W) image
            side_maps: (B, K', h, w) when objectness is enabled

        Returns:
            (scores (B,) taken from output 0, cache for backward)

        Raises:
            ShapeMismatchError: wrong image or side-map shape
            NonFiniteError: NaN/Inf in any activation
        """
        x = self._check_images(images)
        layer_inputs, pre_activations, fusion_input, fusion_pre, features = self._forward_features(x, side_maps)
        pool = pool_forward(features, self.config.pooling_mode, self.etas)
        outputs = inner_product_forward(pool.pooled, self.head_params())
        check_finite(outputs, "scores")
        cache = ForwardCache(
            version=self._version,
            layer_inputs=layer_inputs,
            pre_activations=pre_activations,
            fusion_input=fusion_input,
            fusion_pre=fusion_pre,
            features=features,
            pool=pool,
            outputs=outputs,
        )
        return outputs[:, 0], cache

    def score(self, image: np.ndarray, side_maps: Optional[np.ndarray] = None) -> Tuple[float, ForwardCache]:
        """Scalar virality score of one (C, H, W) image."""
        image = np.asarray(image, dtype=DTYPE)
        if image.ndim != 3:
            raise ShapeMismatchError("single image rank", 3, image.ndim)
        side = None if side_maps is None else np.asarray(side_maps, dtype=DTYPE)[np.newaxis]
        scores, cache = self.forward(image[np.newaxis], side)
        return float(scores[0]), cache

    # -------------------------------------------------------------------------
    # Backward
    # -------------------------------------------------------------------------

    def backward(
        self,
        cache: ForwardCache,
        grad_scores: np.ndarray,
        front_end: bool = True,
    ) -> Params:
        """
        Gradients of sum_b grad_scores[b] * score_b for every parameter.

        Args:
            cache: from forward() on the current parameters
            grad_scores: (B,) gradient w.r.t. output 0, or (B, K) for all outputs
            front_end: False skips conv/fusion gradients (returned as zeros)

        Raises:
            StaleCacheError: parameters changed since the forward pass
        """
        if cache.version != self._version:
            raise StaleCacheError(f"cache from parameter version {cache.version}, model is at {self._version}")
        grad_scores = np.asarray(grad_scores, dtype=DTYPE)
        if grad_scores.ndim == 1:
            if grad_scores.shape[0] != cache.outputs.shape[0]:
                raise ShapeMismatchError("grad_scores length", cache.outputs.shape[0], grad_scores.shape[0])
            grad_outputs = np.zeros_like(cache.outputs)
            grad_outputs[:, 0] = grad_scores
        else:
            grad_outputs = grad_scores
        check_finite(grad_outputs, "score gradient", stage="backward")

        grads = zeros_like_params(self._params)
        grad_pooled, head_grads = inner_product_backward(cache.pool.pooled, self.head_params(), grad_outputs)
        grads[HEAD_WEIGHT] = head_grads.weights
        grads[HEAD_BIAS] = head_grads.bias
        if self.eta_trainable:
            grads[ETA_KEY] = lena_eta_grad_from_result(cache.pool, grad_pooled)

        if not front_end:
            return grads

        g = lena_backward_features(cache.pool, grad_pooled, cache.features.shape)
        fusion = self.fusion_params()
        if fusion is not None:
            g = relu_backward(cache.fusion_pre, g)
            grad_input, fusion_grads = conv2d_backward(cache.fusion_input, fusion, g)
            grads[FUSION_WEIGHT] = fusion_grads.weights
            grads[FUSION_BIAS] = fusion_grads.bias
            g = grad_input[:, : self.config.num_channels]

        for index in reversed(range(len(self.config.conv_layers))):
            if self.config.conv_layers[index].activation == "relu":
                g = relu_backward(cache.pre_activations[index], g)
            g, conv_grads = conv2d_backward(cache.layer_inputs[index], self.conv_params(index), g)
            weight, bias = conv_keys(index)
            grads[weight] = conv_grads.weights
            grads[bias] = conv_grads.bias

        for name, value in grads.items():
            check_finite(value, f"gradient of {name}", stage="backward")
        return grads

    # -------------------------------------------------------------------------
    # Pairs
    # -------------------------------------------------------------------------

    def pair_logit(
        self,
        image_a: np.ndarray,
        image_b: np.ndarray,
        side_a: Optional[np.ndarray] = None,
        side_b: Optional[np.ndarray] = None,
    ) -> float:
        """s(a) - s(b) for one pair."""
        score_a, _ = self.score(image_a, side_a)
        score_b, _ = self.score(image_b, side_b)
        return score_a - score_b

    def pair_logits(
        self,
        images_a: np.ndarray,
        images_b: np.ndarray,
        side_a: Optional[np.ndarray] = None,
        side_b: Optional[np.ndarray] = None,
    ) -> np.ndarray:
        """Vectorised s(a) - s(b) over a batch of pairs."""
        scores_a, _ = self.forward(images_a, side_a)
        scores_b, _ = self.forward(images_b, side_b)
        return scores_a - scores_b

    def pair_forward_backward(
        self,
        images_a: np.ndarray,
        images_b: np.ndarray,
        targets: np.ndarray,
        side_a: Optional[np.ndarray] = None,
        side_b: Optional[np.ndarray] = None,
        front_end: bool = True,
    ) -> Tuple[float, Params, np.ndarray]:
        """
        Summed pair loss and its gradients over a batch of pairs.

        Branch a receives +dloss/dlogit, branch b receives -dloss/dlogit; the
        two gradient sets are added after both backward passes.

        Returns:
            (sum of losses, summed gradients, logits)
        """
        targets = np.asarray(targets, dtype=DTYPE)
        scores_a, cache_a = self.forward(images_a, side_a)
        scores_b, cache_b = self.forward(images_b, side_b)
        if targets.shape != scores_a.shape:
            raise ShapeMismatchError("pair targets", scores_a.shape, targets.shape)
        logits = scores_a - scores_b
        losses, dlogits = pair_losses(logits, targets)
        grads_a = self.backward(cache_a, dlogits, front_end=front_end)
        grads_b = self.backward(cache_b, -dlogits, front_end=front_end)
        return float(np.sum(losses)), add_params(grads_a, grads_b), logits


# =============================================================================
# Loss and accuracy
# =============================================================================

def _stable_sigmoid(z: np.ndarray) -> np.ndarray:
    return np.exp(-np.logaddexp(0.0, -z))


def pair_losses(logits: np.ndarray, targets: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    Sigmoid cross-entropy per pair and its derivative p - t.

    loss = softplus(s * logit) with s = 1 - 2t, so loss(x, t=1) and loss(-x, t=0)
    are computed by the same expression.
    """
    logits = np.asarray(logits, dtype=DTYPE)
    check_finite(logits, "logits")
    signs = 1.0 - 2.0 * np.asarray(targets, dtype=DTYPE)
    z = signs * logits
    return np.logaddexp(0.0, z), signs * _stable_sigmoid(z)


def pair_loss(logit: float, label: PairLabel) -> Tuple[float, float]:
    """(loss, dloss/dlogit) for one pair."""
    losses, grads = pair_losses(np.array([logit]), np.array([label.target]))
    return float(losses[0]), float(grads[0])


def pairwise_accuracy(logits: Iterable[float], targets: Iterable[float]) -> float:
    """Fraction of pairs whose logit sign matches the label; a zero logit is wrong."""
    logits = np.asarray(list(logits), dtype=DTYPE)
    targets = np.asarray(list(targets), dtype=DTYPE)
    if logits.size == 0:
        return 0.0
    return float(np.mean(correct_mask(logits, targets)))


def correct_mask(logits: np.ndarray, targets: np.ndarray) -> np.ndarray:
    return np.where(np.asarray(targets) > 0.5, np.asarray(logits) > 0.0, np.asarray(logits) < 0.0)
