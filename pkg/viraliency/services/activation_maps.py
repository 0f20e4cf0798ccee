"""
Class activation ("viraliency") maps for every pooling mode.

a_k(w, h) = sum_l w_kl * f_l(w, h) * [pixel in support_l]

GAP keeps every pixel, GMP one pixel per channel, GNAP/LENA the top-N_l pixels.
The inner-product bias is not part of the map.
"""
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from viraliency.core.exceptions import ShapeMismatchError
from viraliency.schemas.model import PoolingMode
from viraliency.services.pooling import EtaVector, PoolResult, lena_forward, pooling_etas
from viraliency.services.tensor import DTYPE, InnerProductParams, check_finite


@dataclass(frozen=True)
class ViraliencyMap:
    """Spatial evidence map for one output class, with its provenance."""
    values: np.ndarray
    class_index: int
    mode: PoolingMode
    etas_used: EtaVector

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]


def _check_class(params: InnerProductParams, class_index: int) -> None:
    if not 0 <= class_index < params.num_outputs:
        raise ShapeMismatchError("class index", f"0..{params.num_outputs - 1}", class_index)


def support_masks(result: PoolResult) -> np.ndarray:
    """Per-channel boolean masks of the pixels that fed the forward pass."""
    return result.support_mask()


def masked_features(features: np.ndarray, result: PoolResult) -> np.ndarray:
    """f_l^eta: features zeroed outside each channel's support set."""
    return np.where(result.support_mask(), features, 0.0)


def activation_map(
    features: np.ndarray,
    params: InnerProductParams,
    class_index: int = 0,
    etas: Optional[EtaVector] = None,
    mode: PoolingMode = PoolingMode.LENA,
) -> ViraliencyMap:
    """
    Build a_k for one (L, H, W) feature tensor.

    Args:
        features: pooled feature maps of a single image
        params: inner-product head (row k gives w_k)
        class_index: k
        etas: eta vector for GNAP/LENA (ignored by GAP/GMP)
        mode: which pooling's support sets to use

    Raises:
        ShapeMismatchError: class index out of range or inconsistent shapes
    """
    features = np.asarray(features, dtype=DTYPE)
    if features.ndim != 3:
        raise ShapeMismatchError("activation map features rank", 3, features.ndim)
    _check_class(params, class_index)
    channels = features.shape[0]
    if params.num_inputs != channels:
        raise ShapeMismatchError("inner product columns", channels, params.num_inputs)

    used = pooling_etas(mode, channels, etas)
    result = lena_forward(features, used)
    values = np.tensordot(params.weights[class_index], masked_features(features, result), axes=1)
    check_finite(values, "activation map")
    return ViraliencyMap(values=values, class_index=class_index, mode=mode, etas_used=used.copy())


def class_score_from_map(
    features: np.ndarray,
    params: InnerProductParams,
    class_index: int,
    etas: EtaVector,
) -> float:
    """
    Rebuild q_k - b_k as sum_l w_kl / N_l * sum over support of f_l.

    Holds for any eta vector; equals the map mean under GAP and the map sum
    under GMP.
    """
    features = np.asarray(features, dtype=DTYPE)
    result = lena_forward(features, etas)
    channel_sums = masked_features(features, result).reshape(features.shape[0], -1).sum(axis=1)
    return float(np.dot(params.weights[class_index], channel_sums / result.n_used))


def normalize_map(vmap: Union[ViraliencyMap, np.ndarray]) -> np.ndarray:
    """
    Min-max normalise to [0, 1]; a constant map becomes all zeros.
    """
    values = vmap.values if isinstance(vmap, ViraliencyMap) else np.asarray(vmap, dtype=DTYPE)
    check_finite(values, "viraliency map")
    low = values.min()
    high = values.max()
    if high == low:
        return np.zeros_like(values)
    return (values - low) / (high - low)
