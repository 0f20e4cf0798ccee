"""
Global pooling family: GAP, GMP, fixed top-N average (GNAP) and learned top-N
average (LENA).

All four are the same kernel: channel l keeps the mean of its N_l largest
pixels, with N_l = 1 + ceil(eta_l * (W*H - 1)). GAP is eta = 1, GMP is eta = 0.

Selection contract:
- full stable sort per channel, descending by value, ties broken by ascending
  row-major pixel index
- the PoolResult returned by a forward pass is the only state backward needs
"""
import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from viraliency.core.exceptions import EtaRangeError, ShapeMismatchError, StaleCacheError
from viraliency.schemas.model import PoolingMode
from viraliency.services.tensor import DTYPE

# eta * (WH - 1) within this distance of an integer is snapped to it before ceil
SNAP_TOLERANCE = 1e-9


# =============================================================================
# Eta vector
# =============================================================================

@dataclass(frozen=True)
class EtaVector:
    """Per-channel pooling fractions, every entry in [0, 1]."""
    values: np.ndarray

    def __post_init__(self) -> None:
        values = np.array(self.values, dtype=DTYPE).reshape(-1)
        outside = ~((values >= 0.0) & (values <= 1.0))
        if np.any(outside):
            raise EtaRangeError(float(values[np.argmax(outside)]))
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @classmethod
    def full(cls, channels: int, eta: float) -> "EtaVector":
        return cls(np.full(channels, eta, dtype=DTYPE))

    @classmethod
    def clamped(cls, values: Union[np.ndarray, Sequence[float]]) -> "EtaVector":
        """Build from arbitrary reals, clamping into [0, 1]."""
        return cls(np.clip(np.asarray(values, dtype=DTYPE), 0.0, 1.0))

    def __len__(self) -> int:
        return self.values.shape[0]

    def copy(self) -> "EtaVector":
        return EtaVector(self.values.copy())


def pooling_etas(mode: PoolingMode, channels: int, etas: Optional[EtaVector] = None) -> EtaVector:
    """The eta vector a pooling mode actually applies."""
    if mode is PoolingMode.GAP:
        return EtaVector.full(channels, 1.0)
    if mode is PoolingMode.GMP:
        return EtaVector.full(channels, 0.0)
    if etas is None:
        raise ShapeMismatchError(f"{mode.value} eta vector", f"{channels} entries", None)
    if len(etas) != channels:
        raise ShapeMismatchError(f"{mode.value} eta vector length", channels, len(etas))
    return etas


# =============================================================================
# Support size
# =============================================================================

def _snapped_ceil(x: float) -> int:
    nearest = round(x)
    if abs(x - nearest) < SNAP_TOLERANCE:
        return int(nearest)
    return math.ceil(x)


def top_n_count(eta: float, width: int, height: int) -> int:
    """
    N_eta = 1 + ceil(eta * (W*H - 1)); 1 at eta = 0 and W*H at eta = 1.

    Raises:
        EtaRangeError: eta outside [0, 1]
        ShapeMismatchError: W*H < 1
    """
    if not 0.0 <= eta <= 1.0:
        raise EtaRangeError(eta)
    pixels = width * height
    if pixels < 1:
        raise ShapeMismatchError("feature map size", "W*H >= 1", (width, height))
    return 1 + _snapped_ceil(eta * (pixels - 1))


def _counts(etas: EtaVector, pixels: int) -> np.ndarray:
    scaled = etas.values * (pixels - 1)
    nearest = np.round(scaled)
    snapped = np.where(np.abs(scaled - nearest) < SNAP_TOLERANCE, nearest, np.ceil(scaled))
    return 1 + snapped.astype(np.intp)


# =============================================================================
# Pool result
# =============================================================================

@dataclass(frozen=True)
class PoolResult:
    """
    Output of a global pooling forward pass.

    Attributes:
        pooled: (..., L) pooled values g_l
        n_used: (L,) support size N_l per channel
        order: (..., L, P) pixel indices sorted by the selection contract
        sorted_values: (..., L, P) feature values in `order`
        shape: shape of the pooled feature tensor (..., L, H, W)
    """
    pooled: np.ndarray
    n_used: np.ndarray
    order: np.ndarray
    sorted_values: np.ndarray
    shape: Tuple[int, ...]
    etas: EtaVector = field(repr=False, default=None)

    @property
    def num_channels(self) -> int:
        return self.shape[-3]

    @property
    def num_pixels(self) -> int:
        return self.shape[-2] * self.shape[-1]

    def support_of(self, channel: int, batch_index: Optional[int] = None) -> np.ndarray:
        """Ascending pixel indices of the support set of one channel."""
        order = self.order if batch_index is None else self.order[batch_index]
        if order.ndim != 2:
            raise ShapeMismatchError("support lookup", "batch_index for batched results", order.shape)
        return np.sort(order[channel, : self.n_used[channel]])

    @property
    def support(self) -> List[np.ndarray]:
        """Per-channel support sets of an unbatched result."""
        return [self.support_of(channel) for channel in range(self.num_channels)]

    def support_mask(self) -> np.ndarray:
        """Boolean (..., L, H, W) mask of the pixels in each support set."""
        positions = np.arange(self.num_pixels)
        in_support = positions < self.n_used[:, np.newaxis]
        in_support = np.broadcast_to(in_support, self.order.shape)
        mask = np.zeros(self.order.shape, dtype=bool)
        np.put_along_axis(mask, self.order, in_support, axis=-1)
        return mask.reshape(self.shape)


# =============================================================================
# Forward
# =============================================================================

def _check_features(features: np.ndarray) -> np.ndarray:
    features = np.asarray(features, dtype=DTYPE)
    if features.ndim not in (3, 4):
        raise ShapeMismatchError("pooling input rank", "3 (L, H, W) or 4 (B, L, H, W)", features.ndim)
    return features


def lena_forward(features: np.ndarray, etas: EtaVector) -> PoolResult:
    """
    Channel-wise top-N average with per-channel eta.

    Args:
        features: (L, H, W) or (B, L, H, W)
        etas: one fraction per channel

    Raises:
        ShapeMismatchError: channel count differs from len(etas)
    """
    features = _check_features(features)
    channels, height, width = features.shape[-3:]
    if len(etas) != channels:
        raise ShapeMismatchError("eta vector length", channels, len(etas))
    pixels = height * width

    flat = features.reshape(features.shape[:-2] + (pixels,))
    order = np.argsort(-flat, axis=-1, kind="stable")
    sorted_values = np.take_along_axis(flat, order, axis=-1)
    cumulative = np.cumsum(sorted_values, axis=-1)

    n_used = _counts(etas, pixels)
    last = np.broadcast_to((n_used - 1)[:, np.newaxis], cumulative.shape[:-1] + (1,))
    pooled = np.take_along_axis(cumulative, last, axis=-1)[..., 0] / n_used

    return PoolResult(
        pooled=pooled,
        n_used=n_used,
        order=order,
        sorted_values=sorted_values,
        shape=features.shape,
        etas=etas,
    )


def topn_average(feature: np.ndarray, eta: float) -> Tuple[float, np.ndarray]:
    """
    Mean of the N_eta largest values of one (H, W) map.

    Returns:
        (g, ascending row-major indices of the contributing pixels)
    """
    feature = np.asarray(feature, dtype=DTYPE)
    if feature.ndim != 2:
        raise ShapeMismatchError("feature map rank", 2, feature.ndim)
    result = lena_forward(feature[np.newaxis], EtaVector.full(1, eta))
    return float(result.pooled[0]), result.support_of(0)


def gap_forward(features: np.ndarray) -> PoolResult:
    """Global average pooling (eta = 1 on every channel)."""
    features = _check_features(features)
    return lena_forward(features, pooling_etas(PoolingMode.GAP, features.shape[-3]))


def gmp_forward(features: np.ndarray) -> PoolResult:
    """Global max pooling (eta = 0 on every channel)."""
    features = _check_features(features)
    return lena_forward(features, pooling_etas(PoolingMode.GMP, features.shape[-3]))


def gnap_forward(features: np.ndarray, fixed_etas: EtaVector) -> PoolResult:
    """Top-N average with fixed, non-trainable per-channel eta."""
    return lena_forward(features, fixed_etas)


def pool_forward(features: np.ndarray, mode: PoolingMode, etas: Optional[EtaVector] = None) -> PoolResult:
    """Dispatch on the pooling mode."""
    features = _check_features(features)
    return lena_forward(features, pooling_etas(mode, features.shape[-3], etas))


# =============================================================================
# Backward to features
# =============================================================================

def lena_backward_features(
    result: PoolResult,
    grad_pooled: np.ndarray,
    shape: Tuple[int, ...]
) -> np.ndarray:
    """
    d g_l / d f_l(w, h) = 1 / N_l on the support set, 0 elsewhere.

    Raises:
        StaleCacheError: `shape` is not the shape the result was computed on
        ShapeMismatchError: grad_pooled does not match the pooled values
    """
    if tuple(shape) != tuple(result.shape):
        raise StaleCacheError(f"pool result computed for {result.shape}, backward asked for {tuple(shape)}")
    grad_pooled = np.asarray(grad_pooled, dtype=DTYPE)
    if grad_pooled.shape != result.pooled.shape:
        raise ShapeMismatchError("grad_pooled shape", result.pooled.shape, grad_pooled.shape)

    in_support = np.arange(result.num_pixels) < result.n_used[:, np.newaxis]
    grad_sorted = np.where(in_support, (grad_pooled / result.n_used)[..., np.newaxis], 0.0)
    grad_flat = np.zeros(result.order.shape, dtype=DTYPE)
    np.put_along_axis(grad_flat, result.order, grad_sorted, axis=-1)
    return grad_flat.reshape(result.shape)


# =============================================================================
# Eta derivative (three-point parabola fit)
# =============================================================================

def _eta_trend(sorted_values: np.ndarray, n_used: np.ndarray, etas: EtaVector) -> np.ndarray:
    """
    Slope of g_l(eta) estimated from the top-(N-1), top-N and top-(N+1) averages.

    The derivative of the parabola through (eta-d, eta, eta+d) at eta is the
    central difference (g(N+1) - g(N-1)) / (2d) with d = 1/(WH-1). Near the ends
    of [0, 1] a one-sided difference is used instead. The result is <= 0 and is
    exactly 0 when the compared window holds a single repeated value.
    """
    pixels = sorted_values.shape[-1]
    if pixels == 1:
        return np.zeros(sorted_values.shape[:-1], dtype=DTYPE)

    scaled = etas.values * (pixels - 1)
    has_lower = scaled >= 1.0 - SNAP_TOLERANCE
    has_upper = scaled <= (pixels - 2) + SNAP_TOLERANCE
    low = np.where(has_lower, n_used - 1, n_used)
    high = np.where(has_upper, n_used + 1, n_used)
    neither = ~has_lower & ~has_upper
    low = np.where(neither, 1, low)
    high = np.where(neither, pixels, high)
    low = np.clip(low, 1, pixels)
    high = np.clip(high, low + 1, pixels)
    steps = high - low

    cumulative = np.cumsum(sorted_values, axis=-1)
    lead = cumulative.shape[:-1]
    low_sum = np.take_along_axis(cumulative, np.broadcast_to((low - 1)[:, np.newaxis], lead + (1,)), -1)[..., 0]
    high_sum = np.take_along_axis(cumulative, np.broadcast_to((high - 1)[:, np.newaxis], lead + (1,)), -1)[..., 0]
    low_mean = low_sum / low
    tail_mean = (high_sum - low_sum) / steps

    # g(high) - g(low) = (high - low) / high * (mean(tail) - g(low))
    difference = steps * (tail_mean - low_mean) / high
    trend = difference * (pixels - 1) / steps

    first = sorted_values[..., 0]
    last_used = np.take_along_axis(sorted_values, np.broadcast_to((high - 1)[:, np.newaxis], lead + (1,)), -1)[..., 0]
    flat_window = first == last_used
    return np.where(flat_window, 0.0, np.minimum(trend, 0.0))


def lena_eta_derivative(feature: np.ndarray, eta: float) -> float:
    """Estimated d g / d eta for one (H, W) map; 0 for a single-pixel map."""
    feature = np.asarray(feature, dtype=DTYPE)
    if feature.ndim != 2:
        raise ShapeMismatchError("feature map rank", 2, feature.ndim)
    result = lena_forward(feature[np.newaxis], EtaVector.full(1, eta))
    return float(eta_derivatives(result)[0])


def eta_derivatives(result: PoolResult) -> np.ndarray:
    """Per-channel (and per-image) eta trend for a forward result."""
    if result.etas is None:
        raise StaleCacheError("pool result carries no eta vector")
    return _eta_trend(result.sorted_values, result.n_used, result.etas)


def lena_eta_grad_from_result(result: PoolResult, grad_pooled: np.ndarray) -> np.ndarray:
    """
    dL/d eta_l = sum over images of dL/dg_l * dg_l/d eta_l.

    Returns:
        (L,) gradient, summed over any batch axis
    """
    grad_pooled = np.asarray(grad_pooled, dtype=DTYPE)
    if grad_pooled.shape != result.pooled.shape:
        raise ShapeMismatchError("grad_pooled shape", result.pooled.shape, grad_pooled.shape)
    per_image = grad_pooled * eta_derivatives(result)
    return per_image.reshape(-1, result.num_channels).sum(axis=0)


def lena_eta_grad(features: np.ndarray, etas: EtaVector, grad_pooled: np.ndarray) -> np.ndarray:
    """Chain rule through the eta trend estimate for a fresh forward pass."""
    return lena_eta_grad_from_result(lena_forward(features, etas), grad_pooled)
