"""
Dense-tensor substrate for the scoring branch.

Tensors are float64 numpy arrays in (batch, channel, height, width) row-major
layout. Every layer exposes an explicit forward and backward; there is no
autograd graph. All functions are pure: inputs are never modified.
"""
from dataclasses import dataclass
from typing import Tuple

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from viraliency.core.exceptions import NonFiniteError, ShapeMismatchError

DTYPE = np.float64
MAX_RANK = 4


# =============================================================================
# Validation helpers
# =============================================================================

def as_tensor(values, name: str = "tensor") -> np.ndarray:
    """
    Convert to a float64 array of rank <= 4 with positive extents.

    Raises:
        ShapeMismatchError: rank above 4 or an empty extent
    """
    array = np.asarray(values, dtype=DTYPE)
    if array.ndim > MAX_RANK:
        raise ShapeMismatchError(f"{name} rank", f"<= {MAX_RANK}", array.ndim)
    if any(extent < 1 for extent in array.shape):
        raise ShapeMismatchError(f"{name} extents", "all >= 1", array.shape)
    return array


def check_finite(array: np.ndarray, name: str, stage: str = "forward") -> np.ndarray:
    """Raise NonFiniteError if `array` holds NaN or Inf."""
    if not np.all(np.isfinite(array)):
        raise NonFiniteError(name, stage)
    return array


def _as_batch(x: np.ndarray, name: str) -> Tuple[np.ndarray, bool]:
    """Promote (C, H, W) to (1, C, H, W); report whether promotion happened."""
    if x.ndim == 3:
        return x[np.newaxis], True
    if x.ndim != 4:
        raise ShapeMismatchError(f"{name} rank", "3 or 4 (batch, channel, height, width)", x.ndim)
    return x, False


# =============================================================================
# Parameter containers
# =============================================================================

@dataclass(frozen=True)
class ConvParams:
    """Weights (outC, inC, kH, kW), bias (outC,), stride and zero padding."""
    weights: np.ndarray
    bias: np.ndarray
    stride: int = 1
    padding: int = 0

    def __post_init__(self) -> None:
        if self.weights.ndim != 4:
            raise ShapeMismatchError("conv weights rank", 4, self.weights.ndim)
        if self.bias.shape != (self.weights.shape[0],):
            raise ShapeMismatchError("conv bias shape", (self.weights.shape[0],), self.bias.shape)
        if self.stride < 1 or self.padding < 0:
            raise ShapeMismatchError("conv stride/padding", "stride >= 1, padding >= 0",
                                     (self.stride, self.padding))

    @property
    def out_channels(self) -> int:
        return self.weights.shape[0]

    @property
    def in_channels(self) -> int:
        return self.weights.shape[1]

    @property
    def kernel_size(self) -> Tuple[int, int]:
        return self.weights.shape[2], self.weights.shape[3]

    def output_size(self, height: int, width: int) -> Tuple[int, int]:
        """floor((in + 2*padding - kernel)/stride) + 1 per spatial axis."""
        kh, kw = self.kernel_size
        return (
            (height + 2 * self.padding - kh) // self.stride + 1,
            (width + 2 * self.padding - kw) // self.stride + 1,
        )


@dataclass(frozen=True)
class InnerProductParams:
    """Weights (K, L) and bias (K,)."""
    weights: np.ndarray
    bias: np.ndarray

    def __post_init__(self) -> None:
        if self.weights.ndim != 2:
            raise ShapeMismatchError("inner product weights rank", 2, self.weights.ndim)
        if self.bias.shape != (self.weights.shape[0],):
            raise ShapeMismatchError("inner product bias shape",
                                     (self.weights.shape[0],), self.bias.shape)

    @property
    def num_outputs(self) -> int:
        return self.weights.shape[0]

    @property
    def num_inputs(self) -> int:
        return self.weights.shape[1]


# =============================================================================
# Convolution (im2col)
# =============================================================================

def _im2col(x: np.ndarray, kh: int, kw: int, stride: int, padding: int) -> Tuple[np.ndarray, int, int]:
    """(N, C, H, W) -> columns (N*oh*ow, C*kh*kw)."""
    if padding:
        x = np.pad(x, ((0, 0), (0, 0), (padding, padding), (padding, padding)))
    windows = sliding_window_view(x, (kh, kw), axis=(2, 3))[:, :, ::stride, ::stride]
    n, c, oh, ow = windows.shape[:4]
    cols = windows.transpose(0, 2, 3, 1, 4, 5).reshape(n * oh * ow, c * kh * kw)
    return cols, oh, ow


def _check_conv_input(x: np.ndarray, params: ConvParams) -> None:
    if x.shape[1] != params.in_channels:
        raise ShapeMismatchError("conv input channels", params.in_channels, x.shape[1])
    oh, ow = params.output_size(x.shape[2], x.shape[3])
    if oh < 1 or ow < 1:
        raise ShapeMismatchError(
            "conv output size",
            ">= 1x1",
            f"{oh}x{ow} from input {x.shape[2]}x{x.shape[3]} kernel {params.kernel_size}"
        )


def conv2d_forward(x: np.ndarray, params: ConvParams) -> np.ndarray:
    """
    Cross-correlation with bias.

    Args:
        x: (N, C, H, W) or (C, H, W)
        params: ConvParams with inC == C

    Returns:
        (N, outC, oh, ow), or (outC, oh, ow) for an unbatched input
    """
    xb, promoted = _as_batch(np.asarray(x, dtype=DTYPE), "conv input")
    _check_conv_input(xb, params)
    kh, kw = params.kernel_size
    cols, oh, ow = _im2col(xb, kh, kw, params.stride, params.padding)
    out = cols @ params.weights.reshape(params.out_channels, -1).T + params.bias
    out = np.ascontiguousarray(
        out.reshape(xb.shape[0], oh, ow, params.out_channels).transpose(0, 3, 1, 2)
    )
    return out[0] if promoted else out


def conv2d_backward(
    x: np.ndarray,
    params: ConvParams,
    grad_out: np.ndarray
) -> Tuple[np.ndarray, ConvParams]:
    """
    Exact gradients of conv2d_forward.

    Returns:
        (grad_input shaped like x, ConvParams holding grad_weights and grad_bias)
    """
    xb, promoted = _as_batch(np.asarray(x, dtype=DTYPE), "conv input")
    _check_conv_input(xb, params)
    gb, _ = _as_batch(np.asarray(grad_out, dtype=DTYPE), "conv grad_out")
    n, c, height, width = xb.shape
    oh, ow = params.output_size(height, width)
    expected = (n, params.out_channels, oh, ow)
    if gb.shape != expected:
        raise ShapeMismatchError("conv grad_out shape", expected, gb.shape)

    kh, kw = params.kernel_size
    stride, pad = params.stride, params.padding
    cols, _, _ = _im2col(xb, kh, kw, stride, pad)
    g = gb.transpose(0, 2, 3, 1).reshape(n * oh * ow, params.out_channels)
    w_mat = params.weights.reshape(params.out_channels, -1)

    grad_w = (g.T @ cols).reshape(params.weights.shape)
    grad_b = g.sum(axis=0)

    grad_cols = (g @ w_mat).reshape(n, oh, ow, c, kh, kw)
    grad_padded = np.zeros((n, c, height + 2 * pad, width + 2 * pad), dtype=DTYPE)
    for i in range(kh):
        for j in range(kw):
            grad_padded[:, :, i:i + stride * oh:stride, j:j + stride * ow:stride] += (
                grad_cols[:, :, :, :, i, j].transpose(0, 3, 1, 2)
            )
    grad_x = grad_padded[:, :, pad:pad + height, pad:pad + width]
    grad_x = np.ascontiguousarray(grad_x)

    grads = ConvParams(weights=grad_w, bias=grad_b, stride=stride, padding=pad)
    return (grad_x[0] if promoted else grad_x), grads


# =============================================================================
# ReLU
# =============================================================================

def relu_forward(x: np.ndarray) -> np.ndarray:
    """Elementwise max(0, x)."""
    return np.maximum(np.asarray(x, dtype=DTYPE), 0.0)


def relu_backward(x: np.ndarray, grad_out: np.ndarray) -> np.ndarray:
    """Pass the gradient where x > 0; zero elsewhere (including x == 0)."""
    x = np.asarray(x, dtype=DTYPE)
    grad_out = np.asarray(grad_out, dtype=DTYPE)
    if x.shape != grad_out.shape:
        raise ShapeMismatchError("relu grad_out shape", x.shape, grad_out.shape)
    return np.where(x > 0.0, grad_out, 0.0)


# =============================================================================
# Inner product
# =============================================================================

def inner_product_forward(pooled: np.ndarray, params: InnerProductParams) -> np.ndarray:
    """
    q_k = sum_l w_kl * pooled_l + b_k.

    Args:
        pooled: (L,) or (B, L)
    """
    pooled = np.asarray(pooled, dtype=DTYPE)
    if pooled.shape[-1] != params.num_inputs:
        raise ShapeMismatchError("inner product input length", params.num_inputs, pooled.shape[-1])
    return pooled @ params.weights.T + params.bias


def inner_product_backward(
    pooled: np.ndarray,
    params: InnerProductParams,
    grad_out: np.ndarray
) -> Tuple[np.ndarray, InnerProductParams]:
    """
    Exact gradients of inner_product_forward.

    Returns:
        (grad_pooled shaped like pooled, InnerProductParams of weight/bias gradients)
    """
    pooled = np.asarray(pooled, dtype=DTYPE)
    grad_out = np.asarray(grad_out, dtype=DTYPE)
    expected = pooled.shape[:-1] + (params.num_outputs,)
    if pooled.shape[-1] != params.num_inputs:
        raise ShapeMismatchError("inner product input length", params.num_inputs, pooled.shape[-1])
    if grad_out.shape != expected:
        raise ShapeMismatchError("inner product grad_out shape", expected, grad_out.shape)

    grad_pooled = grad_out @ params.weights
    p2 = pooled.reshape(-1, params.num_inputs)
    g2 = grad_out.reshape(-1, params.num_outputs)
    grads = InnerProductParams(weights=g2.T @ p2, bias=g2.sum(axis=0))
    return grad_pooled, grads


# =============================================================================
# Bilinear resize (align-corners)
# =============================================================================

def _axis_coordinates(src: int, dst: int) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Lower index, upper index and fraction for align-corners sampling."""
    if dst == 1 or src == 1:
        positions = np.zeros(dst, dtype=DTYPE)
    else:
        positions = np.arange(dst, dtype=DTYPE) * (src - 1) / (dst - 1)
    lower = np.minimum(np.floor(positions).astype(np.intp), src - 1)
    upper = np.minimum(lower + 1, src - 1)
    return lower, upper, positions - lower


def bilinear_resize(
    values: np.ndarray,
    target_height: int,
    target_width: int
) -> np.ndarray:
    """
    Align-corners bilinear interpolation over the last two axes.

    Interpolates as a + f * (b - a), so constant maps are preserved exactly.
    Returns a copy when the target size equals the source size.
    """
    values = np.asarray(values, dtype=DTYPE)
    if values.ndim < 2:
        raise ShapeMismatchError("resize input rank", ">= 2", values.ndim)
    if target_height < 1 or target_width < 1:
        raise ShapeMismatchError("resize target size", ">= 1x1", (target_height, target_width))
    src_h, src_w = values.shape[-2:]
    if (src_h, src_w) == (target_height, target_width):
        return values.copy()

    y0, y1, fy = _axis_coordinates(src_h, target_height)
    x0, x1, fx = _axis_coordinates(src_w, target_width)

    top = values[..., y0, :]
    rows = top + fy[:, np.newaxis] * (values[..., y1, :] - top)
    left = rows[..., x0]
    return left + fx * (rows[..., x1] - left)
