"""Dense tensor containers and the reference convolution kernel.

Conventions used throughout the package:

* An input (or output) tensor is a 3-D float64 ndarray laid out
  channels x height x width, C-contiguous, so lexicographic order is
  channel-outermost / width-innermost.
* A filter tensor is a 4-D float64 ndarray laid out
  out_channels x in_channels x kernel_h x kernel_w.
* ``vec`` / ``reshape`` are exact inverses under that memory order.

All functions are pure: they never mutate their arguments.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ParameterError, ShapeError


@dataclass(frozen=True)
class ConvParams:
    """Stride and zero-padding of one convolution."""

    stride: int = 1
    padding: int = 0

    def __post_init__(self):
        if self.stride < 1:
            raise ParameterError(f"stride must be >= 1, got {self.stride}")
        if self.padding < 0:
            raise ParameterError(f"padding must be >= 0, got {self.padding}")


def as_input_tensor(data) -> np.ndarray:
    """Validate and return a C x H x W float64 tensor.

    Rejects wrong rank, empty axes, and non-finite entries.
    """
    arr = np.ascontiguousarray(data, dtype=np.float64)
    if arr.ndim != 3:
        raise ShapeError(f"input tensor must be 3-D (C,H,W), got shape {arr.shape}")
    if min(arr.shape) < 1:
        raise ShapeError(f"input tensor axes must be positive, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ShapeError("input tensor contains NaN or Inf entries")
    return arr


def as_filter_tensor(data) -> np.ndarray:
    """Validate and return an N x C x K_H x K_W float64 tensor."""
    arr = np.ascontiguousarray(data, dtype=np.float64)
    if arr.ndim != 4:
        raise ShapeError(f"filter tensor must be 4-D (N,C,K_H,K_W), got shape {arr.shape}")
    if min(arr.shape) < 1:
        raise ShapeError(f"filter tensor axes must be positive, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ShapeError("filter tensor contains NaN or Inf entries")
    return arr


def output_dims(h: int, w: int, params: ConvParams, kernel_h: int, kernel_w: int) -> tuple[int, int]:
    """Output height and width of a strided, padded convolution.

    H' = floor((H + 2p - K_H) / s) + 1, and the same for the width.
    """
    hp = h + 2 * params.padding
    wp = w + 2 * params.padding
    if hp < kernel_h or wp < kernel_w:
        raise ShapeError(
            f"kernel {kernel_h}x{kernel_w} larger than padded input {hp}x{wp}"
        )
    return (hp - kernel_h) // params.stride + 1, (wp - kernel_w) // params.stride + 1


def pad_input(x: np.ndarray, padding: int) -> np.ndarray:
    """Materialize zero padding around the spatial dims of a C x H x W tensor."""
    if padding == 0:
        return x
    return np.pad(x, ((0, 0), (padding, padding), (padding, padding)))


def conv3d_ref(x: np.ndarray, filt: np.ndarray, params: ConvParams) -> np.ndarray:
    """Direct convolution of a C x H x W input with an N x C x K_H x K_W filter.

    Accumulates kernel offsets in a fixed (channel, row, column) order so
    that convolving a spatial slice of the input reproduces the matching
    output rows bit for bit; the distributed merge relies on this.
    """
    x = as_input_tensor(x)
    filt = as_filter_tensor(filt)
    n_out, c_f, kernel_h, kernel_w = filt.shape
    c, h, w = x.shape
    if c != c_f:
        raise ShapeError(f"input has {c} channels but filter expects {c_f}")
    out_h, out_w = output_dims(h, w, params, kernel_h, kernel_w)
    s = params.stride
    xp = pad_input(x, params.padding)

    out = np.zeros((n_out, out_h, out_w))
    for ci in range(c):
        for i in range(kernel_h):
            for j in range(kernel_w):
                window = xp[ci, i : i + s * out_h : s, j : j + s * out_w : s]
                out += filt[:, ci, i, j][:, None, None] * window[None, :, :]
    return out


def vec(t: np.ndarray) -> np.ndarray:
    """Flatten a tensor to a vector in lexicographic (C-contiguous) order."""
    return np.ascontiguousarray(t).reshape(-1)


def reshape(v: np.ndarray, dims: tuple[int, int, int]) -> np.ndarray:
    """Inverse of ``vec``: rebuild an N x H x W tensor from a flat vector."""
    v = np.asarray(v, dtype=np.float64)
    expected = int(np.prod(dims))
    if v.size != expected:
        raise ShapeError(f"vector of length {v.size} cannot fill dims {tuple(dims)}")
    return v.reshape(dims)


def concat_axis(parts, axis: int) -> np.ndarray:
    """Concatenate 3-D tensors along the channel (0) or height (1) axis."""
    if axis not in (0, 1):
        raise ParameterError(f"axis must be 0 or 1, got {axis}")
    if not parts:
        raise ShapeError("cannot concatenate an empty list")
    ref = parts[0].shape
    for p in parts[1:]:
        other = tuple(d for a, d in enumerate(p.shape) if a != axis)
        mine = tuple(d for a, d in enumerate(ref) if a != axis)
        if p.ndim != 3 or other != mine:
            raise ShapeError(f"non-axis dims differ: {p.shape} vs {ref}")
    return np.concatenate(parts, axis=axis)


def mse(a: np.ndarray, b: np.ndarray) -> float:
    """Mean squared entrywise difference of two same-shaped tensors."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ShapeError(f"shape mismatch {a.shape} vs {b.shape}")
    return float(np.mean((a - b) ** 2))
