"""Dense rank-3 feature maps, masked same-size convolution and pointwise ops.

Feature maps are float64 arrays laid out as (rows, cols, channels). Every
forward op has an explicit backward, and `finite_difference_jacobian` is the
independent oracle the backward passes are checked against.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import ConfigError, OracleError

DTYPE = np.float64


def as_feature_map(x, name: str = "feature map") -> np.ndarray:
    arr = np.asarray(x, dtype=DTYPE)
    if arr.ndim != 3 or min(arr.shape) < 1:
        raise ConfigError(f"{name} must have shape (rows, cols, channels), got {arr.shape}")
    return arr


def check_finite(x: np.ndarray, what: str) -> None:
    if not np.all(np.isfinite(x)):
        bad = np.argwhere(~np.isfinite(x))[0]
        raise OracleError(f"non-finite value in {what} at index {tuple(int(i) for i in bad)}",
                          tuple(int(i) for i in bad))


@dataclass
class MaskedKernel:
    """Convolution kernel whose off-mask weights are structurally zero.

    `weights` has shape (k, k, in_channels, out_channels); `mask` is a (k, k)
    boolean array shared by every channel pair.
    """

    weights: np.ndarray
    mask: np.ndarray

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=DTYPE)
        self.mask = np.array(self.mask, dtype=bool)
        if self.weights.ndim != 4:
            raise ConfigError(f"kernel weights must be rank 4, got shape {self.weights.shape}")
        k = self.weights.shape[0]
        if self.weights.shape[1] != k:
            raise ConfigError(f"kernel must be square, got {self.weights.shape[:2]}")
        if k % 2 == 0:
            raise ConfigError(f"kernel size must be odd, got {k}")
        if self.mask.shape != (k, k):
            raise ConfigError(f"mask shape {self.mask.shape} does not match kernel size {k}")
        self.mask.setflags(write=False)
        self.enforce_mask()

    @classmethod
    def zeros(cls, mask, in_channels: int, out_channels: int) -> "MaskedKernel":
        mask = np.asarray(mask, dtype=bool)
        k = mask.shape[0]
        return cls(np.zeros((k, k, in_channels, out_channels)), mask)

    @property
    def size(self) -> int:
        return self.weights.shape[0]

    @property
    def in_channels(self) -> int:
        return self.weights.shape[2]

    @property
    def out_channels(self) -> int:
        return self.weights.shape[3]

    @property
    def offsets(self) -> np.ndarray:
        """Kernel positions (row, col) where the mask is true, row-major."""
        return np.argwhere(self.mask)

    def enforce_mask(self) -> None:
        self.weights[~self.mask] = 0.0

    def copy(self) -> "MaskedKernel":
        return MaskedKernel(self.weights.copy(), self.mask)


def _gather(x: np.ndarray, kernel: MaskedKernel) -> np.ndarray:
    # (rows, cols, n_on_mask, in_channels): the input value each on-mask tap sees
    rows, cols, _ = x.shape
    p = kernel.size // 2
    xp = np.pad(x, ((p, p), (p, p), (0, 0)))
    offs = kernel.offsets
    if len(offs) == 0:
        return np.zeros((rows, cols, 0, x.shape[2]))
    return np.stack([xp[a:a + rows, b:b + cols] for a, b in offs], axis=2)


def _check_conv(x: np.ndarray, kernel: MaskedKernel) -> None:
    if kernel.size % 2 == 0:
        raise ConfigError(f"kernel size must be odd, got {kernel.size}")
    if x.shape[2] != kernel.in_channels:
        raise ConfigError(
            f"input has {x.shape[2]} channels but kernel expects {kernel.in_channels}")


def conv2d_masked(x, kernel: MaskedKernel, bias) -> np.ndarray:
    """Same-size 2-D cross-correlation with zero padding of width (k-1)/2."""
    x = as_feature_map(x, "input")
    _check_conv(x, kernel)
    bias = np.asarray(bias, dtype=DTYPE)
    if bias.shape != (kernel.out_channels,):
        raise ConfigError(f"bias shape {bias.shape} != ({kernel.out_channels},)")
    offs = kernel.offsets
    out = np.broadcast_to(bias, x.shape[:2] + (kernel.out_channels,)).copy()
    if len(offs):
        taps = kernel.weights[offs[:, 0], offs[:, 1]]
        out += np.tensordot(_gather(x, kernel), taps, axes=([2, 3], [0, 1]))
    return out


def conv2d_masked_backward(x, kernel: MaskedKernel, grad_out):
    """Return (grad_input, grad_weights, grad_bias) for `conv2d_masked`.

    grad_weights is exactly zero at off-mask positions.
    """
    x = as_feature_map(x, "input")
    _check_conv(x, kernel)
    grad_out = np.asarray(grad_out, dtype=DTYPE)
    if grad_out.shape != x.shape[:2] + (kernel.out_channels,):
        raise ConfigError(f"grad_out shape {grad_out.shape} does not match output "
                          f"{x.shape[:2] + (kernel.out_channels,)}")
    rows, cols, _ = x.shape
    p = kernel.size // 2
    offs = kernel.offsets
    grad_w = np.zeros_like(kernel.weights)
    grad_b = grad_out.sum(axis=(0, 1))
    grad_xp = np.zeros((rows + 2 * p, cols + 2 * p, x.shape[2]))
    if len(offs):
        taps = kernel.weights[offs[:, 0], offs[:, 1]]
        grad_w[offs[:, 0], offs[:, 1]] = np.tensordot(
            _gather(x, kernel), grad_out, axes=([0, 1], [0, 1]))
        # (rows, cols, n, in)
        grad_cols = np.tensordot(grad_out, taps, axes=([2], [2]))
        for j, (a, b) in enumerate(offs):
            grad_xp[a:a + rows, b:b + cols] += grad_cols[:, :, j]
    return grad_xp[p:p + rows, p:p + cols], grad_w, grad_b


def sigmoid(x):
    # split by sign so exp never overflows
    x = np.asarray(x, dtype=DTYPE)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


POINTWISE_KINDS = ("sigmoid", "tanh", "hadamard", "add")


def _check_pointwise(kind, a, b):
    if kind not in POINTWISE_KINDS:
        raise ConfigError(f"unknown pointwise op {kind!r}")
    binary = kind in ("hadamard", "add")
    if binary and b is None:
        raise ConfigError(f"{kind} needs two operands")
    if binary and np.shape(a) != np.shape(b):
        raise ConfigError(f"shape mismatch for {kind}: {np.shape(a)} vs {np.shape(b)}")


def pointwise(kind: str, a, b=None) -> np.ndarray:
    _check_pointwise(kind, a, b)
    if kind == "sigmoid":
        return sigmoid(a)
    if kind == "tanh":
        return np.tanh(a)
    if kind == "hadamard":
        return np.multiply(a, b, dtype=DTYPE)
    return np.add(a, b, dtype=DTYPE)


def pointwise_backward(kind: str, grad, a, b=None, out: Optional[np.ndarray] = None):
    """Gradient of `pointwise` w.r.t. its operands.

    Unary ops return one array, binary ops a pair. `out` may pass the cached
    forward value of sigmoid/tanh to skip recomputing it.
    """
    _check_pointwise(kind, a, b)
    grad = np.asarray(grad, dtype=DTYPE)
    if kind == "sigmoid":
        s = sigmoid(a) if out is None else out
        return grad * s * (1.0 - s)
    if kind == "tanh":
        t = np.tanh(a) if out is None else out
        return grad * (1.0 - t * t)
    if kind == "hadamard":
        return grad * b, grad * a
    return grad.copy(), grad.copy()


def finite_difference_jacobian(function: Callable[[np.ndarray], float], point,
                               eps: float = 1e-5, indices=None) -> np.ndarray:
    """Central-difference gradient of a scalar function at `point`.

    Only the flat `indices` given are probed (all by default); the remaining
    entries of the returned gradient are zero. `point` is not modified.
    """
    if not eps > 0:
        raise ConfigError(f"eps must be positive, got {eps}")
    x = np.array(point, dtype=DTYPE)
    flat = x.reshape(-1)
    grad = np.zeros_like(flat)
    if indices is None:
        indices = range(flat.size)
    for i in indices:
        orig = flat[i]
        flat[i] = orig + eps
        hi = float(function(x))
        flat[i] = orig - eps
        lo = float(function(x))
        flat[i] = orig
        if not (np.isfinite(hi) and np.isfinite(lo)):
            idx = np.unravel_index(i, x.shape)
            raise OracleError(f"function is non-finite near index {tuple(int(j) for j in idx)}",
                              tuple(int(j) for j in idx))
        grad[i] = (hi - lo) / (2.0 * eps)
    return grad.reshape(x.shape)


def relative_error(analytic, numeric) -> np.ndarray:
    a = np.asarray(analytic, dtype=DTYPE)
    b = np.asarray(numeric, dtype=DTYPE)
    return np.abs(a - b) / np.maximum(np.maximum(np.abs(a), np.abs(b)), 1e-8)
