"""Depth (center-only) and distance-e ring masks for atrous LSTM kernels.

Distance is Chebyshev: ring e holds the (2e+1)^2 - (2e-1)^2 = 8e sites with
max(|dr|, |dc|) == e.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError


@dataclass(frozen=True)
class RingSpec:
    e: int

    def __post_init__(self):
        if int(self.e) != self.e or self.e < 0:
            raise ConfigError(f"ring distance must be a non-negative integer, got {self.e}")

    @property
    def kernel_size(self) -> int:
        return 2 * self.e + 1

    @property
    def cardinality(self) -> int:
        return 8 * self.e if self.e else 1


def ring_offsets(e: int) -> list[tuple[int, int]]:
    RingSpec(e)
    if e == 0:
        return [(0, 0)]
    return [(dr, dc) for dr in range(-e, e + 1) for dc in range(-e, e + 1)
            if max(abs(dr), abs(dc)) == e]


def ring_mask(e: int) -> np.ndarray:
    spec = RingSpec(e)
    r = np.arange(spec.kernel_size) - e
    cheb = np.maximum(np.abs(r)[:, None], np.abs(r)[None, :])
    return cheb == e


def chebyshev_ball(center: tuple[int, int], radius: int, shape: tuple[int, int]) -> set:
    """Grid sites within Chebyshev `radius` of `center`, clipped to `shape`."""
    r0, c0 = center
    return {(r, c)
            for r in range(max(0, r0 - radius), min(shape[0], r0 + radius + 1))
            for c in range(max(0, c0 - radius), min(shape[1], c0 + radius + 1))}
