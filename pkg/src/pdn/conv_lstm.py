"""Convolutional LSTM cell over masked ring kernels, with manual backward.

Gate pre-activations are a sum over input groups of masked convolutions plus
one bias per gate. The four gate kernels of one input group are stored fused
along the output-channel axis in gate order (i, f, c, o); `GateParams.gate_kernel`
returns the per-gate view.

variant="paper" uses sigmoid for the candidate gate and tanh for the output
gate; variant="standard" uses the usual tanh candidate / sigmoid output.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import ConfigError, UsageError
from .ring_kernels import RingSpec, ring_mask
from .tensor_core import (MaskedKernel, as_feature_map, conv2d_masked,
                          conv2d_masked_backward, pointwise, pointwise_backward)

GATES = ("i", "f", "c", "o")
VARIANTS = ("paper", "standard")

# activation per gate
_ACTIVATIONS = {
    "paper": {"i": "sigmoid", "f": "sigmoid", "c": "sigmoid", "o": "tanh"},
    "standard": {"i": "sigmoid", "f": "sigmoid", "c": "tanh", "o": "sigmoid"},
}


def check_variant(variant: str) -> str:
    if variant not in VARIANTS:
        raise ConfigError(f"unknown LSTM variant {variant!r}; expected one of {VARIANTS}")
    return variant


@dataclass
class CellState:
    hidden: np.ndarray
    memory: np.ndarray

    def __post_init__(self):
        self.hidden = as_feature_map(self.hidden, "hidden")
        self.memory = as_feature_map(self.memory, "memory")
        if self.hidden.shape != self.memory.shape:
            raise ConfigError(f"hidden {self.hidden.shape} and memory {self.memory.shape} differ")

    @classmethod
    def zeros(cls, rows, cols, channels):
        return cls(np.zeros((rows, cols, channels)), np.zeros((rows, cols, channels)))


@dataclass
class GateParams:
    """Kernels (one per input group, each producing all four gates) and biases."""

    rings: list[int]
    kernels: list[MaskedKernel]
    bias: np.ndarray

    def __post_init__(self):
        self.bias = np.asarray(self.bias, dtype=np.float64)
        if len(self.rings) != len(self.kernels):
            raise ConfigError("one kernel per input group is required")
        if self.bias.ndim != 1 or self.bias.size % 4:
            raise ConfigError(f"bias must hold 4 gates, got shape {self.bias.shape}")
        for e, k in zip(self.rings, self.kernels):
            if k.out_channels != self.bias.size:
                raise ConfigError("all kernels must emit 4*D channels")
            if k.mask.shape != ring_mask(e).shape or not np.array_equal(k.mask, ring_mask(e)):
                raise ConfigError(f"kernel mask does not match ring {e}")

    @classmethod
    def zeros(cls, rings: Sequence[int], in_channels, channels) -> "GateParams":
        rings = list(rings)
        kernels = [MaskedKernel.zeros(ring_mask(e), in_channels, 4 * channels) for e in rings]
        return cls(rings, kernels, np.zeros(4 * channels))

    @property
    def channels(self) -> int:
        return self.bias.size // 4

    def gate_kernel(self, gate: str, group: int) -> np.ndarray:
        """View of the weights of `gate` for input group `group`, shape (k, k, Din, D)."""
        g = GATES.index(gate)
        d = self.channels
        return self.kernels[group].weights[..., g * d:(g + 1) * d]

    def gate_bias(self, gate: str) -> np.ndarray:
        g = GATES.index(gate)
        d = self.channels
        return self.bias[g * d:(g + 1) * d]

    def copy(self) -> "GateParams":
        return GateParams(list(self.rings), [k.copy() for k in self.kernels], self.bias.copy())


@dataclass
class LstmContext:
    inputs: list
    prev: CellState
    params: GateParams
    variant: str
    pre: np.ndarray
    gates: dict
    memory: np.ndarray
    tanh_memory: np.ndarray
    consumed: bool = field(default=False)


def _normalize_inputs(inputs, params: GateParams):
    if len(inputs) != len(params.kernels):
        raise ConfigError(f"{len(inputs)} input groups but {len(params.kernels)} kernels")
    maps = []
    for j, (x, ring) in enumerate(inputs):
        e = ring.e if isinstance(ring, RingSpec) else int(ring)
        if e != params.rings[j]:
            raise ConfigError(f"input group {j} is ring {e} but its kernel is ring {params.rings[j]}")
        maps.append(as_feature_map(x, f"input group {j}"))
    return maps


def lstm_forward(inputs, prev: CellState, params: GateParams, variant: str = "paper"):
    """One LSTM update; returns (CellState, context for `lstm_step_backward`).

    `inputs` is a list of (feature map, ring) pairs. Recurrent hidden maps
    enter as ordinary input groups, so only `prev.memory` is read from `prev`.
    """
    check_variant(variant)
    maps = _normalize_inputs(inputs, params)
    shape = prev.hidden.shape
    d = params.channels
    if shape[2] != d:
        raise ConfigError(f"state has {shape[2]} channels, params expect {d}")
    for x in maps:
        if x.shape[:2] != shape[:2]:
            raise ConfigError(f"input spatial dims {x.shape[:2]} != state dims {shape[:2]}")

    pre = np.zeros(shape[:2] + (4 * d,))
    for x, kernel in zip(maps, params.kernels):
        pre += conv2d_masked(x, kernel, np.zeros(4 * d))
    pre += params.bias

    acts = _ACTIVATIONS[variant]
    gates = {g: pointwise(acts[g], pre[..., k * d:(k + 1) * d]) for k, g in enumerate(GATES)}
    memory = pointwise("add", pointwise("hadamard", gates["f"], prev.memory),
                       pointwise("hadamard", gates["i"], gates["c"]))
    tanh_memory = pointwise("tanh", memory)
    hidden = pointwise("hadamard", gates["o"], tanh_memory)
    ctx = LstmContext(maps, prev, params, variant, pre, gates, memory, tanh_memory)
    return CellState(hidden, memory), ctx


def lstm_step(inputs, prev: CellState, params: GateParams, variant: str = "paper") -> CellState:
    return lstm_forward(inputs, prev, params, variant)[0]


def lstm_step_backward(ctx: LstmContext, grad_hidden, grad_memory):
    """Backward of one LSTM update.

    Returns (grad per input group, grad of prev CellState, GateParams of grads).
    A context can be consumed once.
    """
    if not isinstance(ctx, LstmContext):
        raise UsageError("lstm_step_backward needs the context returned by lstm_forward")
    if ctx.consumed:
        raise UsageError("stale LSTM context: backward already ran for this forward")
    ctx.consumed = True

    d = ctx.params.channels
    gates = ctx.gates
    acts = _ACTIVATIONS[ctx.variant]
    grad_hidden = np.asarray(grad_hidden, dtype=np.float64)
    grad_memory = np.asarray(grad_memory, dtype=np.float64)

    g_o, g_tanh = pointwise_backward("hadamard", grad_hidden, gates["o"], ctx.tanh_memory)
    g_mem = grad_memory + pointwise_backward("tanh", g_tanh, ctx.memory, out=ctx.tanh_memory)
    g_fm, g_ic = pointwise_backward("add", g_mem, g_mem, g_mem)
    g_f, g_prev_mem = pointwise_backward("hadamard", g_fm, gates["f"], ctx.prev.memory)
    g_i, g_c = pointwise_backward("hadamard", g_ic, gates["i"], gates["c"])
    gate_grads = {"i": g_i, "f": g_f, "c": g_c, "o": g_o}

    g_pre = np.empty_like(ctx.pre)
    for k, g in enumerate(GATES):
        sl = slice(k * d, (k + 1) * d)
        g_pre[..., sl] = pointwise_backward(acts[g], gate_grads[g], ctx.pre[..., sl], out=gates[g])

    grad_inputs, grad_kernels = [], []
    for x, kernel in zip(ctx.inputs, ctx.params.kernels):
        g_x, g_w, _ = conv2d_masked_backward(x, kernel, g_pre)
        grad_inputs.append(g_x)
        grad_kernels.append(MaskedKernel(g_w, kernel.mask))
    grad_params = GateParams(list(ctx.params.rings), grad_kernels, g_pre.sum(axis=(0, 1)))
    grad_prev = CellState(np.zeros_like(ctx.prev.hidden), g_prev_mem)
    return grad_inputs, grad_prev, grad_params
