"""One diffusion layer: E spatial LSTMs and one depth LSTM.

Every cell of the layer reads the same E+1 hidden groups. Group e (the output
of spatial LSTM e in the previous layer) is always convolved with a ring-e
kernel and the depth group with a center-only kernel, so one layer moves
information at most E sites (Chebyshev) per step.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .conv_lstm import CellState, GateParams, check_variant, lstm_forward, lstm_step_backward
from .errors import ConfigError, UsageError
from .tensor_core import as_feature_map


def layer_rings(E: int) -> list[int]:
    """Ring of each input group: spatial groups 1..E, then the depth group."""
    return list(range(1, E + 1)) + [0]


@dataclass
class LayerState:
    spatial_hidden: list
    depth_hidden: np.ndarray
    spatial_memory: list
    depth_memory: np.ndarray

    def __post_init__(self):
        if len(self.spatial_hidden) != len(self.spatial_memory):
            raise ConfigError("spatial hidden and memory group counts differ")
        shape = np.shape(self.depth_hidden)
        for m in self.maps():
            if np.shape(m) != shape:
                raise ConfigError(f"layer state maps must share a shape, got {np.shape(m)} vs {shape}")

    @property
    def E(self) -> int:
        return len(self.spatial_hidden)

    @property
    def shape(self):
        return self.depth_hidden.shape

    def maps(self):
        return [*self.spatial_hidden, self.depth_hidden, *self.spatial_memory, self.depth_memory]

    def hidden_groups(self):
        return [*self.spatial_hidden, self.depth_hidden]

    @classmethod
    def zeros_like(cls, other: "LayerState") -> "LayerState":
        z = lambda: np.zeros(other.shape)
        return cls([z() for _ in range(other.E)], z(), [z() for _ in range(other.E)], z())


@dataclass
class DiffusionLayerParams:
    spatial: list  # E GateParams, never shared
    depth: GateParams

    def __post_init__(self):
        E = len(self.spatial)
        rings = layer_rings(E)
        for p in self.cells():
            if list(p.rings) != rings:
                raise ConfigError(f"every cell of an E={E} layer needs input rings {rings}, got {p.rings}")
        if len({id(p) for p in self.cells()}) != E + 1:
            raise ConfigError("spatial LSTM parameters must be distinct objects")

    @classmethod
    def zeros(cls, E: int, channels: int) -> "DiffusionLayerParams":
        rings = layer_rings(E)
        return cls([GateParams.zeros(rings, channels, channels) for _ in range(E)],
                   GateParams.zeros(rings, channels, channels))

    @property
    def E(self) -> int:
        return len(self.spatial)

    def cells(self) -> list:
        return [*self.spatial, self.depth]


@dataclass
class DiffusionContext:
    cells: list  # LstmContext per cell, spatial first
    E: int
    consumed: bool = False


def init_state(features, E: int) -> LayerState:
    """Replicate `features` into all E+1 hidden groups; memories start at zero."""
    f = as_feature_map(features, "features")
    if E < 0:
        raise ConfigError(f"E must be non-negative, got {E}")
    return LayerState([f.copy() for _ in range(E)], f.copy(),
                      [np.zeros_like(f) for _ in range(E)], np.zeros_like(f))


def diffusion_forward(state: LayerState, params: DiffusionLayerParams, variant: str = "paper"):
    """Run the E+1 cells of one layer. Returns (next LayerState, context)."""
    check_variant(variant)
    if state.E != params.E:
        raise ConfigError(f"state has E={state.E} but layer params have E={params.E}")
    inputs = list(zip(state.hidden_groups(), layer_rings(state.E)))
    memories = [*state.spatial_memory, state.depth_memory]
    outs, ctxs = [], []
    for p, mem in zip(params.cells(), memories):
        out, ctx = lstm_forward(inputs, CellState(np.zeros_like(mem), mem), p, variant)
        outs.append(out)
        ctxs.append(ctx)
    nxt = LayerState([o.hidden for o in outs[:-1]], outs[-1].hidden,
                     [o.memory for o in outs[:-1]], outs[-1].memory)
    return nxt, DiffusionContext(ctxs, state.E)


def diffusion_step(state: LayerState, params: DiffusionLayerParams, variant: str = "paper") -> LayerState:
    return diffusion_forward(state, params, variant)[0]


def diffusion_backward(ctx: DiffusionContext, grad_out: LayerState):
    """Backward of `diffusion_forward`.

    Returns (grad of the input LayerState, DiffusionLayerParams of grads).
    Gradients reaching a hidden group from the E+1 cells are summed.
    """
    if not isinstance(ctx, DiffusionContext):
        raise UsageError("diffusion_backward needs the context returned by diffusion_forward")
    if ctx.consumed:
        raise UsageError("stale diffusion context: backward already ran for this forward")
    if grad_out.E != ctx.E:
        raise ConfigError(f"gradient has E={grad_out.E}, layer has E={ctx.E}")
    ctx.consumed = True
    grad_h = [*grad_out.spatial_hidden, grad_out.depth_hidden]
    grad_m = [*grad_out.spatial_memory, grad_out.depth_memory]
    hidden_acc = None
    memories, cell_grads = [], []
    for cctx, gh, gm in zip(ctx.cells, grad_h, grad_m):
        g_inputs, g_prev, g_params = lstm_step_backward(cctx, gh, gm)
        if hidden_acc is None:
            hidden_acc = g_inputs
        else:
            for acc, g in zip(hidden_acc, g_inputs):
                acc += g
        memories.append(g_prev.memory)
        cell_grads.append(g_params)
    grad_in = LayerState(hidden_acc[:-1], hidden_acc[-1], memories[:-1], memories[-1])
    return grad_in, DiffusionLayerParams(cell_grads[:-1], cell_grads[-1])
