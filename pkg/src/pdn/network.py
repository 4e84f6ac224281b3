"""Backbone stub, stacked diffusion layers, per-layer score heads and losses."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .conv_lstm import check_variant
from .diffusion_layer import (DiffusionLayerParams, LayerState, diffusion_backward,
                              diffusion_forward, init_state)
from .errors import ConfigError, DataError, UsageError
from .tensor_core import (MaskedKernel, as_feature_map, conv2d_masked,
                          conv2d_masked_backward)

IGNORE_LABEL = 255


@dataclass
class NetworkConfig:
    image_rows: int = 17
    image_cols: int = 17
    num_classes: int = 3
    channels: int = 8
    rings: int = 2
    layers: int = 5
    variant: str = "paper"
    backbone: list = field(default_factory=lambda: [(8, 3)])
    seed: int = 0
    in_channels: int = 3

    def __post_init__(self):
        self.backbone = [tuple(int(v) for v in s) for s in self.backbone]
        self.validate()

    def validate(self):
        if self.layers < 1:
            raise ConfigError(f"need at least one diffusion layer, got T={self.layers}")
        if self.rings < 0:
            raise ConfigError(f"E must be non-negative, got {self.rings}")
        if self.num_classes < 2:
            raise ConfigError(f"need K >= 2 classes, got {self.num_classes}")
        if self.channels < 1 or self.image_rows < 1 or self.image_cols < 1:
            raise ConfigError("channels and image dims must be positive")
        check_variant(self.variant)
        if not self.backbone:
            raise ConfigError("backbone needs at least one stage")
        for out_ch, k in self.backbone:
            if k < 1 or k % 2 == 0:
                raise ConfigError(f"backbone kernel sizes must be odd, got {k}")
            if out_ch < 1:
                raise ConfigError(f"backbone stage channels must be positive, got {out_ch}")
        if self.backbone[-1][0] != self.channels:
            raise ConfigError(f"last backbone stage emits {self.backbone[-1][0]} channels, "
                              f"diffusion layers expect D={self.channels}")

    @property
    def backbone_radius(self) -> int:
        return sum((k - 1) // 2 for _, k in self.backbone)

    def influence_radius(self, t: int | None = None) -> int:
        """Chebyshev reach from image pixels to the logits of layer t (default: last)."""
        t = self.layers if t is None else t
        return self.backbone_radius + t * self.rings


@dataclass
class NetworkParams:
    backbone: list  # [(MaskedKernel, bias)]
    layers: list  # [DiffusionLayerParams]
    heads: list  # [(MaskedKernel 1x1, bias)]

    def tensors(self):
        """Ordered (name, array, mask or None, lr group) for every learnable array.

        Arrays are live references; masks are (k, k) kernel masks.
        """
        out = []
        for i, (k, b) in enumerate(self.backbone):
            out.append((f"backbone.{i}.weight", k.weights, k.mask, "backbone"))
            out.append((f"backbone.{i}.bias", b, None, "backbone"))
        for t, layer in enumerate(self.layers):
            names = [f"layer.{t}.spatial.{e + 1}" for e in range(layer.E)] + [f"layer.{t}.depth"]
            for name, cell in zip(names, layer.cells()):
                for j, (ring, k) in enumerate(zip(cell.rings, cell.kernels)):
                    out.append((f"{name}.ring{ring}.weight", k.weights, k.mask, "new"))
                out.append((f"{name}.bias", cell.bias, None, "new"))
        for t, (k, b) in enumerate(self.heads):
            out.append((f"head.{t}.weight", k.weights, k.mask, "new"))
            out.append((f"head.{t}.bias", b, None, "new"))
        return out

    def arrays(self) -> dict:
        return {name: arr for name, arr, _, _ in self.tensors()}

    def enforce_masks(self) -> None:
        for _, arr, mask, _ in self.tensors():
            if mask is not None:
                arr[~mask] = 0.0

    def count(self) -> int:
        """Number of learnable scalars (off-mask weights excluded)."""
        n = 0
        for _, arr, mask, _ in self.tensors():
            n += arr.size if mask is None else int(mask.sum()) * arr.shape[2] * arr.shape[3]
        return n

    @classmethod
    def zeros(cls, config: NetworkConfig) -> "NetworkParams":
        backbone = []
        cin = config.in_channels
        for out_ch, k in config.backbone:
            backbone.append((MaskedKernel.zeros(np.ones((k, k), bool), cin, out_ch), np.zeros(out_ch)))
            cin = out_ch
        layers = [DiffusionLayerParams.zeros(config.rings, config.channels) for _ in range(config.layers)]
        heads = [(MaskedKernel.zeros(np.ones((1, 1), bool), config.channels, config.num_classes),
                  np.zeros(config.num_classes)) for _ in range(config.layers)]
        return cls(backbone, layers, heads)

    def copy(self) -> "NetworkParams":
        new = NetworkParams.zeros_like(self)
        for (_, dst, _, _), (_, src, _, _) in zip(new.tensors(), self.tensors()):
            dst[...] = src
        return new

    @classmethod
    def zeros_like(cls, other: "NetworkParams") -> "NetworkParams":
        backbone = [(MaskedKernel(np.zeros_like(k.weights), k.mask), np.zeros_like(b))
                    for k, b in other.backbone]
        layers = [DiffusionLayerParams([c.copy() for c in l.spatial], l.depth.copy()) for l in other.layers]
        heads = [(MaskedKernel(np.zeros_like(k.weights), k.mask), np.zeros_like(b))
                 for k, b in other.heads]
        new = cls(backbone, layers, heads)
        for _, arr, _, _ in new.tensors():
            arr[...] = 0.0
        return new

    def check_config(self, config: NetworkConfig) -> None:
        ref = NetworkParams.zeros(config).tensors()
        mine = self.tensors()
        if [n for n, *_ in ref] != [n for n, *_ in mine]:
            raise ConfigError("parameter layout does not match the network config")
        for (name, a, _, _), (_, b, _, _) in zip(ref, mine):
            if a.shape != b.shape:
                raise ConfigError(f"{name}: shape {b.shape} does not match config shape {a.shape}")


def backbone_forward(image, stages):
    """Conv stages with ReLU between them (none after the last).

    Returns (features, context) where context holds each stage's input and
    pre-activation.
    """
    x = as_feature_map(image, "image")
    ctx = []
    for i, (kernel, bias) in enumerate(stages):
        if x.shape[2] != kernel.in_channels:
            raise ConfigError(f"backbone stage {i} expects {kernel.in_channels} channels, got {x.shape[2]}")
        pre = conv2d_masked(x, kernel, bias)
        ctx.append((x, pre))
        x = np.maximum(pre, 0.0) if i < len(stages) - 1 else pre
    return x, ctx


def backbone_backward(ctx, stages, grad_features):
    """Returns (grad_image, [(grad_weights, grad_bias)] per stage)."""
    grads = [None] * len(stages)
    g = grad_features
    for i in reversed(range(len(stages))):
        x, pre = ctx[i]
        if i < len(stages) - 1:
            g = g * (pre > 0)
        g, gw, gb = conv2d_masked_backward(x, stages[i][0], g)
        grads[i] = (gw, gb)
    return g, grads


def diffusion_stack_forward(features, layers, variant: str):
    """Initialise from `features` and run all layers.

    Returns (list of output LayerStates, list of layer contexts).
    """
    E = layers[0].E
    state = init_state(features, E)
    states, ctxs = [], []
    for p in layers:
        state, ctx = diffusion_forward(state, p, variant)
        states.append(state)
        ctxs.append(ctx)
    return states, ctxs


def diffusion_stack_backward(ctxs, states, grad_depth_hidden):
    """Backward through the stack given gradients on each layer's depth hidden map.

    `grad_depth_hidden[t]` may be None. Returns (grad of the stack input
    features, list of per-layer DiffusionLayerParams grads).
    """
    T = len(ctxs)
    grad_state = LayerState.zeros_like(states[-1])
    layer_grads = [None] * T
    for t in reversed(range(T)):
        if grad_depth_hidden[t] is not None:
            grad_state.depth_hidden = grad_state.depth_hidden + grad_depth_hidden[t]
        grad_state, layer_grads[t] = diffusion_backward(ctxs[t], grad_state)
    # every hidden group was a copy of the features; memories started as constants
    grad_features = sum(grad_state.hidden_groups())
    return grad_features, layer_grads


@dataclass
class NetworkContext:
    image: np.ndarray
    backbone: list
    features: np.ndarray
    states: list
    layers: list
    params: NetworkParams
    consumed: bool = False


def network_forward(image, params: NetworkParams, variant: str = "paper"):
    """Returns (list of T score maps of shape (rows, cols, K), context)."""
    check_variant(variant)
    features, bctx = backbone_forward(image, params.backbone)
    if not params.layers:
        raise ConfigError("network has no diffusion layers")
    states, lctx = diffusion_stack_forward(features, params.layers, variant)
    scores = [conv2d_masked(s.depth_hidden, k, b) for s, (k, b) in zip(states, params.heads)]
    return scores, NetworkContext(np.asarray(image, float), bctx, features, states, lctx, params)


def network_backward(ctx: NetworkContext, grad_scores):
    """Returns (NetworkParams of grads, grad w.r.t. the image)."""
    if ctx.consumed:
        raise UsageError("stale network context: backward already ran for this forward")
    ctx.consumed = True
    params = ctx.params
    grads = NetworkParams.zeros_like(params)
    grad_depth = []
    for t, (s, (k, b), g) in enumerate(zip(ctx.states, params.heads, grad_scores)):
        gx, gw, gb = conv2d_masked_backward(s.depth_hidden, k, g)
        grads.heads[t][0].weights[...] = gw
        grads.heads[t][1][...] = gb
        grad_depth.append(gx)
    grad_features, layer_grads = diffusion_stack_backward(ctx.layers, ctx.states, grad_depth)
    grads.layers = layer_grads
    grad_image, bgrads = backbone_backward(ctx.backbone, params.backbone, grad_features)
    for (k, b), (gw, gb) in zip(grads.backbone, bgrads):
        k.weights[...] = gw
        b[...] = gb
    return grads, grad_image


def softmax(scores) -> np.ndarray:
    z = scores - scores.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def merge_scores(scores) -> np.ndarray:
    """Per-pixel class distribution: mean of the per-layer softmaxes."""
    if len(scores) < 1:
        raise ConfigError("need at least one score map")
    shape = np.shape(scores[0])
    for s in scores:
        if np.shape(s) != shape:
            raise ConfigError(f"score map shapes differ: {np.shape(s)} vs {shape}")
    return np.mean([softmax(np.asarray(s, float)) for s in scores], axis=0)


def predict(distribution) -> np.ndarray:
    """Argmax labels; ties go to the lowest class index."""
    return np.argmax(distribution, axis=-1)


def check_labels(labels, num_classes: int) -> np.ndarray:
    labels = np.asarray(labels)
    bad = (labels != IGNORE_LABEL) & ((labels < 0) | (labels >= num_classes))
    if bad.any():
        r, c = np.argwhere(bad)[0]
        raise DataError(f"label {labels[r, c]} at ({r}, {c}) is outside 0..{num_classes - 1} "
                        f"and not the ignore value {IGNORE_LABEL}")
    return labels


def total_loss(scores, labels):
    """Sum over layers of the mean pixel cross-entropy; returns (loss, grads per score map).

    Pixels labelled 255 are ignored; with every pixel ignored the loss is 0.
    """
    K = np.shape(scores[0])[-1]
    labels = check_labels(labels, K)
    valid = labels != IGNORE_LABEL
    n = int(valid.sum())
    safe = np.where(valid, labels, 0)
    onehot = np.eye(K)[safe] * valid[..., None]
    loss = 0.0
    grads = []
    for s in scores:
        s = np.asarray(s, float)
        if s.shape[:2] != labels.shape:
            raise ConfigError(f"score map {s.shape[:2]} and labels {labels.shape} differ")
        if n == 0:
            grads.append(np.zeros_like(s))
            continue
        z = s - s.max(axis=-1, keepdims=True)
        logz = np.log(np.exp(z).sum(axis=-1, keepdims=True))
        logp = z - logz
        loss += float(-(logp * onehot).sum() / n)
        grads.append((np.exp(logp) - onehot) * valid[..., None] / n)
    return loss, grads
