"""Parameter initialisation and SGD with momentum and coupled weight decay."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import NumericError
from .network import NetworkConfig, NetworkParams, network_backward, network_forward, total_loss

INIT_STD = 0.1  # variance 0.01


def init_params(config: NetworkConfig, seed: Optional[int] = None) -> NetworkParams:
    """Gaussian(0, 0.01) weights, zero biases, off-mask entries zeroed.

    Draws happen in `NetworkParams.tensors()` order from one seeded generator.
    """
    rng = np.random.default_rng(config.seed if seed is None else seed)
    params = NetworkParams.zeros(config)
    for _, arr, mask, _ in params.tensors():
        if mask is None:
            continue
        arr[...] = rng.normal(0.0, INIT_STD, size=arr.shape)
    params.enforce_masks()
    return params


@dataclass
class OptimState:
    lr: float = 2.5e-3
    momentum: float = 0.9
    weight_decay: float = 5e-4
    lr_backbone: Optional[float] = None  # defaults to lr
    velocity: dict = field(default_factory=dict)
    step_count: int = 0

    def lr_for(self, group: str) -> float:
        if group == "backbone" and self.lr_backbone is not None:
            return self.lr_backbone
        return self.lr


def sgd_step(params: NetworkParams, grads: NetworkParams, opt: OptimState) -> None:
    """In-place update: v <- momentum*v + grad + wd*param; param <- param - lr*v.

    Off-mask weights and their velocities are re-zeroed after the update.
    Raises NumericError before touching anything if a gradient is non-finite.
    """
    pairs = list(zip(params.tensors(), grads.tensors()))
    for (name, _, _, _), (_, g, _, _) in pairs:
        if not np.all(np.isfinite(g)):
            raise NumericError(f"non-finite gradient in {name} at step {opt.step_count}")
    for (name, p, mask, group), (gname, g, _, _) in pairs:
        if name != gname or p.shape != g.shape:
            raise NumericError(f"gradient {gname} does not match parameter {name}")
        v = opt.velocity.get(name)
        if v is None:
            v = opt.velocity[name] = np.zeros_like(p)
        v *= opt.momentum
        v += g + opt.weight_decay * p
        if mask is not None:
            v[~mask] = 0.0
        p -= opt.lr_for(group) * v
        if mask is not None:
            p[~mask] = 0.0
    opt.step_count += 1


def scalar_sgd(param: float, grad: float, velocity: float, lr: float, momentum: float,
               weight_decay: float) -> tuple[float, float]:
    """Scalar form of one `sgd_step` update; returns (param, velocity)."""
    velocity = momentum * velocity + grad + weight_decay * param
    return param - lr * velocity, velocity


def train_step(params: NetworkParams, opt: OptimState, image, labels, variant: str = "paper") -> float:
    """Forward, backward and one optimizer step on a single sample. Returns the loss."""
    scores, ctx = network_forward(image, params, variant)
    loss, grad_scores = total_loss(scores, labels)
    if not np.isfinite(loss):
        raise NumericError(f"non-finite loss at step {opt.step_count}")
    grads, _ = network_backward(ctx, grad_scores)
    sgd_step(params, grads, opt)
    return loss


def random_crop(image, labels, size: Optional[int], rng: np.random.Generator):
    if size is None or (image.shape[0] <= size and image.shape[1] <= size):
        return image, labels
    r = int(rng.integers(0, image.shape[0] - size + 1)) if image.shape[0] > size else 0
    c = int(rng.integers(0, image.shape[1] - size + 1)) if image.shape[1] > size else 0
    return image[r:r + size, c:c + size], labels[r:r + size, c:c + size]


def train(params: NetworkParams, opt: OptimState, samples, steps: int, *, seed: int = 0,
          variant: str = "paper", crop: Optional[int] = None, log=None) -> list[float]:
    """Batch-size-1 SGD over `samples`, reshuffled each epoch. Returns per-step losses."""
    rng = np.random.default_rng(seed)
    losses = []
    order: list[int] = []
    for step in range(steps):
        if not order:
            order = list(rng.permutation(len(samples)))
        s = samples[order.pop()]
        image, labels = random_crop(s.image, s.labels, crop, rng)
        loss = train_step(params, opt, image, labels, variant)
        losses.append(loss)
        if log is not None:
            log(step, loss)
    return losses
