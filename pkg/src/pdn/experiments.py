"""Desk-scale experiments shared by the acceptance suite and scripts/."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .network import NetworkConfig, merge_scores, network_forward
from .synthetic import blob_mask, generate
from .trainer import OptimState, init_params, train


def blob_accuracy(config: NetworkConfig, params, samples) -> float:
    """Fraction of blob pixels labelled correctly.

    The merged distribution is read with the argmax restricted to the
    foreground classes, so guessing gives 1/(K-1).
    """
    hit = total = 0
    for s in samples:
        scores, _ = network_forward(s.image, params, config.variant)
        dist = merge_scores(scores)
        m = blob_mask(s.labels)
        pred = np.argmax(dist[..., 1:], axis=-1) + 1
        hit += int((pred[m] == s.labels[m]).sum())
        total += int(m.sum())
    return hit / total


def binomial_band(n: int, p: float, level: float = 0.99) -> tuple[float, float]:
    """Central `level` acceptance region of Binomial(n, p), as fractions of n."""
    tail = (1.0 - level) / 2.0
    pmf = [math.comb(n, k) * p ** k * (1 - p) ** (n - k) for k in range(n + 1)]
    lo, acc = 0, 0.0
    while acc + pmf[lo] <= tail:
        acc += pmf[lo]
        lo += 1
    hi, acc = n, 0.0
    while acc + pmf[hi] <= tail:
        acc += pmf[hi]
        hi -= 1
    return lo / n, hi / n


@dataclass
class ContextRun:
    """One model trained on the context task."""
    model: NetworkConfig
    steps: int
    lr: float
    lr_backbone: float
    momentum: float = 0.9
    weight_decay: float = 5e-4
    seed: int = 0

    def radius(self) -> int:
        return self.model.influence_radius(self.model.layers)


@dataclass
class ContextTask:
    size: int = 17
    classes: int = 3
    distance: int = 6
    n_train: int = 200
    n_test: int = 50
    train_seed: int = 0
    test_seed: int = 100_000

    def splits(self):
        return (generate("context", self.n_train, self.train_seed, self.size, self.classes, self.distance),
                generate("context", self.n_test, self.test_seed, self.size, self.classes, self.distance))


@dataclass
class ContextResult:
    radius: int
    accuracy: float
    losses: list = field(repr=False, default_factory=list)


def run_context(run: ContextRun, task: ContextTask, log=None) -> ContextResult:
    train_set, test_set = task.splits()
    params = init_params(run.model, run.seed)
    opt = OptimState(lr=run.lr, lr_backbone=run.lr_backbone, momentum=run.momentum,
                     weight_decay=run.weight_decay)
    losses = train(params, opt, train_set, run.steps, seed=run.seed, variant=run.model.variant, log=log)
    return ContextResult(run.radius(), blob_accuracy(run.model, params, test_set), losses)
