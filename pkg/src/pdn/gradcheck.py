"""Whole-network gradient check against central differences."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .network import NetworkConfig, NetworkParams, network_backward, network_forward, total_loss
from .tensor_core import finite_difference_jacobian, relative_error
from .trainer import init_params

TOLERANCE = 1e-4
CHECK_STD = 0.3  # parameter scale for checks; keeps true gradients well above FD round-off


@dataclass
class GradCheckResult:
    checked: int
    worst_error: float
    worst_name: str
    worst_index: tuple
    analytic: float
    numeric: float

    @property
    def passed(self) -> bool:
        return self.worst_error < TOLERANCE

    def format(self) -> str:
        return (f"checked={self.checked} worst_rel_error={self.worst_error:.3e} "
                f"at {self.worst_name}{list(self.worst_index)} "
                f"analytic={self.analytic:.6e} numeric={self.numeric:.6e}")


def random_problem(config: NetworkConfig, seed: int, std: float = CHECK_STD):
    """Parameters, image and labels for a gradient check of `config`."""
    params = init_params(config, seed)
    for _, arr, _, _ in params.tensors():
        arr *= std / 0.1
    rng = np.random.default_rng(seed + 1)
    image = rng.random((config.image_rows, config.image_cols, config.in_channels))
    labels = rng.integers(0, config.num_classes, (config.image_rows, config.image_cols))
    labels[rng.random(labels.shape) < 0.1] = 255
    return params, image, labels


def _worst(result: GradCheckResult, name, arr_shape, idx, analytic, numeric) -> None:
    err = relative_error(analytic, numeric)
    result.checked += len(idx)
    if len(idx) and err.max() > result.worst_error:
        j = int(err.argmax())
        result.worst_error = float(err[j])
        result.worst_name = name
        result.worst_index = tuple(int(i) for i in np.unravel_index(idx[j], arr_shape))
        result.analytic = float(analytic[j])
        result.numeric = float(numeric[j])


def check_network(config: NetworkConfig, params: NetworkParams, image, labels,
                  eps: float = 1e-5, seed: int = 0) -> GradCheckResult:
    """Check every on-mask parameter gradient, every image gradient and the loss gradient.

    The check is split along the chain rule. Network backward is compared with
    central differences of a random linear functional of the T score maps, and
    the loss gradient is compared with central differences of the loss as a
    function of the score maps. Checking the composed loss directly puts
    gradients below ~1e-7 under the f64 round-off floor of an O(1) loss.
    Off-mask gradient entries must be exactly zero.
    """
    image = np.array(image, dtype=float)
    rng = np.random.default_rng(seed)
    K, T = config.num_classes, len(params.layers)
    proj = [rng.normal(size=image.shape[:2] + (K,)) for _ in range(T)]

    def functional():
        scores, _ = network_forward(image, params, config.variant)
        return sum(float((s * p).sum()) for s, p in zip(scores, proj))

    scores, ctx = network_forward(image, params, config.variant)
    grads, grad_image = network_backward(ctx, proj)

    targets = [(name, arr, mask, g) for (name, arr, mask, _), (_, g, _, _)
               in zip(params.tensors(), grads.tensors())]
    targets.append(("image", image, None, grad_image))

    result = GradCheckResult(0, 0.0, "", (), 0.0, 0.0)
    for name, arr, mask, g in targets:
        if mask is not None:
            on = np.broadcast_to(mask[:, :, None, None], arr.shape)
            if np.any(g[~on] != 0.0):
                return GradCheckResult(result.checked, np.inf, name + "(off-mask)", (), 0.0, 0.0)
            idx = np.flatnonzero(on)
        else:
            idx = np.arange(arr.size)

        def f(x, arr=arr):
            saved = arr.copy()
            arr[...] = x
            try:
                return functional()
            finally:
                arr[...] = saved

        numeric = finite_difference_jacobian(f, arr, eps, idx).reshape(-1)[idx]
        _worst(result, name, arr.shape, idx, g.reshape(-1)[idx], numeric)

    _, grad_scores = total_loss(scores, labels)
    for t, s in enumerate(scores):
        def f(x, t=t):
            return total_loss(scores[:t] + [x] + scores[t + 1:], labels)[0]
        idx = np.arange(s.size)
        numeric = finite_difference_jacobian(f, s, eps).reshape(-1)
        _worst(result, f"loss/score.{t}", s.shape, idx, grad_scores[t].reshape(-1), numeric)
    return result


def tiny_config(variant: str = "paper") -> NetworkConfig:
    return NetworkConfig(image_rows=6, image_cols=6, num_classes=3, channels=2, rings=1,
                         layers=2, variant=variant, backbone=[(2, 3)], seed=0)


def random_config(seed: int) -> NetworkConfig:
    """Random small config: grid <= 8x8, D <= 4, E <= 2, T <= 2."""
    rng = np.random.default_rng(seed)
    D = int(rng.integers(1, 5))
    stages = [(int(rng.integers(1, 4)), 3)] if rng.random() < 0.5 else []
    stages.append((D, int(rng.choice([1, 3]))))
    return NetworkConfig(
        image_rows=int(rng.integers(3, 9)), image_cols=int(rng.integers(3, 9)),
        num_classes=int(rng.integers(2, 4)), channels=D, rings=int(rng.integers(0, 3)),
        layers=int(rng.integers(1, 3)), variant=("paper", "standard")[seed % 2],
        backbone=stages, seed=seed)
