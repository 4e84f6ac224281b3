import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import confusion_brute
from pdn.errors import DataError, NumericError
from pdn.metrics import evaluate
from pdn.network import NetworkConfig, NetworkParams
from pdn.trainer import OptimState, init_params, scalar_sgd, sgd_step


def one_scalar_config():
    return NetworkConfig(1, 1, 2, 1, 0, 1, backbone=[(1, 1)], in_channels=1)


def test_init_deterministic():
    cfg = NetworkConfig(8, 8, 3, 4, 2, 2, backbone=[(4, 3)], seed=11)
    a, b = init_params(cfg), init_params(cfg)
    for (_, x, _, _), (_, y, _, _) in zip(a.tensors(), b.tensors()):
        np.testing.assert_array_equal(x, y)
    c = init_params(cfg, seed=12)
    assert not np.array_equal(a.tensors()[0][1], c.tensors()[0][1])


def test_init_variance_and_masks():
    cfg = NetworkConfig(8, 8, 3, 16, 3, 3, backbone=[(16, 3)], seed=0)
    params = init_params(cfg)
    draws = []
    for _, arr, mask, _ in params.tensors():
        if mask is None:
            assert not arr.any()  # biases start at zero
            continue
        on = np.broadcast_to(mask[:, :, None, None], arr.shape)
        assert np.all(arr[~on] == 0.0)
        draws.append(arr[on])
    draws = np.concatenate(draws)
    assert draws.size >= 100_000
    assert abs(draws.mean()) < 0.002
    assert 0.009 <= draws.var() <= 0.011


def test_plain_sgd_scalar():
    cfg = one_scalar_config()
    p = NetworkParams.zeros(cfg)
    g = NetworkParams.zeros(cfg)
    name, w, _, _ = p.tensors()[0]
    w[...] = 1.0
    g.tensors()[0][1][...] = 2.0
    sgd_step(p, g, OptimState(lr=0.1, momentum=0.0, weight_decay=0.0))
    assert w.item() == pytest.approx(0.8, abs=1e-15)


def test_zero_grad_momentum_decay():
    cfg = one_scalar_config()
    p, g = NetworkParams.zeros(cfg), NetworkParams.zeros(cfg)
    w = p.tensors()[0][1]
    w[...] = 0.5
    opt = OptimState(lr=0.1, momentum=0.9, weight_decay=0.0)
    opt.velocity[p.tensors()[0][0]] = np.full(w.shape, 2.0)
    sgd_step(p, g, opt)
    v = opt.velocity[p.tensors()[0][0]]
    np.testing.assert_allclose(v, 1.8)
    np.testing.assert_allclose(w, 0.5 - 0.1 * 1.8)
    opt2 = OptimState(lr=0.1, momentum=0.9, weight_decay=0.0)
    w[...] = 0.5
    sgd_step(p, g, opt2)
    assert w.item() == 0.5


def test_two_steps_recurrence():
    cfg = one_scalar_config()
    p, g = NetworkParams.zeros(cfg), NetworkParams.zeros(cfg)
    w, gw = p.tensors()[0][1], g.tensors()[0][1]
    w[...] = 0.7
    opt = OptimState(lr=0.01, momentum=0.9, weight_decay=0.0005)
    # hand-rolled: v1 = 0.3 + 0.0005*0.7; w1 = 0.7 - 0.01*v1; v2 = 0.9*v1 + (-0.2) + 0.0005*w1
    v1 = 0.3 + 0.0005 * 0.7
    w1 = 0.7 - 0.01 * v1
    v2 = 0.9 * v1 - 0.2 + 0.0005 * w1
    w2 = w1 - 0.01 * v2
    gw[...] = 0.3
    sgd_step(p, g, opt)
    gw[...] = -0.2
    sgd_step(p, g, opt)
    assert w.item() == pytest.approx(w2, abs=1e-15)
    assert opt.step_count == 2


@settings(max_examples=30)
@given(lr=st.floats(1e-4, 1.0), wd=st.floats(0.0, 0.1), seed=st.integers(0, 1000))
def test_weight_decay_equivalence(lr, wd, seed):
    rng = np.random.default_rng(seed)
    cfg = NetworkConfig(3, 3, 2, 2, 1, 1, backbone=[(2, 3)])
    p = init_params(cfg, seed)
    g = NetworkParams.zeros(cfg)
    for _, arr, mask, _ in g.tensors():
        arr[...] = rng.normal(size=arr.shape)
        if mask is not None:
            arr[~mask] = 0.0
    before = p.copy()
    sgd_step(p, g, OptimState(lr=lr, momentum=0.0, weight_decay=wd))
    for (_, a, _, _), (_, b, _, _), (_, gr, _, _) in zip(p.tensors(), before.tensors(), g.tensors()):
        np.testing.assert_array_equal(a, b - lr * (gr + wd * b))


def test_masks_survive_many_steps():
    rng = np.random.default_rng(0)
    cfg = NetworkConfig(5, 5, 3, 2, 2, 2, backbone=[(2, 3)])
    p = init_params(cfg)
    opt = OptimState()
    for _ in range(120):
        g = NetworkParams.zeros(cfg)
        for _, arr, _, _ in g.tensors():
            arr[...] = rng.normal(size=arr.shape)  # deliberately dense, off-mask too
        sgd_step(p, g, opt)
    for name, arr, mask, _ in p.tensors():
        if mask is not None:
            assert np.all(arr[~mask] == 0.0)
            assert np.all(opt.velocity[name][~mask] == 0.0)


def test_non_finite_gradient_aborts():
    cfg = one_scalar_config()
    p, g = NetworkParams.zeros(cfg), NetworkParams.zeros(cfg)
    g.tensors()[1][1][...] = np.nan
    with pytest.raises(NumericError):
        sgd_step(p, g, OptimState())


def test_scalar_sgd_helper():
    assert scalar_sgd(1.0, 2.0, 0.0, 0.1, 0.0, 0.0) == (pytest.approx(0.8), 2.0)


def test_eval_example():
    rep = evaluate(np.array([[0, 0], [1, 1]]), np.array([[0, 1], [1, 1]]), 2)
    assert rep.pixel_accuracy == 0.75
    np.testing.assert_allclose(rep.per_class_iou, [1 / 2, 2 / 3])
    assert rep.mean_iou == pytest.approx(7 / 12)


def test_eval_perfect_and_zero_union():
    gt = np.full((4, 4), 1)
    rep = evaluate(gt, gt, 3)
    assert rep.pixel_accuracy == 1.0 and rep.mean_iou == 1.0
    assert np.isnan(rep.per_class_iou[0]) and np.isnan(rep.per_class_iou[2])


def test_eval_all_ignored():
    with pytest.raises(DataError):
        evaluate(np.zeros((2, 2), int), np.full((2, 2), 255), 2)


def test_eval_ignores_void_pixels():
    gt = np.array([[0, 255], [1, 1]])
    pred = np.array([[0, 1], [1, 1]])
    rep = evaluate(pred, gt, 2)
    assert rep.pixel_accuracy == 1.0
    assert rep.confusion.sum() == 3


@settings(max_examples=40)
@given(seed=st.integers(0, 10_000), K=st.integers(2, 6))
def test_metric_symmetry(seed, K):
    rng = np.random.default_rng(seed)
    a = rng.integers(0, K, (5, 6))
    a[rng.random(a.shape) < 0.2] = 255
    if (a == 255).all():
        a[0, 0] = 0
    rep = evaluate(np.where(a == 255, 0, a), a, K)
    assert rep.pixel_accuracy == 1.0 and rep.mean_iou == 1.0


@settings(max_examples=40)
@given(seed=st.integers(0, 10_000), K=st.integers(2, 5))
def test_confusion_invariants(seed, K):
    rng = np.random.default_rng(seed)
    gt = rng.integers(0, K, (6, 6))
    gt[0] = 255
    pred = rng.integers(0, K, (6, 6))
    rep = evaluate(pred, gt, K)
    np.testing.assert_array_equal(rep.confusion, confusion_brute(pred, gt, K))
    np.testing.assert_array_equal(rep.confusion.sum(axis=1), np.bincount(gt[gt != 255], minlength=K))
    assert 0.0 <= rep.mean_iou <= 1.0
