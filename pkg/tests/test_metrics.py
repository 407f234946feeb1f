import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from insolemotion.bench.metrics import (
    GRAVITY,
    double_integration,
    drift_run,
    joint_errors,
    mpjpe,
    mpjve,
    mpjve_legs,
    mrpe,
    mrpe_windows,
    path_length,
    root_errors,
)
from insolemotion.errors import ShapeError

DT = 1.0 / 30.0


def naive_mpjpe(pred, gt, subset):
    total, n = 0.0, 0
    for f in range(pred.shape[0]):
        for j in subset:
            total += np.sqrt(sum((pred[f, j, k] - gt[f, j, k]) ** 2 for k in range(3)))
            n += 1
    return 100.0 * total / n


def naive_mpjve(pred, gt, subset, dt=DT):
    total, n = 0.0, 0
    for f in range(pred.shape[0] - 1):
        for j in subset:
            sq = 0.0
            for k in range(3):
                vp = (pred[f + 1, j, k] - pred[f, j, k]) / dt
                vg = (gt[f + 1, j, k] - gt[f, j, k]) / dt
                sq += (vp - vg) ** 2
            total += np.sqrt(sq)
            n += 1
    return 100.0 * total / n


def naive_mrpe(pred, gt):
    pp, pg = [0.0, 0.0, 0.0], [0.0, 0.0, 0.0]
    total = 0.0
    for f in range(len(pred)):
        for k in range(3):
            pp[k] += pred[f][k]
            pg[k] += gt[f][k]
        total += np.sqrt(sum((pp[k] - pg[k]) ** 2 for k in range(3)))
    return total / len(pred)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2 ** 31 - 1))
def test_metrics_match_naive_loops(seed):
    rng = np.random.default_rng(seed)
    F, J = int(rng.integers(2, 12)), int(rng.integers(2, 10))
    pred, gt = rng.standard_normal((F, J, 3)), rng.standard_normal((F, J, 3))
    subset = sorted(rng.choice(J, size=int(rng.integers(1, J + 1)), replace=False).tolist())
    assert abs(mpjpe(pred, gt, subset) - naive_mpjpe(pred, gt, subset)) < 1e-9
    assert abs(mpjpe(pred, gt) - naive_mpjpe(pred, gt, range(J))) < 1e-9
    assert abs(mpjve(pred, gt, joint_subset=subset) - naive_mpjve(pred, gt, subset)) < 1e-9
    d_pred, d_gt = rng.standard_normal((F, 3)), rng.standard_normal((F, 3))
    assert abs(mrpe(d_pred, d_gt) - naive_mrpe(d_pred, d_gt)) < 1e-9


def test_three_four_five():
    gt = np.zeros((10, 5, 3))
    pred = gt.copy()
    pred[:, 2] = [0.03, 0.04, 0.0]
    assert mpjpe(pred, gt, [2]) == 5.0


def test_arithmetic_series_mrpe():
    err = np.tile([0.01, 0.0, 0.0], (100, 1))
    assert abs(mrpe(err, np.zeros((100, 3))) - 0.505) < 1e-12
    assert np.allclose(root_errors(err, np.zeros((100, 3))), 0.01 * np.arange(1, 101))


def test_constant_velocity_offset(skeleton):
    gt = np.zeros((20, 21, 3))
    pred = gt.copy()
    v = np.array([0.3, -0.4, 1.2])                       # m/s
    pred[:, skeleton.legs[0]] = np.arange(20)[:, None] * v * DT
    assert abs(mpjve(pred, gt, joint_subset=[skeleton.legs[0]]) - 100 * np.linalg.norm(v)) < 1e-9
    assert abs(mpjve_legs(pred, gt, skeleton) - 100 * np.linalg.norm(v) / 8) < 1e-9


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2 ** 31 - 1))
def test_metrics_zero_on_identity_and_symmetric(seed):
    rng = np.random.default_rng(seed)
    a, b = rng.standard_normal((6, 4, 3)), rng.standard_normal((6, 4, 3))
    da, db = rng.standard_normal((6, 3)), rng.standard_normal((6, 3))
    assert mpjpe(a, a) == 0.0 and mpjve(a, a) == 0.0 and mrpe(da, da) == 0.0
    assert mpjpe(a, b) == mpjpe(b, a)
    assert mpjve(a, b) == mpjve(b, a)
    assert mrpe(da, db) == mrpe(db, da)


def test_metric_errors():
    with pytest.raises(ShapeError):
        mpjpe(np.zeros((3, 4, 3)), np.zeros((3, 5, 3)))
    with pytest.raises(ValueError):
        mpjpe(np.zeros((3, 4, 3)), np.zeros((3, 4, 3)), [])
    with pytest.raises(ValueError):
        mpjve(np.zeros((1, 4, 3)), np.zeros((1, 4, 3)))


def test_joint_errors_pool_leading_axes(rng):
    a, b = rng.standard_normal((2, 5, 4, 3)), rng.standard_normal((2, 5, 4, 3))
    assert joint_errors(a, b).shape == (2, 5)
    assert abs(mpjpe(a, b) - mpjpe(a.reshape(10, 4, 3), b.reshape(10, 4, 3))) < 1e-12


def test_mrpe_windows_restart():
    err = np.tile([0.01, 0.0, 0.0], (200, 1))
    mean, std = mrpe_windows(err, np.zeros((200, 3)), 100)
    assert abs(mean - 0.505) < 1e-12 and std < 1e-12
    with pytest.raises(ValueError):
        mrpe_windows(err[:50], np.zeros((50, 3)), 100)


# -- double integration -------------------------------------------------------------

def test_double_integration_from_rest():
    assert np.array_equal(double_integration(np.zeros((30, 2, 3)), 30), np.zeros((30, 3)))


def test_double_integration_constant_acceleration():
    a = np.zeros((60, 2, 3))
    a[:, :, 0] = 1.0 / GRAVITY                          # 1 m/s^2 in g
    total = double_integration(a, 60).sum(axis=0)
    assert abs(total[0] / 0.5 / 2.0 ** 2 - 1) < 0.02
    assert np.all(total[1:] == 0)


def test_double_integration_averages_feet_and_restarts():
    a = np.zeros((20, 2, 3))
    a[:, 0, 1] = 2.0 / GRAVITY
    out = double_integration(a.reshape(20, 6), 10)
    assert np.allclose(out[:10], out[10:])
    v = np.cumsum(np.full(10, 2.0 * DT))
    assert np.allclose(out[:10, 1], 0.5 * v * DT)
    with pytest.raises(ShapeError):
        double_integration(np.zeros((5, 3)), 5)


# -- drift ---------------------------------------------------------------------------

def test_drift_cases():
    assert drift_run(np.array([[0.0, 0, 0], [60.0, 0, 0]]), [60.0, 0, 0], 60.0) == (0.0, 0.0)
    drift, pct = drift_run(np.array([60.75, 0.0, 0.0]), [60.0, 0.0, 0.0], 60.0)
    assert abs(drift - 0.75) < 1e-12 and abs(pct - 1.25) < 1e-12
    with pytest.raises(ValueError):
        drift_run(np.zeros(3), np.zeros(3), 0.0)


def test_out_and_back_drift():
    leg = np.tile([0.05, 0.0, 0.0], (150, 1))            # 7.5 m per leg
    gt = np.concatenate([leg, -leg] * 4)
    assert abs(path_length(gt) - 60.0) < 1e-9
    pred = gt + np.array([0.0, 0.0005, 0.0])              # 0.5 mm lateral bias per frame
    pos = np.cumsum(pred, axis=0)
    drift, pct = drift_run(pos, np.cumsum(gt, axis=0)[-1], path_length(gt))
    assert abs(drift - 1200 * 0.0005) < 1e-9
    assert abs(pct - 0.6 / 60.0 * 100) < 1e-9
