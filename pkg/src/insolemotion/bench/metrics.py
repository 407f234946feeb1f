"""Pose and trajectory error metrics.

Pose metrics compare root-relative joints and ignore displacement; root
error is measured separately on prefix-summed displacements.
"""

from __future__ import annotations

import numpy as np

from ..data.types import SAMPLE_RATE
from ..errors import ShapeError

GRAVITY = 9.80665


def _check_pair(pred, gt):
    pred = np.asarray(pred, dtype=np.float64)
    gt = np.asarray(gt, dtype=np.float64)
    if pred.shape != gt.shape:
        raise ShapeError(f"prediction shape {pred.shape} differs from ground truth {gt.shape}")
    return pred, gt


def _subset(x: np.ndarray, joint_subset) -> np.ndarray:
    if joint_subset is None:
        return x
    idx = np.asarray(joint_subset, dtype=np.int64)
    if idx.size == 0:
        raise ValueError("joint subset is empty")
    return x[..., idx, :]


def joint_errors(pred, gt, joint_subset=None) -> np.ndarray:
    """Per-frame mean joint distance in cm, shape (...,) over the leading axes."""
    pred, gt = _check_pair(pred, gt)
    diff = _subset(pred - gt, joint_subset)
    return np.linalg.norm(diff, axis=-1).mean(axis=-1) * 100.0


def mpjpe(pred, gt, joint_subset=None) -> float:
    """Mean per-joint position error in cm over frames and (subset) joints."""
    return float(joint_errors(pred, gt, joint_subset).mean())


def velocity_errors(pred, gt, dt: float = 1.0 / SAMPLE_RATE, joint_subset=None) -> np.ndarray:
    """Per-frame mean joint velocity error in cm/s; velocities are forward differences."""
    pred, gt = _check_pair(pred, gt)
    if pred.ndim < 3 or pred.shape[-3] < 2:
        raise ValueError("velocity error needs at least two frames")
    dv = np.diff(_subset(pred, joint_subset), axis=-3) - np.diff(_subset(gt, joint_subset), axis=-3)
    return np.linalg.norm(dv / dt, axis=-1).mean(axis=-1) * 100.0


def mpjve(pred, gt, dt: float = 1.0 / SAMPLE_RATE, joint_subset=None) -> float:
    return float(velocity_errors(pred, gt, dt, joint_subset).mean())


def mpjve_legs(pred, gt, skeleton, dt: float = 1.0 / SAMPLE_RATE) -> float:
    """Mean velocity error of the eight leg joints in cm/s."""
    return mpjve(pred, gt, dt, skeleton.legs)


def root_errors(pred_disp, gt_disp) -> np.ndarray:
    """Per-frame root position error (m) after prefix-summing both displacement tracks."""
    pred, gt = _check_pair(pred_disp, gt_disp)
    if pred.shape[-1] != 3:
        raise ShapeError(f"displacements must end in 3 coordinates, got {pred.shape}")
    return np.linalg.norm(np.cumsum(pred - gt, axis=-2), axis=-1)


def mrpe(pred_disp, gt_disp) -> float:
    """Mean root position error in meters."""
    return float(root_errors(pred_disp, gt_disp).mean())


def mrpe_windows(pred_disp, gt_disp, horizon: int) -> tuple[float, float]:
    """MRPE restarted every ``horizon`` frames; returns (mean, std) over windows."""
    pred, gt = _check_pair(pred_disp, gt_disp)
    n = pred.shape[0] // horizon
    if n == 0:
        raise ValueError(f"sequence of {pred.shape[0]} frames is shorter than the horizon {horizon}")
    vals = [mrpe(pred[i * horizon:(i + 1) * horizon], gt[i * horizon:(i + 1) * horizon]) for i in range(n)]
    return float(np.mean(vals)), float(np.std(vals))


def double_integration(world_accel, window: int, dt: float = 1.0 / SAMPLE_RATE) -> np.ndarray:
    """Displacements from twice-integrated foot acceleration, averaged over both feet.

    ``world_accel`` is (F, 2, 3) or (F, 6): world-frame acceleration in g
    with gravity already removed. Integration restarts from rest at every
    window of ``window`` frames: v_k = sum_{i<=k} a_i dt, delta_k = v_k dt.
    """
    a = np.asarray(world_accel, dtype=np.float64)
    if a.ndim == 2 and a.shape[1] == 6:
        a = a.reshape(-1, 2, 3)
    if a.ndim != 3 or a.shape[1:] != (2, 3):
        raise ShapeError(f"expected (F, 2, 3) foot accelerations, got {a.shape}")
    if window < 1:
        raise ValueError("window must be positive")
    a = a * GRAVITY
    out = np.empty((a.shape[0], 3))
    for s in range(0, a.shape[0], window):
        v = np.cumsum(a[s:s + window] * dt, axis=0)
        out[s:s + window] = (v * dt).mean(axis=1)
    return out


def drift_run(pred_positions, gt_final, total_distance: float) -> tuple[float, float]:
    """Endpoint drift in meters and as a percentage of the distance travelled."""
    if not total_distance > 0:
        raise ValueError(f"total distance must be positive, got {total_distance}")
    p = np.asarray(pred_positions, dtype=np.float64)
    final = p[-1] if p.ndim == 2 else p
    drift = float(np.linalg.norm(final - np.asarray(gt_final, dtype=np.float64)))
    return drift, drift / total_distance * 100.0


def path_length(displacements) -> float:
    """Horizontal distance travelled along a displacement track."""
    d = np.asarray(displacements, dtype=np.float64)
    return float(np.linalg.norm(d[:, :2], axis=1).sum())
