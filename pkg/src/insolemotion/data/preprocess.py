"""Orientation tracking, world-frame features, windowing, augmentation and standardization."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import DataError, ShapeError
from .geometry import (
    as_rotation_matrix,
    axis_angle_matrix,
    is_rotation,
    matrix_to_quat,
    quat_from_rotvec,
    quat_multiply,
    quat_to_matrix,
)
from .types import (
    ACCEL_INDEX,
    IMU_INDEX,
    INSOLE_CHANNELS,
    SAMPLE_RATE,
    MotionSequence,
    MotionWindow,
    Skeleton,
)

STD_EPS = 1e-8


def integrate_orientation(gyro_seq, initial, dt: float) -> np.ndarray:
    """Track orientation from body-frame angular rates in degree/s.

    Returns (N, 4) unit quaternions mapping the sensor frame to the world
    frame; ``out[0]`` is ``initial`` and ``out[k] = out[k-1] * exp(w[k-1] dt)``.
    """
    if not dt > 0.0:
        raise ValueError(f"dt must be positive, got {dt}")
    gyro = np.asarray(gyro_seq, dtype=np.float64)
    if gyro.ndim != 2 or gyro.shape[1] != 3:
        raise ShapeError(f"gyro sequence must be (N, 3), got {gyro.shape}")
    bad = np.flatnonzero(~np.all(np.isfinite(gyro), axis=1))
    if bad.size:
        raise DataError(f"non-finite angular rate at sample {int(bad[0])}")
    init = np.asarray(initial, dtype=np.float64)
    q = matrix_to_quat(init) if init.shape == (3, 3) else init / np.linalg.norm(init)
    steps = quat_from_rotvec(np.deg2rad(gyro) * dt)
    out = np.empty((gyro.shape[0], 4))
    if gyro.shape[0] == 0:
        return out
    out[0] = q
    for k in range(1, gyro.shape[0]):
        q = quat_multiply(q, steps[k - 1])
        q /= np.sqrt(q @ q)
        out[k] = q
    return out


def to_world_acceleration(accel_local, orientation) -> np.ndarray:
    """Rotate local-frame acceleration(s) into the world frame.

    ``orientation`` is a rotation matrix or quaternion, or a batch of them
    aligned with a batch of accelerations.
    """
    m = as_rotation_matrix(orientation)
    if not is_rotation(m):
        raise DataError("orientation is not orthonormal within 1e-6")
    a = np.asarray(accel_local, dtype=np.float64)
    return np.einsum("...ij,...j->...i", m, a)


def world_frame_sequence(seq: MotionSequence, orientation_source: str = "auto",
                         initial: np.ndarray | None = None, subtract_gravity: bool = False,
                         dt: float = 1.0 / SAMPLE_RATE) -> MotionSequence:
    """Return a copy of ``seq`` whose accelerometer channels are world-frame.

    ``orientation_source`` is ``"truth"`` (use recorded sensor orientations),
    ``"integrate"`` (integrate gyro from ``initial``, default flat and
    gravity-aligned) or ``"auto"`` (truth when available).
    """
    if seq.meta.get("accel_frame") == "world":
        return seq
    if orientation_source == "auto":
        orientation_source = "truth" if seq.orientation is not None else "integrate"
    feats = seq.insole.copy()
    for s, side in enumerate(("left", "right")):
        idx = ACCEL_INDEX[side]
        gyro_idx = idx + 3
        if orientation_source == "truth":
            if seq.orientation is None:
                raise DataError("sequence carries no sensor orientations")
            quats = seq.orientation[:, s]
        elif orientation_source == "integrate":
            if initial is not None:
                start = initial[s]
            elif "initial_orientation" in seq.meta:
                start = np.asarray(seq.meta["initial_orientation"][side])
            else:
                start = np.array([1.0, 0.0, 0.0, 0.0])
            quats = integrate_orientation(seq.insole[:, gyro_idx], start, dt)
        else:
            raise ValueError(f"unknown orientation source {orientation_source!r}")
        world = np.einsum("fij,fj->fi", quat_to_matrix(quats), seq.insole[:, idx])
        if subtract_gravity:
            world = world - seq.skeleton.vertical
        feats[:, idx] = world
    meta = dict(seq.meta, accel_frame="world", gravity_subtracted=subtract_gravity)
    return MotionSequence(feats, seq.joints, seq.displacement, seq.skeleton, seq.orientation, meta)


def sliding_windows(seq: MotionSequence, W: int, stride: int = 1, source: int = 0) -> list[MotionWindow]:
    """Windows starting at 0, stride, 2*stride, ...; empty when the sequence is shorter than W."""
    if W < 1 or stride < 1:
        raise ValueError(f"window size and stride must be positive, got W={W}, stride={stride}")
    n = len(seq)
    if n < W:
        return []
    return [MotionWindow(seq.joints[s:s + W], seq.displacement[s:s + W], seq.insole[s:s + W], s, source)
            for s in range(0, n - W + 1, stride)]


def stack_windows(windows) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Stack windows into (B, W, J-1, 3), (B, W, 3), (B, W, 50) arrays."""
    return (np.stack([w.joints for w in windows]), np.stack([w.displacement for w in windows]),
            np.stack([w.insole for w in windows]))


def partition_pose(joints: np.ndarray, skeleton: Skeleton) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Split (..., J-1, 3) joints into left leg, right leg and remaining body."""
    joints = joints.joints if isinstance(joints, MotionWindow) else np.asarray(joints)
    if joints.shape[-2] != skeleton.J - 1:
        raise ShapeError(f"pose has {joints.shape[-2]} joints, skeleton expects {skeleton.J - 1}")
    return joints[..., skeleton.left_leg, :], joints[..., skeleton.right_leg, :], joints[..., skeleton.body, :]


def merge_pose(m_left: np.ndarray, m_right: np.ndarray, m_body: np.ndarray, skeleton: Skeleton) -> np.ndarray:
    lead = m_left.shape[:-2]
    out = np.empty(lead + (skeleton.J - 1, 3), dtype=np.result_type(m_left, m_right, m_body))
    out[..., skeleton.left_leg, :] = m_left
    out[..., skeleton.right_leg, :] = m_right
    out[..., skeleton.body, :] = m_body
    return out


def rotate_arrays(joints, displacement, insole, rotation: np.ndarray):
    """Apply a 3x3 rotation to joints, displacements and world-frame accel channels.

    Arrays may carry leading batch axes. Pressures, forces, CoP and
    local-frame gyro channels are copied unchanged.
    """
    rt = rotation.T
    joints = np.asarray(joints) @ rt.astype(np.asarray(joints).dtype)
    displacement = np.asarray(displacement) @ rt.astype(np.asarray(displacement).dtype)
    insole = np.array(insole, copy=True)
    for idx in ACCEL_INDEX.values():
        insole[..., idx] = insole[..., idx] @ rt.astype(insole.dtype)
    return joints, displacement, insole


def rotate_about_vertical(window: MotionWindow, angle: float,
                          vertical_axis=(0.0, 0.0, 1.0)) -> MotionWindow:
    axis = np.asarray(vertical_axis, dtype=np.float64)
    if abs(np.linalg.norm(axis) - 1.0) > 1e-9:
        raise ValueError("vertical axis must be unit length")
    rot = axis_angle_matrix(axis, angle)
    joints, disp, insole = rotate_arrays(window.joints, window.displacement, window.insole, rot)
    return MotionWindow(joints, disp, insole, window.start, window.source)


def cumulative_root_position(displacements) -> np.ndarray:
    """Root positions as the running sum of per-frame displacements."""
    d = np.asarray(displacements, dtype=np.float64)
    return np.cumsum(d, axis=0)


# -- standardization -----------------------------------------------------

@dataclass
class StandardizationStats:
    insole_mean: np.ndarray
    insole_std: np.ndarray
    imu_mean: np.ndarray
    imu_std: np.ndarray
    pose_mean: np.ndarray | None = None     # ((J-1) * 3,)
    pose_std: np.ndarray | None = None
    disp_scale: np.ndarray | None = None    # (3,), zero-mean scaling so prefix sums commute

    def __post_init__(self):
        for name in ("insole_std", "imu_std", "pose_std", "disp_scale"):
            value = getattr(self, name)
            if value is not None:
                setattr(self, name, np.maximum(np.asarray(value, dtype=np.float64), STD_EPS))

    def block(self, name: str) -> tuple[np.ndarray, np.ndarray]:
        if name == "insole":
            return self.insole_mean, self.insole_std
        if name == "imu":
            return self.imu_mean, self.imu_std
        if name == "pose":
            if self.pose_mean is None:
                raise KeyError("stats carry no pose block")
            return self.pose_mean, self.pose_std
        if name == "disp":
            if self.disp_scale is None:
                raise KeyError("stats carry no displacement block")
            return np.zeros(3), self.disp_scale
        raise KeyError(f"unknown stats block {name!r}")

    def arrays(self) -> dict[str, np.ndarray]:
        out = {"insole_mean": self.insole_mean, "insole_std": self.insole_std,
               "imu_mean": self.imu_mean, "imu_std": self.imu_std}
        for name in ("pose_mean", "pose_std", "disp_scale"):
            if getattr(self, name) is not None:
                out[name] = getattr(self, name)
        return out

    @classmethod
    def from_arrays(cls, arrays: dict[str, np.ndarray]) -> "StandardizationStats":
        return cls(**{k: np.asarray(v, dtype=np.float64) for k, v in arrays.items()})


def _horizontal_axes(vertical_axis) -> tuple[int, int] | None:
    v = np.asarray(vertical_axis, dtype=np.float64)
    k = int(np.argmax(np.abs(v)))
    if abs(abs(v[k]) - 1.0) > 1e-9:
        return None
    return tuple(i for i in range(3) if i != k)


def _symmetrize(mean: np.ndarray, std: np.ndarray, data: np.ndarray, triples, horiz) -> None:
    """Make horizontal components share a zero mean and a common RMS scale."""
    for base in triples:
        h = [base + horiz[0], base + horiz[1]]
        rms = np.sqrt(np.mean(data[:, h] ** 2))
        mean[h] = 0.0
        std[h] = rms


def fit_stats(insole, joints=None, displacement=None, vertical_axis=None) -> StandardizationStats:
    """Fit z-score stats on training arrays.

    ``insole`` is (N, 50) with world-frame accel; ``joints`` (N, J-1, 3);
    ``displacement`` (N, 3). When ``vertical_axis`` is axis-aligned the
    horizontal channels of vector quantities are made rotation-invariant about
    it, so stats stay valid under vertical-axis rotation augmentation.
    """
    x = np.asarray(insole, dtype=np.float64).reshape(-1, INSOLE_CHANNELS)
    mean, std = x.mean(axis=0), x.std(axis=0)
    horiz = _horizontal_axes(vertical_axis) if vertical_axis is not None else None
    if horiz is not None:
        _symmetrize(mean, std, x, [ACCEL_INDEX["left"][0], ACCEL_INDEX["right"][0]], horiz)
    stats = dict(insole_mean=mean, insole_std=std,
                 imu_mean=mean[IMU_INDEX].copy(), imu_std=std[IMU_INDEX].copy())
    if joints is not None:
        j = np.asarray(joints, dtype=np.float64)
        j = j.reshape(-1, j.shape[-2] * 3)
        pm, ps = j.mean(axis=0), j.std(axis=0)
        if horiz is not None:
            _symmetrize(pm, ps, j, range(0, j.shape[1], 3), horiz)
        stats.update(pose_mean=pm, pose_std=ps)
    if displacement is not None:
        d = np.asarray(displacement, dtype=np.float64).reshape(-1, 3)
        scale = np.sqrt(np.mean(d ** 2, axis=0))
        if horiz is not None:
            scale[list(horiz)] = np.sqrt(np.mean(d[:, list(horiz)] ** 2))
        stats.update(disp_scale=scale)
    return StandardizationStats(**stats)


def _as_channels(values: np.ndarray, n: int, block: str) -> np.ndarray:
    if values.shape[-1] == n:
        return values
    if values.ndim >= 2 and values.shape[-2] * values.shape[-1] == n:
        return values.reshape(values.shape[:-2] + (n,))
    raise ShapeError(f"{block} stats cover {n} channels, values have shape {values.shape}")


def _out_dtype(values: np.ndarray):
    return values.dtype if values.dtype.kind == "f" else np.float64


def standardize(values, stats: StandardizationStats, block: str = "insole") -> np.ndarray:
    """Z-score ``values`` with one block of ``stats`` ("insole", "imu", "pose" or "disp")."""
    mean, std = stats.block(block)
    values = np.asarray(values)
    flat = _as_channels(values, mean.shape[0], block)
    return ((flat - mean) / std).reshape(values.shape).astype(_out_dtype(values))


def destandardize(values, stats: StandardizationStats, block: str = "insole") -> np.ndarray:
    mean, std = stats.block(block)
    values = np.asarray(values)
    flat = _as_channels(values, mean.shape[0], block)
    return (flat * std + mean).reshape(values.shape).astype(_out_dtype(values))
