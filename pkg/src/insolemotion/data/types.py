"""Typed records for insole readings, poses, skeletons and windows.

Channel layout of one flattened insole reading (50 values)::

    left  [ 0:16] pressures   [16:19] accel   [19:22] gyro   [22] force   [23:25] CoP
    right [25:41] pressures   [41:44] accel   [44:47] gyro   [47] force   [48:50] CoP
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ..errors import DataError, ShapeError

SAMPLE_RATE = 30.0
FOOT_CHANNELS = 25
INSOLE_CHANNELS = 2 * FOOT_CHANNELS
IMU_CHANNELS = 12
MAX_DISPLACEMENT_M = 1.0

PRESSURE = slice(0, 16)
ACCEL = slice(16, 19)
GYRO = slice(19, 22)
FORCE = 22
COP = slice(23, 25)


def foot_offset(side: str) -> int:
    if side not in ("left", "right"):
        raise ValueError(f"side must be 'left' or 'right', got {side!r}")
    return 0 if side == "left" else FOOT_CHANNELS


def channel_index(side: str, field_slice) -> np.ndarray:
    off = foot_offset(side)
    if isinstance(field_slice, slice):
        return np.arange(field_slice.start + off, field_slice.stop + off)
    return np.array([field_slice + off])


# (a_L, r_L, a_R, r_R)
IMU_INDEX = np.concatenate([
    channel_index("left", ACCEL), channel_index("left", GYRO),
    channel_index("right", ACCEL), channel_index("right", GYRO),
])
ACCEL_INDEX = {side: channel_index(side, ACCEL) for side in ("left", "right")}
PRESSURE_FORCE_COP_INDEX = np.concatenate([
    np.concatenate([channel_index(s, PRESSURE), channel_index(s, FORCE), channel_index(s, COP)])
    for s in ("left", "right")
])


@dataclass(frozen=True)
class InsoleSide:
    pressures: np.ndarray       # (16,) in 1/4 N/cm^2
    accel_local: np.ndarray     # (3,) in g
    gyro_local: np.ndarray      # (3,) in degree/s
    total_force: float          # N
    cop: np.ndarray             # (2,), each in [-0.5, 0.5]

    def __post_init__(self):
        p = np.asarray(self.pressures, dtype=np.float64)
        a = np.asarray(self.accel_local, dtype=np.float64)
        r = np.asarray(self.gyro_local, dtype=np.float64)
        c = np.asarray(self.cop, dtype=np.float64)
        if p.shape != (16,) or a.shape != (3,) or r.shape != (3,) or c.shape != (2,):
            raise ShapeError("insole side needs 16 pressures, 3 accel, 3 gyro and 2 CoP values")
        if np.any(p < 0.0):
            raise DataError("pressures must be non-negative")
        if self.total_force < 0.0:
            raise DataError("total force must be non-negative")
        if np.any(np.abs(c) > 0.5):
            raise DataError(f"CoP {c.tolist()} outside [-0.5, 0.5]")
        object.__setattr__(self, "pressures", p)
        object.__setattr__(self, "accel_local", a)
        object.__setattr__(self, "gyro_local", r)
        object.__setattr__(self, "cop", c)
        object.__setattr__(self, "total_force", float(self.total_force))

    def to_vector(self) -> np.ndarray:
        return np.concatenate([self.pressures, self.accel_local, self.gyro_local,
                               [self.total_force], self.cop])

    @classmethod
    def from_vector(cls, v) -> "InsoleSide":
        v = np.asarray(v, dtype=np.float64)
        if v.shape != (FOOT_CHANNELS,):
            raise ShapeError(f"expected {FOOT_CHANNELS} values per foot, got {v.shape}")
        return cls(v[PRESSURE], v[ACCEL], v[GYRO], float(v[FORCE]), v[COP])


@dataclass(frozen=True)
class InsoleReading:
    left: InsoleSide
    right: InsoleSide
    timestamp: float = 0.0

    def to_vector(self) -> np.ndarray:
        return np.concatenate([self.left.to_vector(), self.right.to_vector()])

    @classmethod
    def from_vector(cls, v, timestamp: float = 0.0) -> "InsoleReading":
        v = np.asarray(v, dtype=np.float64)
        if v.shape != (INSOLE_CHANNELS,):
            raise ShapeError(f"expected {INSOLE_CHANNELS} insole values, got {v.shape}")
        return cls(InsoleSide.from_vector(v[:FOOT_CHANNELS]),
                   InsoleSide.from_vector(v[FOOT_CHANNELS:]), timestamp)


@dataclass(frozen=True)
class PoseFrame:
    displacement: np.ndarray    # (3,) root delta from the previous frame, world space, m
    joints: np.ndarray          # (J-1, 3) root-relative positions, m

    def __post_init__(self):
        d = np.asarray(self.displacement, dtype=np.float64)
        j = np.asarray(self.joints, dtype=np.float64)
        if d.shape != (3,) or j.ndim != 2 or j.shape[1] != 3:
            raise ShapeError(f"bad pose frame shapes: displacement {d.shape}, joints {j.shape}")
        if not np.all(np.isfinite(d)) or not np.all(np.isfinite(j)):
            raise DataError("pose frame contains non-finite values")
        if np.linalg.norm(d) >= MAX_DISPLACEMENT_M:
            raise DataError(f"per-frame displacement {np.linalg.norm(d):.3f} m exceeds "
                            f"the {MAX_DISPLACEMENT_M} m sanity bound")
        object.__setattr__(self, "displacement", d)
        object.__setattr__(self, "joints", j)

    def check_skeleton(self, skeleton: "Skeleton") -> None:
        if self.joints.shape[0] != skeleton.J - 1:
            raise ShapeError(f"pose has {self.joints.shape[0]} joints, skeleton expects {skeleton.J - 1}")


DEFAULT_JOINT_NAMES = (
    "pelvis",
    "left_hip", "left_knee", "left_ankle", "left_toe",
    "right_hip", "right_knee", "right_ankle", "right_toe",
    "spine1", "spine2", "spine3", "neck", "head",
    "left_collar", "left_shoulder", "left_elbow", "left_wrist",
    "right_collar", "right_shoulder", "right_elbow", "right_wrist",
)


@dataclass(frozen=True)
class Skeleton:
    """Joint metadata. Joint 0 is the root; leg indices refer to skeleton joints."""

    J: int
    names: tuple
    left_leg_indices: tuple
    right_leg_indices: tuple
    vertical_axis: tuple = (0.0, 0.0, 1.0)

    def __post_init__(self):
        names = tuple(self.names)
        left, right = tuple(int(i) for i in self.left_leg_indices), tuple(int(i) for i in self.right_leg_indices)
        object.__setattr__(self, "names", names)
        object.__setattr__(self, "left_leg_indices", left)
        object.__setattr__(self, "right_leg_indices", right)
        object.__setattr__(self, "vertical_axis", tuple(float(v) for v in self.vertical_axis))
        if len(names) != self.J:
            raise DataError(f"skeleton has {len(names)} names for J={self.J}")
        if self.J < 10:
            raise DataError("a skeleton needs the root, eight leg joints and at least one body joint")
        if len(left) != 4 or len(right) != 4:
            raise DataError("each leg needs exactly four joints")
        legs = set(left) | set(right)
        if len(legs) != 8 or 0 in legs or any(not 0 < i < self.J for i in legs):
            raise DataError("leg joint sets must be disjoint, in range, and exclude the root")
        if abs(np.linalg.norm(self.vertical_axis) - 1.0) > 1e-9:
            raise DataError("vertical axis must be a unit vector")

    @classmethod
    def default(cls) -> "Skeleton":
        return cls(22, DEFAULT_JOINT_NAMES, (1, 2, 3, 4), (5, 6, 7, 8))

    @classmethod
    def generic(cls, J: int) -> "Skeleton":
        names = ("root",) + tuple(f"joint{i}" for i in range(1, J))
        return cls(J, names, (1, 2, 3, 4), (5, 6, 7, 8))

    # joint indices into the (J-1)-long root-relative joint array
    @property
    def left_leg(self) -> np.ndarray:
        return np.array(self.left_leg_indices) - 1

    @property
    def right_leg(self) -> np.ndarray:
        return np.array(self.right_leg_indices) - 1

    @property
    def legs(self) -> np.ndarray:
        return np.concatenate([self.left_leg, self.right_leg])

    @property
    def body(self) -> np.ndarray:
        used = set(self.legs.tolist())
        return np.array([i for i in range(self.J - 1) if i not in used], dtype=np.int64)

    @property
    def vertical(self) -> np.ndarray:
        return np.array(self.vertical_axis)

    def to_dict(self) -> dict:
        return {"J": self.J, "names": list(self.names), "left_leg": list(self.left_leg_indices),
                "right_leg": list(self.right_leg_indices), "vertical_axis": list(self.vertical_axis)}

    @classmethod
    def from_dict(cls, d: dict) -> "Skeleton":
        return cls(int(d["J"]), tuple(d["names"]), tuple(d["left_leg"]), tuple(d["right_leg"]),
                   tuple(d.get("vertical_axis", (0.0, 0.0, 1.0))))

    def content_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


@dataclass
class MotionWindow:
    """W consecutive frames: root-relative joints, root displacements and insole features.

    ``insole`` rows use the 50-channel layout; accelerations are world-frame
    once the window has passed through preprocessing.
    """

    joints: np.ndarray          # (W, J-1, 3)
    displacement: np.ndarray    # (W, 3)
    insole: np.ndarray          # (W, 50)
    start: int = 0
    source: int = 0

    def __post_init__(self):
        W = self.joints.shape[0]
        if self.displacement.shape != (W, 3) or self.insole.shape != (W, INSOLE_CHANNELS):
            raise ShapeError(f"window arrays disagree: joints {self.joints.shape}, "
                             f"displacement {self.displacement.shape}, insole {self.insole.shape}")

    @property
    def W(self) -> int:
        return self.joints.shape[0]

    @property
    def poses(self) -> list[PoseFrame]:
        return [PoseFrame(d, j) for d, j in zip(self.displacement, self.joints)]

    @property
    def insoles(self) -> list[InsoleReading]:
        return [InsoleReading.from_vector(v, (self.start + i) / SAMPLE_RATE)
                for i, v in enumerate(self.insole)]


@dataclass
class MotionSequence:
    """A recorded or synthesized sequence in array form.

    ``insole`` holds the channels as measured (local-frame accel). When ground
    truth sensor orientations are known they live in ``orientation``
    (F, 2, 4) quaternions for (left, right).
    """

    insole: np.ndarray                      # (F, 50)
    joints: np.ndarray                      # (F, J-1, 3)
    displacement: np.ndarray                # (F, 3)
    skeleton: Skeleton
    orientation: np.ndarray | None = None   # (F, 2, 4)
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        F = self.insole.shape[0]
        if self.insole.shape != (F, INSOLE_CHANNELS):
            raise ShapeError(f"insole array must be (F, 50), got {self.insole.shape}")
        if self.joints.shape != (F, self.skeleton.J - 1, 3):
            raise ShapeError(f"joints array {self.joints.shape} does not match skeleton J={self.skeleton.J}")
        if self.displacement.shape != (F, 3):
            raise ShapeError(f"displacement array must be (F, 3), got {self.displacement.shape}")
        norms = np.linalg.norm(self.displacement, axis=1)
        bad = np.flatnonzero(~(norms < MAX_DISPLACEMENT_M))
        if bad.size:
            raise DataError(f"frame {int(bad[0])}: displacement {norms[bad[0]]:.3f} m violates the "
                            f"{MAX_DISPLACEMENT_M} m per-frame bound")

    def __len__(self) -> int:
        return self.insole.shape[0]

    @property
    def timestamps(self) -> np.ndarray:
        return np.arange(len(self)) / SAMPLE_RATE

    def readings(self) -> list[InsoleReading]:
        ts = self.timestamps
        return [InsoleReading.from_vector(v, t) for v, t in zip(self.insole, ts)]

    def poses(self) -> list[PoseFrame]:
        return [PoseFrame(d, j) for d, j in zip(self.displacement, self.joints)]

    def slice(self, start: int, stop: int) -> "MotionSequence":
        o = None if self.orientation is None else self.orientation[start:stop]
        return MotionSequence(self.insole[start:stop], self.joints[start:stop],
                              self.displacement[start:stop], self.skeleton, o, dict(self.meta))


def flatten_readings(readings: Sequence[InsoleReading]) -> np.ndarray:
    return np.stack([r.to_vector() for r in readings]) if readings else np.zeros((0, INSOLE_CHANNELS))
