"""Procedural paired pose + insole sequences for several locomotion styles.

The generator is kinematic with a heuristic contact model. A root path is
integrated from speed and heading; each foot is pinned to a plant position
during stance and follows an eased arc during swing; knees come from
two-link IK, arms counter-swing. Vertical force is split between the feet
by their stance share, pressure cells are loaded around a CoP target that
rolls from heel to toe, and the foot IMU is obtained by differentiating the
sensor trajectory and orientation. Sensor noise is added last, never to
poses.

World frame: x forward at heading 0, y left, z up. Foot frame: x toward the
toes, y left, z up.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, replace

import numpy as np

from .conditioning import SensorLayout
from .data.geometry import matrix_to_quat, quat_conjugate, quat_multiply, quat_to_matrix, quat_to_rotvec
from .data.types import (
    ACCEL,
    COP,
    FORCE,
    FOOT_CHANNELS,
    GYRO,
    INSOLE_CHANNELS,
    PRESSURE,
    SAMPLE_RATE,
    MotionSequence,
    Skeleton,
)
from .errors import DataError

GRAVITY = 9.80665
STYLE_KINDS = ("walk", "jog", "tiptoe", "squat", "sidestep", "idle")

# cadence (steps/min), stride (m per step)
STYLE_DEFAULTS = {
    "walk": (110.0, 0.65),
    "jog": (160.0, 0.9),
    "tiptoe": (100.0, 0.4),
    "squat": (30.0, 0.0),
    "sidestep": (90.0, 0.3),
    "idle": (0.0, 0.0),
}

THIGH = 0.45
SHIN = 0.45
UPPER_ARM = 0.28
FOREARM = 0.26
ANKLE_HEIGHT = 0.08
HIP_DROP = 0.06           # hip joints below the root
HIP_HALF_WIDTH = 0.09
SENSOR_OFFSET = np.array([0.06, 0.0, -0.07])   # insole IMU relative to the ankle, foot frame
TOE_OFFSET = np.array([0.14, 0.0, -0.06])
CELL_AREA_CM2 = 9.375     # 150 cm^2 of insole over 16 cells
PRESSURE_UNIT = 0.25      # N/cm^2 per pressure count


@dataclass(frozen=True)
class GaitStyle:
    kind: str = "walk"
    cadence: float | None = None      # steps per minute; style default when None
    stride: float | None = None       # meters per step
    heading: float = 0.0              # radians
    noise_level: float = 0.0
    turn_rate: float = 0.0            # rad/s
    variability: float = 0.0          # relative slow modulation of cadence and stride

    def __post_init__(self):
        if self.kind not in STYLE_KINDS:
            raise ValueError(f"unknown gait style {self.kind!r}; choose from {STYLE_KINDS}")
        cadence, stride = STYLE_DEFAULTS[self.kind]
        if self.cadence is None:
            object.__setattr__(self, "cadence", cadence)
        if self.stride is None:
            object.__setattr__(self, "stride", stride)
        moving = self.kind not in ("idle",)
        if moving and self.cadence <= 0:
            raise ValueError(f"{self.kind} needs a positive cadence, got {self.cadence}")
        if self.cadence < 0 or self.stride < 0:
            raise ValueError("cadence and stride must be non-negative")
        if self.noise_level < 0:
            raise ValueError("noise level must be non-negative")
        if not 0.0 <= self.variability < 0.5:
            raise ValueError("variability must lie in [0, 0.5)")
        if self.kind in ("walk", "jog", "tiptoe", "sidestep") and self.stride * self.cadence / 60.0 > 0.9 * SAMPLE_RATE:
            raise ValueError("speed exceeds the per-frame displacement bound")

    @property
    def speed(self) -> float:
        """Mean root speed in m/s."""
        if self.kind in ("squat", "idle"):
            return 0.0
        return self.stride * self.cadence / 60.0

    @property
    def duty(self) -> float:
        """Fraction of a gait cycle each foot spends in stance."""
        return {"jog": 0.35}.get(self.kind, 0.6)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "GaitStyle":
        return cls(**d)


# -- small helpers ---------------------------------------------------------

def _smoothstep(x):
    x = np.clip(x, 0.0, 1.0)
    return x * x * (3.0 - 2.0 * x)


def _rot_z(angle):
    """Rotation matrices about z, shape (..., 3, 3)."""
    angle = np.asarray(angle, dtype=np.float64)
    c, s = np.cos(angle), np.sin(angle)
    m = np.zeros(angle.shape + (3, 3))
    m[..., 0, 0], m[..., 0, 1] = c, -s
    m[..., 1, 0], m[..., 1, 1] = s, c
    m[..., 2, 2] = 1.0
    return m


def _foot_quat(yaw, pitch):
    """Quaternion of Rz(yaw) Ry(pitch); positive pitch lowers the toes."""
    yaw, pitch = np.asarray(yaw, dtype=np.float64), np.asarray(pitch, dtype=np.float64)
    qz = np.stack([np.cos(yaw / 2), 0 * yaw, 0 * yaw, np.sin(yaw / 2)], axis=-1)
    qy = np.stack([np.cos(pitch / 2), 0 * pitch, np.sin(pitch / 2), 0 * pitch], axis=-1)
    return quat_multiply(qz, qy)


def _apply(R, v):
    """Rotate vectors v (..., 3) by matrices R (..., 3, 3)."""
    return np.einsum("...ij,...j->...i", R, v)


def _two_link_knee(hip, ankle, forward, a=THIGH, b=SHIN):
    """Knee positions from hip/ankle targets, bending toward ``forward``."""
    D = ankle - hip
    dist = np.linalg.norm(D, axis=-1, keepdims=True)
    dist_c = np.clip(dist, abs(a - b) + 1e-6, a + b - 1e-6)
    u = D / np.maximum(dist, 1e-9)
    cos_a = np.clip((a * a + dist_c ** 2 - b * b) / (2 * a * dist_c), -1.0, 1.0)
    n = forward - np.sum(forward * u, axis=-1, keepdims=True) * u
    n /= np.maximum(np.linalg.norm(n, axis=-1, keepdims=True), 1e-9)
    return hip + a * (cos_a * u + np.sqrt(1.0 - cos_a ** 2) * n)


# -- IMU synthesis ------------------------------------------------------------

def imu_from_trajectory(positions, orientations, dt: float = 1.0 / SAMPLE_RATE):
    """Local-frame accel (g) and gyro (deg/s) of a sensor following a trajectory.

    ``positions`` (N, 3) in meters, ``orientations`` (N, 4) quaternions or
    (N, 3, 3) matrices mapping sensor to world. Acceleration is the second
    central difference, the two end frames copy their neighbours; gravity is
    added as a +1 g specific-force term along world z before rotating into
    the sensor frame. Angular rate at frame k is the rotation from frame k
    to k+1 (body frame) divided by dt, the last frame repeats the previous
    value, so integrating it reproduces the orientation track exactly.
    """
    p = np.asarray(positions, dtype=np.float64)
    q = np.asarray(orientations, dtype=np.float64)
    if p.ndim != 2 or p.shape[1] != 3 or p.shape[0] < 3:
        raise DataError(f"need at least 3 positions of shape (N, 3), got {p.shape}")
    if q.shape[-2:] == (3, 3):
        q = matrix_to_quat(q)
    if q.shape != (p.shape[0], 4):
        raise DataError(f"orientations must be (N, 4) or (N, 3, 3) matching positions, got {q.shape}")
    acc = np.empty_like(p)
    acc[1:-1] = (p[2:] - 2.0 * p[1:-1] + p[:-2]) / (dt * dt)
    acc[0], acc[-1] = acc[1], acc[-2]
    world = acc / GRAVITY + np.array([0.0, 0.0, 1.0])
    R = quat_to_matrix(q)
    accel_local = np.einsum("nji,nj->ni", R, world)
    rel = quat_multiply(quat_conjugate(q[:-1]), q[1:])
    gyro = np.empty_like(p)
    gyro[:-1] = np.degrees(quat_to_rotvec(rel)) / dt
    gyro[-1] = gyro[-2]
    return accel_local, gyro


def _imu_exact(p, q, dt):
    """IMU channels for interior frames of a padded track (drops one frame each end)."""
    acc = (p[2:] - 2.0 * p[1:-1] + p[:-2]) / (dt * dt)
    world = acc / GRAVITY + np.array([0.0, 0.0, 1.0])
    R = quat_to_matrix(q[1:-1])
    accel_local = np.einsum("nji,nj->ni", R, world)
    rel = quat_multiply(quat_conjugate(q[1:-1]), q[2:])
    gyro = np.degrees(quat_to_rotvec(rel)) / dt
    return accel_local, gyro, world


# -- contact model -------------------------------------------------------------

def _cell_pressures(force, cop_target, layout: SensorLayout, toes_only=False):
    """Distribute vertical force over the cells around a CoP target.

    Each cell's load is max(0, 1 - r^2 / R^2) of its distance to the target,
    scaled so that the cells integrate to ``force``. Returns (pressures, cop).
    """
    pos = layout.positions
    F = force.shape[0]
    d2 = np.sum((pos[None, :, :] - cop_target[:, None, :]) ** 2, axis=-1)
    w = np.maximum(0.0, 1.0 - d2 / 0.09)
    if toes_only:
        w[:, layout.region("heel")] = 0.0
    total = w.sum(axis=1, keepdims=True)
    # a target between cells can leave every weight at zero; use nearest cell
    empty = total[:, 0] <= 0.0
    if np.any(empty):
        nearest = np.argmin(d2[empty], axis=1)
        w[empty] = 0.0
        w[np.flatnonzero(empty), nearest] = 1.0
        total = w.sum(axis=1, keepdims=True)
    share = w / total
    pressures = share * force[:, None] / (CELL_AREA_CM2 * PRESSURE_UNIT)
    cop = np.where(force[:, None] > 0, share @ pos, 0.0)
    pressures = np.where(force[:, None] > 0, pressures, 0.0)
    return pressures, cop


# -- the generator ---------------------------------------------------------------

def _phase(style: GaitStyle, t: np.ndarray, rng: np.random.Generator):
    """Gait-cycle phase (cycles) and root speed at times t."""
    dt = t[1] - t[0]
    if style.variability > 0:
        f_mod = rng.uniform(0.05, 0.15)
        theta_c, theta_s = rng.uniform(0, 2 * np.pi, size=2)
        cad = style.cadence * (1 + style.variability * np.sin(2 * np.pi * f_mod * t + theta_c))
        stride = style.stride * (1 + style.variability * np.sin(2 * np.pi * f_mod * 0.7 * t + theta_s))
    else:
        cad = np.full_like(t, style.cadence)
        stride = np.full_like(t, style.stride)
    # one gait cycle is two steps; trapezoidal integration keeps phase smooth
    rate = cad / 120.0
    phase = np.concatenate([[0.0], np.cumsum(0.5 * (rate[1:] + rate[:-1]) * dt)])
    speed = stride * cad / 60.0
    if style.kind in ("squat", "idle"):
        speed = np.zeros_like(t)
    return phase, speed


def _root_path(style: GaitStyle, t, speed):
    dt = t[1] - t[0]
    yaw = style.heading + style.turn_rate * t
    move = yaw + (np.pi / 2 if style.kind == "sidestep" else 0.0)
    v = np.stack([speed * np.cos(move), speed * np.sin(move)], axis=-1)
    xy = np.concatenate([np.zeros((1, 2)), np.cumsum(0.5 * (v[1:] + v[:-1]) * dt, axis=0)])
    return xy, yaw


def _stance_pitch(u, kind):
    """Foot pitch during stance progress u in [0, 1)."""
    if kind == "tiptoe":
        return np.full_like(u, 0.5)
    if kind == "sidestep":
        return 0.05 * np.sin(np.pi * u)
    strike = -0.2 if kind == "walk" else -0.12
    off = 0.35 if kind == "walk" else 0.5
    return strike * np.maximum(0.0, 1.0 - u / 0.2) ** 2 + off * np.maximum(0.0, (u - 0.7) / 0.3) ** 2


def _foot_tracks(style: GaitStyle, t, phase, root_xy, yaw, side_sign, offset):
    """Ankle positions, yaw, pitch, stance mask and stance progress for one foot."""
    duty = style.duty
    leg_phase = phase + offset
    cycle = np.floor(leg_phase).astype(np.int64)
    frac = leg_phase - cycle
    stance = frac < duty
    lateral = 0.22 if style.kind == "sidestep" else 0.1
    tiptoe = style.kind == "tiptoe"
    ankle_h = ANKLE_HEIGHT + (0.14 * np.sin(0.5) if tiptoe else 0.0)

    # plant position of cycle n: root at mid-stance plus a lateral offset
    n_lo, n_hi = cycle.min() - 1, cycle.max() + 2
    ns = np.arange(n_lo, n_hi + 1)
    mid_phase = ns + duty / 2 - offset
    t_mid = np.interp(mid_phase, phase, t, left=np.nan, right=np.nan)
    # extrapolate beyond the sampled span at the local phase rate
    rate = (phase[-1] - phase[0]) / (t[-1] - t[0])
    t_mid = np.where(mid_phase < phase[0], t[0] + (mid_phase - phase[0]) / rate, t_mid)
    t_mid = np.where(mid_phase > phase[-1], t[-1] + (mid_phase - phase[-1]) / rate, t_mid)
    px = np.interp(t_mid, t, root_xy[:, 0], left=np.nan, right=np.nan)
    py = np.interp(t_mid, t, root_xy[:, 1], left=np.nan, right=np.nan)
    # linear extrapolation of the root path outside the sampled span
    for arr, col in ((px, 0), (py, 1)):
        lo, hi = t_mid < t[0], t_mid > t[-1]
        v0 = (root_xy[1, col] - root_xy[0, col]) / (t[1] - t[0])
        v1 = (root_xy[-1, col] - root_xy[-2, col]) / (t[-1] - t[-2])
        arr[lo] = root_xy[0, col] + v0 * (t_mid[lo] - t[0])
        arr[hi] = root_xy[-1, col] + v1 * (t_mid[hi] - t[-1])
    plant_yaw = style.heading + style.turn_rate * t_mid
    plants = np.stack([px - side_sign * lateral * np.sin(plant_yaw),
                       py + side_sign * lateral * np.cos(plant_yaw),
                       np.full_like(px, ankle_h)], axis=-1)

    k = cycle - n_lo
    cur, nxt = plants[k], plants[k + 1]
    yaw_cur, yaw_nxt = plant_yaw[k], plant_yaw[k + 1]
    u_st = np.where(stance, frac / duty, 0.0)
    u_sw = np.where(stance, 0.0, (frac - duty) / (1.0 - duty))
    ease = _smoothstep(u_sw)
    clearance = {"jog": 0.12, "tiptoe": 0.06, "sidestep": 0.06}.get(style.kind, 0.08)
    ankle = np.where(stance[:, None], cur, cur + (nxt - cur) * ease[:, None])
    ankle[:, 2] += np.where(stance, 0.0, clearance * np.sin(np.pi * u_sw) ** 2)
    foot_yaw = np.where(stance, yaw_cur, yaw_cur + (yaw_nxt - yaw_cur) * _smoothstep(u_sw))

    p_start = _stance_pitch(np.zeros(1), style.kind)[0]
    p_end = _stance_pitch(np.full(1, 1.0 - 1e-9), style.kind)[0]
    pitch = np.where(stance, _stance_pitch(u_st, style.kind),
                     p_end + (p_start - p_end) * _smoothstep(u_sw))
    return ankle, foot_yaw, pitch, stance, u_st, frac


def _loads(style: GaitStyle, stance_l, stance_r, frac_l, frac_r, u_l, u_r):
    """Per-foot share of body weight."""
    duty = style.duty
    if duty >= 0.5:
        ramp = duty - 0.5
        # the foot that just landed takes over the load across double support
        in_l = _smoothstep(frac_l / ramp) if ramp > 0 else np.ones_like(frac_l)
        in_r = _smoothstep(frac_r / ramp) if ramp > 0 else np.ones_like(frac_r)
        both = stance_l & stance_r
        share_l = np.where(both, np.where(frac_l < frac_r, in_l, 1.0 - in_r), stance_l.astype(float))
        return share_l, np.where(stance_r, 1.0 - np.where(both, share_l, 0.0), 0.0) * stance_r
    k = np.pi / (4.0 * duty)
    return (np.where(stance_l, k * np.sin(np.pi * u_l), 0.0),
            np.where(stance_r, k * np.sin(np.pi * u_r), 0.0))


def generate(style: GaitStyle, duration: float, seed: int = 0, body_mass: float = 70.0,
             layout: SensorLayout | None = None, skeleton: Skeleton | None = None) -> MotionSequence:
    """Synthesize ``duration`` seconds at 30 Hz; deterministic per (style, duration, seed)."""
    if isinstance(style, str):
        style = GaitStyle(style)
    if duration <= 0:
        raise ValueError(f"duration must be positive, got {duration}")
    if body_mass <= 0:
        raise ValueError("body mass must be positive")
    skeleton = skeleton or Skeleton.default()
    if skeleton != Skeleton.default():
        raise ValueError("the generator produces the default 22-joint skeleton only")
    layout = layout or SensorLayout.default()
    rng = np.random.default_rng(seed)
    dt = 1.0 / SAMPLE_RATE
    n_frames = int(round(duration * SAMPLE_RATE))
    if n_frames < 1:
        raise ValueError("duration shorter than one frame")
    pad = 2
    t = (np.arange(n_frames + 2 * pad) - pad) * dt
    phase, speed = _phase(style, t, rng)
    root_xy, yaw = _root_path(style, t, speed)
    weight = body_mass * GRAVITY
    N = t.shape[0]

    if style.kind in ("squat", "idle"):
        tracks = []
        for sign in (1.0, -1.0):
            lat = np.stack([-sign * 0.12 * np.sin(yaw), sign * 0.12 * np.cos(yaw)], axis=-1)
            ankle = np.concatenate([root_xy + lat, np.full((N, 1), ANKLE_HEIGHT)], axis=1)
            tracks.append((ankle, yaw.copy(), np.zeros(N), np.ones(N, bool), np.zeros(N), np.zeros(N)))
        share_l = share_r = np.full(N, 0.5)
    else:
        tracks = [_foot_tracks(style, t, phase, root_xy, yaw, 1.0, 0.0),
                  _foot_tracks(style, t, phase, root_xy, yaw, -1.0, 0.5)]
        (_, _, _, st_l, u_l, fr_l), (_, _, _, st_r, u_r, fr_r) = tracks
        share_l, share_r = _loads(style, st_l, st_r, fr_l, fr_r, u_l, u_r)

    # root height: reachable stance with a small bob peaking at mid-stance
    reach = 0.97 * (THIGH + SHIN)
    if style.kind in ("squat", "idle"):
        hip_h = np.sqrt(reach ** 2 - 0.03 ** 2) - 0.02
        z_root = np.full(N, ANKLE_HEIGHT + hip_h + HIP_DROP)
        if style.kind == "squat":
            z_root -= 0.35 * (1.0 - np.cos(2 * np.pi * phase)) / 2.0
    else:
        s = style.duty * style.stride * (1.0 + style.variability)
        if style.kind == "sidestep":
            s = np.hypot(s, 0.22 - HIP_HALF_WIDTH)
        ankle_h = tracks[0][0][:, 2].min()
        hip_h = np.sqrt(max(reach ** 2 - s ** 2, 0.3))
        bob = 0.04 if style.kind == "jog" else 0.02
        z_root = ankle_h + hip_h + HIP_DROP - bob + bob * np.cos(4 * np.pi * (phase - style.duty / 2))
    root = np.concatenate([root_xy, z_root[:, None]], axis=1)
    R_root = _rot_z(yaw)
    fwd = _apply(R_root, np.array([1.0, 0.0, 0.0]))

    joints = np.zeros((N, 22, 3))
    joints[:, 0] = root
    lean = {"jog": 0.12, "squat": 0.0}.get(style.kind, 0.03)
    if style.kind == "squat":
        depth = (1.0 - np.cos(2 * np.pi * phase)) / 2.0
        lean_t = 0.25 * depth
    else:
        depth = np.zeros(N)
        lean_t = np.full(N, lean)
    for j, h in zip(range(9, 14), (0.1, 0.25, 0.4, 0.55, 0.68)):
        joints[:, j] = root + _apply(R_root, np.stack([lean_t * h, 0 * lean_t, np.full(N, h)], axis=-1))

    quats, sensor_pos = [], []
    for side, sign, (ankle, f_yaw, pitch, *_ ) in (("left", 1.0, tracks[0]), ("right", -1.0, tracks[1])):
        base = 1 if side == "left" else 5
        hip = root + _apply(R_root, np.array([0.0, sign * HIP_HALF_WIDTH, -HIP_DROP]))
        q = _foot_quat(f_yaw, pitch)
        R_foot = quat_to_matrix(q)
        knee = _two_link_knee(hip, ankle, fwd)
        joints[:, base] = hip
        joints[:, base + 1] = knee
        joints[:, base + 2] = ankle
        joints[:, base + 3] = ankle + _apply(R_foot, TOE_OFFSET)
        quats.append(q)
        sensor_pos.append(ankle + _apply(R_foot, SENSOR_OFFSET))

    # arms: counter-swing against the same-side leg
    swing_amp = {"walk": 0.35, "jog": 0.6, "tiptoe": 0.25, "sidestep": 0.1}.get(style.kind, 0.0)
    elbow_flex = {"jog": 1.2}.get(style.kind, 0.3)
    for sign, c_idx, offset in ((1.0, 14, 0.0), (-1.0, 18, 0.5)):
        leg_frac = phase + offset
        theta = -swing_amp * np.cos(2 * np.pi * leg_frac)
        if style.kind == "squat":
            theta = 1.3 * depth
        collar = root + _apply(R_root, np.array([0.0, sign * 0.06, 0.48]))
        shoulder = root + _apply(R_root, np.array([0.0, sign * 0.18, 0.46]))
        elbow = shoulder + _apply(R_root, np.stack([UPPER_ARM * np.sin(theta), 0 * theta,
                                                   -UPPER_ARM * np.cos(theta)], axis=-1))
        fa = theta + elbow_flex
        wrist = elbow + _apply(R_root, np.stack([FOREARM * np.sin(fa), 0 * fa, -FOREARM * np.cos(fa)], axis=-1))
        joints[:, c_idx:c_idx + 4] = np.stack([collar, shoulder, elbow, wrist], axis=1)

    # sensors on the padded track, then trim to the requested frames
    insole = np.zeros((N - 2, INSOLE_CHANNELS))
    contact = np.zeros((N - 2, 2), dtype=bool)
    for s_i, (share, track) in enumerate(((share_l, tracks[0]), (share_r, tracks[1]))):
        off = s_i * FOOT_CHANNELS
        accel, gyro, _ = _imu_exact(sensor_pos[s_i], quats[s_i], dt)
        force = weight * share[1:-1]
        stance, u = track[3][1:-1], track[4][1:-1]
        force = np.where(stance, force, 0.0)
        cop_y = -0.35 + 0.7 * u
        if style.kind == "tiptoe":
            cop_y = np.full_like(u, 0.3)
        elif style.kind == "squat":
            cop_y = -0.1 * depth[1:-1]
        elif style.kind in ("idle", "sidestep"):
            cop_y = np.zeros_like(u) if style.kind == "idle" else 0.1 * np.sin(np.pi * u)
        target = np.stack([np.zeros_like(cop_y), cop_y], axis=-1)
        pressures, cop = _cell_pressures(force, target, layout, toes_only=style.kind == "tiptoe")
        insole[:, off + PRESSURE.start:off + PRESSURE.stop] = pressures
        insole[:, off + ACCEL.start:off + ACCEL.stop] = accel
        insole[:, off + GYRO.start:off + GYRO.stop] = gyro
        insole[:, off + FORCE] = force
        insole[:, off + COP.start:off + COP.stop] = cop
        contact[:, s_i] = force > 0

    sl = slice(pad - 1, pad - 1 + n_frames)      # insole arrays already lost one frame each end
    insole = insole[sl]
    contact = contact[sl]
    frames = slice(pad, pad + n_frames)
    displacement = root[frames] - root[pad - 1:pad - 1 + n_frames]
    rel = joints[frames, 1:] - joints[frames, :1]
    orientation = np.stack([quats[0][frames], quats[1][frames]], axis=1)

    if style.noise_level > 0:
        insole = _add_noise(insole, contact, style.noise_level, rng)
    meta = {"style": style.to_dict(), "seed": int(seed), "duration": float(duration),
            "body_mass": float(body_mass), "root_start": root[pad].tolist(),
            "initial_orientation": {"left": orientation[0, 0].tolist(), "right": orientation[0, 1].tolist()}}
    return MotionSequence(insole, rel, displacement, skeleton, orientation, meta)


def _add_noise(insole, contact, level, rng):
    """Gaussian sensor noise; IMU noise triples during contact, contact-only channels stay zero in swing."""
    out = insole.copy()
    F = out.shape[0]
    for s_i in range(2):
        off = s_i * FOOT_CHANNELS
        c = contact[:, s_i]
        imu_scale = np.where(c, 3.0, 1.0)[:, None] * level
        out[:, off + ACCEL.start:off + ACCEL.stop] += 0.05 * imu_scale * rng.standard_normal((F, 3))
        out[:, off + GYRO.start:off + GYRO.stop] += 2.0 * imu_scale * rng.standard_normal((F, 3))
        cm = c[:, None].astype(float)
        p = out[:, off + PRESSURE.start:off + PRESSURE.stop]
        p += cm * level * 0.5 * rng.standard_normal(p.shape)
        np.maximum(p, 0.0, out=p)
        f = out[:, off + FORCE]
        out[:, off + FORCE] = np.maximum(f + c * level * 5.0 * rng.standard_normal(F), 0.0)
        cop = out[:, off + COP.start:off + COP.stop]
        cop += cm * level * 0.01 * rng.standard_normal(cop.shape)
        np.clip(cop, -0.5, 0.5, out=cop)
    return out


def split_dataset(sequences, train_fraction: float = 0.8, seed: int = 0):
    """Split whole sequences into (train, test); deterministic per seed."""
    sequences = list(sequences)
    if len(sequences) < 2:
        raise ValueError("need at least two sequences to split")
    if not 0.0 < train_fraction < 1.0:
        raise ValueError(f"train fraction must lie in (0, 1), got {train_fraction}")
    order = np.random.default_rng(seed).permutation(len(sequences))
    n_train = int(np.clip(round(train_fraction * len(sequences)), 1, len(sequences) - 1))
    return [sequences[i] for i in order[:n_train]], [sequences[i] for i in order[n_train:]]


def style_with(style: GaitStyle, **changes) -> GaitStyle:
    return replace(style, **changes)
