"""Windowed datasets and epoch loops shared by the CLI, baselines and tests.

Each epoch draws from its own generator ``default_rng([seed, epoch])``, so a
run resumed at an epoch boundary replays exactly the same batches, noise
and dropout masks as an uninterrupted one.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np

from .data.geometry import axis_angle_matrix
from .data.preprocess import StandardizationStats, fit_stats, sliding_windows, standardize, world_frame_sequence
from .data.types import ACCEL_INDEX, MotionSequence, Skeleton
from .diffusion import DiffusionSchedule, pose_training_step
from .displacement import DisplacementPredictor, disp_training_step, select_inputs
from .errors import DataError, NumericalError
from .nn import Adam, AdamConfig


@dataclass
class WindowData:
    """Raw (unstandardized) training windows with world-frame accelerations."""

    joints: np.ndarray          # (N, W, J-1, 3)
    displacement: np.ndarray    # (N, W, 3)
    insole: np.ndarray          # (N, W, 50)
    source: np.ndarray          # (N,) index of the originating sequence
    skeleton: Skeleton

    def __len__(self) -> int:
        return self.joints.shape[0]

    @property
    def W(self) -> int:
        return self.joints.shape[1]

    def subset(self, idx) -> "WindowData":
        idx = np.asarray(idx)
        return WindowData(self.joints[idx], self.displacement[idx], self.insole[idx], self.source[idx], self.skeleton)


def to_world(seqs: Sequence[MotionSequence], orientation_source: str = "auto",
             subtract_gravity: bool = False) -> list[MotionSequence]:
    return [world_frame_sequence(s, orientation_source, subtract_gravity=subtract_gravity) for s in seqs]


def build_windows(seqs: Sequence[MotionSequence], W: int, stride: int = 1, orientation_source: str = "auto",
                  subtract_gravity: bool = False) -> WindowData:
    """Cut world-frame windows from every sequence; ``source`` records the sequence index."""
    seqs = list(seqs)
    if not seqs:
        raise DataError("no sequences to window")
    skeleton = seqs[0].skeleton
    joints, disp, insole, source = [], [], [], []
    for i, seq in enumerate(seqs):
        if seq.skeleton.content_hash() != skeleton.content_hash():
            raise DataError(f"sequence {i} uses a different skeleton")
        world = world_frame_sequence(seq, orientation_source, subtract_gravity=subtract_gravity)
        for w in sliding_windows(world, W, stride, source=i):
            joints.append(w.joints)
            disp.append(w.displacement)
            insole.append(w.insole)
            source.append(i)
    if not joints:
        raise DataError(f"every sequence is shorter than the window length {W}")
    return WindowData(np.stack(joints), np.stack(disp), np.stack(insole), np.array(source), skeleton)


def fit_window_stats(data: WindowData, rotation_invariant: bool = True) -> StandardizationStats:
    vertical = data.skeleton.vertical_axis if rotation_invariant else None
    joints = data.joints.reshape((-1,) + data.joints.shape[2:])
    return fit_stats(data.insole.reshape(-1, data.insole.shape[-1]), joints,
                     data.displacement.reshape(-1, 3), vertical)


def random_vertical_rotations(n: int, rng: np.random.Generator, vertical_axis) -> np.ndarray:
    angles = rng.uniform(0.0, 2.0 * np.pi, size=n)
    return np.stack([axis_angle_matrix(vertical_axis, a) for a in angles])


def rotate_batch(joints, displacement, insole, rotations):
    """Per-item rotation of joints, displacements and world-frame accel channels."""
    joints = np.einsum("bij,bw...j->bw...i", rotations, joints)
    displacement = np.einsum("bij,bwj->bwi", rotations, displacement)
    insole = insole.copy()
    for idx in ACCEL_INDEX.values():
        insole[..., idx] = np.einsum("bij,bwj->bwi", rotations, insole[..., idx])
    return joints, displacement, insole


@dataclass
class TrainConfig:
    epochs: int = 500
    batch_size: int = 256
    learning_rate: float = 1e-3
    seed: int = 0
    augment: bool = True
    max_steps: int | None = None
    clip_norm: float = 1.0

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class TrainState:
    epoch: int = 0
    step: int = 0
    losses: list = field(default_factory=list)


def _batches(n: int, batch_size: int, rng: np.random.Generator):
    order = rng.permutation(n)
    for s in range(0, n, batch_size):
        yield order[s:s + batch_size]


def _loop(data: WindowData, tcfg: TrainConfig, state: TrainState | None, step_fn: Callable,
          on_epoch: Callable | None) -> TrainState:
    state = state or TrainState()
    vertical = data.skeleton.vertical_axis
    for epoch in range(state.epoch, tcfg.epochs):
        rng = np.random.default_rng([tcfg.seed, epoch])
        for idx in _batches(len(data), tcfg.batch_size, rng):
            if tcfg.max_steps is not None and state.step >= tcfg.max_steps:
                return state
            joints, disp, insole = data.joints[idx], data.displacement[idx], data.insole[idx]
            if tcfg.augment:
                rot = random_vertical_rotations(len(idx), rng, vertical)
                joints, disp, insole = rotate_batch(joints, disp, insole, rot)
            state.losses.append(step_fn(joints, disp, insole, rng))
            state.step += 1
        state.epoch = epoch + 1
        if on_epoch is not None:
            on_epoch(state)
    return state


def make_optimizer(model, tcfg: TrainConfig, state: TrainState | None) -> Adam:
    step = state.step if state is not None else 0
    return Adam(model.parameters(), AdamConfig(learning_rate=tcfg.learning_rate, step=step), tcfg.clip_norm)


def train_pose_model(model, data: WindowData, stats: StandardizationStats, schedule: DiffusionSchedule,
                     tcfg: TrainConfig, mode: str = "predict-clean", state: TrainState | None = None,
                     on_epoch: Callable | None = None) -> TrainState:
    model.train()
    opt = make_optimizer(model, tcfg, state)

    def step(joints, disp, insole, rng):
        m0 = standardize(joints, stats, "pose").astype(model.dtype)
        c = standardize(insole, stats, "insole").astype(model.dtype)
        return pose_training_step(m0, c, model, schedule, opt, rng, mode)

    return _loop(data, tcfg, state, step, on_epoch)


def train_disp_model(model: DisplacementPredictor, data: WindowData, stats: StandardizationStats,
                     tcfg: TrainConfig, state: TrainState | None = None,
                     on_epoch: Callable | None = None) -> TrainState:
    model.train()
    opt = make_optimizer(model, tcfg, state)

    def step(joints, disp, insole, rng):
        x = select_inputs(standardize(insole, stats, "insole"), model.cfg.input).astype(model.dtype)
        y = standardize(disp, stats, "disp").astype(model.dtype)
        return disp_training_step(x, y, model, opt, rng)

    return _loop(data, tcfg, state, step, on_epoch)


def train_regressor(model, data: WindowData, stats: StandardizationStats, tcfg: TrainConfig,
                    loss_fn: Callable, state: TrainState | None = None) -> TrainState:
    """Generic supervised loop for direct insole -> pose regressors (baselines)."""
    model.train()
    opt = make_optimizer(model, tcfg, state)

    def step(joints, disp, insole, rng):
        c = standardize(insole, stats, "insole").astype(model.dtype)
        target = standardize(joints, stats, "pose").astype(model.dtype)
        opt.zero_grad()
        loss = loss_fn(model(c, rng=rng), target)
        value = float(loss.data)
        if not np.isfinite(value):
            raise NumericalError(f"non-finite baseline loss at optimizer step {opt.cfg.step + 1}")
        loss.backward()
        opt.step()
        return value

    return _loop(data, tcfg, state, step, None)
