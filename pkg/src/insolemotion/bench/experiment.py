"""Train-and-score helpers and the input/attention ablation grid."""

from __future__ import annotations

from dataclasses import replace

import numpy as np

from ..config import RunConfig
from ..data.preprocess import StandardizationStats, destandardize, standardize
from ..denoiser import PoseDenoiser
from ..diffusion import DiffusionSchedule, sample
from ..displacement import DisplacementPredictor, select_inputs
from ..training import WindowData, build_windows, fit_window_stats, train_disp_model, train_pose_model
from .report import MetricReport, Stat, pose_report, root_stat

ABLATION_VARIANTS = {
    "full": {},
    "only-pressure": {"input_variant": "pressure"},
    "only-imu": {"input_variant": "imu"},
    "no-insole-mha": {"insole_mha": False},
}


def sample_windows(model: PoseDenoiser, schedule: DiffusionSchedule, insole_windows, stats: StandardizationStats,
                   mode: str, seed: int = 0, chunk: int = 32) -> np.ndarray:
    """Sample raw-unit pose windows for raw insole windows (N, W, 50); chunk i uses seed + i."""
    c = np.asarray(insole_windows, dtype=np.float64)
    parts = [sample(c[s:s + chunk], model, schedule, seed + i, mode, stats)
             for i, s in enumerate(range(0, c.shape[0], chunk))]
    return np.concatenate(parts)


def predict_disp_windows(model: DisplacementPredictor, insole_windows, stats: StandardizationStats,
                         chunk: int = 64) -> np.ndarray:
    x = select_inputs(standardize(np.asarray(insole_windows, dtype=np.float64), stats, "insole"), model.cfg.input)
    x = x.astype(model.dtype)
    out = np.concatenate([model.predict(x[s:s + chunk]) for s in range(0, x.shape[0], chunk)])
    return destandardize(out.astype(np.float64), stats, "disp")


def evaluate_pose(model, schedule, data: WindowData, stats, mode: str, seed: int = 0) -> MetricReport:
    pred = sample_windows(model, schedule, data.insole, stats, mode, seed)
    return pose_report(pred, data.joints, data.skeleton)


def evaluate_disp(model, data: WindowData, stats) -> Stat:
    """MRPE (m) with the root restarted at every window."""
    return root_stat(predict_disp_windows(model, data.insole, stats), data.displacement)


def run_ablation(cfg: RunConfig, train_seqs, test_seqs, variants: dict | None = None,
                 eval_stride: int | None = None) -> dict[str, MetricReport]:
    """Train and score one pose model per variant; all share data, stats and seeds."""
    variants = ABLATION_VARIANTS if variants is None else variants
    train = build_windows(train_seqs, cfg.W, cfg.stride, cfg.orientation_source, cfg.subtract_gravity)
    test = build_windows(test_seqs, cfg.W, eval_stride or cfg.W, cfg.orientation_source, cfg.subtract_gravity)
    stats = fit_window_stats(train)
    schedule = cfg.schedule()
    reports = {}
    for name, changes in variants.items():
        vcfg = replace(cfg, **changes)
        model = PoseDenoiser(vcfg.denoiser_config(), train.skeleton, np.random.default_rng([cfg.seed, 2 ** 20]))
        state = train_pose_model(model, train, stats, schedule, vcfg.train_config("pose"), vcfg.sampler_mode)
        rep = evaluate_pose(model, schedule, test, stats, vcfg.sampler_mode, cfg.seed)
        rep.extra = {"variant": changes, "train_steps": state.step, "final_loss": state.losses[-1]}
        reports[name] = rep
    return reports
