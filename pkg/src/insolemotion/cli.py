"""Command-line entry point: synth, train-pose, train-disp, reconstruct, eval, ablate.

Exit codes: 0 success, 2 usage or config error, 3 data error, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np
from threadpoolctl import threadpool_limits

from . import io
from .bench.metrics import drift_run, path_length
from .bench.experiment import ABLATION_VARIANTS, run_ablation
from .bench.report import format_table, pose_report, root_stat, write_report
from .checkpoint import (check_skeleton, load_checkpoint, model_tensors, restore_model, save_checkpoint,
                         stats_from_tensors)
from .conditioning import SensorLayout
from .config import RunConfig
from .data.preprocess import world_frame_sequence
from .data.types import SAMPLE_RATE, Skeleton
from .denoiser import DenoiserConfig, PoseDenoiser
from .diffusion import make_schedule, sample_long
from .displacement import DispConfig, DisplacementPredictor, predict_displacements
from .errors import DataError, NumericalError
from .synth import STYLE_KINDS, GaitStyle, generate
from .training import TrainState, build_windows, fit_window_stats, train_disp_model, train_pose_model

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERICAL = 0, 2, 3, 4
POSE_KIND = "pose-denoiser"
DISP_KIND = "displacement-predictor"


class UsageError(Exception):
    pass


# -- synth ---------------------------------------------------------------------

def parse_style_spec(spec: str) -> list[str]:
    kinds = [s.strip() for s in spec.split("+") if s.strip()]
    if not kinds:
        raise UsageError("empty style spec")
    for k in kinds:
        if k not in STYLE_KINDS:
            raise UsageError(f"unknown style {k!r}; choose from {', '.join(STYLE_KINDS)}")
    return kinds


def synth_sequences(kinds: list[str], duration: float, segments: int, seed: int, noise_level: float,
                    jitter: bool = True):
    """Split ``duration`` seconds into ``segments`` sequences cycling through ``kinds``."""
    total = int(round(duration * SAMPLE_RATE))
    if segments < 1 or total < segments:
        raise UsageError("need at least one frame per segment")
    counts = [total // segments + (1 if i < total % segments else 0) for i in range(segments)]
    seqs = []
    for i, n in enumerate(counts):
        rng = np.random.default_rng([seed, i])
        kind = kinds[i % len(kinds)]
        base = GaitStyle(kind)
        heading = float(rng.uniform(-np.pi, np.pi)) if jitter else 0.0
        cad_f, str_f = (rng.uniform(0.9, 1.1, size=2) if jitter else (1.0, 1.0))
        style = GaitStyle(kind, cadence=base.cadence * float(cad_f), stride=base.stride * float(str_f),
                          heading=heading, noise_level=noise_level,
                          variability=0.1 if jitter and kind != "idle" else 0.0)
        seqs.append(generate(style, n / SAMPLE_RATE, seed=int(rng.integers(2 ** 31))))
    return seqs


def cmd_synth(args, cfg: RunConfig) -> int:
    kinds = parse_style_spec(args.style)
    seqs = synth_sequences(kinds, args.duration, args.segments, cfg.seed, args.noise_level, not args.no_jitter)
    digest = io.write_dataset(args.out, seqs, run_config=cfg.to_dict())
    print(f"wrote {sum(len(s) for s in seqs)} frames in {len(seqs)} sequence(s) to {args.out} sha256={digest}")
    return EXIT_OK


# -- training ----------------------------------------------------------------------

def _meta(kind: str, model_cfg, skeleton: Skeleton, cfg: RunConfig, state: TrainState, status: str,
          data_hashes: list[str]) -> dict:
    return {"format": "insolemotion-checkpoint", "model_kind": kind, "model_config": model_cfg.to_dict(),
            "skeleton": skeleton.to_dict(), "skeleton_hash": skeleton.content_hash(),
            "sensor_layout": SensorLayout.default().to_list(), "run_config": cfg.to_dict(),
            "status": status, "epoch": state.epoch, "step": state.step, "data_sha256": data_hashes}


def _save(path, model, stats, meta, state: TrainState) -> None:
    tensors = model_tensors(model, stats)
    tensors["train.losses"] = np.asarray(state.losses, dtype=np.float64).reshape(-1)
    save_checkpoint(path, tensors, meta)


def _write_loss_log(path, losses) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["step", "loss"])
        for i, v in enumerate(losses, start=1):
            w.writerow([i, repr(float(v))])


def _train(args, cfg: RunConfig, kind: str) -> int:
    seqs, headers = io.read_datasets(args.data)
    skeleton = seqs[0].skeleton
    data = build_windows(seqs, cfg.W, cfg.stride, cfg.orientation_source, cfg.subtract_gravity)
    hashes = [h["content_sha256"] for h in headers]
    stats = fit_window_stats(data)
    rng = np.random.default_rng([cfg.seed, 2 ** 20])
    if kind == POSE_KIND:
        model_cfg = cfg.denoiser_config()
        model = PoseDenoiser(model_cfg, skeleton, rng)
    else:
        model_cfg = cfg.disp_config()
        model = DisplacementPredictor(model_cfg, rng)
    state = TrainState()
    if args.resume:
        tensors, meta = load_checkpoint(args.resume)
        if meta.get("model_kind") != kind:
            raise DataError(f"{args.resume} holds a {meta.get('model_kind')} checkpoint, not {kind}")
        check_skeleton(meta, skeleton)
        if meta["model_config"] != model_cfg.to_dict():
            raise DataError("resume checkpoint was trained with a different model config")
        restore_model(model, tensors)
        stats = stats_from_tensors(tensors)
        state = TrainState(int(meta["epoch"]), int(meta["step"]), tensors["train.losses"].tolist())
    tcfg = cfg.train_config("pose" if kind == POSE_KIND else "disp")

    def checkpoint(st: TrainState, status: str = "running") -> None:
        _save(args.out, model, stats, _meta(kind, model_cfg, skeleton, cfg, st, status, hashes), st)

    try:
        if kind == POSE_KIND:
            state = train_pose_model(model, data, stats, cfg.schedule(), tcfg, cfg.sampler_mode, state, checkpoint)
        else:
            state = train_disp_model(model, data, stats, tcfg, state, checkpoint)
    except NumericalError:
        checkpoint(state, "failed")
        if args.log:
            _write_loss_log(args.log, state.losses)
        raise
    checkpoint(state, "complete")
    if args.log:
        _write_loss_log(args.log, state.losses)
    last = state.losses[-1] if state.losses else float("nan")
    print(f"{kind}: {state.step} steps over {state.epoch} epochs, final loss {last:.6f}; saved {args.out}")
    return EXIT_OK


def cmd_train_pose(args, cfg):
    return _train(args, cfg, POSE_KIND)


def cmd_train_disp(args, cfg):
    return _train(args, cfg, DISP_KIND)


# -- reconstruct / eval ----------------------------------------------------------

def load_pose_model(path):
    tensors, meta = load_checkpoint(path)
    if meta.get("model_kind") != POSE_KIND:
        raise DataError(f"{path} is not a pose-denoiser checkpoint")
    skeleton = Skeleton.from_dict(meta["skeleton"])
    layout = SensorLayout.from_list(meta["sensor_layout"])
    model = PoseDenoiser(DenoiserConfig(**meta["model_config"]), skeleton, np.random.default_rng(0), layout)
    restore_model(model, tensors, with_optimizer=False)
    return model, stats_from_tensors(tensors), meta


def load_disp_model(path):
    tensors, meta = load_checkpoint(path)
    if meta.get("model_kind") != DISP_KIND:
        raise DataError(f"{path} is not a displacement-predictor checkpoint")
    model = DisplacementPredictor(DispConfig(**meta["model_config"]), np.random.default_rng(0))
    restore_model(model, tensors, with_optimizer=False)
    return model, stats_from_tensors(tensors), meta


def cmd_reconstruct(args, cfg: RunConfig) -> int:
    pose_model, pose_stats, pose_meta = load_pose_model(args.pose_ckpt)
    disp_model, disp_stats, disp_meta = load_disp_model(args.disp_ckpt)
    if pose_meta["skeleton_hash"] != disp_meta["skeleton_hash"]:
        raise DataError("pose and displacement checkpoints use different skeletons")
    seqs, _ = io.read_dataset(args.data)
    if not 0 <= args.sequence < len(seqs):
        raise UsageError(f"sequence index {args.sequence} out of range (file holds {len(seqs)})")
    seq = seqs[args.sequence]
    check_skeleton(pose_meta, seq.skeleton)
    train_cfg = pose_meta["run_config"]
    world = world_frame_sequence(seq, cfg.orientation_source, subtract_gravity=train_cfg["subtract_gravity"])
    sampler = cfg.sampler_config()
    sampler.mode = train_cfg["sampler_mode"]
    joints = sample_long(world.insole, pose_model, make_schedule(pose_model.cfg.T, train_cfg["beta_start"],
                                                                 train_cfg["beta_end"]),
                         sampler, pose_stats)
    disp = predict_displacements(world.insole, disp_model, disp_stats)
    meta = {"run_config": cfg.to_dict(), "pose_checkpoint_sha256": pose_meta["payload_sha256"],
            "disp_checkpoint_sha256": disp_meta["payload_sha256"], "source_sequence": args.sequence}
    digest = io.write_motion(args.out, joints, disp, seq.skeleton, meta)
    if args.csv:
        io.write_joint_csv(args.csv, joints, disp, seq.skeleton)
    print(f"reconstructed {len(seq)} frames to {args.out} sha256={digest}")
    return EXIT_OK


def cmd_eval(args, cfg: RunConfig) -> int:
    pj, pd, ph = io.read_motion(args.pred)
    seqs, gh = io.read_dataset(args.gt)
    if not 0 <= args.sequence < len(seqs):
        raise UsageError(f"sequence index {args.sequence} out of range (file holds {len(seqs)})")
    gt = seqs[args.sequence]
    if ph.get("skeleton_hash") != gh["skeleton_hash"]:
        raise DataError("prediction and ground truth use different skeletons")
    if pj.shape != gt.joints.shape:
        raise DataError(f"length mismatch: prediction has {pj.shape[0]} frames, ground truth {len(gt)}")
    rep = pose_report(pj, gt.joints, gt.skeleton)
    rep.mrpe_m = root_stat(pd, gt.displacement)
    dist = path_length(gt.displacement)
    if dist > 0:
        rep.drift_m, rep.drift_percent = drift_run(np.cumsum(pd, axis=0), gt.displacement.sum(axis=0), dist)
    notes = {"prediction": Path(args.pred).name, "ground_truth": Path(args.gt).name,
             "ground_truth_sha256": gh["content_sha256"], "prediction_sha256": ph.get("content_sha256")}
    write_report(args.out, {"reconstruction": rep}, cfg.to_dict(), notes)
    print(f"wrote {args.out}")
    return EXIT_OK


def cmd_ablate(args, cfg: RunConfig) -> int:
    train, _ = io.read_datasets(args.train)
    test, _ = io.read_datasets(args.test)
    reports = run_ablation(cfg, train, test)
    write_report(args.out, reports, cfg.to_dict(), {"grid": sorted(ABLATION_VARIANTS)})
    print(format_table(reports), end="")
    return EXIT_OK


# -- argument parsing ----------------------------------------------------------------

CONFIG_FLAGS = {
    "W": int, "d": int, "ff_dim": int, "layers": int, "heads": int, "T": int, "dropout": float,
    "batch_size": int, "learning_rate": float, "pose_epochs": int, "disp_epochs": int, "lam": float,
    "overlap": int, "seed": int, "sampler_mode": str, "input_variant": str, "disp_input": str,
    "stride": int, "max_steps": int, "orientation_source": str,
}


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="flat JSON run config")
    p.add_argument("--threads", type=int, default=1, help="BLAS threads (1 guarantees bit-reproducibility)")
    for name, typ in CONFIG_FLAGS.items():
        p.add_argument("--" + name.replace("_", "-"), dest=name, type=typ, default=None)
    p.add_argument("--no-insole-mha", dest="insole_mha", action="store_const", const=False, default=None)
    p.add_argument("--no-augment", dest="augment", action="store_const", const=False, default=None)
    p.add_argument("--subtract-gravity", dest="subtract_gravity", action="store_const", const=True, default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="insolemotion", description="Insole-driven motion reconstruction")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic paired dataset")
    p.add_argument("--style", required=True, help="style or '+'-joined styles, e.g. walk+jog")
    p.add_argument("--duration", type=float, required=True, help="total seconds")
    p.add_argument("--segments", type=int, default=1, help="number of sequences")
    p.add_argument("--noise-level", type=float, default=0.0)
    p.add_argument("--no-jitter", action="store_true", help="use style defaults exactly")
    p.add_argument("--out", required=True)
    _add_common(p)
    p.set_defaults(func=cmd_synth)

    for name, func, kind in (("train-pose", cmd_train_pose, "pose denoiser"),
                             ("train-disp", cmd_train_disp, "displacement predictor")):
        p = sub.add_parser(name, help=f"train the {kind}")
        p.add_argument("--data", nargs="+", required=True)
        p.add_argument("--out", required=True, help="checkpoint path")
        p.add_argument("--log", help="CSV loss log")
        p.add_argument("--resume", help="checkpoint to resume from")
        _add_common(p)
        p.set_defaults(func=func)

    p = sub.add_parser("reconstruct", help="insole data -> motion")
    p.add_argument("--data", required=True)
    p.add_argument("--sequence", type=int, default=0)
    p.add_argument("--pose-ckpt", required=True)
    p.add_argument("--disp-ckpt", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--csv", help="also export world-space joint trajectories")
    _add_common(p)
    p.set_defaults(func=cmd_reconstruct)

    p = sub.add_parser("eval", help="score a motion file against ground truth")
    p.add_argument("--pred", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--sequence", type=int, default=0)
    p.add_argument("--out", required=True, help="report JSON path (a .txt table is written alongside)")
    _add_common(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("ablate", help="train and score the full / pressure / IMU / no-MHA grid")
    p.add_argument("--train", nargs="+", required=True)
    p.add_argument("--test", nargs="+", required=True)
    p.add_argument("--out", required=True, help="report JSON path")
    _add_common(p)
    p.set_defaults(func=cmd_ablate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    overrides = {k: getattr(args, k) for k in list(CONFIG_FLAGS) + ["insole_mha", "augment", "subtract_gravity"]}
    try:
        cfg = RunConfig.load(args.config, overrides)
        if args.threads < 1:
            raise UsageError("--threads must be at least 1")
        with threadpool_limits(limits=args.threads):
            return args.func(args, cfg)
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (UsageError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
