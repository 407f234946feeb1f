"""JSON-lines dataset and motion files, CSV joint export.

A dataset file starts with one header line, followed by one line per frame.
The header lists the sequences in the file; every frame line names its
sequence with ``"s"``. Frame lines are serialized deterministically and
the header stores the SHA-256 of all frame lines, so identical inputs give
byte-identical files.
"""

from __future__ import annotations

import csv
import hashlib
import json
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .conditioning import SensorLayout
from .data.types import (ACCEL, COP, FORCE, FOOT_CHANNELS, GYRO, INSOLE_CHANNELS, PRESSURE, SAMPLE_RATE,
                         MotionSequence, Skeleton)
from .errors import DataError

DATASET_FORMAT = "insolemotion-dataset"
MOTION_FORMAT = "insolemotion-motion"
VERSION = 1
DECIMALS = 7


def _r(x) -> list:
    return np.round(np.asarray(x, dtype=np.float64), DECIMALS).tolist()


def _dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def _side_dict(v: np.ndarray, q: np.ndarray | None) -> dict:
    d = {"p": _r(v[PRESSURE]), "a": _r(v[ACCEL]), "r": _r(v[GYRO]), "f": _r(v[FORCE]), "c": _r(v[COP])}
    if q is not None:
        d["q"] = _r(q)
    return d


def _side_vector(d: dict) -> np.ndarray:
    try:
        v = np.concatenate([d["p"], d["a"], d["r"], [d["f"]], d["c"]]).astype(np.float64)
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"malformed insole side record: {exc}") from exc
    if v.shape != (FOOT_CHANNELS,):
        raise DataError(f"insole side has {v.size} values, expected {FOOT_CHANNELS}")
    return v


def content_hash(lines: Iterable[str]) -> str:
    h = hashlib.sha256()
    for line in lines:
        h.update(line.encode())
        h.update(b"\n")
    return h.hexdigest()


def frame_lines(seq: MotionSequence, s_index: int = 0) -> list[str]:
    lines = []
    q = seq.orientation
    for k in range(len(seq)):
        v = seq.insole[k]
        rec = {"s": s_index, "t": round(k / SAMPLE_RATE, 9),
               "left": _side_dict(v[:FOOT_CHANNELS], None if q is None else q[k, 0]),
               "right": _side_dict(v[FOOT_CHANNELS:], None if q is None else q[k, 1]),
               "pose": {"d": _r(seq.displacement[k]), "j": _r(seq.joints[k])}}
        lines.append(_dumps(rec))
    return lines


def write_dataset(path, sequences: Sequence[MotionSequence], layout: SensorLayout | None = None,
                  run_config: dict | None = None) -> str:
    """Write sequences to a JSON-lines dataset; returns the content hash."""
    sequences = list(sequences)
    if not sequences:
        raise DataError("nothing to write")
    layout = layout or SensorLayout.default()
    skeleton = sequences[0].skeleton
    body, entries = [], []
    for i, seq in enumerate(sequences):
        if seq.skeleton != skeleton:
            raise DataError(f"sequence {i} uses a different skeleton")
        lines = frame_lines(seq, i)
        entries.append({"index": i, "n_frames": len(seq), "style": seq.meta.get("style"),
                        "seed": seq.meta.get("seed"),
                        "initial_orientation": seq.meta.get("initial_orientation"),
                        "content_sha256": content_hash(lines)})
        body.extend(lines)
    digest = content_hash(body)
    header = {"format": DATASET_FORMAT, "version": VERSION, "sample_rate": SAMPLE_RATE,
              "skeleton": skeleton.to_dict(), "skeleton_hash": skeleton.content_hash(),
              "sensor_layout": layout.to_list(), "sequences": entries, "content_sha256": digest,
              "run_config": run_config or {}}
    _write_lines(path, [_dumps(header)] + body)
    return digest


def _write_lines(path, lines: list[str]) -> None:
    path = Path(path)
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            for line in lines:
                fh.write(line)
                fh.write("\n")
    except OSError as exc:
        raise DataError(f"cannot write {path}: {exc}") from exc


def _read_lines(path) -> list[str]:
    try:
        with open(path, encoding="utf-8") as fh:
            return [line.rstrip("\n") for line in fh if line.strip()]
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc


def read_header(path) -> dict:
    lines = _read_lines(path)
    if not lines:
        raise DataError(f"{path} is empty")
    return json.loads(lines[0])


def read_dataset(path, verify: bool = True) -> tuple[list[MotionSequence], dict]:
    """Load every sequence of a dataset file; returns (sequences, header)."""
    lines = _read_lines(path)
    if not lines:
        raise DataError(f"{path} is empty")
    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: bad header line: {exc}") from exc
    if header.get("format") != DATASET_FORMAT:
        raise DataError(f"{path} is not an insole dataset (format={header.get('format')!r})")
    body = lines[1:]
    if verify and content_hash(body) != header.get("content_sha256"):
        raise DataError(f"{path}: frame content does not match the header hash")
    skeleton = Skeleton.from_dict(header["skeleton"])
    n_seq = len(header["sequences"])
    per = [{"insole": [], "disp": [], "joints": [], "q": []} for _ in range(n_seq)]
    for ln, line in enumerate(body, start=2):
        try:
            rec = json.loads(line)
            bucket = per[rec["s"]]
            bucket["insole"].append(np.concatenate([_side_vector(rec["left"]), _side_vector(rec["right"])]))
            bucket["disp"].append(rec["pose"]["d"])
            bucket["joints"].append(rec["pose"]["j"])
            if "q" in rec["left"]:
                bucket["q"].append([rec["left"]["q"], rec["right"]["q"]])
        except (json.JSONDecodeError, KeyError, IndexError, TypeError) as exc:
            raise DataError(f"{path}:{ln}: malformed frame: {exc}") from exc
    seqs = []
    for entry, b in zip(header["sequences"], per):
        if len(b["insole"]) != entry["n_frames"]:
            raise DataError(f"{path}: sequence {entry['index']} has {len(b['insole'])} frames, "
                            f"header says {entry['n_frames']}")
        q = None
        if b["q"] and len(b["q"]) == len(b["insole"]):
            q = np.asarray(b["q"], dtype=np.float64)
            q /= np.linalg.norm(q, axis=-1, keepdims=True)
        meta = {"style": entry.get("style"), "seed": entry.get("seed")}
        if entry.get("initial_orientation"):
            meta["initial_orientation"] = entry["initial_orientation"]
        seqs.append(MotionSequence(np.asarray(b["insole"], dtype=np.float64).reshape(-1, INSOLE_CHANNELS),
                                   np.asarray(b["joints"], dtype=np.float64).reshape(-1, skeleton.J - 1, 3),
                                   np.asarray(b["disp"], dtype=np.float64).reshape(-1, 3),
                                   skeleton, q, meta))
    return seqs, header


def read_datasets(paths) -> tuple[list[MotionSequence], list[dict]]:
    seqs, headers = [], []
    for p in paths:
        s, h = read_dataset(p)
        if headers and h["skeleton_hash"] != headers[0]["skeleton_hash"]:
            raise DataError(f"{p} uses a different skeleton from {paths[0]}")
        seqs.extend(s)
        headers.append(h)
    return seqs, headers


# -- motion output -------------------------------------------------------------

def write_motion(path, joints: np.ndarray, displacement: np.ndarray, skeleton: Skeleton,
                 meta: dict | None = None) -> str:
    """Reconstructed motion: per frame root-relative joints, displacement and world root."""
    joints = np.asarray(joints, dtype=np.float64)
    displacement = np.asarray(displacement, dtype=np.float64)
    root = np.cumsum(displacement, axis=0)
    lines = [_dumps({"t": round(k / SAMPLE_RATE, 9), "pose": {"d": _r(displacement[k]), "j": _r(joints[k])},
                     "root": _r(root[k])}) for k in range(joints.shape[0])]
    digest = content_hash(lines)
    header = {"format": MOTION_FORMAT, "version": VERSION, "sample_rate": SAMPLE_RATE,
              "skeleton": skeleton.to_dict(), "skeleton_hash": skeleton.content_hash(),
              "n_frames": int(joints.shape[0]), "content_sha256": digest}
    header.update(meta or {})
    _write_lines(path, [_dumps(header)] + lines)
    return digest


def read_motion(path) -> tuple[np.ndarray, np.ndarray, dict]:
    """Returns (joints (F, J-1, 3), displacement (F, 3), header) from a motion or dataset file."""
    lines = _read_lines(path)
    if not lines:
        raise DataError(f"{path} is empty")
    header = json.loads(lines[0])
    if header.get("format") == DATASET_FORMAT:
        seqs, _ = read_dataset(path)
        if len(seqs) != 1:
            raise DataError(f"{path} holds {len(seqs)} sequences; pick one for evaluation")
        return seqs[0].joints, seqs[0].displacement, header
    if header.get("format") != MOTION_FORMAT:
        raise DataError(f"{path} is neither a motion nor a dataset file")
    if content_hash(lines[1:]) != header.get("content_sha256"):
        raise DataError(f"{path}: frame content does not match the header hash")
    recs = [json.loads(line) for line in lines[1:]]
    J = header["skeleton"]["J"]
    joints = np.asarray([r["pose"]["j"] for r in recs], dtype=np.float64).reshape(-1, J - 1, 3)
    disp = np.asarray([r["pose"]["d"] for r in recs], dtype=np.float64).reshape(-1, 3)
    return joints, disp, header


def write_joint_csv(path, joints: np.ndarray, displacement: np.ndarray, skeleton: Skeleton) -> None:
    """World-space joint trajectories, one row per frame: root then every other joint."""
    joints = np.asarray(joints, dtype=np.float64)
    root = np.cumsum(np.asarray(displacement, dtype=np.float64), axis=0)
    world = joints + root[:, None, :]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["frame"] + [f"{n}_{a}" for n in skeleton.names for a in "xyz"])
        for k in range(joints.shape[0]):
            vals = np.concatenate([root[k], world[k].reshape(-1)])
            w.writerow([k] + [f"{x:.6f}" for x in vals])
