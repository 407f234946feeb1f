"""Metric reports: dataclass, text table, JSON with a shipped schema, CSV dumps."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from ..data.types import ACCEL_INDEX, PRESSURE, FORCE, channel_index
from .metrics import joint_errors, root_errors, velocity_errors

FORMAT = "insolemotion-report"
VERSION = 1


@dataclass
class Stat:
    mean: float
    std: float

    @classmethod
    def of(cls, values) -> "Stat":
        v = np.asarray(values, dtype=np.float64)
        return cls(float(v.mean()), float(v.std()))

    def to_dict(self) -> dict:
        return {"mean": self.mean, "std": self.std}


@dataclass
class MetricReport:
    """Pose and root errors; std is taken over frames."""

    mpjpe_cm: Stat | None = None
    mpjpe_legs_cm: Stat | None = None
    mpjve_legs_cm_s: Stat | None = None
    mrpe_m: Stat | None = None
    drift_m: float | None = None
    drift_percent: float | None = None
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        for name, value in self.values().items():
            if not np.isfinite(value) or value < 0:
                raise ValueError(f"metric {name} must be finite and non-negative, got {value}")

    def values(self) -> dict:
        out = {}
        for name in ("mpjpe_cm", "mpjpe_legs_cm", "mpjve_legs_cm_s", "mrpe_m"):
            s = getattr(self, name)
            if s is not None:
                out[f"{name}.mean"], out[f"{name}.std"] = s.mean, s.std
        for name in ("drift_m", "drift_percent"):
            if getattr(self, name) is not None:
                out[name] = getattr(self, name)
        return out

    def to_dict(self) -> dict:
        out = {}
        for name in ("mpjpe_cm", "mpjpe_legs_cm", "mpjve_legs_cm_s", "mrpe_m"):
            s = getattr(self, name)
            if s is not None:
                out[name] = s.to_dict()
        for name in ("drift_m", "drift_percent"):
            if getattr(self, name) is not None:
                out[name] = getattr(self, name)
        if self.extra:
            out["extra"] = self.extra
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "MetricReport":
        kw = {}
        for name in ("mpjpe_cm", "mpjpe_legs_cm", "mpjve_legs_cm_s", "mrpe_m"):
            if name in d:
                kw[name] = Stat(d[name]["mean"], d[name]["std"])
        for name in ("drift_m", "drift_percent"):
            if name in d:
                kw[name] = d[name]
        return cls(extra=d.get("extra", {}), **kw)


def pose_report(pred_joints, gt_joints, skeleton, dt: float = 1.0 / 30.0, **kw) -> MetricReport:
    """Pose metrics over (..., F, J-1, 3) arrays; frames from all leading items are pooled."""
    pred = np.asarray(pred_joints, dtype=np.float64)
    gt = np.asarray(gt_joints, dtype=np.float64)
    return MetricReport(
        mpjpe_cm=Stat.of(joint_errors(pred, gt)),
        mpjpe_legs_cm=Stat.of(joint_errors(pred, gt, skeleton.legs)),
        mpjve_legs_cm_s=Stat.of(velocity_errors(pred, gt, dt, skeleton.legs)),
        **kw,
    )


def root_stat(pred_disp, gt_disp) -> Stat:
    return Stat.of(root_errors(pred_disp, gt_disp))


def schema() -> dict:
    text = resources.files("insolemotion").joinpath("report_schema.json").read_text()
    return json.loads(text)


def report_document(reports: dict[str, MetricReport], run_config: dict | None = None,
                    notes: dict | None = None) -> dict:
    doc = {"format": FORMAT, "version": VERSION, "std_over": "frames",
           "units": {"mpjpe": "cm", "mpjve": "cm/s", "mrpe": "m", "drift": "m"},
           "reports": {name: r.to_dict() for name, r in reports.items()}}
    if run_config is not None:
        doc["run_config"] = run_config
    if notes:
        doc["notes"] = notes
    validate_report(doc)
    return doc


def validate_report(doc: dict) -> None:
    jsonschema.validate(doc, schema())


def format_table(reports: dict[str, MetricReport]) -> str:
    cols = [("MPJPE cm", "mpjpe_cm"), ("MPJPE legs cm", "mpjpe_legs_cm"),
            ("MPJVE legs cm/s", "mpjve_legs_cm_s"), ("MRPE m", "mrpe_m")]
    header = ["model"] + [c for c, _ in cols] + ["drift m", "drift %"]
    rows = []
    for name, r in reports.items():
        row = [name]
        for _, key in cols:
            s = getattr(r, key)
            row.append("-" if s is None else f"{s.mean:.3f} ({s.std:.3f})")
        row.append("-" if r.drift_m is None else f"{r.drift_m:.3f}")
        row.append("-" if r.drift_percent is None else f"{r.drift_percent:.2f}")
        rows.append(row)
    widths = [max(len(str(x)) for x in col) for col in zip(header, *rows)]
    line = lambda cells: "  ".join(str(c).ljust(w) for c, w in zip(cells, widths)).rstrip()
    out = [line(header), line(["-" * w for w in widths])] + [line(r) for r in rows]
    return "\n".join(out) + "\n(std over frames)\n"


def write_report(path, reports: dict[str, MetricReport], run_config: dict | None = None,
                 notes: dict | None = None) -> dict:
    """Write ``path`` (JSON) and ``path`` with a .txt suffix (table); returns the JSON document."""
    path = Path(path)
    doc = report_document(reports, run_config, notes)
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    path.with_suffix(".txt").write_text(format_table(reports))
    return doc


def write_pressure_accel_csv(path, insole) -> None:
    """Per-frame summed pressure, total force and accel magnitude for both feet."""
    x = np.asarray(insole, dtype=np.float64)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["frame", "side", "pressure_sum", "total_force_n", "accel_norm_g"])
        for side in ("left", "right"):
            p = x[:, channel_index(side, PRESSURE)].sum(axis=1)
            f = x[:, channel_index(side, FORCE)[0]]
            a = np.linalg.norm(x[:, ACCEL_INDEX[side]], axis=1)
            for k in range(x.shape[0]):
                w.writerow([k, side, f"{p[k]:.6f}", f"{f[k]:.6f}", f"{a[k]:.6f}"])
