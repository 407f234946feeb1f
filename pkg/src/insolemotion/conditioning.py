"""Eight-way split of insole readings and the per-component embedding MLPs.

Per foot the 25 channels become four components: toes pressures, heel
pressures, IMU (world accel + local gyro) and force + CoP. Which pressure
cell belongs to which region comes from a sensor layout table.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources
from typing import NamedTuple, Sequence

import numpy as np

from .data.types import ACCEL, COP, FORCE, GYRO, INSOLE_CHANNELS, PRESSURE, channel_index
from .errors import ShapeError
from .nn import MLP, Module, Tensor, as_tensor

N_COMPONENTS = 8
COMPONENT_KINDS = ("toes", "heel", "imu", "force_cop")


class InsoleComponents(NamedTuple):
    left_toes: np.ndarray
    left_heel: np.ndarray
    left_imu: np.ndarray
    left_force_cop: np.ndarray
    right_toes: np.ndarray
    right_heel: np.ndarray
    right_imu: np.ndarray
    right_force_cop: np.ndarray


COMPONENT_NAMES = InsoleComponents._fields


@dataclass(frozen=True)
class SensorLayout:
    """Pressure cell table: index, region ("toes" or "heel") and normalized (x, y)."""

    entries: tuple

    def __post_init__(self):
        entries = tuple(dict(e) for e in self.entries)
        object.__setattr__(self, "entries", entries)
        if sorted(e["index"] for e in entries) != list(range(16)):
            raise ValueError("sensor layout must list each of the 16 cells exactly once")
        regions = {e["region"] for e in entries}
        if not regions <= {"toes", "heel"} or len(regions) != 2:
            raise ValueError("sensor layout needs both 'toes' and 'heel' regions and nothing else")

    @classmethod
    def default(cls) -> "SensorLayout":
        text = resources.files("insolemotion").joinpath("insole_layout.json").read_text()
        return cls(tuple(json.loads(text)))

    @classmethod
    def from_list(cls, rows: Sequence[dict]) -> "SensorLayout":
        return cls(tuple(rows))

    def to_list(self) -> list[dict]:
        return [dict(e) for e in sorted(self.entries, key=lambda e: e["index"])]

    def region(self, name: str) -> np.ndarray:
        return np.array(sorted(e["index"] for e in self.entries if e["region"] == name), dtype=np.int64)

    @property
    def positions(self) -> np.ndarray:
        rows = sorted(self.entries, key=lambda e: e["index"])
        return np.array([[e["x"], e["y"]] for e in rows], dtype=np.float64)


def component_index_map(layout: SensorLayout | None = None) -> list[np.ndarray]:
    """Channel indices (into the 50-vector) of each of the eight components."""
    layout = layout or SensorLayout.default()
    out = []
    for side in ("left", "right"):
        pressure = channel_index(side, PRESSURE)
        out.append(pressure[layout.region("toes")])
        out.append(pressure[layout.region("heel")])
        out.append(np.concatenate([channel_index(side, ACCEL), channel_index(side, GYRO)]))
        out.append(np.concatenate([channel_index(side, FORCE), channel_index(side, COP)]))
    return out


def component_dims(layout: SensorLayout | None = None) -> list[int]:
    return [len(ix) for ix in component_index_map(layout)]


def split_components(c, layout: SensorLayout | None = None) -> InsoleComponents:
    c = np.asarray(c)
    if c.shape[-1] != INSOLE_CHANNELS:
        raise ShapeError(f"insole data must have {INSOLE_CHANNELS} channels, got {c.shape[-1]}")
    return InsoleComponents(*(c[..., ix] for ix in component_index_map(layout)))


def merge_components(comps: Sequence[np.ndarray], layout: SensorLayout | None = None) -> np.ndarray:
    index_map = component_index_map(layout)
    if len(comps) != N_COMPONENTS:
        raise ShapeError(f"expected {N_COMPONENTS} components, got {len(comps)}")
    first = np.asarray(comps[0])
    out = np.empty(first.shape[:-1] + (INSOLE_CHANNELS,), dtype=first.dtype)
    for ix, comp in zip(index_map, comps):
        out[..., ix] = comp
    return out


def component_mask(variant: str) -> np.ndarray:
    """Which components a pose-model input variant keeps ("full", "pressure", "imu")."""
    kinds = COMPONENT_KINDS * 2
    if variant == "full":
        return np.ones(N_COMPONENTS, dtype=bool)
    if variant == "pressure":
        return np.array([k != "imu" for k in kinds])
    if variant == "imu":
        return np.array([k == "imu" for k in kinds])
    raise ValueError(f"unknown input variant {variant!r}")


class ComponentEmbedder(Module):
    """Eight independent three-layer MLPs, one per insole component."""

    def __init__(self, dims: Sequence[int], d: int, rng: np.random.Generator,
                 hidden: int | None = None, dtype=np.float32):
        if len(dims) != N_COMPONENTS:
            raise ShapeError(f"expected {N_COMPONENTS} component dims, got {len(dims)}")
        hidden = hidden or d
        self.dims = tuple(dims)
        self.d = d
        self.mlps = [MLP((n, hidden, hidden, d), rng, dtype) for n in dims]

    def __call__(self, comps: Sequence) -> list[Tensor]:
        return embed_components(comps, self)


def embed_components(comps: Sequence, embedder: ComponentEmbedder) -> list[Tensor]:
    if len(comps) != N_COMPONENTS:
        raise ShapeError(f"expected {N_COMPONENTS} components, got {len(comps)}")
    dtype = embedder.mlps[0].layers[0].weight.dtype
    out = []
    for i, (comp, mlp, n) in enumerate(zip(comps, embedder.mlps, embedder.dims)):
        x = as_tensor(comp, dtype)
        if x.shape[-1] != n:
            raise ShapeError(f"component {COMPONENT_NAMES[i]} has {x.shape[-1]} channels, embedder expects {n}")
        out.append(mlp(x))
    return out
