"""Run configuration shared by every CLI command and embedded in every artifact."""

from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass, fields
from pathlib import Path

from .denoiser import DenoiserConfig
from .diffusion import SAMPLER_MODES, SamplerConfig, make_schedule
from .displacement import DISP_INPUTS, DispConfig
from .training import TrainConfig

SEED_ENV = "S2M_SEED"
ORIENTATION_SOURCES = ("auto", "truth", "integrate")


@dataclass
class RunConfig:
    W: int = 100
    d: int = 256
    ff_dim: int = 512
    layers: int = 2
    heads: int = 8
    T: int = 200
    beta_start: float = 1e-4
    beta_end: float = 0.02
    dropout: float = 0.1
    batch_size: int = 256
    learning_rate: float = 1e-3
    pose_epochs: int = 500
    disp_epochs: int = 200
    lam: float = 0.001
    overlap: int = 25
    seed: int = 0
    sampler_mode: str = "predict-clean"
    input_variant: str = "full"
    insole_mha: bool = True
    disp_input: str = "imu"
    stride: int = 5
    augment: bool = True
    max_steps: int | None = None
    orientation_source: str = "auto"
    subtract_gravity: bool = False

    def __post_init__(self):
        for f in fields(self):
            value = getattr(self, f.name)
            if f.name == "max_steps":
                if value is not None and (not isinstance(value, int) or value < 1):
                    raise ValueError("max_steps must be a positive integer or null")
                continue
            kind = type(f.default)
            if kind is bool and not isinstance(value, bool):
                raise ValueError(f"config field {f.name} must be true/false, got {value!r}")
            if kind is int and (isinstance(value, bool) or not isinstance(value, int)):
                raise ValueError(f"config field {f.name} must be an integer, got {value!r}")
            if kind is float:
                if isinstance(value, bool) or not isinstance(value, (int, float)):
                    raise ValueError(f"config field {f.name} must be a number, got {value!r}")
                setattr(self, f.name, float(value))
        if self.sampler_mode not in SAMPLER_MODES:
            raise ValueError(f"sampler_mode must be one of {SAMPLER_MODES}")
        if self.disp_input not in DISP_INPUTS:
            raise ValueError(f"disp_input must be one of {sorted(DISP_INPUTS)}")
        if self.orientation_source not in ORIENTATION_SOURCES:
            raise ValueError(f"orientation_source must be one of {ORIENTATION_SOURCES}")
        if not 0 <= self.overlap < self.W:
            raise ValueError(f"overlap must lie in 0..W-1, got {self.overlap}")
        for name in ("W", "d", "ff_dim", "layers", "heads", "T", "batch_size", "stride"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if self.lam < 0:
            raise ValueError("lam must be non-negative")
        # sub-configs validate their own invariants
        self.denoiser_config()
        self.disp_config()
        self.schedule()

    # -- construction ------------------------------------------------------
    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(d) - known)
        if unknown:
            raise ValueError(f"unknown config keys: {', '.join(unknown)}")
        return cls(**d)

    @classmethod
    def load(cls, path=None, overrides: dict | None = None, env=None) -> "RunConfig":
        """Defaults, then the JSON file, then explicit overrides, then the seed env var."""
        env = os.environ if env is None else env
        data = {}
        if path is not None:
            try:
                data = json.loads(Path(path).read_text())
            except (OSError, json.JSONDecodeError) as exc:
                raise ValueError(f"cannot read config {path}: {exc}") from exc
            if not isinstance(data, dict):
                raise ValueError(f"config {path} must hold a flat JSON object")
        data.update({k: v for k, v in (overrides or {}).items() if v is not None})
        if env.get(SEED_ENV):
            try:
                data["seed"] = int(env[SEED_ENV])
            except ValueError as exc:
                raise ValueError(f"{SEED_ENV} must be an integer") from exc
        return cls.from_dict(data)

    def to_dict(self) -> dict:
        return asdict(self)

    # -- derived configs ------------------------------------------------------
    def denoiser_config(self) -> DenoiserConfig:
        return DenoiserConfig(d=self.d, ff_dim=self.ff_dim, layers=self.layers, heads_self=self.heads, T=self.T,
                              W=self.W, dropout=self.dropout, insole_mha=self.insole_mha,
                              input_variant=self.input_variant)

    def disp_config(self) -> DispConfig:
        return DispConfig(d=self.d, ff_dim=self.ff_dim, layers=self.layers, heads=self.heads, lam=self.lam,
                          input=self.disp_input, W=self.W, dropout=self.dropout)

    def schedule(self):
        return make_schedule(self.T, self.beta_start, self.beta_end)

    def sampler_config(self) -> SamplerConfig:
        return SamplerConfig(self.sampler_mode, self.overlap, self.seed)

    def train_config(self, kind: str) -> TrainConfig:
        epochs = self.pose_epochs if kind == "pose" else self.disp_epochs
        return TrainConfig(epochs=epochs, batch_size=self.batch_size, learning_rate=self.learning_rate,
                           seed=self.seed, augment=self.augment, max_steps=self.max_steps)
