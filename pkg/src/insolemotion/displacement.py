"""Root displacement regression from insole windows.

An MLP embeds each frame, sinusoidal positions are added, two pre-norm
encoder layers mix the window and a linear head outputs a 3-vector per
frame. Training uses MSE plus a penalty on the prefix-summed error, which
is what drives the global root trajectory.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .data.preprocess import StandardizationStats, destandardize, standardize
from .data.types import IMU_INDEX, INSOLE_CHANNELS, PRESSURE_FORCE_COP_INDEX
from .errors import DataError, NumericalError, ShapeError
from .nn import (Adam, EncoderLayer, LayerNorm, Linear, MLP, Module, Tensor, as_tensor, cumsum, mean,
                 sinusoidal_table, square)

DISP_INPUTS = {
    "imu": IMU_INDEX,
    "imu+pressure": np.arange(INSOLE_CHANNELS),
    "pressure": PRESSURE_FORCE_COP_INDEX,
}


@dataclass
class DispConfig:
    d: int = 256
    ff_dim: int = 512
    layers: int = 2
    heads: int = 8
    lam: float = 0.001
    input: str = "imu"
    W: int = 100
    dropout: float = 0.1

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError(f"cumulative-sum weight must be non-negative, got {self.lam}")
        if self.input not in DISP_INPUTS:
            raise ValueError(f"unknown displacement input variant {self.input!r}; "
                             f"choose from {sorted(DISP_INPUTS)}")
        if self.d % self.heads:
            raise ValueError(f"embedding dim {self.d} is not divisible by {self.heads} heads")

    @property
    def channels(self) -> np.ndarray:
        return DISP_INPUTS[self.input]

    def to_dict(self) -> dict:
        return asdict(self)


def select_inputs(insole: np.ndarray, variant: str) -> np.ndarray:
    """Pick the channels a displacement variant reads from (…, 50) insole data."""
    insole = np.asarray(insole)
    if insole.shape[-1] != INSOLE_CHANNELS:
        raise ShapeError(f"insole data must have {INSOLE_CHANNELS} channels, got {insole.shape[-1]}")
    return insole[..., DISP_INPUTS[variant]]


class DisplacementPredictor(Module):
    def __init__(self, cfg: DispConfig, rng: np.random.Generator, dtype=np.float32):
        self.cfg = cfg
        self.dtype = np.dtype(dtype)
        n_in = len(cfg.channels)
        self.n_in = n_in
        self.embed = MLP((n_in, cfg.d, cfg.d), rng, dtype)
        self.layers = [EncoderLayer(cfg.d, cfg.heads, cfg.ff_dim, rng, cfg.dropout, dtype)
                       for _ in range(cfg.layers)]
        self.norm = LayerNorm(cfg.d, dtype)
        self.head = Linear(cfg.d, 3, rng, dtype=dtype)
        self.name_parameters()

    def __call__(self, x, rng: np.random.Generator | None = None) -> Tensor:
        """(B, W, n_in) standardized inputs -> (B, W, 3) standardized displacements."""
        x = as_tensor(x, self.dtype)
        if x.ndim != 3 or x.shape[-1] != self.n_in:
            raise ShapeError(f"displacement input must be (B, W, {self.n_in}) for variant "
                             f"{self.cfg.input!r}, got {x.shape}")
        W = x.shape[1]
        h = self.embed(x) + sinusoidal_table(np.arange(W), self.cfg.d).astype(self.dtype)
        for i, layer in enumerate(self.layers):
            h = layer(h, rng=rng if self.training else None)
            if not np.all(np.isfinite(h.data)):
                raise NumericalError(f"non-finite activation in displacement layer {i}")
        return self.head(self.norm(h))

    def predict(self, x) -> np.ndarray:
        was = self.training
        self.eval()
        try:
            return self(x).data
        finally:
            self.train(was)


def disp_loss(target, pred, lam: float = 0.001) -> Tensor:
    """mean((pred - target)^2) + lam * mean((cumsum_t(pred - target))^2).

    Works on (W, 3) or (B, W, 3); time is the second-to-last axis. The
    second term equals (lam / W) times the sum over frames of the per-frame
    coordinate-mean of squared prefix-sum errors.
    """
    pred = as_tensor(pred, np.float64)
    target = np.asarray(target, dtype=pred.dtype)
    if target.shape != pred.shape:
        raise ShapeError(f"target shape {target.shape} differs from prediction shape {pred.shape}")
    err = pred - Tensor(target)
    loss = mean(square(err))
    if lam:
        loss = loss + mean(square(cumsum(err, axis=err.ndim - 2))) * lam
    return loss


def disp_loss_value(target, pred, lam: float = 0.001) -> float:
    return float(disp_loss(target, np.asarray(pred, dtype=np.float64), lam).data)


def disp_training_step(inputs: np.ndarray, target: np.ndarray, model: DisplacementPredictor,
                       optimizer: Adam, rng: np.random.Generator) -> float:
    """One Adam step; ``inputs`` (B, W, n_in) and ``target`` (B, W, 3) are standardized."""
    optimizer.zero_grad()
    loss = disp_loss(np.asarray(target, dtype=model.dtype), model(inputs, rng=rng), model.cfg.lam)
    value = float(loss.data)
    if not np.isfinite(value):
        raise NumericalError(f"non-finite displacement loss at optimizer step {optimizer.cfg.step + 1}")
    loss.backward()
    optimizer.step()
    return value


def predict_displacements(insole_seq, model: DisplacementPredictor,
                          stats: StandardizationStats | None = None, W: int | None = None) -> np.ndarray:
    """Per-frame displacements (L, 3) for a full insole sequence (L, 50).

    The sequence is cut into non-overlapping windows; a short tail is
    predicted from the last full window ending at frame L.
    """
    W = W or model.cfg.W
    x = np.asarray(insole_seq, dtype=np.float64)
    if x.ndim != 2:
        raise ShapeError(f"insole sequence must be (L, 50), got {x.shape}")
    L = x.shape[0]
    if L < W:
        raise DataError(f"sequence has {L} frames, shorter than the window length {W}")
    if stats is not None:
        x = standardize(x, stats, "insole")
    x = select_inputs(x, model.cfg.input).astype(model.dtype)
    starts = list(range(0, L - W + 1, W))
    windows = np.stack([x[s:s + W] for s in starts])
    pred = np.concatenate([model.predict(windows[i:i + 64]) for i in range(0, len(windows), 64)])
    pred = pred.astype(np.float64)
    out = np.zeros((L, 3))
    for s, p in zip(starts, pred):
        out[s:s + W] = p
    end = starts[-1] + W
    if end < L:
        tail = model.predict(x[None, L - W:]).astype(np.float64)[0]
        out[end:] = tail[W - (L - end):]
    if stats is not None:
        out = destandardize(out, stats, "disp")
    return out
