"""Direct-regression baselines: insole window in, pose window out, MAE-trained."""

from __future__ import annotations

import numpy as np

from ..data.preprocess import StandardizationStats, destandardize, standardize
from ..data.types import INSOLE_CHANNELS, Skeleton
from ..errors import ShapeError
from ..nn import EncoderLayer, LayerNorm, Linear, MLP, Module, Tensor, as_tensor, mean, sinusoidal_table, tabs


class MLPBaseline(Module):
    """Flattened insole window -> four GeLU hidden layers -> flattened pose window."""

    def __init__(self, W: int, skeleton: Skeleton, rng: np.random.Generator, hidden: int = 1024,
                 depth: int = 4, dtype=np.float32):
        self.W, self.skeleton, self.dtype = W, skeleton, np.dtype(dtype)
        n_out = W * (skeleton.J - 1) * 3
        self.mlp = MLP((W * INSOLE_CHANNELS,) + (hidden,) * depth + (n_out,), rng, dtype)
        self.name_parameters()

    def __call__(self, c, rng=None) -> Tensor:
        c = as_tensor(c, self.dtype)
        if c.ndim != 3 or c.shape[1:] != (self.W, INSOLE_CHANNELS):
            raise ShapeError(f"MLP baseline expects (B, {self.W}, {INSOLE_CHANNELS}), got {c.shape}")
        B = c.shape[0]
        return self.mlp(c.reshape(B, -1)).reshape(B, self.W, self.skeleton.J - 1, 3)


class TransformerBaseline(Module):
    """Per-frame linear embedding + positions -> encoder layers -> per-frame pose."""

    def __init__(self, skeleton: Skeleton, rng: np.random.Generator, d: int = 256, ff_dim: int = 512,
                 layers: int = 2, heads: int = 8, dropout: float = 0.1, dtype=np.float32):
        self.skeleton, self.d, self.dtype = skeleton, d, np.dtype(dtype)
        self.embed = Linear(INSOLE_CHANNELS, d, rng, dtype=dtype)
        self.layers = [EncoderLayer(d, heads, ff_dim, rng, dropout, dtype) for _ in range(layers)]
        self.norm = LayerNorm(d, dtype)
        self.head = Linear(d, (skeleton.J - 1) * 3, rng, dtype=dtype)
        self.name_parameters()

    def __call__(self, c, rng=None) -> Tensor:
        c = as_tensor(c, self.dtype)
        if c.ndim != 3 or c.shape[-1] != INSOLE_CHANNELS:
            raise ShapeError(f"transformer baseline expects (B, W, {INSOLE_CHANNELS}), got {c.shape}")
        B, W = c.shape[:2]
        h = self.embed(c) + sinusoidal_table(np.arange(W), self.d).astype(self.dtype)
        for layer in self.layers:
            h = layer(h, rng=rng if self.training else None)
        return self.head(self.norm(h)).reshape(B, W, self.skeleton.J - 1, 3)


def mae(pred: Tensor, target) -> Tensor:
    return mean(tabs(pred - Tensor(np.asarray(target, dtype=pred.dtype))))


def predict_windows(model, insole_windows, stats: StandardizationStats, chunk: int = 64) -> np.ndarray:
    """Destandardized pose predictions for raw insole windows (B, W, 50)."""
    was = model.training
    model.eval()
    try:
        c = standardize(np.asarray(insole_windows, dtype=np.float64), stats, "insole").astype(model.dtype)
        out = np.concatenate([model(c[i:i + chunk]).data for i in range(0, c.shape[0], chunk)])
    finally:
        model.train(was)
    return destandardize(out.astype(np.float64), stats, "pose")
