"""Pose denoising network conditioned on insole data.

The noisy pose window is split into left-leg, right-leg and body streams,
each embedded per frame and concatenated along time (3W tokens). Every
layer runs self-attention, adds a layer-specific projection of the timestep
embedding, cross-attends to the insole components and applies a
feed-forward block.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .conditioning import (
    ComponentEmbedder,
    N_COMPONENTS,
    SensorLayout,
    component_dims,
    component_mask,
    merge_components,
    split_components,
)
from .data.types import INSOLE_CHANNELS, Skeleton
from .errors import NumericalError, ShapeError
from .nn import (
    FeedForward,
    LayerNorm,
    Linear,
    MLP,
    Module,
    MultiHeadAttention,
    Parameter,
    Tensor,
    as_tensor,
    concat,
    dropout,
    getitem,
    matmul,
    merge_heads,
    scaled_dot_attention,
    sinusoidal_table,
    stack,
)


@dataclass
class DenoiserConfig:
    d: int = 256
    ff_dim: int = 512
    layers: int = 2
    heads_self: int = 8
    T: int = 200
    W: int = 100
    dropout: float = 0.1
    insole_mha: bool = True
    input_variant: str = "full"
    cond_hidden: int | None = None

    def __post_init__(self):
        if self.d % N_COMPONENTS or self.d % self.heads_self:
            raise ValueError(f"embedding dim {self.d} must be divisible by 8 and by the self-attention heads")
        if self.layers < 1:
            raise ValueError("need at least one transformer layer")
        component_mask(self.input_variant)

    def to_dict(self) -> dict:
        return asdict(self)


def timestep_encoding(t, d: int, T: int) -> np.ndarray:
    """Raw sinusoidal encoding of diffusion steps ``t`` in 1..T, shape (B, d)."""
    t = np.atleast_1d(np.asarray(t))
    if np.any(t < 1) or np.any(t > T):
        raise ValueError(f"diffusion step out of range 1..{T}: {t.min()}..{t.max()}")
    return sinusoidal_table(t, d)


class InsoleMultiHeadAttention(Module):
    """Cross-attention whose head i reads keys and values from insole component i only.

    Per head the query, key and value projections are d x d/8; the
    concatenated heads go through a d x d output matrix.
    """

    def __init__(self, d: int, rng: np.random.Generator, dropout_p: float = 0.0, dtype=np.float32):
        dh = d // N_COMPONENTS
        bound = math.sqrt(1.0 / d)
        shape = (N_COMPONENTS, d, dh)
        self.d, self.dh, self.dropout_p = d, dh, dropout_p
        self.w_q = Parameter(rng.uniform(-bound, bound, shape).astype(dtype))
        self.w_k = Parameter(rng.uniform(-bound, bound, shape).astype(dtype))
        self.w_v = Parameter(rng.uniform(-bound, bound, shape).astype(dtype))
        self.w_o = Parameter(rng.uniform(-bound, bound, (d, d)).astype(dtype))

    def heads(self, m_emb: Tensor, c_embs, rng: np.random.Generator | None = None) -> Tensor:
        """Per-head outputs before the output projection, shape (B, 8, n, d/8)."""
        if len(c_embs) != N_COMPONENTS:
            raise ShapeError(f"insole attention needs {N_COMPONENTS} component embeddings, got {len(c_embs)}")
        B, n, d = m_emb.shape
        c = stack(list(c_embs), axis=1)                       # (B, 8, W, d)
        q = matmul(m_emb.reshape(B, 1, n, d), self.w_q)       # (B, 8, n, dh)
        k = matmul(c, self.w_k)                                # (B, 8, W, dh)
        v = matmul(c, self.w_v)
        p = self.dropout_p if self.training else 0.0
        return scaled_dot_attention(q, k, v, p, rng if self.training else None)

    def __call__(self, m_emb: Tensor, c_embs, rng: np.random.Generator | None = None) -> Tensor:
        return matmul(merge_heads(self.heads(m_emb, c_embs, rng)), self.w_o)


class DenoiserLayer(Module):
    def __init__(self, cfg: DenoiserConfig, rng: np.random.Generator, dtype=np.float32):
        d = cfg.d
        self.dropout_p = cfg.dropout
        self.insole_mha = cfg.insole_mha
        self.norm_self = LayerNorm(d, dtype)
        self.self_attn = MultiHeadAttention(d, cfg.heads_self, rng, cfg.dropout, dtype)
        self.time_proj = Linear(d, d, rng, dtype=dtype)
        self.norm_cross = LayerNorm(d, dtype)
        if cfg.insole_mha:
            self.cross_attn = InsoleMultiHeadAttention(d, rng, cfg.dropout, dtype)
        else:
            self.cross_attn = MultiHeadAttention(d, N_COMPONENTS, rng, cfg.dropout, dtype)
        self.norm_ff = LayerNorm(d, dtype)
        self.ff = FeedForward(d, cfg.ff_dim, rng, cfg.dropout, dtype)

    def __call__(self, x: Tensor, t_emb: Tensor, cond, rng=None) -> Tensor:
        drop = self.dropout_p if self.training else 0.0
        x = x + dropout(self.self_attn(self.norm_self(x), rng=rng), drop, rng)
        B, d = t_emb.shape
        x = x + self.time_proj(t_emb).reshape(B, 1, d)
        h = self.norm_cross(x)
        if self.insole_mha:
            h = self.cross_attn(h, cond, rng=rng)
        else:
            h = self.cross_attn(h, context=cond, rng=rng)
        x = x + dropout(h, drop, rng)
        return x + dropout(self.ff(self.norm_ff(x), rng=rng), drop, rng)


class PoseDenoiser(Module):
    """f(m_t, t, c) -> pose window, all in standardized units."""

    def __init__(self, cfg: DenoiserConfig, skeleton: Skeleton, rng: np.random.Generator,
                 layout: SensorLayout | None = None, dtype=np.float32):
        self.cfg = cfg
        self.skeleton = skeleton
        self.layout = layout or SensorLayout.default()
        self.dtype = np.dtype(dtype)
        d = cfg.d
        n_body = len(skeleton.body)
        self.embed_left = Linear(12, d, rng, dtype=dtype)
        self.embed_right = Linear(12, d, rng, dtype=dtype)
        self.embed_body = Linear(3 * n_body, d, rng, dtype=dtype)
        self.time_mlp = MLP((d, d, d), rng, dtype)
        if cfg.insole_mha:
            self.cond_embed = ComponentEmbedder(component_dims(self.layout), d, rng, cfg.cond_hidden, dtype)
        else:
            h = cfg.cond_hidden or d
            self.cond_embed = MLP((INSOLE_CHANNELS, h, h, d), rng, dtype)
        self.blocks = [DenoiserLayer(cfg, rng, dtype) for _ in range(cfg.layers)]
        self.final_norm = LayerNorm(d, dtype)
        self.out_left = Linear(d, 12, rng, dtype=dtype)
        self.out_right = Linear(d, 12, rng, dtype=dtype)
        self.out_body = Linear(d, 3 * n_body, rng, dtype=dtype)
        order = np.concatenate([skeleton.left_leg, skeleton.right_leg, skeleton.body])
        self._unpartition = np.argsort(order)
        self._channel_mask = component_mask(cfg.input_variant)
        self.name_parameters()

    # -- pieces --------------------------------------------------------
    def positional(self, W: int) -> np.ndarray:
        return sinusoidal_table(np.arange(W), self.cfg.d).astype(self.dtype)

    def embed_pose_parts(self, m_left, m_right, m_body) -> Tensor:
        """(B, W, 4, 3), (B, W, 4, 3), (B, W, nb, 3) -> (B, 3W, d)."""
        parts = []
        for m, layer in ((m_left, self.embed_left), (m_right, self.embed_right), (m_body, self.embed_body)):
            m = as_tensor(m, self.dtype)
            B, W = m.shape[0], m.shape[1]
            flat = m.reshape(B, W, -1)
            if flat.shape[-1] != layer.n_in:
                raise ShapeError(f"pose part has {flat.shape[-1]} values per frame, expected {layer.n_in}")
            parts.append(layer(flat) + self.positional(W))
        return concat(parts, axis=1)

    def timestep_embedding(self, t) -> Tensor:
        enc = timestep_encoding(t, self.cfg.d, self.cfg.T).astype(self.dtype)
        return self.time_mlp(Tensor(enc))

    def condition(self, c) -> list[Tensor] | Tensor:
        """Embed standardized insole windows (B, W, 50) and add positional encodings."""
        c = np.asarray(c.data if isinstance(c, Tensor) else c, dtype=self.dtype)
        if c.shape[-1] != INSOLE_CHANNELS:
            raise ShapeError(f"insole window must have {INSOLE_CHANNELS} channels, got {c.shape[-1]}")
        W = c.shape[-2]
        pe = self.positional(W)
        comps = split_components(c, self.layout)
        mask = self._channel_mask
        if not mask.all():
            comps = [x if keep else np.zeros_like(x) for x, keep in zip(comps, mask)]
        if self.cfg.insole_mha:
            return [e + pe for e in self.cond_embed(comps)]
        full = merge_components(comps, self.layout)
        return self.cond_embed(Tensor(full)) + pe

    # -- forward ----------------------------------------------------------
    def __call__(self, m_t, t, c, rng: np.random.Generator | None = None) -> Tensor:
        m_t = as_tensor(m_t, self.dtype)
        if m_t.ndim != 4 or m_t.shape[2:] != (self.skeleton.J - 1, 3):
            raise ShapeError(f"noisy pose must be (B, W, {self.skeleton.J - 1}, 3), got {m_t.shape}")
        B, W = m_t.shape[0], m_t.shape[1]
        c = np.asarray(c)
        if c.shape != (B, W, INSOLE_CHANNELS):
            raise ShapeError(f"insole window must be {(B, W, INSOLE_CHANNELS)}, got {c.shape}")
        t = np.broadcast_to(np.asarray(t), (B,))
        sk = self.skeleton
        m_left = getitem(m_t, (slice(None), slice(None), sk.left_leg))
        m_right = getitem(m_t, (slice(None), slice(None), sk.right_leg))
        m_body = getitem(m_t, (slice(None), slice(None), sk.body))
        x = self.embed_pose_parts(m_left, m_right, m_body)
        t_emb = self.timestep_embedding(t)
        cond = self.condition(c)
        for i, block in enumerate(self.blocks):
            x = block(x, t_emb, cond, rng=rng if self.training else None)
            if not np.all(np.isfinite(x.data)):
                raise NumericalError(f"non-finite activation in denoiser layer {i}")
        x = self.final_norm(x)
        n_body = len(sk.body)
        out_l = self.out_left(x[:, :W]).reshape(B, W, 4, 3)
        out_r = self.out_right(x[:, W:2 * W]).reshape(B, W, 4, 3)
        out_b = self.out_body(x[:, 2 * W:]).reshape(B, W, n_body, 3)
        merged = concat([out_l, out_r, out_b], axis=2)
        return getitem(merged, (slice(None), slice(None), self._unpartition))

    def predict(self, m_t, t, c) -> np.ndarray:
        """Inference forward pass on plain arrays (dropout off)."""
        was = self.training
        self.eval()
        try:
            return self(m_t, t, c).data
        finally:
            self.train(was)
