"""Layer building blocks on top of the tensor ops."""

from __future__ import annotations

import math
from typing import Iterator, Sequence

import numpy as np

from ..errors import ShapeError
from .optim import Parameter
from .tensor import (
    Tensor,
    concat,
    dropout,
    gelu,
    layer_norm,
    linear,
    matmul,
    scaled_dot_attention,
)


def sinusoidal_encoding(position: float, d: int) -> np.ndarray:
    """Interleaved (sin, cos) pairs with frequencies ``10000^(-2i/d)``."""
    return sinusoidal_table(np.array([position], dtype=np.float64), d)[0]


def sinusoidal_table(positions, d: int) -> np.ndarray:
    if d <= 0 or d % 2:
        raise ValueError(f"sinusoidal encoding needs an even positive dimension, got {d}")
    pos = np.asarray(positions, dtype=np.float64).reshape(-1, 1)
    freqs = 10000.0 ** (-np.arange(0, d, 2, dtype=np.float64) / d)
    table = np.empty((pos.shape[0], d), dtype=np.float64)
    table[:, 0::2] = np.sin(pos * freqs)
    table[:, 1::2] = np.cos(pos * freqs)
    return table


class Module:
    """Minimal container that discovers parameters and submodules by attribute."""

    training: bool = True

    def _children(self) -> Iterator[tuple[str, object]]:
        for key, value in vars(self).items():
            if isinstance(value, (Parameter, Module)):
                yield key, value
            elif isinstance(value, (list, tuple)) and value and all(
                    isinstance(v, (Parameter, Module)) for v in value):
                for i, v in enumerate(value):
                    yield f"{key}.{i}", v

    def named_parameters(self, prefix: str = "") -> Iterator[tuple[str, Parameter]]:
        for key, value in self._children():
            name = f"{prefix}{key}"
            if isinstance(value, Parameter):
                yield name, value
            else:
                yield from value.named_parameters(prefix=name + ".")

    def parameters(self) -> list[Parameter]:
        return [p for _, p in self.named_parameters()]

    def modules(self) -> Iterator["Module"]:
        yield self
        for _, value in self._children():
            if isinstance(value, Module):
                yield from value.modules()

    def train(self, mode: bool = True) -> "Module":
        for m in self.modules():
            m.training = mode
        return self

    def eval(self) -> "Module":
        return self.train(False)

    def zero_grad(self) -> None:
        for p in self.parameters():
            p.grad = None

    def num_parameters(self) -> int:
        return sum(p.data.size for p in self.parameters())

    def state_dict(self) -> dict[str, np.ndarray]:
        return {name: p.data for name, p in self.named_parameters()}

    def load_state_dict(self, state: dict[str, np.ndarray], strict: bool = True) -> None:
        own = dict(self.named_parameters())
        if strict:
            missing = sorted(set(own) - set(state))
            unexpected = sorted(set(state) - set(own))
            if missing or unexpected:
                raise KeyError(f"state mismatch: missing={missing[:5]} unexpected={unexpected[:5]}")
        for name, p in own.items():
            if name not in state:
                continue
            value = np.asarray(state[name])
            if value.shape != p.data.shape:
                raise ShapeError(f"parameter {name}: stored shape {value.shape} != model shape {p.data.shape}")
            p.data = value.astype(p.data.dtype, copy=True)
            p.adam_m = np.zeros_like(p.data)
            p.adam_v = np.zeros_like(p.data)

    def astype(self, dtype) -> "Module":
        for p in self.parameters():
            p.data = p.data.astype(dtype)
            p.adam_m = p.adam_m.astype(dtype)
            p.adam_v = p.adam_v.astype(dtype)
            p.grad = None
        return self

    def name_parameters(self, prefix: str = "") -> "Module":
        for name, p in self.named_parameters(prefix):
            p.name = name
        return self


def _uniform(rng: np.random.Generator, shape, fan_in: int, dtype) -> np.ndarray:
    bound = math.sqrt(1.0 / fan_in)
    return rng.uniform(-bound, bound, size=shape).astype(dtype)


class Linear(Module):
    def __init__(self, n_in: int, n_out: int, rng: np.random.Generator, bias: bool = True,
                 dtype=np.float32):
        self.n_in, self.n_out = n_in, n_out
        self.weight = Parameter(_uniform(rng, (n_in, n_out), n_in, dtype))
        self.bias = Parameter(_uniform(rng, (n_out,), n_in, dtype)) if bias else None

    def __call__(self, x: Tensor) -> Tensor:
        return linear(x, self.weight, self.bias)


class LayerNorm(Module):
    def __init__(self, d: int, dtype=np.float32, eps: float = 1e-5):
        self.gain = Parameter(np.ones(d, dtype=dtype))
        self.bias = Parameter(np.zeros(d, dtype=dtype))
        self.eps = eps

    def __call__(self, x: Tensor) -> Tensor:
        return layer_norm(x, self.gain, self.bias, self.eps)


class MLP(Module):
    """Stack of linear layers with GeLU between consecutive layers."""

    def __init__(self, dims: Sequence[int], rng: np.random.Generator, dtype=np.float32):
        if len(dims) < 2:
            raise ValueError("an MLP needs at least input and output dims")
        self.dims = tuple(dims)
        self.layers = [Linear(a, b, rng, dtype=dtype) for a, b in zip(dims[:-1], dims[1:])]

    def __call__(self, x: Tensor) -> Tensor:
        for i, layer in enumerate(self.layers):
            x = layer(x)
            if i < len(self.layers) - 1:
                x = gelu(x)
        return x


def split_heads(x: Tensor, heads: int) -> Tensor:
    """(..., n, d) -> (..., heads, n, d/heads)."""
    *lead, n, d = x.shape
    x = x.reshape(*lead, n, heads, d // heads)
    nd = len(lead)
    return x.transpose(*range(nd), nd + 1, nd, nd + 2)


def merge_heads(x: Tensor) -> Tensor:
    """(..., heads, n, dh) -> (..., n, heads * dh)."""
    *lead, h, n, dh = x.shape
    nd = len(lead)
    x = x.transpose(*range(nd), nd + 1, nd, nd + 2)
    return x.reshape(*lead, n, h * dh)


class MultiHeadAttention(Module):
    """Standard multi-head attention; bias-free projections."""

    def __init__(self, d: int, heads: int, rng: np.random.Generator, dropout_p: float = 0.0,
                 dtype=np.float32):
        if d % heads:
            raise ValueError(f"embedding dim {d} is not divisible by {heads} heads")
        self.d, self.heads, self.dropout_p = d, heads, dropout_p
        self.q = Linear(d, d, rng, bias=False, dtype=dtype)
        self.k = Linear(d, d, rng, bias=False, dtype=dtype)
        self.v = Linear(d, d, rng, bias=False, dtype=dtype)
        self.o = Linear(d, d, rng, bias=False, dtype=dtype)

    def __call__(self, x: Tensor, context: Tensor | None = None,
                 rng: np.random.Generator | None = None) -> Tensor:
        context = x if context is None else context
        q = split_heads(self.q(x), self.heads)
        k = split_heads(self.k(context), self.heads)
        v = split_heads(self.v(context), self.heads)
        p = self.dropout_p if self.training else 0.0
        out = scaled_dot_attention(q, k, v, p, rng if self.training else None)
        return self.o(merge_heads(out))


class FeedForward(Module):
    def __init__(self, d: int, ff_dim: int, rng: np.random.Generator, dropout_p: float = 0.0,
                 dtype=np.float32):
        self.fc1 = Linear(d, ff_dim, rng, dtype=dtype)
        self.fc2 = Linear(ff_dim, d, rng, dtype=dtype)
        self.dropout_p = dropout_p

    def __call__(self, x: Tensor, rng: np.random.Generator | None = None) -> Tensor:
        h = gelu(self.fc1(x))
        if self.training:
            h = dropout(h, self.dropout_p, rng)
        return self.fc2(h)


class EncoderLayer(Module):
    """Pre-norm transformer encoder layer: self-attention then feed-forward."""

    def __init__(self, d: int, heads: int, ff_dim: int, rng: np.random.Generator,
                 dropout_p: float = 0.0, dtype=np.float32):
        self.norm1 = LayerNorm(d, dtype)
        self.attn = MultiHeadAttention(d, heads, rng, dropout_p, dtype)
        self.norm2 = LayerNorm(d, dtype)
        self.ff = FeedForward(d, ff_dim, rng, dropout_p, dtype)
        self.dropout_p = dropout_p

    def __call__(self, x: Tensor, rng: np.random.Generator | None = None) -> Tensor:
        drop = self.dropout_p if self.training else 0.0
        x = x + dropout(self.attn(self.norm1(x), rng=rng), drop, rng)
        return x + dropout(self.ff(self.norm2(x), rng=rng), drop, rng)


def as_tensor(x, dtype) -> Tensor:
    if isinstance(x, Tensor):
        return x
    return Tensor(np.asarray(x, dtype=dtype))


__all__ = [
    "EncoderLayer",
    "FeedForward",
    "LayerNorm",
    "Linear",
    "MLP",
    "Module",
    "MultiHeadAttention",
    "as_tensor",
    "concat",
    "matmul",
    "merge_heads",
    "sinusoidal_encoding",
    "sinusoidal_table",
    "split_heads",
]
