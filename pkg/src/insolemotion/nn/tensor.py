"""Reverse-mode differentiation over numpy arrays for a fixed set of ops.

Every op builds a node holding its output array and a closure that maps the
output gradient to gradients of its inputs. ``Tensor.backward`` walks the
graph in reverse topological order. Only the operations the motion models
need are provided.
"""

from __future__ import annotations

import math
from typing import Callable, Sequence

import numpy as np

from ..errors import ShapeError

_SQRT_2_OVER_PI = math.sqrt(2.0 / math.pi)
_GELU_C = 0.044715


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward", "name")

    def __init__(self, data, requires_grad: bool = False, name: str | None = None,
                 _parents: tuple = (), _backward: Callable | None = None):
        if isinstance(data, Tensor):
            data = data.data
        arr = np.asarray(data)
        if arr.dtype.kind != "f":
            arr = arr.astype(np.float64)
        self.data = arr
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad or any(p.requires_grad for p in _parents)
        self._parents = _parents if self.requires_grad else ()
        self._backward = _backward if self.requires_grad else None
        self.name = name

    # -- array-ish conveniences ------------------------------------------
    @property
    def shape(self) -> tuple:
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def ndim(self) -> int:
        return self.data.ndim

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return float(self.data)

    def __repr__(self) -> str:
        label = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}, dtype={self.dtype}{label})"

    # -- autodiff --------------------------------------------------------
    def backward(self, grad: np.ndarray | None = None) -> None:
        if grad is None:
            if self.data.size != 1:
                raise ShapeError(f"backward() without a gradient needs a scalar, got shape {self.shape}")
            grad = np.ones_like(self.data)
        order: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for parent in node._parents:
                if parent.requires_grad and id(parent) not in seen:
                    stack.append((parent, False))
        grads: dict[int, np.ndarray] = {id(self): np.asarray(grad, dtype=self.data.dtype)}
        for node in reversed(order):
            g = grads.pop(id(node), None)
            if g is None:
                continue
            if node._backward is None:
                node.grad = g if node.grad is None else node.grad + g
                continue
            for parent, pg in zip(node._parents, node._backward(g)):
                if pg is None or not parent.requires_grad:
                    continue
                key = id(parent)
                grads[key] = pg if key not in grads else grads[key] + pg

    # -- operators -------------------------------------------------------
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return add(self, neg(_as_tensor(other, self.dtype)))

    def __rsub__(self, other):
        return add(_as_tensor(other, self.dtype), neg(self))

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Tensor):
            raise TypeError("division by a Tensor is not supported")
        return mul(self, 1.0 / other)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, idx):
        return getitem(self, idx)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    def transpose(self, *axes):
        if len(axes) == 1 and isinstance(axes[0], (tuple, list)):
            axes = tuple(axes[0])
        return transpose(self, axes)

    def sum(self, axis=None):
        return tsum(self, axis)

    def mean(self, axis=None):
        return mean(self, axis)


def _as_tensor(x, dtype=None) -> Tensor:
    if isinstance(x, Tensor):
        return x
    arr = np.asarray(x, dtype=dtype if dtype is not None else None)
    return Tensor(arr)


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


# -- elementwise ---------------------------------------------------------

def add(a, b) -> Tensor:
    a = _as_tensor(a)
    b = _as_tensor(b, a.dtype)
    out = a.data + b.data
    sa, sb = a.shape, b.shape
    return Tensor(out, _parents=(a, b),
                  _backward=lambda g: (_unbroadcast(g, sa), _unbroadcast(g, sb)))


def neg(a: Tensor) -> Tensor:
    return Tensor(-a.data, _parents=(a,), _backward=lambda g: (-g,))


def mul(a, b) -> Tensor:
    a = _as_tensor(a)
    if not isinstance(b, Tensor):
        s = b
        return Tensor(a.data * s, _parents=(a,), _backward=lambda g: (g * s,))
    ad, bd = a.data, b.data
    return Tensor(ad * bd, _parents=(a, b),
                  _backward=lambda g: (_unbroadcast(g * bd, ad.shape), _unbroadcast(g * ad, bd.shape)))


def square(a: Tensor) -> Tensor:
    ad = a.data
    return Tensor(ad * ad, _parents=(a,), _backward=lambda g: (2.0 * g * ad,))


def tabs(a: Tensor) -> Tensor:
    ad = a.data
    return Tensor(np.abs(ad), _parents=(a,), _backward=lambda g: (g * np.sign(ad),))


def gelu(a: Tensor) -> Tensor:
    """Tanh-approximated GeLU."""
    x = a.data
    x2 = x * x
    t = np.tanh(_SQRT_2_OVER_PI * x * (1.0 + _GELU_C * x2))
    out = 0.5 * x * (1.0 + t)

    def backward(g):
        dinner = _SQRT_2_OVER_PI * (1.0 + 3.0 * _GELU_C * x2)
        return (g * (0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * dinner),)

    return Tensor(out, _parents=(a,), _backward=backward)


def _dropout_mask(rng: np.random.Generator, shape, p: float, dtype) -> np.ndarray:
    draw = rng.random(shape, dtype=np.float32)
    return (draw >= p).astype(dtype) * dtype.type(1.0 / (1.0 - p))


def dropout(a: Tensor, p: float, rng: np.random.Generator | None) -> Tensor:
    if rng is None or p <= 0.0:
        return a
    mask = _dropout_mask(rng, a.shape, p, a.dtype)
    return Tensor(a.data * mask, _parents=(a,), _backward=lambda g: (g * mask,))


# -- linear algebra ------------------------------------------------------

def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.shape[-1] != b.shape[-2 if b.ndim > 1 else 0]:
        raise ShapeError(f"matmul inner dims differ: {a.shape} @ {b.shape}")
    ad, bd = a.data, b.data
    out = ad @ bd

    def backward(g):
        ga = g @ np.swapaxes(bd, -1, -2)
        gb = np.swapaxes(ad, -1, -2) @ g
        return _unbroadcast(ga, ad.shape), _unbroadcast(gb, bd.shape)

    return Tensor(out, _parents=(a, b), _backward=backward)


def linear(x: Tensor, weight: Tensor, bias: Tensor | None = None) -> Tensor:
    """``x @ weight + bias`` over the last axis of ``x``; weight is in x out."""
    if weight.ndim != 2 or x.shape[-1] != weight.shape[0]:
        raise ShapeError(f"linear: input shape {x.shape} does not match weight shape {weight.shape}")
    if bias is not None and bias.shape != (weight.shape[1],):
        raise ShapeError(f"linear: bias shape {bias.shape} does not match weight shape {weight.shape}")
    xd, wd = x.data, weight.data
    lead = xd.shape[:-1]
    x2 = xd.reshape(-1, xd.shape[-1])
    out = x2 @ wd
    if bias is not None:
        out = out + bias.data
    out = out.reshape(*lead, wd.shape[1])

    def backward(g):
        g2 = g.reshape(-1, wd.shape[1])
        gx = (g2 @ wd.T).reshape(xd.shape)
        gw = x2.T @ g2
        gb = g2.sum(axis=0) if bias is not None else None
        return gx, gw, gb

    parents = (x, weight, bias) if bias is not None else (x, weight)
    return Tensor(out, _parents=parents, _backward=backward)


def layer_norm(x: Tensor, gain: Tensor, bias: Tensor, eps: float = 1e-5) -> Tensor:
    xd = x.data
    mu = xd.mean(axis=-1, keepdims=True)
    xc = xd - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = xc * inv
    out = xhat * gain.data + bias.data
    n = xd.shape[-1]

    def backward(g):
        lead = tuple(range(g.ndim - 1))
        ggain = (g * xhat).sum(axis=lead)
        gbias = g.sum(axis=lead)
        dxhat = g * gain.data
        gx = inv / n * (n * dxhat - dxhat.sum(axis=-1, keepdims=True)
                        - xhat * (dxhat * xhat).sum(axis=-1, keepdims=True))
        return gx, ggain, gbias

    return Tensor(out, _parents=(x, gain, bias), _backward=backward)


def softmax_rows(scores: np.ndarray) -> np.ndarray:
    """Row softmax; overwrites ``scores``."""
    scores -= scores.max(axis=-1, keepdims=True)
    np.exp(scores, out=scores)
    scores /= scores.sum(axis=-1, keepdims=True)
    return scores


def attention_weights(q: np.ndarray, k: np.ndarray) -> np.ndarray:
    """Softmax(q k^T / sqrt(dk)) over the key axis, as a plain array."""
    if k.shape[-2] == 0:
        raise ShapeError("attention over an empty key axis")
    scale = 1.0 / math.sqrt(q.shape[-1])
    return softmax_rows((q @ np.swapaxes(k, -1, -2)) * scale)


def scaled_dot_attention(q: Tensor, k: Tensor, v: Tensor, dropout_p: float = 0.0,
                         rng: np.random.Generator | None = None) -> Tensor:
    """softmax(Q K^T / sqrt(dk)) V with batched leading axes.

    Dropout, when enabled, is applied to the attention weights.
    """
    if q.shape[-1] == 0:
        raise ShapeError("attention needs a positive key dimension")
    if k.shape[-2] == 0:
        raise ShapeError("attention over an empty key axis")
    if q.shape[-1] != k.shape[-1] or k.shape[-2] != v.shape[-2]:
        raise ShapeError(f"attention shapes disagree: Q{q.shape} K{k.shape} V{v.shape}")
    qd, kd, vd = q.data, k.data, v.data
    scale = 1.0 / math.sqrt(qd.shape[-1])
    scores = qd @ np.swapaxes(kd, -1, -2)
    scores *= scores.dtype.type(scale)
    probs = softmax_rows(scores)
    if rng is not None and dropout_p > 0.0:
        mask = _dropout_mask(rng, probs.shape, dropout_p, probs.dtype)
        used = probs * mask
    else:
        mask = None
        used = probs
    out = used @ vd

    def backward(g):
        gv = np.swapaxes(used, -1, -2) @ g
        gp = g @ np.swapaxes(vd, -1, -2)
        if mask is not None:
            gp *= mask
        gp -= (gp * probs).sum(axis=-1, keepdims=True)
        gp *= probs
        gp *= gp.dtype.type(scale)
        gq = gp @ kd
        gk = np.swapaxes(gp, -1, -2) @ qd
        return _unbroadcast(gq, qd.shape), _unbroadcast(gk, kd.shape), _unbroadcast(gv, vd.shape)

    return Tensor(out, _parents=(q, k, v), _backward=backward)


# -- shape ops -----------------------------------------------------------

def reshape(a: Tensor, shape: Sequence[int]) -> Tensor:
    old = a.shape
    return Tensor(a.data.reshape(shape), _parents=(a,), _backward=lambda g: (g.reshape(old),))


def transpose(a: Tensor, axes: Sequence[int]) -> Tensor:
    axes = tuple(axes)
    inv = tuple(np.argsort(axes))
    return Tensor(np.transpose(a.data, axes), _parents=(a,),
                  _backward=lambda g: (np.transpose(g, inv),))


def getitem(a: Tensor, idx) -> Tensor:
    shape, dtype = a.shape, a.dtype

    def backward(g):
        full = np.zeros(shape, dtype=dtype)
        if _needs_add_at(idx):
            np.add.at(full, idx, g)
        else:
            full[idx] = g
        return (full,)

    return Tensor(a.data[idx], _parents=(a,), _backward=backward)


def _needs_add_at(idx) -> bool:
    """Fancy indices with repeated entries must accumulate instead of assign."""
    parts = idx if isinstance(idx, tuple) else (idx,)
    for p in parts:
        if isinstance(p, (list, np.ndarray)):
            arr = np.asarray(p)
            if arr.dtype == bool or np.unique(arr).size != arr.size:
                return True
    return False


def concat(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    tensors = list(tensors)
    sizes = [t.shape[axis] for t in tensors]
    bounds = np.cumsum([0] + sizes)
    out = np.concatenate([t.data for t in tensors], axis=axis)

    def backward(g):
        return tuple(np.take(g, np.arange(bounds[i], bounds[i + 1]), axis=axis)
                     for i in range(len(tensors)))

    return Tensor(out, _parents=tuple(tensors), _backward=backward)


def stack(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    tensors = list(tensors)
    out = np.stack([t.data for t in tensors], axis=axis)

    def backward(g):
        return tuple(np.take(g, i, axis=axis) for i in range(len(tensors)))

    return Tensor(out, _parents=tuple(tensors), _backward=backward)


# -- reductions ----------------------------------------------------------

def tsum(a: Tensor, axis=None) -> Tensor:
    shape = a.shape
    out = a.data.sum(axis=axis)

    def backward(g):
        if axis is not None:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, shape).astype(a.dtype, copy=True),)

    return Tensor(out, _parents=(a,), _backward=backward)


def mean(a: Tensor, axis=None) -> Tensor:
    if axis is None:
        n = a.data.size
    else:
        axes = axis if isinstance(axis, tuple) else (axis,)
        n = int(np.prod([a.shape[i] for i in axes]))
    return mul(tsum(a, axis), 1.0 / n)


def cumsum(a: Tensor, axis: int) -> Tensor:
    def backward(g):
        return (np.flip(np.cumsum(np.flip(g, axis=axis), axis=axis), axis=axis),)

    return Tensor(np.cumsum(a.data, axis=axis), _parents=(a,), _backward=backward)

