from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from ..errors import NumericalError
from .tensor import Tensor


class Parameter(Tensor):
    """A trainable tensor together with its Adam moment estimates."""

    __slots__ = ("adam_m", "adam_v")

    def __init__(self, data, name: str | None = None):
        super().__init__(np.array(data, copy=True), requires_grad=True, name=name)
        self.adam_m = np.zeros_like(self.data)
        self.adam_v = np.zeros_like(self.data)

    def zero_grad(self) -> None:
        self.grad = None


@dataclass
class AdamConfig:
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0

    def __post_init__(self):
        if not (0.0 < self.beta1 < 1.0 and 0.0 < self.beta2 < 1.0):
            raise ValueError(f"Adam betas must lie in (0, 1), got {self.beta1}, {self.beta2}")
        if self.learning_rate <= 0.0 or self.eps <= 0.0:
            raise ValueError("learning rate and eps must be positive")


def adam_step(params: Iterable[Parameter], cfg: AdamConfig) -> None:
    """One bias-corrected Adam update; increments ``cfg.step`` once.

    A parameter whose gradient is ``None`` is treated as having zero gradient.
    """
    params = list(params)
    for p in params:
        if p.grad is not None and not np.all(np.isfinite(p.grad)):
            raise NumericalError(f"non-finite gradient for parameter {p.name!r}")
    cfg.step += 1
    b1, b2 = cfg.beta1, cfg.beta2
    corr1 = 1.0 - b1 ** cfg.step
    corr2 = 1.0 - b2 ** cfg.step
    lr = cfg.learning_rate
    for p in params:
        g = p.grad if p.grad is not None else np.zeros_like(p.data)
        p.adam_m *= b1
        p.adam_m += (1.0 - b1) * g
        p.adam_v *= b2
        p.adam_v += (1.0 - b2) * (g * g)
        m_hat = p.adam_m / corr1
        v_hat = p.adam_v / corr2
        p.data -= lr * m_hat / (np.sqrt(v_hat) + cfg.eps)


def clip_grad_norm(params: Iterable[Parameter], max_norm: float) -> float:
    """Scale gradients so their global L2 norm is at most ``max_norm``. Returns the norm before clipping."""
    params = [p for p in params if p.grad is not None]
    total = math.sqrt(sum(float(np.sum(p.grad.astype(np.float64) ** 2)) for p in params))
    if total > max_norm > 0.0:
        scale = max_norm / (total + 1e-12)
        for p in params:
            p.grad = p.grad * p.grad.dtype.type(scale)
    return total


class Adam:
    """Holds a parameter list and its :class:`AdamConfig`."""

    def __init__(self, params: Iterable[Parameter], cfg: AdamConfig | None = None,
                 clip_norm: float | None = 1.0):
        self.params = list(params)
        self.cfg = cfg if cfg is not None else AdamConfig()
        self.clip_norm = clip_norm

    def zero_grad(self) -> None:
        for p in self.params:
            p.grad = None

    def step(self) -> None:
        if self.clip_norm:
            clip_grad_norm(self.params, self.clip_norm)
        adam_step(self.params, self.cfg)
