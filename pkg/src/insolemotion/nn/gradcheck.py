from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from .tensor import Tensor


def grad_check(fn: Callable[[], Tensor], inputs: Sequence[Tensor], h: float = 1e-5,
               max_coords: int | None = None, rng: np.random.Generator | None = None) -> float:
    """Compare analytic gradients of a scalar function against central differences.

    ``fn`` takes no arguments and must read the current values of ``inputs``;
    entries are perturbed in place. When ``max_coords`` is given, at most that
    many randomly chosen coordinates per input are checked.

    Returns the largest relative error ``|a - n| / max(|a|, |n|, 1e-8)``.
    """
    for x in inputs:
        if x.dtype != np.float64:
            raise TypeError(f"gradient checks need float64 inputs, got {x.dtype} for {x.name or x}")
        if not x.data.flags.c_contiguous:
            x.data = np.ascontiguousarray(x.data)
        x.grad = None
    out = fn()
    if out.data.size != 1:
        raise ValueError(f"grad_check needs a scalar function, got shape {out.shape}")
    out.backward()
    rng = rng if rng is not None else np.random.default_rng(0)
    worst = 0.0
    for x in inputs:
        analytic = x.grad if x.grad is not None else np.zeros_like(x.data)
        flat = x.data.reshape(-1)
        coords = np.arange(flat.size)
        if max_coords is not None and flat.size > max_coords:
            coords = rng.choice(flat.size, size=max_coords, replace=False)
        a_flat = analytic.reshape(-1)
        for i in coords:
            orig = flat[i]
            flat[i] = orig + h
            f_plus = float(fn().data)
            flat[i] = orig - h
            f_minus = float(fn().data)
            flat[i] = orig
            numeric = (f_plus - f_minus) / (2.0 * h)
            a = float(a_flat[i])
            rel = abs(a - numeric) / max(abs(a), abs(numeric), 1e-8)
            worst = max(worst, rel)
    for x in inputs:
        x.grad = None
    return worst
