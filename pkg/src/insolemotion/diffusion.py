"""Variance schedule, forward noising, training objective and reverse sampling.

Diffusion steps are 1-based: ``t`` runs over 1..T and ``alpha_bar(0) = 1``.
All pose arrays here are standardized unless a ``stats`` object is passed,
in which case insole inputs are standardized and pose outputs destandardized
on the way through.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .data.preprocess import StandardizationStats, destandardize, standardize
from .errors import DataError, NumericalError, ShapeError
from .nn import Adam, Tensor, mean, tabs

PREDICT_CLEAN = "predict-clean"
PREDICT_PREV = "predict-prev"
SAMPLER_MODES = (PREDICT_CLEAN, PREDICT_PREV)


@dataclass(frozen=True)
class DiffusionSchedule:
    T: int
    beta: np.ndarray
    alpha: np.ndarray
    alpha_bar: np.ndarray

    def _index(self, t) -> np.ndarray:
        t = np.asarray(t)
        if np.any(t < 1) or np.any(t > self.T):
            raise ValueError(f"diffusion step must lie in 1..{self.T}, got {t.min()}..{t.max()}")
        return t.astype(np.int64) - 1

    def beta_at(self, t) -> np.ndarray:
        return self.beta[self._index(t)]

    def alpha_at(self, t) -> np.ndarray:
        return self.alpha[self._index(t)]

    def alpha_bar_at(self, t) -> np.ndarray:
        """ᾱ_t with ᾱ_0 = 1 allowed."""
        t = np.asarray(t)
        if np.any(t < 0) or np.any(t > self.T):
            raise ValueError(f"diffusion step must lie in 0..{self.T}, got {t.min()}..{t.max()}")
        padded = np.concatenate([[1.0], self.alpha_bar])
        return padded[t.astype(np.int64)]

    def posterior_variance(self, t) -> np.ndarray:
        """β̃_t = (1 - ᾱ_{t-1}) / (1 - ᾱ_t) · β_t."""
        t = np.asarray(t)
        return (1.0 - self.alpha_bar_at(t - 1)) / (1.0 - self.alpha_bar_at(t)) * self.beta_at(t)

    def posterior_mean_coefs(self, t) -> tuple[np.ndarray, np.ndarray]:
        """Coefficients (on m̂_0, on m_t) of the mean of q(m_{t-1} | m_t, m̂_0)."""
        t = np.asarray(t)
        ab_t, ab_prev = self.alpha_bar_at(t), self.alpha_bar_at(t - 1)
        beta = self.beta_at(t)
        c0 = np.sqrt(ab_prev) * beta / (1.0 - ab_t)
        ct = np.sqrt(self.alpha_at(t)) * (1.0 - ab_prev) / (1.0 - ab_t)
        return c0, ct


def make_schedule(T: int = 200, beta_start: float = 1e-4, beta_end: float = 0.02) -> DiffusionSchedule:
    """Linear β from ``beta_start`` (t=1) to ``beta_end`` (t=T)."""
    if T < 2:
        raise ValueError(f"need at least two diffusion steps, got T={T}")
    if not 0.0 < beta_start <= beta_end < 1.0:
        raise ValueError(f"invalid beta range {beta_start}..{beta_end}")
    t = np.arange(1, T + 1, dtype=np.float64)
    beta = beta_start + (t - 1.0) / (T - 1) * (beta_end - beta_start)
    alpha = 1.0 - beta
    return DiffusionSchedule(T, beta, alpha, np.cumprod(alpha))


def _per_item(values: np.ndarray, ndim: int) -> np.ndarray:
    """Reshape per-item coefficients (B,) to broadcast over a (B, ...) array."""
    values = np.asarray(values, dtype=np.float64)
    if values.ndim == 0:
        return values
    return values.reshape(values.shape + (1,) * (ndim - values.ndim))


def q_sample(schedule: DiffusionSchedule, m0: np.ndarray, t, noise: np.ndarray) -> np.ndarray:
    """m_t = sqrt(ᾱ_t) m_0 + sqrt(1 - ᾱ_t) noise; ``t`` scalar or one per leading item.

    ``t = 0`` returns ``m0`` unchanged (ᾱ_0 = 1).
    """
    m0 = np.asarray(m0)
    noise = np.asarray(noise)
    if noise.shape != m0.shape:
        raise ShapeError(f"noise shape {noise.shape} differs from m0 shape {m0.shape}")
    ab = _per_item(schedule.alpha_bar_at(t), m0.ndim)
    out = np.sqrt(ab) * m0 + np.sqrt(1.0 - ab) * noise
    return out.astype(m0.dtype, copy=False)


@dataclass
class SamplerConfig:
    mode: str = PREDICT_CLEAN
    overlap: int = 25
    seed: int = 0

    def __post_init__(self):
        if self.mode not in SAMPLER_MODES:
            raise ValueError(f"sampler mode must be one of {SAMPLER_MODES}, got {self.mode!r}")
        if self.overlap < 0:
            raise ValueError("overlap must be non-negative")

    def to_dict(self) -> dict:
        return asdict(self)


def training_pair(schedule: DiffusionSchedule, m0: np.ndarray, t: np.ndarray,
                  rng: np.random.Generator, mode: str = PREDICT_CLEAN) -> tuple[np.ndarray, np.ndarray]:
    """Noisy input m_t and regression target for a batch of clean windows.

    predict-clean: target is m_0. predict-prev: target is a draw of m_{t-1}
    from q(m_{t-1} | m_0) and m_t is one forward step from it, so the pair
    is a consistent sample of the Markov chain.
    """
    m0 = np.asarray(m0)
    if mode == PREDICT_CLEAN:
        return q_sample(schedule, m0, t, rng.standard_normal(m0.shape).astype(m0.dtype)), m0
    if mode == PREDICT_PREV:
        prev = q_sample(schedule, m0, np.asarray(t) - 1, rng.standard_normal(m0.shape).astype(m0.dtype))
        a = _per_item(schedule.alpha_at(t), m0.ndim)
        b = _per_item(schedule.beta_at(t), m0.ndim)
        eps = rng.standard_normal(m0.shape)
        m_t = (np.sqrt(a) * prev + np.sqrt(b) * eps).astype(m0.dtype)
        return m_t, prev
    raise ValueError(f"unknown sampler mode {mode!r}")


def mae_loss(pred: Tensor, target: np.ndarray) -> Tensor:
    return mean(tabs(pred - Tensor(np.asarray(target, dtype=pred.dtype))))


def pose_training_step(joints: np.ndarray, insole: np.ndarray, model, schedule: DiffusionSchedule,
                       optimizer: Adam, rng: np.random.Generator, mode: str = PREDICT_CLEAN) -> float:
    """One Adam step on a standardized batch: joints (B, W, J-1, 3), insole (B, W, 50)."""
    joints = np.asarray(joints, dtype=model.dtype)
    B = joints.shape[0]
    t = rng.integers(1, schedule.T + 1, size=B)
    m_t, target = training_pair(schedule, joints, t, rng, mode)
    optimizer.zero_grad()
    loss = mae_loss(model(m_t, t, insole, rng=rng), target)
    value = float(loss.data)
    if not np.isfinite(value):
        raise NumericalError(f"non-finite pose loss at optimizer step {optimizer.cfg.step + 1}")
    loss.backward()
    optimizer.step()
    return value


def _reverse(model, c: np.ndarray, schedule: DiffusionSchedule, mode: str, rng: np.random.Generator,
             known: np.ndarray | None = None, known_mask: np.ndarray | None = None) -> np.ndarray:
    """Reverse chain for a batch of standardized insole windows c (B, W, 50).

    When ``known`` is given, frames where ``known_mask`` is true are replaced
    before every denoiser call by ``known`` noised to the current level.
    """
    B, W = c.shape[:2]
    shape = (B, W, model.skeleton.J - 1, 3)
    x = rng.standard_normal(shape)
    was = model.training
    model.eval()
    try:
        for t in range(schedule.T, 0, -1):
            if known is not None:
                x[:, known_mask] = q_sample(schedule, known, t, rng.standard_normal(known.shape))
            tt = np.full(B, t)
            pred = model(x.astype(model.dtype), tt, c).data.astype(np.float64)
            if not np.all(np.isfinite(pred)):
                raise NumericalError(f"non-finite denoiser output at diffusion step {t}")
            if mode == PREDICT_PREV:
                x = pred
            elif t > 1:
                c0, ct = schedule.posterior_mean_coefs(t)
                sigma = np.sqrt(schedule.posterior_variance(t))
                x = c0 * pred + ct * x + sigma * rng.standard_normal(shape)
            else:
                x = pred
    finally:
        model.train(was)
    if known is not None:
        x[:, known_mask] = known
    return x


def _prepare_insole(c, stats: StandardizationStats | None, dtype) -> np.ndarray:
    c = np.asarray(c, dtype=np.float64)
    if stats is not None:
        c = standardize(c, stats, "insole")
    return c.astype(dtype)


def sample(c, model, schedule: DiffusionSchedule, seed: int = 0, mode: str = PREDICT_CLEAN,
           stats: StandardizationStats | None = None) -> np.ndarray:
    """Draw pose windows for insole windows ``c`` of shape (W, 50) or (B, W, 50)."""
    if mode not in SAMPLER_MODES:
        raise ValueError(f"unknown sampler mode {mode!r}")
    c = np.asarray(c)
    single = c.ndim == 2
    batch = _prepare_insole(c[None] if single else c, stats, model.dtype)
    out = _reverse(model, batch, schedule, mode, np.random.default_rng(seed))
    if stats is not None:
        out = destandardize(out, stats, "pose")
    return out[0] if single else out


def window_starts(L: int, W: int, overlap: int) -> list[int]:
    """Window offsets advancing by W - overlap; the last one is shifted to end at L."""
    if L < W:
        raise DataError(f"sequence has {L} frames, shorter than the window length {W}")
    if not 0 <= overlap < W:
        raise ValueError(f"overlap must lie in 0..{W - 1}, got {overlap}")
    starts = list(range(0, L - W + 1, W - overlap))
    if starts[-1] != L - W:
        starts.append(L - W)
    return starts


def sample_long(c_seq, model, schedule: DiffusionSchedule, cfg: SamplerConfig | None = None,
                stats: StandardizationStats | None = None, W: int | None = None) -> np.ndarray:
    """Reconstruct an arbitrary-length sequence (L, 50) -> (L, J-1, 3) by inpainting.

    Each window after the first holds the frames already generated fixed
    (noised to the current level) while the rest is denoised; those frames
    keep the earlier window's values in the output.
    """
    cfg = cfg or SamplerConfig()
    W = W or model.cfg.W
    c_seq = _prepare_insole(c_seq, stats, model.dtype)
    if c_seq.ndim != 2:
        raise ShapeError(f"insole sequence must be (L, 50), got {c_seq.shape}")
    L = c_seq.shape[0]
    rng = np.random.default_rng(cfg.seed)
    out = np.zeros((L, model.skeleton.J - 1, 3))
    done = 0
    for start in window_starts(L, W, cfg.overlap):
        n_known = max(0, done - start)
        window_c = c_seq[None, start:start + W]
        if n_known:
            mask = np.zeros(W, dtype=bool)
            mask[:n_known] = True
            known = out[None, start:start + n_known]
            x = _reverse(model, window_c, schedule, cfg.mode, rng, known, mask)
        else:
            x = _reverse(model, window_c, schedule, cfg.mode, rng)
        out[start + n_known:start + W] = x[0, n_known:]
        done = start + W
    if stats is not None:
        out = destandardize(out, stats, "pose")
    return out
