import numpy as np
import pytest

from insolemotion.data.types import Skeleton
from insolemotion.denoiser import DenoiserConfig, PoseDenoiser
from insolemotion.diffusion import (
    PREDICT_CLEAN,
    PREDICT_PREV,
    SamplerConfig,
    make_schedule,
    mae_loss,
    pose_training_step,
    q_sample,
    sample,
    sample_long,
    training_pair,
    window_starts,
)
from insolemotion.errors import DataError, NumericalError, ShapeError
from insolemotion.nn import Adam, AdamConfig, Parameter, Tensor


def tiny(W=4, T=10, seed=0):
    cfg = DenoiserConfig(d=16, ff_dim=24, layers=1, heads_self=2, T=T, W=W, dropout=0.0, cond_hidden=8)
    return PoseDenoiser(cfg, Skeleton.generic(10), np.random.default_rng(seed), dtype=np.float64)


class FakeModel:
    """Stands in for the denoiser; ``fn`` maps the noisy input to the output."""

    def __init__(self, fn, J=10):
        self.fn = fn
        self.skeleton = Skeleton.generic(J)
        self.dtype = np.dtype(np.float64)
        self.training = False
        self.offset = Parameter(np.zeros(1))

    def __call__(self, x, t, c, rng=None):
        return Tensor(self.fn(np.asarray(x), t)) + self.offset

    def train(self, mode=True):
        self.training = mode

    def eval(self):
        self.training = False


# -- schedule ---------------------------------------------------------------------

def test_schedule_endpoints_and_interpolation():
    s = make_schedule(200)
    assert s.beta_at(1) == 0.0001
    assert s.beta_at(200) == 0.02
    assert abs(s.beta_at(100) - (0.0001 + 99 / 199 * 0.0199)) < 1e-15
    assert np.all(np.diff(s.beta) >= 0)
    assert np.all(np.diff(s.alpha_bar) < 0)
    assert s.alpha_bar[-1] < 0.15
    assert np.array_equal(s.alpha, 1 - s.beta)


def test_schedule_rejects_bad_arguments():
    for args in [(1,), (10, 0.0, 0.02), (10, 0.03, 0.02), (10, 1e-4, 1.0)]:
        with pytest.raises(ValueError):
            make_schedule(*args)
    with pytest.raises(ValueError):
        make_schedule(10).beta_at(0)
    with pytest.raises(ValueError):
        make_schedule(10).beta_at(11)


def test_posterior_at_first_step_is_deterministic():
    s = make_schedule(200)
    assert s.posterior_variance(1) == 0.0
    c0, ct = s.posterior_mean_coefs(1)
    assert abs(c0 - 1.0) < 1e-12 and ct == 0.0


# -- forward process ------------------------------------------------------------------

def test_q_sample_near_identity_at_first_step(rng):
    s = make_schedule(200)
    m0 = rng.standard_normal((50, 9, 3))
    noise = rng.standard_normal(m0.shape)
    assert np.abs(q_sample(s, m0, 1, noise) - m0).max() < 0.02 * np.abs(noise).max() + 1e-4 * np.abs(m0).max()


def test_q_sample_zero_noise_and_step_zero(rng):
    s = make_schedule(200)
    m0 = rng.standard_normal((3, 4, 9, 3))
    assert np.array_equal(q_sample(s, m0, 37, np.zeros_like(m0)), np.sqrt(s.alpha_bar[36]) * m0)
    assert np.array_equal(q_sample(s, m0, 0, rng.standard_normal(m0.shape)), m0)
    with pytest.raises(ValueError):
        q_sample(s, m0, 201, np.zeros_like(m0))
    with pytest.raises(ShapeError):
        q_sample(s, m0, 3, np.zeros((3,)))


def test_q_sample_per_item_steps(rng):
    s = make_schedule(200)
    m0 = rng.standard_normal((3, 4, 2))
    noise = rng.standard_normal(m0.shape)
    t = np.array([1, 50, 200])
    out = q_sample(s, m0, t, noise)
    for i in range(3):
        assert np.array_equal(out[i], q_sample(s, m0[i], t[i], noise[i]))


def test_q_sample_moments_at_final_step(rng):
    s = make_schedule(200)
    draws = q_sample(s, np.zeros(10_000), 200, rng.standard_normal(10_000))
    var = 1 - s.alpha_bar[-1]
    assert abs(draws.mean()) < 5 * np.sqrt(var) / 100
    assert abs(draws.var() / var - 1) < 0.05


@pytest.mark.parametrize("t1, t2", [(10, 60), (100, 200), (1, 2)])
def test_two_stage_marginal_matches_direct(rng, t1, t2):
    s = make_schedule(200)
    m0 = np.full(10_000, 1.5)
    mid = q_sample(s, m0, t1, rng.standard_normal(m0.shape))
    ratio = s.alpha_bar_at(t2) / s.alpha_bar_at(t1)
    staged = np.sqrt(ratio) * mid + np.sqrt(1 - ratio) * rng.standard_normal(m0.shape)
    direct = q_sample(s, m0, t2, rng.standard_normal(m0.shape))
    sd = np.sqrt(1 - s.alpha_bar_at(t2))
    assert abs(staged.mean() - direct.mean()) < 5 * sd / 100 * np.sqrt(2)
    assert abs(staged.var() / direct.var() - 1) < 0.05


def test_predict_prev_pair_has_forward_marginals(rng):
    s = make_schedule(200)
    m0 = np.full((10_000, 1), 2.0)
    t = np.full(10_000, 120)
    m_t, prev = training_pair(s, m0, t, rng, PREDICT_PREV)
    for x, step in [(m_t, 120), (prev, 119)]:
        ab = s.alpha_bar_at(step)
        assert abs(x.mean() - np.sqrt(ab) * 2.0) < 5 * np.sqrt(1 - ab) / 100
        assert abs(x.var() / (1 - ab) - 1) < 0.05


def test_predict_clean_pair_targets_clean_pose(rng):
    s = make_schedule(10)
    m0 = rng.standard_normal((2, 4, 9, 3))
    m_t, target = training_pair(s, m0, np.array([3, 7]), rng, PREDICT_CLEAN)
    assert target is m0 and m_t.shape == m0.shape


# -- training objective ----------------------------------------------------------------

def test_mae_matches_naive_loop(rng):
    pred = rng.standard_normal((2, 3, 2))
    target = rng.standard_normal((2, 3, 2))
    total, n = 0.0, 0
    for b in range(2):
        for i in range(3):
            for k in range(2):
                total += abs(pred[b, i, k] - target[b, i, k])
                n += 1
    assert abs(float(mae_loss(Tensor(pred), target).data) - total / n) < 1e-15


def test_loss_is_zero_for_exact_model(rng):
    joints = np.tile(rng.standard_normal((1, 4, 9, 3)), (3, 1, 1, 1))
    model = FakeModel(lambda x, t: joints)
    opt = Adam([model.offset])
    loss = pose_training_step(joints, np.zeros((3, 4, 50)), model, make_schedule(10), opt, rng)
    assert loss == 0.0


def test_non_finite_loss_raises(rng):
    model = FakeModel(lambda x, t: np.full_like(x, np.nan))
    with pytest.raises(NumericalError, match="step 1"):
        pose_training_step(np.zeros((1, 4, 9, 3)), np.zeros((1, 4, 50)), model, make_schedule(10),
                           Adam([model.offset]), rng)


def test_training_on_repeated_window_decreases_loss(rng):
    model = tiny()
    sched = make_schedule(10)
    joints = np.tile(rng.standard_normal((1, 4, 9, 3)), (4, 1, 1, 1))
    insole = np.tile(rng.standard_normal((1, 4, 50)), (4, 1, 1))
    opt = Adam(model.parameters(), AdamConfig(learning_rate=3e-3))
    losses = [pose_training_step(joints, insole, model, sched, opt, rng) for _ in range(200)]
    smooth = np.convolve(losses, np.ones(20) / 20, mode="valid")
    assert smooth[-1] < 0.5 * smooth[0]
    assert np.all(np.isfinite(losses))


# -- reverse sampling ----------------------------------------------------------------------

def test_sample_shape_and_determinism(rng):
    model = tiny()
    c = rng.standard_normal((4, 50))
    a = sample(c, model, make_schedule(10), seed=3)
    assert a.shape == (4, 9, 3)
    assert np.array_equal(a, sample(c, model, make_schedule(10), seed=3))
    assert not np.array_equal(a, sample(c, model, make_schedule(10), seed=4))
    batch = sample(np.stack([c, c]), model, make_schedule(10), seed=3)
    assert batch.shape == (2, 4, 9, 3)


@pytest.mark.parametrize("mode", [PREDICT_CLEAN, PREDICT_PREV])
def test_identity_model_stays_bounded(rng, mode):
    model = FakeModel(lambda x, t: x)
    out = sample(np.zeros((100, 50)), model, make_schedule(200), seed=0, mode=mode)
    assert np.all(np.isfinite(out))
    assert np.abs(out).max() < 10.0


def test_non_finite_denoiser_output_names_step():
    model = FakeModel(lambda x, t: np.full_like(x, np.inf) if t[0] == 7 else x)
    with pytest.raises(NumericalError, match="step 7"):
        sample(np.zeros((4, 50)), model, make_schedule(10))


def test_sample_restores_training_mode(rng):
    model = tiny()
    model.train()
    sample(rng.standard_normal((4, 50)), model, make_schedule(10))
    assert model.training


def test_unknown_mode_rejected():
    with pytest.raises(ValueError):
        sample(np.zeros((4, 50)), tiny(), make_schedule(10), mode="ddim")
    with pytest.raises(ValueError):
        SamplerConfig(mode="ddim")


# -- long sequences ------------------------------------------------------------------------

def test_window_starts_arithmetic():
    assert window_starts(350, 100, 25) == [0, 75, 150, 225, 250]
    assert window_starts(100, 100, 25) == [0]
    assert window_starts(250, 100, 25) == [0, 75, 150]
    with pytest.raises(DataError):
        window_starts(99, 100, 25)
    with pytest.raises(ValueError):
        window_starts(200, 100, 100)


def test_sample_long_length(rng):
    model = tiny(W=100, T=5)
    out = sample_long(rng.standard_normal((350, 50)), model, make_schedule(5), SamplerConfig(overlap=25))
    assert out.shape == (350, 9, 3)
    assert np.all(np.isfinite(out))


def test_sample_long_single_window_equals_sample(rng):
    model = tiny(W=8)
    c = rng.standard_normal((8, 50))
    sched = make_schedule(10)
    assert np.array_equal(sample_long(c, model, sched, SamplerConfig(overlap=2, seed=5)),
                          sample(c, model, sched, seed=5))


def test_sample_long_keeps_earlier_window_on_overlap(rng):
    model = tiny(W=8)
    c = rng.standard_normal((20, 50))
    sched = make_schedule(10)
    out = sample_long(c, model, sched, SamplerConfig(overlap=3, seed=2))
    assert np.array_equal(out[:8], sample(c[:8], model, sched, seed=2))
    assert np.array_equal(out, sample_long(c, model, sched, SamplerConfig(overlap=3, seed=2)))


def test_sample_long_clamps_known_frames():
    seen = []

    def fn(x, t):
        seen.append(x[0, :2].copy())
        return np.ones_like(x)

    model = FakeModel(fn)
    sched = make_schedule(10)
    out = sample_long(np.zeros((6, 50)), model, sched, SamplerConfig(overlap=2), W=4)
    assert np.array_equal(out, np.ones_like(out))
    # second window: the two known frames enter each call noised from the value 1
    second = seen[10:]
    assert len(second) == 10
    for k, x in enumerate(second):
        t = 10 - k
        assert abs(x.mean() - np.sqrt(sched.alpha_bar_at(t))) < 5 * np.sqrt(1 - sched.alpha_bar_at(t))


def test_sample_long_rejects_short_input():
    with pytest.raises(DataError):
        sample_long(np.zeros((3, 50)), tiny(), make_schedule(10))
