import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from insolemotion.errors import NumericalError, ShapeError
from insolemotion.nn import (
    Adam,
    AdamConfig,
    EncoderLayer,
    LayerNorm,
    Linear,
    MLP,
    MultiHeadAttention,
    Parameter,
    Tensor,
    adam_step,
    attention_weights,
    clip_grad_norm,
    concat,
    cumsum,
    gelu,
    grad_check,
    sinusoidal_encoding,
    sinusoidal_table,
)
from insolemotion.nn.tensor import (
    dropout,
    getitem,
    layer_norm,
    linear,
    matmul,
    mean,
    mul,
    scaled_dot_attention,
    square,
    stack,
    tabs,
    tsum,
)

seeds = st.integers(0, 2 ** 31 - 1)


def t64(rng, *shape):
    return Tensor(rng.standard_normal(shape), requires_grad=True)


def weighted(out: Tensor, rng) -> Tensor:
    """Random linear functional of ``out`` so every output coordinate matters."""
    w = np.random.default_rng(int(rng.integers(2 ** 31))).standard_normal(out.shape)
    return tsum(mul(out, Tensor(w)))


# -- forward oracles ----------------------------------------------------------

def test_linear_identity_and_scalar():
    x = np.arange(6.0).reshape(2, 3)
    y = linear(Tensor(x), Tensor(np.eye(3)), Tensor(np.zeros(3)))
    assert np.array_equal(y.data, x)
    y = linear(Tensor([[2.0]]), Tensor([[3.0]]), Tensor([1.0]))
    assert y.data[0, 0] == 7.0


def test_linear_shape_errors():
    with pytest.raises(ShapeError):
        linear(Tensor(np.zeros((2, 3))), Tensor(np.zeros((4, 2))))
    with pytest.raises(ShapeError):
        linear(Tensor(np.zeros((2, 3))), Tensor(np.zeros((3, 2))), Tensor(np.zeros(3)))


def test_attention_single_key_returns_value_row(rng):
    q, k, v = rng.standard_normal((5, 4)), rng.standard_normal((1, 4)), rng.standard_normal((1, 3))
    out = scaled_dot_attention(Tensor(q), Tensor(k), Tensor(v)).data
    assert np.array_equal(out, np.repeat(v, 5, axis=0))


def test_attention_identical_keys_average_values(rng):
    q = rng.standard_normal((3, 4))
    k = np.repeat(rng.standard_normal((1, 4)), 6, axis=0)
    v = rng.standard_normal((6, 2))
    out = scaled_dot_attention(Tensor(q), Tensor(k), Tensor(v)).data
    assert np.allclose(out, v.mean(axis=0), atol=1e-6)


@settings(max_examples=25, deadline=None)
@given(seeds, st.floats(0.1, 50.0))
def test_attention_rows_sum_to_one(seed, scale):
    rng = np.random.default_rng(seed)
    w = attention_weights(rng.standard_normal((2, 5, 4)) * scale, rng.standard_normal((2, 7, 4)) * scale)
    assert np.all(np.isfinite(w))
    assert np.allclose(w.sum(axis=-1), 1.0, atol=1e-6)


def test_attention_empty_keys():
    with pytest.raises(ShapeError):
        scaled_dot_attention(Tensor(np.zeros((2, 4))), Tensor(np.zeros((0, 4))), Tensor(np.zeros((0, 3))))


def test_layer_norm_constant_and_zero_gain():
    x = Tensor(np.full((3, 5), 2.5))
    out = layer_norm(x, Tensor(np.ones(5)), Tensor(np.zeros(5))).data
    assert np.allclose(out, 0.0)
    bias = np.arange(5.0)
    out = layer_norm(Tensor(np.random.default_rng(1).standard_normal((3, 5))), Tensor(np.zeros(5)), Tensor(bias))
    assert np.array_equal(out.data, np.broadcast_to(bias, (3, 5)))


def test_gelu_values():
    assert gelu(Tensor(np.array([0.0]))).data[0] == 0.0
    assert abs(gelu(Tensor(np.array([10.0]))).data[0] - 10.0) < 1e-4


def test_sinusoidal_encoding_cases():
    e0 = sinusoidal_encoding(0, 8)
    assert np.array_equal(e0, np.array([0.0, 1.0] * 4))
    p = 1.7
    assert np.allclose(sinusoidal_encoding(p, 2), [math.sin(p), math.cos(p)], atol=0, rtol=0)
    with pytest.raises(ValueError):
        sinusoidal_encoding(1, 3)


def test_sinusoidal_injective_scan():
    table = sinusoidal_table(np.arange(10001), 256)
    # sort by first few coordinates and compare neighbours in several orderings
    worst = np.inf
    for cols in ((0, 1), (2, 3), (10, 11), (40, 41)):
        order = np.lexsort([table[:, c] for c in cols])
        gaps = np.abs(np.diff(table[order], axis=0)).max(axis=1)
        worst = min(worst, gaps.min())
    assert worst > 1e-6
    # exhaustive: a row's L_inf distance to every other row
    step = 500
    min_gap = np.inf
    for s in range(0, table.shape[0], step):
        block = table[s:s + step]
        d = np.abs(block[:, None, :16] - table[None, :, :16]).max(axis=2)
        idx = np.arange(s, s + block.shape[0])
        d[np.arange(block.shape[0]), idx] = np.inf
        min_gap = min(min_gap, d.min())
    assert min_gap > 1e-6


def test_cumsum_and_reductions():
    x = Tensor(np.arange(6.0).reshape(2, 3))
    assert np.array_equal(cumsum(x, 1).data, np.cumsum(x.data, 1))
    assert tsum(x).data == 15.0
    assert mean(x).data == 2.5


def test_dropout_identity_without_rng(rng):
    x = Tensor(rng.standard_normal((4, 4)))
    assert dropout(x, 0.5, None) is x
    y = dropout(x, 0.5, np.random.default_rng(0))
    kept = y.data != 0
    assert np.allclose(y.data[kept], 2.0 * x.data[kept])


# -- gradient checks ------------------------------------------------------------

OPS = {
    "add": lambda r: ((a := t64(r, 3, 4)), (b := t64(r, 4)), lambda: a + b),
    "sub": lambda r: ((a := t64(r, 3, 4)), (b := t64(r, 3, 4)), lambda: a - b),
    "mul": lambda r: ((a := t64(r, 3, 4)), (b := t64(r, 3, 1)), lambda: a * b),
    "square": lambda r: ((a := t64(r, 5)), None, lambda: square(a)),
    "abs": lambda r: ((a := t64(r, 5)), None, lambda: tabs(a)),
    "gelu": lambda r: ((a := t64(r, 4, 3)), None, lambda: gelu(a)),
    "matmul": lambda r: ((a := t64(r, 2, 3, 4)), (b := t64(r, 4, 5)), lambda: matmul(a, b)),
    "linear": lambda r: ((a := t64(r, 4, 5)), (b := t64(r, 5, 3)), lambda: linear(a, b, Tensor(np.ones(3)))),
    "reshape": lambda r: ((a := t64(r, 2, 6)), None, lambda: a.reshape(3, 4)),
    "transpose": lambda r: ((a := t64(r, 2, 3, 4)), None, lambda: a.transpose(2, 0, 1)),
    "getitem": lambda r: ((a := t64(r, 5, 3)), None, lambda: getitem(a, (np.array([0, 2, 2, 4]),))),
    "concat": lambda r: ((a := t64(r, 2, 3)), (b := t64(r, 4, 3)), lambda: concat([a, b], 0)),
    "stack": lambda r: ((a := t64(r, 2, 3)), (b := t64(r, 2, 3)), lambda: stack([a, b], 1)),
    "sum_axis": lambda r: ((a := t64(r, 3, 4)), None, lambda: tsum(a, 1)),
    "mean_axis": lambda r: ((a := t64(r, 3, 4)), None, lambda: mean(a, 0)),
    "cumsum": lambda r: ((a := t64(r, 4, 3)), None, lambda: cumsum(a, 0)),
}


@pytest.mark.parametrize("name", sorted(OPS))
@settings(max_examples=20, deadline=None)
@given(seed=seeds)
def test_op_gradients(name, seed):
    r = np.random.default_rng(seed)
    a, b, f = OPS[name](r)
    if name == "abs":
        a.data += np.sign(a.data) * 0.1       # keep away from the kink
    inputs = [a] if b is None else [a, b]
    err = grad_check(lambda: weighted(f(), np.random.default_rng(seed)), inputs)
    assert err < 1e-5, name


@settings(max_examples=20, deadline=None)
@given(seeds)
def test_layer_norm_gradient(seed):
    r = np.random.default_rng(seed)
    x, g, b = t64(r, 3, 6), t64(r, 6), t64(r, 6)
    assert grad_check(lambda: weighted(layer_norm(x, g, b), np.random.default_rng(seed)), [x, g, b]) < 1e-5


@settings(max_examples=20, deadline=None)
@given(seeds)
def test_attention_gradient(seed):
    r = np.random.default_rng(seed)
    q, k, v = t64(r, 2, 3, 4), t64(r, 2, 5, 4), t64(r, 2, 5, 3)
    assert grad_check(lambda: weighted(scaled_dot_attention(q, k, v), np.random.default_rng(seed)), [q, k, v]) < 1e-5


@settings(max_examples=20, deadline=None)
@given(seeds)
def test_attention_dropout_gradient(seed):
    r = np.random.default_rng(seed)
    q, k, v = t64(r, 3, 4), t64(r, 5, 4), t64(r, 5, 3)

    def f():
        return weighted(scaled_dot_attention(q, k, v, 0.3, np.random.default_rng(seed)), np.random.default_rng(1))

    assert grad_check(f, [q, k, v]) < 1e-5


@settings(max_examples=20, deadline=None)
@given(seeds)
def test_gelu_gradient_many_points(seed):
    # elementwise op: check all 100 points at once with per-point central differences
    x = np.random.default_rng(seed).uniform(-4, 4, 100)
    t = Tensor(x, requires_grad=True)
    gelu(t).backward(np.ones(100))
    h = 1e-5
    numeric = (gelu(Tensor(x + h)).data - gelu(Tensor(x - h)).data) / (2 * h)
    rel = np.abs(t.grad - numeric) / np.maximum(np.maximum(np.abs(t.grad), np.abs(numeric)), 1e-8)
    assert rel.max() < 1e-6


@settings(max_examples=20, deadline=None)
@given(seeds)
def test_layer_modules_gradient(seed):
    r = np.random.default_rng(seed)
    enc = EncoderLayer(8, 2, 12, r, 0.0, np.float64)
    mha = MultiHeadAttention(8, 4, r, 0.0, np.float64)
    x, ctx = t64(r, 2, 3, 8), t64(r, 2, 5, 8)
    params = enc.parameters() + mha.parameters()

    def f():
        return weighted(enc(x) + mha(x, context=ctx), np.random.default_rng(seed))

    assert grad_check(f, [x, ctx] + params, max_coords=6, rng=np.random.default_rng(seed)) < 1e-5


def test_linear_layer_self_check():
    r = np.random.default_rng(3)
    layer = Linear(4, 3, r, dtype=np.float64)
    x = t64(r, 5, 4)
    assert grad_check(lambda: weighted(layer(x), np.random.default_rng(0)), [x] + layer.parameters()) < 1e-6


def test_grad_check_catches_sign_flip():
    x = t64(np.random.default_rng(0), 6)

    def bad_square(a):
        return Tensor(a.data ** 2, _parents=(a,), _backward=lambda g: (-2.0 * a.data * g,))

    assert grad_check(lambda: tsum(bad_square(x)), [x]) > 1e-1


def test_grad_check_requires_float64():
    x = Tensor(np.zeros(3, dtype=np.float32), requires_grad=True)
    with pytest.raises(TypeError):
        grad_check(lambda: tsum(x), [x])


# -- modules and Adam -------------------------------------------------------------

def test_module_state_dict_roundtrip():
    a = MLP((3, 4, 2), np.random.default_rng(0))
    b = MLP((3, 4, 2), np.random.default_rng(1))
    b.load_state_dict(a.state_dict())
    x = np.ones((2, 3), dtype=np.float32)
    assert np.array_equal(a(Tensor(x)).data, b(Tensor(x)).data)
    with pytest.raises(KeyError):
        b.load_state_dict({})


def test_adam_zero_gradient_is_noop():
    p = Parameter(np.array([1.0, -2.0]))
    p.grad = np.zeros(2)
    adam_step([p], AdamConfig())
    assert np.array_equal(p.data, [1.0, -2.0])


def test_adam_first_step_oracle():
    p = Parameter(np.array([0.5]))
    cfg = AdamConfig(learning_rate=1e-3)
    p.grad = np.array([1.0])
    adam_step([p], cfg)
    m_hat = 0.1 / (1 - 0.9)
    v_hat = 0.001 / (1 - 0.999)
    expected = 0.5 - 1e-3 * m_hat / (math.sqrt(v_hat) + 1e-8)
    assert abs(p.data[0] - expected) < 1e-9
    before = p.data[0]
    p.grad = np.array([1.0])
    adam_step([p], cfg)
    assert p.data[0] < before < 0.5


def test_adam_rejects_non_finite_gradient():
    p = Parameter(np.zeros(2))
    p.grad = np.array([np.nan, 0.0])
    with pytest.raises(NumericalError):
        adam_step([p], AdamConfig())


def test_clip_grad_norm():
    p = Parameter(np.zeros(2))
    p.grad = np.array([3.0, 4.0])
    assert clip_grad_norm([p], 1.0) == 5.0
    assert np.allclose(np.linalg.norm(p.grad), 1.0)


def test_training_is_bit_reproducible():
    def run():
        r = np.random.default_rng(5)
        net = MLP((4, 8, 2), r)
        opt = Adam(net.parameters())
        data = np.random.default_rng(6).standard_normal((16, 4)).astype(np.float32)
        for _ in range(5):
            opt.zero_grad()
            loss = mean(square(net(Tensor(data))))
            loss.backward()
            opt.step()
        return np.concatenate([p.data.ravel() for p in net.parameters()])

    assert np.array_equal(run(), run())


def test_layer_norm_module_defaults():
    ln = LayerNorm(4)
    assert ln.gain.data.dtype == np.float32
    assert np.array_equal(ln.gain.data, np.ones(4))
