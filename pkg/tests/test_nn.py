import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fcsl import ad
from fcsl.ad import ParamStore, Tensor, ops
from fcsl.nn import (SAB, TFFL, BatchNorm, FeedForward, LayerNorm, Linear, MambaBlock, MambaLayer,
                     MultiHeadAttention, SpatialAttentionLayer)
from fcsl.nn.ssm import (causal_conv, discretize_selective, s4d_real_init, selective_params,
                         ssm_convolutional, ssm_discretize, ssm_kernel, ssm_recurrent)


def sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


def softmax(x):
    e = np.exp(x - x.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


def layer_norm(x, eps=1e-5):
    mu = x.mean(-1, keepdims=True)
    return (x - mu) / np.sqrt(x.var(-1, keepdims=True) + eps)


def fill(ps, rng, prefix=""):
    """Overwrite every parameter under ``prefix`` with fresh normal draws."""
    for n in ps.names(prefix):
        ps[n].data[...] = rng.normal(size=ps[n].shape)


# ---------------------------------------------------------------- attention

def attention_oracle(ps, x, n_heads):
    d = x.shape[-1] // n_heads
    heads = []
    for i in range(n_heads):
        q, k, v = (x @ ps[f"a.{w}.{i}"].data for w in ("wq", "wk", "wv"))
        heads.append(softmax(q @ k.swapaxes(-1, -2) / np.sqrt(d)) @ v)
    return np.concatenate(heads, -1) @ ps["a.wo"].data


def test_attention_single_token():
    rng = np.random.default_rng(0)
    ps = ParamStore()
    att = MultiHeadAttention(ps, "a", 4, 2, rng)
    x = rng.normal(size=(3, 1, 4))
    np.testing.assert_allclose(att.weights(Tensor(x), 0).data, 1.0)
    vs = np.concatenate([x @ ps[f"a.wv.{i}"].data for i in range(2)], -1)
    np.testing.assert_allclose(att(x).data, vs @ ps["a.wo"].data, atol=1e-12)


def test_attention_identical_rows():
    rng = np.random.default_rng(1)
    att = MultiHeadAttention(ParamStore(), "a", 4, 2, rng)
    x = np.tile(rng.normal(size=(1, 1, 4)), (1, 5, 1))
    w = att.weights(Tensor(x), 1).data[0]
    np.testing.assert_allclose(w, w[0][None].repeat(5, 0), atol=1e-15)
    out = att(x).data[0]
    np.testing.assert_allclose(out, out[0][None].repeat(5, 0), atol=1e-12)


def test_attention_hand_oracle():
    rng = np.random.default_rng(2)
    ps = ParamStore()
    att = MultiHeadAttention(ps, "a", 4, 2, rng)
    fill(ps, rng)
    x = rng.normal(size=(1, 2, 4))
    np.testing.assert_allclose(att(x).data, attention_oracle(ps, x, 2), atol=1e-12)


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 7), st.integers(0, 2**31))
def test_attention_rows_stochastic(t, seed):
    rng = np.random.default_rng(seed)
    att = MultiHeadAttention(ParamStore(), "a", 6, 3, rng)
    x = Tensor(rng.normal(size=(2, t, 6)) * 3)
    for i in range(3):
        w = att.weights(x, i).data
        assert np.all(w >= 0)
        np.testing.assert_allclose(w.sum(-1), 1.0, atol=1e-12)


def test_attention_logit_shift_invariance():
    # an extra input feature that feeds only the keys and is the same for every
    # token shifts each logit row by one constant
    rng = np.random.default_rng(3)
    ps = ParamStore()
    att = MultiHeadAttention(ps, "a", 4, 2, rng)
    fill(ps, rng)
    for i in range(2):
        ps[f"a.wq.{i}"].data[-1] = 0.0
        ps[f"a.wv.{i}"].data[-1] = 0.0
    ps["a.wo"].data[:, -1] = 0.0
    x = rng.normal(size=(2, 5, 4))
    x0, x1 = x.copy(), x.copy()
    x0[..., -1] = 0.0
    x1[..., -1] = 7.5
    np.testing.assert_allclose(att(x1).data, att(x0).data, atol=1e-12)


def test_attention_heads_must_divide():
    with pytest.raises(ValueError):
        MultiHeadAttention(ParamStore(), "a", 6, 4, np.random.default_rng(0))


def test_causal_attention_is_lower_triangular():
    att = MultiHeadAttention(ParamStore(), "a", 4, 1, np.random.default_rng(4), causal=True)
    w = att.weights(Tensor(np.random.default_rng(5).normal(size=(1, 4, 4))), 0).data[0]
    assert np.all(np.triu(w, 1) == 0)


# ---------------------------------------------------------------- TFFL

def tffl_oracle(ps, x):
    lin = lambda h, n: h @ ps[f"t.{n}.w"].data + ps[f"t.{n}.b"].data  # noqa: E731
    s = lin(x, "g1")
    sc = np.concatenate([lin(s, "g2"), lin(s.swapaxes(-1, -2), "g3")], -1)
    return lin(np.maximum(sc, 0.0), "g4")


def test_tffl_zero_in_zero_out():
    t = TFFL(ParamStore(), "t", 2, 3, 4, np.random.default_rng(0))
    assert not t(np.zeros((2, 4, 3))).data.any()


def test_tffl_eval_deterministic():
    rng = np.random.default_rng(1)
    t = TFFL(ParamStore(), "t", 2, 3, 4, rng, p_drop=0.5)
    x = rng.normal(size=(2, 4, 3))
    np.testing.assert_array_equal(t(x).data, t(x).data)
    a = t(x, training=True, rng=np.random.default_rng(9)).data
    b = t(x, training=True, rng=np.random.default_rng(9)).data
    np.testing.assert_array_equal(a, b)


def test_tffl_hand_oracle():
    rng = np.random.default_rng(2)
    ps = ParamStore()
    t = TFFL(ps, "t", 2, 3, 4, rng)
    fill(ps, rng)
    x = rng.normal(size=(1, 4, 3))
    assert t(x).shape == (1, 4, 3)
    np.testing.assert_allclose(t(x).data, tffl_oracle(ps, x), atol=1e-12)


def test_tffl_dropout_changes_training_output():
    rng = np.random.default_rng(3)
    ps = ParamStore()
    t = TFFL(ps, "t", 2, 3, 8, rng, p_drop=0.5)
    fill(ps, rng)
    x = rng.normal(size=(4, 4, 3))
    assert not np.allclose(t(x, training=True, rng=np.random.default_rng(0)).data, t(x).data)


def test_tffl_rejects_odd_width():
    with pytest.raises(ValueError):
        TFFL(ParamStore(), "t", 2, 3, 5, np.random.default_rng(0))


# ---------------------------------------------------------------- SAB

def test_sal_constant_field():
    rng = np.random.default_rng(0)
    ps = ParamStore()
    sal = SpatialAttentionLayer(ps, "s", rng)
    ps["s.conv_b"].data[...] = 0.3
    c = -1.7
    x = np.full((2, 2, 3, 5), c)
    w = ps["s.conv_w"].data
    expect = sigmoid(w[0] * c + w[1] * c + 0.3) * c
    np.testing.assert_allclose(sal(x).data, expect, atol=1e-14)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31), st.floats(0.1, 30.0))
def test_sab_gate_in_open_unit_interval(seed, scale):
    # inside the block the gate sees layer-normed features, whatever the input scale
    rng = np.random.default_rng(seed)
    sab = SAB(ParamStore(), "s", 6, rng)
    p = sab.sal.gate(sab.ln1(Tensor(rng.normal(size=(2, 2, 4, 6)) * scale))).data
    assert np.all((p > 0) & (p < 1))
    assert p.shape == (2, 2, 4, 1)


def test_sal_hand_case_2x2x2():
    ps = ParamStore()
    sal = SpatialAttentionLayer(ps, "s", np.random.default_rng(0))
    ps["s.conv_w"].data[...] = [0.5, -0.25]
    ps["s.conv_b"].data[...] = 0.1
    x = np.array([[[[1.0, 3.0], [-2.0, 0.0]], [[0.5, 0.5], [4.0, -4.0]]]])  # (1, rx, tx, d_f)
    avg = np.array([[2.0, -1.0], [0.5, 0.0]])
    mx = np.array([[3.0, 0.0], [0.5, 4.0]])
    p = sigmoid(0.5 * avg - 0.25 * mx + 0.1)
    np.testing.assert_allclose(sal(x).data[0], p[..., None] * x[0], atol=1e-15)


def test_sal_gate_depends_only_on_pooled_stats():
    rng = np.random.default_rng(6)
    sal = SpatialAttentionLayer(ParamStore(), "s", rng)
    # same per-position mean and max, different arrangement and spread
    a = np.array([[[[0.0, 2.0, 4.0], [1.0, 1.0, 1.0]]]])
    b = np.array([[[[4.0, 1.0, 1.0], [1.0, 1.0, 1.0]]]])
    c = np.array([[[[-0.5, 4.0, 2.5], [1.0, 1.0, 1.0]]]])
    ga = sal.gate(Tensor(a)).data
    np.testing.assert_array_equal(sal.gate(Tensor(b)).data, ga)
    np.testing.assert_allclose(sal.gate(Tensor(c)).data, ga, atol=1e-15)


def test_sab_full_oracle():
    rng = np.random.default_rng(7)
    ps = ParamStore()
    sab = SAB(ps, "b", 4, rng, hidden=6)
    fill(ps, rng)
    x = rng.normal(size=(2, 2, 3, 4))

    def ln(h, n):
        return layer_norm(h) * ps[f"b.{n}.gamma"].data + ps[f"b.{n}.beta"].data

    h = ln(x, "ln1")
    w, b0 = ps["b.sal.conv_w"].data, ps["b.sal.conv_b"].data
    y = x + sigmoid(w[0] * h.mean(-1, keepdims=True) + w[1] * h.max(-1, keepdims=True) + b0) * h
    h = ln(y, "ln2")
    ff = np.maximum(h @ ps["b.ffl.fc1.w"].data + ps["b.ffl.fc1.b"].data, 0) @ ps["b.ffl.fc2.w"].data
    expect = y + ff + ps["b.ffl.fc2.b"].data
    np.testing.assert_allclose(sab(x).data, expect, atol=1e-12)


def test_sab_conv_has_two_inputs():
    ps = ParamStore()
    SAB(ps, "b", 4, np.random.default_rng(0))
    assert ps["b.sal.conv_w"].shape == (2,)


# ---------------------------------------------------------------- ZOH discretisation

def test_discretize_scalar_oracle():
    abar, bbar = ssm_discretize(-1.0, 1.0, 0.5)
    assert abar == pytest.approx(0.6065306597126334, abs=1e-15)
    assert bbar == pytest.approx(0.3934693402873666, abs=1e-15)


def test_discretize_small_step_limit():
    a = np.array([-1.0, -3.0, -50.0])
    abar, bbar = ssm_discretize(a, 2.0, 1e-6)
    np.testing.assert_allclose(abar, 1.0, atol=1e-4)
    np.testing.assert_allclose(bbar, 2e-6, rtol=1e-4)


def test_discretize_zero_a_limit():
    abar, bbar = ssm_discretize(np.array([0.0, -1e-12]), 3.0, 0.2)
    np.testing.assert_array_equal(abar[0], 1.0)
    assert bbar[0] == pytest.approx(0.6, abs=1e-15)
    assert bbar[1] == pytest.approx(0.6, rel=1e-9)


@given(st.floats(-100, -1e-6), st.floats(1e-6, 10))
def test_discretize_stable(a, d):
    abar, _ = ssm_discretize(a, 1.0, d)
    assert 0 < abar < 1 or (abar == 1.0 and abs(a * d) < 1e-15) or (abar == 0.0 and a * d < -700)


def test_s4d_init_values():
    a = s4d_real_init(4, 3)
    np.testing.assert_array_equal(a, [[-2, -3, -4, -5]] * 3)


# ---------------------------------------------------------------- recurrent / convolutional

def _random_system(rng, B, T, F, N):
    h = rng.normal(size=(B, T, F))
    d = rng.uniform(0.01, 0.8, size=(B, T, F))
    a = -rng.uniform(0.2, 5.0, size=(F, N))
    bm, cm = rng.normal(size=(B, T, N)), rng.normal(size=(B, T, N))
    abar, bbar = discretize_selective(d, a, bm)
    return h, d, a, bm, cm, abar, bbar


def test_recurrent_zero_input():
    rng = np.random.default_rng(0)
    h, d, a, bm, cm, abar, bbar = _random_system(rng, 2, 6, 3, 4)
    assert not ssm_recurrent(np.zeros_like(h), abar, bbar, cm).any()


def test_recurrent_memoryless():
    rng = np.random.default_rng(1)
    h, d, a, bm, cm, abar, bbar = _random_system(rng, 2, 5, 3, 4)
    y = ssm_recurrent(h, np.zeros_like(abar), bbar, cm)
    np.testing.assert_allclose(y, np.einsum("btn,btfn->btf", cm, bbar) * h, atol=1e-14)


def test_recurrent_scalar_unroll():
    h = np.array([1.0, -2.0, 0.5]).reshape(1, 3, 1)
    abar = np.array([0.5, 0.25, 0.8]).reshape(1, 3, 1, 1)
    bbar = np.array([1.0, 2.0, -1.0]).reshape(1, 3, 1, 1)
    c = np.array([2.0, 1.0, 3.0]).reshape(1, 3, 1)
    s1 = 1.0
    s2 = 0.25 * s1 + 2.0 * -2.0
    s3 = 0.8 * s2 + -1.0 * 0.5
    np.testing.assert_allclose(ssm_recurrent(h, abar, bbar, c).ravel(), [2 * s1, 1 * s2, 3 * s3], atol=1e-15)


def test_convolutional_matches_recurrent_100_trials():
    rng = np.random.default_rng(2)
    worst = 0.0
    for _ in range(100):
        B, T, F, N = rng.integers(1, 3), rng.integers(1, 40), rng.integers(1, 4), rng.integers(1, 5)
        h, d, a, bm, cm, abar, bbar = _random_system(rng, B, T, F, N)
        y1 = ssm_recurrent(h, abar, bbar, cm)
        y2 = ssm_convolutional(h, abar, bbar, cm)
        worst = max(worst, np.abs(y1 - y2).max() / np.abs(y1).max())
    assert worst <= 1e-9


def test_convolutional_single_step():
    rng = np.random.default_rng(3)
    h, d, a, bm, cm, abar, bbar = _random_system(rng, 2, 1, 3, 4)
    expect = np.einsum("bn,bfn->bf", cm[:, 0], bbar[:, 0]) * h[:, 0]
    np.testing.assert_allclose(ssm_convolutional(h, abar, bbar, cm)[:, 0], expect, atol=1e-14)
    np.testing.assert_allclose(ssm_recurrent(h, abar, bbar, cm)[:, 0], expect, atol=1e-14)


def test_time_invariant_reduces_to_fixed_kernel():
    rng = np.random.default_rng(4)
    T, F, N = 12, 3, 4
    a = -rng.uniform(0.5, 3.0, size=(F, N))
    b, c = rng.normal(size=N), rng.normal(size=N)
    d = 0.3
    abar, bbar = ssm_discretize(a, b[None], d)
    h = rng.normal(size=(2, T, F))
    y_conv = causal_conv(h, ssm_kernel(abar, bbar, c, T))
    ab = np.broadcast_to(abar, (2, T, F, N))
    bb = np.broadcast_to(bbar, (2, T, F, N))
    y_rec = ssm_recurrent(h, ab, bb, np.broadcast_to(c, (2, T, N)))
    np.testing.assert_allclose(y_rec, y_conv, atol=1e-12)
    y_scan = ops.selective_scan(h, np.full((2, T, F), d), a, np.broadcast_to(b, (2, T, N)).copy(),
                                np.broadcast_to(c, (2, T, N)).copy()).data
    np.testing.assert_allclose(y_scan, y_conv, atol=1e-12)


def test_convolutional_needs_positive_transitions():
    rng = np.random.default_rng(5)
    h, d, a, bm, cm, abar, bbar = _random_system(rng, 1, 3, 1, 1)
    with pytest.raises(ValueError):
        ssm_convolutional(h, np.zeros_like(abar), bbar, cm)


# ---------------------------------------------------------------- selective parameters

def test_selective_params_zero_input():
    rng = np.random.default_rng(0)
    F, N = 3, 4
    b_d = rng.normal(size=F)
    _, _, _, d = selective_params(np.zeros((2, 5, F)), rng.normal(size=(F, N)), rng.normal(size=(F, N)),
                                  rng.normal(size=F), b_d, -np.ones((F, N)))
    np.testing.assert_allclose(d, np.broadcast_to(np.log1p(np.exp(b_d)), (2, 5, F)), atol=1e-15)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31), st.floats(0.1, 50.0))
def test_selective_step_positive(seed, scale):
    rng = np.random.default_rng(seed)
    F, N = 3, 2
    _, _, _, d = selective_params(rng.normal(size=(2, 4, F)) * scale, rng.normal(size=(F, N)),
                                  rng.normal(size=(F, N)), rng.normal(size=F), rng.normal(size=F),
                                  -np.ones((F, N)))
    assert np.all(d > 0)


def test_selective_params_hand_case_1x2x3():
    x = np.array([[[1.0, 0.0, -1.0], [0.5, 2.0, 0.0]]])
    w_b = np.array([[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]])
    w_c = np.array([[0.0, 2.0], [1.0, 0.0], [0.0, -1.0]])
    w_d = np.array([0.5, -0.5, 1.0])
    b_d = np.array([0.0, 1.0, -1.0])
    a = -np.array([[2.0, 3.0]] * 3)
    abar, bbar, cmat, d = selective_params(x, w_b, w_c, w_d, b_d, a)
    bm = np.array([[0.0, -1.0], [0.5, 2.0]])
    cm = np.array([[0.0, 3.0], [2.0, 1.0]])
    z = np.array([0.5 - 1.0, 0.25 - 1.0])  # x . w_d per step
    dd = np.log1p(np.exp(z[:, None] + b_d[None]))
    np.testing.assert_allclose(cmat[0], cm, atol=1e-15)
    np.testing.assert_allclose(d[0], dd, atol=1e-15)
    for t in range(2):
        for f in range(3):
            ea = np.exp(dd[t, f] * a[f])
            np.testing.assert_allclose(abar[0, t, f], ea, atol=1e-15)
            np.testing.assert_allclose(bbar[0, t, f], (ea - 1) / a[f] * bm[t], atol=1e-15)


def test_layer_step_sizes_match_reference():
    rng = np.random.default_rng(8)
    ps = ParamStore()
    m = MambaLayer(ps, "m", 3, 4, 2, rng)
    x = rng.normal(size=(2, 5, 4))
    ref = selective_params(x, ps["m.w_b"].data, ps["m.w_c"].data, ps["m.w_d"].data, ps["m.b_d"].data,
                           m.a().data)[3]
    np.testing.assert_allclose(m.step_sizes(Tensor(x)).data, ref, atol=1e-14)


# ---------------------------------------------------------------- Mamba

def test_mamba_a_initialised_s4d():
    ps = ParamStore()
    m = MambaLayer(ps, "m", 3, 5, 4, np.random.default_rng(0))
    np.testing.assert_allclose(m.a().data, s4d_real_init(4, 5), atol=1e-14)


@pytest.mark.parametrize("cls", ["layer", "block"])
def test_mamba_shape(cls):
    rng = np.random.default_rng(1)
    ps = ParamStore()
    m = MambaLayer(ps, "m", 6, 8, 4, rng) if cls == "layer" else MambaBlock(ps, "m", 6, 8, 4, rng)
    assert m(rng.normal(size=(2, 9, 6))).shape == (2, 9, 6)


@settings(max_examples=15, deadline=None)
@given(st.integers(1, 9), st.integers(0, 2**31))
def test_mamba_causal(t, seed):
    rng = np.random.default_rng(seed)
    ps = ParamStore()
    m = MambaBlock(ps, "m", 4, 6, 3, rng)
    fill(ps, rng, "m.mamba.w_")
    x = rng.normal(size=(2, 10, 4))
    y = x.copy()
    y[:, t] += rng.normal(size=(2, 4)) * 5
    a, b = m(x).data, m(y).data
    np.testing.assert_array_equal(a[:, :t], b[:, :t])
    assert not np.allclose(a[:, t:], b[:, t:])


def test_mamba_constant_step_when_projection_zero():
    # zero step projection gives one fixed step per channel, the time-invariant regime
    rng = np.random.default_rng(2)
    ps = ParamStore()
    m = MambaLayer(ps, "m", 3, 4, 2, rng)
    ps["m.w_d"].data[...] = 0.0
    d = m.step_sizes(Tensor(rng.normal(size=(2, 7, 4)))).data
    np.testing.assert_allclose(d, np.broadcast_to(np.log1p(np.exp(ps["m.b_d"].data)), d.shape), atol=1e-15)


def test_causal_conv1d_oracle():
    rng = np.random.default_rng(3)
    x, w, b = rng.normal(size=(1, 5, 2)), rng.normal(size=(2, 3)), rng.normal(size=2)
    y = ops.causal_conv1d(x, w, b).data
    for t in range(5):
        for f in range(2):
            acc = b[f] + sum(w[f, k] * x[0, t - 2 + k, f] for k in range(3) if t - 2 + k >= 0)
            assert y[0, t, f] == pytest.approx(acc, abs=1e-14)


# ---------------------------------------------------------------- layers

def test_batchnorm_train_then_eval():
    rng = np.random.default_rng(0)
    ps = ParamStore()
    bn = BatchNorm(ps, "bn", 3, momentum=1.0)
    x = rng.normal(size=(50, 3)) * 4 + 2
    y = bn(x, training=True).data
    np.testing.assert_allclose(y.mean(0), 0, atol=1e-12)
    np.testing.assert_allclose(ps["bn.running_mean"].data, x.mean(0), atol=1e-12)
    np.testing.assert_allclose(ps["bn.running_var"].data, x.var(0, ddof=1), atol=1e-12)
    z = bn(x, training=False).data
    np.testing.assert_allclose(z, (x - x.mean(0)) / np.sqrt(x.var(0, ddof=1) + 1e-5), atol=1e-12)


def test_layernorm_oracle():
    rng = np.random.default_rng(1)
    x = rng.normal(size=(3, 5))
    np.testing.assert_allclose(LayerNorm(ParamStore(), "ln", 5)(x).data, layer_norm(x), atol=1e-12)


# ---------------------------------------------------------------- gradients

def _input_check(fn, shape, seed=0):
    rng = np.random.default_rng(seed)
    x = Tensor(rng.normal(size=shape))
    w = rng.normal(size=fn(x).shape)
    return ad.grad_check(lambda x: (fn(x) * w).sum(), x)


def _param_check(fn, ps, x, seed=0):
    rng = np.random.default_rng(seed)
    w = rng.normal(size=fn(x).shape)
    worst = 0.0
    for n in ps.names():
        if ps.is_trainable(n):
            worst = max(worst, ad.grad_check(lambda _: (fn(x) * w).sum(), ps[n], max_coords=6, rng=rng))
    return worst


def _blocks(rng):
    ps = {k: ParamStore() for k in ("lin", "ffl", "attn", "tffl", "sab", "mamba", "mblock")}
    return [
        ("lin", ps["lin"], Linear(ps["lin"], "l", 4, 3, rng), (2, 4)),
        ("ffl", ps["ffl"], FeedForward(ps["ffl"], "f", 4, 5, rng), (2, 4)),
        ("attn", ps["attn"], MultiHeadAttention(ps["attn"], "a", 4, 2, rng), (2, 3, 4)),
        ("tffl", ps["tffl"], TFFL(ps["tffl"], "t", 2, 3, 6, rng, p_drop=0.0), (2, 4, 3)),
        ("sab", ps["sab"], SAB(ps["sab"], "s", 4, rng), (1, 2, 3, 4)),
        ("mamba", ps["mamba"], MambaLayer(ps["mamba"], "m", 3, 4, 3, rng), (2, 5, 3)),
        ("mblock", ps["mblock"], MambaBlock(ps["mblock"], "m", 3, 4, 3, rng), (2, 5, 3)),
    ]


@pytest.mark.parametrize("idx", range(7))
def test_block_input_gradients(idx):
    name, _, blk, shape = _blocks(np.random.default_rng(10))[idx]
    assert _input_check(blk, shape) <= 1e-4, name


@pytest.mark.parametrize("idx", range(7))
def test_block_parameter_gradients(idx):
    rng = np.random.default_rng(11)
    name, ps, blk, shape = _blocks(rng)[idx]
    assert _param_check(blk, ps, rng.normal(size=shape)) <= 1e-4, name


def test_tffl_gradient_with_fixed_dropout_mask():
    rng = np.random.default_rng(12)
    t = TFFL(ParamStore(), "t", 2, 3, 6, rng, p_drop=0.3)
    w = rng.normal(size=(2, 4, 3))
    f = lambda x: (t(x, training=True, rng=np.random.default_rng(5)) * w).sum()  # noqa: E731
    assert ad.grad_check(f, Tensor(rng.normal(size=(2, 4, 3)))) <= 1e-4


def test_batchnorm_gradient_training_mode():
    rng = np.random.default_rng(13)
    bn = BatchNorm(ParamStore(), "bn", 3)
    w = rng.normal(size=(6, 3))
    assert ad.grad_check(lambda x: (bn(x, training=True) * w).sum(), Tensor(rng.normal(size=(6, 3)))) <= 1e-4
