import itertools

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hemlet.numerics import AttentionInput, blocked_attention, dense_attention, softmax_op_counts


def rand_qkv(rng, L, dh, dtype=np.float64):
    return [rng.standard_normal((L, dh)).astype(dtype) for _ in range(3)]


def mp_attention(Q, K, V, scale):
    """Attention evaluated with 50-digit arithmetic, one scalar at a time."""
    mpmath.mp.dps = 50
    L, dh = Q.shape
    out = np.zeros((L, dh))
    for i in range(L):
        s = [scale * mpmath.fsum(mpmath.mpf(float(Q[i, c])) * mpmath.mpf(float(K[j, c])) for c in range(dh))
             for j in range(L)]
        m = max(s)
        w = [mpmath.exp(x - m) for x in s]
        z = mpmath.fsum(w)
        for c in range(dh):
            out[i, c] = float(mpmath.fsum(w[j] * mpmath.mpf(float(V[j, c])) for j in range(L)) / z)
    return out


def test_single_token_returns_v():
    v = np.array([[3.0, -1.0]])
    inp = AttentionInput(np.array([[0.2, 0.1]]), np.array([[5.0, 4.0]]), v, 1)
    assert np.array_equal(dense_attention(inp), v)
    assert np.array_equal(blocked_attention(inp), v)


def test_identical_keys_give_column_mean():
    rng = np.random.default_rng(1)
    Q, _, V = rand_qkv(rng, 6, 3)
    K = np.tile(rng.standard_normal(3), (6, 1))
    S = dense_attention(AttentionInput(Q, K, V, 2))
    assert np.allclose(S, np.tile(V.mean(axis=0), (6, 1)), atol=1e-14)


def test_dense_matches_high_precision_oracle():
    rng = np.random.default_rng(42)
    Q, K, V = rand_qkv(rng, 8, 4)
    inp = AttentionInput(Q, K, V, 8)
    ref = mp_attention(Q, K, V, 0.5)
    assert np.max(np.abs(dense_attention(inp) - ref)) <= 1e-12
    assert np.max(np.abs(blocked_attention(AttentionInput(Q, K, V, 3)) - ref)) <= 1e-12


def test_one_block_is_bit_identical():
    rng = np.random.default_rng(7)
    for dtype in (np.float32, np.float64):
        Q, K, V = rand_qkv(rng, 13, 5, dtype)
        inp = AttentionInput(Q, K, V, 13)
        assert np.array_equal(blocked_attention(inp), dense_attention(inp))


@pytest.mark.parametrize("bl", [1, 2, 3, 5, 8])
def test_blocked_matches_dense_float32(bl):
    rng = np.random.default_rng(bl)
    Q, K, V = rand_qkv(rng, 8, 4, np.float32)
    inp = AttentionInput(Q, K, V, bl)
    assert np.max(np.abs(blocked_attention(inp) - dense_attention(inp))) <= 1e-6


def test_dominant_logit_selects_row():
    L, dh = 6, 4
    rng = np.random.default_rng(3)
    V = rng.standard_normal((L, dh)).astype(np.float32)
    K = np.eye(L, dh, dtype=np.float32)
    Q = np.zeros((L, dh), dtype=np.float32)
    Q[:, 2] = 50.0  # key 2 wins every row by a 50 margin
    inp = AttentionInput(Q, K, V, 4, scale=1.0)
    assert np.max(np.abs(blocked_attention(inp) - V[2])) <= 1e-6
    assert np.max(np.abs(dense_attention(inp) - V[2])) <= 1e-6


def test_large_logits_stay_finite():
    Q = np.full((4, 2), 300.0)
    K = np.full((4, 2), 300.0)
    out = blocked_attention(AttentionInput(Q, K, np.ones((4, 2)), 3, scale=1.0))
    assert np.all(np.isfinite(out)) and np.allclose(out, 1.0)


def test_rows_of_implied_weights_sum_to_one():
    rng = np.random.default_rng(5)
    L = 9
    Q, K, _ = rand_qkv(rng, L, L)
    P = blocked_attention(AttentionInput(Q, K, np.eye(L), 4))
    assert np.allclose(P.sum(axis=1), 1.0, atol=1e-6)
    assert np.all(P >= 0)


def test_visitation_order_does_not_matter():
    rng = np.random.default_rng(11)
    Q, K, V = rand_qkv(rng, 10, 3)
    inp = AttentionInput(Q, K, V, 3)
    ref = blocked_attention(inp)
    for order in itertools.permutations(range(4)):
        assert np.max(np.abs(blocked_attention(inp, order) - ref)) <= 1e-12
    with pytest.raises(ValueError):
        blocked_attention(inp, [0, 1, 1, 3])


def test_scale_toggle():
    rng = np.random.default_rng(2)
    Q, K, V = rand_qkv(rng, 5, 4)
    default = dense_attention(AttentionInput(Q, K, V, 5))
    assert np.array_equal(default, dense_attention(AttentionInput(Q, K, V, 5, scale=0.5)))
    unscaled = dense_attention(AttentionInput(Q, K, V, 5, scale=1.0))
    assert np.allclose(unscaled, dense_attention(AttentionInput(Q * 2.0, K, V, 5)), atol=1e-14)
    assert not np.allclose(unscaled, default)


@pytest.mark.parametrize("kw", [dict(bl=0), dict(bl=6), dict(shape=(5, 3))])
def test_input_validation(kw):
    Q = np.zeros((5, 4))
    K = np.zeros(kw.get("shape", (5, 4)))
    with pytest.raises(ValueError):
        AttentionInput(Q, K, np.zeros((5, 4)), kw.get("bl", 2))


@settings(max_examples=200, deadline=None)
@given(L=st.integers(1, 40), dh=st.integers(1, 16), data=st.data())
def test_blocked_equals_dense_property(L, dh, data):
    bl = data.draw(st.integers(1, L))
    seed = data.draw(st.integers(0, 2**31))
    rng = np.random.default_rng(seed)
    Q, K, V = rand_qkv(rng, L, dh)
    inp = AttentionInput(Q * 3, K, V, bl)
    assert np.max(np.abs(blocked_attention(inp) - dense_attention(inp))) <= 1e-12


def trace_counts(L, bl, dh):
    """Replay the blocked loop and count element operations, worst case."""
    exp = total = rescale = 0
    for j, start in enumerate(range(0, L, bl)):
        n = min(bl, L - start)
        exp += n
        total += n
        if j:
            rescale += dh
    return exp, total, rescale, dh


@pytest.mark.parametrize("L, bl, dh", [(8, 2, 4), (8, 8, 4), (1, 1, 1), (197, 32, 64), (10, 3, 5)])
def test_softmax_op_counts(L, bl, dh):
    c = softmax_op_counts(L, bl, dh)
    assert (c.exp, c.sum, c.rescale, c.divide) == trace_counts(L, bl, dh)
    assert c.total == sum(trace_counts(L, bl, dh))


def test_softmax_op_count_examples():
    assert softmax_op_counts(8, 8, 4).rescale == 0
    assert softmax_op_counts(8, 2, 4).rescale == 3 * 4
    assert softmax_op_counts(1, 1).exp == 1
    with pytest.raises(ValueError):
        softmax_op_counts(4, 5)
