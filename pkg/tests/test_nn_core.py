import math

import numpy as np
import pytest
import torch
from hypothesis import given, settings
from hypothesis import strategies as st

from avsum.errors import GradientError, ShapeError
from avsum.nn import ops
from avsum.nn.checkpoint import arch_hash, load_checkpoint, save_checkpoint
from avsum.nn.gradcheck import corrupt_gradient, gradcheck
from avsum.nn.layers import GRU, MultiHeadSelfAttention, TemporalConv, seeded

f64 = torch.float64


def _rand(*shape, seed=0):
    g = torch.Generator().manual_seed(seed)
    return torch.randn(*shape, generator=g, dtype=f64)


# ---------------------------------------------------------------- conv / pool / deconv

def test_conv_identity_kernel():
    x = _rand(20, 8)
    w = torch.eye(8, dtype=f64).unsqueeze(-1)
    torch.testing.assert_close(ops.conv1d(x, w), x, rtol=0, atol=0)


def test_conv_zero_weights():
    assert torch.count_nonzero(ops.conv1d(_rand(20, 8), torch.zeros(4, 8, 3, dtype=f64))) == 0


def _naive_conv(x, w, b):
    t, _ = x.shape
    c_out, _, k = w.shape
    left = (k - 1) // 2
    out = np.zeros((t, c_out))
    for i in range(t):
        for o in range(c_out):
            acc = b[o]
            for j in range(k):
                src = i + j - left
                if 0 <= src < t:
                    acc += float(np.dot(w[o, :, j], x[src]))
            out[i, o] = acc
    return out


@pytest.mark.parametrize("k", [1, 2, 3, 5])
def test_conv_matches_sliding_window_oracle(k):
    x, w, b = _rand(20, 8, seed=1), _rand(5, 8, k, seed=2), _rand(5, seed=3)
    got = ops.conv1d(x, w, b).numpy()
    np.testing.assert_allclose(got, _naive_conv(x.numpy(), w.numpy(), b.numpy()), atol=1e-6, rtol=0)


def test_conv_same_length_and_linear():
    x, y, w = _rand(13, 3, seed=1), _rand(13, 3, seed=2), _rand(4, 3, 3, seed=3)
    assert ops.conv1d(x, w).shape == (13, 4)
    torch.testing.assert_close(ops.conv1d(2 * x + y, w), 2 * ops.conv1d(x, w) + ops.conv1d(y, w))


def test_conv_kernel_longer_than_input_keeps_length():
    # same padding always leaves at least k padded frames
    assert ops.conv1d(_rand(2, 3), _rand(4, 3, 9)).shape == (2, 4)


def test_maxpool_shape():
    assert ops.maxpool_time(_rand(20, 10), 4).shape == (5, 10)


def test_maxpool_constant():
    x = torch.full((20, 3), 1.5, dtype=f64)
    torch.testing.assert_close(ops.maxpool_time(x, 4), torch.full((5, 3), 1.5, dtype=f64))


def test_maxpool_brute_force():
    x = _rand(2, 24, 5, seed=4)
    got = ops.maxpool_time(x, 3).numpy()
    xn = x.numpy()
    for b in range(2):
        for t in range(8):
            for c in range(5):
                assert got[b, t, c] == max(xn[b, 3 * t + j, c] for j in range(3))


def test_maxpool_ties_route_to_first():
    x = torch.ones(4, 1, dtype=f64, requires_grad=True)
    ops.maxpool_time(x, 4).sum().backward()
    assert x.grad.view(-1).tolist() == [1.0, 0.0, 0.0, 0.0]


def test_maxpool_non_divisible():
    with pytest.raises(ShapeError):
        ops.maxpool_time(_rand(10, 2), 4)


def test_deconv_identity():
    x = _rand(7, 3)
    w = torch.eye(3, dtype=f64).unsqueeze(-1)
    torch.testing.assert_close(ops.deconv1d_time(x, w, 1), x)


def test_deconv_shape_arithmetic():
    assert ops.deconv1d_time(_rand(20, 6), _rand(6, 2, 16), 16).shape == (320, 2)


@pytest.mark.parametrize("factor", [1, 2, 4])
def test_deconv_adjoint(factor):
    x, w = _rand(2, 6, 3, seed=5), _rand(3, 4, factor, seed=6)
    y = _rand(2, 6 * factor, 4, seed=7)
    lhs = (ops.deconv1d_time(x, w, factor) * y).sum()
    rhs = (x * ops.conv_strided(y, w, factor)).sum()
    assert abs(float(lhs - rhs)) < 1e-8


def test_deconv_bad_factor():
    with pytest.raises(ShapeError):
        ops.deconv1d_time(_rand(3, 2), _rand(2, 2, 1), 0)


# ---------------------------------------------------------------- softmax

@given(seed=st.integers(0, 10 ** 6), scale=st.floats(0.01, 50))
def test_softmax_rows(seed, scale):
    s = ops.softmax(_rand(7, 9, seed=seed) * scale)
    assert torch.all(s >= 0)
    assert torch.allclose(s.sum(-1), torch.ones(7, dtype=f64), atol=1e-6)


# ---------------------------------------------------------------- GRU

def test_gru_zero():
    g = 4
    out, final = ops.gru_forward(torch.zeros(5, 3, dtype=f64), torch.zeros(3 * g, 3, dtype=f64),
                                 torch.zeros(3 * g, g, dtype=f64), torch.zeros(3 * g, dtype=f64),
                                 torch.zeros(3 * g, dtype=f64))
    assert torch.count_nonzero(out) == 0 and torch.count_nonzero(final) == 0


def _scalar_gru_step(x, h, w_ih, w_hh, b_ih, b_hh):
    g = len(h)
    sig = lambda v: 1.0 / (1.0 + math.exp(-v))  # noqa: E731
    new = []
    for u in range(g):
        def pre(block, with_h=True):
            row = block * g + u
            a = b_ih[row] + sum(w_ih[row][i] * x[i] for i in range(len(x)))
            hh = b_hh[row] + sum(w_hh[row][i] * h[i] for i in range(g))
            return a, hh
        ar, hr = pre(0)
        az, hz = pre(1)
        an, hn = pre(2)
        r, z = sig(ar + hr), sig(az + hz)
        n = math.tanh(an + r * hn)
        new.append((1 - z) * n + z * h[u])
    return new


def test_gru_single_step_matches_scalar_cell():
    g, d = 3, 2
    w_ih, w_hh = _rand(3 * g, d, seed=1), _rand(3 * g, g, seed=2)
    b_ih, b_hh = _rand(3 * g, seed=3), _rand(3 * g, seed=4)
    x = _rand(1, d, seed=5)
    _, final = ops.gru_forward(x, w_ih, w_hh, b_ih, b_hh)
    oracle = _scalar_gru_step(x[0].tolist(), [0.0] * g, w_ih.tolist(), w_hh.tolist(), b_ih.tolist(), b_hh.tolist())
    np.testing.assert_allclose(final.numpy(), oracle, atol=1e-10, rtol=0)


def test_gru_matches_torch_reference():
    with seeded(0):
        layer = GRU(5, 10).double()
    x = _rand(3, 7, 5)
    out, final = layer(x)
    ref = torch.nn.GRU(5, 10, batch_first=True).double()
    with torch.no_grad():
        ref.weight_ih_l0.copy_(layer.w_ih)
        ref.weight_hh_l0.copy_(layer.w_hh)
        ref.bias_ih_l0.copy_(layer.b_ih)
        ref.bias_hh_l0.copy_(layer.b_hh)
    r_out, r_h = ref(x)
    torch.testing.assert_close(out, r_out)
    torch.testing.assert_close(final, r_h[0])
    assert final.shape == (3, 10)
    torch.testing.assert_close(out[:, -1], final)


# ---------------------------------------------------------------- attention

def test_mha_saturated_softmax_picks_value_row():
    m, s = 4, 4
    k = torch.eye(m, s, dtype=f64)
    v = _rand(m, s, seed=1)
    q = 10 * k[[2, 2, 2, 2]]
    eye = torch.eye(s, dtype=f64).unsqueeze(0)
    w = ops.AttentionWeights(eye, eye, eye, torch.eye(m, dtype=f64))
    out, scores = ops.mha(q, k, v, w, scale_dim=1.0, return_scores=True)
    assert scores[0, :, 2].min() > 0.99
    torch.testing.assert_close(out, v[[2, 2, 2, 2]], atol=1e-3, rtol=0)


def test_mha_head_shapes():
    layer = MultiHeadSelfAttention(512, 4, 20)
    assert tuple(layer.wq.shape[1:]) == (512, 128)
    out, scores = layer(_rand(20, 512).float(), return_scores=True)
    assert out.shape == (20, 512) and scores.shape == (4, 20, 20)
    torch.testing.assert_close(scores.sum(-1), torch.ones(4, 20), atol=1e-6, rtol=0)


def test_mha_kv_permutation_invariance():
    m, s, h = 5, 6, 2
    q, k, v = _rand(m, s, seed=1), _rand(7, s, seed=2), _rand(7, s, seed=3)
    w = ops.AttentionWeights(_rand(h, s, s // h, seed=4), _rand(h, s, s // h, seed=5),
                             _rand(h, s, s // h, seed=6), _rand(m, m, seed=7))
    perm = torch.randperm(7, generator=torch.Generator().manual_seed(0))
    torch.testing.assert_close(ops.mha(q, k, v, w, 5.0), ops.mha(q, k[perm], v[perm], w, 5.0))


def test_mha_shape_errors():
    s = 6
    w = ops.AttentionWeights(*(torch.zeros(2, s, 3, dtype=f64) for _ in range(3)), torch.eye(4, dtype=f64))
    with pytest.raises(ShapeError):
        ops.mha(_rand(4, s), _rand(5, s), _rand(6, s), w, 4.0)
    with pytest.raises(ShapeError):
        ops.mha(_rand(4, 5), _rand(4, 5), _rand(4, 5), w, 4.0)


def test_mha_scale_options():
    assert MultiHeadSelfAttention(8, 2, 5, "temporal").scale_dim == 5.0
    assert MultiHeadSelfAttention(8, 2, 5, "head").scale_dim == 4.0
    assert MultiHeadSelfAttention(8, 2, 5, 2.5).scale_dim == 2.5


# ---------------------------------------------------------------- gradcheck harness

def test_gradcheck_dense_tight():
    x, w, b = _rand(4, 5, seed=1), _rand(5, 3, seed=2), _rand(3, seed=3)
    r = _rand(4, 3, seed=4)
    rep = gradcheck(lambda: (ops.dense(x, w, b) * r).sum(), {"x": x, "w": w, "b": b}, tol=1e-6)
    assert rep.passed and rep.max_rel_err <= 1e-6


def test_gradcheck_mha():
    x = _rand(5, 4)
    wq, wk, wv = (_rand(2, 4, 2, seed=i) for i in (1, 2, 3))
    wo = torch.eye(5, dtype=f64)
    r = _rand(5, 4, seed=9)

    def f():
        return (ops.mha(x, x, x, ops.AttentionWeights(wq, wk, wv, wo), 5.0) * r).sum()

    assert gradcheck(f, {"x": x, "wq": wq, "wk": wk, "wv": wv, "wo": wo}).passed


def test_gradcheck_catches_corrupted_gradient():
    x = _rand(6)
    rep = gradcheck(lambda: corrupt_gradient((x ** 2).sum()), {"x": x})
    assert not rep.passed and rep.max_rel_err > 1e-3


def test_gradcheck_requires_float64():
    with pytest.raises(GradientError):
        gradcheck(lambda: torch.zeros(()), {"x": torch.zeros(3)})


def test_gradcheck_non_finite_gradient():
    x = torch.zeros(3, dtype=f64)
    with pytest.raises(GradientError):
        gradcheck(lambda: torch.sqrt(x).sum(), {"x": x})


# ---------------------------------------------------------------- layers and checkpoints

def test_seeded_init_is_reproducible():
    with seeded(3):
        a = TemporalConv(4, 5)
    with seeded(3):
        b = TemporalConv(4, 5)
    torch.testing.assert_close(a.weight, b.weight, rtol=0, atol=0)


def test_forward_deterministic():
    with seeded(0):
        layer = TemporalConv(4, 5)
    x = _rand(10, 4).float()
    assert torch.equal(layer(x), layer(x))


def test_checkpoint_round_trip(tmp_path):
    with seeded(0):
        layer = GRU(3, 4)
    meta = {"arch": {"d": 3, "g": 4}, "arch_hash": arch_hash({"d": 3, "g": 4}), "seed": 0, "epoch": 2}
    save_checkpoint(tmp_path / "a.ckpt", layer.state_dict(), meta)
    state, back = load_checkpoint(tmp_path / "a.ckpt")
    assert back == meta
    for k, v in layer.state_dict().items():
        assert torch.equal(state[k], v)
    save_checkpoint(tmp_path / "b.ckpt", state, back)
    assert (tmp_path / "a.ckpt").read_bytes() == (tmp_path / "b.ckpt").read_bytes()


def test_arch_hash_key_order_independent():
    assert arch_hash({"a": 1, "b": [2, 3]}) == arch_hash({"b": [2, 3], "a": 1})
    assert arch_hash({"a": 1}) != arch_hash({"a": 2})


@settings(max_examples=10, deadline=None)
@given(seed=st.integers(0, 100))
def test_registry_operator_gradchecks(seed):
    from avsum.gradchecks import OPERATORS, run_gradchecks
    run = run_gradchecks([n for n in OPERATORS if n != "gru"], seed=seed, n_seeds=1)
    assert run.passed, [r.to_dict() for r in run.reports if not r.passed]
