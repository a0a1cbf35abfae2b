import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stereoseld import numerics as nx

# ---------------------------------------------------------------------------
# naive references


def naive_matmul(a, b):
    m, k = a.shape
    k2, n = b.shape
    out = np.zeros((m, n))
    for i in range(m):
        for j in range(n):
            s = 0.0
            for t in range(k):
                s += a[i, t] * b[t, j]
            out[i, j] = s
    return out


def naive_softmax_rows(x):
    out = np.zeros_like(x)
    for i in range(x.shape[0]):
        e = np.exp(x[i] - x[i].max())
        out[i] = e / e.sum()
    return out


def naive_conv2d(x, w):
    c, h, wd = x.shape
    o = w.shape[0]
    xp = np.pad(x, ((0, 0), (1, 1), (1, 1)))
    out = np.zeros((o, h, wd))
    for oo in range(o):
        for y in range(h):
            for xx in range(wd):
                s = 0.0
                for cc in range(c):
                    for dy in range(3):
                        for dx in range(3):
                            s += w[oo, cc, dy, dx] * xp[cc, y + dy, xx + dx]
                out[oo, y, xx] = s
    return out


def naive_depthwise(x, k):
    t, d = x.shape
    ksz = k.shape[1]
    pad = (ksz - 1) // 2
    xp = np.pad(x, ((pad, pad), (0, 0)))
    out = np.zeros_like(x)
    for ti in range(t):
        for di in range(d):
            s = 0.0
            for j in range(ksz):
                s += xp[ti + j, di] * k[di, j]
            out[ti, di] = s
    return out


def naive_avgpool(x):
    c, h, w = x.shape
    ho, wo = (h + 1) // 2, (w + 1) // 2
    out = np.zeros((c, ho, wo))
    for cc in range(c):
        for i in range(ho):
            for j in range(wo):
                patch = x[cc, 2 * i : 2 * i + 2, 2 * j : 2 * j + 2]
                out[cc, i, j] = patch.mean()
    return out


def rel_close(a, b, tol=1e-6):
    scale = max(np.abs(b).max(), 1.0)
    return np.abs(a - b).max() <= tol * scale


# ---------------------------------------------------------------------------
# matmul


def test_matmul_identity():
    x = np.arange(12, dtype=np.float64).reshape(3, 4)
    assert np.array_equal(nx.matmul(np.eye(3), x), x)


def test_matmul_hand_case():
    a = np.array([[1.0, 2.0], [3.0, 4.0]])
    b = np.array([[0.0, 1.0], [1.0, 0.0]])
    assert np.array_equal(nx.matmul(a, b), [[2.0, 1.0], [4.0, 3.0]])


def test_matmul_ones_summation():
    a = np.ones((1, 51))
    b = np.ones((51, 1))
    assert nx.matmul(a, b)[0, 0] == 51.0


def test_matmul_shape_error():
    with pytest.raises(ValueError, match="inner dims"):
        nx.matmul(np.ones((2, 3)), np.ones((4, 2)))


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 5), st.integers(1, 5), st.integers(1, 5), st.integers(0, 2**31 - 1))
def test_matmul_matches_naive(m, k, n, seed):
    r = np.random.default_rng(seed)
    a = r.uniform(-2, 2, (m, k))
    b = r.uniform(-2, 2, (k, n))
    assert rel_close(nx.matmul(a, b), naive_matmul(a, b))


# ---------------------------------------------------------------------------
# softmax


def test_softmax_uniform_row():
    out = nx.softmax_rows(np.zeros((1, 3)))
    assert np.allclose(out, 1.0 / 3.0, atol=1e-12)


def test_softmax_saturation_no_overflow():
    out = nx.softmax_rows(np.array([[1000.0, 0.0, 0.0]]))
    assert np.isfinite(out).all()
    assert np.allclose(out, [[1.0, 0.0, 0.0]], atol=1e-12)


def test_softmax_closed_form():
    out = nx.softmax_rows(np.array([[np.log(2.0), 0.0]]))
    assert np.allclose(out, [[2.0 / 3.0, 1.0 / 3.0]], atol=1e-12)


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 6), st.integers(1, 6), st.integers(0, 2**31 - 1))
def test_softmax_rows_properties(r_, c_, seed):
    r = np.random.default_rng(seed)
    x = r.uniform(-50, 50, (r_, c_))
    out = nx.softmax_rows(x)
    assert rel_close(out, naive_softmax_rows(x))
    assert np.all(out >= 0.0) and np.all(out <= 1.0)
    assert np.abs(out.sum(axis=1) - 1.0).max() <= 1e-6


# ---------------------------------------------------------------------------
# conv2d


def test_conv2d_delta_kernel_is_identity(rng):
    x = rng.normal(size=(2, 5, 6))
    w = np.zeros((2, 2, 3, 3))
    for c in range(2):
        w[c, c, 1, 1] = 1.0
    assert np.allclose(nx.conv2d(x, w), x, atol=1e-12)


def test_conv2d_border_arithmetic():
    c = 1.7
    x = np.full((1, 4, 5), c)
    w = np.ones((1, 1, 3, 3))
    out = nx.conv2d(x, w)
    assert np.allclose(out[0, 1:-1, 1:-1], 9 * c)
    assert np.allclose(out[0, 0, 0], 4 * c)
    assert np.allclose(out[0, 0, 1:-1], 6 * c)


def test_conv2d_channel_mismatch():
    with pytest.raises(ValueError, match="channel mismatch"):
        nx.conv2d(np.ones((3, 4, 4)), np.ones((2, 2, 3, 3)))


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 3), st.integers(1, 3), st.integers(1, 6), st.integers(1, 6), st.integers(0, 2**31 - 1))
def test_conv2d_matches_naive(c, o, h, wd, seed):
    r = np.random.default_rng(seed)
    x = r.uniform(-1, 1, (c, h, wd))
    w = r.uniform(-1, 1, (o, c, 3, 3))
    assert rel_close(nx.conv2d(x, w), naive_conv2d(x, w))


# ---------------------------------------------------------------------------
# depthwise conv1d


def test_depthwise_delta_identity(rng):
    x = rng.normal(size=(10, 4))
    k = np.zeros((4, 5))
    k[:, 2] = 1.0
    assert np.allclose(nx.depthwise_conv1d(x, k), x, atol=1e-12)


def test_depthwise_ones_kernel_interior():
    c = 0.4
    x = np.full((200, 2), c)
    k = np.ones((2, 51))
    out = nx.depthwise_conv1d(x, k)
    assert np.allclose(out[25:-25], 51 * c)


def test_depthwise_even_kernel_rejected():
    with pytest.raises(ValueError, match="even kernel"):
        nx.depthwise_conv1d(np.ones((5, 2)), np.ones((2, 4)))


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 8), st.integers(1, 4), st.sampled_from([1, 3, 5, 7]), st.integers(0, 2**31 - 1))
def test_depthwise_matches_naive(t, d, ksz, seed):
    r = np.random.default_rng(seed)
    x = r.uniform(-1, 1, (t, d))
    k = r.uniform(-1, 1, (d, ksz))
    assert rel_close(nx.depthwise_conv1d(x, k), naive_depthwise(x, k))


# ---------------------------------------------------------------------------
# avgpool


def test_avgpool_constant():
    x = np.full((2, 6, 8), 3.3)
    assert np.allclose(nx.avgpool2d_stride2(x), 3.3)


def test_avgpool_hand_case():
    out = nx.avgpool2d_stride2(np.array([[[1.0, 2.0], [3.0, 4.0]]]))
    assert out.shape == (1, 1, 1)
    assert out[0, 0, 0] == 2.5


def test_avgpool_shape_contract():
    out = nx.avgpool2d_stride2(np.zeros((1, 800, 64)))
    assert out.shape == (1, 400, 32)


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 3), st.integers(1, 7), st.integers(1, 7), st.integers(0, 2**31 - 1))
def test_avgpool_matches_naive(c, h, w, seed):
    r = np.random.default_rng(seed)
    x = r.uniform(-1, 1, (c, h, w))
    got = nx.avgpool2d_stride2(x)
    assert got.shape == ((c, (h + 1) // 2, (w + 1) // 2))
    assert rel_close(got, naive_avgpool(x))


# ---------------------------------------------------------------------------
# norm_infer


def test_norm_identity_params(rng):
    x = rng.normal(size=(3, 4))
    out = nx.norm_infer(x, 1.0, 0.0, 0.0, 1.0 - 1e-5, 1e-5)
    assert np.allclose(out, x, atol=1e-12)


def test_norm_x_equals_mean_gives_beta(rng):
    x = rng.normal(size=(5,))
    out = nx.norm_infer(x, 2.0, 7.0, x, np.ones(5), 1e-5)
    assert np.allclose(out, 7.0, atol=1e-9)


def test_norm_scalar_hand_check():
    # (3 - 1)/sqrt(4 + 1) * 2 + 0.5
    out = nx.norm_infer(np.array([3.0]), 2.0, 0.5, 1.0, 4.0, 1.0)
    assert np.allclose(out, 2.0 / np.sqrt(5.0) * 2.0 + 0.5, atol=1e-12)


def test_norm_rejects_negative_variance():
    with pytest.raises(ValueError, match="variance"):
        nx.norm_infer(np.ones(3), 1.0, 0.0, 0.0, np.array([1.0, -0.1, 1.0]), 1e-5)


def test_norm_rejects_nonpositive_eps():
    with pytest.raises(ValueError, match="eps"):
        nx.norm_infer(np.ones(3), 1.0, 0.0, 0.0, np.ones(3), 0.0)


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 6), st.integers(0, 2**31 - 1))
def test_norm_matches_naive(n, seed):
    r = np.random.default_rng(seed)
    x = r.uniform(-3, 3, (n, 4))
    gamma = r.uniform(0.5, 2, 4)
    beta = r.uniform(-1, 1, 4)
    mean = r.uniform(-1, 1, 4)
    var = r.uniform(0.1, 2, 4)
    ref = (x - mean) / np.sqrt(var + 1e-5) * gamma + beta
    assert rel_close(nx.norm_infer(x, gamma, beta, mean, var, 1e-5), ref)


# ---------------------------------------------------------------------------
# purity


def test_ops_are_pure(rng):
    x = rng.normal(size=(3, 5, 7))
    w = rng.normal(size=(2, 3, 3, 3))
    assert np.array_equal(nx.conv2d(x, w), nx.conv2d(x, w))
    m = rng.normal(size=(4, 6))
    assert np.array_equal(nx.softmax_rows(m), nx.softmax_rows(m))
    assert np.array_equal(nx.matmul(m, m.T), nx.matmul(m, m.T))
    k = rng.normal(size=(6, 5))
    assert np.array_equal(nx.depthwise_conv1d(m, k), nx.depthwise_conv1d(m, k))
    assert np.array_equal(nx.avgpool2d_stride2(x), nx.avgpool2d_stride2(x))


def test_ops_finite_on_finite_input(rng):
    x = rng.normal(size=(2, 4, 4)) * 1e3
    w = rng.normal(size=(2, 2, 3, 3)) * 1e3
    assert np.isfinite(nx.conv2d(x, w)).all()
    assert np.isfinite(nx.softmax_rows(rng.normal(size=(3, 3)) * 1e4)).all()
