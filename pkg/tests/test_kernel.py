import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from taskprior.errors import NonFinite, NotSquare, ShapeMismatch, ZeroRow
from taskprior.kernel import (
    KernelMatrix,
    centered_cosine_kernel,
    combine_priors,
    double_center,
    factorize,
    linear_kernel,
    precomputed_kernel,
    ssl_labels,
    ssl_prior_graph,
)
from taskprior.prior import TaskPrior, edge_probability, sigmoid

from conftest import random_symmetric


def centering(n):
    return np.eye(n) - np.ones((n, n)) / n


def check_kernel_invariants(k):
    d = k.data
    assert np.all(np.abs(d - d.T) <= 1e-9 * np.maximum(1, np.abs(d)))
    if k.centered:
        assert np.all(np.abs(d.sum(axis=1)) <= 1e-6 * k.n)
    if k.factor is not None:
        assert np.max(np.abs(d - k.factor @ k.factor.T)) <= 1e-6


def test_one_hot_pair():
    # mean [.5,.5] -> rows +-[.5,-.5] -> unit rows +-[1,-1]/sqrt2 -> Gram [[1,-1],[-1,1]],
    # already centered so H K H leaves it unchanged
    k = centered_cosine_kernel(np.array([[1.0, 0.0], [0.0, 1.0]]))
    np.testing.assert_allclose(k.data, [[1.0, -1.0], [-1.0, 1.0]], atol=1e-15)


def test_matches_explicit_construction(rng):
    x = rng.standard_normal((9, 4))
    xc = x - x.mean(0)
    f = xc / np.linalg.norm(xc, axis=1, keepdims=True)
    h = centering(9)
    expected = h @ (f @ f.T) @ h
    k = centered_cosine_kernel(x)
    np.testing.assert_allclose(k.data, expected, atol=1e-12)
    assert k.centered and k.kind == "centered_cosine"
    check_kernel_invariants(k)


def test_identical_rows_raise():
    with pytest.raises(ZeroRow):
        centered_cosine_kernel(np.array([[1.0, 2.0], [1.0, 2.0]]))


@settings(max_examples=40, deadline=None)
@given(arrays(np.float64, (7, 3), elements=st.floats(-10, 10)))
def test_invariants_property(x):
    try:
        k = centered_cosine_kernel(x)
    except ZeroRow:
        return
    check_kernel_invariants(k)


def test_permutation_equivariance(rng):
    for _ in range(10):
        x = rng.standard_normal((6, 4))
        perm = rng.permutation(6)
        a = centered_cosine_kernel(x[perm]).data
        b = centered_cosine_kernel(x).data[np.ix_(perm, perm)]
        np.testing.assert_allclose(a, b, atol=1e-10)


def test_centering_idempotent(rng):
    k = random_symmetric(rng, 8)
    once = double_center(k)
    np.testing.assert_allclose(double_center(once), once, atol=1e-10)
    h = centering(8)
    np.testing.assert_allclose(once, h @ k @ h, atol=1e-12)


def test_linear_kernel(rng):
    x = rng.standard_normal((5, 3))
    k = linear_kernel(x)
    xc = x - x.mean(0)
    np.testing.assert_allclose(k.data, xc @ xc.T, atol=1e-12)
    check_kernel_invariants(k)


def test_precomputed_identity_unchanged():
    k = precomputed_kernel(np.eye(3))
    np.testing.assert_array_equal(k.data, np.eye(3))
    assert not k.symmetrized and k.factor is None


def test_precomputed_symmetrizes():
    k = precomputed_kernel([[0.0, 1.0], [0.0, 0.0]])
    np.testing.assert_array_equal(k.data, [[0.0, 0.5], [0.5, 0.0]])
    assert k.symmetrized


def test_precomputed_center(rng):
    k = precomputed_kernel(random_symmetric(rng, 4), center=True)
    np.testing.assert_allclose(k.data.sum(axis=1), 0, atol=1e-12)
    assert k.centered


def test_precomputed_errors():
    with pytest.raises(NotSquare):
        precomputed_kernel(np.ones((2, 3)))
    with pytest.raises(NonFinite):
        precomputed_kernel([[0.0, np.inf], [0.0, 0.0]])


def test_factorize_recovers_gram(rng):
    z = rng.standard_normal((5, 2))
    k = z @ z.T
    zf = factorize(precomputed_kernel(k))
    assert zf.shape == (5, 2)
    np.testing.assert_allclose(zf @ zf.T, k, atol=1e-8)


def test_factorize_identity():
    z = factorize(np.eye(4))
    np.testing.assert_allclose(z @ z.T, np.eye(4), atol=1e-12)


def test_factorize_clips_negative(rng):
    q, _ = np.linalg.qr(rng.standard_normal((2, 2)))
    k = q @ np.diag([1.0, -0.1]) @ q.T
    z = factorize(k)
    assert z.shape == (2, 1)
    np.testing.assert_allclose(np.linalg.eigvalsh(z @ z.T), [0.0, 1.0], atol=1e-12)


@settings(max_examples=40, deadline=None)
@given(arrays(np.float64, (6, 3), elements=st.floats(-5, 5)))
def test_factorize_roundtrip_property(z):
    k = z @ z.T
    zf = factorize(k)
    np.testing.assert_allclose(zf @ zf.T, k, atol=1e-8 * max(1.0, np.abs(k).max()))


def test_factorize_indefinite_projection(rng):
    a = random_symmetric(rng, 6)
    w, v = np.linalg.eigh(a)
    kplus = (v * np.clip(w, 0, None)) @ v.T
    z = factorize(a)
    assert np.max(np.abs(kplus - z @ z.T)) <= 1e-6


def test_with_factor(rng):
    k = precomputed_kernel(np.cov(rng.standard_normal((4, 10))))
    kf = k.with_factor()
    check_kernel_invariants(kf)


def test_combine_zero_is_identity(rng):
    k = centered_cosine_kernel(rng.standard_normal((5, 3)))
    zero = KernelMatrix(np.zeros((5, 5)), centered=True, factor=np.zeros((5, 0)))
    c = combine_priors(k, zero)
    np.testing.assert_array_equal(c.data, k.data)
    assert c.centered


def test_combine_factors(rng):
    z1, z2 = rng.standard_normal((6, 2)), rng.standard_normal((6, 3))
    k1 = KernelMatrix(z1 @ z1.T, factor=z1)
    k2 = KernelMatrix(z2 @ z2.T, factor=z2)
    c = combine_priors(k1, k2)
    assert c.factor.shape == (6, 5)
    # [Z1 Z2][Z1 Z2]^T = Z1 Z1^T + Z2 Z2^T
    np.testing.assert_allclose(c.factor @ c.factor.T, k1.data + k2.data, atol=1e-12)
    assert not c.centered


def test_combine_edge_probabilities(rng):
    k1 = precomputed_kernel(random_symmetric(rng, 4))
    k2 = precomputed_kernel(random_symmetric(rng, 4))
    prior = TaskPrior(combine_priors(k1, k2), 0.7)
    for i in range(4):
        for j in range(4):
            expected = 1.0 / (1.0 + np.exp(-(k1.data[i, j] + k2.data[i, j]) / 0.7))
            assert abs(edge_probability(prior, i, j) - expected) <= 1e-12


def test_combine_shape_mismatch():
    with pytest.raises(ShapeMismatch):
        combine_priors(precomputed_kernel(np.eye(2)), precomputed_kernel(np.eye(3)))


def test_ssl_graph_two_by_two():
    g = ssl_prior_graph(2, 2)
    np.testing.assert_array_equal(
        g.data, [[1, 1, 0, 0], [1, 1, 0, 0], [0, 0, 1, 1], [0, 0, 1, 1]]
    )
    assert not g.centered and g.kind == "precomputed"


def test_ssl_single_view_is_identity():
    np.testing.assert_array_equal(ssl_prior_graph(5, 1).data, np.eye(5))


@pytest.mark.parametrize("n,v", [(1, 1), (3, 2), (4, 3), (2, 5)])
def test_ssl_graph_properties(n, v):
    g = ssl_prior_graph(n, v).data
    assert g.shape == (n * v, n * v)
    np.testing.assert_array_equal(g, g.T)
    np.testing.assert_array_equal(g @ g, v * g)
    assert g.sum() == n * v * v
    # G = Y Y^T with Y the one-hot of "each sample is its own class"
    y = np.zeros((n * v, n))
    for i in range(n * v):
        y[i, i // v] = 1
    np.testing.assert_array_equal(y @ y.T, g)
    np.testing.assert_array_equal(ssl_labels(n, v), np.arange(n * v) // v)


def test_sigmoid_of_combined_matches_product_measure(rng):
    # mu_K1 * mu_K2 normalized over single-edge states equals sigmoid((K1+K2)/T)
    a, b, t = 0.3, -1.2, 0.5
    w1 = np.exp(a / t) * np.exp(b / t)
    assert abs(w1 / (1 + w1) - sigmoid((a + b) / t)) < 1e-15
