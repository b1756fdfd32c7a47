import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from taskprior.errors import IndexOutOfRange, SameEdge, ShapeMismatch, TooLarge
from taskprior.kernel import precomputed_kernel
from taskprior.prior import (
    TaskPrior,
    TaskStats,
    all_labelings,
    edge_probability,
    enumerate_measure,
    expected_trace,
    labeling_index,
    pair_probability,
    restricted_measure,
    sigmoid,
    task_stats,
    trace_variance,
)

from conftest import random_symmetric


def brute_force_graphs(k, t):
    """Independent enumeration: loop over every binary matrix with itertools."""
    n = k.shape[0]
    graphs, weights = [], []
    for bits in itertools.product((0, 1), repeat=n * n):
        g = np.array(bits, dtype=float).reshape(n, n)
        graphs.append(g)
        weights.append(math.exp(np.trace(g @ k) / t))
    w = np.array(weights)
    return np.array(graphs), w / w.sum()


K2 = np.array([[1.0, 0.5], [0.5, 1.0]])


def test_sigmoid_stable():
    x = np.array([-1e4, -50.0, 0.0, 50.0, 1e4])
    s = sigmoid(x)
    assert np.all(np.isfinite(s))
    assert s[0] == 0.0 and s[-1] == 1.0 and s[2] == 0.5
    np.testing.assert_allclose(sigmoid(x) + sigmoid(-x), 1.0, atol=1e-15)


def test_edge_probability_zero():
    p = TaskPrior(precomputed_kernel(np.zeros((3, 3))), 3.7)
    assert edge_probability(p, 0, 2) == 0.5


def test_edge_probability_ln3():
    t = 0.2
    p = TaskPrior(precomputed_kernel(np.full((2, 2), t * math.log(3))), t)
    assert abs(edge_probability(p, 0, 1) - 0.75) < 1e-15


def test_edge_probability_saturates():
    p = TaskPrior(precomputed_kernel([[1e4, -1e4], [-1e4, 1e4]]), 1.0)
    assert edge_probability(p, 0, 0) == 1.0
    assert edge_probability(p, 0, 1) == 0.0


def test_edge_probability_matches_16_graph_enumeration():
    graphs, probs = brute_force_graphs(K2, 1.0)
    assert len(graphs) == 16
    prior = TaskPrior(precomputed_kernel(K2), 1.0)
    for i in range(2):
        for j in range(2):
            marginal = probs[graphs[:, i, j] == 1].sum()
            assert abs(edge_probability(prior, i, j) - marginal) <= 1e-12


def test_pair_probability():
    prior = TaskPrior(precomputed_kernel(np.zeros((2, 2))), 1.0)
    assert pair_probability(prior, (0, 1), (1, 0)) == 0.25
    graphs, probs = brute_force_graphs(K2, 1.0)
    prior = TaskPrior(precomputed_kernel(K2), 1.0)
    edges = [(i, j) for i in range(2) for j in range(2)]
    for a, b in itertools.permutations(edges, 2):
        joint = probs[(graphs[:, a[0], a[1]] == 1) & (graphs[:, b[0], b[1]] == 1)].sum()
        assert abs(pair_probability(prior, a, b) - joint) <= 1e-12
        assert pair_probability(prior, a, b) == edge_probability(prior, *a) * edge_probability(prior, *b)


def test_pair_same_edge():
    prior = TaskPrior(precomputed_kernel(K2), 1.0)
    with pytest.raises(SameEdge):
        pair_probability(prior, (0, 1), (0, 1))


def test_index_out_of_range():
    prior = TaskPrior(precomputed_kernel(K2), 1.0)
    with pytest.raises(IndexOutOfRange):
        edge_probability(prior, 2, 0)
    with pytest.raises(IndexOutOfRange):
        edge_probability(prior, 0, -1)


def test_temperature_must_be_positive():
    with pytest.raises(ValueError):
        TaskPrior(precomputed_kernel(K2), 0.0)
    with pytest.raises(ValueError):
        TaskPrior(precomputed_kernel(K2), -1.0)


def test_expected_trace_zero_model():
    prior = TaskPrior(precomputed_kernel(K2), 1.0)
    assert expected_trace(prior, np.zeros((2, 2))) == 0.0
    assert trace_variance(prior, np.zeros((2, 2))) == 0.0


def test_expected_trace_high_temperature(rng):
    m = random_symmetric(rng, 5)
    prior = TaskPrior(precomputed_kernel(random_symmetric(rng, 5)), 1e12)
    half = 0.5 * m.sum()
    assert abs(expected_trace(prior, m) - half) <= 1e-6 * abs(half)


def test_variance_low_temperature(rng):
    k = random_symmetric(rng, 6)
    k = np.where(np.abs(k) < 0.1, 0.1 * np.sign(k) + (k == 0) * 0.1, k)
    prior = TaskPrior(precomputed_kernel(k), 1e-4)
    assert trace_variance(prior, random_symmetric(rng, 6)) <= 1e-12


def test_expected_trace_matches_enumeration_and_monte_carlo():
    graphs, probs = brute_force_graphs(K2, 1.0)
    traces = np.einsum("gij,ji->g", graphs, K2)
    exact = float(probs @ traces)
    prior = TaskPrior(precomputed_kernel(K2), 1.0)
    assert abs(expected_trace(prior, K2) - exact) <= 1e-12
    # independent Bernoulli edges drawn directly with numpy
    draws = np.random.default_rng(99).random((10**6, 2, 2)) < sigmoid(K2)
    samples = np.einsum("gij,ji->g", draws.astype(float), K2)
    se = samples.std() / math.sqrt(samples.size)
    assert abs(samples.mean() - expected_trace(prior, K2)) < 4 * se


def test_variance_matches_monte_carlo(rng):
    k = random_symmetric(rng, 3)
    m = random_symmetric(rng, 3)
    prior = TaskPrior(precomputed_kernel(k), 0.8)
    draws = np.random.default_rng(5).random((10**6, 3, 3)) < sigmoid(k / 0.8)
    samples = np.einsum("gij,ji->g", draws.astype(float), m)
    var = trace_variance(prior, m)
    assert abs(samples.var(ddof=1) - var) <= 0.05 * var


def test_include_diagonal_flag(rng):
    k = random_symmetric(rng, 4)
    m = random_symmetric(rng, 4)
    prior = TaskPrior(precomputed_kernel(k), 0.3)
    p = sigmoid(k / 0.3)
    off = ~np.eye(4, dtype=bool)
    assert abs(expected_trace(prior, m, include_diagonal=False) - (m * p)[off].sum()) < 1e-12
    assert abs(trace_variance(prior, m, include_diagonal=False) - (m**2 * p * (1 - p))[off].sum()) < 1e-12


def test_shape_mismatch():
    prior = TaskPrior(precomputed_kernel(K2), 1.0)
    with pytest.raises(ShapeMismatch):
        expected_trace(prior, np.eye(3))
    with pytest.raises(ShapeMismatch):
        trace_variance(prior, np.eye(3))


def test_blocked_reduction_matches_dense(rng, monkeypatch):
    import taskprior.prior as prior_mod

    k = random_symmetric(rng, 37)
    m = random_symmetric(rng, 37)
    prior = TaskPrior(precomputed_kernel(k), 0.4)
    dense = expected_trace(prior, m)
    monkeypatch.setattr(prior_mod, "_BLOCK_ELEMS", 100)
    assert abs(expected_trace(prior, m) - dense) < 1e-10


def test_task_stats_bundle(rng):
    k = precomputed_kernel(random_symmetric(rng, 4), model_id="p")
    prior = TaskPrior(k, 0.5)
    m = precomputed_kernel(random_symmetric(rng, 4), model_id="m")
    s = task_stats(prior, m)
    assert isinstance(s, TaskStats)
    assert s.mean == expected_trace(prior, m)
    assert s.variance == trace_variance(prior, m)
    assert (s.n, s.temperature, s.prior_model_id, s.model_id) == (4, 0.5, "p", "m")


# invariants


@settings(max_examples=60, deadline=None)
@given(
    a=st.floats(-5, 5), b=st.floats(-5, 5), t=st.floats(0.05, 20), t2=st.floats(0.05, 20)
)
def test_monotonicity(a, b, t, t2):
    lo, hi = sorted((a, b))
    if hi - lo < 1e-6 or max(abs(lo), abs(hi)) / t > 30:
        return
    prior = TaskPrior(precomputed_kernel([[lo, 0.0], [0.0, hi]]), t)
    assert edge_probability(prior, 0, 0) < edge_probability(prior, 1, 1)
    t_lo, t_hi = sorted((t, t2))
    # strictness is only resolvable in float64 away from 0 and saturation
    if t_hi - t_lo < 1e-3 or hi < 1e-3 or hi / t_lo > 30:
        return
    cold = TaskPrior(precomputed_kernel([[hi]]), t_lo)
    hot = TaskPrior(precomputed_kernel([[hi]]), t_hi)
    assert edge_probability(hot, 0, 0) < edge_probability(cold, 0, 0)


def test_enumeration_consistency(rng):
    for n in (1, 2, 3):
        for t in (0.3, 1.0, 4.0):
            prior = TaskPrior(precomputed_kernel(random_symmetric(rng, n)), t)
            graphs, probs = enumerate_measure(prior)
            assert abs(probs.sum() - 1) <= 1e-12
            flat = graphs.reshape(len(graphs), -1)
            edges = [(i, j) for i in range(n) for j in range(n)]
            for e, (i, j) in enumerate(edges):
                assert abs(probs[flat[:, e] == 1].sum() - edge_probability(prior, i, j)) <= 1e-10
                for f, (l, kk) in enumerate(edges):
                    if f != e:
                        joint = probs[(flat[:, e] == 1) & (flat[:, f] == 1)].sum()
                        assert abs(joint - pair_probability(prior, (i, j), (l, kk))) <= 1e-10


def test_enumerate_measure_matches_itertools(rng):
    k = random_symmetric(rng, 2)
    graphs, probs = enumerate_measure(TaskPrior(precomputed_kernel(k), 0.7))
    ref_graphs, ref_probs = brute_force_graphs(k, 0.7)
    # same multiset of (graph, prob) pairs
    key = lambda g: tuple(g.ravel().astype(int))  # noqa: E731
    ours = {key(g): p for g, p in zip(graphs, probs)}
    for g, p in zip(ref_graphs, ref_probs):
        assert abs(ours[key(g)] - p) < 1e-14


def test_enumerate_single_point():
    graphs, probs = enumerate_measure(TaskPrior(precomputed_kernel([[0.0]]), 1.0))
    assert len(graphs) == 2
    np.testing.assert_allclose(probs, [0.5, 0.5])


def test_enumerate_too_large():
    with pytest.raises(TooLarge):
        enumerate_measure(TaskPrior(precomputed_kernel(np.eye(5)), 1.0))


@settings(max_examples=30, deadline=None)
@given(a=st.floats(-3, 3), b=st.floats(-3, 3), seed=st.integers(0, 1000))
def test_linearity(a, b, seed):
    r = np.random.default_rng(seed)
    prior = TaskPrior(precomputed_kernel(random_symmetric(r, 6)), 0.5)
    m1, m2 = random_symmetric(r, 6), random_symmetric(r, 6)
    lhs = expected_trace(prior, a * m1 + b * m2)
    rhs = a * expected_trace(prior, m1) + b * expected_trace(prior, m2)
    scale = abs(a) * np.abs(m1).sum() + abs(b) * np.abs(m2).sum() + 1e-300
    assert abs(lhs - rhs) <= 1e-9 * max(abs(rhs), scale)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10**6), t=st.floats(1e-3, 1e3), diag=st.booleans())
def test_variance_bound(seed, t, diag):
    r = np.random.default_rng(seed)
    n = 5
    prior = TaskPrior(precomputed_kernel(random_symmetric(r, n)), t)
    m = random_symmetric(r, n, scale=10)
    s = task_stats(prior, m, include_diagonal=diag)
    mask = np.ones((n, n), bool) if diag else ~np.eye(n, dtype=bool)
    assert 0 <= s.variance <= 0.25 * (m[mask] ** 2).sum() * (1 + 1e-12)


# restricted measure


def test_restricted_uniform_for_zero_kernel():
    labs, probs = restricted_measure(TaskPrior(precomputed_kernel(np.zeros((3, 3))), 1.0), 3)
    assert len(labs) == 27
    np.testing.assert_allclose(probs, 1 / 27)


def test_restricted_two_points():
    k = np.array([[0.0, 1.0], [1.0, 0.0]])
    labs, probs = restricted_measure(TaskPrior(precomputed_kernel(k), 1.0), 2)
    same = probs[labs[:, 0] == labs[:, 1]].sum()
    # labelings 00, 11 have Tr(YY^T K) = 2, labelings 01, 10 have 0
    assert abs(same - math.e**2 / (math.e**2 + 1)) < 1e-14


def test_restricted_relabeling_invariance(rng):
    q = 3
    prior = TaskPrior(precomputed_kernel(random_symmetric(rng, 4)), 0.6)
    labs, probs = restricted_measure(prior, q)
    for perm in itertools.permutations(range(q)):
        relabeled = np.array(perm)[labs]
        np.testing.assert_allclose(probs[labeling_index(relabeled, q)], probs, atol=1e-15)


def test_restricted_too_large():
    with pytest.raises(TooLarge):
        restricted_measure(TaskPrior(precomputed_kernel(np.eye(21)), 1.0), 2)


def test_labeling_index_order():
    labs = all_labelings(3, 2)
    np.testing.assert_array_equal(labeling_index(labs, 2), np.arange(8))
