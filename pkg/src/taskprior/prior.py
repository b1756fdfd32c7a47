"""The Gibbs task prior mu_K(G) ~ exp(Tr(GK)/T) over binary label graphs.

Under mu_K every entry of G is an independent Bernoulli variable with
success probability sigmoid(K_ij / T), which makes the moments of the
alignment score Tr(MG) available in O(N^2) without a partition function.
The enumeration helpers at the bottom brute-force the same quantities
for tiny N and serve as oracles.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import ClassVar

import numpy as np

from .errors import IndexOutOfRange, SameEdge, ShapeMismatch, TooLarge
from .kernel import KernelMatrix

DEFAULT_TEMPERATURE = 0.01

MAX_ENUM_N = 4
MAX_LABELINGS = 2**20
# rows per block when reducing over an N x N kernel
_BLOCK_ELEMS = 1 << 22


def sigmoid(x):
    """Logistic function using only exp of non-positive arguments."""
    x = np.asarray(x, dtype=np.float64)
    e = np.exp(-np.abs(x))
    return np.where(x >= 0, 1.0 / (1.0 + e), e / (1.0 + e))


def _bernoulli_var(x):
    # sigma(x) * (1 - sigma(x)) = sigma(x) * sigma(-x), no cancellation
    e = np.exp(-np.abs(np.asarray(x, dtype=np.float64)))
    return e / (1.0 + e) ** 2


@dataclass(frozen=True)
class TaskPrior:
    kernel: KernelMatrix
    temperature: float = DEFAULT_TEMPERATURE

    def __post_init__(self):
        if not isinstance(self.kernel, KernelMatrix):
            object.__setattr__(self, "kernel", KernelMatrix(np.asarray(self.kernel, dtype=float)))
        t = float(self.temperature)
        if not (t > 0 and np.isfinite(t)):
            raise ValueError(f"temperature must be positive and finite, got {self.temperature!r}")
        object.__setattr__(self, "temperature", t)

    @property
    def n(self):
        return self.kernel.n

    def edge_probabilities(self):
        """N x N matrix of P(G_ij = 1)."""
        return sigmoid(self.kernel.data / self.temperature)


@dataclass(frozen=True)
class TaskStats:
    """Closed-form moments of Tr(MG) under a task prior."""

    kind: ClassVar[str] = "task_stats"

    mean: float
    variance: float
    n: int
    temperature: float
    include_diagonal: bool = True
    kernel: str = ""
    prior_model_id: str = ""
    model_id: str = ""

    @property
    def std(self):
        return float(np.sqrt(self.variance))

    def params(self):
        return {
            "temperature": self.temperature,
            "kernel": self.kernel,
            "include_diagonal": self.include_diagonal,
            "prior_model_id": self.prior_model_id,
            "model_id": self.model_id,
        }

    def payload(self):
        n = self.n
        return {
            "mean": self.mean,
            "variance": self.variance,
            "n": n,
            # raw sums are primary; the normalized views are for plotting
            "mean_per_n": self.mean / n,
            "mean_per_n2": self.mean / n**2,
            "variance_per_n2": self.variance / n**2,
            "variance_per_n4": self.variance / n**4,
        }

    @classmethod
    def from_document(cls, params, payload):
        return cls(
            mean=float(payload["mean"]),
            variance=float(payload["variance"]),
            n=int(payload["n"]),
            temperature=float(params["temperature"]),
            include_diagonal=bool(params["include_diagonal"]),
            kernel=params.get("kernel", ""),
            prior_model_id=params.get("prior_model_id", ""),
            model_id=params.get("model_id", ""),
        )


def _check_index(prior, i, j):
    n = prior.n
    if not (0 <= i < n and 0 <= j < n):
        raise IndexOutOfRange(f"edge ({i}, {j}) out of range for N={n}")


def edge_probability(prior, i, j):
    """P(G_ij = 1) = sigmoid(K_ij / T)."""
    _check_index(prior, i, j)
    return float(sigmoid(prior.kernel.data[i, j] / prior.temperature))


def pair_probability(prior, edge_a, edge_b):
    """P(G_a = 1 and G_b = 1) for two distinct edges."""
    (i, j), (l, k) = edge_a, edge_b
    _check_index(prior, i, j)
    _check_index(prior, l, k)
    if (i, j) == (l, k):
        raise SameEdge(f"edge {edge_a} given twice; use edge_probability")
    return edge_probability(prior, i, j) * edge_probability(prior, l, k)


def _model_matrix(prior, m):
    data = m.data if isinstance(m, KernelMatrix) else np.asarray(m, dtype=np.float64)
    if data.shape != (prior.n, prior.n):
        raise ShapeMismatch(f"model kernel has shape {data.shape}, prior has N={prior.n}")
    return data


def _reduce(prior, m, fn, square):
    # blocked so that N = 8192 never holds more than a few N x N temporaries
    k = prior.kernel.data
    t = prior.temperature
    n = prior.n
    rows = max(1, _BLOCK_ELEMS // max(n, 1))
    total = 0.0
    for start in range(0, n, rows):
        stop = min(n, start + rows)
        mb = m[start:stop]
        w = fn(k[start:stop] / t)
        total += float(np.sum((mb * mb if square else mb) * w))
    idx = np.arange(n)
    md = m[idx, idx]
    diag = float(np.sum((md * md if square else md) * fn(k[idx, idx] / t)))
    return total, diag


def expected_trace(prior, m, include_diagonal=True):
    """E[Tr(MG)] = sum_ij M_ij sigmoid(K_ij / T).

    With ``include_diagonal=False`` the i == j terms are left out; for
    one-hot tasks G_ii is always 1 and carries no information.
    """
    data = _model_matrix(prior, m)
    total, diag = _reduce(prior, data, sigmoid, square=False)
    return total if include_diagonal else total - diag


def trace_variance(prior, m, include_diagonal=True):
    """Var[Tr(MG)] = sum_ij M_ij^2 s_ij (1 - s_ij), s_ij = sigmoid(K_ij / T)."""
    data = _model_matrix(prior, m)
    total, diag = _reduce(prior, data, _bernoulli_var, square=True)
    out = total if include_diagonal else total - diag
    return max(out, 0.0)


def task_stats(prior, m, include_diagonal=True):
    """Mean and variance of Tr(MG) bundled as :class:`TaskStats`."""
    kind = m.kind if isinstance(m, KernelMatrix) else "precomputed"
    model_id = m.model_id if isinstance(m, KernelMatrix) else ""
    return TaskStats(
        mean=expected_trace(prior, m, include_diagonal),
        variance=trace_variance(prior, m, include_diagonal),
        n=prior.n,
        temperature=prior.temperature,
        include_diagonal=include_diagonal,
        kernel=kind,
        prior_model_id=prior.kernel.model_id,
        model_id=model_id,
    )


# --------------------------------------------------------------------------
# exact enumeration (oracles, tiny N)

def all_graphs(n):
    """Every binary N x N matrix, shape (2**(N*N), N, N), uint8."""
    bits = n * n
    codes = np.arange(2**bits, dtype=np.int64)[:, None]
    flat = (codes >> np.arange(bits)) & 1
    return flat.astype(np.uint8).reshape(-1, n, n)


def _softmax_logweights(logw):
    logw = logw - logw.max()
    w = np.exp(logw)
    return w / w.sum()


def enumerate_measure(prior):
    """Exact mu_K over all 2**(N*N) graphs.

    Returns ``(graphs, probs)``. Limited to N <= 4.
    """
    n = prior.n
    if n > MAX_ENUM_N:
        raise TooLarge(f"enumerating 2**{n * n} graphs is not supported (N <= {MAX_ENUM_N})")
    graphs = all_graphs(n)
    energy = graphs.reshape(len(graphs), -1).astype(np.float64) @ prior.kernel.data.ravel()
    return graphs, _softmax_logweights(energy / prior.temperature)


def all_labelings(n, q):
    """Every labeling in {0..q-1}^N, lexicographic, shape (q**N, N)."""
    return np.array(list(itertools.product(range(q), repeat=n)), dtype=np.int64).reshape(-1, n)


def labeling_energy(labels, k):
    """Tr(Y Y^T K) = sum_ij K_ij [y_i == y_j], vectorized over leading axes."""
    labels = np.asarray(labels)
    same = labels[..., :, None] == labels[..., None, :]
    return np.einsum("...ij,ij->...", same.astype(np.float64), np.asarray(k, dtype=np.float64))


def restricted_measure(prior, q):
    """Exact mu_K^q (the Potts model) over all q**N labelings.

    Returns ``(labelings, probs)`` with labelings in lexicographic order.
    """
    n = prior.n
    if q < 1:
        raise ValueError("q must be >= 1")
    if q**n > MAX_LABELINGS:
        raise TooLarge(f"{q}**{n} labelings exceeds the enumeration cap of 2**20")
    labs = all_labelings(n, q)
    energy = labeling_energy(labs, prior.kernel.data)
    return labs, _softmax_logweights(energy / prior.temperature)


def labeling_index(labels, q):
    """Position of a labeling in :func:`all_labelings` order."""
    labels = np.asarray(labels, dtype=np.int64)
    weights = q ** np.arange(labels.shape[-1] - 1, -1, -1, dtype=np.int64)
    return labels @ weights
