"""Drawing tasks from the task prior.

Three samplers live here:

* :func:`prefix_sample` - the O(N r q) sequential sampler. Point i picks
  class c with probability proportional to exp(sum_{j<i, y_j=c} K_ij / T),
  evaluated through class-wise prefix sums of a factor Z (K = Z Z^T).
* :func:`bernoulli_graph_sample` - independent Bernoulli edges, i.e. exact
  draws from the unrestricted prior over graphs.
* :func:`mcmc_sample` - single-site Metropolis-Hastings on labelings,
  targeting the restricted (Potts) measure. Only meant for small problems.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import ClassVar

import numpy as np

from .errors import InvalidClassCount, MissingFactor
from .prior import all_labelings, restricted_measure, sigmoid


@dataclass(frozen=True, eq=False)
class Labeling:
    """Class ids for N samples plus the parameters that produced them."""

    kind: ClassVar[str] = "labeling"

    labels: np.ndarray
    q: int
    seed: int = 0
    temperature: float = float("nan")
    shuffle: bool = False
    sampler: str = "prefix"
    prior_model_id: str = ""

    def __post_init__(self):
        labels = np.asarray(self.labels, dtype=np.int64).copy()
        if labels.ndim != 1:
            raise ValueError("labels must be 1-D")
        if self.q < 1:
            raise InvalidClassCount(f"q must be >= 1, got {self.q}")
        if labels.size and (labels.min() < 0 or labels.max() >= self.q):
            raise ValueError(f"labels must lie in [0, {self.q})")
        labels.setflags(write=False)
        object.__setattr__(self, "labels", labels)

    def __len__(self):
        return self.labels.size

    def __eq__(self, other):
        if not isinstance(other, Labeling):
            return NotImplemented
        same_t = self.temperature == other.temperature or (
            np.isnan(self.temperature) and np.isnan(other.temperature)
        )
        return (
            np.array_equal(self.labels, other.labels)
            and self.q == other.q
            and self.seed == other.seed
            and same_t
            and self.shuffle == other.shuffle
            and self.sampler == other.sampler
            and self.prior_model_id == other.prior_model_id
        )

    def one_hot(self):
        y = np.zeros((self.labels.size, self.q))
        y[np.arange(self.labels.size), self.labels] = 1.0
        return y

    def graph(self):
        """G = Y Y^T."""
        return (self.labels[:, None] == self.labels[None, :]).astype(np.float64)

    def params(self):
        return {
            "q": self.q,
            "temperature": None if np.isnan(self.temperature) else self.temperature,
            "seed": self.seed,
            "shuffle": self.shuffle,
            "sampler": self.sampler,
            "prior_model_id": self.prior_model_id,
        }

    def payload(self):
        return [int(v) for v in self.labels]

    @classmethod
    def from_document(cls, params, payload):
        t = params.get("temperature")
        return cls(
            np.asarray(payload, dtype=np.int64),
            q=int(params["q"]),
            seed=int(params["seed"]),
            temperature=float("nan") if t is None else float(t),
            shuffle=bool(params.get("shuffle", False)),
            sampler=params.get("sampler", "prefix"),
            prior_model_id=params.get("prior_model_id", ""),
        )


@dataclass
class PrefixState:
    """Class-wise prefix sums: column c holds sum of Z_j over labeled j with y_j = c."""

    U: np.ndarray

    @classmethod
    def empty(cls, rank, q):
        return cls(np.zeros((rank, q)))


def uniform_stream(seed, n):
    """n uniforms in [0, 1); value i depends only on (seed, i).

    Philox is counter based, so position i of the stream is a fixed
    function of the key and the counter.
    """
    return np.random.Generator(np.random.Philox(key=int(seed))).random(n)


def _shuffle_permutation(seed, n):
    return np.random.default_rng(np.random.SeedSequence([int(seed), 0x5EED])).permutation(n)


def step_probabilities(z_i, U, temperature):
    """softmax((1/T) z_i U) computed with max subtraction."""
    h = (z_i @ U) / temperature
    h = h - h.max()
    p = np.exp(h)
    return p / p.sum()


def categorical(p, u):
    """Inverse-CDF draw; ``u`` in [0, 1)."""
    cdf = np.cumsum(p)
    c = int(np.searchsorted(cdf, u * cdf[-1], side="right"))
    return min(c, p.size - 1)


def _factor_of(prior):
    k = prior.kernel
    if k.factor is None:
        raise MissingFactor("prior kernel has no factor; call kernel.factorize or KernelMatrix.with_factor")
    return k.factor


def prefix_run(z, temperature, q, uniforms, state=None, trace=None):
    """Run the prefix sampler over the rows of ``z`` in order.

    ``state`` is updated in place when given, which lets callers resume from
    a fixed prefix. When ``trace`` is a list, the probability vector used at
    each step is appended to it.
    """
    n, r = z.shape
    if state is None:
        state = PrefixState.empty(r, q)
    U = state.U
    t = float(temperature)
    labels = np.empty(n, dtype=np.int64)
    for i in range(n):
        zi = z[i]
        h = (zi @ U) / t
        h -= h.max()
        p = np.exp(h)
        p /= p.sum()
        if trace is not None:
            trace.append(p)
        c = categorical(p, uniforms[i])
        labels[i] = c
        U[:, c] += zi
    return labels, state


def prefix_sample(prior, q, seed=0, shuffle=False, trace=None, state=None):
    """Sample a q-class labeling with the prefix sampler.

    Points are visited in row order unless ``shuffle`` is set, in which case
    a seeded permutation fixes the visiting order and the labels are mapped
    back to row order before returning. Deterministic in ``seed``.

    Parameters
    ----------
    prior : TaskPrior
        Its kernel must carry a factor.
    q : int
        Number of classes.
    trace : list, optional
        Receives the per-step class probabilities (in visiting order).
    state : PrefixState, optional
        Receives the final prefix sums.
    """
    if q < 1:
        raise InvalidClassCount(f"q must be >= 1, got {q}")
    z = _factor_of(prior)
    n = z.shape[0]
    order = _shuffle_permutation(seed, n) if shuffle else None
    zz = z[order] if shuffle else z
    if state is None:
        state = PrefixState.empty(z.shape[1], q)
    labels, _ = prefix_run(zz, prior.temperature, q, uniform_stream(seed, n), state, trace)
    if shuffle:
        out = np.empty_like(labels)
        out[order] = labels
        labels = out
    return Labeling(
        labels,
        q=q,
        seed=int(seed),
        temperature=prior.temperature,
        shuffle=bool(shuffle),
        sampler="prefix",
        prior_model_id=prior.kernel.model_id,
    )


def sequential_log_prob(k, labels, temperature, q):
    """Exact log-probability of ``labels`` under the sequential approximation.

    Uses the kernel directly (no factor, no prefix sums).
    """
    k = np.asarray(k, dtype=np.float64)
    labels = np.asarray(labels)
    total = 0.0
    for i in range(labels.size):
        scores = np.array([k[i, :i][labels[:i] == c].sum() for c in range(q)]) / temperature
        m = scores.max()
        total += scores[labels[i]] - m - np.log(np.exp(scores - m).sum())
    return total


def sequential_distribution(prior, q):
    """Probability of every labeling (lexicographic order) under the sequential model."""
    labs = all_labelings(prior.n, q)
    logp = np.array([sequential_log_prob(prior.kernel.data, lab, prior.temperature, q) for lab in labs])
    return labs, np.exp(logp)


def approximation_gap(prior, q):
    """Total-variation distance between the sequential model and the Potts measure."""
    _, seq = sequential_distribution(prior, q)
    _, exact = restricted_measure(prior, q)
    return 0.5 * float(np.abs(seq - exact).sum())


def bernoulli_graph_sample(prior, seed=0, size=None):
    """Draw graphs with independent entries G_ij ~ Bernoulli(sigmoid(K_ij / T)).

    Returns an N x N uint8 matrix, or ``size`` stacked graphs.
    """
    p = sigmoid(prior.kernel.data / prior.temperature)
    shape = p.shape if size is None else (int(size),) + p.shape
    u = np.random.Generator(np.random.Philox(key=int(seed))).random(shape)
    return (u < p).astype(np.uint8)


class PottsChain:
    """Single-site Metropolis-Hastings state for the Potts target exp(Tr(Y Y^T K) / T).

    Keeps S[s][c] = sum_{j != s, y_j = c} K_sj so that the energy change of
    relabeling one site is an O(1) lookup and an accepted move costs O(N).
    """

    def __init__(self, k, temperature, q, labels):
        ksym = 0.5 * (np.asarray(k, dtype=np.float64) + np.asarray(k, dtype=np.float64).T)
        np.fill_diagonal(ksym, 0.0)
        labels = np.asarray(labels, dtype=np.int64)
        self.q = q
        self.t = float(temperature)
        S = np.zeros((labels.size, q))
        for c in range(q):
            S[:, c] = ksym[:, labels == c].sum(axis=1)
        self.y = labels.tolist()
        self._S = S.tolist()
        self._rows = ksym.tolist()

    def delta(self, s, c):
        """Change of Tr(Y Y^T K) if site s takes label c."""
        row = self._S[s]
        return 2.0 * (row[c] - row[self.y[s]])

    def propose(self, s, c, logu):
        """Accept or reject relabeling site s to c; ``logu`` is log of a U(0,1) draw."""
        a = self.y[s]
        if c == a:
            return True
        d = self.delta(s, c)
        if d >= 0 or logu < d / self.t:
            self.y[s] = c
            krow = self._rows[s]
            for j, Sj in enumerate(self._S):
                Sj[a] -= krow[j]
                Sj[c] += krow[j]
            return True
        return False


def mcmc_sample(prior, q, n_steps, seed=0, init=None, return_chain=False):
    """Single-site Metropolis-Hastings on labelings.

    Target is proportional to exp(Tr(Y Y^T K) / T). Each step picks a site
    uniformly, proposes a uniformly random label for it, and accepts with
    probability min(1, exp(delta / T)).

    Returns the final :class:`Labeling`; with ``return_chain`` also an
    ``(n_steps, N)`` array holding the state after every step.
    """
    if q < 2:
        raise InvalidClassCount(f"mcmc needs q >= 2, got {q}")
    if n_steps < 1:
        raise ValueError("n_steps must be >= 1")
    n = prior.n
    rng = np.random.Generator(np.random.Philox(key=int(seed)))
    y0 = rng.integers(0, q, size=n) if init is None else np.asarray(init, dtype=np.int64)
    chain_state = PottsChain(prior.kernel.data, prior.temperature, q, y0)
    sites = rng.integers(0, n, size=n_steps).tolist()
    props = rng.integers(0, q, size=n_steps).tolist()
    logu = np.log(rng.random(n_steps)).tolist()
    chain = np.empty((n_steps, n), dtype=np.int8 if q <= 127 else np.int64) if return_chain else None
    propose = chain_state.propose
    for step in range(n_steps):
        propose(sites[step], props[step], logu[step])
        if chain is not None:
            chain[step] = chain_state.y
    lab = Labeling(
        np.array(chain_state.y),
        q=q,
        seed=int(seed),
        temperature=prior.temperature,
        sampler="mcmc",
        prior_model_id=prior.kernel.model_id,
    )
    return (lab, chain) if return_chain else lab
