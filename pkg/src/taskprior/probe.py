"""Least-squares linear probes on frozen features.

Samples are rows throughout: features F are N x D and targets Y are N x C
one-hot. With Fc = H F = U S V^T (H the centering matrix) the minimum over
(W, b) of (1/N) ||F W^T + 1 b^T - Y||_F^2 is

    (1/N) ||H Y||_F^2 - (1/N) ||U^T Y||_F^2,

so the probe loss only sees the sample-space kernel U U^T and the label
graph Y Y^T.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import ClassVar

import numpy as np

from .errors import DegenerateTask, ShapeMismatch
from .io import FeatureMatrix
from .sampler import Labeling, prefix_sample

SVD_RTOL = 1e-10
DEFAULT_SPLIT = 0.8


@dataclass(frozen=True, eq=False)
class ProbeSolution:
    W: np.ndarray  # C x D
    b: np.ndarray  # C
    train_loss: float
    rank_used: int

    def predict(self, features):
        return _features(features) @ self.W.T + self.b


@dataclass(frozen=True)
class ProbeReport:
    """Probe accuracies over a batch of sampled tasks."""

    kind: ClassVar[str] = "probe_report"

    per_task_accuracy: tuple
    mean_accuracy: float
    accuracy_variance: float
    n_tasks: int
    q: int
    temperature: float
    prior_model_id: str = ""
    model_id: str = ""
    split: float = DEFAULT_SPLIT
    seed: int = 0
    skipped_tasks: tuple = ()

    @classmethod
    def from_accuracies(cls, accuracies, skipped=(), **params):
        acc = tuple(float(a) for a in accuracies)
        arr = np.asarray(acc)
        mean = float(arr.mean()) if acc else float("nan")
        var = float(arr.var()) if acc else float("nan")
        return cls(acc, mean, var, skipped_tasks=tuple(int(s) for s in skipped), **params)

    def params(self):
        return {
            "n_tasks": self.n_tasks,
            "q": self.q,
            "temperature": self.temperature,
            "prior_model_id": self.prior_model_id,
            "model_id": self.model_id,
            "split": self.split,
            "seed": self.seed,
            "kernel": "centered_cosine",
        }

    def payload(self):
        return {
            "per_task_accuracy": list(self.per_task_accuracy),
            "mean_accuracy": _json_float(self.mean_accuracy),
            "accuracy_variance": _json_float(self.accuracy_variance),
            "skipped_tasks": list(self.skipped_tasks),
        }

    @classmethod
    def from_document(cls, params, payload):
        def f(v):
            return float("nan") if v is None else float(v)

        return cls(
            per_task_accuracy=tuple(float(a) for a in payload["per_task_accuracy"]),
            mean_accuracy=f(payload["mean_accuracy"]),
            accuracy_variance=f(payload["accuracy_variance"]),
            n_tasks=int(params["n_tasks"]),
            q=int(params["q"]),
            temperature=float(params["temperature"]),
            prior_model_id=params.get("prior_model_id", ""),
            model_id=params.get("model_id", ""),
            split=float(params["split"]),
            seed=int(params["seed"]),
            skipped_tasks=tuple(int(s) for s in payload.get("skipped_tasks", ())),
        )

    def __eq__(self, other):
        if not isinstance(other, ProbeReport):
            return NotImplemented

        def same(a, b):
            return a == b or (np.isnan(a) and np.isnan(b))

        return (
            self.per_task_accuracy == other.per_task_accuracy
            and same(self.mean_accuracy, other.mean_accuracy)
            and same(self.accuracy_variance, other.accuracy_variance)
            and self.params() == other.params()
            and self.skipped_tasks == other.skipped_tasks
        )


def _json_float(x):
    return None if np.isnan(x) else x


def _features(f):
    if isinstance(f, FeatureMatrix):
        return f.data
    return np.asarray(f, dtype=np.float64)


def _targets(y, n):
    if isinstance(y, Labeling):
        y = y.one_hot()
    y = np.asarray(y, dtype=np.float64)
    if y.ndim == 1:
        y = y[:, None]
    if y.shape[0] != n:
        raise ShapeMismatch(f"targets have {y.shape[0]} rows, features have {n}")
    return y


def _centered_svd(x):
    xc = x - x.mean(axis=0, keepdims=True)
    u, s, vt = np.linalg.svd(xc, full_matrices=False)
    if s.size == 0 or s[0] == 0:
        return u[:, :0], s[:0], vt[:0]
    keep = s > SVD_RTOL * s[0]
    return u[:, keep], s[keep], vt[keep]


def closed_form_probe_loss(features, y):
    """Minimum of the probe MSE without solving for (W, b).

    ``y`` is an N x C target matrix (or a :class:`Labeling`).
    """
    x = _features(features)
    n = x.shape[0]
    y = _targets(y, n)
    u, _, _ = _centered_svd(x)
    yc = y - y.mean(axis=0, keepdims=True)
    proj = u.T @ y
    loss = (np.sum(yc * yc) - np.sum(proj * proj)) / n
    # rounding can push an exact fit a hair below zero
    return max(float(loss), 0.0)


def probe_mse(features, y, W, b):
    """(1/N) ||F W^T + 1 b^T - Y||_F^2."""
    x = _features(features)
    y = _targets(y, x.shape[0])
    r = x @ np.asarray(W).T + np.asarray(b) - y
    return float(np.sum(r * r) / x.shape[0])


def fit_probe(features, y):
    """Explicit optimal probe.

    W solves the centered normal equations through the truncated SVD
    (a pseudo-inverse when the features are rank deficient); b makes the
    residuals zero-mean.
    """
    x = _features(features)
    n = x.shape[0]
    y = _targets(y, n)
    u, s, vt = _centered_svd(x)
    yc = y - y.mean(axis=0, keepdims=True)
    # W^T = V S^-1 U^T Y_c
    wt = vt.T @ ((u.T @ yc) / s[:, None])
    W = wt.T
    b = y.mean(axis=0) - W @ x.mean(axis=0)
    loss = probe_mse(x, y, W, b)
    return ProbeSolution(W, b, max(loss, 0.0), int(s.size))


def stratified_split(labels, split, seed):
    """Seeded per-class split; returns (train_idx, test_idx), both sorted.

    Each class contributes round(split * n_c) samples to the training set.
    One global shuffle decides the order within every class, so the split
    does not depend on how classes are numbered.
    """
    if not 0 < split < 1:
        raise ValueError(f"split must be in (0, 1), got {split}")
    labels = np.asarray(labels)
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 0x511]))
    order = rng.permutation(labels.size)
    shuffled = labels[order]
    train_mask = np.zeros(labels.size, dtype=bool)
    for c in np.unique(labels):
        members = order[shuffled == c]
        k = int(np.floor(split * members.size + 0.5))
        train_mask[members[:k]] = True
    return np.flatnonzero(train_mask), np.flatnonzero(~train_mask)


def probe_accuracy(features, labeling, split=DEFAULT_SPLIT, seed=0):
    """Held-out accuracy of a least-squares probe on one task.

    Raises
    ------
    DegenerateTask
        When a class present in the labeling gets no training samples, or
        the test split is empty.
    """
    x = _features(features)
    if isinstance(labeling, Labeling):
        labels, q = labeling.labels, labeling.q
    else:
        labels = np.asarray(labeling, dtype=np.int64)
        q = int(labels.max()) + 1
    if labels.size != x.shape[0]:
        raise ShapeMismatch(f"labeling has {labels.size} entries, features have {x.shape[0]} rows")
    train, test = stratified_split(labels, split, seed)
    missing = np.setdiff1d(np.unique(labels), np.unique(labels[train]))
    if missing.size:
        raise DegenerateTask(f"class {missing[0]} has no training samples")
    if test.size == 0:
        raise DegenerateTask("empty test split")
    y = np.zeros((labels.size, q))
    y[np.arange(labels.size), labels] = 1.0
    sol = fit_probe(x[train], y[train])
    # argmax returns the first maximum, i.e. ties go to the lowest class id
    pred = np.argmax(sol.predict(x[test]), axis=1)
    return float(np.mean(pred == labels[test]))


def task_seeds(seed, n_tasks):
    """Independent (sampler_seed, split_seed) pairs for each task index."""
    out = []
    for t in range(n_tasks):
        a, b = np.random.SeedSequence(int(seed), spawn_key=(t,)).generate_state(2)
        out.append((int(a), int(b)))
    return out


def evaluate_over_tasks(features, prior, q=2, n_tasks=100, split=DEFAULT_SPLIT, seed=0):
    """Probe accuracy over ``n_tasks`` labelings drawn with the prefix sampler.

    Degenerate tasks are skipped and listed in ``skipped_tasks``; they do not
    enter the mean or variance.
    """
    if n_tasks < 1:
        raise ValueError(f"n_tasks must be >= 1, got {n_tasks}")
    x = _features(features)
    kernel = prior.kernel
    if kernel.factor is None:
        prior = type(prior)(kernel.with_factor(), prior.temperature)
    accs, skipped = [], []
    for t, (s_seed, split_seed) in enumerate(task_seeds(seed, n_tasks)):
        lab = prefix_sample(prior, q, seed=s_seed)
        try:
            accs.append(probe_accuracy(x, lab, split, split_seed))
        except DegenerateTask:
            skipped.append(t)
    return ProbeReport.from_accuracies(
        accs,
        skipped,
        n_tasks=n_tasks,
        q=q,
        temperature=prior.temperature,
        prior_model_id=kernel.model_id,
        model_id=features.model_id if isinstance(features, FeatureMatrix) else "",
        split=float(split),
        seed=int(seed),
    )
