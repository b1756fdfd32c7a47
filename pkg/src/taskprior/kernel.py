"""Kernel matrices built from features, plus the SSL block prior."""

from __future__ import annotations

from dataclasses import dataclass
from typing import ClassVar, Optional

import numpy as np

from .errors import NonFinite, NotSquare, ShapeMismatch, ZeroRow
from .io import FeatureMatrix

KINDS = ("centered_cosine", "linear", "precomputed")

ZERO_ROW_TOL = 1e-12
EIG_CLIP_RTOL = 1e-10


@dataclass(frozen=True, eq=False)
class KernelMatrix:
    """Symmetric N x N kernel, optionally with a factor ``Z`` so that K = Z Z^T."""

    data: np.ndarray
    centered: bool = False
    factor: Optional[np.ndarray] = None
    kind: str = "precomputed"
    model_id: str = ""
    # set when a non-symmetric input was silently symmetrized
    symmetrized: bool = False

    def __post_init__(self):
        data = np.ascontiguousarray(self.data, dtype=np.float64)
        if data.ndim != 2 or data.shape[0] != data.shape[1]:
            raise NotSquare(f"kernel must be square, got shape {data.shape}")
        if self.kind not in KINDS:
            raise ValueError(f"unknown kernel kind {self.kind!r}")
        data.setflags(write=False)
        object.__setattr__(self, "data", data)
        if self.factor is not None:
            z = np.ascontiguousarray(self.factor, dtype=np.float64)
            if z.ndim != 2 or z.shape[0] != data.shape[0]:
                raise ShapeMismatch(f"factor shape {z.shape} does not match N={data.shape[0]}")
            z.setflags(write=False)
            object.__setattr__(self, "factor", z)

    @property
    def n(self):
        return self.data.shape[0]

    @property
    def rank(self):
        return None if self.factor is None else self.factor.shape[1]

    def with_factor(self):
        """Return this kernel with a factor attached (computing one if needed)."""
        if self.factor is not None:
            return self
        return KernelMatrix(
            self.data, self.centered, factorize(self), self.kind, self.model_id, self.symmetrized
        )


@dataclass(frozen=True)
class KernelMeta:
    """JSON sidecar describing a persisted kernel."""

    kind: ClassVar[str] = "kernel_meta"

    kernel_kind: str
    centered: bool
    model_id: str
    n: int
    symmetrized: bool = False

    @classmethod
    def from_kernel(cls, k):
        return cls(k.kind, bool(k.centered), k.model_id, k.n, bool(k.symmetrized))

    def params(self):
        return {"kernel": self.kernel_kind, "model_id": self.model_id}

    def payload(self):
        return {
            "kernel_kind": self.kernel_kind,
            "centered": self.centered,
            "model_id": self.model_id,
            "n": self.n,
            "symmetrized": self.symmetrized,
        }

    @classmethod
    def from_document(cls, params, payload):
        return cls(
            payload["kernel_kind"],
            bool(payload["centered"]),
            payload["model_id"],
            int(payload["n"]),
            bool(payload.get("symmetrized", False)),
        )


def double_center(k):
    """H K H with H = I - 11^T/N, without forming H."""
    k = np.asarray(k, dtype=np.float64)
    row = k.mean(axis=1, keepdims=True)
    col = k.mean(axis=0, keepdims=True)
    return k - row - col + k.mean()


def _as_array(features):
    if isinstance(features, FeatureMatrix):
        return features.data, features.model_id
    return np.asarray(features, dtype=np.float64), ""


def centered_cosine_kernel(features):
    """Centered cosine similarity kernel.

    Features are mean-subtracted across samples, each row is scaled to unit
    norm, the Gram matrix is formed and then double-centered. The returned
    kernel carries the exact factor ``H F`` where ``F`` are the unit rows.

    Raises
    ------
    ZeroRow
        If a sample coincides with the feature mean.
    """
    x, model_id = _as_array(features)
    x = x - x.mean(axis=0, keepdims=True)
    norms = np.linalg.norm(x, axis=1)
    bad = np.flatnonzero(norms < ZERO_ROW_TOL)
    if bad.size:
        raise ZeroRow(f"sample {bad[0]} has zero norm after mean subtraction")
    f = x / norms[:, None]
    z = f - f.mean(axis=0, keepdims=True)
    k = z @ z.T
    # exact symmetry
    k = 0.5 * (k + k.T)
    return KernelMatrix(k, centered=True, factor=z, kind="centered_cosine", model_id=model_id)


def linear_kernel(features, center=True):
    """Plain Gram matrix X X^T of mean-subtracted features (if ``center``)."""
    x, model_id = _as_array(features)
    if center:
        x = x - x.mean(axis=0, keepdims=True)
    k = x @ x.T
    k = 0.5 * (k + k.T)
    return KernelMatrix(k, centered=center, factor=x.copy(), kind="linear", model_id=model_id)


def precomputed_kernel(data, center=False, model_id=""):
    """Wrap a user-supplied matrix as a kernel.

    The matrix is symmetrized as (K + K^T)/2; ``symmetrized`` records
    whether that changed anything. No factor is attached (see
    :meth:`KernelMatrix.with_factor`).
    """
    k = np.asarray(data, dtype=np.float64)
    if k.ndim != 2 or k.shape[0] != k.shape[1]:
        raise NotSquare(f"kernel must be square, got shape {k.shape}")
    bad = ~np.isfinite(k)
    if bad.any():
        r, c = np.argwhere(bad)[0]
        raise NonFinite(r, c)
    sym = 0.5 * (k + k.T)
    changed = not np.array_equal(sym, k)
    if center:
        sym = double_center(sym)
        sym = 0.5 * (sym + sym.T)
    return KernelMatrix(sym, centered=center, kind="precomputed", model_id=model_id, symmetrized=changed)


def factorize(k):
    """Low-rank factor Z with Z Z^T equal to the PSD part of K.

    Negative eigenvalues are clipped to zero and eigenvalues below
    ``1e-10 * lambda_max`` are dropped, so the returned rank may be less than N.
    """
    data = k.data if isinstance(k, KernelMatrix) else np.asarray(k, dtype=np.float64)
    sym = 0.5 * (data + data.T)
    w, v = np.linalg.eigh(sym)
    top = w.max() if w.size else 0.0
    if top <= 0:
        return np.zeros((sym.shape[0], 0))
    keep = w > EIG_CLIP_RTOL * top
    # largest first
    idx = np.flatnonzero(keep)[::-1]
    return v[:, idx] * np.sqrt(w[idx])


def combine_priors(k1, k2):
    """Kernel of the product measure: mu_{K1} * mu_{K2} is proportional to mu_{K1+K2}."""
    if k1.n != k2.n:
        raise ShapeMismatch(f"cannot combine kernels with N={k1.n} and N={k2.n}")
    factor = None
    if k1.factor is not None and k2.factor is not None:
        factor = np.hstack([k1.factor, k2.factor])
    model_id = "+".join(m for m in (k1.model_id, k2.model_id) if m)
    return KernelMatrix(
        k1.data + k2.data,
        centered=k1.centered and k2.centered,
        factor=factor,
        kind="precomputed",
        model_id=model_id,
        symmetrized=k1.symmetrized or k2.symmetrized,
    )


def ssl_labels(n_samples, n_views):
    """Class id of every view when each source sample is its own class."""
    return np.repeat(np.arange(n_samples), n_views)


def ssl_prior_graph(n_samples, n_views):
    """Block-diagonal graph linking the V augmented views of each sample.

    Views are ordered by sample first, augmentation second, so entry (i, j)
    is 1 iff ``i // n_views == j // n_views``.
    """
    if n_samples < 1 or n_views < 1:
        raise ValueError("n_samples and n_views must be >= 1")
    g = np.kron(np.eye(n_samples), np.ones((n_views, n_views)))
    # the one-hot factor is exact and free
    y = np.zeros((n_samples * n_views, n_samples))
    y[np.arange(n_samples * n_views), ssl_labels(n_samples, n_views)] = 1.0
    return KernelMatrix(g, centered=False, factor=y, kind="precomputed", model_id="ssl")
