"""Comparing a set of models against one task prior."""

from __future__ import annotations

import csv
import io as _io
import math
from dataclasses import dataclass
from typing import ClassVar, Optional

import numpy as np

from . import io
from .errors import MissingModel
from .kernel import centered_cosine_kernel
from .prior import DEFAULT_TEMPERATURE, TaskPrior, TaskStats, task_stats
from .probe import DEFAULT_SPLIT, ProbeReport, evaluate_over_tasks

Z_975 = 1.959963984540054


@dataclass(frozen=True)
class Correlation:
    """Pearson r across models, with a Fisher-z 95% interval."""

    r: Optional[float]
    ci_low: Optional[float]
    ci_high: Optional[float]
    n: int
    reason: str = ""

    def to_dict(self):
        return {"r": self.r, "ci_low": self.ci_low, "ci_high": self.ci_high, "n": self.n, "reason": self.reason}

    @classmethod
    def from_dict(cls, d):
        return cls(d["r"], d["ci_low"], d["ci_high"], int(d["n"]), d.get("reason", ""))


def pearson_fisher(x, y):
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n = int(x.size)
    if n < 2:
        return Correlation(None, None, None, n, "fewer than two models besides the prior")
    ok = np.isfinite(x) & np.isfinite(y)
    if not ok.all():
        return Correlation(None, None, None, n, "non-finite values")
    if np.ptp(x) == 0 or np.ptp(y) == 0:
        return Correlation(None, None, None, n, "zero variance")
    r = float(np.clip(np.corrcoef(x, y)[0, 1], -1.0, 1.0))
    if n <= 3:
        return Correlation(r, None, None, n, "confidence interval needs at least four models")
    if abs(r) == 1.0:
        return Correlation(r, r, r, n)
    z = math.atanh(r)
    half = Z_975 / math.sqrt(n - 3)
    return Correlation(r, math.tanh(z - half), math.tanh(z + half), n)


@dataclass(frozen=True)
class ModelRow:
    model_id: str
    stats: TaskStats
    stats_offdiag: TaskStats
    probe: ProbeReport
    is_prior: bool = False


@dataclass(frozen=True)
class ComparisonReport:
    kind: ClassVar[str] = "comparison_report"

    rows: tuple
    mean_vs_accuracy: Correlation
    variance_vs_accuracy_variance: Correlation
    mean_vs_accuracy_offdiag: Correlation
    variance_vs_accuracy_variance_offdiag: Correlation
    prior_model_id: str
    temperature: float
    q: int
    n_tasks: int
    split: float
    seed: int

    def params(self):
        return {
            "prior_model_id": self.prior_model_id,
            "temperature": self.temperature,
            "q": self.q,
            "n_tasks": self.n_tasks,
            "split": self.split,
            "seed": self.seed,
            "kernel": "centered_cosine",
        }

    def payload(self):
        return {
            "rows": [
                {
                    "model_id": r.model_id,
                    "is_prior": r.is_prior,
                    "task_stats": io.report_document(r.stats),
                    "task_stats_offdiag": io.report_document(r.stats_offdiag),
                    "probe_report": io.report_document(r.probe),
                }
                for r in self.rows
            ],
            "correlations": {
                "mean_vs_accuracy": self.mean_vs_accuracy.to_dict(),
                "variance_vs_accuracy_variance": self.variance_vs_accuracy_variance.to_dict(),
                "mean_vs_accuracy_offdiag": self.mean_vs_accuracy_offdiag.to_dict(),
                "variance_vs_accuracy_variance_offdiag": self.variance_vs_accuracy_variance_offdiag.to_dict(),
            },
        }

    @classmethod
    def from_document(cls, params, payload):
        rows = tuple(
            ModelRow(
                r["model_id"],
                io.report_from_document(r["task_stats"]),
                io.report_from_document(r["task_stats_offdiag"]),
                io.report_from_document(r["probe_report"]),
                bool(r["is_prior"]),
            )
            for r in payload["rows"]
        )
        c = payload["correlations"]
        return cls(
            rows,
            Correlation.from_dict(c["mean_vs_accuracy"]),
            Correlation.from_dict(c["variance_vs_accuracy_variance"]),
            Correlation.from_dict(c["mean_vs_accuracy_offdiag"]),
            Correlation.from_dict(c["variance_vs_accuracy_variance_offdiag"]),
            params["prior_model_id"],
            float(params["temperature"]),
            int(params["q"]),
            int(params["n_tasks"]),
            float(params["split"]),
            int(params["seed"]),
        )

    def row(self, model_id):
        for r in self.rows:
            if r.model_id == model_id:
                return r
        raise MissingModel(model_id)


def _correlations(rows, offdiag):
    others = [r for r in rows if not r.is_prior]
    stats = [r.stats_offdiag if offdiag else r.stats for r in others]
    means = [s.mean for s in stats]
    variances = [s.variance for s in stats]
    acc = [r.probe.mean_accuracy for r in others]
    acc_var = [r.probe.accuracy_variance for r in others]
    return pearson_fisher(means, acc), pearson_fisher(variances, acc_var)


def compare_features(
    features,
    prior_model_id,
    temperature=DEFAULT_TEMPERATURE,
    q=2,
    n_tasks=100,
    split=DEFAULT_SPLIT,
    seed=0,
):
    """Like :func:`compare_models` but over an already loaded ``{model_id: FeatureMatrix}``."""
    if prior_model_id not in features:
        raise MissingModel(f"prior model {prior_model_id!r} not in manifest ({sorted(features)})")
    prior = TaskPrior(centered_cosine_kernel(features[prior_model_id]), temperature)
    rows = []
    for model_id, fm in features.items():
        m = centered_cosine_kernel(fm)
        report = evaluate_over_tasks(fm, prior, q=q, n_tasks=n_tasks, split=split, seed=seed)
        rows.append(
            ModelRow(
                model_id,
                task_stats(prior, m, include_diagonal=True),
                task_stats(prior, m, include_diagonal=False),
                report,
                is_prior=model_id == prior_model_id,
            )
        )
    rows = tuple(rows)
    c_mean, c_var = _correlations(rows, offdiag=False)
    c_mean_od, c_var_od = _correlations(rows, offdiag=True)
    return ComparisonReport(
        rows,
        c_mean,
        c_var,
        c_mean_od,
        c_var_od,
        prior_model_id=prior_model_id,
        temperature=float(temperature),
        q=int(q),
        n_tasks=int(n_tasks),
        split=float(split),
        seed=int(seed),
    )


def compare_models(manifest, prior_model_id, temperature=DEFAULT_TEMPERATURE, q=2, n_tasks=100, split=DEFAULT_SPLIT, seed=0):
    """Closed-form stats and sampled-task probe accuracy for every model in ``manifest``.

    The prior kernel is the centered cosine kernel of ``prior_model_id``.
    Rows follow manifest order. The prior model's own row is kept but
    flagged and left out of the cross-model correlations.
    """
    if isinstance(manifest, (str, bytes)) or hasattr(manifest, "__fspath__"):
        manifest = io.load_manifest(manifest)
    if manifest.entry(prior_model_id) is None:
        raise MissingModel(f"prior model {prior_model_id!r} not in manifest {list(manifest.model_ids)}")
    return compare_features(manifest.load_all(), prior_model_id, temperature, q, n_tasks, split, seed)


def comparison_csv(report):
    """One row per model, for plotting tools."""
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(
        [
            "model_id", "is_prior", "mean", "variance", "mean_offdiag", "variance_offdiag",
            "probe_mean_accuracy", "probe_accuracy_variance", "n_tasks_used",
        ]
    )
    for r in report.rows:
        w.writerow(
            [
                r.model_id, int(r.is_prior), repr(r.stats.mean), repr(r.stats.variance),
                repr(r.stats_offdiag.mean), repr(r.stats_offdiag.variance),
                repr(r.probe.mean_accuracy), repr(r.probe.accuracy_variance), len(r.probe.per_task_accuracy),
            ]
        )
    return buf.getvalue()
