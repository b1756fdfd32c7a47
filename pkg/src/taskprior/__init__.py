"""Evaluate representations against a Gibbs prior over downstream tasks."""

from .errors import TaskPriorError
from .evaluation import ComparisonReport, compare_features, compare_models
from .io import DatasetManifest, FeatureMatrix, load_features, load_manifest, load_report, save_report
from .kernel import (
    KernelMatrix,
    centered_cosine_kernel,
    combine_priors,
    factorize,
    linear_kernel,
    precomputed_kernel,
    ssl_prior_graph,
)
from .prior import (
    TaskPrior,
    TaskStats,
    edge_probability,
    enumerate_measure,
    expected_trace,
    pair_probability,
    restricted_measure,
    task_stats,
    trace_variance,
)
from .probe import ProbeReport, closed_form_probe_loss, evaluate_over_tasks, fit_probe, probe_accuracy
from .sampler import Labeling, bernoulli_graph_sample, mcmc_sample, prefix_sample

__version__ = "0.1.0"

__all__ = [
    "ComparisonReport", "DatasetManifest", "FeatureMatrix", "KernelMatrix", "Labeling",
    "ProbeReport", "TaskPrior", "TaskPriorError", "TaskStats", "analyze",
    "bernoulli_graph_sample", "centered_cosine_kernel", "closed_form_probe_loss",
    "combine_priors", "compare_features", "compare_models", "edge_probability",
    "enumerate_measure", "evaluate_over_tasks", "expected_trace", "factorize", "fit_probe",
    "linear_kernel", "load_features", "load_manifest", "load_report", "mcmc_sample",
    "pair_probability", "precomputed_kernel", "prefix_sample", "probe_accuracy",
    "restricted_measure", "save_report", "ssl_prior_graph", "task_stats", "trace_variance",
]


def analyze(prior_features, model_features, temperature=0.01, include_diagonal=True):
    """Closed-form task statistics of one model against a feature-defined prior."""
    prior = TaskPrior(centered_cosine_kernel(prior_features), temperature)
    return task_stats(prior, centered_cosine_kernel(model_features), include_diagonal)
