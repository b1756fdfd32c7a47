"""Command-line interface: ``taskprior {analyze,sample,probe-eval,compare}``."""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from . import io
from .errors import ShapeMismatch, TaskPriorError
from .evaluation import compare_models, comparison_csv
from .kernel import centered_cosine_kernel
from .prior import DEFAULT_TEMPERATURE, TaskPrior, task_stats
from .probe import DEFAULT_SPLIT, evaluate_over_tasks
from .sampler import prefix_sample

DEFAULT_Q = 2
DEFAULT_N_TASKS = 100
DEFAULT_SEED = 0


@dataclass(frozen=True)
class RunConfig:
    command: str
    output: Path
    prior: Optional[Path] = None
    model: Optional[Path] = None
    manifest: Optional[Path] = None
    prior_model: Optional[str] = None
    temperature: float = DEFAULT_TEMPERATURE
    q: int = DEFAULT_Q
    n_tasks: int = DEFAULT_N_TASKS
    seed: int = DEFAULT_SEED
    split: float = DEFAULT_SPLIT
    include_diagonal: bool = True
    shuffle: bool = False
    threads: int = 0
    csv: Optional[Path] = None

    def validate(self):
        if not self.temperature > 0:
            raise ValueError(f"temperature must be > 0, got {self.temperature}")
        if not 0 < self.split < 1:
            raise ValueError(f"split must be in (0, 1), got {self.split}")
        if self.q < 1:
            raise ValueError(f"number of classes must be >= 1, got {self.q}")
        if self.n_tasks < 1:
            raise ValueError(f"n-tasks must be >= 1, got {self.n_tasks}")
        if self.seed < 0:
            raise ValueError("seed must be non-negative")


def _load_pair(prior_path, model_path):
    prior = io.load_features(prior_path)
    model = io.load_features(model_path)
    if prior.n != model.n:
        raise ShapeMismatch(
            f"{prior_path} has shape {prior.data.shape} but {model_path} has shape {model.data.shape}"
        )
    return prior, model


def cmd_analyze(cfg):
    prior_f, model_f = _load_pair(cfg.prior, cfg.model)
    prior = TaskPrior(centered_cosine_kernel(prior_f), cfg.temperature)
    stats = task_stats(prior, centered_cosine_kernel(model_f), cfg.include_diagonal)
    io.save_report(stats, cfg.output)
    print(f"mean\t{stats.mean!r}")
    print(f"variance\t{stats.variance!r}")
    return 0


def cmd_sample(cfg):
    prior_f = io.load_features(cfg.prior)
    prior = TaskPrior(centered_cosine_kernel(prior_f).with_factor(), cfg.temperature)
    labeling = prefix_sample(prior, cfg.q, seed=cfg.seed, shuffle=cfg.shuffle)
    io.save_report(labeling, cfg.output)
    counts = [int((labeling.labels == c).sum()) for c in range(cfg.q)]
    print(f"sampled {len(labeling)} labels, class counts {counts}")
    return 0


def cmd_probe_eval(cfg):
    prior_f, model_f = _load_pair(cfg.prior, cfg.model)
    prior = TaskPrior(centered_cosine_kernel(prior_f), cfg.temperature)
    report = evaluate_over_tasks(model_f, prior, cfg.q, cfg.n_tasks, cfg.split, cfg.seed)
    io.save_report(report, cfg.output)
    print(f"{'model':<24}{'mean_acc':>12}{'var_acc':>12}{'tasks':>8}{'skipped':>9}")
    print(
        f"{report.model_id:<24}{report.mean_accuracy:>12.4f}{report.accuracy_variance:>12.6f}"
        f"{len(report.per_task_accuracy):>8}{len(report.skipped_tasks):>9}"
    )
    return 0


def cmd_compare(cfg):
    report = compare_models(
        cfg.manifest, cfg.prior_model, cfg.temperature, cfg.q, cfg.n_tasks, cfg.split, cfg.seed
    )
    io.save_report(report, cfg.output)
    if cfg.csv is not None:
        io._atomic_write(cfg.csv, comparison_csv(report).encode("utf-8"))
    print(f"{'model':<24}{'E[Tr(MG)]':>14}{'Var[Tr(MG)]':>14}{'mean_acc':>10}{'var_acc':>12}")
    for r in report.rows:
        tag = " *" if r.is_prior else ""
        print(
            f"{r.model_id + tag:<24}{r.stats.mean:>14.4f}{r.stats.variance:>14.4f}"
            f"{r.probe.mean_accuracy:>10.4f}{r.probe.accuracy_variance:>12.6f}"
        )
    c = report.mean_vs_accuracy
    print("pearson(mean, accuracy): " + (f"{c.r:.3f}" if c.r is not None else f"n/a ({c.reason})"))
    return 0


COMMANDS = {
    "analyze": cmd_analyze,
    "sample": cmd_sample,
    "probe-eval": cmd_probe_eval,
    "compare": cmd_compare,
}


def build_parser():
    fmt = argparse.ArgumentDefaultsHelpFormatter
    parser = argparse.ArgumentParser(
        prog="taskprior",
        description="Evaluate representations against a Gibbs prior over downstream tasks.",
        formatter_class=fmt,
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, classes=False, tasks=False):
        p.add_argument("-T", "--temperature", type=float, default=DEFAULT_TEMPERATURE, help="prior temperature")
        p.add_argument("-o", "--output", type=Path, required=True, help="output JSON path")
        p.add_argument("--seed", type=int, default=DEFAULT_SEED, help="RNG seed")
        p.add_argument(
            "--threads",
            type=int,
            default=None,
            help="BLAS threads, 0 = auto (falls back to $TASKPRIOR_THREADS, then 0)",
        )
        if classes:
            p.add_argument("-q", "--classes", type=int, default=DEFAULT_Q, help="number of classes per task")
        if tasks:
            p.add_argument("--n-tasks", type=int, default=DEFAULT_N_TASKS, help="number of sampled tasks")
            p.add_argument("--split", type=float, default=DEFAULT_SPLIT, help="train fraction (stratified)")

    p = sub.add_parser("analyze", help="closed-form mean/variance of Tr(MG)", formatter_class=fmt)
    p.add_argument("--prior", type=Path, required=True, help="features defining the prior kernel (.npy/.csv)")
    p.add_argument("--model", type=Path, required=True, help="features of the model to evaluate")
    p.add_argument(
        "--include-diagonal",
        action=argparse.BooleanOptionalAction,
        default=True,
        help="include i == j terms in the sums",
    )
    common(p)

    p = sub.add_parser("sample", help="sample a labeling with the prefix sampler", formatter_class=fmt)
    p.add_argument("--prior", type=Path, required=True, help="features defining the prior kernel")
    p.add_argument("--shuffle", action="store_true", default=False, help="visit points in a seeded random order")
    common(p, classes=True)

    p = sub.add_parser("probe-eval", help="linear probe accuracy over sampled tasks", formatter_class=fmt)
    p.add_argument("--prior", type=Path, required=True, help="features defining the prior kernel")
    p.add_argument("--model", type=Path, required=True, help="features of the model to probe")
    common(p, classes=True, tasks=True)

    p = sub.add_parser("compare", help="compare every model in a manifest", formatter_class=fmt)
    p.add_argument("--manifest", type=Path, required=True, help="JSON manifest of feature files")
    p.add_argument("--prior-model", required=True, help="model_id whose features define the prior")
    p.add_argument("--csv", type=Path, default=None, help="also write a per-model CSV table")
    common(p, classes=True, tasks=True)
    return parser


def _config(args):
    threads = args.threads
    if threads is None:
        threads = int(os.environ.get("TASKPRIOR_THREADS", "0") or 0)
    return RunConfig(
        command=args.command,
        output=args.output,
        prior=getattr(args, "prior", None),
        model=getattr(args, "model", None),
        manifest=getattr(args, "manifest", None),
        prior_model=getattr(args, "prior_model", None),
        temperature=args.temperature,
        q=getattr(args, "classes", DEFAULT_Q),
        n_tasks=getattr(args, "n_tasks", DEFAULT_N_TASKS),
        seed=args.seed,
        split=getattr(args, "split", DEFAULT_SPLIT),
        include_diagonal=getattr(args, "include_diagonal", True),
        shuffle=getattr(args, "shuffle", False),
        threads=threads,
        csv=getattr(args, "csv", None),
    )


def run(cfg):
    cfg.validate()
    fn = COMMANDS[cfg.command]
    if cfg.threads > 0:
        from threadpoolctl import threadpool_limits

        with threadpool_limits(limits=cfg.threads):
            return fn(cfg)
    return fn(cfg)


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = _config(args)
        return run(cfg)
    except (TaskPriorError, ValueError, OSError, KeyError) as exc:
        print(f"taskprior {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
