"""
Comparing a model zoo from a manifest
=====================================

A manifest lists feature files by model id. ``compare_models`` scores
every entry against the prior model and correlates the closed-form mean
with sampled-task probe accuracy. The same run is available as
``taskprior compare``.
"""

# %%
import json
import tempfile
from pathlib import Path

from taskprior import io
from taskprior.evaluation import compare_models, comparison_csv
from taskprior.synthetic import noise_ladder

workdir = Path(tempfile.mkdtemp())
_, models = noise_ladder(n=200, seed=2)
entries = []
for model_id, fm in models.items():
    io.write_npy(workdir / f"{model_id}.npy", fm.data)
    entries.append({"model_id": model_id, "path": f"{model_id}.npy"})
(workdir / "manifest.json").write_text(json.dumps({"entries": entries}, indent=2))

# %%
report = compare_models(workdir / "manifest.json", "reference", n_tasks=20, seed=0)
print(comparison_csv(report))
c = report.mean_vs_accuracy
print(f"pearson r={c.r:.3f}  95% CI=({c.ci_low:.3f}, {c.ci_high:.3f})  over {c.n} models")

# %%
# Equivalent command line:
print(f"taskprior compare --manifest {workdir / 'manifest.json'} --prior-model reference "
      f"--n-tasks 20 -o compare.json --csv compare.csv")
