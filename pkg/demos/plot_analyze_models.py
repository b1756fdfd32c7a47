"""
Scoring representations without training anything
=================================================

Given features from a reference model (which defines the prior over tasks)
and features from a candidate model, ``analyze`` returns the mean and
variance of the trace similarity between the candidate's kernel and a
random task graph. Higher means go with easier tasks for the candidate.
"""

# %%
# Build a toy set of models: a clean reference plus noisy copies.
import taskprior as tp
from taskprior.synthetic import noise_ladder

labels, models = noise_ladder(n=256, seed=0)
print({k: v.data.shape for k, v in models.items()})

# %%
# Score each candidate against the reference prior at the default temperature.
for model_id in ["reference", "noise_0", "noise_2", "noise_4"]:
    stats = tp.analyze(models["reference"], models[model_id])
    print(f"{model_id:10s} mean={stats.mean:10.2f}  var={stats.variance:8.3f}  mean/N^2={stats.mean / stats.n**2:.4f}")

# %%
# The diagonal terms are constant across models with normalized rows,
# so dropping them shifts every mean by roughly the same amount.
full = tp.analyze(models["reference"], models["noise_1"])
off = tp.analyze(models["reference"], models["noise_1"], include_diagonal=False)
print(full.mean - off.mean)

# %%
# Reports serialize to a small JSON envelope.
print(tp.io.dumps_report(full)[:300])
