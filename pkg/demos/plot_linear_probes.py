"""
Linear probes and their closed-form loss
========================================

The least-squares probe loss has a closed form in terms of the left
singular vectors of the centered features. Here we check it against an
explicit fit and then measure held-out probe accuracy over sampled tasks.
"""

# %%
import numpy as np

from taskprior import TaskPrior, centered_cosine_kernel
from taskprior.probe import closed_form_probe_loss, evaluate_over_tasks, fit_probe
from taskprior.synthetic import noise_ladder

rng = np.random.default_rng(0)
x = rng.standard_normal((120, 10))
y = np.eye(3)[rng.integers(0, 3, 120)]
print(closed_form_probe_loss(x, y), fit_probe(x, y).train_loss)

# %%
# Duplicated columns make the features rank deficient; the closed form
# truncates small singular values and still agrees with the fitted probe.
x_dup = np.hstack([x, x[:, :4]])
sol = fit_probe(x_dup, y)
print(sol.rank_used, closed_form_probe_loss(x_dup, y), sol.train_loss)

# %%
# Probe accuracy on tasks drawn from a reference prior.
_, models = noise_ladder(seed=3)
prior = TaskPrior(centered_cosine_kernel(models["reference"]), 0.01)
for model_id in ["noise_0", "noise_4"]:
    rep = evaluate_over_tasks(models[model_id], prior, q=2, n_tasks=20, seed=0)
    print(model_id, round(rep.mean_accuracy, 3), round(rep.accuracy_variance, 5), rep.skipped_tasks)
