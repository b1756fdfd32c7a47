"""
Sampling tasks at different temperatures
========================================

The prefix sampler draws one labeling in a single pass over the samples.
At low temperature labels follow the clusters of the prior kernel; at high
temperature they approach uniform noise.
"""

# %%
import numpy as np

from taskprior import TaskPrior, centered_cosine_kernel, prefix_sample
from taskprior.synthetic import clustered_features, latent_classes

truth = latent_classes(300, 3, seed=1)
feats = clustered_features(truth, dim=16, seed=1)
kernel = centered_cosine_kernel(feats).with_factor()


def agreement(a, b):
    """Fraction of sample pairs on which two labelings agree about same/different."""
    same_a = a[:, None] == a[None, :]
    same_b = b[:, None] == b[None, :]
    return (same_a == same_b).mean()


# %%
# Sweep the temperature and compare sampled tasks with the latent classes.
for t in [0.001, 0.01, 0.1, 1.0, 100.0]:
    lab = prefix_sample(TaskPrior(kernel, t), q=3, seed=0)
    counts = np.bincount(lab.labels, minlength=3)
    print(f"T={t:<7} pair agreement={agreement(lab.labels, truth):.3f} counts={counts.tolist()}")

# %%
# The visiting order matters for the sequential approximation. A seeded
# shuffle removes the dependence on how rows happen to be stored.
a = prefix_sample(TaskPrior(kernel, 0.01), q=3, seed=4, shuffle=True)
b = prefix_sample(TaskPrior(kernel, 0.01), q=3, seed=4, shuffle=True)
print("reproducible:", np.array_equal(a.labels, b.labels))
