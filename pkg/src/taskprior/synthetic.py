"""Synthetic feature sets with a known quality ordering."""

from __future__ import annotations

import numpy as np

from .io import FeatureMatrix


def latent_classes(n, n_classes, seed=0):
    """Balanced class assignment, shuffled."""
    rng = np.random.default_rng(seed)
    return rng.permutation(np.arange(n) % n_classes)


def clustered_features(labels, dim=16, spread=0.3, seed=0, model_id="clustered"):
    """Gaussian blobs around random unit centroids, one per class."""
    rng = np.random.default_rng(seed)
    labels = np.asarray(labels)
    k = int(labels.max()) + 1
    centroids = rng.standard_normal((k, dim))
    centroids /= np.linalg.norm(centroids, axis=1, keepdims=True)
    x = centroids[labels] + spread * rng.standard_normal((labels.size, dim)) / np.sqrt(dim)
    return FeatureMatrix(x, model_id=model_id)


def noise_ladder(n=256, n_classes=4, dim=16, noise_levels=(1.0, 1.5, 2.0, 3.0, 4.0), seed=0):
    """A clean reference model plus copies degraded by increasing isotropic noise.

    Returns ``(labels, {model_id: FeatureMatrix})`` where ``"reference"`` is
    the clean model and ``"noise_<i>"`` follow ``noise_levels`` in order.
    Every noisy model sees the reference features plus its own noise, so
    more noise means strictly less class information.
    """
    labels = latent_classes(n, n_classes, seed)
    ref = clustered_features(labels, dim, spread=0.3, seed=seed, model_id="reference")
    rng = np.random.default_rng([seed, 1])
    models = {"reference": ref}
    for i, sigma in enumerate(noise_levels):
        x = ref.data + sigma * rng.standard_normal(ref.data.shape) / np.sqrt(dim)
        models[f"noise_{i}"] = FeatureMatrix(x, model_id=f"noise_{i}")
    return labels, models
