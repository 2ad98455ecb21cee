"""Reproducible datasets for experiments and acceptance runs."""

from __future__ import annotations

import numpy as np
from scipy.ndimage import zoom

from .dataset_io import LabeledDataset

GAUSSIAN_MEANS = ((-2.0, 2.0), (2.0, 2.0), (-2.0, -2.0))


def synthetic_gaussians(n_per_class: int = 20, seed: int = 0, means=GAUSSIAN_MEANS) -> LabeledDataset:
    """Uniformly weighted samples from N(m_i, I_2), one class per mean."""
    rng = np.random.default_rng(seed)
    X = np.concatenate([rng.normal(m, 1.0, size=(n_per_class, len(m))) for m in means])
    y = np.repeat(np.arange(len(means)), n_per_class)
    return LabeledDataset.from_arrays(X, y)


def digits_784(digits=(1, 4, 7, 9), per_class: int = 50, seed: int = 0) -> LabeledDataset:
    """MNIST-shaped vectors built from scikit-learn's bundled 8x8 digits.

    Images are upsampled to 28x28 by pixel replication and scaled to [0, 1],
    so every vector lives in R^784 and Chebyshev distances take the values
    k/16.
    """
    from sklearn.datasets import load_digits

    bunch = load_digits()
    rng = np.random.default_rng(seed)
    X, y = [], []
    for label in digits:
        idx = np.flatnonzero(bunch.target == label)
        pick = rng.choice(idx, size=per_class, replace=False)
        for i in np.sort(pick):
            img = zoom(bunch.images[i], 3.5, order=0) / 16.0
            X.append(img.reshape(-1))
            y.append(label)
    return LabeledDataset.from_arrays(np.array(X), np.array(y))
