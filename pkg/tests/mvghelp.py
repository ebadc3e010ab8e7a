"""Data factories shared across the test modules."""

from __future__ import annotations

import numpy as np

from adnpca import FeatureMatrix, fit_gaussian, spectral_decompose, whiten


def gaussian_rows(rng: np.random.Generator, n: int, d: int, spread: float = 3.0) -> np.ndarray:
    """Rows from a random well-conditioned Gaussian with a random mean."""
    a = rng.standard_normal((d, d))
    sigma = a.T @ a / d + 0.05 * np.eye(d)
    chol = np.linalg.cholesky(sigma)
    mu = rng.standard_normal(d) * spread
    return rng.standard_normal((n, d)) @ chol.T + mu


def random_spd(rng: np.random.Generator, d: int) -> np.ndarray:
    a = rng.standard_normal((d, d))
    return a.T @ a / d + 0.05 * np.eye(d)


def fitted(rows: np.ndarray, shrinkage: float = 1e-6):
    """Fit rows and return the spectral decomposition."""
    model = fit_gaussian(FeatureMatrix(data=rows), shrinkage=shrinkage)
    return spectral_decompose(model)


def whitened(rows: np.ndarray, shrinkage: float = 1e-6):
    """Whiten rows under their own fitted model."""
    spectral = fitted(rows, shrinkage=shrinkage)
    return whiten(spectral, rows), spectral
