"""Multivariate Gaussian fit, spectral decomposition, whitening, Mahalanobis.

The model of normality is a single Gaussian N(mu, sigma) fitted to training
features. Everything downstream works in the whitened eigenbasis: column i
of a whitened matrix is v_i'(x - mu)/sqrt(lambda_i) with eigenvalues sorted
ascending, so the first columns are the lowest-variance directions and the
Euclidean norm of a whitened row equals the Mahalanobis distance of the
original row.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (
    DegenerateInput,
    DimensionMismatch,
    IoFailure,
    MalformedFile,
    NumericalFailure,
    TooFewSamples,
)
from .featstore import FeatureMatrix, atomic_write_text, default_image_ids

#: Axes of a WhitenedMatrix follow ascending eigenvalue order.
AXIS_ORDER = "eigenvalue_ascending"

#: Keep the raw covariance in serialized models only up to this dimension.
SIGMA_JSON_MAX_DIM = 256


class RankDeficiencyWarning(UserWarning):
    """Fewer independent samples than dimensions: n - 1 < d.

    ``effective_rank`` carries n - 1; sweep reports flag k above it as
    numerically unreliable.
    """

    def __init__(self, effective_rank: int, d: int):
        self.effective_rank = effective_rank
        self.d = d
        super().__init__(
            f"covariance rank limited to {effective_rank} by sample count "
            f"(d={d}); eigenvalues beyond that rank are shrinkage floor only"
        )


class DegenerateInputWarning(UserWarning):
    """A training column is constant and no shrinkage was applied."""


def _rows(x) -> np.ndarray:
    """Accept a FeatureMatrix or a plain 2-D array."""
    data = x.data if isinstance(x, FeatureMatrix) else np.asarray(x, dtype=np.float64)
    if data.ndim != 2:
        raise DimensionMismatch(f"expected 2-D data, got shape {data.shape}")
    return data


@dataclass(frozen=True)
class GaussianModel:
    """Mean, shrunk covariance, and how they were obtained."""

    mu: np.ndarray
    sigma: np.ndarray
    shrinkage: float
    n_fit: int

    def __post_init__(self):
        mu = np.array(self.mu, dtype=np.float64).reshape(-1)
        sigma = np.array(self.sigma, dtype=np.float64)
        if sigma.shape != (mu.size, mu.size):
            raise DimensionMismatch(
                f"sigma shape {sigma.shape} does not match mu dimension {mu.size}"
            )
        if not np.allclose(sigma, sigma.T, rtol=0.0, atol=1e-12):
            raise DegenerateInput("sigma is not symmetric to 1e-12")
        mu.flags.writeable = False
        sigma.flags.writeable = False
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "sigma", sigma)

    @property
    def d(self) -> int:
        return self.mu.size

    @property
    def effective_rank(self) -> int:
        return min(self.n_fit - 1, self.d)


@dataclass(frozen=True)
class SpectralModel:
    """Eigendecomposition of a GaussianModel, eigenvalues ascending."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    source: GaussianModel

    def __post_init__(self):
        lam = np.array(self.eigenvalues, dtype=np.float64).reshape(-1)
        vec = np.array(self.eigenvectors, dtype=np.float64)
        if vec.shape != (lam.size, lam.size):
            raise DimensionMismatch(
                f"eigenvector matrix {vec.shape} vs {lam.size} eigenvalues"
            )
        lam.flags.writeable = False
        vec.flags.writeable = False
        object.__setattr__(self, "eigenvalues", lam)
        object.__setattr__(self, "eigenvectors", vec)

    @property
    def d(self) -> int:
        return self.eigenvalues.size

    @property
    def mu(self) -> np.ndarray:
        return self.source.mu


@dataclass(frozen=True)
class WhitenedMatrix:
    """Rows transformed into the unit-covariance eigenbasis.

    ``data[j, i] = v_i'(x_j - mu)/sqrt(lambda_i)`` with axes in ascending
    eigenvalue order, so slicing the first k columns keeps the k
    lowest-variance directions.
    """

    data: np.ndarray
    source: SpectralModel
    image_ids: tuple[str, ...] = ()
    axis_order: str = AXIS_ORDER

    def __post_init__(self):
        data = np.array(self.data, dtype=np.float64)
        if data.ndim != 2:
            raise DimensionMismatch(f"whitened data must be 2-D, got {data.shape}")
        ids = tuple(self.image_ids) or default_image_ids(data.shape[0])
        if len(ids) != data.shape[0]:
            raise DimensionMismatch(f"{len(ids)} image ids for {data.shape[0]} rows")
        data.flags.writeable = False
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "image_ids", ids)

    @property
    def n(self) -> int:
        return self.data.shape[0]

    @property
    def d(self) -> int:
        return self.data.shape[1]


def fit_gaussian(train, shrinkage: float = 1e-6) -> GaussianModel:
    """Fit N(mu, sigma) to training rows with trace-scaled shrinkage.

    sigma = (1 - a) * S + a * (trace(S)/d) * I, where S is the unbiased
    sample covariance. The identity target keeps the eigenbasis of S while
    flooring the smallest eigenvalue above zero, which matters whenever
    n - 1 < d (singular S).
    """
    data = _rows(train)
    n, d = data.shape
    if n < 2:
        raise TooFewSamples(f"need at least 2 training rows, got {n}")
    if not 0.0 <= shrinkage < 1.0:
        raise ValueError(f"shrinkage must be in [0, 1), got {shrinkage}")

    mu = data.mean(axis=0)
    centered = data - mu
    s = centered.T @ centered / (n - 1)
    s = (s + s.T) / 2.0  # kill fp asymmetry from the matmul

    if shrinkage == 0.0:
        const = np.flatnonzero(s.diagonal() == 0.0)
        if const.size:
            warnings.warn(
                DegenerateInputWarning(
                    f"column {const[0]} is constant and shrinkage is 0; "
                    "whitening this model will fail"
                ),
                stacklevel=2,
            )
        sigma = s
    else:
        sigma = (1.0 - shrinkage) * s + shrinkage * (np.trace(s) / d) * np.eye(d)

    if n - 1 < d:
        warnings.warn(RankDeficiencyWarning(n - 1, d), stacklevel=2)
    return GaussianModel(mu=mu, sigma=sigma, shrinkage=float(shrinkage), n_fit=n)


def spectral_decompose(model: GaussianModel) -> SpectralModel:
    """Eigendecompose sigma with ascending eigenvalues and fixed signs.

    Sign convention: the largest-magnitude entry of each eigenvector is
    made positive (ties resolved to the lowest index by argmax), so repeated
    runs and different LAPACK builds produce the same matrix.
    """
    try:
        lam, vec = np.linalg.eigh(model.sigma)
    except np.linalg.LinAlgError as exc:
        raise NumericalFailure(f"eigendecomposition failed: {exc}") from exc
    pivot = np.argmax(np.abs(vec), axis=0)
    signs = np.sign(vec[pivot, np.arange(vec.shape[1])])
    signs[signs == 0] = 1.0
    vec = vec * signs
    return SpectralModel(eigenvalues=lam, eigenvectors=vec, source=model)


def _whiten_rows(spectral: SpectralModel, data: np.ndarray) -> np.ndarray:
    if data.shape[1] != spectral.d:
        raise DimensionMismatch(
            f"data has {data.shape[1]} columns, model dimension is {spectral.d}"
        )
    lam = spectral.eigenvalues
    if lam[0] <= 0.0:
        raise DegenerateInput(
            f"smallest eigenvalue {lam[0]!r} is not positive; "
            "refit with shrinkage > 0"
        )
    return (data - spectral.mu) @ spectral.eigenvectors / np.sqrt(lam)


def whiten(spectral: SpectralModel, m) -> WhitenedMatrix:
    """Map rows of ``m`` into the whitened eigenbasis (ascending order)."""
    data = _rows(m)
    ids = m.image_ids if isinstance(m, FeatureMatrix) else ()
    return WhitenedMatrix(
        data=_whiten_rows(spectral, data),
        source=spectral,
        image_ids=ids,
    )


def mahalanobis(spectral: SpectralModel, x) -> float:
    """Mahalanobis distance of one d-vector from the model mean.

    Computed as the Euclidean norm of the whitened coordinates, which is
    numerically stabler than forming sigma^-1.
    """
    vec = np.asarray(x, dtype=np.float64).reshape(-1)
    if vec.size != spectral.d:
        raise DimensionMismatch(f"x has dimension {vec.size}, model {spectral.d}")
    w = _whiten_rows(spectral, vec[None, :])
    return float(np.linalg.norm(w[0]))


def mahalanobis_rows(spectral: SpectralModel, m) -> np.ndarray:
    """Vectorized mahalanobis over the rows of a matrix."""
    w = _whiten_rows(spectral, _rows(m))
    return np.linalg.norm(w, axis=1)


def gaussian_logpdf(model: GaussianModel, x, spectral: SpectralModel | None = None) -> float:
    """Log density of the fitted Gaussian at x.

    -(1/2) [d log(2 pi) + log det sigma + M(x)^2], with the determinant
    taken from the eigenvalues.
    """
    if spectral is None:
        spectral = spectral_decompose(model)
    dist = mahalanobis(spectral, x)
    logdet = float(np.sum(np.log(spectral.eigenvalues)))
    return float(-0.5 * (model.d * np.log(2.0 * np.pi) + logdet + dist * dist))


# ---------------------------------------------------------------------------
# Serialization


def save_model(
    spectral: SpectralModel,
    path: Path | str,
    include_sigma: bool | None = None,
) -> None:
    """Write the model and its decomposition as one JSON document.

    ``sigma`` is stored only up to 256 dimensions by default (it is
    reconstructible from the eigenpairs); pass ``include_sigma`` to force
    either way.
    """
    model = spectral.source
    if include_sigma is None:
        include_sigma = model.d <= SIGMA_JSON_MAX_DIM
    doc = {
        "format": "adnpca-model-v1",
        "d": model.d,
        "n_fit": model.n_fit,
        "shrinkage": model.shrinkage,
        "mu": model.mu.tolist(),
        "eigenvalues": spectral.eigenvalues.tolist(),
        "eigenvectors": spectral.eigenvectors.tolist(),
    }
    if include_sigma:
        doc["sigma"] = model.sigma.tolist()
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        atomic_write_text(path, json.dumps(doc) + "\n")
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


def load_model(path: Path | str) -> SpectralModel:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise MalformedFile(f"{path}: bad model JSON: {exc}") from exc
    try:
        lam = np.asarray(doc["eigenvalues"], dtype=np.float64)
        vec = np.asarray(doc["eigenvectors"], dtype=np.float64)
        if "sigma" in doc:
            sigma = np.asarray(doc["sigma"], dtype=np.float64)
        else:
            sigma = (vec * lam) @ vec.T
            sigma = (sigma + sigma.T) / 2.0
        model = GaussianModel(
            mu=np.asarray(doc["mu"], dtype=np.float64),
            sigma=sigma,
            shrinkage=float(doc["shrinkage"]),
            n_fit=int(doc["n_fit"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise MalformedFile(f"{path}: bad model structure: {exc}") from exc
    return SpectralModel(eigenvalues=lam, eigenvectors=vec, source=model)
