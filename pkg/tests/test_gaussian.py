"""Gaussian fit, eigendecomposition, whitening, Mahalanobis, log density."""

from __future__ import annotations

import json

import numpy as np
import pytest
from mvghelp import fitted, gaussian_rows, random_spd

from adnpca import (
    DegenerateInput,
    DimensionMismatch,
    FeatureMatrix,
    GaussianModel,
    IoFailure,
    MalformedFile,
    RankDeficiencyWarning,
    TooFewSamples,
    fit_gaussian,
    gaussian_logpdf,
    load_model,
    mahalanobis,
    save_model,
    spectral_decompose,
    whiten,
)
from adnpca.gaussian import DegenerateInputWarning, SpectralModel


def _spectral_from(mu, sigma, n_fit=100):
    model = GaussianModel(mu=mu, sigma=sigma, shrinkage=0.0, n_fit=n_fit)
    return spectral_decompose(model)


# ---------------------------------------------------------------------------
# fit_gaussian


def test_fit_hand_computed_covariance():
    rows = np.array([[0, 0], [2, 0], [0, 2], [2, 2]], dtype=float)
    model = fit_gaussian(rows, shrinkage=0.0)
    assert np.allclose(model.mu, [1, 1], atol=1e-15)
    assert np.allclose(model.sigma, np.diag([4 / 3, 4 / 3]), atol=1e-15)
    assert model.n_fit == 4


def test_fit_shrinkage_endpoint_approaches_scaled_identity(rng):
    rows = gaussian_rows(rng, 50, 4)
    model = fit_gaussian(rows, shrinkage=1 - 1e-12)
    target = np.trace(np.cov(rows, rowvar=False)) / 4
    assert np.allclose(model.sigma, target * np.eye(4), atol=1e-9 * target)


def test_fit_too_few_samples():
    with pytest.raises(TooFewSamples):
        fit_gaussian(np.ones((1, 3)))


def test_fit_rejects_bad_shrinkage(rng):
    rows = gaussian_rows(rng, 10, 2)
    for alpha in (-0.1, 1.0, 1.5):
        with pytest.raises(ValueError):
            fit_gaussian(rows, shrinkage=alpha)


def test_fit_constant_column_warns_then_whitening_fails(rng):
    rows = gaussian_rows(rng, 20, 3)
    rows[:, 1] = 7.0
    with pytest.warns(DegenerateInputWarning):
        model = fit_gaussian(rows, shrinkage=0.0)
    spectral = spectral_decompose(model)
    with pytest.raises(DegenerateInput):
        whiten(spectral, rows)
    # shrinkage floors the zero eigenvalue, whitening then succeeds
    w = whiten(spectral_decompose(fit_gaussian(rows, shrinkage=1e-6)), rows)
    assert np.all(np.isfinite(w.data))


def test_fit_rank_warning_when_n_below_d(rng):
    rows = gaussian_rows(rng, 5, 8)
    with pytest.warns(RankDeficiencyWarning) as caught:
        model = fit_gaussian(rows)
    assert caught[0].message.effective_rank == 4
    assert model.effective_rank == 4


def test_fit_accepts_feature_matrix(rng):
    rows = gaussian_rows(rng, 30, 4)
    m = FeatureMatrix(data=rows, split="train")
    assert np.allclose(fit_gaussian(m).mu, rows.mean(axis=0))


# ---------------------------------------------------------------------------
# spectral_decompose


def test_decompose_diagonal_sigma_sorted_ascending():
    spectral = _spectral_from([0, 0, 0], np.diag([3.0, 1.0, 2.0]))
    assert np.allclose(spectral.eigenvalues, [1, 2, 3], atol=1e-14)
    # permuted identity columns with positive pivots
    expected = np.zeros((3, 3))
    expected[1, 0] = expected[2, 1] = expected[0, 2] = 1.0
    assert np.allclose(spectral.eigenvectors, expected, atol=1e-14)


def test_decompose_identity_sigma():
    spectral = _spectral_from([0, 0], np.eye(2))
    assert np.allclose(spectral.eigenvalues, [1, 1])
    v = spectral.eigenvectors
    assert np.allclose(v.T @ v, np.eye(2), atol=1e-10)


def test_decompose_reconstructs_sigma(rng):
    sigma = random_spd(rng, 8)
    spectral = _spectral_from(np.zeros(8), sigma)
    recon = (spectral.eigenvectors * spectral.eigenvalues) @ spectral.eigenvectors.T
    assert np.allclose(recon, sigma, rtol=1e-8, atol=1e-12)
    v = spectral.eigenvectors
    assert np.abs(v.T @ v - np.eye(8)).max() < 1e-10


def test_decompose_sign_convention_fixed(rng):
    sigma = random_spd(rng, 6)
    spectral = _spectral_from(np.zeros(6), sigma)
    v = spectral.eigenvectors
    for col in range(6):
        pivot = np.argmax(np.abs(v[:, col]))
        assert v[pivot, col] > 0
    again = _spectral_from(np.zeros(6), sigma)
    assert np.array_equal(v, again.eigenvectors)


# ---------------------------------------------------------------------------
# mahalanobis / whiten


def test_mahalanobis_euclidean_case():
    spectral = _spectral_from([0, 0], np.eye(2))
    assert mahalanobis(spectral, [3, 4]) == pytest.approx(5.0, rel=1e-14)


def test_mahalanobis_diagonal_scaling():
    spectral = _spectral_from([1, 1], np.diag([4.0, 9.0]))
    assert mahalanobis(spectral, [3, 4]) == pytest.approx(np.sqrt(2), rel=1e-14)


def test_mahalanobis_matches_explicit_inverse(rng):
    rows = gaussian_rows(rng, 200, 10)
    spectral = fitted(rows, shrinkage=0.0)
    model = spectral.source
    inv = np.linalg.inv(model.sigma)
    for x in rows[:10]:
        diff = x - model.mu
        direct = np.sqrt(diff @ inv @ diff)
        assert mahalanobis(spectral, x) == pytest.approx(direct, rel=1e-8)


def test_mahalanobis_dimension_mismatch():
    spectral = _spectral_from([0, 0], np.eye(2))
    with pytest.raises(DimensionMismatch):
        mahalanobis(spectral, [1, 2, 3])


def test_whiten_scalar_case():
    spectral = _spectral_from([0.0], [[4.0]])
    w = whiten(spectral, np.array([[2.0]]))
    assert w.data[0, 0] == pytest.approx(1.0, rel=1e-14)


def test_whiten_training_set_has_identity_covariance(rng):
    rows = gaussian_rows(rng, 200, 5)
    spectral = fitted(rows, shrinkage=0.0)
    w = whiten(spectral, rows)
    cov = np.cov(w.data, rowvar=False)
    assert np.abs(cov - np.eye(5)).max() < 1e-6


def test_whiten_row_norm_equals_mahalanobis(rng):
    rows = gaussian_rows(rng, 64, 16)
    spectral = fitted(rows)
    w = whiten(spectral, rows)
    for j in range(0, 64, 7):
        norm = np.linalg.norm(w.data[j])
        assert norm == pytest.approx(mahalanobis(spectral, rows[j]), rel=1e-10)


def test_whiten_dimension_mismatch(rng):
    spectral = fitted(gaussian_rows(rng, 20, 3))
    with pytest.raises(DimensionMismatch):
        whiten(spectral, np.ones((2, 4)))


def test_whiten_preserves_image_ids(rng):
    rows = gaussian_rows(rng, 4, 2)
    spectral = fitted(rows)
    m = FeatureMatrix(data=rows, image_ids=("p", "q", "r", "s"))
    assert whiten(spectral, m).image_ids == ("p", "q", "r", "s")


# ---------------------------------------------------------------------------
# gaussian_logpdf


def test_logpdf_standard_normal_mode():
    model = GaussianModel(mu=[0.0], sigma=[[1.0]], shrinkage=0.0, n_fit=10)
    assert gaussian_logpdf(model, [0.0]) == pytest.approx(-0.5 * np.log(2 * np.pi), rel=1e-12)


def test_logpdf_bivariate_identity():
    model = GaussianModel(mu=[0, 0], sigma=np.eye(2), shrinkage=0.0, n_fit=10)
    assert gaussian_logpdf(model, [0, 0]) == pytest.approx(-np.log(2 * np.pi), rel=1e-12)


def test_logpdf_matches_direct_formula(rng):
    rows = gaussian_rows(rng, 120, 6)
    spectral = fitted(rows, shrinkage=0.0)
    model = spectral.source
    x = rows[3]
    sign, logdet = np.linalg.slogdet(model.sigma)
    diff = x - model.mu
    direct = -0.5 * (
        6 * np.log(2 * np.pi) + logdet + diff @ np.linalg.inv(model.sigma) @ diff
    )
    assert sign > 0
    assert gaussian_logpdf(model, x, spectral) == pytest.approx(direct, rel=1e-8)


# ---------------------------------------------------------------------------
# invariants


def test_translation_moves_mu_only(rng):
    rows = gaussian_rows(rng, 150, 4)
    shift = np.array([10.0, -3.0, 0.5, 100.0])
    a = fit_gaussian(rows, shrinkage=0.0)
    b = fit_gaussian(rows + shift, shrinkage=0.0)
    assert np.allclose(b.mu, a.mu + shift, atol=1e-8)
    assert np.allclose(b.sigma, a.sigma, atol=1e-8)
    sa, sb = spectral_decompose(a), spectral_decompose(b)
    assert np.allclose(sa.eigenvalues, sb.eigenvalues, rtol=1e-8)
    q = rows[0]
    assert mahalanobis(sa, q) == pytest.approx(mahalanobis(sb, q + shift), rel=1e-8)


def test_smallest_eigenvalue_monotone_in_shrinkage(rng):
    rows = gaussian_rows(rng, 40, 6)
    lam1 = [
        spectral_decompose(fit_gaussian(rows, shrinkage=a)).eigenvalues[0]
        for a in (0.0, 1e-6, 1e-3, 0.1, 0.5)
    ]
    assert all(x <= y + 1e-15 for x, y in zip(lam1, lam1[1:]))


def test_shrinkage_floors_smallest_eigenvalue(rng):
    rows = gaussian_rows(rng, 5, 10)  # rank deficient on purpose
    with pytest.warns(RankDeficiencyWarning):
        model = fit_gaussian(rows, shrinkage=1e-6)
    lam = spectral_decompose(model).eigenvalues
    assert lam[0] > 0


# ---------------------------------------------------------------------------
# serialization


def test_model_round_trip(tmp_path, rng):
    rows = gaussian_rows(rng, 80, 5)
    spectral = fitted(rows)
    path = tmp_path / "model.json"
    save_model(spectral, path)
    doc = json.loads(path.read_text())
    assert "sigma" in doc  # small d keeps the raw covariance
    back = load_model(path)
    assert np.array_equal(back.eigenvalues, spectral.eigenvalues)
    assert np.array_equal(back.eigenvectors, spectral.eigenvectors)
    x = rows[0]
    assert mahalanobis(back, x) == pytest.approx(mahalanobis(spectral, x), rel=1e-12)


def test_model_large_d_drops_sigma(tmp_path, rng):
    rows = gaussian_rows(rng, 600, 260)
    spectral = fitted(rows)
    path = tmp_path / "model.json"
    save_model(spectral, path)
    doc = json.loads(path.read_text())
    assert "sigma" not in doc
    back = load_model(path)
    # covariance reconstructed from eigenpairs
    assert np.allclose(back.source.sigma, spectral.source.sigma, atol=1e-8)


def test_model_load_errors(tmp_path):
    with pytest.raises(IoFailure):
        load_model(tmp_path / "missing.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{oops")
    with pytest.raises(MalformedFile):
        load_model(bad)
    bad.write_text(json.dumps({"mu": [0]}))
    with pytest.raises(MalformedFile):
        load_model(bad)


def test_model_dataclass_validation():
    with pytest.raises(DimensionMismatch):
        GaussianModel(mu=[0, 0], sigma=np.eye(3), shrinkage=0.0, n_fit=5)
    with pytest.raises(DegenerateInput):
        GaussianModel(
            mu=[0, 0], sigma=[[1.0, 0.5], [0.0, 1.0]], shrinkage=0.0, n_fit=5
        )
    with pytest.raises(DimensionMismatch):
        SpectralModel(
            eigenvalues=[1.0, 2.0],
            eigenvectors=np.eye(3),
            source=GaussianModel(mu=[0] * 3, sigma=np.eye(3), shrinkage=0.0, n_fit=5),
        )
