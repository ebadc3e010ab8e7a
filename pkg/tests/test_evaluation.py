"""AUROC, ROC curves, k-sweeps, and regret accounting."""

from __future__ import annotations

import csv

import numpy as np
import pytest
from mvghelp import gaussian_rows, whitened

from adnpca import (
    EmptyClass,
    KOutOfRange,
    Selection,
    auroc,
    fit_gaussian,
    generate_benchmark,
    regret,
    roc_curve,
    spectral_decompose,
    sweep_k,
    whiten,
)
from adnpca.evaluation import (
    SweepResult,
    sweep_from_dict,
    sweep_to_dict,
    write_roc_csv,
    write_sweep_csv,
)
from adnpca.gaussian import WhitenedMatrix
from adnpca.synthgen import BenchmarkSpec


def brute_force_auroc(normal, anom) -> float:
    """Independent oracle: count the pairs directly."""
    wins = 0.0
    for a in anom:
        for n in normal:
            if a > n:
                wins += 1.0
            elif a == n:
                wins += 0.5
    return wins / (len(anom) * len(normal))


def _raw(data) -> WhitenedMatrix:
    return WhitenedMatrix(data=np.asarray(data, dtype=float), source=None)


# ---------------------------------------------------------------------------
# auroc


def test_auroc_perfect_separation():
    assert auroc([1, 2], [3, 4]) == 1.0


def test_auroc_interleaved():
    # pairs won: (2>1) + (4>1) + (4>3) = 3 of 4
    assert auroc([1, 3], [2, 4]) == 0.75


def test_auroc_all_tied():
    assert auroc([5, 5, 5], [5, 5]) == 0.5


def test_auroc_matches_brute_force_with_ties(rng):
    for _ in range(50):
        n_n = int(rng.integers(1, 51))
        n_a = int(rng.integers(1, 51))
        normal = rng.integers(0, 12, n_n).astype(float) / 2
        anom = rng.integers(0, 12, n_a).astype(float) / 2 + rng.choice([0.0, 0.5])
        assert auroc(normal, anom) == brute_force_auroc(normal, anom)


def test_auroc_complement_symmetry(rng):
    normal = rng.integers(0, 6, 20).astype(float)
    anom = rng.integers(0, 6, 15).astype(float)
    assert auroc(normal, anom) + auroc(anom, normal) == pytest.approx(1.0, abs=1e-15)


def test_auroc_invariant_under_monotone_transform(rng):
    normal = rng.integers(0, 8, 25).astype(float)
    anom = rng.integers(0, 8, 30).astype(float)
    base = auroc(normal, anom)
    assert auroc(np.exp(normal), np.exp(anom)) == base
    assert auroc(3 * normal + 1, 3 * anom + 1) == base


def test_auroc_empty_class():
    with pytest.raises(EmptyClass):
        auroc([], [1.0])
    with pytest.raises(EmptyClass):
        auroc([1.0], [])


# ---------------------------------------------------------------------------
# roc_curve


def test_roc_perfect_separation_hits_corner():
    roc = roc_curve([1, 2, 3, 4], [False, False, True, True])
    assert roc.auroc == pytest.approx(1.0, abs=1e-15)
    hit = np.any((roc.fpr == 0) & (roc.tpr == 1))
    assert hit


def test_roc_starts_and_ends_at_corners(rng):
    scores = rng.standard_normal(30)
    labels = rng.random(30) < 0.4
    labels[0], labels[1] = True, False
    roc = roc_curve(scores, labels)
    assert roc.thresholds[0] == np.inf
    assert (roc.fpr[0], roc.tpr[0]) == (0.0, 0.0)
    assert (roc.fpr[-1], roc.tpr[-1]) == (1.0, 1.0)
    assert np.all(np.diff(roc.fpr) >= 0)
    assert np.all(np.diff(roc.tpr) >= 0)


def test_roc_all_tied_scores_two_points():
    roc = roc_curve([2.0, 2.0, 2.0], [True, False, True])
    assert len(roc.thresholds) == 2
    assert roc.auroc == pytest.approx(0.5, abs=1e-15)


def test_roc_trapezoid_matches_pair_counting(rng):
    for _ in range(40):
        n = int(rng.integers(4, 40))
        scores = rng.integers(0, 7, n).astype(float)
        labels = rng.random(n) < 0.5
        if labels.all() or not labels.any():
            labels[0] = not labels[0]
        roc = roc_curve(scores, labels)
        ref = auroc(scores[~labels], scores[labels])
        assert abs(roc.auroc - ref) <= 1e-12


def test_roc_exhaustive_small_instances(rng):
    # every size up to 12, scores from a tiny alphabet to force heavy ties
    for n in range(2, 13):
        for _ in range(20):
            scores = rng.integers(0, 4, n).astype(float)
            labels = rng.random(n) < 0.5
            if labels.all() or not labels.any():
                labels[0] = not labels[0]
            roc = roc_curve(scores, labels)
            ref = brute_force_auroc(scores[~labels], scores[labels])
            assert abs(roc.auroc - ref) <= 1e-12


def test_roc_validation():
    with pytest.raises(EmptyClass):
        roc_curve([1.0, 2.0], [True, True])
    with pytest.raises(ValueError):
        roc_curve([1.0, 2.0], [True])


# ---------------------------------------------------------------------------
# sweep_k


def test_sweep_single_axis_anomalies_put_k_star_first():
    # anomalies displaced only along the first whitened axis: adding more
    # axes only dilutes the signal
    rng = np.random.Generator(np.random.Philox(424242))
    normal = rng.standard_normal((300, 6))
    anom = rng.standard_normal((300, 6))
    anom[:, 0] += 6.0
    sweep = sweep_k(_raw(normal), _raw(anom))
    assert sweep.k_star == 1
    assert sweep.auroc_per_k[0] == sweep.auroc_star
    assert np.all(np.diff(sweep.auroc_per_k) <= 1e-9)


def test_sweep_isotropic_saturation_ties_to_smallest_k(rng):
    normal = rng.standard_normal((50, 4))
    anom = rng.standard_normal((50, 4)) + 1000.0
    sweep = sweep_k(_raw(normal), _raw(anom))
    assert np.allclose(sweep.auroc_per_k, 1.0)
    assert sweep.k_star == 1  # tie resolved to fewest components


def test_sweep_planted_benchmark_recovers_k_true_region():
    bench = generate_benchmark(
        BenchmarkSpec(seed=11, n_train=2000, n_test=200, d=32, k_true=8,
                      gap=10.0, offset=4.0)
    )
    spectral = spectral_decompose(fit_gaussian(bench.train))
    sweep = sweep_k(
        whiten(spectral, bench.test_normal), whiten(spectral, bench.test_anom)
    )
    assert 6 <= sweep.k_star <= 10
    assert sweep.auroc_star >= sweep.auroc_per_k[-1]


def test_sweep_dimension_mismatch(rng):
    with pytest.raises(KOutOfRange):
        sweep_k(_raw(rng.standard_normal((5, 3))), _raw(rng.standard_normal((5, 4))))


def test_sweep_result_consistency(rng):
    w_n, spectral = whitened(gaussian_rows(rng, 60, 5))
    from adnpca import whiten as _whiten

    w_a = _whiten(spectral, gaussian_rows(rng, 40, 5))
    sweep = sweep_k(w_n, w_a)
    assert np.array_equal(sweep.ks, [1, 2, 3, 4, 5])
    assert sweep.auroc_star == sweep.auroc_at(sweep.k_star)
    assert np.all((sweep.auroc_per_k >= 0) & (sweep.auroc_per_k <= 1))
    with pytest.raises(KOutOfRange):
        sweep.auroc_at(0)


# ---------------------------------------------------------------------------
# regret


def _sweep(values) -> SweepResult:
    values = np.asarray(values, dtype=float)
    best = int(np.argmax(values))
    return SweepResult(
        ks=np.arange(1, values.size + 1),
        auroc_per_k=values,
        k_star=best + 1,
        auroc_star=float(values[best]),
    )


def test_regret_zero_at_optimum():
    sweep = _sweep([0.7, 0.9, 0.8])
    sel = Selection(k_tilde=2, rule="argmax")
    assert regret(sweep, sel).regret == 0.0


def test_regret_hand_case():
    entry = regret(_sweep([0.9, 0.8]), Selection(k_tilde=2, rule="argmax"))
    assert entry.regret == pytest.approx(0.1, abs=1e-15)
    assert entry.k_star == 1
    assert entry.auroc_tilde == 0.8


def test_regret_nonnegative_random(rng):
    for _ in range(20):
        values = rng.random(10)
        k = int(rng.integers(1, 11))
        entry = regret(_sweep(values), Selection(k_tilde=k, rule="argmax"))
        assert entry.regret >= 0


def test_regret_out_of_grid():
    with pytest.raises(KOutOfRange):
        regret(_sweep([0.5, 0.6]), Selection(k_tilde=3, rule="argmax"))


# ---------------------------------------------------------------------------
# export


def test_sweep_dict_round_trip():
    sweep = _sweep([0.4, 0.9, 0.6])
    back = sweep_from_dict(sweep_to_dict(sweep))
    assert back.k_star == sweep.k_star
    assert np.array_equal(back.auroc_per_k, sweep.auroc_per_k)


def test_sweep_csv_export(tmp_path):
    path = tmp_path / "sweep.csv"
    write_sweep_csv(_sweep([0.25, 0.75]), path)
    with path.open() as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["k", "auroc"]
    assert rows[2] == ["2", "0.75"]


def test_roc_csv_export(tmp_path):
    roc = roc_curve([1.0, 2.0], [False, True])
    path = tmp_path / "roc.csv"
    write_roc_csv(roc, path)
    with path.open() as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["threshold", "fpr", "tpr"]
    assert len(rows) == len(roc.thresholds) + 1
