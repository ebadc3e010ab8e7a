"""Threshold-free evaluation: AUROC, ROC curves, k-sweeps, heuristic regret.

AUROC is computed as the exact Mann-Whitney statistic from midranks, which
sidesteps threshold-grid artifacts entirely; the ROC curve itself is kept
for plotting and as an independent cross-check (its trapezoidal area must
agree to 1e-12).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.stats import rankdata

from .errors import EmptyClass, IoFailure, KOutOfRange
from .gaussian import WhitenedMatrix
from .heuristics import Selection
from .npca import mean_sq_all_k


def auroc(scores_normal: Sequence[float], scores_anom: Sequence[float]) -> float:
    """Probability that a random anomalous score outranks a random normal one.

    Exact pair counting via midranks: ties contribute half. Higher score
    must mean more anomalous.
    """
    normal = np.asarray(scores_normal, dtype=np.float64).reshape(-1)
    anom = np.asarray(scores_anom, dtype=np.float64).reshape(-1)
    if normal.size == 0 or anom.size == 0:
        raise EmptyClass(
            f"need both classes, got {normal.size} normal / {anom.size} anomalous"
        )
    ranks = rankdata(np.concatenate([anom, normal]))
    rank_sum = float(ranks[: anom.size].sum())
    u = rank_sum - anom.size * (anom.size + 1) / 2.0
    return u / (anom.size * normal.size)


@dataclass(frozen=True)
class RocResult:
    """One ROC curve: descending thresholds and the matching rates."""

    thresholds: np.ndarray
    tpr: np.ndarray
    fpr: np.ndarray
    auroc: float

    def __post_init__(self):
        for name in ("thresholds", "tpr", "fpr"):
            arr = np.array(getattr(self, name), dtype=np.float64).reshape(-1)
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)


def roc_curve(scores: Sequence[float], labels: Sequence[bool]) -> RocResult:
    """ROC curve by sweeping a descending threshold over unique scores.

    labels: True = anomalous. The curve starts at (0,0) under a +inf
    threshold and ends at (1,1); the stored auroc is the trapezoidal area
    of exactly these points.
    """
    s = np.asarray(scores, dtype=np.float64).reshape(-1)
    y = np.asarray(labels, dtype=bool).reshape(-1)
    if s.size != y.size:
        raise ValueError(f"{s.size} scores but {y.size} labels")
    n_pos = int(y.sum())
    n_neg = y.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise EmptyClass(f"need both classes, got {n_pos} positive / {n_neg} negative")

    order = np.argsort(-s, kind="stable")
    s_sorted = s[order]
    y_sorted = y[order]
    # Last index of each run of tied scores: the curve gets one point per
    # distinct threshold.
    distinct = np.flatnonzero(np.diff(s_sorted) != 0.0)
    last = np.concatenate([distinct, [s.size - 1]])
    tp = np.cumsum(y_sorted)[last]
    fp = np.cumsum(~y_sorted)[last]

    thresholds = np.concatenate([[np.inf], s_sorted[last]])
    tpr = np.concatenate([[0.0], tp / n_pos])
    fpr = np.concatenate([[0.0], fp / n_neg])
    area = float(np.trapezoid(tpr, fpr))
    return RocResult(thresholds=thresholds, tpr=tpr, fpr=fpr, auroc=area)


@dataclass(frozen=True)
class SweepResult:
    """AUROC at every retained dimension k = 1..d."""

    ks: np.ndarray
    auroc_per_k: np.ndarray
    k_star: int
    auroc_star: float

    def __post_init__(self):
        ks = np.array(self.ks, dtype=np.int64).reshape(-1)
        per_k = np.array(self.auroc_per_k, dtype=np.float64).reshape(-1)
        ks.flags.writeable = False
        per_k.flags.writeable = False
        object.__setattr__(self, "ks", ks)
        object.__setattr__(self, "auroc_per_k", per_k)

    def auroc_at(self, k: int) -> float:
        idx = np.flatnonzero(self.ks == k)
        if idx.size == 0:
            raise KOutOfRange(f"k={k} outside the sweep grid")
        return float(self.auroc_per_k[idx[0]])


def sweep_k(w_test_normal: WhitenedMatrix, w_test_anom: WhitenedMatrix) -> SweepResult:
    """AUROC of the mean-square score for every k; k_star is the argmax.

    Scores for all k come from one cumulative sum per matrix, so the sweep
    is O(n*d) plus the per-k rankings. Ties on the maximum go to the
    smallest k: fewer retained components wins.
    """
    if w_test_normal.d != w_test_anom.d:
        raise KOutOfRange(
            f"dimension mismatch: {w_test_normal.d} vs {w_test_anom.d}"
        )
    s_n = mean_sq_all_k(w_test_normal)
    s_a = mean_sq_all_k(w_test_anom)
    per_k = np.array([
        auroc(s_n[:, i], s_a[:, i]) for i in range(w_test_normal.d)
    ])
    best = int(np.argmax(per_k))
    return SweepResult(
        ks=np.arange(1, w_test_normal.d + 1),
        auroc_per_k=per_k,
        k_star=best + 1,
        auroc_star=float(per_k[best]),
    )


@dataclass(frozen=True)
class RegretEntry:
    """How much AUROC a heuristic choice gave up against the sweep optimum."""

    heuristic: str
    k_tilde: int
    k_star: int
    auroc_tilde: float
    auroc_star: float
    regret: float
    category: str = ""
    stage: int = -1


def regret(sweep: SweepResult, sel: Selection, category: str = "",
           stage: int = -1) -> RegretEntry:
    at_tilde = sweep.auroc_at(sel.k_tilde)
    return RegretEntry(
        heuristic=sel.method or sel.rule,
        k_tilde=sel.k_tilde,
        k_star=sweep.k_star,
        auroc_tilde=at_tilde,
        auroc_star=sweep.auroc_star,
        regret=sweep.auroc_star - at_tilde,
        category=category,
        stage=stage,
    )


# ---------------------------------------------------------------------------
# Export


def sweep_to_dict(sweep: SweepResult) -> dict:
    return {
        "ks": sweep.ks.tolist(),
        "auroc_per_k": sweep.auroc_per_k.tolist(),
        "k_star": sweep.k_star,
        "auroc_star": sweep.auroc_star,
    }


def sweep_from_dict(doc: dict) -> SweepResult:
    return SweepResult(
        ks=np.asarray(doc["ks"]),
        auroc_per_k=np.asarray(doc["auroc_per_k"]),
        k_star=int(doc["k_star"]),
        auroc_star=float(doc["auroc_star"]),
    )


def write_sweep_csv(sweep: SweepResult, path: Path | str) -> None:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["k", "auroc"])
            for k, a in zip(sweep.ks, sweep.auroc_per_k):
                writer.writerow([int(k), repr(float(a))])
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


def write_roc_csv(roc: RocResult, path: Path | str) -> None:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["threshold", "fpr", "tpr"])
            for t, f, tp in zip(roc.thresholds, roc.fpr, roc.tpr):
                writer.writerow([repr(float(t)), repr(float(f)), repr(float(tp))])
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


def regret_entry_to_dict(entry: RegretEntry) -> dict:
    return {
        "heuristic": entry.heuristic,
        "category": entry.category,
        "stage": entry.stage,
        "k_tilde": entry.k_tilde,
        "k_star": entry.k_star,
        "auroc_tilde": entry.auroc_tilde,
        "auroc_star": entry.auroc_star,
        "regret": entry.regret,
    }
