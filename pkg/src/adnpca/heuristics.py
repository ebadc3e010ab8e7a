"""Heuristic curves for choosing the retained dimension k, plus selection rules.

Three curve families are produced:

* eigenvalue ratio: consecutive spectral-gap ratios, argmax marks the
  boundary between the low-variance subspace worth keeping and the rest;
* normality: running mean of per-axis normality p-values of the whitened
  training columns (truly Gaussian axes score high);
* relative distance: per-pair score inflation between normal images and
  their synthesized anomalous partners, summed over pairs, optionally
  differentiated.

Selection turns a curve into a single k, either by plain argmax or by the
tolerance rule (first local minimum, then the smallest k whose value is
within ``tol`` of the maximum beyond it).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy.special import ndtr

from .errors import (
    DegenerateSpectrum,
    IoFailure,
    TooFewSamples,
    ZeroNormalScore,
)
from .featstore import pairing_permutation
from .gaussian import SpectralModel, WhitenedMatrix
from .npca import mean_sq_all_k

METHODS = ("eigen_ratio", "normality", "relative_distance", "differential")

#: Series truncation for the Kolmogorov tail sum.
KOLMOGOROV_TERM_FLOOR = 1e-12


@dataclass(frozen=True)
class HeuristicCurve:
    """A k-grid and the heuristic value at each grid point."""

    method: str
    ks: np.ndarray
    values: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        ks = np.array(self.ks, dtype=np.int64).reshape(-1)
        values = np.array(self.values, dtype=np.float64).reshape(-1)
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}, got {self.method!r}")
        if ks.size != values.size:
            raise ValueError(f"{ks.size} grid points but {values.size} values")
        if ks.size == 0:
            raise ValueError("empty curve")
        if np.any(np.diff(ks) <= 0):
            raise ValueError("k grid must be strictly increasing")
        if not np.all(np.isfinite(values)):
            raise ValueError("curve values must be finite")
        ks.flags.writeable = False
        values.flags.writeable = False
        object.__setattr__(self, "ks", ks)
        object.__setattr__(self, "values", values)

    def __len__(self) -> int:
        return self.ks.size

    def value_at(self, k: int) -> float:
        idx = np.flatnonzero(self.ks == k)
        if idx.size == 0:
            raise KeyError(f"k={k} not on the curve grid")
        return float(self.values[idx[0]])


@dataclass(frozen=True)
class Selection:
    """The k chosen from a curve and how it was chosen.

    ``discarded_first_point`` records that the curve's global maximum sat at
    the first grid point and was ignored; ``fallback`` records that the
    tolerance rule found no local minimum and fell back to the argmax.
    """

    k_tilde: int
    rule: str
    tolerance: float = 0.01
    discarded_first_point: bool = False
    fallback: bool = False
    method: str = ""


def eigenvalue_ratio_curve(spectral: SpectralModel, literal: bool = False) -> HeuristicCurve:
    """Consecutive eigenvalue ratios over the ascending spectrum.

    value(m) = lambda_{m+1} / lambda_m for m in 1..d-1, so the argmax sits
    at the split with the largest upward jump and m counts the low-variance
    axes below it. ``literal`` computes lambda_m / lambda_{m+1} instead,
    which rewards the smallest jump; it exists only for side-by-side
    comparison of the two readings of the ratio formula.
    """
    lam = spectral.eigenvalues
    if lam.size < 2:
        raise ValueError("ratio curve needs d >= 2")
    if np.any(lam == 0.0):
        raise DegenerateSpectrum("zero eigenvalue in spectrum; refit with shrinkage")
    if literal:
        values = lam[:-1] / lam[1:]
    else:
        values = lam[1:] / lam[:-1]
    return HeuristicCurve(
        method="eigen_ratio",
        ks=np.arange(1, lam.size),
        values=values,
        meta={"literal": bool(literal)},
    )


def kolmogorov_tail(t: float) -> float:
    """Q(t) = 2 sum_{j>=1} (-1)^(j-1) exp(-2 j^2 t^2), the asymptotic
    two-sided K-S p-value at statistic t.

    The series is truncated at the first term below 1e-12. Below t = 0.05
    the value is 1 to double precision, which also caps the term count.
    """
    if t < 0.05:
        return 1.0
    total = 0.0
    sign = 1.0
    for j in range(1, 100000):
        term = math.exp(-2.0 * j * j * t * t)
        if term < KOLMOGOROV_TERM_FLOOR:
            break
        total += sign * term
        sign = -sign
    return min(1.0, max(0.0, 2.0 * total))


def ks_statistic(sample: Sequence[float]) -> float:
    """Exact sup-distance between the sample ECDF and the standard normal.

    D_n = max_i max(i/n - Phi(x_(i)), Phi(x_(i)) - (i-1)/n) over the sorted
    order statistics, which is where the sup of |F_n - Phi| is attained.
    """
    x = np.asarray(sample, dtype=np.float64).reshape(-1)
    n = x.size
    if n < 2:
        raise TooFewSamples(f"K-S test needs n >= 2, got {n}")
    if not np.all(np.isfinite(x)):
        raise ValueError("sample contains non-finite values")
    cdf = ndtr(np.sort(x))
    i = np.arange(1, n + 1)
    d_plus = np.max(i / n - cdf)
    d_minus = np.max(cdf - (i - 1) / n)
    return float(max(d_plus, d_minus))


def ks_pvalue(sample: Sequence[float], stephens: bool = False) -> float:
    """Two-sided one-sample K-S p-value against the standard normal.

    Mean and variance are treated as known (0 and 1), which is the right
    setting for whitened columns: the transform already standardized them,
    so estimating the parameters again would bias D_n low.

    ``stephens`` applies the finite-n factor (sqrt(n) + 0.12 + 0.11/sqrt(n))
    instead of sqrt(n); useful below roughly n = 60.
    """
    x = np.asarray(sample, dtype=np.float64).reshape(-1)
    d_n = ks_statistic(x)
    n = x.size
    scale = math.sqrt(n) + 0.12 + 0.11 / math.sqrt(n) if stephens else math.sqrt(n)
    return kolmogorov_tail(scale * d_n)


def normality_curve(w_train: WhitenedMatrix, stephens: bool = False,
                    meta: dict | None = None) -> HeuristicCurve:
    """Running mean of per-axis normality p-values: P_k = (1/k) sum p_i.

    One K-S test per whitened axis, then an O(d) cumulative mean, so the
    whole curve costs d tests regardless of how many k are inspected.
    """
    if w_train.n < 2:
        raise TooFewSamples(f"normality curve needs n >= 2, got {w_train.n}")
    pvals = np.array([
        ks_pvalue(w_train.data[:, i], stephens=stephens) for i in range(w_train.d)
    ])
    running = np.cumsum(pvals) / np.arange(1, w_train.d + 1)
    return HeuristicCurve(
        method="normality",
        ks=np.arange(1, w_train.d + 1),
        values=running,
        meta=dict(meta or {}),
    )


def relative_distance_curve(
    w_normal: WhitenedMatrix,
    w_synth: WhitenedMatrix,
    pairing: Iterable[tuple[str, str]] | None = None,
    meta: dict | None = None,
) -> HeuristicCurve:
    """R_k: summed per-pair score ratios between synthetic and normal rows.

    For each k, both matrices get mean-square scores over the first k axes;
    pair j contributes r_j = s_Aj / s_Nj and the curve value is the sum over
    pairs. ``pairing`` maps normal image ids to synthetic image ids; without
    it rows pair by position.

    Denominators are guarded as s_N + eps with eps = 1e-12 * median(s_N)
    per k; a normal score actually at or below eps means the pair sits at
    the training mean and the ratio is meaningless, which raises
    ZeroNormalScore rather than returning an arbitrary number.
    """
    perm = pairing_permutation(pairing, w_normal.image_ids, w_synth.image_ids)
    s_n = mean_sq_all_k(w_normal)
    s_a = mean_sq_all_k(w_synth)[perm]
    eps = 1e-12 * np.median(s_n, axis=0)
    degenerate = (s_n == 0.0) | (s_n < eps)
    if degenerate.any():
        j, k = np.argwhere(degenerate)[0]
        raise ZeroNormalScore(
            f"normal score {s_n[j, k]!r} for pair {j} at k={k + 1} is "
            "indistinguishable from zero"
        )
    ratios = s_a / (s_n + eps)
    return HeuristicCurve(
        method="relative_distance",
        ks=np.arange(1, w_normal.d + 1),
        values=ratios.sum(axis=0),
        meta=dict(meta or {}),
    )


def differential_curve(c: HeuristicCurve) -> HeuristicCurve:
    """Forward differences of a curve on the same grid.

    The first grid point keeps the original value c(first), so a cumulative
    sum of the differential reconstructs the curve exactly.
    """
    if len(c) < 2:
        raise ValueError("differential needs at least 2 grid points")
    values = np.empty_like(c.values)
    values[0] = c.values[0]
    values[1:] = np.diff(c.values)
    meta = dict(c.meta)
    meta["differential_of"] = c.method
    return HeuristicCurve(method="differential", ks=c.ks, values=values, meta=meta)


def select_k_argmax(c: HeuristicCurve) -> Selection:
    """Smallest grid point attaining the curve maximum."""
    idx = int(np.argmax(c.values))
    return Selection(
        k_tilde=int(c.ks[idx]),
        rule="argmax",
        tolerance=0.0,
        method=c.method,
    )


def _first_local_min(values: np.ndarray) -> int | None:
    """Index of the first local minimum, scanning left to right.

    The first grid point never qualifies (a maximum there is a boundary
    artifact, and so is a minimum). Interior points need value <= both
    neighbors; the last point qualifies one-sided.
    """
    n = values.size
    for i in range(1, n):
        left_ok = values[i] <= values[i - 1]
        right_ok = i == n - 1 or values[i] <= values[i + 1]
        if left_ok and right_ok:
            return i
    return None


def select_k_tolerance(c: HeuristicCurve, tol: float = 0.01) -> Selection:
    """The tolerance selection rule.

    1. A global maximum at the first grid point is a boundary artifact and
       is discarded (flagged on the result).
    2. Find m0, the first local minimum.
    3. tau = (1 - tol) * max of the curve at grid points >= m0.
    4. Pick the minimal k >= m0 with value >= tau.

    A curve with no local minimum (monotone rise) falls back to the plain
    argmax over the full grid, flagged via ``fallback``.
    """
    if len(c) < 3:
        raise ValueError("tolerance rule needs at least 3 grid points")
    if not 0.0 <= tol < 1.0:
        raise ValueError(f"tolerance must be in [0, 1), got {tol}")
    values = c.values
    discarded = int(np.argmax(values)) == 0

    m0 = _first_local_min(values)
    if m0 is None:
        sel = select_k_argmax(c)
        return Selection(
            k_tilde=sel.k_tilde,
            rule="argmax",
            tolerance=tol,
            discarded_first_point=discarded,
            fallback=True,
            method=c.method,
        )

    tail = values[m0:]
    tau = (1.0 - tol) * float(np.max(tail))
    qualifying = np.flatnonzero(tail >= tau)
    # A negative maximum puts tau above it; fall back to the tail argmax.
    pick = int(qualifying[0]) if qualifying.size else int(np.argmax(tail))
    return Selection(
        k_tilde=int(c.ks[m0 + pick]),
        rule="tolerance",
        tolerance=tol,
        discarded_first_point=discarded,
        method=c.method,
    )


# ---------------------------------------------------------------------------
# Export


def curve_to_dict(c: HeuristicCurve) -> dict:
    return {
        "method": c.method,
        "ks": c.ks.tolist(),
        "values": c.values.tolist(),
        "meta": dict(c.meta),
    }


def curve_from_dict(doc: dict) -> HeuristicCurve:
    return HeuristicCurve(
        method=doc["method"],
        ks=np.asarray(doc["ks"]),
        values=np.asarray(doc["values"]),
        meta=dict(doc.get("meta") or {}),
    )


def write_curve_csv(c: HeuristicCurve, path: Path | str) -> None:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["method", "k", "value"])
            for k, v in zip(c.ks, c.values):
                writer.writerow([c.method, int(k), repr(float(v))])
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


def selection_to_dict(sel: Selection) -> dict:
    return {
        "k_tilde": sel.k_tilde,
        "rule": sel.rule,
        "tolerance": sel.tolerance,
        "discarded_first_point": sel.discarded_first_point,
        "fallback": sel.fallback,
        "method": sel.method,
    }
