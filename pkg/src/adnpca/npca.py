"""Negated PCA: keep the k whitened axes of smallest variance and score there.

Standard PCA keeps the leading-variance directions; for one-class anomaly
detection the tail directions are the informative ones, because normal
training data barely moves along them while anomalies do. Since whitened
axes are already sorted by ascending eigenvalue, "negated" retention is a
plain column slice.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import IoFailure, KOutOfRange
from .gaussian import WhitenedMatrix


@dataclass(frozen=True)
class NpcaScores:
    """Per-image anomaly scores in the retained k-dimensional subspace.

    mean_sq[i] = (1/k) * sum of the first k squared whitened coordinates of
    row i; euclid[i] is the plain Euclidean norm over the same coordinates.
    Both rank images identically; euclid at k = d is the Mahalanobis
    distance. Higher = more anomalous.
    """

    k: int
    mean_sq: np.ndarray
    euclid: np.ndarray
    image_ids: tuple[str, ...] = ()

    def __post_init__(self):
        ms = np.array(self.mean_sq, dtype=np.float64).reshape(-1)
        eu = np.array(self.euclid, dtype=np.float64).reshape(-1)
        ms.flags.writeable = False
        eu.flags.writeable = False
        object.__setattr__(self, "mean_sq", ms)
        object.__setattr__(self, "euclid", eu)
        object.__setattr__(self, "image_ids", tuple(self.image_ids))


def _check_k(k: int, d: int) -> int:
    k = int(k)
    if not 1 <= k <= d:
        raise KOutOfRange(f"k={k} outside 1..{d}")
    return k


def npca_project(w: WhitenedMatrix, k: int) -> np.ndarray:
    """First k whitened columns: the k smallest-eigenvalue directions."""
    k = _check_k(k, w.d)
    return np.array(w.data[:, :k])


def npca_score(w: WhitenedMatrix, k: int) -> NpcaScores:
    k = _check_k(k, w.d)
    sq = np.square(w.data[:, :k]).sum(axis=1)
    return NpcaScores(
        k=k,
        mean_sq=sq / k,
        euclid=np.sqrt(sq),
        image_ids=w.image_ids,
    )


def mean_sq_all_k(w: WhitenedMatrix) -> np.ndarray:
    """n x d matrix whose column k-1 is the mean_sq score at dimension k.

    Built from one cumulative sum over squared coordinates, so a full
    k-sweep costs O(n*d) instead of O(n*d^2).
    """
    prefix = np.cumsum(np.square(w.data), axis=1)
    return prefix / np.arange(1, w.d + 1)


def write_scores_csv(scores: NpcaScores, path: Path | str) -> None:
    """Export one score row per image: image_id, k, mean_sq, euclid."""
    path = Path(path)
    ids = scores.image_ids or tuple(
        f"row{i}" for i in range(scores.mean_sq.size)
    )
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["image_id", "k", "mean_sq", "euclid"])
            for iid, ms, eu in zip(ids, scores.mean_sq, scores.euclid):
                writer.writerow([iid, scores.k, repr(float(ms)), repr(float(eu))])
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc
