"""Synthetic Gaussian benchmarks with a planted low-variance anomaly subspace.

Normal data is drawn from a zero-mean Gaussian whose ascending spectrum is
k_true ones followed by a single jump of factor ``gap`` and a mild geometric
ramp (factor 1.1) above it, so exactly one spectral gap exists and its
position is known. Anomalies are normal draws displaced by ``offset`` along
a random direction inside the k_true lowest-variance axes: invisible to the
high-variance subspace, maximally visible to the retained one. A paired
pseudo-anomalous copy of the normal test set provides ground truth for the
relative-distance heuristic.

Everything is driven by one counter-based RNG stream (Philox) in a fixed
draw order, so a given spec reproduces bit-identical matrices anywhere.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import InvalidSpec
from .featstore import DatasetManifest, FeatureMatrix, ManifestEntry, save_manifest, write_feature_matrix

RNG_ALGORITHM = "Philox4x64-10"

#: Geometric ramp factor for eigenvalues above the gap; a flat upper block
#: would create spurious near-1 ratios competing with the planted gap.
NOISE_RAMP = 1.1


@dataclass(frozen=True)
class BenchmarkSpec:
    seed: int
    n_train: int = 400
    n_test: int = 100
    d: int = 32
    k_true: int = 8
    gap: float = 10.0
    offset: float = 4.0
    rotate: bool = False
    fixed_direction: bool = False

    def __post_init__(self):
        if not 1 <= self.k_true < self.d:
            raise InvalidSpec(f"k_true must be in 1..d-1, got {self.k_true} with d={self.d}")
        if self.gap <= 1.0:
            raise InvalidSpec(f"gap must exceed 1, got {self.gap}")
        if self.offset < 0.0:
            raise InvalidSpec(f"offset must be nonnegative, got {self.offset}")
        if self.n_train < 2:
            raise InvalidSpec(f"n_train must be at least 2, got {self.n_train}")
        if self.n_test < 1:
            raise InvalidSpec(f"n_test must be at least 1, got {self.n_test}")


@dataclass(frozen=True)
class Benchmark:
    spec: BenchmarkSpec
    train: FeatureMatrix
    test_normal: FeatureMatrix
    test_anom: FeatureMatrix
    synth_paired: FeatureMatrix
    pairing: tuple[tuple[str, str], ...]
    truth: dict


def planted_spectrum(spec: BenchmarkSpec) -> np.ndarray:
    """Ascending eigenvalues: k_true ones, then gap * 1.1^j."""
    ramp = spec.gap * NOISE_RAMP ** np.arange(spec.d - spec.k_true)
    return np.concatenate([np.ones(spec.k_true), ramp])


def _random_orthogonal(rng: np.random.Generator, d: int) -> np.ndarray:
    """Haar-ish orthogonal matrix via QR with positive diagonal."""
    q, r = np.linalg.qr(rng.standard_normal((d, d)))
    return q * np.sign(np.diagonal(r))


def _subspace_directions(
    rng: np.random.Generator, n: int, spec: BenchmarkSpec
) -> np.ndarray:
    """n unit vectors in the k_true-dimensional planted subspace."""
    if spec.fixed_direction:
        u = np.zeros((n, spec.k_true))
        u[:, 0] = 1.0
        return u
    g = rng.standard_normal((n, spec.k_true))
    return g / np.linalg.norm(g, axis=1, keepdims=True)


def generate_benchmark(spec: BenchmarkSpec) -> Benchmark:
    """Draw the four matrices and the ground-truth block for one spec.

    Draw order is part of the contract (basis, train, test normal, anomaly
    bases, anomaly directions, paired directions): reordering would silently
    change every seed's output.
    """
    lam = planted_spectrum(spec)
    rng = np.random.Generator(np.random.Philox(spec.seed))

    basis = _random_orthogonal(rng, spec.d) if spec.rotate else np.eye(spec.d)
    scale = np.sqrt(lam)

    def draw(n: int) -> np.ndarray:
        return rng.standard_normal((n, spec.d)) * scale @ basis.T

    train = draw(spec.n_train)
    test_normal = draw(spec.n_test)
    anom_base = draw(spec.n_test)

    # Displacements live in the span of the k_true smallest-variance axes,
    # where lambda = 1, so `offset` is both physical and whitened magnitude.
    planted_axes = basis[:, : spec.k_true]
    anom_dirs = _subspace_directions(rng, spec.n_test, spec)
    synth_dirs = _subspace_directions(rng, spec.n_test, spec)
    test_anom = anom_base + spec.offset * anom_dirs @ planted_axes.T
    synth = test_normal + spec.offset * synth_dirs @ planted_axes.T

    normal_ids = tuple(f"normal{i:06d}" for i in range(spec.n_test))
    synth_ids = tuple(f"synth{i:06d}" for i in range(spec.n_test))
    pairing = tuple(zip(normal_ids, synth_ids))

    truth = {
        "k_true": spec.k_true,
        "spectrum": lam.tolist(),
        "seed": spec.seed,
        "rng": RNG_ALGORITHM,
        "d": spec.d,
        "n_train": spec.n_train,
        "n_test": spec.n_test,
        "gap": spec.gap,
        "offset": spec.offset,
        "rotate": spec.rotate,
        "fixed_direction": spec.fixed_direction,
    }

    def mat(data, split, ids=()):
        return FeatureMatrix(
            data=data, category="planted", stage=0, split=split, image_ids=ids
        )

    return Benchmark(
        spec=spec,
        train=mat(train, "train", tuple(f"train{i:06d}" for i in range(spec.n_train))),
        test_normal=mat(test_normal, "test_normal", normal_ids),
        test_anom=mat(
            test_anom,
            "test_anomalous",
            tuple(f"anom{i:06d}" for i in range(spec.n_test)),
        ),
        synth_paired=mat(synth, "synthetic", synth_ids),
        pairing=pairing,
        truth=truth,
    )


SPLIT_FILES = {
    "train": "train.featmat",
    "test_normal": "test_normal.featmat",
    "test_anomalous": "test_anomalous.featmat",
    "synthetic": "synthetic.featmat",
}


def write_benchmark(bench: Benchmark, out_dir: Path | str) -> DatasetManifest:
    """Write the four feature files plus a manifest with pairing and truth."""
    out_dir = Path(out_dir)
    mats = {
        "train": bench.train,
        "test_normal": bench.test_normal,
        "test_anomalous": bench.test_anom,
        "synthetic": bench.synth_paired,
    }
    entries = []
    for split, fname in SPLIT_FILES.items():
        write_feature_matrix(mats[split], out_dir / fname)
        entries.append(ManifestEntry(stage=0, path=fname, split=split))
    manifest = DatasetManifest(
        category="planted",
        stages=entries,
        pairing=list(bench.pairing),
        truth=bench.truth,
        base_dir=out_dir,
    )
    save_manifest(manifest, out_dir / "manifest.json")
    return manifest
