"""Turn image folders into per-stage feature matrices.

One job covers one (category, split); it emits one FEATMAT1 file per
requested stage, named ``<split>_stage<S>.featmat``, with row order equal
to the sorted image ids and a JSON sidecar carrying the metadata. The
files are exactly what the downstream fitting and evaluation pipeline
consumes.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch

from adnpca.featstore import (
    SPLITS,
    STAGE_CHANNELS,
    DatasetManifest,
    FeatureMatrix,
    ManifestEntry,
    save_manifest,
    sidecar_path,
    write_feature_matrix,
)

from .backbone import StageFeatureExtractor, load_image_tensor
from .dataset import list_images
from .errors import InvalidJob

ALL_STAGES = tuple(range(len(STAGE_CHANNELS)))


@dataclass(frozen=True)
class ExtractionJob:
    """What to extract and where to put it.

    ``weights`` and ``device`` are passed to the backbone; ``device`` is a
    hint and falls back to cpu when unavailable.
    """

    root: Path
    category: str
    out_dir: Path
    split: str = "train"
    stages: tuple[int, ...] = ALL_STAGES
    weights: str = "imagenet"
    device: str = "cpu"
    image_size: int = 380
    batch_size: int = 8

    def __post_init__(self):
        object.__setattr__(self, "root", Path(self.root))
        object.__setattr__(self, "out_dir", Path(self.out_dir))
        object.__setattr__(self, "stages", tuple(sorted(set(int(s) for s in self.stages))))
        if self.split not in SPLITS:
            raise InvalidJob(f"split must be one of {SPLITS}, got {self.split!r}")
        if not self.stages:
            raise InvalidJob("at least one stage is required")
        bad = [s for s in self.stages if not 0 <= s < len(STAGE_CHANNELS)]
        if bad:
            raise InvalidJob(f"stages outside 0..{len(STAGE_CHANNELS) - 1}: {bad}")
        if self.image_size < 32:
            raise InvalidJob(f"image_size must be at least 32, got {self.image_size}")
        if self.batch_size < 1:
            raise InvalidJob(f"batch_size must be positive, got {self.batch_size}")


def feature_filename(split: str, stage: int) -> str:
    return f"{split}_stage{stage}.featmat"


def extract_features(
    job: ExtractionJob, extractor: StageFeatureExtractor | None = None
) -> dict[int, Path]:
    """Run the backbone over one split and write one file per stage.

    Returns {stage: written path}. An existing extractor may be passed in
    to share one backbone across several jobs.
    """
    images = list_images(job.root, job.category, job.split)
    ids = [iid for iid, _ in images]
    if extractor is None:
        extractor = StageFeatureExtractor(weights=job.weights, device=job.device)

    rows: dict[int, list] = {s: [] for s in job.stages}
    for start in range(0, len(images), job.batch_size):
        chunk = images[start : start + job.batch_size]
        batch = torch.stack(
            [load_image_tensor(path, job.image_size) for _, path in chunk]
        )
        for stage, pooled in extractor.stage_vectors(batch, job.stages).items():
            rows[stage].append(pooled)

    written: dict[int, Path] = {}
    for stage in job.stages:
        m = FeatureMatrix(
            data=np.concatenate(rows[stage], axis=0),
            category=job.category,
            stage=stage,
            split=job.split,
            image_ids=tuple(ids),
        )
        path = job.out_dir / feature_filename(job.split, stage)
        write_feature_matrix(m, path)
        written[stage] = path
    return written


def write_dataset_manifest(
    out_dir: Path | str,
    category: str,
    pairing: list[tuple[str, str]] | None = None,
) -> Path:
    """Index every feature file in ``out_dir`` into a ``manifest.json``.

    Stage and split are read from the sidecars, so the manifest stays in
    sync with whatever combination of jobs was extracted. The optional
    pairing block (normal id, synthetic id) enables the paired heuristic
    downstream.
    """
    out_dir = Path(out_dir)
    entries = []
    for path in sorted(out_dir.glob("*.featmat")):
        meta = json.loads(sidecar_path(path).read_text())
        entries.append(
            ManifestEntry(
                stage=int(meta["stage"]), path=path.name, split=str(meta["split"])
            )
        )
    if not entries:
        raise InvalidJob(f"no feature files to index under {out_dir}")
    entries.sort(key=lambda e: (e.stage, e.split))
    manifest = DatasetManifest(
        category=category, stages=entries, pairing=pairing, base_dir=out_dir
    )
    path = out_dir / "manifest.json"
    save_manifest(manifest, path)
    return path
