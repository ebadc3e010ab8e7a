"""Shared fixtures: a tiny two-category image dataset and one backbone.

The backbone uses reproducible random weights; stage dimensionality and
file-format conformance do not depend on the checkpoint, and tests must
run offline. Images are small (64 px) to keep inference fast.
"""

from __future__ import annotations

import pytest

pytest.importorskip("torch")
pytest.importorskip("torchvision")
pytest.importorskip("PIL")

import numpy as np

from imghelp import write_images


@pytest.fixture(scope="session")
def dataset_root(tmp_path_factory):
    """Layout: gears with train/test splits, cloth as the foreign-texture
    source category."""
    root = tmp_path_factory.mktemp("images")
    rng = np.random.Generator(np.random.Philox(99))

    gears = root / "gears"
    write_images(gears / "train" / "good", 10, rng, (200, 120, 40))
    write_images(gears / "test" / "good", 3, rng, (200, 120, 40))
    write_images(gears / "test" / "scratch", 2, rng, (150, 150, 150))
    write_images(gears / "test" / "dent", 2, rng, (150, 150, 150))
    (gears / "train" / "good" / "notes.txt").write_text("not an image\n")

    cloth = root / "cloth"
    write_images(cloth / "train" / "good", 3, rng, (40, 80, 220))
    return root


@pytest.fixture(scope="session")
def backbone():
    from adnpca_extractor.backbone import StageFeatureExtractor

    return StageFeatureExtractor(weights="none", device="cpu")
