"""Synthetic anomaly images: Perlin-masked foreign-texture blends.

For every normal image of one category, a smooth gradient-noise field is
thresholded into a blob mask covering roughly a fifth of the image, and a
texture patch taken from a *different* category is blended in under that
mask. Opacity 0 reproduces the source image pixel for pixel; everything
is driven by one counter-based RNG, so a fixed seed reproduces the exact
same masks, texture choices, and output bytes.

Outputs land in ``<out_root>/<category>/synthetic/`` with unchanged
filenames, plus a ``pairing.json`` mapping each normal id to its
synthetic partner.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from adnpca.featstore import atomic_write_text

from .dataset import list_categories, list_images
from .errors import InvalidJob, UnreadableImage

#: Fraction of pixels the anomaly mask covers.
MASK_AREA = 0.2

#: Lattice sizes the mask noise picks from, per image.
MASK_CELL_CHOICES = (2, 4, 8)

RNG_ALGORITHM = "Philox4x64-10"


@dataclass(frozen=True)
class SynthesisJob:
    """Which normals to corrupt and how strongly.

    ``split`` names the normal images used as bases; the held-out normal
    split is the default so the written pairing block lines up with the
    paired heuristic's inputs downstream.
    """

    root: Path
    category: str
    out_root: Path
    split: str = "test_normal"
    seed: int = 0
    opacity: float = 0.7

    def __post_init__(self):
        object.__setattr__(self, "root", Path(self.root))
        object.__setattr__(self, "out_root", Path(self.out_root))
        if self.split not in ("train", "test_normal"):
            raise InvalidJob(
                f"synthesis bases must be normal images, got split {self.split!r}"
            )
        if not 0.0 <= self.opacity <= 1.0:
            raise InvalidJob(f"opacity must be in [0, 1], got {self.opacity}")


def _fade(t: np.ndarray) -> np.ndarray:
    return t * t * t * (t * (t * 6.0 - 15.0) + 10.0)


def perlin_noise(shape: tuple[int, int], cells: int, rng: np.random.Generator) -> np.ndarray:
    """Classic gradient noise over a cells-by-cells lattice, in about [-1, 1]."""
    h, w = shape
    angles = rng.uniform(0.0, 2.0 * np.pi, size=(cells + 1, cells + 1))
    grad = np.stack([np.cos(angles), np.sin(angles)], axis=-1)

    ys = np.linspace(0.0, cells, h, endpoint=False)
    xs = np.linspace(0.0, cells, w, endpoint=False)
    gy, gx = np.meshgrid(ys, xs, indexing="ij")
    y0 = gy.astype(int)
    x0 = gx.astype(int)
    yf = gy - y0
    xf = gx - x0

    def corner(dy: int, dx: int) -> np.ndarray:
        g = grad[y0 + dy, x0 + dx]
        return g[..., 0] * (yf - dy) + g[..., 1] * (xf - dx)

    u = _fade(yf)
    v = _fade(xf)
    top = corner(0, 0) * (1.0 - v) + corner(0, 1) * v
    bottom = corner(1, 0) * (1.0 - v) + corner(1, 1) * v
    return top * (1.0 - u) + bottom * u


def anomaly_mask(shape: tuple[int, int], rng: np.random.Generator) -> np.ndarray:
    """Boolean blob mask covering about MASK_AREA of the image."""
    cells = int(rng.choice(MASK_CELL_CHOICES))
    noise = perlin_noise(shape, cells, rng)
    return noise >= np.quantile(noise, 1.0 - MASK_AREA)


def _load_rgb(path: Path) -> np.ndarray:
    try:
        with Image.open(path) as im:
            return np.asarray(im.convert("RGB"), dtype=np.uint8)
    except (OSError, SyntaxError, ValueError) as exc:
        raise UnreadableImage(f"cannot decode {path}: {exc}") from exc


def blend(normal: np.ndarray, foreign: np.ndarray, mask: np.ndarray, opacity: float) -> np.ndarray:
    """normal + opacity*mask*(foreign - normal), rounded back to uint8.

    At opacity 0 the arithmetic is exact, so the result equals ``normal``.
    """
    weight = opacity * mask[..., None].astype(np.float64)
    out = normal.astype(np.float64) + weight * (
        foreign.astype(np.float64) - normal.astype(np.float64)
    )
    return np.clip(np.rint(out), 0, 255).astype(np.uint8)


def _foreign_pool(job: SynthesisJob) -> list[Path]:
    """Texture source images: training normals of every other category."""
    pool: list[Path] = []
    for other in list_categories(job.root):
        if other == job.category:
            continue
        try:
            pool += [path for _, path in list_images(job.root, other, "train")]
        except InvalidJob:
            continue
    if not pool:
        raise InvalidJob(
            f"no foreign texture images: {job.root} has no other category "
            "with training images"
        )
    return pool


def synthesize_anomalies(job: SynthesisJob) -> list[tuple[str, str]]:
    """Write one synthetic anomaly per normal image; return the pairing.

    The pairing is a list of (normal id, synthetic id) tuples, also written
    to ``<out_root>/<category>/pairing.json``.
    """
    normals = list_images(job.root, job.category, job.split)
    pool = _foreign_pool(job)
    rng = np.random.Generator(np.random.Philox(job.seed))

    out_dir = job.out_root / job.category / "synthetic"
    out_dir.mkdir(parents=True, exist_ok=True)

    pairs: list[tuple[str, str]] = []
    for image_id, path in normals:
        base = _load_rgb(path)
        foreign_path = pool[int(rng.integers(len(pool)))]
        foreign = _load_rgb(foreign_path)
        if foreign.shape != base.shape:
            with Image.fromarray(foreign) as im:
                foreign = np.asarray(
                    im.resize((base.shape[1], base.shape[0]), Image.BILINEAR),
                    dtype=np.uint8,
                )
        mask = anomaly_mask(base.shape[:2], rng)
        out = blend(base, foreign, mask, job.opacity)
        Image.fromarray(out).save(out_dir / Path(image_id).name)
        pairs.append((image_id, Path(image_id).name))

    doc = {
        "category": job.category,
        "source_split": job.split,
        "seed": job.seed,
        "opacity": job.opacity,
        "rng": RNG_ALGORITHM,
        "pairs": [list(p) for p in pairs],
    }
    atomic_write_text(job.out_root / job.category / "pairing.json", json.dumps(doc, indent=1) + "\n")
    return pairs


def load_pairing(path: Path | str) -> list[tuple[str, str]]:
    """Read a pairing.json back into (normal id, synthetic id) tuples."""
    doc = json.loads(Path(path).read_text())
    return [(str(a), str(b)) for a, b in doc["pairs"]]
