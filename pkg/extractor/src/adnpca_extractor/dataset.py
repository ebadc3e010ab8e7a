"""Directory layout of image datasets.

Expected layout per category (the common industrial-inspection arrangement):

    <root>/<category>/train/good/*.png          training normals
    <root>/<category>/test/good/*.png           held-out normals
    <root>/<category>/test/<defect>/*.png       real anomalies, any defect dirs
    <root>/<category>/synthetic/*.png           generated anomalies (see synth)

Image ids are filenames, prefixed with the defect directory for the
anomalous test split so ids stay unique when defect types share names.
"""

from __future__ import annotations

from pathlib import Path

from adnpca.featstore import SPLITS

from .errors import InvalidJob

IMAGE_EXTENSIONS = (".png", ".jpg", ".jpeg", ".bmp", ".tif", ".tiff")


def _image_files(directory: Path) -> list[Path]:
    return [
        p
        for p in directory.iterdir()
        if p.is_file() and p.suffix.lower() in IMAGE_EXTENSIONS
    ]


def split_dir(root: Path | str, category: str, split: str) -> Path:
    """Directory holding one split's images; the anomalous test split
    returns the test directory itself (defect subdirs live beneath it)."""
    root = Path(root)
    if split == "train":
        return root / category / "train" / "good"
    if split == "test_normal":
        return root / category / "test" / "good"
    if split == "test_anomalous":
        return root / category / "test"
    if split == "synthetic":
        return root / category / "synthetic"
    raise InvalidJob(f"split must be one of {SPLITS}, got {split!r}")


def list_images(root: Path | str, category: str, split: str) -> list[tuple[str, Path]]:
    """(image_id, path) pairs for one split, sorted by id.

    Row order of every emitted feature matrix follows this ordering.
    """
    base = split_dir(root, category, split)
    if not base.is_dir():
        raise InvalidJob(f"no directory for split {split!r}: {base}")

    found: list[tuple[str, Path]] = []
    if split == "test_anomalous":
        for sub in base.iterdir():
            if not sub.is_dir() or sub.name == "good":
                continue
            found += [(f"{sub.name}/{p.name}", p) for p in _image_files(sub)]
    else:
        found = [(p.name, p) for p in _image_files(base)]

    if not found:
        raise InvalidJob(f"no images for split {split!r} under {base}")
    return sorted(found, key=lambda pair: pair[0])


def list_categories(root: Path | str) -> list[str]:
    """Category directories under the dataset root, sorted."""
    root = Path(root)
    if not root.is_dir():
        raise InvalidJob(f"dataset root is not a directory: {root}")
    return sorted(p.name for p in root.iterdir() if p.is_dir())
