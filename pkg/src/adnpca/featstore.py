"""Feature-matrix storage: FEATMAT1 binary files, CSV ingestion, manifests.

File layout of a FEATMAT1 file:

    bytes 0..7    magic b"FEATMAT1"
    bytes 8..11   n, little-endian uint32
    bytes 12..15  d, little-endian uint32
    bytes 16..    n*d float64 payload, little-endian, row-major

Metadata (category, stage, split, image ids, optional pairing) lives in a
sidecar JSON file named ``<file>.json`` next to the payload, so the binary
stays bit-exact and trivially parseable.

A CSV convenience path is accepted on read: ``#key=value`` comment lines for
metadata followed by comma-separated float rows.
"""

from __future__ import annotations

import json
import os
import struct
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    DimensionMismatch,
    IoFailure,
    MalformedFile,
    NonFiniteEntry,
    UnknownStage,
)

MAGIC = b"FEATMAT1"
HEADER_SIZE = 16  # 8-byte magic + u32 n + u32 d

SPLITS = ("train", "test_normal", "test_anomalous", "synthetic")

#: Channels emitted by each backbone stage 0..8 (EfficientNet-B4).
STAGE_CHANNELS = (48, 24, 32, 56, 112, 160, 272, 448, 1792)


def default_image_ids(n: int, prefix: str = "img") -> tuple[str, ...]:
    return tuple(f"{prefix}{i:06d}" for i in range(n))


@dataclass(frozen=True)
class FeatureMatrix:
    """An n-by-d block of per-image feature vectors plus dataset metadata.

    ``data`` is coerced to a read-only float64 array, so instances are safe
    to share between threads. Every entry must be finite.
    """

    data: np.ndarray
    category: str = "unknown"
    stage: int = 0
    split: str = "train"
    image_ids: tuple[str, ...] = ()

    def __post_init__(self):
        arr = np.array(self.data, dtype=np.float64, order="C")
        if arr.ndim != 2:
            raise DimensionMismatch(f"feature matrix must be 2-D, got shape {arr.shape}")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise DimensionMismatch(f"feature matrix must be at least 1x1, got {arr.shape}")
        bad = ~np.isfinite(arr)
        if bad.any():
            r, c = np.argwhere(bad)[0]
            raise NonFiniteEntry(int(r), int(c), float(arr[r, c]))
        if self.split not in SPLITS:
            raise ValueError(f"split must be one of {SPLITS}, got {self.split!r}")
        ids = tuple(self.image_ids) or default_image_ids(arr.shape[0])
        if len(ids) != arr.shape[0]:
            raise DimensionMismatch(
                f"{len(ids)} image ids for {arr.shape[0]} rows"
            )
        arr.flags.writeable = False
        object.__setattr__(self, "data", arr)
        object.__setattr__(self, "image_ids", ids)

    @property
    def n(self) -> int:
        return self.data.shape[0]

    @property
    def d(self) -> int:
        return self.data.shape[1]


def sidecar_path(path: Path | str) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".json")


def atomic_write_bytes(path: Path, payload: bytes) -> None:
    """Write-temp-then-rename so concurrent readers never see a torn file."""
    fd, tmp = tempfile.mkstemp(dir=str(path.parent), prefix=path.name + ".")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(payload)
        os.replace(tmp, path)
    except OSError:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_text(path: Path, text: str) -> None:
    atomic_write_bytes(path, text.encode("utf-8"))


def write_feature_matrix(m: FeatureMatrix, path: Path | str) -> None:
    """Serialize ``m`` to FEATMAT1 at ``path`` plus a JSON sidecar.

    Values are stored as little-endian 64-bit floats, so a subsequent
    :func:`read_feature_matrix` reproduces them bit-exactly.
    """
    path = Path(path)
    header = MAGIC + struct.pack("<II", m.n, m.d)
    payload = np.ascontiguousarray(m.data, dtype="<f8").tobytes()
    meta = {
        "category": m.category,
        "stage": m.stage,
        "split": m.split,
        "image_ids": list(m.image_ids),
    }
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        atomic_write_bytes(path, header + payload)
        atomic_write_text(sidecar_path(path), json.dumps(meta, indent=1) + "\n")
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


def read_feature_matrix(path: Path | str) -> FeatureMatrix:
    """Load a FEATMAT1 (or conforming CSV) file into a FeatureMatrix."""
    path = Path(path)
    try:
        blob = path.read_bytes()
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc

    if blob[:len(MAGIC)] == MAGIC:
        return _parse_binary(blob, path)
    return _parse_csv(blob, path)


def _parse_binary(blob: bytes, path: Path) -> FeatureMatrix:
    if len(blob) < HEADER_SIZE:
        raise MalformedFile(f"{path}: truncated header ({len(blob)} bytes)")
    n, d = struct.unpack_from("<II", blob, len(MAGIC))
    payload = blob[HEADER_SIZE:]
    if len(payload) != n * d * 8:
        raise DimensionMismatch(
            f"{path}: header says {n}x{d} ({n * d * 8} payload bytes), "
            f"found {len(payload)}"
        )
    if n < 1 or d < 1:
        raise MalformedFile(f"{path}: empty matrix ({n}x{d})")
    data = np.frombuffer(payload, dtype="<f8").reshape(n, d)
    meta = _read_sidecar(path)
    return FeatureMatrix(
        data=data.astype(np.float64),
        category=meta.get("category", "unknown"),
        stage=int(meta.get("stage", 0)),
        split=meta.get("split", "train"),
        image_ids=tuple(meta.get("image_ids") or ()),
    )


def _read_sidecar(path: Path) -> dict:
    sp = sidecar_path(path)
    if not sp.exists():
        return {}
    try:
        return json.loads(sp.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise MalformedFile(f"{sp}: bad sidecar: {exc}") from exc


def _parse_csv(blob: bytes, path: Path) -> FeatureMatrix:
    try:
        text = blob.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise MalformedFile(f"{path}: neither FEATMAT1 nor text") from exc
    meta: dict[str, str] = {}
    rows: list[list[float]] = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line:
            continue
        if line.startswith("#"):
            key, sep, value = line[1:].partition("=")
            if sep:
                meta[key.strip()] = value.strip()
            continue
        try:
            values = [float(tok) for tok in line.split(",")]
        except ValueError as exc:
            raise MalformedFile(f"{path}:{lineno}: bad CSV row: {exc}") from exc
        rows.append(values)
    if not rows:
        raise MalformedFile(f"{path}: no data rows")
    widths = {len(r) for r in rows}
    if len(widths) != 1:
        raise DimensionMismatch(f"{path}: ragged CSV rows, widths {sorted(widths)}")
    ids = tuple(v for v in meta.get("image_ids", "").split(";") if v)
    return FeatureMatrix(
        data=np.array(rows, dtype=np.float64),
        category=meta.get("category", "unknown"),
        stage=int(meta.get("stage", "0")),
        split=meta.get("split", "train"),
        image_ids=ids,
    )


def validate_stage_dims(m: FeatureMatrix) -> bool:
    """True iff ``m.d`` matches the backbone channel count for ``m.stage``.

    This is a conformance check for real extracted features; synthetic
    benchmarks use arbitrary d and simply get False.
    """
    if not 0 <= m.stage <= 8:
        raise UnknownStage(f"stage {m.stage} outside 0..8")
    return m.d == STAGE_CHANNELS[m.stage]


# ---------------------------------------------------------------------------
# Dataset manifests


@dataclass(frozen=True)
class ManifestEntry:
    stage: int
    path: str
    split: str


@dataclass
class DatasetManifest:
    """Index of feature files for one category, plus the optional pairing
    between a normal split and a synthetic split (used by the relative
    distance heuristic) and an optional ground-truth block from the
    benchmark generator."""

    category: str
    stages: list[ManifestEntry] = field(default_factory=list)
    pairing: list[tuple[str, str]] | None = None
    truth: dict | None = None
    base_dir: Path = Path(".")

    def entries(self, stage: int | None = None, split: str | None = None) -> list[ManifestEntry]:
        out = []
        for e in self.stages:
            if stage is not None and e.stage != stage:
                continue
            if split is not None and e.split != split:
                continue
            out.append(e)
        return out

    def resolve(self, entry: ManifestEntry) -> Path:
        p = Path(entry.path)
        return p if p.is_absolute() else self.base_dir / p

    def load(self, stage: int, split: str) -> FeatureMatrix:
        found = self.entries(stage=stage, split=split)
        if not found:
            raise IoFailure(
                f"manifest for {self.category!r} has no entry for "
                f"stage={stage} split={split!r}"
            )
        return read_feature_matrix(self.resolve(found[0]))

    def stage_ids(self) -> list[int]:
        return sorted({e.stage for e in self.stages})


def save_manifest(manifest: DatasetManifest, path: Path | str) -> None:
    path = Path(path)
    doc = {
        "category": manifest.category,
        "stages": [
            {"stage": e.stage, "path": e.path, "split": e.split}
            for e in manifest.stages
        ],
    }
    if manifest.pairing is not None:
        doc["pairing"] = [list(p) for p in manifest.pairing]
    if manifest.truth is not None:
        doc["truth"] = manifest.truth
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        atomic_write_text(path, json.dumps(doc, indent=1) + "\n")
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


def load_manifest(path: Path | str, validate: bool = True) -> DatasetManifest:
    """Parse a dataset manifest; with ``validate`` every referenced feature
    file must exist and parse."""
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise MalformedFile(f"{path}: bad manifest JSON: {exc}") from exc
    try:
        stages = [
            ManifestEntry(stage=int(e["stage"]), path=str(e["path"]), split=str(e["split"]))
            for e in doc["stages"]
        ]
        manifest = DatasetManifest(
            category=str(doc["category"]),
            stages=stages,
            pairing=[tuple(p) for p in doc["pairing"]] if doc.get("pairing") else None,
            truth=doc.get("truth"),
            base_dir=path.parent,
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise MalformedFile(f"{path}: bad manifest structure: {exc}") from exc
    if manifest.pairing is not None:
        _check_pairing_shape(manifest.pairing, path)
    if validate:
        for e in manifest.stages:
            read_feature_matrix(manifest.resolve(e))
    return manifest


def _check_pairing_shape(pairing: Sequence[tuple[str, str]], path: Path) -> None:
    lhs = [a for a, _ in pairing]
    rhs = [b for _, b in pairing]
    if len(set(lhs)) != len(lhs) or len(set(rhs)) != len(rhs):
        raise MalformedFile(f"{path}: pairing is not a bijection (duplicate ids)")


def pairing_permutation(
    pairing: Iterable[tuple[str, str]] | None,
    normal_ids: Sequence[str],
    synth_ids: Sequence[str],
) -> np.ndarray:
    """Return ``perm`` such that synth row ``perm[j]`` is the partner of
    normal row ``j``. With no explicit pairing, rows pair up by position."""
    from .errors import PairingMismatch

    if len(normal_ids) != len(synth_ids):
        raise PairingMismatch(
            f"normal split has {len(normal_ids)} rows, synthetic {len(synth_ids)}"
        )
    if pairing is None:
        return np.arange(len(normal_ids))
    pairs = list(pairing)
    if len(pairs) != len(normal_ids):
        raise PairingMismatch(
            f"pairing covers {len(pairs)} of {len(normal_ids)} rows"
        )
    n_index = {iid: i for i, iid in enumerate(normal_ids)}
    s_index = {iid: i for i, iid in enumerate(synth_ids)}
    perm = np.full(len(normal_ids), -1)
    for a, b in pairs:
        if a not in n_index:
            raise PairingMismatch(f"pairing references unknown normal id {a!r}")
        if b not in s_index:
            raise PairingMismatch(f"pairing references unknown synthetic id {b!r}")
        if perm[n_index[a]] != -1:
            raise PairingMismatch(f"normal id {a!r} paired twice")
        perm[n_index[a]] = s_index[b]
    if sorted(perm.tolist()) != list(range(len(normal_ids))):
        raise PairingMismatch("pairing is not a bijection")
    return perm
