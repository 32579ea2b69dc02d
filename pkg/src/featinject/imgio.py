"""Dataset ingestion.

Image decoding, grayscale conversion, EuroSAT-layout directory scanning,
and deterministic stratified train/test splits.  The expected dataset
layout is ``<root>/<ClassName>/<file>.{jpg,png}``.
"""

from __future__ import annotations

import io
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import DecodeError, IngestionError, SplitError

IMAGE_SUFFIXES = {".jpg", ".jpeg", ".png"}

# Counter-based generator used for every seeded shuffle in the toolkit;
# the name is recorded in split manifests for reproducibility.
SPLIT_GENERATOR = "philox4x64"


@dataclass(frozen=True)
class ImageRGB:
    """8-bit RGB raster stored as a row-major (height, width, 3) array."""

    pixels: np.ndarray

    def __post_init__(self):
        p = self.pixels
        if not isinstance(p, np.ndarray) or p.ndim != 3 or p.shape[2] != 3:
            raise ValueError("ImageRGB requires a (height, width, 3) array")
        if p.dtype != np.uint8:
            raise ValueError("ImageRGB requires uint8 samples")
        if p.shape[0] < 1 or p.shape[1] < 1:
            raise ValueError("ImageRGB must be non-empty")

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]


@dataclass(frozen=True)
class ImageGray:
    """8-bit single-channel raster stored as a row-major (height, width) array."""

    pixels: np.ndarray

    def __post_init__(self):
        p = self.pixels
        if not isinstance(p, np.ndarray) or p.ndim != 2:
            raise ValueError("ImageGray requires a (height, width) array")
        if p.dtype != np.uint8:
            raise ValueError("ImageGray requires uint8 samples")
        if p.shape[0] < 1 or p.shape[1] < 1:
            raise ValueError("ImageGray must be non-empty")

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]


@dataclass
class DatasetManifest:
    """Scanned dataset: sorted class names and one (id, class index) record per image.

    Image ids are paths relative to ``root`` with forward-slash separators,
    unique and sorted.  ``skipped`` counts non-image files that were ignored
    during the scan.
    """

    root: Path
    classes: list[str]
    records: list[tuple[str, int]]
    skipped: int = 0

    def ids(self) -> list[str]:
        return [rec_id for rec_id, _ in self.records]

    def labels(self) -> dict[str, int]:
        return dict(self.records)


@dataclass
class SplitManifest:
    """Deterministic train/test partition of a dataset manifest."""

    seed: int
    train_ratio: float
    train_ids: list[str]
    test_ids: list[str]
    generator: str = SPLIT_GENERATOR

    def to_json(self) -> str:
        return json.dumps(
            {
                "seed": self.seed,
                "train_ratio": self.train_ratio,
                "generator": self.generator,
                "train": self.train_ids,
                "test": self.test_ids,
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "SplitManifest":
        obj = json.loads(text)
        return cls(
            seed=obj["seed"],
            train_ratio=obj["train_ratio"],
            train_ids=list(obj["train"]),
            test_ids=list(obj["test"]),
            generator=obj["generator"],
        )


def decode_image(data: bytes, name: str = "<bytes>") -> ImageRGB:
    """Decode a PNG or JPEG payload into an 8-bit RGB raster.

    Grayscale sources are expanded to R=G=B.  ``name`` is used in error
    messages so callers can attribute failures to a file.
    """
    try:
        with Image.open(io.BytesIO(data)) as img:
            rgb = img.convert("RGB")
            pixels = np.asarray(rgb, dtype=np.uint8)
    except Exception as exc:
        raise DecodeError(f"{name}: cannot decode image ({exc})") from exc
    return ImageRGB(np.ascontiguousarray(pixels))


def load_image(path: str | Path) -> ImageRGB:
    """Read and decode one image file."""
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise DecodeError(f"{path}: cannot read file ({exc})") from exc
    return decode_image(data, name=str(path))


def to_gray(img: ImageRGB) -> ImageGray:
    """Convert RGB to 8-bit luma using BT.601 weights.

    Per pixel ``Y = round(0.299 R + 0.587 G + 0.114 B)`` with round-half-
    away-from-zero, clamped to [0, 255].  The fixed rounding rule makes the
    conversion bit-exact across implementations.
    """
    p = img.pixels.astype(np.float64)
    y = 0.299 * p[:, :, 0] + 0.587 * p[:, :, 1] + 0.114 * p[:, :, 2]
    y = np.clip(np.floor(y + 0.5), 0.0, 255.0)
    return ImageGray(y.astype(np.uint8))


def scan_dataset(root: str | Path) -> DatasetManifest:
    """Scan a class-per-subdirectory dataset tree into a manifest.

    Class names are the subdirectory names, sorted lexicographically; class
    indices follow that order.  Records are sorted by image id so the result
    does not depend on filesystem enumeration order.  Non-image files are
    skipped and counted.
    """
    root = Path(root)
    if not root.is_dir():
        raise IngestionError(f"dataset root does not exist: {root}")
    class_dirs = sorted(d for d in root.iterdir() if d.is_dir())
    if not class_dirs:
        raise IngestionError(f"dataset root has no class subdirectories: {root}")

    classes = [d.name for d in class_dirs]
    records: list[tuple[str, int]] = []
    skipped = 0
    for label, class_dir in enumerate(class_dirs):
        for path in sorted(class_dir.rglob("*")):
            if not path.is_file():
                continue
            if path.suffix.lower() not in IMAGE_SUFFIXES:
                skipped += 1
                continue
            records.append((path.relative_to(root).as_posix(), label))
    records.sort(key=lambda rec: rec[0])
    return DatasetManifest(root=root, classes=classes, records=records, skipped=skipped)


def split_dataset(manifest: DatasetManifest, ratio: float, seed: int) -> SplitManifest:
    """Produce a stratified, seed-deterministic train/test split.

    Per class, ids are shuffled with a Philox counter-based generator and
    the first ``floor(ratio * class_count)`` go to train.  Identical
    (manifest, ratio, seed) inputs always produce an identical manifest.
    """
    if not 0.0 < ratio < 1.0:
        raise SplitError(f"train ratio must be in (0, 1), got {ratio}")

    by_class: dict[int, list[str]] = {}
    for rec_id, label in manifest.records:
        by_class.setdefault(label, []).append(rec_id)

    rng = np.random.Generator(np.random.Philox(seed))
    train_ids: list[str] = []
    test_ids: list[str] = []
    for label in sorted(by_class):
        ids = by_class[label]
        if len(ids) < 2:
            raise SplitError(
                f"class {manifest.classes[label]!r} has {len(ids)} image(s); "
                "need at least 2 to split"
            )
        order = rng.permutation(len(ids))
        shuffled = [ids[i] for i in order]
        n_train = math.floor(ratio * len(ids))
        train_ids.extend(shuffled[:n_train])
        test_ids.extend(shuffled[n_train:])
    return SplitManifest(seed=seed, train_ratio=ratio, train_ids=train_ids, test_ids=test_ids)
