"""Dataset traversal, batched inference, EMB1 emission, and verification."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from . import emb1
from .backbones import BACKBONE_INFO, BackboneError, LoadedBackbone, load_backbone

IMAGE_SUFFIXES = {".jpg", ".jpeg", ".png"}


class ExportError(Exception):
    """Export preconditions or dimensional contract violated."""


@dataclass
class ExportJob:
    data_root: Path
    backbone: str
    out_path: Path
    batch_size: int = 32
    weights: str = "imagenet"
    input_size: int | None = None  # None = feed tiles at native resolution
    seed: int = 0


def scan_images(root: Path) -> list[str]:
    """Relative-path ids (forward slashes) of all images under class subdirs."""
    if not root.is_dir():
        raise ExportError(f"dataset root does not exist: {root}")
    class_dirs = [d for d in sorted(root.iterdir()) if d.is_dir()]
    if not class_dirs:
        raise ExportError(f"dataset root has no class subdirectories: {root}")
    ids = [
        p.relative_to(root).as_posix()
        for d in class_dirs
        for p in sorted(d.rglob("*"))
        if p.is_file() and p.suffix.lower() in IMAGE_SUFFIXES
    ]
    if not ids:
        raise ExportError(f"no images found under {root}")
    return sorted(ids)


def _load_batch(root: Path, ids: list[str], size: int | None) -> np.ndarray:
    arrays = []
    for image_id in ids:
        with Image.open(root / image_id) as img:
            rgb = img.convert("RGB")
            if size is not None and rgb.size != (size, size):
                rgb = rgb.resize((size, size), Image.BILINEAR)
            arrays.append(np.asarray(rgb, dtype=np.uint8))
    shapes = {a.shape for a in arrays}
    if len(shapes) != 1:
        raise ExportError(
            f"images in one batch have mixed shapes {sorted(shapes)}; "
            "pass --input-size to resize"
        )
    return np.stack(arrays)


def export_embeddings(job: ExportJob, backbone: LoadedBackbone | None = None) -> int:
    """Run the frozen backbone over every image and write the EMB1 file.

    Feature maps are reduced by global max pooling over the spatial axes.
    A ``<out>.meta.json`` sidecar records weights and preprocessing.
    Returns the number of exported records.
    """
    info = BACKBONE_INFO.get(job.backbone)
    if info is None:
        raise BackboneError(
            f"unknown backbone {job.backbone!r}; supported: "
            + ", ".join(sorted(BACKBONE_INFO))
        )
    ids = scan_images(job.data_root)
    if backbone is None:
        backbone = load_backbone(
            job.backbone,
            weights=job.weights,
            seed=job.seed,
            input_size=job.input_size or 64,
        )

    def records():
        for start in range(0, len(ids), job.batch_size):
            chunk = ids[start : start + job.batch_size]
            vectors = backbone.run(_load_batch(job.data_root, chunk, job.input_size))
            if vectors.shape != (len(chunk), info.expected_dim):
                raise ExportError(
                    f"{job.backbone} produced shape {vectors.shape}, "
                    f"expected (*, {info.expected_dim}); export aborted"
                )
            yield from zip(chunk, vectors)

    emb1.write_file(job.out_path, job.backbone, info.expected_dim, records(), len(ids))
    sidecar = {
        "backbone": info.name,
        "framework": info.framework,
        "weights": backbone.weights,
        "weights_id": info.weights_id if backbone.weights == "imagenet" else "random-init",
        "seed": job.seed,
        "input_size": job.input_size or "native",
        "preprocessing": info.preprocessing,
        "pooling": "global max over spatial axes",
        "dim": info.expected_dim,
        "record_count": len(ids),
    }
    Path(str(job.out_path) + ".meta.json").write_text(
        json.dumps(sidecar, indent=2) + "\n", encoding="utf-8"
    )
    return len(ids)


@dataclass
class VerifyReport:
    backbone: str
    dim: int
    expected_dim: int
    record_count: int
    sampled: int


def verify_export(path: str | Path, backbone: str) -> VerifyReport:
    """Re-read an exported file and check magic, version, dims, and finiteness.

    Walks every record (so truncation anywhere is caught) and spot-checks
    ten evenly spaced records for finite components.
    """
    info = BACKBONE_INFO.get(backbone)
    if info is None:
        raise BackboneError(
            f"unknown backbone {backbone!r}; supported: " + ", ".join(sorted(BACKBONE_INFO))
        )
    data = Path(path).read_bytes()
    header = emb1.read_header(data)
    if header.dim != info.expected_dim:
        raise ExportError(
            f"{path}: dim {header.dim} does not match {backbone} "
            f"expected {info.expected_dim}"
        )
    sample_every = max(1, header.count // 10)
    sampled = 0
    seen = 0
    for index, (image_id, vector) in enumerate(emb1.iter_records(data, header)):
        seen += 1
        if index % sample_every == 0 and sampled < 10:
            sampled += 1
            if not np.all(np.isfinite(vector)):
                raise ExportError(f"{path}: record {image_id!r} has non-finite values")
    if seen != header.count:
        raise ExportError(f"{path}: header claims {header.count} records, walked {seen}")
    return VerifyReport(
        backbone=header.backbone,
        dim=header.dim,
        expected_dim=info.expected_dim,
        record_count=header.count,
        sampled=sampled,
    )
