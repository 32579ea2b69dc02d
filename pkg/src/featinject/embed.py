"""Frozen-CNN embedding interchange.

Embeddings are exchanged with the exporter as EMB1 files rather than
computed in-process, which keeps this package free of any deep-learning
runtime.  EMB1 layout (all integers little-endian):

    magic  4 bytes  "FINJ"
    version u8      0x01
    backbone name   u16 length + UTF-8 bytes
    dim     u32
    count   u32
    records, sorted by id:
        id          u16 length + UTF-8 bytes
        vector      dim x IEEE-754 binary32

A synthetic backbone (seeded random projection of the pixels) stands in
for real CNN features in fully self-contained tests.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path
from typing import BinaryIO

import numpy as np

from .errors import ContractError, FormatError, ValidationError
from .imgio import ImageRGB

EMB1_MAGIC = b"FINJ"
EMB1_VERSION = 1


@dataclass(frozen=True)
class EmbeddingRecord:
    """Per-image embedding vector keyed by the image's dataset id."""

    id: str
    vector: np.ndarray


@dataclass
class EmbeddingStore:
    """All embeddings produced by one backbone over one dataset."""

    backbone: str
    dim: int
    records: dict[str, EmbeddingRecord]

    def add(self, image_id: str, vector: np.ndarray) -> None:
        vector = np.asarray(vector, dtype=np.float32)
        if vector.shape != (self.dim,):
            raise ValidationError(
                f"record {image_id!r}: vector has shape {vector.shape}, "
                f"store dim is {self.dim}"
            )
        if not np.all(np.isfinite(vector)):
            raise ValidationError(f"record {image_id!r}: non-finite components")
        if image_id in self.records:
            raise ValidationError(f"duplicate record id {image_id!r}")
        self.records[image_id] = EmbeddingRecord(image_id, vector)

    @classmethod
    def empty(cls, backbone: str, dim: int) -> "EmbeddingStore":
        if dim < 1:
            raise ContractError(f"embedding dim must be positive, got {dim}")
        return cls(backbone=backbone, dim=dim, records={})


@dataclass(frozen=True)
class BackboneSpec:
    """Published characteristics of a candidate CNN backbone."""

    name: str
    expected_dim: int
    model_size_mb: float
    param_count: int


# Candidate backbones with their pre-classifier feature widths, parameter
# counts, and model sizes.
BACKBONES: dict[str, BackboneSpec] = {
    "squeezenet": BackboneSpec("squeezenet", 512, 0.5, 729_000),
    "mobilenetv2": BackboneSpec("mobilenetv2", 1280, 14.0, 2_200_000),
    "shufflenetv2": BackboneSpec("shufflenetv2", 1024, 10.0, 4_000_000),
    "vgg16": BackboneSpec("vgg16", 512, 528.0, 14_700_000),
    "resnet50v2": BackboneSpec("resnet50v2", 2048, 98.0, 23_500_000),
}


@dataclass(frozen=True)
class BackboneCheck:
    """Result of validating a store against a backbone spec."""

    backbone: str
    expected_dim: int
    actual_dim: int
    record_count: int

    @property
    def ok(self) -> bool:
        return self.expected_dim == self.actual_dim


def write_embeddings(store: EmbeddingStore, sink: BinaryIO) -> int:
    """Serialize a store as EMB1, records sorted by id; returns bytes written."""
    name = store.backbone.encode("utf-8")
    if len(name) > 0xFFFF:
        raise ValidationError("backbone name too long for EMB1")
    written = 0

    def put(data: bytes) -> None:
        nonlocal written
        sink.write(data)
        written += len(data)

    put(EMB1_MAGIC)
    put(struct.pack("<B", EMB1_VERSION))
    put(struct.pack("<H", len(name)))
    put(name)
    put(struct.pack("<I", store.dim))
    put(struct.pack("<I", len(store.records)))
    for image_id in sorted(store.records):
        rec = store.records[image_id]
        encoded = image_id.encode("utf-8")
        if len(encoded) > 0xFFFF:
            raise ValidationError(f"record id too long for EMB1: {image_id!r}")
        vector = np.asarray(rec.vector, dtype="<f4")
        if vector.shape != (store.dim,):
            raise ValidationError(
                f"record {image_id!r}: vector length {vector.shape} != dim {store.dim}"
            )
        put(struct.pack("<H", len(encoded)))
        put(encoded)
        put(vector.tobytes())
    return written


def write_embeddings_file(store: EmbeddingStore, path: str | Path) -> int:
    with open(path, "wb") as fh:
        return write_embeddings(store, fh)


class _Reader:
    """Bounds-checked cursor over an EMB1 payload."""

    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int, what: str) -> bytes:
        if self.pos + n > len(self.data):
            raise FormatError(
                f"truncated EMB1 payload: needed {n} byte(s) for {what} "
                f"at offset {self.pos}, have {len(self.data) - self.pos}"
            )
        chunk = self.data[self.pos : self.pos + n]
        self.pos += n
        return chunk

    def u8(self, what: str) -> int:
        return self.take(1, what)[0]

    def u16(self, what: str) -> int:
        return struct.unpack("<H", self.take(2, what))[0]

    def u32(self, what: str) -> int:
        return struct.unpack("<I", self.take(4, what))[0]


def read_embeddings(source: BinaryIO | bytes) -> EmbeddingStore:
    """Parse and fully validate an EMB1 payload."""
    data = source if isinstance(source, bytes) else source.read()
    r = _Reader(data)
    magic = r.take(4, "magic")
    if magic != EMB1_MAGIC:
        raise FormatError(f"bad EMB1 magic: {magic!r}")
    version = r.u8("version")
    if version != EMB1_VERSION:
        raise FormatError(f"unsupported EMB1 version: {version}")
    name_len = r.u16("backbone name length")
    try:
        backbone = r.take(name_len, "backbone name").decode("utf-8")
    except UnicodeDecodeError as exc:
        raise FormatError(f"backbone name is not valid UTF-8 ({exc})") from exc
    dim = r.u32("dim")
    if dim < 1:
        raise FormatError(f"EMB1 dim must be positive, got {dim}")
    count = r.u32("record count")

    store = EmbeddingStore.empty(backbone, dim)
    for index in range(count):
        id_len = r.u16(f"id length of record {index}")
        try:
            image_id = r.take(id_len, f"id of record {index}").decode("utf-8")
        except UnicodeDecodeError as exc:
            raise FormatError(f"record {index} id is not valid UTF-8 ({exc})") from exc
        payload = r.take(4 * dim, f"vector of record {image_id!r}")
        vector = np.frombuffer(payload, dtype="<f4")
        if not np.all(np.isfinite(vector)):
            raise ValidationError(f"record {image_id!r}: non-finite components")
        store.add(image_id, vector)
    if r.pos != len(data):
        raise FormatError(f"{len(data) - r.pos} trailing byte(s) after last record")
    return store


def read_embeddings_file(path: str | Path) -> EmbeddingStore:
    with open(path, "rb") as fh:
        return read_embeddings(fh)


# Projection matrices are deterministic in (input size, dim, seed); cached
# because they are by far the most expensive part of the synthetic backbone.
_projection_cache: dict[tuple[int, int, int], np.ndarray] = {}


def _projection(n_inputs: int, dim: int, seed: int) -> np.ndarray:
    key = (n_inputs, dim, seed)
    if key not in _projection_cache:
        rng = np.random.Generator(np.random.Philox(seed))
        _projection_cache[key] = rng.standard_normal((dim, n_inputs)) / np.sqrt(n_inputs)
    return _projection_cache[key]


def synthetic_backbone(img: ImageRGB, dim: int, seed: int) -> np.ndarray:
    """Deterministic pseudo-embedding used as a test double for real backbones.

    A fixed seeded random projection (independent of the image) is applied
    to the flattened pixel vector normalized to [0, 1], followed by an
    elementwise max(0, .).  Output depends only on (pixel data, dim, seed).
    """
    if dim < 1:
        raise ContractError(f"embedding dim must be positive, got {dim}")
    x = img.pixels.astype(np.float64).ravel() / 255.0
    w = _projection(x.size, dim, seed)
    return np.maximum(w @ x, 0.0).astype(np.float32)


def check_backbone(store: EmbeddingStore, spec: BackboneSpec) -> BackboneCheck:
    """Confirm a store's dimensionality against a backbone spec."""
    check = BackboneCheck(
        backbone=spec.name,
        expected_dim=spec.expected_dim,
        actual_dim=store.dim,
        record_count=len(store.records),
    )
    if not check.ok:
        raise ValidationError(
            f"store dim {store.dim} does not match {spec.name} "
            f"expected dim {spec.expected_dim}"
        )
    return check
