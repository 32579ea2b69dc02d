"""Standalone EMB1 writing and header inspection.

EMB1 layout (integers little-endian): magic "FINJ", version byte 0x01,
backbone name (u16 length + UTF-8), dim (u32), record count (u32), then
per record the image id (u16 length + UTF-8) followed by dim float32
values.  This module implements the wire format directly so the exporter
stays independent of the consumer package.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path
from typing import BinaryIO, Iterable

import numpy as np

MAGIC = b"FINJ"
VERSION = 1


class Emb1Error(Exception):
    """Structurally invalid or inconsistent EMB1 payload."""


def write_records(
    sink: BinaryIO,
    backbone: str,
    dim: int,
    records: Iterable[tuple[str, np.ndarray]],
    count: int,
) -> int:
    """Stream records (already sorted by id) to ``sink``; returns bytes written."""
    name = backbone.encode("utf-8")
    written = 0

    def put(data: bytes) -> None:
        nonlocal written
        sink.write(data)
        written += len(data)

    put(MAGIC)
    put(struct.pack("<B", VERSION))
    put(struct.pack("<H", len(name)))
    put(name)
    put(struct.pack("<I", dim))
    put(struct.pack("<I", count))
    previous = None
    for image_id, vector in records:
        if previous is not None and image_id <= previous:
            raise Emb1Error(f"records not sorted by id: {image_id!r} after {previous!r}")
        previous = image_id
        vector = np.asarray(vector, dtype="<f4")
        if vector.shape != (dim,):
            raise Emb1Error(f"record {image_id!r}: vector shape {vector.shape} != ({dim},)")
        if not np.all(np.isfinite(vector)):
            raise Emb1Error(f"record {image_id!r}: non-finite components")
        encoded = image_id.encode("utf-8")
        put(struct.pack("<H", len(encoded)))
        put(encoded)
        put(vector.tobytes())
    return written


@dataclass
class Header:
    backbone: str
    dim: int
    count: int
    header_bytes: int


def read_header(data: bytes) -> Header:
    if len(data) < 4 + 1 + 2:
        raise Emb1Error("file too short for an EMB1 header")
    if data[:4] != MAGIC:
        raise Emb1Error(f"bad magic: {data[:4]!r}")
    if data[4] != VERSION:
        raise Emb1Error(f"unsupported version: {data[4]}")
    (name_len,) = struct.unpack_from("<H", data, 5)
    offset = 7 + name_len
    if len(data) < offset + 8:
        raise Emb1Error("truncated header")
    backbone = data[7:offset].decode("utf-8")
    dim, count = struct.unpack_from("<II", data, offset)
    return Header(backbone=backbone, dim=dim, count=count, header_bytes=offset + 8)


def iter_records(data: bytes, header: Header):
    """Yield (id, float32 vector) pairs, checking structural integrity."""
    pos = header.header_bytes
    for index in range(header.count):
        if pos + 2 > len(data):
            raise Emb1Error(f"truncated at record {index} id length")
        (id_len,) = struct.unpack_from("<H", data, pos)
        pos += 2
        if pos + id_len + 4 * header.dim > len(data):
            raise Emb1Error(f"truncated inside record {index}")
        image_id = data[pos : pos + id_len].decode("utf-8")
        pos += id_len
        vector = np.frombuffer(data, dtype="<f4", count=header.dim, offset=pos)
        pos += 4 * header.dim
        yield image_id, vector
    if pos != len(data):
        raise Emb1Error(f"{len(data) - pos} trailing byte(s)")


def write_file(
    path: str | Path,
    backbone: str,
    dim: int,
    records: Iterable[tuple[str, np.ndarray]],
    count: int,
) -> int:
    with open(path, "wb") as fh:
        return write_records(fh, backbone, dim, records, count)
