"""On-disk formats: binary embedding files and the CSV side files.

Embedding file layout (all integers little-endian)::

    b"EMB1"                      magic
    u16   version (= 1)
    u32   item count
    u32   dimension
    per item:
        u16   id length in bytes
        bytes UTF-8 item id
        u32   frame count (>= 1)
        f32[frame count * dimension]   row-major frames
"""

from __future__ import annotations

import csv
import io
import os
import struct
import tempfile
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

from .errors import CorruptFile, DuplicateItem, InvalidData, UnrecognizedFormat, ValidationError
from .gaussian import EmbeddingSet

__all__ = [
    "MAGIC",
    "VERSION",
    "encode_embeddings",
    "decode_embeddings",
    "write_embeddings",
    "load_embeddings",
    "atomic_write_bytes",
    "atomic_write_text",
    "write_labels",
    "read_labels",
    "write_predictions",
    "read_predictions",
    "write_splits",
    "read_splits",
]

MAGIC = b"EMB1"
VERSION = 1
_HEADER = struct.Struct("<4sHII")
_ID_LEN = struct.Struct("<H")
_FRAMES = struct.Struct("<I")
SPLIT_NAMES = ("train", "validation", "test")


def atomic_write_bytes(path, data: bytes) -> None:
    """Write ``data`` to a sibling temp file, then rename it over ``path``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent)
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_text(path, text: str) -> None:
    atomic_write_bytes(path, text.encode("utf-8"))


def encode_embeddings(items: Mapping[str, np.ndarray]) -> bytes:
    dims = set()
    chunks = []
    for item_id, frames in items.items():
        frames = np.asarray(frames.vectors if isinstance(frames, EmbeddingSet) else frames)
        if frames.ndim == 1:
            frames = frames[None, :]
        if frames.ndim != 2 or frames.shape[0] < 1:
            raise InvalidData(f"item {item_id!r}: need a (frames, dims) matrix with >= 1 frame")
        if not np.all(np.isfinite(frames)):
            raise InvalidData(f"item {item_id!r}: non-finite values")
        dims.add(frames.shape[1])
        raw_id = item_id.encode("utf-8")
        if len(raw_id) > 0xFFFF:
            raise InvalidData(f"item id too long ({len(raw_id)} bytes)")
        chunks.append(_ID_LEN.pack(len(raw_id)))
        chunks.append(raw_id)
        chunks.append(_FRAMES.pack(frames.shape[0]))
        chunks.append(np.ascontiguousarray(frames, dtype="<f4").tobytes())
    if len(dims) > 1:
        raise InvalidData(f"items have differing dimensions {sorted(dims)}")
    if not dims:
        raise InvalidData("no items to write")
    return _HEADER.pack(MAGIC, VERSION, len(items), dims.pop()) + b"".join(chunks)


def decode_embeddings(data: bytes, encoder_id: str = "") -> dict[str, EmbeddingSet]:
    if len(data) < 4 and MAGIC.startswith(data):
        raise CorruptFile("truncated header")
    if data[:4] != MAGIC:
        raise UnrecognizedFormat(f"bad magic {data[:4]!r}; expected {MAGIC!r}")
    if len(data) < _HEADER.size:
        raise CorruptFile("truncated header")
    _, version, count, dim = _HEADER.unpack_from(data, 0)
    if version != VERSION:
        raise UnrecognizedFormat(f"unsupported version {version}")
    if dim < 1:
        raise CorruptFile("dimension must be >= 1")
    pos = _HEADER.size
    out: dict[str, EmbeddingSet] = {}

    def take(n: int) -> bytes:
        nonlocal pos
        if pos + n > len(data):
            raise CorruptFile(f"truncated payload at byte {pos} (need {n} more)")
        chunk = data[pos : pos + n]
        pos += n
        return chunk

    for _ in range(count):
        (id_len,) = _ID_LEN.unpack(take(_ID_LEN.size))
        try:
            item_id = take(id_len).decode("utf-8")
        except UnicodeDecodeError as exc:
            raise CorruptFile(f"item id is not valid UTF-8: {exc}") from None
        (frames,) = _FRAMES.unpack(take(_FRAMES.size))
        if frames < 1:
            raise CorruptFile(f"item {item_id!r} declares zero frames")
        payload = take(frames * dim * 4)
        matrix = np.frombuffer(payload, dtype="<f4").reshape(frames, dim).astype(np.float32)
        if not np.all(np.isfinite(matrix)):
            raise InvalidData(f"item {item_id!r} contains non-finite values")
        if item_id in out:
            raise DuplicateItem(f"item {item_id!r} appears twice")
        out[item_id] = EmbeddingSet(matrix, (item_id,), encoder_id)
    if pos != len(data):
        raise CorruptFile(f"{len(data) - pos} trailing byte(s) after declared payload")
    return out


def write_embeddings(path, items: Mapping[str, np.ndarray]) -> None:
    atomic_write_bytes(path, encode_embeddings(items))


def load_embeddings(path, encoder_id: str = "") -> dict[str, EmbeddingSet]:
    return decode_embeddings(Path(path).read_bytes(), encoder_id)


def _csv_text(header: Iterable[str], rows: Iterable[Iterable[str]]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def _read_csv(path, header: tuple[str, ...]) -> list[tuple[str, ...]]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        first = next(reader, None)
        if first is None or tuple(c.strip() for c in first) != header:
            raise ValidationError(f"{path}: expected header {','.join(header)}, got {first}")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise ValidationError(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
            rows.append(tuple(c.strip() for c in row))
    return rows


def write_labels(path, labels: Mapping[str, str]) -> None:
    atomic_write_text(path, _csv_text(("item_id", "label"), labels.items()))


def read_labels(path, classes: Iterable[str] | None = None) -> dict[str, str]:
    allowed = set(classes) if classes is not None else None
    out: dict[str, str] = {}
    for item_id, label in _read_csv(path, ("item_id", "label")):
        if item_id in out:
            raise DuplicateItem(f"{path}: item {item_id!r} labeled twice")
        if allowed is not None and label not in allowed:
            raise ValidationError(f"{path}: item {item_id!r} has unknown label {label!r}")
        out[item_id] = label
    return out


def write_predictions(path, rows: Iterable[tuple[str, str, str]]) -> None:
    atomic_write_text(path, _csv_text(("item_id", "predictor_id", "label"), rows))


def read_predictions(path) -> list[tuple[str, str, str]]:
    rows = _read_csv(path, ("item_id", "predictor_id", "label"))
    seen = set()
    for item_id, predictor_id, _ in rows:
        if (item_id, predictor_id) in seen:
            raise DuplicateItem(f"{path}: duplicate prediction ({item_id!r}, {predictor_id!r})")
        seen.add((item_id, predictor_id))
    return rows


def write_splits(path, splits: Mapping[str, str]) -> None:
    atomic_write_text(path, _csv_text(("item_id", "split"), splits.items()))


def read_splits(path) -> dict[str, str]:
    out: dict[str, str] = {}
    for item_id, split in _read_csv(path, ("item_id", "split")):
        if split not in SPLIT_NAMES:
            raise ValidationError(f"{path}: item {item_id!r} has unknown split {split!r}")
        if item_id in out:
            raise DuplicateItem(f"{path}: item {item_id!r} assigned twice")
        out[item_id] = split
    return out
