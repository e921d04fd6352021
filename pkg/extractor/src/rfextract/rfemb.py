"""The binary embedding-store format and the problem-list format.

This is an independent implementation of the shared on-disk contract:
magic "RFEMB1", version u16, embedder id (u32 length + UTF-8), layer u32,
dim u32, record count u32, then per record (id: u32 length + UTF-8,
dim x f32 little-endian), and a trailing CRC32 over everything after the
magic. problems.jsonl carries one {"id", "text", ...} object per line.
"""

from __future__ import annotations

import json
import struct
import zlib
from dataclasses import dataclass, field

import numpy as np

MAGIC = b"RFEMB1"
FORMAT_VERSION = 1

_U16 = struct.Struct("<H")
_U32 = struct.Struct("<I")


class StoreFormatError(Exception):
    """Any violation of the embedding-store format."""


@dataclass
class Store:
    embedder_id: str
    layer_index: int
    dim: int
    vectors: dict[str, np.ndarray] = field(default_factory=dict)

    @property
    def ids(self) -> list[str]:
        return list(self.vectors)


def write_store(store: Store, path) -> None:
    if store.dim < 1:
        raise StoreFormatError(f"refusing to write store with dim {store.dim}")
    crc = 0
    with open(path, "wb") as f:
        f.write(MAGIC)

        def put(blob: bytes):
            nonlocal crc
            f.write(blob)
            crc = zlib.crc32(blob, crc)

        put(_U16.pack(FORMAT_VERSION))
        raw_id = store.embedder_id.encode("utf-8")
        put(_U32.pack(len(raw_id)))
        put(raw_id)
        put(_U32.pack(store.layer_index))
        put(_U32.pack(store.dim))
        put(_U32.pack(len(store.vectors)))
        for pid, vec in store.vectors.items():
            if vec.shape != (store.dim,) or vec.dtype != np.float32:
                raise StoreFormatError(
                    f"record {pid!r}: need float32 of shape ({store.dim},), "
                    f"got {vec.dtype} {vec.shape}"
                )
            if not np.isfinite(vec).all():
                raise StoreFormatError(f"record {pid!r}: non-finite values")
            raw_pid = pid.encode("utf-8")
            put(_U32.pack(len(raw_pid)))
            put(raw_pid)
            put(np.ascontiguousarray(vec, dtype="<f4").tobytes())
        f.write(_U32.pack(crc))


def read_store(path) -> Store:
    with open(path, "rb") as f:
        blob = f.read()
    if len(blob) < len(MAGIC) or blob[: len(MAGIC)] != MAGIC:
        raise StoreFormatError(f"{path}: bad magic")
    if len(blob) < len(MAGIC) + 4:
        raise StoreFormatError(f"{path}: truncated before CRC trailer")
    payload = memoryview(blob)[len(MAGIC) : -4]
    (stored_crc,) = _U32.unpack(blob[-4:])
    off = 0

    def take(n: int) -> memoryview:
        nonlocal off
        if off + n > len(payload):
            raise StoreFormatError(f"{path}: truncated at payload offset {off}")
        view = payload[off : off + n]
        off += n
        return view

    (version,) = _U16.unpack(take(2))
    if version != FORMAT_VERSION:
        raise StoreFormatError(f"{path}: unsupported version {version}")
    (id_len,) = _U32.unpack(take(4))
    embedder_id = bytes(take(id_len)).decode("utf-8")
    (layer_index,) = _U32.unpack(take(4))
    (dim,) = _U32.unpack(take(4))
    (count,) = _U32.unpack(take(4))
    records: list[tuple[str, np.ndarray]] = []
    for _ in range(count):
        (pid_len,) = _U32.unpack(take(4))
        pid = bytes(take(pid_len)).decode("utf-8")
        vec = np.frombuffer(take(dim * 4), dtype="<f4").astype(np.float32, copy=True)
        records.append((pid, vec))
    if off != len(payload):
        raise StoreFormatError(f"{path}: {len(payload) - off} trailing payload bytes")
    actual = zlib.crc32(payload)
    if actual != stored_crc:
        raise StoreFormatError(
            f"{path}: CRC mismatch (stored {stored_crc:#010x}, computed {actual:#010x})"
        )
    if dim == 0:
        raise StoreFormatError(f"{path}: store declares dim 0")
    vectors: dict[str, np.ndarray] = {}
    for pid, vec in records:
        if pid in vectors:
            raise StoreFormatError(f"{path}: duplicate id {pid!r}")
        if not np.isfinite(vec).all():
            raise StoreFormatError(f"{path}: non-finite values in record {pid!r}")
        vectors[pid] = vec
    return Store(embedder_id=embedder_id, layer_index=layer_index, dim=dim, vectors=vectors)


def merge_stores(stores: list[Store]) -> Store:
    """Merge shards produced over disjoint problem subsets (same embedder/layer/dim)."""
    if not stores:
        raise StoreFormatError("nothing to merge")
    head = stores[0]
    merged = Store(head.embedder_id, head.layer_index, head.dim, dict(head.vectors))
    for shard in stores[1:]:
        key = (shard.embedder_id, shard.layer_index, shard.dim)
        if key != (head.embedder_id, head.layer_index, head.dim):
            raise StoreFormatError(f"shard mismatch: {key} vs "
                                   f"{(head.embedder_id, head.layer_index, head.dim)}")
        overlap = set(shard.vectors) & set(merged.vectors)
        if overlap:
            raise StoreFormatError(f"shards overlap on ids {sorted(overlap)[:10]}")
        merged.vectors.update(shard.vectors)
    return merged


def load_problems(path) -> list[dict]:
    """Minimal problems.jsonl reader: unique non-empty ids, text required."""
    problems = []
    seen = set()
    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValueError(f"{path}:{lineno}: malformed JSON: {exc}") from exc
            if not isinstance(obj, dict) or not obj.get("id") or "text" not in obj:
                raise ValueError(f"{path}:{lineno}: need non-empty 'id' and 'text'")
            if obj["id"] in seen:
                raise ValueError(f"{path}:{lineno}: duplicate id {obj['id']!r}")
            seen.add(obj["id"])
            problems.append(obj)
    return problems
