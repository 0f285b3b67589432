"""Binary representation store: per-document block vectors on disk.

Layout (all integers little-endian):

    header   8s magic "BREPSST1" | u32 dim | u64 doc_count | u64 created
    per doc  u32 id_len | id utf-8 | u32 n_blocks | n_blocks*dim f32
    index    doc_count * (u32 id_len | id utf-8 | u64 doc offset)

Writes are atomic (temp file + rename).  Reading goes through a
read-only mmap plus an in-memory id -> offset map built at open, so a
single handle is shareable across threads and ``get`` is O(1).
"""

from __future__ import annotations

import mmap
import os
import struct
import tempfile
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator

import numpy as np

from .errors import BadMagic, DimensionMismatch, DuplicateDocId, TruncatedFile

MAGIC = b"BREPSST1"
_HEADER = struct.Struct("<8sIQQ")
_U32 = struct.Struct("<I")
_U64 = struct.Struct("<Q")


@dataclass(frozen=True)
class StoredDocument:
    doc_id: str
    block_vectors: np.ndarray  # shape (n_blocks, dim), float32

    @property
    def n_blocks(self) -> int:
        return int(self.block_vectors.shape[0])


@dataclass(frozen=True)
class StoreSummary:
    doc_count: int
    block_count: int


def write_store(
    path: str | Path,
    documents: Iterable[tuple[str, np.ndarray]],
    dim: int,
    *,
    created: int | None = None,
) -> StoreSummary:
    """Write ``(doc_id, block_vectors)`` pairs to ``path`` atomically.

    ``created`` pins the header timestamp; tests use this to make whole
    files byte-comparable.  Raises DuplicateDocId on a repeated id and
    DimensionMismatch when a vector width differs from ``dim``.
    """
    if dim < 1:
        raise ValueError("dim must be positive")
    path = Path(path)
    if created is None:
        created = int(time.time())
    fd, tmp_name = tempfile.mkstemp(prefix=path.name + ".", dir=path.parent)
    seen: set[str] = set()
    index: list[tuple[bytes, int]] = []
    block_count = 0
    try:
        with os.fdopen(fd, "wb") as out:
            out.write(_HEADER.pack(MAGIC, dim, 0, created))
            for doc_id, vectors in documents:
                if not doc_id:
                    raise ValueError("doc_id must be non-empty")
                if doc_id in seen:
                    raise DuplicateDocId(doc_id)
                seen.add(doc_id)
                arr = np.ascontiguousarray(np.asarray(vectors, dtype=np.float32))
                if arr.ndim == 1 and arr.size == 0:
                    arr = arr.reshape(0, dim)
                if arr.ndim != 2 or arr.shape[1] != dim:
                    raise DimensionMismatch(
                        f"{doc_id}: vectors shaped {arr.shape}, expected (*, {dim})"
                    )
                encoded = doc_id.encode("utf-8")
                index.append((encoded, out.tell()))
                out.write(_U32.pack(len(encoded)))
                out.write(encoded)
                out.write(_U32.pack(arr.shape[0]))
                if arr.size:
                    out.write(arr.astype("<f4", copy=False).tobytes())
                block_count += arr.shape[0]
            for encoded, offset in index:
                out.write(_U32.pack(len(encoded)))
                out.write(encoded)
                out.write(_U64.pack(offset))
            out.seek(0)
            out.write(_HEADER.pack(MAGIC, dim, len(index), created))
            out.flush()
            os.fsync(out.fileno())
        os.replace(tmp_name, path)
    except BaseException:
        try:
            os.unlink(tmp_name)
        except OSError:
            pass
        raise
    return StoreSummary(doc_count=len(index), block_count=block_count)


class Store:
    """Read-only handle over a store file."""

    def __init__(self, path: Path, mm: mmap.mmap, dim: int, created: int,
                 offsets: dict[str, tuple[int, int]]):
        self._path = path
        self._mm = mm
        self._dim = dim
        self._created = created
        self._offsets = offsets  # doc_id -> (vector byte offset, n_blocks)

    @classmethod
    def open(cls, path: str | Path) -> "Store":
        path = Path(path)
        with open(path, "rb") as f:
            size = os.fstat(f.fileno()).st_size
            if size < _HEADER.size:
                raise TruncatedFile(f"{path}: {size} bytes is shorter than the header")
            mm = mmap.mmap(f.fileno(), 0, access=mmap.ACCESS_READ)
        magic, dim, doc_count, created = _HEADER.unpack_from(mm, 0)
        if magic != MAGIC:
            mm.close()
            raise BadMagic(f"{path}: magic {magic!r}")

        def fail(message: str):
            mm.close()
            return TruncatedFile(f"{path}: {message}")

        offsets: dict[str, tuple[int, int]] = {}
        walked: list[tuple[bytes, int]] = []
        pos = _HEADER.size
        for _ in range(doc_count):
            start = pos
            if pos + 4 > size:
                raise fail("EOF in doc id length")
            (id_len,) = _U32.unpack_from(mm, pos)
            pos += 4
            if pos + id_len + 4 > size:
                raise fail("EOF in doc id or block count")
            encoded = mm[pos : pos + id_len]
            pos += id_len
            (n_blocks,) = _U32.unpack_from(mm, pos)
            pos += 4
            vec_bytes = n_blocks * dim * 4
            if pos + vec_bytes > size:
                raise fail(f"EOF in vectors of {encoded!r}")
            offsets[encoded.decode("utf-8")] = (pos, n_blocks)
            walked.append((encoded, start))
            pos += vec_bytes
        for encoded, start in walked:
            if pos + 4 > size:
                raise fail("EOF in trailing index")
            (id_len,) = _U32.unpack_from(mm, pos)
            pos += 4
            if pos + id_len + 8 > size:
                raise fail("EOF in trailing index entry")
            got_id = mm[pos : pos + id_len]
            pos += id_len
            (got_offset,) = _U64.unpack_from(mm, pos)
            pos += 8
            if got_id != encoded or got_offset != start:
                raise fail(
                    f"trailing index disagrees with records at {encoded!r}"
                )
        if pos != size:
            raise fail(f"{size - pos} unexpected trailing bytes")
        return cls(path, mm, dim, created, offsets)

    @property
    def dim(self) -> int:
        return self._dim

    @property
    def doc_count(self) -> int:
        return len(self._offsets)

    @property
    def created(self) -> int:
        return self._created

    def get(self, doc_id: str) -> StoredDocument | None:
        entry = self._offsets.get(doc_id)
        if entry is None:
            return None
        pos, n_blocks = entry
        raw = self._mm[pos : pos + n_blocks * self._dim * 4]
        vectors = np.frombuffer(raw, dtype="<f4").reshape(n_blocks, self._dim)
        return StoredDocument(doc_id, vectors.astype(np.float32, copy=True))

    def ids(self) -> Iterator[str]:
        return iter(self._offsets)

    def __contains__(self, doc_id: str) -> bool:
        return doc_id in self._offsets

    def __len__(self) -> int:
        return len(self._offsets)

    def close(self) -> None:
        self._mm.close()

    def __enter__(self) -> "Store":
        return self

    def __exit__(self, *exc_info) -> None:
        self.close()
