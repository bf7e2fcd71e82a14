"""Twin sentence embeddings: in-memory cache, binary file format, synthetic provider.

Each sentence of a corpus gets a twin vector: a universal-semantic part of
d_sem floats concatenated with an emotion-centered part of d_emo floats.
Vectors are stored as little-endian float32 with fixed stride, after a
sorted key index, so shuffled training gets O(1) random access.

An opened cache is read-only and safe to share across threads; writing a
cache file is exclusive and single-threaded.
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Mapping, Sequence

import numpy as np

from .corpus import MusicItem
from .featurize import tokenize

MAGIC = b"ORDR"
FORMAT_VERSION = 1

Key = tuple[str, int, int]  # (item_id, song_index, sentence_index)


class CacheError(ValueError):
    """Raised for malformed cache files or coverage mismatches."""


@dataclass(frozen=True)
class TwinEmbedding:
    """semantic ++ emotion sentence vector pair; `combined` is the exact concat."""

    semantic: np.ndarray
    emotion: np.ndarray

    def __post_init__(self) -> None:
        if not (np.isfinite(self.semantic).all() and np.isfinite(self.emotion).all()):
            raise CacheError("twin embedding has non-finite entries")

    @property
    def combined(self) -> np.ndarray:
        return np.concatenate([self.semantic, self.emotion])


class EmbeddingCache:
    """Per-sentence twin vectors keyed by (item_id, song_index, sentence_index)."""

    def __init__(self, d_sem: int, d_emo: int, provider_tag: str) -> None:
        if d_sem < 1 or d_emo < 1:
            raise CacheError(f"dims must be >= 1, got d_sem={d_sem}, d_emo={d_emo}")
        self.d_sem = d_sem
        self.d_emo = d_emo
        self.provider_tag = provider_tag
        self._vectors: dict[Key, np.ndarray] = {}

    @property
    def dim(self) -> int:
        return self.d_sem + self.d_emo

    def __len__(self) -> int:
        return len(self._vectors)

    def __contains__(self, key: Key) -> bool:
        return key in self._vectors

    def keys(self) -> Iterator[Key]:
        return iter(self._vectors)

    def put(self, key: Key, combined: np.ndarray) -> None:
        vec = np.asarray(combined, dtype=np.float32)
        if vec.shape != (self.dim,):
            raise CacheError(f"vector for {key} has shape {vec.shape}, expected ({self.dim},)")
        if not np.isfinite(vec).all():
            raise CacheError(f"vector for {key} has non-finite entries")
        self._vectors[key] = vec

    def combined(self, item_id: str, song_index: int, sentence_index: int) -> np.ndarray:
        key = (item_id, song_index, sentence_index)
        if key not in self._vectors:
            raise CacheError(f"no embedding for key {key}")
        return self._vectors[key]

    def get(self, item_id: str, song_index: int, sentence_index: int) -> TwinEmbedding:
        vec = self.combined(item_id, song_index, sentence_index)
        return TwinEmbedding(semantic=vec[: self.d_sem], emotion=vec[self.d_sem:])

    def item_matrix(self, item: MusicItem, dtype=np.float64) -> np.ndarray:
        """All sentence vectors of an item stacked in document order."""
        rows = [self.combined(*key) for key in item.sentence_keys()]
        return np.stack(rows).astype(dtype)


def expected_keys(items: Sequence[MusicItem]) -> set[Key]:
    keys: set[Key] = set()
    for item in items:
        keys.update(item.sentence_keys())
    return keys


def validate_coverage(cache: EmbeddingCache, items: Sequence[MusicItem]) -> None:
    """Check the cache key set exactly covers the corpus; raise listing offenders."""
    expected = expected_keys(items)
    have = set(cache.keys())
    missing = sorted(expected - have)
    extra = sorted(have - expected)
    problems = []
    if missing:
        shown = ", ".join(map(str, missing[:10]))
        problems.append(f"{len(missing)} missing key(s): {shown}")
    if extra:
        shown = ", ".join(map(str, extra[:10]))
        problems.append(f"{len(extra)} extra key(s): {shown}")
    if problems:
        raise CacheError("cache does not cover corpus: " + "; ".join(problems))


# ---------------------------------------------------------------------------
# Binary file format (see docs/formats.md)
# ---------------------------------------------------------------------------

def write_cache(cache: EmbeddingCache, path: str | Path) -> None:
    """Write the cache to `path` (layout: header, sorted key index, f32 records)."""
    path = Path(path)
    keys = sorted(cache.keys())
    tag = cache.provider_tag.encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<IIIQH", FORMAT_VERSION, cache.d_sem, cache.d_emo,
                             len(keys), len(tag)))
        fh.write(tag)
        for item_id, song_index, sentence_index in keys:
            iid = item_id.encode("utf-8")
            fh.write(struct.pack("<H", len(iid)))
            fh.write(iid)
            fh.write(struct.pack("<II", song_index, sentence_index))
        for key in keys:
            vec = cache._vectors[key]
            fh.write(vec.astype("<f4", copy=False).tobytes())


def open_cache(path: str | Path, corpus: Sequence[MusicItem] | None = None) -> EmbeddingCache:
    """Open and validate a cache file; optionally check corpus coverage.

    Malformed files are rejected with the byte offset where parsing failed.
    """
    path = Path(path)
    data = path.read_bytes()

    def need(offset: int, count: int, what: str) -> int:
        if offset + count > len(data):
            raise CacheError(f"{path}: truncated file reading {what} at byte {offset}")
        return offset + count

    if len(data) < 4 or data[:4] != MAGIC:
        raise CacheError(f"{path}: not an embedding cache (bad magic at byte 0)")
    offset = need(4, struct.calcsize("<IIIQH"), "header")
    version, d_sem, d_emo, count, tag_len = struct.unpack_from("<IIIQH", data, 4)
    if version != FORMAT_VERSION:
        raise CacheError(f"{path}: unsupported cache version {version} at byte 4")
    tag_end = need(offset, tag_len, "provider tag")
    provider_tag = data[offset:tag_end].decode("utf-8")
    offset = tag_end

    keys: list[Key] = []
    for i in range(count):
        end = need(offset, 2, f"key {i} length")
        (iid_len,) = struct.unpack_from("<H", data, offset)
        end = need(end, iid_len + 8, f"key {i}")
        item_id = data[offset + 2: offset + 2 + iid_len].decode("utf-8")
        song_index, sentence_index = struct.unpack_from("<II", data, offset + 2 + iid_len)
        keys.append((item_id, song_index, sentence_index))
        offset = end

    dim = d_sem + d_emo
    stride = 4 * dim
    record_bytes = len(data) - offset
    if record_bytes != count * stride:
        raise CacheError(
            f"{path}: record region is {record_bytes} bytes at byte {offset}, "
            f"expected {count * stride} ({count} records x {dim} floats)")

    cache = EmbeddingCache(d_sem=d_sem, d_emo=d_emo, provider_tag=provider_tag)
    for i, key in enumerate(keys):
        if key in cache:
            raise CacheError(f"{path}: duplicate key {key} in index")
        start = offset + i * stride
        vec = np.frombuffer(data, dtype="<f4", count=dim, offset=start).copy()
        cache.put(key, vec)
    if corpus is not None:
        validate_coverage(cache, corpus)
    return cache


# ---------------------------------------------------------------------------
# Deterministic synthetic provider
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MarkerSignal:
    """A sentence-level signal: any sentence containing `token` gets `offset`
    added to every coordinate of reserved block `block` of the combined vector."""

    token: str
    block: int
    offset: float


def hash_expand(seed: int, text: str, dim: int) -> np.ndarray:
    """Expand (seed, text) into `dim` floats in [-1, 1], platform-independent."""
    n_blocks = (dim + 7) // 8
    raw = bytearray()
    for block in range(n_blocks):
        digest = hashlib.sha256(f"{seed}|{block}|{text}".encode("utf-8")).digest()
        raw.extend(digest)
    words = np.frombuffer(bytes(raw[: dim * 4]), dtype="<u4")
    return words.astype(np.float64) / 2.0**31 - 1.0


def synthetic_provider(items: Sequence[MusicItem], d_sem: int, d_emo: int, seed: int, *,
                       markers: Sequence[MarkerSignal] = (), block_size: int = 1,
                       provider_tag: str = "synthetic-v1") -> EmbeddingCache:
    """Deterministic stand-in for pretrained encoders.

    Each sentence's combined vector is a seeded hash expansion of the
    sentence text into [-1, 1]^(d_sem+d_emo); identical sentences map to
    identical vectors. Sentences containing a marker token additionally get
    that marker's offset on its reserved coordinate block, which makes
    synthetic corpora learnable and saliency-testable. Pure function of
    (corpus text, dims, seed, marker config).
    """
    cache = EmbeddingCache(d_sem=d_sem, d_emo=d_emo, provider_tag=provider_tag)
    dim = d_sem + d_emo
    for marker in markers:
        if (marker.block + 1) * block_size > dim:
            raise CacheError(
                f"marker {marker.token!r}: block {marker.block} exceeds dim {dim} "
                f"with block_size {block_size}")
    for item in items:
        for si, song in enumerate(item.songs):
            for qi, sentence in enumerate(song.sentences):
                vec = hash_expand(seed, sentence, dim)
                tokens = set(tokenize(sentence))
                for marker in markers:
                    if marker.token in tokens:
                        lo = marker.block * block_size
                        vec[lo: lo + block_size] += marker.offset
                cache.put((item.item_id, si, qi), vec)
    return cache
