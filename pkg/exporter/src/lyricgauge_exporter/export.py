"""Run two sentence encoders over a corpus manifest and write the cache.

The output is the primary library's binary cache format, so anything that
opens caches (training, prediction, the saliency probe) consumes exported
files unchanged. A partial file never survives a failed export: records are
written to a sibling temp path and renamed into place at the end.
"""

from __future__ import annotations

import hashlib
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from lyricgauge import EmbeddingCache, load_manifest, open_cache, validate_coverage, write_cache

from .encoders import ExportError, load_encoder


@dataclass(frozen=True)
class ExportConfig:
    manifest: Path
    lyrics_root: Path
    out: Path
    semantic_model: str
    emotion_model: str
    batch_size: int = 32
    device: str = "cpu"
    normalize: bool = False    # L2-normalize each twin half before concatenation

    def __post_init__(self) -> None:
        if not str(self.semantic_model).strip() or not str(self.emotion_model).strip():
            raise ExportError("semantic and emotion model identifiers must be non-empty")
        if self.batch_size < 1:
            raise ExportError(f"batch_size must be >= 1, got {self.batch_size}")
        out_dir = Path(self.out).parent
        if not os.access(out_dir if out_dir.exists() else out_dir.parent, os.W_OK):
            raise ExportError(f"output directory {out_dir} is not writable")


@dataclass(frozen=True)
class ExportReport:
    out: Path
    n_items: int
    n_songs: int
    n_sentences: int
    d_sem: int
    d_emo: int
    provider_tag: str
    cache_sha256: str
    coverage_complete: bool = True

    def to_dict(self) -> dict:
        return {"out": str(self.out), "n_items": self.n_items,
                "n_songs": self.n_songs, "n_sentences": self.n_sentences,
                "d_sem": self.d_sem, "d_emo": self.d_emo,
                "provider_tag": self.provider_tag,
                "cache_sha256": self.cache_sha256,
                "coverage_complete": self.coverage_complete}

    def summary(self) -> str:
        return (f"exported {self.n_sentences} sentences from {self.n_items} items "
                f"({self.n_songs} songs) to {self.out}\n"
                f"dims: semantic {self.d_sem} + emotion {self.d_emo}; "
                f"coverage 100%\nsha256 {self.cache_sha256}")


def _batched(seq: list, size: int):
    for start in range(0, len(seq), size):
        yield seq[start: start + size]


def _unit_rows(rows: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(rows, axis=1, keepdims=True)
    return rows / np.where(norms > 0.0, norms, 1.0)


def export_cache(config: ExportConfig) -> ExportReport:
    """Encode every sentence the manifest names and write one cache file."""
    items = load_manifest(config.manifest, config.lyrics_root)
    semantic = load_encoder(config.semantic_model, config.device)
    emotion = load_encoder(config.emotion_model, config.device)

    keys, sentences = [], []
    for item in items:
        for (item_id, song_idx, sent_idx), text in zip(item.sentence_keys(),
                                                       item.sentences()):
            keys.append((item_id, song_idx, sent_idx))
            sentences.append(text)

    tag = f"export {semantic.identifier} + {emotion.identifier}"
    if config.normalize:
        tag += " (unit-normalized)"
    cache = EmbeddingCache(d_sem=semantic.dim, d_emo=emotion.dim, provider_tag=tag)
    done = 0
    for batch in _batched(sentences, config.batch_size):
        try:
            sem_rows = semantic.encode(batch)
            emo_rows = emotion.encode(batch)
        except MemoryError:
            raise ExportError(
                f"encoder ran out of memory on a batch of {len(batch)}; "
                f"retry with a smaller --batch (current {config.batch_size})")
        if config.normalize:
            sem_rows = _unit_rows(sem_rows)
            emo_rows = _unit_rows(emo_rows)
        for row in range(len(batch)):
            cache.put(keys[done + row],
                      np.concatenate([sem_rows[row], emo_rows[row]]))
        done += len(batch)

    validate_coverage(cache, items)
    out = Path(config.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    tmp = out.with_name(out.name + ".part")
    try:
        write_cache(cache, tmp)
        os.replace(tmp, out)
    except BaseException:
        tmp.unlink(missing_ok=True)
        raise
    reopened = open_cache(out, corpus=items)  # proves the file round-trips

    stats = hashlib.sha256(out.read_bytes()).hexdigest()
    return ExportReport(out=out, n_items=len(items),
                        n_songs=sum(len(i.songs) for i in items),
                        n_sentences=len(reopened), d_sem=reopened.d_sem,
                        d_emo=reopened.d_emo, provider_tag=tag, cache_sha256=stats)


@dataclass(frozen=True)
class CacheComparison:
    byte_identical: bool
    max_abs_diff: float
    n_records: int

    def within(self, tol: float) -> bool:
        return self.byte_identical or self.max_abs_diff <= tol


def compare_caches(path_a: Path, path_b: Path, tol: float = 1e-6) -> CacheComparison:
    """Per-coordinate comparison of two cache files over the same key set."""
    a = open_cache(path_a)
    b = open_cache(path_b)
    keys_a, keys_b = set(a.keys()), set(b.keys())
    if keys_a != keys_b:
        missing = sorted(keys_a ^ keys_b)[:5]
        raise ExportError(f"caches cover different keys, e.g. {missing}")
    if (a.d_sem, a.d_emo) != (b.d_sem, b.d_emo):
        raise ExportError(f"caches have different dims: {(a.d_sem, a.d_emo)} "
                          f"vs {(b.d_sem, b.d_emo)}")
    if Path(path_a).read_bytes() == Path(path_b).read_bytes():
        return CacheComparison(byte_identical=True, max_abs_diff=0.0,
                               n_records=len(a))
    worst = 0.0
    for key in keys_a:
        diff = float(np.abs(a.combined(*key) - b.combined(*key)).max())
        worst = max(worst, diff)
    return CacheComparison(byte_identical=False, max_abs_diff=worst,
                           n_records=len(a))
