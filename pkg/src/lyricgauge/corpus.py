"""Rated-lyrics corpus: ingestion, ordinal label projection, CV folds.

A corpus is a list of :class:`MusicItem` (album or CD single). Each item
carries one or more songs, each song an ordered list of lyric sentences
(one per source line), plus expert ratings for five message aspects on a
raw 0-5 scale and their 3-level ordinal projection.

Ingestion is single-threaded; the resulting objects are treated as
immutable and are safe to share read-only across threads.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from enum import Enum, IntEnum
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

logger = logging.getLogger(__name__)


class CorpusError(ValueError):
    """Raised when a manifest, lyrics file, or rating record is invalid."""


class Aspect(Enum):
    """The five rated message aspects. Iteration order is fixed (head indices
    and report columns depend on it)."""

    VIOLENCE = "violence"
    SUBSTANCE = "substance"
    SEX = "sex"
    CONSUMERISM = "consumerism"
    POSITIVE = "positive"


ASPECTS: tuple[Aspect, ...] = tuple(Aspect)
N_ASPECTS = len(ASPECTS)


class SeverityLevel(IntEnum):
    """Ordinal severity scale, Low < Medium < High."""

    LOW = 0
    MEDIUM = 1
    HIGH = 2


LEVELS: tuple[SeverityLevel, ...] = tuple(SeverityLevel)
N_LEVELS = len(LEVELS)


class ItemKind(str, Enum):
    ALBUM = "album"
    SINGLE = "single"


def project_rating(raw_score: int, *, item_id: str | None = None,
                   aspect: Aspect | None = None) -> SeverityLevel:
    """Project a raw 0-5 score onto the 3-level scale.

    0-1 -> Low, 2-3 -> Medium, 4-5 -> High. `item_id`/`aspect` only shape
    the error message for out-of-range scores.
    """
    if isinstance(raw_score, bool) or not isinstance(raw_score, (int, np.integer)):
        raise CorpusError(_score_err("non-integer score", raw_score, item_id, aspect))
    if not 0 <= raw_score <= 5:
        raise CorpusError(_score_err("score out of range", raw_score, item_id, aspect))
    return SeverityLevel(min(int(raw_score) // 2, 2))


def _score_err(what: str, score: object, item_id: str | None, aspect: Aspect | None) -> str:
    where = ""
    if item_id is not None:
        where += f" for item {item_id!r}"
    if aspect is not None:
        where += f" aspect {aspect.value!r}"
    return f"{what}{where}: {score!r} (expected integer 0..5)"


@dataclass(frozen=True)
class AspectRatings:
    """Raw 0-5 scores and their projected levels, one entry per aspect."""

    raw: Mapping[Aspect, int]
    projected: Mapping[Aspect, SeverityLevel]

    @classmethod
    def from_raw(cls, raw: Mapping[Aspect, int], *, item_id: str | None = None) -> "AspectRatings":
        missing = [a.value for a in ASPECTS if a not in raw]
        if missing:
            raise CorpusError(
                f"item {item_id!r}: missing aspect scores: {', '.join(missing)}")
        raw_map = {a: int(raw[a]) for a in ASPECTS}
        projected = {a: project_rating(raw[a], item_id=item_id, aspect=a) for a in ASPECTS}
        return cls(raw=raw_map, projected=projected)

    def level_vector(self) -> np.ndarray:
        """Projected levels as an int array in aspect order."""
        return np.array([int(self.projected[a]) for a in ASPECTS], dtype=np.int64)


@dataclass(frozen=True)
class Song:
    song_id: str
    sentences: tuple[str, ...]

    def __post_init__(self) -> None:
        if not self.sentences:
            raise CorpusError(f"song {self.song_id!r}: no sentences")
        if any(not s.strip() for s in self.sentences):
            raise CorpusError(f"song {self.song_id!r}: empty sentence")


@dataclass(frozen=True)
class MusicItem:
    item_id: str
    title: str
    kind: ItemKind
    songs: tuple[Song, ...]
    ratings: AspectRatings

    def __post_init__(self) -> None:
        if not self.songs:
            raise CorpusError(f"item {self.item_id!r}: no songs")

    def sentences(self) -> list[str]:
        """All sentences in document order (songs, then lines)."""
        out: list[str] = []
        for song in self.songs:
            out.extend(song.sentences)
        return out

    def sentence_keys(self) -> list[tuple[str, int, int]]:
        """(item_id, song_index, sentence_index) triples in document order."""
        return [(self.item_id, si, qi)
                for si, song in enumerate(self.songs)
                for qi in range(len(song.sentences))]


def _usable_line(line: str) -> str | None:
    """A trimmed lyric line, or None for blank / punctuation-only lines."""
    text = line.strip()
    if not text or not any(c.isalnum() for c in text):
        return None
    return text


def _parse_record(record: dict, index: int) -> tuple[str, str, ItemKind, dict, list[str]]:
    if not isinstance(record, dict):
        raise CorpusError(f"record {index}: not a JSON object")
    for key in ("item_id", "title", "kind", "ratings", "lyrics"):
        if key not in record:
            raise CorpusError(f"record {index}: missing field {key!r}")
    item_id = record["item_id"]
    if not isinstance(item_id, str) or not item_id:
        raise CorpusError(f"record {index}: item_id must be a non-empty string")
    try:
        kind = ItemKind(record["kind"])
    except ValueError:
        raise CorpusError(
            f"record {index} ({item_id!r}): kind must be 'album' or 'single', "
            f"got {record['kind']!r}") from None
    lyrics = record["lyrics"]
    if not isinstance(lyrics, list) or not lyrics or not all(isinstance(p, str) for p in lyrics):
        raise CorpusError(f"record {index} ({item_id!r}): lyrics must be a non-empty path list")
    if not isinstance(record["ratings"], dict):
        raise CorpusError(f"record {index} ({item_id!r}): ratings must be an object")
    return item_id, str(record["title"]), kind, record["ratings"], lyrics


def _ratings_from_json(raw_json: dict, item_id: str) -> AspectRatings:
    raw: dict[Aspect, int] = {}
    for aspect in ASPECTS:
        if aspect.value not in raw_json:
            raise CorpusError(f"item {item_id!r}: missing aspect score {aspect.value!r}")
        score = raw_json[aspect.value]
        if isinstance(score, bool) or not isinstance(score, int):
            raise CorpusError(_score_err("non-integer score", score, item_id, aspect))
        raw[aspect] = score
    return AspectRatings.from_raw(raw, item_id=item_id)


def load_manifest(manifest_path: str | Path, lyrics_root: str | Path, *,
                  strict: bool = True) -> list[MusicItem]:
    """Load a JSON-lines manifest into MusicItems, in manifest order.

    Each record names a music item, its five raw aspect scores, and the
    lyrics files (paths relative to `lyrics_root`, one sentence per line,
    UTF-8). Blank and punctuation-only lines are dropped.

    With strict=True (default) a missing or empty lyrics file rejects the
    whole load; with strict=False the song is skipped with a warning, and
    only an item with zero resolvable songs is rejected. Items with missing
    or out-of-range aspect scores are always rejected, never defaulted.
    """
    manifest_path = Path(manifest_path)
    lyrics_root = Path(lyrics_root)
    if not manifest_path.is_file():
        raise CorpusError(f"manifest not found: {manifest_path}")

    items: list[MusicItem] = []
    seen_ids: set[str] = set()
    with open(manifest_path, encoding="utf-8") as fh:
        for index, line in enumerate(fh):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusError(f"record {index}: malformed JSON: {exc}") from None
            item_id, title, kind, ratings_json, lyric_paths = _parse_record(record, index)
            if item_id in seen_ids:
                raise CorpusError(f"record {index}: duplicate item_id {item_id!r}")
            seen_ids.add(item_id)
            ratings = _ratings_from_json(ratings_json, item_id)

            songs: list[Song] = []
            for rel in lyric_paths:
                path = lyrics_root / rel
                if not path.is_file():
                    if strict:
                        raise CorpusError(
                            f"record {index} ({item_id!r}): lyrics file not found: {path}")
                    logger.warning("item %r: skipping missing lyrics file %s", item_id, path)
                    continue
                lines = path.read_text(encoding="utf-8").splitlines()
                sentences = tuple(s for s in (_usable_line(ln) for ln in lines) if s)
                if not sentences:
                    if strict:
                        raise CorpusError(
                            f"record {index} ({item_id!r}): no sentences in lyrics file: {path}")
                    logger.warning("item %r: skipping empty lyrics file %s", item_id, path)
                    continue
                songs.append(Song(song_id=rel, sentences=sentences))
            if not songs:
                raise CorpusError(f"record {index} ({item_id!r}): no resolvable songs")
            items.append(MusicItem(item_id=item_id, title=title, kind=kind,
                                   songs=tuple(songs), ratings=ratings))
    return items


def write_manifest(items: Sequence[MusicItem], manifest_path: str | Path,
                   lyrics_root: str | Path) -> None:
    """Write items back to a manifest plus lyrics files (load_manifest inverse).

    Song ids are used as the lyrics paths, so reloading reproduces them;
    they must be relative, extension-bearing paths (e.g. "item1/00.txt").
    """
    manifest_path = Path(manifest_path)
    lyrics_root = Path(lyrics_root)
    manifest_path.parent.mkdir(parents=True, exist_ok=True)
    with open(manifest_path, "w", encoding="utf-8") as fh:
        for item in items:
            for song in item.songs:
                rel = Path(song.song_id)
                if rel.is_absolute() or ".." in rel.parts:
                    raise CorpusError(
                        f"item {item.item_id!r}: song_id {song.song_id!r} is not a "
                        "relative path")
                path = lyrics_root / rel
                path.parent.mkdir(parents=True, exist_ok=True)
                path.write_text("\n".join(song.sentences) + "\n", encoding="utf-8")
            record = {
                "item_id": item.item_id,
                "title": item.title,
                "kind": item.kind.value,
                "ratings": {a.value: item.ratings.raw[a] for a in ASPECTS},
                "lyrics": [song.song_id for song in item.songs],
            }
            fh.write(json.dumps(record, sort_keys=True) + "\n")


def label_distribution(items: Sequence[MusicItem], aspect: Aspect) -> dict[SeverityLevel, int]:
    """Projected-level counts for one aspect. Counts sum to len(items)."""
    if not items:
        raise CorpusError("label_distribution: empty corpus")
    counts = {level: 0 for level in LEVELS}
    for item in items:
        counts[item.ratings.projected[aspect]] += 1
    return counts


def kind_percentages(items: Sequence[MusicItem]) -> dict[str, float]:
    """Album/single share of the corpus, in percent."""
    if not items:
        raise CorpusError("kind_percentages: empty corpus")
    n = len(items)
    counts = {kind.value: 0 for kind in ItemKind}
    for item in items:
        counts[item.kind.value] += 1
    return {kind: 100.0 * c / n for kind, c in counts.items()}


def corpus_stats(items: Sequence[MusicItem]) -> dict:
    """Summary statistics: kind split and per-aspect level distributions."""
    return {
        "n_items": len(items),
        "n_songs": sum(len(item.songs) for item in items),
        "n_sentences": sum(len(item.sentences()) for item in items),
        "kind_percentages": kind_percentages(items),
        "label_distribution": {
            aspect.value: {level.name.lower(): count
                           for level, count in label_distribution(items, aspect).items()}
            for aspect in ASPECTS
        },
    }


@dataclass(frozen=True)
class FoldPlan:
    """Cross-validation fold assignment, stratified on the Violence level.

    The held-out fold is the test split (`test_fraction` of the corpus);
    `dev_fraction` of the remaining training pool is carved out as the dev
    split by the harness (seeded shuffle, by item count).
    """

    n_folds: int
    assignments: Mapping[str, int]
    dev_fraction: float
    test_fraction: float
    seed: int
    stratified_on: str = "violence"

    def __post_init__(self) -> None:
        sizes = self.fold_sizes()
        if max(sizes) - min(sizes) > 1:
            raise CorpusError(f"fold sizes differ by more than 1: {sizes}")

    def fold_sizes(self) -> list[int]:
        sizes = [0] * self.n_folds
        for fold in self.assignments.values():
            sizes[fold] += 1
        return sizes

    def fold_members(self, fold: int) -> list[str]:
        return [iid for iid, f in self.assignments.items() if f == fold]

    def training_pool(self, fold: int) -> list[str]:
        return [iid for iid, f in self.assignments.items() if f != fold]

    def to_json(self) -> str:
        return json.dumps({
            "n_folds": self.n_folds,
            "assignments": dict(self.assignments),
            "dev_fraction": self.dev_fraction,
            "test_fraction": self.test_fraction,
            "seed": self.seed,
            "stratified_on": self.stratified_on,
        }, sort_keys=True, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "FoldPlan":
        data = json.loads(text)
        return cls(n_folds=data["n_folds"], assignments=data["assignments"],
                   dev_fraction=data["dev_fraction"], test_fraction=data["test_fraction"],
                   seed=data["seed"], stratified_on=data.get("stratified_on", "violence"))


def make_folds(items: Sequence[MusicItem], n_folds: int, seed: int, *,
               dev_fraction: float = 1.0 / 9.0) -> FoldPlan:
    """Assign every item to one of `n_folds` folds, deterministically.

    Items are grouped by their projected Violence level, each group is
    shuffled with the seeded generator, and the concatenated groups are
    dealt round-robin, so folds are level-balanced and their sizes differ
    by at most one.
    """
    if n_folds < 2:
        raise CorpusError(f"n_folds must be >= 2, got {n_folds}")
    if len(items) < n_folds:
        raise CorpusError(f"too few items ({len(items)}) for {n_folds} folds")
    ids = [item.item_id for item in items]
    if len(set(ids)) != len(ids):
        raise CorpusError("duplicate item_id in corpus")

    rng = np.random.default_rng(seed)
    assignments: dict[str, int] = {}
    counter = 0
    for level in LEVELS:
        group = [item.item_id for item in items
                 if item.ratings.projected[Aspect.VIOLENCE] == level]
        order = rng.permutation(len(group))
        for idx in order:
            assignments[group[idx]] = counter % n_folds
            counter += 1
    return FoldPlan(n_folds=n_folds, assignments=assignments,
                    dev_fraction=dev_fraction, test_fraction=1.0 / n_folds, seed=seed)
