"""Deterministic synthetic corpora with known per-aspect severity signal.

Each aspect owns one reserved embedding block and two marker tokens: a
medium-severity token and a high-severity token. A generated item carries
exactly one marker sentence per non-low aspect (none for low), so amplitude
on the reserved block separates the three levels and occlusion probes have
an unambiguous most-influential sentence. Everything else is neutral filler.
"""

from __future__ import annotations

import numpy as np

from .cache import MarkerSignal
from .corpus import ASPECTS, Aspect, AspectRatings, ItemKind, MusicItem, Song

LEVEL_PROBS = (0.4, 0.35, 0.25)
MARKER_OFFSET = 4.0
COORDS_PER_ASPECT = 2

# (medium token, high token) per aspect, in aspect order
MARKER_TOKENS: dict[Aspect, tuple[str, str]] = {
    Aspect.VIOLENCE: ("skirmish", "gunfight"),
    Aspect.SUBSTANCE: ("tipsy", "drunk"),
    Aspect.SEX: ("flirting", "seduction"),
    Aspect.CONSUMERISM: ("shopping", "diamonds"),
    Aspect.POSITIVE: ("hopeful", "sunshine"),
}

_NEUTRAL_WORDS = (
    "river", "morning", "window", "evening", "paper", "garden", "gravel",
    "road", "breeze", "meadow", "lantern", "harbor", "echo", "valley",
    "slow", "quiet", "grey", "winter", "station", "letter", "bridge",
    "shadow", "corner", "passing", "train", "voices", "ceiling", "floor",
    "hollow", "driftwood", "pavement", "curtain", "fading", "distant",
)


def min_embedding_dim() -> int:
    """Smallest combined twin width that fits every aspect's reserved coords."""
    return len(ASPECTS) * COORDS_PER_ASPECT


def default_marker_signals() -> list[MarkerSignal]:
    """Cumulative per-aspect signatures on single-coordinate blocks.

    Aspect a owns coordinates 2a and 2a+1: its medium token lights 2a, its
    high token lights both, so each band's signature contains the ones below
    it and severity reads off coordinate presence, not amplitude.
    """
    signals: list[MarkerSignal] = []
    for a, aspect in enumerate(ASPECTS):
        medium, high = MARKER_TOKENS[aspect]
        signals.append(MarkerSignal(token=medium, block=2 * a, offset=MARKER_OFFSET))
        signals.append(MarkerSignal(token=high, block=2 * a, offset=MARKER_OFFSET))
        signals.append(MarkerSignal(token=high, block=2 * a + 1, offset=MARKER_OFFSET))
    return signals


def _word(rng: np.random.Generator) -> str:
    return _NEUTRAL_WORDS[int(rng.integers(0, len(_NEUTRAL_WORDS)))]


def _sentence_pools(rng: np.random.Generator, n_filler: int, n_variants: int,
                    ) -> tuple[list[str], dict[tuple[Aspect, int], list[str]]]:
    """Fixed pools of reusable sentences, like a language reusing phrases.

    Items sample from these pools, so the sentence vocabulary is shared
    across the corpus and a model cannot tell items apart by filler alone.
    """
    fillers = []
    while len(fillers) < n_filler:
        n = int(rng.integers(4, 8))
        sentence = " ".join(_word(rng) for _ in range(n))
        if sentence not in fillers:
            fillers.append(sentence)
    marker_pools: dict[tuple[Aspect, int], list[str]] = {}
    for aspect in ASPECTS:
        for band, token in enumerate(MARKER_TOKENS[aspect], start=1):
            pool: list[str] = []
            while len(pool) < n_variants:
                sentence = f"{_word(rng)} {_word(rng)} {token} {_word(rng)}"
                if sentence not in pool:
                    pool.append(sentence)
            marker_pools[(aspect, band)] = pool
    return fillers, marker_pools


def generate_corpus(n_items: int, seed: int, *, album_fraction: float = 0.15,
                    filler_pool: int = 60, marker_variants: int = 12,
                    ) -> list[MusicItem]:
    """Sample `n_items` labeled items; pure function of its arguments.

    Raw 0-5 scores land in {0,1} / {2,3} / {4,5} by level, so the projected
    labels match the construction exactly. Each non-low aspect contributes
    exactly one marker sentence to its item.
    """
    if n_items < 1:
        raise ValueError(f"n_items must be >= 1, got {n_items}")
    rng = np.random.default_rng(seed)
    fillers, marker_pools = _sentence_pools(rng, filler_pool, marker_variants)
    items: list[MusicItem] = []
    for idx in range(n_items):
        item_id = f"item{idx:04d}"
        levels = rng.choice(3, size=len(ASPECTS), p=LEVEL_PROBS)
        raw = {aspect: int(levels[a]) * 2 + int(rng.integers(0, 2))
               for a, aspect in enumerate(ASPECTS)}
        sentences = [fillers[int(i)] for i in
                     rng.integers(0, len(fillers), size=int(rng.integers(2, 5)))]
        for a, aspect in enumerate(ASPECTS):
            if levels[a] == 0:
                continue
            pool = marker_pools[(aspect, int(levels[a]))]
            sentences.append(pool[int(rng.integers(0, len(pool)))])
        order = rng.permutation(len(sentences))
        sentences = [sentences[i] for i in order]
        as_album = len(sentences) >= 2 and rng.random() < album_fraction
        if as_album:
            split = int(rng.integers(1, len(sentences)))
            songs = (Song(song_id=f"{item_id}/track0.txt", sentences=tuple(sentences[:split])),
                     Song(song_id=f"{item_id}/track1.txt", sentences=tuple(sentences[split:])))
            kind = ItemKind.ALBUM
        else:
            songs = (Song(song_id=f"{item_id}/track0.txt", sentences=tuple(sentences)),)
            kind = ItemKind.SINGLE
        w1, w2 = (int(i) for i in rng.integers(0, len(_NEUTRAL_WORDS), size=2))
        title = f"{_NEUTRAL_WORDS[w1].title()} {_NEUTRAL_WORDS[w2].title()}"
        items.append(MusicItem(item_id=item_id, title=title, kind=kind, songs=songs,
                               ratings=AspectRatings.from_raw(raw, item_id=item_id)))
    return items
