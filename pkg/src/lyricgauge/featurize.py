"""Sparse/dense baseline featurizers over whole music items.

Documents are items with all sentences concatenated. The tokenizer is
deliberately simple: lowercase, split on non-alphanumeric runs.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .corpus import MusicItem

logger = logging.getLogger(__name__)

_TOKEN_SPLIT = re.compile(r"[^0-9a-z]+")


class FeaturizeError(ValueError):
    """Raised for degenerate corpora or malformed vector files."""


def tokenize(text: str) -> list[str]:
    """Lowercase tokens split on non-alphanumeric characters."""
    return [tok for tok in _TOKEN_SPLIT.split(text.lower()) if tok]


def item_tokens(item: MusicItem) -> list[str]:
    return tokenize(" ".join(item.sentences()))


class TfidfFeaturizer:
    """tf-idf with smoothed idf = ln((1+N)/(1+df)) + 1 and L2-normalized rows.

    Term weights are raw counts times idf; the vocabulary and idf come from
    the fitted corpus and stay fixed for later transforms.
    """

    def __init__(self) -> None:
        self.vocabulary: dict[str, int] = {}
        self.idf: np.ndarray | None = None

    def fit(self, items: Sequence[MusicItem]) -> "TfidfFeaturizer":
        if not items:
            raise FeaturizeError("tfidf: empty corpus")
        df: dict[str, int] = {}
        for item in items:
            for term in set(item_tokens(item)):
                df[term] = df.get(term, 0) + 1
        if not df:
            raise FeaturizeError("tfidf: empty vocabulary")
        self.vocabulary = {term: i for i, term in enumerate(sorted(df))}
        n = len(items)
        self.idf = np.empty(len(self.vocabulary))
        for term, col in self.vocabulary.items():
            self.idf[col] = np.log((1.0 + n) / (1.0 + df[term])) + 1.0
        return self

    def transform(self, items: Sequence[MusicItem]) -> np.ndarray:
        if self.idf is None:
            raise FeaturizeError("tfidf: transform before fit")
        matrix = np.zeros((len(items), len(self.vocabulary)))
        for row, item in enumerate(items):
            for term in item_tokens(item):
                col = self.vocabulary.get(term)
                if col is not None:
                    matrix[row, col] += 1.0
        matrix *= self.idf
        norms = np.linalg.norm(matrix, axis=1)
        nonzero = norms > 0
        matrix[nonzero] /= norms[nonzero, None]
        return matrix

    def fit_transform(self, items: Sequence[MusicItem]) -> np.ndarray:
        return self.fit(items).transform(items)


def tfidf_fit_transform(items: Sequence[MusicItem]) -> tuple[dict[str, int], np.ndarray]:
    """Fit on `items` and return (vocabulary, weight matrix)."""
    featurizer = TfidfFeaturizer()
    return featurizer.fit(items).vocabulary, featurizer.transform(items)


def sparse_rows(matrix: np.ndarray, vocabulary: Mapping[str, int]) -> list[dict[str, float]]:
    """Term -> weight map view of a featurized matrix, one dict per item."""
    terms = {col: term for term, col in vocabulary.items()}
    out = []
    for row in matrix:
        cols = np.nonzero(row)[0]
        out.append({terms[int(c)]: float(row[c]) for c in cols})
    return out


def load_word_vectors(path: str | Path) -> dict[str, np.ndarray]:
    """Load a text word-vector table: one `token v1 v2 ... vd` line per token."""
    vectors: dict[str, np.ndarray] = {}
    dim: int | None = None
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            parts = line.split()
            if len(parts) < 2:
                raise FeaturizeError(f"{path}: line {lineno}: expected token and floats")
            try:
                vec = np.array([float(p) for p in parts[1:]])
            except ValueError:
                raise FeaturizeError(f"{path}: line {lineno}: non-numeric vector entry") from None
            if dim is None:
                dim = vec.size
            elif vec.size != dim:
                raise FeaturizeError(
                    f"{path}: line {lineno}: dimension {vec.size} != {dim}")
            vectors[parts[0]] = vec
    if not vectors:
        raise FeaturizeError(f"{path}: no vectors")
    return vectors


def avg_wordvec(items: Sequence[MusicItem],
                word_vectors: Mapping[str, np.ndarray]) -> np.ndarray:
    """Per-item mean of in-vocabulary token vectors (over occurrences).

    An item with only out-of-vocabulary tokens gets a zero vector and a
    warning.
    """
    if not word_vectors:
        raise FeaturizeError("avg_wordvec: empty word-vector table")
    dim = len(next(iter(word_vectors.values())))
    matrix = np.zeros((len(items), dim))
    for row, item in enumerate(items):
        hits = [word_vectors[tok] for tok in item_tokens(item) if tok in word_vectors]
        if not hits:
            logger.warning("item %r: all tokens out of vocabulary, using zero vector",
                           item.item_id)
            continue
        matrix[row] = np.mean(hits, axis=0)
    return matrix
