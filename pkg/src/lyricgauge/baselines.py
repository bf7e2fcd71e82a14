"""Reference predictors the recurrent model has to beat: a majority-class
constant and a one-vs-rest L2 logistic classifier on fixed feature vectors.
"""

from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .model import sigmoid

logger = logging.getLogger(__name__)


class BaselineError(ValueError):
    """Raised for empty inputs or shape mismatches."""


def majority_predict(train_levels: Sequence[int]) -> int:
    """Most frequent level in the training labels; ties go to the lower level."""
    levels = list(train_levels)
    if not levels:
        raise BaselineError("majority baseline needs at least one training label")
    counts = Counter(int(v) for v in levels)
    best = max(counts.items(), key=lambda kv: (kv[1], -kv[0]))
    return best[0]


@dataclass
class LinearModel:
    """One-vs-rest sigmoid scorers; argmax score decides, ties to lower level."""

    W: np.ndarray  # (n_classes, d)
    b: np.ndarray  # (n_classes,)

    def scores(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        return sigmoid(X @ self.W.T + self.b)

    def predict(self, X: np.ndarray) -> np.ndarray:
        return np.argmax(self.scores(X), axis=1)


def _binary_loss(w: np.ndarray, b: float, X: np.ndarray, y: np.ndarray,
                 l2: float) -> float:
    z = X @ w + b
    # mean stable bernoulli cross-entropy; bias stays unregularized
    ce = np.mean(np.maximum(z, 0.0) - z * y + np.log1p(np.exp(-np.abs(z))))
    return float(ce + 0.5 * l2 * np.dot(w, w))


def linear_train(X: np.ndarray, labels: Sequence[int], *, n_classes: int = 3,
                 l2: float = 1e-4, lr: float = 1.0, max_iter: int = 200,
                 backtracks: int = 30, tol: float = 1e-10, seed: int = 0) -> LinearModel:
    """Fit one-vs-rest logistic classifiers by full-batch descent.

    Each step backtracks (halving the rate) until the loss does not increase,
    so the per-classifier loss sequence is non-increasing by construction.
    """
    X = np.asarray(X, dtype=np.float64)
    y_all = np.asarray(labels)
    if X.ndim != 2 or X.shape[0] == 0:
        raise BaselineError(f"feature matrix must be non-empty 2-D, got shape {X.shape}")
    if y_all.shape != (X.shape[0],):
        raise BaselineError(f"labels must be ({X.shape[0]},), got {y_all.shape}")
    n, d = X.shape
    rng = np.random.default_rng(seed)
    W = np.empty((n_classes, d))
    B = np.empty(n_classes)
    for c in range(n_classes):
        y = (y_all == c).astype(np.float64)
        if y.min() == y.max():
            logger.warning("class %d is %s in training data; its scorer is degenerate",
                           c, "everywhere" if y[0] else "absent")
        w = rng.normal(scale=0.01, size=d)
        b = 0.0
        loss = _binary_loss(w, b, X, y, l2)
        for _ in range(max_iter):
            p = sigmoid(X @ w + b)
            gw = X.T @ (p - y) / n + l2 * w
            gb = float(np.mean(p - y))
            step = lr
            for _ in range(backtracks):
                cand = _binary_loss(w - step * gw, b - step * gb, X, y, l2)
                if cand <= loss:
                    break
                step *= 0.5
            else:
                break  # no step improves; converged to precision
            w -= step * gw
            b -= step * gb
            if loss - cand < tol:
                loss = cand
                break
            loss = cand
        W[c], B[c] = w, b
    return LinearModel(W=W, b=B)
