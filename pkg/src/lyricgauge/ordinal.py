"""Ordinality-aware training strategies for the per-aspect severity heads.

Four strategies share one backbone:

  plain    cross-entropy on one-hot targets (order-blind control)
  soft     cross-entropy against distance-decayed soft targets
  binary   two cumulative sigmoid heads, Pr(level > low) and Pr(level > medium)
  rank     plain per-item loss plus a shared comparison head scored on
           document pairs (first lower / same / higher than second)

All losses are means over aspects so magnitudes stay comparable across
strategies; every function returns analytic logit gradients alongside the
loss so the training loop never differentiates anything numerically.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np

from .corpus import N_LEVELS
from .model import BackboneConfig, DocForward, ModelParams, backward, sigmoid, softmax, zero_grads


class OrdinalError(ValueError):
    """Raised for invalid labels, shapes or degenerate pairing requests."""


class Strategy(str, Enum):
    PLAIN = "plain"
    SOFT = "soft"
    BINARY = "binary"
    RANK = "rank"


def head_dim(strategy: Strategy) -> int:
    return 2 if strategy is Strategy.BINARY else N_LEVELS


def needs_rank_head(strategy: Strategy) -> bool:
    return strategy is Strategy.RANK


def _check_levels(labels: np.ndarray, n_levels: int = N_LEVELS) -> np.ndarray:
    labels = np.asarray(labels)
    if not np.issubdtype(labels.dtype, np.integer):
        raise OrdinalError(f"labels must be integers, got dtype {labels.dtype}")
    if labels.size and (labels.min() < 0 or labels.max() >= n_levels):
        raise OrdinalError(f"labels must lie in [0, {n_levels - 1}]")
    return labels


# ---------------------------------------------------------------------------
# Target encodings
# ---------------------------------------------------------------------------

def soften_label(level: int, n_levels: int = N_LEVELS) -> np.ndarray:
    """Distance-decayed target: weight exp(-|level - i|) on class i, normalized."""
    level = int(_check_levels(np.asarray(level), n_levels))
    w = np.exp(-np.abs(level - np.arange(n_levels, dtype=np.float64)))
    return w / w.sum()


def kl_loss(logits: np.ndarray, target: np.ndarray) -> tuple[float, np.ndarray]:
    """KL(target || softmax(logits)) computed in log space, with its logit grad."""
    logits = np.asarray(logits, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    shifted = logits - logits.max()
    logp = shifted - np.log(np.exp(shifted).sum())
    terms = np.where(target > 0, target * (np.log(np.where(target > 0, target, 1.0)) - logp), 0.0)
    return float(terms.sum()), np.exp(logp) - target


def binary_targets(level: int) -> np.ndarray:
    """Cumulative targets (Pr(level > low), Pr(level > medium)) for a level."""
    level = int(_check_levels(np.asarray(level)))
    return np.array([1.0 if level > 0 else 0.0, 1.0 if level > 1 else 0.0])


def binary_decode(threshold_probs: np.ndarray) -> np.ndarray:
    """Turn (p_gt_low, p_gt_medium) into a distribution over the three levels.

    Raw masses (1 - p1, p1 - p2, p2) can dip below zero when the two heads
    disagree; negatives are clamped and the rest renormalized. A degenerate
    all-zero vector falls back to uniform.
    """
    p = np.asarray(threshold_probs, dtype=np.float64)
    if p.shape != (2,):
        raise OrdinalError(f"expected two threshold probabilities, got shape {p.shape}")
    raw = np.array([1.0 - p[0], p[0] - p[1], p[1]])
    raw = np.maximum(raw, 0.0)
    total = raw.sum()
    if total <= 0.0:
        return np.full(3, 1.0 / 3.0)
    return raw / total


# ---------------------------------------------------------------------------
# Per-item losses (plain / soft / binary)
# ---------------------------------------------------------------------------

def strategy_loss(logits: np.ndarray, labels: Sequence[int],
                  strategy: Strategy) -> tuple[float, np.ndarray]:
    """Mean over-aspect loss for one document plus d(loss)/d(logits).

    `logits` is (A, K); `labels` holds one level per aspect. The rank
    strategy uses this too for its per-item classification term.
    """
    logits = np.asarray(logits, dtype=np.float64)
    labels = _check_levels(np.asarray(labels))
    n_aspects = logits.shape[0]
    if labels.shape != (n_aspects,):
        raise OrdinalError(f"labels must be ({n_aspects},), got {labels.shape}")
    dlogits = np.empty_like(logits)
    total = 0.0
    if strategy is Strategy.BINARY:
        if logits.shape[1] != 2:
            raise OrdinalError(f"binary heads emit 2 logits, got {logits.shape[1]}")
        for a in range(n_aspects):
            t = binary_targets(int(labels[a]))
            l = logits[a]
            # stable sum of the two bernoulli cross-entropies
            total += float(np.sum(np.maximum(l, 0.0) - l * t + np.log1p(np.exp(-np.abs(l)))))
            dlogits[a] = (sigmoid(l) - t) / n_aspects
        return total / n_aspects, dlogits
    if logits.shape[1] != N_LEVELS:
        raise OrdinalError(f"expected {N_LEVELS} logits per aspect, got {logits.shape[1]}")
    for a in range(n_aspects):
        if strategy is Strategy.SOFT:
            target = soften_label(int(labels[a]))
        else:
            target = np.zeros(N_LEVELS)
            target[labels[a]] = 1.0
        loss_a, grad_a = kl_loss(logits[a], target)
        total += loss_a
        dlogits[a] = grad_a / n_aspects
    return total / n_aspects, dlogits


# ---------------------------------------------------------------------------
# Pairwise comparison strategy
# ---------------------------------------------------------------------------

RANK_LOWER, RANK_SAME, RANK_HIGHER = 0, 1, 2


def rank_targets(labels_a: Sequence[int], labels_b: Sequence[int]) -> np.ndarray:
    """Per-aspect comparison class of the first document against the second."""
    la = _check_levels(np.asarray(labels_a))
    lb = _check_levels(np.asarray(labels_b))
    if la.shape != lb.shape:
        raise OrdinalError(f"label shapes differ: {la.shape} vs {lb.shape}")
    return np.where(la < lb, RANK_LOWER, np.where(la == lb, RANK_SAME, RANK_HIGHER))


def sample_rank_pairs(indices: Sequence[int], seed: int) -> list[tuple[int, int]]:
    """Randomly pair a batch: shuffle, pair consecutive entries, and give an
    odd leftover the first shuffled element as its partner."""
    idx = list(indices)
    if len(idx) < 2:
        raise OrdinalError("pairing needs at least two documents per batch")
    rng = np.random.default_rng(seed)
    order = [idx[i] for i in rng.permutation(len(idx))]
    pairs = [(order[i], order[i + 1]) for i in range(0, len(order) - 1, 2)]
    if len(order) % 2 == 1:
        pairs.append((order[-1], order[0]))
    return pairs


def rank_head_forward(params: ModelParams, x_out_a: np.ndarray,
                      x_out_b: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Comparison logits per aspect from the pair's gated representations.

    Features are (x_a, x_b, x_a - x_b) concatenated, one row per aspect.
    """
    W, b = params.tensors["rank_W"], params.tensors["rank_b"]
    F = np.concatenate([x_out_a, x_out_b, x_out_a - x_out_b], axis=1)
    return F @ W.T + b, F


def ranking_classification_loss(
        params: ModelParams, config: BackboneConfig,
        fwd_a: DocForward, fwd_b: DocForward,
        labels_a: Sequence[int], labels_b: Sequence[int],
        into: dict[str, np.ndarray] | None = None, scale: float = 1.0,
) -> tuple[float, float, float, dict[str, np.ndarray]]:
    """Total pair loss = mean per-item classification loss + comparison loss.

    Returns (total, loss_cls, loss_rank, grads); grads accumulate into `into`
    when given, multiplied by `scale` (used for batch averaging).
    """
    labels_a = _check_levels(np.asarray(labels_a))
    labels_b = _check_levels(np.asarray(labels_b))
    n_aspects = fwd_a.logits.shape[0]

    cls_a, dlog_a = strategy_loss(fwd_a.logits, labels_a, Strategy.PLAIN)
    cls_b, dlog_b = strategy_loss(fwd_b.logits, labels_b, Strategy.PLAIN)
    loss_cls = 0.5 * (cls_a + cls_b)

    Q, F = rank_head_forward(params, fwd_a.x_out, fwd_b.x_out)
    targets = rank_targets(labels_a, labels_b)
    P = softmax(Q, axis=1)
    loss_rank = 0.0
    dQ = P.copy()
    for a in range(n_aspects):
        loss_rank -= float(np.log(P[a, targets[a]]))
        dQ[a, targets[a]] -= 1.0
    loss_rank /= n_aspects
    dQ /= n_aspects

    grads = zero_grads(params) if into is None else into
    grads["rank_W"] += scale * (dQ.T @ F)
    grads["rank_b"] += scale * dQ.sum(axis=0)
    d = fwd_a.x_out.shape[1]
    GF = dQ @ params.tensors["rank_W"]          # (A, 3d)
    gxa = GF[:, :d] + GF[:, 2 * d:]
    gxb = GF[:, d: 2 * d] - GF[:, 2 * d:]

    backward(params, config, fwd_a, scale * 0.5 * dlog_a, xout_grads=scale * gxa, into=grads)
    backward(params, config, fwd_b, scale * 0.5 * dlog_b, xout_grads=scale * gxb, into=grads)
    return loss_cls + loss_rank, loss_cls, loss_rank, grads


# ---------------------------------------------------------------------------
# Decoding
# ---------------------------------------------------------------------------

def predict_distributions(logits: np.ndarray, strategy: Strategy) -> np.ndarray:
    """Per-aspect level distributions (A, 3) from head outputs."""
    logits = np.asarray(logits, dtype=np.float64)
    if strategy is Strategy.BINARY:
        return np.stack([binary_decode(sigmoid(row)) for row in logits])
    return softmax(logits, axis=1)


def strategy_decode(logits: np.ndarray, strategy: Strategy) -> np.ndarray:
    """Predicted level per aspect; probability ties resolve to the lower level."""
    return np.argmax(predict_distributions(logits, strategy), axis=1)


def expected_level(distribution: np.ndarray) -> np.ndarray:
    """Continuous severity readout: probability-weighted mean level."""
    dist = np.asarray(distribution, dtype=np.float64)
    return dist @ np.arange(dist.shape[-1], dtype=np.float64)
