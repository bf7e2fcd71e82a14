"""Post-hoc analysis: rank correlations between aspect labels and
leave-one-sentence-out saliency for trained models.

The saliency probe removes one sentence's embedding row at a time, re-runs
the forward pass, and reports how the probability of the originally
predicted level moves (in percentage points) plus any level transition.
Negative deltas mean the sentence was supporting the original prediction.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.stats

from .corpus import ASPECTS
from .model import BackboneConfig, ModelParams, forward
from .ordinal import Strategy, predict_distributions


class AnalysisError(ValueError):
    """Raised for degenerate inputs (length mismatches, empty series)."""


# ---------------------------------------------------------------------------
# Rank correlation
# ---------------------------------------------------------------------------

def midranks(values: Sequence[float]) -> np.ndarray:
    """1-based ranks with ties sharing the mean of their positions."""
    v = np.asarray(values, dtype=np.float64)
    order = np.argsort(v, kind="stable")
    ranks = np.empty(len(v))
    i = 0
    while i < len(v):
        j = i
        while j + 1 < len(v) and v[order[j + 1]] == v[order[i]]:
            j += 1
        ranks[order[i: j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def spearman_rho(x: Sequence[float], y: Sequence[float]) -> float:
    """Pearson correlation of midranks; 0 when either series is constant."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise AnalysisError(f"series must be equal-length 1-D, got {x.shape} and {y.shape}")
    if x.size < 2:
        raise AnalysisError("correlation needs at least two observations")
    rx, ry = midranks(x), midranks(y)
    sx, sy = rx.std(), ry.std()
    if sx == 0.0 or sy == 0.0:
        return 0.0
    return float(np.mean((rx - rx.mean()) * (ry - ry.mean())) / (sx * sy))


def spearman_test(x: Sequence[float], y: Sequence[float], *, n_perm: int = 2000,
                  seed: int = 0) -> tuple[float, float]:
    """(rho, two-sided p). Uses the t approximation when it is defined and a
    seeded permutation test otherwise (tiny n or |rho| = 1)."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    rho = spearman_rho(x, y)
    n = x.size
    if n > 3 and 1.0 - rho * rho > 1e-12:
        t = rho * np.sqrt((n - 2) / (1.0 - rho * rho))
        return rho, 2.0 * float(scipy.stats.t.sf(abs(t), df=n - 2))
    rng = np.random.default_rng(seed)
    hits = 0
    for _ in range(n_perm):
        perm = rng.permutation(n)
        if abs(spearman_rho(x[perm], y)) >= abs(rho) - 1e-12:
            hits += 1
    return rho, (1 + hits) / (1 + n_perm)


def correlation_matrix(levels: np.ndarray, *, n_perm: int = 2000,
                       seed: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Pairwise rank correlations between aspect level columns.

    `levels` is (n_items, n_aspects); returns (rho, p) matrices with unit
    diagonal and p = 0 on the diagonal.
    """
    L = np.asarray(levels, dtype=np.float64)
    if L.ndim != 2:
        raise AnalysisError(f"levels must be 2-D, got shape {L.shape}")
    k = L.shape[1]
    rho = np.eye(k)
    p = np.zeros((k, k))
    for i in range(k):
        for j in range(i + 1, k):
            r, pv = spearman_test(L[:, i], L[:, j], n_perm=n_perm, seed=seed)
            rho[i, j] = rho[j, i] = r
            p[i, j] = p[j, i] = pv
    return rho, p


# ---------------------------------------------------------------------------
# Leave-one-sentence-out saliency
# ---------------------------------------------------------------------------

_ARROWS = {-2: "⇓", -1: "↓", 0: "=", 1: "↑", 2: "⇑"}


@dataclass(frozen=True)
class PerturbationRecord:
    sentence_index: int
    aspect: str
    base_level: int
    new_level: int
    base_prob: float        # probability of the original level, intact document
    new_prob: float         # probability of that same level, sentence removed
    delta_pp: float         # (new - base) * 100

    @property
    def arrow(self) -> str:
        return _ARROWS[self.new_level - self.base_level]


@dataclass
class PerturbationReport:
    item_id: str
    sentences: list[str]
    base_levels: dict[str, int]
    records: list[PerturbationRecord] = field(default_factory=list)

    def for_aspect(self, aspect: str) -> list[PerturbationRecord]:
        return [r for r in self.records if r.aspect == aspect]

    def most_supporting(self, aspect: str) -> PerturbationRecord:
        """The sentence whose removal hurts the original prediction the most."""
        records = self.for_aspect(aspect)
        if not records:
            raise AnalysisError(f"no perturbation records for aspect {aspect!r}")
        return min(records, key=lambda r: (r.delta_pp, r.sentence_index))

    def to_dict(self) -> dict:
        return {
            "item_id": self.item_id,
            "base_levels": dict(self.base_levels),
            "records": [{
                "sentence_index": r.sentence_index,
                "aspect": r.aspect,
                "base_level": r.base_level,
                "new_level": r.new_level,
                "base_prob": round(r.base_prob, 10),
                "new_prob": round(r.new_prob, 10),
                "delta_pp": round(r.delta_pp, 10),
            } for r in self.records],
        }

    def to_text(self) -> str:
        """Human-readable table: one block per aspect, one line per sentence."""
        level_names = ["low", "medium", "high"]
        lines = [f"item {self.item_id}: leave-one-sentence-out probe"]
        for aspect in sorted({r.aspect for r in self.records},
                             key=[a.value for a in ASPECTS].index):
            base = self.base_levels[aspect]
            lines.append(f"  {aspect} (predicted {level_names[base]}):")
            for r in sorted(self.for_aspect(aspect), key=lambda r: r.delta_pp):
                text = self.sentences[r.sentence_index]
                snippet = text if len(text) <= 48 else text[:45] + "..."
                lines.append(
                    f"    [{r.sentence_index:>3}] {r.arrow} "
                    f"{level_names[r.base_level]}->{level_names[r.new_level]} "
                    f"{r.delta_pp:+7.2f}pp  {snippet}")
        return "\n".join(lines) + "\n"


def perturb_sentences(params: ModelParams, backbone: BackboneConfig, strategy: Strategy,
                      item_id: str, X: np.ndarray, sentences: Sequence[str] | None = None,
                      ) -> PerturbationReport:
    """Score every (sentence, aspect) pair by occlusion.

    Documents with a single sentence yield an empty record list since
    removing it would leave nothing to encode.
    """
    X = np.asarray(X, dtype=np.float64)
    n = X.shape[0]
    if sentences is None:
        sentences = [f"<sentence {i}>" for i in range(n)]
    if len(sentences) != n:
        raise AnalysisError(f"{len(sentences)} sentences for {n} embedding rows")
    aspect_names = [a.value for a in ASPECTS]
    base_fwd = forward(params, backbone, X)
    base_dist = predict_distributions(base_fwd.logits, strategy)
    base_levels = np.argmax(base_dist, axis=1)
    report = PerturbationReport(
        item_id=item_id, sentences=list(sentences),
        base_levels={aspect_names[a]: int(base_levels[a]) for a in range(len(aspect_names))})
    if n < 2:
        return report
    for t in range(n):
        X_drop = np.delete(X, t, axis=0)
        fwd = forward(params, backbone, X_drop)
        dist = predict_distributions(fwd.logits, strategy)
        new_levels = np.argmax(dist, axis=1)
        for a, aspect in enumerate(aspect_names):
            lvl = int(base_levels[a])
            report.records.append(PerturbationRecord(
                sentence_index=t, aspect=aspect,
                base_level=lvl, new_level=int(new_levels[a]),
                base_prob=float(base_dist[a, lvl]), new_prob=float(dist[a, lvl]),
                delta_pp=float((dist[a, lvl] - base_dist[a, lvl]) * 100.0)))
    return report
