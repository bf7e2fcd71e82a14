"""Training loop, cross-validated benchmark and evaluation reports.

Protocol: items are dealt into stratified folds up front; for each fold the
remaining pool donates a small seeded dev slice for early stopping and the
rest trains. The monitored score is the macro F1 averaged over all five
aspects on the dev slice; training keeps the best-scoring snapshot and stops
after `patience` epochs without improvement.

Reports split into a deterministic `payload` (identical bytes for identical
inputs and seeds) and a `meta` block (timestamps, durations) so reruns can be
compared byte for byte.
"""

from __future__ import annotations

import csv
import json
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
import scipy.stats

from .cache import EmbeddingCache, validate_coverage
from .corpus import ASPECTS, FoldPlan, MusicItem, N_LEVELS
from .model import (AdamState, BackboneConfig, ModelParams, adam_step, backward,
                    forward, init_adam, init_params, zero_grads)
from .ordinal import (Strategy, head_dim, needs_rank_head, ranking_classification_loss,
                      sample_rank_pairs, strategy_decode, strategy_loss)


class HarnessError(ValueError):
    """Raised for protocol violations such as train/test leakage."""


# ---------------------------------------------------------------------------
# Metrics
# ---------------------------------------------------------------------------

def confusion_matrix(y_true: Sequence[int], y_pred: Sequence[int],
                     n_classes: int = N_LEVELS) -> np.ndarray:
    """Counts with true levels on rows and predicted levels on columns."""
    yt = np.asarray(y_true, dtype=np.int64)
    yp = np.asarray(y_pred, dtype=np.int64)
    if yt.shape != yp.shape:
        raise HarnessError(f"length mismatch: {yt.shape} vs {yp.shape}")
    conf = np.zeros((n_classes, n_classes), dtype=np.int64)
    for t, p in zip(yt, yp):
        conf[t, p] += 1
    return conf


def macro_f1(confusion: np.ndarray) -> float:
    """Unweighted mean of per-class F1; a class with no support and no
    predictions contributes 0, so constant predictors are penalized."""
    conf = np.asarray(confusion, dtype=np.float64)
    if conf.ndim != 2 or conf.shape[0] != conf.shape[1]:
        raise HarnessError(f"confusion matrix must be square, got {conf.shape}")
    f1s = []
    for c in range(conf.shape[0]):
        tp = conf[c, c]
        pred = conf[:, c].sum()
        true = conf[c, :].sum()
        precision = tp / pred if pred > 0 else 0.0
        recall = tp / true if true > 0 else 0.0
        f1s.append(2 * precision * recall / (precision + recall)
                   if precision + recall > 0 else 0.0)
    return float(np.mean(f1s))


def cross_level_error_ratio(confusions: Sequence[np.ndarray]) -> float:
    """Share of errors that skip the middle level (low<->high), pooled over
    the given confusion matrices. No errors at all counts as 0."""
    skip = 0
    errors = 0
    for conf in confusions:
        conf = np.asarray(conf)
        errors += int(conf.sum() - np.trace(conf))
        skip += int(conf[0, 2] + conf[2, 0])
    return skip / errors if errors else 0.0


def paired_ttest(a: Sequence[float], b: Sequence[float]) -> tuple[float, float]:
    """Two-sided paired t-test. Identical inputs give (0, 1); a constant
    nonzero difference gives (+/-inf, 0)."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1 or a.size < 2:
        raise HarnessError("paired test needs two equal-length series of >= 2 scores")
    d = a - b
    mean = float(d.mean())
    sd = float(d.std(ddof=1))
    n = d.size
    if sd == 0.0:
        if mean == 0.0:
            return 0.0, 1.0
        return float(np.sign(mean)) * float("inf"), 0.0
    t = mean / (sd / np.sqrt(n))
    p = 2.0 * float(scipy.stats.t.sf(abs(t), df=n - 1))
    return float(t), p


# ---------------------------------------------------------------------------
# Examples and training
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TrainConfig:
    strategy: Strategy
    seed: int = 0
    hidden: int = 12
    proj: int = 16
    pooling: str = "attention"
    max_epochs: int = 200
    batch_size: int = 40
    lr: float = 0.001
    patience: int = 10

    def backbone(self, cache: EmbeddingCache) -> BackboneConfig:
        return BackboneConfig(d_sem=cache.d_sem, d_emo=cache.d_emo, hidden=self.hidden,
                              proj=self.proj, pooling=self.pooling)


@dataclass
class TrainExample:
    item_id: str
    X: np.ndarray        # (T, d_sem + d_emo) sentence embeddings
    labels: np.ndarray   # (n_aspects,) int levels


def build_examples(items: Sequence[MusicItem], cache: EmbeddingCache) -> list[TrainExample]:
    return [TrainExample(item_id=item.item_id, X=cache.item_matrix(item),
                         labels=item.ratings.level_vector())
            for item in items]


@dataclass
class TrainResult:
    params: ModelParams
    backbone: BackboneConfig
    strategy: Strategy
    log: list[dict]
    best_epoch: int
    best_dev_score: float
    n_epochs: int


def _batches(order: np.ndarray, batch_size: int, merge_singleton: bool) -> list[np.ndarray]:
    chunks = [order[i: i + batch_size] for i in range(0, len(order), batch_size)]
    if merge_singleton and len(chunks) > 1 and len(chunks[-1]) == 1:
        chunks[-2] = np.concatenate([chunks[-2], chunks[-1]])
        chunks.pop()
    return chunks


def train_model(train: Sequence[TrainExample], dev: Sequence[TrainExample],
                backbone: BackboneConfig, config: TrainConfig) -> TrainResult:
    """Fit one model with early stopping; returns the best dev snapshot."""
    if not train:
        raise HarnessError("training set is empty")
    if not dev:
        raise HarnessError("dev set is empty; early stopping needs one")
    strategy = config.strategy
    params = init_params(backbone, head_dim(strategy), needs_rank_head(strategy),
                         seed=config.seed)
    adam = init_adam(params)
    rng = np.random.default_rng([config.seed, 7919])
    best_params = params.copy()
    best_score = -np.inf
    best_epoch = 0
    stale = 0
    log: list[dict] = []
    for epoch in range(1, config.max_epochs + 1):
        order = rng.permutation(len(train))
        sum_cls = sum_rank = 0.0
        n_terms = 0
        for batch in _batches(order, config.batch_size, strategy is Strategy.RANK):
            grads = zero_grads(params)
            if strategy is Strategy.RANK:
                pair_seed = int(rng.integers(2 ** 31))
                pairs = sample_rank_pairs([int(i) for i in batch], pair_seed)
                scale = 1.0 / len(pairs)
                for i, j in pairs:
                    fa = forward(params, backbone, train[i].X)
                    fb = forward(params, backbone, train[j].X)
                    _, l_cls, l_rank, _ = ranking_classification_loss(
                        params, backbone, fa, fb, train[i].labels, train[j].labels,
                        into=grads, scale=scale)
                    sum_cls += l_cls
                    sum_rank += l_rank
                    n_terms += 1
            else:
                scale = 1.0 / len(batch)
                for i in batch:
                    fwd = forward(params, backbone, train[i].X)
                    loss, dlogits = strategy_loss(fwd.logits, train[i].labels, strategy)
                    backward(params, backbone, fwd, scale * dlogits, into=grads)
                    sum_cls += loss
                    n_terms += 1
            adam_step(params, grads, adam, lr=config.lr)
        dev_eval = evaluate_model(params, backbone, dev, strategy)
        entry = {"epoch": epoch, "loss_cls": sum_cls / n_terms,
                 "dev_macro_f1": dev_eval.avg_f1}
        if strategy is Strategy.RANK:
            entry["loss_rank"] = sum_rank / n_terms
        log.append(entry)
        if dev_eval.avg_f1 > best_score + 1e-12:
            best_score = dev_eval.avg_f1
            best_params = params.copy()
            best_epoch = epoch
            stale = 0
        else:
            stale += 1
            if stale >= config.patience:
                break
    return TrainResult(params=best_params, backbone=backbone, strategy=strategy,
                       log=log, best_epoch=best_epoch, best_dev_score=best_score,
                       n_epochs=len(log))


# ---------------------------------------------------------------------------
# Evaluation
# ---------------------------------------------------------------------------

@dataclass
class EvalOutcome:
    predictions: dict[str, list[int]]      # item_id -> level per aspect
    confusions: np.ndarray                  # (n_aspects, 3, 3), rows true
    per_aspect_f1: np.ndarray               # (n_aspects,)
    avg_f1: float


def evaluate_model(params: ModelParams, backbone: BackboneConfig,
                   examples: Sequence[TrainExample], strategy: Strategy) -> EvalOutcome:
    if not examples:
        raise HarnessError("nothing to evaluate")
    n_aspects = backbone.n_aspects
    preds: dict[str, list[int]] = {}
    y_true = np.empty((len(examples), n_aspects), dtype=np.int64)
    y_pred = np.empty((len(examples), n_aspects), dtype=np.int64)
    for row, ex in enumerate(examples):
        fwd = forward(params, backbone, ex.X)
        levels = strategy_decode(fwd.logits, strategy)
        preds[ex.item_id] = [int(v) for v in levels]
        y_true[row] = ex.labels
        y_pred[row] = levels
    confusions = np.stack([confusion_matrix(y_true[:, a], y_pred[:, a])
                           for a in range(n_aspects)])
    f1 = np.array([macro_f1(confusions[a]) for a in range(n_aspects)])
    return EvalOutcome(predictions=preds, confusions=confusions,
                       per_aspect_f1=f1, avg_f1=float(f1.mean()))


def fold_split(plan: FoldPlan, fold: int, seed: int) -> tuple[list[str], list[str], list[str]]:
    """Deterministic (train_ids, dev_ids, test_ids) for one fold."""
    test_ids = sorted(plan.fold_members(fold))
    pool = sorted(plan.training_pool(fold))
    rng = np.random.default_rng([seed, fold, 104729])
    order = rng.permutation(len(pool))
    n_dev = max(1, round(len(pool) * plan.dev_fraction))
    dev_ids = [pool[i] for i in order[:n_dev]]
    train_ids = [pool[i] for i in order[n_dev:]]
    overlap = (set(train_ids) | set(dev_ids)) & set(test_ids)
    if overlap or set(train_ids) & set(dev_ids):
        raise HarnessError(f"fold {fold} leaks items across splits: {sorted(overlap)}")
    if not train_ids:
        raise HarnessError(f"fold {fold} has no training items left after the dev split")
    return train_ids, dev_ids, test_ids


@dataclass
class FoldOutcome:
    fold: int
    test_ids: list[str]
    n_epochs: int
    best_epoch: int
    outcome: EvalOutcome


@dataclass
class CVRun:
    strategy: Strategy
    seed: int
    folds: list[FoldOutcome]

    def fold_scores(self) -> np.ndarray:
        return np.array([f.outcome.avg_f1 for f in self.folds])

    def mean_f1(self) -> float:
        return float(self.fold_scores().mean())

    def per_aspect_mean_f1(self) -> np.ndarray:
        return np.stack([f.outcome.per_aspect_f1 for f in self.folds]).mean(axis=0)

    def pooled_confusions(self) -> np.ndarray:
        return np.sum([f.outcome.confusions for f in self.folds], axis=0)

    def cross_level_ratio(self) -> float:
        return cross_level_error_ratio(list(self.pooled_confusions()))


def run_cv(items: Sequence[MusicItem], cache: EmbeddingCache, plan: FoldPlan,
           config: TrainConfig) -> CVRun:
    """Train and score one strategy across every fold of the plan."""
    validate_coverage(cache, items)
    by_id = {item.item_id: item for item in items}
    missing = [iid for iid in plan.assignments if iid not in by_id]
    if missing:
        raise HarnessError(f"fold plan references unknown items: {missing[:5]}")
    backbone = config.backbone(cache)
    folds: list[FoldOutcome] = []
    for fold in range(plan.n_folds):
        train_ids, dev_ids, test_ids = fold_split(plan, fold, config.seed)
        train = build_examples([by_id[i] for i in train_ids], cache)
        dev = build_examples([by_id[i] for i in dev_ids], cache)
        test = build_examples([by_id[i] for i in test_ids], cache)
        result = train_model(train, dev, backbone, config)
        outcome = evaluate_model(result.params, backbone, test, config.strategy)
        folds.append(FoldOutcome(fold=fold, test_ids=test_ids, n_epochs=result.n_epochs,
                                 best_epoch=result.best_epoch, outcome=outcome))
    return CVRun(strategy=config.strategy, seed=config.seed, folds=folds)


# ---------------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------------

@dataclass
class EvalReport:
    """Benchmark results split into a deterministic payload and volatile meta."""

    payload: dict
    meta: dict = field(default_factory=dict)

    def payload_json(self) -> str:
        return json.dumps(self.payload, sort_keys=True, indent=2)

    def to_json(self) -> str:
        return json.dumps({"payload": self.payload, "meta": self.meta},
                          sort_keys=True, indent=2)

    def write(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json() + "\n", encoding="utf-8")


def build_report(runs: Mapping[str, CVRun], plan: FoldPlan, *,
                 corpus_digest: str | None = None,
                 cache_digest: str | None = None,
                 started: float | None = None) -> EvalReport:
    aspect_names = [a.value for a in ASPECTS]
    payload: dict = {
        "n_folds": plan.n_folds,
        "fold_seed": plan.seed,
        "aspects": aspect_names,
        "strategies": {},
    }
    if corpus_digest:
        payload["corpus_digest"] = corpus_digest
    if cache_digest:
        payload["cache_digest"] = cache_digest
    for name, run in sorted(runs.items()):
        per_aspect = run.per_aspect_mean_f1()
        payload["strategies"][name] = {
            "seed": run.seed,
            "mean_macro_f1": round(run.mean_f1(), 10),
            "fold_macro_f1": [round(v, 10) for v in run.fold_scores()],
            "per_aspect_macro_f1": {a: round(float(v), 10)
                                    for a, v in zip(aspect_names, per_aspect)},
            "cross_level_error_ratio": round(run.cross_level_ratio(), 10),
            "pooled_confusions": {a: run.pooled_confusions()[i].tolist()
                                  for i, a in enumerate(aspect_names)},
            "epochs_per_fold": [f.n_epochs for f in run.folds],
        }
    meta = {"generated_unix": time.time()}
    if started is not None:
        meta["wall_seconds"] = time.time() - started
    return EvalReport(payload=payload, meta=meta)


def write_confusion_csvs(report: EvalReport, out_dir: str | Path) -> list[Path]:
    """One CSV per strategy: true level rows against predicted level columns."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []
    level_names = ["low", "medium", "high"]
    for name, block in sorted(report.payload.get("strategies", {}).items()):
        path = out_dir / f"confusion_{name}.csv"
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["aspect", "true_level"] + [f"pred_{n}" for n in level_names])
            for aspect, rows in sorted(block["pooled_confusions"].items()):
                for level, row in zip(level_names, rows):
                    writer.writerow([aspect, level] + list(row))
        written.append(path)
    return written
