import json

import numpy as np
import pytest
import scipy.stats

from lyricgauge import (CVRun, HarnessError, Strategy, TrainConfig, build_examples,
                        build_report, confusion_matrix, cross_level_error_ratio,
                        evaluate_model, fold_split, macro_f1, make_folds,
                        paired_ttest, run_cv, train_model, write_confusion_csvs)
from lyricgauge.harness import _batches


def test_confusion_matrix_rows_are_truth():
    conf = confusion_matrix([0, 0, 1, 2, 2], [0, 1, 1, 0, 2])
    np.testing.assert_array_equal(conf, [[1, 1, 0], [0, 1, 0], [1, 0, 1]])
    with pytest.raises(HarnessError):
        confusion_matrix([0, 1], [0])


def test_macro_f1_hand_computed_example():
    # per-class F1: low 0.8, medium 0.5, high 2/3; macro (0.8 + 0.5 + 2/3)/3
    conf = np.array([[2, 1, 0], [0, 1, 1], [0, 0, 1]])
    np.testing.assert_allclose(macro_f1(conf), 59.0 / 90.0, atol=1e-12)


def test_macro_f1_absent_class_counts_as_zero():
    conf = np.array([[4, 0, 0], [0, 0, 0], [0, 0, 0]])  # constant low predictor
    np.testing.assert_allclose(macro_f1(conf), 1.0 / 3.0, atol=1e-12)


def test_macro_f1_perfect_prediction():
    assert macro_f1(np.diag([7, 3, 2])) == 1.0


def test_macro_f1_matches_constant_predictor_closed_form():
    # predicting the majority class always: F1 = 2p/(1+p) there, 0 elsewhere
    for n_low, n_med, n_high in [(844, 190, 85), (10, 5, 5), (3, 2, 1)]:
        total = n_low + n_med + n_high
        p = n_low / total
        conf = np.zeros((3, 3), dtype=int)
        conf[:, 0] = [n_low, n_med, n_high]
        np.testing.assert_allclose(macro_f1(conf), 2 * p / (3 * (1 + p)), atol=1e-12)


def test_cross_level_error_ratio():
    adjacent_only = np.array([[5, 2, 0], [1, 5, 1], [0, 2, 5]])
    assert cross_level_error_ratio([adjacent_only]) == 0.0
    with_skips = np.array([[5, 1, 1], [0, 5, 0], [2, 0, 5]])
    assert cross_level_error_ratio([with_skips]) == pytest.approx(3 / 4)
    assert cross_level_error_ratio([np.diag([3, 3, 3])]) == 0.0  # no errors at all


def test_paired_ttest_conventions_and_scipy_agreement():
    assert paired_ttest([1.0, 2.0, 3.0], [1.0, 2.0, 3.0]) == (0.0, 1.0)
    t, p = paired_ttest([2.0, 3.0, 4.0], [1.0, 2.0, 3.0])
    assert t == np.inf and p == 0.0
    rng = np.random.default_rng(0)
    a = rng.normal(size=12)
    b = rng.normal(size=12)
    t, p = paired_ttest(a, b)
    ref = scipy.stats.ttest_rel(a, b)
    np.testing.assert_allclose([t, p], [ref.statistic, ref.pvalue], atol=1e-12)
    with pytest.raises(HarnessError):
        paired_ttest([1.0], [2.0])


def test_batches_merges_trailing_singleton():
    order = np.arange(7)
    plain = _batches(order, 3, merge_singleton=False)
    assert [len(b) for b in plain] == [3, 3, 1]
    merged = _batches(order, 3, merge_singleton=True)
    assert [len(b) for b in merged] == [3, 4]


# ---------------------------------------------------------------------------
# Training protocol
# ---------------------------------------------------------------------------

def _examples(corpus, cache):
    return build_examples(corpus, cache)


def test_build_examples_shapes(small_corpus, small_cache):
    examples = _examples(small_corpus, small_cache)
    assert len(examples) == len(small_corpus)
    for ex, item in zip(examples, small_corpus):
        assert ex.item_id == item.item_id
        assert ex.X.shape == (len(item.sentences()), small_cache.dim)
        np.testing.assert_array_equal(ex.labels, item.ratings.level_vector())


def test_train_model_runs_and_restores_best(small_corpus, small_cache):
    examples = _examples(small_corpus, small_cache)
    config = TrainConfig(strategy=Strategy.PLAIN, seed=0, hidden=6, proj=8,
                         max_epochs=6, batch_size=8, patience=2, lr=0.02)
    backbone = config.backbone(small_cache)
    result = train_model(examples[:18], examples[18:], backbone, config)
    assert 1 <= result.n_epochs <= 6
    assert result.best_epoch <= result.n_epochs
    scores = [e["dev_macro_f1"] for e in result.log]
    assert result.best_dev_score == pytest.approx(max(scores))
    outcome = evaluate_model(result.params, backbone, examples[18:], Strategy.PLAIN)
    assert outcome.avg_f1 == pytest.approx(result.best_dev_score)


def test_train_model_logs_rank_loss(small_corpus, small_cache):
    examples = _examples(small_corpus, small_cache)
    config = TrainConfig(strategy=Strategy.RANK, seed=0, hidden=6, proj=8,
                         max_epochs=2, batch_size=8, patience=5)
    result = train_model(examples[:18], examples[18:], config.backbone(small_cache),
                         config)
    for entry in result.log:
        assert "loss_cls" in entry and "loss_rank" in entry


def test_train_model_requires_dev(small_corpus, small_cache):
    examples = _examples(small_corpus, small_cache)
    config = TrainConfig(strategy=Strategy.PLAIN, max_epochs=1)
    with pytest.raises(HarnessError):
        train_model(examples, [], config.backbone(small_cache), config)


def test_fold_split_is_leak_free_and_deterministic(small_corpus):
    plan = make_folds(small_corpus, 4, seed=2)
    for fold in range(4):
        train_ids, dev_ids, test_ids = fold_split(plan, fold, seed=1)
        assert not set(train_ids) & set(test_ids)
        assert not set(dev_ids) & set(test_ids)
        assert not set(train_ids) & set(dev_ids)
        assert sorted(train_ids + dev_ids + test_ids) == sorted(
            i.item_id for i in small_corpus)
        assert len(dev_ids) == max(1, round(len(train_ids + dev_ids) * plan.dev_fraction))
        again = fold_split(plan, fold, seed=1)
        assert again == (train_ids, dev_ids, test_ids)


def test_run_cv_produces_consistent_report(small_corpus, small_cache):
    plan = make_folds(small_corpus, 3, seed=7)
    config = TrainConfig(strategy=Strategy.SOFT, seed=0, hidden=6, proj=8,
                         max_epochs=2, batch_size=8, patience=2)
    run = run_cv(small_corpus, small_cache, plan, config)
    assert len(run.folds) == 3
    covered = sorted(iid for f in run.folds for iid in f.test_ids)
    assert covered == sorted(i.item_id for i in small_corpus)
    assert run.pooled_confusions().sum() == len(small_corpus) * 5
    assert 0.0 <= run.mean_f1() <= 1.0

    report = build_report({"soft": run}, plan, corpus_digest="x", cache_digest="y")
    block = report.payload["strategies"]["soft"]
    assert block["mean_macro_f1"] == pytest.approx(run.mean_f1())
    assert len(block["fold_macro_f1"]) == 3
    parsed = json.loads(report.to_json())
    assert "generated_unix" in parsed["meta"]
    assert "generated_unix" not in json.dumps(parsed["payload"])


def test_run_cv_rejects_foreign_fold_plan(small_corpus, small_cache):
    from lyricgauge import generate_corpus

    bigger = generate_corpus(30, seed=303)
    plan = make_folds(bigger, 3, seed=7)  # references ids beyond the corpus
    config = TrainConfig(strategy=Strategy.PLAIN, max_epochs=1, hidden=6, proj=8)
    with pytest.raises(HarnessError, match="unknown items"):
        run_cv(small_corpus, small_cache, plan, config)


def test_report_payload_is_deterministic(small_corpus, small_cache):
    plan = make_folds(small_corpus, 3, seed=7)
    config = TrainConfig(strategy=Strategy.PLAIN, seed=1, hidden=6, proj=8,
                         max_epochs=2, batch_size=8, patience=2)
    r1 = build_report({"plain": run_cv(small_corpus, small_cache, plan, config)}, plan)
    r2 = build_report({"plain": run_cv(small_corpus, small_cache, plan, config)}, plan)
    assert r1.payload_json() == r2.payload_json()


def test_confusion_csvs(tmp_path, small_corpus, small_cache):
    plan = make_folds(small_corpus, 3, seed=7)
    config = TrainConfig(strategy=Strategy.PLAIN, seed=1, hidden=6, proj=8,
                         max_epochs=1, batch_size=8)
    report = build_report({"plain": run_cv(small_corpus, small_cache, plan, config)},
                          plan)
    paths = write_confusion_csvs(report, tmp_path)
    assert [p.name for p in paths] == ["confusion_plain.csv"]
    lines = paths[0].read_text().strip().splitlines()
    assert lines[0] == "aspect,true_level,pred_low,pred_medium,pred_high"
    assert len(lines) == 1 + 5 * 3
    counts = sum(int(v) for line in lines[1:] for v in line.split(",")[2:])
    assert counts == len(small_corpus) * 5
