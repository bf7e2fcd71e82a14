"""End-to-end checks that gate a release.

Each test computes its verdict, records one pass/fail summary line (shown
after the test run), and then asserts. The heavy checks also enforce a wall
clock budget so regressions in training speed fail loudly.
"""

import math
import time
from decimal import Decimal, getcontext

import numpy as np
import pytest

from conftest import fd_gradient, record_acceptance, rel_err
from lyricgauge import (ASPECTS, BackboneConfig, Strategy, TrainConfig, backward,
                        binary_decode, binary_targets, build_examples, build_report,
                        confusion_matrix, cross_level_error_ratio, default_marker_signals,
                        fold_split, forward, generate_corpus, head_dim, init_params,
                        macro_f1, make_folds, needs_rank_head, paired_ttest,
                        perturb_sentences, ranking_classification_loss, run_cv,
                        soften_label, spearman_rho, strategy_loss, synthetic_provider,
                        train_model)
from lyricgauge.synthetic import MARKER_TOKENS

# published per-aspect label counts (low, medium, high) over 1119 items
BENCHMARK_MARGINALS = {
    "violence": (844, 190, 85),
    "substance": (743, 294, 82),
    "sex": (663, 319, 137),
    "consumerism": (880, 209, 30),
    "positive": (736, 314, 69),
}
# macro F1 reported for the constant-majority baseline on the same data
REPORTED_MAJORITY_F1 = {"violence": 28.65, "substance": 26.59, "sex": 24.76,
                        "positive": 26.46}


@pytest.fixture(scope="module")
def benchmark_bundle():
    """The corpus, cache, and fold plan used by the training-based checks."""
    items = generate_corpus(300, seed=11)
    cache = synthetic_provider(items, 10, 2, seed=11,
                               markers=default_marker_signals())
    plan = make_folds(items, 10, seed=5)
    return items, cache, plan


def _benchmark_config(strategy: Strategy) -> TrainConfig:
    return TrainConfig(strategy=strategy, seed=0, hidden=16, proj=20,
                       max_epochs=50, batch_size=10, patience=50, lr=0.02)


# ---------------------------------------------------------------------------
# 1. constant-majority baseline reproduces the published numbers
# ---------------------------------------------------------------------------

def test_constant_majority_baseline_crosscheck():
    computed = {}
    for aspect, counts in BENCHMARK_MARGINALS.items():
        assert sum(counts) == 1119
        conf = confusion_matrix([lvl for lvl, n in enumerate(counts) for _ in range(n)],
                                [0] * sum(counts))
        via_confusion = 100.0 * macro_f1(conf)
        # closed form for a predictor stuck on the majority class: only that
        # class scores, with precision p = majority share and recall 1
        p = counts[0] / sum(counts)
        closed_form = 100.0 * 2.0 * p / (3.0 * (1.0 + p))
        assert via_confusion == pytest.approx(closed_form, abs=1e-9)
        computed[aspect] = via_confusion

    deltas = {a: abs(computed[a] - REPORTED_MAJORITY_F1[a])
              for a in REPORTED_MAJORITY_F1}
    four_match = all(d <= 0.5 for d in deltas.values())
    # the 30.22 quoted for consumerism cannot be derived from these counts;
    # the marginals give 29.35 and that is the value we stand behind
    consumerism_ok = computed["consumerism"] == pytest.approx(29.35, abs=0.005)
    detail = ", ".join(f"{a[:4]}={computed[a]:.2f}" for a in BENCHMARK_MARGINALS)
    record_acceptance("1 constant-majority baseline", four_match and consumerism_ok,
                      detail)
    assert four_match, (computed, REPORTED_MAJORITY_F1)
    assert consumerism_ok, computed["consumerism"]
    assert abs(computed["consumerism"] - 30.22) > 0.5  # quoted value is unreachable


# ---------------------------------------------------------------------------
# 2. ordinal encoders against independent oracles
# ---------------------------------------------------------------------------

def test_ordinal_encoders_exact():
    started = time.monotonic()
    getcontext().prec = 50
    worst = 0.0
    for k in range(2, 6):
        for y in range(k):
            weights = [Decimal(-abs(y - i)).exp() for i in range(k)]
            total = sum(weights)
            oracle = np.array([float(w / total) for w in weights])
            worst = max(worst, float(np.abs(soften_label(y, k) - oracle).max()))
    soften_ok = worst < 1e-10

    roundtrip_ok = all(
        np.array_equal(binary_decode(binary_targets(y)),
                       np.eye(3)[y]) for y in range(3))

    grid = np.linspace(0.0, 1.0, 101)
    grid_ok = True
    for p1 in grid:
        for p2 in grid:
            dist = binary_decode(np.array([p1, p2]))
            if dist.min() < 0.0 or abs(dist.sum() - 1.0) > 1e-12:
                grid_ok = False
    elapsed = time.monotonic() - started
    ok = soften_ok and roundtrip_ok and grid_ok and elapsed < 1.0
    record_acceptance("2 ordinal encoders", ok,
                      f"soften err {worst:.1e}, {elapsed:.2f}s")
    assert soften_ok, worst
    assert roundtrip_ok and grid_ok
    assert elapsed < 1.0


# ---------------------------------------------------------------------------
# 3. per-aspect gate properties
# ---------------------------------------------------------------------------

def test_gate_residual_properties():
    started = time.monotonic()
    rng = np.random.default_rng(41)
    residual_ok = sign_ok = closed_ok = True
    for d in sorted({2, 64, *map(int, rng.integers(2, 65, size=8))}):
        config = BackboneConfig(d_sem=10, d_emo=2, hidden=5, proj=d)
        params = init_params(config, 3, False, seed=int(d))
        X = rng.normal(size=(3, config.d_in))
        fwd = forward(params, config, X)
        S = np.exp(fwd.x_in @ params.tensors["attn_W"])
        S = S / S.sum(axis=-1, keepdims=True)
        # output = input + input * softmax weights, elementwise per aspect
        if not np.allclose(fwd.x_out - fwd.x_in, fwd.x_in * S, atol=1e-12):
            residual_ok = False
        if not np.array_equal(np.sign(fwd.x_out), np.broadcast_to(
                np.sign(fwd.x_in), fwd.x_out.shape)):
            sign_ok = False
        params.tensors["attn_W"][:] = 0.0  # uniform gate: multiplier 1 + 1/d
        fwd0 = forward(params, config, X)
        expected = np.broadcast_to(fwd0.x_in * (1.0 + 1.0 / d), fwd0.x_out.shape)
        if np.abs(fwd0.x_out - expected).max() >= 1e-9:
            closed_ok = False
    elapsed = time.monotonic() - started
    ok = residual_ok and sign_ok and closed_ok and elapsed < 1.0
    record_acceptance("3 gate residual", ok, f"{elapsed:.2f}s")
    assert residual_ok and sign_ok and closed_ok
    assert elapsed < 1.0


# ---------------------------------------------------------------------------
# 4. analytic gradients of every loss through the whole network
# ---------------------------------------------------------------------------

def test_gradient_correctness_all_losses():
    started = time.monotonic()
    config = BackboneConfig(d_sem=10, d_emo=2, hidden=6, proj=8)
    worst = {}
    for strategy in Strategy:
        errs = []
        for seed in (0, 1, 2):
            rng = np.random.default_rng([seed, 555])
            params = init_params(config, head_dim(strategy),
                                 needs_rank_head(strategy), seed=seed)
            Xa = rng.normal(size=(4, config.d_in))
            Xb = rng.normal(size=(3, config.d_in))
            la = rng.integers(0, 3, size=5)
            lb = rng.integers(0, 3, size=5)

            if strategy is Strategy.RANK:
                def loss_of(p):
                    fa, fb = forward(p, config, Xa), forward(p, config, Xb)
                    return ranking_classification_loss(p, config, fa, fb, la, lb)[0]
                fa, fb = forward(params, config, Xa), forward(params, config, Xb)
                grads = ranking_classification_loss(params, config, fa, fb, la, lb)[3]
            else:
                def loss_of(p):
                    return strategy_loss(forward(p, config, Xa).logits, la, strategy)[0]
                fwd = forward(params, config, Xa)
                _, dlogits = strategy_loss(fwd.logits, la, strategy)
                grads = backward(params, config, fwd, dlogits)

            analytic = np.concatenate([grads[n].ravel() for n in params.names()])
            idx = rng.choice(params.n_scalars(), size=60, replace=False)
            fd = fd_gradient(loss_of, params, idx)
            errs.append(rel_err(fd, analytic[idx], floor=1e-3).max())
        worst[strategy.value] = max(errs)
    elapsed = time.monotonic() - started
    ok = max(worst.values()) < 1e-4 and elapsed < 120.0
    detail = ", ".join(f"{k}={v:.1e}" for k, v in worst.items()) + f", {elapsed:.0f}s"
    record_acceptance("4 loss gradients", ok, detail)
    assert max(worst.values()) < 1e-4, worst
    assert elapsed < 120.0


# ---------------------------------------------------------------------------
# 5. every strategy learns the synthetic corpus; ordinal ones skip levels less
# ---------------------------------------------------------------------------

def test_learnability_all_strategies(benchmark_bundle):
    started = time.monotonic()
    items, cache, plan = benchmark_bundle
    means, ratios = {}, {}
    for strategy in (Strategy.PLAIN, Strategy.SOFT, Strategy.BINARY, Strategy.RANK):
        run = run_cv(items, cache, plan, _benchmark_config(strategy))
        means[strategy.value] = run.mean_f1()
        ratios[strategy.value] = cross_level_error_ratio(run.pooled_confusions())
    elapsed = time.monotonic() - started

    all_learn = all(m >= 0.95 for m in means.values())
    ordinal_closer = all(ratios[s] <= ratios["plain"]
                         for s in ("soft", "binary", "rank"))
    ok = all_learn and ordinal_closer and elapsed < 900.0
    detail = (", ".join(f"{k}={v:.3f}" for k, v in means.items())
              + f"; xlevel " + ", ".join(f"{k}={v:.2f}" for k, v in ratios.items())
              + f"; {elapsed:.0f}s")
    record_acceptance("5 strategy learnability", ok, detail)
    assert all_learn, means
    assert ordinal_closer, ratios
    assert elapsed < 900.0


# ---------------------------------------------------------------------------
# 6. occlusion saliency finds the sentence that carries the label
# ---------------------------------------------------------------------------

def test_saliency_ranks_marker_sentence_first(benchmark_bundle):
    started = time.monotonic()
    items, cache, plan = benchmark_bundle
    config = _benchmark_config(Strategy.SOFT)
    train_ids, dev_ids, test_ids = fold_split(plan, 0, config.seed)
    by_id = {item.item_id: item for item in items}
    backbone = config.backbone(cache)
    result = train_model(build_examples([by_id[i] for i in train_ids], cache),
                         build_examples([by_id[i] for i in dev_ids], cache),
                         backbone, config)

    marker_words = {aspect: set(MARKER_TOKENS[aspect]) for aspect in ASPECTS}
    hits = total = 0
    for iid in test_ids:
        item = by_id[iid]
        sentences = item.sentences()
        report = perturb_sentences(result.params, backbone, Strategy.SOFT,
                                   iid, cache.item_matrix(item), sentences)
        for a, aspect in enumerate(ASPECTS):
            if item.ratings.level_vector()[a] == 0:
                continue  # low items carry no marker sentence for the aspect
            marker_idx = next(i for i, s in enumerate(sentences)
                              if marker_words[aspect] & set(s.split()))
            total += 1
            if report.most_supporting(aspect.value).sentence_index == marker_idx:
                hits += 1
    elapsed = time.monotonic() - started
    rate = hits / total
    ok = rate >= 0.9 and elapsed < 120.0
    record_acceptance("6 occlusion saliency", ok,
                      f"top-1 {hits}/{total} = {rate:.2%}, {elapsed:.0f}s")
    assert rate >= 0.9, (hits, total)
    assert elapsed < 120.0


# ---------------------------------------------------------------------------
# 7. statistics against brute-force oracles
# ---------------------------------------------------------------------------

def _oracle_rho(x, y):
    def ranks(v):
        out = []
        for vi in v:
            less = sum(1 for vj in v if vj < vi)
            tied = sum(1 for vj in v if vj == vi)
            out.append(less + 0.5 * (tied - 1) + 1.0)
        return out

    rx, ry = ranks(x), ranks(y)
    n = len(x)
    mx, my = math.fsum(rx) / n, math.fsum(ry) / n
    cov = math.fsum((a - mx) * (b - my) for a, b in zip(rx, ry))
    vx = math.fsum((a - mx) ** 2 for a in rx)
    vy = math.fsum((b - my) ** 2 for b in ry)
    if vx == 0.0 or vy == 0.0:
        return 0.0
    return cov / math.sqrt(vx * vy)


def test_rank_statistics_oracles():
    rng = np.random.default_rng(77)
    worst = 0.0
    for trial in range(1000):
        n = int(rng.integers(3, 11))
        if trial % 2:  # integer draws force ties
            x = rng.integers(0, 4, size=n).astype(float)
            y = rng.integers(0, 4, size=n).astype(float)
        else:
            x = rng.normal(size=n)
            y = rng.normal(size=n)
        worst = max(worst, abs(spearman_rho(x, y) - _oracle_rho(x, y)))
    rho_ok = worst < 1e-12

    x = rng.normal(size=25)
    ttest_ok = paired_ttest(x, x) == (0.0, 1.0)
    ok = rho_ok and ttest_ok
    record_acceptance("7 rank statistics", ok, f"rho err {worst:.1e}")
    assert rho_ok, worst
    assert ttest_ok


# ---------------------------------------------------------------------------
# 8. identical seeds reproduce the report byte for byte
# ---------------------------------------------------------------------------

def test_rerun_determinism(small_corpus, small_cache):
    plan = make_folds(small_corpus, 3, seed=7)

    def one_run():
        runs = {}
        for strategy in (Strategy.PLAIN, Strategy.SOFT):
            config = TrainConfig(strategy=strategy, seed=3, hidden=6, proj=8,
                                 max_epochs=3, batch_size=8, patience=3)
            runs[strategy.value] = run_cv(small_corpus, small_cache, plan, config)
        return build_report(runs, plan, corpus_digest="c", cache_digest="e")

    first = one_run().payload_json()
    second = one_run().payload_json()
    ok = first == second
    record_acceptance("8 rerun determinism", ok, f"{len(first)} payload bytes")
    assert ok


# ---------------------------------------------------------------------------
# 9. the companion exporter writes caches this library can read back
# ---------------------------------------------------------------------------

def test_exporter_cache_contract(tmp_path):
    exporter = pytest.importorskip("lyricgauge_exporter")
    from lyricgauge import expected_keys, open_cache, write_manifest

    items = generate_corpus(2, seed=8)
    manifest = tmp_path / "manifest.jsonl"
    write_manifest(items, manifest, tmp_path / "lyrics")
    config = exporter.ExportConfig(
        manifest=manifest, lyrics_root=tmp_path / "lyrics",
        out=tmp_path / "cache.bin", semantic_model="hash:12:7",
        emotion_model="hash:4:9", batch_size=3)
    exporter.export_cache(config)

    cache = open_cache(tmp_path / "cache.bin", corpus=items)
    coverage_ok = set(cache.keys()) == expected_keys(items)
    dims_ok = (cache.d_sem, cache.d_emo) == (12, 4)

    rerun = exporter.ExportConfig(
        manifest=manifest, lyrics_root=tmp_path / "lyrics",
        out=tmp_path / "rerun.bin", semantic_model="hash:12:7",
        emotion_model="hash:4:9", batch_size=1)
    exporter.export_cache(rerun)
    cmp = exporter.compare_caches(tmp_path / "cache.bin", tmp_path / "rerun.bin")
    rerun_ok = cmp.within(1e-6)

    ok = coverage_ok and dims_ok and rerun_ok
    record_acceptance("9 exporter contract", ok,
                      f"{len(cache)} keys, dims {cache.d_sem}+{cache.d_emo}, "
                      f"rerun diff {cmp.max_abs_diff:.1e}")
    assert coverage_ok and dims_ok and rerun_ok
