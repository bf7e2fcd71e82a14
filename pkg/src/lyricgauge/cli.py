"""Command line front end.

Subcommands:

  build-corpus   generate a synthetic labeled corpus plus its embedding cache
  train          fit one model and write a checkpoint plus a JSONL train log
  evaluate       cross-validated benchmark across strategies, JSON + CSV report
  predict        score items with a checkpoint (refuses mismatched caches)
  perturb        leave-one-sentence-out saliency for one item
  correlate      rank correlations between aspect labels

Flag values resolve as: command line > --config JSON file > built-in default;
the output directory additionally falls back to $LYRICGAUGE_OUT. Every
command that writes files drops a run_manifest.json recording the resolved
configuration and input digests. Exit status is 0 only when nothing was
rejected.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import correlation_matrix, perturb_sentences
from .cache import open_cache, synthetic_provider, write_cache
from .checkpoint import load_checkpoint, save_checkpoint
from .corpus import ASPECTS, corpus_stats, load_manifest, make_folds, write_manifest
from .harness import (TrainConfig, build_examples, build_report, run_cv,
                      train_model, write_confusion_csvs)
from .model import forward
from .ordinal import Strategy, head_dim, needs_rank_head, predict_distributions, strategy_decode
from .synthetic import default_marker_signals, generate_corpus, min_embedding_dim

DEV_FRACTION = 1.0 / 9.0


def file_digest(path: str | Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def corpus_digest(manifest_path: str | Path, lyrics_root: str | Path) -> str:
    """Digest of the manifest bytes plus every referenced lyrics file."""
    manifest_path = Path(manifest_path)
    lyrics_root = Path(lyrics_root)
    h = hashlib.sha256()
    h.update(manifest_path.read_bytes())
    with open(manifest_path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            record = json.loads(line)
            for rel in record.get("lyrics", []):
                path = lyrics_root / rel
                if path.is_file():
                    h.update(path.read_bytes())
    return h.hexdigest()


# ---------------------------------------------------------------------------
# Config resolution
# ---------------------------------------------------------------------------

def _resolve(args: argparse.Namespace, defaults: dict[str, object]) -> dict:
    """Merge CLI values, --config file values and defaults, in that order."""
    file_cfg: dict = {}
    config_path = getattr(args, "config", None)
    if config_path:
        loaded = json.loads(Path(config_path).read_text(encoding="utf-8"))
        if not isinstance(loaded, dict):
            raise ValueError(f"config file {config_path} must hold a JSON object")
        file_cfg = loaded
    resolved = {}
    for key, default in defaults.items():
        cli_value = getattr(args, key, None)
        if cli_value is not None:
            resolved[key] = cli_value
        elif key in file_cfg:
            resolved[key] = file_cfg[key]
        else:
            resolved[key] = default
    return resolved


def _out_dir(resolved: dict, default: str) -> Path:
    out = resolved.get("out") or os.environ.get("LYRICGAUGE_OUT") or default
    resolved["out"] = str(out)
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _write_run_manifest(out_dir: Path, command: str, resolved: dict,
                        digests: dict[str, str]) -> None:
    doc = {"command": command, "config": resolved, "tool_version": __version__,
           "timestamp_unix": time.time(), **digests}
    with open(out_dir / "run_manifest.json", "w", encoding="utf-8") as fh:
        json.dump(doc, fh, sort_keys=True, indent=2)
        fh.write("\n")


def _train_config(resolved: dict) -> TrainConfig:
    return TrainConfig(strategy=Strategy(resolved["strategy"]), seed=resolved["seed"],
                       hidden=resolved["hidden"], proj=resolved["proj"],
                       pooling=resolved["pooling"], max_epochs=resolved["epochs"],
                       batch_size=resolved["batch_size"], lr=resolved["lr"],
                       patience=resolved["patience"])


def _check_cache_digest(ck_extra: dict, cache_path: str) -> str | None:
    actual = file_digest(cache_path)
    stored = ck_extra.get("cache_digest")
    if stored and stored != actual:
        print("embedding cache does not match the checkpoint's training cache:\n"
              f"  checkpoint expects {stored}\n"
              f"  {cache_path} is     {actual}", file=sys.stderr)
        return None
    return actual


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

_MODEL_KEYS = {"strategy": "plain", "seed": 0, "epochs": 200, "batch_size": 40,
               "lr": 0.001, "hidden": 12, "proj": 16, "pooling": "attention",
               "patience": 10}


def cmd_build_corpus(args: argparse.Namespace) -> int:
    resolved = _resolve(args, {"items": 120, "seed": 0, "d_sem": 16, "d_emo": 4,
                               "out": None})
    out = _out_dir(resolved, "corpus_out")
    resolved["items"] = int(resolved["items"])  # flag is untyped (predict reuses it for ids)
    dim = resolved["d_sem"] + resolved["d_emo"]
    if dim < min_embedding_dim():
        raise ValueError(f"d_sem + d_emo must be >= {min_embedding_dim()}, got {dim}")
    items = generate_corpus(resolved["items"], resolved["seed"])
    manifest = out / "manifest.jsonl"
    lyrics_root = out / "lyrics"
    write_manifest(items, manifest, lyrics_root)
    cache = synthetic_provider(items, resolved["d_sem"], resolved["d_emo"],
                               resolved["seed"], markers=default_marker_signals())
    cache_path = out / "embeddings.bin"
    write_cache(cache, cache_path)
    stats = corpus_stats(items)
    digests = {"corpus_digest": corpus_digest(manifest, lyrics_root),
               "cache_digest": file_digest(cache_path)}
    _write_run_manifest(out, "build-corpus", resolved, digests)
    print(f"wrote {stats['n_items']} items ({stats['n_sentences']} sentences) to {out}")
    return 0


def cmd_train(args: argparse.Namespace) -> int:
    resolved = _resolve(args, {"manifest": None, "lyrics_root": None, "cache": None,
                               "out": None, **_MODEL_KEYS})
    for key in ("manifest", "lyrics_root", "cache"):
        if not resolved[key]:
            raise ValueError(f"--{key.replace('_', '-')} is required")
    out = _out_dir(resolved, "train_out")
    items = load_manifest(resolved["manifest"], resolved["lyrics_root"])
    cache = open_cache(resolved["cache"], corpus=items)
    config = _train_config(resolved)

    rng = np.random.default_rng([config.seed, 271])
    order = rng.permutation(len(items))
    n_dev = max(1, round(len(items) * DEV_FRACTION))
    dev_items = [items[i] for i in order[:n_dev]]
    train_items = [items[i] for i in order[n_dev:]]
    backbone = config.backbone(cache)
    result = train_model(build_examples(train_items, cache),
                         build_examples(dev_items, cache), backbone, config)

    digests = {"corpus_digest": corpus_digest(resolved["manifest"], resolved["lyrics_root"]),
               "cache_digest": file_digest(resolved["cache"])}
    save_checkpoint(out / "model.ckpt", result.params, backbone,
                    head_dim(config.strategy), needs_rank_head(config.strategy),
                    config.strategy.value, extra=digests)
    with open(out / "train_log.jsonl", "w", encoding="utf-8") as fh:
        for entry in result.log:
            fh.write(json.dumps(entry, sort_keys=True) + "\n")
    _write_run_manifest(out, "train", resolved, digests)
    print(f"trained {config.strategy.value} for {result.n_epochs} epochs "
          f"(best dev macro F1 {result.best_dev_score:.4f} at epoch {result.best_epoch}); "
          f"checkpoint in {out}")
    return 0


def cmd_evaluate(args: argparse.Namespace) -> int:
    resolved = _resolve(args, {"manifest": None, "lyrics_root": None, "cache": None,
                               "strategies": "plain,soft,binary,rank", "folds": 10,
                               "out": None, **_MODEL_KEYS})
    for key in ("manifest", "lyrics_root", "cache"):
        if not resolved[key]:
            raise ValueError(f"--{key.replace('_', '-')} is required")
    out = _out_dir(resolved, "eval_out")
    started = time.time()
    items = load_manifest(resolved["manifest"], resolved["lyrics_root"])
    cache = open_cache(resolved["cache"], corpus=items)
    plan = make_folds(items, resolved["folds"], resolved["seed"],
                      dev_fraction=DEV_FRACTION)
    names = [s.strip() for s in resolved["strategies"].split(",") if s.strip()]
    runs = {}
    for name in names:
        config = _train_config({**resolved, "strategy": name})
        runs[name] = run_cv(items, cache, plan, config)
        print(f"{name}: mean macro F1 {runs[name].mean_f1():.4f} "
              f"over {plan.n_folds} folds")
    digests = {"corpus_digest": corpus_digest(resolved["manifest"], resolved["lyrics_root"]),
               "cache_digest": file_digest(resolved["cache"])}
    report = build_report(runs, plan, corpus_digest=digests["corpus_digest"],
                          cache_digest=digests["cache_digest"], started=started)
    report.write(out / "report.json")
    write_confusion_csvs(report, out)
    _write_run_manifest(out, "evaluate", resolved, digests)
    print(f"report written to {out / 'report.json'}")
    return 0


def cmd_predict(args: argparse.Namespace) -> int:
    resolved = _resolve(args, {"checkpoint": None, "cache": None, "manifest": None,
                               "lyrics_root": None, "items": None, "out": None})
    for key in ("checkpoint", "cache", "manifest", "lyrics_root"):
        if not resolved[key]:
            raise ValueError(f"--{key.replace('_', '-')} is required")
    ck = load_checkpoint(resolved["checkpoint"])
    if _check_cache_digest(ck.extra, resolved["cache"]) is None:
        return 1
    items = load_manifest(resolved["manifest"], resolved["lyrics_root"])
    cache = open_cache(resolved["cache"], corpus=items)
    wanted = None
    if resolved["items"]:
        wanted = {s.strip() for s in resolved["items"].split(",") if s.strip()}
        known = {item.item_id for item in items}
        unknown = sorted(wanted - known)
        if unknown:
            raise ValueError(f"unknown item ids: {', '.join(unknown)}")
    strategy = Strategy(ck.strategy)
    level_names = ["low", "medium", "high"]
    output: dict = {"strategy": strategy.value, "items": {}}
    for item in items:
        if wanted is not None and item.item_id not in wanted:
            continue
        fwd = forward(ck.params, ck.config, cache.item_matrix(item))
        levels = strategy_decode(fwd.logits, strategy)
        dists = predict_distributions(fwd.logits, strategy)
        output["items"][item.item_id] = {
            "levels": {a.value: level_names[levels[i]] for i, a in enumerate(ASPECTS)},
            "distributions": {a.value: [round(float(p), 6) for p in dists[i]]
                              for i, a in enumerate(ASPECTS)},
        }
    text = json.dumps(output, sort_keys=True, indent=2)
    if resolved["out"]:
        Path(resolved["out"]).parent.mkdir(parents=True, exist_ok=True)
        Path(resolved["out"]).write_text(text + "\n", encoding="utf-8")
        print(f"predictions written to {resolved['out']}")
    else:
        print(text)
    return 0


def cmd_perturb(args: argparse.Namespace) -> int:
    resolved = _resolve(args, {"checkpoint": None, "cache": None, "manifest": None,
                               "lyrics_root": None, "item": None, "out": None})
    for key in ("checkpoint", "cache", "manifest", "lyrics_root", "item"):
        if not resolved[key]:
            raise ValueError(f"--{key.replace('_', '-')} is required")
    ck = load_checkpoint(resolved["checkpoint"])
    if _check_cache_digest(ck.extra, resolved["cache"]) is None:
        return 1
    items = load_manifest(resolved["manifest"], resolved["lyrics_root"])
    cache = open_cache(resolved["cache"], corpus=items)
    by_id = {item.item_id: item for item in items}
    if resolved["item"] not in by_id:
        raise ValueError(f"unknown item id: {resolved['item']}")
    item = by_id[resolved["item"]]
    report = perturb_sentences(ck.params, ck.config, Strategy(ck.strategy),
                               item.item_id, cache.item_matrix(item),
                               sentences=item.sentences())
    print(report.to_text(), end="")
    if resolved["out"]:
        Path(resolved["out"]).parent.mkdir(parents=True, exist_ok=True)
        with open(resolved["out"], "w", encoding="utf-8") as fh:
            json.dump(report.to_dict(), fh, sort_keys=True, indent=2)
            fh.write("\n")
        print(f"records written to {resolved['out']}")
    return 0


def cmd_correlate(args: argparse.Namespace) -> int:
    resolved = _resolve(args, {"manifest": None, "lyrics_root": None, "seed": 0,
                               "out": None})
    for key in ("manifest", "lyrics_root"):
        if not resolved[key]:
            raise ValueError(f"--{key.replace('_', '-')} is required")
    items = load_manifest(resolved["manifest"], resolved["lyrics_root"])
    levels = np.stack([item.ratings.level_vector() for item in items])
    rho, p = correlation_matrix(levels, seed=resolved["seed"])
    names = [a.value for a in ASPECTS]
    width = max(len(n) for n in names)
    print("rank correlation between aspect labels "
          f"({len(items)} items; * marks p < 0.05):")
    print(" " * (width + 2) + "  ".join(f"{n:>{width}}" for n in names))
    for i, name in enumerate(names):
        cells = []
        for j in range(len(names)):
            mark = "*" if i != j and p[i, j] < 0.05 else " "
            cells.append(f"{rho[i, j]:+.3f}{mark}".rjust(width))
        print(f"{name:>{width}}  " + "  ".join(cells))
    if resolved["out"]:
        doc = {"aspects": names,
               "rho": [[round(float(v), 10) for v in row] for row in rho],
               "p": [[round(float(v), 10) for v in row] for row in p]}
        Path(resolved["out"]).parent.mkdir(parents=True, exist_ok=True)
        with open(resolved["out"], "w", encoding="utf-8") as fh:
            json.dump(doc, fh, sort_keys=True, indent=2)
            fh.write("\n")
        print(f"matrix written to {resolved['out']}")
    return 0


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

def _add_common(p: argparse.ArgumentParser, *names: str) -> None:
    flags = {
        "manifest": dict(help="JSONL corpus manifest"),
        "lyrics_root": dict(help="directory the manifest's lyrics paths are relative to"),
        "cache": dict(help="embedding cache file"),
        "checkpoint": dict(help="model checkpoint file"),
        "strategy": dict(help="plain | soft | binary | rank"),
        "strategies": dict(help="comma-separated strategy list"),
        "seed": dict(type=int, help="random seed"),
        "folds": dict(type=int, help="number of cross-validation folds"),
        "epochs": dict(type=int, help="maximum training epochs"),
        "batch_size": dict(type=int, help="documents per optimizer step"),
        "lr": dict(type=float, help="learning rate"),
        "hidden": dict(type=int, help="recurrent state width"),
        "proj": dict(type=int, help="projected document width"),
        "pooling": dict(help="attention | mean"),
        "patience": dict(type=int, help="early-stopping patience in epochs"),
        "items": dict(help="item count (build-corpus) or comma-separated ids (predict)"),
        "item": dict(help="item id"),
        "d_sem": dict(type=int, help="semantic embedding width"),
        "d_emo": dict(type=int, help="emotion embedding width"),
        "out": dict(help="output path (directory for most commands); "
                         "defaults to $LYRICGAUGE_OUT"),
    }
    for name in names:
        kwargs = dict(flags[name])
        if "type" not in kwargs and name == "items":
            pass
        p.add_argument("--" + name.replace("_", "-"), dest=name, default=None, **kwargs)
    p.add_argument("--config", default=None,
                   help="JSON file supplying defaults for any flag")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lyricgauge",
                                     description="ordinal music content assessment from lyrics")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build-corpus", help="generate a synthetic corpus and cache")
    _add_common(p, "items", "seed", "d_sem", "d_emo", "out")
    p.set_defaults(func=cmd_build_corpus)

    p = sub.add_parser("train", help="train one model")
    _add_common(p, "manifest", "lyrics_root", "cache", "strategy", "seed", "epochs",
                "batch_size", "lr", "hidden", "proj", "pooling", "patience", "out")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="cross-validated strategy benchmark")
    _add_common(p, "manifest", "lyrics_root", "cache", "strategies", "folds", "seed",
                "epochs", "batch_size", "lr", "hidden", "proj", "pooling", "patience", "out")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("predict", help="score items with a checkpoint")
    _add_common(p, "checkpoint", "cache", "manifest", "lyrics_root", "items", "out")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("perturb", help="leave-one-sentence-out saliency for an item")
    _add_common(p, "checkpoint", "cache", "manifest", "lyrics_root", "item", "out")
    p.set_defaults(func=cmd_perturb)

    p = sub.add_parser("correlate", help="rank correlations between aspect labels")
    _add_common(p, "manifest", "lyrics_root", "seed", "out")
    p.set_defaults(func=cmd_correlate)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
