"""Command line front end: one `export` subcommand."""

from __future__ import annotations

import argparse
import json
import sys
import tempfile
from pathlib import Path

from .encoders import ExportError
from .export import ExportConfig, compare_caches, export_cache


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lyricgauge-export",
        description="encode a lyrics corpus into a twin-embedding cache")
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("export", help="run both encoders and write the cache")
    p.add_argument("--manifest", required=True, help="JSONL corpus manifest")
    p.add_argument("--out", required=True, help="cache file to write")
    p.add_argument("--semantic-model", required=True,
                   help="semantic encoder id (hash:<dim>:<seed>, st:<name>, hf:<name>)")
    p.add_argument("--emotion-model", required=True,
                   help="emotion encoder id (same schemes)")
    p.add_argument("--batch", type=int, default=32, help="sentences per encoder call")
    p.add_argument("--lyrics-root", default=None,
                   help="directory the manifest's lyrics paths are relative to "
                        "(default: the manifest's directory)")
    p.add_argument("--device", default="cpu", help="device tag for model backends")
    p.add_argument("--normalize", action="store_true",
                   help="L2-normalize each twin half before concatenation "
                        "(default: raw encoder output)")
    p.add_argument("--compare", action="store_true",
                   help="re-encode and compare against the existing --out file "
                        "instead of overwriting it (tolerance 1e-6 per coordinate)")
    p.set_defaults(func=cmd_export)
    return parser


def cmd_export(args: argparse.Namespace) -> int:
    manifest = Path(args.manifest)
    lyrics_root = Path(args.lyrics_root) if args.lyrics_root else manifest.parent
    out = Path(args.out)

    if args.compare:
        if not out.is_file():
            raise ExportError(f"--compare needs an existing cache at {out}")
        with tempfile.TemporaryDirectory(dir=out.parent) as tmp:
            fresh = Path(tmp) / "rerun.bin"
            config = ExportConfig(manifest=manifest, lyrics_root=lyrics_root,
                                  out=fresh, semantic_model=args.semantic_model,
                                  emotion_model=args.emotion_model,
                                  batch_size=args.batch, device=args.device,
                                  normalize=args.normalize)
            report = export_cache(config)
            result = compare_caches(out, fresh)
        if result.byte_identical:
            print(f"rerun is byte-identical over {result.n_records} records")
            return 0
        print(f"max per-coordinate difference {result.max_abs_diff:.3e} "
              f"over {result.n_records} records")
        if result.within(1e-6):
            print("within tolerance 1e-6")
            return 0
        print("exceeds tolerance 1e-6", file=sys.stderr)
        return 1

    config = ExportConfig(manifest=manifest, lyrics_root=lyrics_root, out=out,
                          semantic_model=args.semantic_model,
                          emotion_model=args.emotion_model,
                          batch_size=args.batch, device=args.device,
                          normalize=args.normalize)
    report = export_cache(config)
    report_path = out.with_name(out.name + ".report.json")
    report_path.write_text(json.dumps(report.to_dict(), sort_keys=True, indent=2)
                           + "\n", encoding="utf-8")
    print(report.summary())
    print(f"report written to {report_path}")
    return 0


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ExportError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
