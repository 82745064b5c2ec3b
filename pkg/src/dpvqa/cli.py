"""Command line entry points: generate / train / eval / ablate / gradcheck."""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
from pathlib import Path

from .config import (RunConfig, apply_env_overrides, config_text, load_config)
from .gradcheck import SCOPES, gradcheck
from .harness import (ablate, ablation_table, evaluate_checkpoint, train)
from .synth.corpus import Corpus, build_corpus


def _resolve_config(args) -> RunConfig:
    cfg = load_config(args.config) if getattr(args, "config", None) else RunConfig()
    cfg = apply_env_overrides(cfg, os.environ)
    if getattr(args, "corpus", None):
        cfg = dataclasses.replace(cfg, corpus_dir=str(args.corpus))
    if getattr(args, "out", None):
        cfg = dataclasses.replace(cfg, out_dir=str(args.out))
    return cfg.validated()


def _cmd_generate(args) -> int:
    manifest = build_corpus(args.out, seed=args.seed, n_items=args.items,
                            n_scenes=args.scenes, n_frames=args.frames,
                            grid=args.grid)
    rates = manifest["temporal_majority_rates"]
    print(f"wrote {manifest['n_items']} items over {manifest['n_scenes']} scenes "
          f"to {args.out}")
    for template, rate in sorted(rates.items()):
        print(f"  temporal majority {template}: {rate:.1%}")
    return 0


def _cmd_train(args) -> int:
    cfg = _resolve_config(args)
    result = train(cfg)
    for record in result.metrics:
        print(json.dumps(record.to_json()))
    print(f"best epoch {result.best_epoch} "
          f"(val overall {result.best_val_accuracy:.3f})")
    if result.checkpoint_path:
        print(f"checkpoint: {result.checkpoint_path}")
    return 0


def _cmd_eval(args) -> int:
    if args.config:
        cfg = load_config(args.config)
    else:
        sibling = Path(args.checkpoint).parent / "config.cfg"
        if not sibling.exists():
            print("eval: pass --config or keep config.cfg next to the checkpoint",
                  file=sys.stderr)
            return 2
        cfg = load_config(sibling)
    cfg = apply_env_overrides(cfg, os.environ)
    if args.corpus:
        cfg = dataclasses.replace(cfg, corpus_dir=str(args.corpus))
    corpus = Corpus(cfg.corpus_dir)
    if args.trace_out:
        from .harness import build_model, evaluate_model
        from .checkpoint import load_checkpoint
        arrays, _ = load_checkpoint(args.checkpoint)
        model = build_model(cfg.validated(), corpus)
        model.store.load_arrays(arrays)
        with open(args.trace_out, "w", encoding="utf-8") as fh:
            record = evaluate_model(model, corpus, args.split, trace_file=fh)
    else:
        record = evaluate_checkpoint(args.checkpoint, corpus, args.split, cfg)
    print(json.dumps(record.to_json()))
    return 0


def _cmd_ablate(args) -> int:
    cfg = _resolve_config(args)
    corpus = Corpus(cfg.corpus_dir)
    rows = ablate(cfg, corpus, out_path=args.out)
    print(ablation_table(rows))
    return 0


def _cmd_gradcheck(args) -> int:
    modules = args.modules.split(",") if args.modules else None
    report = gradcheck(seed=args.seed, probes=args.probes, eps=args.eps,
                       tolerance=args.tolerance, modules=modules)
    for line in report.lines():
        print(line)
    print("PASS" if report.passed else "FAIL")
    return 0 if report.passed else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dpvqa",
        description="Video question answering with clip relations and "
                    "multi-step reasoning, plus a synthetic benchmark.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="build a synthetic corpus")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--items", type=int, default=8000)
    p.add_argument("--scenes", type=int, default=1000)
    p.add_argument("--frames", type=int, default=40)
    p.add_argument("--grid", type=int, default=4)
    p.set_defaults(func=_cmd_generate)

    p = sub.add_parser("train", help="train one variant")
    p.add_argument("--config", help="key=value config file")
    p.add_argument("--corpus", help="corpus directory (overrides config)")
    p.add_argument("--out", help="output directory (overrides config)")
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint on a split")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--split", required=True, choices=("train", "val", "test"))
    p.add_argument("--config")
    p.add_argument("--corpus")
    p.add_argument("--trace-out", help="write attention traces (jsonl) here")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("ablate", help="run the full variant comparison")
    p.add_argument("--config")
    p.add_argument("--corpus")
    p.add_argument("--out", help="write one JSON row per variant here")
    p.set_defaults(func=_cmd_ablate)

    p = sub.add_parser("gradcheck", help="finite-difference gradient audit")
    p.add_argument("--probes", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--eps", type=float, default=None)
    p.add_argument("--tolerance", type=float, default=1e-4)
    p.add_argument("--modules", help=f"comma list from: {', '.join(sorted(SCOPES))}")
    p.set_defaults(func=_cmd_gradcheck)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    raise SystemExit(main())
