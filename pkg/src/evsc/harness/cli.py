"""``evsc`` command line: generate, train-verb, train-role, eval, ablate, inspect."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .config import ExperimentConfig
from . import pipeline


def _existing(path: str) -> Path:
    p = Path(path)
    if not p.exists():
        raise FileNotFoundError(f"{path} does not exist")
    return p


def cmd_generate(args) -> int:
    cfg = ExperimentConfig.load(_existing(args.config))
    root = pipeline.run_generate(cfg, args.out)
    print(f"wrote dataset to {root}")
    return 0


def cmd_train_verb(args) -> int:
    cfg = ExperimentConfig.load(_existing(args.config))
    report, path = pipeline.run_train_verb(cfg, _existing(args.data), args.out)
    print(f"report {path}")
    print(json.dumps(report["metrics"], indent=2, sort_keys=True))
    return 0


def cmd_train_role(args) -> int:
    cfg = ExperimentConfig.load(_existing(args.config))
    report, path = pipeline.run_train_role(cfg, _existing(args.data), _existing(args.verb_model), args.out)
    print(f"report {path}")
    print(json.dumps(report["summary"], indent=2, sort_keys=True))
    return 0


def cmd_eval(args) -> int:
    metrics = pipeline.run_eval(_existing(args.model), _existing(args.data), args.split, args.report)
    print(json.dumps({k: v for k, v in metrics.items() if k != "per_seed"}, indent=2, sort_keys=True))
    return 0


def cmd_ablate(args) -> int:
    cfg = ExperimentConfig.load(_existing(args.config))
    paths = pipeline.run_ablation(cfg, _existing(args.data), args.out)
    print(f"{len(paths)} reports under {args.out}")
    return 0


def cmd_inspect(args) -> int:
    att, ose = pipeline.run_inspect(_existing(args.model), args.clip, args.dump_attention, args.data)
    print(f"attention -> {att}\nper-frame states -> {ose}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="evsc", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true", help="log training progress")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="write a synthetic dataset")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("train-verb", help="train encoder and verb head")
    p.add_argument("--config", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train_verb)

    p = sub.add_parser("train-role", help="train role decoders on a frozen verb model, one per eval seed")
    p.add_argument("--config", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--verb-model", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train_role)

    p = sub.add_parser("eval", help="score a model directory or a verb prediction JSONL")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--split", default="val", choices=("train", "val"))
    p.add_argument("--report", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("ablate", help="variant x aggregator x O_max matrix (EVSC_THREADS caps workers)")
    p.add_argument("--config", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("inspect", help="dump encoder attention and per-frame object states for one clip")
    p.add_argument("--model", required=True)
    p.add_argument("--clip", required=True)
    p.add_argument("--dump-attention", required=True)
    p.add_argument("--data", default=None, help="dataset directory (defaults to the one the model was trained on)")
    p.set_defaults(func=cmd_inspect)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except Exception as exc:  # every failure becomes a message and a nonzero exit
        print(f"evsc {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
