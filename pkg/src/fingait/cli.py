"""Command-line entry point.

Exit codes: 0 on success, 1 when a run exceeded its time budget, 2 on an
invalid config, weight file or argument.
"""

from __future__ import annotations

import argparse
import json
import sys

from .bench import cmd_bench_timing, cmd_simulate, cmd_synth
from .config import load_config
from .exceptions import ConfigurationError
from .forward_model import LstmWeights, load_weights, random_dnn_weights, random_lstm_weights, save_weights
from .search import METHODS

EXIT_OK, EXIT_BUDGET, EXIT_INVALID = 0, 1, 2


def _common(parser):
    parser.add_argument("--config", metavar="PATH", help="JSON run configuration (defaults apply when omitted)")
    parser.add_argument("--seed", type=int, help="override the config seed")
    parser.add_argument("--method", choices=METHODS, help="run only this solver")
    parser.add_argument("--out", metavar="DIR", help="output directory (overrides out_dir)")
    parser.add_argument("--quiet", action="store_true", help="suppress progress lines")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fingait", description="Inverse gait search benchmarks.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_ in (
        ("synth", "sweep synthetic thrust-request datasets over methods and weights"),
        ("simulate", "closed-loop position control runs, one per method and weight"),
        ("bench-timing", "wall-time distribution of single inverse requests"),
    ):
        _common(sub.add_parser(name, help=help_))
    v = sub.add_parser("validate-weights", help="load and shape-check a weight file")
    v.add_argument("path")
    g = sub.add_parser("make-weights", help="write seeded untrained weights in the JSON weight format")
    g.add_argument("--kind", choices=("lstm", "dnn"), default="lstm")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--hidden", type=int, default=100, help="LSTM hidden size")
    g.add_argument("--out", required=True, metavar="PATH")
    return parser


def _validate_weights(path) -> int:
    try:
        w = load_weights(path)
    except (ConfigurationError, OSError) as exc:
        print(f"invalid: {exc}", file=sys.stderr)
        return EXIT_INVALID
    if isinstance(w, LstmWeights):
        info = {"kind": "lstm", "input_dim": w.input_dim, "hidden_dim": w.hidden_dim}
    else:
        info = {"kind": "dnn", "input_dim": w.input_dim, "layers": list(w.layer_sizes)}
    print(json.dumps({"valid": True, **info}))
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "validate-weights":
        return _validate_weights(args.path)
    if args.command == "make-weights":
        w = random_lstm_weights(args.seed, args.hidden) if args.kind == "lstm" else random_dnn_weights(args.seed)
        save_weights(w, args.out)
        return EXIT_OK
    try:
        cfg = load_config(args.config)
        cfg = cfg.with_overrides(seed=args.seed, out_dir=args.out,
                                 methods=[args.method] if args.method else None)
        runner = {"synth": cmd_synth, "simulate": cmd_simulate, "bench-timing": cmd_bench_timing}[args.command]
        progress = None if args.quiet else (lambda msg: print(msg, file=sys.stderr, flush=True))
        report = runner(cfg, progress=progress)
    except (ConfigurationError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    for name, path in report.files.items():
        print(f"{name}: {path}")
    if report.budget_violated:
        print(f"time budget of {cfg.time_budget_s} s exceeded", file=sys.stderr)
        return EXIT_BUDGET
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
