"""Command-line driver: one subcommand per pipeline stage.

Exit codes: 0 success, 1 some moments failed or were skipped, 2 config or
I/O error.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import pipeline
from .analytics import (MANY_TO_MANY_DEFINITION, compute_stats, count_many_to_many, evaluate,
                        load_ground_truth, load_predictions, render_report, report_lines)
from .config import ConfigError, validate_config
from .pipeline import EXIT_ERROR, EXIT_OK, STAGES, Context
from .records import DatasetError, atomic_write_text, iter_jsonl

logger = logging.getLogger("finecap")


def _common(parser: argparse.ArgumentParser) -> None:
    g = parser.add_argument_group("global options")
    g.add_argument("--config", help="YAML/JSON config file (defaults when omitted)")
    g.add_argument("--cache-dir", help="response cache directory (default: <workdir>/.cache)")
    g.add_argument("--workers", type=int, help="worker pool size")
    g.add_argument("--seed", type=int, help="global seed")
    g.add_argument("--force", action="store_true", help="re-run even on a manifest match")
    g.add_argument("--mock", action="store_true", help="use deterministic mock backends")
    g.add_argument("--workdir", default=".", help="stage file directory (default: .)")
    g.add_argument("--moments", help="coarse moments file (default: <workdir>/moments.jsonl)")
    g.add_argument("--frames", help="frame directory (default: <workdir>/frames)")
    g.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="finecap", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)
    for stage in STAGES:
        _common(sub.add_parser(stage, help=f"run the {stage} stage"))
    _common(sub.add_parser("run", help="run every stage from keyframes to select"))
    p = sub.add_parser("config", help="validate a config and print it normalized")
    _common(p)
    p = sub.add_parser("stats", help="caption statistics and many-to-many counts")
    _common(p)
    p.add_argument("--input", required=True, help="moments.jsonl (coarse) or fig.jsonl")
    p.add_argument("--schema", choices=("coarse", "fig"), default=None)
    p.add_argument("--output", help="write the report as JSON here")
    p = sub.add_parser("eval-metrics", help="recall at tIoU for a predictions file")
    _common(p)
    p.add_argument("--predictions", required=True)
    p.add_argument("--ground-truth", required=True)
    p.add_argument("--output", help="write machine-readable lines here")
    return parser


def _setup_logging(verbose: bool) -> None:
    root = logging.getLogger("finecap")
    if not root.handlers:
        handler = logging.StreamHandler(sys.stderr)
        handler.setFormatter(logging.Formatter("%(asctime)s %(levelname)s %(message)s"))
        root.addHandler(handler)
    root.setLevel(logging.DEBUG if verbose else logging.INFO)


def _stats(args) -> int:
    path = Path(args.input)
    if not path.exists():
        raise FileNotFoundError(f"input not found: {path}")
    first = next(iter_jsonl(path), (0, {}))[1]
    schema = args.schema or ("fig" if "statics" in first else "coarse")
    from .records import load_dataset

    records = load_dataset(path, schema)
    report = {}
    if schema == "coarse":
        report["coarse"] = compute_stats([r.q for r in records]).to_dict()
        pairs = [(r.q, r.span_key) for r in records]
        report["coarse"]["many_to_many"] = list(count_many_to_many(pairs))
    else:
        report["coarse"] = compute_stats([a.moment.q for a in records]).to_dict()
        report["coarse"]["many_to_many"] = list(count_many_to_many(
            (a.moment.q, a.moment.span_key) for a in records))
        chosen = [(a.selected_candidate().text, a.moment.span_key) for a in records
                  if a.selected is not None]
        if chosen:
            report["fine"] = compute_stats([c for c, _ in chosen]).to_dict()
            report["fine"]["many_to_many"] = list(count_many_to_many(chosen))
    report["many_to_many_definition"] = MANY_TO_MANY_DEFINITION
    text = json.dumps(report, indent=2, sort_keys=True)
    print(text)
    if args.output:
        atomic_write_text(args.output, text + "\n")
    return EXIT_OK


def _metrics(args) -> int:
    for p in (args.predictions, args.ground_truth):
        if not Path(p).exists():
            raise FileNotFoundError(f"input not found: {p}")
    rows = evaluate(load_predictions(args.predictions), load_ground_truth(args.ground_truth))
    sys.stdout.write(render_report(rows))
    if args.output:
        atomic_write_text(args.output, report_lines(rows))
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    _setup_logging(args.verbose)
    try:
        overrides = {"seed": args.seed, "workers": args.workers, "cache_dir": args.cache_dir}
        cfg = validate_config(args.config, overrides)
        if args.command == "config":
            print(json.dumps(cfg.dump(), indent=2, sort_keys=True))
            return EXIT_OK
        if args.command == "stats":
            return _stats(args)
        if args.command == "eval-metrics":
            return _metrics(args)
        ctx = Context(cfg, Path(args.workdir), mock=args.mock, force=args.force,
                      frames_dir=args.frames, moments_path=args.moments)
        if args.command == "run":
            return pipeline.run_pipeline(ctx)
        return pipeline.run_stage(args.command, ctx)
    except (ConfigError, DatasetError, FileNotFoundError, OSError) as exc:
        logger.error("%s", exc)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
