"""Command line entry point.

Subcommands: prep, stats, split, tune, run, meta, ranks.
Exit codes: 0 success, 1 partial grid failure, 2 config error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import dataset as ds_mod
from .harness import ALGORITHMS, ConfigError, ExperimentConfig, run_experiment, summarize_ranks
from .metamodel import (
    FEATURE_NAMES,
    MetaInstance,
    build_meta_table,
    cross_validate,
    export_dot,
    export_rules,
    fit_tree,
)
from .splits import SplitSpec, generate_split
from .tuning import make_validation_split, random_search, space_for


def _schema_args(parser):
    parser.add_argument("--session-col", default="session_id")
    parser.add_argument("--item-col", default="item_id")
    parser.add_argument("--time-col", default="timestamp")
    parser.add_argument("--delimiter", default=",")
    parser.add_argument("--no-header", action="store_true")
    parser.add_argument("--time-unit", choices=("seconds", "days"), default="seconds")
    parser.add_argument(
        "--sessionize", choices=("by-key", "by-key-and-day"), default="by-key"
    )


def _load_and_prep(args):
    schema = ds_mod.ColumnSchema(
        session_col=args.session_col,
        item_col=args.item_col,
        time_col=args.time_col,
        delimiter=args.delimiter,
        header=not args.no_header,
        time_unit=args.time_unit,
    )
    events, rejected = ds_mod.ingest_events(args.input, schema)
    ds = ds_mod.sessionize(events, args.sessionize)
    return ds_mod.preprocess(ds), rejected


def cmd_prep(args):
    ds, rejected = _load_and_prep(args)
    ds_mod.save_dataset(ds, args.output)
    print(f"wrote {ds.n_sessions} sessions / {ds.n_clicks} clicks to {args.output}")
    if rejected:
        print(f"rejected {rejected} records", file=sys.stderr)
    return 0


def cmd_stats(args):
    ds = ds_mod.load_dataset(args.input)
    print(ds_mod.compute_stats(ds).to_json())
    return 0


def cmd_split(args):
    ds = ds_mod.load_dataset(args.input)
    spec = SplitSpec(**json.loads(args.spec))
    result = generate_split(ds, spec)
    ds_mod.save_dataset(result.derived, args.output)
    manifest_path = Path(args.output).with_suffix(".manifest.json")
    manifest_path.write_text(result.manifest_json())
    print(f"wrote split to {args.output} (manifest: {manifest_path})")
    return 0


def cmd_tune(args):
    train = ds_mod.load_dataset(args.input)
    if args.algorithm not in ALGORITHMS:
        print(f"unknown algorithm {args.algorithm!r}", file=sys.stderr)
        return 2
    fit_part, val_part = make_validation_split(train)
    space = space_for(args.algorithm)
    factory = lambda cfg: ALGORITHMS[args.algorithm](**cfg)
    best, records = random_search(
        factory, space, fit_part, val_part, n_trials=args.trials, seed=args.seed
    )
    if args.trials_log:
        with open(args.trials_log, "a") as fh:
            for rec in records:
                fh.write(rec.to_json() + "\n")
    print(json.dumps({"algorithm": args.algorithm, "params": best}, sort_keys=True))
    return 0


def cmd_run(args):
    try:
        config = ExperimentConfig.from_file(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    out, failures = run_experiment(config)
    print(f"results in {out}")
    return 1 if failures else 0


def cmd_meta(args):
    rows = []
    for line in Path(args.table).read_text().splitlines():
        if not line.strip():
            continue
        rows.append(json.loads(line))
    table = build_meta_table(rows)
    tree = fit_tree(table, max_depth=args.max_depth, min_impurity=args.min_impurity)
    train_acc, hold_acc = cross_validate(
        table,
        folds=min(args.folds, len(table)),
        seed=args.seed,
        max_depth=args.max_depth,
        min_impurity=args.min_impurity,
    )
    print(export_rules(tree))
    print(
        json.dumps(
            {"train_accuracy": train_acc, "holdout_accuracy": hold_acc}, sort_keys=True
        )
    )
    if args.dot:
        Path(args.dot).write_text(export_dot(tree))
    return 0


def cmd_ranks(args):
    summary = summarize_ranks(args.results)
    if summary["warning"]:
        print(summary["warning"], file=sys.stderr)
    print(json.dumps(summary["ranks"], sort_keys=True, indent=2))
    if args.plot:
        Path(args.plot).write_text(json.dumps(summary, sort_keys=True))
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="sbrbench", description="Session-based recommendation benchmark harness"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("prep", help="ingest, preprocess, and cache a click log")
    p.add_argument("input")
    p.add_argument("output")
    _schema_args(p)
    p.set_defaults(func=cmd_prep)

    p = sub.add_parser("stats", help="dataset statistics from a cached dataset")
    p.add_argument("input")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("split", help="generate one split from a cached dataset")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--spec", required=True, help="SplitSpec as JSON")
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("tune", help="random hyperparameter search")
    p.add_argument("input")
    p.add_argument("algorithm")
    p.add_argument("--trials", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--trials-log")
    p.set_defaults(func=cmd_tune)

    p = sub.add_parser("run", help="run a full experiment grid from a config file")
    p.add_argument("config")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("meta", help="fit and cross-validate the meta decision tree")
    p.add_argument("table", help="JSON-lines rows: split, model, mrr5, hr5, features")
    p.add_argument("--max-depth", type=int, default=6)
    p.add_argument("--min-impurity", type=float, default=0.3)
    p.add_argument("--folds", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--dot", help="write a graphviz rendering here")
    p.set_defaults(func=cmd_meta)

    p = sub.add_parser("ranks", help="summarize model ranks across result dirs")
    p.add_argument("results", nargs="+")
    p.add_argument("--plot", help="write the plot-description JSON here")
    p.set_defaults(func=cmd_ranks)

    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
