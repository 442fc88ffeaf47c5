"""Command-line interface: ``vqr {prepare,train,sweep,report}``.

Standard output is line-oriented. Every run starts with ``seed=<n>``;
metric lines are ``key=value`` pairs separated by spaces. Exit status is 0 on
success, 2 for usage or validation errors and 3 for runtime failures.
"""

from __future__ import annotations

import argparse
import logging
import sys
import time
from pathlib import Path
from typing import List, Optional

from .circuits import AnsatzKind, AnsatzSpec, Entanglement, FeatureMapKind, FeatureMapSpec
from .data import CsvFormatError, NumericDataset, load_csv, prepare, split
from .optimizers import OptimizerKind, OptimizerSpec
from .regressor import evaluate, save_model, train
from .sweep import (
    GridSpec,
    export,
    group_stats,
    load_results,
    paper_grid,
    render_table,
    run_sweep,
    top_k,
)

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME = 0, 2, 3
DEFAULT_TARGET = "Rented Bike Count"


class UsageError(Exception):
    """Bad flags or inputs; maps to exit status 2."""


def _positive(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return value


def _seed(text: str) -> int:
    value = int(text)
    if not 0 <= value < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must fit in an unsigned 64-bit integer")
    return value


def _choice(enum_cls):
    def parse(text: str):
        try:
            return enum_cls.parse(text)
        except ValueError as exc:
            raise argparse.ArgumentTypeError(str(exc)) from exc

    parse.__name__ = enum_cls.__name__
    return parse


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="vqr", allow_abbrev=False,
                                     description="Variational quantum regression toolkit")
    parser.add_argument("--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("prepare", allow_abbrev=False, help="load a CSV, normalize, reduce with PCA")
    p.add_argument("--input", required=True, type=Path)
    p.add_argument("--target", default=DEFAULT_TARGET)
    p.add_argument("--pca", type=_positive, default=7)
    p.add_argument("--out", required=True, type=Path)
    p.add_argument("--seed", type=_seed, default=0)

    t = sub.add_parser("train", allow_abbrev=False, help="train and evaluate one configuration")
    t.add_argument("--data", required=True, type=Path)
    t.add_argument("--feature-map", type=_choice(FeatureMapKind), default=FeatureMapKind.Z)
    t.add_argument("--fm-entanglement", type=_choice(Entanglement), default=None)
    t.add_argument("--fm-reps", type=_positive, default=2)
    t.add_argument("--ansatz", type=_choice(AnsatzKind), default=AnsatzKind.REAL_AMPLITUDES)
    t.add_argument("--entanglement", type=_choice(Entanglement), default=None,
                   help="ansatz entanglement (default linear)")
    t.add_argument("--ansatz-reps", type=_positive, default=3)
    t.add_argument("--optimizer", type=_choice(OptimizerKind), default=OptimizerKind.SPSA)
    t.add_argument("--max-iter", type=_positive, default=100)
    t.add_argument("--qubits", type=_positive, default=7)
    t.add_argument("--train", type=_positive, default=400)
    t.add_argument("--test", type=_positive, default=250)
    t.add_argument("--seed", type=_seed, default=0)
    t.add_argument("--out", required=True, type=Path, help="model file to write")

    s = sub.add_parser("sweep", allow_abbrev=False, help="run a hyperparameter grid")
    s.add_argument("--data", required=True, type=Path)
    s.add_argument("--grid", required=True, help="grid JSON file, or 'paper-grid'")
    s.add_argument("--workers", type=_positive, default=1)
    s.add_argument("--out", required=True, type=Path)

    r = sub.add_parser("report", allow_abbrev=False, help="rank sweep results and export tables/plots")
    r.add_argument("--results", required=True, type=Path, help="sweep directory or results CSV")
    r.add_argument("--top", type=_positive, default=5)
    r.add_argument("--metric", choices=["mse", "mae", "time"], default="mse")
    r.add_argument("--plots", action="store_true", help="write SVG box plots (needs --out)")
    r.add_argument("--out", type=Path, default=None, help="directory for CSV/SVG exports")
    return parser


def _load_dataset(path: Path) -> NumericDataset:
    try:
        return NumericDataset.load(path)
    except FileNotFoundError as exc:
        raise UsageError(f"no prepared dataset in {path}: {exc}") from exc


def cmd_prepare(args) -> int:
    print(f"seed={args.seed}")
    try:
        raw = load_csv(args.input, args.target)
    except FileNotFoundError as exc:
        raise UsageError(f"cannot read {args.input}: {exc}") from exc
    except CsvFormatError as exc:
        raise UsageError(str(exc)) from exc
    n_attr = len(raw.attributes)
    if args.pca > n_attr:
        raise UsageError(f"--pca {args.pca} exceeds the {n_attr} attributes")
    try:
        dataset = prepare(raw, args.pca)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    dataset.save(args.out)
    prov = dataset.provenance
    print(f"rows={len(dataset)}")
    print(f"dims={n_attr}->{args.pca} numeric_features={len(prov['feature_columns'])}")
    print(f"target={args.target} target_min={prov['target_min']!r} target_max={prov['target_max']!r}")
    print(f"explained_variance_ratio={sum(prov['pca']['explained_variance']) / prov['pca']['total_variance']:.6f}")
    print(f"out={args.out}")
    return EXIT_OK


def cmd_train(args) -> int:
    print(f"seed={args.seed}")
    dataset = _load_dataset(args.data)
    n_features = dataset.X.shape[1]
    if args.qubits != n_features:
        raise UsageError(f"dimension mismatch: --qubits {args.qubits} but the data has {n_features} features")
    if args.train + args.test > len(dataset):
        raise UsageError(f"--train {args.train} + --test {args.test} exceeds {len(dataset)} rows")
    try:
        fm = FeatureMapSpec(args.feature_map, args.qubits, args.fm_reps, args.fm_entanglement)
        ansatz = AnsatzSpec(args.ansatz, args.qubits, args.ansatz_reps, args.entanglement, seed=args.seed)
        opt = OptimizerSpec(args.optimizer, max_iterations=args.max_iter, seed=args.seed)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc

    (X_tr, y_tr), (X_te, y_te) = split(dataset, args.train, args.test, args.seed)
    start = time.monotonic()
    model, report = train(fm, ansatz, opt, X_tr, y_tr, seed=args.seed)
    mse, mae = evaluate(model, X_te, y_te)
    elapsed = time.monotonic() - start
    args.out.parent.mkdir(parents=True, exist_ok=True)
    save_model(model, args.out)
    ent = ansatz.entanglement or fm.entanglement
    print(f"config ansatz={ansatz.kind.value} optimizer={opt.kind.value} "
          f"feature_map={fm.kind.value} entanglement={ent.value if ent else '-'}")
    print(f"cost initial={report.initial_cost!r} final={report.final_cost!r} "
          f"evaluations={report.trace.evaluations}")
    print(f"metrics mse={mse!r} mae={mae!r} time_s={elapsed:.3f}")
    print(f"model={args.out}")
    return EXIT_OK


def _load_grid(spec: str) -> GridSpec:
    if spec == "paper-grid":
        return paper_grid()
    try:
        return GridSpec.from_file(spec)
    except (OSError, TypeError, ValueError) as exc:
        raise UsageError(f"malformed grid {spec}: {exc}") from exc


def cmd_sweep(args) -> int:
    grid = _load_grid(args.grid)
    print(f"seed={grid.base_seed}")
    dataset = _load_dataset(args.data)
    if grid.n_train + grid.n_test > len(dataset):
        raise UsageError(f"grid needs {grid.n_train + grid.n_test} rows, data has {len(dataset)}")
    results = run_sweep(grid, dataset, args.out, parallelism=args.workers)
    ok = [r for r in results if r.ok]
    cached = sum(r.cached for r in results)
    print(f"trials={len(results)} ok={len(ok)} failed={len(results) - len(ok)} cached={cached}")
    print(f"results={args.out / 'results.csv'}")
    if not ok:
        print("error: every trial failed", file=sys.stderr)
        for r in results:
            print(f"  trial {r.trial_id}: {r.reason}", file=sys.stderr)
        return EXIT_RUNTIME
    if len(ok) < len(results):
        print(f"warning: {len(results) - len(ok)} trial(s) failed", file=sys.stderr)
    return EXIT_OK


def cmd_report(args) -> int:
    print("seed=none")
    if args.plots and args.out is None:
        raise UsageError("--plots needs --out")
    if not args.results.exists():
        raise UsageError(f"{args.results} does not exist")
    try:
        results = load_results(args.results)
    except (ValueError, KeyError) as exc:
        raise UsageError(f"unreadable results in {args.results}: {exc}") from exc
    if not any(r.ok for r in results):
        raise UsageError(f"no successful trials in {args.results}")
    rows = top_k(results, args.metric, args.top)
    print(render_table(rows))
    for axis in ("feature_map", "ansatz", "optimizer"):
        for g in group_stats(results, axis):
            print(f"group axis={axis} name={g['group']} n={g['count']} min={g['min']:.6g} "
                  f"median={g['median']:.6g} mean={g['mean']:.6g} max={g['max']:.6g}")
    if args.out is not None:
        formats = ("csv", "svg") if args.plots else ("csv",)
        for path in export(results, args.out, formats):
            print(f"wrote={path}")
    return EXIT_OK


COMMANDS = {"prepare": cmd_prepare, "train": cmd_train, "sweep": cmd_sweep, "report": cmd_report}


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse exits 2 on bad usage, 0 on --help
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
