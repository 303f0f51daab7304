#!/usr/bin/env python3
"""
bklab Command-Line Launcher
Runs reconstruction experiments, numerical checks, engine benchmarks and
shows the run history
"""
import argparse
import dataclasses
import json
import os
import sys
from typing import List, Optional

import pandas as pd

from config import config
from src.database.db_manager import ResultsStore
from src.experiment.bench import run_benchmark
from src.experiment.run_spec import load_run_specs
from src.experiment.runner import ExperimentRunner
from src.oscillatory_engine import ENGINES
from src.verify.lemma_checks import SUITES, run_checks
from src.verify.metrics import METHODS


def _with_overrides(specs, output_dir: Optional[str], threads: Optional[int]):
    updated = []
    for spec in specs:
        changes = {}
        if output_dir:
            changes["output_dir"] = output_dir if len(specs) == 1 else os.path.join(output_dir, spec.name)
        if threads:
            changes["engine"] = dataclasses.replace(spec.engine, threads=threads)
        updated.append(dataclasses.replace(spec, **changes) if changes else spec)
    return updated


def cmd_run(args) -> int:
    """Execute one RunSpec or a suite of them"""
    specs = _with_overrides(load_run_specs(args.spec), args.output_dir, args.threads)
    store = ResultsStore() if config.RECORD_HISTORY and not args.no_history else None
    runner = ExperimentRunner(store, show_progress=not args.quiet)
    for spec in specs:
        print(f"🧪 {spec.name}: lambda {', '.join(f'{v:g}' for v in spec.lambdas)}")
        result = runner.run(spec)
        print(result.table)
        print(f"📁 Artifacts: {result.output_dir}")
    return 0


def cmd_verify(args) -> int:
    """Run the numerical checks"""
    reports = run_checks(args.suite, args.threads)
    for report in reports:
        mark = "✅" if report.passed else "❌"
        print(f"{mark} {report.name:<32} {report.note} ({report.seconds:.1f}s)")
    failed = [r.name for r in reports if not r.passed]
    if args.json:
        with open(args.json, "w", encoding="utf-8") as fh:
            json.dump([r.to_dict() for r in reports], fh, indent=2, default=str)
    print(f"\nSummary: {len(reports) - len(failed)}/{len(reports)} passed")
    return 1 if failed else 0


def cmd_bench(args) -> int:
    """Time the engines on one Gaussian job"""
    engines = args.engine or list(ENGINES)
    if "spectral" not in engines:
        engines.append("spectral")
    report = run_benchmark(args.size, args.output_size, args.lam, engines,
                           time_budget=args.budget, threads=args.threads)
    print(report.format())
    if args.csv:
        report.to_frame().to_csv(args.csv, index=False, float_format="%.9g")
    return 0


def cmd_history(args) -> int:
    """List recent runs, the best reductions of a phantom, or delete a run"""
    store = ResultsStore()
    if args.delete is not None:
        if not store.delete_run(args.delete):
            print(f"❌ No run with id {args.delete}", file=sys.stderr)
            return 1
        print(f"🗑️ Deleted run {args.delete}")
        return 0
    if args.best:
        best = store.best_reductions(args.best, args.method)
        if not best:
            print(f"No {args.method} rows recorded for {args.best}")
            return 0
        print(f"🏆 Best {args.method} reductions for {args.best}")
        print(pd.DataFrame(best).to_string(index=False, float_format=lambda v: f"{v:.1f}"))
        return 0
    runs = store.get_runs(args.limit)
    if not runs:
        print("No runs recorded yet")
        return 0
    frame = pd.DataFrame(runs)[["id", "name", "status", "duration", "created_at", "output_dir"]]
    print(frame.to_string(index=False, float_format=lambda v: f"{v:.1f}"))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bklab", description="Main-term reconstruction laboratory")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="execute a RunSpec or suite JSON")
    run.add_argument("spec", help="path to the RunSpec JSON")
    run.add_argument("--output-dir", help="override the artifact directory")
    run.add_argument("--threads", type=int, help="worker cap for this run")
    run.add_argument("--quiet", action="store_true", help="hide the progress bar")
    run.add_argument("--no-history", action="store_true", help="do not record the run")
    run.set_defaults(func=cmd_run)

    verify = sub.add_parser("verify", help="run numerical checks")
    verify.add_argument("--suite", choices=SUITES, default="all")
    verify.add_argument("--threads", type=int, help="concurrent checks")
    verify.add_argument("--json", help="write the reports to this file")
    verify.set_defaults(func=cmd_verify)

    bench = sub.add_parser("bench", help="benchmark the engines")
    bench.add_argument("--engine", action="append", choices=ENGINES)
    bench.add_argument("--size", type=int, default=512, help="input points per axis")
    bench.add_argument("--output-size", type=int, default=64, help="output points per axis")
    bench.add_argument("--lam", type=float, default=10.0, help="frequency")
    bench.add_argument("--budget", type=float, default=60.0, help="seconds per engine before extrapolating")
    bench.add_argument("--threads", type=int)
    bench.add_argument("--csv", help="write the timings to this file")
    bench.set_defaults(func=cmd_bench)

    history = sub.add_parser("history", help="list recorded runs")
    history.add_argument("--limit", type=int, default=20)
    history.add_argument("--best", metavar="PHANTOM", help="best recorded reduction per lambda for a phantom")
    history.add_argument("--method", default="combined", choices=METHODS[1:], help="method for --best")
    history.add_argument("--delete", type=int, metavar="RUN_ID", help="remove a run and its error rows")
    history.set_defaults(func=cmd_history)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """Main application launcher"""
    args = build_parser().parse_args(argv)
    config.ensure_directories()
    try:
        return args.func(args)
    except KeyboardInterrupt:
        print("\n🛑 Interrupted")
        return 130
    except (ValueError, OSError) as e:
        print(f"❌ {type(e).__name__}: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
