"""Command-line entry point: ``parbo validate|run|bench``.

Exit codes: 0 on success, 1 on invalid configs, I/O errors or algorithm
failures, 2 on usage errors.
"""

from __future__ import annotations

import argparse
import logging
import sys
import warnings
from pathlib import Path

from . import __version__
from .algorithms import ALGORITHMS, run
from .bench import BenchmarkConfig, export, format_summary, run_benchmark, thread_cap, write_trace
from .config import default_config_path, load
from .exceptions import ParboError

OK, FAILURE, USAGE = 0, 1, 2


def _err(msg):
    print(f"parbo: error: {msg}", file=sys.stderr)


def _load(path):
    return load(path if path is not None else default_config_path())


def cmd_validate(args) -> int:
    rc = _load(args.config)
    names = rc.algorithm_names
    print(f"{rc.path}: valid (schema {rc.data['schema_version']}, {len(names)} algorithms, "
          f"hash {rc.config_hash()[:12]})")
    return OK


def cmd_run(args) -> int:
    rc = _load(args.config)
    problem = rc.build_problem()
    cfg = rc.algo_config(args.algo, seed=args.seed)
    n_init = rc.benchmark.get("init_points")
    from .algorithms import initial_design

    trace = run(problem, cfg, initial_design(problem, args.seed, n_init))
    out = Path(args.out)
    write_trace(trace, out / f"{args.algo}_{args.seed}.csv", out / f"{args.algo}_{args.seed}.wall.csv")
    x = ", ".join(f"{v:.6g}" for v in trace.best_x)
    print(f"{args.algo} seed {args.seed}: best f = {trace.best_f:.17g} at ({x})")
    if trace.failed:
        _err(f"run failed: {trace.error}")
        return FAILURE
    return OK


def cmd_bench(args) -> int:
    rc = _load(args.config)
    algos = args.algos.split(",") if args.algos else None
    if algos:
        unknown = [a for a in algos if a not in ALGORITHMS]
        if unknown:
            _err(f"unknown algorithm(s) {unknown}; choose from {list(ALGORITHMS)}")
            return USAGE
    names = algos or rc.algorithm_names
    runs = args.runs if args.runs is not None else int(rc.benchmark.get("run_count", 25))
    threads = thread_cap()
    if args.dry_run:
        seed_base = int(rc.benchmark.get("seed_base", 1000))
        print(f"config {rc.path} (hash {rc.config_hash()[:12]})")
        print(f"{len(names)} algorithms x {runs} runs = {len(names) * runs} jobs, {threads} thread(s)")
        for n in names:
            cfg = rc.algo_config(n).to_dict()
            shown = {k: v for k, v in cfg.items() if v is not None and k not in ("algorithm", "seed")}
            print(f"  {n}: seeds {seed_base}..{seed_base + runs - 1} {shown}")
        print(f"output: {args.out}")
        return OK
    bc = BenchmarkConfig.from_run_config(rc, names, runs)
    golden = rc.golden.get("global_minimum", {}).get("f")
    result = run_benchmark(bc, threads=threads, golden=golden)
    export(result, args.out)
    print(format_summary(result.summary()))
    failures = result.failures()
    for algo, items in failures.items():
        for r, msg in items:
            _err(f"{algo} run {r}: {msg}")
    return FAILURE if failures else OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="parbo", description="Parallel Bayesian optimization benchmarks.")
    p.add_argument("--version", action="version", version=f"parbo {__version__}")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress and warnings")
    sub = p.add_subparsers(dest="command", required=True)

    v = sub.add_parser("validate", help="check a run-config file")
    v.add_argument("config", nargs="?", help="config path (default: shipped config)")
    v.set_defaults(func=cmd_validate)

    r = sub.add_parser("run", help="run one algorithm once")
    r.add_argument("config", nargs="?", help="config path (default: shipped config)")
    r.add_argument("--algo", required=True, choices=ALGORITHMS)
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--out", default=".")
    r.set_defaults(func=cmd_run)

    b = sub.add_parser("bench", help="run the full benchmark")
    b.add_argument("config", nargs="?", help="config path (default: shipped config)")
    b.add_argument("--out", default="bench_out")
    b.add_argument("--dry-run", action="store_true", help="print the plan without running")
    b.add_argument("--algos", help="comma-separated subset of algorithms")
    b.add_argument("--runs", type=int, help="override run_count")
    b.set_defaults(func=cmd_bench)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR, format="%(levelname)s %(message)s")
    if not args.verbose:
        warnings.simplefilter("ignore")
    try:
        return args.func(args)
    except ParboError as exc:
        _err(str(exc))
        return FAILURE
    except OSError as exc:
        _err(str(exc))
        return FAILURE


if __name__ == "__main__":
    sys.exit(main())
