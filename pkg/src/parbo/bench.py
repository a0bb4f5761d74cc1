"""Seeded multi-run benchmark harness with CSV/JSON export.

Every run index ``r`` draws one initial dataset from ``seed_base + r`` and
hands it to every algorithm, which is also seeded with ``seed_base + r``.
Runs are independent and may execute concurrently; the thread cap comes
from the ``PARBO_THREADS`` environment variable.
"""

from __future__ import annotations

import csv
import datetime as _dt
import json
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

import numpy as np

from .algorithms import AlgoConfig, IterationRecord, Problem, RunTrace, initial_design, run
from .exceptions import ConfigurationError, InvalidArgumentError, ParboError

log = logging.getLogger(__name__)

EXPORT_SCHEMA = 1
FLOAT_FORMAT = "{:.17g}"
THREADS_ENV = "PARBO_THREADS"


def thread_cap() -> int:
    """Concurrency cap from ``PARBO_THREADS`` (default 1)."""
    raw = os.environ.get(THREADS_ENV, "1")
    try:
        n = int(raw)
    except ValueError:
        raise ConfigurationError(f"{THREADS_ENV} must be a positive integer, got {raw!r}") from None
    if n < 1:
        raise ConfigurationError(f"{THREADS_ENV} must be a positive integer, got {raw!r}")
    return n


@dataclass
class BenchmarkConfig:
    """Everything a benchmark needs.

    Attributes
    ----------
    problem : Problem
    algorithms : list of AlgoConfig
        Seeds are overwritten per run.
    run_count : int
    seed_base : int
    experiment_cost : float or callable, optional
        Overrides the problem's cost model when given.
    init_points : int, optional
        Size of the shared initial design.
    config_hash : str
        Identifies the source configuration in the manifest.
    """

    problem: Problem
    algorithms: list
    run_count: int = 25
    seed_base: int = 1000
    experiment_cost: Optional[object] = None
    init_points: Optional[int] = None
    config_hash: str = ""

    def __post_init__(self):
        if self.run_count < 1:
            raise InvalidArgumentError("run_count must be at least 1")
        if not self.algorithms:
            raise InvalidArgumentError("a benchmark needs at least one algorithm")
        names = [a.algorithm for a in self.algorithms]
        if len(set(names)) != len(names):
            raise InvalidArgumentError("algorithm names in a benchmark must be unique")

    @classmethod
    def from_run_config(cls, rc, algorithms=None, run_count=None) -> "BenchmarkConfig":
        """Build from a parsed run-config file."""
        names = list(algorithms) if algorithms else rc.algorithm_names
        bench = rc.benchmark
        return cls(
            problem=rc.build_problem(),
            algorithms=[rc.algo_config(n) for n in names],
            run_count=int(run_count if run_count is not None else bench.get("run_count", 25)),
            seed_base=int(bench.get("seed_base", 1000)),
            init_points=bench.get("init_points"),
            config_hash=rc.config_hash(),
        )

    def plan(self) -> list:
        """``(algorithm, run, seed)`` triples in execution order."""
        return [(a.algorithm, r, self.seed_base + r) for a in self.algorithms for r in range(self.run_count)]


def step_value(times, values, t):
    """Value of a right-continuous step function at ``t``."""
    i = np.searchsorted(np.asarray(times), t, side="right") - 1
    return np.asarray(values)[np.maximum(i, 0)]


@dataclass
class BenchmarkResult:
    """Traces per algorithm plus aggregation helpers."""

    traces: dict
    config_hash: str = ""
    seed_base: int = 0
    run_count: int = 0
    started: str = ""
    finished: str = ""
    golden: Optional[float] = None
    _extra: dict = field(default_factory=dict, repr=False)

    @property
    def algorithms(self) -> list:
        return list(self.traces)

    def ok(self, algo) -> list:
        """Runs that completed without failure."""
        return [t for t in self.traces[algo] if not t.failed]

    def failures(self) -> dict:
        return {a: [(i, t.error) for i, t in enumerate(ts) if t.failed] for a, ts in self.traces.items()
                if any(t.failed for t in ts)}

    def mean_curve(self, algo, axis="exp"):
        """Mean, min and max of the per-run incumbent step functions.

        Returns ``(t, mean, lo, hi)`` on the union of all breakpoints.
        """
        curves = [t.curve(axis) for t in self.ok(algo)]
        if not curves:
            empty = np.array([])
            return empty, empty, empty, empty
        grid = np.unique(np.concatenate([c[0] for c in curves]))
        vals = np.array([step_value(c[0], c[1], grid) for c in curves])
        return grid, vals.mean(axis=0), vals.min(axis=0), vals.max(axis=0)

    def final_incumbents(self, algo) -> np.ndarray:
        return np.array([t.best_f for t in self.ok(algo)])

    def target(self, tolerance=0.01) -> float:
        """Value within ``tolerance`` (relative) of the golden or best-seen minimum."""
        ref = self.golden
        if ref is None:
            ref = min(float(np.min(self.final_incumbents(a))) for a in self.algorithms if self.ok(a))
        return ref + tolerance * abs(ref)

    def rounds_to_target(self, algo, target) -> np.ndarray:
        """Rounds until the incumbent reaches ``target`` (0 if the init set does; inf if never)."""
        out = []
        for t in self.ok(algo):
            if np.min(t.init_y) <= target:
                out.append(0.0)
                continue
            hit = [r.iteration for r in t.records if r.best_f <= target]
            out.append(float(hit[0]) if hit else np.inf)
        return np.array(out)

    def summary(self, tolerance=0.01) -> list:
        """One row per algorithm: final mean incumbent, mean rounds-to-target, overhead."""
        target = self.target(tolerance)
        rows = []
        for a in self.algorithms:
            ok = self.ok(a)
            rounds = self.rounds_to_target(a, target)
            reached = rounds[np.isfinite(rounds)]
            ov = np.array([t.overhead_ratio for t in ok], dtype=float)
            rows.append({
                "algorithm": a,
                "runs": len(self.traces[a]),
                "failed": len(self.traces[a]) - len(ok),
                "final_mean": float(np.mean(self.final_incumbents(a))) if ok else np.nan,
                "reached": int(reached.size),
                "mean_rounds": float(reached.mean()) if reached.size else np.inf,
                "overhead_median": float(np.nanmedian(ov)) if ok and np.any(np.isfinite(ov)) else np.nan,
            })
        return rows


def _one(problem, algo: AlgoConfig, seed, init):
    cfg = replace(algo, seed=seed)
    try:
        return run(problem, cfg, init)
    except ParboError as exc:
        log.error("%s seed %d failed: %s", algo.algorithm, seed, exc)
        trace = RunTrace(algo.algorithm, seed, np.asarray(init), np.full(len(init), np.nan))
        trace.failed = True
        trace.error = str(exc)
        return trace


def run_benchmark(config: BenchmarkConfig, threads: Optional[int] = None, golden=None) -> BenchmarkResult:
    """Run every algorithm on every seeded initial dataset."""
    problem = config.problem
    if config.experiment_cost is not None:
        problem = replace(problem, experiment_cost=config.experiment_cost)
    inits = [initial_design(problem, config.seed_base + r, config.init_points) for r in range(config.run_count)]
    jobs = [(a, r) for a in config.algorithms for r in range(config.run_count)]
    threads = thread_cap() if threads is None else int(threads)
    started = _dt.datetime.now(_dt.timezone.utc).isoformat()
    if threads <= 1:
        traces = [_one(problem, a, config.seed_base + r, inits[r]) for a, r in jobs]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            futures = [pool.submit(_one, problem, a, config.seed_base + r, inits[r]) for a, r in jobs]
            traces = [f.result() for f in futures]
    out = {a.algorithm: [] for a in config.algorithms}
    for (a, _), tr in zip(jobs, traces):
        out[a.algorithm].append(tr)
    return BenchmarkResult(
        out, config.config_hash, config.seed_base, config.run_count, started,
        _dt.datetime.now(_dt.timezone.utc).isoformat(), golden,
    )


# --------------------------------------------------------------------------- export


def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return FLOAT_FORMAT.format(float(v))


def trace_columns(dim: int) -> list:
    return ["iteration", "point"] + [f"x{i}" for i in range(dim)] + ["value", "incumbent", "exp_time_s"]


WALL_COLUMNS = ["iteration", "compute_s", "cpu_s", "wall_s"]


def _write_csv(path: Path, header, rows):
    path.parent.mkdir(parents=True, exist_ok=True)
    try:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for row in rows:
                w.writerow([_fmt(v) for v in row])
    except OSError as exc:
        raise OSError(exc.errno, f"cannot write {path}: {exc.strerror}") from None


def write_trace(trace: RunTrace, path, wall_path=None):
    """Write one run: a deterministic trace CSV and an optional wall-clock CSV.

    Iteration 0 holds the initial design.  ``incumbent`` is the best value
    after the point's round completes.
    """
    path = Path(path)
    dim = trace.init_X.shape[1]
    rows = []
    inc0 = float(np.min(trace.init_y))
    for j, (x, y) in enumerate(zip(trace.init_X, trace.init_y)):
        rows.append([0, j, *x, y, inc0, 0.0])
    for rec in trace.records:
        for j, (x, y) in enumerate(zip(rec.batch, rec.values)):
            rows.append([rec.iteration, j, *x, y, rec.best_f, rec.exp_time])
    _write_csv(path, trace_columns(dim), rows)
    if wall_path is not None:
        _write_csv(Path(wall_path), WALL_COLUMNS,
                   [[r.iteration, r.compute_time, r.cpu_time, r.wall_time] for r in trace.records])


def read_trace(path, wall_path=None, algorithm="", seed=0) -> RunTrace:
    """Inverse of :func:`write_trace` (up to the per-subsystem parts)."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, data = rows[0], np.array(rows[1:], dtype=float).reshape(-1, len(rows[0]))
    dim = len(header) - 5
    if header != trace_columns(dim):
        raise InvalidArgumentError(f"{path}: unexpected columns {header}")
    it = data[:, 0].astype(int)
    X, y, inc, et = data[:, 2:2 + dim], data[:, 2 + dim], data[:, 3 + dim], data[:, 4 + dim]
    walls = {}
    if wall_path is not None and Path(wall_path).exists():
        with open(wall_path, newline="") as fh:
            for row in list(csv.reader(fh))[1:]:
                walls[int(row[0])] = (float(row[1]), float(row[2]))
    trace = RunTrace(algorithm, seed, X[it == 0], y[it == 0])
    best_i = int(np.argmin(trace.init_y))
    best = (trace.init_X[best_i], trace.init_y[best_i])
    for k in sorted(set(it[it > 0].tolist())):
        m = it == k
        j = int(np.argmin(y[m]))
        if y[m][j] < best[1]:
            best = (X[m][j], y[m][j])
        comp, cpu = walls.get(k, (np.nan, np.nan))
        trace.records.append(IterationRecord(k, X[m], y[m], best[0].copy(), float(inc[m][0]),
                                             float(et[m][0]), comp, cpu))
    return trace


def export(result: BenchmarkResult, out_dir, formats=("csv", "json")) -> list:
    """Write runs, summary curves and the manifest; returns the written paths."""
    out = Path(out_dir)
    written = []
    if "csv" in formats:
        for algo, traces in result.traces.items():
            for r, tr in enumerate(traces):
                if tr.failed and not tr.records:
                    continue
                p = out / "runs" / algo / f"{r:03d}.csv"
                wp = out / "wall" / algo / f"{r:03d}.csv"
                write_trace(tr, p, wp)
                written += [p, wp]
            for axis, sub in (("exp", "summary"), ("wall", "summary_wall")):
                t, mean, lo, hi = result.mean_curve(algo, axis)
                p = out / sub / f"{algo}.csv"
                _write_csv(p, [f"{axis}_time_s", "mean", "min", "max"], zip(t, mean, lo, hi))
                written.append(p)
    if "json" in formats:
        manifest = {
            "schema_version": EXPORT_SCHEMA,
            "config_hash": result.config_hash,
            "seed_base": result.seed_base,
            "run_count": result.run_count,
            "algorithms": result.algorithms,
            "timestamps": {"started": result.started, "finished": result.finished},
            "failures": {a: [{"run": i, "error": e} for i, e in f] for a, f in result.failures().items()},
        }
        p = out / "manifest.json"
        p.parent.mkdir(parents=True, exist_ok=True)
        try:
            p.write_text(json.dumps(manifest, indent=2) + "\n")
        except OSError as exc:
            raise OSError(exc.errno, f"cannot write {p}: {exc.strerror}") from None
        written.append(p)
    return written


def load_result(out_dir) -> BenchmarkResult:
    """Re-import an exported benchmark directory."""
    out = Path(out_dir)
    manifest = json.loads((out / "manifest.json").read_text())
    traces = {}
    for algo in manifest["algorithms"]:
        runs = sorted((out / "runs" / algo).glob("*.csv"))
        traces[algo] = [read_trace(p, out / "wall" / algo / p.name, algo, manifest["seed_base"] + int(p.stem))
                        for p in runs]
    return BenchmarkResult(traces, manifest["config_hash"], manifest["seed_base"], manifest["run_count"],
                           manifest["timestamps"]["started"], manifest["timestamps"]["finished"])


def format_summary(rows) -> str:
    """Plain-text table of :meth:`BenchmarkResult.summary` rows."""
    head = f"{'algorithm':<8} {'runs':>4} {'fail':>4} {'final mean':>14} {'hit':>4} {'rounds':>7} {'overhead':>9}"
    lines = [head]
    for r in rows:
        lines.append(
            f"{r['algorithm']:<8} {r['runs']:>4} {r['failed']:>4} {r['final_mean']:>14.1f} "
            f"{r['reached']:>4} {r['mean_rounds']:>7.2f} {r['overhead_median']:>9.4f}"
        )
    return "\n".join(lines)
