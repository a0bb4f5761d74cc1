"""Sequential and parallel Bayesian-optimization drivers.

Every driver works in the unit cube of the problem's box: observations are
stored against unit coordinates, GPs are fitted there and acquisition
functions are minimized there; proposals are mapped back to the problem's
units before evaluation.

Random streams are keyed by ``(seed, iteration, purpose, batch slot)`` so a
driver's draws do not depend on how many numbers other parts of the loop
consumed.  This is what makes degenerate configurations (one batch slot, a
single region, a zero reference) reproduce the sequential driver bit for bit.

Time is tracked two ways.  Experiment time is the simulated cost of the
evaluations, counted once per round as the slowest member of the batch.
Compute time is measured with a monotonic clock; work that may run
concurrently within a round (the K acquisition subproblems, the K subsystem
GP fits) contributes its slowest task to the critical-path figure, and all
of it to the CPU figure.
"""

from __future__ import annotations

import logging
import time
import warnings
from dataclasses import dataclass, field, fields, replace
from typing import Callable, Optional

import numpy as np
from sklearn.base import BaseEstimator

from .acquisition import (
    AcqSpec,
    fantasy_models,
    lcb_values,
    mean_lcb_values,
    q_lcb_batched,
    sample_kappas,
)
from .afopt import BoxDomain, feasible_probes, latin_hypercube, minimize_box, minimize_levelset, minimize_subspace
from .exceptions import (
    ConfigurationError,
    EmptyRegionError,
    InvalidArgumentError,
    OptimizationError,
    ParboError,
)
from .gp import GaussianProcess
from .partition import PartitionScheme, hyperboxes

log = logging.getLogger(__name__)

ALGORITHMS = ("sbo", "refbo", "hpbo", "hsbo", "mcbo", "qbo", "lsbo", "vpbo")
BATCHED = ("hpbo", "hsbo", "mcbo", "qbo", "lsbo", "vpbo")

# purposes for keyed random streams
_GP, _AF, _KAPPA, _FANTASY, _QMC, _PROBE, _INIT = range(7)


def keyed_rng(seed: int, *key: int) -> np.random.Generator:
    """Generator determined by ``seed`` and an integer key path."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), *[int(k) for k in key]]))


# --------------------------------------------------------------------------- problem


@dataclass
class Problem:
    """Objective, box and optional extras.

    Attributes
    ----------
    objective : callable
        ``x -> f(x)`` on a 1-D design vector in the problem's units.
    domain : BoxDomain
    reference : callable, optional
        Vectorized ``(m, d) -> (m,)`` cheap approximation ``g`` of ``f``.
    subsystems : callable, optional
        ``x -> (f_1, ..., f_K)``, the per-subsystem values summing to ``f``.
    experiment_cost : float or callable, default=1.0
        Simulated seconds per evaluation, or ``x -> seconds``.
    """

    objective: Callable
    domain: BoxDomain
    reference: Optional[Callable] = None
    subsystems: Optional[Callable] = None
    experiment_cost: object = 1.0
    name: str = "problem"

    @property
    def dim(self) -> int:
        return self.domain.dim

    def cost(self, x) -> float:
        c = self.experiment_cost
        return float(c(x)) if callable(c) else float(c)

    def evaluate(self, x, with_parts=False):
        """``f(x)``, plus the subsystem vector when requested.

        With subsystems, ``f`` is their sum, which must agree with the
        objective to 1e-8 relative.
        """
        x = np.asarray(x, dtype=float)
        if with_parts and self.subsystems is not None:
            parts = np.asarray(self.subsystems(x), dtype=float).ravel()
            f = float(self.objective(x))
            if not np.isclose(parts.sum(), f, rtol=1e-8, atol=1e-8):
                raise ConfigurationError(
                    f"subsystem values sum to {parts.sum():.12g}, objective is {f:.12g}"
                )
            return f, parts
        f = float(self.objective(x))
        return (f, np.array([f])) if with_parts else f


# --------------------------------------------------------------------------- config


@dataclass
class AlgoConfig:
    """Settings of one driver.

    Fields left as ``None`` take the algorithm's default; fields that do not
    apply to the chosen algorithm are ignored with a warning.

    Attributes
    ----------
    algorithm : str
        One of ``sbo, refbo, hpbo, hsbo, mcbo, qbo, lsbo, vpbo``.
    kappa : float
        Exploration weight of the LCB.
    batch : int
        Experiments per round ``K`` (``q`` for q-BO).
    iterations : int
        Number of rounds ``L``.
    s_count : int
        Fantasy samples (MC-BO) or Monte-Carlo draws (q-BO).
    phi : float
        Box overlap for HS-BO.
    epsilon : float
        Minimum pairwise distance of a q-BO batch, unit-cube coordinates.
    splits : int
        Splits per dimension for HS-BO boxes; ``K = splits ** d``.
    partition : PartitionScheme
        Level-set bands (LS-BO) or variable blocks (VP-BO).
    use_reference_in_af : bool
        LS-BO models the residual ``f - g`` and adds ``g`` in the AF.
    sample_kappa : bool
        HP-BO draws ``kappa`` from an exponential; off pins it to ``kappa``.
    kappa_rate : float
        Rate of that exponential.
    aggregate : {"max", "min"}
        Inner aggregate of the q-LCB.
    common_random_numbers : bool
        q-BO reuses one set of normal draws within a round.
    fantasy_refit : bool
        MC-BO refits hyperparameters for every fantasy model.
    share_overlap : bool
        HS-BO appends a point to every box containing it.
    anchor_rule : {"block", "complement"}
        VP-BO context update, see :func:`run_vpbo`.
    af_starts : int
        Multistart count for acquisition minimization (default ``10 d``).
    gp_restarts : int
        Likelihood restarts per GP fit.
    seed : int
    """

    algorithm: str = "sbo"
    kappa: float = 2.0
    batch: Optional[int] = None
    iterations: int = 10
    s_count: Optional[int] = None
    phi: Optional[float] = None
    epsilon: Optional[float] = None
    splits: Optional[int] = None
    partition: Optional[PartitionScheme] = None
    use_reference_in_af: Optional[bool] = None
    sample_kappa: Optional[bool] = None
    kappa_rate: Optional[float] = None
    aggregate: Optional[str] = None
    common_random_numbers: Optional[bool] = None
    fantasy_refit: Optional[bool] = None
    share_overlap: Optional[bool] = None
    anchor_rule: Optional[str] = None
    af_starts: Optional[int] = None
    gp_restarts: int = 5
    seed: int = 0

    _SPECIFIC = {
        "batch": ("hpbo", "mcbo", "qbo", "lsbo", "vpbo"),
        "s_count": ("mcbo", "qbo"),
        "phi": ("hsbo",),
        "splits": ("hsbo",),
        "epsilon": ("qbo",),
        "partition": ("lsbo", "vpbo"),
        "use_reference_in_af": ("lsbo",),
        "sample_kappa": ("hpbo",),
        "kappa_rate": ("hpbo",),
        "aggregate": ("qbo",),
        "common_random_numbers": ("qbo",),
        "fantasy_refit": ("mcbo",),
        "share_overlap": ("hsbo",),
        "anchor_rule": ("vpbo",),
    }
    _DEFAULTS = {
        "batch": 1,
        "s_count": 10,
        "phi": 0.5,
        "splits": 2,
        "epsilon": 1e-3,
        "use_reference_in_af": False,
        "sample_kappa": True,
        "kappa_rate": 1.0,
        "aggregate": "max",
        "common_random_numbers": True,
        "fantasy_refit": False,
        "share_overlap": True,
        "anchor_rule": "block",
    }

    def resolved(self) -> "AlgoConfig":
        """Copy with defaults filled in and inapplicable fields dropped."""
        if self.algorithm not in ALGORITHMS:
            raise ConfigurationError(f"unknown algorithm {self.algorithm!r}; expected one of {ALGORITHMS}")
        if not self.kappa >= 0:
            raise ConfigurationError("kappa must be nonnegative")
        if self.iterations < 0:
            raise ConfigurationError("iterations must be nonnegative")
        changes = {}
        for name, algos in self._SPECIFIC.items():
            value = getattr(self, name)
            if self.algorithm in algos:
                if value is None and name in self._DEFAULTS:
                    changes[name] = self._DEFAULTS[name]
            elif value is not None:
                warnings.warn(f"{name} is ignored by {self.algorithm}", UserWarning, stacklevel=2)
                changes[name] = None
        out = replace(self, **changes)
        if out.batch is not None and out.batch < 1:
            raise ConfigurationError("batch must be at least 1")
        if out.s_count is not None and out.s_count < 1:
            raise ConfigurationError("s_count must be at least 1")
        if out.phi is not None and not 0 <= out.phi <= 1:
            raise ConfigurationError("phi must lie in [0, 1]")
        if out.epsilon is not None and out.epsilon < 0:
            raise ConfigurationError("epsilon must be nonnegative")
        if out.aggregate not in (None, "max", "min"):
            raise ConfigurationError("aggregate must be 'max' or 'min'")
        if out.anchor_rule not in (None, "block", "complement"):
            raise ConfigurationError("anchor_rule must be 'block' or 'complement'")
        if out.algorithm in ("lsbo", "vpbo") and out.partition is None:
            raise ConfigurationError(f"{out.algorithm} needs a partition")
        return out

    def to_dict(self) -> dict:
        out = {}
        for f in fields(self):
            if f.name.startswith("_"):
                continue
            v = getattr(self, f.name)
            if isinstance(v, PartitionScheme):
                v = {"kind": v.kind, "count": v.count}
            out[f.name] = v
        return out


# --------------------------------------------------------------------------- trace


@dataclass
class IterationRecord:
    """One round of a run; ``batch`` is in the problem's units."""

    iteration: int
    batch: np.ndarray
    values: np.ndarray
    best_x: np.ndarray
    best_f: float
    exp_time: float
    compute_time: float
    cpu_time: float
    parts: Optional[np.ndarray] = None

    @property
    def wall_time(self) -> float:
        """Cumulative experiment plus critical-path compute seconds."""
        return self.exp_time + self.compute_time


@dataclass
class RunTrace:
    algorithm: str
    seed: int
    init_X: np.ndarray
    init_y: np.ndarray
    records: list = field(default_factory=list)
    failed: bool = False
    error: str = ""

    @property
    def iterations(self) -> int:
        return len(self.records)

    @property
    def n_evaluations(self) -> int:
        return sum(len(r.values) for r in self.records)

    @property
    def best_f(self) -> float:
        return self.records[-1].best_f if self.records else float(np.min(self.init_y))

    @property
    def best_x(self) -> np.ndarray:
        if self.records:
            return self.records[-1].best_x
        return self.init_X[int(np.argmin(self.init_y))]

    def curve(self, axis="exp"):
        """Step-function incumbent curve ``(times, best)`` starting at time 0."""
        if axis not in ("exp", "wall"):
            raise InvalidArgumentError("axis must be 'exp' or 'wall'")
        t = [0.0] + [r.exp_time if axis == "exp" else r.wall_time for r in self.records]
        b = [float(np.min(self.init_y))] + [r.best_f for r in self.records]
        return np.asarray(t), np.asarray(b)

    def time_to_target(self, target: float, axis="exp") -> float:
        """First time the incumbent is at or below ``target``; ``inf`` if never."""
        t, b = self.curve(axis)
        hit = np.flatnonzero(b <= target)
        return float(t[hit[0]]) if hit.size else np.inf

    @property
    def overhead_ratio(self) -> float:
        """Critical-path compute time over experiment time."""
        if not self.records or self.records[-1].exp_time <= 0:
            return np.nan
        return self.records[-1].compute_time / self.records[-1].exp_time


# --------------------------------------------------------------------------- session


def initial_design(problem: Problem, seed: int, n: Optional[int] = None) -> np.ndarray:
    """Latin-hypercube initial points, ``max(3, d + 1)`` by default."""
    n = max(3, problem.dim + 1) if n is None else int(n)
    return latin_hypercube(problem.domain, n, keyed_rng(seed, 0, _INIT))


class _Session:
    """Data, timers and trace shared by the drivers."""

    def __init__(self, problem: Problem, cfg: AlgoConfig, init_X, with_parts=False, init_y=None,
                 init_parts=None):
        self.problem = problem
        self.cfg = cfg
        self.dom = problem.domain
        self.unit = BoxDomain.unit(problem.dim)
        self.with_parts = with_parts
        init_X = np.atleast_2d(np.asarray(init_X, dtype=float))
        if init_X.shape[0] == 0:
            raise InvalidArgumentError("initial dataset must be nonempty")
        if not np.all(self.dom.contains(init_X)):
            raise InvalidArgumentError("initial points must lie inside the domain")
        if init_y is None:
            evals = [problem.evaluate(x, with_parts=True) for x in init_X]
            init_y = np.array([e[0] for e in evals])
            init_parts = np.array([e[1] for e in evals])
        self.U = self.dom.to_unit(init_X)
        self.y = np.asarray(init_y, dtype=float)
        self.parts = None if init_parts is None else np.asarray(init_parts, dtype=float)
        if not np.all(np.isfinite(self.y)):
            raise InvalidArgumentError("initial observations must be finite")
        self.trace = RunTrace(cfg.algorithm, cfg.seed, init_X.copy(), self.y.copy())
        self.exp_time = 0.0
        self.compute = 0.0
        self.cpu = 0.0
        self._t0 = None
        self._parallel = []

    # timing -----------------------------------------------------------------
    def start(self):
        self._t0 = time.perf_counter()
        self._parallel = []

    def task(self, fn, *args, **kwargs):
        """Run ``fn`` as one of the round's concurrent tasks, timing it."""
        t = time.perf_counter()
        out = fn(*args, **kwargs)
        self._parallel.append(time.perf_counter() - t)
        return out

    def stop(self):
        total = time.perf_counter() - self._t0
        par = float(sum(self._parallel))
        self.compute += total - par + (max(self._parallel) if self._parallel else 0.0)
        self.cpu += total

    # modeling ---------------------------------------------------------------
    def rng(self, it, purpose, k=0):
        return keyed_rng(self.cfg.seed, it, purpose, k)

    def fit(self, U, y, it, k=0):
        return GaussianProcess(
            length_scale=0.3, n_restarts=self.cfg.gp_restarts, random_state=self.rng(it, _GP, k)
        ).fit(U, y)

    def starts(self, dim):
        return self.cfg.af_starts if self.cfg.af_starts is not None else 10 * dim

    # evaluation -------------------------------------------------------------
    def evaluate(self, it, U_batch, parts_needed=False):
        """Evaluate a batch, append it and record the round.  Returns False on failure."""
        self.stop()
        U_batch = np.atleast_2d(U_batch)
        X = self.dom.from_unit(U_batch)
        vals, parts = [], []
        for x in X:
            try:
                f, p = self.problem.evaluate(x, with_parts=True)
            except ParboError as exc:
                return self._fail(f"evaluation at {x.tolist()} failed: {exc}")
            if not np.isfinite(f):
                return self._fail(f"objective is not finite at {x.tolist()}")
            vals.append(f)
            parts.append(p)
        vals = np.asarray(vals)
        self.exp_time += max(self.problem.cost(x) for x in X)
        self.U = np.vstack([self.U, U_batch])
        self.y = np.concatenate([self.y, vals])
        if self.parts is not None:
            self.parts = np.vstack([self.parts, np.asarray(parts)])
        i = int(np.argmin(self.y))
        self.trace.records.append(
            IterationRecord(
                iteration=it,
                batch=X,
                values=vals,
                best_x=self.dom.from_unit(self.U[i]),
                best_f=float(self.y[i]),
                exp_time=self.exp_time,
                compute_time=self.compute,
                cpu_time=self.cpu,
                parts=np.asarray(parts) if parts_needed else None,
            )
        )
        return True

    def _fail(self, msg):
        log.error("%s run aborted: %s", self.cfg.algorithm, msg)
        self.trace.failed = True
        self.trace.error = msg
        return False


def _reference_unit(problem: Problem, dom: BoxDomain):
    if problem.reference is None:
        return None
    return lambda U: np.asarray(problem.reference(dom.from_unit(np.atleast_2d(U))), dtype=float).reshape(-1)


def _lcb_af(model, spec):
    return lambda X: lcb_values(model, X, spec)


# --------------------------------------------------------------------------- drivers


def run_sbo(problem: Problem, config: AlgoConfig, init) -> RunTrace:
    """Sequential BO: fit, minimize the LCB over the box, evaluate, repeat."""
    cfg = replace(config, algorithm="sbo").resolved()
    s = _Session(problem, cfg, init)
    spec = AcqSpec(cfg.kappa)
    for it in range(1, cfg.iterations + 1):
        s.start()
        gp = s.fit(s.U, s.y, it)
        u, _ = minimize_box(_lcb_af(gp, spec), s.unit, s.starts(problem.dim), s.rng(it, _AF), vectorized=True)
        if not s.evaluate(it, u):
            break
    return s.trace


def run_refbo(problem: Problem, config: AlgoConfig, init) -> RunTrace:
    """Sequential BO on the residual ``f - g`` with ``g`` added back in the AF."""
    if problem.reference is None:
        raise ConfigurationError("refbo needs a reference model")
    cfg = replace(config, algorithm="refbo").resolved()
    s = _Session(problem, cfg, init)
    g = _reference_unit(problem, s.dom)
    spec = AcqSpec(cfg.kappa, reference=g, mode="with_reference")
    for it in range(1, cfg.iterations + 1):
        s.start()
        eps = s.y - g(s.U)
        gp = s.fit(s.U, eps, it)
        u, _ = minimize_box(_lcb_af(gp, spec), s.unit, s.starts(problem.dim), s.rng(it, _AF), vectorized=True)
        if not s.evaluate(it, u):
            break
    return s.trace


def run_hpbo(problem: Problem, config: AlgoConfig, init) -> RunTrace:
    """K box minimizations of the LCB with exponentially sampled ``kappa``."""
    cfg = replace(config, algorithm="hpbo").resolved()
    s = _Session(problem, cfg, init)
    K = cfg.batch
    for it in range(1, cfg.iterations + 1):
        s.start()
        gp = s.fit(s.U, s.y, it)
        if cfg.sample_kappa:
            kappas = sample_kappas(K, cfg.kappa_rate, s.rng(it, _KAPPA))
        else:
            kappas = np.full(K, cfg.kappa)
        batch = []
        for k in range(K):
            u, _ = s.task(minimize_box, _lcb_af(gp, AcqSpec(float(kappas[k]))), s.unit,
                          s.starts(problem.dim), s.rng(it, _AF, k), vectorized=True)
            batch.append(u)
        if not s.evaluate(it, np.array(batch)):
            break
    return s.trace


def run_hsbo(problem: Problem, config: AlgoConfig, init) -> RunTrace:
    """One GP and one box-restricted LCB minimization per overlapping box."""
    cfg = replace(config, algorithm="hsbo").resolved()
    s = _Session(problem, cfg, init)
    scheme = hyperboxes(s.unit, cfg.splits, cfg.phi)
    spec = AcqSpec(cfg.kappa)
    K = scheme.count
    members = [list(np.flatnonzero(box.contains(s.U))) for box in scheme.regions]
    for it in range(1, cfg.iterations + 1):
        s.start()
        batch = []
        for k, box in enumerate(scheme.regions):
            idx = members[k]

            def solve(idx=idx, box=box, k=k):
                gp = s.fit(s.U[idx].reshape(-1, problem.dim), s.y[idx], it, k)
                u, _ = minimize_box(_lcb_af(gp, spec), box, s.starts(problem.dim), s.rng(it, _AF, k),
                                    vectorized=True)
                return u

            batch.append(s.task(solve))
        n0 = s.U.shape[0]
        if not s.evaluate(it, np.array(batch)):
            break
        for j, u in enumerate(batch):
            for k, box in enumerate(scheme.regions):
                if (cfg.share_overlap and box.contains(u)[0]) or (not cfg.share_overlap and k == j):
                    members[k].append(n0 + j)
    return s.trace


def run_mcbo(problem: Problem, config: AlgoConfig, init) -> RunTrace:
    """Batch filling with fantasy-averaged LCBs over the pending points."""
    cfg = replace(config, algorithm="mcbo").resolved()
    s = _Session(problem, cfg, init)
    spec = AcqSpec(cfg.kappa)
    for it in range(1, cfg.iterations + 1):
        s.start()
        gp = s.fit(s.U, s.y, it)
        u, _ = minimize_box(_lcb_af(gp, spec), s.unit, s.starts(problem.dim), s.rng(it, _AF, 0), vectorized=True)
        batch = [u]
        for k in range(1, cfg.batch):
            models = fantasy_models(gp, np.array(batch), cfg.s_count, s.rng(it, _FANTASY, k),
                                    refit=cfg.fantasy_refit)
            u, _ = minimize_box(lambda X, m=models: mean_lcb_values(m, X, spec), s.unit,
                                s.starts(problem.dim), s.rng(it, _AF, k), vectorized=True)
            batch.append(u)
        if not s.evaluate(it, np.array(batch)):
            break
    return s.trace


def _separate(B, eps, lower=0.0, upper=1.0):
    """Move batch points the least distance needed to be ``eps`` apart.

    Points are placed in order. A point closer than ``eps`` to an already placed
    one is moved to the nearest feasible candidate along the direction away
    from its nearest neighbour or along a coordinate axis.
    """
    B = np.array(B, dtype=float)
    q, d = B.shape
    if q < 2 or eps <= 0:
        return B
    steps = eps * 0.505 * np.arange(1, 4 * q + 1)
    axes = np.vstack([np.eye(d), -np.eye(d)])
    for j in range(1, q):
        placed = B[:j]
        dist = np.linalg.norm(placed - B[j], axis=1)
        if dist.min() >= eps:
            continue
        away = B[j] - placed[np.argmin(dist)]
        norm = np.linalg.norm(away)
        dirs = np.vstack([away / norm, axes]) if norm > 0 else axes
        cand = np.clip(B[j] + steps[:, None, None] * dirs[None], lower, upper).reshape(-1, d)
        ok = np.all(np.linalg.norm(cand[:, None] - placed[None], axis=-1) >= eps, axis=1)
        if not ok.any():
            raise OptimizationError(f"cannot separate batch to minimum distance {eps:g}")
        cand = cand[ok]
        B[j] = cand[np.argmin(np.linalg.norm(cand - B[j], axis=1))]
    return B


def run_qbo(problem: Problem, config: AlgoConfig, init) -> RunTrace:
    """Joint minimization of the Monte-Carlo q-LCB over the whole batch."""
    cfg = replace(config, algorithm="qbo").resolved()
    s = _Session(problem, cfg, init)
    q, d, eps = cfg.batch, problem.dim, cfg.epsilon
    big = BoxDomain.unit(q * d)
    for it in range(1, cfg.iterations + 1):
        s.start()
        gp = s.fit(s.U, s.y, it)
        zrng = s.rng(it, _QMC)
        z_fixed = zrng.standard_normal((cfg.s_count, q)) if cfg.common_random_numbers else None
        scale = float(np.std(s.y)) or 1.0

        def af(Z, z_fixed=z_fixed, gp=gp, scale=scale):
            B = Z.reshape(-1, q, d)
            z = z_fixed if z_fixed is not None else zrng.standard_normal((cfg.s_count, q))
            vals = q_lcb_batched(gp, B, cfg.kappa, z, cfg.aggregate)
            if q > 1 and eps > 0:
                iu = np.triu_indices(q, 1)
                dist = np.linalg.norm(B[:, :, None, :] - B[:, None, :, :], axis=-1)[:, iu[0], iu[1]]
                gap = np.maximum(0.0, eps - dist.min(axis=1)) / eps
                vals = np.where(np.isfinite(vals), vals, np.nanmax(vals, initial=0.0) + scale)
                vals = vals + 10.0 * scale * gap
            return vals

        try:
            Z, _ = minimize_box(af, big, s.starts(q * d), s.rng(it, _AF), vectorized=True)
            B = _separate(Z.reshape(q, d), eps)
        except OptimizationError as exc:
            s.stop()
            s._fail(str(exc))
            break
        if not s.evaluate(it, B):
            break
    return s.trace


def _region_probes(s, scheme, K):
    out = []
    for k, region in enumerate(scheme.regions):
        if np.isinf(region.alpha_lo) and np.isinf(region.alpha_hi):
            out.append(None)
        else:
            out.append(feasible_probes(s.unit, region, keyed_rng(s.cfg.seed, 0, _PROBE, k)))
    return out


def run_lsbo(problem: Problem, config: AlgoConfig, init) -> RunTrace:
    """One global GP; one LCB minimization inside each level-set band."""
    cfg = replace(config, algorithm="lsbo").resolved()
    scheme = cfg.partition
    if scheme.kind != "levelset":
        raise ConfigurationError("lsbo needs a level-set partition")
    s = _Session(problem, cfg, init)
    g = _reference_unit(problem, s.dom)
    if cfg.use_reference_in_af and g is None:
        raise ConfigurationError("use_reference_in_af needs a reference model")
    spec = AcqSpec(cfg.kappa, reference=g, mode="with_reference") if cfg.use_reference_in_af else AcqSpec(cfg.kappa)
    probes = _region_probes(s, scheme, scheme.count)
    for it in range(1, cfg.iterations + 1):
        s.start()
        target = s.y - g(s.U) if cfg.use_reference_in_af else s.y
        gp = s.fit(s.U, target, it)
        af = _lcb_af(gp, spec)
        batch = []
        for k, region in enumerate(scheme.regions):
            if probes[k] is not None and probes[k].shape[0] == 0:
                log.warning("band %d is empty; skipped", k)
                continue
            try:
                u, _ = s.task(minimize_levelset, af, s.unit, region, s.starts(problem.dim),
                              s.rng(it, _AF, k), vectorized=True, probes=probes[k])
            except EmptyRegionError:
                log.warning("band %d is empty; skipped", k)
                continue
            batch.append(u)
        if not batch:
            s.stop()
            s._fail("every level-set band is empty")
            break
        if not s.evaluate(it, np.array(batch)):
            break
    return s.trace


def run_vpbo(problem: Problem, config: AlgoConfig, init) -> RunTrace:
    """Gauss-Seidel style BO over disjoint variable blocks.

    Subsystem ``k`` owns a GP of its own value ``f_k`` over the full design
    and proposes its block ``x_k`` with the rest pinned at its context
    ``x_{-k}``.  After each round the ``K x K`` matrix of subsystem values
    (row: evaluated point, column: subsystem) updates the contexts:

    * ``anchor_rule="complement"``: ``x_{-k}`` is copied from the row with
      the smallest ``f_k``;
    * ``anchor_rule="block"``: every block ``x_j`` of every context is copied
      from the row with the smallest ``f_j``, so each subsystem sees the other
      subsystems' best choices.
    """
    cfg = replace(config, algorithm="vpbo").resolved()
    scheme = cfg.partition
    if scheme.kind != "variable":
        raise ConfigurationError("vpbo needs a variable partition")
    K = scheme.count
    blocks = [np.asarray(b, dtype=int) for b in scheme.regions]
    d = problem.dim
    if max(int(b.max()) for b in blocks) >= d:
        raise ConfigurationError("variable partition refers to a dimension outside the problem")
    if K > 1 and problem.subsystems is None:
        raise ConfigurationError("vpbo with several blocks needs per-subsystem values")
    s = _Session(problem, cfg, init)
    if K > 1 and (s.parts is None or s.parts.shape[1] != K):
        raise ConfigurationError(f"problem reports {None if s.parts is None else s.parts.shape[1]} "
                                 f"subsystem values, partition has {K} blocks")
    spec = AcqSpec(cfg.kappa)
    best = s.U[int(np.argmin(s.y))]
    anchors = [best.copy() for _ in range(K)]
    for it in range(1, cfg.iterations + 1):
        s.start()
        batch = []
        for k in range(K):
            free = blocks[k]
            fixed = np.setdiff1d(np.arange(d), free)

            def solve(k=k, free=free, fixed=fixed):
                gp = s.fit(s.U, s.parts[:, k] if K > 1 else s.y, it, k)
                xf, _ = minimize_subspace(_lcb_af(gp, spec), s.unit, free, anchors[k][fixed],
                                          s.starts(free.size), s.rng(it, _AF, k), vectorized=True)
                u = anchors[k].copy()
                u[free] = xf
                return u

            batch.append(s.task(solve))
        batch = np.array(batch)
        n0 = s.U.shape[0]
        if not s.evaluate(it, batch, parts_needed=K > 1):
            break
        if K == 1:
            continue
        F = s.parts[n0:]
        if cfg.anchor_rule == "complement":
            for k in range(K):
                r = int(np.argmin(F[:, k]))
                fixed = np.setdiff1d(np.arange(d), blocks[k])
                anchors[k][fixed] = batch[r, fixed]
        else:
            for j in range(K):
                r = int(np.argmin(F[:, j]))
                for k in range(K):
                    anchors[k][blocks[j]] = batch[r, blocks[j]]
    return s.trace


DRIVERS = {
    "sbo": run_sbo,
    "refbo": run_refbo,
    "hpbo": run_hpbo,
    "hsbo": run_hsbo,
    "mcbo": run_mcbo,
    "qbo": run_qbo,
    "lsbo": run_lsbo,
    "vpbo": run_vpbo,
}


def run(problem: Problem, config: AlgoConfig, init=None) -> RunTrace:
    """Dispatch to the driver named by ``config.algorithm``."""
    if config.algorithm not in DRIVERS:
        raise ConfigurationError(f"unknown algorithm {config.algorithm!r}; expected one of {ALGORITHMS}")
    if init is None:
        init = initial_design(problem, config.seed)
    return DRIVERS[config.algorithm](problem, config, init)


# --------------------------------------------------------------------------- estimator


class ParallelBayesOpt(BaseEstimator):
    """Estimator-style wrapper around the drivers.

    Parameters mirror :class:`AlgoConfig`.  ``fit(problem)`` runs the driver
    and sets ``trace_``, ``x_best_`` and ``f_best_``.
    """

    def __init__(self, algorithm="sbo", kappa=2.0, batch=None, iterations=10, s_count=None, phi=None,
                 epsilon=None, splits=None, partition=None, use_reference_in_af=None, af_starts=None,
                 gp_restarts=5, seed=0):
        self.algorithm = algorithm
        self.kappa = kappa
        self.batch = batch
        self.iterations = iterations
        self.s_count = s_count
        self.phi = phi
        self.epsilon = epsilon
        self.splits = splits
        self.partition = partition
        self.use_reference_in_af = use_reference_in_af
        self.af_starts = af_starts
        self.gp_restarts = gp_restarts
        self.seed = seed

    def fit(self, problem: Problem, init=None):
        cfg = AlgoConfig(**self.get_params())
        self.trace_ = run(problem, cfg, init)
        self.x_best_ = self.trace_.best_x
        self.f_best_ = self.trace_.best_f
        return self
