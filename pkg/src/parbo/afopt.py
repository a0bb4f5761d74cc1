"""Acquisition-function minimization over boxes, level-set bands and subspaces.

Acquisition functions are called with a 2-D array of candidate points and
must return one value per row when ``vectorized=True``; plain scalar
callables are wrapped row by row otherwise.  Local descents use L-BFGS-B with
central-difference gradients evaluated in a single batched call.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize
from scipy.stats import qmc

from .exceptions import EmptyRegionError, InvalidArgumentError, OptimizationError

FD_STEP = 1e-6
LEVELSET_PROBES = 4096
PENALTY_START = 1e3
PENALTY_MAX = 1e9


@dataclass(frozen=True)
class BoxDomain:
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = np.atleast_1d(np.asarray(self.lower, dtype=float))
        hi = np.atleast_1d(np.asarray(self.upper, dtype=float))
        if lo.shape != hi.shape:
            raise InvalidArgumentError("lower and upper bounds differ in shape")
        if not np.all(lo < hi):
            raise InvalidArgumentError("every lower bound must be below its upper bound")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @property
    def dim(self) -> int:
        return self.lower.size

    @property
    def width(self) -> np.ndarray:
        return self.upper - self.lower

    @classmethod
    def unit(cls, dim: int) -> "BoxDomain":
        return cls(np.zeros(dim), np.ones(dim))

    def contains(self, X, tol=0.0) -> np.ndarray:
        X = np.atleast_2d(X)
        return np.all((X >= self.lower - tol) & (X <= self.upper + tol), axis=1)

    def to_unit(self, X):
        return (np.asarray(X, dtype=float) - self.lower) / self.width

    def from_unit(self, U):
        return self.lower + np.asarray(U, dtype=float) * self.width

    def bounds(self):
        return list(zip(self.lower, self.upper))


@dataclass(frozen=True)
class LevelSetRegion:
    """Band ``alpha_lo <= mean(surrogate(x)) <= alpha_hi`` of a reference GP.

    Infinite thresholds are allowed and leave that side unconstrained.
    """

    surrogate: object
    alpha_lo: float
    alpha_hi: float

    def __post_init__(self):
        if not self.alpha_lo <= self.alpha_hi:
            raise InvalidArgumentError("alpha_lo must not exceed alpha_hi")

    @property
    def tolerance(self) -> float:
        width = self.alpha_hi - self.alpha_lo
        return 1e-6 * width if np.isfinite(width) else 0.0

    def level(self, X):
        return np.asarray(self.surrogate.predict(np.atleast_2d(X)), dtype=float)

    def violation(self, values):
        values = np.asarray(values, dtype=float)
        return np.maximum(0.0, np.maximum(self.alpha_lo - values, values - self.alpha_hi))

    def feasible(self, X, tol=None):
        tol = self.tolerance if tol is None else tol
        return self.violation(self.level(X)) <= tol


def latin_hypercube(domain: BoxDomain, n: int, rng) -> np.ndarray:
    """``n`` Latin-hypercube points in ``domain``."""
    sampler = qmc.LatinHypercube(d=domain.dim, seed=rng)
    return domain.from_unit(sampler.random(n))


def _batched(af, vectorized):
    if vectorized:
        return lambda X: np.asarray(af(X), dtype=float).reshape(-1)
    return lambda X: np.array([float(af(x)) for x in X])


def _fun_and_grad(f, lower, upper, step):
    """Wrap a batched function as ``x -> (value, central-difference gradient)``."""
    d = lower.size
    eye = np.eye(d)

    def wrapped(x):
        up = np.minimum(x + step * eye, upper)
        dn = np.maximum(x - step * eye, lower)
        vals = f(np.vstack([x[None, :], up, dn]))
        h = up.diagonal() - dn.diagonal()
        grad = (vals[1 : d + 1] - vals[d + 1 :]) / np.where(h > 0, h, 1.0)
        v = vals[0]
        if not np.isfinite(v):
            return np.inf, np.zeros(d)
        grad = np.where(np.isfinite(grad), grad, 0.0)
        return v, grad

    return wrapped


def _local_descent(fg, x0, bounds, maxiter):
    res = minimize(
        fg, x0, jac=True, method="L-BFGS-B", bounds=bounds, options={"maxiter": maxiter}
    )
    return np.asarray(res.x, dtype=float)


def minimize_box(af, domain: BoxDomain, starts: int | None = None, rng=None,
                 vectorized=False, maxiter=200):
    """Best of ``starts`` bounded local descents from Latin-hypercube points.

    Returns ``(x_best, value)``.  Starts where ``af`` is non-finite are
    discarded.
    """
    rng = np.random.default_rng(rng)
    f = _batched(af, vectorized)
    starts = 10 * domain.dim if starts is None else int(starts)
    X0 = latin_hypercube(domain, max(starts, 1), rng)
    return _multistart(f, X0, domain, maxiter)


def _multistart(f, X0, domain, maxiter):
    v0 = f(X0)
    ok = np.isfinite(v0)
    if not ok.any():
        raise OptimizationError("acquisition function is non-finite at every start")
    step = FD_STEP * domain.width
    fg = _fun_and_grad(f, domain.lower, domain.upper, step)
    bounds = domain.bounds()
    i0 = int(np.argmin(np.where(ok, v0, np.inf)))
    best_x, best_v = X0[i0].copy(), float(v0[i0])
    for x0 in X0[ok]:
        x = np.clip(_local_descent(fg, x0, bounds, maxiter), domain.lower, domain.upper)
        v = float(f(x[None, :])[0])
        if np.isfinite(v) and v < best_v:
            best_x, best_v = x, v
    return best_x, best_v


def minimize_subspace(af, domain: BoxDomain, free, fixed_values, starts=None, rng=None,
                      vectorized=False, maxiter=200):
    """Minimize over the ``free`` coordinates with the complement pinned.

    ``fixed_values`` lists the pinned values in increasing index order of the
    complement.  Returns ``(x_free, value)``.
    """
    free = np.asarray(sorted(set(int(i) for i in free)), dtype=int)
    if free.size == 0:
        raise InvalidArgumentError("free index set must be nonempty")
    fixed = np.setdiff1d(np.arange(domain.dim), free)
    fixed_values = np.atleast_1d(np.asarray(fixed_values, dtype=float))
    if fixed_values.size != fixed.size:
        raise InvalidArgumentError(
            f"expected {fixed.size} fixed values, got {fixed_values.size}"
        )
    if fixed.size and not np.all(
        (fixed_values >= domain.lower[fixed]) & (fixed_values <= domain.upper[fixed])
    ):
        raise InvalidArgumentError("fixed values lie outside the domain")
    f = _batched(af, vectorized)

    def reduced(Z):
        X = np.empty((Z.shape[0], domain.dim))
        X[:, free] = Z
        X[:, fixed] = fixed_values
        return f(X)

    sub = BoxDomain(domain.lower[free], domain.upper[free])
    starts = 10 * sub.dim if starts is None else int(starts)
    rng = np.random.default_rng(rng)
    X0 = latin_hypercube(sub, max(starts, 1), rng)
    return _multistart(reduced, X0, sub, maxiter)


def _repair_toward(x_start, x_end, region, tol, iters=60):
    """Last feasible point on the segment from feasible ``x_start`` to ``x_end``."""
    lo, hi = 0.0, 1.0
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        x = x_start + mid * (x_end - x_start)
        if region.violation(region.level(x[None, :]))[0] <= tol:
            lo = mid
        else:
            hi = mid
    return x_start + lo * (x_end - x_start)


def feasible_probes(domain: BoxDomain, region: LevelSetRegion, rng, n=LEVELSET_PROBES):
    """Latin-hypercube probes that satisfy the band constraint."""
    P = latin_hypercube(domain, n, rng)
    mask = region.violation(region.level(P)) <= region.tolerance
    return P[mask]


def minimize_levelset(af, domain: BoxDomain, region: LevelSetRegion, starts=None, rng=None,
                      vectorized=False, maxiter=200, probes=None):
    """Minimize ``af`` subject to the level-set band of ``region``.

    The band is enforced by an exact penalty on the surrogate mean, with the
    weight escalated tenfold until the descent lands inside the band; any
    leftover violation is removed by bisecting back toward the feasible
    start.  The returned point always satisfies the band within
    ``region.tolerance``.
    """
    if np.isinf(region.alpha_lo) and np.isinf(region.alpha_hi) and probes is None:
        return minimize_box(af, domain, starts, rng, vectorized, maxiter)
    rng = np.random.default_rng(rng)
    f = _batched(af, vectorized)
    starts = 10 * domain.dim if starts is None else int(starts)
    P = feasible_probes(domain, region, rng) if probes is None else np.atleast_2d(probes)
    if P.shape[0] == 0:
        raise EmptyRegionError(
            f"no feasible probe for band [{region.alpha_lo:g}, {region.alpha_hi:g}]"
        )
    tol = region.tolerance
    vals = f(P)
    ok = np.isfinite(vals)
    if not ok.any():
        raise OptimizationError("acquisition function is non-finite on the feasible probes")
    P, vals = P[ok], vals[ok]

    order = np.argsort(vals)
    n_best = max(1, starts // 2)
    pick = list(order[:n_best])
    rest = order[n_best:]
    if rest.size:
        pick += list(rng.choice(rest, size=min(starts - n_best, rest.size), replace=False))
    X0 = P[pick]

    width = region.alpha_hi - region.alpha_lo
    if not np.isfinite(width) or width <= 0:
        lv = region.level(P)
        width = max(float(np.ptp(lv)), 1.0)
    af_scale = float(np.std(vals)) or 1.0

    best_x, best_v = P[order[0]].copy(), float(vals[order[0]])
    step = FD_STEP * domain.width
    bounds = domain.bounds()
    for x0 in X0:
        rho = PENALTY_START
        x = x0
        while True:
            def penalized(X, rho=rho):
                return f(X) + rho * af_scale * region.violation(region.level(X)) / width

            fg = _fun_and_grad(penalized, domain.lower, domain.upper, step)
            x = np.clip(_local_descent(fg, x, bounds, maxiter), domain.lower, domain.upper)
            viol = region.violation(region.level(x[None, :]))[0]
            if viol <= tol or rho >= PENALTY_MAX:
                break
            rho *= 10.0
        if viol > tol:
            x = _repair_toward(x0, x, region, tol)
        v = float(f(x[None, :])[0])
        if np.isfinite(v) and v < best_v:
            best_x, best_v = x, v
    return best_x, best_v
