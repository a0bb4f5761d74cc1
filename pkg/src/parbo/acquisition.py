"""Lower-confidence-bound acquisition family.

Covers the plain LCB, the reference-augmented LCB (the GP models the
residual ``f - g``), exponentially sampled exploration weights, the
fantasy-averaged LCB used for sequential batch filling, and the Monte-Carlo
multipoint q-LCB.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.linalg import solve_triangular
from scipy.spatial.distance import pdist

from .exceptions import BatchRejectedError, ConfigurationError, InvalidArgumentError
from .gp import SQRT5, GaussianProcess, matern25_matrix


@dataclass(frozen=True)
class AcqSpec:
    """Exploration weight plus an optional fixed reference model.

    ``reference`` maps an ``(m, d)`` array to ``m`` values.
    """

    kappa: float = 2.0
    reference: Optional[Callable] = None
    mode: str = "plain"

    def __post_init__(self):
        if not self.kappa >= 0:
            raise InvalidArgumentError("kappa must be nonnegative")
        if self.mode not in ("plain", "with_reference"):
            raise InvalidArgumentError(f"unknown mode {self.mode!r}")
        if self.mode == "with_reference" and self.reference is None:
            raise ConfigurationError("with_reference mode requires a reference model")


@dataclass(frozen=True)
class BatchCandidate:
    points: np.ndarray
    min_pairwise_distance: float

    @classmethod
    def from_points(cls, points):
        points = np.atleast_2d(np.asarray(points, dtype=float))
        dmin = float(pdist(points).min()) if points.shape[0] > 1 else np.inf
        return cls(points, dmin)


def _reference_values(spec: AcqSpec, X):
    if spec.mode == "with_reference":
        return np.asarray(spec.reference(X), dtype=float).reshape(-1)
    return 0.0


def lcb_values(model: GaussianProcess, X, spec: AcqSpec) -> np.ndarray:
    """Vectorized LCB at the rows of ``X``."""
    X = np.atleast_2d(X)
    mu, sd = model.predict(X, return_std=True)
    return _reference_values(spec, X) + mu - spec.kappa * sd


def lcb(model: GaussianProcess, x, spec: AcqSpec) -> float:
    """``mu(x) - kappa * sigma(x)``, offset by ``g(x)`` in reference mode."""
    return float(lcb_values(model, np.atleast_1d(x)[None, :], spec)[0])


def sample_kappas(k_count: int, rate: float = 1.0, rng=None) -> np.ndarray:
    """``k_count`` i.i.d. exploration weights from Exponential(rate)."""
    if k_count < 1:
        raise InvalidArgumentError("k_count must be at least 1")
    if not rate > 0:
        raise InvalidArgumentError("rate must be positive")
    rng = np.random.default_rng(rng)
    return rng.exponential(1.0 / rate, size=int(k_count))


def fantasy_models(model: GaussianProcess, pending, s_count: int, rng, refit=False):
    """GPs conditioned on ``s_count`` joint fantasy draws at ``pending``.

    With ``refit=False`` hyperparameters (and output scaling) stay frozen and
    each fantasy model costs one block Cholesky extension; ``refit=True``
    re-maximizes the likelihood for every fantasy.
    """
    pending = np.atleast_2d(np.asarray(pending, dtype=float))
    if s_count < 1:
        raise InvalidArgumentError("s_count must be at least 1")
    draws = model.sample_joint(pending, rng, n_samples=s_count)
    out = []
    for ys in draws:
        if refit:
            params = model.params_
            m = GaussianProcess(
                length_scale=params.length_scales,
                signal_variance=params.signal_variance,
                noise_variance=params.noise_variance,
                n_restarts=1,
                random_state=model.random_state,
            ).fit(np.vstack([model.X_train_, pending]), np.concatenate([model.y_train_, ys]))
        else:
            m = model.condition(pending, ys)
        out.append(m)
    return out


def mean_lcb_values(models, X, spec: AcqSpec) -> np.ndarray:
    """Arithmetic mean of the LCB over a list of (fantasy) models."""
    X = np.atleast_2d(X)
    total = np.zeros(X.shape[0])
    for m in models:
        total += lcb_values(m, X, spec)
    return total / len(models)


def fantasy_mean_af(model: GaussianProcess, pending, x, s_count: int, spec: AcqSpec,
                    rng=None, refit=False) -> float:
    """Mean LCB at ``x`` over ``s_count`` fantasy-augmented GPs.

    With no pending points this is the plain LCB.
    """
    pending = np.asarray(pending, dtype=float)
    if pending.size == 0:
        return lcb(model, x, spec)
    rng = np.random.default_rng(rng)
    models = fantasy_models(model, pending, s_count, rng, refit=refit)
    return float(mean_lcb_values(models, np.atleast_1d(x)[None, :], spec)[0])


def _aggregate(values, how):
    if how == "max":
        return values.max(axis=-1)
    if how == "min":
        return values.min(axis=-1)
    raise InvalidArgumentError(f"aggregate must be 'max' or 'min', got {how!r}")


def q_lcb(model: GaussianProcess, batch, kappa: float, s_count: int, rng=None,
          aggregate="max", z=None, reference=None) -> float:
    """Monte-Carlo multipoint LCB of a batch of ``q`` points.

    ``z`` may supply the ``(s_count, q)`` standard-normal draws directly
    (common random numbers); otherwise they are drawn from ``rng``.
    """
    batch = np.atleast_2d(np.asarray(batch, dtype=float))
    mu, cov = model.predict(batch, return_cov=True)
    if reference is not None:
        mu = mu + np.asarray(reference(batch), dtype=float).reshape(-1)
    try:
        A = np.linalg.cholesky(cov)
    except np.linalg.LinAlgError as exc:
        raise BatchRejectedError(
            "joint posterior covariance is singular; batch points too close"
        ) from exc
    if z is None:
        rng = np.random.default_rng(rng)
        z = rng.standard_normal((int(s_count), batch.shape[0]))
    vals = mu[None, :] - kappa * np.abs(z @ A.T)
    return float(_aggregate(vals, aggregate).mean())


def joint_posterior(model: GaussianProcess, B):
    """Means ``(m, q)`` and covariances ``(m, q, q)`` for ``m`` batches ``B``."""
    B = np.asarray(B, dtype=float)
    m, q, d = B.shape
    p = model.params_
    flat = B.reshape(m * q, d)
    ls = p.length_scales
    diff = (B[:, :, None, :] - B[:, None, :, :]) / ls
    r = np.sqrt(np.sum(diff * diff, axis=-1))
    Kqq = p.signal_variance * (1.0 + SQRT5 * r + (5.0 / 3.0) * r * r) * np.exp(-SQRT5 * r)
    if model.X_train_.shape[0]:
        Ks = matern25_matrix(model.X_train_, flat, ls, p.signal_variance)
        mean = (Ks.T @ model.alpha_).reshape(m, q)
        v = solve_triangular(model.chol_, Ks, lower=True, check_finite=False)
        v = v.reshape(-1, m, q)
        cov = Kqq - np.einsum("nmi,nmj->mij", v, v)
    else:
        mean = np.zeros((m, q))
        cov = Kqq
    s = model.y_std_
    return model.y_mean_ + s * mean, cov * s * s


def q_lcb_batched(model: GaussianProcess, B, kappa: float, z, aggregate="max",
                  reference=None, min_distance=0.0):
    """q-LCB for ``m`` candidate batches at once, sharing the draws ``z``.

    Batches whose joint covariance is singular or whose points lie closer
    than ``min_distance`` get ``nan`` so the caller can penalize them.
    """
    B = np.asarray(B, dtype=float)
    m, q, _ = B.shape
    mean, cov = joint_posterior(model, B)
    if reference is not None:
        mean = mean + np.asarray(reference(B.reshape(m * q, -1)), dtype=float).reshape(m, q)
    out = np.full(m, np.nan)
    if q > 1 and min_distance > 0:
        iu = np.triu_indices(q, 1)
        dist = np.linalg.norm(B[:, :, None, :] - B[:, None, :, :], axis=-1)[:, iu[0], iu[1]]
        ok = dist.min(axis=1) >= min_distance
    else:
        ok = np.ones(m, dtype=bool)
    idx = np.flatnonzero(ok)
    if idx.size == 0:
        return out
    try:
        A = np.linalg.cholesky(cov[idx])
        good = np.ones(idx.size, dtype=bool)
    except np.linalg.LinAlgError:
        A = np.zeros((idx.size, q, q))
        good = np.zeros(idx.size, dtype=bool)
        for j, i in enumerate(idx):
            try:
                A[j] = np.linalg.cholesky(cov[i])
                good[j] = True
            except np.linalg.LinAlgError:
                pass
    # (m', S, q) = |A z|
    spread = np.abs(np.einsum("mij,sj->msi", A, z))
    vals = mean[idx][:, None, :] - kappa * spread
    agg = _aggregate(vals, aggregate).mean(axis=1)
    out[idx[good]] = agg[good]
    return out
