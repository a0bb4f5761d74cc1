"""Cheap reference model: polynomial log-rates and closed-form balances.

Each net rate of each reactor is approximated by
``log r = theta_0 + theta_1 s + theta_2 s**2 + theta_3 s**3`` with
``s = 1000 / T``.  With rates fixed by temperature the steady-state balances
become explicit, ``C = C_in + (V / F) S r``, so no nonlinear solve is needed.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass

import numpy as np

from ..afopt import BoxDomain, latin_hypercube
from ..exceptions import InvalidArgumentError, OptimizationError
from ..gp import GaussianProcess
from .model import T_RANGE, _mix, downstream, economics, plant_state
from .params import N_REACTIONS, STOICHIOMETRY, ReactorParams

log = logging.getLogger(__name__)

DEGREE = 3
MIN_SAMPLES = 8
PAIRINGS = ("mean", "diagonal")


def _basis(T):
    s = 1000.0 / np.asarray(T, dtype=float)
    return np.stack([s**p for p in range(DEGREE + 1)], axis=-1)


@dataclass(frozen=True)
class ReferenceFit:
    """Fitted log-rate polynomials.

    Attributes
    ----------
    theta : ndarray, shape (2, 4, 4)
        ``theta[reactor, reaction]`` holds the coefficients of
        ``1, s, s**2, s**3`` with ``s = 1000 / T``.  A row of ``-inf`` marks a
        reaction whose rate is identically zero.
    r_squared : ndarray, shape (2, 4)
        Coefficient of determination of each fit on the log scale.
    """

    theta: np.ndarray
    r_squared: np.ndarray

    def log_rates(self, reactor: int, T) -> np.ndarray:
        """``(n, 4)`` fitted log-rates of one reactor."""
        B = _basis(np.atleast_1d(T))
        th = self.theta[reactor]
        out = B @ np.where(np.isfinite(th), th, 0.0).T
        return np.where(np.all(np.isfinite(th), axis=1)[None, :], out, -np.inf)

    def rates(self, reactor: int, T) -> np.ndarray:
        return np.exp(self.log_rates(reactor, T))

    @classmethod
    def zero(cls) -> "ReferenceFit":
        """Sentinel fit with every rate identically zero."""
        return cls(np.full((2, N_REACTIONS, DEGREE + 1), -np.inf), np.ones((2, N_REACTIONS)))


def fit_log_cubic(T, rates):
    """Least-squares cubic in ``1000 / T`` for ``log rates``.

    Nonpositive samples are dropped with a warning.  Returns
    ``(theta, r_squared)``.
    """
    T = np.asarray(T, dtype=float)
    rates = np.asarray(rates, dtype=float)
    keep = rates > 0
    if not keep.all():
        warnings.warn(f"dropped {int((~keep).sum())} nonpositive rate sample(s)", RuntimeWarning, stacklevel=2)
    if keep.sum() < DEGREE + 1:
        raise OptimizationError("too few positive rate samples for a cubic fit")
    B = _basis(T[keep])
    y = np.log(rates[keep])
    theta, *_ = np.linalg.lstsq(B, y, rcond=None)
    resid = y - B @ theta
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(resid @ resid) / ss_tot if ss_tot > 0 else 1.0
    return theta, r2


def reference_fit(params: ReactorParams, temperatures, pairing: str = "mean") -> ReferenceFit:
    """Fit polynomial log-rates to rates from exactly solved states.

    Parameters
    ----------
    params : ReactorParams
    temperatures : array-like
        At least eight distinct temperatures.  Reactor 1 is sampled at each.
    pairing : {"mean", "diagonal"}
        How reactor-2 rates are tied to a single temperature.  ``"mean"``
        solves every ``(T1, T2)`` pair and averages reactor-2 rates over
        ``T1``; ``"diagonal"`` uses states with ``T1 = T2``.

    Notes
    -----
    Rates are the net rates of the solved states.  Reverse terms are small
    in most of the box, but near full conversion of P the reverse of
    ``P <-> 2U`` nearly cancels the forward rate, and a forward-only fit
    would create U out of nothing in the closed-form balances.
    """
    T = np.unique(np.asarray(temperatures, dtype=float))
    if T.size < MIN_SAMPLES:
        raise InvalidArgumentError(f"need at least {MIN_SAMPLES} distinct temperatures, got {T.size}")
    if pairing not in PAIRINGS:
        raise InvalidArgumentError(f"pairing must be one of {PAIRINGS}")
    n = T.size
    if pairing == "diagonal":
        st = plant_state(params, T, T)
        r1, r2 = st.rates1, st.rates2
    else:
        T1, T2 = (a.ravel() for a in np.meshgrid(T, T, indexing="ij"))
        st = plant_state(params, T1, T2)
        # reactor 1 does not depend on T2
        r1 = st.rates1[::n]
        r2 = st.rates2.reshape(n, n, N_REACTIONS).mean(axis=0)
    theta = np.empty((2, N_REACTIONS, DEGREE + 1))
    r2s = np.empty((2, N_REACTIONS))
    for reactor, rates in enumerate((r1, r2)):
        for j in range(N_REACTIONS):
            if np.all(rates[:, j] == 0):
                theta[reactor, j], r2s[reactor, j] = -np.inf, 1.0
                continue
            theta[reactor, j], r2s[reactor, j] = fit_log_cubic(T, rates[:, j])
    return ReferenceFit(theta, r2s)


def _closed_form(C_in, tau, rates):
    C = C_in + tau * rates @ STOICHIOMETRY.T
    neg = C < 0
    if neg.any():
        warnings.warn(f"clamped {int(neg.sum())} negative reference concentration(s) to 0",
                      RuntimeWarning, stacklevel=3)
        C = np.maximum(C, 0.0)
    return C


def reference_performance(params: ReactorParams, fit: ReferenceFit, T1, T2, split="economic"):
    """Reference annual cost ``g`` (and its split) at the operating temperatures.

    Same flash and cost chain as :func:`performance`, with concentrations
    from the explicit balances.  Returns ``(g, g1, g2)``.
    """
    scalar = np.ndim(T1) == 0 and np.ndim(T2) == 0
    T1, T2 = (np.ravel(a).astype(float) for a in np.broadcast_arrays(np.atleast_1d(T1), np.atleast_1d(T2)))
    r1 = fit.rates(0, T1)
    C1 = _closed_form(np.broadcast_to(params.feed_concentration, (T1.size, 6)),
                      params.volume[0] / params.feed_flow, r1)
    F2, C_in2, _ = _mix(params, C1, T1)
    r2 = fit.rates(1, T2)
    C2 = _closed_form(C_in2, params.volume[1] / F2, r2)
    m1, m2, fl1, fl2 = downstream(params, T1, T2, C1, C2, r1, r2)
    prod, util, share = economics(params, T1, C1, m1, m2, fl1, fl2)
    g = prod + util
    if split == "economic":
        g1, g2 = prod, util
    elif split == "reactor":
        g1, g2 = share, g - share
    else:
        raise InvalidArgumentError(f"unknown split {split!r}")
    if scalar:
        return float(g[0]), float(g1[0]), float(g2[0])
    return g, g1, g2


def temperature_domain() -> BoxDomain:
    return BoxDomain(np.full(2, T_RANGE[0]), np.full(2, T_RANGE[1]))


def fit_reference_gp(params: ReactorParams, fit: ReferenceFit, resolution: int = 15,
                     rng=None, n_restarts: int = 5) -> GaussianProcess:
    """GP interpolant of ``g`` on a full factorial grid.

    The GP takes unit-cube coordinates of the temperature box, the same
    coordinates the optimization drivers work in.
    """
    if resolution < 5:
        raise InvalidArgumentError("grid resolution must be at least 5 per dimension")
    u = np.linspace(0.0, 1.0, resolution)
    U = np.stack([a.ravel() for a in np.meshgrid(u, u, indexing="ij")], axis=1)
    dom = temperature_domain()
    T = dom.from_unit(U)
    g, _, _ = reference_performance(params, fit, T[:, 0], T[:, 1])
    return GaussianProcess(length_scale=0.3, n_restarts=n_restarts, random_state=rng).fit(U, g)


def holdout_rms(params: ReactorParams, fit: ReferenceFit, gp: GaussianProcess, n: int = 500, rng=None):
    """RMS error of the GP mean against ``g`` at random points, and ``g``'s range."""
    dom = temperature_domain()
    U = latin_hypercube(BoxDomain.unit(2), n, np.random.default_rng(rng))
    T = dom.from_unit(U)
    g, _, _ = reference_performance(params, fit, T[:, 0], T[:, 1])
    err = gp.predict(U) - g
    return float(np.sqrt(np.mean(err**2))), float(np.ptp(g))
