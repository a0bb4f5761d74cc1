"""The two-reactor plant packaged as an optimization problem."""

from __future__ import annotations

from functools import lru_cache

import numpy as np

from ..afopt import BoxDomain
from ..algorithms import Problem
from ..exceptions import InvalidArgumentError
from .model import T_RANGE, performance
from .params import ReactorParams
from .reference import fit_reference_gp, reference_fit, temperature_domain

SPLITS = ("reactor", "economic")


class ReactorReference:
    """Cheap reference for the plant: polynomial rates plus a GP interpolant.

    ``fit`` holds the log-rate polynomials; ``gp`` interpolates the
    closed-form cost ``g`` over unit-cube coordinates of the temperature box.
    Calling the object evaluates the GP mean at temperatures.
    """

    def __init__(self, params: ReactorParams, samples=25, pairing="mean", resolution=15, seed=0):
        self.domain = temperature_domain()
        temps = np.linspace(T_RANGE[0], T_RANGE[1], samples)
        self.fit = reference_fit(params, temps, pairing)
        self.gp = fit_reference_gp(params, self.fit, resolution, rng=seed)

    def __call__(self, T):
        U = self.domain.to_unit(np.atleast_2d(np.asarray(T, dtype=float)))
        return self.gp.predict(U)


def reactor_problem(params: ReactorParams, split="reactor", reference=None, experiment_cost=1.0,
                    domain: BoxDomain | None = None) -> Problem:
    """Wrap :func:`performance` as a :class:`Problem` over ``(T1, T2)``.

    Parameters
    ----------
    params : ReactorParams
    split : {"reactor", "economic"}
        Which two-way split of the cost feeds the per-subsystem values.
    reference : callable, optional
        Vectorized reference, typically a :class:`ReactorReference`.
    experiment_cost : float or callable
        Simulated seconds per evaluation.
    """
    if split not in SPLITS:
        raise InvalidArgumentError(f"split must be one of {SPLITS}")
    domain = temperature_domain() if domain is None else domain

    @lru_cache(maxsize=4096)
    def solve(t1, t2):
        return performance(params, t1, t2, split=split)

    def objective(x):
        return solve(float(x[0]), float(x[1]))[0]

    def subsystems(x):
        _, f1, f2 = solve(float(x[0]), float(x[1]))
        return np.array([f1, f2])

    return Problem(objective, domain, reference=reference, subsystems=subsystems,
                   experiment_cost=experiment_cost, name="two_cstr")
