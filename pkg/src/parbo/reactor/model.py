"""Steady-state model of two CSTRs in series followed by two flash drums.

All routines are vectorized over operating points: temperatures may be
scalars or 1-D arrays, concentrations are ``(n, 6)`` arrays in the species
order A, P, U, B, E, D.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..exceptions import InvalidArgumentError, PhysicalInfeasibilityError, SolverError
from .params import GAS_CONSTANT, N_SPECIES, STOICHIOMETRY, ReactorParams

RESIDUAL_TOL = 1e-12
ACCEPT_TOL = 1e-10
NEWTON_MAXITER = 200
FIXED_POINT_MAXITER = 200_000
BISECTION_ITERS = 80
T_RANGE = (303.0, 423.0)


def arrhenius(k0, activation_energy, T):
    """``k0 * exp(-EA / (R T))``."""
    T = np.asarray(T, dtype=float)
    if np.any(T <= 0):
        raise InvalidArgumentError("temperature must be positive")
    return np.asarray(k0, dtype=float) * np.exp(-np.asarray(activation_energy, dtype=float) / (GAS_CONSTANT * T))


def rate_constants(params: ReactorParams, T):
    """Forward constants ``(n, 4)`` and reverse constants ``(n, 4)`` at ``T``."""
    T = np.atleast_1d(np.asarray(T, dtype=float))
    k = arrhenius(params.k0[None, :], params.activation_energy[None, :], T[:, None])
    kr = params.reverse_factor * k
    kr[:, 3] = 0.0  # U + D -> 2A is irreversible
    return k, kr


def reaction_rates(C, k, kr):
    """Elementary rates ``(n, 4)`` of the four reactions."""
    A, P, U, B, E, D = (C[:, i] for i in range(N_SPECIES))
    return np.stack(
        [
            k[:, 0] * A * A - kr[:, 0] * P,
            k[:, 1] * P - kr[:, 1] * U * U,
            k[:, 2] * U * B - kr[:, 2] * E,
            k[:, 3] * U * D,
        ],
        axis=1,
    )


def _rate_jacobian(C, k, kr):
    n = C.shape[0]
    A, P, U, B, E, D = (C[:, i] for i in range(N_SPECIES))
    J = np.zeros((n, 4, N_SPECIES))
    J[:, 0, 0] = 2 * k[:, 0] * A
    J[:, 0, 1] = -kr[:, 0]
    J[:, 1, 1] = k[:, 1]
    J[:, 1, 2] = -2 * kr[:, 1] * U
    J[:, 2, 2] = k[:, 2] * B
    J[:, 2, 3] = k[:, 2] * U
    J[:, 2, 4] = -kr[:, 2]
    J[:, 3, 2] = k[:, 3] * D
    J[:, 3, 5] = k[:, 3] * U
    return J


def balance_residual(C, C_in, flow, volume, k, kr):
    """``F (C_in - C) + V * S r(C)`` for each operating point."""
    r = reaction_rates(C, k, kr)
    return flow * (C_in - C) + volume * r @ STOICHIOMETRY.T


def scaled_residual(C, C_in, flow, volume, k, kr):
    """Residual infinity-norm per point, scaled by the inlet molar throughput."""
    R = balance_residual(C, C_in, flow, volume, k, kr)
    scale = flow * np.maximum(C_in.sum(axis=1), 1e-12)
    return np.abs(R).max(axis=1) / scale


def _newton(C0, C_in, flow, volume, k, kr, scale):
    """Pseudo-transient continuation: ``(sigma I - J) dC = R``.

    ``sigma`` starts at a multiple of the inverse residence time and shrinks
    with the residual (switched evolution relaxation), so the iteration turns
    into plain Newton near the root.  Steps that leave the nonnegative orthant
    or raise the residual are rejected and ``sigma`` is increased.
    """
    C = C0.copy()
    eye = np.eye(N_SPECIES)
    n = C.shape[0]
    sigma = np.full(n, 10.0 * flow)
    R = balance_residual(C, C_in, flow, volume, k, kr)
    norm = np.abs(R).max(axis=1) / scale
    for _ in range(NEWTON_MAXITER):
        active = norm > RESIDUAL_TOL
        if not active.any():
            break
        idx = np.flatnonzero(active)
        J = -flow * eye + volume * np.einsum("sr,nrc->nsc", STOICHIOMETRY, _rate_jacobian(C[idx], k[idx], kr[idx]))
        M = sigma[idx, None, None] * eye - J
        step = np.linalg.solve(M, R[idx][:, :, None])[:, :, 0]
        trial = C[idx] + step
        tR = balance_residual(trial, C_in[idx], flow, volume, k[idx], kr[idx])
        tnorm = np.abs(tR).max(axis=1) / scale[idx]
        ok = np.all(trial >= 0, axis=1) & (tnorm < norm[idx])
        acc = idx[ok]
        ratio = tnorm[ok] / norm[acc]
        C[acc], R[acc], norm[acc] = trial[ok], tR[ok], tnorm[ok]
        sigma[acc] *= np.minimum(ratio, 0.5)
        rej = idx[~ok]
        sigma[rej] = np.maximum(4.0 * sigma[rej], 1e-3 * flow)
    return C, norm


def _fixed_point(C0, C_in, flow, volume, k, kr, scale, damping=0.5, maxiter=FIXED_POINT_MAXITER):
    """Production/consumption splitting iteration, damped."""
    C = C0.copy()
    for _ in range(maxiter):
        A, P, U, B, E, D = (C[:, i] for i in range(N_SPECIES))
        prod = np.stack(
            [
                2 * kr[:, 0] * P + 2 * k[:, 3] * U * D,
                k[:, 0] * A * A + kr[:, 1] * U * U,
                2 * k[:, 1] * P + kr[:, 2] * E,
                kr[:, 2] * E,
                k[:, 2] * U * B,
                np.zeros_like(A),
            ],
            axis=1,
        )
        loss = np.stack(
            [
                2 * k[:, 0] * A,
                kr[:, 0] + k[:, 1],
                2 * kr[:, 1] * U + k[:, 2] * B + k[:, 3] * D,
                k[:, 2] * U,
                kr[:, 2],
                k[:, 3] * U,
            ],
            axis=1,
        )
        new = (flow * C_in + volume * prod) / (flow + volume * loss)
        C = (1 - damping) * C + damping * new
        norm = np.abs(balance_residual(C, C_in, flow, volume, k, kr)).max(axis=1) / scale
        if np.all(norm <= RESIDUAL_TOL):
            break
    return C, norm


def _state_given_u(U, C_in, tau, k, kr):
    """All concentrations implied by a trial ``U``.

    Given ``U`` the D, B/E and P balances are linear and the A balance is a
    quadratic with one nonnegative root, so the six balances collapse onto
    the single U balance returned as the second output.
    """
    A_in, P_in, U_in, B_in, E_in, D_in = (C_in[:, i] for i in range(N_SPECIES))
    k1, k2, k3, k4 = (k[:, j] for j in range(4))
    kr1, kr2, kr3 = kr[:, 0], kr[:, 1], kr[:, 2]
    D = D_in / (1.0 + tau * k4 * U)
    s = B_in + E_in
    B = (B_in + tau * kr3 * s) / (1.0 + tau * k3 * U + tau * kr3)
    E = s - B
    r4 = k4 * U * D
    den = 1.0 + tau * (kr1 + k2)
    p1 = tau * k1 / den
    p0 = (P_in + tau * kr2 * U * U) / den
    a2 = 2.0 * tau * (k1 - kr1 * p1)
    c = A_in + 2.0 * tau * (kr1 * p0 + r4)
    A = 2.0 * c / (1.0 + np.sqrt(1.0 + 4.0 * a2 * c))
    P = p0 + p1 * A * A
    h = U_in - U + tau * (2.0 * (k2 * P - kr2 * U * U) - (k3 * U * B - kr3 * E) - r4)
    return np.stack([A, P, U, B, E, D], axis=1), h


def _reduced_solve(C_in, tau, k, kr, iters=BISECTION_ITERS):
    """Bisection on the U balance; ``h(0) >= 0`` always holds."""
    lo = np.zeros(C_in.shape[0])
    # U-equivalents A + 2P + U + E grow by one per D consumed
    hi = C_in[:, 0] + 2.0 * C_in[:, 1] + C_in[:, 2] + C_in[:, 4] + C_in[:, 5]
    hi = np.maximum(hi, 1e-300)
    for _ in range(60):
        _, h_hi = _state_given_u(hi, C_in, tau, k, kr)
        grow = h_hi > 0
        if not grow.any():
            break
        hi = np.where(grow, 2.0 * hi, hi)
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        _, h = _state_given_u(mid, C_in, tau, k, kr)
        pos = h > 0
        lo = np.where(pos, mid, lo)
        hi = np.where(pos, hi, mid)
    C, _ = _state_given_u(0.5 * (lo + hi), C_in, tau, k, kr)
    return C


def _polish(C, C_in, flow, volume, k, kr, scale, steps=3):
    """A few full Newton steps, each kept only if it lowers the residual."""
    eye = np.eye(N_SPECIES)
    R = balance_residual(C, C_in, flow, volume, k, kr)
    norm = np.abs(R).max(axis=1) / scale
    for _ in range(steps):
        J = -flow * eye + volume * np.einsum("sr,nrc->nsc", STOICHIOMETRY, _rate_jacobian(C, k, kr))
        try:
            step = np.linalg.solve(J, -R[:, :, None])[:, :, 0]
        except np.linalg.LinAlgError:
            break
        trial = C + step
        tR = balance_residual(trial, C_in, flow, volume, k, kr)
        tnorm = np.abs(tR).max(axis=1) / scale
        ok = np.all(trial >= 0, axis=1) & (tnorm < norm)
        C = np.where(ok[:, None], trial, C)
        R = np.where(ok[:, None], tR, R)
        norm = np.where(ok, tnorm, norm)
    return C, norm


def solve_cstr(params: ReactorParams, reactor: int, C_in, T, flow=None, check=True):
    """Steady-state outlet concentrations of reactor ``reactor`` (0 or 1).

    The balances are reduced to a bracketed scalar equation in ``U`` and the
    result is polished by Newton steps on the full system; points that still
    miss the tolerance go through pseudo-transient continuation and, last,
    the damped fixed-point iteration.  Returns ``(C_out, residual)`` with
    ``residual`` the scaled infinity-norm per point.
    """
    T = np.atleast_1d(np.asarray(T, dtype=float))
    C_in = np.atleast_2d(np.asarray(C_in, dtype=float))
    if C_in.shape[0] == 1 and T.size > 1:
        C_in = np.repeat(C_in, T.size, axis=0)
    if np.any(C_in < 0):
        raise InvalidArgumentError("inlet concentrations must be nonnegative")
    flow = params.feed_flow if flow is None else flow
    volume = params.volume[reactor]
    k, kr = rate_constants(params, T)
    scale = flow * np.maximum(C_in.sum(axis=1), 1e-12)
    C = _reduced_solve(C_in, volume / flow, k, kr)
    C, res = _polish(C, C_in, flow, volume, k, kr, scale)
    bad = ~(res <= ACCEPT_TOL)
    if bad.any():
        Cn, rn = _newton(C[bad], C_in[bad], flow, volume, k[bad], kr[bad], scale[bad])
        C[bad], res[bad] = Cn, rn
        bad = ~(res <= ACCEPT_TOL)
    if bad.any():
        Cf, rf = _fixed_point(C[bad], C_in[bad], flow, volume, k[bad], kr[bad], scale[bad])
        C[bad], res[bad] = Cf, rf
    if check:
        if np.any(~(res <= ACCEPT_TOL)):
            worst = float(np.nanmax(res))
            raise SolverError(f"steady-state solve failed, scaled residual {worst:.3e}", residual=worst)
        if np.any(C < 0):
            raise PhysicalInfeasibilityError("negative concentration at steady state")
    return C, res


def heat_duty(params: ReactorParams, reactor: int, rates):
    """Heat released by reaction, ``-V * sum_j r_j dH_j`` (W)."""
    return -params.volume[reactor] * rates @ params.heat_of_reaction


def coolant_flow(params: ReactorParams, flow, T_in, T, Q):
    """Coolant mass flow holding the reactor at ``T`` (kg/s)."""
    sensible = params.density * params.heat_capacity * flow * (T_in - T)
    return (sensible + Q) / (params.coolant_heat_capacity * (params.coolant_out - params.coolant_in))


@dataclass
class FlashResult:
    vapor_flow: np.ndarray
    vapor_composition: np.ndarray
    liquid_flow: np.ndarray
    liquid_composition: np.ndarray
    steam: np.ndarray
    vapor_fraction: np.ndarray


def flash(params: ReactorParams, z, feed_flow, which: str) -> FlashResult:
    """Single-stage split with the vapor fraction set by the recovered product.

    ``which='recover_E'`` sets the vapor fraction to ``z_E``;
    ``which='recover_P'`` sets it to ``1 - z_P``.  Compositions are not
    renormalized.
    """
    z = np.atleast_2d(np.asarray(z, dtype=float))
    feed_flow = np.atleast_1d(np.asarray(feed_flow, dtype=float))
    if which == "recover_E":
        frac = z[:, 4]
    elif which == "recover_P":
        frac = 1.0 - z[:, 1]
    else:
        raise InvalidArgumentError(f"unknown flash mode {which!r}")
    K = params.k_p * params.relative_volatility
    denom = frac[:, None] * (K[None, :] - 1.0) + 1.0
    if np.any(denom <= 0):
        raise InvalidArgumentError("invalid volatility: flash denominator is nonpositive")
    x = z / denom
    y = K[None, :] * x
    v = frac * feed_flow
    q_vap = (params.latent_heat[None, :] * y).sum(axis=1) * v
    return FlashResult(v, y, (1.0 - frac) * feed_flow, x, q_vap / params.steam_latent_heat, frac)


@dataclass
class PlantState:
    """Everything computed along the flowsheet for a set of operating points."""

    T1: np.ndarray
    T2: np.ndarray
    C1: np.ndarray
    C2: np.ndarray
    rates1: np.ndarray
    rates2: np.ndarray
    coolant1: np.ndarray
    coolant2: np.ndarray
    flash1: FlashResult
    flash2: FlashResult
    residual1: np.ndarray
    residual2: np.ndarray


def _mix(params: ReactorParams, C1, T1):
    F1, Fs = params.feed_flow, params.side_flow
    F2 = F1 + Fs
    C_in2 = (F1 * C1 + Fs * params.side_concentration[None, :]) / F2
    # the mixed stream is conditioned to reactor 2's inlet temperature
    return F2, C_in2, np.full(np.shape(T1), params.inlet_temperature[1])


def downstream(params: ReactorParams, T1, T2, C1, C2, rates1, rates2):
    """Coolant duties and both flashes given reactor outlet states."""
    F1 = params.feed_flow
    F2, _, T_in2 = _mix(params, C1, T1)
    m1 = coolant_flow(params, F1, params.inlet_temperature[0], T1, heat_duty(params, 0, rates1))
    m2 = coolant_flow(params, F2, T_in2, T2, heat_duty(params, 1, rates2))
    total = C2.sum(axis=1)
    z = C2 / np.where(total > 0, total, 1.0)[:, None]
    fl1 = flash(params, z, F2 * total, "recover_E")
    fl2 = flash(params, fl1.liquid_composition, fl1.liquid_flow, "recover_P")
    return m1, m2, fl1, fl2


def plant_state(params: ReactorParams, T1, T2, check=True) -> PlantState:
    T1 = np.atleast_1d(np.asarray(T1, dtype=float))
    T2 = np.atleast_1d(np.asarray(T2, dtype=float))
    T1, T2 = np.broadcast_arrays(T1, T2)
    T1, T2 = T1.ravel().copy(), T2.ravel().copy()
    C1, res1 = solve_cstr(params, 0, params.feed_concentration[None, :], T1, check=check)
    F2, C_in2, _ = _mix(params, C1, T1)
    C2, res2 = solve_cstr(params, 1, C_in2, T2, flow=F2, check=check)
    k1, kr1 = rate_constants(params, T1)
    k2, kr2 = rate_constants(params, T2)
    r1 = reaction_rates(C1, k1, kr1)
    r2 = reaction_rates(C2, k2, kr2)
    m1, m2, fl1, fl2 = downstream(params, T1, T2, C1, C2, r1, r2)
    return PlantState(T1, T2, C1, C2, r1, r2, m1, m2, fl1, fl2, res1, res2)


def economics(params: ReactorParams, T1, C1, coolant1, coolant2, fl1, fl2):
    """Cost terms in USD/yr: ``(product_and_reagents, utilities, reactor1_share)``.

    ``reactor1_share`` is the part attributable to the first reactor: feed
    reagents, its coolant, and a transfer credit for its effluent at
    ``params.transfer_price``.
    """
    w = params.price
    reagent_mask = np.array([1, 0, 0, 1, 0, 1], dtype=float)  # A, B, D are purchased
    reagents = (
        params.feed_flow * (w * reagent_mask * params.feed_concentration).sum()
        + params.side_flow * (w * reagent_mask * params.side_concentration).sum()
    )
    products = (w[None, :] * fl1.vapor_composition).sum(axis=1) * fl1.vapor_flow + (
        w[None, :] * fl2.liquid_composition
    ).sum(axis=1) * fl2.liquid_flow
    product_cost = products + reagents
    utilities = params.coolant_price * (coolant1 + coolant2) + params.steam_price * (fl1.steam + fl2.steam)
    feed1_cost = params.feed_flow * (w * reagent_mask * params.feed_concentration).sum()
    transfer = params.feed_flow * (C1 * params.transfer_price[None, :]).sum(axis=1)
    reactor1 = feed1_cost + params.coolant_price * coolant1 - transfer
    s = params.seconds_per_year
    return product_cost * s, utilities * s, reactor1 * s


def performance(params: ReactorParams, T1, T2, split: str = "economic", check=True):
    """Annual cost ``(f, f1, f2)`` at the operating temperatures.

    ``split='economic'`` gives product/reagent terms and utility terms;
    ``split='reactor'`` gives the first-reactor share and the remainder.
    Scalar inputs return floats.
    """
    scalar = np.ndim(T1) == 0 and np.ndim(T2) == 0
    st = plant_state(params, T1, T2, check=check)
    prod, util, r1 = economics(params, st.T1, st.C1, st.coolant1, st.coolant2, st.flash1, st.flash2)
    f = prod + util
    if split == "economic":
        f1, f2 = prod, util
    elif split == "reactor":
        f1, f2 = r1, f - r1
    else:
        raise InvalidArgumentError(f"unknown split {split!r}")
    if scalar:
        return float(f[0]), float(f1[0]), float(f2[0])
    return f, f1, f2
