import csv
import json
import warnings
from pathlib import Path

import numpy as np
import pytest

from oracles import cstr_time_stepping
from parbo.exceptions import ConfigurationError, InvalidArgumentError
from parbo.reactor import (
    STOICHIOMETRY, grid_minima, performance, performance_grid, plant_state, reactor_problem, solve_cstr,
)
from parbo.reactor.model import arrhenius, flash, rate_constants, reaction_rates, scaled_residual

GOLDEN = Path(__file__).parent / "golden"


@pytest.fixture(scope="module")
def grid_rows():
    with open(GOLDEN / "grid13.csv") as fh:
        return np.array([[float(v) for v in row] for row in list(csv.reader(fh))[1:]])


def test_arrhenius_one_over_e():
    # EA = R T gives k0 / e
    assert arrhenius(5.0, 8.314 * 350.0, 350.0) == pytest.approx(5.0 / np.e, rel=1e-15)
    with pytest.raises(InvalidArgumentError):
        arrhenius(1.0, 1.0, 0.0)


def test_irreversible_fourth_reaction(default_params):
    _, kr = rate_constants(default_params, [350.0])
    assert kr[0, 3] == 0.0


def test_zero_kinetics_passes_feed_through(default_params):
    p = default_params.replace(k0=np.zeros(4))
    C, res = solve_cstr(p, 0, p.feed_concentration[None, :], np.array([350.0]))
    np.testing.assert_allclose(C[0], p.feed_concentration, atol=1e-14)
    assert res[0] <= 1e-12


def test_stoichiometry_shape():
    assert STOICHIOMETRY.shape == (6, 4)


def test_flash_hand_example(default_params):
    # component A has K = 2, component P has K = 1, vapor fraction z_E = 1/2
    vol = np.ones(6)
    vol[0] = 2.0
    p = default_params.replace(relative_volatility=vol, k_p=1.0)
    z = np.array([[0.5, 0.5, 0.0, 0.0, 0.5, 0.0]])
    fl = flash(p, z, 2.0, "recover_E")
    np.testing.assert_allclose(fl.liquid_composition[0, :2], [1 / 3, 1 / 2], rtol=1e-15)
    np.testing.assert_allclose(fl.vapor_composition[0, :2], [2 / 3, 1 / 2], rtol=1e-15)
    assert fl.vapor_flow[0] == 1.0 and fl.liquid_flow[0] == 1.0
    with pytest.raises(InvalidArgumentError):
        flash(p, z, 2.0, "other")


def test_zero_prices_give_zero_cost(default_params):
    p = default_params.replace(price=np.zeros(6), coolant_price=0.0, steam_price=0.0,
                               transfer_price=np.zeros(6))
    f, f1, f2 = performance(p, 350.0, 360.0, split="reactor")
    assert f == 0.0 and f1 == 0.0 and f2 == 0.0


def test_state_matches_stiff_integration_oracle(default_params):
    g = json.loads((GOLDEN / "state_333_322.json").read_text())
    st = plant_state(default_params, g["T1"], g["T2"])
    np.testing.assert_allclose(st.C1[0], g["C1"], rtol=1e-10, atol=1e-14)
    np.testing.assert_allclose(st.C2[0], g["C2"], rtol=1e-10, atol=1e-14)


@pytest.mark.parametrize("T", [303.0, 380.0, 423.0])
def test_reactor_one_matches_oracle_across_range(default_params, T):
    p = default_params
    k, kr = rate_constants(p, [T])
    C_ref, _ = cstr_time_stepping(p.feed_concentration, p.volume[0] / p.feed_flow, k[0], kr[0],
                                  STOICHIOMETRY, reaction_rates)
    C, _ = solve_cstr(p, 0, p.feed_concentration[None, :], np.array([T]))
    np.testing.assert_allclose(C[0], C_ref, rtol=1e-9, atol=1e-13)


def test_residuals_small_on_grid(default_params):
    T = np.linspace(303, 423, 13)
    A, B = (m.ravel() for m in np.meshgrid(T, T, indexing="ij"))
    st = plant_state(default_params, A, B)
    assert st.residual1.max() < 1e-10 and st.residual2.max() < 1e-10
    assert np.all(st.C1 >= 0) and np.all(st.C2 >= 0)
    k, kr = rate_constants(default_params, B)
    F2 = default_params.feed_flow + default_params.side_flow
    C_in2 = (default_params.feed_flow * st.C1 + default_params.side_flow * default_params.side_concentration) / F2
    res = scaled_residual(st.C2, C_in2, F2, default_params.volume[1], k, kr)
    assert res.max() < 1e-10


def test_golden_grid_regression(default_params, grid_rows):
    A, B = grid_rows[:, 0], grid_rows[:, 1]
    f, f1, f2 = performance(default_params, A, B, split="reactor")
    np.testing.assert_allclose(f, grid_rows[:, 2], rtol=1e-9, atol=1e-6)
    np.testing.assert_allclose(f1, grid_rows[:, 3], rtol=1e-9, atol=1e-6)
    np.testing.assert_allclose(f2, grid_rows[:, 4], rtol=1e-9, atol=1e-6)


@pytest.mark.parametrize("split", ["reactor", "economic"])
def test_split_sums_to_total(default_params, split, rng):
    T = rng.uniform(303, 423, (20, 2))
    f, f1, f2 = performance(default_params, T[:, 0], T[:, 1], split=split)
    np.testing.assert_allclose(f1 + f2, f, rtol=1e-12, atol=1e-6)


def test_reactor_one_share_ignores_second_temperature(default_params):
    _, a, _ = performance(default_params, 340.0, 310.0, split="reactor")
    _, b, _ = performance(default_params, 340.0, 410.0, split="reactor")
    assert a == b


def test_landscape_minima(default_rc, default_params):
    T, F, _, _ = performance_grid(default_params, n=121, split="reactor")
    mins = grid_minima(F)
    gm = default_rc.golden["global_minimum"]
    i, j, v = mins[0]
    assert (T[i], T[j]) == (gm["T1"], gm["T2"])
    assert v == pytest.approx(gm["f"], rel=1e-12)
    found = {(T[i], T[j]) for i, j, _ in mins}
    for lm in default_rc.golden["local_minima"]:
        assert (lm["T1"], lm["T2"]) in found


def test_problem_wrapper(default_params):
    prob = reactor_problem(default_params, split="reactor", experiment_cost=12.5)
    f, parts = prob.evaluate(np.array([333.0, 322.0]), with_parts=True)
    assert parts.sum() == pytest.approx(f, rel=1e-12)
    assert prob.cost(np.zeros(2)) == 12.5
    with pytest.raises(InvalidArgumentError):
        reactor_problem(default_params, split="bad")


def test_params_validation(default_params):
    with pytest.raises(ConfigurationError):
        default_params.replace(feed_flow=0.0)
    with pytest.raises(ConfigurationError):
        default_params.replace(coolant_out=100.0)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        assert type(default_params).from_dict(default_params.to_dict()).to_dict() == default_params.to_dict()
