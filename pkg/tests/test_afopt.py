import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import grid_argmin
from parbo.afopt import (
    BoxDomain, LevelSetRegion, latin_hypercube, minimize_box, minimize_levelset, minimize_subspace,
)
from parbo.exceptions import EmptyRegionError, InvalidArgumentError, OptimizationError


class Square:
    """Surrogate stand-in whose mean is ``sum(x**2)``."""

    def predict(self, X):
        return np.sum(np.atleast_2d(X) ** 2, axis=1)


def test_domain_validation_and_unit_map():
    with pytest.raises(InvalidArgumentError):
        BoxDomain([1.0], [0.0])
    d = BoxDomain([303, 303], [423, 423])
    np.testing.assert_allclose(d.from_unit(d.to_unit([[350, 400]])), [[350, 400]])


def test_latin_hypercube_stratified():
    P = latin_hypercube(BoxDomain.unit(2), 10, np.random.default_rng(0))
    for j in range(2):
        assert sorted(np.floor(P[:, j] * 10).astype(int)) == list(range(10))


def test_xsinx_matches_grid_oracle():
    d = BoxDomain([0.0], [10.0])
    af = lambda X: X[:, 0] * np.sin(X[:, 0])  # noqa: E731
    x, v = minimize_box(af, d, starts=10, rng=0, vectorized=True)
    xg, vg = grid_argmin(lambda x: x * np.sin(x), 0.0, 10.0, 100_001)
    assert abs(x[0] - xg) < 1e-3
    assert v <= vg + 1e-8


def test_active_bound():
    x, v = minimize_box(lambda x: x[0] + x[1] ** 2, BoxDomain([1.0, -1.0], [2.0, 1.0]), starts=4, rng=0)
    assert x[0] == 1.0
    assert abs(x[1]) < 1e-4


def test_non_finite_everywhere_raises():
    with pytest.raises(OptimizationError):
        minimize_box(lambda X: np.full(len(X), np.nan), BoxDomain.unit(1), 3, 0, vectorized=True)


def test_box_determinism():
    af = lambda X: np.sin(5 * X[:, 0]) * np.cos(3 * X[:, 1])  # noqa: E731
    a = minimize_box(af, BoxDomain.unit(2), 8, 42, vectorized=True)
    b = minimize_box(af, BoxDomain.unit(2), 8, 42, vectorized=True)
    np.testing.assert_array_equal(a[0], b[0])


def test_subspace_rosenbrock_slice():
    def rosen(X):
        return 100 * (X[:, 1] - X[:, 0] ** 2) ** 2 + (1 - X[:, 0]) ** 2

    d = BoxDomain([-2.0, -2.0], [2.0, 2.0])
    z, v = minimize_subspace(rosen, d, free=[1], fixed_values=[0.5], starts=5, rng=0, vectorized=True)
    assert z[0] == pytest.approx(0.25, abs=1e-5)
    assert v == pytest.approx(0.25, abs=1e-8)
    with pytest.raises(InvalidArgumentError):
        minimize_subspace(rosen, d, free=[1], fixed_values=[5.0], vectorized=True)
    with pytest.raises(InvalidArgumentError):
        minimize_subspace(rosen, d, free=[], fixed_values=[0.0, 0.0], vectorized=True)


def test_levelset_matches_grid_oracle():
    d = BoxDomain([-1.0], [1.0])
    region = LevelSetRegion(Square(), 0.25, 1.0)
    af = lambda X: (X[:, 0] - 0.1) ** 2  # noqa: E731
    x, v = minimize_levelset(af, d, region, starts=6, rng=0, vectorized=True)
    G = np.linspace(-1, 1, 200_001)[:, None]
    ok = region.feasible(G)
    vg = af(G[ok]).min()
    assert region.feasible(x[None, :])[0]
    assert abs(x[0] - 0.5) < 1e-4
    assert v <= vg + 1e-6


def test_levelset_empty_band():
    region = LevelSetRegion(Square(), 5.0, 6.0)
    with pytest.raises(EmptyRegionError):
        minimize_levelset(lambda X: X[:, 0], BoxDomain.unit(2), region, rng=0, vectorized=True)


@settings(max_examples=15)
@given(st.floats(0.05, 0.6), st.floats(0.05, 0.6), st.integers(0, 1000))
def test_levelset_result_always_feasible(lo, width, seed):
    region = LevelSetRegion(Square(), lo, lo + width)
    af = lambda X: np.sin(7 * X[:, 0]) + X[:, 1]  # noqa: E731
    x, _ = minimize_levelset(af, BoxDomain([-1.0, -1.0], [1.0, 1.0]), region, starts=4, rng=seed,
                             vectorized=True)
    assert region.feasible(x[None, :])[0]
