import numpy as np
import pytest
from sklearn.base import clone

from parbo.afopt import BoxDomain
from parbo.algorithms import (
    ALGORITHMS, AlgoConfig, ParallelBayesOpt, Problem, _separate, initial_design, keyed_rng, run,
)
from parbo.exceptions import ConfigurationError, OptimizationError
from parbo.partition import PartitionScheme, levelset_custom

FAST = dict(gp_restarts=1, af_starts=4, seed=3)


def quad(x):
    return float((x[0] - 0.3) ** 2 + (x[1] + 0.2) ** 2)


def parts(x):
    return np.array([(x[0] - 0.3) ** 2, (x[1] + 0.2) ** 2])


@pytest.fixture(scope="module")
def problem():
    return Problem(quad, BoxDomain([-1.0, -1.0], [1.0, 1.0]), subsystems=parts,
                   reference=lambda X: np.zeros(len(np.atleast_2d(X))), experiment_cost=2.0)


def _cfg(algo, **kw):
    return AlgoConfig(algo, **{**FAST, "iterations": 3, **kw})


def _same(a, b):
    assert len(a.records) == len(b.records)
    for ra, rb in zip(a.records, b.records):
        np.testing.assert_allclose(ra.batch, rb.batch, atol=1e-9)
        assert ra.best_f == pytest.approx(rb.best_f, abs=1e-12)


@pytest.fixture(scope="module")
def sbo(problem):
    return run(problem, _cfg("sbo"))


def test_hpbo_single_fixed_kappa_is_sbo(problem, sbo):
    _same(run(problem, _cfg("hpbo", batch=1, sample_kappa=False)), sbo)


def test_mcbo_single_is_sbo(problem, sbo):
    _same(run(problem, _cfg("mcbo", batch=1)), sbo)


def test_hsbo_one_box_is_sbo(problem, sbo):
    _same(run(problem, _cfg("hsbo", splits=1)), sbo)


def test_lsbo_one_open_band_is_sbo(problem, sbo):
    scheme = levelset_custom(None, BoxDomain.unit(2), [-np.inf, np.inf])
    _same(run(problem, _cfg("lsbo", batch=1, partition=scheme)), sbo)


def test_vpbo_one_block_is_sbo(problem, sbo):
    _same(run(problem, _cfg("vpbo", batch=1, partition=PartitionScheme("variable", [(0, 1)]))), sbo)


def test_refbo_zero_reference_is_sbo(problem, sbo):
    _same(run(problem, _cfg("refbo")), sbo)


@pytest.mark.parametrize("algo, kw, k", [
    ("hpbo", dict(batch=3), 3),
    ("hsbo", dict(splits=2), 4),
    ("mcbo", dict(batch=3, s_count=3), 3),
    ("qbo", dict(batch=2, s_count=8), 2),
    ("vpbo", dict(batch=2, partition=PartitionScheme("variable", [(0,), (1,)])), 2),
])
def test_batch_sizes_time_and_monotone_incumbent(problem, algo, kw, k):
    tr = run(problem, _cfg(algo, **kw))
    assert not tr.failed
    assert [len(r.values) for r in tr.records] == [k] * 3
    assert [r.exp_time for r in tr.records] == [2.0, 4.0, 6.0]
    best = [r.best_f for r in tr.records]
    assert all(b2 <= b1 for b1, b2 in zip(best, best[1:]))
    assert best[0] <= tr.init_y.min()
    assert all(np.all(problem.domain.contains(r.batch)) for r in tr.records)
    assert all(r.compute_time <= r.cpu_time + 1e-9 for r in tr.records)


def test_determinism(problem):
    a = run(problem, _cfg("hpbo", batch=2))
    b = run(problem, _cfg("hpbo", batch=2))
    _same(a, b)


def test_sbo_converges_on_quadratic(problem):
    tr = run(problem, _cfg("sbo", iterations=12))
    assert tr.best_f < 1e-3


def test_vpbo_separable_converges(problem):
    cfg = _cfg("vpbo", batch=2, iterations=8, partition=PartitionScheme("variable", [(0,), (1,)]))
    tr = run(problem, cfg)
    np.testing.assert_allclose(tr.best_x, [0.3, -0.2], atol=0.05)


def test_hsbo_finds_both_modes():
    def bimodal(x):
        return float(min((x[0] - 0.2) ** 2, (x[0] - 0.8) ** 2 + 0.01))

    p = Problem(bimodal, BoxDomain([0.0], [1.0]))
    tr = run(p, AlgoConfig("hsbo", iterations=6, phi=0.0, **FAST), init=np.array([[0.5], [0.05], [0.95]]))
    X = np.concatenate([r.batch[:, 0] for r in tr.records])
    assert np.min(np.abs(X - 0.2)) < 0.05 and np.min(np.abs(X - 0.8)) < 0.05


def test_qbo_batches_respect_epsilon(problem):
    tr = run(problem, _cfg("qbo", batch=3, s_count=8, epsilon=0.05))
    for r in tr.records:
        U = problem.domain.to_unit(r.batch)
        D = np.linalg.norm(U[:, None] - U[None], axis=-1) + np.eye(3)
        assert D.min() >= 0.05 - 1e-9


def test_separate_pushes_apart_and_fails_when_impossible():
    B = _separate(np.array([[0.5, 0.5], [0.5, 0.5]]), 0.1)
    assert np.linalg.norm(B[0] - B[1]) >= 0.1
    with pytest.raises(OptimizationError):
        _separate(np.zeros((3, 1)), 0.9)


def test_refbo_models_residual():
    g = lambda X: np.sum(np.atleast_2d(X) ** 2, axis=1)  # noqa: E731
    f = lambda x: float(np.sum(x ** 2) + 0.1 * x[0])  # noqa: E731
    p = Problem(f, BoxDomain([-1.0, -1.0], [1.0, 1.0]), reference=g)
    tr = run(p, AlgoConfig("refbo", iterations=5, **FAST))
    assert tr.best_f < -0.002


def test_lsbo_one_point_per_band(problem):
    class Ref:
        def predict(self, X):
            return np.sum((np.atleast_2d(X) - 0.5) ** 2, axis=1)

    scheme = levelset_custom(Ref(), BoxDomain.unit(2), [-np.inf, 0.05, 0.2, np.inf])
    tr = run(problem, _cfg("lsbo", batch=3, partition=scheme))
    for r in tr.records:
        lv = Ref().predict(problem.domain.to_unit(r.batch))
        np.testing.assert_array_equal(scheme.band_index(lv), [0, 1, 2])


def test_config_validation():
    with pytest.raises(ConfigurationError):
        AlgoConfig("nope").resolved()
    with pytest.raises(ConfigurationError):
        AlgoConfig("sbo", kappa=-1).resolved()
    with pytest.raises(ConfigurationError):
        AlgoConfig("lsbo").resolved()
    with pytest.warns(UserWarning):
        assert AlgoConfig("sbo", phi=0.3).resolved().phi is None
    assert AlgoConfig("hsbo").resolved().phi == 0.5


def test_refbo_and_vpbo_requirements():
    p = Problem(quad, BoxDomain.unit(2))
    with pytest.raises(ConfigurationError):
        run(p, AlgoConfig("refbo", **FAST))
    with pytest.raises(ConfigurationError):
        run(p, AlgoConfig("vpbo", partition=PartitionScheme("variable", [(0,), (1,)]), **FAST))


def test_evaluation_failure_recorded():
    def bad(x):
        return np.nan if x[0] > -2 else 0.0

    tr = run(Problem(lambda x: float(x[0]), BoxDomain.unit(1)), AlgoConfig("sbo", iterations=0, **FAST))
    assert tr.iterations == 0
    with pytest.raises(Exception):
        run(Problem(bad, BoxDomain.unit(1)), AlgoConfig("sbo", **FAST))


def test_initial_design_and_keyed_rng(problem):
    a = initial_design(problem, 5)
    assert a.shape == (3, 2)
    np.testing.assert_array_equal(a, initial_design(problem, 5))
    assert keyed_rng(1, 2, 3).random() == keyed_rng(1, 2, 3).random()
    assert keyed_rng(1, 2, 3).random() != keyed_rng(1, 3, 2).random()


def test_estimator(problem):
    est = ParallelBayesOpt("sbo", iterations=2, gp_restarts=1, af_starts=4, seed=1).fit(problem)
    assert est.f_best_ == est.trace_.best_f
    assert clone(est).get_params()["iterations"] == 2
    assert set(ALGORITHMS) == {"sbo", "refbo", "hpbo", "hsbo", "mcbo", "qbo", "lsbo", "vpbo"}
