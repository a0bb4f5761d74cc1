import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from sklearn.base import clone

from oracles import central_gradient, dense_lml, dense_posterior, matern_dense
from parbo.exceptions import InvalidArgumentError
from parbo.gp import GaussianProcess, KernelParams, _lml_and_grad, fit_gp, matern25, matern25_matrix


def _fitted(X, y, **kw):
    return GaussianProcess(**{"n_restarts": 2, "random_state": 0, **kw}).fit(X, y)


def test_matern_zero_distance_is_signal_variance():
    p = KernelParams(2.5, [0.3, 0.7])
    assert matern25([0.1, 0.2], [0.1, 0.2], p) == 2.5


def test_matern_unit_distance_closed_form():
    # (1 + sqrt5 + 5/3) exp(-sqrt5), evaluated at high precision
    p = KernelParams(1.0, [1.0])
    assert matern25([0.0], [1.0], p) == pytest.approx(0.5239941088318203, abs=1e-15)


def test_matern_matrix_matches_loop_oracle(rng):
    A, B = rng.random((5, 3)), rng.random((4, 3))
    ls = np.array([0.2, 0.5, 1.5])
    np.testing.assert_allclose(matern25_matrix(A, B, ls, 1.7), matern_dense(A, B, ls, 1.7), atol=1e-14)


@given(st.lists(st.floats(-3, 3), min_size=4, max_size=4))
def test_matern_symmetric(v):
    p = KernelParams(1.3, [0.4, 0.9])
    a, b = np.array(v[:2]), np.array(v[2:])
    assert matern25(a, b, p) == matern25(b, a, p)


def test_kernel_params_validation():
    with pytest.raises(InvalidArgumentError):
        KernelParams(1.0, [0.0])
    with pytest.raises(InvalidArgumentError):
        KernelParams(-1.0, [1.0])
    with pytest.raises(InvalidArgumentError):
        KernelParams(1.0, [1.0], noise_variance=-1e-3)


def test_theta_round_trip():
    p = KernelParams(0.7, [0.2, 3.0], 1e-4)
    q = KernelParams.from_theta(p.to_theta())
    assert q.signal_variance == pytest.approx(0.7)
    np.testing.assert_allclose(q.length_scales, [0.2, 3.0])
    assert q.noise_variance == pytest.approx(1e-4)


def test_posterior_matches_dense_oracle_1d(rng):
    X = rng.random((3, 1))
    y = np.sin(6 * X[:, 0])
    gp = _fitted(X, y)
    Q = rng.random((20, 1))
    ys = (y - gp.y_mean_) / gp.y_std_
    p = gp.params_
    m, s = dense_posterior(X, ys, Q, p.length_scales, p.signal_variance, p.noise_variance + gp.jitter_)
    mu, sd = gp.predict(Q, return_std=True)
    np.testing.assert_allclose(mu, gp.y_mean_ + gp.y_std_ * m, atol=1e-8 * gp.y_std_)
    np.testing.assert_allclose(sd, gp.y_std_ * s, atol=1e-8 * gp.y_std_)


def test_interpolates_training_points(rng):
    X = rng.random((8, 2))
    y = X.sum(axis=1) ** 2
    gp = GaussianProcess(noise_variance=0.0, optimize=False, length_scale=0.5).fit(X, y)
    mu, sd = gp.predict(X, return_std=True)
    np.testing.assert_allclose(mu, y, atol=1e-6)
    assert np.all(sd <= 1e-3 * gp.y_std_)


def test_prior_when_no_data():
    gp = GaussianProcess(signal_variance=2.0, optimize=False).fit(np.zeros((0, 2)), np.zeros(0))
    mu, sd = gp.predict(np.random.default_rng(0).random((5, 2)), return_std=True)
    np.testing.assert_array_equal(mu, 0.0)
    np.testing.assert_allclose(sd, np.sqrt(2.0))


def test_lml_gradient_matches_finite_differences(rng):
    X = rng.random((15, 2))
    ys = np.cos(3 * X[:, 0]) + X[:, 1]
    ys = (ys - ys.mean()) / ys.std()
    for _ in range(5):
        theta = np.array([rng.uniform(-1, 1), *rng.uniform(-2, 0.5, 2), rng.uniform(-12, -4)])
        lml, grad = _lml_and_grad(theta, X, ys)
        assert lml == pytest.approx(dense_lml(theta, X, ys), rel=1e-9)
        fd = central_gradient(lambda t: _lml_and_grad(t, X, ys, with_grad=False)[0], theta)
        np.testing.assert_allclose(grad, fd, rtol=1e-5, atol=1e-6)


def test_lml_permutation_invariant(rng):
    X = rng.random((12, 2))
    y = np.sin(4 * X[:, 0]) * X[:, 1]
    gp = _fitted(X, y)
    perm = rng.permutation(12)
    gp2 = GaussianProcess(length_scale=gp.params_.length_scales, optimize=False).fit(X[perm], y[perm])
    gp2.theta_ = gp.theta_
    assert gp.log_marginal_likelihood(gp.theta_) == pytest.approx(
        GaussianProcess(optimize=False).fit(X[perm], y[perm]).log_marginal_likelihood(gp.theta_), rel=1e-10)


def test_duplicate_noise_free_point_leaves_posterior_unchanged(rng):
    X = rng.random((10, 2))
    y = np.exp(-X.sum(axis=1))
    gp = _fitted(X, y)
    p = gp.params_
    kw = dict(length_scale=p.length_scales, signal_variance=p.signal_variance, optimize=False)
    a = GaussianProcess(**kw).fit(X, y)
    # same output scaling so the comparison isolates the duplicate
    b = a.condition(X[:1], y[:1])
    Q = rng.random((100, 2))
    ma, sa = a.predict(Q, return_std=True)
    mb, sb = b.predict(Q, return_std=True)
    # residual difference is set by the diagonal jitter
    np.testing.assert_allclose(ma, mb, atol=1e-4 * a.y_std_)
    np.testing.assert_allclose(sa, sb, atol=1e-4 * a.y_std_)


def test_conflicting_duplicates_absorbed_by_noise():
    X = np.array([[0.2], [0.2], [0.7], [0.9]])
    y = np.array([1.0, 1.3, 0.0, 0.5])
    gp = GaussianProcess(n_restarts=3, random_state=0).fit(X, y)
    assert gp.params_.noise_variance > 0
    assert np.all(np.isfinite(gp.predict(X)))


def test_recovers_length_scale_from_draws():
    # data drawn noise-free from a Matern-5/2 GP with l = 0.5
    X = np.linspace(0, 1, 40)[:, None]
    K = matern25_matrix(X, X, np.array([0.5]), 1.0) + 1e-10 * np.eye(40)
    L = np.linalg.cholesky(K)
    fitted = []
    for seed in range(10):
        y = L @ np.random.default_rng(seed).standard_normal(40)
        fitted.append(GaussianProcess(n_restarts=5, random_state=seed).fit(X, y).params_.length_scales[0])
    assert 0.3 <= np.median(fitted) <= 0.8
    assert sum(0.3 <= v <= 0.8 for v in fitted) >= 7


def test_sample_degenerate_and_clt(rng):
    X = np.array([[0.0], [0.5], [1.0]])
    gp = GaussianProcess(noise_variance=0.0, optimize=False, length_scale=0.3).fit(X, [0.0, 1.0, 0.0])
    mean, std = gp.posterior(np.array([0.5]))
    if std == 0.0:
        assert gp.sample(np.array([0.5]), rng) == mean
    q = np.array([0.25])
    mean, std = gp.posterior(q)
    draws = np.array([gp.sample(q, rng) for _ in range(100_000)])
    assert abs(draws.mean() - mean) < 3 * std / np.sqrt(100_000) * 1.5
    a = gp.sample(q, np.random.default_rng(7))
    b = gp.sample(q, np.random.default_rng(7))
    assert a == b


def test_cholesky_reconstructs_kernel(rng):
    X = rng.random((20, 3))
    gp = _fitted(X, X @ [1.0, -2.0, 0.5])
    L = gp.chol_
    assert np.allclose(L, np.tril(L)) and np.all(np.diag(L) > 0)
    p = gp.params_
    K = matern25_matrix(X, X, p.length_scales, p.signal_variance) + (p.noise_variance + gp.jitter_) * np.eye(20)
    np.testing.assert_allclose(L @ L.T, K, rtol=1e-10, atol=1e-12)


def test_variance_clamp_is_small(rng):
    X = rng.random((30, 2))
    gp = _fitted(X, np.sin(5 * X[:, 0]))
    Q = np.vstack([X, rng.random((200, 2))])
    _, cov = gp.predict(Q, return_cov=True)
    assert np.min(np.diag(cov)) >= -1e-8 * gp.params_.signal_variance * gp.y_std_**2


def test_sklearn_estimator_contract():
    gp = GaussianProcess(length_scale=0.4, n_restarts=2)
    assert clone(gp).get_params()["length_scale"] == 0.4
    X = np.random.default_rng(0).random((10, 2))
    gp.fit(X, X[:, 0])
    assert gp.score(X, X[:, 0]) > 0.99
    with pytest.raises(InvalidArgumentError):
        gp.predict(np.zeros((2, 3)))


def test_fit_gp_helper(rng):
    X = rng.random((10, 1))
    gp = fit_gp(X, X[:, 0] ** 2, init=KernelParams(1.0, [0.3]), restarts=2, random_state=0)
    assert gp.params_.length_scales.shape == (1,)
    with pytest.raises(InvalidArgumentError):
        fit_gp(np.zeros((0, 1)), [])
