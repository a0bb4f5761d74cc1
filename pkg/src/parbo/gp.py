"""Gaussian-process regression with a Matérn-5/2 ARD kernel.

The regressor follows the scikit-learn estimator protocol (``fit`` /
``predict`` / ``get_params``).  Targets are standardized internally to zero
mean and unit variance; all hyperparameters live in that standardized output
space while predictions are returned in the original units.  Inputs are used
as given; the optimization drivers feed points already mapped to the unit
cube.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_solve, solve_triangular
from scipy.optimize import minimize
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .exceptions import InvalidArgumentError, NumericalError

SQRT5 = np.sqrt(5.0)
SMOOTHNESS = 2.5

LENGTH_SCALE_BOUNDS = (1e-3, 1e3)
SIGNAL_VARIANCE_BOUNDS = (1e-3, 1e3)
# noise is parameterized as a ratio to the signal variance
NOISE_RATIO_BOUNDS = (1e-8, 1e-1)
JITTER_START = 1e-10
JITTER_MAX = 1e-4


@dataclass(frozen=True)
class KernelParams:
    """Hyperparameters of the Matérn-5/2 ARD kernel.

    ``smoothness`` is fixed at 2.5; it is stored only for reporting.
    """

    signal_variance: float
    length_scales: np.ndarray
    noise_variance: float = 0.0
    smoothness: float = field(default=SMOOTHNESS, init=False)

    def __post_init__(self):
        ls = np.atleast_1d(np.asarray(self.length_scales, dtype=float))
        object.__setattr__(self, "length_scales", ls)
        if not np.all(ls > 0):
            raise InvalidArgumentError("length_scales must be positive")
        if not self.signal_variance > 0:
            raise InvalidArgumentError("signal_variance must be positive")
        if not self.noise_variance >= 0:
            raise InvalidArgumentError("noise_variance must be nonnegative")

    @property
    def dim(self) -> int:
        return self.length_scales.size

    def to_theta(self) -> np.ndarray:
        """Log-space vector ``[log sf2, log l_1..l_d, log(noise/sf2)]``."""
        ratio = max(self.noise_variance / self.signal_variance, NOISE_RATIO_BOUNDS[0])
        return np.concatenate(
            [[np.log(self.signal_variance)], np.log(self.length_scales), [np.log(ratio)]]
        )

    @classmethod
    def from_theta(cls, theta) -> "KernelParams":
        theta = np.asarray(theta, dtype=float)
        sf2 = float(np.exp(theta[0]))
        return cls(sf2, np.exp(theta[1:-1]), sf2 * float(np.exp(theta[-1])))


def _scaled_distance(A, B, length_scales):
    A = np.asarray(A, dtype=float) / length_scales
    B = np.asarray(B, dtype=float) / length_scales
    sq = (A * A).sum(-1)[:, None] + (B * B).sum(-1)[None, :] - 2.0 * A @ B.T
    return np.sqrt(np.maximum(sq, 0.0))


def matern25(a, b, params: KernelParams) -> float:
    """Kernel value between two design vectors."""
    a = np.atleast_1d(np.asarray(a, dtype=float))
    b = np.atleast_1d(np.asarray(b, dtype=float))
    if a.shape != b.shape or a.size != params.dim:
        raise InvalidArgumentError(
            f"dimension mismatch: {a.size}, {b.size} vs {params.dim} length scales"
        )
    r = np.sqrt(np.sum(((a - b) / params.length_scales) ** 2))
    return float(params.signal_variance * (1.0 + SQRT5 * r + 5.0 * r * r / 3.0) * np.exp(-SQRT5 * r))


def matern25_matrix(A, B, length_scales, signal_variance=1.0):
    """Cross-covariance matrix ``K[i, j] = k(A[i], B[j])``."""
    r = _scaled_distance(A, B, np.asarray(length_scales, dtype=float))
    return signal_variance * (1.0 + SQRT5 * r + (5.0 / 3.0) * r * r) * np.exp(-SQRT5 * r)


def _cholesky_with_jitter(K):
    """Lower Cholesky factor of ``K``, escalating diagonal jitter on failure.

    Returns ``(L, jitter)``.
    """
    n = K.shape[0]
    if n == 0:
        return np.zeros((0, 0)), 0.0
    try:
        return np.linalg.cholesky(K), 0.0
    except np.linalg.LinAlgError:
        pass
    scale = max(float(np.mean(np.diag(K))), 1e-300)
    jitter = JITTER_START
    while jitter <= JITTER_MAX * (1 + 1e-12):
        try:
            return np.linalg.cholesky(K + jitter * scale * np.eye(n)), jitter * scale
        except np.linalg.LinAlgError:
            jitter *= 10.0
    eig_min = float(np.linalg.eigvalsh(K).min())
    raise NumericalError(
        f"kernel matrix not positive definite after jitter {JITTER_MAX:g}; "
        f"n={n}, smallest eigenvalue {eig_min:.3e}"
    )


def _lml_and_grad(theta, X, y, with_grad=True):
    """Log marginal likelihood of standardized targets and its gradient in theta."""
    n, d = X.shape
    sf2 = np.exp(theta[0])
    ls = np.exp(theta[1 : 1 + d])
    ratio = np.exp(theta[-1])
    Xs = X / ls
    r = _scaled_distance(Xs, Xs, np.ones(d))
    e = np.exp(-SQRT5 * r)
    R = (1.0 + SQRT5 * r + (5.0 / 3.0) * r * r) * e
    K = sf2 * (R + ratio * np.eye(n))
    L, _ = _cholesky_with_jitter(K)
    alpha = cho_solve((L, True), y)
    lml = -0.5 * y @ alpha - np.log(np.diag(L)).sum() - 0.5 * n * np.log(2 * np.pi)
    if not with_grad:
        return lml, None
    Kinv = cho_solve((L, True), np.eye(n))
    W = np.outer(alpha, alpha) - Kinv
    grad = np.empty(theta.size)
    grad[0] = 0.5 * np.sum(W * K)
    common = sf2 * (5.0 / 3.0) * (1.0 + SQRT5 * r) * e
    for i in range(d):
        diff2 = (Xs[:, i][:, None] - Xs[:, i][None, :]) ** 2
        grad[1 + i] = 0.5 * np.sum(W * (common * diff2))
    grad[-1] = 0.5 * sf2 * ratio * np.trace(W)
    return lml, grad


def theta_bounds(dim):
    """Box bounds in log-hyperparameter space."""
    return (
        [tuple(np.log(SIGNAL_VARIANCE_BOUNDS))]
        + [tuple(np.log(LENGTH_SCALE_BOUNDS))] * dim
        + [tuple(np.log(NOISE_RATIO_BOUNDS))]
    )


class GaussianProcess(RegressorMixin, BaseEstimator):
    """Exact GP regressor with a Matérn-5/2 ARD kernel.

    Parameters
    ----------
    length_scale : float or array-like, default=1.0
        Initial length scale(s); a scalar is broadcast to every dimension.
    signal_variance : float, default=1.0
        Initial signal variance (standardized output units).
    noise_variance : float, default=1e-8
        Initial noise variance (standardized output units).  The fitted value
        never drops below ``1e-8 * signal_variance``.
    optimize : bool, default=True
        Maximize the log marginal likelihood over the hyperparameters.
    n_restarts : int, default=5
        Number of local LML ascents; the first starts from the initial
        hyperparameters, the rest from uniform draws in log space.
    normalize_y : bool, default=True
        Standardize targets before fitting.
    random_state : int, Generator or None
        Seed for restart locations.
    """

    def __init__(
        self,
        length_scale=1.0,
        signal_variance=1.0,
        noise_variance=1e-8,
        optimize=True,
        n_restarts=5,
        normalize_y=True,
        random_state=None,
    ):
        self.length_scale = length_scale
        self.signal_variance = signal_variance
        self.noise_variance = noise_variance
        self.optimize = optimize
        self.n_restarts = n_restarts
        self.normalize_y = normalize_y
        self.random_state = random_state

    def _initial_params(self, d):
        ls = np.broadcast_to(np.asarray(self.length_scale, dtype=float), (d,)).copy()
        sf2 = float(self.signal_variance)
        noise = max(float(self.noise_variance), NOISE_RATIO_BOUNDS[0] * sf2)
        return KernelParams(sf2, ls, noise)

    def fit(self, X, y):
        """Fit hyperparameters and cache the Cholesky factor.

        An empty ``X`` of shape ``(0, d)`` yields the prior.
        """
        X = np.asarray(X, dtype=float)
        if X.ndim != 2:
            raise InvalidArgumentError("X must be 2-D (n_samples, n_features)")
        y = np.asarray(y, dtype=float).ravel()
        if X.shape[0] != y.size:
            raise InvalidArgumentError("X and y have inconsistent lengths")
        if X.shape[0]:
            X = check_array(X)
            if not np.all(np.isfinite(y)):
                raise InvalidArgumentError("y contains non-finite values")
        n, d = X.shape
        if self.normalize_y and n > 0:
            y_mean = float(y.mean())
            y_std = float(y.std())
            if not y_std > 0:
                y_std = 1.0
        else:
            y_mean, y_std = 0.0, 1.0
        ys = (y - y_mean) / y_std

        params = self._initial_params(d)
        theta = params.to_theta()
        bounds = theta_bounds(d)
        theta = np.clip(theta, [b[0] for b in bounds], [b[1] for b in bounds])
        if self.optimize and n > 0:
            theta = self._optimize_theta(theta, X, ys, bounds)
        self._set_state(X, y, ys, y_mean, y_std, theta)
        return self

    def _optimize_theta(self, theta0, X, ys, bounds):
        rng = np.random.default_rng(self.random_state)
        lo = np.array([b[0] for b in bounds])
        hi = np.array([b[1] for b in bounds])

        def objective(theta):
            try:
                lml, grad = _lml_and_grad(theta, X, ys)
            except NumericalError:
                return np.inf, np.zeros_like(theta)
            return -lml, -grad

        starts = [theta0] + [rng.uniform(lo, hi) for _ in range(max(self.n_restarts, 1) - 1)]
        best_theta, best_val = theta0, np.inf
        for start in starts:
            res = minimize(objective, start, jac=True, method="L-BFGS-B", bounds=bounds)
            if np.isfinite(res.fun) and res.fun < best_val:
                best_theta, best_val = res.x, res.fun
        if not np.isfinite(best_val):
            _lml_and_grad(theta0, X, ys, with_grad=False)  # surfaces the diagnostic
        return np.asarray(best_theta, dtype=float)

    def _set_state(self, X, y, ys, y_mean, y_std, theta, chol=None):
        n, d = X.shape
        self.X_train_ = X
        self.y_train_ = y
        self.y_mean_ = y_mean
        self.y_std_ = y_std
        self.theta_ = np.asarray(theta, dtype=float)
        self.params_ = KernelParams.from_theta(self.theta_)
        self.n_features_in_ = d
        if chol is None:
            K = matern25_matrix(X, X, self.params_.length_scales, self.params_.signal_variance)
            K[np.diag_indices_from(K)] += self.params_.noise_variance
            chol, self.jitter_ = _cholesky_with_jitter(K)
        self.chol_ = chol
        self.alpha_ = cho_solve((chol, True), ys) if n else np.zeros(0)
        self.log_marginal_likelihood_value_ = (
            float(-0.5 * ys @ self.alpha_ - np.log(np.diag(chol)).sum() - 0.5 * n * np.log(2 * np.pi))
            if n
            else 0.0
        )

    @property
    def kernel_params_(self) -> KernelParams:
        """Fitted hyperparameters in the original output units."""
        check_is_fitted(self, "params_")
        s2 = self.y_std_**2
        p = self.params_
        return KernelParams(p.signal_variance * s2, p.length_scales, p.noise_variance * s2)

    def log_marginal_likelihood(self, theta=None, eval_gradient=False):
        """LML of the standardized training targets at ``theta`` (default: fitted)."""
        check_is_fitted(self, "params_")
        theta = self.theta_ if theta is None else np.asarray(theta, dtype=float)
        ys = (self.y_train_ - self.y_mean_) / self.y_std_
        lml, grad = _lml_and_grad(theta, self.X_train_, ys, with_grad=eval_gradient)
        return (lml, grad) if eval_gradient else lml

    def _check_query(self, X):
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X.reshape(1, -1)
        if X.shape[-1] != self.n_features_in_:
            raise InvalidArgumentError(
                f"query has {X.shape[-1]} features, model expects {self.n_features_in_}"
            )
        return X

    def predict(self, X, return_std=False, return_cov=False):
        """Posterior mean (and standard deviation or covariance) at ``X``."""
        check_is_fitted(self, "params_")
        X = self._check_query(X)
        p = self.params_
        if self.X_train_.shape[0] == 0:
            mean = np.zeros(X.shape[0])
            v = np.zeros((0, X.shape[0]))
        else:
            Ks = matern25_matrix(self.X_train_, X, p.length_scales, p.signal_variance)
            mean = Ks.T @ self.alpha_
            v = solve_triangular(self.chol_, Ks, lower=True, check_finite=False)
        mean = self.y_mean_ + self.y_std_ * mean
        if return_cov:
            cov = matern25_matrix(X, X, p.length_scales, p.signal_variance) - v.T @ v
            return mean, cov * self.y_std_**2
        if return_std:
            var = p.signal_variance - np.einsum("ij,ij->j", v, v)
            return mean, np.sqrt(np.maximum(var, 0.0)) * self.y_std_
        return mean

    def posterior(self, x):
        """Mean and standard deviation at a single design vector."""
        mean, std = self.predict(np.atleast_1d(x).reshape(1, -1), return_std=True)
        return float(mean[0]), float(std[0])

    def sample(self, x, rng) -> float:
        """One draw of the latent function at ``x`` from the posterior marginal."""
        mean, std = self.posterior(x)
        if std == 0.0:
            return mean
        return float(mean + std * rng.standard_normal())

    def sample_joint(self, X, rng, n_samples=1):
        """Joint posterior draws at the rows of ``X``; shape ``(n_samples, m)``."""
        mean, cov = self.predict(X, return_cov=True)
        m = mean.size
        w, V = np.linalg.eigh(0.5 * (cov + cov.T))
        root = V * np.sqrt(np.maximum(w, 0.0))
        z = rng.standard_normal((n_samples, m))
        return mean[None, :] + z @ root.T

    def condition(self, X_new, y_new):
        """New model with ``(X_new, y_new)`` appended and hyperparameters frozen.

        Output standardization is frozen too, so the only work is a block
        extension of the Cholesky factor.
        """
        check_is_fitted(self, "params_")
        X_new = self._check_query(X_new)
        y_new = np.atleast_1d(np.asarray(y_new, dtype=float)).ravel()
        p = self.params_
        X = np.vstack([self.X_train_, X_new])
        y = np.concatenate([self.y_train_, y_new])
        ys = (y - self.y_mean_) / self.y_std_
        out = GaussianProcess(**self.get_params())
        out.jitter_ = getattr(self, "jitter_", 0.0)
        chol = None
        if self.X_train_.shape[0]:
            B = matern25_matrix(self.X_train_, X_new, p.length_scales, p.signal_variance)
            C = matern25_matrix(X_new, X_new, p.length_scales, p.signal_variance)
            C[np.diag_indices_from(C)] += p.noise_variance + out.jitter_
            W = solve_triangular(self.chol_, B, lower=True, check_finite=False)
            S = C - W.T @ W
            try:
                Ls = np.linalg.cholesky(S)
                n, m = self.X_train_.shape[0], X_new.shape[0]
                chol = np.zeros((n + m, n + m))
                chol[:n, :n] = self.chol_
                chol[n:, :n] = W.T
                chol[n:, n:] = Ls
            except np.linalg.LinAlgError:
                chol = None
        out._set_state(X, y, ys, self.y_mean_, self.y_std_, self.theta_, chol=chol)
        return out


def fit_gp(X, y, init: KernelParams | None = None, restarts: int = 5, random_state=None):
    """Fit a :class:`GaussianProcess` by LML maximization from ``init``."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[0] == 0:
        raise InvalidArgumentError("training set must be a nonempty 2-D array")
    kwargs = {}
    if init is not None:
        kwargs = dict(
            length_scale=init.length_scales,
            signal_variance=init.signal_variance,
            noise_variance=init.noise_variance,
        )
    return GaussianProcess(n_restarts=restarts, random_state=random_state, **kwargs).fit(X, y)
