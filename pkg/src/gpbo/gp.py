"""Gaussian-process surrogate with an ARD Matérn 5/2 kernel.

Targets are standardized before fitting, the prior mean is zero in
standardized space, and kernel hyperparameters are estimated by multi-start
maximization of the log marginal likelihood in log space.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.linalg import solve_triangular
from scipy.optimize import minimize

from .errors import InvalidInputError, NumericalFailureError
from .space import Configuration, Space, to_unit

SQRT5 = math.sqrt(5.0)

LENGTHSCALE_BOUNDS = (1e-2, 1e2)
SIGNAL_VARIANCE_BOUNDS = (1e-3, 1e3)
NOISE_VARIANCE_BOUNDS = (1e-8, 1e-1)

JITTER_START = 1e-10
JITTER_MAX = 1e-4

N_RANDOM_STARTS = 4


@dataclass(frozen=True)
class KernelParams:
    lengthscales: np.ndarray
    signal_variance: float = 1.0
    noise_variance: float = 1e-6

    def __post_init__(self):
        ls = np.atleast_1d(np.asarray(self.lengthscales, dtype=float))
        object.__setattr__(self, "lengthscales", ls)
        if not (np.all(np.isfinite(ls)) and np.all(ls > 0)):
            raise InvalidInputError(f"lengthscales must be positive and finite, got {ls}")
        if not self.signal_variance > 0:
            raise InvalidInputError(f"signal_variance must be positive, got {self.signal_variance}")
        if not self.noise_variance >= 0:
            raise InvalidInputError(f"noise_variance must be non-negative, got {self.noise_variance}")

    @classmethod
    def default(cls, dim: int) -> "KernelParams":
        return cls(np.full(dim, 0.5), 1.0, 1e-6)

    def to_log(self) -> np.ndarray:
        return np.concatenate(
            [np.log(self.lengthscales), [math.log(self.signal_variance), math.log(self.noise_variance)]]
        )

    @classmethod
    def from_log(cls, theta: np.ndarray) -> "KernelParams":
        theta = np.asarray(theta, dtype=float)
        return cls(np.exp(theta[:-2]), float(np.exp(theta[-2])), float(np.exp(theta[-1])))


def log_bounds(dim: int) -> list[tuple[float, float]]:
    ls = (math.log(LENGTHSCALE_BOUNDS[0]), math.log(LENGTHSCALE_BOUNDS[1]))
    sv = (math.log(SIGNAL_VARIANCE_BOUNDS[0]), math.log(SIGNAL_VARIANCE_BOUNDS[1]))
    nv = (math.log(NOISE_VARIANCE_BOUNDS[0]), math.log(NOISE_VARIANCE_BOUNDS[1]))
    return [ls] * dim + [sv, nv]


def matern52(a, b, params: KernelParams) -> float:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
        raise InvalidInputError("non-finite kernel input")
    r = math.sqrt(float(np.sum(((a - b) / params.lengthscales) ** 2)))
    return params.signal_variance * (1.0 + SQRT5 * r + 5.0 / 3.0 * r * r) * math.exp(-SQRT5 * r)


def _scaled_sqdist(A: np.ndarray, B: np.ndarray, lengthscales: np.ndarray) -> np.ndarray:
    diff = (A[:, None, :] - B[None, :, :]) / lengthscales
    return np.sum(diff * diff, axis=-1)


def kernel_matrix(A: np.ndarray, B: np.ndarray, params: KernelParams) -> np.ndarray:
    r = np.sqrt(_scaled_sqdist(A, B, params.lengthscales))
    return params.signal_variance * (1.0 + SQRT5 * r + 5.0 / 3.0 * r * r) * np.exp(-SQRT5 * r)


def cholesky_with_jitter(K: np.ndarray) -> tuple[np.ndarray, float]:
    """Lower Cholesky factor of ``K + jitter*I`` with the smallest jitter that works."""
    jitter = JITTER_START
    eye = np.eye(len(K))
    while jitter <= JITTER_MAX * (1 + 1e-9):
        try:
            return np.linalg.cholesky(K + jitter * eye), jitter
        except np.linalg.LinAlgError:
            jitter *= 10.0
    raise NumericalFailureError(f"Cholesky failed with jitter up to {JITTER_MAX:g}")


def _regularized(X: np.ndarray, params: KernelParams) -> np.ndarray:
    return kernel_matrix(X, X, params) + params.noise_variance * np.eye(len(X))


def log_marginal_likelihood(params: KernelParams, X: np.ndarray, z: np.ndarray) -> float:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    z = np.asarray(z, dtype=float)
    L, _ = cholesky_with_jitter(_regularized(X, params))
    alpha = solve_triangular(L.T, solve_triangular(L, z, lower=True), lower=False)
    return float(
        -0.5 * z @ alpha - np.sum(np.log(np.diag(L))) - 0.5 * len(z) * math.log(2 * math.pi)
    )


def lml_and_grad(theta: np.ndarray, X: np.ndarray, z: np.ndarray) -> tuple[float, np.ndarray]:
    """LML and its gradient with respect to the log-parameters ``theta``."""
    params = KernelParams.from_log(theta)
    n, d = X.shape
    diff = (X[:, None, :] - X[None, :, :]) / params.lengthscales
    sq = diff * diff
    r = np.sqrt(np.sum(sq, axis=-1))
    e = np.exp(-SQRT5 * r)
    K_sig = params.signal_variance * (1.0 + SQRT5 * r + 5.0 / 3.0 * r * r) * e
    L, _ = cholesky_with_jitter(K_sig + params.noise_variance * np.eye(n))
    alpha = solve_triangular(L.T, solve_triangular(L, z, lower=True), lower=False)
    lml = -0.5 * z @ alpha - np.sum(np.log(np.diag(L))) - 0.5 * n * math.log(2 * math.pi)

    Linv = solve_triangular(L, np.eye(n), lower=True)
    W = np.outer(alpha, alpha) - Linv.T @ Linv  # alpha alpha^T - K^-1

    grad = np.empty(d + 2)
    # dk/dlog(l_i) = s2 * 5/3 * (1 + sqrt5 r) exp(-sqrt5 r) * (delta_i / l_i)^2
    common = params.signal_variance * 5.0 / 3.0 * (1.0 + SQRT5 * r) * e
    for i in range(d):
        grad[i] = 0.5 * np.sum(W * (common * sq[:, :, i]))
    grad[d] = 0.5 * np.sum(W * K_sig)
    grad[d + 1] = 0.5 * params.noise_variance * np.trace(W)
    return float(lml), grad


@dataclass(frozen=True)
class GPModel:
    X: np.ndarray
    z: np.ndarray
    y_mean: float
    y_std: float
    params: KernelParams
    chol: np.ndarray
    alpha: np.ndarray
    jitter: float
    space: Space | None = None

    @property
    def n(self) -> int:
        return len(self.X)

    def regularized_kernel(self) -> np.ndarray:
        return _regularized(self.X, self.params) + self.jitter * np.eye(self.n)


def _encode(space: Space | None, configs) -> np.ndarray:
    if space is None:
        return np.atleast_2d(np.asarray(configs, dtype=float))
    return np.array([to_unit(space, c) for c in configs], dtype=float).reshape(len(configs), space.dim)


def fit_unit(
    X: np.ndarray,
    y: Sequence[float],
    seed=None,
    params: KernelParams | None = None,
    optimize: bool = True,
    space: Space | None = None,
) -> GPModel:
    """Fit on unit-cube inputs ``X`` (n x d)."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float).ravel()
    if len(y) == 0:
        raise InvalidInputError("cannot fit a GP on empty data")
    if len(X) != len(y):
        raise InvalidInputError(f"{len(X)} inputs but {len(y)} targets")
    if not (np.all(np.isfinite(y)) and np.all(np.isfinite(X))):
        raise InvalidInputError("non-finite training data")

    y_mean = float(np.mean(y))
    y_std = float(np.std(y))
    if y_std < 1e-12:
        y_std = 1.0
    z = (y - y_mean) / y_std

    d = X.shape[1]
    if params is None:
        params = KernelParams.default(d)
    if optimize and len(y) > 1:
        params = _maximize_lml(X, z, params, np.random.default_rng(seed))

    L, jitter = cholesky_with_jitter(_regularized(X, params))
    alpha = solve_triangular(L.T, solve_triangular(L, z, lower=True), lower=False)
    return GPModel(X, z, y_mean, y_std, params, L, alpha, jitter, space)


def fit(
    configs: Sequence[Configuration],
    space: Space,
    y: Sequence[float],
    seed=None,
    params: KernelParams | None = None,
    optimize: bool = True,
) -> GPModel:
    """Fit the surrogate on configurations and their losses (lower is better).

    Pass ``optimize=False`` with explicit ``params`` to keep the kernel fixed.
    """
    if len(configs) == 0:
        raise InvalidInputError("cannot fit a GP on empty data")
    return fit_unit(_encode(space, configs), y, seed=seed, params=params, optimize=optimize, space=space)


def _maximize_lml(X, z, default: KernelParams, rng: np.random.Generator) -> KernelParams:
    d = X.shape[1]
    bounds = log_bounds(d)
    lo = np.array([b[0] for b in bounds])
    hi = np.array([b[1] for b in bounds])
    starts = [np.clip(default.to_log(), lo, hi)]
    starts += [rng.uniform(lo, hi) for _ in range(N_RANDOM_STARTS)]

    def objective(theta):
        try:
            lml, g = lml_and_grad(theta, X, z)
        except NumericalFailureError:
            return 1e25, np.zeros_like(theta)
        return -lml, -g

    best_theta, best_val = starts[0], np.inf
    for x0 in starts:
        res = minimize(objective, x0, jac=True, method="L-BFGS-B", bounds=bounds,
                       options={"maxiter": 200})
        if np.isfinite(res.fun) and res.fun < best_val:
            best_val, best_theta = res.fun, res.x
    return KernelParams.from_log(np.clip(best_theta, lo, hi))


def predict_unit(model: GPModel, U: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized posterior at unit-cube rows of ``U``; returns raw-scale mean and variance."""
    U = np.atleast_2d(np.asarray(U, dtype=float))
    if U.shape[1] != model.X.shape[1]:
        raise InvalidInputError(f"expected {model.X.shape[1]} columns, got {U.shape[1]}")
    Ks = kernel_matrix(U, model.X, model.params)
    mu = Ks @ model.alpha
    v = solve_triangular(model.chol, Ks.T, lower=True)
    var = model.params.signal_variance - np.sum(v * v, axis=0)
    var = np.maximum(var, 0.0)
    return mu * model.y_std + model.y_mean, var * model.y_std**2


def predict(model: GPModel, x) -> tuple[float, float]:
    """Posterior mean and variance (raw scale) at a configuration or unit vector."""
    if isinstance(x, Configuration):
        if model.space is None:
            raise InvalidInputError("model was fitted on raw unit vectors; pass a unit vector")
        u = to_unit(model.space, x)
    else:
        u = np.asarray(x, dtype=float)
        if u.shape != (model.X.shape[1],):
            raise InvalidInputError(f"expected unit vector of length {model.X.shape[1]}, got {u.shape}")
    mean, var = predict_unit(model, u[None, :])
    return float(mean[0]), float(var[0])
