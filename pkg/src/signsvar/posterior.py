"""Natural-conjugate (normal-inverse-Wishart) posterior for the reduced-form VAR."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Optional, Sequence

import numpy as np
from scipy.special import multigammaln

from .var import VarParams

DEFAULT_GRID = (0.05, 0.1, 0.2, 0.4, 0.8)


def cholesky_lower(sigma: np.ndarray) -> np.ndarray:
    """Lower Cholesky factor; raises ``ValueError`` for non-positive-definite input."""
    sigma = np.asarray(sigma, dtype=float)
    if sigma.ndim != 2 or sigma.shape[0] != sigma.shape[1]:
        raise ValueError("sigma must be a square matrix")
    if not np.allclose(sigma, sigma.T, rtol=0.0, atol=1e-12 * max(1.0, np.abs(sigma).max())):
        raise ValueError("sigma is not symmetric")
    try:
        return np.linalg.cholesky(sigma)
    except np.linalg.LinAlgError as exc:
        raise ValueError("sigma is not positive definite") from exc


def design_matrices(data: np.ndarray, p: int) -> tuple[np.ndarray, np.ndarray]:
    """Regressors ``X = [1, y_{t-1}', ..., y_{t-p}']`` and targets ``Y = y_t`` for ``t > p``."""
    data = np.asarray(data, dtype=float)
    T, n = data.shape
    X = np.ones((T - p, n * p + 1))
    for s in range(1, p + 1):
        X[:, 1 + (s - 1) * n : 1 + s * n] = data[p - s : T - s]
    return X, data[p:]


@dataclass(frozen=True)
class Minnesota:
    """Prior hyperparameters: ``lam`` is the overall tightness on lag coefficients."""

    lam: float = 0.2
    own_lag_mean: float = 0.9
    intercept_sd: float = 100.0


@dataclass(frozen=True, eq=False)
class NiwPosterior:
    """``Sigma ~ IW(S_bar, nu_bar)``, ``vec(A) | Sigma ~ N(vec(M_bar), Sigma kron V_bar)``.

    When ``point_sigma`` is set the posterior is degenerate at ``(M_bar,
    point_sigma)`` (plug-in mode).
    """

    M_bar: np.ndarray
    V_bar: np.ndarray
    S_bar: np.ndarray
    nu_bar: float
    point_sigma: Optional[np.ndarray] = None

    def __post_init__(self):
        k, n = self.M_bar.shape
        if self.V_bar.shape != (k, k) or self.S_bar.shape != (n, n):
            raise ValueError("posterior blocks have inconsistent shapes")
        if (k - 1) % n:
            raise ValueError("M_bar must have n*p + 1 rows")
        if self.point_sigma is None and not self.nu_bar > n + 1:
            raise ValueError(f"nu_bar must exceed n + 1 = {n + 1}")

    @property
    def n(self) -> int:
        return self.M_bar.shape[1]

    @property
    def k(self) -> int:
        return self.M_bar.shape[0]

    @property
    def p(self) -> int:
        return (self.k - 1) // self.n

    @property
    def is_point(self) -> bool:
        return self.point_sigma is not None

    @classmethod
    def point(cls, params: VarParams) -> "NiwPosterior":
        """Degenerate posterior at known parameters."""
        k, n = params.k, params.n
        return cls(params.coefficient_matrix(), np.eye(k), np.array(params.sigma), float(n + 2), np.array(params.sigma))

    @cached_property
    def _row_factor(self) -> np.ndarray:
        return np.linalg.cholesky(self.V_bar)

    @cached_property
    def _point_factor(self) -> np.ndarray:
        return np.linalg.cholesky(self.point_sigma)

    @cached_property
    def _wishart_factor(self) -> np.ndarray:
        # upper-triangular K with K K' = S_bar^{-1}; kept contiguous because a pickled
        # (contiguous) copy in a worker process would otherwise round differently
        flip = np.linalg.inv(self.S_bar)[::-1, ::-1]
        return np.ascontiguousarray(np.linalg.cholesky(0.5 * (flip + flip.T))[::-1, ::-1])

    def sigma_factors(self, rng: np.random.Generator, size: int) -> np.ndarray:
        """``size`` lower Cholesky factors ``L`` of independent ``Sigma`` draws, shape ``(size, n, n)``.

        Reversed Bartlett decomposition: ``Sigma^{-1} = (K B)(K B)'`` with ``K``
        and ``B`` upper triangular, so ``L = (K B)^{-T}`` is lower triangular.
        """
        n = self.n
        if self.is_point:
            return np.broadcast_to(self._point_factor, (size, n, n)).copy()
        B = np.zeros((size, n, n))
        dof = self.nu_bar - np.arange(n)[::-1]
        B[:, np.arange(n), np.arange(n)] = np.sqrt(rng.chisquare(dof, size=(size, n)))
        iu = np.triu_indices(n, 1)
        B[:, iu[0], iu[1]] = rng.standard_normal((size, len(iu[0])))
        U = self._wishart_factor @ B
        L = np.swapaxes(np.linalg.inv(U), -1, -2)
        return np.tril(L)

    def coefficients(self, L: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        """Coefficient draw given ``Sigma = L L'``: ``M_bar + P Z L'`` with ``P P' = V_bar``."""
        if self.is_point:
            return self.M_bar
        Z = rng.standard_normal(self.M_bar.shape)
        return self.M_bar + self._row_factor @ Z @ L.T

    def params_from(self, L: np.ndarray, coeffs: np.ndarray) -> VarParams:
        sigma = self.point_sigma if self.is_point else L @ L.T
        return VarParams.from_coefficient_matrix(coeffs, 0.5 * (sigma + sigma.T))


def sample_posterior(posterior: NiwPosterior, rng: np.random.Generator) -> VarParams:
    L = posterior.sigma_factors(rng, 1)[0]
    return posterior.params_from(L, posterior.coefficients(L, rng))


def ar_residual_variances(data: np.ndarray, p: int) -> np.ndarray:
    """Residual variance of a univariate AR(p) with intercept, per column."""
    data = np.asarray(data, dtype=float)
    out = np.empty(data.shape[1])
    for v in range(data.shape[1]):
        X, Y = design_matrices(data[:, [v]], p)
        beta, *_ = np.linalg.lstsq(X, Y, rcond=None)
        resid = Y - X @ beta
        out[v] = float(np.sum(resid ** 2)) / max(len(Y) - X.shape[1], 1)
    return out


def _prior(data: np.ndarray, p: int, shrinkage: Minnesota):
    n = data.shape[1]
    k = n * p + 1
    s2 = ar_residual_variances(data, p)
    M0 = np.zeros((k, n))
    M0[1 + np.arange(n), np.arange(n)] = shrinkage.own_lag_mean
    v0 = np.empty(k)
    v0[0] = shrinkage.intercept_sd ** 2
    for j in range(1, p + 1):
        v0[1 + (j - 1) * n : 1 + j * n] = shrinkage.lam ** 2 / (j ** 2 * s2)
    return M0, v0, np.diag(s2), float(n + 2)


def _check_data(data: np.ndarray, p: int) -> np.ndarray:
    data = np.asarray(data, dtype=float)
    if data.ndim != 2:
        raise ValueError("data must be a T x n matrix")
    T, n = data.shape
    if p < 1:
        raise ValueError("p must be >= 1")
    if T <= n * p + 1 + p:
        raise ValueError(f"insufficient observations: T={T} for n={n}, p={p}")
    return data


def fit_posterior(data: np.ndarray, p: int, shrinkage: Minnesota = Minnesota(), plug_in: bool = False) -> NiwPosterior:
    """Natural-conjugate Minnesota posterior, or a point posterior at OLS with ``plug_in=True``."""
    data = _check_data(data, p)
    X, Y = design_matrices(data, p)
    XtX = X.T @ X
    if np.linalg.matrix_rank(XtX) < X.shape[1]:
        raise ValueError("regressor matrix is rank deficient")
    n = data.shape[1]
    if plug_in:
        B = np.linalg.solve(XtX, X.T @ Y)
        resid = Y - X @ B
        sigma = resid.T @ resid / (len(Y) - X.shape[1])
        sigma = 0.5 * (sigma + sigma.T)
        return NiwPosterior(B, np.linalg.inv(XtX), sigma, float(n + 2), sigma)

    M0, v0, S0, nu0 = _prior(data, p, shrinkage)
    prec0 = np.diag(1.0 / v0)
    K = prec0 + XtX
    V_bar = np.linalg.inv(K)
    V_bar = 0.5 * (V_bar + V_bar.T)
    M_bar = np.linalg.solve(K, prec0 @ M0 + X.T @ Y)
    S_bar = S0 + Y.T @ Y + M0.T @ prec0 @ M0 - M_bar.T @ K @ M_bar
    S_bar = 0.5 * (S_bar + S_bar.T)
    return NiwPosterior(M_bar, V_bar, S_bar, nu0 + len(Y))


def log_marginal_likelihood(data: np.ndarray, p: int, shrinkage: Minnesota = Minnesota()) -> float:
    """Closed-form log marginal likelihood of the natural-conjugate VAR."""
    data = _check_data(data, p)
    X, Y = design_matrices(data, p)
    T, n = Y.shape
    M0, v0, S0, nu0 = _prior(data, p, shrinkage)
    post = fit_posterior(data, p, shrinkage)
    _, logdet_K = np.linalg.slogdet(np.diag(1.0 / v0) + X.T @ X)
    _, logdet_S0 = np.linalg.slogdet(S0)
    _, logdet_Sb = np.linalg.slogdet(post.S_bar)
    return float(
        -0.5 * n * T * np.log(np.pi)
        + multigammaln(post.nu_bar / 2, n) - multigammaln(nu0 / 2, n)
        - 0.5 * n * (logdet_K + np.sum(np.log(v0)))
        + 0.5 * nu0 * logdet_S0 - 0.5 * post.nu_bar * logdet_Sb
    )


def select_shrinkage(data: np.ndarray, p: int, grid: Sequence[float] = DEFAULT_GRID) -> Minnesota:
    """Tightness from ``grid`` maximizing the marginal likelihood."""
    scores = [log_marginal_likelihood(data, p, Minnesota(lam)) for lam in grid]
    return Minnesota(grid[int(np.argmax(scores))])
