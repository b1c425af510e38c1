"""Reduced-form VAR: parameters, impulse responses and the simulation DGP."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Optional

import numpy as np

if TYPE_CHECKING:
    from .restrictions import RestrictionSet

SYMMETRY_TOL = 1e-12
BURN_IN = 100


class InfeasibleDGPError(RuntimeError):
    """Raised when no restriction-consistent system is found within the redraw cap."""


@dataclass(frozen=True, eq=False)
class VarParams:
    """VAR(p) with intercept: ``y_t = a0 + A_1 y_{t-1} + ... + A_p y_{t-p} + u_t``.

    ``lag_coeffs`` is stored as a ``(p, n, n)`` array so ``lag_coeffs[s-1]`` is
    ``A_s``.
    """

    intercept: np.ndarray
    lag_coeffs: np.ndarray
    sigma: np.ndarray

    def __post_init__(self):
        a0 = np.asarray(self.intercept, dtype=float).reshape(-1)
        lags = np.asarray(self.lag_coeffs, dtype=float)
        if lags.ndim == 2:
            lags = lags[None]
        sigma = np.asarray(self.sigma, dtype=float)
        n = a0.shape[0]
        if n < 1:
            raise ValueError("intercept must be non-empty")
        if lags.ndim != 3 or lags.shape[1:] != (n, n) or lags.shape[0] < 1:
            raise ValueError(f"lag_coeffs must have shape (p, {n}, {n}), got {lags.shape}")
        if sigma.shape != (n, n):
            raise ValueError(f"sigma must be {n}x{n}, got {sigma.shape}")
        if np.max(np.abs(sigma - sigma.T)) > SYMMETRY_TOL:
            raise ValueError("sigma is not symmetric")
        try:
            np.linalg.cholesky(sigma)
        except np.linalg.LinAlgError as exc:
            raise ValueError("sigma is not positive definite") from exc
        for name, value in (("intercept", a0), ("lag_coeffs", lags), ("sigma", sigma)):
            value.setflags(write=False)
            object.__setattr__(self, name, value)

    @property
    def n(self) -> int:
        return self.intercept.shape[0]

    @property
    def p(self) -> int:
        return self.lag_coeffs.shape[0]

    @property
    def k(self) -> int:
        return self.n * self.p + 1

    def coefficient_matrix(self) -> np.ndarray:
        """Stacked ``(k, n)`` matrix ``(a0, A_1, ..., A_p)'``."""
        return np.vstack([self.intercept[None, :]] + [a.T for a in self.lag_coeffs])

    @classmethod
    def from_coefficient_matrix(cls, coeffs: np.ndarray, sigma: np.ndarray) -> "VarParams":
        coeffs = np.asarray(coeffs, dtype=float)
        k, n = coeffs.shape
        if (k - 1) % n or k < n + 1:
            raise ValueError(f"coefficient matrix of shape {coeffs.shape} is not (np+1, n)")
        p = (k - 1) // n
        lags = coeffs[1:].reshape(p, n, n).transpose(0, 2, 1)
        return cls(coeffs[0], lags, sigma)

    def __eq__(self, other):
        if not isinstance(other, VarParams):
            return NotImplemented
        return (
            np.array_equal(self.intercept, other.intercept)
            and np.array_equal(self.lag_coeffs, other.lag_coeffs)
            and np.array_equal(self.sigma, other.sigma)
        )

    __hash__ = None


@dataclass(frozen=True)
class IrfTensor:
    """Impulse responses ``values[i, j, h]``: variable i, shock j, horizon h."""

    values: np.ndarray

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def m(self) -> int:
        return self.values.shape[1]

    @property
    def H(self) -> int:
        return self.values.shape[2] - 1


@dataclass(frozen=True)
class DgpSpec:
    n: int
    m: int
    p: int
    T_obs: int
    stability_bound: float = 0.999
    restrictions: Optional["RestrictionSet"] = None
    max_redraws: int = 10_000

    def __post_init__(self):
        if min(self.n, self.m, self.p, self.T_obs) < 1:
            raise ValueError("n, m, p and T_obs must be positive")
        if self.m > self.n:
            raise ValueError("m cannot exceed n")
        if not 0.0 < self.stability_bound <= 1.0:
            raise ValueError("stability_bound must lie in (0, 1]")
        if self.T_obs <= self.n * self.p + 1:
            raise ValueError(
                f"insufficient observations: T_obs={self.T_obs} must exceed n*p+1={self.n * self.p + 1}"
            )
        if self.restrictions is not None:
            if self.restrictions.n != self.n or self.restrictions.m != self.m:
                raise ValueError("restriction set dimensions do not match (n, m)")


def ma_coefficients(lag_coeffs: np.ndarray, H: int) -> np.ndarray:
    """MA matrices ``Theta_0..Theta_H`` via ``Theta_h = sum_s A_s Theta_{h-s}``."""
    p, n, _ = lag_coeffs.shape
    theta = np.zeros((H + 1, n, n))
    theta[0] = np.eye(n)
    for h in range(1, H + 1):
        acc = np.zeros((n, n))
        for s in range(1, min(h, p) + 1):
            acc += lag_coeffs[s - 1] @ theta[h - s]
        theta[h] = acc
    return theta


def compute_irf(params: VarParams, impact: np.ndarray, m: int, H: int) -> IrfTensor:
    """Responses of all variables to the first ``m`` columns of ``impact`` up to horizon ``H``."""
    impact = np.asarray(impact, dtype=float)
    n = params.n
    if impact.shape != (n, n):
        raise ValueError(f"impact must be {n}x{n} to match params, got {impact.shape}")
    if not 1 <= m <= n:
        raise ValueError(f"m must lie in [1, {n}]")
    if H < 0:
        raise ValueError("H must be non-negative")
    cols = impact[:, :m]
    values = np.empty((n, m, H + 1))
    values[:, :, 0] = cols
    if H:
        theta = ma_coefficients(params.lag_coeffs, H)
        values[:, :, 1:] = np.einsum("hik,kj->ijh", theta[1:], cols)
    return IrfTensor(values)


def companion_matrix(params: VarParams) -> np.ndarray:
    n, p = params.n, params.p
    F = np.zeros((n * p, n * p))
    F[:n, :] = np.hstack(list(params.lag_coeffs))
    if p > 1:
        F[n:, :-n] = np.eye(n * (p - 1))
    return F


def companion_spectral_radius(params: VarParams) -> float:
    return float(np.max(np.abs(np.linalg.eigvals(companion_matrix(params)))))


def simulate_path(params: VarParams, impact: np.ndarray, shocks: np.ndarray, y0: Optional[np.ndarray] = None) -> np.ndarray:
    """Iterate the VAR forward from presample ``y0`` (``(p, n)``, oldest first)."""
    n, p = params.n, params.p
    T = shocks.shape[0]
    y = np.zeros((p + T, n))
    if y0 is not None:
        y[:p] = y0
    u = shocks @ np.asarray(impact).T
    for t in range(T):
        acc = params.intercept + u[t]
        for s in range(p):
            acc = acc + params.lag_coeffs[s] @ y[p + t - 1 - s]
        y[p + t] = acc
    return y[p:]


def _draw_lags(n: int, p: int, rng: np.random.Generator) -> np.ndarray:
    lags = np.empty((p, n, n))
    a1 = rng.uniform(-0.2, 0.2, size=(n, n))
    a1[np.diag_indices(n)] = rng.uniform(0.0, 0.5, size=n)
    lags[0] = a1
    for j in range(2, p + 1):
        lags[j - 1] = rng.normal(0.0, 0.1 / j, size=(n, n))
    return lags


def _draw_impact(n: int, rng: np.random.Generator) -> np.ndarray:
    b0 = rng.normal(0.0, 1.0, size=(n, n))
    b0[np.diag_indices(n)] = rng.uniform(0.5, 1.5, size=n)
    return b0


def _match_impact(b0: np.ndarray, rset: "RestrictionSet") -> bool:
    """Flip signs per impact sign records; report whether every impact restriction holds."""
    from .restrictions import check_cross_shock, impact_violations

    for r in rset.records:
        if r.horizon == 0 and r.is_sign:
            b0[r.i, r.j] = r.sign * abs(b0[r.i, r.j])
    return impact_violations(rset, b0) == 0 and check_cross_shock(rset, b0)


def simulate_dgp(spec: DgpSpec, rng: np.random.Generator) -> tuple[VarParams, np.ndarray, np.ndarray]:
    """Draw a random stable VAR and impact matrix, then simulate ``T_obs`` observations.

    Returns ``(params, true_impact, data)`` with ``params.sigma = B0 B0'``.
    """
    n, p = spec.n, spec.p
    intercept = rng.uniform(-1.0, 1.0, size=n)

    for _ in range(spec.max_redraws):
        lags = _draw_lags(n, p, rng)
        probe = VarParams(intercept, lags, np.eye(n))
        if companion_spectral_radius(probe) < spec.stability_bound:
            break
    else:
        raise InfeasibleDGPError(
            f"no stable lag draw (radius < {spec.stability_bound}) within {spec.max_redraws} attempts"
        )

    for _ in range(spec.max_redraws):
        b0 = _draw_impact(n, rng)
        if spec.restrictions is None or _match_impact(b0, spec.restrictions):
            break
    else:
        raise InfeasibleDGPError(
            f"no impact matrix satisfying the restriction set within {spec.max_redraws} attempts"
        )

    sigma = b0 @ b0.T
    sigma = 0.5 * (sigma + sigma.T)
    params = VarParams(intercept, lags, sigma)
    shocks = rng.standard_normal((BURN_IN + spec.T_obs, n))
    path = simulate_path(params, b0, shocks)
    return params, b0, path[BURN_IN:]
