import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from signsvar import DgpSpec, RestrictionSet, VarParams, companion_spectral_radius, compute_irf, simulate_dgp
from signsvar.var import companion_matrix, simulate_path

from conftest import random_params


def path_difference_irf(params, impact, m, H):
    """Brute force: simulate with a unit shock at t=0 and without, then difference."""
    n = params.n
    out = np.empty((n, m, H + 1))
    base = simulate_path(params, impact, np.zeros((H + 1, n)))
    for j in range(m):
        shocks = np.zeros((H + 1, n))
        shocks[0, j] = 1.0
        out[:, j, :] = (simulate_path(params, impact, shocks) - base).T
    return out


def test_zero_dynamics():
    params = VarParams(np.zeros(2), np.zeros((1, 2, 2)), np.eye(2))
    f = compute_irf(params, np.eye(2), 2, 2).values
    assert np.array_equal(f[:, :, 0], np.eye(2))
    assert np.array_equal(f[:, :, 1:], np.zeros((2, 2, 2)))


def test_diagonal_geometric_decay():
    params = VarParams(np.zeros(2), 0.5 * np.eye(2)[None], np.eye(2))
    f = compute_irf(params, np.eye(2), 2, 2).values
    for h in range(3):
        assert np.allclose(np.diag(f[:, :, h]), 0.5 ** h, atol=0, rtol=1e-15)


@given(st.integers(0, 10_000), st.integers(2, 4), st.integers(1, 2), st.integers(0, 5))
@settings(max_examples=40, deadline=None)
def test_matches_path_difference(seed, n, p, H):
    rng = np.random.default_rng(seed)
    params = random_params(rng, n, p)
    impact = rng.normal(size=(n, n))
    m = int(rng.integers(1, n + 1))
    assert np.abs(compute_irf(params, impact, m, H).values - path_difference_irf(params, impact, m, H)).max() < 1e-10


def test_impact_copied_exactly_and_linear(rng):
    params = random_params(rng, 4, 2)
    impact = rng.normal(size=(4, 4))
    f = compute_irf(params, impact, 3, 6).values
    assert np.array_equal(f[:, :, 0], impact[:, :3])
    g = compute_irf(params, 2.5 * impact, 3, 6).values
    assert np.allclose(g, 2.5 * f, rtol=1e-12, atol=0)


def test_irf_dimension_mismatch(rng):
    params = random_params(rng, 3, 1)
    with pytest.raises(ValueError):
        compute_irf(params, np.eye(4), 2, 3)


def test_spectral_radius_cases(rng):
    assert companion_spectral_radius(VarParams(np.zeros(2), 0.5 * np.eye(2)[None], np.eye(2))) == pytest.approx(0.5)
    assert companion_spectral_radius(VarParams(np.zeros(3), np.zeros((2, 3, 3)), np.eye(3))) == 0.0
    params = random_params(rng, 3, 2, scale=1.0)
    F = np.zeros((6, 6))
    F[:3, :3], F[:3, 3:] = params.lag_coeffs
    F[3:, :3] = np.eye(3)
    assert np.array_equal(companion_matrix(params), F)
    assert companion_spectral_radius(params) == pytest.approx(np.abs(np.linalg.eigvals(F)).max(), abs=1e-12)


def test_var_params_validation():
    with pytest.raises(ValueError):
        VarParams(np.zeros(2), np.zeros((1, 2, 2)), np.array([[1.0, 0.5], [0.4, 1.0]]))
    with pytest.raises(ValueError):
        VarParams(np.zeros(2), np.zeros((1, 2, 2)), np.array([[1.0, 2.0], [2.0, 1.0]]))


def test_coefficient_matrix_round_trip(rng):
    params = random_params(rng, 3, 2)
    back = VarParams.from_coefficient_matrix(params.coefficient_matrix(), params.sigma)
    assert back == params


def test_simulate_dgp_shape_and_stability():
    spec = DgpSpec(10, 5, 5, 200)
    params, b0, data = simulate_dgp(spec, np.random.default_rng(1))
    assert data.shape == (200, 10)
    assert companion_spectral_radius(params) < spec.stability_bound
    assert np.allclose(params.sigma, b0 @ b0.T, atol=1e-12)


def test_simulate_dgp_forces_signs():
    rset = RestrictionSet.from_sign_matrix(np.eye(4, 3, dtype=int))
    for seed in range(5):
        _, b0, _ = simulate_dgp(DgpSpec(4, 3, 2, 50, restrictions=rset), np.random.default_rng(seed))
        assert (np.diag(b0[:3, :3]) > 0).all()


def test_simulate_dgp_deterministic():
    spec = DgpSpec(4, 2, 2, 60)
    a = simulate_dgp(spec, np.random.default_rng(9))
    b = simulate_dgp(spec, np.random.default_rng(9))
    assert a[0] == b[0]
    assert np.array_equal(a[1], b[1]) and np.array_equal(a[2], b[2])


def test_dgp_spec_needs_observations():
    with pytest.raises(ValueError, match="insufficient observations"):
        DgpSpec(10, 5, 5, 10)


@given(st.integers(0, 10_000))
@settings(max_examples=15, deadline=None)
def test_simulated_systems_are_stable(seed):
    spec = DgpSpec(5, 2, 3, 40, stability_bound=0.95)
    params, _, _ = simulate_dgp(spec, np.random.default_rng(seed))
    assert companion_spectral_radius(params) < 0.95
