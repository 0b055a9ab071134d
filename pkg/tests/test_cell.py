import numpy as np
import pytest
from conftest import const_h_params

from hjhomog.cell import corrector_error, solve_cell
from hjhomog.environment import EnvParams, EnvSampler, build_environment
from hjhomog.grid import INTERIOR

LAMBDA = 4.0


def _interior(sol):
    return sol.dv[sol.v.domain.mask == INTERIOR]


@pytest.mark.parametrize("sigma_kind, sigma0", [("zero", 0.0), ("constant_isotropic", 1.0)])
def test_deterministic_constant_solution(sigma_kind, sigma0):
    env = build_environment(EnvParams(d=2, sigma_kind=sigma_kind, sigma0=sigma0))
    sol = solve_cell(env, [1.0, 0.0], 0.1)
    np.testing.assert_allclose(sol.dv, -1.0, atol=1e-6)
    assert sol.dv0 == pytest.approx(-1.0, abs=1e-6)


def test_zero_slope_const_h():
    env = build_environment(const_h_params(2, seed=4))
    sol = solve_cell(env, [0.0, 0.0], 0.2)
    np.testing.assert_allclose(sol.dv, 0.0, atol=1e-9)


@pytest.mark.parametrize("p", [[1.0, 0.0], [0.5, -0.5]])
def test_a_priori_bounds(const_h2, p):
    env = const_h2(0)
    sol = solve_cell(env, p, 0.2)
    pq = float(np.linalg.norm(p)) ** env.params.q
    dv = _interior(sol)
    assert np.all(dv <= -pq / LAMBDA + LAMBDA + 1e-9)
    assert np.all(dv >= -(LAMBDA * pq + LAMBDA) - 1e-9)
    # V = 0 gives -delta v >= a_min |p|^q
    a_min = env.params.a0 * (1 - env.params.a_modulation)
    assert np.all(-dv >= a_min * pq - 1e-4)
    assert np.isfinite(sol.lipschitz)


def test_bounds_random_potential(bumps2):
    sol = solve_cell(bumps2, [1.0, 0.0], 0.25)
    dv = _interior(sol)
    assert np.all(dv <= -1.0 / LAMBDA + LAMBDA + 1e-9)
    assert np.all(dv >= -(LAMBDA + LAMBDA)) and np.isfinite(sol.residual)


def test_slope_lipschitz(const_h2):
    env = const_h2(1)
    p, pt = np.array([1.0, 0.0]), np.array([1.1, 0.1])
    a, b = solve_cell(env, p, 0.2), solve_cell(env, pt, 0.2)
    grad = max(a.lipschitz, b.lipschitz) + float(np.linalg.norm(pt))
    C = env.params.q * LAMBDA * grad ** (env.params.q - 1)
    assert abs(a.dv0 - b.dv0) <= C * np.linalg.norm(p - pt)


def test_two_deltas_recorded(const_h2):
    env = const_h2(2)
    a = solve_cell(env, [1.0, 0.0], 0.2)
    b = solve_cell(env, [1.0, 0.0], 0.1, c_init=a.boundary_values[-1])
    assert np.isfinite(a.dv0 - b.dv0)
    assert len(b.boundary_values) >= 2
    assert b.boundary_values[0] == a.boundary_values[-1]


def test_boundary_passes_self_consistent(const_h2):
    sol = solve_cell(const_h2(3), [1.0, 0.0], 0.2, pass_tol=1e-6, max_passes=20)
    med = float(np.median(_interior(sol)))
    assert med == pytest.approx(sol.boundary_values[-1], abs=1e-6)


@pytest.mark.parametrize("delta", [0.0, -0.1, 1.5])
def test_delta_range(eikonal2, delta):
    with pytest.raises(ValueError):
        solve_cell(eikonal2, [1.0, 0.0], delta)


def test_memory_cap_warns(eikonal1):
    with pytest.warns(UserWarning, match="capped"):
        solve_cell(eikonal1, [1.0], 1e-7, h=0.25)


def test_corrector_error_deterministic():
    curve = corrector_error(EnvSampler(EnvParams(d=2)), [1.0, 0.0], [0.2, 0.1], 1.0, 2,
                            n_bootstrap=20)
    assert np.all(np.asarray(curve.errors) <= 1e-6)
