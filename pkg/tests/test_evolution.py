import numpy as np
import pytest
from conftest import const_h_params

from hjhomog.effective import HbarTable, legendre_transform
from hjhomog.environment import EnvParams, EnvSampler, build_environment
from hjhomog.evolution import (
    InitialDatum,
    comparison_points,
    hopf_lax_field,
    hopf_lax_solve,
    homog_error,
    solve_ueps,
)
from hjhomog.grid import GridDomain

PERIODIC1 = EnvParams(d=1, kind="periodic", V_max=1.0, Lambda=4.0, seed=5)


@pytest.fixture(scope="module")
def lbar1():
    axes = (np.linspace(-3, 3, 121),)
    return legendre_transform(HbarTable.from_function(axes, lambda g: g[..., 0] ** 2))


@pytest.mark.parametrize("d, p0", [(1, [0.7]), (2, [0.5, -0.3])])
def test_affine_exact(d, p0):
    env = build_environment(EnvParams(d=d))
    g = InitialDatum.affine(p0, 0.2)
    T = 0.5
    field = solve_ueps(env, g, 0.5, T, h=0.125 if d == 2 else 0.0625, n_slices=5)
    pts = comparison_points(d, T, 0.125)
    for k, t in enumerate(field.times):
        exact = pts @ np.asarray(p0) + 0.2 - np.dot(p0, p0) * t
        np.testing.assert_allclose(field.sample(pts, k), exact, atol=1e-10)


def test_zero_datum_const_h():
    env = build_environment(const_h_params(1, seed=3))
    field = solve_ueps(env, InitialDatum.zero(1), 0.2, 1.0)
    assert np.all(field.values == 0.0)


def test_self_refinement_periodic():
    env = build_environment(PERIODIC1)
    g = InitialDatum.cos_bump(1)
    h = 0.1 / 8
    coarse = solve_ueps(env, g, 0.1, 1.0, h=h)
    fine = solve_ueps(env, g, 0.1, 1.0, h=h / 2, cfl=0.45)
    assert fine.dt <= coarse.dt / 4 * 1.05
    pts = comparison_points(1, 1.0, 0.025)
    for k in range(len(coarse.times)):
        assert np.max(np.abs(coarse.sample(pts, k) - fine.sample(pts, k))) <= 5 * h


def test_initial_slice_exact(bumps2):
    g = InitialDatum.cos_bump(2)
    field = solve_ueps(bumps2, g, 0.5, 0.25, h=0.125, n_slices=2)
    np.testing.assert_array_equal(field.values[0], g(field.domain.coords()))


def test_comparison_in_time():
    env = build_environment(PERIODIC1)
    lo = solve_ueps(env, InitialDatum.cos_bump(1, height=1.0), 0.2, 1.0)
    hi = solve_ueps(env, InitialDatum.cos_bump(1, height=1.5), 0.2, 1.0)
    pts = comparison_points(1, 1.0, 0.025)
    for k in range(len(lo.times)):
        assert np.all(lo.sample(pts, k) <= hi.sample(pts, k) + 1e-6)


def test_lipschitz_and_sup_bounds():
    env = build_environment(PERIODIC1)
    g = InitialDatum.cos_bump(1)
    field = solve_ueps(env, g, 0.1, 1.0)
    L = field.lipschitz_estimate()
    # regression guard, frozen from a reference run (1.42)
    assert 0 < L <= 1.6
    assert np.max(np.abs(field.values)) <= g.sup + 2 * L * 1.0


def test_solver_preconditions(eikonal1):
    g = InitialDatum.cos_bump(1)
    with pytest.raises(ValueError, match="eps"):
        solve_ueps(eikonal1, g, 0.0, 1.0)
    with pytest.raises(ValueError, match="fast variable"):
        solve_ueps(eikonal1, g, 0.1, 1.0, GridDomain.centered(20.0, 0.05, 1))
    with pytest.raises(ValueError, match="margin"):
        solve_ueps(eikonal1, g, 0.1, 1.0, GridDomain.centered(2.0, 0.025, 1))
    with pytest.raises(ValueError, match="dimensions"):
        solve_ueps(eikonal1, InitialDatum.cos_bump(2), 0.1, 1.0)


def test_hopf_lax_zero(lbar1):
    for x, t in [(0.0, 1.0), (1.3, 0.4)]:
        assert hopf_lax_solve(InitialDatum.zero(1), lbar1, x, t) == pytest.approx(0.0, abs=1e-12)


def test_hopf_lax_affine(lbar1):
    g = InitialDatum.affine([0.8])
    for x, t in [(0.0, 1.0), (-0.5, 0.5)]:
        assert hopf_lax_solve(g, lbar1, x, t) == pytest.approx(0.8 * x - 0.64 * t, abs=2e-3)


@pytest.mark.parametrize("sign, expected", [(1.0, 0.0), (-1.0, -1.0)])
def test_hopf_lax_abs_value(lbar1, sign, expected):
    # min over y of sign |y| + y^2 / 4
    assert hopf_lax_solve(InitialDatum.abs_value(1, sign), lbar1, 0.0, 1.0) == pytest.approx(
        expected, abs=1e-3)


def test_hopf_lax_brute_force(lbar1):
    g = InitialDatum.cos_bump(1)
    ys = np.linspace(-8, 8, 160001)
    gy = g(ys)
    for x in (-1.0, -0.3, 0.0, 0.45, 1.2):
        for t in (0.2, 0.7, 1.0):
            brute = np.min(gy + (x - ys) ** 2 / (4 * t))
            assert hopf_lax_solve(g, lbar1, x, t) == pytest.approx(brute, abs=1e-3)


def test_hopf_lax_field_initial_time(lbar1):
    g = InitialDatum.cos_bump(1)
    pts = np.array([[-0.5], [0.0], [0.5]])
    out = hopf_lax_field(g, lbar1, pts, [0.0, 0.5])
    np.testing.assert_array_equal(out[0], g(pts))


def test_hopf_lax_edge_of_range():
    lbar = legendre_transform(HbarTable.from_function((np.linspace(-0.5, 0.5, 11),),
                                                      lambda g: g[..., 0] ** 2))
    with pytest.raises(ValueError, match="edge"):
        hopf_lax_solve(InitialDatum.affine([3.0]), lbar, 0.0, 1.0)
    with pytest.raises(ValueError):
        hopf_lax_solve(InitialDatum.zero(1), lbar, 0.0, 0.0)


def test_homog_error_deterministic(lbar1):
    eps = [0.2, 0.1]
    curve = homog_error(EnvSampler(EnvParams(d=1)), InitialDatum.cos_bump(1), eps, 1.0, lbar1, 1,
                        n_bootstrap=10)
    bound = 5 * 0.125 * np.asarray(eps) + 0.01
    assert np.all(curve.errors <= bound[None, :])


def test_homog_error_affine_independent_of_eps(lbar1):
    curve = homog_error(EnvSampler(EnvParams(d=1)), InitialDatum.affine([0.5]), [0.2, 0.1], 0.5,
                        lbar1, 1, n_bootstrap=10)
    assert np.all(curve.errors <= 2e-3)
