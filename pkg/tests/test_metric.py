import numpy as np
import pytest
from scipy.integrate import solve_ivp

from hjhomog.environment import EnvParams, build_environment
from hjhomog.grid import OUTER, GridDomain
from hjhomog.metric import (
    ContainmentError,
    SourceOutsideDomain,
    dpp_defect,
    dpp_defects,
    hausdorff,
    localization_gap,
    plane_passage,
    softmin_subsolution,
    solve_metric,
    sublevel_front,
)
from hjhomog.pde_core import SchemeParams


def _dist_ball(sol):
    r = np.linalg.norm(sol.domain.coords(), axis=-1)
    return np.maximum(r - 1.0, 0.0)


@pytest.mark.parametrize("mu", [1.0, 4.0])
def test_eikonal_exact(eikonal2, mu):
    h = 0.05
    sol = solve_metric(eikonal2, mu, np.zeros(2), GridDomain.centered(4.0, h, 2))
    err = np.abs(sol.m.values - np.sqrt(mu) * _dist_ball(sol))
    assert err[sol.domain.mask != OUTER].max() <= 5 * h


def test_solution_invariants(bumps2):
    sol = solve_metric(bumps2, 1.0, [0.5, -0.5], GridDomain.centered(4.0, 0.1, 2))
    assert np.all(sol.m.values[sol.dirichlet] == 0.0)
    assert np.all(sol.m.values >= 0.0)
    reg = sol.trusted & ~sol.dirichlet
    m, dist = sol.m.values[reg], sol.dist[reg]
    assert np.all(sol.l_hat * dist <= m + 1e-9)
    assert np.all(m <= sol.L_hat * dist + 5 * 0.1)
    assert not sol.flagged and np.isfinite(sol.a_mu) and sol.a_mu > 1


def _radial_oracle(r_eval):
    # w = m' solves w' = 2 (w^2 - 1) - w / r; the maximal branch tends to 1 + 1/(4r)
    r_far = 60.0
    sol = solve_ivp(lambda r, w: 2.0 * (w * w - 1.0) - w / r, (r_far, 1.0), [1.0 + 0.25 / r_far],
                    dense_output=True, rtol=1e-10, atol=1e-12)
    m = solve_ivp(lambda r, y: sol.sol(r), (1.0, float(np.max(r_eval))), [0.0],
                  dense_output=True, rtol=1e-10, atol=1e-12)
    return m.sol(r_eval)[0]


def test_viscous_radial_solution():
    env = build_environment(EnvParams(d=2, sigma_kind="constant_isotropic", sigma0=1.0))
    h = 0.05
    sol = solve_metric(env, 1.0, np.zeros(2), GridDomain.centered(8.0, h, 2))
    r = np.linspace(1.0, 4.0, 31)
    pts = np.stack([r, np.zeros_like(r)], axis=1)
    np.testing.assert_array_less(np.abs(sol.sample(pts) - _radial_oracle(r)), 5 * h)


def test_source_outside_domain(eikonal2):
    with pytest.raises(SourceOutsideDomain):
        solve_metric(eikonal2, 1.0, [3.5, 0.0], GridDomain.centered(4.0, 0.1, 2))


def test_small_mu_warns(eikonal2):
    with pytest.warns(UserWarning, match="below"):
        solve_metric(eikonal2, 0.1, np.zeros(2), GridDomain.centered(3.0, 0.2, 2))


def test_front_at_zero_is_source(eikonal2):
    sol = solve_metric(eikonal2, 1.0, np.zeros(2), GridDomain.centered(3.0, 0.1, 2))
    front = sublevel_front(sol, 0.0)
    np.testing.assert_array_equal(front.region, sol.dirichlet)
    assert front.connected


def test_front_eikonal_ball(eikonal2):
    h = 0.05
    sol = solve_metric(eikonal2, 1.0, np.zeros(2), GridDomain.centered(4.0, h, 2))
    front = sublevel_front(sol, 1.0)
    ball = np.linalg.norm(sol.domain.coords(), axis=-1) <= 2.0
    assert hausdorff(front.region, ball, h) <= h + 1e-12


def test_front_motion_random(bumps2):
    h = 0.1
    sol = solve_metric(bumps2, 1.0, np.zeros(2), GridDomain.centered(6.0, h, 2))
    levels = np.linspace(0.0, 3.0, 7)
    fronts = [sublevel_front(sol, t) for t in levels]
    assert all(f.connected for f in fronts)
    for i in range(len(levels)):
        for j in range(i + 1, len(levels)):
            dh = hausdorff(fronts[i].region, fronts[j].region, h)
            assert dh <= abs(levels[j] - levels[i]) / sol.l_hat + 2 + 3 * h


def test_localization_eikonal(eikonal2):
    h = 0.1
    U = GridDomain.centered(4.0, h, 2)
    g = localization_gap(eikonal2, 1.0, U, [0.5, 1.0, 1.5])
    assert np.all(np.abs(g.gap) <= 2 * g.tol * (8.0 / h))


def test_localization_random_nonnegative(bumps2):
    g = localization_gap(bumps2, 1.0, GridDomain.centered(5.0, 0.1, 2), np.linspace(0, 2.5, 6))
    assert g.min_gap >= -g.tol
    assert np.all(np.diff(g.gap) >= -g.tol)


def test_localization_containment(bumps2):
    with pytest.raises(ContainmentError) as exc:
        localization_gap(bumps2, 1.0, GridDomain.centered(4.0, 0.1, 2), [3.5])
    assert exc.value.cells


def test_dpp_eikonal(eikonal2):
    h = 0.1
    dom = GridDomain.centered(5.0, h, 2)
    sol = solve_metric(eikonal2, 1.0, np.zeros(2), dom)
    for y in ([3.0, 0.0], [2.0, 2.0], [-1.0, 2.9]):
        assert dpp_defect(eikonal2, 1.0, y, 1.0, dom, sol=sol) <= 10 * h


def test_dpp_inside_front(eikonal2):
    dom = GridDomain.centered(4.0, 0.1, 2)
    with pytest.raises(ValueError, match="inside the front"):
        dpp_defect(eikonal2, 1.0, [0.5, 0.0], 1.0, dom)


def test_dpp_random_bound(bumps2):
    h = 0.1
    sol = solve_metric(bumps2, 1.0, np.zeros(2), GridDomain.centered(6.0, h, 2))
    ys = np.array([[3.5, 0.0], [0.0, -3.5], [2.5, 2.5]])
    defects, second = dpp_defects(sol, bumps2, ys, 1.5)
    assert np.all(defects <= 8 * sol.L_hat + 10 * h)
    single = dpp_defect(bumps2, 1.0, ys[0], 1.5, sol.domain, sol=sol)
    assert single == pytest.approx(defects[0], abs=1e-12)
    # set lower bound m(y, K) >= l (dist(y, K) - 2) - 5h
    reg = second.trusted & ~second.dirichlet
    assert np.all(second.m.values[reg] >= sol.l_hat * (second.dist[reg] - 2.0) - 5 * h)


def test_softmin_single_source(bumps2):
    sol = solve_metric(bumps2, 1.0, np.zeros(2), GridDomain.centered(4.0, 0.1, 2))
    Z, rep = softmin_subsolution(bumps2, [sol], 0.1)
    np.testing.assert_allclose(Z.values, sol.m.values, rtol=0, atol=1e-12)
    assert rep.max_operator <= 1.0 + SchemeParams().tol(1.0)


def test_softmin_identical_fields(bumps2):
    sol = solve_metric(bumps2, 1.0, np.zeros(2), GridDomain.centered(4.0, 0.1, 2))
    Z, _ = softmin_subsolution(bumps2, [sol, sol], 0.2)
    np.testing.assert_allclose(Z.values, sol.m.values - np.log(2.0) / 0.2, rtol=0, atol=1e-12)


def test_softmin_huge_values_do_not_overflow(bumps2):
    sol = solve_metric(bumps2, 1.0, np.zeros(2), GridDomain.centered(4.0, 0.1, 2))
    Z, _ = softmin_subsolution(bumps2, [sol], 500.0)
    assert np.all(np.isfinite(Z.values))


def test_softmin_rejects_bad_input(bumps2):
    with pytest.raises(ValueError):
        softmin_subsolution(bumps2, [], 0.1)


@pytest.mark.parametrize("mu, expected", [(1.0, 2.0), (4.0, 4.0)])
def test_plane_passage_eikonal(eikonal2, mu, expected):
    h = 0.05
    dom = GridDomain.centered(7.0, h, 2)
    assert plane_passage(eikonal2, mu, 3.0, 6.0, dom) == pytest.approx(expected, abs=5 * h)


def test_plane_passage_below_point_value(bumps2):
    dom = GridDomain.centered(7.0, 0.1, 2)
    sol = solve_metric(bumps2, 1.0, np.zeros(2), dom)
    t = 3.0
    R = sol.L_hat / sol.l_hat * t + 0.5
    val = plane_passage(bumps2, 1.0, t, R, dom, sol=sol)
    assert val <= sol.value([0.0, t]) + 1e-12


def test_plane_passage_radius_precondition(bumps2):
    dom = GridDomain.centered(6.0, 0.1, 2)
    with pytest.raises(ValueError, match="truncation radius"):
        plane_passage(bumps2, 1.0, 3.0, 1.0, dom)
