import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad
from scipy.optimize import brentq

from conftest import ball_hull_gap

from hjhomog.convex import (
    ConvexBody2D,
    level_set_body,
    strict_convexity_flatness,
    straszewicz_gap,
    support_function,
)
from hjhomog.effective import (
    HbarTable,
    conjugate_back,
    estimate_hbar,
    estimate_mbar,
    legendre_transform,
    softmin_passage_stats,
)
from hjhomog.environment import EnvParams, EnvSampler
from hjhomog.experiments import random_polygon, segment_gap

DET2 = EnvSampler(EnvParams(d=2))
DET1 = EnvSampler(EnvParams(d=1))
PERIODIC1 = EnvSampler(EnvParams(d=1, kind="periodic", V_max=1.0, Lambda=4.0, seed=5))


def _periodic_speed(mu):
    # V(y) = (1 + cos 2 pi y)/2 up to a phase, so mbar_mu = int_0^1 sqrt(mu + V)
    return quad(lambda y: math.sqrt(mu + 0.5 * (1.0 + math.cos(2 * math.pi * y))), 0.0, 1.0,
                epsabs=1e-12)[0]


def _periodic_hbar(p):
    return brentq(lambda mu: _periodic_speed(mu) - abs(p), 1e-12, 10.0, xtol=1e-12)


@pytest.mark.parametrize("mu", [1.0, 4.0])
def test_mbar_deterministic(mu):
    h = 0.1
    est = estimate_mbar(DET2, mu, [1.0, 0.0], [5.0, 10.0], 1, h=h)
    assert est.estimate == pytest.approx(math.sqrt(mu), abs=math.sqrt(mu) * (0.1 + 5 * h / 10))
    assert est.subadditive_bound >= est.estimate - 1e-9


def test_mbar_periodic_quadrature():
    est = estimate_mbar(PERIODIC1, 1.0, [1.0], [10.0, 20.0], 1, h=0.05)
    assert est.estimate == pytest.approx(_periodic_speed(1.0), abs=0.03)


def test_mbar_rejects_bad_radii():
    with pytest.raises(ValueError):
        estimate_mbar(DET2, 1.0, [1.0, 0.0], [5.0, 3.0], 1)


def test_hbar_zero_momentum():
    assert estimate_hbar(DET2, [0.0, 0.0], 0.01).value == 0.0


def test_hbar_deterministic():
    est = estimate_hbar(DET2, [1.0, 0.0], 0.005, R=10.0, h=0.1, n_directions=32)
    assert est.lo <= est.hi and est.halfwidth <= 0.005
    assert est.value == pytest.approx(1.0, abs=0.1)


@pytest.mark.parametrize("p", [1.0, 1.5])
def test_hbar_periodic_oracle(p):
    est = estimate_hbar(PERIODIC1, [p], 0.005, R=20.0, h=0.05)
    assert est.value == pytest.approx(_periodic_hbar(p), abs=0.05)


def test_hbar_flat_range_saturates():
    # |p| below the flat-range edge 2/pi gives Hbar at the minimum level
    est = estimate_hbar(PERIODIC1, [0.3], 0.01, R=20.0, h=0.05, mu_min=0.05)
    assert est.saturated


def test_hbar_above_mu_max():
    with pytest.raises(ValueError, match="exceeds mu_max"):
        estimate_hbar(DET1, [3.0], 0.01, R=10.0, h=0.1, mu_max=4.0)


@pytest.mark.parametrize("x, expected", [
    ([1.0, 0.0], 1.0), ([0.0, 1.0], 1.0), ([1.0, 1.0], 2.0), ([-1.0, -1.0], 0.0),
])
def test_support_function_square(x, expected):
    K = ConvexBody2D.from_points([[0, 0], [1, 0], [1, 1], [0, 1]])
    assert support_function(K, x) == pytest.approx(expected)


def test_support_function_broadcasts():
    K = ConvexBody2D.regular(64, 1.0)
    ang = np.linspace(0, 2 * np.pi, 17)
    vals = support_function(K, np.stack([np.cos(ang), np.sin(ang)], axis=1))
    assert vals.shape == (17,)
    assert np.all((vals <= 1.0 + 1e-12) & (vals >= math.cos(math.pi / 64) - 1e-12))


@pytest.mark.parametrize("ell, r", [(1.0, 2.0), (2.0, 3.0), (0.5, 10.0)])
def test_segment_lens_closed_form(ell, r):
    K = ConvexBody2D.from_points([[0.0, 0.0], [ell, 0.0]])
    res = straszewicz_gap(K, r)
    assert res.gap == pytest.approx(segment_gap(ell, r), abs=1e-9)
    assert res.gap == pytest.approx(r - math.sqrt(r * r - ell * ell / 4), abs=1e-12)


def test_straszewicz_requires_large_radius():
    K = ConvexBody2D.regular(5, 1.0)
    with pytest.raises(ValueError):
        straszewicz_gap(K, 0.5 * K.diam)


def test_straszewicz_regular_polygon():
    K = ConvexBody2D.regular(12, 1.0)
    res = straszewicz_gap(K, 4.0)
    side = 2 * math.sin(math.pi / 12)
    assert res.gap == pytest.approx(segment_gap(side, 4.0), abs=1e-12)
    assert res.holds


@pytest.mark.parametrize("seed", [0, 1])
@pytest.mark.parametrize("factor", [2.0, 4.0])
def test_straszewicz_brute_force(seed, factor):
    K = random_polygon(np.random.default_rng(seed), 4, 9)
    r = factor * K.diam
    res = straszewicz_gap(K, r)
    brute = ball_hull_gap(K, r, res.inner.vertices)
    assert brute <= res.gap + 1e-6
    assert brute >= res.gap - 1e-3 * K.diam
    assert res.gap <= K.diam ** 2 / r + 1e-6


def test_flatness_on_disk_polygon():
    K = ConvexBody2D.regular(256, 1.0)
    rep = strict_convexity_flatness(K, 1.0, 1.0, np.random.default_rng(0).uniform(-0.2, 0.2, (50, 2)),
                                    tol=1e-9)
    assert rep.passed


def test_flatness_fails_for_small_r_on_ellipse():
    t = np.linspace(0, 2 * np.pi, 400, endpoint=False)
    K = ConvexBody2D.from_points(np.stack([2 * np.cos(t), 0.5 * np.sin(t)], axis=1))
    # curvature radius at the flat side is 8, so r = 0.5 cannot bound the support function there
    with pytest.raises(ValueError):
        strict_convexity_flatness(K, 1.0, 0.5, [[0.1, 0.0]], vertex=100)


def test_legendre_quadratic():
    axes = (np.linspace(-2, 2, 81), np.linspace(-2, 2, 81))
    table = HbarTable.from_function(axes, lambda g: np.sum(g * g, axis=-1))
    lbar = legendre_transform(table)
    assert lbar.v_reliable == pytest.approx(3.95, abs=1e-9)
    v = np.array([[0.0, 0.0], [1.0, 0.0], [0.6, -1.2]])
    np.testing.assert_allclose(lbar(v), np.sum(v * v, axis=1) / 4, atol=0.0013)
    assert lbar(np.zeros(2)) == pytest.approx(0.0, abs=1e-12)


def test_biconjugate_recovers_table():
    axes = (np.linspace(-1.5, 1.5, 31),)
    table = HbarTable.from_function(axes, lambda g: np.abs(g[..., 0]) ** 3 / 3)
    lbar = legendre_transform(table, (np.linspace(-3, 3, 601),))
    back = conjugate_back(lbar, (np.linspace(-1, 1, 11),))
    np.testing.assert_allclose(back, np.abs(np.linspace(-1, 1, 11)) ** 3 / 3, atol=2e-3)


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(-3, 3), min_size=2, max_size=2),
       st.lists(st.floats(-3, 3), min_size=2, max_size=2),
       st.floats(0, 1))
def test_lbar_is_convex(a, b, lam):
    axes = (np.linspace(-2, 2, 21),) * 2
    lbar = legendre_transform(HbarTable.from_function(axes, lambda g: np.sum(g * g, axis=-1)))
    a, b = np.array(a), np.array(b)
    mix = lam * a + (1 - lam) * b
    assert lbar(mix) <= lam * lbar(a) + (1 - lam) * lbar(b) + 1e-9


def test_table_convexity_defect():
    axes = (np.linspace(-1, 1, 11),)
    assert HbarTable.from_function(axes, lambda g: g[..., 0] ** 2).convexity_defect() <= 1e-12
    assert HbarTable.from_function(axes, lambda g: -g[..., 0] ** 2).convexity_defect() > 0.01


def test_level_set_body_of_quadratic():
    axes = (np.linspace(-2, 2, 41),) * 2
    K = level_set_body(HbarTable.from_function(axes, lambda g: np.sum(g * g, axis=-1)), 1.0)
    assert K.diam == pytest.approx(2.0, abs=0.01)
    with pytest.raises(ValueError):
        level_set_body(HbarTable.from_function((axes[0],), lambda g: g[..., 0] ** 2), 1.0)


def test_softmin_stats_deterministic_closed_form():
    tab = softmin_passage_stats(DET1, 1.0, 1.0, [3.0], 4.0, 1, h=0.05, sides=2)
    # two plane points at distance 2 from the unit source ball
    assert tab.log_G[0] == pytest.approx(math.log(2) - 2.0, abs=0.05)
    assert tab.g[0] == pytest.approx(2.0 - math.log(2), abs=0.05)


def test_softmin_stats_small_sigma_limit():
    tab = softmin_passage_stats(DET1, 1.0, 0.01, [3.0], 4.0, 1, h=0.05, sides=2)
    assert tab.g[0] == pytest.approx(2.0 - math.log(2) / 0.01, abs=0.05)


def test_softmin_stats_rejects_sigma():
    with pytest.raises(ValueError):
        softmin_passage_stats(DET1, 1.0, 1.5, [3.0], 4.0, 1)


def test_random_polygon_is_convex():
    rng = np.random.default_rng(3)
    for _ in range(20):
        K = random_polygon(rng, 3, 12)
        assert K.is_convex() and len(K.vertices) >= 3
