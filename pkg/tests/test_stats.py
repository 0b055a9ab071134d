import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hjhomog.parallel import TooManyFailures, map_ordered, run_replicas
from hjhomog.pde_core import NonConvergenceError
from hjhomog.stats import aggregate_stats, fit_power_law, rate_curve

XS = np.array([1.0, 2.0, 4.0, 8.0, 16.0])


def test_fit_exact_square():
    fit = fit_power_law(XS, XS**2)
    assert fit.exponent == pytest.approx(2.0, abs=1e-12)
    assert fit.ci_low == pytest.approx(2.0, abs=1e-12) and fit.ci_high == pytest.approx(2.0, abs=1e-12)


def test_fit_constant_ci_contains_zero():
    rows = 3.0 * (1 + 0.01 * np.random.default_rng(0).standard_normal((40, XS.size)))
    fit = fit_power_law(XS, rows)
    assert fit.ci_low <= 0.0 <= fit.ci_high
    assert not fit.excludes_zero()


def test_fit_noisy_two_thirds():
    rng = np.random.default_rng(1)
    xs = np.geomspace(1, 100, 12)
    ys = xs ** (2 / 3) * (1 + 0.01 * rng.standard_normal(xs.size))
    fit = fit_power_law(xs, ys, 200)
    assert 0.6 <= fit.ci_low <= fit.exponent <= fit.ci_high <= 0.73


def test_fit_filters_nonpositive():
    ys = XS**2
    ys[1] = 0.0
    ys[3] = math.nan
    fit = fit_power_law(XS, ys)
    assert fit.n_used == 3 and fit.n_filtered == 2
    assert fit.exponent == pytest.approx(2.0, abs=1e-12)


@pytest.mark.parametrize("xs, ys", [([1.0, 2.0], [1.0, 4.0]), ([1.0, 2.0, 3.0], [1.0, -1.0, 0.0])])
def test_fit_too_few_points(xs, ys):
    with pytest.raises(ValueError, match="fewer than 3"):
        fit_power_law(xs, ys)


def test_fit_rejects_nonpositive_x():
    with pytest.raises(ValueError):
        fit_power_law([0.0, 1.0, 2.0], [1.0, 1.0, 1.0])


def test_fit_is_seeded():
    rows = np.abs(np.random.default_rng(2).standard_normal((20, XS.size))) * XS
    assert fit_power_law(XS, rows, seed=5) == fit_power_law(XS, rows, seed=5)


def test_aggregate_single_row():
    s = aggregate_stats([2.5])
    assert s.n == 1 and s.mean == 2.5
    assert not s.variance_defined and math.isnan(s.variance)


def test_aggregate_small():
    s = aggregate_stats([1.0, 2.0, 3.0])
    assert s.mean == 2.0 and s.variance == 1.0 and s.quantiles[0.5] == 2.0


def test_aggregate_empty():
    with pytest.raises(ValueError):
        aggregate_stats([])


def test_aggregate_order_independent_large():
    x = np.random.default_rng(3).lognormal(size=100_000)
    shuffled = np.random.default_rng(4).permutation(x)
    assert aggregate_stats(np.sort(x)) == aggregate_stats(shuffled)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-1e6, 1e6), min_size=2, max_size=50), st.randoms())
def test_aggregate_permutation_invariant(xs, rnd):
    ys = list(xs)
    rnd.shuffle(ys)
    a, b = aggregate_stats(xs), aggregate_stats(ys)
    assert a.mean == b.mean and a.variance == b.variance and a.quantiles == b.quantiles


def test_rate_curve_without_fit():
    curve = rate_curve([0.2, 0.1], np.ones((3, 2)), "delta")
    assert curve.fit is None and np.all(curve.means == 1.0)


def _flaky(bad):
    def fn(r):
        if r in bad:
            raise NonConvergenceError(residual=1.0, sweeps=10)
        return r
    return fn


def test_run_replicas_drops_failures():
    out = run_replicas(_flaky({3}), range(10))
    assert out[3] is None and out[4] == 4


def test_run_replicas_threshold():
    with pytest.raises(TooManyFailures):
        run_replicas(_flaky({0, 1, 2}), range(10))


def test_run_replicas_other_errors_propagate():
    def boom(r):
        raise KeyError(r)
    with pytest.raises(KeyError):
        run_replicas(boom, range(3))


@pytest.mark.parametrize("threads", [1, 3])
def test_map_ordered_preserves_order(threads):
    assert map_ordered(lambda i: i * i, range(20), threads) == [i * i for i in range(20)]
