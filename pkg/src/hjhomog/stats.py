"""Order-independent summaries and bootstrap power-law fits."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class Summary:
    """Mean, unbiased variance and quantiles; ``variance_defined`` is False for n < 2."""

    n: int
    mean: float
    variance: float
    variance_defined: bool
    quantiles: dict = field(default_factory=dict)


def aggregate_stats(rows) -> Summary:
    """Summary statistics that do not depend on the order of the rows.

    Sums use math.fsum, which is correctly rounded and therefore independent
    of summation order.
    """
    x = np.sort(np.asarray(rows, dtype=float).ravel())
    if x.size == 0:
        raise ValueError("no rows to aggregate")
    n = x.size
    mean = math.fsum(x) / n
    if n > 1:
        var = math.fsum((x - mean) ** 2) / (n - 1)
    else:
        var = math.nan
    qs = {q: float(np.quantile(x, q)) for q in (0.5, 0.9, 0.99)}
    return Summary(n, mean, var, n > 1, qs)


@dataclass(frozen=True)
class PowerLawFit:
    """y ~ C x^exponent fitted on log-log axes, with a bootstrap interval."""

    exponent: float
    intercept: float
    ci_low: float
    ci_high: float
    n_used: int
    n_filtered: int

    def excludes_zero(self) -> bool:
        return self.ci_low > 0 or self.ci_high < 0


def _slope(lx, ly):
    A = np.vstack([lx, np.ones_like(lx)]).T
    coef, *_ = np.linalg.lstsq(A, ly, rcond=None)
    return float(coef[0]), float(coef[1])


def fit_power_law(xs, ys, n_bootstrap: int = 200, *, statistic=None, seed: int = 0,
                  level: float = 0.95) -> PowerLawFit:
    """Least-squares slope of log y against log x.

    ``ys`` is either one value per x, in which case the bootstrap resamples
    (x, y) pairs, or a 2-D array of per-replica rows (n_replicas, len(xs)),
    reduced by ``statistic`` (default: mean over replicas), in which case the
    bootstrap resamples replicas.  Non-positive y values are dropped and counted.
    """
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if np.any(xs <= 0):
        raise ValueError("xs must be positive")
    stat = statistic or (lambda a: np.mean(a, axis=0))
    rng = np.random.default_rng(seed)
    alpha = 0.5 * (1.0 - level)

    if ys.ndim == 2:
        point = stat(ys)
        keep = np.isfinite(point) & (point > 0)
        if keep.sum() < 3:
            raise ValueError("fewer than 3 usable points")
        b, a = _slope(np.log(xs[keep]), np.log(point[keep]))
        boots = []
        n = ys.shape[0]
        for _ in range(n_bootstrap):
            s = stat(ys[rng.integers(0, n, n)])
            ok = keep & np.isfinite(s) & (s > 0)
            if ok.sum() >= 2:
                boots.append(_slope(np.log(xs[ok]), np.log(s[ok]))[0])
        lo, hi = np.quantile(boots, [alpha, 1 - alpha]) if boots else (math.nan, math.nan)
        return PowerLawFit(b, a, float(lo), float(hi), int(keep.sum()), int((~keep).sum()))

    keep = np.isfinite(ys) & (ys > 0)
    if keep.sum() < 3:
        raise ValueError("fewer than 3 usable points")
    lx, ly = np.log(xs[keep]), np.log(ys[keep])
    b, a = _slope(lx, ly)
    boots = []
    n = lx.size
    for _ in range(n_bootstrap):
        idx = rng.integers(0, n, n)
        if np.unique(lx[idx]).size < 2:
            continue
        boots.append(_slope(lx[idx], ly[idx])[0])
    lo, hi = np.quantile(boots, [alpha, 1 - alpha]) if boots else (math.nan, math.nan)
    return PowerLawFit(b, a, float(lo), float(hi), int(keep.sum()), int((~keep).sum()))


@dataclass(frozen=True, eq=False)
class RateCurve:
    """Per-replica errors against a scale parameter, with summaries and a fit."""

    x: np.ndarray
    errors: np.ndarray
    summaries: list
    fit: PowerLawFit | None
    label: str = "x"

    @property
    def means(self) -> np.ndarray:
        return np.array([s.mean for s in self.summaries])


def rate_curve(x, errors, label: str, n_bootstrap: int = 200) -> RateCurve:
    errors = np.asarray(errors, dtype=float)
    summaries = [aggregate_stats(errors[:, k]) for k in range(errors.shape[1])]
    try:
        fit = fit_power_law(x, errors, n_bootstrap)
    except ValueError:
        fit = None
    return RateCurve(np.asarray(x, dtype=float), errors, summaries, fit, label)
