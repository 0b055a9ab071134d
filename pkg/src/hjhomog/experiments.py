"""Seeded Monte Carlo campaigns and the metric invariant suite.

Every campaign takes an :class:`ExperimentConfig` and returns an
:class:`ExperimentRecord` whose tables depend only on (config, seed): replicas
are built from (seed, replica index), results are gathered in replica order
and aggregated with order-independent sums, and every bootstrap uses a fixed
seed.  ``checks`` holds the pass/fail flags that decide the CLI exit code.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import spearmanr

from .cell import corrector_error
from .config import ExperimentConfig, config_hash
from .convex import ConvexBody2D, straszewicz_gap
from .effective import (
    estimate_hbar,
    hbar_table,
    legendre_transform,
    passage_values,
    softmin_passage_stats,
)
from .environment import EnvSampler, build_environment
from .evolution import InitialDatum, homog_error
from .grid import OUTER, GridDomain
from .metric import (
    dpp_defects,
    hausdorff,
    localization_gap,
    softmin_subsolution,
    solve_metric,
    sublevel_front,
)
from .parallel import map_ordered, run_replicas
from .pde_core import NonConvergenceError, SchemeParams, grid_coefficients
from .stats import PowerLawFit, aggregate_stats, fit_power_law

__all__ = [
    "ExperimentConfig", "ExperimentRecord", "Table", "aggregate_stats", "fit_power_law",
    "run_experiment", "run_metric", "run_hbar", "run_fluctuations", "run_bias",
    "run_invariants", "run_cell_rate", "run_evolve_rate", "run_straszewicz",
    "run_softmin_stats", "invariant_suite", "localization_fit",
]

log = logging.getLogger(__name__)


@dataclass
class Table:
    """Rows with a fixed column order, written as one CSV file."""

    columns: tuple
    rows: list = field(default_factory=list)


@dataclass
class ExperimentRecord:
    """Outcome of one campaign.

    ``tables`` are reproducible bit-exactly from (config, seed); ``wall_clock``
    is the only non-deterministic field and is kept out of the tables.
    """

    kind: str
    config_hash: str
    seed: int
    tables: dict
    fits: dict = field(default_factory=dict)
    checks: dict = field(default_factory=dict)
    replica_seeds: list = field(default_factory=list)
    wall_clock: float = 0.0

    @property
    def passed(self) -> bool:
        return all(self.checks.values())


def _scheme(cfg: ExperimentConfig) -> SchemeParams:
    s = cfg.scheme
    return SchemeParams(residual_tol=s.residual_tol, max_sweeps=s.max_sweeps,
                        discretization=s.discretization)


def _sampler(cfg: ExperimentConfig) -> EnvSampler:
    return EnvSampler(cfg.env_params())


def _direction(d: int, given) -> np.ndarray:
    if given is None:
        e = np.zeros(d)
        e[0] = 1.0
        return e
    e = np.asarray(given, dtype=float).reshape(d)
    return e / np.linalg.norm(e)


def _record(cfg: ExperimentConfig, kind: str, tables: dict, t0: float, *, fits=None,
            checks=None, n_replicas: int = 0) -> ExperimentRecord:
    return ExperimentRecord(kind=kind, config_hash=config_hash(cfg), seed=cfg.seed,
                            tables=tables, fits=fits or {}, checks=checks or {},
                            replica_seeds=[(cfg.seed, r) for r in range(n_replicas)],
                            wall_clock=time.perf_counter() - t0)


def _summary_table(xname: str, xs, matrix) -> Table:
    t = Table((xname, "n", "mean", "variance", "q50", "q90", "q99"))
    for k, x in enumerate(xs):
        s = aggregate_stats(matrix[:, k])
        t.rows.append((x, s.n, s.mean, s.variance, s.quantiles[0.5], s.quantiles[0.9],
                       s.quantiles[0.99]))
    return t


def _fit_table(fits: dict) -> Table:
    t = Table(("name", "exponent", "intercept", "ci_low", "ci_high", "n_used", "n_filtered"))
    for name in sorted(fits):
        f = fits[name]
        if f is None:
            t.rows.append((name, math.nan, math.nan, math.nan, math.nan, 0, 0))
        else:
            t.rows.append((name, f.exponent, f.intercept, f.ci_low, f.ci_high, f.n_used,
                           f.n_filtered))
    return t


def _try_fit(xs, ys, **kw) -> PowerLawFit | None:
    try:
        return fit_power_law(xs, ys, **kw)
    except ValueError as exc:
        log.info("power-law fit skipped: %s", exc)
        return None


def _decreasing(summaries_matrix: np.ndarray) -> bool:
    """Consecutive column means decrease up to two standard errors of their difference."""
    n = summaries_matrix.shape[0]
    ok = True
    for k in range(summaries_matrix.shape[1] - 1):
        a = aggregate_stats(summaries_matrix[:, k])
        b = aggregate_stats(summaries_matrix[:, k + 1])
        var = (a.variance if a.variance_defined else 0.0) + (b.variance if b.variance_defined else 0.0)
        slack = 2.0 * math.sqrt(var / n)
        ok &= b.mean <= a.mean + slack
    return bool(ok)


# ---------------------------------------------------------------------------
# single solves


def run_metric(cfg: ExperimentConfig, threads: int | None = None) -> ExperimentRecord:
    """One metric solve on replica 0: the field and its slope diagnostics."""
    t0 = time.perf_counter()
    mc = cfg.metric
    env = build_environment(cfg.env_params(0))
    d = env.d
    dom = GridDomain.centered(mc.radius, cfg.scheme.h, d)
    src = np.asarray(mc.source, dtype=float)[:d]
    sol = solve_metric(env, mc.mu, src, dom, _scheme(cfg))
    coords = dom.coords().reshape(-1, d)
    vals = sol.m.values.reshape(-1)
    cols = ("x",) if d == 1 else ("x", "y")
    field_t = Table(cols + ("m",), [tuple(c) + (v,) for c, v in zip(coords.tolist(), vals.tolist())])
    summary = Table(("mu", "l_hat", "L_hat", "a_mu", "residual", "sweeps", "flagged"),
                    [(sol.mu, sol.l_hat, sol.L_hat, sol.a_mu, sol.residual, sol.sweeps,
                      int(sol.flagged))])
    return _record(cfg, "metric", {"field": field_t, "summary": summary}, t0,
                   checks={"slope_floor": not sol.flagged}, n_replicas=1)


def run_hbar(cfg: ExperimentConfig, threads: int | None = None) -> ExperimentRecord:
    t0 = time.perf_counter()
    hc = cfg.hbar
    S = _sampler(cfg)
    d = S.d
    cols = tuple(f"p{k}" for k in range(d)) + ("hbar", "lo", "hi", "saturated", "n_replicas")
    t = Table(cols)
    for p in hc.p_list:
        est = estimate_hbar(S, np.asarray(p, dtype=float)[:d], hc.tol, n_replicas=cfg.n_replicas,
                            R=hc.R, h=cfg.scheme.h, mu_min=hc.mu_min, mu_max=hc.mu_max,
                            n_directions=hc.n_directions, scheme=_scheme(cfg), threads=threads)
        t.rows.append(tuple(float(x) for x in est.p) + (est.value, est.lo, est.hi,
                                                         int(est.saturated), est.n_replicas))
    return _record(cfg, "hbar", {"hbar": t}, t0, n_replicas=cfg.n_replicas)


# ---------------------------------------------------------------------------
# fluctuations and bias


def _passage_matrix(cfg, S, mu, radii, e, threads) -> np.ndarray:
    scheme = _scheme(cfg)
    pts = np.outer(radii, e)

    def one(r):
        vals, _ = passage_values(S(r), mu, pts, cfg.scheme.h, scheme=scheme)
        return vals

    rows = run_replicas(one, range(cfg.n_replicas), threads)
    return np.array([r if r is not None else np.full(len(radii), np.nan) for r in rows])


def _wls_slope(x, y, w) -> float:
    return float(np.polyfit(x, y, 1, w=np.sqrt(w))[0])


def tail_slope(values: np.ndarray, n_lambda: int = 12, n_bootstrap: int = 200, seed: int = 0):
    """Weighted slope of log P[|m - mean| > lambda] against lambda^2, with a replica bootstrap.

    The lambda grid spans (0, q95 of |m - mean|]; weights n p / (1 - p) are the
    inverse delta-method variances of the log frequencies.
    """
    v = np.sort(np.asarray(values, dtype=float))
    n = v.size
    dev = np.abs(v - math.fsum(v) / n)
    lam_max = float(np.quantile(dev, 0.95))
    lams = lam_max * np.arange(1, n_lambda + 1) / n_lambda

    def slope(sample):
        dv = np.abs(sample - math.fsum(np.sort(sample)) / sample.size)
        freq = np.array([(dv > lam).mean() for lam in lams])
        ok = (freq > 0) & (freq < 1)
        if ok.sum() < 3:
            return math.nan, freq
        w = sample.size * freq[ok] / (1.0 - freq[ok])
        return _wls_slope(lams[ok] ** 2, np.log(freq[ok]), w), freq

    b, freq = slope(v)
    rng = np.random.default_rng(seed)
    boots = [slope(v[rng.integers(0, n, n)])[0] for _ in range(n_bootstrap)]
    boots = np.array([x for x in boots if math.isfinite(x)])
    lo, hi = (np.quantile(boots, [0.025, 0.975]) if boots.size else (math.nan, math.nan))
    return b, float(lo), float(hi), lams, freq


def run_fluctuations(cfg: ExperimentConfig, threads: int | None = None) -> ExperimentRecord:
    """Variance of m(R e, 0) against R and the sub-Gaussian tail diagnostic at the largest R."""
    t0 = time.perf_counter()
    fc = cfg.fluctuations
    S = _sampler(cfg)
    radii = np.array(sorted(fc.R_list), dtype=float)
    e = _direction(S.d, fc.direction)
    M = _passage_matrix(cfg, S, fc.mu, radii, e, threads)
    M = M[np.all(np.isfinite(M), axis=1)]
    rows = Table(("replica", "R", "m"))
    for r in range(M.shape[0]):
        for k, R in enumerate(radii):
            rows.rows.append((r, R, M[r, k]))
    summary = _summary_table("R", radii, M)
    summary.columns = summary.columns + ("variance_over_R",)
    summary.rows = [row + (row[3] / row[0],) for row in summary.rows]
    var_fit = _try_fit(radii, M, statistic=lambda a: np.var(a, axis=0, ddof=1), seed=cfg.seed)
    slope, lo, hi, lams, freq = tail_slope(M[:, -1], fc.n_lambda, seed=cfg.seed)
    tail = Table(("lambda", "lambda_sq", "frequency", "log_frequency"),
                 [(lam, lam * lam, f, math.log(f) if f > 0 else -math.inf)
                  for lam, f in zip(lams, freq)])
    fits = {"variance": var_fit,
            "tail": PowerLawFit(slope, math.nan, lo, hi, int(np.sum(freq > 0)), 0)}
    if var_fit is not None:
        var_ok = var_fit.exponent <= fc.max_var_exponent
    else:
        var_ok = bool(np.nanmax(summary_col(summary, "variance")) <= 2.0 * (5.0 * cfg.scheme.h) ** 2)
    checks = {"variance_exponent": bool(var_ok)}
    if np.ptp(M[:, -1]) > 0:
        checks["tail_slope_negative"] = bool(slope < 0 and hi < 0)
    return _record(cfg, "fluctuations", {"rows": rows, "summary": summary, "tail": tail,
                                         "fits": _fit_table(fits)}, t0,
                   fits=fits, checks=checks, n_replicas=cfg.n_replicas)


def summary_col(t: Table, name: str) -> np.ndarray:
    k = t.columns.index(name)
    return np.array([row[k] for row in t.rows], dtype=float)


def bias_curve(M: np.ndarray, radii, reference) -> np.ndarray:
    """M-hat(R) - (R - 1) * proxy, with proxy = min over reference radii of M-hat / (R - 1).

    ``M`` has one column per entry of ``radii`` followed by one per reference radius.
    """
    k = len(radii)
    means = np.array([math.fsum(np.sort(M[:, j])) / M.shape[0] for j in range(M.shape[1])])
    proxy = min(means[k + j] / (Rr - 1.0) for j, Rr in enumerate(reference))
    return means[:k] - (np.asarray(radii) - 1.0) * proxy


def run_bias(cfg: ExperimentConfig, threads: int | None = None) -> ExperimentRecord:
    """Bias of the mean passage value against a subadditive reference slope, plus soft-min data."""
    t0 = time.perf_counter()
    bc = cfg.bias
    S = _sampler(cfg)
    radii = np.array(sorted(bc.R_list), dtype=float)
    ref = np.array(sorted(bc.reference_radii or [2.0 * radii[-1]]), dtype=float)
    e = _direction(S.d, bc.direction)
    M = _passage_matrix(cfg, S, bc.mu, np.concatenate([radii, ref]), e, threads)
    M = M[np.all(np.isfinite(M), axis=1)]
    rows = Table(("replica", "R", "m"))
    allr = np.concatenate([radii, ref])
    for r in range(M.shape[0]):
        for k, R in enumerate(allr):
            rows.rows.append((r, R, M[r, k]))
    bias = bias_curve(M, radii, ref)
    curve = Table(("R", "bias"), [(R, b) for R, b in zip(radii, bias)])
    fit = _try_fit(radii, M, statistic=lambda a: bias_curve(a, radii, ref), seed=cfg.seed)
    soft = softmin_passage_stats(S, bc.mu, bc.sigma, bc.t_list, bc.softmin_R,
                                 min(bc.softmin_replicas, cfg.n_replicas), h=cfg.scheme.h,
                                 pairs=[tuple(p) for p in bc.pairs], scheme=_scheme(cfg),
                                 threads=threads)
    gt = Table(("t", "log_G", "g", "plane_mean"),
               [(t, lg, g, pm) for t, lg, g, pm in zip(soft.t, soft.log_G, soft.g, soft.plane_mean)])
    sup = Table(("t", "s", "defect"), [(a, b, v) for (a, b), v in sorted(soft.superadditivity.items())])
    fits = {"bias": fit}
    # a bias within grid slack at every radius leaves nothing to fit
    ok = bool(np.all(np.abs(bias) <= 5.0 * cfg.scheme.h))
    if fit is not None and not ok:
        ok = fit.exponent <= bc.max_exponent
    return _record(cfg, "bias", {"rows": rows, "curve": curve, "softmin": gt,
                                 "superadditivity": sup, "fits": _fit_table(fits)}, t0,
                   fits=fits, checks={"bias_exponent": bool(ok)}, n_replicas=cfg.n_replicas)


# ---------------------------------------------------------------------------
# invariant suite


def _ball_points(rng, n: int, d: int, radius: float) -> np.ndarray:
    if d == 1:
        return rng.uniform(-radius, radius, size=(n, 1))
    ang = rng.uniform(0.0, 2.0 * np.pi, n)
    rad = radius * np.sqrt(rng.uniform(0.0, 1.0, n))
    return np.stack([rad * np.cos(ang), rad * np.sin(ang)], axis=1)


def invariant_suite(env, mu: float, h: float, scheme: SchemeParams, *, box_radius: float = 6.0,
                    n_sources: int = 6, n_triples: int = 100, n_levels: int = 6,
                    dpp_t: float = 1.5, n_dpp: int = 4, seed: int = 0) -> list:
    """Run the metric invariants on one environment; returns (check, value, bound, passed) rows.

    ``value`` is the worst observed quantity and ``bound`` the allowed level,
    so every check reads value <= bound.
    """
    d = env.d
    rng = np.random.default_rng(seed)
    dom = GridDomain.centered(box_radius, h, d)
    co = grid_coefficients(env, dom)
    out = []

    def add(name, value, bound):
        out.append((name, float(value), float(bound), bool(value <= bound)))

    try:
        sol0 = solve_metric(env, mu, np.zeros(d), dom, scheme, coefficients=co)
        inner = box_radius / 3.0
        srcs = _ball_points(rng, n_sources, d, inner - 1.0)
        sols = [solve_metric(env, mu, s, dom, scheme, coefficients=co) for s in srcs]
    except NonConvergenceError as exc:
        add("convergence", exc.residual, 0.0)
        return out
    L = max([sol0.L_hat] + [s.L_hat for s in sols])
    l_hat = sol0.l_hat
    tol = scheme.tol(mu)

    # growth bounds l dist <= m <= L dist + 5h on trusted nodes
    reg = sol0.trusted & ~sol0.dirichlet
    m0 = sol0.m.values
    lower = float(np.max(l_hat * sol0.dist[reg] - m0[reg]))
    upper = float(np.max(m0[reg] - sol0.L_hat * sol0.dist[reg]))
    add("growth_lower", lower, 5.0 * h)
    add("growth_upper", upper, 5.0 * h)
    add("slope_floor", -l_hat, -1e-3)

    # subadditivity m(y,x) <= m(y,z) + m(z,x) + L + 10h over random triples
    ys = _ball_points(rng, n_triples, d, inner)
    worst = -math.inf
    for k in range(n_triples):
        i, j = rng.choice(n_sources, size=2, replace=False)
        y = ys[k : k + 1]
        lhs = sols[i].sample(y)[0]
        rhs = sols[j].sample(y)[0] + sols[i].sample(srcs[j : j + 1])[0]
        worst = max(worst, lhs - rhs)
    add("subadditivity", worst, L + 10.0 * h)

    # front motion and connectivity
    shrunk = (dom.mask != OUTER) & (sol0.domain.distance_to_outer() > 1.0 + 1e-9)
    edge = float(m0[~shrunk & (dom.mask != OUTER)].min()) if (~shrunk).any() else float(m0.max())
    levels = np.linspace(0.0, 0.9 * edge, n_levels)
    fronts = [sublevel_front(sol0, t) for t in levels]
    add("front_disconnected", sum(not f.connected for f in fronts), 0)
    excess = -math.inf
    for a in range(len(fronts)):
        for b in range(a + 1, len(fronts)):
            dh = hausdorff(fronts[a].region, fronts[b].region, h)
            excess = max(excess, dh - (abs(levels[b] - levels[a]) / l_hat + 2.0 + 3.0 * h))
    add("front_motion", excess, 0.0)

    # dynamic programming defect and the lower bound for a set source
    t = dpp_t
    if t < 0.9 * edge:
        cand = dom.coords()[(m0 > t + 0.5) & shrunk]
        pick = cand[rng.choice(len(cand), size=min(n_dpp, len(cand)), replace=False)]
        try:
            defects, second = dpp_defects(sol0, env, pick, t, scheme)
        except NonConvergenceError as exc:
            add("convergence", exc.residual, 0.0)
            return out
        add("dpp", float(defects.max()), 8.0 * sol0.L_hat + 10.0 * h)
        sreg = second.trusted & ~second.dirichlet
        setb = float(np.max(l_hat * (second.dist[sreg] - 2.0) - second.m.values[sreg]))
        add("set_lower_bound", setb, 5.0 * h)

    # domain monotonicity: a larger box never raises m
    try:
        gap = localization_gap(env, mu, dom, [0.9 * edge], scheme=scheme)
    except NonConvergenceError as exc:
        add("convergence", exc.residual, 0.0)
        return out
    add("domain_monotonicity", -gap.min_gap, tol)
    return out


@dataclass(frozen=True)
class LocalizationFit:
    """Pooled truncation-gap diagnostics over replicas.

    ``spearman`` is the rank correlation of (depth, gap); ``slope`` is the
    least-squares slope of log gap against depth over gaps above ``floor``,
    with a replica-bootstrap interval.
    """

    min_gap: float
    spearman: float
    slope: float
    ci_low: float
    ci_high: float
    n_points: int


def localization_fit(curves, floor: float, n_bootstrap: int = 200, seed: int = 0) -> LocalizationFit:
    """Fit log(gap) ~ a + b * depth over the pooled GapCurves."""
    depth = [np.asarray(c.depth, dtype=float) for c in curves]
    gap = [np.asarray(c.gap, dtype=float) for c in curves]
    D, G = np.concatenate(depth), np.concatenate(gap)
    rho = float(spearmanr(D, G).statistic)

    def slope(idx):
        x = np.concatenate([depth[i] for i in idx])
        y = np.concatenate([gap[i] for i in idx])
        ok = y > floor
        if np.unique(x[ok]).size < 2:
            return math.nan
        return float(np.polyfit(x[ok], np.log(y[ok]), 1)[0])

    n = len(curves)
    b = slope(range(n))
    rng = np.random.default_rng(seed)
    boots = np.array([slope(rng.integers(0, n, n)) for _ in range(n_bootstrap)])
    boots = boots[np.isfinite(boots)]
    lo, hi = np.quantile(boots, [0.025, 0.975]) if boots.size else (math.nan, math.nan)
    return LocalizationFit(min(float(c.min_gap) for c in curves), rho, b, float(lo), float(hi),
                           int(np.sum(G > floor)))


def run_invariants(cfg: ExperimentConfig, threads: int | None = None) -> ExperimentRecord:
    t0 = time.perf_counter()
    ic = cfg.invariants
    S = _sampler(cfg)
    scheme = _scheme(cfg)

    def one(r):
        return invariant_suite(S(r), ic.mu, cfg.scheme.h, scheme, box_radius=ic.box_radius,
                               n_sources=ic.n_sources, n_triples=ic.n_triples,
                               n_levels=ic.n_levels, dpp_t=ic.dpp_t, n_dpp=ic.n_dpp,
                               seed=r)

    results = map_ordered(one, range(cfg.n_replicas), threads)
    rows = Table(("replica", "seed", "check", "value", "bound", "passed"))
    checks: dict = {}
    for r, res in enumerate(results):
        for name, value, bound, ok in res:
            rows.rows.append((r, cfg.seed, name, value, bound, int(ok)))
            checks[name] = checks.get(name, True) and ok
    summary = Table(("check", "passed", "n_failed"))
    for name in sorted(checks):
        nf = sum(1 for row in rows.rows if row[2] == name and not row[5])
        summary.rows.append((name, int(checks[name]), nf))
    return _record(cfg, "invariants", {"rows": rows, "summary": summary}, t0, checks=checks,
                   n_replicas=cfg.n_replicas)


# ---------------------------------------------------------------------------
# rates


def run_cell_rate(cfg: ExperimentConfig, threads: int | None = None) -> ExperimentRecord:
    """Corrector error |delta v(0, p) + Hbar(p)| against delta."""
    t0 = time.perf_counter()
    cc = cfg.cell
    S = _sampler(cfg)
    p = np.asarray(cc.p, dtype=float)[: S.d]
    if cc.hbar is None:
        est = estimate_hbar(S, p, cc.hbar_tol, n_replicas=cc.hbar_replicas, R=cc.hbar_R,
                            h=cc.h, scheme=_scheme(cfg), threads=threads)
        hbar, half = est.value, est.halfwidth
    else:
        hbar, half = float(cc.hbar), 0.0
    deltas = np.array(cc.delta_list, dtype=float)
    curve = corrector_error(S, p, deltas, hbar, cfg.n_replicas, h=cc.h, R_factor=cc.R_factor,
                            scheme=_scheme(cfg), threads=threads)
    rows = Table(("delta", "replica", "error"))
    for r in range(curve.errors.shape[0]):
        for k, dl in enumerate(deltas):
            rows.rows.append((dl, r, curve.errors[r, k]))
    order = np.argsort(-deltas)
    fits = {"corrector": curve.fit}
    checks = {
        "decreasing": _decreasing(curve.errors[:, order]),
        "exponent_positive": bool(curve.fit is not None and curve.fit.exponent > 0
                                  and curve.fit.excludes_zero()),
    }
    ref = Table(("hbar", "halfwidth"), [(hbar, half)])
    return _record(cfg, "cell_rate", {"rows": rows, "summary": _summary_table("delta", deltas, curve.errors),
                                      "hbar": ref, "fits": _fit_table(fits)}, t0,
                   fits=fits, checks=checks, n_replicas=cfg.n_replicas)


def run_evolve_rate(cfg: ExperimentConfig, threads: int | None = None) -> ExperimentRecord:
    """Sup-norm homogenization error of the time-dependent problem against eps."""
    t0 = time.perf_counter()
    ec = cfg.evolve
    S = _sampler(cfg)
    d = S.d
    g = InitialDatum.cos_bump(d, ec.width, ec.height)
    p_max = g.lipschitz + 1.0
    axes = [np.linspace(-p_max, p_max, ec.n_p)] * d
    bounds = S(0).coefficient_bounds()
    mu_max = bounds["a_max"] * p_max ** S(0).q + 1.0
    table = hbar_table(S, axes, ec.hbar_tol, n_replicas=ec.hbar_replicas, R=ec.hbar_R,
                       h=cfg.scheme.h, mu_min=ec.mu_min, mu_max=mu_max, scheme=_scheme(cfg),
                       threads=threads)
    lbar = legendre_transform(table)
    eps = np.array(ec.eps_list, dtype=float)
    curve = homog_error(S, g, eps, ec.T, lbar, cfg.n_replicas, n_slices=ec.n_slices,
                        spacing=ec.spacing, h_factor=ec.h_factor, threads=threads)
    rows = Table(("eps", "replica", "error"))
    for r in range(curve.errors.shape[0]):
        for k, e in enumerate(eps):
            rows.rows.append((e, r, curve.errors[r, k]))
    pts = table.points
    ht = Table(tuple(f"p{k}" for k in range(d)) + ("hbar", "halfwidth"),
               [tuple(p) + (v, w) for p, v, w in zip(pts.tolist(), table.values.reshape(-1),
                                                     table.halfwidth.reshape(-1))])
    order = np.argsort(-eps)
    fits = {"homogenization": curve.fit}
    checks = {
        "decreasing": _decreasing(curve.errors[:, order]),
        "exponent_positive": bool(curve.fit is not None and curve.fit.exponent > 0),
    }
    return _record(cfg, "evolve_rate", {"rows": rows, "summary": _summary_table("eps", eps, curve.errors),
                                        "hbar": ht, "fits": _fit_table(fits)}, t0,
                   fits=fits, checks=checks, n_replicas=cfg.n_replicas)


# ---------------------------------------------------------------------------
# geometry and soft-min


def random_polygon(rng, n_min: int, n_max: int) -> ConvexBody2D:
    n = int(rng.integers(n_min, n_max + 1))
    while True:
        K = ConvexBody2D.from_points(rng.uniform(-1.0, 1.0, size=(n, 2)))
        if not K.degenerate:
            return K


def segment_gap(s: float, r: float) -> float:
    """Half-width of the lens of radius r over a chord of length s."""
    return r - math.sqrt(r * r - 0.25 * s * s)


def run_straszewicz(cfg: ExperimentConfig, threads: int | None = None) -> ExperimentRecord:
    t0 = time.perf_counter()
    sc = cfg.straszewicz
    rows = Table(("polygon", "n_vertices", "r_factor", "diam", "r", "gap", "bound", "holds"))
    ok = True
    for k in range(sc.n_polygons):
        rng = np.random.default_rng([cfg.seed, k])
        K = random_polygon(rng, sc.min_vertices, sc.max_vertices)
        diam = K.diam
        for f in sc.r_factors:
            res = straszewicz_gap(K, f * diam)
            holds = res.gap <= res.bound + sc.tol
            ok &= holds
            rows.rows.append((k, len(K.vertices), f, diam, f * diam, res.gap, res.bound, int(holds)))
    lens = Table(("length", "r", "gap", "closed_form", "error"))
    lens_ok = True
    for s in sc.segment_lengths:
        seg = ConvexBody2D.from_points([[0.0, 0.0], [s, 0.0]])
        for f in sc.r_factors:
            r = f * s
            res = straszewicz_gap(seg, r)
            exact = segment_gap(s, r)
            lens_ok &= abs(res.gap - exact) <= 1e-9
            lens.rows.append((s, r, res.gap, exact, abs(res.gap - exact)))
    return _record(cfg, "straszewicz", {"rows": rows, "lens": lens}, t0,
                   checks={"gap_bound": bool(ok), "segment_closed_form": bool(lens_ok)},
                   n_replicas=sc.n_polygons)


def run_softmin_stats(cfg: ExperimentConfig, threads: int | None = None) -> ExperimentRecord:
    """Soft-min passage statistics and the soft-min subsolution check over theta."""
    t0 = time.perf_counter()
    sc = cfg.softmin
    S = _sampler(cfg)
    scheme = _scheme(cfg)
    soft = softmin_passage_stats(S, sc.mu, sc.sigma, sc.t_list, sc.R, cfg.n_replicas,
                                 h=cfg.scheme.h, pairs=[tuple(p) for p in sc.pairs],
                                 sides=sc.sides, scheme=scheme, threads=threads)
    gt = Table(("t", "log_G", "g", "plane_mean", "n_points"),
               [(t, lg, g, pm, n) for t, lg, g, pm, n in
                zip(soft.t, soft.log_G, soft.g, soft.plane_mean, soft.n_points)])
    sup = Table(("t", "s", "defect"), [(a, b, v) for (a, b), v in sorted(soft.superadditivity.items())])
    d = S.d
    tol = scheme.tol(sc.mu)

    def one(r):
        env = S(r)
        dom = GridDomain.centered(sc.box_radius, cfg.scheme.h, d)
        co = grid_coefficients(env, dom)
        span = max(sc.box_radius / 2.0 - 1.0, 0.0)
        xs = np.linspace(-span, span, sc.n_sources)
        srcs = [np.array([x] + [0.0] * (d - 1)) for x in xs]
        sols = [solve_metric(env, sc.mu, s, dom, scheme, coefficients=co) for s in srcs]
        out = []
        for theta in sc.thetas:
            _, rep = softmin_subsolution(env, sols, theta)
            out.append((theta, rep.max_operator, rep.level, rep.L_hat))
        return out

    res = run_replicas(one, range(cfg.n_replicas), threads)
    sub = Table(("replica", "theta", "max_operator", "level", "bound", "L_hat", "passed"))
    ok = True
    for r, rr in enumerate(res):
        if rr is None:
            continue
        for theta, top, level, L in rr:
            passed = top <= level + 10.0 * tol
            ok &= passed
            sub.rows.append((r, theta, top, level, level + 10.0 * tol, L, int(passed)))
    return _record(cfg, "softmin_stats", {"softmin": gt, "superadditivity": sup,
                                          "subsolution": sub}, t0,
                   checks={"softmin_subsolution": bool(ok)}, n_replicas=cfg.n_replicas)


RUNNERS = {
    "metric": run_metric,
    "hbar": run_hbar,
    "cell_rate": run_cell_rate,
    "evolve_rate": run_evolve_rate,
    "fluctuations": run_fluctuations,
    "bias": run_bias,
    "invariants": run_invariants,
    "straszewicz": run_straszewicz,
    "softmin_stats": run_softmin_stats,
}


def run_experiment(cfg: ExperimentConfig, threads: int | None = None) -> ExperimentRecord:
    if cfg.kind is None:
        raise ValueError("configuration does not name an experiment kind")
    return RUNNERS[cfg.kind](cfg, threads)


def with_kind(cfg: ExperimentConfig, kind: str, **updates) -> ExperimentConfig:
    """Copy of cfg with another kind and top-level overrides (validated again)."""
    data = cfg.model_dump()
    data.update(kind=kind, **updates)
    return type(cfg).model_validate(data)
