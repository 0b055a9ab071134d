"""Maximal subsolutions of the metric problem and their diagnostics.

For a level mu > 0 and a compact source K, m_mu(., K) solves

    -tr(A D^2 m) + H(Dm, y) = mu   outside K + closed unit ball,   m = 0 on it,

on a truncated box whose outer layer carries the barrier value
L_bar * dist(y, K + B_1).  The module also extracts sublevel fronts and
measures localization, dynamic-programming, soft-min and plane-passage
quantities built on top of such solves.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import distance_transform_edt, generate_binary_structure, label
from scipy.special import logsumexp

from . import _kernels as K
from .grid import INTERIOR, OUTER, SOURCE, GridDomain, ScalarField
from .pde_core import (
    GridCoefficients,
    SchemeParams,
    _as2d,
    operator_field,
    solve_stationary,
)

MU_MIN, MU_MAX = 0.25, 4.0
SLOPE_FLOOR = 1e-3


class SourceOutsideDomain(ValueError):
    """The fattened source does not fit strictly inside the grid."""


class ContainmentError(ValueError):
    """A sublevel set reaches too close to the boundary of a subdomain."""

    def __init__(self, message: str, cells: list):
        super().__init__(message)
        self.cells = cells


def barrier_slope(Lambda: float, q: float, mu: float) -> float:
    """Conservative Lipschitz overestimate used for the outer boundary data."""
    return 2.0 * (Lambda * (max(mu, MU_MAX) + 2.0 * Lambda)) ** (1.0 / q)


def safety_margin(Lambda: float, l: float, L: float, mu: float) -> float:
    """The constant a_mu controlling how deep a sublevel set must sit in a subdomain."""
    c = Lambda * L * L / (mu * l)
    return 1.0 + c * (4.0 * L / l + math.log(4.0 * Lambda * L**3 / (mu * l * l)))


@dataclass(frozen=True, eq=False)
class MetricSolution:
    """Converged maximal subsolution with empirical slope bounds.

    ``dirichlet`` marks the nodes where m = 0 (the fattened source) and
    ``dist`` holds dist(y, dirichlet set).  The slope bounds are taken over
    ``trusted`` nodes, i.e. interior nodes more than one unit away from the
    outer boundary.
    """

    mu: float
    source: np.ndarray | None
    dirichlet: np.ndarray
    domain: GridDomain
    m: ScalarField
    residual: float
    sweeps: int
    l_hat: float
    L_hat: float
    a_mu: float
    flagged: bool
    dist: np.ndarray
    trusted: np.ndarray
    barrier: float

    def value(self, point) -> float:
        return self.m.at(point)

    def sample(self, points) -> np.ndarray:
        return self.m.sample(points)


def _source_sets(domain: GridDomain, source, fatten: bool):
    coords = domain.coords()
    h = domain.h
    if isinstance(source, np.ndarray) and source.dtype == bool:
        if source.shape != tuple(domain.shape):
            raise ValueError("source cell set must match the grid shape")
        if not source.any():
            raise ValueError("source cell set is empty")
        cells = source.copy()
        if fatten:
            cells = distance_transform_edt(~cells) * h <= 1.0 + 1e-9
        dist = distance_transform_edt(~cells) * h
        return None, cells, dist
    x = np.asarray(source, dtype=float).reshape(domain.d)
    lo, hi = np.asarray(domain.lower), np.asarray(domain.upper)
    if np.any(x - 1.0 < lo + h * 0.999) or np.any(x + 1.0 > hi - h * 0.999):
        raise SourceOutsideDomain(f"ball of radius 1 around {x.tolist()} does not fit inside the grid")
    r = np.linalg.norm(coords - x, axis=-1)
    cells = r <= 1.0 + 1e-9
    return x, cells, np.maximum(r - 1.0, 0.0)


def _slopes(m: np.ndarray, domain: GridDomain, trusted: np.ndarray, dist: np.ndarray, cells):
    h = domain.h
    w = _as2d(m)
    g = np.empty_like(w)
    K.upwind_gradient_norm(w, _as2d(domain.mask).astype(np.int8), h, g)
    g = g.reshape(m.shape)
    region = trusted & ~cells
    if not region.any():
        return math.nan, math.nan
    lo = float(np.nanmin(g[region]))
    hi = float(np.nanmax(g[region]))
    for ax in range(m.ndim):
        diff = np.abs(np.diff(m, axis=ax)) / h
        both = np.minimum(np.take(region, range(m.shape[ax] - 1), axis=ax),
                          np.take(region, range(1, m.shape[ax]), axis=ax))
        if both.any():
            hi = max(hi, float(diff[both].max()))
    far = region & (dist >= h)
    if far.any():
        ratio = m[far] / dist[far]
        lo = min(lo, float(ratio.min()))
        hi = max(hi, float(ratio.max()))
    return lo, hi


def solve_metric(
    env,
    mu: float,
    source,
    domain: GridDomain,
    scheme: SchemeParams | None = None,
    *,
    fatten: bool = False,
    coefficients: GridCoefficients | None = None,
    allow_small_mu: bool = False,
) -> MetricSolution:
    """Maximal subsolution with zero data on the source set.

    ``source`` is either a point (the Dirichlet set is then the closed unit
    ball around it) or a boolean node mask used as the Dirichlet set itself;
    pass ``fatten=True`` to add the closed unit ball around every masked node.
    """
    if not mu > 0:
        raise ValueError(f"mu must be positive, got {mu}")
    if mu < MU_MIN and not allow_small_mu:
        warnings.warn(f"mu={mu} is below {MU_MIN}; rates degenerate as mu -> 0", stacklevel=2)
    if mu > MU_MAX:
        warnings.warn(f"mu={mu} exceeds the default range [{MU_MIN}, {MU_MAX}]", stacklevel=2)
    base = domain.with_mask(np.where(domain.mask == SOURCE, INTERIOR, domain.mask))
    x, cells, dist = _source_sets(base, source, fatten)
    if np.any(cells & (base.mask == OUTER)):
        raise SourceOutsideDomain("source set touches the outer boundary")
    mask = base.mask.copy()
    mask[cells] = SOURCE
    dom = base.with_mask(mask)
    L_bar = barrier_slope(env.Lambda, env.q, mu)
    init = ScalarField(dom, np.where(cells, 0.0, L_bar * dist))
    m = solve_stationary(env, dom, mu, init, scheme, coefficients=coefficients)
    trusted = (dom.mask == INTERIOR) & (dom.distance_to_outer() > 1.0 + 1e-9)
    l_hat, L_hat = _slopes(m.values, dom, trusted, dist, cells)
    flagged = not (l_hat >= SLOPE_FLOOR)
    a_mu = safety_margin(env.Lambda, l_hat, L_hat, mu) if not flagged else math.inf
    return MetricSolution(mu=float(mu), source=x, dirichlet=cells, domain=dom, m=m,
                          residual=float(m.residual), sweeps=int(m.sweeps), l_hat=l_hat,
                          L_hat=L_hat, a_mu=a_mu, flagged=flagged, dist=dist, trusted=trusted,
                          barrier=L_bar)


# ---------------------------------------------------------------------------
# fronts


@dataclass(frozen=True, eq=False)
class FrontSnapshot:
    t: float
    region: np.ndarray
    connected: bool
    n_components: int


def sublevel_front(sol: MetricSolution, t: float) -> FrontSnapshot:
    """The node set {m <= t} (outer layer excluded) and its connectivity."""
    if t < 0:
        raise ValueError("level must be non-negative")
    region = (sol.m.values <= t) & (sol.domain.mask != OUTER)
    _, n = label(region, structure=generate_binary_structure(region.ndim, region.ndim))
    return FrontSnapshot(float(t), region, n == 1, int(n))


def hausdorff(a: np.ndarray, b: np.ndarray, h: float) -> float:
    """Hausdorff distance between two node sets of a common grid."""
    if not a.any() or not b.any():
        return math.inf
    to_b = distance_transform_edt(~b) * h
    to_a = distance_transform_edt(~a) * h
    return float(max(to_b[a].max(), to_a[b].max()))


# ---------------------------------------------------------------------------
# localization


@dataclass(frozen=True, eq=False)
class GapCurve:
    """Truncation gap of a subdomain solve against a larger reference solve.

    ``gap[k]`` is the largest value of m^U - m over {m^U <= levels[k]} and
    ``depth[k] = T - levels[k]`` with T the largest level.
    """

    levels: np.ndarray
    depth: np.ndarray
    gap: np.ndarray
    min_gap: float
    a_mu: float
    l_hat: float
    L_hat: float
    tol: float


def localization_gap(
    env, mu: float, U: GridDomain, T_levels, *, source=None, reference_factor: float = 2.0,
    scheme: SchemeParams | None = None,
) -> GapCurve:
    """Compare the solve on U with one on a box reference_factor times larger."""
    scheme = scheme or SchemeParams()
    levels = np.sort(np.asarray(T_levels, dtype=float))
    if levels.size == 0:
        raise ValueError("T_levels is empty")
    src = np.zeros(U.d) if source is None else np.asarray(source, dtype=float)
    half = 0.5 * (np.asarray(U.upper) - np.asarray(U.lower))
    centre = 0.5 * (np.asarray(U.upper) + np.asarray(U.lower))
    ref_dom = GridDomain.centered(float(half.max()) * reference_factor, U.h, U.d, center=centre)
    off = U.offset_in(ref_dom)
    sol_u = solve_metric(env, mu, src, U, scheme)
    sl = tuple(slice(o, o + n) for o, n in zip(off, U.shape))
    sub = sol_u.m.values
    shrunk = (sol_u.domain.mask != OUTER) & (sol_u.domain.distance_to_outer() > 1.0 + 1e-9)
    bad = (sub <= levels[-1]) & ~shrunk
    if bad.any():
        coords = U.coords()[bad][:10]
        raise ContainmentError(
            f"{int(bad.sum())} nodes of {{m^U <= {levels[-1]}}} lie within distance 1 of the boundary",
            [tuple(c) for c in coords.tolist()],
        )
    sol_ref = solve_metric(env, mu, src, ref_dom, scheme)
    ref = sol_ref.m.values[sl]
    diff = sub - ref
    gaps = np.array([float(diff[(sub <= t) & (U.mask != OUTER)].max()) for t in levels])
    inside = sub <= levels[-1]
    return GapCurve(levels=levels, depth=levels[-1] - levels, gap=gaps,
                    min_gap=float(diff[inside].min()), a_mu=sol_u.a_mu, l_hat=sol_u.l_hat,
                    L_hat=sol_u.L_hat, tol=scheme.tol(mu))


# ---------------------------------------------------------------------------
# dynamic programming


def dpp_defect(
    env, mu: float, y, t: float, domain: GridDomain, *, sol: MetricSolution | None = None,
    scheme: SchemeParams | None = None,
) -> float:
    """|m(y, 0) - (t + m(y, R_t))| where R_t = {m(., 0) <= t} is the Dirichlet set."""
    if sol is None:
        sol = solve_metric(env, mu, np.zeros(domain.d), domain, scheme)
    front = sublevel_front(sol, t)
    idx = sol.domain.index(y)
    if front.region[idx]:
        raise ValueError(f"point {np.ravel(y).tolist()} lies inside the front at level {t}")
    second = solve_metric(env, mu, front.region, sol.domain, scheme)
    return float(abs(sol.m.values[idx] - (t + second.m.values[idx])))


def dpp_defects(sol: MetricSolution, env, ys, t: float, scheme: SchemeParams | None = None):
    """dpp_defect at several points from a single solve with R_t as the Dirichlet set.

    Returns (defects, second solution).
    """
    front = sublevel_front(sol, t)
    idx = [sol.domain.index(y) for y in np.asarray(ys, dtype=float).reshape(-1, sol.domain.d)]
    for y, i in zip(ys, idx):
        if front.region[i]:
            raise ValueError(f"point {np.ravel(y).tolist()} lies inside the front at level {t}")
    second = solve_metric(env, sol.mu, front.region, sol.domain, scheme)
    out = np.array([abs(sol.m.values[i] - (t + second.m.values[i])) for i in idx])
    return out, second


# ---------------------------------------------------------------------------
# soft-min


@dataclass(frozen=True)
class SoftminReport:
    """Largest operator value of the soft-min field against the claimed level."""

    max_operator: float
    level: float
    defect: float
    location: tuple | None
    L_hat: float


def softmin_subsolution(env, sols: list, theta: float):
    """Z = -log(sum_i exp(-theta m_i)) / theta and its subsolution defect.

    The operator of Z is evaluated on trusted nodes outside every source and
    compared with mu + 2 Lambda L^2 theta, with L the largest slope bound.
    """
    if not sols:
        raise ValueError("need at least one metric solution")
    if not theta > 0:
        raise ValueError("theta must be positive")
    dom = sols[0].domain
    mu = sols[0].mu
    for s in sols[1:]:
        if not s.domain.same_grid(dom) or s.mu != mu:
            raise ValueError("all solutions must share grid and mu")
    stack = np.stack([s.m.values for s in sols])
    z = -logsumexp(-theta * stack, axis=0) / theta
    union = np.zeros(dom.shape, dtype=bool)
    trusted = np.ones(dom.shape, dtype=bool)
    for s in sols:
        union |= s.dirichlet
        trusted &= s.trusted
    mask = dom.mask.copy()
    mask[union] = SOURCE
    zdom = dom.with_mask(mask)
    Z = ScalarField(zdom, z)
    L = max(s.L_hat for s in sols)
    level = mu + 2.0 * env.Lambda * L * L * theta
    region = trusted & ~union & (zdom.mask == INTERIOR)
    op = operator_field(env, Z)
    if region.any():
        vals = np.where(region, op, -np.inf)
        idx = np.unravel_index(int(np.argmax(vals)), vals.shape)
        top = float(vals[idx])
        loc = tuple(float(ax[i]) for ax, i in zip(zdom.axes(), idx))
    else:
        top, loc = -math.inf, None
    return Z, SoftminReport(top, level, max(top - level, 0.0), loc, L)


# ---------------------------------------------------------------------------
# plane passage


def plane_points(d: int, t: float, R: float, sides: int = 1) -> np.ndarray:
    """Integer lattice points of {y_d = t} (and {y_d = -t} if sides=2) within B_R."""
    tops = [t] if sides == 1 else [t, -t]
    pts = []
    for s in tops:
        if d == 1:
            if abs(s) <= R:
                pts.append([s])
            continue
        n = int(math.floor(math.sqrt(max(R * R - s * s, 0.0))))
        for k in range(-n, n + 1):
            pts.append([float(k), s])
    return np.array(pts, dtype=float).reshape(-1, d)


def plane_passage(
    env, mu: float, t: float, R: float, domain: GridDomain, *, sol: MetricSolution | None = None,
    sides: int = 1, scheme: SchemeParams | None = None,
) -> float:
    """min of m(z, 0) over lattice points z of the plane {y_d = t} within B_R."""
    if sol is None:
        sol = solve_metric(env, mu, np.zeros(domain.d), domain, scheme)
    if R < sol.L_hat / sol.l_hat * t - 1e-12:
        raise ValueError(f"truncation radius {R} below (L/l) t = {sol.L_hat / sol.l_hat * t:.4g}")
    pts = plane_points(domain.d, t, R, sides)
    if len(pts) == 0:
        raise ValueError("no lattice points on the plane inside B_R")
    for p in pts:
        if not sol.domain.contains(p):
            raise ValueError(f"lattice point {p.tolist()} lies outside the grid")
    return float(sol.sample(pts).min())
