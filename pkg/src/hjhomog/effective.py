"""Front speeds m-bar and the effective Hamiltonian from metric solves.

The effective Hamiltonian is recovered as

    Hbar(p) = inf { mu > 0 : mbar_mu(e) >= p . e for every unit e },

where mbar_mu(e) is the large-scale speed of the metric front in direction e.
Speeds are estimated by Monte Carlo over independent replicas, with the same
replicas reused for every mu (common random numbers) so that the predicate
stays monotone in mu.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from .grid import GridDomain
from .metric import MU_MAX, MU_MIN, plane_points, solve_metric
from .parallel import run_replicas
from .pde_core import SchemeParams, grid_coefficients


def direction_grid(d: int, n: int = 64) -> np.ndarray:
    """Unit directions: +-1 in one dimension, n equally spaced angles in two."""
    if d == 1:
        return np.array([[1.0], [-1.0]])
    ang = 2.0 * np.pi * np.arange(n) / n
    return np.stack([np.cos(ang), np.sin(ang)], axis=1)


def passage_values(env, mu: float, points: np.ndarray, h: float, *, margin: float = 3.0,
                   scheme: SchemeParams | None = None, allow_small_mu: bool = False):
    """m_mu(z, 0) at the given points from one solve on a box covering them."""
    radius = float(np.max(np.abs(points))) + margin
    dom = GridDomain.centered(radius, h, env.d)
    sol = solve_metric(env, mu, np.zeros(env.d), dom, scheme, allow_small_mu=allow_small_mu,
                       coefficients=grid_coefficients(env, dom))
    return sol.sample(points), sol


@dataclass(frozen=True, eq=False)
class MbarEstimate:
    """Monte Carlo table of m(Re, 0)/R over replicas and radii.

    ``estimate`` normalizes the largest-radius passage by R - 1 (the source
    ball already has radius 1); ``subadditive_bound`` is min over R of
    mean(m/R) + L/R.
    """

    mu: float
    e: np.ndarray
    radii: np.ndarray
    values: np.ndarray
    mean: np.ndarray
    variance: np.ndarray
    n_replicas: int
    estimate: float
    subadditive_bound: float
    l_hat: float
    L_hat: float
    dropped: int


def estimate_mbar(env_sampler, mu: float, e, R_list, n_replicas: int, *, h: float = 0.1,
                  scheme: SchemeParams | None = None, threads: int | None = None,
                  allow_small_mu: bool = False) -> MbarEstimate:
    """Estimate mbar_mu(e) from passage values m(R e, 0) for R in R_list."""
    radii = np.asarray(R_list, dtype=float)
    if radii.size == 0 or np.any(np.diff(radii) <= 0) or radii[0] <= 1:
        raise ValueError("R_list must be increasing with all radii > 1")
    e = np.asarray(e, dtype=float).reshape(env_sampler.d)
    e = e / np.linalg.norm(e)
    pts = radii[:, None] * e[None, :]

    def one(r):
        vals, sol = passage_values(env_sampler(r), mu, pts, h, scheme=scheme,
                                   allow_small_mu=allow_small_mu)
        return vals, sol.l_hat, sol.L_hat

    res = run_replicas(one, range(n_replicas), threads)
    ok = [r for r in res if r is not None]
    passage = np.array([r[0] for r in ok])
    values = passage / radii
    mean = values.mean(axis=0)
    var = values.var(axis=0, ddof=1) if len(ok) > 1 else np.full(radii.size, np.nan)
    l_hat = min(r[1] for r in ok)
    L_hat = max(r[2] for r in ok)
    est = float(np.mean(passage[:, -1]) / (radii[-1] - 1.0))
    bound = float(np.min(mean + L_hat / radii))
    return MbarEstimate(mu=float(mu), e=e, radii=radii, values=values, mean=mean, variance=var,
                        n_replicas=len(ok), estimate=est, subadditive_bound=bound, l_hat=l_hat,
                        L_hat=L_hat, dropped=len(res) - len(ok))


class NonMonotonePredicate(RuntimeError):
    """The Monte Carlo speed estimates decreased with mu even after widening."""


@dataclass
class SpeedCache:
    """Per-(mu, replica) directional passage values m(R e_j, 0)."""

    R: float
    h: float
    directions: np.ndarray
    scheme: SchemeParams | None = None
    allow_small_mu: bool = False
    _store: dict = field(default_factory=dict)
    _lock: threading.Lock = field(default_factory=threading.Lock)

    def speeds(self, env_sampler, mu: float, replicas, threads=None) -> np.ndarray:
        """Mean over replicas of m(R e_j)/(R - 1) for every direction e_j."""
        todo = [r for r in replicas if (mu, r) not in self._store]
        pts = self.R * self.directions

        def one(r):
            vals, _ = passage_values(env_sampler(r), mu, pts, self.h, scheme=self.scheme,
                                     allow_small_mu=self.allow_small_mu)
            return vals

        for r, vals in zip(todo, run_replicas(one, todo, threads)):
            with self._lock:
                self._store[(mu, r)] = vals
        rows = [self._store[(mu, r)] for r in replicas if self._store[(mu, r)] is not None]
        return np.mean(np.array(rows), axis=0) / (self.R - 1.0)

    def mus(self) -> list[float]:
        return sorted({k[0] for k in self._store})


@dataclass(frozen=True)
class HbarEstimate:
    """Bisection result: Hbar(p) lies in [lo, hi]; ``saturated`` means Hbar <= mu_min."""

    p: tuple
    value: float
    lo: float
    hi: float
    saturated: bool
    n_replicas: int

    @property
    def halfwidth(self) -> float:
        return 0.5 * (self.hi - self.lo)


def estimate_hbar(env_sampler, p, tol: float, *, n_replicas: int = 1, R: float = 20.0,
                  h: float = 0.1, mu_min: float = MU_MIN, mu_max: float = MU_MAX,
                  n_directions: int = 64, scheme: SchemeParams | None = None,
                  threads: int | None = None, cache: SpeedCache | None = None) -> HbarEstimate:
    """Bisection over mu of the predicate min_e (mbar_mu(e) - p.e) >= 0."""
    p = np.asarray(p, dtype=float).reshape(env_sampler.d)
    if not np.any(p):
        return HbarEstimate(tuple(p), 0.0, 0.0, 0.0, False, n_replicas)
    if cache is None:
        cache = SpeedCache(R, h, direction_grid(env_sampler.d, n_directions), scheme,
                           allow_small_mu=mu_min < MU_MIN)
    dirs = cache.directions
    target = dirs @ p

    def attempt(n):
        replicas = range(n)

        def pred(mu):
            return bool(np.min(cache.speeds(env_sampler, mu, replicas, threads) - target) >= 0)

        if not pred(mu_max):
            raise ValueError(f"Hbar({p.tolist()}) exceeds mu_max={mu_max}")
        if pred(mu_min):
            return HbarEstimate(tuple(p), mu_min, 0.0, mu_min, True, n)
        lo, hi = mu_min, mu_max
        while hi - lo > tol:
            mid = 0.5 * (lo + hi)
            if pred(mid):
                hi = mid
            else:
                lo = mid
        speeds = np.array([cache.speeds(env_sampler, m, replicas, threads) for m in cache.mus()])
        monotone = bool(np.all(np.diff(speeds, axis=0) >= -1e-9))
        return HbarEstimate(tuple(p), 0.5 * (lo + hi), lo, hi, False, n) if monotone else None

    out = attempt(n_replicas)
    if out is None:
        out = attempt(2 * n_replicas)
        if out is None:
            raise NonMonotonePredicate(f"speed estimates not monotone in mu for p={p.tolist()}")
    return out


@dataclass(frozen=True, eq=False)
class HbarTable:
    """Effective Hamiltonian sampled on a p-grid.

    ``axes`` holds the grid axes; ``values`` has the grid shape.
    """

    axes: tuple
    values: np.ndarray
    halfwidth: np.ndarray
    mu_grid: tuple = ()
    n_directions: int = 0

    @property
    def d(self) -> int:
        return len(self.axes)

    @property
    def points(self) -> np.ndarray:
        return np.stack(np.meshgrid(*self.axes, indexing="ij"), axis=-1).reshape(-1, self.d)

    @classmethod
    def from_function(cls, axes, fn) -> "HbarTable":
        axes = tuple(np.asarray(a, dtype=float) for a in axes)
        grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
        vals = np.asarray(fn(grid), dtype=float)
        return cls(axes, vals, np.zeros_like(vals))

    def convexity_defect(self) -> float:
        """Largest violation of the midpoint inequality along grid lines, net of uncertainty."""
        worst = 0.0
        for ax in range(self.d):
            v = np.moveaxis(self.values, ax, 0)
            w = np.moveaxis(self.halfwidth, ax, 0)
            if v.shape[0] < 3:
                continue
            mid = v[1:-1] - 0.5 * (v[:-2] + v[2:])
            slack = w[1:-1] + 0.5 * (w[:-2] + w[2:])
            worst = max(worst, float(np.max(mid - slack)))
        return worst


def hbar_table(env_sampler, axes, tol: float, *, n_replicas: int = 1, R: float = 20.0,
               h: float = 0.1, mu_min: float = MU_MIN, mu_max: float = MU_MAX,
               n_directions: int = 64, scheme: SchemeParams | None = None,
               threads: int | None = None) -> HbarTable:
    """Estimate Hbar on the tensor grid spanned by ``axes``, sharing metric solves."""
    axes = tuple(np.asarray(a, dtype=float) for a in axes)
    cache = SpeedCache(R, h, direction_grid(len(axes), n_directions), scheme,
                       allow_small_mu=mu_min < MU_MIN)
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
    vals = np.empty(grid.shape[:-1])
    half = np.empty(grid.shape[:-1])
    for idx in np.ndindex(*vals.shape):
        est = estimate_hbar(env_sampler, grid[idx], tol, n_replicas=n_replicas, R=R, h=h,
                            mu_min=mu_min, mu_max=mu_max, scheme=scheme, threads=threads,
                            cache=cache)
        vals[idx] = est.value
        half[idx] = est.halfwidth
    return HbarTable(axes, vals, half, tuple(cache.mus()), len(cache.directions))


@dataclass(frozen=True, eq=False)
class LbarTable:
    """Convex conjugate of a tabulated Hbar, tabulated on a v-grid.

    Evaluation at arbitrary v uses the exact discrete conjugate
    max_j (p_j . v - Hbar_j), a piecewise-linear convex function.
    """

    p: np.ndarray
    hvals: np.ndarray
    v_axes: tuple
    values: np.ndarray
    v_reliable: float

    def __call__(self, v) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        d = self.p.shape[1]
        flat = v.reshape(-1, d)
        out = np.empty(flat.shape[0])
        for s in range(0, flat.shape[0], 4096):
            blk = flat[s : s + 4096]
            out[s : s + 4096] = np.max(blk @ self.p.T - self.hvals[None, :], axis=1)
        return out.reshape(v.shape[:-1])


def legendre_transform(table: HbarTable, v_axes=None) -> LbarTable:
    """Lbar(v) = max over the p-grid of p.v - Hbar(p).

    The reliable range is |v| <= the smallest outward slope of Hbar at the
    edge of the p-grid: beyond it the maximizer sits on the grid boundary.
    """
    p = table.points
    hv = table.values.reshape(-1)
    v_rel = math.inf
    for ax in range(table.d):
        v = np.moveaxis(table.values, ax, 0)
        a = table.axes[ax]
        lo = np.min((v[0] - v[1]) / (a[1] - a[0]))
        hi = np.min((v[-1] - v[-2]) / (a[-1] - a[-2]))
        v_rel = min(v_rel, float(lo), float(hi))
    v_rel = max(v_rel, 0.0)
    if v_axes is None:
        v_axes = tuple(np.linspace(-v_rel, v_rel, 201) for _ in range(table.d))
    v_axes = tuple(np.asarray(a, dtype=float) for a in v_axes)
    grid = np.stack(np.meshgrid(*v_axes, indexing="ij"), axis=-1)
    partial = LbarTable(p, hv, v_axes, np.empty(0), v_rel)
    return LbarTable(p, hv, v_axes, partial(grid), v_rel)


def conjugate_back(lbar: LbarTable, p_axes) -> np.ndarray:
    """max over the v-grid of p.v - Lbar(v): the biconjugate on a p-grid."""
    v = np.stack(np.meshgrid(*lbar.v_axes, indexing="ij"), axis=-1).reshape(-1, len(lbar.v_axes))
    lv = lbar.values.reshape(-1)
    grid = np.stack(np.meshgrid(*[np.asarray(a, float) for a in p_axes], indexing="ij"), axis=-1)
    flat = grid.reshape(-1, v.shape[1])
    return np.max(flat @ v.T - lv[None, :], axis=1).reshape(grid.shape[:-1])


@dataclass(frozen=True, eq=False)
class SoftminTable:
    """Monte Carlo soft-min passage statistics per plane level t.

    ``log_G[k]`` is the log of the truncated lattice sum of E exp(-sigma m(z, 0))
    and ``g = -log_G / sigma``.  ``superadditivity`` maps (t, s) to
    g(t + s) - g(t) - g(s).
    """

    mu: float
    sigma: float
    t: np.ndarray
    log_G: np.ndarray
    g: np.ndarray
    plane_mean: np.ndarray
    superadditivity: dict
    n_points: np.ndarray
    n_replicas: int
    l_hat: float
    L_hat: float


def softmin_passage_stats(env_sampler, mu: float, sigma: float, t_list, R: float,
                          n_replicas: int, *, h: float = 0.1, pairs=None, sides: int = 1,
                          scheme: SchemeParams | None = None,
                          threads: int | None = None) -> SoftminTable:
    """Estimate G and g over the lattice points of the planes {y_d = t} within B_R."""
    if not 0 < sigma <= 1:
        raise ValueError("sigma must lie in (0, 1]")
    ts = np.asarray(t_list, dtype=float)
    d = env_sampler.d
    planes = [plane_points(d, t, R, sides) for t in ts]
    allpts = np.concatenate(planes)

    def one(r):
        vals, sol = passage_values(env_sampler(r), mu, allpts, h, margin=2.0, scheme=scheme)
        if R < sol.L_hat / sol.l_hat * ts.max() - 1e-12:
            raise ValueError(
                f"truncation radius {R} below (L/l) max t = {sol.L_hat / sol.l_hat * ts.max():.4g}"
            )
        return vals, sol.l_hat, sol.L_hat

    res = [r for r in run_replicas(one, range(n_replicas), threads) if r is not None]
    n = len(res)
    counts = np.array([len(pl) for pl in planes])
    splits = np.cumsum(counts)[:-1]
    log_G = np.empty(ts.size)
    plane_mean = np.empty(ts.size)
    per_plane = [np.split(r[0], splits) for r in res]
    for k in range(ts.size):
        vals = np.concatenate([pp[k] for pp in per_plane])
        log_G[k] = logsumexp(-sigma * vals) - math.log(n)
        plane_mean[k] = np.mean([pp[k].min() for pp in per_plane])
    g = -log_G / sigma
    lookup = {float(t): g[i] for i, t in enumerate(ts)}
    sup = {}
    for t, s in pairs or []:
        if float(t + s) in lookup and float(t) in lookup and float(s) in lookup:
            sup[(float(t), float(s))] = lookup[float(t + s)] - lookup[float(t)] - lookup[float(s)]
    return SoftminTable(mu=float(mu), sigma=float(sigma), t=ts, log_G=log_G, g=g,
                        plane_mean=plane_mean, superadditivity=sup, n_points=counts,
                        n_replicas=n, l_hat=min(r[1] for r in res), L_hat=max(r[2] for r in res))
