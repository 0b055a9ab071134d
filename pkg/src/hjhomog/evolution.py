"""Time-dependent oscillating problem and its homogenized limit.

The eps-problem

    u_t = eps tr(A(x/eps) D^2 u) - H(Du, x/eps),   u(., 0) = g,

is advanced with an explicit monotone scheme (upwind gradient, centred
diffusion) on a grid that resolves the fast variable.  The homogenized
problem u_t + Hbar(Du) = 0 is solved by the Hopf-Lax formula with the
tabulated conjugate Lbar, and ``homog_error`` compares the two in sup norm.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import _kernels as K
from .effective import LbarTable
from .grid import GridDomain, ScalarField
from .parallel import run_replicas
from .pde_core import _as2d, grid_coefficients
from .stats import RateCurve, rate_curve

MAX_NODES = 4_000_000
GOLDEN = 0.5 * (math.sqrt(5.0) - 1.0)


class CFLViolation(RuntimeError):
    """The discrete gradient outgrew the bound used to choose the time step."""


@dataclass(frozen=True, eq=False)
class InitialDatum:
    """Closed-form initial condition with its gradient and C^{1,1} data.

    ``lipschitz`` bounds |Dg| and ``hessian_bound`` bounds |D^2 g| (infinite
    when g is only Lipschitz).
    """

    name: str
    d: int
    fn: Callable = None
    grad: Callable = None
    sup: float = 0.0
    lipschitz: float = 0.0
    hessian_bound: float = 0.0

    def __call__(self, x) -> np.ndarray:
        return self.fn(_points(x, self.d))

    def gradient(self, x) -> np.ndarray:
        return self.grad(_points(x, self.d))

    @property
    def c11_norm(self) -> float:
        return self.sup + self.lipschitz + self.hessian_bound

    @classmethod
    def cos_bump(cls, d: int, width: float = 1.0, height: float = 1.0) -> "InitialDatum":
        """height (1 + cos(pi |x| / width)) / 2 on |x| < width, zero outside."""
        k = math.pi / width

        def fn(x):
            r = np.linalg.norm(x, axis=-1)
            return np.where(r < width, 0.5 * height * (1.0 + np.cos(k * np.minimum(r, width))), 0.0)

        def grad(x):
            r = np.linalg.norm(x, axis=-1, keepdims=True)
            inside = r < width
            safe = np.where(r > 0, r, 1.0)
            radial = -0.5 * height * k * np.sin(k * np.minimum(r, width))
            return np.where(inside, radial * x / safe, 0.0)

        return cls("cos_bump", d, fn, grad, float(height), 0.5 * height * k,
                   0.5 * height * k * k)

    @classmethod
    def affine(cls, p0, c: float = 0.0) -> "InitialDatum":
        p0 = np.atleast_1d(np.asarray(p0, dtype=float))

        def fn(x):
            return x @ p0 + c

        def grad(x):
            return np.broadcast_to(p0, x.shape).copy()

        return cls("affine", p0.size, fn, grad, math.inf, float(np.linalg.norm(p0)), 0.0)

    @classmethod
    def zero(cls, d: int) -> "InitialDatum":
        return cls("zero", d, lambda x: np.zeros(x.shape[:-1]), lambda x: np.zeros(x.shape),
                   0.0, 0.0, 0.0)

    @classmethod
    def abs_value(cls, d: int, sign: float = 1.0) -> "InitialDatum":
        """sign * |x|: Lipschitz but not C^{1,1}, for Hopf-Lax checks only."""

        def fn(x):
            return sign * np.linalg.norm(x, axis=-1)

        def grad(x):
            r = np.linalg.norm(x, axis=-1, keepdims=True)
            return sign * x / np.where(r > 0, r, 1.0)

        return cls("abs", d, fn, grad, math.inf, 1.0, math.inf)


def _points(x, d: int) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if d == 1 and (x.ndim == 0 or x.shape[-1] != 1):
        x = x[..., None]
    if x.shape[-1] != d:
        raise ValueError(f"points must have shape (..., {d}), got {x.shape}")
    return x


@dataclass(frozen=True, eq=False)
class SpaceTimeField:
    """Slices u(., t_k) on a fixed grid at uniformly spaced times.

    ``dt`` is the internal step, which divides the slice spacing;
    ``gradient_max`` is the largest upwind gradient met during stepping.
    """

    domain: GridDomain
    times: np.ndarray
    values: np.ndarray
    dt: float
    eps: float
    gradient_max: float
    comparison_radius: float

    def slice(self, k: int) -> ScalarField:
        return ScalarField(self.domain, self.values[k])

    def sample(self, points, k: int) -> np.ndarray:
        return self.slice(k).sample(points)

    def lipschitz_estimate(self, n_pairs: int = 100, seed: int = 0) -> float:
        """Largest |u(x,t) - u(y,s)| / (|x-y| + |t-s|) over random node pairs in B_T."""
        rng = np.random.default_rng(seed)
        dom = self.domain
        coords = dom.coords().reshape(-1, dom.d)
        inside = np.flatnonzero(np.max(np.abs(coords), axis=1) <= self.comparison_radius)
        flat = self.values.reshape(len(self.times), -1)
        i = inside[rng.integers(0, inside.size, n_pairs)]
        j = inside[rng.integers(0, inside.size, n_pairs)]
        ki = rng.integers(0, len(self.times), n_pairs)
        kj = rng.integers(0, len(self.times), n_pairs)
        dist = np.linalg.norm(coords[i] - coords[j], axis=1) + np.abs(self.times[ki] - self.times[kj])
        ok = dist > 0
        quot = np.abs(flat[ki, i] - flat[kj, j])[ok] / dist[ok]
        return float(quot.max()) if quot.size else 0.0


def _gradient_bound(env, g: InitialDatum, eps: float) -> float:
    """A priori bound for |Du^eps|, used to fix the CFL step.

    Comparison with g -+ C t bounds |u_t| by C = sup |H(Dg, .)| + eps sup|tr A D^2 g|,
    and coercivity then bounds a |Du|^q by C + V_max up to the diffusion term;
    the factor 2 leaves room for the latter.
    """
    b = env.coefficient_bounds()
    lg = g.lipschitz
    hess = g.hessian_bound if math.isfinite(g.hessian_bound) else 0.0
    c = b["a_max"] * lg ** env.q + b["V_max"] + eps * b["alpha_max"] * g.d * hess
    return 2.0 * max(lg, ((c + b["V_max"]) / b["a_min"]) ** (1.0 / env.q), 1.0)


def evolution_margin(env, g: InitialDatum, eps: float, T: float, h: float) -> float:
    """Distance boundary effects can travel by time T: characteristic speed plus diffusion spill."""
    b = env.coefficient_bounds()
    G = _gradient_bound(env, g, eps)
    speed = env.q * b["a_max"] * G ** (env.q - 1.0)
    return (speed + math.sqrt(eps * b["alpha_max"] / h)) * T + 1.0


def solve_ueps(env, g: InitialDatum, eps: float, T: float, domain: GridDomain | None = None, *,
               h: float | None = None, n_slices: int = 10, cfl: float = 0.9,
               comparison_radius: float | None = None) -> SpaceTimeField:
    """Explicit monotone time stepping of the eps-problem up to time T.

    The default grid has h = eps/8 and covers B_T enlarged by ``evolution_margin``;
    a supplied domain must be at least that large around B_T.
    """
    if not 0 < eps <= 1:
        raise ValueError(f"eps must lie in (0, 1], got {eps}")
    if not T > 0:
        raise ValueError(f"T must be positive, got {T}")
    if g.d != env.d:
        raise ValueError("initial datum and environment dimensions differ")
    d = env.d
    R_cmp = T if comparison_radius is None else float(comparison_radius)
    if domain is None:
        h = eps / 8.0 if h is None else float(h)
        radius = R_cmp + evolution_margin(env, g, eps, T, h)
        n_nodes = (2 * math.ceil(radius / h) + 1) ** d
        if n_nodes > MAX_NODES:
            raise MemoryError(f"{n_nodes} grid nodes exceed the budget of {MAX_NODES}")
        domain = GridDomain.centered(radius, h, d)
    h = domain.h
    if h > eps / 4.0 + 1e-15:
        raise ValueError(f"grid spacing {h} does not resolve the fast variable (need <= eps/4)")
    need = R_cmp + evolution_margin(env, g, eps, T, h)
    inner = min(min(-lo, lo + h * (n - 1)) for lo, n in zip(domain.lower, domain.shape))
    if inner < need - 1e-9:
        raise ValueError(f"domain reaches {inner:.3g} from the origin, margin needs {need:.3g}")

    co = grid_coefficients(env, domain, scale=eps)
    b = env.coefficient_bounds()
    G = _gradient_bound(env, g, eps)
    rate = 2.0 * d * eps * b["alpha_max"] / h**2 + d * env.q * b["a_max"] * G ** (env.q - 1.0) / h
    dt_max = cfl / rate
    slice_dt = T / n_slices
    n_sub = max(1, math.ceil(slice_dt / dt_max - 1e-12))
    dt = slice_dt / n_sub

    u = _as2d(g(domain.coords())).copy()
    out = np.empty_like(u)
    slices = [u.reshape(domain.shape).copy()]
    gmax = 0.0
    for _ in range(n_slices):
        for _ in range(n_sub):
            gs = K.explicit_step(u, out, co.coef, co.potential, co.alpha, co.q, h, dt, eps)
            gmax = max(gmax, gs)
            if gs > G:
                raise CFLViolation(f"gradient {gs:.4g} exceeded the step bound {G:.4g}")
            u, out = out, u
        if not np.all(np.isfinite(u)):
            raise CFLViolation("non-finite values during time stepping")
        slices.append(u.reshape(domain.shape).copy())
    times = slice_dt * np.arange(n_slices + 1)
    return SpaceTimeField(domain, times, np.array(slices), dt, float(eps), gmax, R_cmp)


def _search_points(d: int, radius: float, n: int) -> np.ndarray:
    ax = np.linspace(-radius, radius, n)
    if d == 1:
        return ax[:, None]
    grid = np.stack(np.meshgrid(ax, ax, indexing="ij"), axis=-1).reshape(-1, 2)
    return grid[np.linalg.norm(grid, axis=1) <= radius * (1 + 1e-12)]


def _golden(f, lo: float, hi: float, iters: int = 60) -> float:
    a, b = lo, hi
    c = b - GOLDEN * (b - a)
    e = a + GOLDEN * (b - a)
    fc, fe = f(c), f(e)
    for _ in range(iters):
        if fc <= fe:
            b, e, fe = e, c, fc
            c = b - GOLDEN * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, e, fe
            e = a + GOLDEN * (b - a)
            fe = f(e)
    return 0.5 * (a + b)


def hopf_lax_solve(g: InitialDatum, lbar: LbarTable, x, t: float, *, n_grid: int = 201,
                   refine: bool = True) -> float:
    """min over y of g(y) + t Lbar((x - y)/t), searched over |x - y| <= t v_reliable.

    The grid minimum (ties to the smallest |x - y|) is refined by golden-section
    line searches along each coordinate of the velocity.  A minimizer on the
    edge of the reliable velocity range raises ValueError.
    """
    if not t > 0:
        raise ValueError(f"t must be positive, got {t}")
    d = g.d
    x = np.asarray(x, dtype=float).reshape(d)
    vr = lbar.v_reliable
    if not vr > 0:
        raise ValueError("Lbar table has an empty reliable velocity range")
    vs = _search_points(d, vr, n_grid)

    def objective(v):
        v = np.atleast_2d(v)
        return g(x - t * v) + t * lbar(v)

    vals = objective(vs)
    best = float(vals.min())
    scale = max(1.0, abs(best))
    ties = np.flatnonzero(vals <= best + 1e-12 * scale)
    k = ties[np.argmin(np.linalg.norm(vs[ties], axis=1))]
    v0 = vs[k]
    step = 2.0 * vr / (n_grid - 1)
    if np.linalg.norm(v0) > vr - 0.5 * step:
        raise ValueError(f"Hopf-Lax minimizer at the edge of the reliable range |v| = {vr:.4g}")
    if not refine:
        return best
    v = v0.copy()
    for _ in range(2 if d == 2 else 1):
        for ax in range(d):
            def line(s, ax=ax):
                w = v.copy()
                w[ax] = s
                return float(objective(w)[0])
            s = _golden(line, v[ax] - step, v[ax] + step)
            cand = v.copy()
            cand[ax] = s
            if np.linalg.norm(cand) <= vr and line(s) <= float(objective(v)[0]):
                v = cand
    return float(min(best, float(objective(v)[0])))


def hopf_lax_field(g: InitialDatum, lbar: LbarTable, points, times, **kw) -> np.ndarray:
    """Hopf-Lax values on points x times; t = 0 returns g itself."""
    pts = _points(points, g.d).reshape(-1, g.d)
    out = np.empty((len(times), len(pts)))
    for k, t in enumerate(times):
        if t == 0:
            out[k] = g(pts)
        else:
            out[k] = [hopf_lax_solve(g, lbar, p, t, **kw) for p in pts]
    return out


def comparison_points(d: int, radius: float, spacing: float) -> np.ndarray:
    """Common comparison nodes spacing * Z^d inside B_radius."""
    n = int(math.floor(radius / spacing + 1e-9))
    ax = spacing * np.arange(-n, n + 1)
    if d == 1:
        return ax[:, None]
    grid = np.stack(np.meshgrid(ax, ax, indexing="ij"), axis=-1).reshape(-1, 2)
    return grid[np.linalg.norm(grid, axis=1) <= radius + 1e-9]


def homog_error(env_sampler, g: InitialDatum, eps_list, T: float, lbar: LbarTable,
                n_replicas: int, *, n_slices: int = 10, spacing: float = 0.05,
                h_factor: float = 0.125, threads: int | None = None,
                n_bootstrap: int = 200) -> RateCurve:
    """sup over x in B_T and slice times of |u^eps - u| per (eps, replica), with a fit against eps.

    ``lbar`` is the conjugate of an Hbar table that should cover
    |p| <= |Dg|_inf + 1; the homogenized values are computed once and shared.
    """
    eps_arr = np.asarray(eps_list, dtype=float)
    pts = comparison_points(g.d, T, spacing)
    times = T / n_slices * np.arange(n_slices + 1)
    u_hom = hopf_lax_field(g, lbar, pts, times)

    def one(r):
        env = env_sampler(r)
        row = []
        for eps in eps_arr:
            field = solve_ueps(env, g, float(eps), T, h=h_factor * eps, n_slices=n_slices)
            err = max(float(np.max(np.abs(field.sample(pts, k) - u_hom[k])))
                      for k in range(len(times)))
            row.append(err)
        return row

    rows = [r for r in run_replicas(one, range(n_replicas), threads) if r is not None]
    return rate_curve(eps_arr, np.array(rows), "eps", n_bootstrap)
