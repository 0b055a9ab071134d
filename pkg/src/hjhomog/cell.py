"""Approximate cell problem delta v + H(Dv + p, y) - tr(A D^2 v) = 0.

The solver works with u = v + p.y, which satisfies

    delta u - tr(A D^2 u) + H(Du, y) = delta p.y

and has bounded gradient, so the same monotone scheme as the metric problem
applies with a zeroth-order term.  The whole-space problem is truncated to a
box of radius ~ 1/delta with constant boundary data for delta v: the first
pass uses the median of -H(p, y), the second re-imposes the median of delta v
from the first, and further passes move the constant by secant steps until it
agrees with the median it produces.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass

import numpy as np

from .grid import INTERIOR, GridDomain, ScalarField
from .parallel import run_replicas
from .pde_core import SchemeParams, grid_coefficients, solve_stationary
from .stats import RateCurve, rate_curve

log = logging.getLogger(__name__)

MAX_CELLS = 4_000_000


@dataclass(frozen=True, eq=False)
class CellSolution:
    """delta v on a truncated box, with boundary-sensitivity diagnostics.

    ``boundary_values`` lists the constant delta v imposed on the outer layer in
    each pass.  Passes after the second update the constant by a secant step on
    c -> median(delta v) - c, so the final boundary value is self-consistent.
    ``boundary_gain`` is d delta v(0) / dc from the last two passes and
    ``sensitivity`` is the change of delta v(0) that one more re-imposition of
    the median would cause, gain * |median - c|.
    """

    p: np.ndarray
    delta: float
    R_dom: float
    v: ScalarField
    dv0: float
    residual: float
    sweeps: int
    boundary_values: tuple
    sensitivity: float
    boundary_gain: float
    lipschitz: float

    @property
    def dv(self) -> np.ndarray:
        return self.delta * self.v.values


def _next_boundary(bvals: list, meds: list, lo: float, hi: float) -> float:
    """Secant step towards the constant c whose solve has median delta v equal to c.

    The step is clipped to [lo, hi], the constant sub- and supersolution bounds.
    """
    if len(bvals) < 2:
        return meds[-1]
    f0, f1 = meds[-2] - bvals[-2], meds[-1] - bvals[-1]
    if f1 == f0:
        return meds[-1]
    c = bvals[-1] - f1 * (bvals[-1] - bvals[-2]) / (f1 - f0)
    return float(min(max(c, lo), hi))


def solve_cell(env, p, delta: float, R_dom: float | None = None, *, h: float = 0.25,
               scheme: SchemeParams | None = None, max_passes: int = 12,
               pass_tol: float = 1e-4, min_passes: int = 2,
               c_init: float | None = None) -> CellSolution:
    """Solve the discounted cell problem at slope p on a box of radius R_dom (default 2/delta).

    ``c_init`` is the boundary constant of the first pass; by default the
    median of -H(p, y) over the grid, which is exact for constant coefficients.
    """
    if not 0 < delta <= 1:
        raise ValueError(f"delta must lie in (0, 1], got {delta}")
    d = env.d
    p = np.asarray(p, dtype=float).reshape(d)
    R = 2.0 / delta if R_dom is None else float(R_dom)
    n_cells = (2 * math.ceil(R / h) + 1) ** d
    if n_cells > MAX_CELLS:
        R_cap = h * ((MAX_CELLS ** (1.0 / d) - 1) // 2)
        warnings.warn(f"cell domain radius {R:.3g} capped at {R_cap:.3g} by the memory budget",
                      stacklevel=2)
        R = R_cap
    dom = GridDomain.centered(R, h, d)
    co = grid_coefficients(env, dom)
    y = dom.coords()
    py = y @ p
    pq = float(np.linalg.norm(p)) ** env.q
    outer = dom.mask != INTERIOR
    interior = ~outer
    origin = dom.index(np.zeros(d))

    # exact for constant coefficients: delta v = -H(p, y)
    local = -(co.coef.reshape(dom.shape) * pq - co.potential.reshape(dom.shape))
    # constants -max H(p, .) and -min H(p, .) are sub- and supersolutions for delta v
    c_lo, c_hi = float(local.min()), float(local.max())
    c = float(np.median(local)) if c_init is None else min(max(float(c_init), c_lo), c_hi)
    u = np.where(outer, py + c / delta, py + local / delta)
    bvals, meds, dv0s, sweeps, res = [], [], [], 0, math.nan
    for k in range(max_passes):
        u[outer] = py[outer] + c / delta
        sol = solve_stationary(env, dom, 0.0, ScalarField(dom, u), scheme, c0=delta,
                               source_term=delta * py, coefficients=co)
        u = sol.values.copy()
        sweeps += sol.sweeps
        res = sol.residual
        dv = delta * u - delta * py
        bvals.append(c)
        dv0s.append(float(dv[origin]))
        meds.append(float(np.median(dv[interior])))
        if k + 1 >= min_passes and abs(meds[-1] - c) <= pass_tol:
            break
        c = _next_boundary(bvals, meds, c_lo, c_hi)
    else:
        log.info("cell boundary median still moving after %d passes", max_passes)
    v = (u - py)
    if len(dv0s) > 1 and bvals[-1] != bvals[-2]:
        gain = abs((dv0s[-1] - dv0s[-2]) / (bvals[-1] - bvals[-2]))
    else:
        gain = math.nan
    sens = gain * abs(meds[-1] - bvals[-1])
    lip = 0.0
    for ax in range(d):
        diffs = np.abs(np.diff(v, axis=ax)) / h
        both = np.take(interior, range(dom.shape[ax] - 1), axis=ax) & np.take(
            interior, range(1, dom.shape[ax]), axis=ax)
        if both.any():
            lip = max(lip, float(diffs[both].max()))
    return CellSolution(p=p, delta=float(delta), R_dom=R, v=ScalarField(dom, v), dv0=dv0s[-1],
                        residual=float(res), sweeps=sweeps, boundary_values=tuple(bvals),
                        sensitivity=sens, boundary_gain=gain, lipschitz=lip)


def corrector_error(env_sampler, p, delta_list, hbar: float, n_replicas: int, *,
                    h: float = 0.25, R_factor: float = 2.0, scheme: SchemeParams | None = None,
                    threads: int | None = None, n_bootstrap: int = 200) -> RateCurve:
    """|delta v(0, p) + Hbar(p)| per replica and delta, with a power-law fit against delta."""
    deltas = np.asarray(delta_list, dtype=float)

    def one(r):
        # decreasing delta reuses the previous boundary constant as a warm start
        env = env_sampler(r)
        errs, c = {}, None
        for dl in sorted(deltas, reverse=True):
            sol = solve_cell(env, p, dl, R_factor / dl, h=h, scheme=scheme, c_init=c)
            errs[dl] = abs(sol.dv0 + hbar)
            c = sol.boundary_values[-1]
        return [errs[dl] for dl in deltas]

    rows = [r for r in run_replicas(one, range(n_replicas), threads) if r is not None]
    return rate_curve(deltas, np.array(rows), "delta", n_bootstrap)
