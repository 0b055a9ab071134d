"""Monotone finite-difference scheme for -tr(A D^2 w) + H(Dw, y) and its solver.

The scheme uses centred second differences for the (isotropic) diffusion and
Godunov upwinding for the gradient.  Stationary problems are solved by
nonlinear Gauss-Seidel: every node update solves the local discrete equation
exactly given its neighbours, and the node ordering alternates between the
2^d axis directions (fast sweeping).  The update map is monotone in the
neighbour values and commutes with constants when the zeroth-order term
vanishes, so each pass is non-expansive in the max norm.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels as K
from .grid import INTERIOR, GridDomain, ScalarField

DISCRETIZATIONS = {"upwind_godunov": K.UPWIND, "centered": K.CENTERED}


class NonConvergenceError(RuntimeError):
    """Raised when the sweep budget is exhausted before the residual tolerance."""

    def __init__(self, residual: float, sweeps: int):
        super().__init__(f"no convergence after {sweeps} sweeps; residual {residual:.3e}")
        self.residual = residual
        self.sweeps = sweeps


@dataclass(frozen=True)
class SchemeParams:
    """Solver settings.

    ``residual_tol=None`` means 1e-6 * (1 + mu).  ``discretization="centered"``
    replaces upwinding by centred gradients; it is not monotone and exists only
    as a negative control.
    """

    residual_tol: float | None = None
    max_sweeps: int = 100_000
    discretization: str = "upwind_godunov"
    orderings: tuple = (0, 1, 2, 3)

    def tol(self, mu: float) -> float:
        return self.residual_tol if self.residual_tol is not None else 1e-6 * (1.0 + abs(mu))

    def code(self) -> int:
        try:
            return DISCRETIZATIONS[self.discretization]
        except KeyError:
            raise ValueError(f"unknown discretization {self.discretization!r}") from None

    @staticmethod
    def pseudo_time_step(d: int, h: float, Lambda: float, G: float) -> float:
        """Largest explicit relaxation step keeping the update monotone.

        Gauss-Seidel with exact local solves is the implicit limit of this
        relaxation; the bound is reported for reference and used by the
        time-dependent solver.
        """
        return h * h / (2.0 * d * Lambda + h * G)


@dataclass(frozen=True, eq=False)
class GridCoefficients:
    """Coefficient arrays sampled on a grid, in the 2-D kernel layout."""

    coef: np.ndarray
    potential: np.ndarray
    alpha: np.ndarray
    q: float


def _as2d(a: np.ndarray) -> np.ndarray:
    return np.ascontiguousarray(a.reshape(a.shape[0], -1) if a.ndim == 1 else a, dtype=float)


def grid_coefficients(env, domain: GridDomain, scale: float = 1.0) -> GridCoefficients:
    """Sample a, V and alpha = s^2/2 at the grid nodes.

    ``scale`` evaluates the environment at y / scale (the fast variable of an
    oscillating problem).
    """
    pts = domain.coords() / scale
    a, pot, s = env.fields(pts)
    return GridCoefficients(_as2d(a), _as2d(pot), _as2d(0.5 * s * s), float(env.q))


def operator_field(
    env, w: ScalarField, *, c0: float = 0.0, scheme: SchemeParams | None = None,
    coefficients: GridCoefficients | None = None,
) -> np.ndarray:
    """Discrete c0 w - tr(A D^2 w) + H(Dw, y) at every interior node (NaN elsewhere)."""
    scheme = scheme or SchemeParams()
    co = coefficients or grid_coefficients(env, w.domain)
    vals = _as2d(w.values)
    out = np.empty_like(vals)
    K.operator_values(vals, _as2d(w.domain.mask).astype(np.int8), co.coef, co.alpha, float(c0),
                      co.q, w.domain.h, scheme.code(), out)
    out -= np.where(np.isnan(out), 0.0, co.potential)
    return out.reshape(w.values.shape)


def apply_operator(env, w: ScalarField, cell) -> float:
    """Discrete -tr(A D^2 w) + H(Dw, y) at one interior node."""
    cell = tuple(int(c) for c in np.atleast_1d(cell))
    if len(cell) != w.domain.d:
        raise ValueError("cell index has the wrong dimension")
    for c, n in zip(cell, w.domain.shape):
        if not 0 < c < n - 1:
            raise ValueError(f"cell {cell} has no full stencil")
    if w.domain.mask[cell] != INTERIOR:
        raise ValueError(f"cell {cell} is not an interior node")
    return float(operator_field(env, w)[cell])


def solve_stationary(
    env,
    domain: GridDomain,
    mu: float,
    dirichlet: ScalarField,
    scheme: SchemeParams | None = None,
    *,
    c0: float = 0.0,
    source_term: np.ndarray | None = None,
    coefficients: GridCoefficients | None = None,
) -> ScalarField:
    """Solve c0 w - tr(A D^2 w) + H(Dw, y) = mu + source_term on interior nodes.

    ``dirichlet`` supplies the fixed values on masked nodes and the initial
    guess on interior nodes.  Returns the field with ``sweeps`` and
    ``residual`` filled in.
    """
    scheme = scheme or SchemeParams()
    if not dirichlet.domain.same_grid(domain):
        raise ValueError("dirichlet field lives on a different grid")
    w0 = np.asarray(dirichlet.values, dtype=float)
    if not np.all(np.isfinite(w0)):
        raise ValueError("initial/dirichlet values must be finite")
    co = coefficients or grid_coefficients(env, domain)
    tol = scheme.tol(mu)
    code = scheme.code()
    mask = _as2d(domain.mask).astype(np.int8)
    w = _as2d(w0).copy()
    rhs = mu + co.potential
    if source_term is not None:
        rhs = rhs + _as2d(np.asarray(source_term, dtype=float))
    rhs = np.ascontiguousarray(rhs)
    out = np.empty_like(w)
    interior = mask == INTERIOR

    def residual() -> float:
        K.operator_values(w, mask, co.coef, co.alpha, float(c0), co.q, domain.h, code, out)
        if not interior.any():
            return 0.0
        return float(np.max(np.abs(out[interior] - rhs[interior])))

    res = residual()
    sweeps = 0
    change_tol = tol
    while res > tol:
        if sweeps >= scheme.max_sweeps:
            raise NonConvergenceError(res, sweeps)
        biggest = 0.0
        for o in scheme.orderings:
            ri, rj = K.ORDERINGS[o]
            biggest = max(biggest, K.sweep(w, mask, co.coef, rhs, co.alpha, float(c0), co.q,
                                           domain.h, ri, rj, code))
            sweeps += 1
        if not math.isfinite(biggest):
            raise NonConvergenceError(math.inf, sweeps)
        if biggest <= change_tol:
            res = residual()
            change_tol *= 0.1
    return ScalarField(domain, w.reshape(domain.shape), sweeps=sweeps, residual=res)


@dataclass(frozen=True)
class DefectReport:
    """Largest violation of an inequality and where it occurs."""

    side: str
    max_defect: float
    location: tuple | None
    tol: float

    @property
    def passed(self) -> bool:
        return self.max_defect <= self.tol


def _defect_report(defect: np.ndarray, region: np.ndarray, domain: GridDomain, side: str, tol: float):
    vals = np.where(region, defect, -np.inf)
    if not region.any():
        return DefectReport(side, 0.0, None, tol)
    idx = np.unravel_index(int(np.argmax(vals)), vals.shape)
    point = tuple(float(ax[i]) for ax, i in zip(domain.axes(), idx))
    return DefectReport(side, float(max(vals[idx], 0.0)), point, tol)


def check_viscosity_inequality(
    env, w: ScalarField, mu: float, side: str, tol: float, *, c0: float = 0.0,
    source_term: np.ndarray | None = None, region: np.ndarray | None = None,
    coefficients: GridCoefficients | None = None,
) -> DefectReport:
    """Per-node defect of the sub- or supersolution inequality at level mu."""
    if side not in ("sub", "super"):
        raise ValueError("side must be 'sub' or 'super'")
    val = operator_field(env, w, c0=c0, coefficients=coefficients) - mu
    if source_term is not None:
        val = val - source_term
    defect = val if side == "sub" else -val
    mask = w.domain.mask == INTERIOR
    if region is not None:
        mask = mask & region
    return _defect_report(np.maximum(defect, 0.0), mask, w.domain, side, tol)


def comparison_defect(sub: ScalarField, sup: ScalarField) -> float:
    """max(0, max over interior nodes of sub - sup)."""
    if not sub.domain.same_grid(sup.domain):
        raise ValueError("fields live on different grids")
    interior = sub.domain.mask == INTERIOR
    if not interior.any():
        return 0.0
    return float(max(np.max((sub.values - sup.values)[interior]), 0.0))
