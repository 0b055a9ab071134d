"""Planar convex bodies: support functions, r-hulls and r-strict convexity.

A vertex v of a convex polygon K is r-strictly convex when some closed ball
of radius r contains K and has v on its boundary.  Writing n for the outward
unit normal of that ball at v, the centre is v - r n, and containment of a
vertex w is equivalent to

    n . (v - w) / |v - w| >= |v - w| / (2 r),

an arc of admissible normal angles around the direction of v - w.  The
vertex is r-strictly convex exactly when all these arcs intersect.

The r-hull K^r (intersection of all r-balls containing K) is the polygon of
r-strictly convex vertices with every edge replaced by the outward circular
arc of radius r through its endpoints.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial import ConvexHull, QhullError


@dataclass(frozen=True, eq=False)
class ConvexBody2D:
    """Counter-clockwise convex polygon; ``degenerate`` marks segments and points."""

    vertices: np.ndarray
    degenerate: bool = False

    @classmethod
    def from_points(cls, points) -> "ConvexBody2D":
        pts = np.unique(np.asarray(points, dtype=float).reshape(-1, 2), axis=0)
        if len(pts) == 1:
            return cls(pts, True)
        try:
            hull = ConvexHull(pts)
        except QhullError:
            hull = None
        if hull is None or hull.volume <= 1e-14 * max(np.ptp(pts, axis=0).max(), 1.0) ** 2:
            centred = pts - pts.mean(axis=0)
            axis = np.linalg.svd(centred, full_matrices=False)[2][0]
            proj = centred @ axis
            return cls(pts[[int(np.argmin(proj)), int(np.argmax(proj))]], True)
        v = pts[hull.vertices]
        area = 0.5 * np.sum(v[:, 0] * np.roll(v[:, 1], -1) - np.roll(v[:, 0], -1) * v[:, 1])
        if area < 0:
            v = v[::-1]
        return cls(v, False)

    @classmethod
    def regular(cls, n: int, radius: float, center=(0.0, 0.0)) -> "ConvexBody2D":
        ang = 2.0 * np.pi * np.arange(n) / n
        c = np.asarray(center, dtype=float)
        return cls(c + radius * np.stack([np.cos(ang), np.sin(ang)], axis=1), False)

    @property
    def diam(self) -> float:
        v = self.vertices
        return float(np.max(np.linalg.norm(v[:, None, :] - v[None, :, :], axis=-1)))

    @property
    def area(self) -> float:
        v = self.vertices
        return float(0.5 * abs(np.sum(v[:, 0] * np.roll(v[:, 1], -1) - np.roll(v[:, 0], -1) * v[:, 1])))

    def is_convex(self, tol: float = 1e-12) -> bool:
        v = self.vertices
        if len(v) < 3:
            return True
        a = np.roll(v, -1, axis=0) - v
        b = np.roll(v, -2, axis=0) - np.roll(v, -1, axis=0)
        cross = a[:, 0] * b[:, 1] - a[:, 1] * b[:, 0]
        return bool(np.all(cross >= -tol))


def support_function(K: ConvexBody2D, x) -> np.ndarray:
    """max over vertices v of x . v; broadcasts over leading axes of x."""
    out = np.max(np.asarray(x, dtype=float) @ K.vertices.T, axis=-1)
    return float(out) if np.ndim(out) == 0 else out


def normal_interval(K: ConvexBody2D, i: int, r: float, tol: float = 1e-12):
    """Admissible outward-normal angles [lo, hi] of r-balls through vertex i, or None."""
    v = K.vertices[i]
    others = np.delete(K.vertices, i, axis=0)
    if len(others) == 0:
        return (-math.pi, math.pi)
    diff = v - others
    dist = np.linalg.norm(diff, axis=1)
    keep = dist > 0
    diff, dist = diff[keep], dist[keep]
    if np.any(dist > 2 * r):
        return None
    centre = np.arctan2(diff[:, 1], diff[:, 0])
    half = np.arccos(np.minimum(dist / (2 * r), 1.0))
    ref = centre[0]
    rel = (centre - ref + math.pi) % (2 * math.pi) - math.pi
    lo = float(np.max(rel - half))
    hi = float(np.min(rel + half))
    if lo > hi + tol:
        return None
    return (ref + lo, ref + max(hi, lo))


def strict_vertices(K: ConvexBody2D, r: float) -> list[int]:
    return [i for i in range(len(K.vertices)) if normal_interval(K, i, r) is not None]


@dataclass(frozen=True, eq=False)
class StraszewiczResult:
    """Hausdorff gap between the hull of r-strict points and the r-hull.

    ``arcs`` lists (centre, start, end) of the boundary arcs of the r-hull.
    """

    gap: float
    bound: float
    inner: ConvexBody2D
    arcs: list
    strict: list
    r: float

    @property
    def holds(self) -> bool:
        return self.gap <= self.bound


def straszewicz_gap(K: ConvexBody2D, r: float, *, tol: float = 1e-9) -> StraszewiczResult:
    """Compare conv(r-strict points of K) with the r-hull of K for r > diam K."""
    diam = K.diam
    if not r > diam:
        raise ValueError(f"radius {r} must exceed the diameter {diam}")
    idx = strict_vertices(K, r)
    pts = K.vertices[idx]
    inner = ConvexBody2D(pts, len(pts) < 3)
    arcs = []
    gap = 0.0
    n = len(pts)
    for k in range(n if n > 1 else 0):
        a, b = pts[k], pts[(k + 1) % n]
        chord = b - a
        ell = float(np.linalg.norm(chord))
        inward = np.array([-chord[1], chord[0]]) / ell
        centre = 0.5 * (a + b) + inward * math.sqrt(r * r - 0.25 * ell * ell)
        if np.max(np.linalg.norm(K.vertices - centre, axis=1)) > r * (1 + tol) + tol:
            raise ArithmeticError("r-hull arc does not contain the body")
        arcs.append((centre, a, b))
        gap = max(gap, r - math.sqrt(r * r - 0.25 * ell * ell))
    return StraszewiczResult(gap=gap, bound=diam * diam / r, inner=inner, arcs=arcs, strict=idx, r=r)


@dataclass(frozen=True)
class FlatnessReport:
    """Defects of 0 <= mbar(e + x) - mbar(e) - p.x <= r|x|^2 over probes."""

    p: tuple
    e: tuple
    lower_defect: float
    upper_defect: float
    tol: float

    @property
    def passed(self) -> bool:
        return self.lower_defect <= self.tol and self.upper_defect <= self.tol


def strict_convexity_flatness(K: ConvexBody2D, mu: float, r: float, x_probes, *,
                              vertex: int | None = None, tol: float = 1e-12) -> FlatnessReport:
    """Check the quadratic flatness of mbar_mu = support function of K near an exposed normal.

    ``mu`` labels the level set K = {Hbar <= mu} and is carried for reporting only.
    """
    if vertex is None:
        cands = strict_vertices(K, r)
        if not cands:
            raise ValueError("K has no r-strictly convex vertex")
        vertex = cands[0]
    iv = normal_interval(K, vertex, r)
    if iv is None:
        raise ValueError(f"vertex {vertex} is not r-strictly convex for r={r}")
    ang = 0.5 * (iv[0] + iv[1])
    e = np.array([math.cos(ang), math.sin(ang)])
    p = K.vertices[vertex]
    x = np.asarray(x_probes, dtype=float).reshape(-1, 2)
    vals = np.max((e + x) @ K.vertices.T, axis=1) - float(np.max(K.vertices @ e)) - x @ p
    lower = float(np.max(np.maximum(-vals, 0.0)))
    upper = float(np.max(np.maximum(vals - r * np.sum(x * x, axis=1), 0.0)))
    return FlatnessReport(tuple(p), tuple(e), lower, upper, tol)


def level_set_body(table, mu: float) -> ConvexBody2D:
    """Convex hull of {Hbar <= mu} on a 2-D table, with edges cut by linear interpolation."""
    if table.d != 2:
        raise ValueError("level sets are polygons only for two-dimensional tables")
    ax0, ax1 = table.axes
    v = table.values
    pts = []
    grid = np.stack(np.meshgrid(ax0, ax1, indexing="ij"), axis=-1)
    inside = v <= mu
    pts.extend(grid[inside].tolist())
    for axis in (0, 1):
        a = np.moveaxis(v, axis, 0)
        g = np.moveaxis(grid, axis, 0)
        va, vb = a[:-1], a[1:]
        cross = (va - mu) * (vb - mu) < 0
        if cross.any():
            s = ((mu - va) / (vb - va))[cross][:, None]
            pts.extend((g[:-1][cross] + s * (g[1:][cross] - g[:-1][cross])).tolist())
    if not pts:
        raise ValueError(f"level {mu} is below the table minimum")
    return ConvexBody2D.from_points(np.array(pts))
