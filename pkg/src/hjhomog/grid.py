"""Uniform Cartesian grids with interior / source / outer-boundary masks."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.interpolate import RegularGridInterpolator

INTERIOR, SOURCE, OUTER = 0, 1, 2


@dataclass(frozen=True, eq=False)
class GridDomain:
    """Cell-centred grid of spacing h; node (0, ..., 0) sits at ``lower``.

    The mask classifies every node as interior (0), Dirichlet source (1) or
    outer boundary (2).  The outermost layer is always outer boundary.
    """

    h: float
    lower: tuple
    shape: tuple
    mask: np.ndarray = field(repr=False, default=None)

    def __post_init__(self):
        if not self.h > 0:
            raise ValueError(f"grid spacing must be positive, got {self.h}")
        if len(self.lower) != len(self.shape) or len(self.shape) not in (1, 2):
            raise ValueError("lower and shape must both have length 1 or 2")
        if min(self.shape) < 3:
            raise ValueError("grid needs at least 3 nodes per axis")
        if self.mask is None:
            m = np.zeros(self.shape, dtype=np.int8)
            _mark_outer(m)
            object.__setattr__(self, "mask", m)
        elif self.mask.shape != tuple(self.shape):
            raise ValueError("mask shape does not match grid shape")

    @property
    def d(self) -> int:
        return len(self.shape)

    @classmethod
    def centered(cls, radius: float, h: float, d: int, center=None) -> "GridDomain":
        """Box [c - radius, c + radius]^d with the centre on a grid node.

        The centre is snapped to the lattice hZ^d so that grids of equal
        spacing always share nodes.
        """
        c = np.zeros(d) if center is None else np.asarray(center, dtype=float).reshape(d)
        c = np.round(c / h) * h
        n = int(math.ceil(radius / h - 1e-9))
        lower = tuple(float(x) for x in c - n * h)
        return cls(h=float(h), lower=lower, shape=(2 * n + 1,) * d)

    def axes(self) -> list[np.ndarray]:
        return [lo + self.h * np.arange(n) for lo, n in zip(self.lower, self.shape)]

    def coords(self) -> np.ndarray:
        """Node coordinates, shape (*shape, d)."""
        return np.stack(np.meshgrid(*self.axes(), indexing="ij"), axis=-1)

    @property
    def upper(self) -> tuple:
        return tuple(lo + self.h * (n - 1) for lo, n in zip(self.lower, self.shape))

    def index(self, point) -> tuple:
        """Index of the node nearest to point; raises if outside the box."""
        pt = np.asarray(point, dtype=float).reshape(self.d)
        idx = np.rint((pt - np.asarray(self.lower)) / self.h).astype(int)
        if np.any(idx < 0) or np.any(idx >= np.asarray(self.shape)):
            raise ValueError(f"point {pt.tolist()} lies outside the grid")
        return tuple(int(i) for i in idx)

    def contains(self, point) -> bool:
        pt = np.asarray(point, dtype=float).reshape(self.d)
        return bool(np.all(pt >= np.asarray(self.lower) - 1e-12) and np.all(pt <= np.asarray(self.upper) + 1e-12))

    def with_mask(self, mask: np.ndarray) -> "GridDomain":
        mask = np.asarray(mask, dtype=np.int8).copy()
        _mark_outer(mask)
        return replace(self, mask=mask)

    def same_grid(self, other: "GridDomain") -> bool:
        return (
            self.shape == other.shape
            and math.isclose(self.h, other.h, rel_tol=1e-12)
            and np.allclose(self.lower, other.lower, rtol=0, atol=1e-9 * self.h)
        )

    def offset_in(self, other: "GridDomain") -> tuple:
        """Index offset of this grid's node 0 inside a larger grid sharing the lattice."""
        if not math.isclose(self.h, other.h, rel_tol=1e-12):
            raise ValueError("grids have different spacing")
        off = (np.asarray(self.lower) - np.asarray(other.lower)) / self.h
        idx = np.rint(off).astype(int)
        if not np.allclose(off, idx, atol=1e-6):
            raise ValueError("grids do not share a lattice")
        if np.any(idx < 0) or np.any(idx + np.asarray(self.shape) > np.asarray(other.shape)):
            raise ValueError("grid is not contained in the other grid")
        return tuple(int(i) for i in idx)

    def distance_to_outer(self) -> np.ndarray:
        """Euclidean distance from each node to the nearest outer-boundary node."""
        from scipy.ndimage import distance_transform_edt

        return distance_transform_edt(self.mask != OUTER) * self.h

    @property
    def interior(self) -> np.ndarray:
        return self.mask == INTERIOR


def _mark_outer(mask: np.ndarray) -> None:
    for ax in range(mask.ndim):
        sl = [slice(None)] * mask.ndim
        sl[ax] = 0
        mask[tuple(sl)] = OUTER
        sl[ax] = -1
        mask[tuple(sl)] = OUTER


@dataclass(frozen=True, eq=False)
class ScalarField:
    """Values on a grid plus optional solver metadata."""

    domain: GridDomain
    values: np.ndarray = field(repr=False)
    sweeps: int | None = None
    residual: float | None = None

    def __post_init__(self):
        if self.values.shape != tuple(self.domain.shape):
            raise ValueError("field shape does not match domain")

    def at(self, point) -> float:
        """Value at the nearest node."""
        return float(self.values[self.domain.index(point)])

    def sample(self, points) -> np.ndarray:
        """Multilinear interpolation at points of shape (..., d)."""
        pts = np.asarray(points, dtype=float)
        interp = RegularGridInterpolator(self.domain.axes(), self.values, method="linear")
        return interp(pts.reshape(-1, self.domain.d)).reshape(pts.shape[:-1])
