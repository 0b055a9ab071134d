"""Random coefficient fields (Sigma, H) for viscous Hamilton-Jacobi equations.

Every environment has the separable form

    H(p, y) = a(y) |p|^q - V(y),        Sigma(y) = s(y) I,

so that A(y) = Sigma^T Sigma / 2 = alpha(y) I with alpha = s^2 / 2.  The
coefficient a and the diffusion amplitude s may be modulated by a texture
field tau(y) in [0, 1] built from the same random inputs as the potential V.

Random inputs are generated counter-style: each lattice block of cells draws
its data from a Philox stream keyed by (seed, replica) whose counter encodes
the block coordinates.  Values therefore never depend on evaluation order or
on how many threads are evaluating.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass, field, replace
from typing import Callable

import numba as nb
import numpy as np

KINDS = ("deterministic", "periodic", "poisson_bumps", "checkerboard")
SIGMA_KINDS = ("zero", "constant_isotropic", "bump_modulated")

# cells per block edge for the counter-based generator
_BLOCK = 8
_OFFSET = 1 << 40
_TAG_BUMPS, _TAG_CHECKER, _TAG_PHASE = 1, 2, 3


class InvalidParameters(ValueError):
    """Raised when environment parameters violate the structural hypotheses."""


@dataclass(frozen=True)
class EnvParams:
    """Parameters of an environment family.

    ``V_max`` is the potential amplitude cap for every family.  For
    ``checkerboard`` the potential is ``V_max`` times the mollified cell field;
    for ``periodic`` it oscillates between 0 and ``V_max``.  Setting
    ``constrained`` forces V = 0 so that H(p, y) >= a_min |p|^q.
    """

    d: int = 2
    q: float = 2.0
    Lambda: float = 1.0
    kind: str = "deterministic"
    intensity: float = 1.0
    bump_radius: float = 0.5
    bump_amplitude: float = 1.0
    V_max: float = 1.0
    cell_size: float | None = None
    smoothing_radius: float | None = None
    zero_fraction: float = 0.5
    period: float = 1.0
    a0: float = 1.0
    a_modulation: float = 0.0
    sigma_kind: str = "zero"
    sigma0: float = 0.0
    sigma_modulation: float = 0.0
    constrained: bool = False
    seed: int = 0
    replica: int = 0

    def resolved_cell_size(self) -> float:
        if self.cell_size is not None:
            return float(self.cell_size)
        return 0.5 if self.d == 1 else 0.4

    def resolved_smoothing(self) -> float:
        if self.smoothing_radius is not None:
            return float(self.smoothing_radius)
        return 0.25 if self.d == 1 else 0.15

    def problems(self) -> list[str]:
        """Return every violated parameter constraint as a readable message."""
        out = []
        if self.d not in (1, 2):
            out.append(f"d must be 1 or 2, got {self.d}")
        if not self.q > 1:
            out.append(f"q > 1 required, got q={self.q}")
        if not self.Lambda >= 1:
            out.append(f"Lambda >= 1 required, got Lambda={self.Lambda}")
        if self.kind not in KINDS:
            out.append(f"kind must be one of {KINDS}, got {self.kind!r}")
        if self.sigma_kind not in SIGMA_KINDS:
            out.append(f"sigma_kind must be one of {SIGMA_KINDS}, got {self.sigma_kind!r}")
        if self.kind == "poisson_bumps":
            if not 0 < self.bump_radius <= 0.5:
                out.append(f"bump radius must lie in (0, 1/2], got {self.bump_radius}")
            if self.intensity < 0:
                out.append(f"intensity must be >= 0, got {self.intensity}")
        if self.kind == "checkerboard" and self.d in (1, 2):
            s, rho = self.resolved_cell_size(), self.resolved_smoothing()
            if s <= 0 or rho < 0 or 2 * rho > s:
                out.append(f"checkerboard needs 0 <= 2*smoothing <= cell size, got {rho}, {s}")
            elif math.sqrt(self.d) * (s / 2 + rho) > 0.5 + 1e-12:
                out.append(
                    "checkerboard dependence range exceeds 1: "
                    f"sqrt(d)*(cell/2 + smoothing) = {math.sqrt(self.d) * (s / 2 + rho):.4g} > 1/2"
                )
        if self.kind == "periodic" and self.period <= 0:
            out.append(f"period must be positive, got {self.period}")
        if self.V_max < 0:
            out.append(f"V_max must be >= 0, got {self.V_max}")
        if not 0 <= self.zero_fraction <= 1:
            out.append(f"zero_fraction must lie in [0, 1], got {self.zero_fraction}")
        if self.a0 <= 0:
            out.append(f"a0 must be positive, got {self.a0}")
        if not 0 <= self.a_modulation < 1:
            out.append(f"a_modulation must lie in [0, 1), got {self.a_modulation}")
        if not 0 <= self.sigma_modulation <= 1:
            out.append(f"sigma_modulation must lie in [0, 1], got {self.sigma_modulation}")
        if self.sigma0 < 0:
            out.append(f"sigma0 must be >= 0, got {self.sigma0}")
        if self.sigma_kind != "zero" and self.d in (1, 2):
            if 0.5 * self.d * self.sigma0**2 > self.Lambda:
                out.append("diffusion bound violated: d*sigma0^2/2 > Lambda")
        if not 0 <= int(self.seed) < 2**64:
            out.append("seed must be a 64-bit unsigned integer")
        if int(self.replica) < 0:
            out.append("replica must be >= 0")
        return out


# ---------------------------------------------------------------------------
# numba field kernels


@nb.njit(cache=True, nogil=True)
def _bump(r2):
    if r2 >= 1.0:
        return 0.0
    return math.exp(1.0 - 1.0 / (1.0 - r2))


@nb.njit(cache=True, nogil=True)
def _bump_fields(pts, lo_cell, counts, pos, amp, radius, vmax, tau_out, v_out):
    n, d = pts.shape
    nx = counts.shape[0]
    ny = counts.shape[1]
    inv_r2 = 1.0 / (radius * radius)
    for i in range(n):
        cx = int(math.floor(pts[i, 0])) - lo_cell[0]
        cy = 0
        if d == 2:
            cy = int(math.floor(pts[i, 1])) - lo_cell[1]
        tsum = 0.0
        vsum = 0.0
        for ix in range(max(cx - 1, 0), min(cx + 2, nx)):
            jlo = max(cy - 1, 0) if d == 2 else 0
            jhi = min(cy + 2, ny) if d == 2 else 1
            for iy in range(jlo, jhi):
                for k in range(counts[ix, iy]):
                    # positions are stored relative to their unit cell
                    dx = pts[i, 0] - (ix + lo_cell[0] + pos[ix, iy, k, 0])
                    r2 = dx * dx
                    if d == 2:
                        dy = pts[i, 1] - (iy + lo_cell[1] + pos[ix, iy, k, 1])
                        r2 += dy * dy
                    b = _bump(r2 * inv_r2)
                    tsum += b
                    vsum += amp[ix, iy, k] * b
        tau_out[i] = min(tsum, 1.0)
        v_out[i] = min(vsum, vmax)


@nb.njit(cache=True, nogil=True, inline="always")
def _smooth_step(u):
    if u <= -1.0:
        return 0.0
    if u >= 1.0:
        return 1.0
    return 0.5 + 0.75 * u - 0.25 * u * u * u


@nb.njit(cache=True, nogil=True)
def _checker_fields(pts, lo_cell, xi, size, rho, tau_out):
    n, d = pts.shape
    nx = xi.shape[0]
    ny = xi.shape[1]
    for i in range(n):
        x = pts[i, 0]
        ix0 = int(math.floor((x - rho) / size))
        ix1 = int(math.floor((x + rho) / size))
        y = pts[i, 1] if d == 2 else 0.0
        iy0 = int(math.floor((y - rho) / size)) if d == 2 else 0
        iy1 = int(math.floor((y + rho) / size)) if d == 2 else 0
        acc = 0.0
        for cx in range(ix0, ix1 + 1):
            if rho > 0.0:
                wx = _smooth_step((x - cx * size) / rho) - _smooth_step((x - (cx + 1) * size) / rho)
            else:
                wx = 1.0
            if wx == 0.0:
                continue
            jx = cx - lo_cell[0]
            if jx < 0 or jx >= nx:
                continue
            for cy in range(iy0, iy1 + 1):
                if d == 2:
                    if rho > 0.0:
                        wy = _smooth_step((y - cy * size) / rho) - _smooth_step(
                            (y - (cy + 1) * size) / rho
                        )
                    else:
                        wy = 1.0
                    jy = cy - lo_cell[1]
                    if jy < 0 or jy >= ny:
                        continue
                else:
                    wy = 1.0
                    jy = 0
                acc += xi[jx, jy] * wx * wy
        tau_out[i] = min(max(acc, 0.0), 1.0)


# ---------------------------------------------------------------------------
# counter-based per-cell random data


def _stream(seed: int, replica: int, tag: int, bx: int, by: int) -> np.random.Generator:
    key = (int(seed) & (2**64 - 1)) | (int(replica) << 64)
    counter = ((bx + _OFFSET) << 64) | ((by + _OFFSET) << 128) | (tag << 192)
    return np.random.Generator(np.random.Philox(key=key, counter=counter))


class _CellData:
    """Lazily generated per-block random data, shared by translated copies."""

    def __init__(self, params: EnvParams):
        self.params = params
        self._blocks: dict[tuple[int, int], tuple] = {}
        self._lock = threading.Lock()
        lam = params.intensity
        self.k_cap = int(math.ceil(lam + 8.0 * math.sqrt(lam) + 8.0))

    def _make_block(self, bx: int, by: int):
        p = self.params
        shape = (_BLOCK, _BLOCK) if p.d == 2 else (_BLOCK, 1)
        if p.kind == "poisson_bumps":
            rng = _stream(p.seed, p.replica, _TAG_BUMPS, bx, by)
            counts = np.minimum(rng.poisson(p.intensity, size=shape), self.k_cap)
            pos = rng.random(shape + (self.k_cap, p.d))
            amp = p.bump_amplitude * (0.5 + 0.5 * rng.random(shape + (self.k_cap,)))
            return counts.astype(np.int64), pos, amp
        rng = _stream(p.seed, p.replica, _TAG_CHECKER, bx, by)
        zero = rng.random(shape) < p.zero_fraction
        vals = rng.random(shape)
        return (np.where(zero, 0.0, vals),)

    def block(self, bx: int, by: int):
        key = (bx, by)
        blk = self._blocks.get(key)
        if blk is None:
            with self._lock:
                blk = self._blocks.get(key)
                if blk is None:
                    blk = self._make_block(bx, by)
                    self._blocks[key] = blk
        return blk

    def table(self, lo_cell: np.ndarray, hi_cell: np.ndarray):
        """Assemble dense arrays of cell data for the inclusive cell range."""
        d = self.params.d
        lo = np.array([lo_cell[0], lo_cell[1] if d == 2 else 0], dtype=np.int64)
        hi = np.array([hi_cell[0], hi_cell[1] if d == 2 else 0], dtype=np.int64)
        blo = np.floor_divide(lo, _BLOCK)
        bhi = np.floor_divide(hi, _BLOCK)
        if d == 1:
            blo[1] = bhi[1] = 0
        cell_lo = blo * _BLOCK
        n = (bhi - blo + 1) * _BLOCK
        shape = (int(n[0]), int(n[1]) if d == 2 else 1)
        parts = None
        for bx in range(int(blo[0]), int(bhi[0]) + 1):
            for by in range(int(blo[1]), int(bhi[1]) + 1):
                blk = self.block(bx, by)
                if parts is None:
                    parts = [np.zeros(shape + a.shape[2:], dtype=a.dtype) for a in blk]
                sx = (bx - blo[0]) * _BLOCK
                sy = (by - blo[1]) * _BLOCK if d == 2 else 0
                ey = sy + (_BLOCK if d == 2 else 1)
                for dst, src in zip(parts, blk):
                    dst[sx : sx + _BLOCK, sy:ey] = src
        return cell_lo, parts


def _phases(p: EnvParams) -> np.ndarray:
    rng = _stream(p.seed, p.replica, _TAG_PHASE, 0, 0)
    return rng.random(p.d)


# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Environment:
    """One realization of the coefficient fields, optionally translated.

    ``shift`` implements the translation action: every evaluator reads the
    base fields at ``y + shift``.
    """

    params: EnvParams
    shift: np.ndarray = field(default=None)
    _data: _CellData | None = field(default=None, repr=False)
    _phase: np.ndarray | None = field(default=None, repr=False)

    @property
    def d(self) -> int:
        return self.params.d

    @property
    def q(self) -> float:
        return self.params.q

    @property
    def Lambda(self) -> float:
        return self.params.Lambda

    # -- raw fields ---------------------------------------------------------

    def _points(self, y) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        pts = y.reshape(-1, self.d) + self.shift
        return np.ascontiguousarray(pts)

    def texture_and_potential(self, y) -> tuple[np.ndarray, np.ndarray]:
        """Texture tau(y) in [0, 1] and the uncapped-by-flag potential."""
        y = np.asarray(y, dtype=float)
        if y.ndim == 0 or y.shape[-1] != self.d:
            raise ValueError(f"points must have shape (..., {self.d}), got {y.shape}")
        out_shape = y.shape[:-1]
        pts = self._points(y)
        n = pts.shape[0]
        p = self.params
        if p.kind == "deterministic":
            tau = np.zeros(n)
            pot = np.zeros(n)
        elif p.kind == "periodic":
            arg = 2.0 * np.pi * (pts / p.period + self._phase)
            tau = np.mean(0.5 * (1.0 + np.cos(arg)), axis=1)
            pot = p.V_max * tau
        elif p.kind == "poisson_bumps":
            tau = np.empty(n)
            pot = np.empty(n)
            if n:
                lo = np.floor(pts.min(axis=0)).astype(np.int64) - 1
                hi = np.floor(pts.max(axis=0)).astype(np.int64) + 1
                cell_lo, (counts, pos, amp) = self._data.table(lo, hi)
                _bump_fields(pts, cell_lo, counts, pos, amp, p.bump_radius, p.V_max, tau, pot)
        else:
            size, rho = p.resolved_cell_size(), p.resolved_smoothing()
            tau = np.empty(n)
            if n:
                lo = np.floor((pts.min(axis=0) - rho) / size).astype(np.int64) - 1
                hi = np.floor((pts.max(axis=0) + rho) / size).astype(np.int64) + 1
                cell_lo, (xi,) = self._data.table(lo, hi)
                _checker_fields(pts, cell_lo, xi, size, rho, tau)
            pot = p.V_max * tau
        if p.constrained:
            pot = np.zeros(n)
        return tau.reshape(out_shape), pot.reshape(out_shape)

    def fields(self, y) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Return (a, V, s) at the points y, with y of shape (..., d)."""
        p = self.params
        tau, pot = self.texture_and_potential(y)
        a = p.a0 * (1.0 - p.a_modulation * tau)
        if p.sigma_kind == "zero":
            s = np.zeros_like(tau)
        elif p.sigma_kind == "constant_isotropic":
            s = np.full_like(tau, p.sigma0)
        else:
            s = p.sigma0 * (1.0 - p.sigma_modulation * tau)
        return a, pot, s

    # -- evaluators ---------------------------------------------------------

    def hamiltonian(self, p, y) -> np.ndarray:
        """H(p, y) = a(y)|p|^q - V(y), broadcasting over leading axes."""
        p = np.asarray(p, dtype=float)
        a, pot, _ = self.fields(y)
        return a * np.linalg.norm(p, axis=-1) ** self.q - pot

    def sigma(self, y) -> np.ndarray:
        """Sigma(y) = s(y) I as an array of shape (..., d, d)."""
        _, _, s = self.fields(y)
        return s[..., None, None] * np.eye(self.d)

    def diffusion(self, y) -> np.ndarray:
        """A(y) = Sigma^T Sigma / 2 as an array of shape (..., d, d)."""
        _, _, s = self.fields(y)
        return (0.5 * s**2)[..., None, None] * np.eye(self.d)

    def potential(self, y) -> np.ndarray:
        return self.fields(y)[1]

    def dependency_trace(self, y) -> frozenset:
        """Identifiers of the random inputs that the fields at y actually use.

        For Poisson bumps these are (cell, slot) pairs of bumps whose centre lies
        strictly within the bump radius; for the checkerboard, the cells carrying
        non-zero mollifier weight.  Deterministic and periodic families have no
        cell-local inputs and return an empty set.
        """
        pt = np.asarray(y, dtype=float).reshape(self.d) + self.shift
        p = self.params
        out = set()
        if p.kind == "poisson_bumps":
            base = np.floor(pt).astype(np.int64)
            lo, hi = base - 1, base + 1
            cell_lo, (counts, pos, _) = self._data.table(lo, hi)
            offsets = [(i, j) for i in (-1, 0, 1) for j in ((-1, 0, 1) if self.d == 2 else (0,))]
            for ox, oy in offsets:
                c = (int(base[0] + ox), int(base[1] + oy) if self.d == 2 else 0)
                ix, iy = c[0] - cell_lo[0], c[1] - cell_lo[1]
                for k in range(counts[ix, iy]):
                    # positions are stored relative to their unit cell
                    centre = np.array(c[: self.d], dtype=float) + pos[ix, iy, k, : self.d]
                    if np.linalg.norm(pt - centre) < p.bump_radius:
                        out.add((c, k))
        elif p.kind == "checkerboard":
            size, rho = p.resolved_cell_size(), p.resolved_smoothing()
            ranges = [
                range(int(math.floor((c - rho) / size)), int(math.floor((c + rho) / size)) + 1)
                for c in pt
            ]
            for cx in ranges[0]:
                for cy in ranges[1] if self.d == 2 else (0,):
                    wx = _smooth_step((pt[0] - cx * size) / rho) - _smooth_step(
                        (pt[0] - (cx + 1) * size) / rho
                    )
                    wy = 1.0
                    if self.d == 2:
                        wy = _smooth_step((pt[1] - cy * size) / rho) - _smooth_step(
                            (pt[1] - (cy + 1) * size) / rho
                        )
                    if wx * wy > 0:
                        out.add((cx, cy))
        return frozenset(out)

    def translate(self, z) -> "Environment":
        z = np.asarray(z, dtype=float).reshape(self.d)
        return replace(self, shift=self.shift + z)

    # -- structural constants -------------------------------------------------

    def coefficient_bounds(self) -> dict[str, float]:
        """Deterministic bounds on the fields, used by solvers for barriers and CFL."""
        p = self.params
        a_min = p.a0 * (1.0 - p.a_modulation)
        if p.kind == "deterministic":
            a_min = p.a0
        v_max = 0.0 if (p.constrained or p.kind == "deterministic") else p.V_max
        s_max = 0.0 if p.sigma_kind == "zero" else p.sigma0
        return {"a_min": a_min, "a_max": p.a0, "V_max": v_max, "alpha_max": 0.5 * s_max**2}


def build_environment(params: EnvParams) -> Environment:
    """Construct the environment for the given parameters and replica."""
    problems = params.problems()
    if problems:
        raise InvalidParameters("; ".join(problems))
    data = _CellData(params) if params.kind in ("poisson_bumps", "checkerboard") else None
    phase = _phases(params) if params.kind == "periodic" else None
    return Environment(params=params, shift=np.zeros(params.d), _data=data, _phase=phase)


def translate(env, z):
    """The translation action: the result evaluates env at y + z."""
    return env.translate(z)


@dataclass(frozen=True)
class EnvSampler:
    """Builds one independent environment per replica index."""

    params: EnvParams

    def __call__(self, replica: int) -> Environment:
        return build_environment(replace(self.params, replica=int(replica)))

    @property
    def d(self) -> int:
        return self.params.d


@dataclass(frozen=True, eq=False)
class CustomEnvironment:
    """Environment given by vectorized callables, used for checks and fixtures.

    ``hamiltonian(p, y)`` receives arrays of shape (n, d); ``sigma(y)`` returns
    shape (n, d, d).  Only validation works on custom environments; the grid
    solvers require the separable form of :class:`Environment`.
    """

    d: int
    q: float
    Lambda: float
    hamiltonian_fn: Callable
    sigma_fn: Callable | None = None
    shift: np.ndarray | None = None

    def hamiltonian(self, p, y):
        y = np.asarray(y, dtype=float)
        if self.shift is not None:
            y = y + self.shift
        return self.hamiltonian_fn(np.asarray(p, dtype=float), y)

    def sigma(self, y):
        y = np.asarray(y, dtype=float)
        if self.shift is not None:
            y = y + self.shift
        if self.sigma_fn is None:
            return np.zeros(y.shape[:-1] + (self.d, self.d))
        return self.sigma_fn(y)

    def diffusion(self, y):
        s = self.sigma(y)
        return 0.5 * np.swapaxes(s, -1, -2) @ s

    def translate(self, z):
        z = np.asarray(z, dtype=float).reshape(self.d)
        base = np.zeros(self.d) if self.shift is None else self.shift
        return replace(self, shift=base + z)


# ---------------------------------------------------------------------------
# hypothesis validation


@dataclass(frozen=True)
class HypothesisCheck:
    """One structural hypothesis evaluated on probes.

    ``margin`` is non-negative exactly when the check passes (up to tol);
    ``value`` is the raw measured statistic and ``worst`` the probe realising it.
    """

    name: str
    passed: bool
    margin: float
    value: float
    worst: tuple


@dataclass(frozen=True)
class ValidationReport:
    checks: tuple[HypothesisCheck, ...]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def __getitem__(self, name: str) -> HypothesisCheck:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def names(self) -> list[str]:
        return [c.name for c in self.checks]


def _norm(v):
    return np.linalg.norm(v, axis=-1)


def validate_environment(
    env, n_probes: int = 1000, tol: float = 1e-9, *, box: float = 10.0, p_max: float = 3.0,
    probe_seed: int = 0,
) -> ValidationReport:
    """Check the structural hypotheses of env on random probes.

    Lipschitz constants are probed with difference quotients over pairs at
    distance at most 0.05.  Failures are report entries, never exceptions.
    """
    if n_probes < 1:
        raise ValueError("n_probes must be >= 1")
    d, q, lam = env.d, env.q, env.Lambda
    rng = np.random.default_rng(probe_seed)
    y = rng.uniform(-box, box, size=(n_probes, d))
    z = y + rng.uniform(-0.05, 0.05, size=(n_probes, d))
    p1 = rng.uniform(-p_max, p_max, size=(n_probes, d))
    p2 = rng.uniform(-p_max, p_max, size=(n_probes, d))
    p3 = p1 + rng.uniform(-0.05, 0.05, size=(n_probes, d))
    zero = np.zeros_like(p1)

    h1 = env.hamiltonian(p1, y)
    h2 = env.hamiltonian(p2, y)
    hmid = env.hamiltonian(0.5 * (p1 + p2), y)
    h3 = env.hamiltonian(p3, y)
    h1z = env.hamiltonian(p1, z)
    h0 = env.hamiltonian(zero, y)
    sy = env.sigma(y)
    sz = env.sigma(z)
    n1 = _norm(p1)
    n3 = _norm(p3)
    dyz = _norm(y - z)
    dp = _norm(p1 - p3)

    checks = []

    def add(name, slack, value, idx, points):
        i = int(idx)
        margin = float(slack[i])
        checks.append(
            HypothesisCheck(name, bool(margin >= -tol), margin, float(value), tuple(np.ravel(points[i])))
        )

    half_sig = 0.5 * np.sum(sy**2, axis=(-2, -1))
    slack = lam - half_sig
    i = np.argmin(slack)
    add("sigma_bound", slack, half_sig[i], i, y)

    quot = np.sqrt(np.sum((sy - sz) ** 2, axis=(-2, -1))) / np.maximum(dyz, 1e-300)
    slack = lam - quot
    i = np.argmin(slack)
    add("sigma_lipschitz", slack, quot[i], i, y)

    slack = 0.5 * (h1 + h2) - hmid
    i = np.argmin(slack)
    add("convexity", slack, slack[i], i, p1)

    lower = n1**q / lam - lam
    slack = h1 - lower
    i = np.argmin(slack)
    add("growth_lower", slack, slack[i], i, y)

    upper = lam * n1**q + lam
    slack = upper - h1
    i = np.argmin(slack)
    add("growth_upper", slack, slack[i], i, y)

    quot = np.abs(h1 - h1z) / ((n1**q + 1.0) * np.maximum(dyz, 1e-300))
    slack = lam - quot
    i = np.argmin(slack)
    add("lipschitz_y", slack, quot[i], i, y)

    quot = np.abs(h1 - h3) / ((n1 + n3 + 1.0) ** (q - 1.0) * np.maximum(dp, 1e-300))
    slack = lam - quot
    i = np.argmin(slack)
    add("lipschitz_p", slack, quot[i], i, p1)

    slack = h1 - h0
    i = np.argmin(slack)
    add("minimum_at_zero", slack, slack[i], i, p1)

    # sup H(0, .) <= 0; the value reported is max H(0, .), i.e. -min V
    slack = -h0
    i = np.argmin(slack)
    add("imposition", slack, h0[i], i, y)

    return ValidationReport(tuple(checks))
