"""Compiled stencil kernels for the monotone scheme.

The discrete operator at an interior node is

    F[w] = c0 w - alpha * lap_h w + a * |D_h w|^q - rhs,

with the Godunov upwind gradient |D_h w|^2 = sum_k max(D-_k w, -D+_k w, 0)^2.
Grids are stored as 2-D arrays; a 1-D problem uses shape (n, 1).
"""

from __future__ import annotations

import math

import numba as nb
import numpy as np

UPWIND, CENTERED = 0, 1
# sweep orderings: (reverse first axis, reverse second axis)
ORDERINGS = ((0, 0), (1, 0), (1, 1), (0, 1))


@nb.njit(cache=True, nogil=True, inline="always")
def _newton(C, B, k, m0, m1, q, w, two):
    # convex increasing residual on its smooth piece; Newton from above
    for _ in range(100):
        t0 = w - m0
        if two:
            t1 = w - m1
            s = t0 * t0 + t1 * t1
            f = C * w + k * s ** (0.5 * q) - B
            fp = C + k * q * s ** (0.5 * q - 1.0) * (t0 + t1) if s > 0.0 else C
        else:
            f = C * w + k * t0**q - B
            fp = C + k * q * t0 ** (q - 1.0)
        if fp <= 0.0:
            break
        step = f / fp
        w -= step
        if abs(step) <= 1e-15 * (1.0 + abs(w)):
            break
    return w


@nb.njit(cache=True, nogil=True, inline="always")
def local_solve(C, B, k, m0, m1, q):
    """Root w of C w + k S(w)^{q/2} = B with S = sum_j max(w - m_j, 0)^2.

    ``m1`` is +inf for one-dimensional stencils.
    """
    if m0 > m1:
        m0, m1 = m1, m0
    if C > 0.0:
        w = B / C
        if w <= m0:
            return w
    elif B <= 0.0:
        return m0
    if q == 2.0:
        a = k
        b = C - 2.0 * k * m0
        c = k * m0 * m0 - B
        w = (-b + math.sqrt(max(b * b - 4.0 * a * c, 0.0))) / (2.0 * a)
        if w <= m1:
            return max(w, m0)
        a = 2.0 * k
        b = C - 2.0 * k * (m0 + m1)
        c = k * (m0 * m0 + m1 * m1) - B
        w = (-b + math.sqrt(max(b * b - 4.0 * a * c, 0.0))) / (2.0 * a)
        return max(w, m1)
    if m1 < math.inf:
        f1 = C * m1 + k * (m1 - m0) ** q - B
        if f1 >= 0.0:
            return max(_newton(C, B, k, m0, m1, q, m1, False), m0)
        t = (max(B - C * m1, 0.0) / k) ** (1.0 / q)
        return max(_newton(C, B, k, m0, m1, q, m1 + t, True), m1)
    t = (max(B - C * m0, 0.0) / k) ** (1.0 / q)
    return max(_newton(C, B, k, m0, m1, q, m0 + t, False), m0)


@nb.njit(cache=True, nogil=True)
def sweep(w, mask, coef, rhs, alpha, c0, q, h, rev_i, rev_j, scheme):
    """One Gauss-Seidel pass in the given ordering; returns the max update."""
    nx, ny = w.shape
    two = ny > 1
    dim = 2.0 if two else 1.0
    ih2 = 1.0 / (h * h)
    kfac = 1.0 / h**q
    biggest = 0.0
    for ii in range(nx):
        i = nx - 1 - ii if rev_i else ii
        for jj in range(ny):
            j = ny - 1 - jj if rev_j else jj
            if mask[i, j] != 0:
                continue
            a = w[i - 1, j]
            b = w[i + 1, j]
            nb_sum = a + b
            if two:
                c = w[i, j - 1]
                e = w[i, j + 1]
                nb_sum += c + e
            al = alpha[i, j]
            C = c0 + 2.0 * dim * al * ih2
            B = rhs[i, j] + al * ih2 * nb_sum
            k = coef[i, j] * kfac
            if scheme == UPWIND:
                m0 = min(a, b)
                m1 = min(c, e) if two else math.inf
                new = local_solve(C, B, k, m0, m1, q)
            else:
                g = 0.25 * (b - a) * (b - a)
                if two:
                    g += 0.25 * (e - c) * (e - c)
                if C <= 0.0:
                    continue
                new = (B - k * g ** (0.5 * q)) / C
            diff = abs(new - w[i, j])
            if diff > biggest:
                biggest = diff
            w[i, j] = new
    return biggest


@nb.njit(cache=True, nogil=True)
def operator_values(w, mask, coef, alpha, c0, q, h, scheme, out):
    """F[w] + rhs (i.e. the operator without the right-hand side) on interior nodes."""
    nx, ny = w.shape
    two = ny > 1
    ih2 = 1.0 / (h * h)
    for i in range(nx):
        for j in range(ny):
            if mask[i, j] != 0:
                out[i, j] = np.nan
                continue
            wc = w[i, j]
            a = w[i - 1, j]
            b = w[i + 1, j]
            lap = a + b - 2.0 * wc
            if scheme == UPWIND:
                g0 = max(wc - min(a, b), 0.0)
                s = g0 * g0
            else:
                s = 0.25 * (b - a) * (b - a)
            if two:
                c = w[i, j - 1]
                e = w[i, j + 1]
                lap += c + e - 2.0 * wc
                if scheme == UPWIND:
                    g1 = max(wc - min(c, e), 0.0)
                    s += g1 * g1
                else:
                    s += 0.25 * (e - c) * (e - c)
            out[i, j] = c0 * wc - alpha[i, j] * lap * ih2 + coef[i, j] * (s * ih2) ** (0.5 * q)


@nb.njit(cache=True, nogil=True)
def upwind_gradient_norm(w, mask, h, out):
    """|D_h w| from the upwind stencil at nodes whose neighbours all exist."""
    nx, ny = w.shape
    two = ny > 1
    for i in range(nx):
        for j in range(ny):
            if i == 0 or i == nx - 1 or (two and (j == 0 or j == ny - 1)):
                out[i, j] = np.nan
                continue
            wc = w[i, j]
            g0 = max(wc - min(w[i - 1, j], w[i + 1, j]), 0.0)
            s = g0 * g0
            if two:
                g1 = max(wc - min(w[i, j - 1], w[i, j + 1]), 0.0)
                s += g1 * g1
            out[i, j] = math.sqrt(s) / h


@nb.njit(cache=True, nogil=True)
def explicit_step(u, out, coef, pot, alpha, q, h, dt, eps):
    """One forward-Euler step of u_t = eps alpha Lap u - (a |Du|^q - V), upwind gradient.

    Writes interior nodes of ``out``, copies the outermost layer from its
    inward neighbour and returns the largest upwind gradient norm seen.
    """
    nx, ny = u.shape
    two = ny > 1
    ih = 1.0 / h
    ih2 = ih * ih
    gmax = 0.0
    jlo = 1 if two else 0
    jhi = ny - 1 if two else 1
    for i in range(1, nx - 1):
        for j in range(jlo, jhi):
            c = u[i, j]
            w, e = u[i - 1, j], u[i + 1, j]
            g0 = max(c - min(w, e), 0.0)
            s = g0 * g0
            lap = w + e - 2.0 * c
            if two:
                sj, nj = u[i, j - 1], u[i, j + 1]
                g1 = max(c - min(sj, nj), 0.0)
                s += g1 * g1
                lap += sj + nj - 2.0 * c
            g = math.sqrt(s) * ih
            if g > gmax:
                gmax = g
            out[i, j] = c + dt * (eps * alpha[i, j] * lap * ih2 - coef[i, j] * g ** q + pot[i, j])
    for j in range(ny):
        out[0, j] = out[1, j]
        out[nx - 1, j] = out[nx - 2, j]
    if two:
        for i in range(nx):
            out[i, 0] = out[i, 1]
            out[i, ny - 1] = out[i, ny - 2]
    return gmax
