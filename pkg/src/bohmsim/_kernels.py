"""Compiled inner loops: space-time Hermite interpolation and fixed-step RK8.

A frame array has shape (n+2, n+2, 2, 4): for every node (boundary
included) psi and d psi / dt, each as (f, f_x, f_y, f_xy).  ``Sa`` and
``Sb`` are the frames at the two ends of a time slab.  Keeping the numbers
of a node contiguous makes the 4-corner gather cache friendly.
"""
import math

import numpy as np
from numba import njit

from ._dop853 import A as _A, B as _B, C as _C

OK, NODE, DOMAIN = 0, 1, 2

# Only eval_psi runs with full fastmath; callers keep nnan/ninf off so the
# domain and node-guard tests still see non-finite values.
_FM = {"reassoc", "contract", "arcp", "nsz"}

RK_A = np.ascontiguousarray(_A)
RK_B = np.ascontiguousarray(_B)
RK_C = np.ascontiguousarray(_C)


@njit(cache=True, inline="always", fastmath=_FM)
def _time_weights(s, delta):
    s2 = s * s
    s3 = s2 * s
    return (
        2.0 * s3 - 3.0 * s2 + 1.0,
        delta * (s3 - 2.0 * s2 + s),
        -2.0 * s3 + 3.0 * s2,
        delta * (s3 - s2),
    )


@njit(cache=True, fastmath=True)
def eval_psi(Sa, Sb, w0, w0d, w1, w1d, x, y, xmin, dx, nn):
    """psi, psi_x, psi_y at (x, y); ``ok`` is False outside the node box."""
    ux = (x - xmin) / dx
    uy = (y - xmin) / dx
    i = int(math.floor(ux))
    j = int(math.floor(uy))
    if ux < 0.0 or uy < 0.0 or i > nn - 1 or j > nn - 1:
        return 0j, 0j, 0j, False
    if i == nn - 1:
        i = nn - 2
    if j == nn - 1:
        j = nn - 2
    u = ux - i
    v = uy - j
    u2 = u * u
    v2 = v * v
    # Hermite basis (value, slope) at the near (0) and far (1) node, plus d/du
    hu0 = 2.0 * u2 * u - 3.0 * u2 + 1.0
    hu1 = -2.0 * u2 * u + 3.0 * u2
    ku0 = u2 * u - 2.0 * u2 + u
    ku1 = u2 * u - u2
    dhu0 = 6.0 * u2 - 6.0 * u
    dhu1 = -dhu0
    dku0 = 3.0 * u2 - 4.0 * u + 1.0
    dku1 = 3.0 * u2 - 2.0 * u
    hv0 = 2.0 * v2 * v - 3.0 * v2 + 1.0
    hv1 = -2.0 * v2 * v + 3.0 * v2
    kv0 = v2 * v - 2.0 * v2 + v
    kv1 = v2 * v - v2
    dhv0 = 6.0 * v2 - 6.0 * v
    dhv1 = -dhv0
    dkv0 = 3.0 * v2 - 4.0 * v + 1.0
    dkv1 = 3.0 * v2 - 2.0 * v
    p = 0j
    px = 0j
    py = 0j
    for a in range(2):
        if a == 0:
            hu, ku, dhu, dku = hu0, ku0, dhu0, dku0
        else:
            hu, ku, dhu, dku = hu1, ku1, dhu1, dku1
        for b in range(2):
            if b == 0:
                hv, kv, dhv, dkv = hv0, kv0, dhv0, dkv0
            else:
                hv, kv, dhv, dkv = hv1, kv1, dhv1, dkv1
            ii = i + a
            jj = j + b
            f = w0 * Sa[ii, jj, 0, 0] + w0d * Sa[ii, jj, 1, 0] + w1 * Sb[ii, jj, 0, 0] + w1d * Sb[ii, jj, 1, 0]
            fx = w0 * Sa[ii, jj, 0, 1] + w0d * Sa[ii, jj, 1, 1] + w1 * Sb[ii, jj, 0, 1] + w1d * Sb[ii, jj, 1, 1]
            fy = w0 * Sa[ii, jj, 0, 2] + w0d * Sa[ii, jj, 1, 2] + w1 * Sb[ii, jj, 0, 2] + w1d * Sb[ii, jj, 1, 2]
            fxy = w0 * Sa[ii, jj, 0, 3] + w0d * Sa[ii, jj, 1, 3] + w1 * Sb[ii, jj, 0, 3] + w1d * Sb[ii, jj, 1, 3]
            fx = fx * dx
            fy = fy * dx
            fxy = fxy * (dx * dx)
            p += hu * hv * f + ku * hv * fx + hu * kv * fy + ku * kv * fxy
            px += dhu * hv * f + dku * hv * fx + dhu * kv * fy + dku * kv * fxy
            py += hu * dhv * f + ku * dhv * fx + hu * dkv * fy + ku * dkv * fxy
    return p, px / dx, py / dx, True


@njit(cache=True, fastmath=_FM)
def guidance(Sa, Sb, s, delta, x, y, xmin, dx, nn, half_width, hm, guard):
    """Bohmian velocity (hbar/m) Im(grad psi / psi); returns (vx, vy, status)."""
    if not (-half_width < x < half_width and -half_width < y < half_width):
        return 0.0, 0.0, DOMAIN
    w0, w0d, w1, w1d = _time_weights(s, delta)
    p, px, py, ok = eval_psi(Sa, Sb, w0, w0d, w1, w1d, x, y, xmin, dx, nn)
    if not ok:
        return 0.0, 0.0, DOMAIN
    r2 = p.real * p.real + p.imag * p.imag
    if r2 <= guard * guard:
        return 0.0, 0.0, NODE
    vx = hm * (p.real * px.imag - p.imag * px.real) / r2
    vy = hm * (p.real * py.imag - p.imag * py.real) / r2
    return vx, vy, OK


@njit(cache=True, fastmath=_FM)
def velocity_points(Sa, Sb, s, delta, xs, ys, xmin, dx, nn, half_width, hm, guard):
    n = xs.shape[0]
    out = np.empty((n, 2))
    status = np.empty(n, dtype=np.int64)
    for q in range(n):
        vx, vy, st = guidance(Sa, Sb, s, delta, xs[q], ys[q], xmin, dx, nn, half_width, hm, guard)
        out[q, 0] = vx
        out[q, 1] = vy
        status[q] = st
    return out, status


@njit(cache=True, fastmath=_FM)
def rk8_slab(pos, status, Sa, Sb, t_slab0, delta, t_start, dt, gstep0, nsteps, rec_every, rec, nrec,
             xmin, dx, nn, half_width, hm, m, guard, A, B, C):
    """Advance every live trajectory ``nsteps`` fixed RK8 steps inside one slab.

    ``pos`` (M, 2) is updated in place.  After each step whose global index
    (``gstep0 + step + 1``) is a multiple of ``rec_every`` the state
    (t, x, y, px, py) is written to ``rec[q, nrec[q]]``.  A trajectory whose
    stage evaluation fails keeps its last valid state and gets a nonzero
    ``status``.
    """
    M = pos.shape[0]
    ns = B.shape[0]
    kx = np.empty(ns)
    ky = np.empty(ns)
    h = dt / delta
    for q in range(M):
        if status[q] != OK:
            continue
        x = pos[q, 0]
        y = pos[q, 1]
        for st in range(nsteps):
            s = (t_start + (gstep0 + st) * dt - t_slab0) / delta
            bad = OK
            for i in range(ns):
                xi = x
                yi = y
                for j in range(i):
                    a = A[i, j]
                    if a != 0.0:
                        xi += dt * a * kx[j]
                        yi += dt * a * ky[j]
                vx, vy, code = guidance(Sa, Sb, s + C[i] * h, delta, xi, yi, xmin, dx, nn, half_width, hm, guard)
                if code != OK:
                    bad = code
                    break
                kx[i] = vx
                ky[i] = vy
            if bad != OK:
                status[q] = bad
                break
            dxs = 0.0
            dys = 0.0
            for i in range(ns):
                dxs += B[i] * kx[i]
                dys += B[i] * ky[i]
            xn = x + dt * dxs
            yn = y + dt * dys
            g = gstep0 + st + 1
            if g % rec_every == 0:
                tn = t_start + g * dt
                vx, vy, code = guidance(Sa, Sb, (tn - t_slab0) / delta, delta, xn, yn, xmin, dx, nn, half_width, hm, guard)
                if code != OK:
                    status[q] = code
                    break
                r = nrec[q]
                rec[q, r, 0] = tn
                rec[q, r, 1] = xn
                rec[q, r, 2] = yn
                rec[q, r, 3] = m * vx
                rec[q, r, 4] = m * vy
                nrec[q] = r + 1
            x = xn
            y = yn
        pos[q, 0] = x
        pos[q, 1] = y
