"""Compiled inner loops: blob sums, treecode traversal, grid scatter, energy.

Profiles are passed as an integer code (0 gaussian, 1 bump) plus the bump
enclosed-mass Hermite table ``(tm, tdm)`` on ``rho = k/(len-1)``.
"""
from __future__ import annotations

import math

import numpy as np
from numba import njit

TWO_PI = 2.0 * math.pi
EULER_GAMMA = 0.5772156649015329

# exp(-q) on q = k / 256, k <= 42.25 * 256; refined by a quintic Taylor factor
_EXP_STEP = 1.0 / 256.0
_Q_MAX = 42.25
_EXP_TABLE = np.exp(-_EXP_STEP * np.arange(int(_Q_MAX * 256) + 2))


@njit(cache=True, inline="always")
def _hermite(q, y, d):
    return _hermite_range(q, 1.0, y, d)


@njit(cache=True, inline="always")
def _hermite_range(q, top, y, d):
    n = y.shape[0]
    h = top / (n - 1)
    s = q / h
    k = int(s)
    if k > n - 2:
        k = n - 2
    t = s - k
    t2 = t * t
    t3 = t2 * t
    return ((2 * t3 - 3 * t2 + 1) * y[k] + (t3 - 2 * t2 + t) * h * d[k]
            + (-2 * t3 + 3 * t2) * y[k + 1] + (t3 - t2) * h * d[k + 1])


@njit(cache=True, inline="always")
def enclosed_mass(rho, kind, tm, tdm):
    if kind == 0:
        if rho > 6.5:
            return 1.0
        return -math.expm1(-rho * rho)
    if rho >= 1.0:
        return 1.0
    return _hermite(rho, tm, tdm)


@njit(cache=True, inline="always")
def _gauss_mass(q):
    """``1 - exp(-q)`` without branches, so pair loops vectorize.

    Past ``q = 42.25`` the tail is below half an ulp of 1; below 0.01 a
    Taylor series avoids the cancellation in ``1 - exp(-q)``.
    """
    q = min(q, _Q_MAX)
    k = int(q * 256.0)
    tau = q - k * _EXP_STEP
    e = _EXP_TABLE[k] * (1.0 - tau * (1.0 - tau * (0.5 - tau * (
        1.0 / 6.0 - tau * (1.0 / 24.0 - tau * (1.0 / 120.0))))))
    small = q * (1.0 - q * (0.5 - q * (1.0 / 6.0 - q * (
        1.0 / 24.0 - q * (1.0 / 120.0 - q * (1.0 / 720.0))))))
    return small if q < 0.01 else 1.0 - e


@njit(cache=True, inline="always")
def mass_r2(r2, inv_e2, kind, tm, tdm):
    """``enclosed_mass`` from the squared distance."""
    q = r2 * inv_e2
    if kind == 0:
        return _gauss_mass(q)
    if q >= 1.0:
        return 1.0
    return _hermite(math.sqrt(q), tm, tdm)


@njit(cache=True, fastmath=True)
def _pair_sum(xi, yi, xs, ys, gam, j0, j1, inv_e2, kind, tm, tdm):
    """``sum_j gamma_j m(|d|) d / |d|^2`` over ``j0 <= j < j1``, ``d = x_i - x_j``."""
    su = 0.0
    sv = 0.0
    if kind == 0:
        for j in range(j0, j1):
            dx = xi - xs[j]
            dy = yi - ys[j]
            r2 = dx * dx + dy * dy
            f = gam[j] * _gauss_mass(r2 * inv_e2) / r2 if r2 > 0.0 else 0.0
            su += f * dx
            sv += f * dy
    else:
        for j in range(j0, j1):
            dx = xi - xs[j]
            dy = yi - ys[j]
            r2 = dx * dx + dy * dy
            if r2 == 0.0:
                continue
            f = gam[j] * mass_r2(r2, inv_e2, kind, tm, tdm) / r2
            su += f * dx
            sv += f * dy
    return su, sv


@njit(cache=True, inline="always")
def profile_value(rho2, kind, cnorm):
    if kind == 0:
        return cnorm * math.exp(-rho2)
    if rho2 >= 1.0:
        return 0.0
    return cnorm * math.exp(-1.0 / (1.0 - rho2))


@njit(cache=True, inline="always")
def profile_radial_factor(rho2, kind, cnorm):
    """``phi'(rho)/rho``, so that ``grad phi(y) = factor * y`` for unit width."""
    if kind == 0:
        return -2.0 * cnorm * math.exp(-rho2)
    if rho2 >= 1.0:
        return 0.0
    om = 1.0 - rho2
    return -2.0 * cnorm * math.exp(-1.0 / om) / (om * om)


@njit(cache=True)
def direct_velocity(xs, ys, gam, tx, ty, eps, kind, tm, tdm):
    m = tx.shape[0]
    n = xs.shape[0]
    u = np.zeros(m)
    v = np.zeros(m)
    inv_e2 = 1.0 / (eps * eps)
    for i in range(m):
        px, py = _pair_sum(tx[i], ty[i], xs, ys, gam, 0, n, inv_e2, kind, tm, tdm)
        u[i] = -py / TWO_PI
        v[i] = px / TWO_PI
    return u, v


@njit(cache=True)
def node_multipoles(xs, ys, gam, cx, cy, start, end, order):
    """``a[k, m] = sum_j gamma_j (z_j - c_k)^m`` over each node's particle range."""
    nn = cx.shape[0]
    a = np.zeros((nn, order + 1), dtype=np.complex128)
    for k in range(nn):
        c = complex(cx[k], cy[k])
        for j in range(start[k], end[k]):
            dz = complex(xs[j], ys[j]) - c
            p = complex(gam[j], 0.0)
            for mm in range(order + 1):
                a[k, mm] += p
                p *= dz
    return a


@njit(cache=True)
def _binomials(n):
    c = np.zeros((n + 1, n + 1))
    for i in range(n + 1):
        c[i, 0] = 1.0
        for j in range(1, i + 1):
            c[i, j] = c[i - 1, j - 1] + c[i - 1, j]
    return c


@njit(cache=True)
def tree_velocity(xs, ys, gam, tx, ty, eps, kind, tm, tdm,
                  cx, cy, half, start, end, child, mpole, theta, far_cut,
                  lcx, lcy, lhalf, lstart, lend):
    """Velocity at targets grouped into leaves ``l`` owning ``tx[lstart[l]:lend[l]]``.

    Each target leaf walks the source tree once. A source cell that passes
    the opening test against the whole leaf box is shifted into a local
    Taylor expansion about the leaf centre. The particles of source leaves
    that fail it are copied into one contiguous buffer and summed pairwise
    with the mollified kernel for every target of the leaf.
    """
    m = tx.shape[0]
    order = mpole.shape[1] - 1
    binom = _binomials(2 * order + 1)
    u = np.zeros(m)
    v = np.zeros(m)
    inv_e2 = 1.0 / (eps * eps)
    stack = np.empty(4 * 64 + 8, dtype=np.int64)
    near = np.empty(cx.shape[0], dtype=np.int64)
    sqrt2 = math.sqrt(2.0)
    loc = np.zeros(order + 1, dtype=np.complex128)
    bx = np.empty(xs.shape[0])
    by = np.empty(xs.shape[0])
    bg = np.empty(xs.shape[0])
    ipow = np.zeros(2 * order + 2, dtype=np.complex128)
    for lf in range(lcx.shape[0]):
        zc = complex(lcx[lf], lcy[lf])
        hl = lhalf[lf]
        for q in range(order + 1):
            loc[q] = 0.0
        nnear = 0
        stack[0] = 0
        top = 1
        while top > 0:
            top -= 1
            k = stack[top]
            ddx = lcx[lf] - cx[k]
            ddy = lcy[lf] - cy[k]
            d = math.sqrt(ddx * ddx + ddy * ddy)
            if (k != 0 and 2.0 * (half[k] + hl) < theta * d
                    and d - (half[k] + hl) * sqrt2 >= far_cut):
                # multipole about c_k -> local about z_c:
                # b_l = (-1)^l sum_m a_m C(m+l, l) / D^(m+l+1),  D = z_c - c_k
                inv = 1.0 / complex(ddx, ddy)
                p = inv
                for q in range(2 * order + 2):
                    ipow[q] = p
                    p *= inv
                sgn = 1.0
                for ll in range(order + 1):
                    acc = complex(0.0, 0.0)
                    for mm in range(order + 1):
                        acc += mpole[k, mm] * binom[mm + ll, ll] * ipow[mm + ll]
                    loc[ll] += sgn * acc
                    sgn = -sgn
                continue
            if child[k, 0] < 0 and child[k, 1] < 0 and child[k, 2] < 0 and child[k, 3] < 0:
                near[nnear] = k
                nnear += 1
            else:
                for c in range(4):
                    ch = child[k, c]
                    if ch >= 0:
                        stack[top] = ch
                        top += 1
        nb = 0
        for q in range(nnear):
            k = near[q]
            for j in range(start[k], end[k]):
                bx[nb] = xs[j]
                by[nb] = ys[j]
                bg[nb] = gam[j]
                nb += 1
        for i in range(lstart[lf], lend[lf]):
            xi = tx[i]
            yi = ty[i]
            zeta = complex(xi, yi) - zc
            w = loc[order]
            for ll in range(order - 1, -1, -1):
                w = w * zeta + loc[ll]
            px, py = _pair_sum(xi, yi, bx, by, bg, 0, nb, inv_e2, kind, tm, tdm)
            su = -py
            sv = px
            # u - i v = w / (2 pi i)
            wv = w / complex(0.0, TWO_PI)
            u[i] = su / TWO_PI + wv.real
            v[i] = sv / TWO_PI - wv.imag
    return u, v


@njit(cache=True)
def scatter_density(xs, ys, w, x0, y0, dx, dy, nx, ny, eps, kind, cnorm, radius):
    """``out[a, b, c] = sum_j w[j, c] phi_eps(x_ab - X_j)``."""
    nc = w.shape[1]
    out = np.zeros((nx, ny, nc))
    inv_e2 = 1.0 / (eps * eps)
    for j in range(xs.shape[0]):
        ia = max(0, int(math.ceil((xs[j] - radius - x0) / dx)))
        ib = min(nx - 1, int(math.floor((xs[j] + radius - x0) / dx)))
        ja = max(0, int(math.ceil((ys[j] - radius - y0) / dy)))
        jb = min(ny - 1, int(math.floor((ys[j] + radius - y0) / dy)))
        for a in range(ia, ib + 1):
            ex = x0 + a * dx - xs[j]
            for b in range(ja, jb + 1):
                ey = y0 + b * dy - ys[j]
                phi = profile_value((ex * ex + ey * ey) * inv_e2, kind, cnorm) * inv_e2
                if phi == 0.0:
                    continue
                for c in range(nc):
                    out[a, b, c] += w[j, c] * phi
    return out


@njit(cache=True)
def scatter_gradient(xs, ys, w, x0, y0, dx, dy, nx, ny, eps, kind, cnorm, radius):
    """``out[a, b, c, l] = sum_j w[j, c] d_l phi_eps(x_ab - X_j)``."""
    nc = w.shape[1]
    out = np.zeros((nx, ny, nc, 2))
    inv_e2 = 1.0 / (eps * eps)
    inv_e4 = inv_e2 * inv_e2
    for j in range(xs.shape[0]):
        ia = max(0, int(math.ceil((xs[j] - radius - x0) / dx)))
        ib = min(nx - 1, int(math.floor((xs[j] + radius - x0) / dx)))
        ja = max(0, int(math.ceil((ys[j] - radius - y0) / dy)))
        jb = min(ny - 1, int(math.floor((ys[j] + radius - y0) / dy)))
        for a in range(ia, ib + 1):
            ex = x0 + a * dx - xs[j]
            for b in range(ja, jb + 1):
                ey = y0 + b * dy - ys[j]
                f = profile_radial_factor((ex * ex + ey * ey) * inv_e2, kind, cnorm) * inv_e4
                if f == 0.0:
                    continue
                for c in range(nc):
                    out[a, b, c, 0] += w[j, c] * f * ex
                    out[a, b, c, 1] += w[j, c] * f * ey
    return out


@njit(cache=True)
def exp1(x):
    """Exponential integral ``E1(x)`` for ``x > 0``."""
    if x <= 1.0:
        s = 0.0
        term = 1.0
        for k in range(1, 60):
            term *= -x / k
            s += term / k
            if abs(term) < 1e-18 * max(1.0, abs(s)):
                break
        return -EULER_GAMMA - math.log(x) - s
    # modified Lentz on the continued fraction
    b = x + 1.0
    c = 1e300
    d = 1.0 / b
    h = d
    for i in range(1, 200):
        an = -float(i * i)
        b += 2.0
        d = 1.0 / (an * d + b)
        c = b + an / c
        de = c * d
        h *= de
        if abs(de - 1.0) < 1e-16:
            break
    return h * math.exp(-x)


@njit(cache=True, inline="always")
def _g_gauss(r2, two_e2, g0):
    """Interaction ``log r + E1(r^2/(2 eps^2))/2`` of two unit gaussian blobs."""
    if r2 == 0.0:
        return g0
    z = r2 / two_e2
    if z > 40.0:
        return 0.5 * math.log(r2)
    if z <= 1.0:
        s = 0.0
        term = 1.0
        for k in range(1, 60):
            term *= -z / k
            s -= term / k
            if abs(term) < 1e-18:
                break
        return 0.5 * (math.log(two_e2) - EULER_GAMMA + s)
    return 0.5 * math.log(r2) + 0.5 * exp1(z)


@njit(cache=True)
def pairwise_energy(xs, ys, gam, eps, kind, gtab, gdtab):
    """``-(1/4pi) sum_ij G_i G_j g(|X_i - X_j|)`` with the blob-blob log interaction.

    For the bump profile ``gtab``/``gdtab`` tabulate ``g_1`` on ``s in [0, 2]``.
    """
    n = xs.shape[0]
    two_e2 = 2.0 * eps * eps
    log_eps = math.log(eps)
    if kind == 0:
        g0 = 0.5 * (math.log(two_e2) - EULER_GAMMA)
    else:
        g0 = gtab[0] + log_eps
    total = 0.0
    for i in range(n):
        acc = 0.0
        for j in range(i + 1, n):
            dx = xs[i] - xs[j]
            dy = ys[i] - ys[j]
            r2 = dx * dx + dy * dy
            if kind == 0:
                g = _g_gauss(r2, two_e2, g0)
            else:
                s = math.sqrt(r2) / eps
                if s >= 2.0:
                    g = 0.5 * math.log(r2)
                else:
                    g = _hermite_range(s, 2.0, gtab, gdtab) + log_eps
            acc += gam[j] * g
        total += 2.0 * gam[i] * acc + gam[i] * gam[i] * g0
    return -total / (4.0 * math.pi)
