"""Biot-Savart kernel, blob-mollified kernels and radial cutoffs.

Conventions: ``x`` arrays have a trailing axis of length 2, ``x_perp =
(-x2, x1)`` and ``K(x) = x_perp / (2 pi |x|^2)``. For radial blob densities
the mollified kernel obeys ``K_eps(x) = K(x) * m(|x|/eps)`` where ``m`` is
the profile mass enclosed in the unit-scaled radius.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy import integrate, special

from .errors import DivergenceError, DomainError

TWO_PI = 2.0 * math.pi
_R_MIN = 1e-300
_TABLE_SIZE = 2048

GAUSSIAN = "gaussian"
BUMP = "bump"


def _bump_primitive(u):
    """``G(u) = int_0^u exp(-1/s) ds`` for ``0 <= u <= 1``."""
    u = np.asarray(u, dtype=float)
    out = np.zeros_like(u)
    pos = u > 0
    up = u[pos]
    out[pos] = up * np.exp(-1.0 / up) - special.exp1(1.0 / up)
    return out


def _hermite_slopes_limited(x, y, d):
    """Clip exact slopes with the Fritsch-Carlson condition so the cubic
    Hermite interpolant stays monotone on monotone data."""
    d = d.copy()
    delta = np.diff(y) / np.diff(x)
    for k, s in enumerate(delta):
        if s == 0.0:
            d[k] = d[k + 1] = 0.0
            continue
        a, b = d[k] / s, d[k + 1] / s
        q = a * a + b * b
        if q > 9.0:
            tau = 3.0 / math.sqrt(q)
            d[k] = tau * a * s
            d[k + 1] = tau * b * s
    return d


def hermite_eval(xq, x0, h, y, d):
    """Evaluate a cubic Hermite table on the uniform nodes ``x0 + k*h``."""
    xq = np.asarray(xq, dtype=float)
    n = len(y)
    s = (xq - x0) / h
    k = np.clip(np.floor(s).astype(np.int64), 0, n - 2)
    t = s - k
    t2, t3 = t * t, t * t * t
    h00 = 2 * t3 - 3 * t2 + 1
    h10 = t3 - 2 * t2 + t
    h01 = -2 * t3 + 3 * t2
    h11 = t3 - t2
    return h00 * y[k] + h10 * h * d[k] + h01 * y[k + 1] + h11 * h * d[k + 1]


@dataclass(frozen=True)
class BlobProfile:
    """Radial unit-mass blob profile; ``phi_eps(x) = eps^-2 phi(x/eps)``.

    ``gaussian``: ``phi(x) = exp(-|x|^2)/pi`` (closed-form enclosed mass,
    not compactly supported). ``bump``: ``phi(x) = c exp(-1/(1-|x|^2))`` on
    the unit disc, enclosed mass read from a 2048-node monotone cubic table.
    """

    kind: str = GAUSSIAN

    def __post_init__(self):
        if self.kind not in (GAUSSIAN, BUMP):
            raise ValueError(f"unknown blob profile {self.kind!r}")

    @property
    def code(self) -> int:
        return 0 if self.kind == GAUSSIAN else 1

    @cached_property
    def normalization(self) -> float:
        if self.kind == GAUSSIAN:
            return 1.0 / math.pi
        return 1.0 / (math.pi * float(_bump_primitive(np.array([1.0]))[0]))

    @cached_property
    def mass_table(self) -> tuple[np.ndarray, np.ndarray]:
        """``(m, dm)`` on ``rho = k/(N-1)``; zero-length arrays for gaussian."""
        if self.kind == GAUSSIAN:
            return np.zeros(2), np.zeros(2)
        rho = np.linspace(0.0, 1.0, _TABLE_SIZE)
        g1 = float(_bump_primitive(np.array([1.0]))[0])
        m = (g1 - _bump_primitive(1.0 - rho * rho)) / g1
        m[-1] = 1.0
        dm = np.zeros_like(rho)
        inside = rho < 1.0
        r = rho[inside]
        dm[inside] = TWO_PI * self.normalization * r * np.exp(-1.0 / (1.0 - r * r))
        return m, _hermite_slopes_limited(rho, m, dm)

    def enclosed_mass(self, rho):
        """Mass of the unit-scaled profile inside radius ``rho``."""
        rho = np.abs(np.asarray(rho, dtype=float))
        if self.kind == GAUSSIAN:
            return -np.expm1(-rho * rho)
        m, dm = self.mass_table
        out = np.ones_like(rho)
        inside = rho < 1.0
        out[inside] = hermite_eval(rho[inside], 0.0, 1.0 / (_TABLE_SIZE - 1), m, dm)
        return out

    def density(self, x, eps: float):
        """``phi_eps`` at points ``x`` (trailing axis of length 2)."""
        x = np.asarray(x, dtype=float)
        rho2 = (x[..., 0] ** 2 + x[..., 1] ** 2) / (eps * eps)
        return self._shape(rho2) / (eps * eps)

    def density_gradient(self, x, eps: float):
        x = np.asarray(x, dtype=float)
        rho2 = (x[..., 0] ** 2 + x[..., 1] ** 2) / (eps * eps)
        phi = self._shape(rho2) / (eps * eps)
        if self.kind == GAUSSIAN:
            fac = -2.0 * phi / (eps * eps)
        else:
            with np.errstate(divide="ignore", invalid="ignore"):
                fac = np.where(rho2 < 1.0, -2.0 * phi / ((1.0 - rho2) ** 2 * eps * eps), 0.0)
        return fac[..., None] * x

    def _shape(self, rho2):
        if self.kind == GAUSSIAN:
            return np.exp(-rho2) / math.pi
        out = np.zeros_like(rho2)
        inside = rho2 < 1.0
        out[inside] = self.normalization * np.exp(-1.0 / (1.0 - rho2[inside]))
        return out

    def support_radius(self, eps: float) -> float:
        """Radius beyond which ``phi_eps`` is zero (bump) or below 1e-15 of its peak."""
        return (6.0 if self.kind == GAUSSIAN else 1.0) * eps

    def reconstruction_margin(self, eps: float) -> float:
        return (4.0 if self.kind == GAUSSIAN else 1.0) * eps


@dataclass(frozen=True)
class CutoffPair:
    """Radial cutoff ``a``: 1 inside ``r_inner``, 0 outside ``r_outer``,
    polynomial smoothstep in between (order 5 is C^2, order 3 only C^1)."""

    r_inner: float = 1.0
    r_outer: float = 2.0
    order: int = 5

    def __post_init__(self):
        if not (0.0 < self.r_inner < self.r_outer):
            raise ValueError("cutoff radii must satisfy 0 < r_inner < r_outer")
        if self.order not in (3, 5):
            raise ValueError("smoothstep order must be 3 or 5")

    def radial(self, r):
        """Return ``(A, A', A'')`` for ``a(x) = A(|x|)``."""
        r = np.asarray(r, dtype=float)
        w = self.r_outer - self.r_inner
        s = np.clip((r - self.r_inner) / w, 0.0, 1.0)
        if self.order == 5:
            S = s**3 * (10.0 - 15.0 * s + 6.0 * s * s)
            dS = 30.0 * s * s * (1.0 - s) ** 2
            d2S = 60.0 * s * (1.0 - s) * (1.0 - 2.0 * s)
        else:
            S = s * s * (3.0 - 2.0 * s)
            dS = 6.0 * s * (1.0 - s)
            d2S = np.where((s > 0) & (s < 1), 6.0 - 12.0 * s, 0.0)
        return 1.0 - S, -dS / w, -d2S / (w * w)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return self.radial(np.hypot(x[..., 0], x[..., 1]))[0]

    def derivatives(self, x):
        """Value, gradient ``(...,2)``, Hessian ``(...,2,2)`` and Laplacian."""
        x = np.asarray(x, dtype=float)
        r = np.hypot(x[..., 0], x[..., 1])
        A, dA, d2A = self.radial(r)
        rs = np.where(r > 0, r, 1.0)
        n = x / rs[..., None]
        grad = dA[..., None] * n
        nn = n[..., :, None] * n[..., None, :]
        eye = np.eye(2)
        hess = d2A[..., None, None] * nn + (dA / rs)[..., None, None] * (eye - nn)
        lap = d2A + dA / rs
        return A, grad, hess, lap


def scaled_cutoff(cut: CutoffPair, scale: float) -> CutoffPair:
    """``a_eps(x) = a(x/eps)``: 1 on ``B_eps`` and 0 outside ``B_2eps`` for the defaults."""
    return CutoffPair(cut.r_inner * scale, cut.r_outer * scale, cut.order)


def cutoff_eval(cut: CutoffPair, x):
    return cut(x)


def biot_savart(x):
    """``K(x) = x_perp / (2 pi |x|^2)``; raises at the origin."""
    x = np.asarray(x, dtype=float)
    r2 = x[..., 0] ** 2 + x[..., 1] ** 2
    if np.any(r2 < _R_MIN * _R_MIN) or np.any(np.sqrt(r2) < _R_MIN):
        raise DomainError("Biot-Savart kernel is singular at x = 0")
    out = np.empty(x.shape, dtype=float)
    out[..., 0] = -x[..., 1] / (TWO_PI * r2)
    out[..., 1] = x[..., 0] / (TWO_PI * r2)
    return out


def mollified_kernel(x, eps: float, profile: BlobProfile = BlobProfile()):
    """``K_eps = K * phi_eps`` via the enclosed-mass identity; zero at the origin."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    x = np.asarray(x, dtype=float)
    r2 = x[..., 0] ** 2 + x[..., 1] ** 2
    m = profile.enclosed_mass(np.sqrt(r2) / eps)
    with np.errstate(divide="ignore", invalid="ignore"):
        fac = np.where(r2 > 0, m / (TWO_PI * r2), 0.0)
    out = np.empty(x.shape, dtype=float)
    out[..., 0] = -x[..., 1] * fac
    out[..., 1] = x[..., 0] * fac
    return out


def _kernel_derivatives(x):
    """``K``, ``dK[i, a] = d_a K_i`` and ``HK[i, a, b] = d_a d_b K_i``.

    Uses ``K = grad_perp G`` with ``G = log|x| / (2 pi)``. Callers mask the
    origin; it is replaced by a dummy point here to avoid 0/0.
    """
    x = np.asarray(x, dtype=float)
    r2 = x[..., 0] ** 2 + x[..., 1] ** 2
    bad = r2 == 0
    if np.any(bad):
        x = np.where(bad[..., None], 1.0, x)
        r2 = np.where(bad, 2.0, r2)
    eye = np.eye(2)
    xa = x[..., :, None]
    xb = x[..., None, :]
    G2 = (eye * r2[..., None, None] - 2.0 * xa * xb) / (TWO_PI * r2[..., None, None] ** 2)
    xxx = x[..., :, None, None] * x[..., None, :, None] * x[..., None, None, :]
    dsum = (eye[:, :, None] * x[..., None, None, :] + eye[:, None, :] * x[..., None, :, None]
            + eye[None, :, :] * x[..., :, None, None])
    G3 = (4.0 * xxx / r2[..., None, None, None] ** 3 - dsum / r2[..., None, None, None] ** 2) / math.pi
    K = np.stack([-x[..., 1], x[..., 0]], axis=-1) / (TWO_PI * r2[..., None])
    dK = np.stack([-G2[..., :, 1], G2[..., :, 0]], axis=-2)
    HK = np.stack([-G3[..., :, :, 1], G3[..., :, :, 0]], axis=-3)
    return K, dK, HK


def near_kernel(x, cut: CutoffPair = CutoffPair()):
    """``a K``: the compactly supported, weakly singular part; zero at the origin."""
    x = np.asarray(x, dtype=float)
    r2 = x[..., 0] ** 2 + x[..., 1] ** 2
    K, _, _ = _kernel_derivatives(x)
    out = cut(x)[..., None] * K
    return np.where((r2 > 0)[..., None], out, 0.0)


def far_gradient_kernel(x, cut: CutoffPair = CutoffPair()):
    """``G[..., i, j] = d_j [(1-a) K_i]``."""
    A, ga, _, _ = cut.derivatives(x)
    K, dK, _ = _kernel_derivatives(x)
    out = (1.0 - A)[..., None, None] * dK - K[..., :, None] * ga[..., None, :]
    return _zero_inside(x, cut, out)


def serfati_far_kernel(x, cut: CutoffPair = CutoffPair()):
    """``T[..., i, j, l] = d_j (grad_perp [(1-a) K_i])_l``.

    Paired with ``u_j u_l`` this is the far-field kernel of the Serfati
    identity. Built by the product rule from analytic derivatives of ``K``
    and of the smoothstep; vanishes identically inside ``r_inner``.
    """
    A, ga, Ha, _ = cut.derivatives(x)
    K, dK, HK = _kernel_derivatives(x)
    one_minus = (1.0 - A)[..., None, None, None]
    H = (one_minus * HK
         - ga[..., None, :, None] * dK[..., :, None, :]
         - ga[..., None, None, :] * dK[..., :, :, None]
         - Ha[..., None, :, :] * K[..., :, None, None])
    T = np.stack([-H[..., 1], H[..., 0]], axis=-1)
    return _zero_inside(x, cut, T)


def viscous_far_kernel(x, cut: CutoffPair = CutoffPair()):
    """``Laplacian[(1-a) K_i]``; ``K`` is harmonic off the origin so only the
    annulus ``r_inner < |x| < r_outer`` contributes."""
    A, ga, _, lap = cut.derivatives(x)
    K, dK, _ = _kernel_derivatives(x)
    out = -2.0 * np.einsum("...ij,...j->...i", dK, ga) - K * lap[..., None]
    return _zero_inside(x, cut, out)


def _zero_inside(x, cut, arr):
    x = np.asarray(x, dtype=float)
    r = np.hypot(x[..., 0], x[..., 1])
    mask = r <= cut.r_inner
    if np.any(mask):
        arr = np.where(mask.reshape(mask.shape + (1,) * (arr.ndim - mask.ndim)), 0.0, arr)
    return arr


def g_eps_l1(eps: float, alpha: float) -> float:
    """L1 norm of ``chi_{B_2eps}(x) / (|x|^2 log(1/|x|)^(2 alpha))``.

    Exact value ``2 pi log(1/(2 eps))^(1-2 alpha) / (2 alpha - 1)``.
    """
    _check_g_args(eps, alpha)
    ell = math.log(1.0 / (2.0 * eps))
    return TWO_PI * ell ** (1.0 - 2.0 * alpha) / (2.0 * alpha - 1.0)


def g_eps_l1_quadrature(eps: float, alpha: float) -> float:
    """Adaptive radial quadrature of the same integral.

    With ``r = exp(-s)`` the integral is ``2 pi int_{s0}^inf s^(-2 alpha) ds``
    with ``s0 = log(1/(2 eps))``; a second substitution ``s = s0 exp(v)``
    turns the algebraic tail into an exponential one for QUADPACK.
    """
    _check_g_args(eps, alpha)
    s0 = math.log(1.0 / (2.0 * eps))

    def integrand(v):
        # s^(1-2 alpha) underflows long before exp(v) overflows
        return math.exp((1.0 - 2.0 * alpha) * (math.log(s0) + v)) if v < 700.0 else 0.0

    val, _ = integrate.quad(integrand, 0.0, np.inf, epsabs=0.0, epsrel=1e-12, limit=400)
    return TWO_PI * val


def _check_g_args(eps, alpha):
    if alpha <= 0.5:
        raise DivergenceError("g_eps is not integrable for alpha <= 1/2")
    if not (0.0 < eps < 0.5):
        raise ValueError("eps must lie in (0, 1/2)")


def near_stream_radial(r, cut: CutoffPair = CutoffPair(), nodes: int = 64):
    """Radial stream function ``psi_a`` with ``grad_perp psi_a = a K`` and
    ``psi_a = 0`` outside ``r_outer``."""
    r = np.atleast_1d(np.asarray(r, dtype=float))
    x, w = np.polynomial.legendre.leggauss(nodes)
    R1, R2 = cut.r_inner, cut.r_outer

    def tail(lo):
        # -int_lo^R2 a(s)/(2 pi s) ds, lo >= R1
        s = lo[:, None] + 0.5 * (R2 - lo)[:, None] * (x[None, :] + 1.0)
        f = cut.radial(s)[0] / (TWO_PI * s)
        return -0.5 * (R2 - lo) * (f @ w)

    out = np.zeros_like(r)
    inner = r < R1
    ann = (r >= R1) & (r < R2)
    c = tail(np.array([R1]))[0]
    with np.errstate(divide="ignore"):
        out[inner] = np.log(r[inner] / R1) / TWO_PI + c
    if np.any(ann):
        out[ann] = tail(r[ann])
    return out


def near_stream_hankel(k, cut: CutoffPair = CutoffPair(), nodes: int = 200):
    """Fourier transform ``psi_a_hat(|k|) = 2 pi int psi_a(r) J0(k r) r dr``.

    The logarithmic core on ``[0, R1]`` is integrated in closed form, the
    smooth annulus by Gauss-Legendre. Then ``(a K_i)^ = i k_perp_i psi_a_hat``.
    """
    k = np.asarray(k, dtype=float)
    R1, R2 = cut.r_inner, cut.r_outer
    c = float(near_stream_radial(np.array([R1]), cut)[0])
    x, w = np.polynomial.legendre.leggauss(nodes)
    r = R1 + 0.5 * (R2 - R1) * (x + 1.0)
    wr = 0.5 * (R2 - R1) * w * near_stream_radial(r, cut) * r * TWO_PI
    out = np.empty_like(k)
    flat_k = k.ravel()
    res = np.empty_like(flat_k)
    small = flat_k < 1e-12
    kk = flat_k[~small]
    core = -(1.0 - special.j0(kk * R1)) / kk**2 + TWO_PI * c * R1 * special.j1(kk * R1) / kk
    ann = special.j0(np.outer(kk, r)) @ wr
    res[~small] = core + ann
    res[small] = -R1**2 / 4.0 + math.pi * c * R1**2 + wr.sum()
    out[...] = res.reshape(k.shape)
    return out
