"""Discrete residual of the Serfati velocity identity.

For a cutoff ``a`` and ``D_i = (1 - a) K_i``::

    u_i(t) = u_i(0) + (a K_i) * (w(t) - w(0))
             - int_0^t (grad grad_perp D_i) : (u (x) u) ds
             + int_0^t (Lap D_i) * (nu w) ds             [viscous runs]
             + int_0^t (grad D_i) . F ds                 [blob runs]

Two backends. Periodic spectral runs are treated entirely in Fourier space
with the exact transform of ``a K``; the dealiased products then make the
identity exact up to the time quadrature. Free-space grid snapshots use
cell-averaged near weights and sampled far kernels, applied by zero-padded
FFT convolution.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import fft as sfft
from scipy.integrate import cumulative_trapezoid

from .errors import ConfigurationError
from .grid import GridField, GridSpec
from .kernel import (CutoffPair, far_gradient_kernel, near_kernel, near_stream_hankel,
                     scaled_cutoff, serfati_far_kernel, viscous_far_kernel)
from .spectral import SpectralState, _to_grid, _wavenumbers, velocity_hat


@dataclass(frozen=True)
class SerfatiConfig:
    cutoff: CutoffPair = CutoffPair()
    eps_cut: float = 0.25
    near_nodes: int = 8

    def __post_init__(self):
        if not 0.0 < 2.0 * self.eps_cut <= self.cutoff.r_inner:
            raise ConfigurationError("need 0 < 2 eps_cut <= r_inner of the main cutoff")


@dataclass
class SnapshotFields:
    """Free-space snapshot: vorticity, velocity and optionally ``F_eps``."""

    t: float
    omega: GridField
    u: GridField
    F: GridField | None = None


@dataclass
class SerfatiResult:
    times: np.ndarray
    residual: np.ndarray
    terms: dict = field(default_factory=dict)

    @property
    def final(self) -> float:
        return float(self.residual[-1]) if len(self.residual) else 0.0

    @property
    def max(self) -> float:
        return float(self.residual.max(initial=0.0))


def _uniform_times(times):
    times = np.asarray(times, dtype=float)
    if len(times) < 2:
        return times
    d = np.diff(times)
    if np.any(d <= 0) or np.ptp(d) > 1e-9 * max(d.max(), 1e-300):
        raise ConfigurationError("Serfati snapshots must be uniformly spaced in time")
    return times


def serfati_residual(snapshots, cfg: SerfatiConfig = SerfatiConfig(), method: str = "ES",
                     nu: float = 0.0, include_correction: bool = True) -> SerfatiResult:
    """L2 norm of (left side - right side) of the identity at each snapshot time."""
    snapshots = list(snapshots)
    if not snapshots:
        return SerfatiResult(np.zeros(0), np.zeros(0))
    if method not in ("ES", "VV", "VB"):
        raise ConfigurationError(f"unknown method tag {method!r}")
    if isinstance(snapshots[0], SpectralState):
        return _periodic(snapshots, cfg, method, include_correction)
    if method == "VV" and include_correction and not nu > 0:
        raise ConfigurationError("VV residual needs the viscosity nu")
    if method == "VB" and include_correction and any(s.F is None for s in snapshots):
        raise ConfigurationError("VB residual needs F_eps for every snapshot")
    return _free(snapshots, cfg, method, nu, include_correction)


# ---------------------------------------------------------------- periodic

@lru_cache(maxsize=8)
def _periodic_symbols(L, n, cut: CutoffPair, eps_cut: float):
    wn = _wavenumbers(L, n)
    kmag = np.sqrt(wn.k2)
    psi = near_stream_hankel(kmag, cut)
    psi_in = near_stream_hankel(kmag, scaled_cutoff(CutoffPair(order=cut.order), eps_cut))
    kperp = (-wn.ky * np.ones_like(wn.kx), wn.kx * np.ones_like(wn.ky))
    near = [1j * kp * psi for kp in kperp]
    near_in = [1j * kp * psi_in for kp in kperp]
    far = [1j * kp * (-wn.inv_k2 - psi) for kp in kperp]
    return near, near_in, far, kperp


def _parseval_norm(L, n, weights, fh):
    return math.sqrt(float((2 * L) ** 2 * np.sum(weights * np.abs(fh) ** 2) / n**4))


def _periodic(states, cfg, method, include_correction):
    s0 = states[0]
    L, n = s0.L, s0.n
    for s in states:
        if s.L != L or s.n != n:
            raise ConfigurationError("Serfati snapshots must share one grid")
    times = _uniform_times([s.t for s in states])
    wn = _wavenumbers(L, n)
    near, near_in, far, kperp = _periodic_symbols(L, n, cfg.cutoff, cfg.eps_cut)
    k = (wn.kx * np.ones_like(wn.ky), wn.ky * np.ones_like(wn.kx))
    nu = s0.nu
    viscous = include_correction and method == "VV" and nu > 0
    integrand = np.zeros((len(states), 2) + s0.omega_hat.shape, dtype=complex)
    visc_part = np.zeros_like(integrand)
    uh_all = []
    for m, s in enumerate(states):
        uh = velocity_hat(s)
        uh_all.append(uh)
        ug = [_to_grid(c, n) for c in uh]
        acc = np.zeros_like(s.omega_hat)
        for j in range(2):
            for l in range(2):
                q = np.fft.rfft2(ug[j] * ug[l])
                q[~wn.mask] = 0.0
                acc += k[j] * kperp[l] * q
        for i in range(2):
            # -(i k_j)(i kperp_l) D_i Q_jl
            integrand[m, i] = far[i] * acc
            if viscous:
                visc_part[m, i] = -wn.k2 * far[i] * nu * s.omega_hat
    far_int = cumulative_trapezoid(integrand, times, axis=0, initial=0.0)
    visc_int = cumulative_trapezoid(visc_part, times, axis=0, initial=0.0) if viscous else None
    res = np.zeros(len(states))
    terms = {k_: np.zeros(len(states)) for k_ in ("near", "near_inner", "far", "viscous")}
    dw0 = s0.omega_hat
    for m, s in enumerate(states):
        dw = s.omega_hat - dw0
        tot = 0.0
        nn = ni = ff = vv = 0.0
        for i in range(2):
            nh = near[i] * dw
            r = uh_all[m][i] - uh_all[0][i] - nh - far_int[m, i]
            if viscous:
                r = r - visc_int[m, i]
                vv += _parseval_norm(L, n, wn.weights, visc_int[m, i]) ** 2
            r[~wn.mask] = 0.0
            tot += _parseval_norm(L, n, wn.weights, r) ** 2
            nn += _parseval_norm(L, n, wn.weights, nh) ** 2
            ni += _parseval_norm(L, n, wn.weights, near_in[i] * dw) ** 2
            ff += _parseval_norm(L, n, wn.weights, far_int[m, i]) ** 2
        res[m] = math.sqrt(tot)
        terms["near"][m] = math.sqrt(nn)
        terms["near_inner"][m] = math.sqrt(ni)
        terms["far"][m] = math.sqrt(ff)
        terms["viscous"][m] = math.sqrt(vv)
    return SerfatiResult(times, res, terms)


# ---------------------------------------------------------------- free space

class _Convolver:
    """Linear (non-periodic) convolution of grid fields with offset kernels."""

    def __init__(self, grid: GridSpec):
        self.nx, self.ny = grid.dims
        self.shape = (sfft.next_fast_len(3 * self.nx - 2), sfft.next_fast_len(3 * self.ny - 2))

    def kernel_hat(self, w):
        return sfft.rfft2(w, s=self.shape)

    def apply(self, kh, field):
        out = sfft.irfft2(kh * sfft.rfft2(field, s=self.shape), s=self.shape)
        return out[self.nx - 1: 2 * self.nx - 1, self.ny - 1: 2 * self.ny - 1]


@lru_cache(maxsize=4)
def _free_kernels(grid: GridSpec, cut: CutoffPair, eps_cut: float, nodes: int):
    nx, ny = grid.dims
    dx, dy = grid.spacing
    px = dx * np.arange(-(nx - 1), nx)
    py = dy * np.arange(-(ny - 1), ny)
    PX, PY = np.meshgrid(px, py, indexing="ij")
    pts = np.stack([PX, PY], axis=-1)
    dA = dx * dy
    # near: cell averages of a K by tensor Gauss-Legendre; the origin cell vanishes by oddness
    g, w = np.polynomial.legendre.leggauss(nodes)
    near = np.zeros(PX.shape + (2,))
    inner = np.zeros_like(near)
    reach = cut.r_outer + 0.75 * max(dx, dy)
    active = np.hypot(PX, PY) <= reach
    ai = np.nonzero(active)
    base = pts[ai]
    cut_in = scaled_cutoff(CutoffPair(order=cut.order), eps_cut)
    for a, wa in zip(g, w):
        for b, wb in zip(g, w):
            q = base + np.array([0.5 * dx * a, 0.5 * dy * b])
            near[ai] += 0.25 * wa * wb * near_kernel(q, cut) * dA
            inner[ai] += 0.25 * wa * wb * near_kernel(q, cut_in) * dA
    near[nx - 1, ny - 1] = 0.0
    inner[nx - 1, ny - 1] = 0.0
    T = serfati_far_kernel(pts, cut) * dA
    V = viscous_far_kernel(pts, cut) * dA
    G = far_gradient_kernel(pts, cut) * dA
    conv = _Convolver(grid)
    hat = lambda arr: conv.kernel_hat(arr)  # noqa: E731
    return conv, {
        "near": [hat(near[..., i]) for i in range(2)],
        "near_inner": [hat(inner[..., i]) for i in range(2)],
        "T": [[[hat(T[..., i, j, l]) for l in range(2)] for j in range(2)] for i in range(2)],
        "V": [hat(V[..., i]) for i in range(2)],
        "G": [[hat(G[..., i, j]) for j in range(2)] for i in range(2)],
    }


def _free(snaps, cfg, method, nu, include_correction):
    grid = snaps[0].omega.grid
    for s in snaps:
        if not (s.omega.grid.matches(grid) and s.u.grid.matches(grid)):
            raise ConfigurationError("Serfati snapshots must share one grid")
    times = _uniform_times([s.t for s in snaps])
    conv, K = _free_kernels(grid, cfg.cutoff, cfg.eps_cut, cfg.near_nodes)
    dA = grid.cell_area
    viscous = include_correction and method == "VV"
    blob = include_correction and method == "VB"
    m_ = len(snaps)
    far_i = np.zeros((m_, 2) + grid.dims)
    visc_i = np.zeros_like(far_i)
    blob_i = np.zeros_like(far_i)
    for m, s in enumerate(snaps):
        u = s.u.values
        Q = [[u[..., j] * u[..., l] for l in range(2)] for j in range(2)]
        for i in range(2):
            acc = np.zeros(grid.dims)
            for j in range(2):
                for l in range(2):
                    acc += conv.apply(K["T"][i][j][l], Q[j][l])
            far_i[m, i] = -acc
            if viscous:
                visc_i[m, i] = conv.apply(K["V"][i], nu * s.omega.values)
            if blob:
                F = s.F.values
                blob_i[m, i] = sum(conv.apply(K["G"][i][j], F[..., j]) for j in range(2))
    far_int = cumulative_trapezoid(far_i, times, axis=0, initial=0.0)
    visc_int = cumulative_trapezoid(visc_i, times, axis=0, initial=0.0)
    blob_int = cumulative_trapezoid(blob_i, times, axis=0, initial=0.0)
    w0 = snaps[0].omega.values
    u0 = snaps[0].u.values
    res = np.zeros(m_)
    names = ("near", "near_inner", "far", "viscous", "blob")
    terms = {k: np.zeros(m_) for k in names}
    l2 = lambda f: math.sqrt(float(np.sum(f**2) * dA))  # noqa: E731
    for m, s in enumerate(snaps):
        dw = s.omega.values - w0
        near = np.stack([conv.apply(K["near"][i], dw) for i in range(2)], axis=-1)
        inner = np.stack([conv.apply(K["near_inner"][i], dw) for i in range(2)], axis=-1)
        rhs = u0 + near + np.moveaxis(far_int[m] + visc_int[m] + blob_int[m], 0, -1)
        res[m] = l2(s.u.values - rhs)
        terms["near"][m] = l2(near)
        terms["near_inner"][m] = l2(inner)
        terms["far"][m] = l2(far_int[m])
        terms["viscous"][m] = l2(visc_int[m])
        terms["blob"][m] = l2(blob_int[m])
    return SerfatiResult(times, res, terms)
