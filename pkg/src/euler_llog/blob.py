"""Vortex-blob method: lattice initialisation, mollified velocities, RK4 stepping,
grid reconstruction and the error fields E_eps, F_eps."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy import signal

from . import _jit
from .errors import (ConfigurationError, DataError, InstabilityError, PracticalityWarning,
                     ResourceError)
from .grid import GridField, GridSpec
from .kernel import BlobProfile, mollified_kernel
from .presets import Preset
from .treecode import velocity_treecode

H_MODES = ("manual", "practical", "theoretical_A1", "theoretical_A2")
PRACTICAL_H_FLOOR = 1e-12


@dataclass(frozen=True)
class VortexBlobParams:
    """Blob width, lattice and mollification couplings plus stepping knobs."""

    eps: float
    h_mode: str = "practical"
    h: float | None = None
    h_c: float = 1.0
    h_q: float = 1.5
    delta: float | None = None
    delta_sigma: float = 1.0
    C0: float = 1.0
    C1: float = 1.0
    profile: BlobProfile = BlobProfile()
    drop_threshold: float = 1e-14
    max_blobs: int = 200_000
    velocity: str = "auto"
    theta: float = 0.5
    tree_order: int = 12
    safety: float = 0.5
    dt_max: float = 0.05

    def __post_init__(self):
        if not self.eps > 0:
            raise ConfigurationError("eps must be positive")
        if self.h_mode not in H_MODES:
            raise ConfigurationError(f"h_mode must be one of {H_MODES}")
        if self.h_mode == "manual" and not (self.h and self.h > 0):
            raise ConfigurationError("h_mode = manual needs a positive h")
        if self.h_mode == "practical" and self.h_c * self.eps ** self.h_q > self.eps:
            raise ConfigurationError("practical coupling must satisfy h <= eps (blob overlap)")
        if self.velocity not in ("auto", "direct", "tree"):
            raise ConfigurationError("velocity must be auto, direct or tree")
        if not 0.0 < self.safety <= 1.0:
            raise ConfigurationError("safety must lie in (0, 1]")

    def lattice_spacing(self, l1_norm: float = 1.0, T: float = 1.0) -> float:
        if self.h_mode == "manual":
            return float(self.h)
        if self.h_mode == "practical":
            return self.h_c * self.eps ** self.h_q
        mode = "A1" if self.h_mode == "theoretical_A1" else "A2"
        return theoretical_h(self.eps, mode, self.C0, self.C1, l1_norm, T)

    def mollification_width(self) -> float:
        if self.delta is not None:
            return float(self.delta)
        return self.eps ** self.delta_sigma


@dataclass(frozen=True)
class BlobEnsemble:
    positions: np.ndarray
    gamma: np.ndarray
    eps: float
    profile: BlobProfile = BlobProfile()
    t: float = 0.0

    def __post_init__(self):
        x = np.ascontiguousarray(np.asarray(self.positions, dtype=float).reshape(-1, 2))
        g = np.ascontiguousarray(np.asarray(self.gamma, dtype=float).ravel())
        if len(x) != len(g):
            raise DataError("positions and circulations differ in length")
        if not self.eps > 0:
            raise DataError("eps must be positive")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(g))):
            raise DataError("ensemble contains non-finite entries")
        object.__setattr__(self, "positions", x)
        object.__setattr__(self, "gamma", g)

    @property
    def n(self) -> int:
        return len(self.gamma)

    def total_circulation(self) -> float:
        return float(self.gamma.sum())

    def linear_impulse(self) -> np.ndarray:
        return self.gamma @ self.positions

    def angular_impulse(self) -> float:
        return float(self.gamma @ np.sum(self.positions**2, axis=1))

    def moved(self, positions, t) -> "BlobEnsemble":
        return replace(self, positions=positions, t=t)


def theoretical_h(eps: float, mode: str, C0: float = 1.0, C1: float = 1.0,
                  l1_norm: float = 1.0, T: float = 1.0) -> float:
    """Lattice spacings of the theoretical couplings; astronomically small in practice.

    ``A1``: ``eps^4 / exp(C1 eps^-2 |w0|_1 T)``; ``A2``: ``C1 eps^6 exp(-C0 eps^-2)``.
    """
    if not 0.0 < eps < 1.0:
        raise ValueError("eps must lie in (0, 1)")
    if mode == "A1":
        h = eps**4 * math.exp(-C1 * l1_norm * T / eps**2)
    elif mode == "A2":
        h = C1 * eps**6 * math.exp(-C0 / eps**2)
    else:
        raise ValueError("mode must be 'A1' or 'A2'")
    if h < PRACTICAL_H_FLOOR:
        warnings.warn(f"theoretical lattice spacing h={h:.3g} is below {PRACTICAL_H_FLOOR:g}; "
                      "the run would need an astronomical number of blobs",
                      PracticalityWarning, stacklevel=2)
    return h


# ---------------------------------------------------------------- initial data

def _mollifier_stencil(delta: float, dx: float, dy: float) -> np.ndarray:
    """Standard compact bump ``j_delta`` sampled on the grid, normalised to unit sum."""
    bump = BlobProfile("bump")
    kx = int(math.floor(delta / dx))
    ky = int(math.floor(delta / dy))
    ox = dx * np.arange(-kx, kx + 1)
    oy = dy * np.arange(-ky, ky + 1)
    X, Y = np.meshgrid(ox, oy, indexing="ij")
    w = bump.density(np.stack([X, Y], axis=-1), delta)
    s = w.sum()
    if s <= 0:
        # delta below the grid spacing: identity
        w = np.zeros((1, 1))
        w[0, 0] = 1.0
        return w
    return w / s


def sample_preset(p: Preset, grid: GridSpec) -> GridField:
    xmin, xmax, ymin, ymax = grid.bounds()
    bx0, bx1, by0, by1 = p.bbox()
    if bx0 < xmin or bx1 > xmax or by0 < ymin or by1 > ymax:
        raise ConfigurationError("preset support escapes the sampling grid")
    X, Y = grid.mesh()
    return GridField(grid, p(X, Y))


def mollify_initial(omega0, delta: float, grid: GridSpec | None = None) -> GridField:
    """``omega0 * j_delta`` on the input grid extended by a ``2 delta`` margin.

    The discrete stencil is normalised, so the total integral is preserved
    and convex modulars cannot increase (Jensen). Samples outside the dilated
    support are set to exactly zero.
    """
    if not delta > 0:
        raise ConfigurationError("delta must be positive")
    if isinstance(omega0, Preset):
        if grid is None:
            bx0, bx1, by0, by1 = omega0.bbox()
            sp = min(delta, omega0.params["r0"]) / 8.0
            nx = int(math.ceil((bx1 - bx0) / sp)) + 2
            ny = int(math.ceil((by1 - by0) / sp)) + 2
            grid = GridSpec((bx0 - 0.5 * sp, by0 - 0.5 * sp), (sp, sp), (nx, ny))
        omega0 = sample_preset(omega0, grid)
    g = omega0.grid
    v = omega0.values
    if v.ndim != 2:
        raise DataError("mollify_initial needs a scalar field")
    edge = np.concatenate([v[0], v[-1], v[:, 0], v[:, -1]])
    if np.any(edge != 0.0):
        raise ConfigurationError("initial vorticity support touches the grid edge")
    dx, dy = g.spacing
    st = _mollifier_stencil(delta, dx, dy)
    px = int(math.ceil(2.0 * delta / dx)) - (st.shape[0] - 1) // 2
    py = int(math.ceil(2.0 * delta / dy)) - (st.shape[1] - 1) // 2
    out = signal.fftconvolve(v, st, mode="full")
    support = signal.fftconvolve((v != 0).astype(float), (st > 0).astype(float), mode="full")
    out[support < 0.5] = 0.0
    out = np.pad(out, ((px, px), (py, py)))
    hx = (st.shape[0] - 1) // 2 + px
    hy = (st.shape[1] - 1) // 2 + py
    ng = GridSpec((g.origin[0] - hx * dx, g.origin[1] - hy * dy), g.spacing, out.shape)
    return GridField(ng, out, t=omega0.t)


def lattice_sampling_grid(p: Preset, h: float, delta: float, offset: float = 0.0,
                          sub: int | None = None) -> GridSpec:
    """Cell-centred grid whose cells nest ``sub x sub`` inside each lattice square.

    The grid covers the preset's bounding box; the later ``2 delta`` extension
    by ``mollify_initial`` keeps the nesting since it adds whole cells.
    """
    if sub is None:
        sub = max(2, int(math.ceil(8.0 * h / min(delta, p.params["r0"]))))
    sp = h / sub
    bx0, bx1, by0, by1 = p.bbox()
    # lattice squares are [offset + h(i - 1/2), offset + h(i + 1/2))
    i0 = math.floor((bx0 - offset) / h + 0.5) - 1
    i1 = math.floor((bx1 - offset) / h + 0.5) + 1
    j0 = math.floor((by0 - offset) / h + 0.5) - 1
    j1 = math.floor((by1 - offset) / h + 0.5) + 1
    x0 = offset + h * (i0 - 0.5) + 0.5 * sp
    y0 = offset + h * (j0 - 0.5) + 0.5 * sp
    nx = (i1 - i0 + 1) * sub
    ny = (j1 - j0 + 1) * sub
    return GridSpec((x0, y0), (sp, sp), (nx, ny))


def tile_and_weigh(omega_eps: GridField, h: float, eps: float,
                   profile: BlobProfile = BlobProfile(), offset: float = 0.0,
                   drop_threshold: float = 1e-14, max_blobs: int | None = None) -> BlobEnsemble:
    """One blob per lattice square with ``Gamma_i`` the cell quadrature of ``omega_eps``.

    Lattice squares are centred at ``offset + h*(i1, i2)``; blobs with
    ``|Gamma_i| < drop_threshold * max|Gamma|`` are discarded.
    """
    if not h > 0:
        raise ConfigurationError("lattice spacing must be positive")
    v = omega_eps.values
    if v.ndim != 2:
        raise DataError("tile_and_weigh needs a scalar field")
    X, Y = omega_eps.grid.mesh()
    nz = v != 0.0
    xs, ys, vals = X[nz], Y[nz], v[nz] * omega_eps.grid.cell_area
    if len(vals) == 0:
        return BlobEnsemble(np.zeros((0, 2)), np.zeros(0), eps, profile, omega_eps.t)
    ix = np.floor((xs - offset) / h + 0.5).astype(np.int64)
    iy = np.floor((ys - offset) / h + 0.5).astype(np.int64)
    ix0, iy0 = ix.min(), iy.min()
    ny = iy.max() - iy0 + 1
    key = (ix - ix0) * ny + (iy - iy0)
    uniq, inv = np.unique(key, return_inverse=True)
    gam = np.bincount(inv, weights=vals, minlength=len(uniq))
    keep = np.abs(gam) >= drop_threshold * np.abs(gam).max()
    uniq, gam = uniq[keep], gam[keep]
    if max_blobs is not None and len(gam) > max_blobs:
        raise ResourceError(f"{len(gam)} blobs exceed the configured cap of {max_blobs}")
    cx = offset + h * (uniq // ny + ix0)
    cy = offset + h * (uniq % ny + iy0)
    return BlobEnsemble(np.column_stack([cx, cy]), gam, eps, profile, omega_eps.t)


def initialize(p: Preset, params: VortexBlobParams, T: float = 1.0,
               offset: float = 0.0) -> tuple[BlobEnsemble, GridField]:
    """Preset -> mollified initial vorticity -> weighted lattice ensemble."""
    delta = params.mollification_width()
    l1 = 2.0 * abs(p.lobe_mass())
    h = params.lattice_spacing(l1, T)
    grid = lattice_sampling_grid(p, h, delta, offset)
    w0 = mollify_initial(sample_preset(p, grid), delta)
    ens = tile_and_weigh(w0, h, params.eps, params.profile, offset,
                         params.drop_threshold, params.max_blobs)
    return ens, w0


# ---------------------------------------------------------------- velocities

def velocity_direct(e: BlobEnsemble, targets) -> np.ndarray:
    """Exact ``sum_i Gamma_i K_eps(x - X_i)``; the self term vanishes."""
    t = np.asarray(targets, dtype=float).reshape(-1, 2)
    if e.n == 0:
        return np.zeros_like(t)
    tm, tdm = e.profile.mass_table
    u, v = _jit.direct_velocity(e.positions[:, 0].copy(), e.positions[:, 1].copy(), e.gamma,
                                np.ascontiguousarray(t[:, 0]), np.ascontiguousarray(t[:, 1]),
                                float(e.eps), e.profile.code, tm, tdm)
    return np.column_stack([u, v])


def velocity(e: BlobEnsemble, targets, params: VortexBlobParams | None = None) -> np.ndarray:
    """Velocity through the configured summation path."""
    t = np.asarray(targets, dtype=float).reshape(-1, 2)
    mode = params.velocity if params else "auto"
    use_tree = mode == "tree" or (mode == "auto" and e.n * len(t) > 4_000_000 and e.n > 500)
    if use_tree and e.n > 0:
        theta = params.theta if params else 0.5
        order = params.tree_order if params else 12
        return velocity_treecode(e.positions[:, 0].copy(), e.positions[:, 1].copy(), e.gamma,
                                 t, e.eps, e.profile, theta, order)
    return velocity_direct(e, t)


def _checked(x, t, dt):
    bad = ~np.all(np.isfinite(x), axis=1)
    if np.any(bad):
        idx = int(np.argmax(bad))
        raise InstabilityError(f"blob {idx} left the finite range at t={t + dt:g}",
                               index=idx, suggested_dt=0.5 * dt)
    return x


def step(e: BlobEnsemble, dt: float, params: VortexBlobParams | None = None) -> BlobEnsemble:
    """Classical RK4 for ``dX_i/dt = u_eps(X_i)``."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    x0 = e.positions
    k1 = velocity(e, x0, params)
    x1 = _checked(x0 + 0.5 * dt * k1, e.t, dt)
    k2 = velocity(e.moved(x1, e.t), x1, params)
    x2 = _checked(x0 + 0.5 * dt * k2, e.t, dt)
    k3 = velocity(e.moved(x2, e.t), x2, params)
    x3 = _checked(x0 + dt * k3, e.t, dt)
    k4 = velocity(e.moved(x3, e.t), x3, params)
    x4 = _checked(x0 + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4), e.t, dt)
    return e.moved(x4, e.t + dt)


def auto_dt(e: BlobEnsemble, safety: float = 0.5, dt_max: float = 0.05,
            params: VortexBlobParams | None = None, n_probe: int = 256) -> float:
    """``safety * min(eps / max|u|, 1 / Lip)`` with a probed velocity-gradient bound.

    The gradient is measured by central differences around up to ``n_probe``
    blobs, with each blob's own (odd) contribution removed: a blob is not
    advected by itself.
    """
    if not 0.0 < safety <= 1.0:
        raise ValueError("safety must lie in (0, 1]")
    if e.n == 0:
        return dt_max
    u = velocity(e, e.positions, params)
    umax = float(np.max(np.hypot(u[:, 0], u[:, 1])))
    if umax == 0.0:
        return dt_max
    stride = max(1, e.n // n_probe)
    idx = np.unique(np.concatenate([np.arange(0, e.n, stride),
                                    [int(np.argmax(np.hypot(u[:, 0], u[:, 1])))],
                                    [int(np.argmax(np.abs(e.gamma)))]]))
    eta = 0.1 * e.eps
    probes = []
    for d in ((eta, 0.0), (-eta, 0.0), (0.0, eta), (0.0, -eta)):
        probes.append(e.positions[idx] + np.array(d))
    vals = velocity(e, np.concatenate(probes), params).reshape(4, len(idx), 2)
    self_x = e.gamma[idx, None] * mollified_kernel(np.array([eta, 0.0]), e.eps, e.profile)
    self_y = e.gamma[idx, None] * mollified_kernel(np.array([0.0, eta]), e.eps, e.profile)
    dudx = (vals[0] - vals[1] - 2.0 * self_x) / (2.0 * eta)
    dudy = (vals[2] - vals[3] - 2.0 * self_y) / (2.0 * eta)
    lip = float(np.max(np.sqrt(np.sum(dudx**2 + dudy**2, axis=1))))
    dt = e.eps / umax
    if lip > 0:
        dt = min(dt, 1.0 / lip)
    return min(dt_max, safety * dt)


# ---------------------------------------------------------------- grid fields

def _margin_ok(e: BlobEnsemble, grid: GridSpec) -> bool:
    if e.n == 0:
        return True
    xmin, xmax, ymin, ymax = grid.bounds()
    m = e.profile.reconstruction_margin(e.eps)
    p = e.positions
    return bool(p[:, 0].min() - m >= xmin and p[:, 0].max() + m <= xmax
                and p[:, 1].min() - m >= ymin and p[:, 1].max() + m <= ymax)


def _flags(e, grid):
    if _margin_ok(e, grid):
        return frozenset()
    warnings.warn("blobs lie within the reconstruction margin of the grid edge", UserWarning,
                  stacklevel=3)
    return frozenset({"margin_violated"})


def _scatter(e: BlobEnsemble, grid: GridSpec, w: np.ndarray, gradient: bool):
    fn = _jit.scatter_gradient if gradient else _jit.scatter_density
    return fn(e.positions[:, 0].copy(), e.positions[:, 1].copy(), np.ascontiguousarray(w),
              grid.origin[0], grid.origin[1], grid.spacing[0], grid.spacing[1],
              grid.dims[0], grid.dims[1], float(e.eps), e.profile.code,
              e.profile.normalization, e.profile.support_radius(e.eps))


def reconstruct_vorticity(e: BlobEnsemble, grid: GridSpec) -> GridField:
    """``omega_eps(x) = sum_i Gamma_i phi_eps(x - X_i)`` at the grid nodes."""
    flags = _flags(e, grid)
    if e.n == 0:
        return GridField(grid, np.zeros(grid.dims), t=e.t, flags=flags)
    vals = _scatter(e, grid, e.gamma[:, None], False)[..., 0]
    return GridField(grid, vals, t=e.t, flags=flags)


def _uv_parts(e, grid, params):
    ug = velocity(e, grid.points(), params).reshape(grid.dims + (2,))
    ub = velocity(e, e.positions, params)
    w = np.column_stack([e.gamma, e.gamma * ub[:, 0], e.gamma * ub[:, 1]])
    return ug, w


def error_field_F(e: BlobEnsemble, grid: GridSpec,
                  params: VortexBlobParams | None = None) -> GridField:
    """``F_eps(x) = sum_i [u_eps(x) - u_eps(X_i)] phi_eps(x - X_i) Gamma_i``."""
    flags = _flags(e, grid)
    if e.n == 0:
        return GridField(grid, np.zeros(grid.dims + (2,)), t=e.t, flags=flags)
    ug, w = _uv_parts(e, grid, params)
    s = _scatter(e, grid, w, False)
    F = ug * s[..., 0:1] - s[..., 1:3]
    return GridField(grid, F, t=e.t, flags=flags)


def error_field_E(e: BlobEnsemble, grid: GridSpec,
                  params: VortexBlobParams | None = None) -> GridField:
    """``E_eps(x) = sum_i [u_eps(x) - u_eps(X_i)] . grad phi_eps(x - X_i) Gamma_i``."""
    flags = _flags(e, grid)
    if e.n == 0:
        return GridField(grid, np.zeros(grid.dims), t=e.t, flags=flags)
    ug, w = _uv_parts(e, grid, params)
    G = _scatter(e, grid, w, True)
    E = ug[..., 0] * G[..., 0, 0] + ug[..., 1] * G[..., 0, 1] - G[..., 1, 0] - G[..., 2, 1]
    return GridField(grid, E, t=e.t, flags=flags)


def divergence_central(f: GridField, order: int = 4) -> GridField:
    """Central-difference divergence of order 2 or 4; rows without a full stencil are zeroed."""
    v = f.values
    dx, dy = f.grid.spacing
    out = np.zeros(f.grid.dims)
    if order == 2:
        out[1:-1, :] += (v[2:, :, 0] - v[:-2, :, 0]) / (2 * dx)
        out[:, 1:-1] += (v[:, 2:, 1] - v[:, :-2, 1]) / (2 * dy)
        w = 1
    elif order == 4:
        a, b = v[..., 0], v[..., 1]
        out[2:-2, :] += (-a[4:] + 8 * a[3:-1] - 8 * a[1:-3] + a[:-4]) / (12 * dx)
        out[:, 2:-2] += (-b[:, 4:] + 8 * b[:, 3:-1] - 8 * b[:, 1:-3] + b[:, :-4]) / (12 * dy)
        w = 2
    else:
        raise ValueError("order must be 2 or 4")
    out[:w, :] = out[-w:, :] = 0.0
    out[:, :w] = out[:, -w:] = 0.0
    return f.with_values(out)


# ---------------------------------------------------------------- snapshot I/O

def write_blob_snapshot(path, e: BlobEnsemble) -> None:
    lines = ["# t=%.17g N=%d eps=%.17g profile=%s" % (e.t, e.n, e.eps, e.profile.kind)]
    lines.extend("%.17g %.17g %.17g" % (x, y, g)
                 for (x, y), g in zip(e.positions, e.gamma))
    Path(path).write_text("\n".join(lines) + "\n")


def read_blob_snapshot(path) -> BlobEnsemble:
    text = Path(path).read_text().splitlines()
    if not text or not text[0].startswith("#"):
        raise DataError(f"{path}: missing blob snapshot header")
    hdr = dict(tok.split("=", 1) for tok in text[0][1:].split())
    try:
        n = int(hdr["N"])
        e = BlobEnsemble(np.zeros((0, 2)), np.zeros(0), float(hdr["eps"]),
                         BlobProfile(hdr["profile"]), float(hdr["t"]))
    except (KeyError, ValueError) as exc:
        raise DataError(f"{path}: malformed header ({exc})") from None
    rows = [ln.split() for ln in text[1:] if ln.strip()]
    if len(rows) != n:
        raise DataError(f"{path}: header says N={n}, found {len(rows)} rows")
    arr = np.array(rows, dtype=float).reshape(-1, 3)
    return replace(e, positions=arr[:, :2], gamma=arr[:, 2])
