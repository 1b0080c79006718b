"""Verification quantities: energies, zero-mean gate, structure function,
Cauchy distances, transport comparison and the run report."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np
from scipy import special
from scipy.interpolate import RegularGridInterpolator

from . import _jit
from .blob import BlobEnsemble, VortexBlobParams, reconstruct_vorticity, velocity
from .errors import ConfigurationError, DataError, DivergenceError, InfiniteEnergyWarning
from .grid import GridField, GridSpec
from .kernel import BlobProfile
from .serfati import SerfatiConfig, SerfatiResult, SnapshotFields, serfati_residual  # noqa: F401

MEAN_ZERO_RTOL = 1e-6


def mean_vorticity(source, warn: bool = True, rtol: float = 1e-8) -> float:
    """``sum Gamma_i`` for ensembles, the quadrature of ``omega`` for fields.

    Warns (InfiniteEnergyWarning) when the mean is not negligible against the
    total variation, since the planar kinetic energy is then infinite.
    """
    if isinstance(source, BlobEnsemble):
        m = source.total_circulation()
        scale = float(np.abs(source.gamma).sum())
    elif isinstance(source, GridField):
        m = float(source.integral())
        scale = float(np.abs(source.values).sum() * source.grid.cell_area)
    else:
        raise DataError("mean_vorticity needs a BlobEnsemble or a GridField")
    if warn and scale > 0 and abs(m) > rtol * scale:
        warnings.warn(f"nonzero mean vorticity {m:.6g}: kinetic energy is infinite in the plane",
                      InfiniteEnergyWarning, stacklevel=2)
    return m


def kinetic_energy_grid(u: GridField) -> float:
    if not u.is_vector:
        raise DataError("kinetic energy needs a vector field")
    return float(0.5 * np.sum(u.values**2) * u.grid.cell_area)


@lru_cache(maxsize=2)
def _bump_interaction_table(n_table: int = 513, n_fine: int = 4097):
    """``g1(s)`` for two unit bump blobs at distance ``s`` in ``[0, 2]``, plus slopes.

    ``rho2 = phi * phi`` is radial with support radius 2; Newton's theorem
    gives ``g1(s) = log(s) M2(s) + int_s^2 log(t) 2 pi t rho2(t) dt``.
    """
    prof = BlobProfile("bump")
    c = prof.normalization
    xr, wr = np.polynomial.legendre.leggauss(96)
    r = 0.5 * (xr + 1.0)
    wr = 0.5 * wr
    nth = 128
    th = 2.0 * math.pi * np.arange(nth) / nth
    t = np.linspace(0.0, 2.0, n_fine)
    px = r[:, None] * np.cos(th)[None, :]
    py = r[:, None] * np.sin(th)[None, :]
    phi_r = c * np.exp(-1.0 / (1.0 - r * r))
    rho2 = np.empty_like(t)
    for k, tk in enumerate(t):
        d2 = (px - tk) ** 2 + py**2
        inside = d2 < 1.0
        val = np.zeros_like(d2)
        val[inside] = c * np.exp(-1.0 / (1.0 - d2[inside]))
        rho2[k] = np.sum(wr * r * phi_r * val.sum(axis=1)) * (2.0 * math.pi / nth)
    dens = 2.0 * math.pi * t * rho2
    from scipy.integrate import cumulative_simpson

    M2 = cumulative_simpson(dens, x=t, initial=0.0)
    M2 /= M2[-1]
    with np.errstate(divide="ignore", invalid="ignore"):
        logd = np.where(t > 0, np.log(np.where(t > 0, t, 1.0)) * dens, 0.0)
    cum = cumulative_simpson(logd, x=t, initial=0.0)
    tail = cum[-1] - cum
    with np.errstate(divide="ignore", invalid="ignore"):
        g = np.where(t > 0, np.log(np.where(t > 0, t, 1.0)) * M2, 0.0) + tail
        dg = np.where(t > 0, M2 / np.where(t > 0, t, 1.0), 0.0)
    idx = np.linspace(0, n_fine - 1, n_table).astype(int)
    return np.ascontiguousarray(g[idx]), np.ascontiguousarray(dg[idx])


def _energy_tables(profile: BlobProfile):
    if profile.kind == "gaussian":
        z = np.zeros(2)
        return z, z
    return _bump_interaction_table()


def interaction(r, eps: float, profile: BlobProfile = BlobProfile()):
    """Blob-blob log interaction ``g_eps(r)``; ``log r`` beyond the overlap range."""
    r = np.atleast_1d(np.asarray(r, dtype=float))
    out = np.empty_like(r)
    for k, rk in enumerate(r):
        xs = np.array([0.0, rk])
        ys = np.zeros(2)
        gam = np.array([1.0, 1.0])
        gt, gd = _energy_tables(profile)
        e2 = _jit.pairwise_energy(xs, ys, gam, eps, profile.code, gt, gd)
        e1 = _jit.pairwise_energy(xs[:1], ys[:1], gam[:1], eps, profile.code, gt, gd)
        # E(pair) = 2 E(self) - g(r)/(2 pi)
        out[k] = -(e2 - 2.0 * e1) * 2.0 * math.pi
    return out


def self_energy(eps: float, profile: BlobProfile = BlobProfile(), gamma: float = 1.0) -> float:
    """Kinetic energy of a single blob on its own: ``-gamma^2 g_eps(0) / (4 pi)``."""
    gt, gd = _energy_tables(profile)
    return float(_jit.pairwise_energy(np.zeros(1), np.zeros(1), np.array([float(gamma)]),
                                      float(eps), profile.code, gt, gd))


def kinetic_energy_pairwise(e: BlobEnsemble, check_mean_zero: bool = True) -> float:
    """``-(1/4 pi) sum_ij Gamma_i Gamma_j g_eps(|X_i - X_j|)``.

    Equals ``(1/2) int |u_eps|^2`` for mean-zero ensembles. With a nonzero
    mean the planar energy diverges and a DivergenceError is raised unless
    ``check_mean_zero`` is False (then the value is only a regularised
    interaction energy).
    """
    if e.n == 0:
        return 0.0
    if check_mean_zero:
        tot = abs(e.total_circulation())
        if tot > MEAN_ZERO_RTOL * float(np.abs(e.gamma).sum()):
            raise DivergenceError(f"sum of circulations {tot:.3g} is not zero: energy is infinite")
    gt, gd = _energy_tables(e.profile)
    return float(_jit.pairwise_energy(e.positions[:, 0].copy(), e.positions[:, 1].copy(),
                                      e.gamma, float(e.eps), e.profile.code, gt, gd))


def structure_function(u: GridField, radii, periodic: bool | None = None) -> np.ndarray:
    """``S2(r) = sqrt(avg_{|h|<=r} avg_x |u(x+h) - u(x)|^2)`` over grid offsets.

    Non-periodic grids average over the ``x`` for which ``x + h`` stays on the grid.
    """
    periodic = u.grid.periodic if periodic is None else periodic
    v = u.values if u.is_vector else u.values[..., None]
    dx, dy = u.grid.spacing
    nx, ny = u.grid.dims
    out = []
    for r in np.atleast_1d(radii):
        if not r > 0:
            raise ValueError("radii must be positive")
        px = int(math.floor(r / dx))
        py = int(math.floor(r / dy))
        acc = 0.0
        cnt = 0
        for p in range(-px, px + 1):
            for q in range(-py, py + 1):
                if (p * dx) ** 2 + (q * dy) ** 2 > r * r * (1 + 1e-12):
                    continue
                if periodic:
                    d = np.roll(v, shift=(-p, -q), axis=(0, 1)) - v
                else:
                    if abs(p) >= nx or abs(q) >= ny:
                        continue
                    a = v[max(0, -p): nx - max(0, p), max(0, -q): ny - max(0, q)]
                    b = v[max(0, p): nx - max(0, -p) if p < 0 else nx,
                          max(0, q): ny - max(0, -q) if q < 0 else ny]
                    b = b[: a.shape[0], : a.shape[1]]
                    d = b - a
                acc += float(np.mean(np.sum(d * d, axis=-1)))
                cnt += 1
        out.append(math.sqrt(acc / cnt))
    return np.array(out)


def cauchy_distance(a: GridField, b: GridField) -> float:
    """L2 distance between two fields on the same grid."""
    if not a.grid.matches(b.grid) or a.values.shape != b.values.shape:
        raise ConfigurationError("cauchy_distance needs fields on identical grids")
    d = a.values - b.values
    return float(math.sqrt(np.sum(d * d) * a.grid.cell_area))


# ---------------------------------------------------------------- transport comparison

@dataclass
class TransportComparison:
    value: float
    excluded_fraction: float
    t: float


def _profile_hat(profile: BlobProfile, eps: float, k):
    if profile.kind == "gaussian":
        return np.exp(-0.25 * eps * eps * k * k)
    x, w = np.polynomial.legendre.leggauss(128)
    r = 0.5 * (x + 1.0)
    phi = profile.normalization * np.exp(-1.0 / (1.0 - r * r))
    kk = np.asarray(k).ravel()
    vals = (special.j0(np.outer(kk * eps, r)) * (0.5 * w * 2.0 * math.pi * r * phi)).sum(axis=1)
    return vals.reshape(np.shape(k))


def mollify_grid(f: GridField, profile: BlobProfile, eps: float) -> GridField:
    """``phi_eps * f`` by zero-padded FFT (no periodic wrap-around)."""
    nx, ny = f.grid.dims
    dx, dy = f.grid.spacing
    sx, sy = 2 * nx, 2 * ny
    kx = 2.0 * math.pi * np.fft.fftfreq(sx, dx)[:, None]
    ky = 2.0 * math.pi * np.fft.rfftfreq(sy, dy)[None, :]
    mult = _profile_hat(profile, eps, np.sqrt(kx**2 + ky**2))
    out = np.fft.irfft2(np.fft.rfft2(f.values, s=(sx, sy)) * mult, s=(sx, sy))[:nx, :ny]
    return f.with_values(out)


def _interp_ensemble(history, times, t):
    k = int(np.clip(np.searchsorted(times, t, side="right") - 1, 0, len(times) - 2))
    s = (t - times[k]) / (times[k + 1] - times[k])
    pa, pb = history[k].positions, history[k + 1].positions
    return history[k].moved((1.0 - s) * pa + s * pb, t)


def transport_comparison(history, omega0_eps: GridField, grid: GridSpec, index: int = -1,
                         params: VortexBlobParams | None = None,
                         stride: int = 1) -> TransportComparison:
    """``|omega_eps(t) - phi_eps * omega0_eps((X_eps)^-1(t))|_L1`` on ``grid``.

    Characteristics are traced backward from the grid nodes by RK4 through
    the stored blob history (positions linearly interpolated in time). Feet
    that leave the stored initial-data grid get ``omega0_eps = 0`` and are
    counted in ``excluded_fraction``.
    """
    history = list(history)
    if not history:
        raise DataError("empty history")
    if len(history) > 1 and any(h.n != history[0].n for h in history):
        raise DataError("blob count changed along the history")
    times = np.array([h.t for h in history])
    index = index % len(history)
    target = history[index]
    x = grid.points()
    idx = list(range(index, 0, -stride))
    if idx and idx[-1] != 0:
        idx.append(0)
    elif not idx:
        idx = [0]
    if idx[0] != 0 or len(idx) > 1:
        for a, b in zip(idx[:-1], idx[1:]):
            t0, t1 = times[a], times[b]
            dt = t1 - t0  # negative
            f = lambda t, p: velocity(_interp_ensemble(history, times, t), p, params)  # noqa: E731
            k1 = f(t0, x)
            k2 = f(t0 + 0.5 * dt, x + 0.5 * dt * k1)
            k3 = f(t0 + 0.5 * dt, x + 0.5 * dt * k2)
            k4 = f(t1, x + dt * k3)
            x = x + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
    ax, ay = omega0_eps.grid.axes()
    interp = RegularGridInterpolator((ax, ay), omega0_eps.values, bounds_error=False,
                                     fill_value=np.nan)
    foot = interp(x)
    outside = ~np.isfinite(foot)
    foot[outside] = 0.0
    bar = GridField(grid, foot.reshape(grid.dims), t=target.t)
    smooth = mollify_grid(bar, target.profile, target.eps)
    rec = reconstruct_vorticity(target, grid)
    diff = np.abs(rec.values - smooth.values)
    return TransportComparison(float(diff.sum() * grid.cell_area), float(outside.mean()), target.t)


# ---------------------------------------------------------------- report

COLUMNS = ("t", "energy", "l1", "modular", "luxemburg", "mean_vort", "serfati_res",
           "max_speed", "dt")


@dataclass
class DiagnosticsReport:
    metadata: dict = field(default_factory=dict)
    rows: list = field(default_factory=list)

    def add(self, **row):
        missing = set(COLUMNS) - set(row)
        if missing:
            raise DataError(f"report row lacks {sorted(missing)}")
        vals = {k: float(row[k]) for k in COLUMNS}
        if not all(math.isfinite(v) for v in vals.values()):
            raise DataError(f"non-finite report entry at t={vals['t']}")
        if self.rows and vals["t"] < self.rows[-1]["t"]:
            raise DataError("report rows must be time ordered")
        self.rows.append(vals)

    def column(self, name: str) -> np.ndarray:
        return np.array([r[name] for r in self.rows])

    def to_csv(self) -> str:
        lines = [f"# {k}={_meta_str(v)}" for k, v in self.metadata.items()]
        lines.append(",".join(COLUMNS))
        lines.extend(",".join("%.17g" % r[c] for c in COLUMNS) for r in self.rows)
        return "\n".join(lines) + "\n"

    def write(self, path) -> None:
        Path(path).write_text(self.to_csv())

    @classmethod
    def read(cls, path) -> "DiagnosticsReport":
        try:
            text = Path(path).read_text().splitlines()
        except OSError as exc:
            raise DataError(f"cannot read report {path}: {exc}") from None
        meta = {}
        i = 0
        while i < len(text) and text[i].startswith("#"):
            body = text[i][1:].strip()
            if "=" in body:
                k, v = body.split("=", 1)
                meta[k.strip()] = v
            i += 1
        if i >= len(text) or tuple(text[i].strip().split(",")) != COLUMNS:
            raise DataError(f"{path}: missing or malformed CSV header")
        rep = cls(meta)
        for ln in text[i + 1:]:
            if not ln.strip():
                continue
            parts = ln.split(",")
            if len(parts) != len(COLUMNS):
                raise DataError(f"{path}: malformed row {ln!r}")
            try:
                rep.add(**dict(zip(COLUMNS, map(float, parts))))
            except ValueError as exc:
                raise DataError(f"{path}: {exc}") from None
        return rep


def _meta_str(v) -> str:
    if isinstance(v, float):
        return "%.17g" % v
    return str(v)
