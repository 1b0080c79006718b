"""Experiment orchestration: configs, single runs, refinement sweeps and the
L(log L)^alpha membership verifier."""
from __future__ import annotations

import hashlib
import math
import warnings
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np
from scipy import integrate, optimize

from . import blob as blobmod
from . import spectral as sp
from .diagnostics import (DiagnosticsReport, SnapshotFields, cauchy_distance,
                          kinetic_energy_grid, kinetic_energy_pairwise, mean_vorticity)
from .errors import ConfigurationError, EulerLLogError, InfiniteEnergyWarning
from .grid import GridField, GridSpec, write_grid_snapshot
from .kernel import BlobProfile
from .orlicz import OrliczParams, lp_norm, luxemburg_norm, modular
from .presets import PRESET_NAMES, Preset
from .serfati import SerfatiConfig, serfati_residual

METHODS = ("ES", "VV", "VB")

# key: (attribute, type, unit/description)
KEYS = {
    "method": ("method", str, "ES | VV | VB (exact smooth, vanishing viscosity, vortex blob)"),
    "preset": ("preset", str, "smooth_dipole | patch_pair | loglog_pair"),
    "preset.beta": ("preset_beta", float, "loglog exponent beta [1]"),
    "preset.r0": ("preset_r0", float, "lobe radius [length]"),
    "preset.cap": ("preset_cap", float, "loglog cap Lambda [vorticity, 1/time]"),
    "preset.d": ("preset_d", float, "half distance between lobe centres [length]"),
    "preset.amp": ("preset_amp", float, "lobe amplitude [1/time]"),
    "preset.sign": ("preset_sign", str, "opposite (mean zero) | same"),
    "alpha": ("alpha", float, "Orlicz exponent alpha [1]"),
    "T": ("T", float, "final time [time]"),
    "snapshot_dt": ("snapshot_dt", float, "snapshot interval [time]"),
    "dt": ("dt", float, "spectral time step / blob step ceiling [time]; 0 = automatic"),
    "eps": ("eps", float, "blob width epsilon [length] (VB, required)"),
    "profile": ("profile", str, "blob profile: gaussian | bump"),
    "h_mode": ("h_mode", str, "lattice coupling: manual | practical | theoretical_A1 | theoretical_A2"),
    "h": ("h", float, "lattice spacing for h_mode = manual [length]"),
    "h_c": ("h_c", float, "practical coupling h = h_c * eps^h_q, constant [length^(1-h_q)]"),
    "h_q": ("h_q", float, "practical coupling exponent [1]"),
    "delta": ("delta", float, "mollification width of the initial data [length]; unset = eps^delta_sigma (VB), 0 (ES/VV)"),
    "delta_sigma": ("delta_sigma", float, "exponent sigma in delta = eps^sigma [1]"),
    "nu": ("nu", float, "kinematic viscosity [length^2/time] (VV, > 0)"),
    "grid.n": ("grid_n", int, "modes per axis (ES/VV) or diagnostic grid points per axis (VB)"),
    "grid.L": ("grid_L", float, "half-width of the periodic box or diagnostic grid [length]"),
    "theta_tree": ("theta_tree", float, "treecode opening angle [1], 0 < theta < 1"),
    "safety": ("safety", float, "blob time-step safety factor [1]"),
    "serfati": ("serfati", str, "compute the Serfati residual: on | off"),
    "serfati.eps_cut": ("serfati_eps_cut", float, "inner split radius of the near kernel [length]"),
    "out_dir": ("out_dir", str, "run directory (created)"),
    "seed": ("seed", int, "seed for sampled diagnostics [1]"),
}


@dataclass(frozen=True)
class RunConfig:
    method: str
    preset: str = "smooth_dipole"
    preset_beta: float | None = None
    preset_r0: float | None = None
    preset_cap: float | None = None
    preset_d: float | None = None
    preset_amp: float | None = None
    preset_sign: str | None = None
    alpha: float = 1.0
    T: float = 1.0
    snapshot_dt: float = 0.01
    dt: float = 0.0
    eps: float | None = None
    profile: str = "gaussian"
    h_mode: str = "practical"
    h: float | None = None
    h_c: float = 1.0
    h_q: float = 1.5
    delta: float | None = None
    delta_sigma: float = 1.0
    nu: float = 0.0
    grid_n: int = 128
    grid_L: float | None = None
    theta_tree: float = 0.5
    safety: float = 0.5
    serfati: str = "on"
    serfati_eps_cut: float = 0.25
    out_dir: str = "run"
    seed: int = 0

    # -------------------------------------------------------------- derived
    def preset_obj(self) -> Preset:
        params = {}
        for key, attr in (("beta", "preset_beta"), ("r0", "preset_r0"), ("cap", "preset_cap"),
                          ("d", "preset_d"), ("amp", "preset_amp"), ("sign", "preset_sign")):
            v = getattr(self, attr)
            if v is not None:
                params[key] = v
        if self.preset != "loglog_pair":
            for k in ("beta", "cap"):
                if k in params:
                    raise ConfigurationError(f"preset.{k} only applies to loglog_pair")
        return Preset(self.preset, params)

    @property
    def half_width(self) -> float:
        if self.grid_L is not None:
            return self.grid_L
        return 1.5 if self.method == "VB" else math.pi

    def blob_params(self) -> blobmod.VortexBlobParams:
        return blobmod.VortexBlobParams(
            eps=self.eps, h_mode=self.h_mode, h=self.h, h_c=self.h_c, h_q=self.h_q,
            delta=self.delta, delta_sigma=self.delta_sigma, profile=BlobProfile(self.profile),
            theta=self.theta_tree, safety=self.safety,
            dt_max=self.dt if self.dt > 0 else self.snapshot_dt)

    def n_snapshots(self) -> int:
        return int(round(self.T / self.snapshot_dt))

    # -------------------------------------------------------------- text form
    def to_text(self) -> str:
        lines = []
        for key, (attr, typ, _) in KEYS.items():
            v = getattr(self, attr)
            if v is None:
                continue
            lines.append(f"{key} = {_fmt_value(v)}")
        return "\n".join(lines) + "\n"

    def with_overrides(self, mapping: dict) -> "RunConfig":
        cur = {k: _fmt_value(getattr(self, a)) for k, (a, _, _) in KEYS.items()
               if getattr(self, a) is not None}
        cur.update(mapping)
        return config_from_mapping(cur)

    def digest(self) -> str:
        return hashlib.sha256(self.to_text().encode()).hexdigest()[:16]


def _fmt_value(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def config_from_mapping(raw: dict) -> RunConfig:
    """Typed, validated config; every problem is collected before raising."""
    problems = []
    unknown = sorted(set(raw) - set(KEYS))
    if unknown:
        problems.append("unknown key(s): " + ", ".join(unknown))
    kw = {}
    for key, val in raw.items():
        if key not in KEYS:
            continue
        attr, typ, _ = KEYS[key]
        try:
            if typ is int:
                fv = float(val)
                if fv != int(fv):
                    raise ValueError
                kw[attr] = int(fv)
            else:
                kw[attr] = typ(val)
        except (TypeError, ValueError):
            problems.append(f"{key}: cannot parse {val!r} as {typ.__name__}")
    if "method" not in kw:
        problems.append("method: required key missing")
    elif kw["method"] not in METHODS:
        problems.append(f"method: must be one of {', '.join(METHODS)}")
    m = kw.get("method")
    if m == "VB" and kw.get("eps") is None:
        problems.append("eps: required for method = VB")
    if m == "VB" and kw.get("eps") is not None and not kw["eps"] > 0:
        problems.append("eps: must be positive")
    if m == "VV" and not kw.get("nu", 0.0) > 0:
        problems.append("nu: method = VV needs nu > 0")
    if m == "ES" and kw.get("nu", 0.0) != 0.0:
        problems.append("nu: method = ES is inviscid (nu = 0)")
    if kw.get("preset", "smooth_dipole") not in PRESET_NAMES:
        problems.append(f"preset: must be one of {', '.join(PRESET_NAMES)}")
    T = kw.get("T", 1.0)
    sdt = kw.get("snapshot_dt", 0.01)
    if not T > 0:
        problems.append("T: must be positive")
    if not 0 < sdt <= T:
        problems.append("snapshot_dt: must lie in (0, T]")
    elif abs(T / sdt - round(T / sdt)) > 1e-9 * T / sdt:
        problems.append("snapshot_dt: must divide T")
    if not kw.get("alpha", 1.0) > 0:
        problems.append("alpha: must be positive")
    if not 0 < kw.get("theta_tree", 0.5) < 1:
        problems.append("theta_tree: must lie in (0, 1)")
    if not 0 < kw.get("safety", 0.5) <= 1:
        problems.append("safety: must lie in (0, 1]")
    if kw.get("profile", "gaussian") not in ("gaussian", "bump"):
        problems.append("profile: must be gaussian or bump")
    if kw.get("serfati", "on") not in ("on", "off"):
        problems.append("serfati: must be on or off")
    if kw.get("h_mode", "practical") not in blobmod.H_MODES:
        problems.append(f"h_mode: must be one of {', '.join(blobmod.H_MODES)}")
    if kw.get("h_mode") == "manual" and not kw.get("h"):
        problems.append("h: required for h_mode = manual")
    n = kw.get("grid_n", 128)
    if m in ("ES", "VV") and (n < 4 or n & (n - 1)):
        problems.append("grid.n: spectral runs need a power of two >= 4")
    if n < 4:
        problems.append("grid.n: must be >= 4")
    if kw.get("dt", 0.0) < 0:
        problems.append("dt: must be >= 0")
    if problems:
        raise ConfigurationError("invalid configuration:\n  " + "\n  ".join(problems), problems)
    cfg = RunConfig(**kw)
    try:
        cfg.preset_obj()
    except ConfigurationError as exc:
        raise ConfigurationError(f"invalid configuration:\n  preset: {exc}", [str(exc)]) from None
    return cfg


def parse_config_text(text: str) -> dict:
    raw = {}
    problems = []
    for no, line in enumerate(text.splitlines(), 1):
        s = line.split("#", 1)[0].strip()
        if not s:
            continue
        if "=" not in s:
            problems.append(f"line {no}: expected 'key = value'")
            continue
        k, v = (p.strip() for p in s.split("=", 1))
        raw[k] = v
    if problems:
        raise ConfigurationError("malformed config:\n  " + "\n  ".join(problems), problems)
    return raw


def load_config(path, overrides: dict | None = None) -> RunConfig:
    p = Path(path)
    if not p.is_file():
        raise ConfigurationError(f"{path}: file not found", [f"{path}: file not found"])
    raw = parse_config_text(p.read_text())
    raw.update(overrides or {})
    return config_from_mapping(raw)


# ---------------------------------------------------------------- single run

@dataclass
class RunResult:
    out_dir: Path
    report: DiagnosticsReport
    times: np.ndarray
    velocities: list = field(default_factory=list)
    extras: dict = field(default_factory=dict)


def diagnostic_grid(cfg: RunConfig) -> GridSpec:
    if cfg.method == "VB":
        return GridSpec.square(cfg.half_width, cfg.grid_n)
    return sp.periodic_grid(cfg.half_width, cfg.grid_n)


def _norms(w: GridField, alpha: float):
    return lp_norm(w, 1), modular(w, alpha), luxemburg_norm(w, alpha)


def run(cfg: RunConfig, keep_velocities: bool = True) -> RunResult:
    """Execute one configured run; writes config echo, snapshots and report.csv."""
    out = Path(cfg.out_dir)
    (out / "snapshots").mkdir(parents=True, exist_ok=True)
    (out / "config.txt").write_text(cfg.to_text())
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", InfiniteEnergyWarning)
        OrliczParams(cfg.alpha)
        if cfg.method == "VB":
            return _run_blob(cfg, out, keep_velocities)
        return _run_spectral(cfg, out, keep_velocities)


def _meta(cfg: RunConfig, grid: GridSpec, pre: Preset) -> dict:
    meta = {"method": cfg.method, "config_digest": cfg.digest(), "preset": pre.describe(),
            "grid": f"origin={grid.origin} spacing={grid.spacing} dims={grid.dims}"}
    meta["grid_hash"] = hashlib.sha256(meta["grid"].encode()).hexdigest()[:16]
    for key, (attr, _, _) in KEYS.items():
        v = getattr(cfg, attr)
        if v is not None:
            meta[f"cfg.{key}"] = _fmt_value(v)
    return meta


def _run_spectral(cfg: RunConfig, out: Path, keep: bool) -> RunResult:
    pre = cfg.preset_obj()
    L, n = cfg.half_width, cfg.grid_n
    delta = cfg.delta if cfg.delta is not None else 0.0
    state = sp.init_spectral(pre, L, n, cfg.nu, delta)
    grid = state.grid
    report = DiagnosticsReport(_meta(cfg, grid, pre))
    report.metadata["box_ratio"] = "%.6g" % (L / pre.support_radius)
    mean_zero = pre.mean_zero
    if not mean_zero:
        report.metadata["warning"] = "nonzero mean vorticity: planar energy infinite (torus energy reported)"
    nsnap = cfg.n_snapshots()
    states = [state]
    vel, times = [], []
    budget = 0.0
    rate_prev = sp.viscous_dissipation_rate(state)
    E0 = sp.energy(state)
    dt_used = 0.0
    skew = 0.0

    def record(s, dt_used):
        w = sp.vorticity_field(s)
        u = sp.spectral_velocity(s)
        l1, mod, lux = _norms(w, cfg.alpha)
        report.add(t=s.t, energy=sp.energy(s), l1=l1, modular=mod, luxemburg=lux,
                   mean_vort=float(w.integral()), serfati_res=0.0,
                   max_speed=float(u.magnitude().max()), dt=dt_used)
        write_grid_snapshot(out / "snapshots" / f"omega_{len(times):05d}.txt", w)
        times.append(s.t)
        if keep:
            vel.append(u)

    record(state, 0.0)
    for k in range(1, nsnap + 1):
        t_target = k * cfg.snapshot_dt
        span = t_target - state.t
        dt_lim = cfg.dt if cfg.dt > 0 else 0.8 * sp.cfl_limit(state)
        steps = max(1, int(math.ceil(span / dt_lim - 1e-12)))
        dt = span / steps
        for _ in range(steps):
            state = sp.step_spectral(state, dt)
            rate = sp.viscous_dissipation_rate(state)
            budget += 0.5 * dt * (rate + rate_prev)
            rate_prev = rate
            skew = max(skew, sp.skewness(state)) if state.nu == 0 else skew
        state = replace(state, t=t_target)
        states.append(state)
        record(state, dt)
    extras = {"energy_budget": abs(sp.energy(state) - E0 + budget) / E0 if E0 else 0.0,
              "skewness_max": skew}
    report.metadata["energy_budget_rel"] = "%.6g" % extras["energy_budget"]
    if cfg.serfati == "on":
        res = serfati_residual(states, SerfatiConfig(eps_cut=cfg.serfati_eps_cut), cfg.method)
        for r, v in zip(report.rows, res.residual):
            r["serfati_res"] = float(v)
        extras["serfati"] = res
    report.write(out / "report.csv")
    return RunResult(out, report, np.array(times), vel, extras)


def _run_blob(cfg: RunConfig, out: Path, keep: bool) -> RunResult:
    pre = cfg.preset_obj()
    prm = cfg.blob_params()
    ens, w0 = blobmod.initialize(pre, prm, cfg.T)
    grid = diagnostic_grid(cfg)
    report = DiagnosticsReport(_meta(cfg, grid, pre))
    report.metadata["n_blobs"] = str(ens.n)
    report.metadata["h"] = "%.17g" % prm.lattice_spacing(2 * abs(pre.lobe_mass()), cfg.T)
    report.metadata["delta"] = "%.17g" % prm.mollification_width()
    report.metadata["drop_threshold"] = "%g" % prm.drop_threshold
    mean_zero = pre.mean_zero
    if not mean_zero:
        report.metadata["warning"] = "nonzero mean vorticity: pairwise energy omitted, grid energy reported"
    nsnap = cfg.n_snapshots()
    times, vel, snaps, history = [], [], [], []
    pairwise, gridE = [], []
    want_serfati = cfg.serfati == "on"

    def record(e, dt_used):
        w = blobmod.reconstruct_vorticity(e, grid)
        ug = blobmod.velocity(e, grid.points(), prm).reshape(grid.dims + (2,))
        u = GridField(grid, ug, t=e.t)
        ub = blobmod.velocity(e, e.positions, prm)
        l1, mod, lux = _norms(w, cfg.alpha)
        eg = kinetic_energy_grid(u)
        ep = kinetic_energy_pairwise(e) if mean_zero else eg
        pairwise.append(ep)
        gridE.append(eg)
        report.add(t=e.t, energy=ep, l1=l1, modular=mod, luxemburg=lux,
                   mean_vort=mean_vorticity(e, warn=False), serfati_res=0.0,
                   max_speed=float(np.max(np.hypot(ub[:, 0], ub[:, 1]), initial=0.0)), dt=dt_used)
        blobmod.write_blob_snapshot(out / "snapshots" / f"blobs_{len(times):05d}.txt", e)
        times.append(e.t)
        history.append(e)
        if keep:
            vel.append(u)
        if want_serfati:
            F = blobmod.error_field_F(e, grid, prm)
            snaps.append(SnapshotFields(e.t, w, u, F))

    record(ens, 0.0)
    for k in range(1, nsnap + 1):
        t_target = k * cfg.snapshot_dt
        span = t_target - ens.t
        dt_lim = blobmod.auto_dt(ens, prm.safety, prm.dt_max, prm)
        steps = max(1, int(math.ceil(span / dt_lim - 1e-12)))
        dt = span / steps
        for _ in range(steps):
            ens = blobmod.step(ens, dt, prm)
        ens = ens.moved(ens.positions, t_target)
        record(ens, dt)
    extras = {"history": history, "omega0_eps": w0, "grid_energy": np.array(gridE),
              "pairwise_energy": np.array(pairwise)}
    if want_serfati:
        scfg = SerfatiConfig(eps_cut=cfg.serfati_eps_cut)
        res = serfati_residual(snaps, scfg, "VB")
        res0 = serfati_residual(snaps, scfg, "VB", include_correction=False)
        for r, v in zip(report.rows, res.residual):
            r["serfati_res"] = float(v)
        extras["serfati"] = res
        extras["serfati_uncorrected"] = res0
        report.metadata["serfati_uncorrected_final"] = "%.17g" % res0.final
    report.write(out / "report.csv")
    return RunResult(out, report, np.array(times), vel, extras)


# ---------------------------------------------------------------- sweeps

SWEEP_KEY = {"VB": "eps", "VV": "nu", "ES": "delta"}


@dataclass
class SweepResult:
    key: str
    levels: list
    run_dirs: list
    cauchy: list                      # d(level_k, level_k+1), sup over matched times
    energy_drift: list                # max_t |E(t) - E(0)| / E(0) per level
    modular_ratio: list               # max_t M(t) / M(0) per level
    failures: dict = field(default_factory=dict)

    @property
    def cauchy_decreasing(self) -> bool:
        c = [x for x in self.cauchy if x is not None]
        return len(c) >= 2 and all(b < a for a, b in zip(c[:-1], c[1:]))

    @property
    def drift_endpoints_decrease(self) -> bool:
        d = self.energy_drift
        return d[0] is not None and d[-1] is not None and d[-1] < d[0]

    def to_csv(self) -> str:
        lines = [f"# key={self.key}", "level,value,energy_drift,modular_ratio,cauchy_to_next,status"]
        for i, lv in enumerate(self.levels):
            c = self.cauchy[i] if i < len(self.cauchy) else None
            lines.append(",".join([str(i), repr(float(lv)), _num(self.energy_drift[i]),
                                   _num(self.modular_ratio[i]), _num(c),
                                   self.failures.get(i, "ok").replace(",", ";")]))
        return "\n".join(lines) + "\n"


def _num(v):
    return "nan" if v is None else "%.17g" % v


def refinement_sweep(base: RunConfig, levels, key: str | None = None) -> SweepResult:
    """Run each level into ``out_dir/level_k``; compare velocities at matched times."""
    levels = [float(v) for v in levels]
    if len(levels) < 3:
        raise ConfigurationError("a refinement sweep needs at least 3 levels")
    key = key or SWEEP_KEY[base.method]
    root = Path(base.out_dir)
    results, dirs, failures = [], [], {}
    for i, lv in enumerate(levels):
        d = root / f"level_{i}"
        dirs.append(str(d))
        try:
            cfg = base.with_overrides({key: repr(lv), "out_dir": str(d)})
            results.append(run(cfg))
        except EulerLLogError as exc:
            failures[i] = f"failed: {type(exc).__name__}: {exc}"
            results.append(None)
    drift, mratio, cauchy = [], [], []
    for r in results:
        if r is None:
            drift.append(None)
            mratio.append(None)
            continue
        E = r.report.column("energy")
        M = r.report.column("modular")
        drift.append(float(np.max(np.abs(E - E[0])) / abs(E[0])) if E[0] else None)
        mratio.append(float(M.max() / M[0]) if M[0] else None)
    for a, b in zip(results[:-1], results[1:]):
        if a is None or b is None or len(a.velocities) != len(b.velocities):
            cauchy.append(None)
            continue
        if not np.allclose(a.times, b.times, rtol=0, atol=1e-12):
            cauchy.append(None)
            continue
        cauchy.append(max(cauchy_distance(u, v) for u, v in zip(a.velocities, b.velocities)))
    res = SweepResult(key, levels, dirs, cauchy, drift, mratio, failures)
    root.mkdir(parents=True, exist_ok=True)
    (root / "sweep.csv").write_text(res.to_csv())
    return res


# ---------------------------------------------------------------- membership

DEFAULT_CAP_LOGS = tuple(math.log(100.0) * 2.0**k for k in range(8))


@dataclass
class MembershipResult:
    verdict: str
    cap_logs: np.ndarray
    trace: np.ndarray
    ratio: float | None

    def to_csv(self) -> str:
        lines = [f"# verdict={self.verdict}", f"# ratio={_num(self.ratio)}", "log_cap,modular"]
        lines.extend("%.17g,%.17g" % (c, m) for c, m in zip(self.cap_logs, self.trace))
        return "\n".join(lines) + "\n"


def _loglog_modular(beta, alpha, r0, amp, ell):
    """Capped log+ modular of one lobe ``min(cap, amp r^-2 log(e/r)^-beta)``, ``log cap = ell``.

    With ``s = log(1/r)``: ``f dx = 2 pi amp (1+s)^-beta ds`` and
    ``log f = log amp + 2 s - beta log(1+s)``. Inside the cap radius the
    contribution is ``cap log(cap)^alpha pi r_cap^2 = pi amp ell^alpha (1+s_cap)^-beta``.
    """
    la = math.log(amp)
    s0 = math.log(1.0 / r0)
    logf = lambda s: la + 2.0 * s - beta * math.log1p(s)  # noqa: E731
    # log f is increasing for s > beta/2 - 1; the cap radius is where it reaches ell
    lo = max(s0, beta / 2.0)
    if logf(max(s0, 0.0)) >= ell:
        s_cap = s0
    else:
        hi = max(lo, 1.0)
        while logf(hi) < ell:
            hi *= 2.0
        s_cap = optimize.brentq(lambda s: logf(s) - ell, s0, hi, xtol=1e-14, rtol=1e-15)
    g = lambda s: (1.0 + s) ** -beta * max(logf(s), 0.0) ** alpha  # noqa: E731
    outer = 0.0
    if s_cap > s0:
        # split on a geometric ladder so QUADPACK follows the slowly varying tail
        pts = [s0]
        while pts[-1] < s_cap:
            pts.append(min(s_cap, max(2.0 * pts[-1], pts[-1] + 1.0)))
        for a, b in zip(pts[:-1], pts[1:]):
            outer += integrate.quad(g, a, b, epsabs=0.0, epsrel=1e-12, limit=200)[0]
    outer *= 2.0 * math.pi * amp
    inner = math.pi * amp * ell**alpha * (1.0 + s_cap) ** -beta
    return outer + inner


def _radial_modular(p: Preset, alpha, ell):
    cap = math.exp(ell)
    R = p.lobe_radius

    def g(r):
        f = min(cap, abs(float(p.radial(np.array([r]))[0])))
        return 2.0 * math.pi * r * f * (math.log(f) if f > 1.0 else 0.0) ** alpha

    return integrate.quad(g, 0.0, R, limit=400, epsabs=0.0, epsrel=1e-11)[0]


def membership_verifier(p: Preset, alpha: float, cap_logs=DEFAULT_CAP_LOGS,
                        in_ratio: float = 0.9, rel_increment: float = 0.01) -> MembershipResult:
    """Decide ``int |f| (log+ |f|)^alpha < infinity`` from capped modulars.

    ``q`` is the geometric mean of the last three ratios of successive
    increments. IN when ``q < in_ratio`` or the last increment is below
    ``rel_increment`` of the value; OUT when ``q >= 1``; otherwise UNDECIDED.
    """
    cap_logs = np.asarray(cap_logs, dtype=float)
    if len(cap_logs) < 5 or np.any(np.diff(cap_logs) <= 0):
        raise ConfigurationError("cap schedule needs at least 5 increasing caps")
    trace = []
    for ell in cap_logs:
        if p.name == "loglog_pair":
            prm = p.params
            val = 2.0 * _loglog_modular(prm["beta"], alpha, prm["r0"], prm["amp"], ell)
        else:
            val = 2.0 * _radial_modular(p, alpha, ell)
        trace.append(val)
    trace = np.array(trace)
    inc = np.diff(trace)
    if np.all(np.abs(inc) <= 1e-12 * max(abs(trace[-1]), 1e-300)):
        return MembershipResult("IN", cap_logs, trace, 0.0)
    ratios = inc[1:] / np.where(inc[:-1] != 0, inc[:-1], np.nan)
    last = ratios[-3:]
    q = float(np.exp(np.mean(np.log(last)))) if np.all(last > 0) else None
    if (q is not None and q < in_ratio) or abs(inc[-1]) < rel_increment * abs(trace[-1]):
        verdict = "IN"
    elif q is not None and q >= 1.0:
        verdict = "OUT"
    else:
        verdict = "UNDECIDED"
    return MembershipResult(verdict, cap_logs, trace, q)
