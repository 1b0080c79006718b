"""Initial vorticity presets: analytic descriptors with point samplers.

Every preset is an antisymmetric (or, with ``sign='same'``, symmetric) pair
of radial lobes centred at ``(0, +d)`` and ``(0, -d)``; the upper lobe is
positive.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from .errors import ConfigurationError

PRESET_NAMES = ("smooth_dipole", "patch_pair", "loglog_pair")

_DEFAULTS = {
    # lobe radius r0, half separation d, amplitude, sign convention
    "smooth_dipole": {"r0": 0.15, "d": 0.5, "amp": 10.0, "sign": "opposite"},
    "patch_pair": {"r0": 0.2, "d": 0.3, "amp": 1.0, "sign": "opposite"},
    "loglog_pair": {"r0": 0.5, "d": 0.6, "amp": 1.0, "sign": "opposite",
                    "beta": 2.5, "cap": 1e6},
}

# smooth_dipole lobes vanish identically beyond this multiple of r0
SMOOTH_SUPPORT = 3.0


@dataclass(frozen=True)
class Preset:
    name: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.name not in PRESET_NAMES:
            raise ConfigurationError(f"unknown preset {self.name!r}; choose from {PRESET_NAMES}")
        merged = dict(_DEFAULTS[self.name])
        unknown = set(self.params) - set(merged)
        if unknown:
            raise ConfigurationError(f"preset {self.name} has no parameter(s) {sorted(unknown)}")
        merged.update(self.params)
        for k in ("r0", "d", "amp"):
            merged[k] = float(merged[k])
        if merged["r0"] <= 0:
            raise ConfigurationError("preset.r0 must be positive")
        if merged["sign"] not in ("opposite", "same"):
            raise ConfigurationError("preset.sign must be 'opposite' or 'same'")
        if self.name == "loglog_pair":
            merged["beta"] = float(merged["beta"])
            merged["cap"] = float(merged["cap"])
            if merged["cap"] <= 1.0:
                raise ConfigurationError("preset.cap must exceed 1")
            if merged["r0"] >= 1.0:
                raise ConfigurationError("loglog_pair needs r0 < 1")
        object.__setattr__(self, "params", merged)
        if merged["d"] < self.lobe_radius:
            raise ConfigurationError("preset lobes overlap: need d >= lobe radius")

    @property
    def lobe_radius(self) -> float:
        if self.name == "smooth_dipole":
            return SMOOTH_SUPPORT * self.params["r0"]
        return self.params["r0"]

    @property
    def centers(self) -> np.ndarray:
        d = self.params["d"]
        return np.array([[0.0, d], [0.0, -d]])

    @property
    def signs(self) -> tuple[float, float]:
        return (1.0, -1.0) if self.params["sign"] == "opposite" else (1.0, 1.0)

    @property
    def mean_zero(self) -> bool:
        return self.params["sign"] == "opposite"

    @property
    def support_radius(self) -> float:
        """Radius of a centred disc containing the support."""
        return self.params["d"] + self.lobe_radius

    def bbox(self, margin: float = 0.0) -> tuple[float, float, float, float]:
        R = self.lobe_radius + margin
        d = self.params["d"]
        return (-R, R, -d - R, d + R)

    def radial(self, r):
        """Single-lobe profile as a function of distance to its centre."""
        r = np.asarray(r, dtype=float)
        p = self.params
        r0, amp = p["r0"], p["amp"]
        out = np.zeros_like(r)
        if self.name == "smooth_dipole":
            R = SMOOTH_SUPPORT * r0
            m = r < R
            q = (r[m] / r0) ** 2
            out[m] = amp * np.exp(-q / (1.0 - (r[m] / R) ** 2))
        elif self.name == "patch_pair":
            out[r <= r0] = amp
        else:
            m = r <= r0
            rm = r[m]
            with np.errstate(divide="ignore", over="ignore"):
                val = rm ** -2.0 * np.log(math.e / rm) ** -p["beta"]
            val = np.where(rm > 0, val, np.inf)
            out[m] = amp * np.minimum(p["cap"], val)
        return out

    def __call__(self, X, Y):
        X = np.asarray(X, dtype=float)
        Y = np.asarray(Y, dtype=float)
        out = np.zeros(np.broadcast(X, Y).shape)
        for (cx, cy), s in zip(self.centers, self.signs):
            out += s * self.radial(np.hypot(X - cx, Y - cy))
        return out

    def lobe_mass(self) -> float:
        """Integral of one (capped) lobe by adaptive radial quadrature."""
        R = self.lobe_radius
        val, _ = integrate.quad(lambda r: 2.0 * math.pi * r * float(self.radial(np.array([r]))[0]),
                                0.0, R, limit=400, epsabs=0.0, epsrel=1e-11)
        return val

    def describe(self) -> str:
        items = " ".join(f"{k}={v}" for k, v in sorted(self.params.items()))
        return f"{self.name} {items}"


def preset(name: str, **params) -> Preset:
    return Preset(name, params)
