import math

import numpy as np
import pytest

from euler_llog import spectral as S
from euler_llog.errors import ConfigurationError, InstabilityError
from euler_llog.presets import preset


def eigen(n=64, nu=0.0):
    return S.init_spectral(lambda X, Y: np.sin(X) * np.sin(Y), math.pi, n, nu)


def test_state_validation():
    with pytest.raises(ConfigurationError):
        S.init_spectral(lambda X, Y: 0 * X, 1.0, 48)
    with pytest.raises(ConfigurationError):
        S.init_spectral(preset("smooth_dipole"), 1.0, 64)


def test_pure_harmonic_modes_and_round_trip():
    s = eigen()
    nz = np.argwhere(np.abs(s.omega_hat) > 1e-10 * np.abs(s.omega_hat).max())
    assert len(nz) == 2
    X, Y = s.grid.mesh()
    w = S.vorticity_field(s).values
    assert np.abs(w - np.sin(X) * np.sin(Y)).max() < 1e-12


def test_mean_zero_preset_zero_mode():
    s = S.init_spectral(preset("smooth_dipole"), math.pi, 128)
    assert abs(s.omega_hat[0, 0]) < 1e-9 * np.abs(s.omega_hat).max()


def test_velocity_stream_function_and_divergence():
    s = eigen()
    X, Y = s.grid.mesh()
    # K = x_perp / (2 pi |x|^2) gives u = grad_perp psi with lap psi = omega,
    # so psi = -omega / 2 for this |k|^2 = 2 mode
    u = S.spectral_velocity(s).values
    np.testing.assert_allclose(u[..., 0], np.sin(X) * np.cos(Y) / 2, atol=1e-13)
    np.testing.assert_allclose(u[..., 1], -np.cos(X) * np.sin(Y) / 2, atol=1e-13)
    uh, vh = S.velocity_hat(s)
    div = s.wn.kx * uh + s.wn.ky * vh
    assert np.abs(div).max() < 1e-12 * np.abs(uh).max()
    zero = S.init_spectral(lambda X, Y: 0 * X, math.pi, 32)
    assert np.all(S.spectral_velocity(zero).values == 0)


def test_energy_parseval():
    s = S.init_spectral(preset("smooth_dipole"), math.pi, 128)
    assert S.energy(s) == pytest.approx(S.energy_grid(s), rel=1e-10)


def test_steady_eigenmode_inviscid():
    s = eigen()
    w0 = s.omega_hat.copy()
    for _ in range(100):
        s = S.step_spectral(s, 1e-2)
    assert np.abs(s.omega_hat - w0).max() < 1e-10 * np.abs(w0).max()


def test_viscous_eigenmode_and_rate():
    nu = 0.01
    s = eigen(nu=nu)
    z0 = S.enstrophy(s)
    for _ in range(200):
        s = S.step_spectral(s, 5e-3)
    X, Y = s.grid.mesh()
    exact = math.exp(-2 * nu * s.t) * np.sin(X) * np.sin(Y)
    assert np.abs(S.vorticity_field(s).values - exact).max() < 1e-8
    assert S.viscous_dissipation_rate(s) == pytest.approx(nu * math.exp(-4 * nu * s.t) * z0, rel=1e-10)
    assert S.viscous_dissipation_rate(eigen()) == 0.0


def test_cfl_violation_and_dealias_mask():
    s = S.init_spectral(preset("smooth_dipole"), math.pi, 64)
    with pytest.raises(InstabilityError) as ei:
        S.step_spectral(s, 10.0)
    assert ei.value.suggested_dt < 10.0
    s2 = S.step_spectral(s, 0.5 * S.cfl_limit(s))
    assert np.all(s2.omega_hat[~s2.mask] == 0)
    assert s2.omega_hat[0, 0] == s.omega_hat[0, 0]
    assert S.skewness(s2) < 1e-12
