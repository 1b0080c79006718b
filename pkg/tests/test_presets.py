import numpy as np
import pytest

from euler_llog import harness
from euler_llog.errors import ConfigurationError
from euler_llog.grid import GridSpec
from euler_llog.presets import Preset, preset


def test_smooth_dipole_mean_zero_and_antisymmetric():
    p = preset("smooth_dipole")
    g = GridSpec.square(1.5, 256)
    X, Y = g.mesh()
    w = p(X, Y)
    assert abs(w.sum() * g.spacing[0] * g.spacing[1]) < 1e-12
    np.testing.assert_allclose(p(X, -Y), -w, atol=1e-10)


def test_same_sign_pair_has_mass():
    p = preset("patch_pair", sign="same")
    assert not p.mean_zero
    assert p.lobe_mass() == pytest.approx(np.pi * 0.2**2, rel=1e-9)


def test_unknown_preset_and_parameter():
    with pytest.raises(ConfigurationError):
        Preset("vortex_sheet", {})
    with pytest.raises(ConfigurationError):
        preset("patch_pair", beta=2.0)
    with pytest.raises(ConfigurationError):
        preset("patch_pair", d=0.1)


def test_support_radius():
    p = preset("smooth_dipole")
    assert p.support_radius == pytest.approx(0.5 + 3 * 0.15)
    assert p.radial(np.array([0.45, 1.0])).tolist() == [0.0, 0.0]


@pytest.mark.parametrize("beta,verdict", [(2.5, "IN"), (1.5, "OUT")])
def test_membership_loglog(beta, verdict):
    res = harness.membership_verifier(preset("loglog_pair", beta=beta), 1.0)
    assert res.verdict == verdict
    assert np.all(np.diff(res.trace) > 0)


def test_membership_smooth_in():
    assert harness.membership_verifier(preset("smooth_dipole"), 1.0).verdict == "IN"


def test_membership_schedule_validation():
    with pytest.raises(ConfigurationError):
        harness.membership_verifier(preset("smooth_dipole"), 1.0, cap_logs=(1.0, 2.0, 3.0))
