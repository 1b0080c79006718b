import math
import warnings

import numpy as np
import pytest

from euler_llog import blob as B
from euler_llog.errors import (ConfigurationError, DataError, InstabilityError,
                               PracticalityWarning, ResourceError)
from euler_llog.grid import GridField, GridSpec
from euler_llog.kernel import BlobProfile, biot_savart
from euler_llog.orlicz import modular
from euler_llog.presets import preset


def ens(pos, gam, eps=0.1, kind="gaussian"):
    return B.BlobEnsemble(np.array(pos, dtype=float), np.array(gam, dtype=float), eps,
                          BlobProfile(kind))


def test_theoretical_h_values():
    assert B.theoretical_h(0.5, "A1") == pytest.approx(0.0625 * math.exp(-4), rel=1e-14)
    assert B.theoretical_h(0.5, "A2") == pytest.approx(0.015625 * math.exp(-4), rel=1e-14)
    with pytest.warns(PracticalityWarning):
        h = B.theoretical_h(0.2, "A1")
    assert h == pytest.approx(1.6e-3 * math.exp(-25), rel=1e-12)


def test_params_validation():
    with pytest.raises(ConfigurationError):
        B.VortexBlobParams(eps=0.0)
    with pytest.raises(ConfigurationError):
        B.VortexBlobParams(eps=0.1, h_mode="manual")
    with pytest.raises(ConfigurationError):
        B.VortexBlobParams(eps=0.1, h_c=20.0)
    assert B.VortexBlobParams(eps=0.04).lattice_spacing() == pytest.approx(0.008)


def test_ensemble_validation():
    with pytest.raises(DataError):
        B.BlobEnsemble(np.zeros((2, 2)), np.zeros(3), 0.1)
    with pytest.raises(DataError):
        B.BlobEnsemble(np.zeros((1, 2)), [np.inf], 0.1)


def test_tile_exact_unit_square():
    g = GridSpec((0.0125, 0.0125), (0.025, 0.025), (40, 40))
    f = GridField(g, np.ones((40, 40)))
    e = B.tile_and_weigh(f, 0.5, 0.1, offset=0.25)
    assert e.n == 4
    np.testing.assert_allclose(np.sort(e.gamma), 0.25, rtol=1e-13)
    np.testing.assert_allclose(sorted(map(tuple, e.positions)),
                               [(0.25, 0.25), (0.25, 0.75), (0.75, 0.25), (0.75, 0.75)])


def test_tile_resource_cap():
    g = GridSpec((0.0125, 0.0125), (0.025, 0.025), (40, 40))
    with pytest.raises(ResourceError):
        B.tile_and_weigh(GridField(g, np.ones((40, 40))), 0.05, 0.1, max_blobs=10)


def test_initialize_dipole_mean_zero_and_counts():
    p = preset("smooth_dipole")
    e1, w0 = B.initialize(p, B.VortexBlobParams(eps=0.1, h_mode="manual", h=0.04))
    e2, _ = B.initialize(p, B.VortexBlobParams(eps=0.1, h_mode="manual", h=0.02))
    assert abs(e1.total_circulation()) < 1e-8 * np.abs(e1.gamma).sum()
    assert abs(e1.gamma.sum() - w0.integral()) < 1e-12 * np.abs(e1.gamma).sum()
    assert 3.0 < e2.n / e1.n < 5.0


def test_mollify_initial_mass_and_jensen():
    p = preset("patch_pair")
    raw = B.mollify_initial(p, 0.05)
    g = GridSpec.square(1.0, 400)
    w = B.sample_preset(p, g)
    m = B.mollify_initial(w, 0.05)
    assert m.integral() == pytest.approx(w.integral(), abs=1e-10 * np.abs(w.values).sum() * g.cell_area)
    assert modular(m, 1.0) <= modular(w, 1.0) + 1e-8
    assert raw.grid.dims[0] > 0
    with pytest.raises(ConfigurationError):
        B.mollify_initial(GridField(g, np.ones((400, 400))), 0.05)


def test_mollify_initial_converges_second_order():
    p = preset("smooth_dipole")
    g = GridSpec.square(1.2, 480)
    w = B.sample_preset(p, g)

    def err(delta):
        m = B.mollify_initial(w, delta)
        pad = (m.grid.dims[0] - 480) // 2
        return np.abs(m.values[pad:pad + 480, pad:pad + 480] - w.values).sum() * g.cell_area

    e1, e2 = err(0.1), err(0.05)
    assert 3.0 < e1 / e2 < 5.0


def test_velocity_direct_examples():
    e = ens([[0.0, 0.0]], [1.0], eps=0.01)
    x = np.array([[0.1, 0.0], [0.0, 0.0]])
    u = B.velocity_direct(e, x)
    np.testing.assert_allclose(u[0], biot_savart(x[0]), rtol=1e-10)
    np.testing.assert_array_equal(u[1], [0.0, 0.0])
    empty = ens(np.zeros((0, 2)), [])
    np.testing.assert_array_equal(B.velocity_direct(empty, x), np.zeros((2, 2)))
    pair = ens([[-0.5, 0.0], [0.5, 0.0]], [1.0, 1.0], eps=0.01)
    speed = np.hypot(*B.velocity_direct(pair, pair.positions).T)
    np.testing.assert_allclose(speed, 1 / (2 * math.pi), rtol=1e-14)


@pytest.mark.parametrize("kind", ["gaussian", "bump"])
def test_velocity_direct_matches_numpy_sum(kind):
    rng = np.random.default_rng(4)
    e = ens(rng.uniform(-1, 1, (300, 2)), rng.standard_normal(300), eps=0.2, kind=kind)
    t = rng.uniform(-1, 1, (50, 2))
    from euler_llog.kernel import mollified_kernel
    ref = np.einsum("j,ijk->ik", e.gamma,
                    mollified_kernel(t[:, None, :] - e.positions[None], e.eps, e.profile))
    np.testing.assert_allclose(B.velocity_direct(e, t), ref, rtol=0, atol=1e-12 * np.abs(ref).max())


def test_single_blob_stationary_and_auto_dt():
    e = ens([[0.3, -0.2]], [2.0])
    e2 = B.step(e, 0.1)
    np.testing.assert_array_equal(e2.positions, e.positions)
    assert e2.t == pytest.approx(0.1)
    assert B.auto_dt(e, 0.5, dt_max=0.07) == 0.07


def test_auto_dt_pair_and_monotone():
    pair = ens([[-0.5, 0.0], [0.5, 0.0]], [1.0, 1.0], eps=0.01)
    dt = B.auto_dt(pair, 0.5, dt_max=10.0)
    assert dt == pytest.approx(0.5 * 0.01 / (1 / (2 * math.pi)), rel=1e-6)
    p = preset("smooth_dipole")
    dts = []
    for eps in (0.2, 0.1, 0.05):
        e, _ = B.initialize(p, B.VortexBlobParams(eps=eps, h_mode="manual", h=0.025))
        dts.append(B.auto_dt(e, 0.5, dt_max=10.0))
    assert dts[0] >= dts[1] >= dts[2]


def test_step_rejects_bad_dt_and_nonfinite():
    e = ens([[0.0, 0.0], [1e-3, 0.0]], [1e308, 1e308], eps=0.1)
    with pytest.raises(ValueError):
        B.step(e, 0.0)
    with pytest.raises(InstabilityError):
        B.step(e, 1.0)


def test_reconstruct_single_and_linear():
    g = GridSpec.square(1.0, 200)
    one = ens([[0.0, 0.0]], [1.0])
    w = B.reconstruct_vorticity(one, g)
    assert w.integral() == pytest.approx(1.0, rel=1e-6)
    peak = B.reconstruct_vorticity(ens([[0.005, 0.005]], [1.0]), g)
    assert peak.values.max() == pytest.approx(1 / (math.pi * 0.01), rel=1e-12)
    a = ens([[0.1, 0.0]], [1.0])
    b = ens([[0.15, 0.05]], [-0.5])
    both = ens([[0.1, 0.0], [0.15, 0.05]], [1.0, -0.5])
    s = B.reconstruct_vorticity(a, g).values + B.reconstruct_vorticity(b, g).values
    assert np.abs(B.reconstruct_vorticity(both, g).values - s).max() < 1e-12


def test_reconstruct_margin_flag():
    g = GridSpec.square(0.2, 40)
    with pytest.warns(UserWarning):
        w = B.reconstruct_vorticity(ens([[0.15, 0.0]], [1.0]), g)
    assert "margin_violated" in w.flags


def test_error_fields_single_and_empty():
    g = GridSpec.square(1.0, 64)
    e = ens([[0.0, 0.0]], [1.5])
    F = B.error_field_F(e, g)
    u = B.velocity_direct(e, g.points()).reshape(64, 64, 2)
    phi = e.profile.density(g.points(), e.eps).reshape(64, 64)
    np.testing.assert_allclose(F.values, u * phi[..., None] * 1.5, atol=1e-14)
    E = B.error_field_E(e, g)
    assert abs(E.integral()) < 1e-10
    empty = ens(np.zeros((0, 2)), [])
    assert np.all(B.error_field_F(empty, g).values == 0)
    assert np.all(B.error_field_E(empty, g).values == 0)


def test_divergence_orders():
    g = GridSpec.square(1.0, 64)
    X, Y = g.mesh()
    f = GridField(g, np.stack([np.sin(X), np.cos(2 * Y)], axis=-1))
    exact = np.cos(X) - 2 * np.sin(2 * Y)
    e2 = np.abs(B.divergence_central(f, 2).values - exact)[2:-2, 2:-2].max()
    e4 = np.abs(B.divergence_central(f, 4).values - exact)[2:-2, 2:-2].max()
    assert e4 < e2 / 50
    with pytest.raises(ValueError):
        B.divergence_central(f, 3)


def test_blob_snapshot_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    e = B.BlobEnsemble(rng.standard_normal((5, 2)), rng.standard_normal(5), 0.07,
                       BlobProfile("bump"), 0.3)
    B.write_blob_snapshot(tmp_path / "b.txt", e)
    assert (tmp_path / "b.txt").read_text().startswith("# t=0.29999999999999999 N=5 eps=0.070000000000000007 profile=bump")
    back = B.read_blob_snapshot(tmp_path / "b.txt")
    np.testing.assert_array_equal(back.positions, e.positions)
    np.testing.assert_array_equal(back.gamma, e.gamma)
    assert back.eps == e.eps and back.profile == e.profile and back.t == e.t
    (tmp_path / "c.txt").write_text("# t=0 N=2 eps=0.1 profile=gaussian\n0 0 1\n")
    with pytest.raises(DataError):
        B.read_blob_snapshot(tmp_path / "c.txt")
