import math

import numpy as np
import pytest

from euler_llog import blob as B
from euler_llog import diagnostics as D
from euler_llog import spectral as S
from euler_llog.errors import (ConfigurationError, DataError, DivergenceError,
                               InfiniteEnergyWarning)
from euler_llog.grid import GridField, GridSpec
from euler_llog.kernel import BlobProfile
from euler_llog.presets import preset
from euler_llog.serfati import SerfatiConfig, SnapshotFields, serfati_residual


def ens(pos, gam, eps=0.05, kind="gaussian", t=0.0):
    return B.BlobEnsemble(np.array(pos, float), np.array(gam, float), eps, BlobProfile(kind), t)


def test_mean_vorticity():
    e, _ = B.initialize(preset("smooth_dipole"), B.VortexBlobParams(eps=0.1, h_mode="manual", h=0.04))
    assert abs(D.mean_vorticity(e)) < 1e-8 * np.abs(e.gamma).sum()
    with pytest.warns(InfiniteEnergyWarning):
        m = D.mean_vorticity(ens([[0, 0]], [2.0]))
    assert m == 2.0
    assert D.mean_vorticity(ens(np.zeros((0, 2)), [])) == 0.0
    with pytest.raises(DataError):
        D.mean_vorticity(3.0)


def test_kinetic_energy_grid():
    g = GridSpec((0.05, 0.05), (0.1, 0.1), (10, 10))
    assert D.kinetic_energy_grid(GridField(g, np.zeros((10, 10, 2)))) == 0.0
    c = GridField(g, np.broadcast_to([3.0, 4.0], (10, 10, 2)).copy())
    assert D.kinetic_energy_grid(c) == pytest.approx(12.5, rel=1e-14)
    with pytest.raises(DataError):
        D.kinetic_energy_grid(GridField(g, np.zeros((10, 10))))


@pytest.mark.parametrize("kind", ["gaussian", "bump"])
def test_self_energy_positive(kind):
    e = D.self_energy(0.1, BlobProfile(kind))
    assert math.isfinite(e) and e > 0
    assert D.kinetic_energy_pairwise(ens([[0.3, 0.1]], [1.0], 0.1, kind), check_mean_zero=False) == pytest.approx(e)


def test_pairwise_energy_matches_grid_energy():
    eps = 0.05
    pair = ens([[-0.25, 0.0], [0.25, 0.0]], [1.0, -1.0], eps)
    g = GridSpec.square(10.0, 2000)
    u = GridField(g, B.velocity_direct(pair, g.points()).reshape(2000, 2000, 2))
    assert D.kinetic_energy_pairwise(pair) == pytest.approx(D.kinetic_energy_grid(u), rel=1e-2)


def test_pairwise_energy_translation_and_mean_gate():
    rng = np.random.default_rng(1)
    pos = rng.uniform(-0.5, 0.5, (40, 2))
    gam = rng.standard_normal(40)
    gam -= gam.mean()
    a = D.kinetic_energy_pairwise(ens(pos, gam))
    b = D.kinetic_energy_pairwise(ens(pos + [3.0, -7.0], gam))
    assert abs(a - b) < 1e-12 * abs(a)
    with pytest.raises(DivergenceError):
        D.kinetic_energy_pairwise(ens(pos, gam + 1.0))


def _brute_s2(v, dx, r):
    n = v.shape[0]
    acc, cnt = 0.0, 0
    k = int(r / dx)
    for p in range(-k, k + 1):
        for q in range(-k, k + 1):
            if (p * dx) ** 2 + (q * dx) ** 2 > r * r * (1 + 1e-12):
                continue
            s = 0.0
            for i in range(n):
                for j in range(n):
                    d = v[(i + p) % n, (j + q) % n] - v[i, j]
                    s += d @ d
            acc += s / (n * n)
            cnt += 1
    return math.sqrt(acc / cnt)


def test_structure_function():
    g = GridSpec.square(math.pi, 16, periodic=True)
    X, Y = g.mesh()
    u = GridField(g, np.stack([np.sin(X), 0 * X], -1))
    radii = [0.5, 1.0, 1.7]
    got = D.structure_function(u, radii)
    ref = [_brute_s2(u.values, g.spacing[0], r) for r in radii]
    np.testing.assert_allclose(got, ref, rtol=1e-12)
    np.testing.assert_allclose(D.structure_function(u * -3.0, radii), 3 * got, rtol=1e-12)
    const = GridField(g, np.ones((16, 16, 2)))
    assert np.all(D.structure_function(const, radii) == 0)


def test_cauchy_distance():
    g = GridSpec.square(1.0, 8)
    rng = np.random.default_rng(0)
    a, b, c = (GridField(g, rng.standard_normal((8, 8, 2))) for _ in range(3))
    assert D.cauchy_distance(a, a) == 0.0
    assert D.cauchy_distance(a, c) <= D.cauchy_distance(a, b) + D.cauchy_distance(b, c) + 1e-12
    with pytest.raises(ConfigurationError):
        D.cauchy_distance(a, GridField(GridSpec.square(2.0, 8), a.values))


def test_transport_comparison_stationary_blob():
    e = ens([[0.0, 0.0]], [1.0], eps=0.1)
    g = GridSpec.square(1.0, 64)
    # radial initial data is invariant under the blob's own swirl
    g0 = GridSpec.square(1.6, 102)
    X, Y = g0.mesh()
    w0 = GridField(g0, np.exp(-(X**2 + Y**2) / 0.05))
    hist = [e, e.moved(e.positions, 0.1), e.moved(e.positions, 0.2)]
    first = D.transport_comparison(hist, w0, g, index=0)
    last = D.transport_comparison(hist, w0, g, index=-1)
    assert last.value == pytest.approx(first.value, rel=1e-3)
    assert last.excluded_fraction == 0.0


def test_report_round_trip_and_validation(tmp_path):
    rep = D.DiagnosticsReport({"method": "ES", "x": 0.1})
    row = dict.fromkeys(D.COLUMNS, 1.0)
    rep.add(**row)
    rep.add(**{**row, "t": 2.0, "energy": 1 / 3})
    rep.write(tmp_path / "r.csv")
    text = (tmp_path / "r.csv").read_text()
    assert "t,energy,l1,modular,luxemburg,mean_vort,serfati_res,max_speed,dt" in text
    back = D.DiagnosticsReport.read(tmp_path / "r.csv")
    assert back.metadata["x"] == "0.10000000000000001"
    assert back.column("energy")[1] == 1 / 3
    with pytest.raises(DataError):
        rep.add(**{**row, "t": 0.5})
    with pytest.raises(DataError):
        rep.add(**{**row, "t": 3.0, "dt": math.nan})
    with pytest.raises(DataError):
        rep.add(t=5.0)
    (tmp_path / "bad.csv").write_text("# m=1\nfoo,bar\n")
    with pytest.raises(DataError):
        D.DiagnosticsReport.read(tmp_path / "bad.csv")


# ---------------------------------------------------------------- Serfati identity

def test_serfati_zero_flow():
    z = S.init_spectral(lambda X, Y: 0 * X, math.pi, 32)
    from dataclasses import replace
    res = serfati_residual([replace(z, t=t) for t in (0.0, 0.1, 0.2)], method="ES")
    assert np.all(res.residual == 0)
    g = GridSpec.square(2.0, 32)
    zero_w, zero_u = GridField(g, np.zeros((32, 32))), GridField(g, np.zeros((32, 32, 2)))
    snaps = [SnapshotFields(t, zero_w, zero_u, zero_u) for t in (0.0, 0.1, 0.2)]
    assert np.all(serfati_residual(snaps, method="VB").residual == 0)


def test_serfati_errors():
    with pytest.raises(ConfigurationError):
        SerfatiConfig(eps_cut=0.6)
    g = GridSpec.square(2.0, 16)
    w, u = GridField(g, np.zeros((16, 16))), GridField(g, np.zeros((16, 16, 2)))
    snaps = [SnapshotFields(t, w, u) for t in (0.0, 0.1)]
    with pytest.raises(ConfigurationError):
        serfati_residual(snaps, method="VB")
    with pytest.raises(ConfigurationError):
        serfati_residual(snaps, method="VV")
    with pytest.raises(ConfigurationError):
        serfati_residual([SnapshotFields(t, w, u) for t in (0.0, 0.1, 0.3)], method="ES")


def _spectral_residual(n, nsnap, T=0.2):
    s = S.init_spectral(preset("smooth_dipole"), math.pi, n)
    states = [s]
    dt_snap = T / nsnap
    for k in range(nsnap):
        steps = max(1, math.ceil(dt_snap / (0.8 * S.cfl_limit(s))))
        for _ in range(steps):
            s = S.step_spectral(s, dt_snap / steps)
        states.append(s)
    return serfati_residual(states, method="ES").final


def test_serfati_spectral_refinement():
    assert _spectral_residual(128, 20) < _spectral_residual(64, 10)


def test_serfati_blob_correction_does_not_hurt():
    e, _ = B.initialize(preset("smooth_dipole"), B.VortexBlobParams(eps=0.15, h_mode="manual", h=0.05))
    g = GridSpec.square(2.0, 128)
    snaps = []
    for k in range(6):
        if k:
            e = B.step(e, 0.02)
        w = B.reconstruct_vorticity(e, g)
        u = GridField(g, B.velocity(e, g.points()).reshape(128, 128, 2))
        snaps.append(SnapshotFields(e.t, w, u, B.error_field_F(e, g)))
    with_f = serfati_residual(snaps, method="VB").residual
    without = serfati_residual(snaps, method="VB", include_correction=False).residual
    assert np.all(with_f[1:] < without[1:])
