import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from euler_llog import kernel as K
from euler_llog.errors import DivergenceError, DomainError

finite = st.floats(-1e3, 1e3, allow_nan=False).filter(lambda v: abs(v) > 1e-6)


def test_biot_savart_examples():
    np.testing.assert_allclose(K.biot_savart([1.0, 0.0]), [0.0, 1 / (2 * math.pi)], rtol=1e-15)
    np.testing.assert_allclose(K.biot_savart([0.0, 2.0]), [-1 / (4 * math.pi), 0.0], rtol=1e-15)


def test_biot_savart_origin_raises():
    with pytest.raises(DomainError):
        K.biot_savart([0.0, 0.0])
    with pytest.raises(DomainError):
        K.biot_savart([1e-301, 0.0])


@given(finite, finite)
def test_biot_savart_magnitude_and_antisymmetry(a, b):
    x = np.array([a, b])
    k = K.biot_savart(x)
    assert np.hypot(*k) == pytest.approx(1 / (2 * math.pi * np.hypot(a, b)), rel=1e-13)
    np.testing.assert_array_equal(K.biot_savart(-x), -k)


@pytest.mark.parametrize("kind", ["gaussian", "bump"])
def test_profile_unit_mass(kind):
    p = K.BlobProfile(kind)
    top = 12.0 if kind == "gaussian" else 1.0
    mass, _ = integrate.quad(lambda r: 2 * math.pi * r * p.density(np.array([r, 0.0]), 1.0),
                             0, top, epsabs=0, epsrel=1e-13, limit=200)
    assert mass == pytest.approx(1.0, abs=1e-10)
    assert p.enclosed_mass(np.array([top]))[0] == pytest.approx(1.0, abs=1e-12)


def test_mollified_kernel_examples():
    p = K.BlobProfile()
    eps = 0.3
    np.testing.assert_array_equal(K.mollified_kernel([0.0, 0.0], eps, p), [0.0, 0.0])
    x = np.array([eps * 0.6, eps * 0.8])
    np.testing.assert_allclose(K.mollified_kernel(x, eps, p),
                               K.biot_savart(x) * (1 - math.exp(-1)), rtol=1e-14)
    far = np.array([10 * eps, 0.0])
    np.testing.assert_allclose(K.mollified_kernel(far, eps, p), K.biot_savart(far), rtol=1e-15)


def _fd_div(p, eps, pts, h):
    ex, ey = np.array([h, 0.0]), np.array([0.0, h])
    return ((K.mollified_kernel(pts + ex, eps, p)[:, 0] - K.mollified_kernel(pts - ex, eps, p)[:, 0])
            + (K.mollified_kernel(pts + ey, eps, p)[:, 1] - K.mollified_kernel(pts - ey, eps, p)[:, 1])
            ) / (2 * h)


@pytest.mark.parametrize("kind", ["gaussian", "bump"])
def test_mollified_kernel_divergence_free(kind):
    p = K.BlobProfile(kind)
    rng = np.random.default_rng(1)
    r = rng.uniform(1.0, 2.0, 400)
    th = rng.uniform(0, 2 * math.pi, 400)
    pts = np.column_stack([r * np.cos(th), r * np.sin(th)])
    d1 = np.abs(_fd_div(p, 1.5, pts, 1e-3)).max()
    d2 = np.abs(_fd_div(p, 1.5, pts, 5e-4)).max()
    assert d1 < 1e-6
    assert d2 < d1 / 3.5


def test_mollified_kernel_odd():
    rng = np.random.default_rng(2)
    x = rng.standard_normal((10_000, 2))
    for kind in ("gaussian", "bump"):
        k = K.mollified_kernel(x, 0.7, K.BlobProfile(kind))
        np.testing.assert_array_equal(K.mollified_kernel(-x, 0.7, K.BlobProfile(kind)), -k)


def test_cutoff_values():
    c = K.CutoffPair()
    assert K.cutoff_eval(c, [0.5, 0.0]) == 1.0
    assert K.cutoff_eval(c, [3.0, 0.0]) == 0.0
    r = np.linspace(1.0, 2.0, 101)
    a = c(np.column_stack([r, np.zeros_like(r)]))
    assert 0 < a[50] < 1
    assert np.all(np.diff(a) <= 0)


def test_cutoff_c2_junctions():
    c = K.CutoffPair()
    for r0 in (1.0, 2.0):
        A, dA, d2A = c.radial(np.array([r0 - 1e-9, r0 + 1e-9]))
        assert abs(dA[0] - dA[1]) < 1e-7 and abs(d2A[0] - d2A[1]) < 1e-6


def _fd_serfati(c, y, h):
    """``d_j (grad_perp [(1 - a) K_i])_l`` by central differences."""
    def g(p):
        return (1 - c(p)) * K.biot_savart(p)

    e = [np.array([h, 0.0]), np.array([0.0, h])]
    H = np.empty((2, 2, 2))
    for a in range(2):
        for b in range(2):
            H[:, a, b] = (g(y + e[a] + e[b]) - g(y + e[a] - e[b])
                          - g(y - e[a] + e[b]) + g(y - e[a] - e[b])) / (4 * h * h)
    return np.stack([-H[..., 1], H[..., 0]], axis=-1)


def test_serfati_far_kernel_regions_and_fd():
    c = K.CutoffPair()
    assert np.all(K.serfati_far_kernel(np.array([0.5, 0.3]), c) == 0)
    x = np.array([2.5, 1.0])
    _, _, HK = K._kernel_derivatives(x)
    np.testing.assert_allclose(K.serfati_far_kernel(x, c), np.stack([-HK[..., 1], HK[..., 0]], -1),
                               rtol=1e-14)
    y = np.array([1.2, 0.7])
    T = K.serfati_far_kernel(y, c)
    e1 = np.abs(_fd_serfati(c, y, 2e-3) - T).max()
    e2 = np.abs(_fd_serfati(c, y, 1e-3) - T).max()
    assert e2 < 1e-4 and e1 / e2 > 3.0


def test_viscous_far_kernel_support():
    c = K.CutoffPair()
    assert np.all(K.viscous_far_kernel(np.array([0.5, 0.0]), c) == 0)
    np.testing.assert_allclose(K.viscous_far_kernel(np.array([5.0, 0.0]), c), 0, atol=1e-14)
    mid = K.viscous_far_kernel(np.array([1.5, 0.0]), c)
    assert np.all(np.isfinite(mid)) and np.abs(mid).max() > 0


def test_g_eps_l1():
    assert K.g_eps_l1(0.05, 1.0) == pytest.approx(2 * math.pi / math.log(10), rel=1e-14)
    assert K.g_eps_l1_quadrature(0.05, 0.6) == pytest.approx(K.g_eps_l1(0.05, 0.6), rel=1e-6)
    vals = [K.g_eps_l1(e, 1.0) for e in (0.1, 0.01, 1e-4, 1e-8)]
    assert all(a > b for a, b in zip(vals, vals[1:]))
    with pytest.raises(DivergenceError):
        K.g_eps_l1(0.05, 0.5)
