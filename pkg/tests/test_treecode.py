import numpy as np
import pytest

from euler_llog import blob as B
from euler_llog.kernel import BlobProfile
from euler_llog.treecode import build_quadtree, far_cut, velocity_treecode


def cloud(n, seed=0):
    rng = np.random.default_rng(seed)
    return rng.uniform(-1, 1, n), rng.uniform(-1, 1, n), rng.standard_normal(n)


def test_quadtree_partitions_points():
    x, y, _ = cloud(3000)
    t = build_quadtree(x, y, 16)
    assert sorted(t.perm) == list(range(3000))
    leaves = np.flatnonzero(np.all(t.child < 0, axis=1))
    assert (t.end[leaves] - t.start[leaves]).sum() == 3000
    assert (t.end[leaves] - t.start[leaves]).max() <= 16


def test_far_cut():
    assert far_cut("gaussian", 0.1) == pytest.approx(0.1 * np.sqrt(np.log(1e7)))
    assert far_cut("bump", 0.1) == 0.1


def test_single_blob_identical_to_direct():
    p = BlobProfile()
    t = np.array([[0.3, 0.1], [2.0, -1.0]])
    e = B.BlobEnsemble(np.array([[0.0, 0.0]]), np.array([1.3]), 0.2, p)
    u = velocity_treecode(np.array([0.0]), np.array([0.0]), e.gamma, t, 0.2, p)
    np.testing.assert_array_equal(u, B.velocity_direct(e, t))


@pytest.mark.parametrize("kind", ["gaussian", "bump"])
def test_small_theta_matches_direct(kind):
    x, y, g = cloud(4000, 1)
    p = BlobProfile(kind)
    e = B.BlobEnsemble(np.column_stack([x, y]), g, 0.03, p)
    ref = B.velocity_direct(e, e.positions)
    u = velocity_treecode(x, y, g, e.positions, 0.03, p, theta=1e-3, tol=1e-300)
    assert np.abs(u - ref).max() <= 1e-12 * np.abs(ref).max()


@pytest.mark.parametrize("kind", ["gaussian", "bump"])
def test_default_accuracy_separate_targets(kind):
    x, y, g = cloud(6000, 2)
    p = BlobProfile(kind)
    e = B.BlobEnsemble(np.column_stack([x, y]), g, 0.02, p)
    t = np.random.default_rng(3).uniform(-1.5, 1.5, (2000, 2))
    ref = B.velocity_direct(e, t)
    u = velocity_treecode(x, y, g, t, 0.02, p)
    assert np.abs(u - ref).max() <= 1e-3 * np.abs(ref).max()


def test_theta_validation_and_empty():
    x, y, g = cloud(10)
    with pytest.raises(ValueError):
        velocity_treecode(x, y, g, np.zeros((1, 2)), 0.1, BlobProfile(), theta=1.0)
    out = velocity_treecode(x[:0], y[:0], g[:0], np.ones((3, 2)), 0.1, BlobProfile())
    np.testing.assert_array_equal(out, 0.0)
