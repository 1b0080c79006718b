"""Barnes-Hut quadtree for the mollified Biot-Savart sum.

Far cells carry a complex multipole expansion of the unmollified kernel,
``u - i v = (1/2 pi i) sum_m a_m / (z - c)^(m+1)``, which is shifted into a
local expansion about each target leaf. A cell is only
accepted when every blob in it lies farther than the mollification reach,
so the far-field kernel matches ``K_eps`` to a set relative tolerance up to
the truncation of the expansion.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _jit

MAX_DEPTH = 48


@dataclass
class QuadTree:
    perm: np.ndarray
    cx: np.ndarray
    cy: np.ndarray
    half: np.ndarray
    start: np.ndarray
    end: np.ndarray
    child: np.ndarray


def build_quadtree(x: np.ndarray, y: np.ndarray, leaf_size: int = 32) -> QuadTree:
    """Quadtree whose nodes own contiguous ranges of the permuted particles."""
    n = len(x)
    if n == 0:
        raise ValueError("cannot build a tree on zero particles")
    xmin, xmax, ymin, ymax = x.min(), x.max(), y.min(), y.max()
    half0 = 0.5 * max(xmax - xmin, ymax - ymin) * (1 + 1e-12) + 1e-300
    cx, cy, half, start, end, child = [], [], [], [], [], []
    perm = np.arange(n)

    def add(c_x, c_y, h, s, e):
        cx.append(c_x)
        cy.append(c_y)
        half.append(h)
        start.append(s)
        end.append(e)
        child.append([-1, -1, -1, -1])
        return len(cx) - 1

    add(0.5 * (xmin + xmax), 0.5 * (ymin + ymax), half0, 0, n)
    work = [(0, 0)]
    while work:
        k, depth = work.pop()
        s, e = start[k], end[k]
        if e - s <= leaf_size or depth >= MAX_DEPTH:
            continue
        idx = perm[s:e]
        east = x[idx] >= cx[k]
        north = y[idx] >= cy[k]
        quad = east.astype(np.int64) + 2 * north.astype(np.int64)
        order = np.argsort(quad, kind="stable")
        perm[s:e] = idx[order]
        counts = np.bincount(quad, minlength=4)
        h = 0.5 * half[k]
        pos = s
        for q in range(4):
            if counts[q] == 0:
                continue
            sx = 1 if q & 1 else -1
            sy = 1 if q & 2 else -1
            c = add(cx[k] + sx * h, cy[k] + sy * h, h, pos, pos + counts[q])
            child[k][q] = c
            work.append((c, depth + 1))
            pos += counts[q]
    return QuadTree(perm, np.array(cx), np.array(cy), np.array(half),
                    np.array(start, dtype=np.int64), np.array(end, dtype=np.int64),
                    np.array(child, dtype=np.int64))


def far_cut(kind: str, eps: float, tol: float = 1e-7) -> float:
    """Distance beyond which ``|K_eps - K| <= tol |K|``.

    For the gaussian the relative gap is ``exp(-rho^2)``; the bump kernel is
    exactly ``K`` outside its support.
    """
    if kind == "gaussian":
        return math.sqrt(math.log(1.0 / tol)) * eps
    return eps


def velocity_treecode(x, y, gamma, targets, eps, profile, theta=0.5, order=12,
                      leaf_size=32, tol=1e-7, target_leaf_size=128):
    """Tree-accelerated ``sum_j gamma_j K_eps(t - X_j)`` at each target."""
    if not 0.0 < theta < 1.0:
        raise ValueError("opening angle theta must lie in (0, 1)")
    targets = np.asarray(targets, dtype=float).reshape(-1, 2)
    if len(x) == 0 or len(targets) == 0:
        return np.zeros_like(targets)
    tree = build_quadtree(x, y, leaf_size)
    xs, ys, gs = x[tree.perm], y[tree.perm], gamma[tree.perm]
    mp = _jit.node_multipoles(xs, ys, gs, tree.cx, tree.cy, tree.start, tree.end, order)
    tm, tdm = profile.mass_table
    tt = build_quadtree(targets[:, 0], targets[:, 1], target_leaf_size)
    leaves = np.flatnonzero(np.all(tt.child < 0, axis=1))
    tp = targets[tt.perm]
    u, v = _jit.tree_velocity(
        xs, ys, gs, np.ascontiguousarray(tp[:, 0]), np.ascontiguousarray(tp[:, 1]),
        float(eps), profile.code, tm, tdm, tree.cx, tree.cy, tree.half, tree.start, tree.end,
        tree.child, mp, float(theta), far_cut(profile.kind, eps, tol),
        tt.cx[leaves], tt.cy[leaves], tt.half[leaves], tt.start[leaves], tt.end[leaves])
    out = np.empty_like(targets)
    out[tt.perm, 0] = u
    out[tt.perm, 1] = v
    return out
