"""Uniform rectangular grids and the fields sampled on them.

Values are stored with ``ij`` indexing: ``values[i, j]`` is the sample at
``(x0 + i*dx, y0 + j*dy)``. Integrals use the rectangle rule with weight
``dx*dy`` per sample, which is the midpoint rule for cell-centred data and
the (spectrally accurate) trapezoid rule for periodic data.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import ConfigurationError, DataError


@dataclass(frozen=True)
class GridSpec:
    origin: tuple[float, float]
    spacing: tuple[float, float]
    dims: tuple[int, int]
    periodic: bool = False

    def __post_init__(self):
        if self.spacing[0] <= 0 or self.spacing[1] <= 0:
            raise ConfigurationError("grid spacing must be positive")
        if self.dims[0] < 1 or self.dims[1] < 1:
            raise ConfigurationError("grid must have at least one sample per axis")
        object.__setattr__(self, "origin", (float(self.origin[0]), float(self.origin[1])))
        object.__setattr__(self, "spacing", (float(self.spacing[0]), float(self.spacing[1])))
        object.__setattr__(self, "dims", (int(self.dims[0]), int(self.dims[1])))

    @classmethod
    def square(cls, half_width: float, n: int, periodic: bool = False) -> "GridSpec":
        """``n x n`` grid on ``[-half_width, half_width]^2``.

        Periodic grids omit the right endpoint; non-periodic ones are
        cell-centred so that no sample sits on the boundary.
        """
        h = 2.0 * half_width / n
        if periodic:
            x0 = -half_width
        else:
            x0 = -half_width + 0.5 * h
        return cls((x0, x0), (h, h), (n, n), periodic)

    @property
    def cell_area(self) -> float:
        return self.spacing[0] * self.spacing[1]

    @property
    def area(self) -> float:
        return self.cell_area * self.dims[0] * self.dims[1]

    def axes(self) -> tuple[np.ndarray, np.ndarray]:
        x = self.origin[0] + self.spacing[0] * np.arange(self.dims[0])
        y = self.origin[1] + self.spacing[1] * np.arange(self.dims[1])
        return x, y

    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        x, y = self.axes()
        return np.meshgrid(x, y, indexing="ij")

    def points(self) -> np.ndarray:
        """All sample points as an ``(nx*ny, 2)`` array in row-major order."""
        X, Y = self.mesh()
        return np.column_stack([X.ravel(), Y.ravel()])

    def bounds(self) -> tuple[float, float, float, float]:
        """Extent of the sample points ``(xmin, xmax, ymin, ymax)``."""
        x, y = self.axes()
        return float(x[0]), float(x[-1]), float(y[0]), float(y[-1])

    def matches(self, other: "GridSpec", rtol: float = 1e-12) -> bool:
        if self.dims != other.dims:
            return False
        scale = max(abs(self.spacing[0]), abs(self.spacing[1]))
        return (
            np.allclose(self.origin, other.origin, rtol=0, atol=rtol * scale * max(self.dims))
            and np.allclose(self.spacing, other.spacing, rtol=rtol, atol=0)
        )


@dataclass(frozen=True)
class GridField:
    """Scalar (``nx x ny``) or 2-vector (``nx x ny x 2``) samples on a grid."""

    grid: GridSpec
    values: np.ndarray
    t: float = 0.0
    flags: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        nx, ny = self.grid.dims
        if v.shape not in ((nx, ny), (nx, ny, 2)):
            raise DataError(f"values of shape {v.shape} do not fit grid {self.grid.dims}")
        if not np.all(np.isfinite(v)):
            raise DataError("field contains non-finite values")
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "flags", frozenset(self.flags))

    @property
    def is_vector(self) -> bool:
        return self.values.ndim == 3

    def magnitude(self) -> np.ndarray:
        if self.is_vector:
            return np.hypot(self.values[..., 0], self.values[..., 1])
        return np.abs(self.values)

    def integral(self) -> float | np.ndarray:
        s = self.values.sum(axis=(0, 1))
        return s * self.grid.cell_area

    def with_values(self, values, **changes) -> "GridField":
        return replace(self, values=values, **changes)

    def __add__(self, other):
        _require_same_grid(self, other)
        return self.with_values(self.values + other.values)

    def __sub__(self, other):
        _require_same_grid(self, other)
        return self.with_values(self.values - other.values)

    def __mul__(self, c):
        return self.with_values(self.values * float(c))

    __rmul__ = __mul__


def _require_same_grid(a: GridField, b: GridField):
    if not a.grid.matches(b.grid):
        raise ConfigurationError("fields live on different grids")
    if a.values.shape != b.values.shape:
        raise ConfigurationError("fields have different ranks")


def zeros(grid: GridSpec, vector: bool = False, t: float = 0.0) -> GridField:
    shape = grid.dims + ((2,) if vector else ())
    return GridField(grid, np.zeros(shape), t=t)


def sample(grid: GridSpec, fn, t: float = 0.0) -> GridField:
    """Sample ``fn(X, Y)`` on the grid."""
    X, Y = grid.mesh()
    return GridField(grid, np.asarray(fn(X, Y), dtype=float), t=t)


def _fmt(v: float) -> str:
    return "%.17g" % v


def write_grid_snapshot(path, f: GridField) -> None:
    """Text snapshot: one header line, then row-major values one per line."""
    g = f.grid
    lines = [
        "# t=%s nx=%d ny=%d x0=%s y0=%s dx=%s dy=%s"
        % (_fmt(f.t), g.dims[0], g.dims[1], _fmt(g.origin[0]), _fmt(g.origin[1]),
           _fmt(g.spacing[0]), _fmt(g.spacing[1]))
    ]
    if f.is_vector:
        flat = f.values.reshape(-1, 2)
        lines.extend(f"{_fmt(a)} {_fmt(b)}" for a, b in flat)
    else:
        lines.extend(_fmt(v) for v in f.values.ravel())
    Path(path).write_text("\n".join(lines) + "\n")


def _parse_header(line: str) -> dict[str, str]:
    if not line.startswith("#"):
        raise DataError("snapshot header must start with '#'")
    out = {}
    for tok in line[1:].split():
        if "=" not in tok:
            raise DataError(f"malformed header token {tok!r}")
        k, v = tok.split("=", 1)
        out[k] = v
    return out


def read_grid_snapshot(path, periodic: bool = False) -> GridField:
    text = Path(path).read_text().splitlines()
    if not text:
        raise DataError(f"{path}: empty snapshot")
    h = _parse_header(text[0])
    try:
        nx, ny = int(h["nx"]), int(h["ny"])
        grid = GridSpec((float(h["x0"]), float(h["y0"])), (float(h["dx"]), float(h["dy"])),
                        (nx, ny), periodic)
        t = float(h["t"])
    except KeyError as exc:
        raise DataError(f"{path}: header lacks {exc.args[0]}") from None
    rows = [ln.split() for ln in text[1:] if ln.strip()]
    if len(rows) != nx * ny:
        raise DataError(f"{path}: expected {nx*ny} value lines, found {len(rows)}")
    vals = np.array(rows, dtype=float)
    if vals.shape[1] == 1:
        vals = vals.reshape(nx, ny)
    else:
        vals = vals.reshape(nx, ny, vals.shape[1])
    return GridField(grid, vals, t=t)
