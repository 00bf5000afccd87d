"""Uniform tensor grids on boxes in one or two dimensions.

Layout along an axis with ``n`` interior nodes on ``[a, b]``::

    node index   0    1    2   ...   n   n+1
                 |----|----|-- ... --|----|
    cell index     0    1         n-1   n

Boundary nodes ``0`` and ``n+1`` carry the homogeneous Dirichlet value and are
never stored. Cells are the ``n+1`` intervals between consecutive nodes;
exponents and weights live at cell centers.

Two quadrature rules are used:

* midpoint rule on cells, for cell fields (gradients, sampled data);
* per-cell vertex rule ("corner rule"), for nodal functions: each cell
  contributes ``vol / 2**dim`` times the sum over its corners, with the
  cell-centered exponent. For ``p == 2`` this is the lumped mass matrix.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np


@dataclass(frozen=True)
class Domain:
    """Axis-aligned box ``prod [lo_i, hi_i]`` with dimension 1 or 2."""

    bounds: tuple[tuple[float, float], ...]

    def __post_init__(self):
        bounds = tuple((float(lo), float(hi)) for lo, hi in self.bounds)
        if len(bounds) not in (1, 2):
            raise ValueError(f"dimension must be 1 or 2, got {len(bounds)}")
        for lo, hi in bounds:
            if not hi > lo:
                raise ValueError(f"empty interval [{lo}, {hi}]")
        object.__setattr__(self, "bounds", bounds)

    @classmethod
    def interval(cls, lo: float, hi: float) -> "Domain":
        return cls(((lo, hi),))

    @property
    def dimension(self) -> int:
        return len(self.bounds)

    @property
    def lengths(self) -> tuple[float, ...]:
        return tuple(hi - lo for lo, hi in self.bounds)

    @property
    def measure(self) -> float:
        return float(np.prod(self.lengths))


@dataclass(frozen=True)
class Grid:
    domain: Domain
    n: tuple[int, ...]

    def __post_init__(self):
        n = self.n
        if isinstance(n, (int, np.integer)):
            n = (int(n),) * self.domain.dimension
        n = tuple(int(k) for k in n)
        if len(n) != self.domain.dimension:
            raise ValueError("one interior node count per axis required")
        if min(n) < 1:
            raise ValueError("need at least one interior node per axis")
        object.__setattr__(self, "n", n)

    @property
    def dim(self) -> int:
        return self.domain.dimension

    @property
    def h(self) -> tuple[float, ...]:
        return tuple(L / (k + 1) for L, k in zip(self.domain.lengths, self.n))

    @property
    def node_shape(self) -> tuple[int, ...]:
        return self.n

    @property
    def cell_shape(self) -> tuple[int, ...]:
        return tuple(k + 1 for k in self.n)

    @property
    def num_nodes(self) -> int:
        return int(np.prod(self.node_shape))

    @property
    def num_cells(self) -> int:
        return int(np.prod(self.cell_shape))

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.h))

    @property
    def num_corners(self) -> int:
        return 2**self.dim

    def node_axes(self) -> list[np.ndarray]:
        return [lo + h * np.arange(1, k + 1) for (lo, _), h, k in zip(self.domain.bounds, self.h, self.n)]

    def cell_axes(self) -> list[np.ndarray]:
        return [lo + h * (np.arange(k + 1) + 0.5) for (lo, _), h, k in zip(self.domain.bounds, self.h, self.n)]

    def node_coordinates(self) -> np.ndarray:
        """Array of shape ``(dim, *node_shape)``."""
        return np.array(np.meshgrid(*self.node_axes(), indexing="ij"))

    def cell_centers(self) -> np.ndarray:
        """Array of shape ``(dim, *cell_shape)``."""
        return np.array(np.meshgrid(*self.cell_axes(), indexing="ij"))

    # -- stencils ---------------------------------------------------------

    def pad(self, u: np.ndarray) -> np.ndarray:
        return np.pad(np.asarray(u, dtype=float).reshape(self.node_shape), 1)

    def _corner_slices(self):
        for offs in itertools.product((0, 1), repeat=self.dim):
            yield tuple(slice(o, o + k + 1) for o, k in zip(offs, self.n))

    def corner_values(self, u: np.ndarray) -> np.ndarray:
        """Nodal values at the corners of every cell, shape ``(2**dim, *cell_shape)``."""
        up = self.pad(u)
        return np.stack([up[s] for s in self._corner_slices()])

    def corner_adjoint(self, q: np.ndarray) -> np.ndarray:
        """Transpose of :meth:`corner_values`: scatter-add corner data onto interior nodes."""
        out = np.zeros(tuple(k + 2 for k in self.n))
        for qi, s in zip(q, self._corner_slices()):
            out[s] += qi
        return out[(slice(1, -1),) * self.dim]

    def gradient_array(self, u: np.ndarray) -> np.ndarray:
        """Cell gradient of nodal values, shape ``(dim, *cell_shape)``.

        In 1D a forward difference. In 2D each component is the average of
        the two edge differences of the cell along that axis.
        """
        up = self.pad(u)
        if self.dim == 1:
            return (np.diff(up) / self.h[0])[None]
        hx, hy = self.h
        gx = 0.5 * ((up[1:, :-1] - up[:-1, :-1]) + (up[1:, 1:] - up[:-1, 1:])) / hx
        gy = 0.5 * ((up[:-1, 1:] - up[:-1, :-1]) + (up[1:, 1:] - up[1:, :-1])) / hy
        return np.stack([gx, gy])

    def gradient_adjoint(self, F: np.ndarray) -> np.ndarray:
        """Transpose of :meth:`gradient_array` restricted to interior nodes."""
        if self.dim == 1:
            f = F[0] / self.h[0]
            return f[:-1] - f[1:]
        hx, hy = self.h
        fx = 0.5 * F[0] / hx
        fy = 0.5 * F[1] / hy
        out = np.zeros(tuple(k + 2 for k in self.n))
        out[1:, :-1] += fx
        out[:-1, :-1] -= fx
        out[1:, 1:] += fx
        out[:-1, 1:] -= fx
        out[:-1, 1:] += fy
        out[:-1, :-1] -= fy
        out[1:, 1:] += fy
        out[1:, :-1] -= fy
        return out[1:-1, 1:-1]


@dataclass(frozen=True, eq=False)
class GridFunction:
    """Values at interior nodes; zero on the boundary by construction."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float).reshape(self.grid.node_shape)
        if not np.all(np.isfinite(v)):
            raise ValueError("grid function values must be finite")
        object.__setattr__(self, "values", v)

    @classmethod
    def zeros(cls, grid: Grid) -> "GridFunction":
        return cls(grid, np.zeros(grid.node_shape))

    @classmethod
    def from_callable(cls, grid: Grid, fn) -> "GridFunction":
        return cls(grid, fn(*grid.node_coordinates()))

    def __mul__(self, t: float) -> "GridFunction":
        return GridFunction(self.grid, t * self.values)

    __rmul__ = __mul__

    def __add__(self, other: "GridFunction") -> "GridFunction":
        return GridFunction(self.grid, self.values + other.values)


@dataclass(frozen=True, eq=False)
class VectorField:
    grid: Grid
    components: np.ndarray

    @property
    def magnitude(self) -> np.ndarray:
        return np.sqrt(np.sum(self.components**2, axis=0))


@dataclass(frozen=True, eq=False)
class CellField:
    """Scalar data sampled at cell centers."""

    grid: Grid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        object.__setattr__(self, "values", np.broadcast_to(np.asarray(self.values, dtype=float), self.grid.cell_shape))


def gradient(u: GridFunction) -> VectorField:
    return VectorField(u.grid, u.grid.gradient_array(u.values))


def laplacian(u: GridFunction) -> GridFunction:
    """Discrete Laplacian defined as minus the adjoint of the gradient applied to the gradient.

    With this definition ``sum(grad u . grad phi) * vol == -vol * sum(lap(u) * phi)``.
    """
    g = u.grid
    return GridFunction(g, -g.gradient_adjoint(g.gradient_array(u.values)))


def integrate(f, grid: Grid | None = None) -> float:
    """Midpoint rule over cells for a :class:`CellField` or a cell-shaped array."""
    if isinstance(f, CellField):
        grid, values = f.grid, f.values
    else:
        if grid is None:
            raise TypeError("grid required for raw arrays")
        values = np.broadcast_to(np.asarray(f, dtype=float), grid.cell_shape)
    return float(np.sum(values) * grid.cell_volume)


def lebesgue_measure(grid: Grid) -> float:
    return grid.domain.measure


def as_grid(domain_or_bounds: Domain | Sequence, n) -> Grid:
    dom = domain_or_bounds if isinstance(domain_or_bounds, Domain) else Domain(tuple(domain_or_bounds))
    return Grid(dom, n)
