"""The energy functionals A, B, their discrete derivatives and Rayleigh quotients.

Derivatives are exact gradients of the discretized functionals (the
transpose of the difference and corner stencils applied to the pointwise
integrands), so central differences of the energies are an exact check.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .grid import Grid, GridFunction, gradient
from .modular import coupling_integral, modular
from .problem import ExponentField

DEFAULT_EPS = 1e-10


class QuotientUndefinedError(ZeroDivisionError):
    pass


@dataclass(frozen=True, eq=False)
class StatePair:
    z: GridFunction
    w: GridFunction

    def __post_init__(self):
        if self.z.grid != self.w.grid:
            raise ValueError("components live on different grids")

    @property
    def grid(self) -> Grid:
        return self.z.grid

    @classmethod
    def from_arrays(cls, grid: Grid, z, w) -> "StatePair":
        return cls(GridFunction(grid, z), GridFunction(grid, w))

    @classmethod
    def from_vector(cls, grid: Grid, x: np.ndarray) -> "StatePair":
        m = grid.num_nodes
        return cls.from_arrays(grid, x[:m], x[m:])

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.z.values.ravel(), self.w.values.ravel()])

    def scaled(self, t: float) -> "StatePair":
        return StatePair(t * self.z, t * self.w)

    def abs(self) -> "StatePair":
        return StatePair.from_arrays(self.grid, np.abs(self.z.values), np.abs(self.w.values))


@dataclass(frozen=True, eq=False)
class EnergyGradient:
    dz: np.ndarray
    dw: np.ndarray

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.dz.ravel(), self.dw.ravel()])


def _component_energy(u: np.ndarray, grid: Grid, p: np.ndarray, eps: float):
    g = grid.gradient_array(u)
    mag2 = np.ascontiguousarray(np.sum(g * g, axis=0).ravel())
    vol = np.full(mag2.size, grid.cell_volume)
    e, flux = _kernels.backend.gradient_energy(mag2, np.ascontiguousarray(p.ravel()), vol, eps)
    F = g * (grid.cell_volume * flux.reshape(grid.cell_shape))
    return e, grid.gradient_adjoint(F)


def energy_and_grad_A(s: StatePair, field: ExponentField, eps: float = DEFAULT_EPS):
    ez, dz = _component_energy(s.z.values, s.grid, field.p, eps)
    ew, dw = _component_energy(s.w.values, s.grid, field.q, eps)
    return ez + ew, EnergyGradient(dz, dw)


def energy_A(s: StatePair, field: ExponentField) -> float:
    """``int |grad z|^p / p + int |grad w|^q / q`` (midpoint rule on cells)."""
    return energy_and_grad_A(s, field)[0]


def grad_A(s: StatePair, field: ExponentField, eps: float = DEFAULT_EPS) -> EnergyGradient:
    """Nodal derivative of the discrete A.

    Where ``p(cell) < 2`` the flux factor ``|grad z|^(p-2)`` is replaced by
    ``(|grad z|^2 + eps^2)^((p-2)/2)``.
    """
    return energy_and_grad_A(s, field, eps)[1]


def energy_and_grad_B(s: StatePair, field: ExponentField):
    g = s.grid
    k = g.num_corners
    zq = np.ascontiguousarray(g.corner_values(s.z.values).ravel())
    wq = np.ascontiguousarray(g.corner_values(s.w.values).ravel())
    vol = g.cell_volume / k
    val, dzq, dwq = _kernels.backend.coupling(
        zq, wq, field.at_quadrature_points("c"),
        field.at_quadrature_points("alpha") + 1.0, field.at_quadrature_points("beta") + 1.0,
        np.full(zq.size, vol))
    shape = (k,) + g.cell_shape
    dz = g.corner_adjoint(vol * dzq.reshape(shape))
    dw = g.corner_adjoint(vol * dwq.reshape(shape))
    return float(val), EnergyGradient(dz, dw)


def energy_B(s: StatePair, field: ExponentField) -> float:
    """``int c |z|^(alpha+1) |w|^(beta+1)`` on the corner rule."""
    return coupling_integral(s.z, s.w, field)


def energy_B_weighted(s: StatePair, field: ExponentField) -> float:
    """``int c (alpha + beta + 2) |z|^(alpha+1) |w|^(beta+1)``."""
    return coupling_integral(s.z, s.w, field, weight=field.alpha + field.beta + 2.0)


def grad_B(s: StatePair, field: ExponentField) -> EnergyGradient:
    return energy_and_grad_B(s, field)[1]


def b_pairing(s: StatePair, field: ExponentField, phi, psi) -> float:
    """``B'(z, w) . (phi, psi)`` with test functions given at quadrature points.

    ``phi`` and ``psi`` are arrays of shape ``(2**dim, *cell_shape)`` (values
    at the corners of every cell, possibly discontinuous across cells) or
    GridFunctions. Broken test functions let identities such as
    ``B'(z, w) . (z / p, w / q) = B(z, w)`` be checked with the cell exponent.
    """
    g = s.grid
    k = g.num_corners
    phi = g.corner_values(phi.values) if isinstance(phi, GridFunction) else np.asarray(phi)
    psi = g.corner_values(psi.values) if isinstance(psi, GridFunction) else np.asarray(psi)
    zq = np.ascontiguousarray(g.corner_values(s.z.values).ravel())
    wq = np.ascontiguousarray(g.corner_values(s.w.values).ravel())
    _, dzq, dwq = _kernels.backend.coupling(
        zq, wq, field.at_quadrature_points("c"),
        field.at_quadrature_points("alpha") + 1.0, field.at_quadrature_points("beta") + 1.0,
        np.ones(zq.size))
    vol = g.cell_volume / k
    return float(vol * (np.dot(dzq, phi.ravel()) + np.dot(dwq, psi.ravel())))


def euler_test_functions(s: StatePair, field: ExponentField):
    """Broken test functions ``(z / p, w / q)`` at quadrature points."""
    g = s.grid
    return g.corner_values(s.z.values) / field.p, g.corner_values(s.w.values) / field.q


def gradient_modulars(s: StatePair, field: ExponentField) -> tuple[float, float]:
    """``(int |grad z|^p, int |grad w|^q)``."""
    return modular(gradient(s.z), field.p), modular(gradient(s.w), field.q)


def rayleigh_system(s: StatePair, field: ExponentField) -> float:
    b = energy_B(s, field)
    if b <= 0.0:
        raise QuotientUndefinedError("B vanishes; the quotient A/B is undefined")
    return energy_A(s, field) / b


def rayleigh_scalar(u: GridFunction, p) -> float:
    """Modular quotient ``rho_p(grad u) / rho_p(u)``; not scale invariant when ``p`` varies."""
    den = modular(u, p)
    if den <= 0.0:
        raise QuotientUndefinedError("rho(u) vanishes")
    return modular(gradient(u), p) / den
