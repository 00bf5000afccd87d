"""Variable-exponent Lebesgue numerics: modulars, Luxemburg norms, inequality checks."""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from . import _kernels
from .checks import Check, le
from .grid import CellField, GridFunction, VectorField, gradient


class NumericalError(RuntimeError):
    def __init__(self, message, bracket=None):
        super().__init__(message)
        self.bracket = bracket


@dataclass(frozen=True)
class LuxemburgNorm:
    value: float
    achieved_modular: float
    iterations: int
    bracket: tuple[float, float] = (0.0, 0.0)

    def __float__(self) -> float:
        return self.value


def quadrature(u, p) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Flatten ``u`` and the exponent to quadrature points.

    Returns ``(|u|, p, weights)``. Nodal functions use the per-cell corner
    rule; cell and vector fields use the midpoint rule.
    """
    if isinstance(u, GridFunction):
        g = u.grid
        vals = np.abs(g.corner_values(u.values))
        k = g.num_corners
        pq = np.broadcast_to(np.asarray(p, dtype=float), (k,) + g.cell_shape)
        w = np.full(vals.size, g.cell_volume / k)
    elif isinstance(u, (VectorField, CellField)):
        g = u.grid
        vals = u.magnitude if isinstance(u, VectorField) else np.abs(u.values)
        pq = np.broadcast_to(np.asarray(p, dtype=float), g.cell_shape)
        w = np.full(vals.size, g.cell_volume)
    else:
        raise TypeError(f"expected GridFunction, VectorField or CellField, got {type(u).__name__}")
    return np.ascontiguousarray(vals, dtype=float).ravel(), np.ascontiguousarray(pq, dtype=float).ravel(), w


def modular(u, p) -> float:
    """``rho_p(u) = int |u|^p(x) dx``."""
    a, pq, w = quadrature(u, p)
    return float(_kernels.backend.power_sum(a, pq, w))


def log_modular(u, p, tau: float = 1.0) -> float:
    """``log rho_p(u / tau)`` computed without overflow."""
    a, pq, w = quadrature(u, p)
    with np.errstate(divide="ignore"):
        la = np.log(a)
    return float(_kernels.backend.log_power_sum(la, pq, np.log(w), float(np.log(tau))))


def luxemburg_norm(u, p, tol: float = 1e-12, max_iter: int = 200) -> LuxemburgNorm:
    """``inf {tau > 0 : rho(u / tau) <= 1}`` by bisection in ``log tau``.

    The initial bracket comes from the modular/norm comparison: with
    ``r = rho(u)``, the norm lies between ``r**(1/p+)`` and ``r**(1/p-)``.
    ``tol`` bounds the relative width of the final bracket.
    """
    a, pq, w = quadrature(u, p)
    with np.errstate(divide="ignore"):
        la = np.log(a)
    lw = np.log(w)
    kern = _kernels.backend.log_power_sum
    lr = kern(la, pq, lw, 0.0)
    if lr == -np.inf:
        return LuxemburgNorm(0.0, 0.0, 0)
    active = a > 0
    pmin, pmax = float(pq[active].min()), float(pq[active].max())
    lo, hi = sorted((lr / pmax, lr / pmin))
    # guard the bracket against rounding in lr
    pad = 4e-16 * (1.0 + abs(lr))
    lo, hi = lo - pad, hi + pad
    it = 0
    while hi - lo > tol and it < max_iter:
        mid = 0.5 * (lo + hi)
        if kern(la, pq, lw, mid) > 0.0:
            lo = mid
        else:
            hi = mid
        it += 1
    if hi - lo > tol:
        raise NumericalError("Luxemburg bisection did not converge", bracket=(float(np.exp(lo)), float(np.exp(hi))))
    lt = 0.5 * (lo + hi)
    return LuxemburgNorm(float(np.exp(lt)), float(np.exp(kern(la, pq, lw, lt))), it, (float(np.exp(lo)), float(np.exp(hi))))


@dataclass(frozen=True)
class ModularNormRelation:
    norm: float
    modular: float
    lower: float
    upper: float
    passed: bool

    @property
    def lower_margin(self) -> float:
        return self.modular - self.lower

    @property
    def upper_margin(self) -> float:
        return self.upper - self.modular


def check_modular_norm_relations(u, p, rtol: float = 1e-10) -> ModularNormRelation:
    """Check ``|u|^p+ <= rho(u) <= |u|^p-`` for norm <= 1 and the reversed chain above 1.

    Exponent extremes are taken over the quadrature points where ``u`` is
    nonzero, which is what the inequalities use.
    """
    a, pq, _ = quadrature(u, p)
    if not np.any(a > 0):
        raise ValueError("u must be nonzero")
    nrm = luxemburg_norm(u, p).value
    rho = modular(u, p)
    pmin, pmax = float(pq[a > 0].min()), float(pq[a > 0].max())
    if nrm > 1:
        lower, upper = nrm**pmin, nrm**pmax
    else:
        lower, upper = nrm**pmax, nrm**pmin
    ok = lower <= rho * (1 + rtol) and rho <= upper * (1 + rtol)
    return ModularNormRelation(nrm, rho, lower, upper, bool(ok))


def poincare_constant_estimate(samples: Iterable[GridFunction], p) -> float:
    """Largest observed ``||u||_p / ||grad u||_p``; a lower bound for the discrete best constant."""
    best = 0.0
    seen = 0
    for u in samples:
        g = gradient(u)
        gn = luxemburg_norm(g, p).value
        if gn == 0.0:
            warnings.warn("skipping sample with zero gradient", RuntimeWarning, stacklevel=2)
            continue
        seen += 1
        best = max(best, luxemburg_norm(u, p).value / gn)
    if not seen:
        raise ValueError("no usable samples")
    return best


def coupling_integral(z, w, field, weight=None) -> float:
    """``int c |z|^(alpha+1) |w|^(beta+1)`` (optionally times ``weight``) on the matching rule."""
    if isinstance(z, GridFunction):
        g = z.grid
        zq = g.corner_values(z.values).ravel()
        wq = g.corner_values(w.values).ravel()
        k = g.num_corners
        vol = g.cell_volume / k
        c = field.at_quadrature_points("c")
        ap1 = field.at_quadrature_points("alpha") + 1.0
        bp1 = field.at_quadrature_points("beta") + 1.0
        if weight is not None:
            c = c * np.broadcast_to(weight, (k,) + g.cell_shape).ravel()
    else:
        zq = np.ravel(z.values).astype(float)
        wq = np.ravel(w.values).astype(float)
        vol = z.grid.cell_volume
        c = field.c.ravel()
        ap1 = field.alpha.ravel() + 1.0
        bp1 = field.beta.ravel() + 1.0
        if weight is not None:
            c = c * np.ravel(np.broadcast_to(weight, z.grid.cell_shape))
    val, _, _ = _kernels.backend.coupling(
        np.ascontiguousarray(zq), np.ascontiguousarray(wq), np.ascontiguousarray(c, dtype=float), ap1, bp1,
        np.full(zq.size, vol))
    return float(val)


def check_young_coupling_bound(z, w, field, rtol: float = 1e-12) -> Check:
    """``int c|z|^(a+1)|w|^(b+1) <= ||c||_inf (rho_p(z) + rho_q(w))``."""
    lhs = coupling_integral(z, w, field)
    rhs = field.c_inf * (modular(z, field.p) + modular(w, field.q))
    return le("young_coupling", lhs, rhs, rtol=rtol)
