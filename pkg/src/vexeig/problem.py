"""Problem data: exponent profiles, the sampled field, and hypothesis checks."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .grid import Domain, Grid

__all__ = [
    "Domain",
    "ExponentSpec",
    "ExponentField",
    "FieldConstructionError",
    "Violation",
    "ValidationReport",
    "build_exponent_field",
    "validate_hypotheses",
    "conjugate_exponent",
    "check_monotonicity_condition",
    "sobolev_conjugate",
]

FIELD_NAMES = ("p", "q", "alpha", "beta", "c")


class FieldConstructionError(ValueError):
    pass


@dataclass(frozen=True)
class ExponentSpec:
    """Closed-form scalar profile on the domain.

    kinds
        ``constant``  value
        ``affine``    value + slope . x
        ``radial``    value + slope * |x - center|
        ``piecewise`` piecewise-linear through ``knots`` [(t0, v0), ...] in the
                      first coordinate; ``even=True`` evaluates at ``|x|``
        ``balance``   only for ``alpha``/``beta``: solved from the balance
                      identity given the other three exponents
    """

    kind: str
    value: float = 0.0
    slope: tuple[float, ...] = (0.0,)
    center: tuple[float, ...] = (0.0,)
    knots: tuple[tuple[float, float], ...] = ()
    even: bool = False

    KINDS = ("constant", "affine", "radial", "piecewise", "balance")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise ValueError(f"unknown exponent kind {self.kind!r}")
        object.__setattr__(self, "slope", tuple(float(s) for s in np.atleast_1d(self.slope)))
        object.__setattr__(self, "center", tuple(float(s) for s in np.atleast_1d(self.center)))
        object.__setattr__(self, "knots", tuple((float(t), float(v)) for t, v in self.knots))
        if self.kind == "piecewise":
            ts = [t for t, _ in self.knots]
            if len(ts) < 2 or np.any(np.diff(ts) <= 0):
                raise ValueError("piecewise needs >= 2 knots with increasing abscissae")

    @classmethod
    def constant(cls, value: float) -> "ExponentSpec":
        return cls("constant", value=value)

    @classmethod
    def affine(cls, value: float, slope) -> "ExponentSpec":
        return cls("affine", value=value, slope=slope)

    @classmethod
    def radial(cls, value: float, slope: float, center) -> "ExponentSpec":
        return cls("radial", value=value, slope=(slope,), center=center)

    @classmethod
    def piecewise(cls, knots, even: bool = False) -> "ExponentSpec":
        return cls("piecewise", knots=tuple(knots), even=even)

    @classmethod
    def fz(cls) -> "ExponentSpec":
        """``p = 3`` on ``|x| <= 1``, ``4 - |x|`` on ``1 <= |x| <= 2``, extended evenly."""
        return cls.piecewise(((0.0, 3.0), (1.0, 3.0), (2.0, 2.0)), even=True)

    def evaluate(self, coords: np.ndarray) -> np.ndarray:
        """Evaluate at points ``coords`` of shape ``(dim, ...)``."""
        dim = coords.shape[0]
        if self.kind == "constant":
            return np.full(coords.shape[1:], self.value, dtype=float)
        if self.kind == "affine":
            slope = np.broadcast_to(self.slope, (dim,))
            return self.value + np.tensordot(slope, coords, axes=1)
        if self.kind == "radial":
            center = np.broadcast_to(self.center, (dim,)).reshape((dim,) + (1,) * (coords.ndim - 1))
            r = np.sqrt(np.sum((coords - center) ** 2, axis=0))
            return self.value + self.slope[0] * r
        if self.kind == "piecewise":
            t = np.abs(coords[0]) if self.even else coords[0]
            ts = np.array([k for k, _ in self.knots])
            vs = np.array([v for _, v in self.knots])
            out = np.interp(t, ts, vs)
            bad = (t < ts[0] - 1e-12) | (t > ts[-1] + 1e-12)
            return np.where(bad, np.nan, out)
        raise FieldConstructionError("balance profiles are resolved by build_exponent_field")


@dataclass(frozen=True, eq=False)
class ExponentField:
    """Exponents ``p, q, alpha, beta`` and weight ``c`` sampled at cell centers."""

    grid: Grid
    p: np.ndarray
    q: np.ndarray
    alpha: np.ndarray
    beta: np.ndarray
    c: np.ndarray
    extremes: dict = field(init=False, repr=False)

    def __post_init__(self):
        ext = {}
        for name in FIELD_NAMES:
            arr = np.array(np.broadcast_to(np.asarray(getattr(self, name), dtype=float), self.grid.cell_shape))
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
            ext[name + "-"] = float(arr.min())
            ext[name + "+"] = float(arr.max())
        ext["c_inf"] = float(np.max(np.abs(self.c)))
        object.__setattr__(self, "extremes", ext)
        # quadrature-point copies for the corner rule, flattened
        k = self.grid.num_corners
        qp = {name: np.ascontiguousarray(np.broadcast_to(getattr(self, name), (k,) + self.grid.cell_shape).ravel())
              for name in FIELD_NAMES}
        object.__setattr__(self, "_qp", qp)

    def __getitem__(self, key: str) -> float:
        return self.extremes[key]

    @property
    def p_minus(self):
        return self.extremes["p-"]

    @property
    def p_plus(self):
        return self.extremes["p+"]

    @property
    def q_minus(self):
        return self.extremes["q-"]

    @property
    def q_plus(self):
        return self.extremes["q+"]

    @property
    def alpha_plus(self):
        return self.extremes["alpha+"]

    @property
    def beta_plus(self):
        return self.extremes["beta+"]

    @property
    def c_inf(self):
        return self.extremes["c_inf"]

    def at_quadrature_points(self, name: str) -> np.ndarray:
        return self._qp[name]

    def with_c(self, c) -> "ExponentField":
        return ExponentField(self.grid, self.p, self.q, self.alpha, self.beta, c)

    def swapped(self) -> "ExponentField":
        """Field with the roles of the two components exchanged."""
        return ExponentField(self.grid, self.q, self.p, self.beta, self.alpha, self.c)


def _resolve(spec, coords):
    if isinstance(spec, ExponentSpec):
        return spec.evaluate(coords)
    return np.broadcast_to(np.asarray(spec, dtype=float), coords.shape[1:]).copy()


def build_exponent_field(grid: Grid, specs: Mapping[str, ExponentSpec | float]) -> ExponentField:
    """Sample ``p, q, alpha, beta, c`` at the cell centers of ``grid``.

    Plain numbers are accepted as constants; ``c`` defaults to 1. At most one
    of ``alpha``/``beta`` may be of kind ``balance``.
    """
    specs = dict(specs)
    specs.setdefault("c", 1.0)
    missing = [k for k in FIELD_NAMES if k not in specs]
    if missing:
        raise FieldConstructionError(f"missing exponent specs: {missing}")
    unknown = set(specs) - set(FIELD_NAMES)
    if unknown:
        raise FieldConstructionError(f"unknown exponent names: {sorted(unknown)}")
    coords = grid.cell_centers()
    balanced = [k for k in ("alpha", "beta") if isinstance(specs[k], ExponentSpec) and specs[k].kind == "balance"]
    if len(balanced) > 1:
        raise FieldConstructionError("only one of alpha, beta may be derived from the balance identity")
    for k in ("p", "q", "c"):
        if isinstance(specs[k], ExponentSpec) and specs[k].kind == "balance":
            raise FieldConstructionError(f"{k} cannot be of kind 'balance'")
    vals = {k: _resolve(s, coords) for k, s in specs.items() if k not in balanced}
    if balanced == ["beta"]:
        vals["beta"] = vals["q"] * (1.0 - (vals["alpha"] + 1.0) / vals["p"]) - 1.0
    elif balanced == ["alpha"]:
        vals["alpha"] = vals["p"] * (1.0 - (vals["beta"] + 1.0) / vals["q"]) - 1.0
    for k in FIELD_NAMES:
        bad = ~np.isfinite(vals[k])
        if np.any(bad):
            idx = tuple(int(i[0]) for i in np.nonzero(bad))
            pt = tuple(float(coords[d][idx]) for d in range(grid.dim))
            raise FieldConstructionError(f"{k} undefined at point {pt}")
    return ExponentField(grid, **vals)


# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Violation:
    hypothesis: str
    point: tuple[float, ...]
    value: float


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[Violation, ...]

    @property
    def passed(self) -> bool:
        return not self.violations

    def by_hypothesis(self) -> dict[str, Violation]:
        return {v.hypothesis: v for v in self.violations}


def sobolev_conjugate(p: np.ndarray, dim: int) -> np.ndarray:
    """``N p / (N - p)`` where ``p < N``, ``+inf`` otherwise."""
    p = np.asarray(p, dtype=float)
    with np.errstate(divide="ignore"):
        return np.where(p < dim, dim * p / (dim - p), np.inf)


def validate_hypotheses(field: ExponentField, balance_tol: float = 1e-10) -> ValidationReport:
    coords = field.grid.cell_centers()
    dim = field.grid.dim

    def point(idx):
        return tuple(float(coords[d][idx]) for d in range(dim))

    out = []

    def lower_bound(hyp, arr, bound):
        idx = np.unravel_index(np.argmin(arr), arr.shape)
        if not arr[idx] > bound:
            out.append(Violation(hyp, point(idx), float(arr[idx])))

    lower_bound("p>1", field.p, 1.0)
    lower_bound("q>1", field.q, 1.0)
    lower_bound("alpha>1", field.alpha, 1.0)
    lower_bound("beta>1", field.beta, 1.0)

    c = field.c
    if not np.all(np.isfinite(c)):
        idx = np.unravel_index(np.argmax(~np.isfinite(c)), c.shape)
        out.append(Violation("c bounded", point(idx), float(c[idx])))
    idx = np.unravel_index(np.argmin(c), c.shape)
    if c[idx] < 0:
        out.append(Violation("c>=0", point(idx), float(c[idx])))

    with np.errstate(divide="ignore", invalid="ignore"):
        bal = np.abs((field.alpha + 1.0) / field.p + (field.beta + 1.0) / field.q - 1.0)
    idx = np.unravel_index(np.nanargmax(bal), bal.shape)
    if not bal[idx] <= balance_tol:
        out.append(Violation("balance", point(idx), float(bal[idx])))

    for name in ("p", "q"):
        lo, hi = field[name + "-"], field[name + "+"]
        if 1.0 < lo < dim:
            crit = dim * lo / (dim - lo)
            if not hi < crit:
                idx = np.unravel_index(np.argmax(getattr(field, name)), field.p.shape)
                out.append(Violation(f"{name} subcritical", point(idx), hi - crit))
    return ValidationReport(tuple(out))


def conjugate_exponent(p_value):
    """Hölder conjugate ``p / (p - 1)``; scalar or array."""
    arr = np.asarray(p_value, dtype=float)
    if np.any(arr <= 1.0):
        raise ValueError("conjugate exponent needs p > 1")
    res = arr / (arr - 1.0)
    return float(res) if res.ndim == 0 else res


def check_monotonicity_condition(field: ExponentField, direction: Sequence[float], tol: float = 1e-12) -> bool:
    """True when ``p`` and ``q`` are monotone along every grid line parallel to ``direction``.

    Lines are formed by grouping cell centers with equal coordinate
    orthogonal to ``direction``; within a line samples are ordered by their
    coordinate along it. Axis-parallel and (on square cells) diagonal
    directions give genuine grid lines.
    """
    d = np.asarray(direction, dtype=float).ravel()
    if d.shape != (field.grid.dim,):
        raise ValueError("direction has wrong dimension")
    norm = np.linalg.norm(d)
    if norm == 0:
        raise ValueError("direction must be nonzero")
    d = d / norm
    x = field.grid.cell_centers().reshape(field.grid.dim, -1)
    along = d @ x
    if field.grid.dim == 1:
        keys = np.zeros(along.shape[0])
    else:
        perp = np.array([-d[1], d[0]]) @ x
        scale = min(field.grid.h) * 1e-6
        keys = np.round(perp / scale)
    for arr in (field.p, field.q):
        flat = arr.ravel()
        for key in np.unique(keys):
            sel = np.nonzero(keys == key)[0]
            order = sel[np.argsort(along[sel], kind="stable")]
            seq = flat[order]
            if not (np.all(np.diff(seq) >= -tol) or np.all(np.diff(seq) <= tol)):
                return False
    return True
