"""Numerical verification of computed eigenpairs.

Every check returns a :class:`~vexeig.checks.Check` (``lhs <= rhs`` plus a
margin). Inequalities stated with unspecified intermediate points are
tested in their worst case over the domain, which dominates them.
"""

from __future__ import annotations

import csv
import io
import math
import warnings
from dataclasses import dataclass, field as dc_field
from typing import Iterable

import numpy as np

from . import _kernels
from .checks import Check, le
from .energy import (
    StatePair, energy_and_grad_A, energy_and_grad_B, energy_A, energy_B, energy_B_weighted,
    gradient_modulars,
)
from .grid import GridFunction
from .modular import luxemburg_norm, poincare_constant_estimate
from .problem import ExponentField, sobolev_conjugate

# largest exponent p(x) d^k admitted on the ladder
EXPONENT_CAP = 256.0
DEFAULT_K_MAX = 6


# ---------------------------------------------------------------------------
# positivity and boundedness


def check_positivity(s: StatePair, interior_floor: float = np.finfo(float).tiny) -> Check:
    """Smallest nodal value of both components must reach ``interior_floor > 0``."""
    if not interior_floor > 0:
        raise ValueError("interior_floor must be positive")
    m = min(float(s.z.values.min()), float(s.w.values.min()))
    return le("positivity", interior_floor, m, note=f"min z={s.z.values.min():.6g} min w={s.w.values.min():.6g}")


@dataclass(frozen=True)
class MoserLadder:
    d: float
    d_hat: float
    k_max: int
    exponents_p: tuple[float, ...]  # p+ d^k per level
    norms_u: tuple[float, ...]
    norms_v: tuple[float, ...]
    E: tuple[float, ...]
    sup_u: float
    sup_v: float
    measure: float
    a: float = dc_field(init=False)
    b: float = dc_field(init=False)
    E_const: float = dc_field(init=False)

    def __post_init__(self):
        a = self.d_hat * math.log(self.d)
        E = self.E
        # smallest k-independent b with E_{k+1} <= a k + b + d_hat E_k for every computed k
        b = max(E[k + 1] - self.d_hat * E[k] - a * k for k in range(len(E) - 1))
        dh = self.d_hat
        Ec = E[1] + b / (dh - 1.0) + a * dh / (dh - 1.0) ** 2
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "E_const", Ec)

    @property
    def ratios_u(self) -> tuple[float, ...]:
        return tuple(n / self.sup_u for n in self.norms_u) if self.sup_u > 0 else ()

    @property
    def ratios_v(self) -> tuple[float, ...]:
        return tuple(n / self.sup_v for n in self.norms_v) if self.sup_v > 0 else ()


def admissible_d_hat_interval(field: ExponentField) -> tuple[float, float]:
    """``(max(p+, q+), upper]`` from the critical Sobolev exponents; ``upper`` may be inf."""
    dim = field.grid.dim
    pmax = max(field.p_plus, field.q_plus)
    ratios = []
    for arr, lo, hi in ((field.p, field.p_minus, field.p_plus), (field.q, field.q_minus, field.q_plus)):
        pi = sobolev_conjugate(arr, dim)
        ratios += [float(pi.min()) / lo, float(pi.max()) / hi]
    return pmax, pmax * min(ratios)


def default_d_hat(field: ExponentField) -> float:
    lo, hi = admissible_d_hat_interval(field)
    if math.isfinite(hi):
        if not hi > lo:
            raise ValueError("admissible interval for d_hat is empty")
        return 0.5 * (lo + hi)
    return 2.0 * lo


def _ladder_norm(u: GridFunction, p: np.ndarray, sup: float) -> float:
    if sup == 0.0:
        return 0.0
    # rescale by the sup norm so every power stays in [0, 1]
    return sup * luxemburg_norm(u * (1.0 / sup), p).value


def moser_ladder(s: StatePair, field: ExponentField, k_max: int | None = None,
                 d_hat: float | None = None, exponent_cap: float = EXPONENT_CAP) -> MoserLadder:
    """Luxemburg norms at exponents ``p d^k``, ``q d^k`` and ``E_k`` for ``k = 0..k_max``.

    ``k_max=None`` takes the largest level up to 6 within ``exponent_cap``;
    an explicit ``k_max`` beyond the cap is truncated with a warning.
    """
    s = s.abs()
    d_hat = default_d_hat(field) if d_hat is None else float(d_hat)
    pmax = max(field.p_plus, field.q_plus)
    if not d_hat > pmax:
        raise ValueError("d_hat must exceed max(p+, q+)")
    d = d_hat / pmax
    k_safe = int(math.floor(math.log(exponent_cap / pmax) / math.log(d) + 1e-12))
    if k_max is None:
        k_max = min(DEFAULT_K_MAX, k_safe)
    elif k_max > k_safe:
        warnings.warn(f"ladder truncated at k={k_safe}: exponent {pmax:.3g}*{d:.3g}^{k_max} exceeds {exponent_cap:g}",
                      RuntimeWarning, stacklevel=2)
        k_max = k_safe
    if k_max < 2:
        raise ValueError("ladder needs k_max >= 2 within the exponent cap")
    su, sv = float(s.z.values.max()), float(s.w.values.max())
    nu, nv, E, ex = [], [], [], []
    for k in range(k_max + 1):
        dk = d**k
        a = _ladder_norm(s.z, field.p * dk, su)
        b = _ladder_norm(s.w, field.q * dk, sv)
        nu.append(a)
        nv.append(b)
        ex.append(field.p_plus * dk)
        with np.errstate(divide="ignore"):
            E.append(dk * max(np.log(a), np.log(b)))
    return MoserLadder(d, d_hat, k_max, tuple(ex), tuple(nu), tuple(nv), tuple(float(e) for e in E),
                       su, sv, field.grid.domain.measure)


def ladder_checks(ladder: MoserLadder, rtol: float = 1e-12) -> list[Check]:
    """Recursion with the fitted ``b`` and the closed geometric bound at each level."""
    out = []
    E, a, b, dh = ladder.E, ladder.a, ladder.b, ladder.d_hat
    for k in range(len(E) - 1):
        out.append(le(f"ladder_recursion[k={k}]", E[k + 1], a * k + b + dh * E[k], rtol=rtol, atol=1e-12))
    for k in range(len(E) - 1):
        out.append(le(f"ladder_closed_form[k={k}]", E[k + 1], ladder.E_const * dh**k, rtol=rtol, atol=1e-12,
                      note=f"b={b:.6g}"))
    return out


def check_ladder_sup(ladder: MoserLadder, tol: float = 0.05) -> Check:
    """Top-level ladder norm within ``tol`` of the discrete sup norm (both components)."""
    worst = min(ladder.ratios_u[-1], ladder.ratios_v[-1])
    return le("ladder_sup_ratio", 1.0 - worst, tol, note=f"ratio={worst:.6g} at k={ladder.k_max}")


def check_boundedness(s: StatePair, ladder: MoserLadder, tol: float = 1e-12, trend_tol: float = 0.05) -> Check:
    """``sup_k ||u||_{p d^k} <= max(1, |Omega|) ||u||_inf`` and likewise for ``v``.

    The note carries the ratio trajectory. The profile is flagged when the
    final ratio misses 1 by more than ``trend_tol`` or when the effective
    support ``ratio_0 ** p+ * |Omega|`` at the base level covers at most two
    nodes (a grid-scale spike).
    """
    s = s.abs()
    mu = max(1.0, ladder.measure)
    su, sv = float(s.z.values.max()), float(s.w.values.max())
    lhs = max(max(ladder.norms_u) / (mu * su) if su else 0.0, max(ladder.norms_v) / (mu * sv) if sv else 0.0)
    ru = ladder.ratios_u
    spike = bool(ru) and ru[0] ** ladder.exponents_p[0] * ladder.measure <= 2.0 * s.grid.cell_volume
    flagged = bool(ru and (1.0 - ru[-1] > trend_tol or spike))
    note = "ratios=" + ",".join(f"{r:.4g}" for r in ru) + (" FLAGGED" if flagged else "")
    return le("boundedness", lhs, 1.0, rtol=tol, note=note)


# ---------------------------------------------------------------------------
# level-k integral estimates


def _sup_power(norm: float, lo: float, hi: float) -> float:
    """``max_x norm**e(x)`` for ``e`` ranging over ``[lo, hi]``."""
    if norm == 0.0:
        return 0.0
    return norm**hi if norm >= 1.0 else norm**lo


def check_estimk(s: StatePair, field: ExponentField, k: int, d: float | None = None) -> list[Check]:
    """Level-``k`` integral estimates in their worst-case-point form.

    With ``s = 1 + p(d^k - 1)`` and ``N = ||u||_{p d^k}``:

    ``estimk_integral``
        ``int u^s <= max(1, |Omega|) max(sup_x N^(p d^k), sup_x ||v||^(q d^k))``.
        Both sides scale differently under ``u -> t u``, so this fails for
        small amplitudes; it is returned as advisory.
    ``estimk_integral_holder``
        ``int u^s <= 2 max(1, |Omega|) sup_x N^s(x)``, the variable-exponent
        Hoelder bound with its constant.
    ``estimk_coupling``
        ``int u^(alpha + 1 + p(d^k - 1)) v^(beta + 1) <= 2 max(...)``, no
        weight ``c`` (pointwise Young with the balance identity).
    """
    if k < 0:
        raise ValueError("k must be >= 0")
    s = s.abs()
    if d is None:
        d = default_d_hat(field) / max(field.p_plus, field.q_plus)
    dk = d**k
    g = s.grid
    nc = g.num_corners
    vol = g.cell_volume / nc
    zq = np.ascontiguousarray(g.corner_values(s.z.values).ravel())
    wq = np.ascontiguousarray(g.corner_values(s.w.values).ravel())
    pq = field.at_quadrature_points("p")
    weights = np.full(zq.size, vol)
    lhs36 = _kernels.backend.power_sum(zq, 1.0 + pq * (dk - 1.0), weights)
    ap1 = field.at_quadrature_points("alpha") + 1.0 + pq * (dk - 1.0)
    bp1 = field.at_quadrature_points("beta") + 1.0
    lhs37, _, _ = _kernels.backend.coupling(zq, wq, np.ones(zq.size), ap1, bp1, weights)
    nu = luxemburg_norm(s.z, field.p * dk).value
    nv = luxemburg_norm(s.w, field.q * dk).value
    top = max(_sup_power(nu, field.p_minus * dk, field.p_plus * dk),
              _sup_power(nv, field.q_minus * dk, field.q_plus * dk))
    meas = max(1.0, g.domain.measure)
    s_lo = 1.0 + field.p_minus * (dk - 1.0)
    s_hi = 1.0 + field.p_plus * (dk - 1.0)
    return [
        le(f"estimk_integral[k={k}]", lhs36, meas * top, rtol=1e-12, advisory=True,
           note="not amplitude-consistent"),
        le(f"estimk_integral_holder[k={k}]", lhs36, 2.0 * meas * _sup_power(nu, s_lo, s_hi), rtol=1e-12),
        le(f"estimk_coupling[k={k}]", float(lhs37), 2.0 * top, rtol=1e-12),
    ]


def check_lemma_L6(s_value: float, r: int) -> Check:
    """``sum_{n=1}^r (n - 1) s^(n - 1) <= s / (s - 1)^2`` for ``0 < s < 1``."""
    if not 0.0 < s_value < 1.0 or r < 1:
        raise ValueError("need 0 < s < 1 and r >= 1")
    n = np.arange(1, r + 1, dtype=float)
    lhs = float(math.fsum((n - 1.0) * s_value ** (n - 1.0)))
    return le("partial_sum_bound", lhs, s_value / (s_value - 1.0) ** 2, rtol=1e-14)


# ---------------------------------------------------------------------------
# energy-level checks


@dataclass(frozen=True)
class FloorConstants:
    C_p: float
    C_q: float
    K1: float
    K2: float
    K3: float
    gamma: float


def _K(C: float, lo: float, hi: float) -> float:
    return C**hi if C > 1.0 else C**lo


def floor_constants(field: ExponentField, samples: Iterable[StatePair]) -> FloorConstants:
    """Embedding constants from discrete Poincare estimates over ``samples``.

    The estimates are sample maxima, hence lower bounds for the true discrete
    constants; including the states being tested makes the inequalities
    used downstream hold for those states.
    """
    samples = list(samples)
    Cp = poincare_constant_estimate([s.z for s in samples], field.p)
    Cq = poincare_constant_estimate([s.w for s in samples], field.q)
    pm, pp, qm, qp = field.p_minus, field.p_plus, field.q_minus, field.q_plus
    K1 = _K(Cp, pm, pp) * pp ** (pm / pp) * field.c_inf
    K2 = _K(Cq, qm, qp) * qp ** (qm / qp) * field.c_inf
    return FloorConstants(Cp, Cq, K1, K2, K1 + K2, pp * qp / (pm * qm))


def check_energy_floor(s: StatePair, field: ExponentField, R: float, consts: FloorConstants) -> list[Check]:
    """Lower bounds for ``A`` on ``{B = R}``.

    The small-gradient case yields ``(R / 2K3)^gamma`` and the large-gradient
    case ``min(1/p+, 1/q+)``, so only their minimum bounds ``A`` for every
    state; the largest of the three is reported as an advisory check.
    """
    A = energy_A(s, field)
    t = (R / (2.0 * consts.K3)) ** consts.gamma
    lits = max(t, 1.0 / field.p_plus, 1.0 / field.q_plus)
    cor = min(t, 1.0 / field.p_plus, 1.0 / field.q_plus)
    return [
        le("energy_floor", cor, A, rtol=1e-12),
        le("energy_floor_max_form", lits, A, rtol=1e-12, advisory=True,
           note="max of the three bounds; not implied by the two-case argument"),
    ]


def check_quotient_chain(s: StatePair, field: ExponentField) -> list[Check]:
    """``A/((a+ + b+ + 2) B) <= A / B_weighted <= A / B`` at a feasible state."""
    A = energy_A(s, field)
    B = energy_B(s, field)
    Bw = energy_B_weighted(s, field)
    if B <= 0.0:
        raise ValueError("B vanishes")
    top = field.alpha_plus + field.beta_plus + 2.0
    mid = A / Bw
    return [
        le("quotient_chain_lower", A / (top * B), mid, rtol=1e-12),
        le("quotient_chain_upper", mid, A / B, rtol=1e-12),
    ]


# ---------------------------------------------------------------------------
# aggregate report


@dataclass(frozen=True)
class DiagnosticsReport:
    checks: tuple[Check, ...]
    converged: bool

    @property
    def passed(self) -> bool:
        return self.converged and all(c.passed for c in self.checks if not c.advisory)

    def failures(self) -> list[Check]:
        return [c for c in self.checks if not c.passed and not c.advisory]

    def by_name(self) -> dict[str, Check]:
        return {c.name: c for c in self.checks}

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["check", "passed", "lhs", "rhs", "margin", "advisory", "note"])
        for c in self.checks:
            w.writerow([c.name, int(c.passed), repr(c.lhs), repr(c.rhs), repr(c.margin), int(c.advisory), c.note])
        return buf.getvalue()

    def summary(self) -> str:
        lines = []
        if not self.converged:
            lines.append("solve did not converge; eigenpair checks skipped")
        for c in self.checks:
            tag = "PASS" if c.passed else ("warn" if c.advisory else "FAIL")
            lines.append(f"{tag:4s}  {c.name:32s} lhs={c.lhs:.6g} rhs={c.rhs:.6g} margin={c.margin:.3g}"
                         + (f"  ({c.note})" if c.note else ""))
        n_fail = len(self.failures())
        lines.append(f"{len(self.checks) - n_fail}/{len(self.checks)} checks passed" if self.converged
                     else "not converged")
        return "\n".join(lines)


def full_report(result, field: ExponentField, grad_tol: float | None = None, k_max: int | None = None,
                estimk_levels: int = 3) -> DiagnosticsReport:
    """Run every eigenpair check on a solver result.

    Non-converged results produce a report with ``converged=False`` and
    only the convergence record.
    """
    tol = 1e-7 if grad_tol is None else grad_tol
    if not result.converged:
        return DiagnosticsReport((le("converged", 1.0, 0.0, note="solver did not converge"),), False)
    s, R = result.state, result.R
    checks: list[Check] = []

    A, gA = energy_and_grad_A(s, field, result.eps)
    B, gB = energy_and_grad_B(s, field)
    gA, gB = gA.as_vector(), gB.as_vector()
    checks.append(le("constraint", abs(B - R), 1e-8 * R))
    checks.append(le("energy_identity", abs(R * result.lam - A), 1e-10 * (1.0 + A)))
    mu = result.multiplier
    r = gA - mu * gB
    res = float(np.linalg.norm(r) / (1.0 + np.linalg.norm(gA)))
    checks.append(le("lagrange_residual", res, tol))
    # testing the Euler equation with the state itself: rho(grad z) + rho(grad w) = mu B_weighted + r.x
    x = s.as_vector()
    gz, gw = gradient_modulars(s, field)
    Bw = energy_B_weighted(s, field)
    checks.append(le("tested_identity", abs(gz + gw - mu * Bw),
                     1.01 * float(np.linalg.norm(r)) * float(np.linalg.norm(x)) + 1e-12 * (gz + gw),
                     note=f"mu={mu:.12g}"))
    checks.append(le("multiplier_vs_quotient", abs(mu - result.lam), 1e-6 * result.lam, advisory=True,
                     note="exact for constant exponents; discretization-limited otherwise"))
    checks += check_quotient_chain(s, field)
    checks.append(check_positivity(s))
    consts = floor_constants(field, [s])
    checks += check_energy_floor(s, field, R, consts)
    ladder = moser_ladder(s, field, k_max=k_max)
    checks.append(check_ladder_sup(ladder))
    checks.append(check_boundedness(s, ladder))
    checks += ladder_checks(ladder)
    for k in range(min(estimk_levels, ladder.k_max) + 1):
        checks += check_estimk(s, field, k, ladder.d)
    return DiagnosticsReport(tuple(checks), True)


__all__ = [
    "MoserLadder", "DiagnosticsReport", "FloorConstants", "check_positivity", "moser_ladder", "ladder_checks",
    "check_ladder_sup", "check_boundedness", "check_estimk", "check_lemma_L6", "floor_constants",
    "check_energy_floor", "check_quotient_chain", "full_report", "admissible_d_hat_interval", "default_d_hat",
    "EXPONENT_CAP",
]
