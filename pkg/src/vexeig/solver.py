"""Constrained minimization of A on {B = R}, the R-sweep, and the scalar quotient.

The constrained solver is a retraction method: tangential descent step
(gradient of A minus its least-squares projection onto the gradient of B),
backtracking line search, then rescaling ``(z, w) -> t (z, w)`` with the
unique ``t > 0`` restoring ``B = R``. Search directions are L-BFGS in the
tangent space by default; ``direction="steepest"`` gives plain projected
gradient descent.
"""

from __future__ import annotations

import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import minimize

from . import _kernels
from .checks import Check, le
from .energy import StatePair, energy_and_grad_A, energy_and_grad_B
from .grid import Grid, GridFunction
from .problem import ExponentField

log = logging.getLogger(__name__)


class SolverError(RuntimeError):
    pass


class RetractionError(SolverError):
    pass


class SweepError(SolverError):
    pass


@dataclass(frozen=True)
class SolveOptions:
    max_iters: int = 20000
    grad_tol: float = 1e-7
    step_shrink: float = 0.5
    armijo_c: float = 1e-4
    eps_regularization: float = 1e-10
    seed: int = 0
    init: str = "sine_bump"
    n_starts: int = 5
    direction: str = "lbfgs"
    memory: int = 8
    # relative change of A below which a step is judged on the residual instead
    noise_rtol: float = 1e-12
    user_state: StatePair | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.max_iters < 1 or self.n_starts < 1:
            raise ValueError("max_iters and n_starts must be positive")
        if not self.grad_tol > 0 or not self.noise_rtol > 0:
            raise ValueError("tolerances must be positive")
        if not 0 < self.step_shrink < 1 or not 0 < self.armijo_c < 1:
            raise ValueError("step_shrink and armijo_c must lie in (0, 1)")
        if self.eps_regularization < 0:
            raise ValueError("eps_regularization must be >= 0")
        if self.init not in ("sine_bump", "random_positive", "user"):
            raise ValueError(f"unknown init {self.init!r}")
        if self.init == "user" and self.user_state is None:
            raise ValueError("init='user' needs user_state")
        if self.direction not in ("lbfgs", "steepest"):
            raise ValueError(f"unknown direction {self.direction!r}")


@dataclass(frozen=True, eq=False)
class SolveResult:
    state: StatePair
    R: float
    lam: float
    energy_A: float
    constraint_value: float
    multiplier: float
    lagrange_residual: float
    iterations: int
    converged: bool
    trace: list
    seed: int
    eps: float
    start_lambdas: tuple = ()

    @property
    def spread(self) -> float:
        lams = [v for v in self.start_lambdas if np.isfinite(v)]
        return max(lams) - min(lams) if lams else 0.0


@dataclass(frozen=True)
class SweepEntry:
    R: float
    lam: float
    converged: bool
    result: SolveResult = field(repr=False)


@dataclass(frozen=True)
class SweepResult:
    entries: tuple[SweepEntry, ...]
    lambda_inf: float


def default_R_values() -> np.ndarray:
    return np.logspace(-2, 2, 9)


# ---------------------------------------------------------------------------
# constraint handling


class _Coupling:
    """Quadrature-point data of B for one field, reused across evaluations."""

    def __init__(self, field: ExponentField):
        g = field.grid
        self.grid = g
        self.vol = g.cell_volume / g.num_corners
        self.c = field.at_quadrature_points("c")
        self.ap1 = field.at_quadrature_points("alpha") + 1.0
        self.bp1 = field.at_quadrature_points("beta") + 1.0

    def quad(self, x):
        g = self.grid
        m = g.num_nodes
        zq = np.ascontiguousarray(g.corner_values(x[:m]).ravel())
        wq = np.ascontiguousarray(g.corner_values(x[m:]).ravel())
        return zq, wq


def retraction_factor(s: StatePair, field: ExponentField, R: float, max_iter: int = 200) -> float:
    """The unique ``t > 0`` with ``B(t z, t w) = R``, by bisection on ``log t``.

    ``t -> B(t z, t w) = sum_i c_i t^(alpha_i + beta_i + 2) |z_i|^(alpha_i+1) |w_i|^(beta_i+1)``
    is continuous and strictly increasing onto ``(0, inf)``. The bracket
    follows from the extreme total degrees among the nonzero terms.
    """
    if not R > 0:
        raise ValueError("R must be positive")
    return _retraction_factor(_Coupling(field), s.as_vector(), R, max_iter)


def _retraction_factor(cp: _Coupling, x: np.ndarray, R: float, max_iter: int = 200) -> float:
    zq, wq = cp.quad(x)
    az, aw = np.abs(zq), np.abs(wq)
    ok = (az > 0) & (aw > 0) & (cp.c > 0)
    if not np.any(ok):
        raise RetractionError("B vanishes; cannot rescale onto the constraint set")
    lv = np.log(cp.vol * cp.c[ok]) + cp.ap1[ok] * np.log(az[ok]) + cp.bp1[ok] * np.log(aw[ok])
    deg = cp.ap1[ok] + cp.bp1[ok]
    zero = np.zeros_like(lv)
    kern = _kernels.backend.log_power_sum
    lR = np.log(R)

    def excess(lt):
        # log B(e^lt x) - log R
        return kern(zero, deg, lv + deg * lt, 0.0) - lR

    f0 = excess(0.0)
    lo, hi = sorted((-f0 / deg.max(), -f0 / deg.min()))
    pad = 1e-15 * (1.0 + abs(lo) + abs(hi))
    lo, hi = lo - pad, hi + pad
    for _ in range(max_iter):
        if hi - lo <= 1e-15 * (1.0 + abs(lo)):
            break
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        if excess(mid) > 0.0:
            hi = mid
        else:
            lo = mid
    return float(np.exp(0.5 * (lo + hi)))


def retract_to_constraint(s: StatePair, field: ExponentField, R: float) -> StatePair:
    return s.scaled(retraction_factor(s, field, R))


# ---------------------------------------------------------------------------
# initial data


def initial_state(grid: Grid, init: str, rng: np.random.Generator, noise: float = 0.05) -> StatePair:
    m = grid.num_nodes
    if init == "random_positive":
        return StatePair.from_arrays(grid, rng.random(grid.node_shape), rng.random(grid.node_shape))
    X = grid.node_coordinates()
    bump = np.ones(grid.node_shape)
    for d, (lo, _) in enumerate(grid.domain.bounds):
        bump = bump * np.sin(np.pi * (X[d] - lo) / grid.domain.lengths[d])
    z = bump + noise * rng.random(m).reshape(grid.node_shape)
    w = bump + noise * rng.random(m).reshape(grid.node_shape)
    return StatePair.from_arrays(grid, np.abs(z), np.abs(w))


# ---------------------------------------------------------------------------
# single start


def _tangent(gA: np.ndarray, gB: np.ndarray):
    mu = float(gA @ gB / (gB @ gB))
    return mu, gA - mu * gB


def _descend(field: ExponentField, R: float, x0: np.ndarray, opts: SolveOptions, seed: int) -> SolveResult:
    g = field.grid
    cp = _Coupling(field)
    eps = opts.eps_regularization

    def evaluate(x):
        s = StatePair.from_vector(g, x)
        A, gA = energy_and_grad_A(s, field, eps)
        B, gB = energy_and_grad_B(s, field)
        gA, gB = gA.as_vector(), gB.as_vector()
        mu, r = _tangent(gA, gB)
        return A, B, gA, gB, mu, r

    def retract(y):
        y = np.abs(y)
        return y * _retraction_factor(cp, y, R)

    x = retract(x0)
    A, B, gA, gB, mu, r = evaluate(x)
    trace = []
    S, Y = [], []
    step = None
    converged = False
    it = 0
    while True:
        rn = float(np.linalg.norm(r))
        res = rn / (1.0 + float(np.linalg.norm(gA)))
        trace.append((it, A, res))
        if res <= opts.grad_tol:
            converged = True
            break
        if it >= opts.max_iters:
            break
        d = None
        if opts.direction == "lbfgs" and S:
            q = r.copy()
            hist = []
            for s_, y_ in zip(reversed(S), reversed(Y)):
                rho = 1.0 / (y_ @ s_)
                a = rho * (s_ @ q)
                q -= a * y_
                hist.append((rho, a, s_, y_))
            q *= (S[-1] @ Y[-1]) / (Y[-1] @ Y[-1])
            for rho, a, s_, y_ in reversed(hist):
                q += (a - rho * (y_ @ q)) * s_
            d = -q
            d -= (d @ gB) / (gB @ gB) * gB
            if not d @ r < 0:
                d = None
                S.clear()
                Y.clear()
        if d is None:
            d = -r
            step = 0.1 * np.linalg.norm(x) / rn if step is None else 2.0 * step
        else:
            step = 1.0
        slope = float(d @ r)
        while True:
            xn = retract(x + step * d)
            An, Bn, gAn, gBn, mun, rr = evaluate(xn)
            if An <= A + opts.armijo_c * step * slope:
                break
            # near the floating-point floor of A, fall back to residual decrease
            if abs(An - A) <= opts.noise_rtol * abs(A) and np.linalg.norm(rr) < rn:
                break
            step *= opts.step_shrink
            if step * np.linalg.norm(d) <= 1e-300:
                log.debug("line search stalled at iteration %d", it)
                return _result(g, field, R, x, A, B, mu, res, it, False, trace, seed, eps)
        sv, yv = xn - x, rr - r
        if sv @ yv > 1e-14 * np.linalg.norm(sv) * np.linalg.norm(yv):
            S.append(sv)
            Y.append(yv)
            if len(S) > opts.memory:
                S.pop(0)
                Y.pop(0)
        x, A, B, gA, gB, mu, r = xn, An, Bn, gAn, gBn, mun, rr
        it += 1
    return _result(g, field, R, x, A, B, mu, res, it, converged, trace, seed, eps)


def _result(g, field, R, x, A, B, mu, res, it, converged, trace, seed, eps):
    return SolveResult(
        state=StatePair.from_vector(g, x), R=R, lam=A / R, energy_A=A, constraint_value=B,
        multiplier=mu, lagrange_residual=res, iterations=it, converged=converged,
        trace=trace, seed=seed, eps=eps)


def minimize_on_XR(field: ExponentField, R: float, opts: SolveOptions | None = None) -> SolveResult:
    """Minimize A over ``{B = R}``; best of ``opts.n_starts`` seeded starts.

    Non-convergence is reported through ``converged=False``.
    """
    opts = opts or SolveOptions()
    if not R > 0:
        raise ValueError("R must be positive")
    results = []
    for k in range(opts.n_starts):
        seed = opts.seed + k
        if opts.init == "user" and k == 0:
            s0 = opts.user_state
        else:
            init = "sine_bump" if opts.init == "user" else opts.init
            s0 = initial_state(field.grid, init, np.random.default_rng(seed))
        results.append(_descend(field, R, s0.as_vector(), opts, seed))
    lams = tuple(r.lam for r in results)
    pool = [r for r in results if r.converged] or results
    best = min(pool, key=lambda r: r.lam)
    return replace(best, start_lambdas=lams)


def sweep_R(field: ExponentField, R_values=None, opts: SolveOptions | None = None,
            threads: int | None = None) -> SweepResult:
    """Independent solves over ``R_values``; ``lambda_inf`` is the least converged value."""
    R_values = default_R_values() if R_values is None else np.asarray(R_values, dtype=float)
    if R_values.size == 0 or np.any(R_values <= 0):
        raise ValueError("R values must be positive and nonempty")
    if threads is None:
        threads = int(os.environ.get("VEXEIG_THREADS", "1"))
    opts = opts or SolveOptions()
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            results = list(ex.map(lambda R: minimize_on_XR(field, float(R), opts), R_values))
    else:
        results = [minimize_on_XR(field, float(R), opts) for R in R_values]
    entries = tuple(SweepEntry(float(R), r.lam, r.converged, r) for R, r in zip(R_values, results))
    conv = [e.lam for e in entries if e.converged]
    if not conv:
        raise SweepError("no R value converged")
    return SweepResult(entries, float(min(conv)))


# ---------------------------------------------------------------------------
# scalar modular quotient


@dataclass(frozen=True, eq=False)
class ScalarResult:
    u: GridFunction
    mu: float
    caps: tuple = ()
    best_per_cap: tuple = ()


def _log_quotient(u: np.ndarray, grid: Grid, p: np.ndarray):
    """``log rho(grad u) - log rho(u)`` and its gradient."""
    vol = grid.cell_volume
    gr = grid.gradient_array(u)
    mag2 = np.ascontiguousarray(np.sum(gr * gr, axis=0).ravel())
    pf = np.ascontiguousarray(p.ravel())
    # kernel returns sum w/p |g|^p; weights vol * p give the plain modular
    num, flux = _kernels.backend.gradient_energy(mag2, pf, vol * pf, 0.0)
    dnum = grid.gradient_adjoint(gr * (vol * (pf * flux).reshape(grid.cell_shape)))
    k = grid.num_corners
    uq = grid.corner_values(u)
    pq = np.broadcast_to(p, uq.shape)
    au = np.abs(uq)
    den = vol / k * float(np.sum(au**pq))
    dden = grid.corner_adjoint(vol / k * pq * np.sign(uq) * au ** (pq - 1.0))
    if num <= 0.0 or den <= 0.0:
        return np.inf, np.zeros(u.size)
    return np.log(num) - np.log(den), (dnum / num - dden / den).ravel()


def _scalar_run(grid, p, cap, u0, maxiter):
    fun = lambda x: _log_quotient(x.reshape(grid.node_shape), grid, p)  # noqa: E731
    bounds = None if cap is None else [(-cap, cap)] * grid.num_nodes
    x0 = u0.ravel() if cap is None else np.clip(u0.ravel(), -cap, cap)
    res = minimize(fun, x0, jac=True, method="L-BFGS-B", bounds=bounds,
                   options=dict(maxiter=maxiter, maxfun=5 * maxiter, maxcor=20, ftol=1e-15, gtol=1e-13))
    return res.x.reshape(grid.node_shape), float(np.exp(res.fun))


def _scalar_starts(grid: Grid, rng: np.random.Generator, n: int):
    X = grid.node_coordinates()
    shapes = []
    bump = np.ones(grid.node_shape)
    for d, (lo, _) in enumerate(grid.domain.bounds):
        bump = bump * np.sin(np.pi * (X[d] - lo) / grid.domain.lengths[d])
    shapes.append(bump)
    # plateau: 1 in the interior, linear ramps in the outer quarter of each axis
    plat = np.ones(grid.node_shape)
    for d, (lo, hi) in enumerate(grid.domain.bounds):
        dist = np.minimum(X[d] - lo, hi - X[d]) / grid.domain.lengths[d]
        plat = plat * np.clip(4.0 * dist, 0.0, 1.0)
    shapes.append(plat)
    while len(shapes) < n:
        shapes.append(bump * (1.0 + 0.5 * rng.random(grid.node_shape)))
    return shapes[:n]


def minimize_scalar(grid: Grid, p, opts: SolveOptions | None = None, caps=None,
                    maxiter: int = 20000) -> ScalarResult:
    """Minimize ``rho_p(grad u) / rho_p(u)`` over nonzero nodal ``u``.

    The quotient is 0-homogeneous only for constant ``p``; otherwise the
    amplitude matters. ``caps`` is an increasing sequence of sup-norm bounds
    ``|u_i| <= cap``; each cap is solved from several profile starts scaled
    to the cap plus the previous cap's minimizer, so the reported values are
    non-increasing in the cap. ``caps=None`` runs unbounded.
    """
    opts = opts or SolveOptions()
    p = np.broadcast_to(np.asarray(p, dtype=float), grid.cell_shape)
    if not p.min() > 1.0:
        raise ValueError("scalar quotient needs p > 1")
    rng = np.random.default_rng(opts.seed)
    shapes = _scalar_starts(grid, rng, max(opts.n_starts, 2))
    if caps is None:
        best = None
        for s0 in shapes:
            u, mu = _scalar_run(grid, p, None, s0, maxiter)
            if best is None or mu < best[1]:
                best = (u, mu)
        u = best[0] / np.max(np.abs(best[0]))
        return ScalarResult(GridFunction(grid, u), best[1])
    caps = tuple(float(c) for c in caps)
    if any(b <= a for a, b in zip(caps, caps[1:])) or caps[0] <= 0:
        raise ValueError("caps must be positive and increasing")
    prev, prev_cap = None, None
    per_cap = []
    best = None
    for cap in caps:
        starts = [cap * s for s in shapes]
        if prev is not None:
            starts.append(prev * (cap / prev_cap))
        cap_best = None
        for s0 in starts:
            u, mu = _scalar_run(grid, p, cap, s0, maxiter)
            if cap_best is None or mu < cap_best[1]:
                cap_best = (u, mu)
        if best is not None and best[1] <= cap_best[1]:
            # the previous minimizer is feasible for this cap
            cap_best = best
        best = cap_best
        prev, prev_cap = cap_best[0], cap
        per_cap.append(cap_best[1])
        log.info("cap %.3g: quotient %.6g", cap, cap_best[1])
    return ScalarResult(GridFunction(grid, best[0]), best[1], caps, tuple(per_cap))


def scalar_lower_bound_chain(field: ExponentField, sweep: SweepResult | float, lambda_p: float,
                             lambda_q: float) -> Check:
    """``min(lambda_p / (p+ |c|_inf), lambda_q / (q+ |c|_inf)) <= lambda_inf`` on one grid.

    ``lambda_p`` and ``lambda_q`` are the scalar quotient minima for ``p`` and
    ``q``; ``sweep`` is a :class:`SweepResult` or the value ``lambda_inf``.
    """
    lam_inf = sweep.lambda_inf if isinstance(sweep, SweepResult) else float(sweep)
    cinf = field.c_inf
    if not cinf > 0:
        raise ValueError("c vanishes identically")
    lhs = min(lambda_p / (field.p_plus * cinf), lambda_q / (field.q_plus * cinf))
    return le("scalar_lower_bound", lhs, lam_inf, rtol=1e-12)
