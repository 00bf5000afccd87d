"""Command-line driver.

Configuration is line-oriented ``key = value`` text with ``#`` comments and
dot-namespaced keys; unknown keys are errors. Example::

    domain = 0, 1
    grid.n = 31
    exponents.p.kind = affine
    exponents.p.value = 6
    exponents.p.slope = 1
    exponents.q.value = 6.5
    exponents.alpha.value = 2
    exponents.beta.kind = balance
    solve.R = 1

Exit codes: 0 success, 1 input error, 2 non-convergence or failed verification.
"""

from __future__ import annotations

import argparse
import csv
import logging
import math
import os
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .diagnostics import full_report
from .energy import StatePair, energy_and_grad_A, energy_and_grad_B
from .grid import Domain, Grid
from .problem import ExponentSpec, FieldConstructionError, build_exponent_field, validate_hypotheses
from .solver import (
    SolveOptions, SolveResult, SolverError, SweepError, default_R_values, minimize_on_XR, minimize_scalar,
    sweep_R,
)

log = logging.getLogger("vexeig")

COMMANDS = ("solve", "sweep", "scalar", "verify", "demo-zero-infimum")
EXPONENT_NAMES = ("p", "q", "alpha", "beta", "c")
EXPONENT_ATTRS = ("kind", "value", "slope", "center", "knots", "even")
EXPONENT_KINDS = ("constant", "affine", "radial", "piecewise", "balance", "fz")

OPTION_KEYS = {
    "solver.max_iters": int, "solver.grad_tol": float, "solver.step_shrink": float, "solver.armijo_c": float,
    "solver.eps_regularization": float, "solver.seed": int, "solver.init": str, "solver.n_starts": int,
    "solver.direction": str, "solver.memory": int,
}
PLAIN_KEYS = {
    "command", "domain", "grid.n", "solve.R", "sweep.R", "scalar.exponent", "scalar.caps", "scalar.max_iters",
    "verify.input", "solver.init_file", "diagnostics.k_max", "output.dir",
}

DEMO_DEFAULTS = {
    "domain": "-2, 2", "grid.n": "255", "exponents.p.kind": "fz", "scalar.caps": "1, 10, 100, 1000, 10000",
}


class ConfigError(ValueError):
    def __init__(self, message: str, line: int | None = None, key: str | None = None):
        where = f"line {line}: " if line is not None else ""
        super().__init__(where + message)
        self.line = line
        self.key = key


@dataclass
class RunConfig:
    command: str | None
    bounds: tuple[tuple[float, float], ...] = ((0.0, 1.0),)
    n: tuple[int, ...] = (31,)
    exponents: dict = field(default_factory=dict)
    R: float = 1.0
    R_values: tuple[float, ...] = ()
    options: SolveOptions = field(default_factory=SolveOptions)
    init_file: str | None = None
    user_init: bool = False
    scalar_exponent: str = "p"
    scalar_caps: tuple[float, ...] = ()
    scalar_max_iters: int = 20000
    verify_input: str | None = None
    k_max: int | None = None
    out_dir: str = "out"

    def grid(self) -> Grid:
        return Grid(Domain(self.bounds), self.n if len(self.n) > 1 else self.n[0])


# ---------------------------------------------------------------------------
# parsing


def _floats(text: str) -> list[float]:
    return [float(t) for t in text.replace(";", ",").split(",") if t.strip()]


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("true", "yes", "1", "on"):
        return True
    if t in ("false", "no", "0", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _read_pairs(text: str) -> dict[str, tuple[str, int]]:
    out: dict[str, tuple[str, int]] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {raw.strip()!r}", lineno)
        key, value = (s.strip() for s in line.split("=", 1))
        if not key or not value:
            raise ConfigError("empty key or value", lineno)
        known = key in PLAIN_KEYS or key in OPTION_KEYS
        parts = key.split(".")
        if len(parts) == 3 and parts[0] == "exponents" and parts[1] in EXPONENT_NAMES and parts[2] in EXPONENT_ATTRS:
            known = True
        if not known:
            raise ConfigError(f"unknown key {key!r}", lineno, key)
        if key in out:
            raise ConfigError(f"duplicate key {key!r}", lineno, key)
        out[key] = (value, lineno)
    return out


def _exponent_spec(name: str, attrs: dict[str, tuple[str, int]]):
    def get(attr, conv, default=None):
        if attr not in attrs:
            return default
        v, ln = attrs[attr]
        try:
            return conv(v)
        except ValueError as exc:
            raise ConfigError(f"bad value for exponents.{name}.{attr}: {exc}", ln, f"exponents.{name}.{attr}")

    kind = get("kind", str.strip, "constant")
    line = attrs.get("kind", attrs.get("value", (None, None)))[1]
    if kind not in EXPONENT_KINDS:
        raise ConfigError(f"unknown exponent kind {kind!r}", line, f"exponents.{name}.kind")
    allowed = {"constant": {"kind", "value"}, "affine": {"kind", "value", "slope"},
               "radial": {"kind", "value", "slope", "center"}, "piecewise": {"kind", "knots", "even"},
               "balance": {"kind"}, "fz": {"kind"}}[kind]
    extra = set(attrs) - allowed
    if extra:
        a = sorted(extra)[0]
        raise ConfigError(f"exponents.{name}.{a} does not apply to kind {kind!r}", attrs[a][1], f"exponents.{name}.{a}")
    if kind == "fz":
        return ExponentSpec.fz()
    if kind == "balance":
        return ExponentSpec("balance")
    if kind == "piecewise":
        def knots(text):
            pts = []
            for item in text.split(","):
                t, v = item.split(":")
                pts.append((float(t), float(v)))
            return pts
        ks = get("knots", knots)
        if ks is None:
            raise ConfigError(f"exponents.{name}.knots is required for piecewise", line, f"exponents.{name}.knots")
        try:
            return ExponentSpec.piecewise(ks, even=get("even", _bool, False))
        except ValueError as exc:
            raise ConfigError(str(exc), attrs["knots"][1], f"exponents.{name}.knots")
    value = get("value", float)
    if value is None:
        raise ConfigError(f"exponents.{name}.value is required", line, f"exponents.{name}.value")
    if kind == "constant":
        return ExponentSpec.constant(value)
    slope = get("slope", _floats, [0.0])
    if kind == "affine":
        return ExponentSpec.affine(value, slope)
    return ExponentSpec.radial(value, slope[0], get("center", _floats, [0.0]))


def parse_config(text: str, command: str | None = None) -> RunConfig:
    """Parse and validate configuration text (strict: unknown keys are errors)."""
    pairs = _read_pairs(text)
    cmd = pairs.get("command", (None, None))[0]
    if command is not None and cmd is not None and cmd != command:
        raise ConfigError(f"config says command={cmd!r} but {command!r} was requested", pairs["command"][1], "command")
    cmd = command or cmd
    if cmd is None:
        raise ConfigError("no command given")
    if cmd not in COMMANDS:
        raise ConfigError(f"unknown command {cmd!r}", pairs.get("command", (None, None))[1], "command")
    if cmd == "demo-zero-infimum":
        for k, v in DEMO_DEFAULTS.items():
            pairs.setdefault(k, (v, None))

    def conv(key, fn, check=None, what=""):
        v, ln = pairs[key]
        try:
            out = fn(v)
        except ValueError as exc:
            raise ConfigError(f"bad value for {key}: {exc}", ln, key)
        if check is not None and not check(out):
            raise ConfigError(f"{key} out of range: {what}", ln, key)
        return out

    cfg = RunConfig(cmd)
    if "domain" in pairs:
        b = conv("domain", _floats, lambda b: len(b) in (2, 4) and all(math.isfinite(x) for x in b)
                 and all(b[i] < b[i + 1] for i in range(0, len(b), 2)), "need lo < hi per axis, 1 or 2 axes")
        cfg.bounds = tuple((b[i], b[i + 1]) for i in range(0, len(b), 2))
    if "grid.n" in pairs:
        cfg.n = tuple(conv("grid.n", lambda t: [int(x) for x in t.split(",")], lambda n: all(k >= 1 for k in n)
                           and len(n) in (1, len(cfg.bounds)), "positive integers, one per axis"))
    if len(cfg.n) == 1 and len(cfg.bounds) == 2:
        cfg.n = cfg.n * 2
    if "solve.R" in pairs:
        cfg.R = conv("solve.R", float, lambda r: r > 0 and math.isfinite(r), "R must be positive")
    if "sweep.R" in pairs:
        cfg.R_values = tuple(conv("sweep.R", _floats, lambda rs: rs and all(r > 0 for r in rs), "positive values"))
    else:
        cfg.R_values = tuple(float(r) for r in default_R_values())

    opt = {}
    for key, typ in OPTION_KEYS.items():
        if key in pairs:
            opt[key.split(".", 1)[1]] = conv(key, typ)
    if "solver.init_file" in pairs:
        cfg.init_file = pairs["solver.init_file"][0]
    try:
        if opt.get("init") == "user":
            if cfg.init_file is None:
                raise ValueError("solver.init = user needs solver.init_file")
            cfg.options = SolveOptions(**{**opt, "init": "sine_bump"})
        else:
            cfg.options = SolveOptions(**opt)
    except ValueError as exc:
        key = next(iter(k for k in OPTION_KEYS if k.split(".", 1)[1] in str(exc)), None)
        raise ConfigError(str(exc), pairs[key][1] if key in pairs else None, key)
    cfg.user_init = opt.get("init") == "user"

    if "scalar.exponent" in pairs:
        cfg.scalar_exponent = conv("scalar.exponent", str.strip, lambda s: s in ("p", "q"), "p or q")
    if "scalar.caps" in pairs:
        cfg.scalar_caps = tuple(conv("scalar.caps", _floats, lambda cs: cs and cs[0] > 0 and all(
            b > a for a, b in zip(cs, cs[1:])), "positive and increasing"))
    if "scalar.max_iters" in pairs:
        cfg.scalar_max_iters = conv("scalar.max_iters", int, lambda m: m > 0, "positive")
    if "verify.input" in pairs:
        cfg.verify_input = pairs["verify.input"][0]
    if "diagnostics.k_max" in pairs:
        cfg.k_max = conv("diagnostics.k_max", int, lambda k: k >= 2, "k_max >= 2")
    if "output.dir" in pairs:
        cfg.out_dir = pairs["output.dir"][0]

    groups: dict[str, dict] = {}
    for key, val in pairs.items():
        if key.startswith("exponents."):
            _, name, attr = key.split(".")
            groups.setdefault(name, {})[attr] = val
    cfg.exponents = {name: _exponent_spec(name, attrs) for name, attrs in groups.items()}
    if cmd in ("scalar", "demo-zero-infimum"):
        need = (cfg.scalar_exponent,)
    else:
        need = ("p", "q", "alpha", "beta")
    missing = [k for k in need if k not in cfg.exponents]
    if missing:
        raise ConfigError(f"missing exponent specification for {', '.join(missing)}", key=f"exponents.{missing[0]}")
    return cfg


# ---------------------------------------------------------------------------
# csv helpers


def _write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in r])


def write_eigenpair(path: Path, s: StatePair) -> None:
    g = s.grid
    X = g.node_coordinates().reshape(g.dim, -1)
    names = ["x", "y"][: g.dim]
    rows = zip(*X, s.z.values.ravel(), s.w.values.ravel())
    _write_csv(path, names + ["z", "w"], rows)


def read_eigenpair(path: Path, grid: Grid) -> StatePair:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    names = ["x", "y"][: grid.dim] + ["z", "w"]
    if header != names:
        raise ValueError(f"{path}: expected columns {names}, found {header}")
    data = np.array([[float(v) for v in r] for r in body])
    if data.shape != (grid.num_nodes, len(names)):
        raise ValueError(f"{path}: expected {grid.num_nodes} rows, found {data.shape[0]}")
    X = grid.node_coordinates().reshape(grid.dim, -1)
    if not np.allclose(data[:, : grid.dim].T, X, rtol=0, atol=1e-12 * max(grid.domain.lengths)):
        raise ValueError(f"{path}: node coordinates do not match the configured grid")
    return StatePair.from_arrays(grid, data[:, -2].reshape(grid.node_shape), data[:, -1].reshape(grid.node_shape))


def write_trace(path: Path, trace) -> None:
    _write_csv(path, ["iteration", "energy_A", "residual"], trace)


def _summary(label: str, r: SolveResult) -> str:
    return (f"{label}R={r.R:.6g} lambda={r.lam:.12g} residual={r.lagrange_residual:.3e} "
            f"iterations={r.iterations} converged={'yes' if r.converged else 'no'}")


# ---------------------------------------------------------------------------
# commands


def _field(cfg: RunConfig, grid: Grid):
    return build_exponent_field(grid, cfg.exponents)


def _options(cfg: RunConfig, grid: Grid) -> SolveOptions:
    if cfg.user_init:
        s0 = read_eigenpair(Path(cfg.init_file), grid)
        return replace(cfg.options, init="user", user_state=s0)
    return cfg.options


def _report_hypotheses(field) -> None:
    rep = validate_hypotheses(field)
    for v in rep.violations:
        print(f"warning: hypothesis {v.hypothesis} fails at {v.point} (value {v.value:.6g})", file=sys.stderr)


def _cmd_solve(cfg: RunConfig, out: Path) -> int:
    grid = cfg.grid()
    fld = _field(cfg, grid)
    _report_hypotheses(fld)
    res = minimize_on_XR(fld, cfg.R, _options(cfg, grid))
    write_eigenpair(out / "eigenpair.csv", res.state)
    write_trace(out / "trace.csv", res.trace)
    rep = full_report(res, fld, grad_tol=cfg.options.grad_tol, k_max=cfg.k_max)
    (out / "diagnostics.csv").write_text(rep.to_csv())
    print(_summary("", res))
    return 0 if res.converged else 2


def _cmd_sweep(cfg: RunConfig, out: Path) -> int:
    grid = cfg.grid()
    fld = _field(cfg, grid)
    _report_hypotheses(fld)
    threads = max(1, int(os.environ.get("VEXEIG_THREADS", "1") or 1))
    try:
        sw = sweep_R(fld, cfg.R_values, _options(cfg, grid), threads=threads)
    except SweepError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    rows = []
    for e in sw.entries:
        print(_summary("", e.result))
        rows.append((e.R, e.lam, int(e.converged), e.result.multiplier, e.result.lagrange_residual,
                     e.result.iterations))
    _write_csv(out / "sweep.csv", ["R", "lambda", "converged", "multiplier", "residual", "iterations"], rows)
    print(f"lambda_inf={sw.lambda_inf:.12g}")
    return 0 if all(e.converged for e in sw.entries) else 2


def _cmd_scalar(cfg: RunConfig, out: Path, demo: bool = False) -> int:
    grid = cfg.grid()
    spec = cfg.exponents[cfg.scalar_exponent]
    if isinstance(spec, ExponentSpec):
        if spec.kind == "balance":
            raise FieldConstructionError("scalar exponent cannot be of kind 'balance'")
        p = spec.evaluate(grid.cell_centers())
    else:
        p = np.full(grid.cell_shape, float(spec))
    if not np.all(np.isfinite(p)):
        raise FieldConstructionError("scalar exponent undefined somewhere on the grid")
    res = minimize_scalar(grid, p, cfg.options, caps=cfg.scalar_caps or None, maxiter=cfg.scalar_max_iters)
    if res.caps:
        for cap, mu in zip(res.caps, res.best_per_cap):
            print(f"cap={cap:.6g} quotient={mu:.9g}")
        _write_csv(out / "scalar.csv", ["cap", "quotient"], zip(res.caps, res.best_per_cap))
    else:
        _write_csv(out / "scalar.csv", ["cap", "quotient"], [("inf", res.mu)])
    g = grid
    X = g.node_coordinates().reshape(g.dim, -1)
    _write_csv(out / "scalar_function.csv", ["x", "y"][: g.dim] + ["u"], zip(*X, res.u.values.ravel()))
    print(f"mu={res.mu:.9g}")
    if demo:
        seq = res.best_per_cap
        dec = all(b < a for a, b in zip(seq, seq[1:]))
        ok = dec and seq[-1] < 1e-2
        print(f"strictly decreasing={'yes' if dec else 'no'} final<1e-2={'yes' if seq[-1] < 1e-2 else 'no'}")
        return 0 if ok else 2
    return 0


def result_from_state(s: StatePair, fld, eps: float, grad_tol: float) -> SolveResult:
    """Rebuild the solver record of a stored pair so it can be diagnosed."""
    A, gA = energy_and_grad_A(s, fld, eps)
    B, gB = energy_and_grad_B(s, fld)
    gA, gB = gA.as_vector(), gB.as_vector()
    if B <= 0:
        raise ValueError("stored pair has B = 0")
    mu = float(gA @ gB / (gB @ gB))
    res = float(np.linalg.norm(gA - mu * gB) / (1.0 + np.linalg.norm(gA)))
    return SolveResult(state=s, R=B, lam=A / B, energy_A=A, constraint_value=B, multiplier=mu,
                       lagrange_residual=res, iterations=0, converged=res <= grad_tol, trace=[], seed=-1, eps=eps)


def _cmd_verify(cfg: RunConfig, out: Path) -> int:
    grid = cfg.grid()
    fld = _field(cfg, grid)
    # default input is the eigenpair written by 'solve' into the same output directory
    s = read_eigenpair(Path(cfg.verify_input) if cfg.verify_input else out / "eigenpair.csv", grid)
    res = result_from_state(s, fld, cfg.options.eps_regularization, cfg.options.grad_tol)
    rep = full_report(res, fld, grad_tol=cfg.options.grad_tol, k_max=cfg.k_max)
    (out / "diagnostics.csv").write_text(rep.to_csv())
    print(rep.summary())
    return 0 if rep.passed else 2


def run(cfg: RunConfig, out_dir: str | None = None) -> int:
    out = Path(out_dir or cfg.out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        if cfg.command == "solve":
            return _cmd_solve(cfg, out)
        if cfg.command == "sweep":
            return _cmd_sweep(cfg, out)
        if cfg.command == "scalar":
            return _cmd_scalar(cfg, out)
        if cfg.command == "demo-zero-infimum":
            return _cmd_scalar(cfg, out, demo=True)
        if cfg.command == "verify":
            return _cmd_verify(cfg, out)
    except (FieldConstructionError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except SolverError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(f"error: unknown command {cfg.command!r}", file=sys.stderr)
    return 1


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="vexeig", description="Eigenvalue solver for coupled variable-exponent systems.")
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", help="configuration file (key = value)")
    ap.add_argument("--out", help="output directory (overrides output.dir)")
    ap.add_argument("--seed", type=int, help="random seed (overrides solver.seed)")
    ap.add_argument("-v", "--verbose", action="store_true")
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        text = Path(args.config).read_text() if args.config else ""
        cfg = parse_config(text, args.command)
    except (ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    if args.seed is not None:
        cfg.options = replace(cfg.options, seed=args.seed)
    return run(cfg, args.out)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
