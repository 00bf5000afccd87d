"""Compare the numba and numpy kernel backends on identical inputs.

Run: python benchmarks/bench_kernels.py [--size N] [--repeat R]
"""

import argparse
import timeit

import numpy as np

from vexeig import _kernels


def make_inputs(n: int, seed: int = 0):
    rng = np.random.default_rng(seed)
    absf = rng.random(n)
    p = 1.5 + 5.0 * rng.random(n)
    w = np.full(n, 1.0 / n)
    z = rng.random(n) - 0.2
    v = rng.random(n)
    return {
        "power_sum": (absf, p, w),
        "log_power_sum": (np.log(absf), p, np.log(w), 0.3),
        "gradient_energy": (absf**2, p, w, 1e-10),
        "coupling": (z, v, np.ones(n), 3.0 + rng.random(n), 3.0 + rng.random(n), w),
    }


def main(argv=None):
    ap = argparse.ArgumentParser()
    ap.add_argument("--size", type=int, default=200_000)
    ap.add_argument("--repeat", type=int, default=20)
    args = ap.parse_args(argv)
    if _kernels.numba_impl is None:
        raise SystemExit("numba is not installed")
    inputs = make_inputs(args.size)
    print(f"{'kernel':18s} {'numpy ms':>10s} {'numba ms':>10s} {'speedup':>8s}")
    for name, a in inputs.items():
        fn_np = getattr(_kernels.numpy_impl, name)
        fn_nb = getattr(_kernels.numba_impl, name)
        fn_nb(*a)  # compile
        t_np = min(timeit.repeat(lambda: fn_np(*a), number=1, repeat=args.repeat)) * 1e3
        t_nb = min(timeit.repeat(lambda: fn_nb(*a), number=1, repeat=args.repeat)) * 1e3
        print(f"{name:18s} {t_np:10.3f} {t_nb:10.3f} {t_np / t_nb:8.2f}")
    t = {}
    for impl in (_kernels.numpy_impl, _kernels.numba_impl):
        _kernels.backend = impl
        solve_once()
        t[impl.name] = min(timeit.repeat(solve_once, number=1, repeat=3)) * 1e3
    print(f"{'solve n=63':18s} {t['numpy']:10.1f} {t['numba']:10.1f} {t['numpy'] / t['numba']:8.2f}")


def solve_once():
    from vexeig import ExponentSpec, Grid, Domain, SolveOptions, build_exponent_field, minimize_on_XR

    g = Grid(Domain(((0.0, 1.0),)), 63)
    f = build_exponent_field(g, dict(p=ExponentSpec.affine(6.0, (1.0,)), q=6.5, alpha=2.0, beta=ExponentSpec("balance")))
    return minimize_on_XR(f, 1.0, SolveOptions(n_starts=1))


if __name__ == "__main__":
    main()
