import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from vexeig import Domain, ExponentSpec, Grid, build_exponent_field

settings.register_profile(
    "default", deadline=None, max_examples=60, suppress_health_check=[HealthCheck.too_slow], derandomize=True)
settings.load_profile("default")

ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])


def unit_grid(n=15):
    return Grid(Domain(((0.0, 1.0),)), n)


def const_field(grid, p=6.0, q=6.0, alpha=2.0, beta=2.0, c=1.0):
    return build_exponent_field(grid, dict(p=p, q=q, alpha=alpha, beta=beta, c=c))


def affine_field(grid, slope=1.0):
    """Monotone exponents with beta from the balance identity; alpha, beta > 1 throughout."""
    return build_exponent_field(grid, dict(
        p=ExponentSpec.affine(6.0, (slope,) * grid.dim), q=ExponentSpec.affine(6.5, (slope,) * grid.dim),
        alpha=2.0, beta=ExponentSpec("balance")))


def fz_style_field(grid):
    """fz-shaped exponents shifted into the admissible range (p in [6, 7])."""
    p = ExponentSpec.piecewise(((0.0, 7.0), (1.0, 7.0), (2.0, 6.0)), even=True)
    return build_exponent_field(grid, dict(p=p, q=6.0, alpha=2.0, beta=ExponentSpec("balance"),
                                           c=ExponentSpec.affine(1.0, (0.1,))))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
