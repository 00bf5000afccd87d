import dataclasses
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from vexeig import (
    GridFunction, SolveOptions, StatePair, check_boundedness, check_estimk, check_lemma_L6, check_positivity,
    full_report, minimize_on_XR, moser_ladder,
)
from vexeig.diagnostics import (
    admissible_d_hat_interval, check_energy_floor, check_ladder_sup, default_d_hat, floor_constants, ladder_checks,
)
from conftest import affine_field, const_field, unit_grid

FAST = SolveOptions(n_starts=1)
_CACHE = {}


def solved(kind="const", n=15, R=1.0):
    key = (kind, n, R)
    if key not in _CACHE:
        g = unit_grid(n)
        f = const_field(g) if kind == "const" else affine_field(g)
        _CACHE[key] = (minimize_on_XR(f, R, FAST), f)
    return _CACHE[key]


# -- positivity --------------------------------------------------------------


def test_positivity_on_eigenpair():
    res, _ = solved()
    chk = check_positivity(res.state)
    assert chk.passed and chk.rhs > 0


def test_positivity_failures():
    g = unit_grid(7)
    assert not check_positivity(StatePair.from_arrays(g, np.zeros(7), np.zeros(7))).passed
    z = np.ones(7)
    z[3] = -0.1
    assert not check_positivity(StatePair.from_arrays(g, z, np.ones(7))).passed
    with pytest.raises(ValueError):
        check_positivity(StatePair.from_arrays(g, z, z), interior_floor=0.0)


# -- ladder ------------------------------------------------------------------


def test_d_hat_interval_infinite_in_low_dimension():
    f = const_field(unit_grid(7))
    lo, hi = admissible_d_hat_interval(f)
    assert lo == 6.0 and hi == np.inf
    assert default_d_hat(f) == 12.0


def test_ladder_bounded_by_one_for_unit_bump():
    g = unit_grid(31)
    u = GridFunction.from_callable(g, lambda x: np.sin(np.pi * x) ** 2)
    u = GridFunction(g, u.values / u.values.max())
    lad = moser_ladder(StatePair(u, u), const_field(g))
    assert all(v <= 1.0 + 1e-12 for v in lad.norms_u + lad.norms_v)
    assert all(e <= 1e-12 for e in lad.E)
    assert all(c.passed for c in ladder_checks(lad))


def test_ladder_approaches_sup_on_eigenpair():
    res, f = solved()
    lad = moser_ladder(res.state, f)
    r = lad.ratios_u
    assert all(b >= a - 1e-12 for a, b in zip(r, r[1:]))
    assert check_ladder_sup(lad).passed
    assert all(c.passed for c in ladder_checks(lad))


def test_ladder_overflow_truncates_with_warning():
    res, f = solved()
    with pytest.warns(RuntimeWarning, match="truncated"):
        lad = moser_ladder(res.state, f, k_max=40, d_hat=1.1 * 6.0)
    assert lad.k_max == 39 and lad.d == pytest.approx(1.1)
    assert max(lad.exponents_p) <= 256.0


def test_ladder_default_is_silent_and_validates():
    res, f = solved()
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        lad = moser_ladder(res.state, f)
    assert lad.k_max == 5  # d = 2, 6 * 2**5 <= 256
    with pytest.raises(ValueError):
        moser_ladder(res.state, f, d_hat=5.0)


def test_ladder_b_is_tight():
    res, f = solved("affine")
    lad = moser_ladder(res.state, f)
    gaps = [lad.a * k + lad.b + lad.d_hat * lad.E[k] - lad.E[k + 1] for k in range(len(lad.E) - 1)]
    assert min(gaps) == pytest.approx(0.0, abs=1e-9)


# -- level-k estimates -------------------------------------------------------


@pytest.mark.parametrize("k", [0, 1, 2, 3])
def test_estimk_on_eigenpair(k):
    res, f = solved()
    for c in check_estimk(res.state, f, k):
        if not c.advisory:
            assert c.passed, c


def test_estimk_base_case_is_mass():
    res, f = solved()
    c = check_estimk(res.state, f, 0)[1]
    z = res.state.z.values
    g = res.state.grid
    assert c.lhs == pytest.approx(np.sum(z) * g.h[0], rel=1e-12)


def test_estimk_scaled_state():
    res, f = solved()
    half = StatePair(0.5 * res.state.z, 0.5 * res.state.w)
    for k in range(4):
        for c in check_estimk(half, f, k):
            if not c.advisory:
                assert c.passed, c
    with pytest.raises(ValueError):
        check_estimk(half, f, -1)


def test_estimk_literal_form_is_scale_sensitive():
    res, f = solved()
    tiny = StatePair(1e-3 * res.state.z, 1e-3 * res.state.w)
    lit = check_estimk(tiny, f, 1)[0]
    assert lit.advisory and not lit.passed


# -- partial sums ------------------------------------------------------------


def test_partial_sum_examples():
    c = check_lemma_L6(0.5, 50)
    assert c.passed and c.rhs == 2.0
    c = check_lemma_L6(0.9, 200)
    assert c.passed and c.rhs == pytest.approx(90.0)
    c = check_lemma_L6(0.3, 1)
    assert c.passed and c.lhs == 0.0
    for bad in ((0.0, 3), (1.0, 3), (0.5, 0)):
        with pytest.raises(ValueError):
            check_lemma_L6(*bad)


@settings(max_examples=1000)
@given(st.floats(0.01, 0.99), st.integers(1, 500))
def test_partial_sum_property(s, r):
    assert check_lemma_L6(s, r).passed


# -- boundedness -------------------------------------------------------------


def test_boundedness_under_refinement():
    sups = []
    for n in (15, 31, 63):
        res, f = solved("const", n)
        lad = moser_ladder(res.state, f)
        assert check_boundedness(res.state, lad).passed
        sups.append(float(res.state.z.values.max()))
    assert max(sups) / min(sups) < 1.1


def test_spike_is_flagged():
    g = unit_grid(63)
    z = np.full(63, 1e-3)
    z[31] = 1.0
    s = StatePair.from_arrays(g, z, z)
    f = const_field(g)
    chk = check_boundedness(s, moser_ladder(s, f))
    assert chk.passed and "FLAGGED" in chk.note
    res, f = solved()
    assert "FLAGGED" not in check_boundedness(res.state, moser_ladder(res.state, f)).note


# -- energy floor ------------------------------------------------------------


def test_floor_on_eigenpairs():
    for R in (0.01, 1.0, 100.0):
        res, f = solved("affine", 15, R)
        consts = floor_constants(f, [res.state])
        assert check_energy_floor(res.state, f, R, consts)[0].passed


# -- aggregate ---------------------------------------------------------------


@pytest.mark.parametrize("kind", ["const", "affine"])
def test_full_report_passes(kind):
    res, f = solved(kind)
    rep = full_report(res, f)
    assert rep.passed, rep.summary()
    names = rep.by_name()
    for key in ("constraint", "energy_identity", "lagrange_residual", "positivity", "energy_floor",
                "ladder_sup_ratio", "boundedness", "estimk_coupling[k=3]"):
        assert names[key].passed


def test_full_report_diverged():
    f = affine_field(unit_grid(15))
    res = minimize_on_XR(f, 1.0, SolveOptions(n_starts=1, max_iters=2))
    rep = full_report(res, f)
    assert not rep.passed and len(rep.checks) == 1 and rep.checks[0].name == "converged"
    assert "did not converge" in rep.summary()


def test_full_report_tampering():
    res, f = solved()
    bad_lam = full_report(dataclasses.replace(res, lam=res.lam * 1.1), f)
    assert not bad_lam.passed and not bad_lam.by_name()["energy_identity"].passed
    bad_mu = full_report(dataclasses.replace(res, multiplier=res.multiplier * 1.1), f)
    assert not bad_mu.passed and not bad_mu.by_name()["lagrange_residual"].passed


def test_report_csv_and_purity():
    res, f = solved()
    a, b = full_report(res, f), full_report(res, f)
    assert a.to_csv() == b.to_csv()
    lines = a.to_csv().splitlines()
    assert lines[0] == "check,passed,lhs,rhs,margin,advisory,note"
    assert len(lines) == len(a.checks) + 1
