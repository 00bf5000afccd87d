import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from vexeig import CellField, Domain, Grid, GridFunction, gradient, integrate, laplacian
from vexeig.grid import as_grid, lebesgue_measure

finite = st.floats(-10, 10, allow_nan=False)


def test_grid_layout():
    g = Grid(Domain(((0.0, 1.0),)), 3)
    assert g.h == (0.25,)
    assert g.cell_shape == (4,) and g.node_shape == (3,)
    np.testing.assert_allclose(g.node_axes()[0], [0.25, 0.5, 0.75])
    np.testing.assert_allclose(g.cell_axes()[0], [0.125, 0.375, 0.625, 0.875])
    g2 = Grid(Domain(((0.0, 1.0), (0.0, 2.0))), (3, 5))
    assert g2.h == (0.25, 2.0 / 6) and g2.cell_shape == (4, 6) and g2.num_corners == 4


@pytest.mark.parametrize("bounds", [((1.0, 1.0),), ((0.0, 1.0),) * 3, ((2.0, 1.0),)])
def test_bad_domain(bounds):
    with pytest.raises(ValueError):
        Domain(bounds)


def test_bad_grid_and_values():
    with pytest.raises(ValueError):
        Grid(Domain(((0.0, 1.0),)), 0)
    g = Grid(Domain(((0.0, 1.0),)), 2)
    with pytest.raises(ValueError):
        GridFunction(g, [1.0, np.nan])


def test_gradient_plateau():
    g = Grid(Domain(((0.0, 1.0),)), 3)
    np.testing.assert_allclose(gradient(GridFunction(g, [1, 1, 1])).components[0], [4, 0, 0, -4])


def test_gradient_zero():
    g = Grid(Domain(((0.0, 1.0), (0.0, 1.0))), 4)
    assert not np.any(gradient(GridFunction.zeros(g)).components)


def test_gradient_ramp():
    g = Grid(Domain(((0.0, 1.0),)), 7)
    x = g.node_axes()[0]
    d = gradient(GridFunction(g, x)).components[0]
    np.testing.assert_allclose(d[:-1], 1.0, rtol=1e-13)
    assert d[-1] == pytest.approx(-x[-1] / g.h[0])


def test_gradient_2d_averages_edges():
    g = Grid(Domain(((0.0, 1.0), (0.0, 1.0))), 1)
    # single interior node value 1 at the center; every cell sees one nonzero corner
    d = gradient(GridFunction(g, [[1.0]])).components
    assert d.shape == (2, 2, 2)
    np.testing.assert_allclose(np.abs(d), 0.5 / 0.5)


def test_integrate_examples():
    assert integrate(CellField(Grid(Domain(((0.0, 1.0),)), 9), 1.0)) == pytest.approx(1.0, abs=1e-14)
    assert integrate(CellField(Grid(Domain(((-2.0, 2.0),)), 9), 1.0)) == pytest.approx(4.0, abs=1e-14)
    g = Grid(Domain(((0.0, 1.0),)), 3)  # four cells
    assert integrate(g.cell_centers()[0], g) == pytest.approx(0.5, abs=1e-15)
    with pytest.raises(TypeError):
        integrate(np.ones(4))


@pytest.mark.parametrize("bounds, m", [(((0.0, 1.0),), 1.0), (((-2.0, 2.0),), 4.0), (((0.0, 1.0), (0.0, 2.0)), 2.0)])
def test_lebesgue_measure(bounds, m):
    assert lebesgue_measure(as_grid(bounds, 3)) == m


grids = st.sampled_from([Grid(Domain(((0.0, 1.0),)), 6), Grid(Domain(((-1.0, 2.0), (0.0, 1.0))), (3, 4))])


@st.composite
def grid_and_arrays(draw, k=2):
    g = draw(grids)
    return (g,) + tuple(draw(arrays(np.float64, g.node_shape, elements=finite)) for _ in range(k))


@given(grid_and_arrays())
def test_summation_by_parts(data):
    g, u, phi = data
    vol = g.cell_volume
    lhs = np.sum(g.gradient_array(u) * g.gradient_array(phi)) * vol
    rhs = -vol * np.sum(laplacian(GridFunction(g, u)).values * phi)
    assert abs(lhs - rhs) <= 1e-12 * (1 + abs(lhs)) * 1e2


@given(grid_and_arrays(), finite, finite)
def test_gradient_linear(data, a, b):
    g, u, v = data
    lhs = g.gradient_array(a * u + b * v)
    rhs = a * g.gradient_array(u) + b * g.gradient_array(v)
    np.testing.assert_allclose(lhs, rhs, atol=1e-9 * (1 + np.abs(rhs).max()))


@given(grid_and_arrays(1), st.data())
def test_adjoints_are_transposes(data, d):
    g, u = data
    F = d.draw(arrays(np.float64, (g.dim,) + g.cell_shape, elements=finite))
    Q = d.draw(arrays(np.float64, (g.num_corners,) + g.cell_shape, elements=finite))
    a = np.sum(g.gradient_array(u) * F)
    b = np.sum(u * g.gradient_adjoint(F))
    assert abs(a - b) <= 1e-10 * (1 + abs(a))
    a = np.sum(g.corner_values(u) * Q)
    b = np.sum(u * g.corner_adjoint(Q))
    assert abs(a - b) <= 1e-10 * (1 + abs(a))


@given(grids, st.data())
def test_integrate_nonnegative(g, d):
    f = d.draw(arrays(np.float64, g.cell_shape, elements=st.floats(0, 1e6)))
    assert integrate(f, g) >= 0.0
