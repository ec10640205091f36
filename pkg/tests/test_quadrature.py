import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import monomial_integral, random_star_polygon, regular_polygon, shoelace
from polyvem.quadrature import (
    QuadratureError,
    batch_polygon_rule,
    gauss_legendre,
    gauss_lobatto,
    polygon_rule,
    triangle_rule,
)

UNIT_SQUARE = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])
NONCONVEX = np.array([[0, 0], [1, 0], [1, 1], [0.5, 0.3], [0, 1]], dtype=float)


def test_gauss_legendre_midpoint():
    r = gauss_legendre(1, length=2.5)
    assert r.nodes == pytest.approx([0.5])
    assert r.weights == pytest.approx([2.5])


def test_gauss_lobatto_three_points():
    r = gauss_lobatto(3)
    assert r.nodes == pytest.approx([0.0, 0.5, 1.0], abs=1e-15)
    assert r.weights == pytest.approx([1 / 6, 2 / 3, 1 / 6])


def test_legendre_cubic_exact():
    r = gauss_legendre(2)
    assert r.integrate(r.nodes**3) == pytest.approx(0.25, abs=1e-15)


@pytest.mark.parametrize("n", range(1, 9))
def test_legendre_exactness(n):
    r = gauss_legendre(n, length=0.7)
    assert r.weights.sum() == pytest.approx(0.7, abs=1e-15)
    assert np.all(r.weights > 0)
    for p in range(2 * n):
        assert r.integrate(r.nodes**p) == pytest.approx(0.7 / (p + 1), rel=1e-13)


@pytest.mark.parametrize("n", range(2, 9))
def test_lobatto_exactness(n):
    r = gauss_lobatto(n)
    assert r.nodes[0] == 0.0 and r.nodes[-1] == 1.0
    assert np.all(r.weights > 0)
    for p in range(2 * n - 2):
        assert r.integrate(r.nodes**p) == pytest.approx(1 / (p + 1), rel=1e-13)


def test_rule_range_errors():
    with pytest.raises(QuadratureError):
        gauss_legendre(0)
    with pytest.raises(QuadratureError):
        gauss_lobatto(1)


def test_rules_are_immutable():
    with pytest.raises(ValueError):
        gauss_legendre(3).nodes[0] = 1.0


@pytest.mark.parametrize("degree", range(0, 11))
def test_triangle_rule_exact(degree):
    pts, w = triangle_rule(degree)
    tri = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    for a in range(degree + 1):
        for b in range(degree + 1 - a):
            got = np.sum(w * pts[:, 0] ** a * pts[:, 1] ** b)
            assert got == pytest.approx(monomial_integral(tri, a, b), rel=1e-13, abs=1e-16)


def test_unit_square_x2y2():
    r = polygon_rule(UNIT_SQUARE, 4)
    x, y = r.points.T
    assert abs(r.integrate(x**2 * y**2) - 1 / 9) <= 1e-14


def test_hexagon_area():
    r0 = 0.37
    hexagon = regular_polygon(6, r=r0, center=(0.2, -0.1))
    assert polygon_rule(hexagon, 2).weights.sum() == pytest.approx(1.5 * np.sqrt(3) * r0**2, rel=1e-13)


def test_nonconvex_area_and_fallback():
    r = polygon_rule(NONCONVEX, 6)
    assert r.weights.sum() == pytest.approx(shoelace(NONCONVEX), rel=1e-13)
    # the reflex vertex puts the centroid fan outside; ear clipping must stay inside
    assert np.all(r.weights >= 0)
    x, y = r.points.T
    assert r.integrate(x**3 * y**2) == pytest.approx(monomial_integral(NONCONVEX, 3, 2), rel=1e-13)


def test_batch_matches_single():
    rng = np.random.default_rng(3)
    cells = np.stack([random_star_polygon(rng, 6) for _ in range(5)])
    pts, w = batch_polygon_rule(cells, 5)
    for c in range(5):
        r = polygon_rule(cells[c], 5)
        assert np.sum(w[c]) == pytest.approx(r.weights.sum(), rel=1e-14)


@st.composite
def polygons(draw):
    n = draw(st.integers(3, 8))
    seed = draw(st.integers(0, 2**32 - 1))
    dent = draw(st.booleans()) and n >= 5
    scale = draw(st.floats(0.05, 3.0))
    shift = draw(st.tuples(st.floats(-2, 2), st.floats(-2, 2)))
    return random_star_polygon(np.random.default_rng(seed), n, dent) * scale + np.array(shift)


@settings(max_examples=60, deadline=None)
@given(poly=polygons(), k=st.integers(1, 4), seed=st.integers(0, 2**32 - 1))
def test_polygon_rule_matches_green_oracle(poly, k, seed):
    degree = 2 * k + 2
    rng = np.random.default_rng(seed)
    r = polygon_rule(poly, degree)
    assert r.weights.sum() == pytest.approx(shoelace(poly), rel=1e-13)
    # random polynomial in coordinates centred on the polygon to keep cancellation mild
    c = poly.mean(axis=0)
    q = poly - c
    x, y = (r.points - c).T
    got = 0.0
    ref = 0.0
    for a in range(degree + 1):
        for b in range(degree + 1 - a):
            coef = rng.standard_normal()
            got += coef * r.integrate(x**a * y**b)
            ref += coef * monomial_integral(q, a, b)
    scale = sum(abs(monomial_integral(q, 2 * a, 2 * b)) ** 0.5 for a in range(degree // 2 + 1)
                for b in range(degree // 2 + 1 - a)) * abs(shoelace(q)) ** 0.5
    assert abs(got - ref) <= 1e-12 * max(abs(ref), scale)
