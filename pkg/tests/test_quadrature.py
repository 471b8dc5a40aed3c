import math

import numpy as np
import pytest

from csie.quadrature import (DEGREE, SUPPORTED_ORDERS, centroid_split_rule, edge_graded_rule,
                             gauss_legendre01, map_points, subdivided_rule, triangle_rule,
                             vertex_duffy_rule)


def monomial_exact(a, b, c):
    """Integral of l0^a l1^b l2^c over the reference triangle, divided by its
    area: 2 a! b! c! / (a + b + c + 2)!."""
    f = math.factorial
    return 2.0 * f(a) * f(b) * f(c) / f(a + b + c + 2)


def exponents(deg):
    for a in range(deg + 1):
        for b in range(deg + 1 - a):
            yield a, b, deg - a - b


@pytest.mark.parametrize("order", SUPPORTED_ORDERS)
def test_rules_exact_to_their_degree(order):
    bary, w = triangle_rule(order)
    assert bary.shape == (order, 3)
    assert np.allclose(bary.sum(axis=1), 1.0)
    assert math.isclose(w.sum(), 1.0, rel_tol=1e-14)
    for deg in range(DEGREE[order] + 1):
        for a, b, c in exponents(deg):
            got = np.sum(w * bary[:, 0] ** a * bary[:, 1] ** b * bary[:, 2] ** c)
            assert got == pytest.approx(monomial_exact(a, b, c), rel=1e-12, abs=1e-15)


def test_unsupported_order():
    with pytest.raises(ValueError):
        triangle_rule(5)


def test_gauss_legendre01():
    x, w = gauss_legendre01(5)
    assert np.all((x > 0) & (x < 1))
    assert np.sum(w * x ** 9) == pytest.approx(0.1, rel=1e-14)


@pytest.mark.parametrize("rule", [
    lambda: edge_graded_rule(12),
    lambda: vertex_duffy_rule(12),
    lambda: centroid_split_rule(12),
    lambda: subdivided_rule(7, 2),
])
def test_special_rules_integrate_polynomials(rule):
    bary, w = rule()
    assert w.sum() == pytest.approx(1.0, rel=1e-13)
    assert np.all(bary >= -1e-14)
    got = np.sum(w * bary[:, 0] ** 2 * bary[:, 1])
    assert got == pytest.approx(monomial_exact(2, 1, 0), rel=1e-12)


def test_edge_rule_resolves_log_singularity():
    # int over the triangle of log(distance to edge A-B); distance ~ lambda_C
    bary, w = edge_graded_rule(12)
    got = np.sum(w * np.log(bary[:, 2]))
    # exact: 2 * int_0^1 (1 - x) log x dx = -3/2
    assert got == pytest.approx(-1.5, rel=1e-7)


def test_duffy_rule_resolves_inverse_distance():
    # int over the right triangle (0,0),(1,0),(0,1) of 1/r, normalized by area
    bary, w = vertex_duffy_rule(12)
    pts = bary[:, 1:]
    got = np.sum(w / np.linalg.norm(pts, axis=1)) * 0.5
    exact = math.sqrt(2.0) * math.asinh(1.0)    # = int_0^{pi/2} 1/(cos+sin) dphi
    assert got == pytest.approx(exact, rel=1e-9)


def test_map_points():
    tri = np.array([[0.0, 0, 0], [2, 0, 0], [0, 3, 0]])
    bary, w = triangle_rule(3)
    pts = map_points(tri, bary)
    centroid = np.sum(w[:, None] * pts, axis=0)
    assert np.allclose(centroid, tri.mean(axis=0))
