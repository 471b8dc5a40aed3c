import numpy as np
import pytest
from scipy.integrate import dblquad

from csie import _accel
from csie.potentials import triangle_potentials

TRI = np.array([[0.1, -0.2, 0.0], [1.3, 0.1, 0.0], [0.4, 0.9, 0.0]])
NRM = np.array([0.0, 0.0, 1.0])


@pytest.fixture(params=[True, False], ids=["numba", "numpy"])
def backend(request):
    prev = _accel.use_numba(request.param)
    yield request.param
    _accel.use_numba(prev)


def _brute(r, fn):
    """Integrate fn(r') / |r - r'| over TRI via the unit-triangle map."""
    e1, e2 = TRI[1] - TRI[0], TRI[2] - TRI[0]
    jac = np.linalg.norm(np.cross(e1, e2))

    def integrand(v, u):
        rp = TRI[0] + u * e1 + v * e2
        return fn(rp) / np.linalg.norm(r - rp) * jac

    val, _ = dblquad(integrand, 0, 1, 0, lambda u: 1 - u, epsabs=1e-13, epsrel=1e-12)
    return val


@pytest.mark.parametrize("r", [[0.5, 0.3, 0.4], [2.0, -1.0, -0.7], [1.5, 1.5, 0.0],
                               [0.2, 0.1, 1e-3]])
def test_against_numerical_integration(backend, r):
    r = np.array(r)
    s0, s1, _ = triangle_potentials(r, TRI, NRM)
    assert s0 == pytest.approx(_brute(r, lambda rp: 1.0), rel=1e-8)
    for d in range(3):
        exact = _brute(r, lambda rp: rp[d])
        assert s1[d] == pytest.approx(exact, rel=1e-8, abs=1e-10)


@pytest.mark.parametrize("r", [[0.5, 0.3, 0.4], [2.0, -1.0, -0.7], [0.6, 0.3, -0.05]])
def test_gradient_by_finite_difference(backend, r):
    r = np.array(r)
    _, _, grad = triangle_potentials(r, TRI, NRM)
    h = 1e-5
    fd = np.empty(3)
    for d in range(3):
        dr = np.zeros(3)
        dr[d] = h
        fd[d] = (triangle_potentials(r + dr, TRI, NRM)[0]
                 - triangle_potentials(r - dr, TRI, NRM)[0]) / (2 * h)
    assert np.allclose(grad, fd, rtol=1e-6, atol=1e-8)


def test_in_plane_points_finite(backend):
    # centroid, a vertex, an edge midpoint and an exterior in-plane point
    pts = np.array([TRI.mean(axis=0), TRI[1], 0.5 * (TRI[0] + TRI[2]), [2.0, 2.0, 0.0]])
    s0, s1, grad = triangle_potentials(pts, TRI, NRM)
    assert np.all(np.isfinite(s0)) and np.all(np.isfinite(s1))
    # principal value: no normal component in the plane
    assert np.all(grad[[0, 3], 2] == 0)
    assert s0[0] == pytest.approx(_brute(pts[0], lambda rp: 1.0), rel=1e-6)


def test_far_point_monopole(backend):
    r = np.array([300.0, -200.0, 500.0])
    area = 0.5 * np.linalg.norm(np.cross(TRI[1] - TRI[0], TRI[2] - TRI[0]))
    s0, _, _ = triangle_potentials(r, TRI, NRM)
    assert s0 == pytest.approx(area / np.linalg.norm(r - TRI.mean(axis=0)), rel=1e-6)


def test_backends_agree(rng):
    pts = rng.normal(size=(500, 3))
    pts[:50, 2] = 0.0
    prev = _accel.use_numba(True)
    try:
        a = triangle_potentials(pts, TRI, NRM)
        _accel.use_numba(False)
        b = triangle_potentials(pts, TRI, NRM)
    finally:
        _accel.use_numba(prev)
    for x, y in zip(a, b):
        assert np.allclose(x, y, rtol=1e-12, atol=1e-14)


@pytest.mark.parametrize("r", [[0.5, 0.3, 0.4], [2.0, -1.0, -0.7], [0.6, 0.3, 0.0]])
def test_distance_moments(backend, r):
    r = np.array(r)
    _, _, _, sr, vr = triangle_potentials(r, TRI, NRM, distance=True)
    # _brute divides by |r - r'|, so multiply by |r - r'|^2
    assert sr == pytest.approx(_brute(r, lambda rp: np.sum((r - rp) ** 2)), rel=1e-8)
    for d in range(3):
        exact = _brute(r, lambda rp: np.sum((r - rp) ** 2) * (rp[d] - r[d]))
        assert vr[d] == pytest.approx(exact, rel=1e-8, abs=1e-11)
