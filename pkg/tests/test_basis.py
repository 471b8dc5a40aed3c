import numpy as np
import pytest
import scipy.io

from csie.basis import assemble_gram_A, assemble_gram_Aprime, build_rwg, eval_rwg
from csie.mesh import gen_cube, gen_icosphere, gen_tetrahedron
from csie.quadrature import map_points, triangle_rule


@pytest.fixture(scope="module")
def cube():
    return build_rwg(gen_cube(1.0, 1))


@pytest.mark.parametrize("mesh, n", [(gen_cube(1.0, 1), 18), (gen_tetrahedron(), 6),
                                     (gen_icosphere(1.0, 2), 480)])
def test_unknown_count(mesh, n):
    assert build_rwg(mesh).n == n


def test_zero_at_free_vertex(cube):
    m = cube.mesh
    for n in range(cube.n):
        assert np.all(eval_rwg(cube, n, cube.tri_plus[n], m.vertices[cube.free_plus[n]]) == 0)
        assert np.all(eval_rwg(cube, n, cube.tri_minus[n], m.vertices[cube.free_minus[n]]) == 0)


def test_value_at_edge_midpoint(cube):
    m = cube.mesh
    for n in range(cube.n):
        mid = m.vertices[m.edges[n]].mean(axis=0)
        tp = cube.tri_plus[n]
        val = eval_rwg(cube, n, tp, mid)
        expected = cube.lengths[n] / (2 * m.areas[tp]) * np.linalg.norm(
            mid - m.vertices[cube.free_plus[n]])
        assert np.linalg.norm(val) == pytest.approx(expected, rel=1e-14)


def test_off_support_is_zero(cube):
    others = set(range(cube.mesh.n_triangles)) - {cube.tri_plus[0], cube.tri_minus[0]}
    t = min(others)
    assert np.all(eval_rwg(cube, 0, t, cube.mesh.centroids[t]) == 0)


def test_normal_component_continuous():
    basis = build_rwg(gen_icosphere(1.0, 1))
    m = basis.mesh
    for n in range(0, basis.n, 7):
        a, b = m.vertices[m.edges[n]]
        t = b - a
        # in-plane edge normal on each side, pointing from plus into minus
        nu_p = np.cross(t, m.normals[basis.tri_plus[n]])
        nu_p /= np.linalg.norm(nu_p)
        nu_m = np.cross(t, m.normals[basis.tri_minus[n]])
        nu_m /= np.linalg.norm(nu_m)
        for s in (0.2, 0.5, 0.9):
            r = a + s * t
            jp = eval_rwg(basis, n, basis.tri_plus[n], r) @ nu_p
            jm = eval_rwg(basis, n, basis.tri_minus[n], r) @ nu_m
            assert jp == pytest.approx(jm, rel=1e-12)
            assert abs(jp) == pytest.approx(1.0, rel=1e-12)


def test_divergence_values(cube):
    div = cube.divergence()
    m = cube.mesh
    for n in range(cube.n):
        for tri, sign in ((cube.tri_plus[n], 1.0), (cube.tri_minus[n], -1.0)):
            slot = list(m.tri_edges[tri]).index(n)
            assert div[tri, slot] == pytest.approx(sign * cube.lengths[n] / m.areas[tri])


def test_gram_structure(cube):
    a, ap = assemble_gram_A(cube), assemble_gram_Aprime(cube)
    assert a.nnz == 4 * 18 and ap.nnz == 5 * 18
    assert np.all(a.nnz_per_row() == 4) and np.all(ap.nnz_per_row() == 5)
    A, Ap = a.toarray(), ap.toarray()
    assert np.all(np.diag(A) == 0)
    assert np.array_equal(A.T, -A)
    assert np.array_equal(Ap.T, Ap)
    assert np.linalg.eigvalsh(Ap).min() > 0


def test_gram_structure_icosphere(rng):
    basis = build_rwg(gen_icosphere(1.0, 2))
    a, ap = assemble_gram_A(basis), assemble_gram_Aprime(basis)
    assert np.all(a.nnz_per_row() == 4) and np.all(ap.nnz_per_row() == 5)
    assert (a.matrix != -a.matrix.T).nnz == 0
    for _ in range(100):
        x = rng.normal(size=basis.n)
        assert x @ (ap @ x) > 0


def _brute_gram(basis, m_idx, n_idx, rotate, order=7):
    """Direct quadrature with eval_rwg on the shared support."""
    mesh = basis.mesh
    bary, w = triangle_rule(order)
    total = 0.0
    shared = {basis.tri_plus[m_idx], basis.tri_minus[m_idx]} & {basis.tri_plus[n_idx],
                                                                basis.tri_minus[n_idx]}
    for t in shared:
        pts = map_points(mesh.corners()[t], bary)
        for p, wq in zip(pts, w):
            bm = eval_rwg(basis, m_idx, t, p)
            bn = eval_rwg(basis, n_idx, t, p)
            if rotate:
                bn = np.cross(mesh.normals[t], bn)
            total += wq * mesh.areas[t] * (bm @ bn)
    return total


def test_gram_matches_high_order_quadrature(cube):
    A, Ap = assemble_gram_A(cube).toarray(), assemble_gram_Aprime(cube).toarray()
    for n in range(cube.n):
        assert Ap[n, n] == pytest.approx(_brute_gram(cube, n, n, False), rel=1e-14)
    rows, cols = np.nonzero(Ap)
    for i, j in zip(rows, cols):
        assert Ap[i, j] == pytest.approx(_brute_gram(cube, i, j, False), rel=1e-13, abs=1e-15)
        assert A[i, j] == pytest.approx(_brute_gram(cube, i, j, True), rel=1e-13, abs=1e-15)


def test_gram_scaling():
    b1 = build_rwg(gen_cube(1.0, 1))
    b2 = build_rwg(gen_cube(2.0, 1))
    for asm in (assemble_gram_A, assemble_gram_Aprime):
        # RWG values are independent of scale, so the integrals scale with area
        assert np.allclose(asm(b2).toarray(), 4.0 * asm(b1).toarray(), rtol=1e-13, atol=1e-15)


def test_matrix_market_export(tmp_path, cube):
    for mat, tag in ((assemble_gram_A(cube), "skew-symmetric"),
                     (assemble_gram_Aprime(cube), "symmetric")):
        path = tmp_path / f"{mat.symmetry}.mtx"
        mat.export_mm(path, comment="cube")
        assert tag in path.read_text().splitlines()[0]
        back = scipy.io.mmread(path).toarray()
        assert np.allclose(back, mat.toarray(), rtol=1e-15, atol=0)
