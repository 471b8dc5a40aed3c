import math

import numpy as np
import pytest

from csie.mesh import (Mesh, MeshError, gen_cube, gen_icosphere, gen_tetrahedron, load_off,
                       mesh_quality, save_off, signed_volume)


@pytest.mark.parametrize("divisions, counts", [(1, (8, 18, 12)), (4, (98, 288, 192))])
def test_cube_counts(divisions, counts):
    m = gen_cube(1.0, divisions)
    assert (m.n_vertices, m.n_edges, m.n_triangles) == counts
    assert m.euler_characteristic == 2


def test_cube_scaling_keeps_connectivity():
    a, b = gen_cube(1.0, 1), gen_cube(2.0, 1)
    assert np.array_equal(a.triangles, b.triangles)
    assert np.allclose(b.vertices, 2.0 * a.vertices)
    assert b.signed_volume() == pytest.approx(8.0)


@pytest.mark.parametrize("level, nf, ne", [(0, 20, 30), (1, 80, 120), (2, 320, 480)])
def test_icosphere_counts_and_radius(level, nf, ne):
    m = gen_icosphere(1.0, level)
    assert (m.n_triangles, m.n_edges) == (nf, ne)
    assert m.euler_characteristic == 2
    assert np.allclose(np.linalg.norm(m.vertices, axis=1), 0.5, atol=1e-12)
    assert m.signed_volume() > 0


def test_normals_point_outward():
    m = gen_icosphere(2.0, 1)
    assert np.all(np.einsum("ij,ij->i", m.normals, m.centroids) > 0)
    assert np.allclose(np.linalg.norm(m.normals, axis=1), 1.0)


def test_edge_tables():
    m = gen_cube(1.0, 2)
    assert np.all(m.edges[:, 0] < m.edges[:, 1])
    assert np.all(m.edge_triangles >= 0)
    # t_plus runs from the lower to the higher vertex index
    for e, (tp, tm) in enumerate(m.edge_triangles[:20]):
        a, b = m.edges[e]
        tri = list(m.triangles[tp])
        i = tri.index(a)
        assert tri[(i + 1) % 3] == b
        assert e in m.tri_edges[tm]


def test_tetrahedron_off(tmp_path):
    path = tmp_path / "tet.off"
    path.write_text("OFF\n4 4 6\n0 0 0\n1 0 0\n0 1 0\n0 0 1\n"
                    "3 0 2 1\n3 0 1 3\n3 0 3 2\n3 1 2 3\n")
    m = load_off(path)
    assert (m.n_vertices, m.n_edges, m.n_triangles) == (4, 6, 4)
    assert m.signed_volume() == pytest.approx(1.0 / 6.0)
    assert gen_tetrahedron().n_edges == 6


def test_off_round_trip(tmp_path):
    m = gen_cube(1.0, 2)
    path = tmp_path / "cube.off"
    save_off(m, path)
    back = load_off(path)
    assert np.array_equal(back.triangles, m.triangles)
    assert np.allclose(back.vertices, m.vertices, rtol=0, atol=1e-15)
    assert back.content_hash() == m.content_hash()


def test_inward_orientation_is_flipped():
    m = gen_tetrahedron()
    flipped = Mesh.from_arrays(m.vertices, m.triangles[:, ::-1])
    assert flipped.signed_volume() > 0
    assert signed_volume(m.vertices, m.triangles[:, ::-1]) < 0


def test_non_manifold_edge_rejected():
    m = gen_tetrahedron()
    v = np.vstack([m.vertices, [[1.0, 1.0, 1.0]]])
    extra = np.array([[0, 1, 4]])
    with pytest.raises(MeshError):
        Mesh.from_arrays(v, np.vstack([m.triangles, extra]))


def test_open_surface_rejected():
    m = gen_tetrahedron()
    with pytest.raises(MeshError):
        Mesh.from_arrays(m.vertices, m.triangles[:3])


def test_non_orientable_rejected():
    # six-vertex triangulation of the projective plane (hemi-icosahedron)
    faces = np.array([[0, 1, 2], [0, 2, 3], [0, 3, 4], [0, 4, 5], [0, 5, 1],
                      [1, 2, 4], [2, 3, 5], [3, 4, 1], [4, 5, 2], [5, 1, 3]])
    rng = np.random.default_rng(0)
    verts = rng.normal(size=(6, 3))
    with pytest.raises(MeshError):
        Mesh.from_arrays(verts, faces)


@pytest.mark.parametrize("text", ["PLY\n", "OFF\n", "OFF\n3 1 0\n0 0 0\n", "OFF\n4 1 0\n0 0 0\n"
                                  "1 0 0\n0 1 0\n1 1 0\n4 0 1 2 3\n", "OFF\n1 1 0\nx y z\n"])
def test_off_parse_errors(tmp_path, text):
    path = tmp_path / "bad.off"
    path.write_text(text)
    with pytest.raises(MeshError):
        load_off(path)


def test_mesh_quality_cube():
    q = mesh_quality(gen_cube(1.0, 1), 2 * math.pi)
    assert q.wavelength == pytest.approx(1.0)
    assert q.max_edge == pytest.approx(math.sqrt(2.0))
    assert q.min_edge == pytest.approx(1.0)
    assert (q.n_triangles, q.n_edges) == (12, 18)
    with pytest.raises(ValueError):
        mesh_quality(gen_cube(1.0, 1), 0.0)


def test_mesh_quality_icosphere(tmp_path):
    q = mesh_quality(gen_icosphere(1.0, 3), 2 * math.pi)
    assert q.max_edge_per_wavelength < 0.2
    # regression value frozen from the generator
    assert q.mean_edge_per_wavelength == pytest.approx(0.07536485259744105, rel=1e-12)
    q.to_csv(tmp_path / "q.csv")
    assert "mean_edge_per_wavelength" in (tmp_path / "q.csv").read_text()


def test_transforms_and_hash():
    m = gen_icosphere(1.0, 1)
    assert m.scaled(3.0).signed_volume() == pytest.approx(27 * m.signed_volume())
    t = m.translated([1.0, 2.0, 3.0])
    assert np.allclose(t.centroids - m.centroids, [1.0, 2.0, 3.0])
    assert t.content_hash() != m.content_hash()
    assert gen_icosphere(1.0, 1).content_hash() == m.content_hash()
