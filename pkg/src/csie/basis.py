"""RWG basis functions and the Gram matrices of the weak combined-source
condition."""

from dataclasses import dataclass

import numpy as np
import scipy.io
import scipy.sparse as sp

from .mesh import MeshError
from .quadrature import map_points, triangle_rule


@dataclass(frozen=True, eq=False)
class RwgBasis:
    """One RWG function per interior edge of a closed mesh.

    On its plus triangle the function is ``l/(2 A+) (r - p+)`` and on its
    minus triangle ``-l/(2 A-) (r - p-)``, where ``p`` is the vertex opposite
    the edge.  Unknowns are ordered like ``mesh.edges`` (sorted vertex pairs).
    """

    mesh: object
    lengths: np.ndarray
    tri_plus: np.ndarray
    tri_minus: np.ndarray
    free_plus: np.ndarray
    free_minus: np.ndarray

    @property
    def n(self):
        return len(self.lengths)

    def __len__(self):
        return self.n

    @property
    def area_plus(self):
        return self.mesh.areas[self.tri_plus]

    @property
    def area_minus(self):
        return self.mesh.areas[self.tri_minus]

    def slot_signs(self):
        """(F, 3) sign of the RWG attached to local vertex i of triangle t."""
        m = self.mesh
        edges = m.tri_edges
        return np.where(self.tri_plus[edges] == np.arange(m.n_triangles)[:, None],
                        1.0, -1.0)

    def slot_coefficients(self):
        """(F, 3) factor ``sign * l / (2 A)`` for local function i of t."""
        m = self.mesh
        return self.slot_signs() * self.lengths[m.tri_edges] / (2.0 * m.areas[:, None])

    def divergence(self):
        """(F, 3) constant surface divergence of each local function."""
        return 2.0 * self.slot_coefficients()


def build_rwg(mesh):
    if np.any(mesh.edge_triangles < 0):
        raise MeshError("every edge needs two triangles")
    tri_plus = mesh.edge_triangles[:, 0]
    tri_minus = mesh.edge_triangles[:, 1]

    def free_vertex(tris):
        # the local slot whose opposite edge is this one
        local = np.argmax(mesh.tri_edges[tris] == np.arange(mesh.n_edges)[:, None], axis=1)
        return mesh.triangles[tris, local]

    basis = RwgBasis(mesh=mesh,
                     lengths=mesh.edge_lengths(),
                     tri_plus=tri_plus.copy(),
                     tri_minus=tri_minus.copy(),
                     free_plus=free_vertex(tri_plus),
                     free_minus=free_vertex(tri_minus))
    return basis


def eval_rwg(basis, n, tri, point):
    """Value of RWG ``n`` at ``point`` on triangle ``tri`` (zero off-support)."""
    m = basis.mesh
    point = np.asarray(point, dtype=float)
    if tri == basis.tri_plus[n]:
        p = m.vertices[basis.free_plus[n]]
        return basis.lengths[n] / (2.0 * m.areas[tri]) * (point - p)
    if tri == basis.tri_minus[n]:
        p = m.vertices[basis.free_minus[n]]
        return -basis.lengths[n] / (2.0 * m.areas[tri]) * (point - p)
    return np.zeros(3)


@dataclass(frozen=True, eq=False)
class SparseRealMatrix:
    """Real sparse matrix in CSR form with a symmetry tag."""

    matrix: sp.csr_matrix
    symmetry: str  # "skew" or "symmetric"

    @property
    def shape(self):
        return self.matrix.shape

    @property
    def nnz(self):
        return self.matrix.nnz

    def nnz_per_row(self):
        return np.diff(self.matrix.indptr)

    def diagonal(self):
        return self.matrix.diagonal()

    def toarray(self):
        return self.matrix.toarray()

    def __matmul__(self, x):
        return self.matrix @ x

    def export_mm(self, path, comment=""):
        """Write Matrix Market coordinate format."""
        sym = "skew-symmetric" if self.symmetry == "skew" else "symmetric"
        note = f"{self.symmetry} Gram matrix" + (f"; {comment}" if comment else "")
        # mmwrite keeps only the lower triangle for (skew-)symmetric output
        scipy.io.mmwrite(path, self.matrix.tocoo(), comment=note, symmetry=sym)


def _local_gram(basis, kind, order=3):
    m = basis.mesh
    bary, w = triangle_rule(order)
    corners = m.corners()
    pts = map_points(corners, bary)                 # (F, q, 3)
    d = pts[:, :, None, :] - corners[:, None, :, :]  # (F, q, 3 local, 3)
    coef = basis.slot_coefficients()
    if kind == "A":
        nd = np.cross(m.normals[:, None, None, :], d)
        local = np.einsum("q,fqid,fqjd->fij", w, d, nd)
    else:
        local = np.einsum("q,fqid,fqjd->fij", w, d, d)
    local *= (coef[:, :, None] * coef[:, None, :]) * m.areas[:, None, None]
    return local


def _assemble(basis, local, skew):
    m = basis.mesh
    rows, cols, vals = [], [], []
    te = m.tri_edges
    for i in range(3):
        for j in range(3):
            if skew and i == j:
                continue
            if i <= j:
                v = local[:, i, j]
            else:
                # mirror the upper triangle so symmetry holds bit-for-bit
                v = -local[:, j, i] if skew else local[:, j, i]
            rows.append(te[:, i])
            cols.append(te[:, j])
            vals.append(v)
    mat = sp.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                        shape=(basis.n, basis.n)).tocsr()
    mat.sum_duplicates()
    mat.sort_indices()
    return mat


def assemble_gram_A(basis, order=3):
    """Gram matrix of RWG against n x RWG; skew-symmetric, 4 entries per row."""
    return SparseRealMatrix(_assemble(basis, _local_gram(basis, "A", order), True), "skew")


def assemble_gram_Aprime(basis, order=3):
    """Gram matrix of RWG against RWG; SPD, 5 entries per row."""
    return SparseRealMatrix(_assemble(basis, _local_gram(basis, "Ap", order), False),
                            "symmetric")
