"""Dense Galerkin matrices of the electric (T) and rotated magnetic (K)
integral operators on an RWG basis.

    T_mn = int int [b_m . b_n - (div b_m)(div' b_n)/k^2] G ds' ds
    K_mn = int int t_m . (grad G x b_n) ds' ds,   t_m = b_m or n x b_m

``K`` is the principal-value part only; the identity term is added by the
formulations.  No physical prefactors (j k Z0, Z0) are applied here.
"""

import hashlib
import logging
import math
import os
import struct
from dataclasses import asdict, dataclass

import numpy as np
import scipy.sparse as sp
from scipy.spatial import cKDTree

from . import _accel, _kernels
from .quadrature import (SUPPORTED_ORDERS, centroid_split_rule, edge_graded_rule,
                         map_points, subdivided_rule, triangle_rule,
                         vertex_duffy_rule)

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class QuadratureConfig:
    """Quadrature settings of the dense assembly.

    Pairs of triangles whose centroids are closer than ``near_threshold``
    times the mean edge length use the near rules together with analytic
    extraction of the static kernel over the source triangle.
    """

    far_outer: int = 3
    far_inner: int = 3
    near_outer: int = 7
    near_inner: int = 7
    near_threshold: float = 2.0
    extraction_terms: int = 2
    # outer rules of touching pairs: Gauss-Legendre points per direction
    singular_points: int = 16
    # non-touching near pairs repeat the near_outer rule on 4**levels pieces
    near_subdivision: int = 1
    # regular rules are repeated on sub-triangles until k0 * (longest
    # sub-triangle edge) <= max_kh, so coarse meshes still resolve the phase
    max_kh: float = 1.0

    def __post_init__(self):
        for order in (self.far_outer, self.far_inner, self.near_outer, self.near_inner):
            if order not in SUPPORTED_ORDERS:
                raise ValueError(f"unsupported rule {order}; use {SUPPORTED_ORDERS}")
        if self.near_threshold < 0:
            raise ValueError("near_threshold must be >= 0")
        if self.max_kh <= 0:
            raise ValueError("max_kh must be positive")
        if self.singular_points < 1 or self.near_subdivision < 0:
            raise ValueError("singular_points >= 1 and near_subdivision >= 0 required")
        if self.extraction_terms not in (1, 2):
            raise ValueError("extraction_terms must be 1 or 2")

    def subdivision_levels(self, k0, mesh):
        hmax = float(mesh.edge_lengths().max())
        ratio = k0 * hmax / self.max_kh
        return 0 if ratio <= 1.0 else int(math.ceil(math.log2(ratio)))

    def key(self):
        return ",".join(f"{k}={v!r}" for k, v in sorted(asdict(self).items()))


def greens(r, rp, k0):
    """Free-space Green's function exp(-j k R) / (4 pi R)."""
    d = np.asarray(r, float) - np.asarray(rp, float)
    R = np.sqrt(np.sum(d * d, axis=-1))
    if np.any(R == 0.0):
        raise ValueError("coincident points: use the singular path")
    return np.exp(-1j * k0 * R) / (4.0 * math.pi * R)


def _slot_matrices(basis):
    """Sparse maps from triangle slots to RWG unknowns."""
    mesh = basis.mesh
    f = mesh.n_triangles
    coef = basis.slot_coefficients()
    rows = mesh.tri_edges.ravel()
    cols = np.arange(3 * f)
    bv = sp.csr_matrix((coef.ravel(), (rows, cols)), shape=(basis.n, 3 * f))
    bd = sp.csr_matrix((2.0 * coef.ravel(), (rows, np.repeat(np.arange(f), 3))),
                       shape=(basis.n, f))
    return bv, bd


def near_pairs(mesh, threshold):
    """Ordered (P, Q) triangle pairs handled by the near rule, sorted by P."""
    limit = threshold * mesh.mean_edge_length()
    tree = cKDTree(mesh.centroids)
    pairs = tree.query_pairs(limit, output_type="ndarray") if limit > 0 else \
        np.empty((0, 2), dtype=np.int64)
    f = mesh.n_triangles
    allp = np.concatenate([pairs, pairs[:, ::-1],
                           np.stack([np.arange(f), np.arange(f)], axis=1)])
    order = np.lexsort((allp[:, 1], allp[:, 0]))
    return np.ascontiguousarray(allp[order], dtype=np.int64)


def _touching_groups(mesh, pairs, quad, levels=0):
    """Split near pairs by shared vertices and build their outer rules.

    Yields ``(index, points, weights)`` where ``index`` selects pairs and
    points/weights have shapes (n, a, 3) and (n, a).
    """
    tp = mesh.triangles[pairs[:, 0]]
    tq = mesh.triangles[pairs[:, 1]]
    shared = (tp[:, :, None] == tq[:, None, :]).any(axis=2)   # (n, 3) local of P
    count = shared.sum(axis=1)
    corners = mesh.vertices[tp]                                # (n, 3, 3)
    areas = mesh.areas[pairs[:, 0]]
    n_sing = quad.singular_points
    local = np.arange(3)
    for c in (3, 2, 1, 0):
        idx = np.flatnonzero(count == c)
        if len(idx) == 0:
            continue
        if c == 3:
            bary, w = centroid_split_rule(n_sing)
            ordered = corners[idx]
        elif c == 2:
            bary, w = edge_graded_rule(n_sing)
            opp = np.argmin(shared[idx], axis=1)
            perm = (opp[:, None] + local[None, :] + 1) % 3   # A, B shared; C last
            ordered = np.take_along_axis(corners[idx], perm[:, :, None], axis=1)
        elif c == 1:
            bary, w = vertex_duffy_rule(n_sing)
            v = np.argmax(shared[idx], axis=1)
            perm = (v[:, None] + local[None, :]) % 3
            ordered = np.take_along_axis(corners[idx], perm[:, :, None], axis=1)
        else:
            bary, w = subdivided_rule(quad.near_outer, quad.near_subdivision + levels)
            ordered = corners[idx]
        pts = np.ascontiguousarray(np.einsum("ak,nkd->nad", bary, ordered))
        wts = np.ascontiguousarray(w[None, :] * areas[idx, None])
        yield idx, pts, wts


def _rule_points(mesh, order, levels=0):
    bary, w = subdivided_rule(order, levels)
    pts = np.ascontiguousarray(map_points(mesh.corners(), bary))
    wts = np.ascontiguousarray(w[None, :] * mesh.areas[:, None])
    return pts, wts


def assemble_operators(basis, k0, quad=None, which=("T", "K", "Kn"), chunk=None):
    """Assemble any of T, K (RWG-tested) and Kn (n x RWG-tested) in one pass.

    Returns a dict of dense complex (N, N) arrays.
    """
    if not k0 > 0:
        raise ValueError("k0 must be positive")
    quad = quad or QuadratureConfig()
    mesh = basis.mesh
    f = mesh.n_triangles
    corners = np.ascontiguousarray(mesh.corners())
    normals = np.ascontiguousarray(mesh.normals)
    centroids = np.ascontiguousarray(mesh.centroids)
    levels = quad.subdivision_levels(k0, mesh)
    xo_f, wo_f = _rule_points(mesh, quad.far_outer, levels)
    xi_f, wi_f = _rule_points(mesh, quad.far_inner, levels)
    xi_n, wi_n = _rule_points(mesh, quad.near_inner, levels)
    pairs = near_pairs(mesh, quad.near_threshold)
    starts = np.searchsorted(pairs[:, 0], np.arange(f + 1))
    bv, bd = _slot_matrices(basis)

    use_nb = _accel.numba_enabled()
    if chunk is None:
        per_row = f * xo_f.shape[1] * xi_f.shape[1]
        chunk = max(1, min(f, (400_000 if use_nb else 1_500_000) // max(per_row, 1)))
    far = _kernels.far_slots_nb if use_nb else _kernels.far_slots_np
    near = _kernels.near_slots_nb if use_nb else _kernels.near_slots_np

    n = basis.n
    out = {name: np.zeros((n, n), dtype=complex) for name in which}
    log.debug("assembling %s: N=%d, F=%d, %d near pairs, numba=%s",
              which, n, f, len(pairs), use_nb)
    for p0 in range(0, f, chunk):
        p1 = min(f, p0 + chunk)
        rows = np.arange(p0, p1, dtype=np.int64)
        c = p1 - p0
        tv = np.zeros((c, 3, f, 3), dtype=complex)
        t0 = np.zeros((c, f), dtype=complex)
        kb = np.zeros((c, 3, f, 3), dtype=complex)
        kn = np.zeros((c, 3, f, 3), dtype=complex)
        far(k0, rows, xo_f, wo_f, xi_f, wi_f, corners, normals, centroids, tv, t0, kb, kn)
        sel = pairs[starts[p0]:starts[p1]]
        for idx, xo_n, wo_n in _touching_groups(mesh, sel, quad, levels):
            sub = np.ascontiguousarray(sel[idx])
            near(k0, quad.extraction_terms, sub, sub[:, 0] - p0, xo_n, wo_n, xi_n, wi_n, corners, normals,
                 centroids, tv, t0, kb, kn)
        bvc = bv[:, 3 * p0:3 * p1]
        if "T" in out:
            out["T"] += bvc @ np.asarray((bv @ tv.reshape(3 * c, 3 * f).T).T)
            out["T"] -= bd[:, p0:p1] @ np.asarray((bd @ t0.T).T) / (k0 * k0)
        if "K" in out:
            out["K"] += bvc @ np.asarray((bv @ kb.reshape(3 * c, 3 * f).T).T)
        if "Kn" in out:
            out["Kn"] += bvc @ np.asarray((bv @ kn.reshape(3 * c, 3 * f).T).T)
    return out


def assemble_T(basis, k0, quad=None):
    return assemble_operators(basis, k0, quad, which=("T",))["T"]


def assemble_K(basis, k0, quad=None, testing="beta"):
    if testing not in ("beta", "n_cross_beta"):
        raise ValueError("testing must be 'beta' or 'n_cross_beta'")
    key = "K" if testing == "beta" else "Kn"
    return assemble_operators(basis, k0, quad, which=(key,))[key]


def symmetry_error(x):
    """max|X - X^T| / max|X|."""
    scale = np.abs(x).max()
    return float(np.abs(x - x.T).max() / scale) if scale > 0 else 0.0


# ---------------------------------------------------------------------------
# binary matrix dumps and the assembly cache

_MAGIC = b"CSIEMAT1"


def dump_matrix(path, mat):
    """Little-endian layout: 8-byte magic, uint64 rows, uint64 cols, then
    row-major (re, im) float64 pairs."""
    mat = np.ascontiguousarray(mat, dtype="<c16")
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<QQ", *mat.shape))
        fh.write(mat.tobytes())


def load_matrix(path):
    with open(path, "rb") as fh:
        if fh.read(8) != _MAGIC:
            raise ValueError(f"{path}: not a matrix dump")
        rows, cols = struct.unpack("<QQ", fh.read(16))
        data = np.frombuffer(fh.read(), dtype="<c16")
    if data.size != rows * cols:
        raise ValueError(f"{path}: truncated matrix dump")
    return data.reshape(rows, cols).astype(complex)


def cache_key(mesh, k0, quad, name):
    h = hashlib.sha256()
    h.update(mesh.content_hash().encode())
    h.update(repr(float(k0)).encode())
    h.update(quad.key().encode())
    h.update(name.encode())
    return h.hexdigest()[:32]


def cached_operators(basis, k0, quad=None, which=("T", "K", "Kn"), cache_dir=None):
    """:func:`assemble_operators` with an optional on-disk cache."""
    quad = quad or QuadratureConfig()
    if cache_dir is None:
        return assemble_operators(basis, k0, quad, which)
    os.makedirs(cache_dir, exist_ok=True)
    out, missing = {}, []
    for name in which:
        path = os.path.join(cache_dir, cache_key(basis.mesh, k0, quad, name) + ".bin")
        if os.path.exists(path):
            out[name] = load_matrix(path)
        else:
            missing.append(name)
    if missing:
        fresh = assemble_operators(basis, k0, quad, tuple(missing))
        for name, mat in fresh.items():
            path = os.path.join(cache_dir, cache_key(basis.mesh, k0, quad, name) + ".bin")
            dump_matrix(path, mat)
            out[name] = mat
    return out
