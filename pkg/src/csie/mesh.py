"""Closed, oriented triangular surface meshes.

A :class:`Mesh` stores vertices and counter-clockwise (seen from outside)
triangles together with the manifold edge table used by the RWG basis.  The
constructor repairs inconsistent winding by breadth-first propagation and
flips the surface when its signed volume is negative, so normals always
point outwards.
"""

import csv
from collections import deque
from dataclasses import dataclass

import numpy as np
from scipy.spatial import ConvexHull


class MeshError(ValueError):
    """Raised for meshes that are not closed orientable 2-manifolds."""


def _edge_key(a, b):
    return (a, b) if a < b else (b, a)


def _orient(triangles):
    """Make the winding of every connected component consistent.

    Returns a copy of ``triangles`` (F, 3).  Raises :class:`MeshError` when
    an edge is not shared by exactly two triangles or when the surface is
    not orientable.
    """
    tris = np.array(triangles, dtype=np.int64, copy=True)
    edge_tris = {}
    for t, (a, b, c) in enumerate(tris):
        for u, v in ((a, b), (b, c), (c, a)):
            edge_tris.setdefault(_edge_key(u, v), []).append(t)
    bad = [e for e, ts in edge_tris.items() if len(ts) != 2]
    if bad:
        raise MeshError(f"non-manifold edge {bad[0]} shared by "
                        f"{len(edge_tris[bad[0]])} triangles "
                        f"({len(bad)} such edges)")

    def directed(t):
        a, b, c = tris[t]
        return {(a, b), (b, c), (c, a)}

    visited = np.zeros(len(tris), dtype=bool)
    for seed in range(len(tris)):
        if visited[seed]:
            continue
        visited[seed] = True
        queue = deque([seed])
        while queue:
            t = queue.popleft()
            for u, v in directed(t):
                t2 = [s for s in edge_tris[_edge_key(u, v)] if s != t][0]
                # a consistent neighbour traverses the shared edge as (v, u)
                consistent = (v, u) in directed(t2)
                if visited[t2]:
                    if not consistent:
                        raise MeshError("surface is not orientable "
                                        f"(conflict between triangles {t} and {t2})")
                    continue
                if not consistent:
                    tris[t2] = tris[t2][[0, 2, 1]]
                visited[t2] = True
                queue.append(t2)
    return tris


def _components(triangles, n_vertices):
    """Label connected triangle components via shared vertices."""
    from scipy.sparse import coo_matrix
    from scipy.sparse.csgraph import connected_components

    f = len(triangles)
    rows = np.repeat(np.arange(f), 3)
    inc = coo_matrix((np.ones(3 * f), (rows, triangles.ravel())),
                     shape=(f, n_vertices)).tocsr()
    _, labels = connected_components(inc @ inc.T, directed=False)
    return labels


def signed_volume(vertices, triangles):
    """Enclosed volume by the divergence theorem (positive if outward)."""
    v0, v1, v2 = (vertices[triangles[:, i]] for i in range(3))
    return float(np.einsum("ij,ij->", v0, np.cross(v1, v2)) / 6.0)


@dataclass(frozen=True, eq=False)
class Mesh:
    """Closed triangulated surface with edge connectivity.

    Attributes
    ----------
    vertices : (V, 3) float array, metres
    triangles : (F, 3) int array, counter-clockwise seen from outside
    edges : (E, 2) int array, vertex pairs with ``edges[:, 0] < edges[:, 1]``,
        sorted lexicographically
    edge_triangles : (E, 2) int array, ``[t_plus, t_minus]``.  ``t_plus``
        traverses the edge from the lower to the higher vertex index.
    tri_edges : (F, 3) int array, edge opposite local vertex ``i``
    areas, normals, centroids : per-triangle geometry
    """

    vertices: np.ndarray
    triangles: np.ndarray
    edges: np.ndarray
    edge_triangles: np.ndarray
    tri_edges: np.ndarray
    areas: np.ndarray
    normals: np.ndarray
    centroids: np.ndarray
    name: str = "mesh"

    @classmethod
    def from_arrays(cls, vertices, triangles, name="mesh"):
        vertices = np.ascontiguousarray(vertices, dtype=float)
        triangles = np.asarray(triangles, dtype=np.int64)
        if vertices.ndim != 2 or vertices.shape[1] != 3:
            raise MeshError("vertices must have shape (V, 3)")
        if triangles.ndim != 2 or triangles.shape[1] != 3 or len(triangles) == 0:
            raise MeshError("triangles must have shape (F, 3) with F > 0")
        if triangles.min() < 0 or triangles.max() >= len(vertices):
            raise MeshError("triangle references a missing vertex")
        if np.any(triangles[:, 0] == triangles[:, 1]) or \
                np.any(triangles[:, 1] == triangles[:, 2]) or \
                np.any(triangles[:, 0] == triangles[:, 2]):
            raise MeshError("degenerate triangle with repeated vertex")

        tris = _orient(triangles)
        labels = _components(tris, len(vertices))
        for lab in np.unique(labels):
            sel = labels == lab
            if signed_volume(vertices, tris[sel]) < 0.0:
                tris[sel] = tris[sel][:, [0, 2, 1]]

        p0, p1, p2 = (vertices[tris[:, i]] for i in range(3))
        cr = np.cross(p1 - p0, p2 - p0)
        twice_area = np.linalg.norm(cr, axis=1)
        if np.any(twice_area <= 0.0):
            raise MeshError("triangle with zero area")
        areas = 0.5 * twice_area
        normals = cr / twice_area[:, None]
        centroids = (p0 + p1 + p2) / 3.0

        # edge opposite local vertex i joins vertices i+1 and i+2
        local = np.stack([np.sort(tris[:, [1, 2]], axis=1),
                          np.sort(tris[:, [2, 0]], axis=1),
                          np.sort(tris[:, [0, 1]], axis=1)], axis=1)
        flat = local.reshape(-1, 2)
        edges, inverse = np.unique(flat, axis=0, return_inverse=True)
        inverse = inverse.ravel()
        tri_edges = inverse.reshape(-1, 3)
        counts = np.bincount(inverse, minlength=len(edges))
        if np.any(counts != 2):
            raise MeshError("non-manifold edge after orientation")

        # plus triangle runs the edge low -> high
        nxt = tris[:, [2, 0, 1]]   # CCW order runs vertex i+1 -> i+2
        start = tris[:, [1, 2, 0]]
        forward = (start < nxt).ravel()
        tri_index = np.repeat(np.arange(len(tris)), 3)
        edge_triangles = np.empty((len(edges), 2), dtype=np.int64)
        edge_triangles[inverse[forward], 0] = tri_index[forward]
        edge_triangles[inverse[~forward], 1] = tri_index[~forward]
        if np.bincount(inverse[forward], minlength=len(edges)).max() != 1:
            raise MeshError("edge traversed twice in the same direction")

        for arr in (vertices, tris, edges, edge_triangles, tri_edges,
                    areas, normals, centroids):
            arr.setflags(write=False)
        return cls(vertices, tris, edges, edge_triangles, tri_edges,
                   areas, normals, centroids, name)

    @property
    def n_vertices(self):
        return len(self.vertices)

    @property
    def n_triangles(self):
        return len(self.triangles)

    @property
    def n_edges(self):
        return len(self.edges)

    @property
    def euler_characteristic(self):
        return self.n_vertices - self.n_edges + self.n_triangles

    def edge_lengths(self):
        d = self.vertices[self.edges[:, 1]] - self.vertices[self.edges[:, 0]]
        return np.linalg.norm(d, axis=1)

    def mean_edge_length(self):
        return float(self.edge_lengths().mean())

    def signed_volume(self):
        return signed_volume(self.vertices, self.triangles)

    def corners(self):
        """(F, 3, 3) vertex coordinates of every triangle."""
        return self.vertices[self.triangles]

    def scaled(self, factor):
        return Mesh.from_arrays(self.vertices * factor, self.triangles,
                                name=self.name)

    def translated(self, offset):
        return Mesh.from_arrays(self.vertices + np.asarray(offset, float),
                                self.triangles, name=self.name)

    def content_hash(self):
        import hashlib
        h = hashlib.sha256()
        h.update(np.ascontiguousarray(self.vertices, dtype="<f8").tobytes())
        h.update(np.ascontiguousarray(self.triangles, dtype="<i8").tobytes())
        return h.hexdigest()


# --------------------------------------------------------------------------
# OFF import / export

def load_off(path, name=None):
    """Read an ASCII OFF file into a validated, outward-oriented mesh."""
    with open(path) as fh:
        tokens = []
        for line in fh:
            line = line.split("#", 1)[0].strip()
            if line:
                tokens.append(line.split())
    if not tokens or not tokens[0][0].upper().endswith("OFF"):
        raise MeshError(f"{path}: missing OFF header")
    head = tokens[0][1:] if len(tokens[0]) > 1 else None
    body = tokens[1:]
    if head is None:
        if not body:
            raise MeshError(f"{path}: missing counts line")
        head, body = body[0], body[1:]
    try:
        nv, nf = int(head[0]), int(head[1])
        verts = np.array([[float(x) for x in row[:3]] for row in body[:nv]])
        faces = []
        for row in body[nv:nv + nf]:
            k = int(row[0])
            if k != 3:
                raise MeshError(f"{path}: only triangular faces are supported")
            faces.append([int(x) for x in row[1:4]])
    except (ValueError, IndexError) as exc:
        raise MeshError(f"{path}: malformed OFF data ({exc})") from exc
    if verts.shape != (nv, 3) or len(faces) != nf:
        raise MeshError(f"{path}: truncated OFF file")
    return Mesh.from_arrays(verts, np.array(faces), name=name or str(path))


def save_off(mesh, path):
    with open(path, "w") as fh:
        fh.write("OFF\n")
        fh.write(f"{mesh.n_vertices} {mesh.n_triangles} {mesh.n_edges}\n")
        for v in mesh.vertices:
            fh.write(" ".join(repr(float(x)) for x in v) + "\n")
        for t in mesh.triangles:
            fh.write(f"3 {t[0]} {t[1]} {t[2]}\n")


# --------------------------------------------------------------------------
# generators

def gen_cube(edge_len, divisions):
    """Axis-aligned cube centred at the origin.

    Each face is split into ``divisions**2`` squares and every square into
    two triangles.
    """
    if edge_len <= 0:
        raise ValueError("edge_len must be positive")
    d = int(divisions)
    if d < 1 or d != divisions:
        raise ValueError("divisions must be a positive integer")

    index = {}
    verts = []
    tris = []

    def vid(key):
        if key not in index:
            index[key] = len(verts)
            verts.append(key)
        return index[key]

    # (fixed axis, fixed value, in-plane axes u, v)
    for axis in range(3):
        u_ax, v_ax = [a for a in range(3) if a != axis]
        for side in (0, d):
            for i in range(d):
                for j in range(d):
                    quad = []
                    for di, dj in ((0, 0), (1, 0), (1, 1), (0, 1)):
                        key = [0, 0, 0]
                        key[axis] = side
                        key[u_ax] = i + di
                        key[v_ax] = j + dj
                        quad.append(vid(tuple(key)))
                    tris.append((quad[0], quad[1], quad[2]))
                    tris.append((quad[0], quad[2], quad[3]))
    lattice = np.array(verts, dtype=float)
    coords = (lattice / d - 0.5) * edge_len
    return Mesh.from_arrays(coords, np.array(tris), name=f"cube_{edge_len}_{d}")


def gen_icosphere(diameter, subdivisions):
    """Geodesic sphere from a subdivided regular icosahedron."""
    if diameter <= 0:
        raise ValueError("diameter must be positive")
    s = int(subdivisions)
    if s < 0 or s != subdivisions:
        raise ValueError("subdivisions must be a non-negative integer")
    phi = (1.0 + np.sqrt(5.0)) / 2.0
    base = []
    for a in (-1.0, 1.0):
        for b in (-phi, phi):
            base += [(0.0, a, b), (a, b, 0.0), (b, 0.0, a)]
    verts = [np.array(v) / np.linalg.norm(v) for v in base]
    tris = [tuple(t) for t in ConvexHull(np.array(verts)).simplices]

    for _ in range(s):
        cache = {}

        def midpoint(a, b):
            key = _edge_key(a, b)
            if key not in cache:
                m = verts[a] + verts[b]
                cache[key] = len(verts)
                verts.append(m / np.linalg.norm(m))
            return cache[key]

        new = []
        for a, b, c in tris:
            ab, bc, ca = midpoint(a, b), midpoint(b, c), midpoint(c, a)
            new += [(a, ab, ca), (b, bc, ab), (c, ca, bc), (ab, bc, ca)]
        tris = new
    coords = np.array(verts) * (diameter / 2.0)
    return Mesh.from_arrays(coords, np.array(tris),
                            name=f"icosphere_{diameter}_{s}")


def gen_tetrahedron(scale=1.0):
    v = np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1]], float) * scale
    return Mesh.from_arrays(v, [[0, 2, 1], [0, 1, 3], [0, 3, 2], [1, 2, 3]],
                            name="tetrahedron")


# --------------------------------------------------------------------------
# quality report

@dataclass(frozen=True)
class MeshQualityReport:
    min_edge: float
    max_edge: float
    mean_edge: float
    wavelength: float
    min_edge_per_wavelength: float
    max_edge_per_wavelength: float
    mean_edge_per_wavelength: float
    n_triangles: int
    n_edges: int

    def rows(self):
        return [(k, getattr(self, k)) for k in self.__dataclass_fields__]

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["metric", "value"])
            for k, v in self.rows():
                w.writerow([k, repr(v)])


def mesh_quality(mesh, k0):
    if k0 <= 0:
        raise ValueError("k0 must be positive")
    lengths = mesh.edge_lengths()
    lam = 2.0 * np.pi / k0
    return MeshQualityReport(
        min_edge=float(lengths.min()),
        max_edge=float(lengths.max()),
        mean_edge=float(lengths.mean()),
        wavelength=float(lam),
        min_edge_per_wavelength=float(lengths.min() / lam),
        max_edge_per_wavelength=float(lengths.max() / lam),
        mean_edge_per_wavelength=float(lengths.mean() / lam),
        n_triangles=mesh.n_triangles,
        n_edges=mesh.n_edges,
    )
