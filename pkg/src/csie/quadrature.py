"""Symmetric Gauss rules on triangles (Dunavant).

Rules are given in barycentric coordinates with weights normalised to sum to
one, so that ``sum(w * f(x)) * area`` approximates the surface integral.
"""

import numpy as np

SUPPORTED_ORDERS = (1, 3, 6, 7, 12)

# polynomial degree integrated exactly by each rule
DEGREE = {1: 1, 3: 2, 6: 4, 7: 5, 12: 6}


def _perm3(a, w):
    b = 1.0 - 2.0 * a
    return [(a, a, b), (a, b, a), (b, a, a)], [w] * 3


def _perm6(a, b, w):
    c = 1.0 - a - b
    pts = [(a, b, c), (a, c, b), (b, a, c), (b, c, a), (c, a, b), (c, b, a)]
    return pts, [w] * 6


def _build(order):
    if order == 1:
        pts, wts = [(1 / 3, 1 / 3, 1 / 3)], [1.0]
    elif order == 3:
        pts, wts = _perm3(1 / 6, 1 / 3)
    elif order == 6:
        p1, w1 = _perm3(0.445948490915965, 0.223381589678011)
        p2, w2 = _perm3(0.091576213509771, 0.109951743655322)
        pts, wts = p1 + p2, w1 + w2
    elif order == 7:
        p1, w1 = _perm3(0.470142064105115, 0.132394152788506)
        p2, w2 = _perm3(0.101286507323456, 0.125939180544827)
        pts, wts = [(1 / 3, 1 / 3, 1 / 3)] + p1 + p2, [0.225] + w1 + w2
    elif order == 12:
        p1, w1 = _perm3(0.249286745170910, 0.116786275726379)
        p2, w2 = _perm3(0.063089014491502, 0.050844906370207)
        p3, w3 = _perm6(0.310352451033784, 0.053145049844817, 0.082851075618374)
        pts, wts = p1 + p2 + p3, w1 + w2 + w3
    else:
        raise ValueError(f"unsupported triangle rule {order}; "
                         f"choose from {SUPPORTED_ORDERS}")
    bary = np.array(pts, dtype=float)
    w = np.array(wts, dtype=float)
    # tabulated weights carry 15 digits; renormalise to sum exactly to one
    return bary, w / w.sum()


_CACHE = {}


def triangle_rule(order):
    """Return ``(bary, weights)`` for an ``order``-point rule.

    ``bary`` has shape (order, 3); ``weights`` sums to one.
    """
    if order not in _CACHE:
        _CACHE[order] = _build(order)
    bary, w = _CACHE[order]
    return bary.copy(), w.copy()


def map_points(tri_vertices, bary):
    """Physical quadrature points for triangles.

    tri_vertices : (..., 3, 3) corner coordinates
    bary : (q, 3)
    returns (..., q, 3)
    """
    return np.einsum("qk,...kd->...qd", bary, tri_vertices)


def gauss_legendre01(n):
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


def edge_graded_rule(n, grading=4):
    """Rule on the reference triangle clustered towards its first edge.

    Barycentric columns are (A, B, C) where A-B is the singular edge.  The
    distance-like coordinate ``x`` (0 on A-B, 1 at C) is graded as
    ``x = xi**grading`` which absorbs the logarithmic edge singularity of a
    triangle potential's gradient.
    """
    xi, wx = gauss_legendre01(n)
    y, wy = gauss_legendre01(n)
    X, Y = np.meshgrid(xi, y, indexing="ij")
    W = np.outer(wx, wy)
    x = X ** grading
    jac = grading * X ** (grading - 1) * 2.0 * (1.0 - x)
    lam_b = Y * (1.0 - x)
    lam_c = x
    lam_a = 1.0 - lam_b - lam_c
    bary = np.stack([lam_a.ravel(), lam_b.ravel(), lam_c.ravel()], axis=1)
    return bary, (W * jac).ravel()


def vertex_duffy_rule(n, grading=2):
    """Duffy-collapsed rule with the singular point at barycentric column 0.

    The radial coordinate is graded as ``rho = xi**grading``.
    """
    xi, wr = gauss_legendre01(n)
    y, wy = gauss_legendre01(n)
    X, Y = np.meshgrid(xi, y, indexing="ij")
    R = X ** grading
    W = np.outer(wr, wy) * 2.0 * R * grading * X ** (grading - 1)
    bary = np.stack([(1.0 - R).ravel(), (R * (1.0 - Y)).ravel(), (R * Y).ravel()], axis=1)
    return bary, W.ravel()


def centroid_split_rule(n, grading=4):
    """Three edge-graded rules on the sub-triangles (edge, centroid)."""
    eb, ew = edge_graded_rule(n, grading)
    g = np.full(3, 1.0 / 3.0)
    parts, weights = [], []
    for a, b in ((0, 1), (1, 2), (2, 0)):
        ea = np.zeros(3)
        ea[a] = 1.0
        eb_ = np.zeros(3)
        eb_[b] = 1.0
        corners = np.stack([ea, eb_, g])
        parts.append(eb @ corners)
        weights.append(ew / 3.0)
    return np.concatenate(parts), np.concatenate(weights)


def subdivided_rule(order, levels=1):
    """``order``-point rule repeated on 4**levels congruent sub-triangles."""
    bary, w = triangle_rule(order)
    tris = [np.eye(3)]
    for _ in range(levels):
        new = []
        for t in tris:
            a, b, c = t
            ab, bc, ca = (a + b) / 2, (b + c) / 2, (c + a) / 2
            new += [np.stack(s) for s in ((a, ab, ca), (ab, b, bc), (ca, bc, c), (ab, bc, ca))]
        tris = new
    pts = np.concatenate([bary @ t for t in tris])
    wts = np.concatenate([w / len(tris)] * len(tris))
    return pts, wts
