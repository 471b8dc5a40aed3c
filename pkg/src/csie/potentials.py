"""Closed-form static potentials of a flat triangle.

For an observation point ``r`` and a triangle ``T`` with unit normal ``n``
these routines return

* ``s0 = int_T 1/|r - r'| ds'``
* ``s1 = int_T r'/|r - r'| ds'``
* ``grad = grad_r s0``
* ``sr = int_T |r - r'| ds'`` and ``vr = int_T |r - r'| (r' - r) ds'``

using the edge-sum expressions of Wilton et al. / Graglia.  They are the
analytic part of the singularity extraction in the operator assembly.  The
normal component of ``grad`` is returned as its principal value (zero) for
points lying in the plane of the triangle.  On an edge or a vertex ``s0`` and
``s1`` take their (finite) limits; the in-plane gradient diverges there
logarithmically and only its finite part is returned.
"""

import math

import numpy as np

from . import _accel
from ._accel import njit

# |w| below this fraction of the triangle size is treated as in-plane
PLANE_TOL = 1e-12


@njit
def _edge_log(rp, rm, lp, lm, r0sq):
    # ln((R+ + l+)/(R- + l-)).  R + l is rewritten as R0^2/(R - l) where it
    # would cancel, and the conjugate form is used on the far side of the
    # edge line.
    if lp + lm > 0.0:
        num = rp + lp if lp >= 0.0 else r0sq / (rp - lp)
        den = rm + lm if lm >= 0.0 else r0sq / (rm - lm)
        return math.log(num / den)
    num = rm - lm if lm <= 0.0 else r0sq / (rm + lm)
    den = rp - lp if lp <= 0.0 else r0sq / (rp + lp)
    return math.log(num / den)


@njit
def tri_potentials_point(r, v, nrm, out_s1, out_grad, out_r):
    """Scalar kernel.  ``v`` is (3, 3) corners; returns s0 and fills
    ``out_s1``, ``out_grad`` (length 3) and ``out_r`` (length 4: ``sr``
    followed by ``vr``)."""
    size = 0.0
    for i in range(3):
        j = (i + 1) % 3
        e = math.sqrt((v[j, 0] - v[i, 0]) ** 2 + (v[j, 1] - v[i, 1]) ** 2
                      + (v[j, 2] - v[i, 2]) ** 2)
        if e > size:
            size = e
    w = (nrm[0] * (r[0] - v[0, 0]) + nrm[1] * (r[1] - v[0, 1])
         + nrm[2] * (r[2] - v[0, 2]))
    if abs(w) <= PLANE_TOL * size:
        w = 0.0
    aw = abs(w)
    rho0 = r[0] - w * nrm[0]
    rho1 = r[1] - w * nrm[1]
    rho2 = r[2] - w * nrm[2]

    s0 = 0.0
    sum_beta = 0.0
    vec0 = 0.0
    vec1 = 0.0
    vec2 = 0.0
    g0 = 0.0
    g1 = 0.0
    g2 = 0.0
    sr = 0.0
    q0 = 0.0
    q1 = 0.0
    q2 = 0.0
    for i in range(3):
        j = (i + 1) % 3
        ex = v[j, 0] - v[i, 0]
        ey = v[j, 1] - v[i, 1]
        ez = v[j, 2] - v[i, 2]
        el = math.sqrt(ex * ex + ey * ey + ez * ez)
        lx = ex / el
        ly = ey / el
        lz = ez / el
        # outward in-plane edge normal u = l x n
        ux = ly * nrm[2] - lz * nrm[1]
        uy = lz * nrm[0] - lx * nrm[2]
        uz = lx * nrm[1] - ly * nrm[0]
        ax = v[i, 0] - rho0
        ay = v[i, 1] - rho1
        az = v[i, 2] - rho2
        bx = v[j, 0] - rho0
        by = v[j, 1] - rho1
        bz = v[j, 2] - rho2
        lm = ax * lx + ay * ly + az * lz
        lp = bx * lx + by * ly + bz * lz
        p0 = ax * ux + ay * uy + az * uz
        r0sq = p0 * p0 + w * w
        rm = math.sqrt(ax * ax + ay * ay + az * az + w * w)
        rp = math.sqrt(bx * bx + by * by + bz * bz + w * w)
        if r0sq <= (PLANE_TOL * size) ** 2 and lm <= 0.0 <= lp:
            f = 0.0     # point on the edge itself; see module notes
        else:
            f = _edge_log(rp, rm, lp, lm, r0sq)
        beta = (math.atan2(p0 * lp, r0sq + aw * rp)
                - math.atan2(p0 * lm, r0sq + aw * rm))
        s0 += p0 * f
        sum_beta += beta
        t = 0.5 * (r0sq * f + lp * rp - lm * rm)
        vec0 += t * ux
        vec1 += t * uy
        vec2 += t * uz
        g0 -= f * ux
        g1 -= f * uy
        g2 -= f * uz
        # edge integrals of R and R^3 feed the distance moments
        sr += p0 * t
        t3 = 0.25 * (lp * rp ** 3 - lm * rm ** 3 + 3.0 * r0sq * t)
        q0 += t3 * ux
        q1 += t3 * uy
        q2 += t3 * uz
    s0 -= aw * sum_beta
    if w > 0.0:
        sgn = 1.0
    elif w < 0.0:
        sgn = -1.0
    else:
        sgn = 0.0
    out_s1[0] = vec0 + rho0 * s0
    out_s1[1] = vec1 + rho1 * s0
    out_s1[2] = vec2 + rho2 * s0
    out_grad[0] = g0 - sgn * sum_beta * nrm[0]
    out_grad[1] = g1 - sgn * sum_beta * nrm[1]
    out_grad[2] = g2 - sgn * sum_beta * nrm[2]
    sr = (w * w * s0 + sr) / 3.0
    out_r[0] = sr
    out_r[1] = q0 / 3.0 - w * sr * nrm[0]
    out_r[2] = q1 / 3.0 - w * sr * nrm[1]
    out_r[3] = q2 / 3.0 - w * sr * nrm[2]
    return s0


@njit
def _potentials_loop(points, corners, normals, s0, s1, grad, dist):
    for k in range(points.shape[0]):
        s0[k] = tri_potentials_point(points[k], corners[k], normals[k],
                                     s1[k], grad[k], dist[k])


def _potentials_numpy(points, corners, normals, distance=False):
    v = corners
    nrm = normals
    size = np.linalg.norm(v - np.roll(v, -1, axis=-2), axis=-1).max(axis=-1)
    w = np.einsum("...d,...d->...", nrm, points - v[..., 0, :])
    w = np.where(np.abs(w) <= PLANE_TOL * size, 0.0, w)
    aw = np.abs(w)
    rho = points - w[..., None] * nrm

    a = v - rho[..., None, :]                        # (..., 3, 3) edge start
    b = np.roll(v, -1, axis=-2) - rho[..., None, :]  # edge end
    e = b - a
    el = np.linalg.norm(e, axis=-1)
    lhat = e / el[..., None]
    u = np.cross(lhat, nrm[..., None, :])
    lm = np.einsum("...id,...id->...i", a, lhat)
    lp = np.einsum("...id,...id->...i", b, lhat)
    p0 = np.einsum("...id,...id->...i", a, u)
    w2 = (w * w)[..., None]
    r0sq = p0 * p0 + w2
    rm = np.sqrt(np.einsum("...id,...id->...i", a, a) + w2)
    rp = np.sqrt(np.einsum("...id,...id->...i", b, b) + w2)
    with np.errstate(divide="ignore", invalid="ignore"):
        a_p = np.where(lp >= 0.0, rp + lp, r0sq / (rp - lp))
        a_m = np.where(lm >= 0.0, rm + lm, r0sq / (rm - lm))
        b_m = np.where(lm <= 0.0, rm - lm, r0sq / (rm + lm))
        b_p = np.where(lp <= 0.0, rp - lp, r0sq / (rp + lp))
        f = np.where(lp + lm > 0.0, np.log(a_p / a_m), np.log(b_m / b_p))
    on_edge = (r0sq <= (PLANE_TOL * size[..., None]) ** 2) & (lm <= 0.0) & (lp >= 0.0)
    f = np.where(on_edge, 0.0, f)
    awe = aw[..., None]
    beta = np.arctan2(p0 * lp, r0sq + awe * rp) - np.arctan2(p0 * lm, r0sq + awe * rm)
    sum_beta = beta.sum(axis=-1)
    s0 = (p0 * f).sum(axis=-1) - aw * sum_beta
    t = 0.5 * (r0sq * f + lp * rp - lm * rm)
    s1 = np.einsum("...i,...id->...d", t, u) + rho * s0[..., None]
    grad = -np.einsum("...i,...id->...d", f, u) - (np.sign(w) * sum_beta)[..., None] * nrm
    if not distance:
        return s0, s1, grad
    sr = (w * w * s0 + (p0 * t).sum(axis=-1)) / 3.0
    t3 = 0.25 * (lp * rp ** 3 - lm * rm ** 3 + 3.0 * r0sq * t)
    vr = np.einsum("...i,...id->...d", t3, u) / 3.0 - (w * sr)[..., None] * nrm
    return s0, s1, grad, sr, vr


def triangle_potentials(points, corners, normals, distance=False):
    """Vectorised static potentials.

    points : (..., 3); corners : (..., 3, 3); normals : (..., 3), all
    broadcastable against each other.  Returns ``(s0, s1, grad)``, extended
    by ``(sr, vr)`` when ``distance`` is true.
    """
    points = np.asarray(points, float)
    corners = np.asarray(corners, float)
    normals = np.asarray(normals, float)
    shape = np.broadcast_shapes(points.shape[:-1], corners.shape[:-2], normals.shape[:-1])
    if not _accel.numba_enabled():
        p = np.broadcast_to(points, shape + (3,))
        c = np.broadcast_to(corners, shape + (3, 3))
        n = np.broadcast_to(normals, shape + (3,))
        return _potentials_numpy(p, c, n, distance)
    p = np.ascontiguousarray(np.broadcast_to(points, shape + (3,))).reshape(-1, 3)
    c = np.ascontiguousarray(np.broadcast_to(corners, shape + (3, 3))).reshape(-1, 3, 3)
    n = np.ascontiguousarray(np.broadcast_to(normals, shape + (3,))).reshape(-1, 3)
    s0 = np.empty(len(p))
    s1 = np.empty((len(p), 3))
    grad = np.empty((len(p), 3))
    dist = np.empty((len(p), 4))
    _potentials_loop(p, c, n, s0, s1, grad, dist)
    out = (s0.reshape(shape), s1.reshape(shape + (3,)), grad.reshape(shape + (3,)))
    if distance:
        out += (dist[:, 0].reshape(shape), dist[:, 1:].reshape(shape + (3,)))
    return out
