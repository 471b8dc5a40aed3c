"""Hot loops of the dense operator assembly (numba and numpy variants).

Both variants compute *slot* integrals between an observation triangle P
(local vertex i, free vertex p_i) and a source triangle Q (local vertex j,
free vertex q_j):

    tv[P, i, Q, j] = int_P int_Q (r - p_i).(r' - q_j) G ds' ds
    t0[P, Q]       = int_P int_Q G ds' ds
    kb[P, i, Q, j] = int_P int_Q (r - p_i).(grad G x (r' - q_j)) ds' ds
    kn[P, i, Q, j] = int_P int_Q (n_P x (r - p_i)).(grad G x (r' - q_j)) ds' ds

The inner (source) integral is first reduced at every outer point to

    g  = int_Q G,            gy = int_Q G (r' - c_Q),
    vb = int_Q grad G,       ub = int_Q grad G x (r' - c_Q)

and then contracted against the outer test functions.  Near pairs replace
the static part of those inner integrals by the closed forms of
:mod:`csie.potentials`.
"""

import math

import numpy as np

from ._accel import njit
from .potentials import _potentials_numpy, tri_potentials_point

FOUR_PI = 4.0 * math.pi
SERIES_CUT = 0.1


# ---------------------------------------------------------------------------
# kernel functions of R (scalar, numba)

@njit
def _g_full(k, r):
    return complex(math.cos(k * r), -math.sin(k * r)) / (FOUR_PI * r)


@njit
def _h_full(k, r):
    # grad G = (r - r') * h
    e = complex(math.cos(k * r), -math.sin(k * r))
    return -(1.0 + 1j * k * r) * e / (FOUR_PI * r * r * r)


@njit
def _g_smooth(k, r, terms):
    # G minus 1/(4 pi R) and (terms == 2) -k^2 R/(8 pi)
    x = 1j * k * r
    if k * r < SERIES_CUT:
        # (exp(-x) - 1)/x = -1 + x/2 - x^2/6 + ...
        s = 0.0 + 0.0j
        term = -1.0 + 0.0j
        for n in range(1, 11):
            if n != 2 or terms == 1:
                s += term
            term = -term * x / (n + 1)
        return 1j * k * s / FOUR_PI
    e = complex(math.cos(k * r), -math.sin(k * r))
    val = (e - 1.0) / (FOUR_PI * r)
    if terms == 2:
        val += k * k * r / (2.0 * FOUR_PI)
    return val


@njit
def _h_smooth(k, r, terms):
    # h minus its first ``terms`` Taylor terms: -1/(4 pi R^3) and
    # (terms == 2) -k^2/(8 pi R)
    x = 1j * k * r
    if k * r < SERIES_CUT:
        # 1 - (1 + x) exp(-x) = sum_{n>=2} (-1)^n (n-1) x^n / n!
        s = 0.0 + 0.0j
        xn = x * x / 2.0
        for n in range(2, 13):
            if n >= terms + 1:
                s += (n - 1) * xn if n % 2 == 0 else -(n - 1) * xn
            xn = xn * x / (n + 1)
        return s / (FOUR_PI * r * r * r)
    e = complex(math.cos(k * r), -math.sin(k * r))
    val = (1.0 - (1.0 + x) * e) / (FOUR_PI * r * r * r)
    if terms == 2:
        val += k * k / (2.0 * FOUR_PI * r)
    return val


# ---------------------------------------------------------------------------
# numba path

@njit
def _contract(out_tv, out_t0, out_kb, out_kn, ci, qi_, xo, wo, corners_p,
              normal_p, corners_q, cq, g, gy, vb, ub):
    """Accumulate slot integrals of one (P, Q) pair from inner integrals."""
    nq = xo.shape[0]
    for a in range(nq):
        wa = wo[a]
        out_t0[ci, qi_] += wa * g[a]
        for i in range(3):
            d0 = xo[a, 0] - corners_p[i, 0]
            d1 = xo[a, 1] - corners_p[i, 1]
            d2 = xo[a, 2] - corners_p[i, 2]
            # n x (r - p_i)
            m0 = normal_p[1] * d2 - normal_p[2] * d1
            m1 = normal_p[2] * d0 - normal_p[0] * d2
            m2 = normal_p[0] * d1 - normal_p[1] * d0
            dgy = d0 * gy[a, 0] + d1 * gy[a, 1] + d2 * gy[a, 2]
            dub = d0 * ub[a, 0] + d1 * ub[a, 1] + d2 * ub[a, 2]
            mub = m0 * ub[a, 0] + m1 * ub[a, 1] + m2 * ub[a, 2]
            # d x vb and m x vb
            dv0 = d1 * vb[a, 2] - d2 * vb[a, 1]
            dv1 = d2 * vb[a, 0] - d0 * vb[a, 2]
            dv2 = d0 * vb[a, 1] - d1 * vb[a, 0]
            mv0 = m1 * vb[a, 2] - m2 * vb[a, 1]
            mv1 = m2 * vb[a, 0] - m0 * vb[a, 2]
            mv2 = m0 * vb[a, 1] - m1 * vb[a, 0]
            for j in range(3):
                q0 = corners_q[j, 0] - cq[0]
                q1 = corners_q[j, 1] - cq[1]
                q2 = corners_q[j, 2] - cq[2]
                dq = d0 * q0 + d1 * q1 + d2 * q2
                out_tv[ci, i, qi_, j] += wa * (dgy - dq * g[a])
                out_kb[ci, i, qi_, j] += wa * (dub - (q0 * dv0 + q1 * dv1 + q2 * dv2))
                out_kn[ci, i, qi_, j] += wa * (mub - (q0 * mv0 + q1 * mv1 + q2 * mv2))


@njit
def far_slots_nb(k, rows, xo, wo, xi, wi, corners, normals, centroids,
                 tv, t0, kb, kn):
    nq_o = xo.shape[1]
    nq_i = xi.shape[1]
    nf = xi.shape[0]
    g = np.zeros(nq_o, dtype=np.complex128)
    gy = np.zeros((nq_o, 3), dtype=np.complex128)
    vb = np.zeros((nq_o, 3), dtype=np.complex128)
    ub = np.zeros((nq_o, 3), dtype=np.complex128)
    for ci in range(rows.shape[0]):
        p = rows[ci]
        for q in range(nf):
            cq = centroids[q]
            for a in range(nq_o):
                g[a] = 0.0
                for d in range(3):
                    gy[a, d] = 0.0
                    vb[a, d] = 0.0
                    ub[a, d] = 0.0
                x0 = xo[p, a, 0]
                x1 = xo[p, a, 1]
                x2 = xo[p, a, 2]
                for b in range(nq_i):
                    y0 = xi[q, b, 0] - cq[0]
                    y1 = xi[q, b, 1] - cq[1]
                    y2 = xi[q, b, 2] - cq[2]
                    r0 = x0 - xi[q, b, 0]
                    r1 = x1 - xi[q, b, 1]
                    r2 = x2 - xi[q, b, 2]
                    rr = math.sqrt(r0 * r0 + r1 * r1 + r2 * r2)
                    if rr == 0.0:
                        # coincident points only occur in near pairs,
                        # which are recomputed afterwards
                        continue
                    wb = wi[q, b]
                    gv = _g_full(k, rr) * wb
                    hv = _h_full(k, rr) * wb
                    g[a] += gv
                    gy[a, 0] += gv * y0
                    gy[a, 1] += gv * y1
                    gy[a, 2] += gv * y2
                    vb[a, 0] += hv * r0
                    vb[a, 1] += hv * r1
                    vb[a, 2] += hv * r2
                    ub[a, 0] += hv * (r1 * y2 - r2 * y1)
                    ub[a, 1] += hv * (r2 * y0 - r0 * y2)
                    ub[a, 2] += hv * (r0 * y1 - r1 * y0)
            _contract(tv, t0, kb, kn, ci, q, xo[p], wo[p], corners[p],
                      normals[p], corners[q], cq, g, gy, vb, ub)


@njit
def near_slots_nb(k, terms, pairs, row_of, xo, wo, xi, wi, corners, normals,
                  centroids, tv, t0, kb, kn):
    # xo, wo: outer points and weights per pair, (n, a, 3) and (n, a)
    nq_o = xo.shape[1]
    nq_i = xi.shape[1]
    g = np.zeros(nq_o, dtype=np.complex128)
    gy = np.zeros((nq_o, 3), dtype=np.complex128)
    vb = np.zeros((nq_o, 3), dtype=np.complex128)
    ub = np.zeros((nq_o, 3), dtype=np.complex128)
    s1 = np.zeros(3)
    grad = np.zeros(3)
    dist = np.zeros(4)
    c2 = -k * k / (2.0 * FOUR_PI)
    for n in range(pairs.shape[0]):
        p = pairs[n, 0]
        q = pairs[n, 1]
        ci = row_of[n]
        cq = centroids[q]
        same = p == q
        for i in range(3):
            t0[ci, q] = 0.0
            for j in range(3):
                tv[ci, i, q, j] = 0.0
                kb[ci, i, q, j] = 0.0
                kn[ci, i, q, j] = 0.0
        for a in range(nq_o):
            x0 = xo[n, a, 0]
            x1 = xo[n, a, 1]
            x2 = xo[n, a, 2]
            s0 = tri_potentials_point(xo[n, a], corners[q], normals[q], s1, grad, dist)
            g[a] = s0 / FOUR_PI
            for d in range(3):
                gy[a, d] = (s1[d] - s0 * cq[d]) / FOUR_PI
            if terms == 2:
                # -k^2/(8 pi) int R and int R (r' - c_Q)
                g[a] += c2 * dist[0]
                gy[a, 0] += c2 * (dist[1] + (x0 - cq[0]) * dist[0])
                gy[a, 1] += c2 * (dist[2] + (x1 - cq[1]) * dist[0])
                gy[a, 2] += c2 * (dist[3] + (x2 - cq[2]) * dist[0])
            # static grad G x (r' - c_Q) integrates to grad s0 x (r - c_Q)
            gs0 = grad[0] / FOUR_PI
            gs1 = grad[1] / FOUR_PI
            gs2 = grad[2] / FOUR_PI
            e0 = x0 - cq[0]
            e1 = x1 - cq[1]
            e2 = x2 - cq[2]
            if terms == 2:
                # -k^2/(8 pi) grad int R = -k^2/(8 pi) (r s0 - s1)
                gs0 += c2 * (x0 * s0 - s1[0])
                gs1 += c2 * (x1 * s0 - s1[1])
                gs2 += c2 * (x2 * s0 - s1[2])
            vb[a, 0] = gs0
            vb[a, 1] = gs1
            vb[a, 2] = gs2
            ub[a, 0] = gs1 * e2 - gs2 * e1
            ub[a, 1] = gs2 * e0 - gs0 * e2
            ub[a, 2] = gs0 * e1 - gs1 * e0
            for b in range(nq_i):
                y0 = xi[q, b, 0] - cq[0]
                y1 = xi[q, b, 1] - cq[1]
                y2 = xi[q, b, 2] - cq[2]
                r0 = x0 - xi[q, b, 0]
                r1 = x1 - xi[q, b, 1]
                r2 = x2 - xi[q, b, 2]
                rr = math.sqrt(r0 * r0 + r1 * r1 + r2 * r2)
                wb = wi[q, b]
                if rr == 0.0:
                    gv = -1j * k / FOUR_PI * wb
                    hv = 0.0j
                else:
                    gv = _g_smooth(k, rr, terms) * wb
                    hv = _h_smooth(k, rr, terms) * wb
                g[a] += gv
                gy[a, 0] += gv * y0
                gy[a, 1] += gv * y1
                gy[a, 2] += gv * y2
                vb[a, 0] += hv * r0
                vb[a, 1] += hv * r1
                vb[a, 2] += hv * r2
                ub[a, 0] += hv * (r1 * y2 - r2 * y1)
                ub[a, 1] += hv * (r2 * y0 - r0 * y2)
                ub[a, 2] += hv * (r0 * y1 - r1 * y0)
        _contract(tv, t0, kb, kn, ci, q, xo[n], wo[n], corners[p], normals[p],
                  corners[q], cq, g, gy, vb, ub)
        if same:
            # coplanar triple products vanish identically
            for i in range(3):
                for j in range(3):
                    kb[ci, i, q, j] = 0.0
                    kn[ci, i, q, j] = 0.0


# ---------------------------------------------------------------------------
# numpy path

def _g_smooth_np(k, r, terms):
    x = 1j * k * r
    out = np.empty(r.shape, dtype=complex)
    small = k * r < SERIES_CUT
    xs = x[small]
    s = np.zeros(xs.shape, dtype=complex)
    term = -np.ones(xs.shape, dtype=complex)
    for n in range(1, 11):
        if n != 2 or terms == 1:
            s += term
        term = -term * xs / (n + 1)
    out[small] = 1j * k * s / FOUR_PI
    rl = r[~small]
    val = (np.exp(-1j * k * rl) - 1.0) / (FOUR_PI * rl)
    if terms == 2:
        val += k * k * rl / (2.0 * FOUR_PI)
    out[~small] = val
    return out


def _h_smooth_np(k, r, terms):
    x = 1j * k * r
    out = np.empty(r.shape, dtype=complex)
    small = k * r < SERIES_CUT
    xs = x[small]
    s = np.zeros(xs.shape, dtype=complex)
    xn = xs * xs / 2.0
    for n in range(2, 13):
        if n >= terms + 1:
            s += (n - 1) * xn if n % 2 == 0 else -(n - 1) * xn
        xn = xn * xs / (n + 1)
    rs = r[small]
    out[small] = s / (FOUR_PI * rs ** 3)
    rl = r[~small]
    xl = x[~small]
    val = (1.0 - (1.0 + xl) * np.exp(-xl)) / (FOUR_PI * rl ** 3)
    if terms == 2:
        val += k * k / (2.0 * FOUR_PI * rl)
    out[~small] = val
    return out


def _contract_np(xo, wo, cp, np_, cq_corners, cq, g, gy, vb, ub):
    """Vectorised contraction.

    xo (..., a, 3), wo (..., a), cp (..., 3, 3) corners of P, np_ (..., 3),
    cq_corners (..., 3, 3), cq (..., 3); inner integrals g (..., a),
    gy/vb/ub (..., a, 3).  Returns tv, t0, kb, kn with shapes
    (..., 3, 3), (...), (..., 3, 3), (..., 3, 3).
    """
    d = xo[..., :, None, :] - cp[..., None, :, :]           # (..., a, i, 3)
    m = np.cross(np_[..., None, None, :], d)
    qv = cq_corners - cq[..., None, :]                       # (..., j, 3)
    t0 = np.einsum("...a,...a->...", wo, g)
    dgy = np.einsum("...aid,...ad->...ai", d, gy)
    dq = np.einsum("...aid,...jd->...aij", d, qv)
    tv = np.einsum("...a,...ai->...i", wo, dgy)[..., :, None] \
        - np.einsum("...a,...aij,...a->...ij", wo, dq, g)
    dub = np.einsum("...aid,...ad->...ai", d, ub)
    mub = np.einsum("...aid,...ad->...ai", m, ub)
    dv = np.cross(d, vb[..., :, None, :])
    mv = np.cross(m, vb[..., :, None, :])
    kb = np.einsum("...a,...ai->...i", wo, dub)[..., :, None] \
        - np.einsum("...a,...aid,...jd->...ij", wo, dv, qv)
    kn = np.einsum("...a,...ai->...i", wo, mub)[..., :, None] \
        - np.einsum("...a,...aid,...jd->...ij", wo, mv, qv)
    return tv, t0, kb, kn


def far_slots_np(k, rows, xo, wo, xi, wi, corners, normals, centroids,
                 tv, t0, kb, kn):
    xo_c = xo[rows][:, None]                  # (c, 1, a, 3)
    rvec = xo_c[:, :, :, None, :] - xi[None, :, None, :, :]   # (c, F, a, b, 3)
    rr = np.sqrt(np.einsum("...d,...d->...", rvec, rvec))
    # coincident points only occur in near pairs, recomputed afterwards
    zero = rr == 0.0
    rr[zero] = 1.0
    e = np.exp(-1j * k * rr)
    gk = e / (FOUR_PI * rr) * wi[None, :, None, :]
    hk = -(1.0 + 1j * k * rr) * e / (FOUR_PI * rr ** 3) * wi[None, :, None, :]
    gk[zero] = 0.0
    hk[zero] = 0.0
    y = xi - centroids[:, None, :]            # (F, b, 3)
    g = gk.sum(axis=-1)
    gy = np.einsum("cfab,fbd->cfad", gk, y)
    vb = np.einsum("cfab,cfabd->cfad", hk, rvec)
    ub = np.einsum("cfab,cfabd->cfad", hk, np.cross(rvec, y[None, :, None]))
    r_tv, r_t0, r_kb, r_kn = _contract_np(
        xo_c, wo[rows][:, None], corners[rows][:, None], normals[rows][:, None],
        corners[None], centroids[None], g, gy, vb, ub)
    tv[:] = r_tv.transpose(0, 2, 1, 3)
    t0[:] = r_t0
    kb[:] = r_kb.transpose(0, 2, 1, 3)
    kn[:] = r_kn.transpose(0, 2, 1, 3)


def near_slots_np(k, terms, pairs, row_of, xo, wo, xi, wi, corners, normals,
                  centroids, tv, t0, kb, kn):
    if len(pairs) == 0:
        return
    p, q = pairs[:, 0], pairs[:, 1]
    x = xo                                     # (n, a, 3) per-pair outer points
    cq = centroids[q]                          # (n, 3)
    s0, s1, grad, sr, vr = _potentials_numpy(x, corners[q][:, None], normals[q][:, None],
                                             distance=True)
    g = s0 / FOUR_PI
    gy = (s1 - s0[..., None] * cq[:, None, :]) / FOUR_PI
    vb = grad / FOUR_PI
    if terms == 2:
        c2 = -k * k / (2.0 * FOUR_PI)
        g = g + c2 * sr
        gy = gy + c2 * (vr + (x - cq[:, None, :]) * sr[..., None])
        vb = vb - k * k / (2.0 * FOUR_PI) * (x * s0[..., None] - s1)
    ub = np.cross(vb, x - cq[:, None, :])
    rvec = x[:, :, None, :] - xi[q][:, None, :, :]          # (n, a, b, 3)
    rr = np.sqrt(np.einsum("...d,...d->...", rvec, rvec))
    zero = rr == 0.0
    rs = np.where(zero, 1.0, rr)
    wb = wi[q][:, None, :]
    gk = np.where(zero, -1j * k / FOUR_PI, _g_smooth_np(k, rs, terms)) * wb
    hk = np.where(zero, 0.0, _h_smooth_np(k, rs, terms)) * wb
    y = xi[q] - cq[:, None, :]                              # (n, b, 3)
    g = g + gk.sum(axis=-1)
    gy = gy + np.einsum("nab,nbd->nad", gk, y)
    vb = vb + np.einsum("nab,nabd->nad", hk, rvec)
    ub = ub + np.einsum("nab,nabd->nad", hk, np.cross(rvec, y[:, None]))
    r_tv, r_t0, r_kb, r_kn = _contract_np(x, wo, corners[p], normals[p],
                                          corners[q], cq, g, gy, vb, ub)
    same = p == q
    r_kb[same] = 0.0
    r_kn[same] = 0.0
    tv[row_of, :, q, :] = r_tv
    t0[row_of, q] = r_t0
    kb[row_of, :, q, :] = r_kb
    kn[row_of, :, q, :] = r_kn
