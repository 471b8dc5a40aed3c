"""Far fields, radar cross section, the Mie reference and matrix
diagnostics."""

import csv
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import special

from .constants import C0, Z0
from .excitation import spherical_unit_vectors
from .quadrature import map_points, triangle_rule

ERROR_FLOOR_DB = -200.0


@dataclass
class FarFieldSet:
    """Scattered far field with ``exp(-j k r) / r`` removed.

    Attributes
    ----------
    theta, phi : ndarray
        Observation angles in radians.
    e_theta, e_phi : ndarray (complex)
        Field components in V.
    meta : dict
        Free-form run description (formulation, alpha, frequency, ...).
    """

    theta: np.ndarray
    phi: np.ndarray
    e_theta: np.ndarray
    e_phi: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.theta = np.asarray(self.theta, float)
        self.phi = np.asarray(self.phi, float)
        self.e_theta = np.asarray(self.e_theta, complex)
        self.e_phi = np.asarray(self.e_phi, complex)
        if self.theta.size == 0:
            raise ValueError("empty direction list")
        if not (self.theta.shape == self.phi.shape == self.e_theta.shape == self.e_phi.shape):
            raise ValueError("direction and field arrays must have equal shapes")

    def __len__(self):
        return self.theta.size

    def vector(self):
        return np.concatenate([self.e_theta, self.e_phi])

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["theta_deg", "phi_deg", "re_Etheta", "im_Etheta", "re_Ephi", "im_Ephi"])
            for t, p, et, ep in zip(np.degrees(self.theta), np.degrees(self.phi),
                                    self.e_theta, self.e_phi):
                w.writerow([f"{t:.10g}", f"{p:.10g}", repr(et.real), repr(et.imag),
                            repr(ep.real), repr(ep.imag)])


def direction_grid(step_deg=10.0):
    """Uniform (theta, phi) grid including both poles once.

    The default 10 degree step gives 17 * 36 + 2 = 614 directions.
    """
    n_t = int(round(180.0 / step_deg))
    n_p = int(round(360.0 / step_deg))
    if abs(n_t * step_deg - 180.0) > 1e-9 or abs(n_p * step_deg - 360.0) > 1e-9:
        raise ValueError("step must divide 180 degrees")
    th = np.radians(np.arange(1, n_t) * step_deg)
    ph = np.radians(np.arange(n_p) * step_deg)
    tt, pp = np.meshgrid(th, ph, indexing="ij")
    theta = np.concatenate([[0.0], tt.ravel(), [math.pi]])
    phi = np.concatenate([[0.0], pp.ravel(), [0.0]])
    return theta, phi


def _current_samples(basis, coeffs, bary):
    """Current density at the rule points of every triangle, (F, q, 3)."""
    mesh = basis.mesh
    pts = map_points(mesh.corners(), bary)
    coef = basis.slot_coefficients() * np.asarray(coeffs)[mesh.tri_edges]   # (F, 3)
    # J(r) = sum_i c_i (r - p_i) = (sum_i c_i) r - sum_i c_i p_i
    csum = coef.sum(axis=1)
    cp = np.einsum("fi,fid->fd", coef, mesh.corners())
    return pts, csum[:, None, None] * pts - cp[:, None, :]


def far_field(basis, i, v, k0, theta, phi, order=3, meta=None):
    """Radiated far field of the electric (``i``) and magnetic (``v``) RWG
    currents.

    With ``N`` and ``L`` the radiation vectors of J and M,

        E_theta = -j k / (4 pi) (Z0 N_theta + L_phi)
        E_phi   =  j k / (4 pi) (L_theta - Z0 N_phi)
    """
    n = basis.n
    i = np.asarray(i, dtype=complex)
    v = np.zeros(n, dtype=complex) if v is None else np.asarray(v, dtype=complex)
    if i.shape != (n,) or v.shape != (n,):
        raise ValueError(f"coefficient vectors must have length {n}")
    bary, w = triangle_rule(order)
    mesh = basis.mesh
    pts, J = _current_samples(basis, i, bary)
    _, M = _current_samples(basis, v, bary)
    wts = (w[None, :] * mesh.areas[:, None]).ravel()
    pts = pts.reshape(-1, 3)
    r_hat, t_hat, p_hat = spherical_unit_vectors(theta, phi)
    phase = np.exp(1j * k0 * (r_hat @ pts.T)) * wts[None, :]     # (D, F*q)
    N = phase @ J.reshape(-1, 3)
    L = phase @ M.reshape(-1, 3)
    n_t = np.einsum("dk,dk->d", N, t_hat)
    n_p = np.einsum("dk,dk->d", N, p_hat)
    l_t = np.einsum("dk,dk->d", L, t_hat)
    l_p = np.einsum("dk,dk->d", L, p_hat)
    c = 1j * k0 / (4.0 * math.pi)
    return FarFieldSet(theta, phi, -c * (Z0 * n_t + l_p), c * (l_t - Z0 * n_p), dict(meta or {}))


def bistatic_rcs(ff, amplitude=1.0):
    """Bistatic cross section in dBsm, ``10 log10(4 pi |E|^2 / |E0|^2)``."""
    amp = abs(getattr(amplitude, "amplitude", amplitude))
    if amp == 0:
        raise ValueError("incident amplitude must be nonzero")
    sigma = 4.0 * math.pi * (np.abs(ff.e_theta) ** 2 + np.abs(ff.e_phi) ** 2) / amp ** 2
    with np.errstate(divide="ignore"):
        return 10.0 * np.log10(sigma)


def write_rcs_csv(path, ff, rcs_db):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["theta_deg", "phi_deg", "sigma_dbsm"])
        for t, p, s in zip(np.degrees(ff.theta), np.degrees(ff.phi), rcs_db):
            w.writerow([f"{t:.10g}", f"{p:.10g}", repr(float(s))])


def farfield_error_db(test, ref):
    """``20 log10(||test - ref|| / ||ref||)`` over all directions and both
    polarizations, floored at -200 dB."""
    if test.theta.shape != ref.theta.shape or not (
            np.allclose(test.theta, ref.theta) and np.allclose(test.phi, ref.phi)):
        raise ValueError("far fields were sampled on different direction grids")
    num = np.linalg.norm(test.vector() - ref.vector())
    den = np.linalg.norm(ref.vector())
    if den == 0:
        raise ValueError("reference far field is zero")
    if num == 0:
        return ERROR_FLOOR_DB
    return max(ERROR_FLOOR_DB, 20.0 * math.log10(num / den))


# ---------------------------------------------------------------------------
# Mie series of a PEC sphere

def mie_order(ka):
    """Truncation ``ceil(x + 4 x^(1/3) + 2)``."""
    return int(math.ceil(ka + 4.0 * ka ** (1.0 / 3.0) + 2.0))


def mie_coefficients(ka, n_max):
    """PEC sphere coefficients ``a_n = psi_n'/xi_n'`` and ``b_n = psi_n/xi_n``
    (Riccati-Bessel functions, outgoing ``xi`` for an ``exp(-j w t)`` clock)."""
    n = np.arange(1, n_max + 1)
    j = special.spherical_jn(n, ka)
    jd = special.spherical_jn(n, ka, derivative=True)
    y = special.spherical_yn(n, ka)
    yd = special.spherical_yn(n, ka, derivative=True)
    psi = ka * j
    psid = j + ka * jd
    xi = ka * (j + 1j * y)
    xid = (j + 1j * y) + ka * (jd + 1j * yd)
    return psid / xid, psi / xi


def _angular(n_max, mu):
    """pi_n and tau_n for n = 1..n_max at cos(theta) = mu."""
    mu = np.asarray(mu, float)
    pi = np.zeros((n_max + 1,) + mu.shape)
    tau = np.zeros_like(pi)
    pi[1] = 1.0
    if n_max >= 2:
        pi[2] = 3.0 * mu
    for n in range(3, n_max + 1):
        pi[n] = ((2 * n - 1) * mu * pi[n - 1] - n * pi[n - 2]) / (n - 1)
    for n in range(1, n_max + 1):
        tau[n] = n * mu * pi[n] - (n + 1) * (pi[n - 1] if n > 1 else 0.0)
    return pi[1:], tau[1:]


def mie_amplitudes(ka, mu, n_max=None):
    """Scattering amplitudes S1, S2 (``exp(-j w t)`` convention)."""
    n_max = n_max or mie_order(ka)
    a, b = mie_coefficients(ka, n_max)
    pi, tau = _angular(n_max, mu)
    n = np.arange(1, n_max + 1)
    f = ((2 * n + 1) / (n * (n + 1)))[:, None]
    shape = np.shape(mu)
    pi = pi.reshape(n_max, -1)
    tau = tau.reshape(n_max, -1)
    s1 = np.sum(f * (a[:, None] * pi + b[:, None] * tau), axis=0).reshape(shape)
    s2 = np.sum(f * (a[:, None] * tau + b[:, None] * pi), axis=0).reshape(shape)
    return s1, s2


def mie_far_field(diameter, k0, pw, theta, phi, n_max=None, meta=None):
    """Mie far field of a PEC sphere centred at the origin.

    The series is evaluated in the frame of the incident wave (propagation
    along z', polarization along x') and rotated back.  Fields use the
    ``exp(+j w t)`` clock of the solver, i.e. the complex conjugate of the
    textbook amplitudes.
    """
    ka = k0 * diameter / 2.0
    r_hat, t_hat, p_hat = spherical_unit_vectors(theta, phi)
    z1 = pw.direction
    x1 = pw.polarization
    y1 = np.cross(z1, x1)
    mu = np.clip(r_hat @ z1, -1.0, 1.0)
    ph1 = np.arctan2(r_hat @ y1, r_hat @ x1)
    s1, s2 = mie_amplitudes(ka, mu, n_max)
    # exp(-iwt): E_th' = exp(ikr)/(-ikr) cos(phi') S2, E_ph' = -exp(ikr)/(-ikr) sin(phi') S1
    et1 = np.conj(np.cos(ph1) * s2 / (-1j * k0))
    ep1 = np.conj(-np.sin(ph1) * s1 / (-1j * k0))
    et1 = et1 * pw.amplitude
    ep1 = ep1 * pw.amplitude
    st1 = np.sqrt(np.maximum(0.0, 1.0 - mu * mu))
    th1_hat = (mu * np.cos(ph1))[:, None] * x1 + (mu * np.sin(ph1))[:, None] * y1 \
        - st1[:, None] * z1
    ph1_hat = -np.sin(ph1)[:, None] * x1 + np.cos(ph1)[:, None] * y1
    vec = et1[:, None] * th1_hat + ep1[:, None] * ph1_hat
    meta = dict(meta or {})
    meta.setdefault("formulation", "Mie")
    return FarFieldSet(theta, phi, np.einsum("dk,dk->d", vec, t_hat),
                       np.einsum("dk,dk->d", vec, p_hat), meta)


def mie_extinction(ka, n_max=None):
    """Extinction efficiency from the coefficient sum."""
    n_max = n_max or mie_order(ka)
    a, b = mie_coefficients(ka, n_max)
    n = np.arange(1, n_max + 1)
    return 2.0 / ka ** 2 * float(np.sum((2 * n + 1) * (a + b).real))


# ---------------------------------------------------------------------------
# matrix diagnostics

@dataclass
class SpectrumReport:
    """Singular values normalized to the largest one."""

    values: np.ndarray
    condition: float

    @property
    def size(self):
        return self.values.size

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["index", "sigma_normalized"])
            for i, s in enumerate(self.values):
                w.writerow([i, repr(float(s))])


def _singular_values(dense):
    s = np.linalg.svd(np.asarray(dense), compute_uv=False)
    return np.sort(s)[::-1]


def _condition_from(s):
    if s[0] == 0 or s[-1] <= s[0] * np.finfo(float).eps * 0.5:
        return math.inf
    return float(s[0] / s[-1])


def condition_number(dense):
    """``sigma_max / sigma_min``; infinite for a numerically singular matrix."""
    return _condition_from(_singular_values(dense))


def singular_spectrum(dense):
    s = _singular_values(dense)
    if s[0] == 0:
        raise ValueError("zero matrix")
    return SpectrumReport(s / s[0], _condition_from(s))


# ---------------------------------------------------------------------------
# interior resonances of a spherical cavity

def _bisect(f, a, b, rtol):
    fa = f(a)
    while (b - a) > rtol * abs(b):
        m = 0.5 * (a + b)
        fm = f(m)
        if (fm > 0) == (fa > 0):
            a, fa = m, fm
        else:
            b = m
    return 0.5 * (a + b)


def _roots(f, count, x_max, rtol=1e-10, step=0.01):
    xs = np.arange(step, x_max, step)
    vals = f(xs)
    out = []
    for i in np.flatnonzero(np.sign(vals[:-1]) * np.sign(vals[1:]) < 0):
        out.append(_bisect(f, xs[i], xs[i + 1], rtol))
        if len(out) >= count:
            break
    return out


def cavity_roots(count, kind="all"):
    """Sorted ``(x, mode, n)`` tuples of cavity eigenvalues ``x = k a``.

    TE modes are roots of ``j_n(x)``, TM modes roots of ``d/dx[x j_n(x)]``.
    """
    found = []
    x_max = 5.0 + 2.0 * count
    n = 1
    while True:
        te = _roots(lambda x: special.spherical_jn(n, x), count, x_max)
        tm = _roots(lambda x: special.spherical_jn(n, x) + x * special.spherical_jn(n, x, True),
                    count, x_max)
        if not te and not tm:
            break
        if kind in ("all", "TE"):
            found += [(x, "TE", n) for x in te]
        if kind in ("all", "TM"):
            found += [(x, "TM", n) for x in tm]
        n += 1
    found.sort()
    return found[:count]


def cavity_resonances(diameter, count, c0=C0):
    """First ``count`` distinct interior resonance frequencies (Hz).

    Degenerate roots of different orders are listed once per (mode, n).
    """
    return [x * c0 / (math.pi * diameter) for x, _, _ in cavity_roots(count)]
