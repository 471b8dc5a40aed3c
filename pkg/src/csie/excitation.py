"""Plane-wave illumination and the tested right-hand sides."""

import math
from dataclasses import dataclass

import numpy as np

from .constants import EFIE_RHS_SIGN, MFIE_RHS_SIGN, Z0
from .quadrature import map_points, triangle_rule

_UNIT_TOL = 1e-12


def spherical_unit_vectors(theta, phi):
    """Return r_hat, theta_hat, phi_hat for angles in radians.

    Accepts scalars or arrays; the vectors are stacked on the last axis.
    """
    theta = np.asarray(theta, float)
    phi = np.asarray(phi, float)
    st, ct, sp_, cp = np.sin(theta), np.cos(theta), np.sin(phi), np.cos(phi)
    r_hat = np.stack([st * cp, st * sp_, ct], axis=-1)
    t_hat = np.stack([ct * cp, ct * sp_, -st], axis=-1)
    p_hat = np.stack([-sp_, cp, np.zeros_like(phi)], axis=-1)
    return r_hat, t_hat, p_hat


@dataclass(frozen=True)
class PlaneWave:
    """Incident plane wave ``E = E0 p exp(-j k0 k_hat . r)``.

    Attributes
    ----------
    direction : ndarray, shape (3,)
        Unit propagation vector ``k_hat``.
    polarization : ndarray, shape (3,)
        Unit electric polarization ``p_hat``, orthogonal to ``k_hat``.
    amplitude : complex
        ``E0`` in V/m.
    """

    direction: np.ndarray
    polarization: np.ndarray
    amplitude: complex = 1.0

    def __post_init__(self):
        k = np.asarray(self.direction, float)
        p = np.asarray(self.polarization, float)
        if k.shape != (3,) or p.shape != (3,):
            raise ValueError("direction and polarization must be 3-vectors")
        if abs(np.linalg.norm(k) - 1.0) > _UNIT_TOL or abs(np.linalg.norm(p) - 1.0) > _UNIT_TOL:
            raise ValueError("direction and polarization must be unit vectors")
        if abs(k @ p) > _UNIT_TOL:
            raise ValueError("polarization must be orthogonal to the direction")
        k.setflags(write=False)
        p.setflags(write=False)
        object.__setattr__(self, "direction", k)
        object.__setattr__(self, "polarization", p)

    @classmethod
    def from_angles(cls, theta_deg, phi_deg, pol="theta", amplitude=1.0):
        """Wave travelling along the spherical direction (theta, phi).

        ``pol`` selects ``theta_hat`` or ``phi_hat`` at that direction as
        the polarization.
        """
        r_hat, t_hat, p_hat = spherical_unit_vectors(math.radians(theta_deg),
                                                     math.radians(phi_deg))
        if pol not in ("theta", "phi"):
            raise ValueError("pol must be 'theta' or 'phi'")
        p = t_hat if pol == "theta" else p_hat
        # snap round-off so the unit checks stay exact to 1e-12
        return cls(r_hat / np.linalg.norm(r_hat), p / np.linalg.norm(p), amplitude)

    @property
    def magnetic_polarization(self):
        return np.cross(self.direction, self.polarization)


def eval_incident(pw, k0, points):
    """Incident E (V/m) and H (A/m) at ``points`` of shape (..., 3)."""
    points = np.asarray(points, float)
    phase = np.exp(-1j * k0 * (points @ pw.direction))[..., None]
    e = pw.amplitude * phase * pw.polarization
    h = (pw.amplitude / Z0) * phase * pw.magnetic_polarization
    return e, h


def _tested(basis, field, order, rotate):
    mesh = basis.mesh
    bary, w = triangle_rule(order)
    pts = map_points(mesh.corners(), bary)                       # (F, q, 3)
    vec = field(pts)                                             # (F, q, 3)
    if rotate:
        vec = np.cross(mesh.normals[:, None, :], vec)
    wts = w[None, :] * mesh.areas[:, None]
    corners = mesh.corners()
    # slot integral  int_T (r - p_i) . f  for every local vertex i
    s = np.einsum("fq,fqd->fd", wts, vec)
    m = np.einsum("fq,fqd,fqd->f", wts, pts, vec)
    slots = m[:, None] - np.einsum("fid,fd->fi", corners, s)
    coef = basis.slot_coefficients()
    out = np.zeros(basis.n, dtype=complex)
    np.add.at(out, mesh.tri_edges.ravel(), (coef * slots).ravel())
    return out


def rhs_efie(basis, pw, k0, order=7):
    """``e_m = <beta_m, E_inc>`` on the surface."""
    return EFIE_RHS_SIGN * _tested(basis, lambda x: eval_incident(pw, k0, x)[0], order, False)


def rhs_mfie(basis, pw, k0, order=7):
    """``h_m = <beta_m, n x H_inc>``, matching ``(A'/2 + K_n) i = h``."""
    return MFIE_RHS_SIGN * _tested(basis, lambda x: eval_incident(pw, k0, x)[1], order, True)
