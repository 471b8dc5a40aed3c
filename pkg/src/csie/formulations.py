"""Integral-equation systems built from the assembled matrices.

Unknowns are RWG coefficients of the electric current ``i`` and, for the
combined-source kinds, of the magnetic current ``v``:

    EFIE     j k Z0 T i                          = e
    MFIE     (A'/2 + Kn) i                       = h
    CFIE     c T i + (1 - c)(A'/2 + Kn) i / (jk) = (c e + (1 - c) Z0 h) / (j k Z0)
    CSIE-JM  [[j k Z0 T, -A/2 + K], [-a Z0 A, A']] (i, v) = (e, 0)
    CSIE-J   j k Z0 T i + (-A/2 + K) v(i)        = e,   A' v(i) = a Z0 A i

In CSIE-J the side condition is solved by conjugate gradients inside every
operator application.
"""

import threading
import time
from dataclasses import dataclass, field

import numpy as np

from . import krylov
from .constants import C0, CSIE_IDENTITY, MFIE_IDENTITY, Z0, frequency_from_k

KINDS = ("EFIE", "MFIE", "CFIE", "CSIE-JM", "CSIE-J")


@dataclass(frozen=True)
class PhysicalContext:
    """Frequency and free-space constants of one run."""

    frequency: float
    z0: float = Z0
    c0: float = C0

    def __post_init__(self):
        if not self.frequency > 0:
            raise ValueError("frequency must be positive")

    @classmethod
    def from_k0(cls, k0):
        return cls(frequency_from_k(k0))

    @property
    def k0(self):
        return 2.0 * np.pi * self.frequency / self.c0

    @property
    def wavelength(self):
        return self.c0 / self.frequency


@dataclass(frozen=True)
class FormulationConfig:
    """Parameters of one formulation.

    Attributes
    ----------
    kind : str
        One of ``KINDS``.
    alpha : float
        Combined-source weight; must be positive for CSIE-JM.  CSIE-J
        accepts 0, which reduces it to the EFIE.
    cfie_comb : float
        CFIE weight of the electric equation, in [0, 1].
    jm_weighting : bool
        Solve CSIE-JM for ``v / Z0`` instead of ``v``.
    inner_tol, inner_max_iter
        Conjugate-gradient settings of the Gram solve.
    """

    kind: str = "CSIE-J"
    alpha: float = 1.0
    cfie_comb: float = 0.5
    jm_weighting: bool = False
    inner_tol: float = 1e-5
    inner_max_iter: int = 200

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown formulation {self.kind!r}; use one of {KINDS}")
        if self.alpha < 0:
            raise ValueError("alpha must be >= 0")
        if self.kind == "CSIE-JM" and self.alpha <= 0:
            raise ValueError("CSIE-JM needs alpha > 0")
        if not 0.0 <= self.cfie_comb <= 1.0:
            raise ValueError("cfie_comb must lie in [0, 1]")
        if not 0 < self.inner_tol < 1 or self.inner_max_iter < 1:
            raise ValueError("inner_tol must lie in (0, 1) and inner_max_iter >= 1")

    def check_outer(self, tol):
        if self.kind == "CSIE-J" and not self.inner_tol < tol:
            raise ValueError(f"inner_tol {self.inner_tol} must be below the outer tolerance {tol}")


@dataclass
class InnerStats:
    """Counters of the nested Gram solves of one operator."""

    solves: int = 0
    iterations: int = 0
    time: float = 0.0
    max_residual: float = 0.0
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    def record(self, report):
        with self._lock:
            self.solves += 1
            self.iterations += report.iterations
            self.time += report.wall_time
            self.max_residual = max(self.max_residual, report.residual)


class LinearOperator:
    """Square operator given by an ``apply`` callable.

    Parameters
    ----------
    n : int
        Dimension.
    matvec : callable
        ``x -> A x``.
    dense : ndarray, optional
        Explicit matrix, returned by :meth:`to_dense` when available.
    name : str
    inner_stats : InnerStats, optional
    """

    def __init__(self, n, matvec, dense=None, name="", inner_stats=None):
        self.n = int(n)
        self._matvec = matvec
        self._dense = dense
        self.name = name
        self.inner_stats = inner_stats

    @property
    def shape(self):
        return (self.n, self.n)

    def apply(self, x):
        x = np.asarray(x)
        if x.shape != (self.n,):
            raise ValueError(f"expected a vector of length {self.n}, got {x.shape}")
        return self._matvec(x)

    __call__ = apply

    def to_dense(self):
        """Explicit matrix; built column by column if not stored."""
        if self._dense is not None:
            return self._dense
        out = np.empty((self.n, self.n), dtype=complex)
        e = np.zeros(self.n, dtype=complex)
        for j in range(self.n):
            e[j] = 1.0
            out[:, j] = self.apply(e)
            e[j] = 0.0
        return out


@dataclass(frozen=True)
class RhsDescriptor:
    """Recipe mapping the tested incident fields ``e`` and ``h`` to the
    right-hand side of one system."""

    e_weight: complex = 1.0
    h_weight: complex = 0.0
    pad: int = 0

    def assemble(self, e, h=None):
        rhs = self.e_weight * np.asarray(e, dtype=complex)
        if self.h_weight != 0:
            if h is None:
                raise ValueError("this formulation needs the magnetic right-hand side")
            rhs = rhs + self.h_weight * np.asarray(h, dtype=complex)
        if self.pad:
            rhs = np.concatenate([rhs, np.zeros(self.pad, dtype=complex)])
        return rhs

    @property
    def needs_h(self):
        return self.h_weight != 0


class DiagonalPreconditioner:
    """Left preconditioner ``x -> x / d``."""

    def __init__(self, d):
        d = np.asarray(d, dtype=complex)
        if np.any(d == 0):
            raise ZeroDivisionError("zero entry in diagonal preconditioner")
        self.d = d

    def solve(self, x):
        return x / self.d


def _dense_of(m):
    return m.toarray() if hasattr(m, "toarray") else np.asarray(m)


def _gram_solve(aprime, rhs, tol, max_iter, stats=None):
    x, rep = krylov.cg(aprime, rhs, tol=tol, max_iter=max_iter)
    if stats is not None:
        stats.record(rep)
    if not rep.converged:
        raise krylov.CGFailure(
            f"Gram solve stopped ({rep.status}) at residual {rep.residual:.3e} "
            f"after {rep.iterations} iterations", rep)
    return x


# ---------------------------------------------------------------------------
# builders

def build_efie(T, ctx):
    z = 1j * ctx.k0 * ctx.z0 * np.asarray(T)
    return LinearOperator(len(z), lambda x: z @ x, dense=z, name="EFIE"), RhsDescriptor()


def build_mfie(Aprime, Kn, ctx):
    m = MFIE_IDENTITY * _dense_of(Aprime) + np.asarray(Kn)
    return LinearOperator(len(m), lambda x: m @ x, dense=m, name="MFIE"), \
        RhsDescriptor(0.0, 1.0)


def build_cfie(efie_op, mfie_op, comb, ctx):
    """CFIE scaled by ``1/(j k Z0)``; ``comb`` weights the electric part."""
    if not 0.0 <= comb <= 1.0:
        raise ValueError("comb must lie in [0, 1]")
    scale = 1.0 / (1j * ctx.k0 * ctx.z0)
    m = (comb * scale) * efie_op.to_dense() + ((1.0 - comb) * ctx.z0 * scale) * mfie_op.to_dense()
    return LinearOperator(len(m), lambda x: m @ x, dense=m, name="CFIE"), \
        RhsDescriptor(comb * scale, (1.0 - comb) * ctx.z0 * scale)


def build_csie_jm(T, K, A, Aprime, cfg, ctx):
    """Saddle-point system in ``(i, v)`` or, with weighting, ``(i, v / Z0)``."""
    if cfg.alpha <= 0:
        raise ValueError("CSIE-JM needs alpha > 0")
    n = len(T)
    a = _dense_of(A)
    top = np.hstack([1j * ctx.k0 * ctx.z0 * np.asarray(T), CSIE_IDENTITY * a + np.asarray(K)])
    if cfg.jm_weighting:
        top[:, n:] *= ctx.z0
        bottom = np.hstack([-cfg.alpha * a, _dense_of(Aprime)])
    else:
        bottom = np.hstack([-cfg.alpha * ctx.z0 * a, _dense_of(Aprime)])
    m = np.vstack([top, bottom]).astype(complex)
    return LinearOperator(2 * n, lambda x: m @ x, dense=m, name="CSIE-JM"), RhsDescriptor(pad=n)


def build_csie_j(T, K, A, Aprime, cfg, ctx):
    """Reduced operator with the Gram solve nested in every application."""
    zt = 1j * ctx.k0 * ctx.z0 * np.asarray(T)
    km = CSIE_IDENTITY * _dense_of(A) + np.asarray(K)
    a_csr = A.matrix if hasattr(A, "matrix") else A
    weight = cfg.alpha * ctx.z0
    stats = InnerStats()

    def matvec(x):
        b = weight * (a_csr @ x)
        if not np.any(b):
            return zt @ x
        v = _gram_solve(Aprime, b, cfg.inner_tol, cfg.inner_max_iter, stats)
        return zt @ x + km @ v

    op = LinearOperator(len(zt), matvec, name="CSIE-J", inner_stats=stats)
    return op, RhsDescriptor()


def recover_magnetic(i, A, Aprime, cfg, ctx):
    """``v`` with ``A' v = alpha Z0 A i``, solved to ``inner_tol / 10``."""
    a_csr = A.matrix if hasattr(A, "matrix") else A
    b = cfg.alpha * ctx.z0 * (a_csr @ np.asarray(i, dtype=complex))
    if not np.any(b):
        return np.zeros(len(b), dtype=complex)
    return _gram_solve(Aprime, b, cfg.inner_tol / 10.0, 10 * cfg.inner_max_iter)


def build_diag_precond(T, ctx):
    return DiagonalPreconditioner(1j * ctx.k0 * ctx.z0 * np.diag(T))


def build_csie_diag_precond(T, A, Aprime, cfg, ctx):
    """``jkZ0 diag(T) - alpha Z0 diag(A diag(A')^-1 A)``."""
    a_csr = A.matrix if hasattr(A, "matrix") else A
    ap = Aprime.matrix if hasattr(Aprime, "matrix") else Aprime
    dinv = 1.0 / ap.diagonal()
    # diag(A D A)_m = sum_k A_mk d_k A_km
    corr = np.asarray(a_csr.multiply(a_csr.T) @ dinv).ravel()
    return DiagonalPreconditioner(1j * ctx.k0 * ctx.z0 * np.diag(T) - cfg.alpha * ctx.z0 * corr)


def build_jm_jacobi(op):
    """Jacobi preconditioner of the 2N CSIE-JM matrix."""
    return DiagonalPreconditioner(np.diag(op.to_dense()))


# ---------------------------------------------------------------------------
# one-stop assembly and solve

REQUIRED = {
    "EFIE": ("T",),
    "MFIE": ("Kn",),
    "CFIE": ("T", "Kn"),
    "CSIE-JM": ("T", "K"),
    "CSIE-J": ("T", "K"),
}


@dataclass
class System:
    kind: str
    cfg: FormulationConfig
    ctx: PhysicalContext
    op: LinearOperator
    rhs: RhsDescriptor
    grams: tuple


def build_system(cfg, ctx, mats, A, Aprime):
    """Compose the operator of ``cfg.kind`` from assembled matrices.

    ``mats`` maps ``"T"``, ``"K"`` and ``"Kn"`` to dense arrays (only the
    entries listed in ``REQUIRED[cfg.kind]`` are read).
    """
    kind = cfg.kind
    if kind == "EFIE":
        op, rhs = build_efie(mats["T"], ctx)
    elif kind == "MFIE":
        op, rhs = build_mfie(Aprime, mats["Kn"], ctx)
    elif kind == "CFIE":
        op, rhs = build_cfie(build_efie(mats["T"], ctx)[0],
                             build_mfie(Aprime, mats["Kn"], ctx)[0], cfg.cfie_comb, ctx)
    elif kind == "CSIE-JM":
        op, rhs = build_csie_jm(mats["T"], mats["K"], A, Aprime, cfg, ctx)
    else:
        op, rhs = build_csie_j(mats["T"], mats["K"], A, Aprime, cfg, ctx)
    return System(kind, cfg, ctx, op, rhs, (A, Aprime))


def make_preconditioner(system, name, T=None):
    """``name`` is one of none, diag (diagonal of jkZ0 T), csie-diag, jacobi."""
    if name in (None, "none"):
        return None
    ctx, cfg = system.ctx, system.cfg
    if name == "jacobi":
        if system.kind == "CSIE-J":
            raise ValueError("jacobi needs an explicit matrix; use diag or csie-diag")
        return build_jm_jacobi(system.op) if system.kind == "CSIE-JM" else \
            DiagonalPreconditioner(np.diag(system.op.to_dense()))
    if T is None:
        raise ValueError(f"preconditioner {name!r} needs T")
    if name == "diag":
        return build_diag_precond(T, ctx)
    if name == "csie-diag":
        return build_csie_diag_precond(T, *system.grams, cfg, ctx)
    raise ValueError(f"unknown preconditioner {name!r}")


def solve_system(system, e, h=None, tol=1e-4, max_iter=1000, restart=None, precond=None):
    """Solve and split the unknowns.

    Returns
    -------
    i, v : ndarray
        Electric and magnetic current coefficients (``v`` is zero for the
        field equations and recovered by a Gram solve for CSIE-J).
    report : krylov.SolveReport
    """
    system.cfg.check_outer(tol)
    t0 = time.perf_counter()
    rhs = system.rhs.assemble(e, h)
    x, report = krylov.gmres(system.op, rhs, tol=tol, max_iter=max_iter,
                             restart=restart, precond=precond)
    n = len(e)
    if system.kind == "CSIE-JM":
        i, v = x[:n], x[n:]
        if system.cfg.jm_weighting:
            v = v * system.ctx.z0
    elif system.kind == "CSIE-J":
        i = x
        v = recover_magnetic(i, *system.grams, system.cfg, system.ctx)
    else:
        i, v = x, np.zeros(n, dtype=complex)
    report.wall_time = time.perf_counter() - t0
    return i, v, report
