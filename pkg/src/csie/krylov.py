"""Krylov solvers: GMRES for the outer systems, Jacobi-preconditioned
conjugate gradients for the real SPD Gram systems."""

import csv
import math
import time
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from . import _accel
from ._accel import njit


@dataclass
class SolveReport:
    """Convergence record of one solve.

    ``history`` holds the relative residual after every iteration (index 0
    is the initial residual).  For GMRES these are the Arnoldi estimates of
    the (left-preconditioned) residual; ``residual`` is the true relative
    residual ``||b - A x|| / ||b||`` recomputed at exit.
    """

    iterations: int = 0
    history: list = field(default_factory=list)
    residual: float = 0.0
    wall_time: float = 0.0
    matvecs: int = 0
    converged: bool = True
    status: str = "converged"
    inner_iterations: int = 0
    inner_solves: int = 0

    @property
    def inner_mean(self):
        return self.inner_iterations / self.inner_solves if self.inner_solves else 0.0

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["iteration", "residual"])
            for i, r in enumerate(self.history):
                w.writerow([i, repr(float(r))])


def _matvec_of(op):
    if callable(getattr(op, "apply", None)):
        return op.apply
    if callable(op):
        return op
    mat = op
    return lambda x: mat @ x


def _precond_of(precond):
    if precond is None:
        return lambda x: x
    if callable(getattr(precond, "solve", None)):
        return precond.solve
    if callable(precond):
        return precond
    d = np.asarray(precond)
    if d.ndim != 1:
        raise ValueError("array preconditioner must be a diagonal")
    return lambda x: x / d


def _inner_counters(op):
    stats = getattr(op, "inner_stats", None)
    return (stats.iterations, stats.solves) if stats is not None else (0, 0)


def gmres(op, rhs, tol=1e-4, max_iter=1000, restart=None, precond=None,
          stagnation_window=50, stagnation_factor=0.999, x0=None):
    """Left-preconditioned GMRES with Givens rotations.

    Parameters
    ----------
    op : operator
        Object with ``apply(x)``, a callable, or a matrix.
    rhs : ndarray
    tol : float
        Target for the true relative residual ``||b - A x|| / ||b||``.
    max_iter : int
        Total Arnoldi steps over all cycles.
    restart : int, optional
        Cycle length; ``None`` runs full GMRES.
    precond : optional
        Diagonal array (divided out), callable or object with ``solve``.
    stagnation_window, stagnation_factor
        Stop when the residual estimate has not dropped below
        ``stagnation_factor`` times its value ``stagnation_window``
        iterations earlier.

    Returns
    -------
    x : ndarray
    report : SolveReport
    """
    if not 0 < tol < 1:
        raise ValueError("tol must lie in (0, 1)")
    t_start = time.perf_counter()
    matvec = _matvec_of(op)
    msolve = _precond_of(precond)
    b = np.asarray(rhs, dtype=complex)
    n = b.shape[0]
    inner0 = _inner_counters(op)
    report = SolveReport()

    def finish(x, status):
        report.status = status
        report.converged = status == "converged"
        report.wall_time = time.perf_counter() - t_start
        it, sv = _inner_counters(op)
        report.inner_iterations = it - inner0[0]
        report.inner_solves = sv - inner0[1]
        return x, report

    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        report.history = [0.0]
        return finish(np.zeros(n, dtype=complex), "converged")

    x = np.zeros(n, dtype=complex) if x0 is None else np.array(x0, dtype=complex)
    if x0 is None:
        r = b.copy()
    else:
        r = b - matvec(x)
        report.matvecs += 1
    true_res = np.linalg.norm(r) / bnorm
    report.history = [true_res]
    if true_res <= tol:
        report.residual = true_res
        return finish(x, "converged")

    report.residual = float(true_res)
    m = n if restart is None else max(1, min(restart, n))
    target = tol
    status = "max_iter"
    # (iterations, true residual) at each cycle end, for the stagnation test
    # across cycles; estimates of different cycles are not comparable
    checkpoints = [(0, true_res)]
    while report.iterations < max_iter:
        z = msolve(r)
        beta = np.linalg.norm(z)
        if beta == 0.0:
            break
        # the estimate is scaled so that it equals the true relative residual
        # without preconditioning
        scale = true_res / beta
        steps = min(m, max_iter - report.iterations)
        V = np.zeros((n, steps + 1), dtype=complex)
        H = np.zeros((steps + 1, steps), dtype=complex)
        cs = np.zeros(steps)
        sn = np.zeros(steps, dtype=complex)
        g = np.zeros(steps + 1, dtype=complex)
        g[0] = beta
        V[:, 0] = z / beta
        j_done = 0
        stop = None
        cycle = []
        for j in range(steps):
            w = msolve(matvec(V[:, j]))
            report.matvecs += 1
            # classical Gram-Schmidt, applied twice
            h = V[:, :j + 1].conj().T @ w
            w = w - V[:, :j + 1] @ h
            h2 = V[:, :j + 1].conj().T @ w
            w = w - V[:, :j + 1] @ h2
            h = h + h2
            hn = np.linalg.norm(w)
            H[:j + 1, j] = h
            H[j + 1, j] = hn
            for i in range(j):
                a, c = H[i, j], H[i + 1, j]
                H[i, j] = cs[i] * a + sn[i] * c
                H[i + 1, j] = -np.conj(sn[i]) * a + cs[i] * c
            a, c = H[j, j], H[j + 1, j]
            den = math.hypot(abs(a), abs(c))
            if den == 0.0:
                cs[j], sn[j] = 1.0, 0.0
            else:
                cs[j] = abs(a) / den
                sn[j] = (a / abs(a)) * np.conj(c) / den if abs(a) > 0 else np.conj(c) / abs(c)
            H[j, j] = cs[j] * a + sn[j] * c
            H[j + 1, j] = 0.0
            g[j + 1] = -np.conj(sn[j]) * g[j]
            g[j] = cs[j] * g[j]
            report.iterations += 1
            j_done = j + 1
            est = abs(g[j + 1]) * scale
            report.history.append(float(est))
            cycle.append(est)
            if est <= target:
                stop = "target"
                break
            if hn <= 1e-14 * beta:
                stop = "breakdown"
                break
            win = stagnation_window
            if win and len(cycle) > win and est > stagnation_factor * cycle[-1 - win]:
                stop = "stagnated"
                break
            if hn > 0:
                V[:, j + 1] = w / hn
        y = np.linalg.solve(np.triu(H[:j_done, :j_done]), g[:j_done]) if j_done else []
        if j_done:
            x = x + V[:, :j_done] @ y
        r = b - matvec(x)
        report.matvecs += 1
        true_res = np.linalg.norm(r) / bnorm
        report.residual = float(true_res)
        if true_res <= tol:
            status = "converged"
            break
        if stop in ("stagnated", "breakdown"):
            status = "stagnated"
            break
        old = [res for it, res in checkpoints if it <= report.iterations - stagnation_window]
        checkpoints.append((report.iterations, true_res))
        if stagnation_window and old and true_res > stagnation_factor * min(old):
            status = "stagnated"
            break
        if stop == "target":
            # preconditioned estimate met the target but the true residual
            # did not: tighten proportionally and run another cycle
            target *= 0.5 * tol / true_res
    return finish(x, status)


# ---------------------------------------------------------------------------
# conjugate gradients on a real SPD CSR matrix with a complex right-hand side

CG_CONVERGED, CG_MAX_ITER, CG_NEGATIVE_CURVATURE = 0, 1, 2


@njit
def _cg_csr_nb(indptr, indices, data, dinv, b, tol, max_iter, x):
    n = b.shape[0]
    r = b.copy()
    z = np.empty(n, dtype=np.complex128)
    p = np.empty(n, dtype=np.complex128)
    q = np.empty(n, dtype=np.complex128)
    bnorm2 = 0.0
    for i in range(n):
        x[i] = 0.0
        bnorm2 += r[i].real * r[i].real + r[i].imag * r[i].imag
    bnorm = math.sqrt(bnorm2)
    rz = 0.0
    for i in range(n):
        z[i] = dinv[i] * r[i]
        p[i] = z[i]
        rz += (r[i].real * z[i].real + r[i].imag * z[i].imag)
    res = 1.0
    for it in range(1, max_iter + 1):
        pq = 0.0
        for i in range(n):
            s = 0.0j
            for k in range(indptr[i], indptr[i + 1]):
                s += data[k] * p[indices[k]]
            q[i] = s
            pq += p[i].real * s.real + p[i].imag * s.imag
        if pq <= 0.0:
            return it - 1, res, 2
        alpha = rz / pq
        rr = 0.0
        rz_new = 0.0
        for i in range(n):
            x[i] += alpha * p[i]
            r[i] -= alpha * q[i]
            rr += r[i].real * r[i].real + r[i].imag * r[i].imag
            z[i] = dinv[i] * r[i]
            rz_new += r[i].real * z[i].real + r[i].imag * z[i].imag
        res = math.sqrt(rr) / bnorm
        if res <= tol:
            return it, res, 0
        beta = rz_new / rz
        rz = rz_new
        for i in range(n):
            p[i] = z[i] + beta * p[i]
    return max_iter, res, 1


def _cg_numpy(mat, dinv, b, tol, max_iter):
    x = np.zeros_like(b)
    r = b.copy()
    bnorm = np.linalg.norm(b)
    z = dinv * r
    p = z.copy()
    rz = np.vdot(r, z).real
    res = 1.0
    for it in range(1, max_iter + 1):
        q = mat @ p
        pq = np.vdot(p, q).real
        if pq <= 0.0:
            return x, it - 1, res, CG_NEGATIVE_CURVATURE
        alpha = rz / pq
        x += alpha * p
        r -= alpha * q
        res = np.linalg.norm(r) / bnorm
        if res <= tol:
            return x, it, res, CG_CONVERGED
        z = dinv * r
        rz_new = np.vdot(r, z).real
        p = z + (rz_new / rz) * p
        rz = rz_new
    return x, max_iter, res, CG_MAX_ITER


class CGFailure(RuntimeError):
    """Raised by callers that require a converged Gram solve."""

    def __init__(self, message, report):
        super().__init__(message)
        self.report = report


def cg(matrix, rhs, tol=1e-5, max_iter=200, precond="jacobi"):
    """Preconditioned conjugate gradients for a real SPD sparse matrix.

    Parameters
    ----------
    matrix : SparseRealMatrix or scipy sparse matrix
        Must be symmetric positive definite.
    rhs : ndarray
        Real or complex right-hand side.
    tol : float
        Relative residual target ``||b - A x|| / ||b||``.
    precond : {"jacobi", None} or ndarray
        Jacobi (default), none, or an explicit inverse diagonal.

    Returns
    -------
    x : ndarray (complex)
    report : SolveReport
        ``status`` is ``"negative_curvature"`` if ``p^H A p <= 0`` was met,
        which signals a matrix that is not SPD.
    """
    t0 = time.perf_counter()
    symmetry = getattr(matrix, "symmetry", "symmetric")
    if symmetry != "symmetric":
        raise ValueError("cg needs a matrix tagged symmetric")
    csr = matrix.matrix if hasattr(matrix, "matrix") else sp.csr_matrix(matrix)
    b = np.ascontiguousarray(rhs, dtype=complex)
    if b.shape != (csr.shape[0],):
        raise ValueError("rhs dimension mismatch")
    report = SolveReport(history=[])
    if not np.any(b):
        report.history = [0.0]
        report.wall_time = time.perf_counter() - t0
        return np.zeros_like(b), report
    if isinstance(precond, str) and precond == "jacobi":
        dinv = 1.0 / csr.diagonal()
    elif precond is None:
        dinv = np.ones(csr.shape[0])
    else:
        dinv = np.asarray(precond, float)
    dinv = np.ascontiguousarray(dinv, dtype=float)
    if _accel.numba_enabled():
        x = np.empty_like(b)
        it, res, code = _cg_csr_nb(csr.indptr, csr.indices, csr.data, dinv, b,
                                   float(tol), int(max_iter), x)
    else:
        x, it, res, code = _cg_numpy(csr, dinv, b, tol, max_iter)
    report.iterations = int(it)
    report.matvecs = int(it)
    report.residual = float(res)
    report.history = [1.0, float(res)]
    report.status = ("converged", "max_iter", "negative_curvature")[code]
    report.converged = code == CG_CONVERGED
    report.wall_time = time.perf_counter() - t0
    return x, report
