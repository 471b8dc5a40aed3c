"""Compare the numba kernels with their numpy fallbacks.

Usage::

    python benchmarks/bench_kernels.py [--sizes 1 2 3] [--repeat 3]

For every icosphere level the script times dense assembly of T, K and Kn,
the static potential kernel and the Gram-matrix CG solve under both
backends, and prints the largest relative difference between their results.
The first numba call of each kernel is a warm-up and is not timed.
"""

import argparse
import time

import numpy as np

from csie import _accel, krylov
from csie.basis import assemble_gram_Aprime, build_rwg
from csie.mesh import gen_icosphere
from csie.operators import assemble_operators
from csie.potentials import triangle_potentials


def _best(fn, repeat):
    out, best = None, np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def _rel(a, b):
    if isinstance(a, dict):
        return max(_rel(a[k], b[k]) for k in a)
    if isinstance(a, tuple):
        return max(_rel(x, y) for x, y in zip(a, b))
    scale = np.abs(b).max()
    return float(np.abs(a - b).max() / scale) if scale else 0.0


def run(levels, repeat, k0=3.2):
    rng = np.random.default_rng(0)
    rows = []
    for level in levels:
        mesh = gen_icosphere(1.0, level)
        basis = build_rwg(mesh)
        aprime = assemble_gram_Aprime(basis)
        pts = rng.normal(size=(20000, 3))
        tri = rng.integers(mesh.n_triangles, size=len(pts))
        corners, normals = mesh.corners()[tri], mesh.normals[tri]
        rhs = rng.normal(size=basis.n) + 1j * rng.normal(size=basis.n)
        cases = {
            "assembly": lambda: assemble_operators(basis, k0),
            "potentials": lambda: triangle_potentials(pts, corners, normals),
            "gram cg": lambda: krylov.cg(aprime, rhs, tol=5e-7)[0],
        }
        for name, fn in cases.items():
            results = {}
            for flag in (True, False):
                prev = _accel.use_numba(flag)
                try:
                    if flag:
                        fn()        # compile
                    reps = 1 if (name == "assembly" and not flag and level >= 3) else repeat
                    results[flag] = _best(fn, reps)
                finally:
                    _accel.use_numba(prev)
            (tn, on), (tp, op) = results[True], results[False]
            rows.append((level, basis.n, name, tn, tp, tp / tn, _rel(on, op)))
    return rows


def main():
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--sizes", type=int, nargs="+", default=[1, 2])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    if not _accel.numba_available():
        raise SystemExit("numba is not installed; nothing to compare")
    print(f"{'level':>5} {'N':>6} {'kernel':<11} {'numba [s]':>10} {'numpy [s]':>10} "
          f"{'speedup':>8} {'max rel diff':>13}")
    for level, n, name, tn, tp, sp, diff in run(args.sizes, args.repeat):
        print(f"{level:>5} {n:>6} {name:<11} {tn:>10.4f} {tp:>10.4f} {sp:>8.1f} {diff:>13.2e}")


if __name__ == "__main__":
    main()
