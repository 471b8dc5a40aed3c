"""Batch driver: ``csie {solve,sweep,spectrum,mesh-info,alpha-tradeoff}``.

Experiments are described by a TOML file::

    [geometry]
    generator = "icosphere"       # icosphere | cube | tetrahedron | off
    diameter = 1.0
    subdivisions = 2

    [frequency]
    value = 1.527e8               # Hz; or start/stop/points; or ka (spheres)

    [excitation]
    theta = 0.0
    phi = 0.0
    polarization = "theta"

    [solver]
    tol = 1e-4

    [[formulation]]
    kind = "CSIE-J"
    alpha = 1.0

Every run writes CSV files and a ``manifest.json`` listing the parameters
and the SHA-256 of each deterministic output.
"""

import argparse
import csv
import hashlib
import json
import logging
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:    # Python < 3.11
    import tomli as tomllib

from . import __version__, formulations as F, krylov, postproc as P
from .basis import assemble_gram_A, assemble_gram_Aprime, build_rwg
from .constants import C0
from .excitation import PlaneWave, rhs_efie, rhs_mfie
from .mesh import gen_cube, gen_icosphere, gen_tetrahedron, load_off, mesh_quality
from .operators import QuadratureConfig, cached_operators

log = logging.getLogger("csie")

EXIT_OK, EXIT_CONFIG, EXIT_PARTIAL = 0, 1, 2


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------------------
# configuration

@dataclass
class GeometrySpec:
    generator: str = "icosphere"
    diameter: float = 1.0
    subdivisions: int = 2
    edge: float = 1.0
    divisions: int = 1
    scale: float = 1.0
    path: str = ""

    def build(self):
        if self.generator == "icosphere":
            return gen_icosphere(self.diameter, self.subdivisions)
        if self.generator == "cube":
            return gen_cube(self.edge, self.divisions)
        if self.generator == "tetrahedron":
            return gen_tetrahedron(self.scale)
        if self.generator == "off":
            return load_off(self.path)
        raise ConfigError(f"unknown geometry generator {self.generator!r}")

    @property
    def sphere_diameter(self):
        return self.diameter if self.generator == "icosphere" else None


@dataclass
class SolverSpec:
    tol: float = 1e-4
    max_iter: int = 2000
    restart: int = 0
    far_field_step: float = 10.0
    spectrum_max_size: int = 4000


@dataclass
class FormulationSpec:
    kind: str
    alpha: float = 1.0
    comb: float = 0.5
    jm_weighting: bool = False
    inner_tol: float = 1e-5
    inner_max_iter: int = 200
    precond: str = "none"

    def config(self):
        return F.FormulationConfig(kind=self.kind, alpha=self.alpha, cfie_comb=self.comb,
                                   jm_weighting=self.jm_weighting, inner_tol=self.inner_tol,
                                   inner_max_iter=self.inner_max_iter)

    @property
    def tag(self):
        base = self.kind.lower().replace("-", "")
        if self.kind.startswith("CSIE"):
            base += f"_a{self.alpha:g}"
        if self.kind == "CFIE":
            base += f"_c{self.comb:g}"
        if self.precond != "none":
            base += f"_{self.precond}"
        return base


@dataclass
class ExperimentConfig:
    """Validated contents of one TOML experiment file."""

    geometry: GeometrySpec
    frequencies: list
    excitation: dict
    solver: SolverSpec
    quadrature: QuadratureConfig
    formulations: list
    reference: str = "auto"
    reference_subdivisions: int = 0
    alphas: list = field(default_factory=list)
    combs: list = field(default_factory=list)
    source: dict = field(default_factory=dict)

    def plane_wave(self):
        ex = self.excitation
        return PlaneWave.from_angles(ex.get("theta", 0.0), ex.get("phi", 0.0),
                                     ex.get("polarization", "theta"), ex.get("amplitude", 1.0))


def _take(section, cls, name):
    allowed = {f.name for f in fields(cls)}
    extra = set(section) - allowed
    if extra:
        raise ConfigError(f"[{name}]: unknown keys {sorted(extra)}")
    try:
        return cls(**section)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"[{name}]: {exc}") from exc


def _frequencies(sec, geometry):
    if not sec:
        raise ConfigError("[frequency] section is required")
    if "value" in sec:
        freqs = [float(sec["value"])]
    elif "ka" in sec:
        d = geometry.sphere_diameter
        if d is None:
            raise ConfigError("[frequency] ka needs an icosphere geometry")
        freqs = [float(sec["ka"]) * C0 / (math.pi * d)]
    elif {"start", "stop", "points"} <= set(sec):
        if int(sec["points"]) < 1:
            raise ConfigError("[frequency] points must be >= 1")
        freqs = list(np.linspace(float(sec["start"]), float(sec["stop"]), int(sec["points"])))
    elif "resonance" in sec:
        # sweep around the n-th cavity resonance of a sphere: resonance,
        # span (relative half width) and points
        d = geometry.sphere_diameter
        if d is None:
            raise ConfigError("[frequency] resonance needs an icosphere geometry")
        f0 = P.cavity_resonances(d, int(sec["resonance"]))[-1]
        span = float(sec.get("span", 0.1))
        freqs = list(np.linspace(f0 * (1 - span), f0 * (1 + span), int(sec.get("points", 21))))
    else:
        raise ConfigError("[frequency] needs value, ka, resonance or start/stop/points")
    if any(not f > 0 for f in freqs):
        raise ConfigError("[frequency] values must be positive")
    return freqs


def parse_config(data):
    """Validate a parsed TOML mapping into an :class:`ExperimentConfig`."""
    data = dict(data)
    geometry = _take(data.get("geometry", {}), GeometrySpec, "geometry")
    if geometry.generator == "off" and not os.path.exists(geometry.path):
        raise ConfigError(f"[geometry] OFF file {geometry.path!r} does not exist")
    solver = _take(data.get("solver", {}), SolverSpec, "solver")
    if not 0 < solver.tol < 1:
        raise ConfigError("[solver] tol must lie in (0, 1)")
    quad = _take(data.get("quadrature", {}), QuadratureConfig, "quadrature")
    forms = []
    for i, sec in enumerate(data.get("formulation", [])):
        spec = _take(sec, FormulationSpec, f"formulation.{i}")
        try:
            spec.config().check_outer(solver.tol)
        except ValueError as exc:
            raise ConfigError(f"[formulation.{i}]: {exc}") from exc
        if spec.precond not in ("none", "diag", "csie-diag", "jacobi"):
            raise ConfigError(f"[formulation.{i}]: unknown precond {spec.precond!r}")
        forms.append(spec)
    ref = data.get("reference", {})
    trade = data.get("tradeoff", {})
    ex = data.get("excitation", {})
    try:
        PlaneWave.from_angles(ex.get("theta", 0.0), ex.get("phi", 0.0),
                              ex.get("polarization", "theta"), ex.get("amplitude", 1.0))
    except ValueError as exc:
        raise ConfigError(f"[excitation]: {exc}") from exc
    return ExperimentConfig(
        geometry=geometry,
        frequencies=_frequencies(data.get("frequency", {}), geometry),
        excitation=ex, solver=solver, quadrature=quad, formulations=forms,
        reference=ref.get("kind", "auto"),
        reference_subdivisions=int(ref.get("subdivisions", 0)),
        alphas=[float(a) for a in trade.get("alphas", [])],
        combs=[float(c) for c in trade.get("combs", [])],
        source=data)


def load_config(path):
    if not os.path.exists(path):
        raise ConfigError(f"config file {path!r} does not exist")
    with open(path, "rb") as fh:
        try:
            return parse_config(tomllib.load(fh))
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from exc


# ---------------------------------------------------------------------------
# shared run machinery

def _sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        h.update(fh.read())
    return h.hexdigest()


class Run:
    """Output directory bookkeeping and the manifest."""

    def __init__(self, out, cfg, command):
        self.out = out
        self.cfg = cfg
        self.command = command
        self.files = []
        self.volatile = []
        self.failures = []
        os.makedirs(out, exist_ok=True)

    def path(self, name, volatile=False):
        (self.volatile if volatile else self.files).append(name)
        return os.path.join(self.out, name)

    def write_manifest(self, mesh):
        manifest = {
            "command": self.command,
            "version": __version__,
            "config": self.cfg.source,
            "quadrature": asdict(self.cfg.quadrature),
            "mesh": {"name": mesh.name, "sha256": mesh.content_hash(),
                     "triangles": mesh.n_triangles, "unknowns": mesh.n_edges},
            "frequencies_hz": [float(f) for f in self.cfg.frequencies],
            "outputs": {name: _sha256(os.path.join(self.out, name)) for name in sorted(self.files)},
            "volatile_outputs": sorted(self.volatile),
            "failures": self.failures,
        }
        with open(os.path.join(self.out, "manifest.json"), "w") as fh:
            json.dump(manifest, fh, indent=2, sort_keys=True, default=str)
            fh.write("\n")


@dataclass
class Problem:
    """Matrices and excitation of one frequency point."""

    basis: object
    ctx: F.PhysicalContext
    mats: dict
    A: object
    Aprime: object
    e: np.ndarray
    h: np.ndarray


def _needed(forms):
    need = set()
    for spec in forms:
        need.update(F.REQUIRED[spec.kind])
    return tuple(sorted(need))


def _problem(basis, grams, freq, cfg, forms, cache):
    ctx = F.PhysicalContext(freq)
    mats = cached_operators(basis, ctx.k0, cfg.quadrature, _needed(forms), cache)
    pw = cfg.plane_wave()
    return Problem(basis, ctx, mats, grams[0], grams[1],
                   rhs_efie(basis, pw, ctx.k0), rhs_mfie(basis, pw, ctx.k0))


def _reference(cfg, basis, freq, theta, phi, cache):
    """Reference far field: Mie for spheres, refined-mesh EFIE otherwise."""
    kind = cfg.reference
    ctx = F.PhysicalContext(freq)
    pw = cfg.plane_wave()
    if kind == "none":
        return None
    if kind == "mie" or (kind == "auto" and cfg.geometry.sphere_diameter):
        if not cfg.geometry.sphere_diameter:
            raise ConfigError("[reference] mie needs an icosphere geometry")
        return P.mie_far_field(cfg.geometry.sphere_diameter, ctx.k0, pw, theta, phi)
    if kind in ("efie", "auto"):
        g = cfg.geometry
        levels = cfg.reference_subdivisions or 1
        if g.generator == "cube":
            fine = gen_cube(g.edge, g.divisions * 2 ** levels)
        elif g.generator == "icosphere":
            fine = gen_icosphere(g.diameter, g.subdivisions + levels)
        else:
            return None
        fb = build_rwg(fine)
        T = cached_operators(fb, ctx.k0, cfg.quadrature, ("T",), cache)["T"]
        op, _ = F.build_efie(T, ctx)
        i, rep = krylov.gmres(op, rhs_efie(fb, pw, ctx.k0), tol=1e-8, max_iter=5000)
        ff = P.far_field(fb, i, None, ctx.k0, theta, phi)
        ff.meta["formulation"] = "EFIE reference"
        return ff
    raise ConfigError(f"unknown reference kind {kind!r}")


def _solve_one(prob, spec, cfg):
    system = F.build_system(spec.config(), prob.ctx, prob.mats, prob.A, prob.Aprime)
    precond = F.make_preconditioner(system, spec.precond, prob.mats.get("T"))
    return F.solve_system(system, prob.e, prob.h, tol=cfg.solver.tol,
                          max_iter=cfg.solver.max_iter,
                          restart=cfg.solver.restart or None, precond=precond)


def _fmt(x):
    return repr(float(x))


# ---------------------------------------------------------------------------
# commands

def cmd_solve(cfg, out, threads=1, cache=None, command="solve"):
    """Solve every (frequency, formulation) pair; returns the exit code."""
    if not cfg.formulations:
        raise ConfigError("at least one [[formulation]] is required")
    mesh = cfg.geometry.build()
    basis = build_rwg(mesh)
    grams = (assemble_gram_A(basis), assemble_gram_Aprime(basis))
    run = Run(out, cfg, command)
    theta, phi = P.direction_grid(cfg.solver.far_field_step)
    pw = cfg.plane_wave()

    def point(idx):
        freq = cfg.frequencies[idx]
        prob = _problem(basis, grams, freq, cfg, cfg.formulations, cache)
        ref = _reference(cfg, basis, freq, theta, phi, cache)
        rows, timings, failures, names = [], [], [], []
        for spec in cfg.formulations:
            stem = f"f{idx:03d}_{spec.tag}"
            try:
                i, v, rep = _solve_one(prob, spec, cfg)
            except (krylov.CGFailure, ValueError, ZeroDivisionError, np.linalg.LinAlgError) as exc:
                failures.append({"frequency_hz": freq, "formulation": spec.tag, "error": str(exc)})
                continue
            if not rep.converged:
                failures.append({"frequency_hz": freq, "formulation": spec.tag,
                                 "error": f"{rep.status} at residual {rep.residual:.3e}"})
            ff = P.far_field(basis, i, v, prob.ctx.k0, theta, phi,
                             meta={"formulation": spec.kind, "alpha": spec.alpha})
            err = P.farfield_error_db(ff, ref) if ref is not None else float("nan")
            rep.to_csv(os.path.join(out, stem + "_residuals.csv"))
            ff.to_csv(os.path.join(out, stem + "_farfield.csv"))
            P.write_rcs_csv(os.path.join(out, stem + "_rcs.csv"), ff, P.bistatic_rcs(ff, pw))
            names += [stem + s for s in ("_residuals.csv", "_farfield.csv", "_rcs.csv")]
            rows.append([_fmt(freq), spec.kind, f"{spec.alpha:g}", f"{spec.comb:g}", spec.precond,
                         rep.iterations, _fmt(rep.residual), rep.status, rep.matvecs,
                         f"{rep.inner_mean:.4g}", _fmt(err)])
            timings.append([_fmt(freq), spec.tag, f"{rep.wall_time:.6f}"])
        return rows, timings, failures, names

    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        results = list(pool.map(point, range(len(cfg.frequencies))))

    with open(run.path("summary.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["frequency_hz", "formulation", "alpha", "comb", "precond", "iterations",
                    "residual", "status", "matvecs", "inner_mean", "error_db"])
        for rows, _, _, _ in results:
            w.writerows(rows)
    with open(run.path("timings.csv", volatile=True), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["frequency_hz", "formulation", "wall_time_s"])
        for _, t, _, _ in results:
            w.writerows(t)
    for _, _, failures, names in results:
        run.failures += failures
        run.files += names
    run.write_manifest(mesh)
    return EXIT_PARTIAL if run.failures else EXIT_OK


def cmd_spectrum(cfg, out, threads=1, cache=None):
    """Condition numbers and singular spectra of the dense system matrices."""
    if not cfg.formulations:
        raise ConfigError("at least one [[formulation]] is required")
    mesh = cfg.geometry.build()
    basis = build_rwg(mesh)
    limit = cfg.solver.spectrum_max_size
    for spec in cfg.formulations:
        size = basis.n * (2 if spec.kind == "CSIE-JM" else 1)
        if size > limit:
            raise ConfigError(f"{spec.kind}: matrix size {size} exceeds spectrum_max_size {limit}")
    grams = (assemble_gram_A(basis), assemble_gram_Aprime(basis))
    run = Run(out, cfg, "spectrum")

    def point(idx):
        freq = cfg.frequencies[idx]
        prob = _problem(basis, grams, freq, cfg, cfg.formulations, cache)
        rows, names, failures = [], [], []
        for spec in cfg.formulations:
            try:
                system = F.build_system(spec.config(), prob.ctx, prob.mats, prob.A, prob.Aprime)
                rep = P.singular_spectrum(system.op.to_dense())
            except (krylov.CGFailure, ValueError) as exc:
                failures.append({"frequency_hz": freq, "formulation": spec.tag, "error": str(exc)})
                continue
            stem = f"f{idx:03d}_{spec.tag}_spectrum.csv"
            rep.to_csv(os.path.join(out, stem))
            names.append(stem)
            rows.append([_fmt(freq), spec.kind, f"{spec.alpha:g}", f"{spec.comb:g}",
                         rep.size, _fmt(rep.condition)])
        return rows, names, failures

    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        results = list(pool.map(point, range(len(cfg.frequencies))))
    with open(run.path("condition.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["frequency_hz", "formulation", "alpha", "comb", "size", "condition"])
        for rows, _, _ in results:
            w.writerows(rows)
    for _, names, failures in results:
        run.files += names
        run.failures += failures
    run.write_manifest(mesh)
    return EXIT_PARTIAL if run.failures else EXIT_OK


def cmd_mesh_info(cfg, out):
    mesh = cfg.geometry.build()
    run = Run(out, cfg, "mesh-info")
    k0 = 2.0 * math.pi * cfg.frequencies[0] / C0
    mesh_quality(mesh, k0).to_csv(run.path("mesh_quality.csv"))
    run.write_manifest(mesh)
    return EXIT_OK


def cmd_alpha_tradeoff(cfg, out, threads=1, cache=None):
    """CSIE-J over ``tradeoff.alphas`` and CFIE over ``tradeoff.combs``."""
    if not cfg.alphas and not cfg.combs:
        raise ConfigError("[tradeoff] needs alphas and/or combs")
    base = cfg.formulations[0] if cfg.formulations else FormulationSpec("CSIE-J")
    forms = [FormulationSpec("CSIE-J", alpha=a, inner_tol=base.inner_tol,
                             inner_max_iter=base.inner_max_iter) for a in cfg.alphas]
    forms += [FormulationSpec("CFIE", comb=c) for c in cfg.combs]
    mesh = cfg.geometry.build()
    basis = build_rwg(mesh)
    grams = (assemble_gram_A(basis), assemble_gram_Aprime(basis))
    run = Run(out, cfg, "alpha-tradeoff")
    theta, phi = P.direction_grid(cfg.solver.far_field_step)
    freq = cfg.frequencies[0]
    prob = _problem(basis, grams, freq, cfg, forms, cache)
    ref = _reference(cfg, basis, freq, theta, phi, cache)

    def one(spec):
        try:
            i, v, rep = _solve_one(prob, spec, cfg)
        except (krylov.CGFailure, ValueError) as exc:
            return None, {"formulation": spec.tag, "error": str(exc)}
        ff = P.far_field(basis, i, v, prob.ctx.k0, theta, phi)
        err = P.farfield_error_db(ff, ref) if ref is not None else float("nan")
        fail = None if rep.converged else {"formulation": spec.tag, "error": rep.status}
        return [spec.kind, f"{spec.alpha:g}" if spec.kind == "CSIE-J" else "",
                f"{spec.comb:g}" if spec.kind == "CFIE" else "", rep.iterations, _fmt(err)], fail

    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        results = list(pool.map(one, forms))
    with open(run.path("tradeoff.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["formulation", "alpha", "comb", "iterations", "error_db"])
        for row, fail in results:
            if row is not None:
                w.writerow(row)
            if fail is not None:
                run.failures.append(fail)
    run.write_manifest(mesh)
    return EXIT_PARTIAL if run.failures else EXIT_OK


# ---------------------------------------------------------------------------
# entry point

def build_parser():
    p = argparse.ArgumentParser(prog="csie", description=__doc__.split("\n")[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)
    for name, helptext in (("solve", "solve every formulation at every frequency"),
                           ("sweep", "alias of solve for frequency sweeps"),
                           ("spectrum", "condition numbers and singular spectra"),
                           ("mesh-info", "mesh quality report"),
                           ("alpha-tradeoff", "CSIE-J alpha list and CFIE comb list")):
        s = sub.add_parser(name, help=helptext)
        s.add_argument("--config", required=True, help="TOML experiment file")
        s.add_argument("--out", default="out", help="output directory")
        s.add_argument("--threads", type=int, default=1, help="frequency points in parallel")
        s.add_argument("--cache", default=None, help="matrix cache directory")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config)
        if args.command in ("solve", "sweep"):
            code = cmd_solve(cfg, args.out, args.threads, args.cache, args.command)
        elif args.command == "spectrum":
            code = cmd_spectrum(cfg, args.out, args.threads, args.cache)
        elif args.command == "mesh-info":
            code = cmd_mesh_info(cfg, args.out)
        else:
            code = cmd_alpha_tradeoff(cfg, args.out, args.threads, args.cache)
    except ConfigError as exc:
        log.error("configuration error: %s", exc)
        return EXIT_CONFIG
    if code == EXIT_PARTIAL:
        log.warning("some runs failed; see manifest.json")
    return code


if __name__ == "__main__":
    sys.exit(main())
