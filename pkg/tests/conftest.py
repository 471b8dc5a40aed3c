import math

import numpy as np
import pytest

from csie import formulations as F
from csie.basis import assemble_gram_A, assemble_gram_Aprime, build_rwg
from csie.excitation import PlaneWave, rhs_efie, rhs_mfie
from csie.mesh import gen_cube, gen_icosphere
from csie.operators import assemble_operators

# lines collected by the acceptance module and echoed after the run
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)


class Setup:
    """Mesh, basis, Gram matrices, dense operators and excitation."""

    def __init__(self, mesh, k0, which=("T", "K", "Kn")):
        self.mesh = mesh
        self.basis = build_rwg(mesh)
        self.k0 = k0
        self.ctx = F.PhysicalContext.from_k0(k0)
        self.A = assemble_gram_A(self.basis)
        self.Aprime = assemble_gram_Aprime(self.basis)
        self.mats = assemble_operators(self.basis, k0, which=which)
        self.pw = PlaneWave.from_angles(0.0, 0.0, "theta")
        self.e = rhs_efie(self.basis, self.pw, k0)
        self.h = rhs_mfie(self.basis, self.pw, k0)

    def system(self, kind, **kw):
        return F.build_system(F.FormulationConfig(kind=kind, **kw), self.ctx, self.mats,
                              self.A, self.Aprime)


@pytest.fixture(scope="session")
def cube18():
    """Unit cube, one division, edge = half a wavelength."""
    return Setup(gen_cube(1.0, 1), math.pi)


@pytest.fixture(scope="session")
def sphere480():
    """Icosphere level 2, diameter 1 m, ka = 1.6."""
    return Setup(gen_icosphere(1.0, 2), 3.2)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
