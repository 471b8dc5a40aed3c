"""Boundary-element scattering from perfect electric conductors with the
combined-source integral equation and its field-equation baselines."""

from .basis import (RwgBasis, SparseRealMatrix, assemble_gram_A, assemble_gram_Aprime,
                    build_rwg, eval_rwg)
from .constants import C0, Z0, frequency_from_k, wavenumber
from .excitation import PlaneWave, eval_incident, rhs_efie, rhs_mfie
from .formulations import (FormulationConfig, LinearOperator, PhysicalContext, build_cfie,
                           build_csie_diag_precond, build_csie_j, build_csie_jm,
                           build_diag_precond, build_efie, build_mfie, build_system,
                           recover_magnetic, solve_system)
from .krylov import SolveReport, cg, gmres
from .mesh import Mesh, MeshError, gen_cube, gen_icosphere, gen_tetrahedron, load_off, mesh_quality
from .operators import QuadratureConfig, assemble_K, assemble_operators, assemble_T, greens
from .postproc import (FarFieldSet, SpectrumReport, bistatic_rcs, cavity_resonances,
                       condition_number, direction_grid, far_field, farfield_error_db,
                       mie_far_field, singular_spectrum)

__version__ = "0.1.0"
