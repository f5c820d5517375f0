"""Weak Galerkin solver for the 3D quad-curl problem on hex/tet meshes."""

from .analysis import (ErrorRecord, convergence_rates, energy_norm, l2_errors,
                       project_exact)
from .assembly import (SaddleSystem, assemble_system, build_dof_layout,
                       impose_boundary)
from .driver import (ConvergenceReport, Problem, StudyConfig,
                     manufactured_problem, polynomial_problem, render_table,
                     run_study, solve_level)
from .mesh import (Mesh, face_frame, generate_hex_mesh, generate_tet_mesh,
                   validate)
from .solver import SolveReport, SolverError, solve_saddle
from .weak_ops import (LocalOps, check_commutativity, weak_curlcurl_local,
                       weak_gradient_local)

__all__ = [
    "ConvergenceReport", "ErrorRecord", "LocalOps", "Mesh", "Problem",
    "SaddleSystem", "SolveReport", "SolverError", "StudyConfig",
    "assemble_system", "build_dof_layout", "check_commutativity",
    "convergence_rates", "energy_norm", "face_frame", "generate_hex_mesh",
    "generate_tet_mesh", "impose_boundary", "l2_errors",
    "manufactured_problem", "polynomial_problem", "project_exact",
    "render_table", "run_study", "solve_level", "solve_saddle", "validate",
    "weak_curlcurl_local", "weak_gradient_local",
]

__version__ = "0.1.0"
