"""Small dense conic optimizer and a bisection driver."""

from .admm import solve
from .ipm import solve_ipm
from .bisection import BisectionResult, BracketError, bisect_feasibility
from .cones import (Cone, embed_hermitian, project_cone, project_psd, project_soc, smat, svec,
                    unembed_hermitian)
from .program import (INFEASIBLE, MAX_ITER, OPTIMAL, UNBOUNDED, ConicProgram, ConicSolution,
                      ProgramBuilder, dump_program, hermitian_basis, hermitian_coords,
                      hermitian_from_coords, load_program)

__all__ = [
    "solve", "solve_ipm", "bisect_feasibility", "BisectionResult", "BracketError", "Cone", "embed_hermitian",
    "unembed_hermitian", "project_cone", "project_psd", "project_soc", "svec", "smat",
    "ConicProgram", "ConicSolution", "ProgramBuilder", "dump_program", "load_program",
    "hermitian_basis", "hermitian_coords", "hermitian_from_coords",
    "OPTIMAL", "INFEASIBLE", "UNBOUNDED", "MAX_ITER",
]
