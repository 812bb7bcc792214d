"""Finite element solver for nonlocal diffusion interface problems.

Two subdomains with their own kernels and horizons are coupled through an
overlap band on which solution and flux jumps are prescribed. The package
assembles the composite-kernel bilinear form on structured P1 meshes in 1D and
2D, solves the reduced system, and runs convergence studies in the mesh size
and in the horizons.
"""
__version__ = "0.1.0"

from ._jit import JIT_ENABLED
from .geometry import decompose, interval_config, rectangle_config
from .kernel import CompositeKernel, KernelSpec
from .mesh import FESpace, build_mesh
from .quadrature import PairQuadConfig, pair_integrate
from .assembly import apply_constraints, assemble_matrix, explicit_load, galerkin_load
from .solve import SolverConfig, error_norms, estimate_rates, solve_system

__all__ = [
    "JIT_ENABLED", "decompose", "interval_config", "rectangle_config", "CompositeKernel",
    "KernelSpec", "FESpace", "build_mesh", "PairQuadConfig", "pair_integrate",
    "apply_constraints", "assemble_matrix", "explicit_load", "galerkin_load", "SolverConfig",
    "error_norms", "estimate_rates", "solve_system", "__version__",
]
