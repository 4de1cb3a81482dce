"""Nonlocal approximation of the Poisson equation on manifolds with boundary.

The package samples a manifold with weighted points, assembles the discrete
nonlocal system, solves it through a symmetric Schur complement and measures
convergence against exact solutions.
"""

__version__ = "0.1.0"

from .assembly import DiscreteSystem, SchurComplement, assemble, discrete_energy, schur_reduce
from .errors import (
    ConfigurationError, DomainError, GeometryError, MetricError, NonConvergenceError,
    NonlocalPoissonError, SingularReductionError,
)
from .geometry import (
    Disk, Hemisphere, PointCloud, TestProblem, get_problem, identity_residual, kappa_n,
    sample, sample_disk, sample_hemisphere,
)
from .kernels import KernelFamily, eval_level, eval_scaled
from .operators import QuadratureGrid, apply_operator, truncation_boundary, truncation_interior
from .solver import SolveResult, solve
from .study import (
    ConvergenceRecord, error_boundary, error_interior, fit_slope, run_study, successive_rate,
)
