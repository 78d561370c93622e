"""Numerical verification of eigenvalue inequalities for the mixed Laplacian.

The lowest eigenvalue of the Laplacian with Dirichlet conditions on a portion
of the boundary of a convex planar domain and Neumann conditions elsewhere is
computed by P1 finite elements with Richardson extrapolation, and geometric
sufficient conditions for comparing two Dirichlet portions are checked.
"""

from .geometry import (
    CircularArc,
    DomainBoundary,
    GraphArc,
    ParameterRangeError,
    Segment,
    ValidationReport,
    boundary_samples,
    curvature_at,
    frame_at,
    interior_angle,
    validate,
)
from .hypotheses import (
    BoundaryPartition,
    Classification,
    HypothesisReport,
    check_hypotheses,
    check_monotonicity,
    monotonicity_profile,
    normal_of_gamma_prime,
)
from .mesh import Grading, Mesh, MeshQualityError, generate, mesh_family, quality, refine
from .fem import (
    EigenResult,
    Extrapolation,
    SolverError,
    assemble,
    extrapolate,
    rayleigh_quotient,
    solve_smallest,
)

__version__ = "0.1.0"
