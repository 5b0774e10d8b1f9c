"""Parallel-in-time preconditioned solvers for Sinc-collocation
all-at-once systems.

The toolkit assembles the dense space-time system arising from collocated
indefinite integration of initial-value problems, solves it with
right-preconditioned GMRES through rank-one-perturbation preconditioners
applied by block diagonalization, and ships a spectral lab that certifies
the eigenvalue clustering and conditioning claims numerically.
"""

from .errors import (
    ConfigError,
    DegenerateOperatorError,
    DiagonalizationError,
    InnerSolveError,
    NearSingularPredictionError,
    NewtonDivergenceError,
    NumericalFailureError,
    ParameterError,
    ShapeError,
    ShiftSolveError,
    SingularSystemError,
    SizeError,
    UnsupportedMetricError,
)
from .gmres import GmresConfig, GmresReport, gmres
from .models import (
    ProblemModel,
    error_max,
    laplacian_1d,
    laplacian_2d,
    make_allen_cahn,
    make_heat2d_const,
    make_heat2d_varying,
    make_synthetic_diagonal,
    make_wave2d,
    with_reference,
)
from .newton import NewtonConfig, NewtonReport, newton_solve
from .pipeline import (
    LINEAR_POLICIES,
    LinearRun,
    NonlinearRun,
    build_preconditioner,
    build_system,
    solve_linear,
    solve_nonlinear,
)
from .precond import (
    DampedSkewMatrix,
    DiagonalizedPreconditioner,
    KroneckerApprox,
    apply_forward,
    apply_inverse,
    average_operator,
    build_damped_skew,
    diagonalize_time_factor,
    kronecker_averaging,
    kronecker_nkpa,
    make_shift_solvers,
    nkpa_diagonal,
    shift_solvers_from_operator,
)
from .sinc import (
    SincGrid,
    SincIntegrationMatrix,
    SincParams,
    build_grid,
    build_integration_matrix,
    sigma_value,
    sinc_indefinite_integral,
    sinc_interpolate,
)
from .speclab import (
    SpectralReport,
    condition_growth,
    dense_preconditioned_spectrum,
    omega_sweep,
    predicted_nonunity,
    z_cross_check,
    z_function,
)
from .system import AllAtOnceSystem, assemble_constant, assemble_nonlinear, assemble_varying

__version__ = "0.1.0"
