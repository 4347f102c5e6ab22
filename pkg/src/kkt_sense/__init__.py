"""Solve parameterized convex programs and differentiate their solutions.

The Jacobian of the primal-dual solution with respect to the parameters is
obtained from the implicit function theorem applied to the KKT residual.
"""

from .fd_oracle import FDReport, compare, fd_jacobian
from .kkt import (
    DegeneracyReport,
    KKTCheck,
    KKTResidual,
    OracleError,
    assemble_kkt_jacobian,
    assemble_param_jacobian,
    assemble_residual,
    check_kkt,
    eval_lagrangian_grad,
    qp_kkt_jacobian,
    qp_param_jacobian,
)
from .linalg import BACKEND
from .program import (
    ParamQP,
    PrimalDualPoint,
    ProgramError,
    QPData,
    SmoothProgram,
    qp_as_smooth,
    qp_data_at,
)
from .sensitivity import (
    DirectionalSensitivity,
    NotConverged,
    SensitivityResult,
    Singular,
    directional_sensitivity,
    qp_solution_jacobian,
    solution_jacobian,
)
from .solver import (
    Diverged,
    LinearSolveFailure,
    Solution,
    SolverConfig,
    SolverError,
    newton_step,
    solve,
)

__version__ = "0.1.0"

__all__ = [
    "assemble_kkt_jacobian",
    "assemble_param_jacobian",
    "assemble_residual",
    "BACKEND",
    "check_kkt",
    "compare",
    "DegeneracyReport",
    "directional_sensitivity",
    "DirectionalSensitivity",
    "Diverged",
    "eval_lagrangian_grad",
    "fd_jacobian",
    "FDReport",
    "KKTCheck",
    "KKTResidual",
    "LinearSolveFailure",
    "newton_step",
    "NotConverged",
    "OracleError",
    "ParamQP",
    "PrimalDualPoint",
    "ProgramError",
    "qp_as_smooth",
    "qp_data_at",
    "qp_kkt_jacobian",
    "qp_param_jacobian",
    "qp_solution_jacobian",
    "QPData",
    "SensitivityResult",
    "Singular",
    "SmoothProgram",
    "Solution",
    "solution_jacobian",
    "solve",
    "SolverConfig",
    "SolverError",
]
