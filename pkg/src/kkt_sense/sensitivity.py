"""Jacobian of the primal-dual solution with respect to the parameters.

At a KKT point ``z`` with ``g(z, theta) = 0`` and nonsingular ``K = D_z g``,
the implicit function theorem gives::

    D_theta z = -K^{-1} D_theta g.

``K`` is factored once and the ``d`` right-hand sides are solved against that
single factorization.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .kkt import (
    DegeneracyReport,
    assemble_kkt_jacobian,
    assemble_param_jacobian,
    check_kkt,
    qp_kkt_jacobian,
    qp_param_jacobian,
)
from .linalg import LUFactorization, SingularMatrixError, count_factorizations
from .program import ParamQP, SmoothProgram, check_theta, qp_as_smooth
from .solver import Solution, SolverConfig

DEFAULT_TOL = SolverConfig.tol
PIVOT_TOL = 1e-12


class SensitivityError(RuntimeError):
    pass


class Singular(SensitivityError):
    """The KKT Jacobian is numerically singular at the solution."""

    def __init__(self, message: str, pivot_ratio: float):
        super().__init__(message)
        self.pivot_ratio = pivot_ratio


class NotConverged(SensitivityError):
    pass


@dataclass(frozen=True)
class SensitivityResult:
    jac_x: np.ndarray
    jac_lambda: np.ndarray
    jac_nu: np.ndarray
    condition_estimate: float
    degeneracy: DegeneracyReport
    hypotheses_ok: bool
    kkt_norm: float
    # ||K J + R||_inf for the returned J
    linear_residual: float
    factorizations: int

    @property
    def stacked(self) -> np.ndarray:
        return np.vstack([self.jac_x, self.jac_lambda, self.jac_nu])


@dataclass(frozen=True)
class DirectionalSensitivity:
    dx: np.ndarray
    dlambda: np.ndarray
    dnu: np.ndarray


def _factor(K: np.ndarray) -> LUFactorization:
    try:
        return LUFactorization(K, pivot_tol=PIVOT_TOL)
    except SingularMatrixError as exc:
        raise Singular(
            f"KKT Jacobian is singular at the solution (pivot ratio {exc.pivot_ratio:.3e}); "
            "the solution map is not locally differentiable by the implicit function theorem",
            exc.pivot_ratio,
        ) from exc


def _prepare(prog: SmoothProgram, sol: Solution, theta, tol: float):
    if not sol.converged:
        raise NotConverged("solution did not converge; refusing to differentiate it")
    theta = check_theta(theta, prog.d)
    chk = check_kkt(prog, sol.point, theta, tol)
    return theta, chk


def _jacobian(K, R, n, m, chk, count) -> SensitivityResult:
    lu = _factor(K)
    J = -lu.solve(R)
    cond = lu.condition_estimate()
    lin_res = float(np.abs(K @ J + R).max()) if J.size else 0.0
    return SensitivityResult(
        jac_x=J[:n],
        jac_lambda=J[n:n + m],
        jac_nu=J[n + m:],
        condition_estimate=cond,
        degeneracy=chk.degeneracy,
        hypotheses_ok=bool(chk.degeneracy.strictly_complementary and chk.satisfied),
        kkt_norm=chk.residual.norm_inf,
        linear_residual=lin_res,
        factorizations=count[0],
    )


def solution_jacobian(prog: SmoothProgram, sol: Solution, theta,
                      tol: float = DEFAULT_TOL) -> SensitivityResult:
    """Differentiate ``(x, lam, nu)`` with respect to ``theta`` at ``sol``.

    Raises :class:`NotConverged` for an unconverged ``sol`` and
    :class:`Singular` when the KKT Jacobian fails the pivot test. A point
    without strict complementarity still gets a Jacobian, flagged with
    ``hypotheses_ok=False``.
    """
    with count_factorizations() as count:
        theta, chk = _prepare(prog, sol, theta, tol)
        K = assemble_kkt_jacobian(prog, sol.point, theta)
        R = assemble_param_jacobian(prog, sol.point, theta)
        return _jacobian(K, R, prog.n, prog.m, chk, count)


def qp_solution_jacobian(qp: ParamQP, sol: Solution, theta,
                         tol: float = DEFAULT_TOL) -> SensitivityResult:
    """Same as :func:`solution_jacobian`, assembled from the closed-form QP blocks."""
    with count_factorizations() as count:
        theta, chk = _prepare(qp_as_smooth(qp), sol, theta, tol)
        K = qp_kkt_jacobian(qp, sol.point, theta)
        R = qp_param_jacobian(qp, sol.point, theta)
        return _jacobian(K, R, qp.n, qp.m, chk, count)


def directional_sensitivity(prog: SmoothProgram, sol: Solution, theta, direction,
                            tol: float = DEFAULT_TOL) -> DirectionalSensitivity:
    """``D_theta (x, lam, nu) @ direction`` with a single back-solve."""
    theta, _ = _prepare(prog, sol, theta, tol)
    v = np.asarray(direction, dtype=float)
    if v.shape != (prog.d,):
        raise ValueError(f"direction: expected length {prog.d}, got shape {v.shape}")
    K = assemble_kkt_jacobian(prog, sol.point, theta)
    R = assemble_param_jacobian(prog, sol.point, theta)
    dz = -_factor(K).solve(R @ v)
    n, m = prog.n, prog.m
    return DirectionalSensitivity(dz[:n], dz[n:n + m], dz[n + m:])
