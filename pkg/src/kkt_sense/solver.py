"""Infeasible-start primal-dual interior-point method.

Each iteration solves the Newton system of the centered KKT residual::

    D_z g(z, theta) dz = -g_mu(z, theta),

where ``g_mu`` is ``g`` with ``mu`` added to the complementarity block, so
the iteration matrix is exactly the KKT Jacobian later used for
sensitivities. Iterates keep ``lam > 0`` and ``f(x) < 0``; equality
constraints are driven to zero by the Newton steps.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace

import numpy as np

from .kkt import (
    DegeneracyReport,
    OracleError,
    assemble_kkt_jacobian,
    assemble_residual,
    call_oracle,
    degeneracy_report,
)
from .linalg import LUFactorization, SingularMatrixError
from .program import PrimalDualPoint, SmoothProgram, check_theta

logger = logging.getLogger(__name__)

DIVERGENCE_NORM = 1e12
PUSH_STEPS = 50
PHASE1_REG = 1e-6
WARM_MARGIN = 1e-6
SHORT_STEP = 0.5
# mu is lowered only once stationarity and equality residuals are below this multiple of it
BARRIER_PROGRESS = 10.0
# iteration budget for a warm start before falling back to a cold start
WARM_ITERS = 25


class SolverError(RuntimeError):
    pass


class LinearSolveFailure(SolverError):
    """The Newton system was singular; the input is likely nonconvex or degenerate."""


class Diverged(SolverError):
    pass


@dataclass(frozen=True)
class SolverConfig:
    tol: float = 1e-9
    max_iters: int = 100
    barrier_decrease: float = 0.1
    fraction_to_boundary: float = 0.99
    init_slack: float = 1.0

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError(f"tol must be positive, got {self.tol!r}")
        if not 0 < self.barrier_decrease < 1:
            raise ValueError(f"barrier_decrease must lie in (0, 1), got {self.barrier_decrease!r}")
        if not 0 < self.fraction_to_boundary < 1:
            raise ValueError(
                f"fraction_to_boundary must lie in (0, 1), got {self.fraction_to_boundary!r}")
        if self.max_iters < 0:
            raise ValueError(f"max_iters must be nonnegative, got {self.max_iters!r}")
        if not self.init_slack > 0:
            raise ValueError(f"init_slack must be positive, got {self.init_slack!r}")


@dataclass(frozen=True)
class Solution:
    point: PrimalDualPoint
    optimal_value: float
    kkt_norm: float
    iters: int
    converged: bool
    degeneracy: DegeneracyReport
    status: str = "converged"


def _solve_newton(K: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    # row equilibration: complementarity rows shrink with lam and f near the solution
    scale = np.abs(K).max(axis=1) if K.size else np.ones(0)
    scale[scale == 0.0] = 1.0
    try:
        lu = LUFactorization(K / scale[:, None])
    except SingularMatrixError as exc:
        raise LinearSolveFailure(f"Newton system is singular ({exc})") from exc
    delta = lu.solve(rhs / scale)
    if not np.all(np.isfinite(delta)):
        raise LinearSolveFailure("Newton step is not finite")
    return delta


def newton_step(prog: SmoothProgram, z: PrimalDualPoint, theta, mu: float) -> PrimalDualPoint:
    """Newton direction for the residual with complementarity target ``-mu``.

    Meant for interior points (``lam > 0``, ``f(x) < 0``) but not enforced.
    """
    theta = check_theta(theta, prog.d)
    K = assemble_kkt_jacobian(prog, z, theta)
    rhs = -_centered(assemble_residual(prog, z, theta).vector, prog.n, prog.m, mu)
    return PrimalDualPoint.from_z(_solve_newton(K, rhs), prog.n, prog.m)


def _centered(r: np.ndarray, n: int, m: int, mu: float) -> np.ndarray:
    r = r.copy()
    r[n:n + m] += mu
    return r


def _strictly_feasible(prog, x, theta) -> bool:
    if prog.m == 0:
        return True
    try:
        f = call_oracle(prog, "eval_f", x, theta, shape=(prog.m,))
    except Exception:
        return False
    return bool(np.all(np.isfinite(f)) and np.all(f < 0))


def _keeps_slack(prog, x, theta, f_old, tau) -> bool:
    """Fraction-to-boundary on the actual constraint values: ``-f_new >= (1 - tau) * -f_old``."""
    if prog.m == 0:
        return True
    try:
        f = call_oracle(prog, "eval_f", x, theta, shape=(prog.m,))
    except OracleError:
        return False
    return bool(np.all(np.isfinite(f)) and np.all(f < 0) and np.all(f <= (1.0 - tau) * f_old))


def _push_feasible(prog, x, theta, margin) -> np.ndarray:
    """Project onto the linearization of the worst constraint until strictly feasible."""
    x = x.copy()
    for _ in range(PUSH_STEPS):
        f = call_oracle(prog, "eval_f", x, theta, shape=(prog.m,))
        if not np.all(np.isfinite(f)):
            break
        i = int(np.argmax(f))
        if f[i] < 0:
            return x
        gi = call_oracle(prog, "jac_f_x", x, theta, shape=(prog.m, prog.n))[i]
        gg = gi @ gi
        if gg == 0.0:
            break
        x -= (f[i] + margin) / gg * gi
    return x


class _PhaseOne(SmoothProgram):
    """``min t + r/2 (||x - x_ref||^2 + t^2)  s.t.  f(x) - t <= 0, h(x) = 0``."""

    def __init__(self, prog: SmoothProgram, x_ref: np.ndarray):
        self.base = prog
        self.x_ref = x_ref
        self.n, self.m, self.p, self.d = prog.n + 1, prog.m, prog.p, prog.d

    def eval_f0(self, y, theta):
        dx = y[:-1] - self.x_ref
        return y[-1] + 0.5 * PHASE1_REG * (dx @ dx + y[-1] ** 2)

    def grad_f0(self, y, theta):
        g = PHASE1_REG * np.concatenate([y[:-1] - self.x_ref, [y[-1]]])
        g[-1] += 1.0
        return g

    def hess_f0(self, y, theta):
        return PHASE1_REG * np.eye(self.n)

    def eval_f(self, y, theta):
        return self.base.eval_f(y[:-1], theta) - y[-1]

    def jac_f_x(self, y, theta):
        J = np.asarray(self.base.jac_f_x(y[:-1], theta), dtype=float)
        return np.hstack([J, -np.ones((self.m, 1))])

    def hess_f_sum(self, y, theta, weights):
        H = np.zeros((self.n, self.n))
        H[:-1, :-1] = self.base.hess_f_sum(y[:-1], theta, weights)
        return H

    def eval_h(self, y, theta):
        return self.base.eval_h(y[:-1], theta)

    def jac_h_x(self, y, theta):
        J = np.asarray(self.base.jac_h_x(y[:-1], theta), dtype=float)
        return np.hstack([J, np.zeros((self.p, 1))])


def _initial_point(prog, theta, config, warm_start):
    n, m, p = prog.n, prog.m, prog.p
    if warm_start is not None:
        if warm_start.x.shape != (n,) or warm_start.lam.shape != (m,) or warm_start.nu.shape != (p,):
            raise ValueError("warm start dimensions do not match program")
        x = warm_start.x.copy()
        lam = np.maximum(warm_start.lam, config.tol)
        nu = warm_start.nu.copy()
    else:
        x, lam, nu = np.zeros(n), np.ones(m), np.zeros(p)
    if _strictly_feasible(prog, x, theta):
        return x, lam, nu
    if warm_start is not None:
        # nudge a slightly infeasible warm start back inside, keeping its multipliers
        xw = _push_feasible(prog, x, theta, WARM_MARGIN)
        if _strictly_feasible(prog, xw, theta):
            return xw, lam, nu
        lam = np.ones(m)
    x = _push_feasible(prog, x, theta, config.init_slack)
    if _strictly_feasible(prog, x, theta):
        return x, lam, nu
    logger.debug("feasibility push failed; running phase one")
    aux = _PhaseOne(prog, x)
    f = call_oracle(prog, "eval_f", x, theta, shape=(m,))
    y = np.append(x, float(np.max(f)) + config.init_slack)
    state = _ipm(aux, theta, config, y, np.ones(m), nu.copy(),
                 stop=lambda z: z.x[-1] < 0)
    x = state[0].x[:-1]
    if not _strictly_feasible(prog, x, theta):
        raise SolverError("could not find a strictly feasible starting point "
                          "(problem may violate Slater's condition)")
    return x, lam, state[0].nu


def _ipm(prog, theta, config, x, lam, nu, stop=None, callback=None):
    """Run the interior-point loop; returns ``(best_point, best_kkt, iters, done)``."""
    n, m = prog.n, prog.m
    tau = config.fraction_to_boundary
    z = PrimalDualPoint(x, lam, nu)
    mu = np.inf
    last_alpha = 1.0
    best = (z, np.inf)
    iters = 0
    while True:
        res = assemble_residual(prog, z, theta)
        if res.norm_inf < best[1]:
            best = (z, res.norm_inf)
        if stop is not None and stop(z):
            return z, res.norm_inf, iters, True
        if stop is None and res.norm_inf <= config.tol:
            return z, res.norm_inf, iters, True
        if iters >= config.max_iters:
            return best[0], best[1], iters, False
        if not np.isfinite(res.norm_inf):
            raise Diverged("KKT residual became non-finite")

        if m:
            f = call_oracle(prog, "eval_f", z.x, theta, shape=(m,))
            # tighten centering only after a long step on a nearly solved barrier
            # subproblem; otherwise iterates get pressed onto curved boundaries
            other = max(np.abs(res.stationarity).max(initial=0.0),
                        np.abs(res.primal_eq).max(initial=0.0))
            if not np.isfinite(mu) or (last_alpha >= SHORT_STEP and other <= BARRIER_PROGRESS * mu):
                mu = min(mu, config.barrier_decrease * float(-(z.lam @ f)) / m)
        else:
            f = np.zeros(0)
            mu = 0.0
        K = assemble_kkt_jacobian(prog, z, theta)
        r_mu = _centered(res.vector, n, m, mu)
        dz = _solve_newton(K, -r_mu)
        dx, dlam = dz[:n], dz[n:n + m]

        alpha = 1.0
        if m:
            neg = dlam < 0
            if np.any(neg):
                alpha = min(alpha, tau * float(np.min(-z.lam[neg] / dlam[neg])))
            Jdx = call_oracle(prog, "jac_f_x", z.x, theta, shape=(m, prog.n)) @ dx
            up = Jdx > 0
            if np.any(up):
                alpha = min(alpha, tau * float(np.min(-f[up] / Jdx[up])))

        # backtrack on ||g_mu||_2; fall back to the longest admissible step
        merit = float(r_mu @ r_mu)
        znew = fallback = None
        for _ in range(50):
            cand = PrimalDualPoint.from_z(z.z + alpha * dz, n, m)
            if _keeps_slack(prog, cand.x, theta, f, tau):
                try:
                    r_new = _centered(assemble_residual(prog, cand, theta).vector, n, m, mu)
                except OracleError:
                    r_new = None
                if r_new is not None and np.all(np.isfinite(r_new)):
                    fallback = fallback or cand
                    if float(r_new @ r_new) <= (1.0 - 1e-4 * alpha) * merit:
                        znew = cand
                        break
            alpha *= 0.5
        z = znew or fallback
        if z is None:
            raise LinearSolveFailure("no admissible step along the Newton direction")
        last_alpha = alpha
        iters += 1
        if callback is not None:
            callback(iters, z, mu)
        if np.linalg.norm(z.z, np.inf) > DIVERGENCE_NORM:
            raise Diverged(f"iterate norm exceeded {DIVERGENCE_NORM:g}")


def solve(prog: SmoothProgram, theta, config: SolverConfig | None = None,
          warm_start: PrimalDualPoint | None = None, callback=None) -> Solution:
    """Find a KKT point of ``prog`` at ``theta``.

    Raises :class:`LinearSolveFailure` or :class:`Diverged`; running out of
    iterations returns the best iterate with ``converged=False``.
    ``callback(iteration, point, mu)`` is invoked after every accepted step.
    """
    config = config or SolverConfig()
    theta = check_theta(theta, prog.d)
    iters = 0
    converged = False
    if warm_start is not None:
        # a warm start far from the answer can stall on curved constraints
        budget = replace(config, max_iters=min(config.max_iters, WARM_ITERS))
        try:
            x, lam, nu = _initial_point(prog, theta, budget, warm_start)
            z, kkt_norm, iters, converged = _ipm(prog, theta, budget, x, lam, nu,
                                                 callback=callback)
        except (LinearSolveFailure, Diverged) as exc:
            logger.debug("warm start failed (%s); restarting cold", exc)
        if not converged:
            logger.debug("warm start did not converge; restarting cold")
    if not converged:
        x, lam, nu = _initial_point(prog, theta, config, None)
        z, kkt_norm, cold_iters, converged = _ipm(prog, theta, config, x, lam, nu,
                                                  callback=callback)
        iters += cold_iters

    lam = z.lam.copy()
    lam[(lam < 0) & (lam >= -config.tol)] = 0.0
    z = PrimalDualPoint(z.x, lam, z.nu)
    res = assemble_residual(prog, z, theta)
    f = call_oracle(prog, "eval_f", z.x, theta, shape=(prog.m,))
    return Solution(
        point=z,
        optimal_value=call_oracle(prog, "eval_f0", z.x, theta, shape=()),
        kkt_norm=res.norm_inf,
        iters=iters,
        converged=bool(converged and res.norm_inf <= config.tol),
        degeneracy=degeneracy_report(f, z.lam, float(np.sqrt(config.tol))),
        status="converged" if converged else "max_iters",
    )
