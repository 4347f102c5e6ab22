"""KKT residual, its partial Jacobians, and optimality checks.

With ``z = (x, lam, nu)`` the residual is::

    g(z, theta) = [ grad_x L(x, lam, nu, theta) ]
                  [ diag(lam) f(x, theta)       ]
                  [ h(x, theta)                 ]

``g = 0`` is necessary but not sufficient for optimality: the sign
conditions ``f <= 0`` and ``lam >= 0`` must be checked separately, which
:func:`check_kkt` does.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .program import ParamQP, PrimalDualPoint, SmoothProgram, check_theta, qp_data_at


class OracleError(RuntimeError):
    """A derivative oracle raised or returned something of the wrong shape."""

    def __init__(self, oracle: str, message: str):
        super().__init__(f"oracle {oracle!r} failed: {message}")
        self.oracle = oracle


def call_oracle(prog: SmoothProgram, name: str, *args, shape: tuple[int, ...] | None = None):
    try:
        out = getattr(prog, name)(*args)
    except OracleError:
        raise
    except Exception as exc:
        raise OracleError(name, f"{type(exc).__name__}: {exc}") from exc
    if shape == ():
        return float(out)
    out = np.asarray(out, dtype=float)
    if shape is not None and out.shape != shape:
        if out.size == 0 and 0 in shape:
            return out.reshape(shape)
        raise OracleError(name, f"expected shape {shape}, got {out.shape}")
    return out


def _check_point(prog: SmoothProgram, z: PrimalDualPoint, theta) -> np.ndarray:
    if z.x.shape != (prog.n,) or z.lam.shape != (prog.m,) or z.nu.shape != (prog.p,):
        raise ValueError(
            f"point dimensions (x={z.x.shape}, lam={z.lam.shape}, nu={z.nu.shape}) "
            f"do not match program (n={prog.n}, m={prog.m}, p={prog.p})"
        )
    return check_theta(theta, prog.d)


@dataclass(frozen=True)
class KKTResidual:
    stationarity: np.ndarray
    complementarity: np.ndarray
    primal_eq: np.ndarray
    norm_inf: float

    @classmethod
    def from_blocks(cls, stationarity, complementarity, primal_eq) -> KKTResidual:
        blocks = [np.abs(b) for b in (stationarity, complementarity, primal_eq) if b.size]
        norm = max((float(b.max()) for b in blocks), default=0.0)
        if any(not np.all(np.isfinite(b)) for b in blocks):
            norm = float("inf")
        return cls(stationarity, complementarity, primal_eq, norm)

    @property
    def vector(self) -> np.ndarray:
        return np.concatenate([self.stationarity, self.complementarity, self.primal_eq])


@dataclass(frozen=True)
class DegeneracyReport:
    """Constraints that are active, and those active with a vanishing multiplier.

    A nonempty ``weakly_active`` set means strict complementarity fails and
    the solution map may not be differentiable at this point.
    """

    active_set: list[int]
    weakly_active: list[int]
    tol_act: float = 0.0

    @property
    def strictly_complementary(self) -> bool:
        return not self.weakly_active

    def to_dict(self) -> dict:
        return {
            "active_set": list(self.active_set),
            "weakly_active": list(self.weakly_active),
            "strictly_complementary": self.strictly_complementary,
        }


@dataclass(frozen=True)
class KKTCheck:
    satisfied: bool
    residual: KKTResidual
    ineq_violation: float
    dual_violation: float
    degeneracy: DegeneracyReport
    # None when p == 0 or the spot check could not be evaluated
    equality_affine: bool | None = field(default=None)


def eval_lagrangian_grad(prog: SmoothProgram, z: PrimalDualPoint, theta) -> np.ndarray:
    """``grad_f0 + jac_f_x^T lam + jac_h_x^T nu``."""
    theta = _check_point(prog, z, theta)
    n, m, p = prog.n, prog.m, prog.p
    grad = call_oracle(prog, "grad_f0", z.x, theta, shape=(n,)).copy()
    if m:
        grad += call_oracle(prog, "jac_f_x", z.x, theta, shape=(m, n)).T @ z.lam
    if p:
        grad += call_oracle(prog, "jac_h_x", z.x, theta, shape=(p, n)).T @ z.nu
    return grad


def assemble_residual(prog: SmoothProgram, z: PrimalDualPoint, theta) -> KKTResidual:
    theta = _check_point(prog, z, theta)
    stat = eval_lagrangian_grad(prog, z, theta)
    f = call_oracle(prog, "eval_f", z.x, theta, shape=(prog.m,))
    h = call_oracle(prog, "eval_h", z.x, theta, shape=(prog.p,))
    return KKTResidual.from_blocks(stat, z.lam * f, h)


def assemble_kkt_jacobian(prog: SmoothProgram, z: PrimalDualPoint, theta) -> np.ndarray:
    """Partial Jacobian of ``g`` in ``z``::

        [ H_L            Jf^T       Jh^T ]
        [ diag(lam) Jf   diag(f)    0    ]
        [ Jh             0          0    ]

    with ``H_L = hess_f0 + sum_i lam_i hess_f_i``. Not symmetric in general.
    """
    theta = _check_point(prog, z, theta)
    n, m, p = prog.n, prog.m, prog.p
    x = z.x
    K = np.zeros((n + m + p, n + m + p))
    H = call_oracle(prog, "hess_f0", x, theta, shape=(n, n)).copy()
    if m:
        H += call_oracle(prog, "hess_f_sum", x, theta, z.lam, shape=(n, n))
        Jf = call_oracle(prog, "jac_f_x", x, theta, shape=(m, n))
        f = call_oracle(prog, "eval_f", x, theta, shape=(m,))
        K[:n, n:n + m] = Jf.T
        K[n:n + m, :n] = z.lam[:, None] * Jf
        K[n:n + m, n:n + m] = np.diag(f)
    if p:
        Jh = call_oracle(prog, "jac_h_x", x, theta, shape=(p, n))
        K[:n, n + m:] = Jh.T
        K[n + m:, :n] = Jh
    K[:n, :n] = H
    return K


def assemble_param_jacobian(prog: SmoothProgram, z: PrimalDualPoint, theta) -> np.ndarray:
    """Partial Jacobian of ``g`` in ``theta``, shape ``(n+m+p, d)``."""
    theta = _check_point(prog, z, theta)
    n, m, p, d = prog.n, prog.m, prog.p, prog.d
    x = z.x
    R = np.zeros((n + m + p, d))
    if d == 0:
        return R
    top = call_oracle(prog, "cross_grad_f0", x, theta, shape=(n, d)).copy()
    if m:
        top += np.tensordot(z.lam, call_oracle(prog, "cross_jac_f", x, theta, shape=(m, n, d)), axes=1)
        R[n:n + m] = z.lam[:, None] * call_oracle(prog, "jac_f_theta", x, theta, shape=(m, d))
    if p:
        top += np.tensordot(z.nu, call_oracle(prog, "cross_jac_h", x, theta, shape=(p, n, d)), axes=1)
        R[n + m:] = call_oracle(prog, "jac_h_theta", x, theta, shape=(p, d))
    R[:n] = top
    return R


def degeneracy_report(f: np.ndarray, lam: np.ndarray, tol_act: float) -> DegeneracyReport:
    active = [int(i) for i in np.flatnonzero(np.abs(f) <= tol_act)]
    weak = [i for i in active if lam[i] <= tol_act]
    return DegeneracyReport(active, weak, tol_act)


def _equality_affine(prog: SmoothProgram, x: np.ndarray, theta: np.ndarray) -> bool | None:
    if prog.p == 0:
        return None
    rng = np.random.default_rng(0)
    try:
        Jh = call_oracle(prog, "jac_h_x", x, theta, shape=(prog.p, prog.n))
        for _ in range(2):
            y = x + rng.standard_normal(prog.n)
            Jy = call_oracle(prog, "jac_h_x", y, theta, shape=(prog.p, prog.n))
            if not np.allclose(Jy, Jh, rtol=1e-10, atol=1e-12):
                return False
    except OracleError:
        return None
    return True


def check_kkt(prog: SmoothProgram, z: PrimalDualPoint, theta, tol: float) -> KKTCheck:
    """Test the full KKT conditions at ``z`` to tolerance ``tol``.

    ``satisfied`` requires ``||g||_inf <= tol``, ``max f <= tol`` and
    ``min lam >= -tol``. Degeneracy uses the looser threshold ``sqrt(tol)``.
    """
    if not tol > 0:
        raise ValueError(f"tol must be positive, got {tol!r}")
    theta = _check_point(prog, z, theta)
    res = assemble_residual(prog, z, theta)
    f = call_oracle(prog, "eval_f", z.x, theta, shape=(prog.m,))
    ineq = max(0.0, float(f.max())) if prog.m else 0.0
    dual = max(0.0, -float(z.lam.min())) if prog.m else 0.0
    if not np.all(np.isfinite(f)):
        ineq = float("inf")
    satisfied = res.norm_inf <= tol and ineq <= tol and dual <= tol
    return KKTCheck(
        satisfied=bool(satisfied),
        residual=res,
        ineq_violation=ineq,
        dual_violation=dual,
        degeneracy=degeneracy_report(f, z.lam, float(np.sqrt(tol))),
        equality_affine=_equality_affine(prog, z.x, theta),
    )


def qp_kkt_jacobian(prog: ParamQP, z: PrimalDualPoint, theta) -> np.ndarray:
    """Closed-form ``[[Q, G^T, A^T], [diag(lam) G, diag(Gx - h), 0], [A, 0, 0]]``."""
    D = qp_data_at(prog, theta)
    n, m, p = prog.n, prog.m, prog.p
    if z.x.shape != (n,) or z.lam.shape != (m,) or z.nu.shape != (p,):
        raise ValueError("point dimensions do not match program")
    return np.block([
        [D.Q, D.G.T, D.A.T],
        [np.diag(z.lam) @ D.G, np.diag(D.G @ z.x - D.h), np.zeros((m, p))],
        [D.A, np.zeros((p, m)), np.zeros((p, p))],
    ])


def qp_param_jacobian(prog: ParamQP, z: PrimalDualPoint, theta) -> np.ndarray:
    """Closed-form theta-block; column k is built from the k-th directions."""
    check_theta(theta, prog.d)
    n, m, p, d = prog.n, prog.m, prog.p, prog.d
    if z.x.shape != (n,) or z.lam.shape != (m,) or z.nu.shape != (p,):
        raise ValueError("point dimensions do not match program")
    R = np.zeros((n + m + p, d))
    x, lam, nu = z.x, z.lam, z.nu
    for k in range(d):
        R[:n, k] = prog.Qk[k] @ x + prog.qk[k] + prog.Gk[k].T @ lam + prog.Ak[k].T @ nu
        R[n:n + m, k] = lam * (prog.Gk[k] @ x - prog.hk[k])
        R[n + m:, k] = prog.Ak[k] @ x - prog.bk[k]
    return R
