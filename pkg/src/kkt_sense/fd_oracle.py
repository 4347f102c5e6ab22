"""Solution Jacobian by central differences over full re-solves.

This path shares nothing with the implicit-function computation except the
solver itself, which makes it a usable independent check.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .program import SmoothProgram, check_theta
from .solver import Solution, SolverConfig, SolverError, solve

DEFAULT_STEP = 1e-5
# re-solve noise is amplified by 1/(2h); 1e-9 solves leave ~1e-4 error at h = 1e-5
FD_SOLVE_TOL = 1e-11


@dataclass(frozen=True)
class FDReport:
    jac_fd: np.ndarray
    max_rel_err: float
    worst_entry: tuple[int, int] | None
    per_column_solve_failures: list[int]


def _resolve(prog, theta, config, warm):
    try:
        sol = solve(prog, theta, config, warm_start=warm)
    except SolverError:
        return None
    return sol.point.x if sol.converged else None


def fd_jacobian(prog: SmoothProgram, theta, config: SolverConfig | None = None,
                step: float = DEFAULT_STEP, base: Solution | None = None,
                max_workers: int | None = None) -> np.ndarray:
    """Central-difference ``D_theta x``; columns whose re-solves fail are NaN.

    Column ``k`` uses ``h = step * (1 + |theta_k|)``. Every re-solve is warm
    started from ``base`` (solved here when not given). Without an explicit
    ``config`` the re-solves run at ``FD_SOLVE_TOL``.
    """
    config = config or SolverConfig(tol=FD_SOLVE_TOL)
    theta = check_theta(theta, prog.d)
    if not step > 0:
        raise ValueError(f"step must be positive, got {step!r}")
    if base is None:
        base = solve(prog, theta, config)
    warm = base.point if base.converged else None

    def column(k):
        h = step * (1.0 + abs(theta[k]))
        tp, tm = theta.copy(), theta.copy()
        tp[k] += h
        tm[k] -= h
        xp = _resolve(prog, tp, config, warm)
        xm = _resolve(prog, tm, config, warm)
        if xp is None or xm is None:
            return np.full(prog.n, np.nan)
        return (xp - xm) / (tp[k] - tm[k])

    if max_workers and max_workers > 1 and prog.d > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            cols = list(pool.map(column, range(prog.d)))
    else:
        cols = [column(k) for k in range(prog.d)]
    if not cols:
        return np.zeros((prog.n, 0))
    return np.column_stack(cols)


def compare(analytic, fd) -> FDReport:
    """Max of ``|a - b| / (1 + |a|)`` over the columns the FD pass solved."""
    a = np.asarray(analytic, dtype=float)
    b = np.asarray(fd, dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: analytic {a.shape} vs fd {b.shape}")
    failed = [int(k) for k in range(b.shape[1]) if not np.all(np.isfinite(b[:, k]))]
    ok = [k for k in range(b.shape[1]) if k not in failed]
    if not ok or a.shape[0] == 0:
        return FDReport(b, 0.0, None, failed)
    err = np.abs(a[:, ok] - b[:, ok]) / (1.0 + np.abs(a[:, ok]))
    i, j = np.unravel_index(int(np.argmax(err)), err.shape)
    return FDReport(b, float(err[i, j]), (int(i), int(ok[j])), failed)
