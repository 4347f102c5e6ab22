"""Dense LU factorization with partial pivoting and multi right-hand-side solves.

The kernels come from the compiled ``_lu_ext`` module when it was built, and
from the numpy implementation in ``_lu_py`` otherwise. Set
``KKT_SENSE_PURE_PYTHON=1`` to force the fallback.
"""

from __future__ import annotations

import contextlib
import contextvars
import os
from types import ModuleType

import numpy as np

from . import _lu_py

try:
    if os.environ.get("KKT_SENSE_PURE_PYTHON", "0") not in ("", "0"):
        raise ImportError("compiled kernel disabled by KKT_SENSE_PURE_PYTHON")
    from . import _lu_ext
except ImportError:
    _lu_ext = None

BACKEND = "cython" if _lu_ext is not None else "python"

_BACKENDS: dict[str, ModuleType | None] = {"cython": _lu_ext, "python": _lu_py}

# per-context factorization tally; None when nobody is counting
_factor_count: contextvars.ContextVar[list[int] | None] = contextvars.ContextVar(
    "kkt_sense_factor_count", default=None
)


class SingularMatrixError(np.linalg.LinAlgError):
    def __init__(self, message: str, pivot_ratio: float):
        super().__init__(message)
        self.pivot_ratio = pivot_ratio


def available_backends() -> list[str]:
    return [name for name, mod in _BACKENDS.items() if mod is not None]


def _kernels(backend: str | None) -> ModuleType:
    name = backend or BACKEND
    mod = _BACKENDS.get(name)
    if mod is None:
        raise ValueError(f"LU backend {name!r} is not available")
    return mod


@contextlib.contextmanager
def count_factorizations():
    """Count LU factorizations performed inside the block (this context only).

    Yields a one-element list whose entry is the running count.
    """
    counter = [0]
    token = _factor_count.set(counter)
    try:
        yield counter
    finally:
        _factor_count.reset(token)


class LUFactorization:
    """``PA = LU`` of a square matrix, computed once and reused for many solves.

    Parameters
    ----------
    a : array_like, shape (n, n)
        Matrix to factor. It is copied; the input is never modified.
    pivot_tol : float
        Relative pivot threshold. If ``min |U_ii| <= pivot_tol * max |U_ii|``
        the matrix is declared singular.
    check : bool
        Raise :class:`SingularMatrixError` on a failed pivot test instead of
        only recording it in :attr:`singular`.
    backend : {"cython", "python"}, optional
        Kernel implementation; defaults to :data:`BACKEND`.
    """

    def __init__(self, a, pivot_tol: float = 1e-12, check: bool = True,
                 backend: str | None = None):
        a = np.array(a, dtype=float, order="C", copy=True)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError(f"expected a square matrix, got shape {a.shape}")
        self._kern = _kernels(backend)
        self.backend = backend or BACKEND
        self.n = a.shape[0]
        self.norm1 = float(np.abs(a).sum(axis=0).max()) if self.n else 0.0
        self.piv = np.zeros(self.n, dtype=np.intp)
        self._kern.lu_factor_inplace(a, self.piv)
        self.lu = a
        counter = _factor_count.get()
        if counter is not None:
            counter[0] += 1

        diag = np.abs(np.diag(a))
        if self.n == 0:
            self.pivot_ratio = 1.0
        elif diag.max() == 0.0 or not np.all(np.isfinite(diag)):
            self.pivot_ratio = 0.0
        else:
            self.pivot_ratio = float(diag.min() / diag.max())
        self.singular = self.pivot_ratio <= pivot_tol
        if check and self.singular:
            raise SingularMatrixError(
                f"matrix is numerically singular (pivot ratio {self.pivot_ratio:.3e})",
                self.pivot_ratio,
            )

    def solve(self, b, trans: bool = False) -> np.ndarray:
        """Solve ``A x = b`` (or ``A^T x = b``); ``b`` may hold several columns."""
        b = np.asarray(b, dtype=float)
        vector = b.ndim == 1
        if b.shape[0] != self.n or b.ndim > 2:
            raise ValueError(f"right-hand side of shape {b.shape} does not match n={self.n}")
        rhs = np.array(b[:, None] if vector else b, dtype=float, order="C", copy=True)
        if self.n and rhs.shape[1]:
            self._kern.lu_solve_inplace(self.lu, self.piv, rhs, bool(trans))
        return rhs[:, 0] if vector else rhs

    def inv_norm1_estimate(self, max_iter: int = 5) -> float:
        """Hager/Higham lower-bound estimate of ``||A^{-1}||_1``."""
        n = self.n
        if n == 0:
            return 0.0
        x = np.full(n, 1.0 / n)
        est = 0.0
        for it in range(max_iter):
            y = self.solve(x)
            est = float(np.abs(y).sum())
            xi = np.where(y >= 0.0, 1.0, -1.0)
            z = self.solve(xi, trans=True)
            j = int(np.argmax(np.abs(z)))
            if it > 0 and abs(z[j]) <= z @ x:
                break
            x = np.zeros(n)
            x[j] = 1.0
        # alternating test vector guards against the estimator's known failures
        alt = np.array([(-1.0) ** i * (1.0 + i / max(n - 1, 1)) for i in range(n)])
        alt_est = 2.0 * float(np.abs(self.solve(alt)).sum()) / (3.0 * n)
        return max(est, alt_est)

    def condition_estimate(self) -> float:
        """1-norm condition number estimate ``||A||_1 * est(||A^{-1}||_1)``."""
        if self.singular:
            return float("inf")
        return self.norm1 * self.inv_norm1_estimate()


__all__ = [
    "BACKEND",
    "LUFactorization",
    "SingularMatrixError",
    "available_backends",
    "count_factorizations",
]
