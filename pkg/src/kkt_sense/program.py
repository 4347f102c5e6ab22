"""Parameterized convex programs.

Two representations are provided:

* :class:`ParamQP`, a quadratic program whose data are affine in the
  parameter vector ``theta``;
* :class:`SmoothProgram`, a derivative-oracle interface for general
  twice-differentiable convex programs

      minimize    f0(x, theta)
      subject to  f(x, theta) <= 0,  h(x, theta) = 0,

  with ``h`` affine in ``x``.

:func:`qp_as_smooth` views a ``ParamQP`` through the oracle interface.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np


class ProgramError(ValueError):
    """Invalid program data. ``field`` names the offending entry when known."""

    def __init__(self, message: str, field: str | None = None):
        super().__init__(message)
        self.field = field


@dataclass(frozen=True)
class PrimalDualPoint:
    """A candidate ``(x, lambda, nu)``; feasibility is checked elsewhere."""

    x: np.ndarray
    lam: np.ndarray
    nu: np.ndarray

    def __post_init__(self):
        for name in ("x", "lam", "nu"):
            object.__setattr__(self, name, np.atleast_1d(np.asarray(getattr(self, name), dtype=float)))

    @property
    def z(self) -> np.ndarray:
        return np.concatenate([self.x, self.lam, self.nu])

    @classmethod
    def from_z(cls, z, n: int, m: int) -> PrimalDualPoint:
        z = np.asarray(z, dtype=float)
        return cls(z[:n].copy(), z[n:n + m].copy(), z[n + m:].copy())


class QPData(NamedTuple):
    Q: np.ndarray
    q: np.ndarray
    G: np.ndarray
    h: np.ndarray
    A: np.ndarray
    b: np.ndarray


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


def _as_array(value, shape: tuple[int, ...], field: str) -> np.ndarray:
    try:
        arr = np.asarray(value, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ProgramError(f"{field}: not a numeric array ({exc})", field) from exc
    if arr.size == 0 and 0 in shape:
        arr = arr.reshape(shape)
    if arr.shape != shape:
        raise ProgramError(f"{field}: expected shape {shape}, got {arr.shape}", field)
    if not np.all(np.isfinite(arr)):
        raise ProgramError(f"{field}: contains non-finite entries", field)
    return _frozen(np.array(arr))


def _symmetrized(a: np.ndarray) -> np.ndarray:
    a = np.array(a)
    if a.ndim == 2:
        a = 0.5 * (a + a.T)
    else:
        a = 0.5 * (a + np.swapaxes(a, -1, -2))
    return _frozen(a)


class ParamQP:
    """QP with data affine in ``theta``::

        minimize    1/2 x^T Q(theta) x + q(theta)^T x
        subject to  G(theta) x <= h(theta),  A(theta) x = b(theta)

    where each datum is ``base + sum_k theta_k * direction[k]``. Direction
    lists are stored stacked, e.g. ``Qk`` has shape ``(d, n, n)``.

    Q matrices are symmetrized on construction. Positive semidefiniteness is
    not verified here; the solver detects failures at solve time.
    """

    __slots__ = ("n", "m", "p", "d", "Q0", "Qk", "q0", "qk", "G0", "Gk",
                 "h0", "hk", "A0", "Ak", "b0", "bk")

    def __init__(self, n, m, p, d, *, Q0, q0, Qk=None, qk=None, G0=None, Gk=None,
                 h0=None, hk=None, A0=None, Ak=None, b0=None, bk=None):
        for name, val in (("n", n), ("m", m), ("p", p), ("d", d)):
            if isinstance(val, bool) or not isinstance(val, (int, np.integer)) or val < 0:
                raise ProgramError(f"{name}: must be a nonnegative integer, got {val!r}", name)
        n, m, p, d = int(n), int(m), int(p), int(d)
        if n == 0:
            raise ProgramError("n: need at least one variable", "n")

        def get(value, shape, field):
            if value is None:
                return _frozen(np.zeros(shape))
            return _as_array(value, shape, field)

        set_ = object.__setattr__
        set_(self, "n", n)
        set_(self, "m", m)
        set_(self, "p", p)
        set_(self, "d", d)
        set_(self, "Q0", _symmetrized(_as_array(Q0, (n, n), "Q0")))
        set_(self, "Qk", _symmetrized(get(Qk, (d, n, n), "Qk")))
        set_(self, "q0", _as_array(q0, (n,), "q0"))
        set_(self, "qk", get(qk, (d, n), "qk"))
        set_(self, "G0", get(G0, (m, n), "G0"))
        set_(self, "Gk", get(Gk, (d, m, n), "Gk"))
        set_(self, "h0", get(h0, (m,), "h0"))
        set_(self, "hk", get(hk, (d, m), "hk"))
        set_(self, "A0", get(A0, (p, n), "A0"))
        set_(self, "Ak", get(Ak, (d, p, n), "Ak"))
        set_(self, "b0", get(b0, (p,), "b0"))
        set_(self, "bk", get(bk, (d, p), "bk"))

    def __setattr__(self, name, value):
        raise AttributeError("ParamQP is immutable")

    def __repr__(self):
        return f"ParamQP(n={self.n}, m={self.m}, p={self.p}, d={self.d})"

    def data_at(self, theta) -> QPData:
        return qp_data_at(self, theta)


def check_theta(theta, d: int) -> np.ndarray:
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    if theta.ndim != 1 or theta.shape[0] != d:
        raise ProgramError(f"theta: expected length {d}, got shape {theta.shape}", "theta")
    return theta


def qp_data_at(prog: ParamQP, theta) -> QPData:
    """Instantiate ``Q, q, G, h, A, b`` at ``theta``."""
    t = check_theta(theta, prog.d)

    def affine(base, dirs):
        if prog.d == 0:
            return base.copy()
        return base + np.tensordot(t, dirs, axes=1)

    Q = affine(prog.Q0, prog.Qk)
    return QPData(0.5 * (Q + Q.T), affine(prog.q0, prog.qk), affine(prog.G0, prog.Gk),
                  affine(prog.h0, prog.hk), affine(prog.A0, prog.Ak), affine(prog.b0, prog.bk))


class SmoothProgram:
    """Derivative oracles for a parameterized convex program.

    Subclasses set ``n, m, p, d`` and override the oracles they need. The
    constraint oracles default to "no constraints" and the theta-derivative
    oracles to zero, so an unconstrained, theta-free program only has to
    supply ``eval_f0``, ``grad_f0`` and ``hess_f0``.

    Shapes: ``cross_grad_f0`` is ``(n, d)``; ``cross_jac_f`` stacks the
    ``(n, d)`` blocks ``D_theta grad_x f_i`` into ``(m, n, d)``;
    ``cross_jac_h`` likewise is ``(p, n, d)``.
    """

    n: int = 0
    m: int = 0
    p: int = 0
    d: int = 0

    def eval_f0(self, x, theta) -> float:
        raise NotImplementedError

    def grad_f0(self, x, theta) -> np.ndarray:
        raise NotImplementedError

    def hess_f0(self, x, theta) -> np.ndarray:
        raise NotImplementedError

    def eval_f(self, x, theta) -> np.ndarray:
        return np.zeros(self.m)

    def jac_f_x(self, x, theta) -> np.ndarray:
        return np.zeros((self.m, self.n))

    def hess_f_i_x(self, x, theta, i: int) -> np.ndarray:
        return np.zeros((self.n, self.n))

    def eval_h(self, x, theta) -> np.ndarray:
        return np.zeros(self.p)

    def jac_h_x(self, x, theta) -> np.ndarray:
        return np.zeros((self.p, self.n))

    def cross_grad_f0(self, x, theta) -> np.ndarray:
        return np.zeros((self.n, self.d))

    def cross_jac_f(self, x, theta) -> np.ndarray:
        return np.zeros((self.m, self.n, self.d))

    def jac_f_theta(self, x, theta) -> np.ndarray:
        return np.zeros((self.m, self.d))

    def jac_h_theta(self, x, theta) -> np.ndarray:
        return np.zeros((self.p, self.d))

    def cross_jac_h(self, x, theta) -> np.ndarray:
        return np.zeros((self.p, self.n, self.d))

    def hess_f_sum(self, x, theta, weights) -> np.ndarray:
        """``sum_i weights_i * hess_f_i_x``; override when a closed form is cheaper."""
        out = np.zeros((self.n, self.n))
        for i, w in enumerate(weights):
            if w != 0.0:
                out += w * np.asarray(self.hess_f_i_x(x, theta, i), dtype=float)
        return out


class QPSmoothProgram(SmoothProgram):
    """A :class:`ParamQP` seen through the :class:`SmoothProgram` oracles."""

    def __init__(self, qp: ParamQP):
        self.qp = qp
        self.n, self.m, self.p, self.d = qp.n, qp.m, qp.p, qp.d
        self._cache = None

    def _data(self, theta) -> QPData:
        theta = np.asarray(theta, dtype=float)
        cached = self._cache
        if cached is not None and np.array_equal(cached[0], theta):
            return cached[1]
        data = qp_data_at(self.qp, theta)
        self._cache = (theta.copy(), data)
        return data

    def eval_f0(self, x, theta):
        D = self._data(theta)
        return float(0.5 * x @ D.Q @ x + D.q @ x)

    def grad_f0(self, x, theta):
        D = self._data(theta)
        return D.Q @ x + D.q

    def hess_f0(self, x, theta):
        return self._data(theta).Q.copy()

    def eval_f(self, x, theta):
        D = self._data(theta)
        return D.G @ x - D.h

    def jac_f_x(self, x, theta):
        return self._data(theta).G.copy()

    def hess_f_i_x(self, x, theta, i):
        return np.zeros((self.n, self.n))

    def hess_f_sum(self, x, theta, weights):
        return np.zeros((self.n, self.n))

    def eval_h(self, x, theta):
        D = self._data(theta)
        return D.A @ x - D.b

    def jac_h_x(self, x, theta):
        return self._data(theta).A.copy()

    def cross_grad_f0(self, x, theta):
        qp = self.qp
        # column k: Qk[k] x + qk[k]
        return (qp.Qk @ x + qp.qk).T if qp.d else np.zeros((self.n, 0))

    def cross_jac_f(self, x, theta):
        # D_theta of row i of G(theta): entry [i, j, k] = Gk[k, i, j]
        return np.transpose(self.qp.Gk, (1, 2, 0)).copy()

    def jac_f_theta(self, x, theta):
        qp = self.qp
        return (qp.Gk @ x - qp.hk).T if qp.d else np.zeros((self.m, 0))

    def jac_h_theta(self, x, theta):
        qp = self.qp
        return (qp.Ak @ x - qp.bk).T if qp.d else np.zeros((self.p, 0))

    def cross_jac_h(self, x, theta):
        return np.transpose(self.qp.Ak, (1, 2, 0)).copy()


def qp_as_smooth(prog: ParamQP) -> QPSmoothProgram:
    return QPSmoothProgram(prog)
