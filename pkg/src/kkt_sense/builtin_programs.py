"""Nonlinear test programs that exercise the general oracle path.

Each program has ``n == d``; the parameter count is taken from ``theta``.
"""

from __future__ import annotations

import numpy as np

from .program import SmoothProgram


class LogSumProgram(SmoothProgram):
    """``minimize logsumexp(x) + 1/2 ||x - theta||^2`` (unconstrained)."""

    def __init__(self, d: int):
        self.n = self.d = d

    @staticmethod
    def _softmax(x):
        e = np.exp(x - x.max())
        return e / e.sum()

    def eval_f0(self, x, theta):
        c = x.max()
        return float(c + np.log(np.exp(x - c).sum()) + 0.5 * np.sum((x - theta) ** 2))

    def grad_f0(self, x, theta):
        return self._softmax(x) + x - theta

    def hess_f0(self, x, theta):
        s = self._softmax(x)
        return np.diag(s) - np.outer(s, s) + np.eye(self.n)

    def cross_grad_f0(self, x, theta):
        return -np.eye(self.n)


class EntropicProgram(SmoothProgram):
    """``minimize sum x_i log x_i - theta^T x  s.t.  1^T x = 1,  eps - x_i <= 0``."""

    def __init__(self, d: int, eps: float = 1e-6):
        self.n = self.d = self.m = d
        self.p = 1
        self.eps = eps

    def eval_f0(self, x, theta):
        return float(np.sum(x * np.log(x)) - theta @ x)

    def grad_f0(self, x, theta):
        return np.log(x) + 1.0 - theta

    def hess_f0(self, x, theta):
        return np.diag(1.0 / x)

    def cross_grad_f0(self, x, theta):
        return -np.eye(self.n)

    def eval_f(self, x, theta):
        return self.eps - x

    def jac_f_x(self, x, theta):
        return -np.eye(self.n)

    def hess_f_sum(self, x, theta, weights):
        return np.zeros((self.n, self.n))

    def eval_h(self, x, theta):
        return np.array([x.sum() - 1.0])

    def jac_h_x(self, x, theta):
        return np.ones((1, self.n))


class BallProgram(SmoothProgram):
    """``minimize 1/2 ||x - 2 theta||^2  s.t.  1/2 (||x - theta/2||^2 - 1) <= 0``.

    The constraint is curved and moves with ``theta``, so both the constraint
    Hessian and the constraint cross-derivatives are nonzero. The solution is
    ``theta/2 + theta/||theta||`` when ``||theta|| > 2/3`` and ``2 theta`` otherwise.
    """

    def __init__(self, d: int):
        self.n = self.d = d
        self.m = 1

    def eval_f0(self, x, theta):
        return float(0.5 * np.sum((x - 2.0 * theta) ** 2))

    def grad_f0(self, x, theta):
        return x - 2.0 * theta

    def hess_f0(self, x, theta):
        return np.eye(self.n)

    def cross_grad_f0(self, x, theta):
        return -2.0 * np.eye(self.n)

    def eval_f(self, x, theta):
        r = x - 0.5 * theta
        return np.array([0.5 * (r @ r - 1.0)])

    def jac_f_x(self, x, theta):
        return (x - 0.5 * theta)[None, :]

    def hess_f_i_x(self, x, theta, i):
        return np.eye(self.n)

    def cross_jac_f(self, x, theta):
        return -0.5 * np.eye(self.n)[None, :, :]

    def jac_f_theta(self, x, theta):
        return -0.5 * (x - 0.5 * theta)[None, :]


BUILTINS = {
    "logsum": LogSumProgram,
    "entropic": EntropicProgram,
    "ball": BallProgram,
}


def make_builtin(name: str, d: int) -> SmoothProgram:
    try:
        cls = BUILTINS[name]
    except KeyError:
        raise ValueError(f"unknown builtin program {name!r}; choose from {sorted(BUILTINS)}") from None
    if d < 1:
        raise ValueError(f"builtin {name!r} needs a nonempty theta")
    return cls(d)
