import numpy as np
import pytest
from hypothesis import settings

from kkt_sense.problem_io import generate_problem
from kkt_sense.program import ParamQP, SmoothProgram

settings.register_profile("default", max_examples=40, deadline=None)
settings.load_profile("default")


class RandomSmooth(SmoothProgram):
    """Nonlinear test program with curved, theta-dependent constraints.

    f0 = 1/2 x'Px + (c + C theta)'x + s * sum_j exp(w_j'x + v_j'theta)
    f_i = rho_i/2 ||x - U_i theta||^2 + g_i'x - r_i
    h = (A0 + sum_k theta_k A_k) x - (b0 + B theta)

    The constraint radii leave x = 0 strictly inside every f_i <= 0 for
    ||theta|| <= 1, and b0, B are small, so the instance satisfies Slater.
    """

    def __init__(self, rng, n=4, m=3, p=1, d=2):
        self.n, self.m, self.p, self.d = n, m, p, d
        M = rng.standard_normal((n, n))
        self.P = M.T @ M / n + np.eye(n)
        self.c = 2.0 * rng.standard_normal(n)
        self.C = rng.standard_normal((n, d))
        self.W = 0.3 * rng.standard_normal((3, n))
        self.V = 0.3 * rng.standard_normal((3, d))
        self.s = 0.1
        self.rho = rng.uniform(0.5, 2.0, m)
        self.U = 0.5 * rng.standard_normal((m, n, d))
        self.g = rng.standard_normal((m, n))
        self.r = rng.uniform(0.2, 1.0, m) + 0.5 * self.rho * np.linalg.norm(self.U, ord=2, axis=(1, 2)) ** 2
        self.A0 = rng.standard_normal((p, n))
        self.Ak = 0.2 * rng.standard_normal((d, p, n))
        self.b0 = 0.1 * rng.standard_normal(p)
        self.B = 0.05 * rng.standard_normal((p, d))

    def _e(self, x, th):
        return self.s * np.exp(self.W @ x + self.V @ th)

    def eval_f0(self, x, th):
        return float(0.5 * x @ self.P @ x + (self.c + self.C @ th) @ x + self._e(x, th).sum())

    def grad_f0(self, x, th):
        return self.P @ x + self.c + self.C @ th + self.W.T @ self._e(x, th)

    def hess_f0(self, x, th):
        return self.P + (self.W.T * self._e(x, th)) @ self.W

    def cross_grad_f0(self, x, th):
        return self.C + (self.W.T * self._e(x, th)) @ self.V

    def _r(self, x, th):
        return x[None, :] - self.U @ th  # (m, n)

    def eval_f(self, x, th):
        r = self._r(x, th)
        return 0.5 * self.rho * np.sum(r * r, axis=1) + self.g @ x - self.r

    def jac_f_x(self, x, th):
        return self.rho[:, None] * self._r(x, th) + self.g

    def hess_f_i_x(self, x, th, i):
        return self.rho[i] * np.eye(self.n)

    def cross_jac_f(self, x, th):
        return -self.rho[:, None, None] * self.U

    def jac_f_theta(self, x, th):
        r = self._r(x, th)
        return -self.rho[:, None] * np.einsum("in,ind->id", r, self.U)

    def _A(self, th):
        return self.A0 + np.tensordot(th, self.Ak, axes=1)

    def eval_h(self, x, th):
        return self._A(th) @ x - self.b0 - self.B @ th

    def jac_h_x(self, x, th):
        return self._A(th)

    def jac_h_theta(self, x, th):
        return (self.Ak @ x).T - self.B

    def cross_jac_h(self, x, th):
        return np.transpose(self.Ak, (1, 2, 0)).copy()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_qp(seed, n=None, m=None, p=None, d=None, max_n=10, max_m=8, max_p=3, max_d=5):
    """Generated strictly feasible ParamQP with random sizes; returns (qp, theta)."""
    r = np.random.default_rng(10_000 + seed)
    n = n if n is not None else int(r.integers(1, max_n + 1))
    m = m if m is not None else int(r.integers(0, max_m + 1))
    p = p if p is not None else int(r.integers(0, min(max_p, n) + 1))
    d = d if d is not None else int(r.integers(1, max_d + 1))
    pf = generate_problem(n, m, p, d, seed)
    return pf.qp, pf.theta


def active_bound_qp():
    """min 1/2 (x - theta)^2  s.t.  x <= 1."""
    return ParamQP(1, 1, 0, 1, Q0=[[1.0]], q0=[0.0], qk=[[-1.0]], G0=[[1.0]], h0=[1.0])


def equality_qp():
    """min 1/2 ||x||^2  s.t.  x_1 = theta."""
    return ParamQP(2, 0, 1, 1, Q0=np.eye(2), q0=[0.0, 0.0], A0=[[1.0, 0.0]], b0=[0.0], bk=[[1.0]])


def unconstrained_qp():
    """min 1/2 x'(2I)x + theta'x."""
    return ParamQP(2, 0, 0, 2, Q0=2 * np.eye(2), q0=[0.0, 0.0], qk=np.eye(2))


def degenerate_qp():
    """min 1/2 x^2  s.t.  x <= 0 (optimum x = 0 with lambda = 0)."""
    return ParamQP(1, 1, 0, 0, Q0=[[1.0]], q0=[0.0], G0=[[1.0]], h0=[0.0])


ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def acceptance_line():
    """Record and print one PASS/FAIL line for an acceptance criterion."""
    def record(number: int, ok: bool, detail: str):
        line = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
