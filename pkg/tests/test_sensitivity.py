import numpy as np
import pytest

from conftest import RandomSmooth, active_bound_qp, degenerate_qp, equality_qp, random_qp, unconstrained_qp
from kkt_sense.builtin_programs import make_builtin
from kkt_sense.fd_oracle import compare, fd_jacobian
from kkt_sense.kkt import assemble_kkt_jacobian, assemble_param_jacobian, degeneracy_report
from kkt_sense.program import ParamQP, PrimalDualPoint, qp_as_smooth
from kkt_sense.sensitivity import (
    NotConverged,
    Singular,
    directional_sensitivity,
    qp_solution_jacobian,
    solution_jacobian,
)
from kkt_sense.solver import Solution, SolverConfig, solve


def solved(prog, theta, tol=1e-9):
    sol = solve(prog, theta, SolverConfig(tol=tol))
    assert sol.converged
    return sol


def residual_bound_holds(prog, sol, theta, res):
    K = assemble_kkt_jacobian(prog, sol.point, theta)
    R = assemble_param_jacobian(prog, sol.point, theta)
    return np.max(np.abs(K @ res.stacked + R), initial=0.0) <= 1e-8 * (1 + np.max(np.abs(R), initial=0.0))


def test_unconstrained_example():
    prog, theta = qp_as_smooth(unconstrained_qp()), np.array([0.4, -1.2])
    sol = solved(prog, theta)
    np.testing.assert_allclose(sol.point.x, -theta / 2, atol=1e-12)
    res = solution_jacobian(prog, sol, theta)
    np.testing.assert_allclose(res.jac_x, -0.5 * np.eye(2), atol=1e-8)
    assert res.jac_lambda.shape == (0, 2) and res.jac_nu.shape == (0, 2)
    assert res.hypotheses_ok


def test_equality_example():
    prog, theta = qp_as_smooth(equality_qp()), np.array([0.7])
    res = solution_jacobian(prog, solved(prog, theta), theta)
    np.testing.assert_allclose(res.jac_x, [[1.0], [0.0]], atol=1e-8)
    np.testing.assert_allclose(res.jac_nu, [[-1.0]], atol=1e-8)


def test_active_bound_example():
    prog, theta = qp_as_smooth(active_bound_qp()), np.array([2.0])
    res = solution_jacobian(prog, solved(prog, theta), theta)
    np.testing.assert_allclose(res.jac_x, [[0.0]], atol=1e-8)
    np.testing.assert_allclose(res.jac_lambda, [[1.0]], atol=1e-8)
    assert res.hypotheses_ok
    assert np.isfinite(res.condition_estimate) and res.condition_estimate >= 1.0


def test_inactive_bound_follows_theta():
    prog, theta = qp_as_smooth(active_bound_qp()), np.array([0.2])
    res = solution_jacobian(prog, solved(prog, theta), theta)
    np.testing.assert_allclose(res.jac_x, [[1.0]], atol=1e-7)
    np.testing.assert_allclose(res.jac_lambda, [[0.0]], atol=1e-7)


def _random_instances(count, start=0):
    out = []
    for seed in range(start, start + count):
        qp, theta = random_qp(seed)
        out.append((seed, qp, theta))
    return out


@pytest.mark.parametrize("seed,qp,theta", _random_instances(25), ids=lambda v: None)
def test_fd_agreement_random_qps(seed, qp, theta):
    prog = qp_as_smooth(qp)
    sol = solved(prog, theta)
    res = solution_jacobian(prog, sol, theta)
    assert residual_bound_holds(prog, sol, theta, res)
    assert res.linear_residual <= 1e-8 * (1 + np.max(np.abs(assemble_param_jacobian(prog, sol.point, theta))))
    if not res.degeneracy.strictly_complementary:
        pytest.skip("degenerate instance")
    rep = compare(res.jac_x, fd_jacobian(prog, theta, base=sol))
    assert not rep.per_column_solve_failures
    assert rep.max_rel_err <= 1e-4


@pytest.mark.parametrize("seed", range(6))
def test_fd_agreement_nonlinear(seed):
    r = np.random.default_rng(seed)
    prog = RandomSmooth(r, n=4, m=3, p=1, d=3)
    theta = 0.3 * r.standard_normal(3)
    sol = solved(prog, theta)
    res = solution_jacobian(prog, sol, theta)
    assert residual_bound_holds(prog, sol, theta, res)
    if res.degeneracy.strictly_complementary:
        assert compare(res.jac_x, fd_jacobian(prog, theta, base=sol)).max_rel_err <= 1e-4


@pytest.mark.parametrize("name,d", [("logsum", 4), ("entropic", 3), ("ball", 3)])
def test_fd_agreement_builtins(name, d):
    prog = make_builtin(name, d)
    theta = np.linspace(-0.6, 1.1, d)
    sol = solved(prog, theta)
    res = solution_jacobian(prog, sol, theta)
    assert res.hypotheses_ok
    assert compare(res.jac_x, fd_jacobian(prog, theta, base=sol)).max_rel_err <= 1e-4


def test_ball_closed_form_jacobian():
    # outside the small-theta regime x = theta/2 + theta/|theta|
    prog = make_builtin("ball", 2)
    theta = np.array([1.2, -0.5])
    res = solution_jacobian(prog, solved(prog, theta), theta)
    t = np.linalg.norm(theta)
    u = theta / t
    expected = 0.5 * np.eye(2) + (np.eye(2) - np.outer(u, u)) / t
    np.testing.assert_allclose(res.jac_x, expected, atol=1e-7)
    np.testing.assert_allclose(res.jac_lambda, [1.5 * u], atol=1e-7)


@pytest.mark.parametrize("d", [1, 5, 20])
def test_one_factorization_per_call(d):
    qp, theta = random_qp(3, n=6, m=4, p=2, d=d)
    prog = qp_as_smooth(qp)
    sol = solved(prog, theta)
    assert solution_jacobian(prog, sol, theta).factorizations == 1
    assert qp_solution_jacobian(qp, sol, theta).factorizations == 1


@pytest.mark.parametrize("seed", range(20))
def test_qp_path_matches_generic(seed):
    qp, theta = random_qp(seed)
    sol = solved(qp_as_smooth(qp), theta)
    a = solution_jacobian(qp_as_smooth(qp), sol, theta)
    b = qp_solution_jacobian(qp, sol, theta)
    assert np.max(np.abs(a.stacked - b.stacked), initial=0.0) <= 1e-10


@pytest.mark.parametrize("seed", range(10))
def test_inactive_constraint_direction_invariance(seed):
    # inactive multipliers end near mu/|f_i|; a tight solve makes them negligible
    qp, theta = random_qp(seed, m=6)
    prog = qp_as_smooth(qp)
    sol = solved(prog, theta, tol=1e-12)
    f = prog.eval_f(sol.point.x, theta)
    inactive = np.flatnonzero(f < -1e-2)
    if inactive.size == 0:
        pytest.skip("no clearly inactive constraint")
    base = solution_jacobian(prog, sol, theta, tol=1e-12).jac_x
    hk = np.array(qp.hk)
    r = np.random.default_rng(seed)
    # small enough to keep every inactive constraint inactive
    delta = r.uniform(-1, 1, (qp.d, inactive.size))
    delta *= 0.5 * np.min(-f[inactive]) / (np.abs(theta).sum() + 1.0)
    hk[:, inactive] += delta
    fields = {k: getattr(qp, k) for k in ("Q0", "q0", "Qk", "qk", "G0", "Gk", "h0", "A0", "Ak", "b0", "bk")}
    qp2 = ParamQP(qp.n, qp.m, qp.p, qp.d, hk=hk, **fields)
    prog2 = qp_as_smooth(qp2)
    res2 = solution_jacobian(prog2, solved(prog2, theta, tol=1e-12), theta, tol=1e-12)
    assert np.max(np.abs(res2.jac_x - base)) <= 1e-8


@pytest.mark.parametrize("seed", range(10))
def test_directional_matches_full_jacobian(seed):
    qp, theta = random_qp(seed)
    prog = qp_as_smooth(qp)
    sol = solved(prog, theta)
    full = solution_jacobian(prog, sol, theta)
    v = np.random.default_rng(seed).standard_normal(qp.d)
    ds = directional_sensitivity(prog, sol, theta, v)
    for got, J in ((ds.dx, full.jac_x), (ds.dlambda, full.jac_lambda), (ds.dnu, full.jac_nu)):
        assert np.max(np.abs(got - J @ v), initial=0.0) <= 1e-12 * max(1.0, np.abs(J).sum())
    e = np.zeros(qp.d)
    e[0] = 1.0
    np.testing.assert_allclose(directional_sensitivity(prog, sol, theta, e).dx, full.jac_x[:, 0], atol=1e-12)
    zero = directional_sensitivity(prog, sol, theta, np.zeros(qp.d))
    assert not np.any(zero.dx) and not np.any(zero.dlambda) and not np.any(zero.dnu)


def test_directional_length_checked():
    prog, theta = qp_as_smooth(unconstrained_qp()), np.zeros(2)
    with pytest.raises(ValueError):
        directional_sensitivity(prog, solved(prog, theta), theta, [1.0])


def test_not_converged_rejected():
    qp, theta = random_qp(1, m=4)
    prog = qp_as_smooth(qp)
    sol = solve(prog, theta, SolverConfig(max_iters=1))
    assert not sol.converged
    with pytest.raises(NotConverged):
        solution_jacobian(prog, sol, theta)
    with pytest.raises(NotConverged):
        directional_sensitivity(prog, sol, theta, np.ones(qp.d))


def _duplicate_bound():
    """min 1/2 (x - theta)^2 with x <= 1 stated twice."""
    return ParamQP(1, 2, 0, 1, Q0=[[1.0]], q0=[0.0], qk=[[-1.0]], G0=[[1.0], [1.0]], h0=[1.0, 1.0])


def test_singular_at_exact_point():
    prog = qp_as_smooth(_duplicate_bound())
    point = PrimalDualPoint([1.0], [0.5, 0.5], [])
    sol = Solution(point, 0.5, 0.0, 0, True, degeneracy_report(np.zeros(2), point.lam, 1e-4))
    with pytest.raises(Singular) as info:
        solution_jacobian(prog, sol, [2.0])
    assert info.value.pivot_ratio <= 1e-12


def test_singular_after_tight_solve():
    prog = qp_as_smooth(_duplicate_bound())
    sol = solved(prog, [2.0], tol=5e-13)
    with pytest.raises(Singular):
        solution_jacobian(prog, sol, [2.0], tol=5e-13)


def test_degenerate_flagged_not_raised():
    prog = qp_as_smooth(degenerate_qp())
    sol = solved(prog, [])
    res = solution_jacobian(prog, sol, [])
    assert not res.degeneracy.strictly_complementary
    assert res.degeneracy.weakly_active == [0]
    assert not res.hypotheses_ok
    assert res.jac_x.shape == (1, 0)


def test_concurrent_calls_count_separately():
    from concurrent.futures import ThreadPoolExecutor

    qp, theta = random_qp(2, d=5)
    prog = qp_as_smooth(qp)
    sol = solved(prog, theta)
    with ThreadPoolExecutor(4) as pool:
        counts = list(pool.map(lambda _: solution_jacobian(prog, sol, theta).factorizations, range(8)))
    assert counts == [1] * 8
