import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from kkt_sense.problem_io import (
    ProblemFile,
    ProblemFileError,
    emit_problem,
    generate_problem,
    load_problem,
    parse_problem,
    problem_to_dict,
    problems_equal,
)
from kkt_sense.solver import solve

EQUALITY = {
    "format_version": "1", "kind": "param_qp", "n": 2, "m": 0, "p": 1, "d": 0,
    "Q0": [[1.0, 0.0], [0.0, 1.0]], "q0": [0.0, 0.0], "A0": [[1.0, 1.0]], "b0": [1.0], "theta": [],
}


def doc_text(**changes):
    doc = dict(EQUALITY)
    for k, v in changes.items():
        if v is None:
            doc.pop(k)
        else:
            doc[k] = v
    return json.dumps(doc)


def test_parse_minimal():
    pf = parse_problem(doc_text())
    assert pf.kind == "param_qp" and pf.qp.p == 1
    sol = solve(pf.program(), pf.theta)
    np.testing.assert_allclose(sol.point.x, [0.5, 0.5], atol=1e-9)


def test_builtin_file():
    pf = parse_problem('{"format_version": "1", "kind": "builtin", "name": "logsum", "theta": [1, 2]}')
    assert pf.name == "logsum" and pf.program().n == 2


@pytest.mark.parametrize("changes,field", [
    ({"Q0": [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]}, "Q0"),
    ({"Q0": None}, "Q0"),
    ({"q0": None}, "q0"),
    ({"extra": 1}, "extra"),
    ({"Qk_": []}, "Qk_"),
    ({"n": 2.5}, "n"),
    ({"theta": [1.0]}, "theta"),
    ({"kind": "lp"}, "kind"),
    ({"format_version": "2"}, "format_version"),
    ({"A0": [[1.0, "x"]]}, "A0"),
    ({"A0": [[1.0], [1.0, 2.0]]}, "A0"),
    ({"solver": {"tol": 1e-8, "verbose": True}}, "verbose"),
    ({"solver": {"max_iters": 2.5}}, "max_iters"),
])
def test_strict_errors_name_field(changes, field):
    with pytest.raises(ProblemFileError) as info:
        parse_problem(doc_text(**changes))
    assert info.value.field == field
    assert field in str(info.value)


def test_syntax_error_names_line():
    text = doc_text().replace('"kind"', '\n\n"kind" "x"')
    with pytest.raises(ProblemFileError, match="line 3"):
        parse_problem(text)


def test_unknown_builtin_rejected():
    with pytest.raises(ProblemFileError) as info:
        parse_problem('{"format_version": "1", "kind": "builtin", "name": "zz", "theta": [1]}')
    assert info.value.field == "name"


def test_missing_file():
    with pytest.raises(ProblemFileError, match="cannot read"):
        load_problem("/nonexistent/problem.json")


def test_solver_overrides_parsed():
    pf = parse_problem(doc_text(solver={"tol": 1e-10, "max_iters": 7}))
    assert pf.solver == {"tol": 1e-10, "max_iters": 7}


def test_one_field_per_line():
    text = emit_problem(generate_problem(3, 2, 1, 2, seed=0))
    body = text.strip().splitlines()[1:-1]
    assert len(body) == len(problem_to_dict(generate_problem(3, 2, 1, 2, seed=0)))


@given(st.integers(1, 6), st.integers(0, 5), st.integers(0, 3), st.integers(0, 4), st.integers(0, 10**6))
def test_round_trip_generated(n, m, p, d, seed):
    p = min(p, n)
    pf = generate_problem(n, m, p, d, seed)
    again = parse_problem(emit_problem(pf))
    assert problems_equal(pf, again)
    assert emit_problem(again) == emit_problem(pf)


@given(st.lists(st.floats(allow_nan=False, allow_infinity=False, width=64), min_size=1, max_size=4))
def test_round_trip_bit_exact_floats(theta):
    pf = ProblemFile("builtin", np.array(theta), name="ball", solver={"tol": 1e-7})
    again = parse_problem(emit_problem(pf))
    assert problems_equal(pf, again)
    assert again.theta.tobytes() == pf.theta.tobytes()


def test_generate_deterministic():
    assert emit_problem(generate_problem(4, 3, 1, 2, 11)) == emit_problem(generate_problem(4, 3, 1, 2, 11))
    assert emit_problem(generate_problem(4, 3, 1, 2, 11)) != emit_problem(generate_problem(4, 3, 1, 2, 12))


@pytest.mark.parametrize("seed", range(10))
def test_generated_strictly_feasible_over_box(seed):
    pf = generate_problem(5, 4, 2, 3, seed)
    qp = pf.qp
    # the box corners are the hardest parameters for the slack guarantee
    for corner in ([-1, -1, -1], [1, 1, 1], [1, -1, 1]):
        assert solve(pf.program(), np.array(corner, float)).converged
    assert np.all(np.linalg.eigvalsh(qp.Q0) >= 1.0 - 1e-12)


@pytest.mark.parametrize("args", [(0, 1, 0, 1), (2, 1, 3, 1), (2, -1, 0, 1)])
def test_generate_invalid_sizes(args):
    with pytest.raises(ValueError):
        generate_problem(*args, seed=0)
