"""Problem files: strict JSON with nested row-major arrays.

A ``param_qp`` file::

    {
      "format_version": "1",
      "kind": "param_qp",
      "n": 2, "m": 1, "p": 0, "d": 1,
      "Q0": [[...], ...], "Qk": [[[...]]], "q0": [...], "qk": [[...]],
      "G0": ..., "Gk": ..., "h0": ..., "hk": ...,
      "A0": ..., "Ak": ..., "b0": ..., "bk": ...,
      "theta": [...],
      "solver": {"tol": 1e-9, "max_iters": 100}
    }

Only ``Q0`` and ``q0`` are required among the data arrays; the rest default
to zero. A ``builtin`` file carries ``name`` and ``theta`` instead. Unknown
fields are rejected.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .builtin_programs import BUILTINS, make_builtin
from .program import ParamQP, ProgramError, SmoothProgram, qp_as_smooth

FORMAT_VERSION = "1"

QP_ARRAYS = ("Q0", "Qk", "q0", "qk", "G0", "Gk", "h0", "hk", "A0", "Ak", "b0", "bk")
QP_DIMS = ("n", "m", "p", "d")
SOLVER_KEYS = {"tol": float, "max_iters": int}


class ProblemFileError(ValueError):
    """Malformed problem file; ``field`` names the offending entry when known."""

    def __init__(self, message: str, field: str | None = None):
        super().__init__(message)
        self.field = field


@dataclass
class ProblemFile:
    kind: str
    theta: np.ndarray
    qp: ParamQP | None = None
    name: str | None = None
    solver: dict = field(default_factory=dict)

    def program(self) -> SmoothProgram:
        if self.kind == "param_qp":
            return qp_as_smooth(self.qp)
        return make_builtin(self.name, len(self.theta))


def _require(doc: dict, key: str):
    if key not in doc:
        raise ProblemFileError(f"missing required field {key!r}", key)
    return doc[key]


def _reject_unknown(doc: dict, allowed: set[str], where: str = ""):
    unknown = sorted(set(doc) - allowed)
    if unknown:
        raise ProblemFileError(f"unknown field{'s' if len(unknown) > 1 else ''} "
                               f"{', '.join(map(repr, unknown))}{where}", unknown[0])


def _numeric_array(value, key: str) -> np.ndarray:
    try:
        arr = np.array(value, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ProblemFileError(f"{key}: arrays must be rectangular and numeric ({exc})", key) from exc
    return arr


def _parse_solver(doc) -> dict:
    if not isinstance(doc, dict):
        raise ProblemFileError("solver: expected an object", "solver")
    _reject_unknown(doc, set(SOLVER_KEYS), " in 'solver'")
    out = {}
    for key, typ in SOLVER_KEYS.items():
        if key in doc:
            val = doc[key]
            if isinstance(val, bool) or not isinstance(val, (int, float)) or (typ is int and not isinstance(val, int)):
                raise ProblemFileError(f"solver.{key}: expected {typ.__name__}", key)
            out[key] = typ(val)
    return out


def parse_problem(text: str) -> ProblemFile:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ProblemFileError(f"line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    if not isinstance(doc, dict):
        raise ProblemFileError("top level must be an object")
    version = _require(doc, "format_version")
    if version != FORMAT_VERSION:
        raise ProblemFileError(f"format_version: unsupported {version!r}", "format_version")
    kind = _require(doc, "kind")
    theta = np.atleast_1d(_numeric_array(_require(doc, "theta"), "theta"))
    if theta.ndim != 1 or not np.all(np.isfinite(theta)):
        raise ProblemFileError("theta: expected a flat list of finite numbers", "theta")
    solver = _parse_solver(doc.get("solver", {}))

    if kind == "builtin":
        _reject_unknown(doc, {"format_version", "kind", "name", "theta", "solver"})
        name = _require(doc, "name")
        if name not in BUILTINS:
            raise ProblemFileError(f"name: unknown builtin {name!r}", "name")
        if theta.size == 0:
            raise ProblemFileError("theta: builtin programs need at least one parameter", "theta")
        return ProblemFile(kind, theta, name=name, solver=solver)
    if kind != "param_qp":
        raise ProblemFileError(f"kind: expected 'param_qp' or 'builtin', got {kind!r}", "kind")

    _reject_unknown(doc, {"format_version", "kind", "theta", "solver", *QP_DIMS, *QP_ARRAYS})
    dims = {}
    for key in QP_DIMS:
        val = _require(doc, key)
        if isinstance(val, bool) or not isinstance(val, int):
            raise ProblemFileError(f"{key}: expected an integer", key)
        dims[key] = val
    arrays = {}
    for key in QP_ARRAYS:
        if key in doc:
            arrays[key] = _numeric_array(doc[key], key)
    if "Q0" not in arrays or "q0" not in arrays:
        raise ProblemFileError("missing required field 'Q0'" if "Q0" not in arrays
                               else "missing required field 'q0'", "Q0" if "Q0" not in arrays else "q0")
    try:
        qp = ParamQP(**dims, **arrays)
    except ProgramError as exc:
        raise ProblemFileError(str(exc), exc.field) from exc
    if theta.shape != (qp.d,):
        raise ProblemFileError(f"theta: expected length {qp.d}, got {theta.size}", "theta")
    return ProblemFile(kind, theta, qp=qp, solver=solver)


def load_problem(path) -> ProblemFile:
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ProblemFileError(f"cannot read {path}: {exc.strerror}") from exc
    return parse_problem(text)


def _dump(value) -> str:
    if isinstance(value, np.ndarray):
        value = value.tolist()
    return json.dumps(value, allow_nan=False)


def problem_to_dict(pf: ProblemFile) -> dict:
    doc = {"format_version": FORMAT_VERSION, "kind": pf.kind}
    if pf.kind == "builtin":
        doc["name"] = pf.name
    else:
        qp = pf.qp
        for key in QP_DIMS:
            doc[key] = getattr(qp, key)
        for key in QP_ARRAYS:
            doc[key] = getattr(qp, key)
    doc["theta"] = pf.theta
    if pf.solver:
        doc["solver"] = dict(pf.solver)
    return doc


def emit_problem(pf: ProblemFile) -> str:
    """One field per line, arrays inline; floats written in round-trip precision."""
    lines = [f"  {json.dumps(k)}: {_dump(v)}" for k, v in problem_to_dict(pf).items()]
    return "{\n" + ",\n".join(lines) + "\n}\n"


def problems_equal(a: ProblemFile, b: ProblemFile) -> bool:
    da, db = problem_to_dict(a), problem_to_dict(b)
    if da.keys() != db.keys():
        return False
    for key in da:
        va, vb = da[key], db[key]
        if isinstance(va, np.ndarray) or isinstance(vb, np.ndarray):
            if not (np.shape(va) == np.shape(vb) and np.array_equal(va, vb)):
                return False
        elif va != vb:
            return False
    return True


def generate_problem(n: int, m: int, p: int, d: int, seed: int) -> ProblemFile:
    """Random strictly convex ParamQP that is strictly feasible for theta in [-1, 1]^d.

    An interior point ``x0`` is drawn first; ``h`` is set so ``x0`` has slack
    at least 0.9 for every admissible theta, and ``A x0 = b`` for every theta.
    """
    for key, val in (("n", n), ("m", m), ("p", p), ("d", d)):
        if val < 0:
            raise ValueError(f"--{key} must be nonnegative")
    if n < 1:
        raise ValueError("--n must be at least 1")
    if p > n:
        raise ValueError("--p must not exceed --n (equality constraints would be overdetermined)")
    rng = np.random.default_rng(seed)
    M = rng.standard_normal((n, n))
    Q0 = M.T @ M + np.eye(n)
    Qk = np.zeros((d, n, n))
    for k in range(d):
        B = rng.standard_normal((n, n))
        S = 0.5 * (B + B.T)
        nrm = np.linalg.norm(S, 2)
        if nrm > 0:
            Qk[k] = S * (0.5 / (d * nrm))
    q0 = rng.standard_normal(n)
    qk = rng.standard_normal((d, n))
    x0 = rng.standard_normal(n)
    G0 = rng.standard_normal((m, n))
    h0 = G0 @ x0 + 1.0
    Gk = 0.1 * rng.standard_normal((d, m, n))
    hk = Gk @ x0 + (0.1 / max(d, 1)) * rng.uniform(-1.0, 1.0, (d, m))
    A0 = rng.standard_normal((p, n))
    b0 = A0 @ x0
    Ak = 0.1 * rng.standard_normal((d, p, n))
    bk = Ak @ x0
    theta = rng.uniform(-1.0, 1.0, d)
    qp = ParamQP(n, m, p, d, Q0=Q0, Qk=Qk, q0=q0, qk=qk, G0=G0, Gk=Gk, h0=h0, hk=hk,
                 A0=A0, Ak=Ak, b0=b0, bk=bk)
    return ProblemFile("param_qp", theta, qp=qp)
