"""SMT-LIB2 (QF_LRA) emission for bounded reachability queries.

The encoding mirrors the native checker exactly: real variables s_t_i for
every timestep, a disjunction over pieces for each transition, and a
violation disjunct over all steps, so a SAT answer is a counterexample
trajectory.  All coefficients are emitted as exact rational literals of the
underlying floats; nothing is rounded.

A solver is optional.  When the VPK_SOLVER_CMD environment variable holds a
command (for example ``z3 -in`` or ``cvc5 --lang smt2 {file}``), the script
can be executed and the model parsed back into exact rationals.
"""

from __future__ import annotations

import os
import shlex
import subprocess
import tempfile
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .simplex import to_fraction

SOLVER_ENV_VAR = "VPK_SOLVER_CMD"


def smt_literal(x):
    """Exact SMT-LIB rational literal for a number (floats taken exactly)."""
    f = to_fraction(x)
    if f.denominator == 1:
        n = f.numerator
        return str(n) if n >= 0 else f"(- {-n})"
    n, d = f.numerator, f.denominator
    if n >= 0:
        return f"(/ {n} {d})"
    return f"(- (/ {-n} {d}))"


def _var(t, i):
    return f"s_{t}_{i}"


def _affine_term(coeffs, const, t):
    parts = []
    for i, a in enumerate(coeffs):
        fa = to_fraction(a)
        if fa == 0:
            continue
        parts.append(f"(* {smt_literal(fa)} {_var(t, i)})")
    fc = to_fraction(const)
    if fc != 0 or not parts:
        parts.append(smt_literal(fc))
    if len(parts) == 1:
        return parts[0]
    return "(+ " + " ".join(parts) + ")"


def _row_atom(coeffs, bound, strict, t, negate=False):
    lhs = _affine_term(coeffs, 0, t)
    rhs = smt_literal(bound)
    op = "<" if strict else "<="
    if negate:
        # not (lhs < rhs)  ==  lhs >= rhs ; not (lhs <= rhs) == lhs > rhs
        op = ">=" if strict else ">"
    return f"({op} {lhs} {rhs})"


def _polytope_formula(poly, t, negate=False):
    atoms = [
        _row_atom(poly.A[i], poly.b[i], poly.strict[i], t, negate=negate)
        for i in range(poly.n_rows)
    ]
    if len(atoms) == 1:
        return atoms[0]
    joiner = "or" if negate else "and"
    return f"({joiner} " + " ".join(atoms) + ")"


def encode_reach(system, init, *, safe=None, unsafe=None, target=None, t_max):
    """Emit a QF_LRA script asking whether a violating trajectory exists.

    SAT means some trajectory from ``init`` violates the claim within
    ``t_max`` steps; UNSAT verifies the claim under the same semantics as
    the native checker.  ``safe`` must hold at every step, ``unsafe`` must
    hold at none, and ``target`` (a polytope or disjunctive list) must be
    reached at some step.
    """
    if sum(x is not None for x in (safe, unsafe, target)) != 1:
        raise ValueError("provide exactly one of safe=, unsafe=, or target=")
    if target is not None and not isinstance(target, (list, tuple)):
        target = [target]
    n = system.dim
    lines = [
        "(set-logic QF_LRA)",
        "(set-option :produce-models true)",
    ]
    for t in range(t_max + 1):
        for i in range(n):
            lines.append(f"(declare-const {_var(t, i)} Real)")
    lines.append(f"(assert {_polytope_formula(init, 0)})")
    for t in range(t_max):
        branches = []
        for piece in system.pieces:
            conj = []
            guard = piece.guard
            for r in range(guard.n_rows):
                conj.append(_row_atom(guard.A[r], guard.b[r], guard.strict[r], t))
            M = np.asarray(piece.M, dtype=float)
            c = np.asarray(piece.c, dtype=float)
            for j in range(n):
                conj.append(f"(= {_var(t + 1, j)} {_affine_term(M[j], c[j], t)})")
            branches.append("(and " + " ".join(conj) + ")")
        step = branches[0] if len(branches) == 1 else "(or " + " ".join(branches) + ")"
        lines.append(f"(assert {step})")
    if target is not None:
        # violation: the trajectory misses every target polytope at every step
        for t in range(t_max + 1):
            for poly in target:
                lines.append(f"(assert {_polytope_formula(poly, t, negate=True)})")
    else:
        if safe is not None:
            viols = [_polytope_formula(safe, t, negate=True) for t in range(t_max + 1)]
        else:
            viols = [_polytope_formula(unsafe, t) for t in range(t_max + 1)]
        body = viols[0] if len(viols) == 1 else "(or " + " ".join(viols) + ")"
        lines.append(f"(assert {body})")
    lines.append("(check-sat)")
    lines.append("(get-model)")
    return "\n".join(lines) + "\n"


@dataclass
class SolverResult:
    status: str  # "sat" | "unsat" | "unknown"
    model: dict | None
    raw: str


def solver_command():
    """The configured solver command, or None when not configured."""
    cmd = os.environ.get(SOLVER_ENV_VAR, "").strip()
    return cmd or None


def run_solver(script, cmd=None, timeout=300):
    """Run the configured SMT solver on a script and parse its answer."""
    cmd = cmd or solver_command()
    if cmd is None:
        raise RuntimeError(
            f"no SMT solver configured; set {SOLVER_ENV_VAR} to a command "
            "such as 'z3 -in' or 'cvc5 --lang smt2 {file}'"
        )
    if "{file}" in cmd:
        with tempfile.NamedTemporaryFile("w", suffix=".smt2", delete=False) as fh:
            fh.write(script)
            path = fh.name
        try:
            argv = [a.replace("{file}", path) for a in shlex.split(cmd)]
            proc = subprocess.run(argv, capture_output=True, text=True, timeout=timeout)
        finally:
            os.unlink(path)
    else:
        proc = subprocess.run(
            shlex.split(cmd), input=script, capture_output=True, text=True, timeout=timeout
        )
    out = proc.stdout
    status = "unknown"
    for line in out.splitlines():
        word = line.strip()
        if word in ("sat", "unsat", "unknown"):
            status = word
            break
    model = parse_model(out) if status == "sat" else None
    return SolverResult(status=status, model=model, raw=out)


def _tokenize(text):
    return text.replace("(", " ( ").replace(")", " ) ").split()


def _parse_sexprs(tokens):
    stack = [[]]
    for tok in tokens:
        if tok == "(":
            stack.append([])
        elif tok == ")":
            done = stack.pop()
            if not stack:
                raise ValueError("unbalanced parentheses in solver output")
            stack[-1].append(done)
        else:
            stack[-1].append(tok)
    return stack[0]


def _eval_value(node):
    if isinstance(node, str):
        return Fraction(node)
    if not node:
        raise ValueError("empty value expression in model")
    head = node[0]
    if head == "-":
        if len(node) == 2:
            return -_eval_value(node[1])
        return _eval_value(node[1]) - _eval_value(node[2])
    if head == "/":
        return _eval_value(node[1]) / _eval_value(node[2])
    if head == "+":
        return sum(_eval_value(v) for v in node[1:])
    if head == "*":
        out = Fraction(1)
        for v in node[1:]:
            out *= _eval_value(v)
        return out
    raise ValueError(f"unsupported value expression head {head!r}")


def parse_model(text):
    """Extract {name: Fraction} from (define-fun name () Real value) forms."""
    body = "\n".join(
        line for line in text.splitlines() if line.strip() not in ("sat", "unsat", "unknown")
    )
    values = {}

    def walk(node):
        if not isinstance(node, list):
            return
        if len(node) >= 5 and node[0] == "define-fun" and node[2] == [] and node[3] == "Real":
            values[node[1]] = _eval_value(node[4])
            return
        for child in node:
            walk(child)

    for expr in _parse_sexprs(_tokenize(body)):
        walk(expr)
    return values


def model_initial_state(model, dim):
    """Pull s_0 out of a parsed model as a float vector."""
    return np.asarray([float(model[_var(0, i)]) for i in range(dim)])
