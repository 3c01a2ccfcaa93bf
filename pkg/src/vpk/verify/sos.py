"""Emission of sum-of-squares feasibility programs as structured text.

The certifier in this package never solves semidefinite programs; it proves
the same semantic statements by interval branch-and-bound.  For external
cross-checks the underlying SOS programs are still emitted in a plain-text
format that external SDP/SOS tooling (or a human) can consume.

Document grammar (one directive per line, '#' starts a comment):

    SOS-DOCUMENT v1
    MODE <candidate|roa>
    VARS <x0> <x1> ...
    BASIS <monomial> ...            # basis of the unknown quadratic forms
    UNKNOWN <name> scalar
    UNKNOWN <name> symmetric <n>    # entries <name>_i_j for i <= j
    SYMPOLY <name>                  # polynomial with symbolic coefficients
    TERM <e0> <e1> ... : <atom> + <atom> + ...
    END SYMPOLY
    CONSTRAINT <sos|nonpos> <polyname>
    OBJECTIVE <feasibility|maximize <name>>
    END

where an atom is either a float literal or ``symbol * float``.  ``sos``
requires the polynomial to be a sum of squares; ``nonpos`` requires it to be
pointwise <= 0.  parse_sos_document inverts emit_sos exactly.
"""

from __future__ import annotations

import numpy as np

from ..polynomial import Poly, PolynomialMap


def _sym_entry(name, i, j):
    a, b = (i, j) if i <= j else (j, i)
    return f"{name}_{a}_{b}"


class SymPoly:
    """Monomials with coefficients that are affine in symbolic unknowns."""

    def __init__(self, n_vars):
        self.n_vars = n_vars
        self.terms = {}  # exps tuple -> {symbol or None: float}

    def add_atom(self, exps, symbol, coeff):
        if coeff == 0:
            return
        atoms = self.terms.setdefault(tuple(exps), {})
        atoms[symbol] = atoms.get(symbol, 0.0) + float(coeff)
        if atoms[symbol] == 0:
            del atoms[symbol]
            if not atoms:
                del self.terms[tuple(exps)]

    def render_lines(self):
        lines = []
        for exps in sorted(self.terms, key=lambda e: (sum(e), e)):
            atoms = self.terms[exps]
            parts = []
            for sym in sorted(k for k in atoms if k is not None):
                parts.append(f"{sym} * {atoms[sym]!r}")
            if None in atoms:
                parts.append(repr(atoms[None]))
            lines.append("TERM " + " ".join(str(e) for e in exps) + " : " + " + ".join(parts))
        return lines


class SosDocument:
    def __init__(self, mode, var_names):
        self.mode = mode
        self.var_names = list(var_names)
        self.unknowns = []  # (name, kind, size or None)
        self.polys = {}  # name -> SymPoly
        self.poly_order = []
        self.constraints = []  # (sense, name)
        self.objective = "feasibility"

    def add_unknown(self, name, kind, size=None):
        self.unknowns.append((name, kind, size))

    def add_poly(self, name, poly):
        self.polys[name] = poly
        self.poly_order.append(name)

    def render(self):
        lines = ["SOS-DOCUMENT v1", f"MODE {self.mode}"]
        lines.append("VARS " + " ".join(self.var_names))
        lines.append("BASIS " + " ".join(self.var_names))
        for name, kind, size in self.unknowns:
            if kind == "scalar":
                lines.append(f"UNKNOWN {name} scalar")
            else:
                lines.append(f"UNKNOWN {name} symmetric {size}")
        for name in self.poly_order:
            lines.append(f"SYMPOLY {name}")
            lines.extend(self.polys[name].render_lines())
            lines.append("END SYMPOLY")
        for sense, name in self.constraints:
            lines.append(f"CONSTRAINT {sense} {name}")
        lines.append(f"OBJECTIVE {self.objective}")
        lines.append("END")
        return "\n".join(lines) + "\n"


def _unit(n, *indices):
    e = [0] * n
    for i in indices:
        e[i] += 1
    return tuple(e)


def _candidate_document(A):
    """Eq-style feasibility: find symmetric P with s'Ps - |s|^2 >= 0 (SOS)
    and s'PAs + |s|^2 <= 0."""
    A = np.asarray(A, dtype=float)
    n = A.shape[0]
    doc = SosDocument("candidate", [f"x{i}" for i in range(n)])
    doc.add_unknown("P", "symmetric", n)

    positivity = SymPoly(n)
    for i in range(n):
        positivity.add_atom(_unit(n, i, i), _sym_entry("P", i, i), 1.0)
        positivity.add_atom(_unit(n, i, i), None, -1.0)
        for j in range(i + 1, n):
            positivity.add_atom(_unit(n, i, j), _sym_entry("P", i, j), 2.0)
    doc.add_poly("lyapunov_positivity", positivity)

    decrease = SymPoly(n)
    # s'PAs has x_a x_b coefficient sym(PA)_ab; P entries stay symbolic
    for a in range(n):
        for b in range(a, n):
            for k in range(n):
                if a == b:
                    decrease.add_atom(_unit(n, a, a), _sym_entry("P", a, k), A[k, a])
                else:
                    decrease.add_atom(_unit(n, a, b), _sym_entry("P", a, k), A[k, b])
                    decrease.add_atom(_unit(n, a, b), _sym_entry("P", b, k), A[k, a])
    for i in range(n):
        decrease.add_atom(_unit(n, i, i), None, 1.0)
    doc.add_poly("lyapunov_decrease", decrease)

    doc.constraints = [("sos", "lyapunov_positivity"), ("nonpos", "lyapunov_decrease")]
    doc.objective = "feasibility"
    return doc


def _roa_document(f, P):
    """Level maximization: (s'Lambda s) vdot(s) + (rho - s'Ps) |s|^2 <= 0."""
    from .stability import vdot_polynomial

    P = np.asarray(P, dtype=float)
    n = f.n_in
    doc = SosDocument("roa", [f"x{i}" for i in range(n)])
    doc.add_unknown("rho", "scalar")
    doc.add_unknown("Lambda", "symmetric", n)
    vdot = vdot_polynomial(P, f)

    main = SymPoly(n)
    for a in range(n):
        for b in range(a, n):
            factor = 1.0 if a == b else 2.0
            pair = _unit(n, a, b)
            for exps, coeff in vdot.terms.items():
                merged = tuple(x + y for x, y in zip(exps, pair))
                main.add_atom(merged, _sym_entry("Lambda", a, b), factor * coeff)
    for i in range(n):
        main.add_atom(_unit(n, i, i), "rho", 1.0)
    for a in range(n):
        for b in range(n):
            if P[a, b] == 0:
                continue
            for i in range(n):
                merged = _unit(n, a, b)
                merged = tuple(x + y for x, y in zip(merged, _unit(n, i, i)))
                main.add_atom(merged, None, -P[a, b])
    doc.add_poly("level_condition", main)
    doc.constraints = [("nonpos", "level_condition")]
    doc.objective = "maximize rho"
    return doc


def emit_sos(system, P=None, mode="candidate"):
    """Emit the SOS program text for a stability question; nothing is solved.

    mode "candidate": ``system`` is a square matrix (or a PolynomialMap whose
    linearization is taken) and the unknown is the Lyapunov matrix P.
    mode "roa": ``system`` is a PolynomialMap, ``P`` is the fixed quadratic
    form, and the unknowns are the level rho and the multiplier Lambda.
    """
    if mode == "candidate":
        A = system.jacobian_at_zero() if isinstance(system, PolynomialMap) else system
        return _candidate_document(A).render()
    if mode == "roa":
        if P is None:
            raise ValueError("roa mode requires the fixed Lyapunov matrix P")
        if not isinstance(system, PolynomialMap):
            raise ValueError("roa mode requires polynomial dynamics")
        return _roa_document(system, P).render()
    raise ValueError(f"mode must be 'candidate' or 'roa', got {mode!r}")


def _parse_atoms(text):
    atoms = {}
    for chunk in text.split(" + "):
        chunk = chunk.strip()
        if " * " in chunk:
            sym, value = chunk.split(" * ")
            atoms[sym.strip()] = float(value)
        else:
            atoms[None] = float(chunk)
    return atoms


def parse_sos_document(text):
    """Parse emitted text back into an SosDocument (exact round-trip)."""
    lines = [ln.strip() for ln in text.splitlines()]
    lines = [ln for ln in lines if ln and not ln.startswith("#")]
    if not lines or lines[0] != "SOS-DOCUMENT v1":
        raise ValueError("not an SOS document (missing header)")
    doc = None
    mode = None
    var_names = None
    current = None
    i = 1
    while i < len(lines):
        line = lines[i]
        i += 1
        if line.startswith("MODE "):
            mode = line.split(" ", 1)[1]
        elif line.startswith("VARS "):
            var_names = line.split()[1:]
            doc = SosDocument(mode, var_names)
        elif line.startswith("BASIS "):
            pass  # implied by VARS for quadratic-form unknowns
        elif line.startswith("UNKNOWN "):
            parts = line.split()
            if parts[2] == "scalar":
                doc.add_unknown(parts[1], "scalar")
            else:
                doc.add_unknown(parts[1], "symmetric", int(parts[3]))
        elif line.startswith("SYMPOLY "):
            name = line.split(" ", 1)[1]
            current = SymPoly(len(var_names))
            doc.add_poly(name, current)
        elif line.startswith("TERM "):
            body = line[len("TERM "):]
            exps_part, atoms_part = body.split(" : ", 1)
            exps = tuple(int(v) for v in exps_part.split())
            for sym, coeff in _parse_atoms(atoms_part).items():
                current.add_atom(exps, sym, coeff)
        elif line == "END SYMPOLY":
            current = None
        elif line.startswith("CONSTRAINT "):
            _, sense, name = line.split()
            doc.constraints.append((sense, name))
        elif line.startswith("OBJECTIVE "):
            doc.objective = line.split(" ", 1)[1]
        elif line == "END":
            break
        else:
            raise ValueError(f"unrecognized SOS document line: {line!r}")
    if doc is None:
        raise ValueError("SOS document has no VARS line")
    return doc


def evaluate_sympoly(sympoly, assignments):
    """Substitute numeric values for symbols, returning a plain Poly."""
    out = Poly.constant(0.0, sympoly.n_vars)
    for exps, atoms in sympoly.terms.items():
        total = 0.0
        for sym, coeff in atoms.items():
            total += coeff if sym is None else coeff * assignments[sym]
        if total != 0:
            out.terms[exps] = total
    return out
