"""Sparse multivariate polynomials and polynomial vector fields.

Monomials are exponent tuples; coefficients are floats.  Everything is kept
truncated to a caller-chosen total degree, which is what Taylor models need.
"""

from __future__ import annotations

import numpy as np


class Poly:
    """Polynomial in ``n_vars`` variables as {exponent tuple: coefficient}."""

    __slots__ = ("n_vars", "terms")

    def __init__(self, n_vars, terms=None):
        self.n_vars = int(n_vars)
        self.terms = {}
        if terms:
            for expo, coef in terms.items():
                if len(expo) != self.n_vars:
                    raise ValueError(
                        f"exponent {expo} has arity {len(expo)}, expected {self.n_vars}"
                    )
                if coef != 0.0:
                    self.terms[tuple(int(e) for e in expo)] = float(coef)

    @classmethod
    def constant(cls, c, n_vars):
        p = cls(n_vars)
        if c != 0.0:
            p.terms[(0,) * n_vars] = float(c)
        return p

    @classmethod
    def variable(cls, i, n_vars):
        if not 0 <= i < n_vars:
            raise ValueError(f"variable index {i} out of range for arity {n_vars}")
        expo = [0] * n_vars
        expo[i] = 1
        return cls(n_vars, {tuple(expo): 1.0})

    def copy(self):
        p = Poly(self.n_vars)
        p.terms = dict(self.terms)
        return p

    def degree(self):
        return max((sum(e) for e in self.terms), default=0)

    def __add__(self, other):
        other = self._coerce(other)
        out = self.copy()
        for expo, coef in other.terms.items():
            new = out.terms.get(expo, 0.0) + coef
            if new == 0.0:
                out.terms.pop(expo, None)
            else:
                out.terms[expo] = new
        return out

    def __sub__(self, other):
        return self + self._coerce(other).scale(-1.0)

    def __mul__(self, other):
        other = self._coerce(other)
        out = Poly(self.n_vars)
        for e1, c1 in self.terms.items():
            for e2, c2 in other.terms.items():
                expo = tuple(a + b for a, b in zip(e1, e2))
                new = out.terms.get(expo, 0.0) + c1 * c2
                if new == 0.0:
                    out.terms.pop(expo, None)
                else:
                    out.terms[expo] = new
        return out

    def scale(self, c):
        out = Poly(self.n_vars)
        if c != 0.0:
            out.terms = {e: c * v for e, v in self.terms.items()}
        return out

    def truncate(self, max_degree):
        out = Poly(self.n_vars)
        out.terms = {e: c for e, c in self.terms.items() if sum(e) <= max_degree}
        return out

    def _coerce(self, other):
        if isinstance(other, Poly):
            if other.n_vars != self.n_vars:
                raise ValueError("polynomial arity mismatch")
            return other
        return Poly.constant(float(other), self.n_vars)

    def __call__(self, point):
        point = np.asarray(point, dtype=float)
        total = 0.0
        for expo, coef in self.terms.items():
            term = coef
            for xi, ei in zip(point, expo):
                if ei:
                    term *= xi ** ei
            total += term
        return float(total)

    def eval_many(self, points):
        """Vectorized evaluation on an (m, n_vars) array."""
        pts = np.asarray(points, dtype=float)
        out = np.zeros(pts.shape[0])
        for expo, coef in self.terms.items():
            term = np.full(pts.shape[0], coef)
            for i, ei in enumerate(expo):
                if ei:
                    term *= pts[:, i] ** ei
            out += term
        return out

    def substitute_linear(self, index, coeffs, truncate_to=None):
        """Replace variable ``index`` by the linear form coeffs . x.

        ``coeffs`` has length n_vars (coefficient for ``index`` itself must be
        0).  Returns a polynomial over the same variable space in which
        variable ``index`` no longer occurs.
        """
        coeffs = np.asarray(coeffs, dtype=float)
        if coeffs.shape != (self.n_vars,):
            raise ValueError("substitution coefficient arity mismatch")
        if coeffs[index] != 0.0:
            raise ValueError("substitution must not be self-referential")
        linear = Poly(self.n_vars)
        for i, c in enumerate(coeffs):
            if c != 0.0:
                expo = [0] * self.n_vars
                expo[i] = 1
                linear.terms[tuple(expo)] = float(c)
        out = Poly(self.n_vars)
        for expo, coef in self.terms.items():
            k = expo[index]
            base = list(expo)
            base[index] = 0
            piece = Poly(self.n_vars, {tuple(base): coef})
            for _ in range(k):
                piece = piece * linear
                if truncate_to is not None:
                    piece = piece.truncate(truncate_to)
            out = out + piece
        return out

    def drop_variable(self, index):
        """Remove a variable that no longer occurs (all exponents 0)."""
        out = Poly(self.n_vars - 1)
        for expo, coef in self.terms.items():
            if expo[index] != 0:
                raise ValueError(f"variable {index} still occurs in {expo}")
            reduced = expo[:index] + expo[index + 1:]
            out.terms[reduced] = out.terms.get(reduced, 0.0) + coef
        return out

    def __repr__(self):
        if not self.terms:
            return "Poly(0)"
        bits = []
        for expo in sorted(self.terms, key=lambda e: (sum(e), e)):
            coef = self.terms[expo]
            mono = "*".join(
                f"x{i}" + (f"^{e}" if e > 1 else "")
                for i, e in enumerate(expo) if e
            )
            bits.append(f"{coef:+g}" + (f"*{mono}" if mono else ""))
        return "Poly(" + " ".join(bits) + ")"


def poly_inverse(p, max_degree):
    """Truncated reciprocal of a polynomial with nonzero constant term."""
    c0 = p.terms.get((0,) * p.n_vars, 0.0)
    if c0 == 0.0:
        raise ValueError("cannot invert a polynomial with zero constant term")
    r = (p - Poly.constant(c0, p.n_vars)).scale(1.0 / c0)
    out = Poly.constant(1.0, p.n_vars)
    power = Poly.constant(1.0, p.n_vars)
    sign = 1.0
    for _ in range(max_degree):
        power = (power * r).truncate(max_degree)
        sign = -sign
        out = out + power.scale(sign)
        if not power.terms:
            break
    return out.scale(1.0 / c0).truncate(max_degree)


def sin_series(var_poly, max_degree):
    """sin of a pure variable, truncated; argument must be a single variable."""
    out = Poly(var_poly.n_vars)
    term = var_poly.copy()
    k = 1
    fact = 1.0
    sign = 1.0
    while k <= max_degree:
        out = out + term.scale(sign / fact)
        term = (term * var_poly * var_poly).truncate(max_degree)
        sign = -sign
        fact *= (k + 1) * (k + 2)
        k += 2
    return out.truncate(max_degree)


def cos_series(var_poly, max_degree):
    out = Poly.constant(1.0, var_poly.n_vars)
    term = (var_poly * var_poly).truncate(max_degree)
    k = 2
    fact = 2.0
    sign = -1.0
    while k <= max_degree:
        out = out + term.scale(sign / fact)
        term = (term * var_poly * var_poly).truncate(max_degree)
        sign = -sign
        fact *= (k + 1) * (k + 2)
        k += 2
    return out.truncate(max_degree)


class PolynomialMap:
    """Vector field R^n_in -> R^n_out with polynomial components."""

    def __init__(self, components, n_in):
        self.n_in = int(n_in)
        self.components = list(components)
        for p in self.components:
            if p.n_vars != self.n_in:
                raise ValueError("component arity differs from n_in")

    @property
    def n_out(self):
        return len(self.components)

    def __call__(self, x):
        return np.array([p(x) for p in self.components])

    def eval_many(self, points):
        return np.stack([p.eval_many(points) for p in self.components], axis=1)

    def degree(self):
        return max(p.degree() for p in self.components)

    def jacobian_at_zero(self):
        jac = np.zeros((self.n_out, self.n_in))
        for i, p in enumerate(self.components):
            for j in range(self.n_in):
                expo = [0] * self.n_in
                expo[j] = 1
                jac[i, j] = p.terms.get(tuple(expo), 0.0)
        return jac

    def close_loop_linear(self, beta):
        """Substitute the last input variable by beta . state.

        For a field f(s, a) over n state variables plus one action variable,
        returns the closed-loop field f(s, beta^T s) over the n state
        variables alone.
        """
        beta = np.asarray(beta, dtype=float)
        n_state = self.n_in - 1
        if beta.shape != (n_state,):
            raise ValueError(f"beta must have shape ({n_state},), got {beta.shape}")
        coeffs = np.concatenate([beta, [0.0]])
        closed = []
        for p in self.components:
            q = p.substitute_linear(self.n_in - 1, coeffs)
            closed.append(q.drop_variable(self.n_in - 1))
        return PolynomialMap(closed, n_state)
