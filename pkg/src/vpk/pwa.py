"""Polytopes and piecewise-affine systems.

A Polytope is the H-representation {s : A s <= b}, with an optional strict
flag per row.  A PiecewiseAffineSystem is an ordered list of (guard, affine
map) pieces; ``step`` dispatches to the first piece whose guard contains the
state, so piece order encodes the tie-breaking of the concrete simulator it
mirrors.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .validation import as_state


@dataclass(frozen=True)
class Polytope:
    """H-polytope A s <= b (row i strict when strict[i] is True)."""

    A: np.ndarray
    b: np.ndarray
    strict: tuple = None

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        b = np.asarray(self.b, dtype=float).reshape(-1)
        if A.shape[0] != b.shape[0]:
            raise ValueError(f"A has {A.shape[0]} rows but b has {b.shape[0]} entries")
        if not (np.all(np.isfinite(A)) and np.all(np.isfinite(b))):
            raise ValueError("polytope data must be finite")
        strict = self.strict
        if strict is None:
            strict = (False,) * A.shape[0]
        else:
            strict = tuple(bool(x) for x in strict)
            if len(strict) != A.shape[0]:
                raise ValueError("strict flags must match the number of rows")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "strict", strict)

    @property
    def dim(self):
        return self.A.shape[1]

    @property
    def n_rows(self):
        return self.A.shape[0]

    def contains(self, s, tol=0.0):
        s = as_state(s, self.dim)
        vals = self.A @ s
        for v, rhs, st in zip(vals, self.b, self.strict):
            if st:
                if not v < rhs + tol:
                    return False
            elif not v <= rhs + tol:
                return False
        return True

    def intersect(self, other):
        if other.dim != self.dim:
            raise ValueError("polytope dimension mismatch")
        return Polytope(
            A=np.vstack([self.A, other.A]),
            b=np.concatenate([self.b, other.b]),
            strict=self.strict + other.strict,
        )

    @classmethod
    def from_box(cls, lower, upper):
        """Axis-aligned box as a polytope; infinite bounds are dropped."""
        lower = np.asarray(lower, dtype=float)
        upper = np.asarray(upper, dtype=float)
        d = lower.shape[0]
        rows, rhs = [], []
        for i in range(d):
            if np.isfinite(upper[i]):
                row = np.zeros(d)
                row[i] = 1.0
                rows.append(row)
                rhs.append(upper[i])
            if np.isfinite(lower[i]):
                row = np.zeros(d)
                row[i] = -1.0
                rows.append(row)
                rhs.append(-lower[i])
        if not rows:
            rows = [np.zeros(d)]
            rhs = [0.0]
        return cls(A=np.array(rows), b=np.array(rhs))


@dataclass(frozen=True)
class PwaPiece:
    """One region of a piecewise-affine map: s' = M s + c on ``guard``."""

    guard: Polytope
    M: np.ndarray
    c: np.ndarray
    action: object = None
    name: str = ""

    def __post_init__(self):
        M = np.asarray(self.M, dtype=float)
        c = np.asarray(self.c, dtype=float).reshape(-1)
        if M.ndim != 2 or M.shape[0] != c.shape[0]:
            raise ValueError("map matrix/offset shapes are inconsistent")
        if M.shape[1] != self.guard.dim:
            raise ValueError("map input dimension differs from guard dimension")
        object.__setattr__(self, "M", M)
        object.__setattr__(self, "c", c)

    def apply(self, s):
        return apply_affine(self.M, self.c, s)


def apply_affine(M, c, s):
    """Single shared affine application so simulator and symbolic model agree
    bit for bit."""
    return M @ np.asarray(s, dtype=float) + c


@dataclass
class PiecewiseAffineSystem:
    """Ordered piece list over a common state space."""

    dim: int
    pieces: list = field(default_factory=list)
    operating_region: Polytope = None

    def __post_init__(self):
        for p in self.pieces:
            if p.guard.dim != self.dim or p.M.shape[1] != self.dim:
                raise ValueError("piece dimension differs from system dimension")

    def find_piece(self, s, tol=0.0):
        """Index of the first piece containing ``s``; -1 if none."""
        for i, piece in enumerate(self.pieces):
            if piece.guard.contains(s, tol=tol):
                return i
        return -1

    def step(self, s):
        i = self.find_piece(s)
        if i < 0:
            raise ValueError(f"state {np.asarray(s)} is outside every piece guard")
        return self.pieces[i].apply(s), i

    def pieces_for_action(self, action):
        return [p for p in self.pieces if p.action == action]

    def subsystem(self, action):
        """New system holding only the pieces for one action, order preserved.

        On a multi-action system ``step`` is only meaningful after selecting
        an action this way.
        """
        return PiecewiseAffineSystem(
            dim=self.dim,
            pieces=self.pieces_for_action(action),
            operating_region=self.operating_region,
        )

    def actions(self):
        seen = []
        for p in self.pieces:
            if p.action not in seen:
                seen.append(p.action)
        return seen

    def validate_cover(self, points):
        """Check every sample point hits some piece; returns uncovered points."""
        missed = []
        for s in points:
            if self.find_piece(s) < 0:
                missed.append(np.asarray(s, dtype=float))
        return missed
