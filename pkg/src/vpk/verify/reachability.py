"""Bounded-horizon reachability for piecewise-affine closed loops.

Every trajectory of a PWA loop is determined by the sequence of pieces it
activates, and along one sequence the state is an affine function of the
initial state: s_t = M_t s_0 + c_t.  The checker therefore enumerates piece
sequences depth-first, carrying all guard constraints re-expressed over s_0,
and asks whether the constraint system stays satisfiable.  No polytope images
are ever computed, so non-invertible pieces (clamps, resets) cost nothing.

Branch feasibility uses three tiers: an interval prune over the initial box,
a floating-point LP with a safety margin, and exact rational LP for anything
near the boundary.  A counterexample is only ever reported after an exact
rational witness has been found and the witness replays to a real violation
through the first-match simulator.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog

from ..pwa import PiecewiseAffineSystem, Polytope, PwaPiece
from .intervals import affine_bounds
from .simplex import feasible_point, to_fraction

_FLOAT_MARGIN = 1e-7

_frac = np.vectorize(to_fraction, otypes=[object])


@dataclass
class Counterexample:
    s0: np.ndarray
    states: list
    violation_step: int
    piece_path: list
    description: str


@dataclass
class Verdict:
    status: str  # "verified" | "counterexample" | "budget_exceeded"
    counterexample: Counterexample | None
    nodes: int
    lp_calls: int
    exact_calls: int
    rejected_witnesses: int
    elapsed: float

    @property
    def verified(self):
        return self.status == "verified"


def compose_closed_loop(system, tree):
    """Close a multi-action PWA system with a class-leaf tree policy.

    Each closed-loop piece is one tree leaf cell intersected with one guard
    of the leaf's action.  Leaf lower faces are open, so those rows are
    strict; the resulting pieces tile the same states the simulator visits.
    """
    if tree.leaf_kind != "class":
        raise ValueError("closing the loop requires a class-leaf tree")
    if tree.dim != system.dim:
        raise ValueError("tree and system dimensions differ")
    pieces = []
    for region in tree.leaf_regions():
        action = tree.nodes[region.node_index]["value"]
        rows_A, rows_b, rows_strict = [], [], []
        for f in range(tree.dim):
            if np.isfinite(region.upper[f]):
                row = np.zeros(tree.dim)
                row[f] = 1.0
                rows_A.append(row)
                rows_b.append(region.upper[f])
                rows_strict.append(False)
            if np.isfinite(region.lower[f]):
                row = np.zeros(tree.dim)
                row[f] = -1.0
                rows_A.append(row)
                rows_b.append(-region.lower[f])
                rows_strict.append(True)
        if rows_A:
            leaf_guard = Polytope(np.asarray(rows_A), np.asarray(rows_b), tuple(rows_strict))
        else:
            leaf_guard = Polytope(np.zeros((1, tree.dim)), np.zeros(1))
        for piece in system.pieces_for_action(action):
            pieces.append(PwaPiece(
                guard=leaf_guard.intersect(piece.guard),
                M=piece.M,
                c=piece.c,
                action=action,
                name=f"leaf{region.node_index}:{piece.name}",
            ))
    return PiecewiseAffineSystem(system.dim, pieces, system.operating_region)


class _GuardData:
    """One constraint group in float and exact form."""

    __slots__ = ("A_f", "b_f", "strict", "A_e", "b_e")

    def __init__(self, A, b, strict):
        self.A_f = np.asarray(A, dtype=float).reshape(len(b), -1)
        self.b_f = np.asarray(b, dtype=float)
        self.strict = list(strict)
        self.A_e = [list(_frac(row)) for row in self.A_f]
        self.b_e = [to_fraction(v) for v in self.b_f]


@dataclass
class _Rows:
    """Constraint system over s_0, kept in float and exact forms."""

    A: list = field(default_factory=list)
    b: list = field(default_factory=list)
    strict: list = field(default_factory=list)
    A_exact: list = field(default_factory=list)
    b_exact: list = field(default_factory=list)

    def extended(self, A_f, b_f, strict, A_e, b_e):
        child = _Rows(list(self.A), list(self.b), list(self.strict),
                      list(self.A_exact), list(self.b_exact))
        child.A.extend(A_f)
        child.b.extend(b_f)
        child.strict.extend(strict)
        child.A_exact.extend(A_e)
        child.b_exact.extend(b_e)
        return child


class _BudgetExceeded(Exception):
    pass


def _as_polytope_list(polys):
    if polys is None:
        return None
    return list(polys) if isinstance(polys, (list, tuple)) else [polys]


def _trace_violation(system, s0, *, safe=None, unsafe=None, target=None, t_max=0):
    """Step the first-match simulator from s0; return (states, step, path) at
    the first concrete violation, or None when the property holds.

    For target specs the violation is reaching the horizon without ever
    entering any target polytope, so the returned step is t_max.
    """
    states = [np.asarray(s0, dtype=float)]
    path = []
    for t in range(t_max + 1):
        s = states[-1]
        if target is not None:
            if any(p.contains(s) for p in target):
                return None
        elif (not safe.contains(s)) if safe is not None else unsafe.contains(s):
            return states, t, path
        if t == t_max:
            break
        piece = system.find_piece(s)
        if piece is None:
            return None
        path.append(piece.name)
        states.append(piece.apply(s))
    if target is not None:
        return states, t_max, path
    return None


def replay_counterexample(trace, system, tree=None, *, safe=None, unsafe=None,
                          target=None, t_max):
    """Confirm a counterexample by concrete simulation.

    Steps the first-match simulator from the trace's initial state (``trace``
    may be a Counterexample or a list of states) and returns True iff the
    claimed violation actually occurs within t_max steps.
    """
    if tree is not None:
        system = compose_closed_loop(system, tree)
    s0 = trace.s0 if isinstance(trace, Counterexample) else np.asarray(trace[0], dtype=float)
    found = _trace_violation(system, s0, safe=safe, unsafe=unsafe,
                             target=_as_polytope_list(target), t_max=t_max)
    return found is not None


class _Checker:
    def __init__(self, system, init, safe, unsafe, target, t_max, budget, time_limit):
        given = sum(x is not None for x in (safe, unsafe, target))
        if given != 1:
            raise ValueError("provide exactly one of safe=, unsafe=, or target=")
        self.system = system
        self.n = system.dim
        self.t_max = int(t_max)
        self.budget = int(budget)
        self.time_limit = time_limit
        self.safe = safe
        self.unsafe = unsafe
        self.target = _as_polytope_list(target)
        self.nodes = 0
        self.lp_calls = 0
        self.exact_calls = 0
        self.rejected = 0
        self.start = time.monotonic()

        init_guard = _GuardData(init.A, init.b, init.strict)
        self.root_rows = _Rows(
            list(init_guard.A_f), list(init_guard.b_f), list(init_guard.strict),
            list(init_guard.A_e), list(init_guard.b_e),
        )
        self.box_lo, self.box_hi = self._bounding_box(init)
        self.pieces = [
            (
                _GuardData(p.guard.A, p.guard.b, p.guard.strict),
                np.asarray(p.M, dtype=float),
                np.asarray(p.c, dtype=float),
                _frac(np.asarray(p.M, dtype=float)),
                _frac(np.asarray(p.c, dtype=float)),
            )
            for p in system.pieces
        ]
        if self.target is None:
            self.disjuncts = self._violation_disjuncts()
        else:
            self.neg_groups = self._target_negation_groups()

    def _bounding_box(self, init):
        lo = np.full(self.n, -np.inf)
        hi = np.full(self.n, np.inf)
        A = np.asarray(init.A, dtype=float)
        b = np.asarray(init.b, dtype=float)
        for i in range(self.n):
            c = np.zeros(self.n)
            c[i] = 1.0
            res = linprog(c, A_ub=A, b_ub=b, bounds=[(None, None)] * self.n, method="highs")
            if res.status == 0:
                lo[i] = res.x[i] - 1e-9 * (1 + abs(res.x[i]))
            res = linprog(-c, A_ub=A, b_ub=b, bounds=[(None, None)] * self.n, method="highs")
            if res.status == 0:
                hi[i] = res.x[i] + 1e-9 * (1 + abs(res.x[i]))
        return lo, hi

    def _violation_disjuncts(self):
        """Row groups whose satisfaction at step t is a violation."""
        out = []
        if self.safe is not None:
            A = np.asarray(self.safe.A, dtype=float)
            for i in range(self.safe.n_rows):
                # negation: a.s <= b (non-strict) fails iff a.s > b
                #           a.s <  b (strict)     fails iff a.s >= b
                out.append(_GuardData(
                    [-A[i]], [-float(self.safe.b[i])], [not self.safe.strict[i]]
                ))
        else:
            out.append(_GuardData(self.unsafe.A, self.unsafe.b, self.unsafe.strict))
        return out

    def _target_negation_groups(self):
        """Conjunctions covering 'outside every target polytope'.

        not(P1 or P2 or ...) distributes into a product: each group picks one
        violated row per target polytope.
        """
        import itertools

        per_poly = []
        for poly in self.target:
            A = np.asarray(poly.A, dtype=float)
            rows = []
            for i in range(poly.n_rows):
                rows.append((-A[i], -float(poly.b[i]), not poly.strict[i]))
            per_poly.append(rows)
        groups = []
        for combo in itertools.product(*per_poly):
            groups.append(_GuardData(
                [r[0] for r in combo], [r[1] for r in combo], [r[2] for r in combo]
            ))
        return groups

    def _shift(self, guard, M_f, c_f, M_e, c_e):
        """Re-express guard rows over s_0 given s_t = M s_0 + c."""
        A_f = list(guard.A_f @ M_f)
        b_f = list(guard.b_f - guard.A_f @ c_f)
        A_e = [list(a @ M_e) for a in guard.A_e]
        b_e = [bb - sum(x * y for x, y in zip(a, c_e))
               for a, bb in zip(guard.A_e, guard.b_e)]
        return A_f, b_f, list(guard.strict), A_e, b_e

    def _interval_infeasible(self, A_f, b_f):
        lo, _ = affine_bounds(np.asarray(A_f), np.zeros(len(A_f)), self.box_lo, self.box_hi)
        return bool(np.any(lo > np.asarray(b_f)))

    def _float_screen(self, rows):
        """Chebyshev-style slack: >0 clearly feasible, <0 clearly infeasible."""
        self.lp_calls += 1
        m = len(rows.A)
        A = np.hstack([np.asarray(rows.A), np.ones((m, 1))])
        A = np.vstack([A, np.concatenate([np.zeros(self.n), [1.0]])])
        b = np.concatenate([np.asarray(rows.b), [1.0]])
        c = np.zeros(self.n + 1)
        c[-1] = -1.0
        res = linprog(c, A_ub=A, b_ub=b, bounds=[(None, None)] * (self.n + 1), method="highs")
        if res.status == 2:
            return -np.inf
        if res.status != 0:
            return 0.0  # numerically unclear; defer to exact arithmetic
        return float(res.x[-1])

    def _exact_witness(self, rows):
        self.exact_calls += 1
        return feasible_point(rows.A_exact, rows.b_exact, strict=rows.strict)

    def _branch_feasible(self, rows):
        slack = self._float_screen(rows)
        if slack > _FLOAT_MARGIN:
            return True
        if slack < -_FLOAT_MARGIN:
            return False
        return self._exact_witness(rows) is not None

    def _replay(self, s0):
        """Run the loop from s0 and look for a real violation."""
        return _trace_violation(self.system, s0, safe=self.safe, unsafe=self.unsafe,
                                target=self.target, t_max=self.t_max)

    def _confirm(self, cand):
        """Exact witness + concrete replay; None if the branch is spurious."""
        witness = self._exact_witness(cand)
        if witness is None:
            return None
        s0 = np.asarray([float(w) for w in witness])
        replay = self._replay(s0)
        if replay is None:
            self.rejected += 1
            return None
        states, step, path = replay
        if self.safe is not None:
            kind = "left the safe set"
        elif self.unsafe is not None:
            kind = "entered the unsafe set"
        else:
            kind = "missed every target set through the horizon, ending"
        return Counterexample(
            s0=s0, states=states, violation_step=step, piece_path=path,
            description=f"trajectory {kind} at step {step}",
        )

    def _try_violation(self, rows, M_f, c_f, M_e, c_e):
        for guard in self.disjuncts:
            cand = rows.extended(*self._shift(guard, M_f, c_f, M_e, c_e))
            if self._interval_infeasible(cand.A, cand.b):
                continue
            if self._float_screen(cand) < -_FLOAT_MARGIN:
                continue
            ce = self._confirm(cand)
            if ce is not None:
                return ce
        return None

    def run(self):
        M_f = np.eye(self.n)
        c_f = np.zeros(self.n)
        M_e = _frac(np.eye(self.n))
        c_e = _frac(np.zeros(self.n))
        try:
            if self.target is not None:
                ce = self._dfs_target(self.root_rows, M_f, c_f, M_e, c_e, 0)
            else:
                ce = self._dfs(self.root_rows, M_f, c_f, M_e, c_e, 0)
        except _BudgetExceeded:
            return self._verdict("budget_exceeded", None)
        if ce is not None:
            return self._verdict("counterexample", ce)
        return self._verdict("verified", None)

    def _verdict(self, status, ce):
        return Verdict(
            status=status, counterexample=ce, nodes=self.nodes,
            lp_calls=self.lp_calls, exact_calls=self.exact_calls,
            rejected_witnesses=self.rejected,
            elapsed=time.monotonic() - self.start,
        )

    def _tick(self):
        self.nodes += 1
        if self.nodes > self.budget:
            raise _BudgetExceeded()
        if self.time_limit is not None and time.monotonic() - self.start > self.time_limit:
            raise _BudgetExceeded()

    def _dfs(self, rows, M_f, c_f, M_e, c_e, depth):
        self._tick()
        ce = self._try_violation(rows, M_f, c_f, M_e, c_e)
        if ce is not None:
            return ce
        if depth == self.t_max:
            return None
        for guard, M_pf, c_pf, M_pe, c_pe in self.pieces:
            child = rows.extended(*self._shift(guard, M_f, c_f, M_e, c_e))
            if self._interval_infeasible(child.A, child.b):
                continue
            if not self._branch_feasible(child):
                continue
            ce = self._dfs(
                child,
                M_pf @ M_f,
                M_pf @ c_f + c_pf,
                M_pe @ M_e,
                M_pe @ c_e + c_pe,
                depth + 1,
            )
            if ce is not None:
                return ce
        return None

    def _dfs_target(self, rows, M_f, c_f, M_e, c_e, depth):
        """Search for a path that stays outside every target polytope.

        The negated target rows are conjoined at every step, so a branch dies
        as soon as reaching the target becomes unavoidable, and a branch that
        is still feasible at the horizon is the counterexample.
        """
        self._tick()
        for group in self.neg_groups:
            cand = rows.extended(*self._shift(group, M_f, c_f, M_e, c_e))
            if self._interval_infeasible(cand.A, cand.b):
                continue
            if depth == self.t_max:
                if self._float_screen(cand) < -_FLOAT_MARGIN:
                    continue
                ce = self._confirm(cand)
                if ce is not None:
                    return ce
                continue
            if not self._branch_feasible(cand):
                continue
            for guard, M_pf, c_pf, M_pe, c_pe in self.pieces:
                child = cand.extended(*self._shift(guard, M_f, c_f, M_e, c_e))
                if self._interval_infeasible(child.A, child.b):
                    continue
                if not self._branch_feasible(child):
                    continue
                ce = self._dfs_target(
                    child,
                    M_pf @ M_f,
                    M_pf @ c_f + c_pf,
                    M_pe @ M_e,
                    M_pe @ c_e + c_pe,
                    depth + 1,
                )
                if ce is not None:
                    return ce
        return None


def reach_check(system, init, *, safe=None, unsafe=None, target=None, t_max,
                budget=10**6, time_limit=None):
    """Bounded reachability over a closed-loop PWA system.

    Exactly one property kind must be given.  With ``safe=`` the claim is
    invariance: every trajectory from ``init`` stays in the safe polytope for
    t_max steps.  With ``unsafe=`` the claim is avoidance of the given
    polytope.  With ``target=`` (one polytope or a disjunctive list) the
    claim is that every trajectory enters a target polytope within t_max
    steps.  The verdict is "verified", "counterexample" (with an exact,
    replayed witness), or "budget_exceeded" once more than ``budget`` branch
    nodes are visited.
    """
    if t_max < 0:
        raise ValueError("t_max must be >= 0")
    checker = _Checker(system, init, safe, unsafe, target, t_max, budget, time_limit)
    return checker.run()


def toypong_bounded_check(tree, params=None, t_max=None, budget=10**6,
                          time_limit=None):
    """Verify the paddle returns every falling ball within the bounce horizon.

    Initial set: ball in the upper half, falling within the speed band,
    paddle anywhere.  Target: the ball moving upward again (v_y > 0), which
    only a paddle hit can cause; the horizon defaults to
    ceil(2 y_max / v_min), long enough for the slowest ball to fall and
    return.  A counterexample is a concrete rally the policy drops.
    """
    import math

    from ..envs.toypong import (
        ToyPongParams,
        toypong_hit_target,
        toypong_initial_set,
        toypong_pwa,
    )

    params = params or ToyPongParams()
    if t_max is None:
        t_max = math.ceil(2.0 * params.y_max / params.v_min)
    loop = compose_closed_loop(toypong_pwa(params), tree)
    return reach_check(
        loop, toypong_initial_set(params), target=toypong_hit_target(params),
        t_max=t_max, budget=budget, time_limit=time_limit,
    )


def cartpole_bounded_check(tree, params=None, horizon=10, init_radius=0.05,
                           theta_bound=None, budget=10**6):
    """Verify the linearized loop keeps the pole angle in bounds.

    Initial set: the centered box of the given radius in all four state
    variables.  Safe set: |theta| <= theta_bound (the fall threshold by
    default).  Dynamics: the discrete linearized bang-bang model closed with
    the tree policy.
    """
    from ..envs.cartpole import CartPoleParams, cartpole_discrete_pwa

    params = params or CartPoleParams()
    bound = params.theta_limit if theta_bound is None else float(theta_bound)
    loop = compose_closed_loop(cartpole_discrete_pwa(params), tree)
    init = Polytope.from_box([-init_radius] * 4, [init_radius] * 4)
    theta_row = np.zeros(4)
    theta_row[2] = 1.0
    safe = Polytope(np.asarray([theta_row, -theta_row]), np.asarray([bound, bound]))
    return reach_check(loop, init, safe=safe, t_max=horizon, budget=budget)
