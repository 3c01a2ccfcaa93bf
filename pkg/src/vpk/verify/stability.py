"""Lyapunov region-of-attraction certification for polynomial closed loops.

The certificate is a quadratic V(s) = s^T P s with P solving the Lyapunov
equation A_cl^T P + P A_cl = -I, and a level rho such that interval
branch-and-bound proves vdot(s) <= -margin_c ||s||^2 everywhere on
{V <= rho} outside a small Euclidean ball of radius delta around the origin
(inside the ball, decrease follows from the linearization).  The SOS programs
a semidefinite solver would consume are emitted as data, never solved here.

Branch-and-bound box tests, in order per box: disjoint from {V <= rho};
inside the delta ball; direct interval bound on vdot + margin_c ||s||^2
(natural extension intersected with one Horner refinement); an interval
Gershgorin bound on the quadratic-form matrix, which certifies boxes touching
the origin where the direct bound loses to cancellation; a concrete midpoint
violation; otherwise bisect the widest side.
"""

from __future__ import annotations

import json

import numpy as np
from scipy.linalg import ldl

from ..polynomial import Poly
from .intervals import iadd, imul, ipow, iscale, poly_bounds, symmetric_eig_upper

DEFAULT_DELTA = 1e-4
DEFAULT_MARGIN = 1e-3
DEFAULT_BUDGET = 10**7

_RHO_FLOOR = 1e-6
_BISECT_ITERS = 20


def lyapunov_candidate(A_cl):
    """Solve A_cl^T P + P A_cl = -I for the unique symmetric PD solution.

    The system is assembled over the n(n+1)/2 upper-triangle unknowns.
    Raises if A_cl is not Hurwitz or the solution fails the (pivoted)
    definiteness check.
    """
    A = np.asarray(A_cl, dtype=float)
    n = A.shape[0]
    if A.shape != (n, n):
        raise ValueError("A_cl must be square")
    eigs = np.linalg.eigvals(A)
    if np.max(eigs.real) >= 0:
        raise ValueError(
            f"A_cl is not Hurwitz (max eigenvalue real part {np.max(eigs.real):.6g})"
        )
    index = {}
    for a in range(n):
        for b in range(a, n):
            index[(a, b)] = len(index)
    m = len(index)
    lhs = np.zeros((m, m))
    rhs = np.zeros(m)

    def unknown(a, b):
        return index[(a, b)] if a <= b else index[(b, a)]

    row = 0
    for i in range(n):
        for j in range(i, n):
            # (A^T P + P A)[i, j] = sum_k A_ki P_kj + P_ik A_kj
            for k in range(n):
                lhs[row, unknown(k, j)] += A[k, i]
                lhs[row, unknown(i, k)] += A[k, j]
            rhs[row] = -1.0 if i == j else 0.0
            row += 1
    sol = np.linalg.solve(lhs, rhs)
    P = np.zeros((n, n))
    for (a, b), pos in index.items():
        P[a, b] = sol[pos]
        P[b, a] = sol[pos]
    check_positive_definite(P)
    return P


def check_positive_definite(P):
    """Definiteness via a pivoted LDL^T factorization; raises when indefinite."""
    _, D, _ = ldl(np.asarray(P, dtype=float))
    i = 0
    n = D.shape[0]
    while i < n:
        if i + 1 < n and D[i + 1, i] != 0:
            # a 2x2 pivot block only appears for indefinite matrices
            block = D[i : i + 2, i : i + 2]
            if np.any(np.linalg.eigvalsh(block) <= 0):
                raise ValueError("matrix is not positive definite")
            i += 2
        else:
            if D[i, i] <= 0:
                raise ValueError("matrix is not positive definite")
            i += 1


def vdot_polynomial(P, f):
    """The polynomial 2 s^T P f(s), expanded to monomial form."""
    P = np.asarray(P, dtype=float)
    n = P.shape[0]
    if f.n_out != n or f.n_in != n:
        raise ValueError("f must be a square map matching P's dimension")
    vdot = Poly.constant(n, 0.0)
    for i in range(n):
        row = Poly.constant(n, 0.0)
        for j in range(n):
            if P[i, j] != 0:
                row = row.add(Poly.variable(n, j).scale(2.0 * P[i, j]))
        vdot = vdot.add(row.mul(f.components[i]))
    return vdot


def quad_poly(P):
    """s^T P s as an explicit polynomial."""
    P = np.asarray(P, dtype=float)
    n = P.shape[0]
    out = Poly.constant(n, 0.0)
    for i in range(n):
        for j in range(n):
            if P[i, j] != 0:
                term = Poly.variable(n, i).mul(Poly.variable(n, j)).scale(P[i, j])
                out = out.add(term)
    return out


class RangeEvaluator:
    """Interval range of one polynomial: natural extension intersected with a
    single Horner factorization along the variable of highest degree."""

    def __init__(self, poly):
        self.poly = poly
        degrees = [0] * poly.n_vars
        for exps in poly.terms:
            for i, e in enumerate(exps):
                degrees[i] = max(degrees[i], e)
        self.var = int(np.argmax(degrees)) if degrees else 0
        self.max_e = degrees[self.var] if degrees else 0
        groups = {}
        for exps, coeff in poly.terms.items():
            e = exps[self.var]
            reduced = list(exps)
            reduced[self.var] = 0
            groups.setdefault(e, {})[tuple(reduced)] = coeff
        self.layers = []
        for e in range(self.max_e, -1, -1):
            terms = groups.get(e)
            if terms is None:
                self.layers.append(None)
            else:
                p = Poly.constant(poly.n_vars, 0.0)
                p.terms.clear()
                p.terms.update(terms)
                self.layers.append(p)

    def bounds(self, lo, hi):
        nat_lo, nat_hi = poly_bounds(self.poly, lo, hi)
        if self.max_e == 0:
            return nat_lo, nat_hi
        x_lo = lo[..., self.var]
        x_hi = hi[..., self.var]
        acc_lo = np.zeros(nat_lo.shape)
        acc_hi = np.zeros(nat_hi.shape)
        first = True
        for layer in self.layers:
            if not first:
                acc_lo, acc_hi = imul(acc_lo, acc_hi, x_lo, x_hi)
            first = False
            if layer is not None:
                l_lo, l_hi = poly_bounds(layer, lo, hi)
                acc_lo, acc_hi = iadd(acc_lo, acc_hi, l_lo, l_hi)
        return np.maximum(nat_lo, acc_lo), np.minimum(nat_hi, acc_hi)


def _factor_quadratic_form(P, f, margin_c):
    """Polynomial interval matrix M(s) with g(s) = s^T M(s) s, when possible.

    Writes f = A s + h with h of degree >= 2 and factors 2 s^T P h(s) as a
    quadratic form with polynomial entries.  Returns None when f has a
    constant part (no equilibrium at the origin), in which case the caller
    skips this certificate tier.
    """
    n = f.n_in
    A = f.jacobian_at_zero()
    P = np.asarray(P, dtype=float)
    H = [[Poly.constant(n, 0.0) for _ in range(n)] for _ in range(n)]
    for i, comp in enumerate(f.components):
        for exps, coeff in comp.terms.items():
            total = sum(exps)
            if total == 0:
                if coeff != 0:
                    return None
                continue
            if total == 1:
                continue  # captured by A
            j = next(k for k, e in enumerate(exps) if e > 0)
            reduced = list(exps)
            reduced[j] -= 1
            H[i][j].terms[tuple(reduced)] = H[i][j].terms.get(tuple(reduced), 0.0) + coeff
    # Q(s) = 2 P^T Htilde(s); M(s) = A^T P + P A + margin_c I + sym(Q)
    L = A.T @ P + P @ A + margin_c * np.eye(n)
    entries = [[Poly.constant(n, 0.0) for _ in range(n)] for _ in range(n)]
    for k in range(n):
        for j in range(n):
            q = Poly.constant(n, 0.0)
            for i in range(n):
                if P[i, k] != 0:
                    q = q.add(H[i][j].scale(2.0 * P[i, k]))
            entries[k][j] = q
    sym_entries = [[None] * n for _ in range(n)]
    for a in range(n):
        for b in range(n):
            p = entries[a][b].scale(0.5).add(entries[b][a].scale(0.5))
            p.terms[(0,) * n] = p.terms.get((0,) * n, 0.0) + L[a, b]
            sym_entries[a][b] = p
    return sym_entries


class CertifyOutcome:
    """Result of one branch-and-bound certification run."""

    __slots__ = ("status", "violation", "violation_value", "boxes", "max_depth")

    def __init__(self, status, violation, violation_value, boxes, max_depth):
        self.status = status  # "certified" | "violation" | "budget_exceeded"
        self.violation = violation
        self.violation_value = violation_value
        self.boxes = boxes
        self.max_depth = max_depth

    @property
    def certified(self):
        return self.status == "certified"


def ellipsoid_box(P, rho):
    """Tight axis-aligned box around {s : s^T P s <= rho}."""
    P_inv = np.linalg.inv(np.asarray(P, dtype=float))
    ext = np.sqrt(rho * np.maximum(np.diag(P_inv), 0.0))
    return -ext, ext


def certify_region_report(P, f, rho, delta=DEFAULT_DELTA, margin_c=DEFAULT_MARGIN,
                          budget=DEFAULT_BUDGET, box=None, batch=2048):
    """Branch-and-bound proof that vdot <= -margin_c ||s||^2 on
    {V <= rho, ||s||_2 >= delta} (intersected with ``box`` when given)."""
    if rho <= 0 or delta <= 0 or margin_c <= 0:
        raise ValueError("rho, delta and margin_c must all be positive")
    P = np.asarray(P, dtype=float)
    n = P.shape[0]
    g_poly = vdot_polynomial(P, f)
    for i in range(n):
        key = tuple(2 if k == i else 0 for k in range(n))
        g_poly.terms[key] = g_poly.terms.get(key, 0.0) + margin_c
    g_eval = RangeEvaluator(g_poly)
    v_poly = quad_poly(P)
    v_eval = RangeEvaluator(v_poly)
    form = _factor_quadratic_form(P, f, margin_c)

    lo0, hi0 = ellipsoid_box(P, rho)
    if box is not None:
        lo0 = np.maximum(lo0, np.asarray(box[0], dtype=float))
        hi0 = np.minimum(hi0, np.asarray(box[1], dtype=float))
    if np.any(lo0 > hi0):
        return CertifyOutcome("certified", None, None, 0, 0)

    stack_lo = [lo0]
    stack_hi = [hi0]
    stack_depth = [0]
    boxes = 0
    max_depth = 0
    delta_sq = delta * delta

    while stack_lo:
        take = min(batch, len(stack_lo))
        lo = np.asarray(stack_lo[-take:])
        hi = np.asarray(stack_hi[-take:])
        depth = np.asarray(stack_depth[-take:])
        del stack_lo[-take:], stack_hi[-take:], stack_depth[-take:]
        boxes += take
        max_depth = max(max_depth, int(depth.max()))
        if boxes > budget:
            return CertifyOutcome("budget_exceeded", None, None, boxes, max_depth)

        v_lo, _ = v_eval.bounds(lo, hi)
        # squared Euclidean norm range of the box
        nrm_lo = np.zeros(take)
        nrm_hi = np.zeros(take)
        for i in range(n):
            sq_lo, sq_hi = ipow(lo[:, i], hi[:, i], 2)
            nrm_lo, nrm_hi = iadd(nrm_lo, nrm_hi, sq_lo, sq_hi)
        alive = ~((v_lo > rho) | (nrm_hi < delta_sq))
        if not np.any(alive):
            continue
        lo, hi, depth = lo[alive], hi[alive], depth[alive]

        _, g_hi = g_eval.bounds(lo, hi)
        undecided = g_hi > 0
        if form is not None and np.any(undecided):
            m = int(undecided.sum())
            mat_lo = np.empty((m, n, n))
            mat_hi = np.empty((m, n, n))
            sub_lo = lo[undecided]
            sub_hi = hi[undecided]
            for a in range(n):
                for b in range(n):
                    e_lo, e_hi = poly_bounds(form[a][b], sub_lo, sub_hi)
                    mat_lo[:, a, b] = e_lo
                    mat_hi[:, a, b] = e_hi
            eig_hi = symmetric_eig_upper(mat_lo, mat_hi)
            resolved = eig_hi <= 0
            idx = np.nonzero(undecided)[0][resolved]
            undecided[idx] = False
        if not np.any(undecided):
            continue
        lo, hi, depth = lo[undecided], hi[undecided], depth[undecided]

        mid = (lo + hi) / 2
        g_mid = g_poly.eval_many(mid)
        v_mid = v_poly.eval_many(mid)
        in_region = (v_mid <= rho) & ((mid ** 2).sum(axis=1) >= delta_sq)
        bad = np.nonzero((g_mid > 1e-12) & in_region)[0]
        if bad.size:
            k = int(bad[0])
            return CertifyOutcome(
                "violation", mid[k].copy(), float(g_mid[k]), boxes, max_depth
            )

        widths = hi - lo
        split = np.argmax(widths, axis=1)
        for k in range(lo.shape[0]):
            d = int(split[k])
            cut = 0.5 * (lo[k, d] + hi[k, d])
            left_hi = hi[k].copy()
            left_hi[d] = cut
            right_lo = lo[k].copy()
            right_lo[d] = cut
            stack_lo.extend([lo[k].copy(), right_lo])
            stack_hi.extend([left_hi, hi[k].copy()])
            stack_depth.extend([int(depth[k]) + 1, int(depth[k]) + 1])

    return CertifyOutcome("certified", None, None, boxes, max_depth)


def certify_region(P, f, rho, delta=DEFAULT_DELTA, margin_c=DEFAULT_MARGIN,
                   budget=DEFAULT_BUDGET, box=None):
    """True only when branch-and-bound proves the Lyapunov decrease condition
    on {V <= rho, ||s|| >= delta}; False on refutation or budget exhaustion
    (use certify_region_report to distinguish the two)."""
    return certify_region_report(P, f, rho, delta, margin_c, budget, box=box).certified


class StabilityCertificate:
    """V(s) = s^T P s decreases on {V <= rho} within the recorded leaf box."""

    def __init__(self, P, rho, leaf_lower, leaf_upper, margin_c, delta, bb_stats,
                 dynamics_note=""):
        self.P = np.asarray(P, dtype=float)
        check_positive_definite(self.P)
        if rho <= 0:
            raise ValueError("rho must be positive")
        self.rho = float(rho)
        self.leaf_lower = np.asarray(leaf_lower, dtype=float)
        self.leaf_upper = np.asarray(leaf_upper, dtype=float)
        self.margin_c = float(margin_c)
        self.delta = float(delta)
        self.bb_stats = tuple(bb_stats)
        self.dynamics_note = dynamics_note

    def contains(self, s):
        s = np.asarray(s, dtype=float)
        if np.any(s <= self.leaf_lower) or np.any(s > self.leaf_upper):
            return False
        return float(s @ self.P @ s) <= self.rho

    def box(self):
        lo, hi = ellipsoid_box(self.P, self.rho)
        return np.maximum(lo, self.leaf_lower), np.minimum(hi, self.leaf_upper)

    def to_dict(self):
        def bound(v):
            return None if not np.isfinite(v) else float(v)

        return {
            "P": self.P.tolist(),
            "rho": self.rho,
            "delta": self.delta,
            "margin": self.margin_c,
            "leaf_box": {
                "lower": [bound(v) for v in self.leaf_lower],
                "upper": [bound(v) for v in self.leaf_upper],
            },
            "stats": {"boxes": self.bb_stats[0], "max_depth": self.bb_stats[1]},
            "dynamics": self.dynamics_note,
        }

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, sort_keys=True, indent=2)
            fh.write("\n")

    @classmethod
    def from_dict(cls, doc):
        lower = [(-np.inf if v is None else v) for v in doc["leaf_box"]["lower"]]
        upper = [(np.inf if v is None else v) for v in doc["leaf_box"]["upper"]]
        return cls(
            doc["P"], doc["rho"], lower, upper, doc["margin"], doc["delta"],
            (doc["stats"]["boxes"], doc["stats"]["max_depth"]),
            doc.get("dynamics", ""),
        )


def sample_violation_level(P, f, delta, margin_c, seed=0, samples=4096):
    """Estimate the V-level of the first vdot violation by expanding sampling.

    Returns an upper bound for the rho search: the smallest V value among
    sampled points violating the margin condition, or the largest sampled V
    when no violation is ever seen.
    """
    n = f.n_in
    P = np.asarray(P, dtype=float)
    g = vdot_polynomial(P, f)
    for i in range(n):
        key = tuple(2 if k == i else 0 for k in range(n))
        g.terms[key] = g.terms.get(key, 0.0) + margin_c
    rng = np.random.default_rng(seed)
    radius = max(delta * 10, 1e-3)
    best = None
    v_seen = 0.0
    for _ in range(40):
        pts = rng.uniform(-radius, radius, size=(samples, n))
        gv = g.eval_many(pts)
        vv = np.einsum("bi,ij,bj->b", pts, P, pts)
        v_seen = max(v_seen, float(vv.max()))
        norms = (pts ** 2).sum(axis=1)
        viol = (gv > 0) & (norms >= delta * delta)
        if np.any(viol):
            level = float(vv[viol].min())
            best = level if best is None else min(best, level)
            break
        radius *= 2.0
    return best if best is not None else v_seen


def max_rho(P, f, delta=DEFAULT_DELTA, margin_c=DEFAULT_MARGIN, budget=DEFAULT_BUDGET,
            box=None, seed=0):
    """Largest certifiable level via 20-step bisection from a sampled cap."""
    rho_upper = sample_violation_level(P, f, delta, margin_c, seed=seed)
    if box is not None:
        rho_upper = min(rho_upper, _box_rho_cap(P, box))
    rho_upper = max(rho_upper, _RHO_FLOOR * 2)
    lo = _RHO_FLOOR
    outcome = certify_region_report(P, f, lo, delta, margin_c, budget, box=box)
    if not outcome.certified:
        raise RuntimeError(
            f"could not certify even rho = {lo:g}: {outcome.status}"
        )
    hi = rho_upper
    for _ in range(_BISECT_ITERS):
        mid = 0.5 * (lo + hi)
        trial = certify_region_report(P, f, mid, delta, margin_c, budget, box=box)
        if trial.certified:
            lo, outcome = mid, trial
        else:
            hi = mid
    n = f.n_in
    lower = np.full(n, -np.inf) if box is None else np.asarray(box[0], dtype=float)
    upper = np.full(n, np.inf) if box is None else np.asarray(box[1], dtype=float)
    return StabilityCertificate(
        P, lo, lower, upper, margin_c, delta,
        (outcome.boxes, outcome.max_depth),
        dynamics_note=f"polynomial dynamics of degree {f.degree()}",
    )


def _box_rho_cap(P, box):
    """Largest rho with {V <= rho} inside the box (per-axis extent test)."""
    lower, upper = (np.asarray(b, dtype=float) for b in box)
    P_inv = np.linalg.inv(np.asarray(P, dtype=float))
    cap = np.inf
    for i in range(lower.shape[0]):
        dist = min(abs(lower[i]), abs(upper[i]))
        if np.isfinite(dist):
            denom = max(P_inv[i, i], 1e-300)
            cap = min(cap, dist * dist / denom)
    return cap


def roa_setup(tree, f_env, intercept_tol=1e-6):
    """Closed loop and Lyapunov candidate for the tree's origin leaf.

    Returns (P, closed-loop PolynomialMap, origin leaf region).  The leaf
    routed to the origin provides the local controller u = beta^T s;
    substituting it into the control input of ``f_env`` gives the closed
    loop.
    """
    if tree.leaf_kind != "linear":
        raise ValueError("tree_roa requires a linear-leaf tree")
    n = f_env.n_in - 1
    if tree.dim != n:
        raise ValueError("tree dimension must match the state part of f_env")
    origin = np.zeros(n)
    leaf_idx = tree.leaf_for(origin)
    region = next(r for r in tree.leaf_regions() if r.node_index == leaf_idx)
    if not (np.all(region.lower < 0) and np.all(region.upper > 0)):
        raise ValueError("origin lies on a split boundary of the tree")
    leaf = tree.nodes[leaf_idx]
    if abs(leaf["intercept"]) > intercept_tol:
        raise ValueError(
            f"origin leaf has intercept {leaf['intercept']:.3g}; the policy "
            "does not vanish at the equilibrium"
        )
    beta = np.asarray(leaf["weights"], dtype=float)
    closed = f_env.close_loop_linear(beta)
    A_cl = closed.jacobian_at_zero()
    P = lyapunov_candidate(A_cl)
    return P, closed, region


def tree_roa(tree, f_env, delta=DEFAULT_DELTA, margin_c=DEFAULT_MARGIN,
             budget=DEFAULT_BUDGET, seed=0, intercept_tol=1e-6):
    """Region of attraction of a linear-leaf tree around the origin.

    The certified ellipsoid is additionally shrunk until it fits the origin
    leaf's box, so every certified state is also routed to the same leaf.
    """
    P, closed, region = roa_setup(tree, f_env, intercept_tol=intercept_tol)
    box = (region.lower, region.upper)
    cert = max_rho(P, closed, delta=delta, margin_c=margin_c, budget=budget,
                   box=box, seed=seed)
    return cert


def enumerative_check(P, f, rho, grid_step):
    """Grid-sampling baseline: vdot at grid points inside {V <= rho}.

    Returns the list of (point, vdot value) with vdot >= 0.  Sampling only;
    no guarantee between grid points.
    """
    if grid_step <= 0:
        raise ValueError("grid_step must be positive")
    P = np.asarray(P, dtype=float)
    n = f.n_in
    vdot = vdot_polynomial(P, f)
    lo, hi = ellipsoid_box(P, rho)
    axes = [np.arange(lo[i], hi[i] + grid_step / 2, grid_step) for i in range(n)]
    sizes = [len(a) for a in axes]
    total = int(np.prod(sizes))
    violations = []
    chunk = 200_000
    for start in range(0, total, chunk):
        flat = np.arange(start, min(start + chunk, total))
        coords = np.unravel_index(flat, sizes)
        block = np.stack([axes[i][coords[i]] for i in range(n)], axis=1)
        v = np.einsum("bi,ij,bj->b", block, P, block)
        inside = v <= rho
        if not np.any(inside):
            continue
        sel = block[inside]
        g = vdot.eval_many(sel)
        for idx in np.nonzero(g >= 0)[0]:
            violations.append((sel[idx].copy(), float(g[idx])))
    return violations
