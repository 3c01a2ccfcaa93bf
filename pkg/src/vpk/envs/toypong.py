"""Single-paddle Pong on a small integer court.

State is (x, y, v_x, v_y, x_p): ball position, ball velocity, paddle center.
The paddle sits on the floor (y = 0) and moves left/right/stay by a fixed
step, clamped to the court.  Each step the ball advances by its velocity and
reflects elastically off the side walls and ceiling; reaching the floor
bounces the ball when the paddle is beneath it (|x - x_p| <= paddle_half_len)
and otherwise ends the episode.

Every branch of the step is an affine map with a polytope guard.  The
simulator dispatches on comparisons and then applies the exact same matrices
that ``toypong_pwa`` exposes, so the symbolic model and the simulator agree
bit for bit.  A lost ball is parked at y = -1 and the state then freezes,
keeping the symbolic dynamics total.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from ..pwa import PiecewiseAffineSystem, Polytope, PwaPiece, apply_affine
from ..validation import as_state

LEFT, RIGHT, STAY = 0, 1, 2
ACTION_NAMES = ("left", "right", "stay")

_X, _Y, _VX, _VY, _XP = range(5)
_PARKED_Y = -1.0


@dataclass(frozen=True)
class ToyPongParams:
    x_max: float = 30.0
    y_max: float = 20.0
    v_min: float = 1.0
    v_max: float = 2.0
    paddle_half_len: float = 4.0
    paddle_step: float = 2.0
    max_steps: int = 250

    def __post_init__(self):
        if not (0 < self.v_min <= self.v_max):
            raise ValueError("need 0 < v_min <= v_max")
        for name in ("x_max", "y_max", "paddle_half_len", "paddle_step"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.v_max >= self.x_max or self.v_max >= self.y_max:
            raise ValueError("speeds must be small relative to the court")


def _paddle_stage(params, delta):
    """(cases, M, c) for the paddle update x_p' = clamp(x_p + delta)."""
    eye = np.eye(5)
    stages = []
    # case lo: x_p + delta <= 0 -> x_p' = 0
    m = eye.copy()
    m[_XP] = 0.0
    g = np.zeros((1, 5))
    g[0, _XP] = 1.0
    stages.append(("lo", Polytope(g, np.array([-delta])), m, np.zeros(5)))
    # case hi: x_p + delta >= x_max -> x_p' = x_max
    m = eye.copy()
    m[_XP] = 0.0
    c = np.zeros(5)
    c[_XP] = params.x_max
    g = np.zeros((1, 5))
    g[0, _XP] = -1.0
    stages.append(("hi", Polytope(g, np.array([delta - params.x_max])), m, c))
    # case mid: stays in range -> x_p' = x_p + delta
    m = eye.copy()
    c = np.zeros(5)
    c[_XP] = delta
    g = np.zeros((2, 5))
    g[0, _XP] = -1.0
    g[1, _XP] = 1.0
    stages.append(("mid", Polytope(g, np.array([delta, params.x_max - delta])), m, c))
    return stages


def _side_stage(params):
    """(cases, M, c) for the horizontal ball update with wall reflections."""
    eye = np.eye(5)
    stages = []
    # left wall: x + v_x <= 0 -> x' = -(x + v_x), v_x' = -v_x
    m = eye.copy()
    m[_X, _X], m[_X, _VX] = -1.0, -1.0
    m[_VX, _VX] = -1.0
    g = np.zeros((1, 5))
    g[0, _X], g[0, _VX] = 1.0, 1.0
    stages.append(("left", Polytope(g, np.array([0.0])), m, np.zeros(5)))
    # right wall: x + v_x >= x_max -> x' = 2 x_max - (x + v_x), v_x' = -v_x
    m = eye.copy()
    m[_X, _X], m[_X, _VX] = -1.0, -1.0
    m[_VX, _VX] = -1.0
    c = np.zeros(5)
    c[_X] = 2.0 * params.x_max
    g = np.zeros((1, 5))
    g[0, _X], g[0, _VX] = -1.0, -1.0
    stages.append(("right", Polytope(g, np.array([-params.x_max])), m, c))
    # interior: 0 <= x + v_x <= x_max -> x' = x + v_x
    m = eye.copy()
    m[_X, _VX] = 1.0
    g = np.zeros((2, 5))
    g[0, _X], g[0, _VX] = -1.0, -1.0
    g[1, _X], g[1, _VX] = 1.0, 1.0
    stages.append(("mid", Polytope(g, np.array([0.0, params.x_max])), m, np.zeros(5)))
    return stages


def _shift_guard(guard, M, c):
    """Re-express a guard over the post-map state as rows over the pre state."""
    return Polytope(A=guard.A @ M, b=guard.b - guard.A @ c, strict=guard.strict)


def _vert_stage(params, m1, c1):
    """Vertical cases; bounce/miss guards read post-move ball and paddle."""
    eye = np.eye(5)
    stages = []
    # ceiling: y + v_y >= y_max -> y' = 2 y_max - (y + v_y), v_y' = -v_y
    m = eye.copy()
    m[_Y, _Y], m[_Y, _VY] = -1.0, -1.0
    m[_VY, _VY] = -1.0
    c = np.zeros(5)
    c[_Y] = 2.0 * params.y_max
    g = np.zeros((1, 5))
    g[0, _Y], g[0, _VY] = -1.0, -1.0
    stages.append(("top", Polytope(g, np.array([-params.y_max])), m, c))

    # floor guards share: ball was live (y >= 0) and crosses (y + v_y <= 0)
    floor = np.zeros((2, 5))
    floor[0, _Y] = -1.0
    floor[1, _Y], floor[1, _VY] = 1.0, 1.0
    floor_b = np.array([0.0, 0.0])
    # paddle beneath: |x' - x_p'| <= L over the post-move state
    gap_row = np.zeros(5)
    gap_row[_X], gap_row[_XP] = 1.0, -1.0
    L = params.paddle_half_len

    # bounce: y' = -(y + v_y), v_y' = -v_y
    m = eye.copy()
    m[_Y, _Y], m[_Y, _VY] = -1.0, -1.0
    m[_VY, _VY] = -1.0
    post = _shift_guard(Polytope(np.array([gap_row, -gap_row]), np.array([L, L])), m1, c1)
    guard = Polytope(np.vstack([floor, post.A]), np.concatenate([floor_b, post.b]))
    stages.append(("bounce", guard, m, np.zeros(5)))

    # missed to either side: park the ball below the floor
    m = eye.copy()
    m[_Y] = 0.0
    c = np.zeros(5)
    c[_Y] = _PARKED_Y
    for name, sign in (("miss_lo", 1.0), ("miss_hi", -1.0)):
        post = _shift_guard(Polytope((sign * gap_row)[None, :], np.array([-L])), m1, c1)
        guard = Polytope(np.vstack([floor, post.A]), np.concatenate([floor_b, post.b]))
        stages.append((name, guard, m, c))

    # interior fall/rise: 0 <= y + v_y <= y_max
    m = eye.copy()
    m[_Y, _VY] = 1.0
    g = np.zeros((2, 5))
    g[0, _Y], g[0, _VY] = -1.0, -1.0
    g[1, _Y], g[1, _VY] = 1.0, 1.0
    stages.append(("mid", Polytope(g, np.array([0.0, params.y_max])), m, np.zeros(5)))
    return stages


@lru_cache(maxsize=8)
def _piece_table(params):
    """Ordered pieces per action, plus a terminal piece shared by all actions."""
    deltas = (-params.paddle_step, params.paddle_step, 0.0)
    table = {}
    order = {}
    for action, delta in enumerate(deltas):
        pieces = []
        for p_name, p_guard, p_m, p_c in _paddle_stage(params, delta):
            for s_name, s_guard, s_m, s_c in _side_stage(params):
                m1 = s_m @ p_m
                c1 = s_m @ p_c + s_c
                guard1 = Polytope(
                    np.vstack([p_guard.A, s_guard.A]),
                    np.concatenate([p_guard.b, s_guard.b]),
                )
                for v_name, v_guard_extra, v_m, v_c in _vert_stage(params, m1, c1):
                    M = v_m @ m1
                    c = v_m @ c1 + v_c
                    guard = Polytope(
                        np.vstack([guard1.A, v_guard_extra.A]),
                        np.concatenate([guard1.b, v_guard_extra.b]),
                    )
                    name = f"{ACTION_NAMES[action]}/{p_name}.{s_name}.{v_name}"
                    pieces.append(PwaPiece(guard=guard, M=M, c=c, action=action, name=name))
        # parked ball: identity forever once y drops below the floor band
        g = np.zeros((1, 5))
        g[0, _Y] = 1.0
        pieces.append(PwaPiece(
            guard=Polytope(g, np.array([_PARKED_Y / 2.0])),
            M=np.eye(5),
            c=np.zeros(5),
            action=action,
            name=f"{ACTION_NAMES[action]}/parked",
        ))
        table[action] = pieces
        order[action] = {p.name.split("/", 1)[1]: p for p in pieces}
    return table, order


def toypong_pwa(params):
    """The full step map as an ordered piecewise-affine system (all actions)."""
    table, _ = _piece_table(params)
    pieces = []
    for action in (LEFT, RIGHT, STAY):
        pieces.extend(table[action])
    region = Polytope.from_box(
        lower=[0.0, _PARKED_Y, -params.v_max, -params.v_max, 0.0],
        upper=[params.x_max, params.y_max, params.v_max, params.v_max, params.x_max],
    )
    return PiecewiseAffineSystem(dim=5, pieces=pieces, operating_region=region)


def toypong_initial_set(params):
    """Initial states for bounded verification: ball in the upper half and
    falling at a speed within the configured band, paddle anywhere."""
    return Polytope.from_box(
        lower=[0.0, params.y_max / 2.0, -params.v_max, -params.v_max, 0.0],
        upper=[params.x_max, params.y_max, params.v_max, -params.v_min, params.x_max],
    )


def toypong_hit_target(params):
    """The good re-entry condition: the ball is moving up again (v_y > 0)."""
    row = np.zeros((1, 5))
    row[0, _VY] = -1.0
    return Polytope(row, np.zeros(1), (True,))


def toypong_step(params, s, a):
    """One step; returns (next state, done).

    Dispatches on the same comparisons that order the symbolic pieces and
    applies the matching affine map, so both routes produce identical floats.
    """
    s = as_state(s, 5)
    a = int(a)
    if a not in (LEFT, RIGHT, STAY):
        raise ValueError(f"action must be 0 (left), 1 (right), or 2 (stay), got {a}")
    _, order = _piece_table(params)
    x, y, vx, vy, xp = s
    if y <= _PARKED_Y / 2.0:
        piece = order[a]["parked"]
        return apply_affine(piece.M, piece.c, s), True

    delta = (-params.paddle_step, params.paddle_step, 0.0)[a]
    if xp + delta <= 0.0:
        p_case = "lo"
        xp_new = 0.0
    elif xp + delta >= params.x_max:
        p_case = "hi"
        xp_new = params.x_max
    else:
        p_case = "mid"
        xp_new = xp + delta

    x_hat = x + vx
    if x_hat <= 0.0:
        s_case = "left"
        x_new = -x_hat
    elif x_hat >= params.x_max:
        s_case = "right"
        x_new = 2.0 * params.x_max - x_hat
    else:
        s_case = "mid"
        x_new = x_hat

    y_hat = y + vy
    done = False
    if y_hat >= params.y_max:
        v_case = "top"
    elif y_hat <= 0.0:
        if abs(x_new - xp_new) <= params.paddle_half_len:
            v_case = "bounce"
        else:
            v_case = "miss_lo" if x_new - xp_new <= -params.paddle_half_len else "miss_hi"
            done = True
    else:
        v_case = "mid"

    piece = order[a][f"{p_case}.{s_case}.{v_case}"]
    return apply_affine(piece.M, piece.c, s), done


def predict_landing_x(params, s, max_horizon=200):
    """Ball-only forecast of the x position when the ball next reaches y = 0.

    Ignores the paddle entirely (walls and ceiling still reflect).  Returns
    (landing_x, steps_until_landing).
    """
    x, y, vx, vy = (float(v) for v in np.asarray(s, dtype=float)[:4])
    for t in range(1, max_horizon + 1):
        x_hat = x + vx
        if x_hat <= 0.0:
            x, vx = -x_hat, -vx
        elif x_hat >= params.x_max:
            x, vx = 2.0 * params.x_max - x_hat, -vx
        else:
            x = x_hat
        y_hat = y + vy
        if y_hat >= params.y_max:
            y, vy = 2.0 * params.y_max - y_hat, -vy
        elif y_hat <= 0.0:
            return x, t
        else:
            y = y_hat
    return x, max_horizon


class ToyPongEnv:
    """Episode wrapper: +1 per surviving step, done when the ball is missed.

    Episodes start with the ball high, moderate horizontal speed, and the
    paddle within reach, so a competent policy can keep every rally alive.
    """

    def __init__(self, params=None):
        self.params = params or ToyPongParams()
        self.state_dim = 5
        self.actions = [LEFT, RIGHT, STAY]
        self.max_steps = self.params.max_steps

    def reset(self, rng):
        p = self.params
        x = rng.uniform(2.0, p.x_max - 2.0)
        y = rng.uniform(0.75 * p.y_max, p.y_max)
        vx = rng.uniform(-1.0, 1.0)
        vy = -rng.uniform(p.v_min, p.v_max)
        xp = float(np.clip(x + rng.uniform(-8.0, 8.0), 0.0, p.x_max))
        return np.array([x, y, vx, vy, xp])

    def step(self, s, a, rng=None):
        nxt, done = toypong_step(self.params, s, a)
        return nxt, (0.0 if done else 1.0), done
