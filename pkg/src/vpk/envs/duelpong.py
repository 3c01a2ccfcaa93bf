"""Two-sided Pong against a scripted opponent, first to 21 points.

State is (x, y, v_x, v_y, y_p): ball position and velocity plus the player's
paddle center on the right wall (x = width).  The opponent guards the left
wall and carries no state of its own: it starts each crossing centered and
moves toward the ball's y at its tracking speed, so the y-band it can cover
when the ball arrives is

    reach = opp_half_len + opp_track_speed * width / |v_x|.

Player reflections add spin proportional to the contact offset (clamped), so
rally speeds drift and no rally lasts forever.  Scores are episode
bookkeeping, not part of the state; the pure step function returns the round
reward (-1, 0, +1) and the episode wrapper ends the game at 21 either side.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..validation import as_state

UP, DOWN, STAY = 0, 1, 2
ACTION_NAMES = ("up", "down", "stay")


@dataclass(frozen=True)
class DuelPongParams:
    width: float = 20.0
    height: float = 20.0
    ball_speed_x: float = 1.0
    paddle_half_len: float = 2.0
    paddle_speed: float = 1.5
    opp_half_len: float = 2.0
    opp_track_speed: float = 0.15
    spin_gain: float = 0.3
    vy_cap: float = 1.4
    rounds_to_win: int = 21
    max_steps: int = 3000

    def __post_init__(self):
        for name in ("width", "height", "ball_speed_x", "paddle_half_len",
                     "paddle_speed", "opp_half_len", "opp_track_speed", "vy_cap"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.rounds_to_win != 21:
            raise ValueError("games run to 21 points")
        if self.vy_cap >= self.paddle_speed + self.paddle_half_len:
            raise ValueError("a tracking paddle must be able to keep up with the ball")


def opponent_reach(params, v_x):
    """Half-width of the y-band the opponent covers at interception time."""
    travel = params.width / max(abs(float(v_x)), 1e-9)
    return params.opp_half_len + params.opp_track_speed * travel


def duelpong_step(params, s, a):
    """One step; returns (next state, reward, done).

    reward is +1 when the opponent misses, -1 when the player misses, else 0.
    done is always False here; game termination is score bookkeeping that the
    episode wrapper owns.
    """
    s = as_state(s, 5)
    a = int(a)
    if a not in (UP, DOWN, STAY):
        raise ValueError(f"action must be 0 (up), 1 (down), or 2 (stay), got {a}")
    x, y, vx, vy, y_p = s

    delta = (params.paddle_speed, -params.paddle_speed, 0.0)[a]
    y_p = float(np.clip(y_p + delta, 0.0, params.height))

    x_hat = x + vx
    y_hat = y + vy
    if y_hat <= 0.0:
        y_hat, vy = -y_hat, -vy
    elif y_hat >= params.height:
        y_hat, vy = 2.0 * params.height - y_hat, -vy

    reward = 0.0
    if x_hat >= params.width:
        if abs(y_hat - y_p) <= params.paddle_half_len:
            x_hat = 2.0 * params.width - x_hat
            vx = -vx
            spin = params.spin_gain * (y_hat - y_p)
            vy = float(np.clip(vy + spin, -params.vy_cap, params.vy_cap))
        else:
            reward = -1.0
            x_hat, y_hat, vx = _serve(params, y_hat, direction=-1.0)
    elif x_hat <= 0.0:
        if abs(y_hat - params.height / 2.0) <= opponent_reach(params, vx):
            x_hat = -x_hat
            vx = -vx
        else:
            reward = 1.0
            x_hat, y_hat, vx = _serve(params, y_hat, direction=1.0)

    return np.array([x_hat, y_hat, vx, vy, y_p]), reward, False


def _serve(params, y_exit, direction):
    """Re-serve from mid-court toward ``direction`` after a point."""
    x = params.width / 2.0
    y = float(np.clip(y_exit, 1.0, params.height - 1.0))
    vx = direction * params.ball_speed_x
    return x, y, vx


class DuelPongEnv:
    """Episode wrapper with score bookkeeping: first to 21 ends the game."""

    def __init__(self, params=None):
        self.params = params or DuelPongParams()
        self.state_dim = 5
        self.actions = [UP, DOWN, STAY]
        self.max_steps = self.params.max_steps
        self._player = 0
        self._opponent = 0

    def reset(self, rng):
        p = self.params
        self._player = 0
        self._opponent = 0
        x = p.width / 2.0
        y = rng.uniform(0.2 * p.height, 0.8 * p.height)
        vx = p.ball_speed_x * (1.0 if rng.uniform() < 0.5 else -1.0)
        vy = rng.uniform(-1.0, 1.0)
        y_p = rng.uniform(0.2 * p.height, 0.8 * p.height)
        return np.array([x, y, vx, vy, y_p])

    def step(self, s, a, rng=None):
        nxt, reward, _ = duelpong_step(self.params, s, a)
        if reward > 0:
            self._player += 1
        elif reward < 0:
            self._opponent += 1
        done = (self._player >= self.params.rounds_to_win
                or self._opponent >= self.params.rounds_to_win)
        return nxt, reward, done
