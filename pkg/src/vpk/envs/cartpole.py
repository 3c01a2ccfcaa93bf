"""Cart-pole balancing with the classic constants.

State is (x, x_dot, theta, theta_dot); the control is a horizontal force on
the cart.  Integration is semi-implicit Euler: accelerations from the current
state update the velocities, and the new velocities update the positions.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..polynomial import Poly, PolynomialMap, cos_series, poly_inverse, sin_series
from ..pwa import PiecewiseAffineSystem, Polytope, PwaPiece
from ..validation import as_state


@dataclass(frozen=True)
class CartPoleParams:
    gravity: float = 9.8
    mass_cart: float = 1.0
    mass_pole: float = 0.1
    half_length: float = 0.5
    force_mag: float = 10.0
    dt: float = 0.02
    theta_limit: float = 0.2094
    x_limit: float = 2.4
    max_steps: int = 200

    def __post_init__(self):
        for name in ("gravity", "mass_cart", "mass_pole", "half_length",
                     "force_mag", "dt", "theta_limit", "x_limit"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")

    @property
    def total_mass(self):
        return self.mass_cart + self.mass_pole


def cartpole_accel(params, s, force):
    """Accelerations (xacc, thetaacc) at state ``s`` under ``force``."""
    _, x_dot, theta, theta_dot = s
    sin_t = np.sin(theta)
    cos_t = np.cos(theta)
    m = params.total_mass
    ml = params.mass_pole * params.half_length
    temp = (force + ml * theta_dot ** 2 * sin_t) / m
    theta_acc = (params.gravity * sin_t - cos_t * temp) / (
        params.half_length * (4.0 / 3.0 - params.mass_pole * cos_t ** 2 / m)
    )
    x_acc = temp - ml * theta_acc * cos_t / m
    return x_acc, theta_acc


def cartpole_step(params, s, a):
    """One semi-implicit Euler step; ``a`` is the applied force in newtons."""
    s = as_state(s, 4)
    force = float(a)
    x, x_dot, theta, theta_dot = s
    x_acc, theta_acc = cartpole_accel(params, s, force)
    x_dot = x_dot + params.dt * x_acc
    theta_dot = theta_dot + params.dt * theta_acc
    x = x + params.dt * x_dot
    theta = theta + params.dt * theta_dot
    return np.array([x, x_dot, theta, theta_dot])


def cartpole_linearize(params, discrete=False):
    """Jacobians of the dynamics at the upright equilibrium.

    Returns the continuous-time pair (A, B) with ds/dt = A s + B a, or the
    explicit-Euler discrete pair (I + dt*A, dt*B) when ``discrete`` is True.
    """
    m = params.total_mass
    ml = params.mass_pole * params.half_length
    denom = params.half_length * (4.0 / 3.0 - params.mass_pole / m)
    dtheta_acc_dtheta = params.gravity / denom
    dtheta_acc_dforce = -1.0 / (m * denom)
    dx_acc_dtheta = -(ml / m) * dtheta_acc_dtheta
    dx_acc_dforce = 1.0 / m - (ml / m) * dtheta_acc_dforce
    A = np.array([
        [0.0, 1.0, 0.0, 0.0],
        [0.0, 0.0, dx_acc_dtheta, 0.0],
        [0.0, 0.0, 0.0, 1.0],
        [0.0, 0.0, dtheta_acc_dtheta, 0.0],
    ])
    B = np.array([[0.0], [dx_acc_dforce], [0.0], [dtheta_acc_dforce]])
    if discrete:
        return np.eye(4) + params.dt * A, params.dt * B
    return A, B


def cartpole_taylor(params, degree):
    """Taylor expansion of the continuous dynamics about the origin.

    Returns a PolynomialMap over (x, x_dot, theta, theta_dot, force) with
    outputs (dx, dx_dot, dtheta, dtheta_dot).  Supported degrees: 1, 3, 5.
    """
    if degree not in (1, 3, 5):
        raise ValueError(f"degree must be one of 1, 3, 5; got {degree}")
    n = 5
    x_dot = Poly.variable(1, n)
    theta = Poly.variable(2, n)
    theta_dot = Poly.variable(3, n)
    force = Poly.variable(4, n)

    m = params.total_mass
    ml = params.mass_pole * params.half_length
    sin_t = sin_series(theta, degree)
    cos_t = cos_series(theta, degree)
    temp = (force + (theta_dot * theta_dot * sin_t).scale(ml)).scale(1.0 / m)
    temp = temp.truncate(degree)
    denom = (
        Poly.constant(4.0 / 3.0, n) - (cos_t * cos_t).scale(params.mass_pole / m)
    ).scale(params.half_length).truncate(degree)
    theta_acc = (
        (sin_t.scale(params.gravity) - (cos_t * temp).truncate(degree))
        * poly_inverse(denom, degree)
    ).truncate(degree)
    x_acc = (temp - (theta_acc * cos_t).scale(ml / m)).truncate(degree)
    return PolynomialMap([x_dot, x_acc, theta_dot, theta_acc], n)


def cartpole_discrete_pwa(params):
    """Linearized discrete dynamics as a one-piece-per-action system.

    Pieces are keyed by the discrete action index (0: push left, 1: push
    right); guards are trivially all of R^4.
    """
    A_d, B_d = cartpole_linearize(params, discrete=True)
    everywhere = Polytope(A=np.zeros((1, 4)), b=np.array([0.0]))
    pieces = []
    for idx, force in enumerate((-params.force_mag, params.force_mag)):
        pieces.append(PwaPiece(
            guard=everywhere,
            M=A_d,
            c=(B_d[:, 0] * force),
            action=idx,
            name=f"force{force:+g}",
        ))
    return PiecewiseAffineSystem(dim=4, pieces=pieces)


class CartPoleEnv:
    """Episode wrapper: +1 reward per surviving step, done on limit violation.

    ``mode`` selects the action interface: "discrete" exposes indices
    {0: -force_mag, 1: +force_mag}; "continuous" takes a force in newtons
    clipped to [-force_mag, force_mag].
    """

    def __init__(self, params=None, mode="discrete", init_range=0.05):
        if mode not in ("discrete", "continuous"):
            raise ValueError(f"mode must be 'discrete' or 'continuous', got {mode!r}")
        self.params = params or CartPoleParams()
        self.mode = mode
        self.init_range = float(init_range)
        self.state_dim = 4
        self.actions = [0, 1] if mode == "discrete" else None
        self.max_steps = self.params.max_steps

    def reset(self, rng):
        return rng.uniform(-self.init_range, self.init_range, size=4)

    def force_of(self, a):
        if self.mode == "discrete":
            a = int(a)
            if a not in (0, 1):
                raise ValueError(f"discrete action must be 0 or 1, got {a}")
            return -self.params.force_mag if a == 0 else self.params.force_mag
        return float(np.clip(a, -self.params.force_mag, self.params.force_mag))

    def step(self, s, a, rng=None):
        nxt = cartpole_step(self.params, s, self.force_of(a))
        done = bool(
            abs(nxt[0]) > self.params.x_limit
            or abs(nxt[2]) > self.params.theta_limit
        )
        return nxt, (0.0 if done else 1.0), done
