"""Oracle controllers: scripted experts, LQR/iLQR, and serialized policies.

An oracle is anything with ``act(s) -> action`` and ``q_value(s, a) -> float``
where larger q is better.  The extraction loop only ever uses q through the
gap q(s, act(s)) - min_a q(s, a), so any consistent shaping works.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .envs.cartpole import cartpole_linearize, cartpole_step
from .envs.duelpong import DuelPongParams, opponent_reach
from .envs.toypong import LEFT, RIGHT, STAY, predict_landing_x
from .validation import as_matrix, as_state, check_positive_int

_MAX_RICCATI_ITERS = 100_000
_RICCATI_TOL = 1e-10


def mc_q_estimate(env, expert, s, a, n_rollouts, horizon, seed):
    """Monte-Carlo Q: take ``a`` once, then follow ``expert`` up to ``horizon``
    total reward terms; average over ``n_rollouts`` seeded rollouts."""
    check_positive_int(n_rollouts, "n_rollouts")
    check_positive_int(horizon, "horizon")
    rng = np.random.default_rng(seed)
    total = 0.0
    for _ in range(n_rollouts):
        state = np.asarray(s, dtype=float).copy()
        ret = 0.0
        action = a
        for _t in range(horizon):
            state, reward, done = env.step(state, action, rng)
            ret += reward
            if done:
                break
            action = expert(state)
        total += ret
    return total / n_rollouts


@dataclass(frozen=True)
class LqrSolution:
    P: np.ndarray
    K: np.ndarray
    mode: str
    iterations: int
    residual: float


def lqr_solve(A, B, Q, R, mode="continuous"):
    """Solve the LQR Riccati equation by fixed-point iteration.

    continuous: A'P + PA - P B R^-1 B' P + Q = 0, K = R^-1 B' P
    discrete:   P = Q + A'PA - A'PB (R + B'PB)^-1 B'PA, K likewise

    Iterates until the update is below 1e-10; raises after 1e5 iterations.
    """
    A = as_matrix(A, name="A")
    n = A.shape[0]
    if A.shape[1] != n:
        raise ValueError("A must be square")
    B = np.asarray(B, dtype=float)
    if B.ndim == 1:
        B = B[:, None]
    B = as_matrix(B, shape=(n, B.shape[1]), name="B")
    Q = as_matrix(Q, shape=(n, n), name="Q")
    R = np.atleast_2d(np.asarray(R, dtype=float))
    m = B.shape[1]
    R = as_matrix(R, shape=(m, m), name="R")
    if np.any(np.linalg.eigvalsh((R + R.T) / 2) <= 0):
        raise ValueError("R must be positive definite")
    if mode not in ("continuous", "discrete"):
        raise ValueError(f"mode must be 'continuous' or 'discrete', got {mode!r}")

    R_inv = np.linalg.inv(R)
    P = Q.copy()
    if mode == "continuous":
        gain_scale = float(np.abs(B @ R_inv @ B.T).sum())
        a_scale = float(np.abs(A).sum())
        for it in range(1, _MAX_RICCATI_ITERS + 1):
            residual = A.T @ P + P @ A - P @ B @ R_inv @ B.T @ P + Q
            res_norm = float(np.max(np.abs(residual)))
            if res_norm <= _RICCATI_TOL:
                K = R_inv @ B.T @ P
                return LqrSolution(P=P, K=K, mode=mode, iterations=it, residual=res_norm)
            h = 0.5 / (1.0 + a_scale + gain_scale * float(np.max(np.abs(P))))
            P = P + h * residual
            P = (P + P.T) / 2
            if not np.all(np.isfinite(P)):
                raise RuntimeError("continuous Riccati iteration diverged")
    else:
        for it in range(1, _MAX_RICCATI_ITERS + 1):
            gain = np.linalg.solve(R + B.T @ P @ B, B.T @ P @ A)
            P_next = Q + A.T @ P @ A - A.T @ P @ B @ gain
            P_next = (P_next + P_next.T) / 2
            delta = float(np.max(np.abs(P_next - P)))
            P = P_next
            if not np.all(np.isfinite(P)):
                raise RuntimeError("discrete Riccati iteration diverged")
            if delta <= _RICCATI_TOL:
                K = np.linalg.solve(R + B.T @ P @ B, B.T @ P @ A)
                return LqrSolution(P=P, K=K, mode=mode, iterations=it, residual=delta)
    raise RuntimeError(
        f"Riccati iteration did not converge within {_MAX_RICCATI_ITERS} iterations"
    )


def _finite_diff_jacobians(f, x, u, h=1e-5):
    """Central-difference Jacobians of f(x, u) in x and u."""
    n = x.shape[0]
    u = np.atleast_1d(np.asarray(u, dtype=float))
    m = u.shape[0]
    fx = np.zeros((n, n))
    fu = np.zeros((n, m))
    for i in range(n):
        dx = np.zeros(n)
        dx[i] = h
        fx[:, i] = (f(x + dx, u) - f(x - dx, u)) / (2 * h)
    for j in range(m):
        du = np.zeros(m)
        du[j] = h
        fu[:, j] = (f(x, u + du) - f(x, u - du)) / (2 * h)
    return fx, fu


class IlqrOracle:
    """Receding-horizon iLQR over a discrete-time model f(s, u).

    Inside ``lqr_fallback_radius`` (sup norm) the action is the discrete-LQR
    feedback -K s; outside, a T-step iLQR plan is computed from scratch with
    ``n_iters`` sweeps and backtracking line search, so the plan cost is
    non-increasing across sweeps.  q_value(s, a) = -J(f(s, a)) where J is the
    quadratic cost-to-go model of the plan at s.
    """

    def __init__(self, f, state_dim, T=50, n_iters=3, lqr_fallback_radius=0.05,
                 state_cost=None, control_cost=0.1, fd_step=1e-5):
        self.f = f
        self.n = int(state_dim)
        self.T = check_positive_int(T, "T")
        self.n_iters = check_positive_int(n_iters, "n_iters")
        self.radius = float(lqr_fallback_radius)
        self.Q = np.asarray(state_cost if state_cost is not None
                            else np.eye(self.n), dtype=float)
        self.R = np.atleast_2d(np.asarray(control_cost, dtype=float))
        self.h = float(fd_step)
        zero_x = np.zeros(self.n)
        zero_u = np.zeros(self.R.shape[0])
        A_d, B_d = _finite_diff_jacobians(self._f_vec, zero_x, zero_u, self.h)
        sol = lqr_solve(A_d, B_d, self.Q, self.R, mode="discrete")
        self.K_lqr = sol.K
        self.P_lqr = sol.P
        self._plan_cache = {}

    def _f_vec(self, x, u):
        return np.asarray(self.f(x, float(u[0]) if u.shape[0] == 1 else u), dtype=float)

    def _stage_cost(self, x, u):
        u = np.atleast_1d(u)
        return float(x @ self.Q @ x + u @ self.R @ u)

    def _rollout_cost(self, x0, controls):
        x = x0
        total = 0.0
        xs = [x0]
        for u in controls:
            total += self._stage_cost(x, u)
            x = self._f_vec(x, np.atleast_1d(u))
            xs.append(x)
        total += float(x @ self.P_lqr @ x)
        return total, xs

    def _plan(self, s):
        key = np.asarray(s, dtype=float).tobytes()
        if key in self._plan_cache:
            return self._plan_cache[key]
        x0 = np.asarray(s, dtype=float)
        m = self.R.shape[0]
        controls = [np.zeros(m) for _ in range(self.T)]
        cost, xs = self._rollout_cost(x0, controls)
        costs = [cost]
        V_xx0 = 2.0 * self.P_lqr
        for _sweep in range(self.n_iters):
            # backward pass around the nominal trajectory
            V_x = 2.0 * self.P_lqr @ xs[-1]
            V_xx = 2.0 * self.P_lqr
            gains = [None] * self.T
            for t in range(self.T - 1, -1, -1):
                fx, fu = _finite_diff_jacobians(self._f_vec, xs[t], controls[t], self.h)
                u = np.atleast_1d(controls[t])
                Q_x = 2.0 * self.Q @ xs[t] + fx.T @ V_x
                Q_u = 2.0 * self.R @ u + fu.T @ V_x
                Q_xx = 2.0 * self.Q + fx.T @ V_xx @ fx
                Q_uu = 2.0 * self.R + fu.T @ V_xx @ fu + 1e-9 * np.eye(m)
                Q_ux = fu.T @ V_xx @ fx
                k = -np.linalg.solve(Q_uu, Q_u)
                K = -np.linalg.solve(Q_uu, Q_ux)
                gains[t] = (k, K)
                V_x = Q_x + K.T @ Q_uu @ k + K.T @ Q_u + Q_ux.T @ k
                V_xx = Q_xx + K.T @ Q_uu @ K + K.T @ Q_ux + Q_ux.T @ K
                V_xx = (V_xx + V_xx.T) / 2
            # forward pass with backtracking so cost never increases
            improved = False
            for alpha in (1.0, 0.5, 0.25, 0.125, 0.0625):
                new_controls = []
                x = x0
                for t in range(self.T):
                    k, K = gains[t]
                    u = np.atleast_1d(controls[t]) + alpha * k + K @ (x - xs[t])
                    new_controls.append(u)
                    x = self._f_vec(x, u)
                new_cost, new_xs = self._rollout_cost(x0, new_controls)
                if new_cost < cost:
                    controls, xs, cost = new_controls, new_xs, new_cost
                    improved = True
                    break
            V_xx0 = V_xx
            costs.append(cost)
            if not np.isfinite(cost):
                raise RuntimeError(f"iLQR diverged; sweep costs were {costs}")
            if not improved:
                break
        plan = {
            "u0": np.atleast_1d(controls[0]).copy(),
            "P_T": V_xx0 / 2.0,
            "costs": costs,
        }
        self._plan_cache[key] = plan
        return plan

    def act(self, s):
        s = as_state(s, self.n)
        if np.max(np.abs(s)) <= self.radius:
            u = -self.K_lqr @ s
        else:
            u = self._plan(s)["u0"]
        return float(u[0]) if u.shape[0] == 1 else u

    def q_value(self, s, a):
        s = as_state(s, self.n)
        if np.max(np.abs(s)) <= self.radius:
            P_T = self.P_lqr
        else:
            P_T = self._plan(s)["P_T"]
        nxt = self._f_vec(s, np.atleast_1d(np.asarray(a, dtype=float)))
        return float(-(nxt @ P_T @ nxt))

    def plan_costs(self, s):
        """Sweep costs of the plan at ``s`` (for monotonicity checks)."""
        return list(self._plan(np.asarray(s, dtype=float))["costs"])


def ilqr_oracle(env_model, T=50, n_iters=3, lqr_fallback_radius=0.05, **kwargs):
    """Build an IlqrOracle for a cart-pole-like model.

    ``env_model`` needs ``params`` and a 4-D state with force control; the
    default costs favor keeping the pole angle small.
    """
    params = env_model.params
    state_cost = kwargs.pop("state_cost", np.diag([1.0, 1.0, 10.0, 1.0]))
    return IlqrOracle(
        f=lambda s, u: cartpole_step(params, s, u),
        state_dim=4,
        T=T,
        n_iters=n_iters,
        lqr_fallback_radius=lqr_fallback_radius,
        state_cost=state_cost,
        **kwargs,
    )


class DiscretizedOracle:
    """Adapter mapping a continuous-action oracle onto a discrete action set."""

    def __init__(self, oracle, action_values):
        self.oracle = oracle
        self.action_values = [float(v) for v in action_values]

    def act(self, s):
        u = float(self.oracle.act(s))
        gaps = [abs(u - v) for v in self.action_values]
        return int(np.argmin(gaps))

    def q_value(self, s, a):
        return self.oracle.q_value(s, self.action_values[int(a)])


def maxent_q(policy, s, a):
    """Log-probability Q of a stochastic policy; zero probability is an error."""
    probs = np.asarray(policy.probs(s), dtype=float)
    a = int(a)
    if not 0 <= a < probs.shape[0]:
        raise ValueError(f"action index {a} out of range for {probs.shape[0]} actions")
    p = probs[a]
    if p <= 0.0:
        raise ValueError(f"action {a} has zero probability; log-q undefined")
    return float(np.log(p))


class CartPoleLqrOracle:
    """Bang-bang expert from the continuous LQR gain at the upright point.

    act picks the force sign of -K s; q_value scores an action by the
    quadratic cost of the state it leads to: q(s, a) = -s'^T P s'.
    """

    def __init__(self, params, state_cost=None, control_cost=0.1):
        self.params = params
        A, B = cartpole_linearize(params)
        Q = np.asarray(state_cost if state_cost is not None
                       else np.diag([1.0, 1.0, 10.0, 1.0]), dtype=float)
        sol = lqr_solve(A, B, Q, control_cost, mode="continuous")
        self.P = sol.P
        self.K = sol.K
        self.forces = (-params.force_mag, params.force_mag)

    def act(self, s):
        s = as_state(s, 4)
        u = float(-(self.K @ s)[0])
        return 1 if u > 0 else 0

    def q_value(self, s, a):
        force = self.forces[int(a)]
        nxt = cartpole_step(self.params, s, force)
        return float(-(nxt @ self.P @ nxt))


class ToyPongExpert:
    """Moves the paddle toward the forecast landing spot with a dead zone."""

    def __init__(self, params, dead_zone=1.0):
        self.params = params
        self.dead_zone = float(dead_zone)

    def _target(self, s):
        return predict_landing_x(self.params, s)

    def act(self, s):
        s = as_state(s, 5)
        x_land, _ = self._target(s)
        diff = x_land - s[4]
        if diff > self.dead_zone:
            return RIGHT
        if diff < -self.dead_zone:
            return LEFT
        return STAY

    def q_value(self, s, a):
        s = as_state(s, 5)
        p = self.params
        x_land, t = self._target(s)
        delta = (-p.paddle_step, p.paddle_step, 0.0)[int(a)]
        xp = float(np.clip(s[4] + delta, 0.0, p.x_max))
        gap = abs(x_land - xp)
        # distance the paddle cannot close before the ball lands
        deficit = max(0.0, gap - p.paddle_step * max(t - 1, 0) - p.paddle_half_len)
        return -(deficit ** 2) - 1e-3 * gap


class DuelPongExpert:
    """Tracks the forecast arrival y at the player wall, with spin-free aim."""

    def __init__(self, params=None, dead_zone=0.75):
        self.params = params or DuelPongParams()
        self.dead_zone = float(dead_zone)

    def _arrival(self, s):
        p = self.params
        x, y, vx, vy, _ = s
        if vx > 0:
            t = (p.width - x) / vx
        else:
            t = (p.width + x) / max(abs(vx), 1e-9)  # assumes the opponent returns
        y_pred = _fold(y + vy * t, p.height)
        return y_pred, max(t, 1.0)

    def act(self, s):
        s = as_state(s, 5)
        y_pred, _ = self._arrival(s)
        diff = y_pred - s[4]
        if diff > self.dead_zone:
            return 0  # up
        if diff < -self.dead_zone:
            return 1  # down
        return 2

    def q_value(self, s, a):
        s = as_state(s, 5)
        p = self.params
        y_pred, t = self._arrival(s)
        delta = (p.paddle_speed, -p.paddle_speed, 0.0)[int(a)]
        y_p = float(np.clip(s[4] + delta, 0.0, p.height))
        gap = abs(y_pred - y_p)
        deficit = max(0.0, gap - p.paddle_speed * (t - 1.0) - p.paddle_half_len)
        return -(deficit ** 2) - 1e-3 * gap


def _fold(value, limit):
    """Reflect ``value`` into [0, limit] (mirror folding)."""
    period = 2.0 * limit
    v = float(value) % period
    return v if v <= limit else period - v


class _TableOracle:
    def __init__(self, states, actions, q):
        self.states = states
        self.actions = actions
        self.q = q

    def _nearest(self, s):
        s = as_state(s, self.states.shape[1])
        return int(np.argmin(np.sum((self.states - s) ** 2, axis=1)))

    def act(self, s):
        return int(self.actions[self._nearest(s)])

    def q_value(self, s, a):
        if self.q is None:
            return 0.0
        return float(self.q[self._nearest(s), int(a)])


class _SoftmaxPolicyOracle:
    def __init__(self, layers, activation):
        self.layers = layers
        self.activation = activation

    def logits(self, s):
        h = as_state(s, self.layers[0][0].shape[1])
        for i, (W, b) in enumerate(self.layers):
            h = W @ h + b
            if i < len(self.layers) - 1:
                h = np.maximum(h, 0.0) if self.activation == "relu" else np.tanh(h)
        return h

    def probs(self, s):
        z = self.logits(s)
        z = z - z.max()
        e = np.exp(z)
        return e / e.sum()

    def act(self, s):
        return int(np.argmax(self.logits(s)))

    def q_value(self, s, a):
        return maxent_q(self, s, a)


def save_table_oracle(path, states, actions, q=None):
    doc = {
        "kind": "table",
        "states": np.asarray(states, dtype=float).tolist(),
        "actions": [int(a) for a in actions],
    }
    if q is not None:
        doc["q"] = np.asarray(q, dtype=float).tolist()
    with open(path, "w") as fh:
        json.dump(doc, fh)


def load_oracle(path):
    """Load an oracle from JSON: kinds table, linear_softmax, or mlp."""
    with open(path) as fh:
        doc = json.load(fh)
    kind = doc.get("kind")
    if kind == "table":
        for key in ("states", "actions"):
            if key not in doc:
                raise ValueError(f"table oracle missing field {key!r}")
        states = np.asarray(doc["states"], dtype=float)
        actions = np.asarray(doc["actions"], dtype=int)
        if states.ndim != 2 or actions.shape != (states.shape[0],):
            raise ValueError("table oracle fields 'states' and 'actions' are inconsistent")
        q = None
        if "q" in doc:
            q = np.asarray(doc["q"], dtype=float)
            if q.shape[0] != states.shape[0]:
                raise ValueError("table oracle field 'q' has the wrong number of rows")
        return _TableOracle(states, actions, q)
    if kind == "linear_softmax":
        if "weights" not in doc:
            raise ValueError("linear_softmax oracle missing field 'weights'")
        W = np.asarray(doc["weights"], dtype=float)
        if W.ndim != 2:
            raise ValueError("linear_softmax field 'weights' must be 2-D")
        b = np.asarray(doc.get("bias", np.zeros(W.shape[0])), dtype=float)
        if b.shape != (W.shape[0],):
            raise ValueError("linear_softmax field 'bias' has the wrong length")
        return _SoftmaxPolicyOracle([(W, b)], activation="relu")
    if kind == "mlp":
        if "layers" not in doc or not doc["layers"]:
            raise ValueError("mlp oracle missing field 'layers'")
        activation = doc.get("activation", "relu")
        if activation not in ("relu", "tanh"):
            raise ValueError(f"mlp activation must be relu or tanh, got {activation!r}")
        layers = []
        prev = None
        for i, layer in enumerate(doc["layers"]):
            if "weights" not in layer or "bias" not in layer:
                raise ValueError(f"mlp layer {i} missing 'weights' or 'bias'")
            W = np.asarray(layer["weights"], dtype=float)
            b = np.asarray(layer["bias"], dtype=float)
            if W.ndim != 2 or b.shape != (W.shape[0],):
                raise ValueError(f"mlp layer {i} has inconsistent shapes")
            if prev is not None and W.shape[1] != prev:
                raise ValueError(f"mlp layer {i} input dim {W.shape[1]} != previous output {prev}")
            prev = W.shape[0]
            layers.append((W, b))
        return _SoftmaxPolicyOracle(layers, activation)
    raise ValueError(f"unknown oracle kind {kind!r}")
