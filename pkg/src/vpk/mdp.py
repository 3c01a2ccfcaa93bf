"""Finite-horizon tabular MDPs, exact dynamic programming, and rollouts.

States carry their reward (``rewards[s]``), collected at every timestep the
state is occupied before the horizon.  Value recursions follow

    V_T(s) = 0
    Q_t(s, a) = R(s) + sum_s' P(s, a, s') V_{t+1}(s')
    V_t(s) = Q_t(s, policy(s))

and ``J(policy) = -V_0(initial_state)`` is the cost convention used by the
loss functions below.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .validation import check_positive_int

_ROW_SUM_TOL = 1e-12
_ABSORB_TOL = 1e-9


@dataclass(frozen=True)
class TabularMDP:
    """Finite-horizon MDP with state-based rewards.

    Parameters
    ----------
    transitions : (S, A, S) array
        Row-stochastic transition kernel; every (s, a) row must sum to 1
        within 1e-12.
    rewards : (S,) array
        Reward collected for occupying each state.
    horizon : int
        Number of decision steps T.
    initial_state : int
        Start state index.
    """

    transitions: np.ndarray
    rewards: np.ndarray
    horizon: int
    initial_state: int

    def __post_init__(self):
        trans = np.asarray(self.transitions, dtype=float)
        rew = np.asarray(self.rewards, dtype=float)
        if trans.ndim != 3 or trans.shape[0] != trans.shape[2]:
            raise ValueError(f"transitions must be (S, A, S), got {trans.shape}")
        num_states = trans.shape[0]
        if rew.shape != (num_states,):
            raise ValueError(f"rewards must be ({num_states},), got {rew.shape}")
        if np.any(trans < 0):
            raise ValueError("transition probabilities must be nonnegative")
        row_sums = trans.sum(axis=2)
        if np.max(np.abs(row_sums - 1.0)) > _ROW_SUM_TOL:
            bad = np.unravel_index(np.argmax(np.abs(row_sums - 1.0)), row_sums.shape)
            raise ValueError(
                f"transition row (s={bad[0]}, a={bad[1]}) sums to "
                f"{row_sums[bad]}, expected 1 within {_ROW_SUM_TOL}"
            )
        check_positive_int(self.horizon, "horizon")
        if not 0 <= self.initial_state < num_states:
            raise ValueError(
                f"initial_state {self.initial_state} out of range [0, {num_states})"
            )
        object.__setattr__(self, "transitions", trans)
        object.__setattr__(self, "rewards", rew)

    @property
    def num_states(self):
        return self.transitions.shape[0]

    @property
    def num_actions(self):
        return self.transitions.shape[1]

    def absorbing_states(self):
        """Boolean mask of states where every action self-loops.

        Such states act as action-free sinks; mismatch accounting in
        :func:`zero_one_loss` skips them.
        """
        self_loop = self.transitions[np.arange(self.num_states), :, np.arange(self.num_states)]
        return np.all(self_loop >= 1.0 - _ABSORB_TOL, axis=1)

    def to_json(self):
        doc = {
            "num_states": self.num_states,
            "num_actions": self.num_actions,
            "horizon": self.horizon,
            "initial_state": self.initial_state,
            "transitions": self.transitions.tolist(),
            "rewards": self.rewards.tolist(),
        }
        return json.dumps(doc)

    @classmethod
    def from_json(cls, text):
        doc = json.loads(text)
        for key in ("num_states", "num_actions", "horizon", "initial_state",
                    "transitions", "rewards"):
            if key not in doc:
                raise ValueError(f"MDP document missing required key {key!r}")
        mdp = cls(
            transitions=np.asarray(doc["transitions"], dtype=float),
            rewards=np.asarray(doc["rewards"], dtype=float),
            horizon=int(doc["horizon"]),
            initial_state=int(doc["initial_state"]),
        )
        if mdp.num_states != doc["num_states"] or mdp.num_actions != doc["num_actions"]:
            raise ValueError("declared num_states/num_actions do not match arrays")
        return mdp


@dataclass
class ValueTables:
    """Exact DP output for one policy.

    ``V`` has shape (T+1, S) with V[T] identically zero, ``Q`` has shape
    (T, S, A), and ``d`` has shape (T+1, S) with d[0] the indicator of the
    initial state; every d[t] sums to 1.
    """

    V: np.ndarray
    Q: np.ndarray
    d: np.ndarray


def _policy_array(mdp, policy):
    """Normalize a callable or per-state sequence to an int action array."""
    if callable(policy):
        arr = np.array([policy(s) for s in range(mdp.num_states)], dtype=int)
    else:
        arr = np.asarray(policy, dtype=int)
        if arr.shape != (mdp.num_states,):
            raise ValueError(
                f"policy array must have shape ({mdp.num_states},), got {arr.shape}"
            )
    if np.any(arr < 0) or np.any(arr >= mdp.num_actions):
        raise ValueError("policy selects an action index out of range")
    return arr


def dp_evaluate(mdp, policy):
    """Backward-induct V and Q and forward-induct the occupancy d for ``policy``."""
    pol = _policy_array(mdp, policy)
    T, S, A = mdp.horizon, mdp.num_states, mdp.num_actions
    V = np.zeros((T + 1, S))
    Q = np.zeros((T, S, A))
    for t in range(T - 1, -1, -1):
        Q[t] = mdp.rewards[:, None] + mdp.transitions @ V[t + 1]
        V[t] = Q[t, np.arange(S), pol]
    d = np.zeros((T + 1, S))
    d[0, mdp.initial_state] = 1.0
    step_matrix = mdp.transitions[np.arange(S), pol]  # (S, S) under the policy
    for t in range(T):
        d[t + 1] = d[t] @ step_matrix
    return ValueTables(V=V, Q=Q, d=d)


def zero_one_loss(mdp, policy, oracle):
    """Expected action mismatch against ``oracle`` under the policy's visitation.

    Averages the per-step occupancies over t = 0..T-1; absorbing sink states
    are excluded from mismatch accounting.
    """
    pol = _policy_array(mdp, policy)
    orc = _policy_array(mdp, oracle)
    tables = dp_evaluate(mdp, pol)
    d_bar = tables.d[: mdp.horizon].mean(axis=0)
    mismatch = (pol != orc) & ~mdp.absorbing_states()
    return float(d_bar[mismatch].sum())


def qdagger_loss(mdp, policy, oracle):
    """Average oracle value lost by following ``policy``:

    (1/T) sum_t E_{s ~ d_t^policy} [ V*_t(s) - Q*_t(s, policy(s)) ]

    where V*, Q* are the oracle's DP tables.  Satisfies
    T * qdagger_loss = J(policy) - J(oracle) exactly.
    """
    pol = _policy_array(mdp, policy)
    oracle_tables = dp_evaluate(mdp, oracle)
    policy_tables = dp_evaluate(mdp, pol)
    T, S = mdp.horizon, mdp.num_states
    per_state = oracle_tables.V[:T] - oracle_tables.Q[np.arange(T)[:, None],
                                                      np.arange(S)[None, :], pol[None, :]]
    return float((policy_tables.d[:T] * per_state).sum() / T)


def ell_tilde(mdp, oracle, t, s):
    """Worst-action value gap V*_t(s) - min_a Q*_t(s, a); always >= 0."""
    if not 0 <= t < mdp.horizon:
        raise ValueError(f"t must lie in [0, {mdp.horizon}), got {t}")
    if not 0 <= s < mdp.num_states:
        raise ValueError(f"state index {s} out of range")
    tables = dp_evaluate(mdp, oracle)
    return float(tables.V[t, s] - tables.Q[t, s].min())


def policy_return(mdp, policy):
    """J(policy) = -V_0(initial_state) under the cost convention."""
    tables = dp_evaluate(mdp, policy)
    return float(-tables.V[0, mdp.initial_state])


@dataclass
class Trajectory:
    """One episode: states has one more entry than actions/rewards."""

    states: list = field(default_factory=list)
    actions: list = field(default_factory=list)
    rewards: list = field(default_factory=list)

    @property
    def total_reward(self):
        return float(sum(self.rewards))

    def __len__(self):
        return len(self.actions)


def rollout(env, policy, max_steps, seed):
    """Run ``policy`` in ``env`` for at most ``max_steps`` steps.

    ``env`` must expose ``reset(rng) -> state`` and
    ``step(state, action, rng) -> (state, reward, done)``.  Deterministic
    given ``seed``.
    """
    check_positive_int(max_steps, "max_steps")
    rng = np.random.default_rng(seed)
    state = env.reset(rng)
    traj = Trajectory(states=[np.asarray(state, dtype=float).copy()])
    for _ in range(max_steps):
        action = policy(state)
        state, reward, done = env.step(state, action, rng)
        traj.states.append(np.asarray(state, dtype=float).copy())
        traj.actions.append(action)
        traj.rewards.append(float(reward))
        if done:
            break
    return traj


class TabularEnv:
    """Adapter exposing a TabularMDP through the rollout interface.

    States are 1-feature float vectors holding the state index, so tabular
    problems can feed the same policy-learning code as the physics
    environments.
    """

    def __init__(self, mdp):
        self.mdp = mdp
        self.state_dim = 1
        self.actions = list(range(mdp.num_actions))
        self.max_steps = mdp.horizon

    def reset(self, rng):
        return np.array([float(self.mdp.initial_state)])

    def step(self, s, a, rng):
        i = int(round(float(np.asarray(s).reshape(-1)[0])))
        a = int(a)
        if not 0 <= i < self.mdp.num_states:
            raise ValueError(f"state index {i} out of range")
        if not 0 <= a < self.mdp.num_actions:
            raise ValueError(f"action index {a} out of range")
        row = self.mdp.transitions[i, a]
        nxt = int(rng.choice(self.mdp.num_states, p=row))
        return np.array([float(nxt)]), float(self.mdp.rewards[i]), False
