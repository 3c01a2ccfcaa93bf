"""Chain MDP where one rarely-visited state decides most of the return.

A chain of 2k+1 states s_{-k} .. s_k plus a jackpot state and an absorbing
sink.  Actions are left/right/down; "down" is only available one step left of
the start's far end and leads to the jackpot.  Any action that is unavailable
in a state drops to the sink.  Occupying the jackpot pays T = 3(k+1); the
right end of the chain pays T - alpha; everything else pays 0.
"""

from __future__ import annotations

import numpy as np

from ..mdp import TabularEnv, TabularMDP

LEFT, RIGHT, DOWN = 0, 1, 2
ACTION_NAMES = ("left", "right", "down")


def figure2_horizon(k):
    return 3 * (k + 1)


def figure2_mdp(k, alpha):
    """Build the chain MDP for size ``k`` and jackpot discount ``alpha``.

    State indices: chain position p in [-k, k] maps to index p + k; the
    jackpot state is 2k+1 and the sink is 2k+2.  The initial state is the
    chain middle (index k).
    """
    if k < 2:
        raise ValueError(f"k must be >= 2 so the down-state differs from the ends, got {k}")
    alpha = float(alpha)
    if not 0 < alpha:
        raise ValueError(f"alpha must be positive, got {alpha}")
    horizon = figure2_horizon(k)
    if alpha >= horizon:
        raise ValueError("alpha must be smaller than the horizon")

    n_chain = 2 * k + 1
    jackpot = n_chain
    sink = n_chain + 1
    S = n_chain + 2
    trans = np.zeros((S, 3, S))

    for idx in range(n_chain):
        p = idx - k
        # left
        if p == -k:
            trans[idx, LEFT, sink] = 1.0  # walks off the end
        else:
            trans[idx, LEFT, idx - 1] = 1.0
        # right
        if p == k:
            trans[idx, RIGHT, sink] = 1.0  # collects the end reward, then done
        elif p == -k:
            trans[idx, RIGHT, sink] = 1.0  # unavailable
        else:
            trans[idx, RIGHT, idx + 1] = 1.0
        # down: available only at p = -(k-1)
        if p == -(k - 1):
            trans[idx, DOWN, jackpot] = 1.0
        else:
            trans[idx, DOWN, sink] = 1.0  # unavailable
    trans[jackpot, :, sink] = 1.0
    trans[sink, :, sink] = 1.0

    rewards = np.zeros(S)
    rewards[jackpot] = float(horizon)
    rewards[2 * k] = float(horizon) - alpha  # right end of the chain

    return TabularMDP(
        transitions=trans,
        rewards=rewards,
        horizon=horizon,
        initial_state=k,
    )


def optimal_policy(k):
    """Per-state optimal actions: down one short of the left end, right at the
    right end, left everywhere else."""
    n_chain = 2 * k + 1
    pol = np.full(n_chain + 2, LEFT, dtype=int)
    pol[1] = DOWN          # chain position -(k-1)
    pol[2 * k] = RIGHT     # chain position k
    return pol


def always(action):
    """Constant policy over state indices."""
    return lambda s: action


def figure2_env(k=5, alpha=0.5):
    """The chain MDP wrapped for rollouts (1-feature continuous states)."""
    return TabularEnv(figure2_mdp(k, alpha))
