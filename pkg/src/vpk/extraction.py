"""Tree-policy extraction from an oracle controller by dataset aggregation.

Both extractors share one loop: roll out the current policy (the oracle on
the first iteration, the latest tree afterwards), label every visited state
with the oracle action, and refit a tree on the aggregate dataset.  They
differ only in how state importance enters the fit:

* ViperExtractor   resamples the dataset with probability proportional to
                   the oracle value gap q(s, a*) - min_a q(s, a), so states
                   where a wrong action is costly dominate the fit;
* DaggerExtractor  ignores the gap and fits every aggregated sample equally.

The returned policy is the per-iteration tree with the best mean reward on a
fixed set of evaluation rollouts (ties break toward the earlier iteration).
"""

from __future__ import annotations

import warnings

import numpy as np

from .estimator import BaseEstimator, check_is_fitted
from .mdp import rollout
from .tree import fit_class_tree
from .validation import check_positive_int

_WEIGHT_UNIFORM_RTOL = 1e-9


def value_gap(oracle, actions, s):
    """q(s, act(s)) - min_a q(s, a); non-negative when act is q-greedy-ish."""
    qs = [oracle.q_value(s, a) for a in actions]
    taken = oracle.q_value(s, oracle.act(s))
    return taken - min(qs)


def resample_indices(weights, size, rng):
    """Draw ``size`` indices with probability proportional to ``weights``.

    All-zero weights fall back to uniform with a warning; negative weights
    are an error.
    """
    weights = np.asarray(weights, dtype=float)
    if np.any(weights < 0) or not np.all(np.isfinite(weights)):
        raise ValueError("resampling weights must be finite and non-negative")
    total = weights.sum()
    if total <= 0:
        warnings.warn("all resampling weights are zero; falling back to uniform")
        return rng.choice(weights.shape[0], size=size, replace=True)
    return rng.choice(weights.shape[0], size=size, replace=True, p=weights / total)


class _BaseExtractor(BaseEstimator):
    _weighted = True

    def __init__(self, max_depth=None, n_iters=10, n_rollouts=10, eval_rollouts=10,
                 max_steps=10_000, min_samples_leaf=1, random_state=None):
        self.max_depth = max_depth
        self.n_iters = n_iters
        self.n_rollouts = n_rollouts
        self.eval_rollouts = eval_rollouts
        self.max_steps = max_steps
        self.min_samples_leaf = min_samples_leaf
        self.random_state = random_state

    def fit(self, env, oracle):
        check_positive_int(self.n_iters, "n_iters")
        check_positive_int(self.n_rollouts, "n_rollouts")
        check_positive_int(self.eval_rollouts, "eval_rollouts")
        actions = list(env.actions)
        if not actions:
            raise ValueError("env must expose a non-empty discrete action list")
        rng = np.random.default_rng(self.random_state)
        eval_seeds = [int(x) for x in rng.integers(0, 2**31 - 1, size=self.eval_rollouts)]

        states, labels, weights = [], [], []
        trees, report = [], []
        policy = oracle.act
        for it in range(1, self.n_iters + 1):
            for _ in range(self.n_rollouts):
                seed = int(rng.integers(0, 2**31 - 1))
                traj = rollout(env, policy, max_steps=self.max_steps, seed=seed)
                for s in traj.states[: len(traj.actions)]:
                    states.append(np.asarray(s, dtype=float))
                    labels.append(int(oracle.act(s)))
                    weights.append(float(value_gap(oracle, actions, s)))
            X = np.asarray(states, dtype=float)
            y = np.asarray(labels, dtype=int)
            w = np.asarray(weights, dtype=float)
            if self._weighted and _spread(w) > _WEIGHT_UNIFORM_RTOL:
                idx = resample_indices(w, size=X.shape[0], rng=rng)
                X_fit, y_fit = X[idx], y[idx]
            else:
                # uniform (or degenerate) weights: the resample would only add
                # bootstrap noise, so fit the aggregate dataset directly
                X_fit, y_fit = X, y
            tree = fit_class_tree(
                X_fit, y_fit, max_depth=self.max_depth,
                min_samples_leaf=self.min_samples_leaf,
            )
            trees.append(tree)
            mean_reward = float(np.mean([
                rollout(env, tree.predict, max_steps=self.max_steps, seed=s).total_reward
                for s in eval_seeds
            ]))
            report.append({
                "iteration": it,
                "dataset_size": int(X.shape[0]),
                "n_nodes": tree.n_nodes,
                "depth": tree.depth(),
                "mean_reward": mean_reward,
            })
            policy = tree.predict

        best = max(range(len(trees)), key=lambda i: (report[i]["mean_reward"], -i))
        self.tree_ = trees[best]
        self.trees_ = trees
        self.report_ = report
        self.best_iteration_ = best + 1
        self.dataset_size_ = len(states)
        return self

    def predict(self, X):
        check_is_fitted(self, "tree_")
        return self.tree_.predict_many(X)

    def __call__(self, s):
        check_is_fitted(self, "tree_")
        return self.tree_.predict(s)


def _spread(w):
    """Relative spread of a non-negative weight vector (0 when uniform)."""
    if w.size == 0:
        return 0.0
    top = float(w.max())
    if top <= 0:
        return 0.0
    return (top - float(w.min())) / top


class ViperExtractor(_BaseExtractor):
    """Value-gap-weighted extraction (resampling formulation)."""

    _weighted = True


class DaggerExtractor(_BaseExtractor):
    """Plain dataset aggregation; every sample counts equally."""

    _weighted = False
