"""Verified policy extraction: compact decision-tree controllers distilled
from oracle policies, with formal verification of the result.

The package has three layers:

*  extraction — imitation-learning loops (value-gap-weighted resampling and
   the plain aggregation baseline) that distill an oracle controller into a
   small decision tree;
*  environments and oracles — deterministic simulators (cart-pole, two Pong
   variants, a small chain MDP) with matching symbolic descriptions, plus
   LQR/iLQR and scripted reference controllers;
*  verify — decision robustness, bounded-horizon correctness (exact rational
   reachability and SMT-LIB2 emission), and Lyapunov region-of-attraction
   certification by interval branch-and-bound.
"""

from .estimator import BaseEstimator, NotFittedError, check_is_fitted
from .extraction import DaggerExtractor, ViperExtractor, resample_indices, value_gap
from .mdp import (
    TabularEnv,
    TabularMDP,
    Trajectory,
    ValueTables,
    dp_evaluate,
    ell_tilde,
    policy_return,
    qdagger_loss,
    rollout,
    zero_one_loss,
)
from .oracles import (
    CartPoleLqrOracle,
    DiscretizedOracle,
    DuelPongExpert,
    IlqrOracle,
    LqrSolution,
    ToyPongExpert,
    ilqr_oracle,
    load_oracle,
    lqr_solve,
    maxent_q,
    mc_q_estimate,
    save_table_oracle,
)
from .polynomial import Poly, PolynomialMap
from .pwa import PiecewiseAffineSystem, Polytope, PwaPiece
from .tree import (
    DecisionTreePolicy,
    TreePolicyClassifier,
    TreePolicyRegressor,
    fit_class_tree,
    fit_linear_tree,
    insert_root_guard,
)

__version__ = "0.1.0"

__all__ = [
    "BaseEstimator",
    "NotFittedError",
    "check_is_fitted",
    "DaggerExtractor",
    "ViperExtractor",
    "resample_indices",
    "value_gap",
    "TabularEnv",
    "TabularMDP",
    "Trajectory",
    "ValueTables",
    "dp_evaluate",
    "ell_tilde",
    "policy_return",
    "qdagger_loss",
    "rollout",
    "zero_one_loss",
    "CartPoleLqrOracle",
    "DiscretizedOracle",
    "DuelPongExpert",
    "IlqrOracle",
    "LqrSolution",
    "ToyPongExpert",
    "ilqr_oracle",
    "load_oracle",
    "lqr_solve",
    "maxent_q",
    "mc_q_estimate",
    "save_table_oracle",
    "Poly",
    "PolynomialMap",
    "PiecewiseAffineSystem",
    "Polytope",
    "PwaPiece",
    "DecisionTreePolicy",
    "TreePolicyClassifier",
    "TreePolicyRegressor",
    "fit_class_tree",
    "fit_linear_tree",
    "insert_root_guard",
    "__version__",
]
