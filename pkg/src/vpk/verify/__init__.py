"""Formal verification of decision-tree controllers.

Three independent checks: L-infinity robustness of individual decisions,
bounded-horizon correctness of the closed loop (exact rational reachability,
plus SMT-LIB2 emission for external solvers), and Lyapunov region-of-attraction
stability by interval branch-and-bound.
"""

from .intervals import affine_bounds, poly_bounds, symmetric_eig_upper
from .reachability import (
    Counterexample,
    Verdict,
    cartpole_bounded_check,
    compose_closed_loop,
    reach_check,
    replay_counterexample,
    toypong_bounded_check,
)
from .robustness import (
    RobustnessResult,
    box_linf_distance,
    epsilon_robustness,
    robustness_report,
)
from .simplex import LpResult, feasible_point, lp_maximize, to_fraction
from .smtlib import (
    SOLVER_ENV_VAR,
    SolverResult,
    encode_reach,
    model_initial_state,
    parse_model,
    run_solver,
    smt_literal,
    solver_command,
)
from .sos import emit_sos, evaluate_sympoly, parse_sos_document
from .stability import (
    DEFAULT_BUDGET,
    DEFAULT_DELTA,
    DEFAULT_MARGIN,
    CertifyOutcome,
    StabilityCertificate,
    certify_region,
    certify_region_report,
    check_positive_definite,
    ellipsoid_box,
    enumerative_check,
    lyapunov_candidate,
    max_rho,
    quad_poly,
    roa_setup,
    sample_violation_level,
    tree_roa,
    vdot_polynomial,
)

__all__ = [
    "affine_bounds",
    "poly_bounds",
    "symmetric_eig_upper",
    "Counterexample",
    "Verdict",
    "cartpole_bounded_check",
    "compose_closed_loop",
    "reach_check",
    "replay_counterexample",
    "toypong_bounded_check",
    "RobustnessResult",
    "box_linf_distance",
    "epsilon_robustness",
    "robustness_report",
    "LpResult",
    "feasible_point",
    "lp_maximize",
    "to_fraction",
    "SOLVER_ENV_VAR",
    "SolverResult",
    "encode_reach",
    "model_initial_state",
    "parse_model",
    "run_solver",
    "smt_literal",
    "solver_command",
    "emit_sos",
    "evaluate_sympoly",
    "parse_sos_document",
    "DEFAULT_BUDGET",
    "DEFAULT_DELTA",
    "DEFAULT_MARGIN",
    "CertifyOutcome",
    "StabilityCertificate",
    "certify_region",
    "certify_region_report",
    "check_positive_definite",
    "ellipsoid_box",
    "enumerative_check",
    "lyapunov_candidate",
    "max_rho",
    "quad_poly",
    "roa_setup",
    "sample_violation_level",
    "tree_roa",
    "vdot_polynomial",
]
