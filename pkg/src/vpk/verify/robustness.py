"""Exact sup-norm robustness radii for tree policies.

A tree policy is constant on each leaf cell, so the robustness radius at s is
the sup-norm distance from s to the nearest cell whose action differs, and
that distance has a closed form: clamp s onto the cell box coordinate-wise
and take the largest per-coordinate violation.  No search is involved; the
radius is exact up to float rounding of the subtraction itself.
"""

from __future__ import annotations

import csv
import time
from dataclasses import dataclass

import numpy as np

_PUSH = 1e-9


def box_linf_distance(lower, upper, s):
    """Sup-norm distance from s to the closed box [lower, upper]."""
    s = np.asarray(s, dtype=float)
    gap = np.maximum(lower - s, s - upper)
    return float(max(np.max(gap), 0.0))


@dataclass
class RobustnessResult:
    epsilon: float
    action: int
    witness: np.ndarray | None
    witness_action: int | None


def epsilon_robustness(tree, s):
    """Largest radius within which the policy's action cannot change.

    Also returns a state just inside the nearest differing cell; its sup-norm
    distance from s exceeds epsilon by at most a hair (the push needed to
    cross the cell's open faces).  A tree with a single action everywhere has
    infinite radius and no witness.
    """
    if tree.leaf_kind != "class":
        raise ValueError("robustness radii are defined for class trees")
    s = np.asarray(s, dtype=float)
    action = tree.predict(s)
    best = None
    for region in tree.leaf_regions():
        other = tree.nodes[region.node_index]["value"]
        if other == action:
            continue
        d = box_linf_distance(region.lower, region.upper, s)
        if best is None or d < best[0]:
            best = (d, region)
    if best is None:
        return RobustnessResult(np.inf, action, None, None)
    eps, region = best
    witness = np.clip(s, None, region.upper)
    witness = np.maximum(witness, np.minimum(region.lower + _PUSH, region.upper))
    witness_action = tree.predict(witness)
    return RobustnessResult(eps, action, witness, witness_action)


def robustness_report(tree, states, out_csv=None):
    """Per-state robustness rows, optionally written as CSV.

    Columns: the state, its action, the radius, the witness state and its
    action when one exists, and the per-state wall time in microseconds.
    """
    states = np.asarray(states, dtype=float)
    rows = []
    for idx, s in enumerate(states):
        t0 = time.perf_counter()
        res = epsilon_robustness(tree, s)
        elapsed_us = (time.perf_counter() - t0) * 1e6
        rows.append({
            "index": idx,
            "state": [float(v) for v in s],
            "action": int(res.action),
            "epsilon": float(res.epsilon),
            "witness": None if res.witness is None else [float(v) for v in res.witness],
            "witness_action": res.witness_action,
            "time_us": elapsed_us,
        })
    if out_csv is not None:
        dim = states.shape[1] if states.size else 0
        with open(out_csv, "w", newline="") as fh:
            writer = csv.writer(fh)
            header = (
                ["index"]
                + [f"s{i}" for i in range(dim)]
                + ["action", "epsilon"]
                + [f"witness{i}" for i in range(dim)]
                + ["witness_action", "time_us"]
            )
            writer.writerow(header)
            for row in rows:
                witness = row["witness"] or [""] * dim
                writer.writerow(
                    [row["index"]]
                    + row["state"]
                    + [row["action"], repr(row["epsilon"])]
                    + list(witness)
                    + ["" if row["witness_action"] is None else row["witness_action"],
                       f"{row['time_us']:.3f}"]
                )
    return rows
