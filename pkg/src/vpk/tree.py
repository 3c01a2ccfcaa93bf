"""Axis-aligned decision trees with class or affine leaves.

Split semantics are fixed once and shared by every consumer (prediction,
region enumeration, verification): a node routes x[feature] <= threshold to
the left child, else right.  Leaf cells are therefore boxes that are open on
their lower faces and closed on their upper faces.
"""

from __future__ import annotations

import json

import numpy as np

from .estimator import BaseEstimator, check_is_fitted
from .validation import check_positive_int

_FORMAT_VERSION = 1
_GAIN_TOL = 1e-12


class LeafRegion:
    """Axis box {s : lower < s <= upper} owned by one leaf node."""

    __slots__ = ("lower", "upper", "node_index")

    def __init__(self, lower, upper, node_index):
        self.lower = lower
        self.upper = upper
        self.node_index = node_index

    def contains(self, s, tol=0.0):
        s = np.asarray(s, dtype=float)
        return bool(np.all(s > self.lower - tol) and np.all(s <= self.upper + tol))

    def __repr__(self):
        return f"LeafRegion(lower={self.lower}, upper={self.upper}, node_index={self.node_index})"


class DecisionTreePolicy:
    """Fitted tree over ``dim`` features.

    ``nodes`` is a list of dicts: internal nodes carry feature/threshold and
    left/right child indices; leaves carry either an integer ``value``
    (leaf_kind "class") or ``weights``/``intercept`` (leaf_kind "linear").
    Node 0 is the root.
    """

    def __init__(self, nodes, dim, leaf_kind):
        if leaf_kind not in ("class", "linear"):
            raise ValueError(f"leaf_kind must be 'class' or 'linear', got {leaf_kind!r}")
        if not nodes:
            raise ValueError("tree must have at least one node")
        self.nodes = nodes
        self.dim = int(dim)
        self.leaf_kind = leaf_kind

    @property
    def n_nodes(self):
        return len(self.nodes)

    @property
    def n_leaves(self):
        return sum(1 for n in self.nodes if "feature" not in n)

    def depth(self):
        def walk(i):
            node = self.nodes[i]
            if "feature" not in node:
                return 0
            return 1 + max(walk(node["left"]), walk(node["right"]))

        return walk(0)

    def leaf_for(self, s):
        s = np.asarray(s, dtype=float)
        i = 0
        node = self.nodes[0]
        while "feature" in node:
            i = node["left"] if s[node["feature"]] <= node["threshold"] else node["right"]
            node = self.nodes[i]
        return i

    def _leaf_output(self, node, s):
        if self.leaf_kind == "class":
            return node["value"]
        return float(np.dot(node["weights"], s) + node["intercept"])

    def predict(self, s):
        s = np.asarray(s, dtype=float)
        return self._leaf_output(self.nodes[self.leaf_for(s)], s)

    def predict_many(self, X):
        X = np.asarray(X, dtype=float)
        out = [self.predict(row) for row in X]
        if self.leaf_kind == "class":
            return np.asarray(out, dtype=int)
        return np.asarray(out, dtype=float)

    def leaf_regions(self):
        regions = []

        def walk(i, lower, upper):
            node = self.nodes[i]
            if "feature" not in node:
                regions.append(LeafRegion(lower.copy(), upper.copy(), i))
                return
            f, t = node["feature"], node["threshold"]
            left_upper = upper.copy()
            left_upper[f] = min(left_upper[f], t)
            walk(node["left"], lower, left_upper)
            right_lower = lower.copy()
            right_lower[f] = max(right_lower[f], t)
            walk(node["right"], right_lower, upper)

        walk(0, np.full(self.dim, -np.inf), np.full(self.dim, np.inf))
        return regions

    def leaf_values(self):
        """Distinct class labels over all leaves (class trees only)."""
        if self.leaf_kind != "class":
            raise ValueError("leaf_values is only defined for class trees")
        return sorted({n["value"] for n in self.nodes if "feature" not in n})

    def to_dict(self):
        nodes = []
        for node in self.nodes:
            if "feature" in node:
                nodes.append({
                    "feature": int(node["feature"]),
                    "threshold": float(node["threshold"]),
                    "left": int(node["left"]),
                    "right": int(node["right"]),
                })
            elif self.leaf_kind == "class":
                nodes.append({"value": int(node["value"])})
            else:
                nodes.append({
                    "weights": [float(w) for w in node["weights"]],
                    "intercept": float(node["intercept"]),
                })
        return {
            "version": _FORMAT_VERSION,
            "dim": self.dim,
            "leaf_kind": self.leaf_kind,
            "nodes": nodes,
        }

    @classmethod
    def from_dict(cls, doc):
        for key in ("version", "dim", "leaf_kind", "nodes"):
            if key not in doc:
                raise ValueError(f"tree document missing field {key!r}")
        if doc["version"] != _FORMAT_VERSION:
            raise ValueError(f"unsupported tree format version {doc['version']!r}")
        leaf_kind = doc["leaf_kind"]
        nodes = []
        for i, raw in enumerate(doc["nodes"]):
            if "feature" in raw:
                node = {
                    "feature": int(raw["feature"]),
                    "threshold": float(raw["threshold"]),
                    "left": int(raw["left"]),
                    "right": int(raw["right"]),
                }
                if not (0 <= node["left"] < len(doc["nodes"])) or not (
                    0 <= node["right"] < len(doc["nodes"])
                ):
                    raise ValueError(f"node {i} has a child index out of range")
            elif leaf_kind == "class":
                if "value" not in raw:
                    raise ValueError(f"leaf node {i} missing field 'value'")
                node = {"value": int(raw["value"])}
            else:
                if "weights" not in raw or "intercept" not in raw:
                    raise ValueError(f"leaf node {i} missing 'weights' or 'intercept'")
                node = {
                    "weights": np.asarray(raw["weights"], dtype=float),
                    "intercept": float(raw["intercept"]),
                }
                if node["weights"].shape != (int(doc["dim"]),):
                    raise ValueError(f"leaf node {i} weight length != dim")
            nodes.append(node)
        return cls(nodes, int(doc["dim"]), leaf_kind)

    def dumps(self):
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    @classmethod
    def loads(cls, text):
        return cls.from_dict(json.loads(text))

    def save(self, path):
        with open(path, "w") as fh:
            fh.write(self.dumps())
            fh.write("\n")

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.loads(fh.read())


def _boundary_indices(xs, min_samples_leaf):
    """Admissible split positions i (cut between xs[i-1] and xs[i])."""
    n = xs.shape[0]
    lo = int(min_samples_leaf)
    hi = n - lo
    if hi < lo:
        return np.empty(0, dtype=int)
    i_arr = np.arange(lo, hi + 1)
    return i_arr[xs[i_arr - 1] < xs[i_arr]]


def _midpoints(xs, i_arr):
    """Candidate thresholds between consecutive sorted values.

    A float midpoint can round up onto the right value, which would route it
    left and break the partition; such candidates fall back to the left value.
    """
    a = xs[i_arr - 1]
    b = xs[i_arr]
    t = a + (b - a) * 0.5
    return np.where(t < b, t, a)


def _pick_best(gains, i_arr, thresholds):
    """Largest gain; among exact ties the smallest threshold (smallest i)."""
    g_max = float(gains.max())
    if g_max <= _GAIN_TOL:
        return None
    pos = int(np.nonzero(gains == g_max)[0][0])
    return g_max, float(thresholds[pos]), int(i_arr[pos])


def _check_xyw(X, y, sample_weight, y_dtype):
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise ValueError("X must be 2-D")
    n = X.shape[0]
    if n == 0:
        raise ValueError("cannot fit a tree on zero samples")
    y = np.asarray(y, dtype=y_dtype)
    if y.shape != (n,):
        raise ValueError("y must have one entry per row of X")
    w = np.ones(n) if sample_weight is None else np.asarray(sample_weight, dtype=float)
    if w.shape != (n,) or np.any(w < 0) or not np.all(np.isfinite(w)):
        raise ValueError("sample_weight must be non-negative, finite, one per row")
    if w.sum() <= 0:
        raise ValueError("sample_weight must have positive total mass")
    return X, y, w


def fit_class_tree(X, y, sample_weight=None, max_depth=None, min_samples_leaf=1):
    """Greedy CART with weighted Gini impurity and integer leaf labels.

    Candidate thresholds are midpoints between consecutive distinct sorted
    feature values; ties in gain break toward the lowest feature index, then
    the lowest threshold; a split must strictly reduce impurity.
    """
    X, y, w = _check_xyw(X, y, sample_weight, int)
    if np.any(y < 0):
        raise ValueError("class labels must be non-negative integers")
    check_positive_int(min_samples_leaf, "min_samples_leaf")
    depth_cap = np.inf if max_depth is None else int(max_depth)
    if depth_cap is not np.inf and depth_cap < 0:
        raise ValueError("max_depth must be >= 0")
    n, d = X.shape
    n_classes = int(y.max()) + 1
    weighted = np.zeros((n, n_classes))
    weighted[np.arange(n), y] = w

    nodes = []

    def build(idx, depth):
        my_index = len(nodes)
        nodes.append(None)
        counts = weighted[idx].sum(axis=0)
        weight_total = float(counts.sum())
        if weight_total > 0:
            parent_impurity = weight_total - float((counts ** 2).sum()) / weight_total
        else:
            parent_impurity = 0.0
        best = None
        if depth < depth_cap and idx.shape[0] >= 2 * min_samples_leaf and parent_impurity > _GAIN_TOL:
            for f in range(d):
                order = idx[np.argsort(X[idx, f], kind="stable")]
                xs = X[order, f]
                i_arr = _boundary_indices(xs, min_samples_leaf)
                if i_arr.size == 0:
                    continue
                cum_counts = np.cumsum(weighted[order], axis=0)
                cum_weight = np.cumsum(w[order])
                wl = np.maximum(cum_weight[i_arr - 1], 1e-300)
                wr = np.maximum(weight_total - wl, 1e-300)
                cl = cum_counts[i_arr - 1]
                cr = counts[None, :] - cl
                score = (wl - (cl ** 2).sum(axis=1) / wl) + (wr - (cr ** 2).sum(axis=1) / wr)
                found = _pick_best(parent_impurity - score, i_arr, _midpoints(xs, i_arr))
                if found is not None:
                    gain, t, i = found
                    cand = (-gain, f, t)
                    if best is None or cand < best[:3]:
                        best = (*cand, i, order)
        if best is None:
            nodes[my_index] = {"value": int(np.argmax(counts))}
            return
        _, f, t, i, order = best
        node = {"feature": f, "threshold": float(t)}
        nodes[my_index] = node
        node["left"] = len(nodes)
        build(order[:i], depth + 1)
        node["right"] = len(nodes)
        build(order[i:], depth + 1)

    build(np.arange(n), 0)
    return DecisionTreePolicy(nodes, d, "class")


def fit_linear_tree(X, y, sample_weight=None, max_depth=None, min_samples_leaf=None,
                    fit_intercept=True, ridge=1e-8, origin_margin=0.0):
    """Greedy regression tree with ridge-regularized affine leaves.

    Split scoring uses cumulative Gram matrices along each sorted feature so
    every candidate threshold is evaluated with an exact per-side least
    squares fit.  Candidate thresholds with absolute value below
    ``origin_margin`` have their gain halved, biasing the tree toward
    branching away from the origin so the leaf containing it stays large.
    """
    X, y, w = _check_xyw(X, y, sample_weight, float)
    n, d = X.shape
    p = d + 1 if fit_intercept else d
    if min_samples_leaf is None:
        min_samples_leaf = max(p, 1)
    check_positive_int(min_samples_leaf, "min_samples_leaf")
    depth_cap = np.inf if max_depth is None else int(max_depth)
    origin_margin = float(origin_margin)

    Z = np.hstack([X, np.ones((n, 1))]) if fit_intercept else X
    reg_mat = np.diag(np.full(p, float(ridge)))

    def solve_batch(G, c, ssy):
        """Stacked ridge solves; returns (betas, costs)."""
        betas = np.linalg.solve(G + reg_mat, c)
        costs = ssy - np.einsum("...i,...i->...", c, betas)
        return betas, np.maximum(costs, 0.0)

    def leaf_params(idx):
        Zw = Z[idx] * w[idx, None]
        G = Z[idx].T @ Zw
        c = Zw.T @ y[idx]
        ssy = float((w[idx] * y[idx] ** 2).sum())
        beta, cost = solve_batch(G, c, ssy)
        if fit_intercept:
            return beta[:-1], float(beta[-1]), float(cost)
        return beta, 0.0, float(cost)

    nodes = []

    def build(idx, depth):
        my_index = len(nodes)
        nodes.append(None)
        _, _, parent_cost = leaf_params(idx)
        best = None
        if depth < depth_cap and idx.shape[0] >= 2 * min_samples_leaf:
            for f in range(d):
                order = idx[np.argsort(X[idx, f], kind="stable")]
                xs = X[order, f]
                i_arr = _boundary_indices(xs, min_samples_leaf)
                if i_arr.size == 0:
                    continue
                Zo = Z[order]
                Zw = Zo * w[order, None]
                cum_gram = np.cumsum(np.einsum("ij,ik->ijk", Zo, Zw), axis=0)
                cum_c = np.cumsum(Zw * y[order, None], axis=0)
                cum_ssy = np.cumsum(w[order] * y[order] ** 2)
                G_all, c_all, ssy_all = cum_gram[-1], cum_c[-1], cum_ssy[-1]
                _, cost_l = solve_batch(cum_gram[i_arr - 1], cum_c[i_arr - 1], cum_ssy[i_arr - 1])
                _, cost_r = solve_batch(
                    G_all - cum_gram[i_arr - 1], c_all - cum_c[i_arr - 1], ssy_all - cum_ssy[i_arr - 1]
                )
                thresholds = _midpoints(xs, i_arr)
                gains = parent_cost - (cost_l + cost_r)
                if origin_margin > 0:
                    gains = np.where(np.abs(thresholds) < origin_margin, gains * 0.5, gains)
                found = _pick_best(gains, i_arr, thresholds)
                if found is not None:
                    gain, t, i = found
                    cand = (-gain, f, t)
                    if best is None or cand < best[:3]:
                        best = (*cand, i, order)
        if best is None:
            weights, intercept, _ = leaf_params(idx)
            nodes[my_index] = {"weights": weights, "intercept": intercept}
            return
        _, f, t, i, order = best
        node = {"feature": f, "threshold": float(t)}
        nodes[my_index] = node
        node["left"] = len(nodes)
        build(order[:i], depth + 1)
        node["right"] = len(nodes)
        build(order[i:], depth + 1)

    build(np.arange(n), 0)
    return DecisionTreePolicy(nodes, d, "linear")


def insert_root_guard(tree, feature, threshold, action, guard_side="left"):
    """Copy the tree with a new root guard routing to a fixed-action leaf.

    States on ``guard_side`` of the split ``x[feature] <= threshold`` take
    ``action``; everything else falls through to the original tree.  The
    result has exactly two more nodes.
    """
    if tree.leaf_kind != "class":
        raise ValueError("root-guard insertion applies to discrete-action trees")
    feature = int(feature)
    if not 0 <= feature < tree.dim:
        raise ValueError(
            f"guard feature index {feature} out of range for dimension {tree.dim}"
        )
    if guard_side not in ("left", "right"):
        raise ValueError("guard_side must be 'left' or 'right'")
    shifted = []
    for node in tree.nodes:
        node = dict(node)
        if "feature" in node:
            node["left"] += 2
            node["right"] += 2
        shifted.append(node)
    leaf = {"value": int(action)}
    root = {"feature": feature, "threshold": float(threshold)}
    if guard_side == "left":
        root["left"], root["right"] = 1, 2
    else:
        root["left"], root["right"] = 2, 1
    return DecisionTreePolicy([root, leaf, *shifted], tree.dim, tree.leaf_kind)


class TreePolicyClassifier(BaseEstimator):
    """Estimator wrapper over fit_class_tree with the usual fit/predict shape."""

    def __init__(self, max_depth=None, min_samples_leaf=1):
        self.max_depth = max_depth
        self.min_samples_leaf = min_samples_leaf

    def fit(self, X, y, sample_weight=None):
        X = np.asarray(X, dtype=float)
        self.tree_ = fit_class_tree(
            X, y, sample_weight=sample_weight,
            max_depth=self.max_depth, min_samples_leaf=self.min_samples_leaf,
        )
        self.n_features_in_ = X.shape[1]
        self.classes_ = np.asarray(self.tree_.leaf_values(), dtype=int)
        return self

    def predict(self, X):
        check_is_fitted(self, "tree_")
        return self.tree_.predict_many(X)

    def __call__(self, s):
        check_is_fitted(self, "tree_")
        return self.tree_.predict(s)


class TreePolicyRegressor(BaseEstimator):
    """Estimator wrapper over fit_linear_tree."""

    def __init__(self, max_depth=None, min_samples_leaf=None, fit_intercept=True,
                 ridge=1e-8, origin_margin=0.0):
        self.max_depth = max_depth
        self.min_samples_leaf = min_samples_leaf
        self.fit_intercept = fit_intercept
        self.ridge = ridge
        self.origin_margin = origin_margin

    def fit(self, X, y, sample_weight=None):
        X = np.asarray(X, dtype=float)
        self.tree_ = fit_linear_tree(
            X, y, sample_weight=sample_weight,
            max_depth=self.max_depth, min_samples_leaf=self.min_samples_leaf,
            fit_intercept=self.fit_intercept, ridge=self.ridge,
            origin_margin=self.origin_margin,
        )
        self.n_features_in_ = X.shape[1]
        return self

    def predict(self, X):
        check_is_fitted(self, "tree_")
        return self.tree_.predict_many(X)

    def __call__(self, s):
        check_is_fitted(self, "tree_")
        return self.tree_.predict(s)
