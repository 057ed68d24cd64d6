"""Random forests built on CART trees: variance-reduction splits for
regression (single- or multi-output) and Gini splits for binary
classification. Fully deterministic given the seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import DegenerateTarget, WrongModelKind
from .common import ModelHandle, check_training_matrix


@dataclass(frozen=True)
class RFParams:
    n_trees: int = 300
    max_depth: int | None = None
    min_leaf: int = 5
    mtry: int | None = None  # None: ceil(p/3) regression, ceil(sqrt(p)) classification
    bootstrap: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.n_trees < 1:
            raise ValueError("n_trees must be >= 1")
        if self.min_leaf < 1:
            raise ValueError("min_leaf must be >= 1")
        if self.mtry is not None and self.mtry < 1:
            raise ValueError("mtry must be >= 1")

    def resolved_mtry(self, p: int, task: str) -> int:
        if self.mtry is not None:
            return min(self.mtry, p)
        if task == "classification":
            return min(p, math.ceil(math.sqrt(p)))
        return min(p, math.ceil(p / 3))


def _regression_scores(ys: np.ndarray):
    """Split scores (summed left+right SSE over outputs) for every position.

    ys: targets sorted per candidate feature, shape (m, f, q).
    Returns (scores (m-1, f), parent_sse scalar-per-node array broadcastable).
    """
    m = ys.shape[0]
    csum = np.cumsum(ys, axis=0)
    csum2 = np.cumsum(ys * ys, axis=0)
    total = csum[-1]
    total2 = csum2[-1]
    left_n = np.arange(1, m, dtype=float)[:, None, None]
    right_n = m - left_n
    sse_left = csum2[:-1] - csum[:-1] ** 2 / left_n
    sse_right = (total2 - csum2[:-1]) - (total - csum[:-1]) ** 2 / right_n
    scores = np.sum(sse_left + sse_right, axis=2)
    # parent SSE is identical across candidate features; take column 0
    parent = float(np.sum(total2[0] - total[0] ** 2 / m))
    return scores, parent


def _gini_scores(ys: np.ndarray):
    """Count-weighted Gini impurity of each candidate split for binary labels.

    ys: 0/1 labels sorted per candidate feature, shape (m, f, 1).
    """
    m = ys.shape[0]
    ones = np.cumsum(ys[:, :, 0], axis=0)
    left_n = np.arange(1, m, dtype=float)[:, None]
    total_ones = ones[-1]
    ones_l = ones[:-1]
    zeros_l = left_n - ones_l
    right_n = m - left_n
    ones_r = total_ones - ones_l
    zeros_r = right_n - ones_r
    gini_left = left_n - (ones_l ** 2 + zeros_l ** 2) / left_n
    gini_right = right_n - (ones_r ** 2 + zeros_r ** 2) / right_n
    scores = gini_left + gini_right
    t1 = float(total_ones[0]) if ones.shape[1] else 0.0
    parent = m - (t1 ** 2 + (m - t1) ** 2) / m
    return scores, parent


def _build_tree(X: np.ndarray, Y: np.ndarray, Y_leaf: np.ndarray, mtry: int,
                min_leaf: int, max_depth: int, rng: np.random.Generator,
                task: str, importance: np.ndarray) -> dict:
    """Grow one CART tree; nodes as parallel arrays, preorder, left-first.

    Y drives the split scores (standardized targets for regression); Y_leaf
    supplies the raw values averaged into leaves.
    """
    n, p = X.shape
    q = Y_leaf.shape[1]
    feature: list[int] = []
    threshold: list[float] = []
    left: list[int] = []
    right: list[int] = []
    value: list[np.ndarray] = []

    def new_node() -> int:
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        value.append(np.zeros(q))
        return len(feature) - 1

    root = new_node()
    stack = [(np.arange(n), 0, root)]
    while stack:
        idx, depth, slot = stack.pop()
        m = idx.size
        Yn = Y[idx]
        leaf_mean = Y_leaf[idx].mean(axis=0)
        if m < 2 * min_leaf or depth >= max_depth:
            value[slot] = leaf_mean
            continue
        feats = np.sort(rng.choice(p, size=mtry, replace=False))
        Xn = X[np.ix_(idx, feats)]
        order = np.argsort(Xn, axis=0, kind="stable")
        Xs = np.take_along_axis(Xn, order, axis=0)
        ys = Yn[order]  # (m, mtry, q)
        if task == "classification":
            scores, parent = _gini_scores(ys)
        else:
            scores, parent = _regression_scores(ys)
        if parent <= 0.0:  # pure node
            value[slot] = leaf_mean
            continue
        pos = np.arange(1, m)[:, None]
        valid = (pos >= min_leaf) & (pos <= m - min_leaf) & (Xs[1:] > Xs[:-1])
        scores = np.where(valid, scores, np.inf)
        flat = int(np.argmin(scores))
        i, f = divmod(flat, scores.shape[1])
        if not np.isfinite(scores[i, f]):
            value[slot] = leaf_mean
            continue
        gain = parent - float(scores[i, f])
        feat_global = int(feats[f])
        importance[feat_global] += max(gain, 0.0)
        thr = 0.5 * (Xs[i, f] + Xs[i + 1, f])
        go_left = X[idx, feat_global] <= thr
        feature[slot] = feat_global
        threshold[slot] = float(thr)
        left_slot = new_node()
        right_slot = new_node()
        left[slot] = left_slot
        right[slot] = right_slot
        stack.append((idx[~go_left], depth + 1, right_slot))
        stack.append((idx[go_left], depth + 1, left_slot))

    tree = {
        "feature": np.array(feature, dtype=np.int64),
        "threshold": np.array(threshold, dtype=float),
        "left": np.array(left, dtype=np.int64),
        "right": np.array(right, dtype=np.int64),
        "value": np.vstack(value),
    }
    if task == "classification":
        # majority class in leaf; ties resolve to class 0
        leaf = tree["feature"] < 0
        tree["value"] = np.where(leaf[:, None] & (tree["value"] > 0.5), 1.0, 0.0)
    return tree


def _tree_predict(tree: dict, X: np.ndarray) -> np.ndarray:
    node = np.zeros(len(X), dtype=np.int64)
    feature = tree["feature"]
    threshold = tree["threshold"]
    left = tree["left"]
    right = tree["right"]
    while True:
        f = feature[node]
        at_leaf = f < 0
        if at_leaf.all():
            break
        col = np.maximum(f, 0)
        go_left = X[np.arange(len(X)), col] <= threshold[node]
        nxt = np.where(go_left, left[node], right[node])
        node = np.where(at_leaf, node, nxt)
    return tree["value"][node]


def _fit_forest(X, Y_score, Y_leaf, params: RFParams,
                task: str) -> tuple[list[dict], np.ndarray]:
    n, p = X.shape
    mtry = params.resolved_mtry(p, task)
    max_depth = params.max_depth if params.max_depth is not None else 2 ** 31
    importance = np.zeros(p)
    trees = []
    children = np.random.SeedSequence(params.seed).spawn(params.n_trees)
    for ss in children:
        rng = np.random.Generator(np.random.PCG64(ss))
        idx = rng.integers(0, n, size=n) if params.bootstrap else np.arange(n)
        trees.append(_build_tree(X[idx], Y_score[idx], Y_leaf[idx], mtry,
                                 params.min_leaf, max_depth, rng, task,
                                 importance))
    return trees, importance


def _standardize_columns(Y: np.ndarray) -> np.ndarray:
    mean = Y.mean(axis=0)
    scale = Y.std(axis=0)
    scale = np.where(scale > 0, scale, 1.0)
    return (Y - mean) / scale


def train_rf(X, y, params: RFParams = RFParams(), task: str = "regression",
             registry_hash: str | None = None,
             feature_names: tuple[str, ...] | None = None) -> ModelHandle:
    """Fit a random forest; prediction is the tree mean (regression) or
    majority vote (classification)."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    check_training_matrix(X, y)
    if task not in ("regression", "classification"):
        raise ValueError(f"unknown task {task!r}")
    if task == "classification":
        classes = np.unique(y)
        if not np.all(np.isin(classes, (0.0, 1.0))):
            raise ValueError("classification targets must be 0/1")
        if classes.size < 2:
            raise DegenerateTarget("classification needs both classes present")
    Y_leaf = y[:, None]
    Y_score = Y_leaf if task == "classification" else _standardize_columns(Y_leaf)
    trees, importance = _fit_forest(X, Y_score, Y_leaf, params, task)
    state = {"trees": trees, "importance_raw": importance, "n_features": X.shape[1],
             "task": task}
    return ModelHandle(kind="rf", params=params.__dict__.copy(), state=state,
                       seed=params.seed, registry_hash=registry_hash,
                       feature_names=feature_names)


def train_mvrf(X, Y, params: RFParams = RFParams(),
               registry_hash: str | None = None,
               feature_names: tuple[str, ...] | None = None,
               target_names: tuple[str, ...] | None = None) -> ModelHandle:
    """Fit a single forest over several outputs at once.

    The split criterion sums per-output variance reduction on internally
    standardized targets; leaves keep raw-unit mean vectors so predictions
    come out in the original units (equivalent to un-standardizing, without
    the round trip).
    """
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    if Y.ndim == 1:
        Y = Y[:, None]
    check_training_matrix(X, Y[:, 0])
    if not np.all(np.isfinite(Y)):
        raise ValueError("training data contains non-finite entries")
    trees, importance = _fit_forest(X, _standardize_columns(Y), Y, params,
                                    "regression")
    state = {"trees": trees, "importance_raw": importance, "n_features": X.shape[1],
             "task": "regression",
             "target_names": list(target_names) if target_names else None}
    return ModelHandle(kind="mvrf", params=params.__dict__.copy(), state=state,
                       seed=params.seed, registry_hash=registry_hash,
                       feature_names=feature_names)


def predict_forest(model: ModelHandle, X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != model.state["n_features"]:
        raise ValueError(f"expected (m, {model.state['n_features']}) inputs, "
                         f"got {X.shape}")
    trees = model.state["trees"]
    if len(X) == 0:
        q = trees[0]["value"].shape[1]
        out = np.empty((0, q))
    else:
        out = np.mean([_tree_predict(t, X) for t in trees], axis=0)
    if model.kind == "mvrf":
        return out
    out = out[:, 0]
    if model.state["task"] == "classification":
        return (out > 0.5).astype(float)
    return out


def rf_feature_importance(model: ModelHandle) -> list[tuple[str, float]]:
    """Total split-criterion reduction per feature, normalized to sum 1,
    in descending order with ties broken by registry position."""
    if model.kind not in ("rf", "mvrf"):
        raise WrongModelKind(f"feature importance needs rf/mvrf, got {model.kind}")
    raw = np.asarray(model.state["importance_raw"], dtype=float)
    total = raw.sum()
    norm = raw / total if total > 0 else raw
    names = model.feature_names or tuple(f"x{j}" for j in range(raw.size))
    order = np.argsort(-norm, kind="stable")
    return [(names[j], float(norm[j])) for j in order]
