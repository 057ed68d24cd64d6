"""Soft-margin binary SVM with an RBF kernel, trained by sequential minimal
optimization.

Training rows are brought into a canonical (content-sorted) order and the
pair-selection randomness is seeded per canonical row index, so permuting the
input rows cannot change the fitted decision function.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from ..errors import SingleClass
from .common import ModelHandle, Standardizer, check_training_matrix


@dataclass(frozen=True)
class SVMParams:
    C: float = 1.0
    rbf_gamma: float | None = None  # None: 1/p at fit time
    tolerance: float = 1e-3
    max_passes: int = 100
    seed: int = 0

    def __post_init__(self):
        if self.C <= 0:
            raise ValueError("C must be > 0")
        if self.rbf_gamma is not None and self.rbf_gamma <= 0:
            raise ValueError("rbf_gamma must be > 0")
        if self.tolerance <= 0:
            raise ValueError("tolerance must be > 0")


def rbf_kernel(A: np.ndarray, B: np.ndarray, gamma: float) -> np.ndarray:
    a2 = np.sum(A * A, axis=1)[:, None]
    b2 = np.sum(B * B, axis=1)[None, :]
    return np.exp(-gamma * np.maximum(a2 + b2 - 2.0 * A @ B.T, 0.0))


def _canonical_order(X: np.ndarray, y: np.ndarray) -> np.ndarray:
    keys = (y,) + tuple(X[:, j] for j in range(X.shape[1] - 1, -1, -1))
    return np.lexsort(keys)


class _Smo:
    """Two-loop SMO with an error cache and the max-|E1-E2| second-choice
    heuristic; terminates when a full pass leaves every row KKT-feasible at
    the working tolerance."""

    def __init__(self, K, y, params: SVMParams):
        self.K = K
        self.y = y
        self.C = params.C
        self.tol = params.tolerance
        n = len(y)
        self.alphas = np.zeros(n)
        self.b = 0.0
        self.errors = -y.astype(float)  # f = 0 initially
        self.rngs = [np.random.Generator(np.random.PCG64(np.random.SeedSequence(
            entropy=params.seed, spawn_key=(i,)))) for i in range(n)]

    def take_step(self, i1: int, i2: int) -> bool:
        if i1 == i2:
            return False
        K, y, C = self.K, self.y, self.C
        a1, a2 = self.alphas[i1], self.alphas[i2]
        y1, y2 = y[i1], y[i2]
        E1, E2 = self.errors[i1], self.errors[i2]
        s = y1 * y2
        if s > 0:
            lo, hi = max(0.0, a1 + a2 - C), min(C, a1 + a2)
        else:
            lo, hi = max(0.0, a2 - a1), min(C, C + a2 - a1)
        if hi - lo < 1e-12:
            return False
        eta = K[i1, i1] + K[i2, i2] - 2.0 * K[i1, i2]
        if eta > 0:
            a2_new = a2 + y2 * (E1 - E2) / eta
            a2_new = min(max(a2_new, lo), hi)
        else:
            # flat direction (duplicate rows): move to the better end point
            f1 = y1 * (E1 + self.b) - a1 * K[i1, i1] - s * a2 * K[i1, i2]
            f2 = y2 * (E2 + self.b) - s * a1 * K[i1, i2] - a2 * K[i2, i2]
            l1 = a1 + s * (a2 - lo)
            h1 = a1 + s * (a2 - hi)
            obj_lo = (l1 * f1 + lo * f2 + 0.5 * l1 * l1 * K[i1, i1]
                      + 0.5 * lo * lo * K[i2, i2] + s * lo * l1 * K[i1, i2])
            obj_hi = (h1 * f1 + hi * f2 + 0.5 * h1 * h1 * K[i1, i1]
                      + 0.5 * hi * hi * K[i2, i2] + s * hi * h1 * K[i1, i2])
            if obj_lo < obj_hi - 1e-12:
                a2_new = lo
            elif obj_lo > obj_hi + 1e-12:
                a2_new = hi
            else:
                return False
        if abs(a2_new - a2) < 1e-12 * (a2_new + a2 + 1e-12):
            return False
        a1_new = a1 + s * (a2 - a2_new)
        d1, d2 = a1_new - a1, a2_new - a2
        b1 = self.b - E1 - y1 * d1 * K[i1, i1] - y2 * d2 * K[i1, i2]
        b2 = self.b - E2 - y1 * d1 * K[i1, i2] - y2 * d2 * K[i2, i2]
        if 0 < a1_new < C:
            b_new = b1
        elif 0 < a2_new < C:
            b_new = b2
        else:
            b_new = 0.5 * (b1 + b2)
        self.errors += (y1 * d1 * K[i1] + y2 * d2 * K[i2]) + (b_new - self.b)
        self.alphas[i1] = a1_new
        self.alphas[i2] = a2_new
        self.b = b_new
        return True

    def examine(self, i2: int) -> bool:
        y2 = self.y[i2]
        a2 = self.alphas[i2]
        r2 = self.errors[i2] * y2
        if not ((r2 < -self.tol and a2 < self.C) or (r2 > self.tol and a2 > 0)):
            return False
        rng = self.rngs[i2]
        non_bound = np.flatnonzero((self.alphas > 0) & (self.alphas < self.C))
        if non_bound.size > 1:
            gaps = np.abs(self.errors[non_bound] - self.errors[i2])
            i1 = int(non_bound[int(np.argmax(gaps))])
            if self.take_step(i1, i2):
                return True
        if non_bound.size:
            start = int(rng.integers(non_bound.size))
            for k in range(non_bound.size):
                if self.take_step(int(non_bound[(start + k) % non_bound.size]), i2):
                    return True
        n = len(self.y)
        start = int(rng.integers(n))
        for k in range(n):
            if self.take_step((start + k) % n, i2):
                return True
        return False


def _smo(K, y, params: SVMParams):
    state = _Smo(K, y, params)
    n = len(y)
    examine_all = True
    passes = 0
    converged = False
    while passes < params.max_passes:
        changed = 0
        if examine_all:
            targets = range(n)
        else:
            targets = np.flatnonzero((state.alphas > 0) & (state.alphas < params.C))
        for i2 in targets:
            changed += state.examine(int(i2))
        passes += 1
        if examine_all:
            if changed == 0:
                converged = True
                break
            examine_all = False
        elif changed == 0:
            examine_all = True
    return state.alphas, float(state.b), passes, converged


def train_svm(X, labels, params: SVMParams = SVMParams(),
              registry_hash: str | None = None,
              feature_names: tuple[str, ...] | None = None) -> ModelHandle:
    """Fit the SVM on labels in {-1, +1}; features are standardized internally
    with training statistics."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(labels, dtype=float)
    check_training_matrix(X, y)
    classes = np.unique(y)
    if not np.all(np.isin(classes, (-1.0, 1.0))):
        raise ValueError("labels must be -1/+1")
    if classes.size < 2:
        raise SingleClass("both classes must be present")

    # canonical content order first (on raw rows) so the standardization
    # statistics and everything downstream are bit-identical under any input
    # row permutation
    order = _canonical_order(X, y)
    X = X[order]
    y = y[order]
    std = Standardizer.fit(X)
    Xs = std.transform(X)
    n, p = Xs.shape
    gamma = params.rbf_gamma if params.rbf_gamma is not None else 1.0 / p
    K = rbf_kernel(Xs, Xs, gamma)

    alphas, b, sweeps, converged = _smo(K, y, params)
    if not converged:
        warnings.warn(f"SMO did not converge within {params.max_passes} passes; "
                      "returning best iterate", RuntimeWarning)

    state = {
        "x_mean": std.mean, "x_scale": std.scale,
        "support_X": Xs, "support_y": y, "alphas": alphas, "b": b,
        "gamma": gamma, "n_features": p, "sweeps": sweeps,
    }
    return ModelHandle(kind="svm",
                       params={"C": params.C, "rbf_gamma": gamma,
                               "tolerance": params.tolerance,
                               "max_passes": params.max_passes},
                       state=state, seed=params.seed, registry_hash=registry_hash,
                       feature_names=feature_names,
                       flags={"converged": converged})


def decision_function(model: ModelHandle, X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    st = model.state
    if X.ndim != 2 or X.shape[1] != st["n_features"]:
        raise ValueError(f"expected (m, {st['n_features']}) inputs, got {X.shape}")
    if len(X) == 0:
        return np.empty(0)
    Xq = (X - st["x_mean"]) / st["x_scale"]
    keep = st["alphas"] > 0
    K = rbf_kernel(Xq, st["support_X"][keep], st["gamma"])
    return K @ (st["alphas"][keep] * st["support_y"][keep]) + st["b"]


def predict_svm(model: ModelHandle, X) -> np.ndarray:
    """Class labels in {-1, +1}; a decision value of exactly 0 maps to +1."""
    d = decision_function(model, X)
    return np.where(d >= 0, 1.0, -1.0)
