"""Zero-mean Gaussian process regression with a squared-exponential kernel.

Hyperparameters are picked by maximizing the log marginal likelihood over a
fixed log-scale grid; an optional gradient ascent refinement in log-parameter
space is available. Inputs are standardized and targets centered internally
using training statistics only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import IllConditionedKernel
from .common import ModelHandle, Standardizer, check_training_matrix

#: Fixed search grid: lengthscales 2^-3 .. 2^6, noise/signal ratios 1e-4 .. 1.
GRID_LENGTHSCALES = tuple(float(2.0 ** k) for k in range(-3, 7))
GRID_NOISE_RATIOS = tuple(float(10.0 ** k) for k in range(-4, 1))

JITTER_START = 1e-10
JITTER_MAX = 1e-4


@dataclass(frozen=True)
class GPParams:
    lengthscale: float
    signal_variance: float
    noise_variance: float

    def __post_init__(self):
        if self.lengthscale <= 0 or self.signal_variance <= 0 or self.noise_variance <= 0:
            raise ValueError("GP hyperparameters must be strictly positive")


def _sq_dists(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    a2 = np.sum(A * A, axis=1)[:, None]
    b2 = np.sum(B * B, axis=1)[None, :]
    d2 = a2 + b2 - 2.0 * A @ B.T
    return np.maximum(d2, 0.0)


def kernel(A: np.ndarray, B: np.ndarray, params: GPParams) -> np.ndarray:
    """Squared-exponential covariance (noise term excluded)."""
    return params.signal_variance * np.exp(-_sq_dists(A, B) / (2.0 * params.lengthscale ** 2))


def _factorize(K: np.ndarray) -> tuple[np.ndarray, float]:
    """Cholesky with escalating jitter; returns (L, jitter actually added)."""
    n = K.shape[0]
    base = np.trace(K) / n
    jitter = 0.0
    scale = JITTER_START
    while True:
        try:
            L = np.linalg.cholesky(K + jitter * np.eye(n))
            return L, jitter
        except np.linalg.LinAlgError:
            if scale > JITTER_MAX:
                raise IllConditionedKernel(
                    f"Cholesky failed even with jitter {jitter:g}") from None
            jitter = scale * base
            scale *= 10.0


def log_marginal_likelihood(Xs: np.ndarray, yc: np.ndarray, params: GPParams) -> float:
    n = len(yc)
    K = kernel(Xs, Xs, params) + params.noise_variance * np.eye(n)
    L, _ = _factorize(K)
    alpha = np.linalg.solve(L.T, np.linalg.solve(L, yc))
    return float(-0.5 * yc @ alpha - np.sum(np.log(np.diag(L)))
                 - 0.5 * n * math.log(2.0 * math.pi))


def log_marginal_likelihood_gradient(Xs: np.ndarray, yc: np.ndarray,
                                     params: GPParams) -> np.ndarray:
    """Gradient of the log marginal likelihood w.r.t.
    (ln lengthscale, ln signal_variance, ln noise_variance)."""
    n = len(yc)
    d2 = _sq_dists(Xs, Xs)
    Kse = params.signal_variance * np.exp(-d2 / (2.0 * params.lengthscale ** 2))
    K = Kse + params.noise_variance * np.eye(n)
    L, _ = _factorize(K)
    alpha = np.linalg.solve(L.T, np.linalg.solve(L, yc))
    Kinv = np.linalg.solve(L.T, np.linalg.solve(L, np.eye(n)))
    W = np.outer(alpha, alpha) - Kinv
    dK_dlogl = Kse * d2 / params.lengthscale ** 2
    dK_dlogsf = Kse
    dK_dlogsn = params.noise_variance * np.eye(n)
    return np.array([0.5 * np.sum(W * dK) for dK in (dK_dlogl, dK_dlogsf, dK_dlogsn)])


def _refine(Xs, yc, params: GPParams, steps: int) -> GPParams:
    """Plain gradient ascent in log-space with step halving on regression."""
    theta = np.log([params.lengthscale, params.signal_variance, params.noise_variance])
    best = log_marginal_likelihood(Xs, yc, params)
    lr = 0.1
    for _ in range(steps):
        g = log_marginal_likelihood_gradient(
            Xs, yc, GPParams(*np.exp(theta)))
        cand = theta + lr * g
        val = log_marginal_likelihood(Xs, yc, GPParams(*np.exp(cand)))
        if val > best:
            theta, best = cand, val
        else:
            lr *= 0.5
            if lr < 1e-4:
                break
    return GPParams(*np.exp(theta))


def train_gp(X, y, init: GPParams | None = None, grid: bool = True,
             refine_steps: int = 0, registry_hash: str | None = None,
             feature_names: tuple[str, ...] | None = None) -> ModelHandle:
    """Fit the GP. With grid=True the kernel hyperparameters maximize the log
    marginal likelihood over the fixed grid (signal variance pinned to var(y));
    with grid=False ``init`` is used as given.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    check_training_matrix(X, y)
    if len(y) < 3:
        raise ValueError("GP training needs n >= 3")
    std = Standardizer.fit(X)
    Xs = std.transform(X)
    y_mean = float(np.mean(y))
    yc = y - y_mean

    grid_records: list[tuple[float, float, float]] = []
    if grid:
        sf = max(float(np.var(yc)), 1e-12)
        best = None
        for ls in GRID_LENGTHSCALES:
            for ratio in GRID_NOISE_RATIOS:
                p = GPParams(lengthscale=ls, signal_variance=sf,
                             noise_variance=ratio * sf)
                lml = log_marginal_likelihood(Xs, yc, p)
                grid_records.append((ls, ratio, lml))
                if best is None or lml > best[0]:
                    best = (lml, p)
        params = best[1]
    else:
        if init is None:
            raise ValueError("grid=False requires explicit init parameters")
        params = init
    if refine_steps > 0:
        params = _refine(Xs, yc, params, refine_steps)

    n = len(yc)
    K = kernel(Xs, Xs, params) + params.noise_variance * np.eye(n)
    L, jitter = _factorize(K)
    alpha = np.linalg.solve(L.T, np.linalg.solve(L, yc))
    state = {
        "x_mean": std.mean, "x_scale": std.scale, "y_mean": y_mean,
        "X_train": Xs, "alpha": alpha, "L": L, "jitter": jitter,
        "lengthscale": params.lengthscale,
        "signal_variance": params.signal_variance,
        "noise_variance": params.noise_variance,
        "grid_records": [list(rec) for rec in grid_records],
        "n_features": X.shape[1],
    }
    return ModelHandle(kind="gp", params={
        "lengthscale": params.lengthscale,
        "signal_variance": params.signal_variance,
        "noise_variance": params.noise_variance,
        "grid": grid, "refine_steps": refine_steps,
    }, state=state, seed=0, registry_hash=registry_hash, feature_names=feature_names)


def predict_gp(model: ModelHandle, X) -> tuple[np.ndarray, np.ndarray]:
    """Posterior mean and predictive variance (includes the noise term)."""
    X = np.asarray(X, dtype=float)
    st = model.state
    if X.ndim != 2 or X.shape[1] != st["n_features"]:
        raise ValueError(f"expected (m, {st['n_features']}) inputs, got {X.shape}")
    if len(X) == 0:
        return np.empty(0), np.empty(0)
    params = GPParams(lengthscale=st["lengthscale"],
                      signal_variance=st["signal_variance"],
                      noise_variance=st["noise_variance"])
    Xq = (X - st["x_mean"]) / st["x_scale"]
    Ks = kernel(Xq, st["X_train"], params)
    mean = Ks @ st["alpha"] + st["y_mean"]
    V = np.linalg.solve(st["L"], Ks.T)
    var = params.signal_variance + params.noise_variance - np.sum(V * V, axis=0)
    return mean, np.maximum(var, 0.0)
