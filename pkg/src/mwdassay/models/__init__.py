"""Predictors: random forests (single and multi-output), Gaussian process
regression, and a binary SVM classifier."""

from __future__ import annotations

import numpy as np

from .common import (
    ModelHandle,
    Standardizer,
    from_json,
    load_model,
    save_model,
    state_digest,
    to_json,
)
from .forest import RFParams, predict_forest, rf_feature_importance, train_mvrf, train_rf
from .gp import (
    GPParams,
    log_marginal_likelihood,
    log_marginal_likelihood_gradient,
    predict_gp,
    train_gp,
)
from .svm import SVMParams, decision_function, predict_svm, train_svm

__all__ = [
    "ModelHandle", "Standardizer", "RFParams", "GPParams", "SVMParams",
    "train_rf", "train_mvrf", "train_gp", "train_svm", "predict",
    "predict_forest", "predict_gp", "predict_svm", "decision_function",
    "rf_feature_importance", "log_marginal_likelihood",
    "log_marginal_likelihood_gradient", "save_model", "load_model",
    "to_json", "from_json", "state_digest",
]


def predict(model: ModelHandle, X, registry_hash: str | None = None,
            return_variance: bool = False):
    """Dispatch prediction for any model kind.

    Refuses to run when the model was trained against a feature registry and
    the supplied hash differs. return_variance=True is GP-only and yields
    (mean, variance).
    """
    model.check_registry(registry_hash)
    X = np.asarray(X, dtype=float)
    if len(X) and not np.all(np.isfinite(X)):
        raise ValueError("prediction inputs contain non-finite entries")
    if model.kind in ("rf", "mvrf"):
        out = predict_forest(model, X)
    elif model.kind == "gp":
        mean, var = predict_gp(model, X)
        if return_variance:
            return mean, var
        out = mean
    elif model.kind == "svm":
        out = predict_svm(model, X)
    else:
        raise ValueError(f"unknown model kind {model.kind!r}")
    if return_variance:
        raise ValueError(f"predictive variance is GP-only, not {model.kind}")
    return out
