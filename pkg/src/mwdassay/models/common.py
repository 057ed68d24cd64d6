"""Shared model plumbing: the fitted-model container, feature standardization,
and a versioned JSON serialization used for persistence and state digests.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

import numpy as np

from ..errors import RegistryMismatch

FORMAT_VERSION = 1


@dataclass
class Standardizer:
    """Per-feature mean/scale fitted on training rows only."""

    mean: np.ndarray
    scale: np.ndarray

    @classmethod
    def fit(cls, X: np.ndarray) -> "Standardizer":
        mean = X.mean(axis=0)
        scale = X.std(axis=0)
        scale = np.where(scale > 0, scale, 1.0)
        return cls(mean=mean, scale=scale)

    def transform(self, X: np.ndarray) -> np.ndarray:
        return (X - self.mean) / self.scale


@dataclass
class ModelHandle:
    """A trained predictor: hyperparameters plus fitted state.

    state maps names to numpy arrays / floats / nested structures; it is the
    authoritative record compared in leakage audits, so everything that
    training touches must live here.
    """

    kind: str
    params: dict
    state: dict
    seed: int
    registry_hash: str | None = None
    feature_names: tuple[str, ...] | None = None
    flags: dict = field(default_factory=dict)

    def check_registry(self, registry_hash: str | None):
        if self.registry_hash is None:
            return
        if registry_hash != self.registry_hash:
            raise RegistryMismatch(
                f"model trained on registry {self.registry_hash[:12]}..., "
                f"prediction inputs carry {str(registry_hash)[:12]}...")


def _encode(obj):
    if isinstance(obj, np.ndarray):
        return {"__nd__": obj.tolist(), "dtype": str(obj.dtype)}
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, dict):
        return {k: _encode(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_encode(v) for v in obj]
    return obj


def _decode(obj):
    if isinstance(obj, dict):
        if "__nd__" in obj:
            return np.array(obj["__nd__"], dtype=obj["dtype"])
        return {k: _decode(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_decode(v) for v in obj]
    return obj


def to_json(model: ModelHandle) -> str:
    doc = {
        "format_version": FORMAT_VERSION,
        "kind": model.kind,
        "params": _encode(model.params),
        "state": _encode(model.state),
        "seed": model.seed,
        "registry_hash": model.registry_hash,
        "feature_names": list(model.feature_names) if model.feature_names else None,
        "flags": model.flags,
    }
    return json.dumps(doc, sort_keys=True, separators=(",", ":"))


def from_json(text: str) -> ModelHandle:
    doc = json.loads(text)
    version = doc.get("format_version")
    if version != FORMAT_VERSION:
        raise ValueError(f"unsupported model format version {version}")
    names = doc.get("feature_names")
    return ModelHandle(
        kind=doc["kind"],
        params=_decode(doc["params"]),
        state=_decode(doc["state"]),
        seed=doc["seed"],
        registry_hash=doc.get("registry_hash"),
        feature_names=tuple(names) if names else None,
        flags=doc.get("flags", {}),
    )


def save_model(model: ModelHandle, path):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(to_json(model))


def load_model(path) -> ModelHandle:
    with open(path, encoding="utf-8") as fh:
        return from_json(fh.read())


def state_digest(model: ModelHandle) -> str:
    """Stable digest of the complete fitted state (for determinism checks)."""
    return hashlib.sha256(to_json(model).encode()).hexdigest()


def check_training_matrix(X: np.ndarray, y: np.ndarray):
    if X.ndim != 2:
        raise ValueError(f"X must be 2-d, got shape {X.shape}")
    if len(X) != len(y):
        raise ValueError(f"X has {len(X)} rows but y has {len(y)}")
    if len(X) < 2:
        raise ValueError("need at least 2 training rows")
    if not np.all(np.isfinite(X)) or not np.all(np.isfinite(y)):
        raise ValueError("training data contains non-finite entries")
