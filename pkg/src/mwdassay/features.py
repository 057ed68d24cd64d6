"""Per-hole feature extraction from depth-indexed drilling signals.

Extractors: Hjorth activity/mobility/complexity, waveform length, simple
square integral, crest factor, signal flatness, SVD entropy, seven descriptive
statistics, and the rotation/feed pressure-ratio indicator set.

Conventions used throughout (documented once here):

* 0/0 ratios evaluate to 0 (constant drilling segments are legal inputs).
* Signals containing values <= 0 are shifted by (-min + 1e-9 * range) before
  geometric means, flatness, or logs; a constant non-positive signal cannot be
  rescued and raises NonPositiveSample.
* Natural logs carry a 1e-12 additive guard; the same epsilon floors the feed
  pressure when forming the pressure ratio.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field

import numpy as np

from .datamodel import Dataset, HoleSignalSet, SIGNAL_NAMES
from .errors import (
    DegenerateMatrix,
    LengthMismatch,
    NonPositiveSample,
    TooShort,
    ZeroSignal,
)

LOG_EPS = 1e-12
OFFSET_EPS = 1e-9

#: Pseudo-signal name for the derived rotationPressure/feedPressure ratio.
PR_SIGNAL = "pressureRatio"


@dataclass(frozen=True)
class HjorthTriple:
    activity: float
    mobility: float
    complexity: float


@dataclass(frozen=True)
class PRIndicators:
    """The seven pressure-ratio indicators, in catalogue order I-VII."""

    sad: float
    log_spr2: float
    sdpr2: float
    sddpr2: float
    log_ratio1: float
    log_ratio2: float
    maxpr_maxfob: float

    def as_tuple(self) -> tuple[float, ...]:
        return (self.sad, self.log_spr2, self.sdpr2, self.sddpr2,
                self.log_ratio1, self.log_ratio2, self.maxpr_maxfob)


def _as_array(x) -> np.ndarray:
    a = np.asarray(x, dtype=float)
    if a.ndim != 1:
        raise ValueError(f"expected 1-d sample sequence, got shape {a.shape}")
    return a


def hjorth(x) -> HjorthTriple:
    """Activity, mobility, complexity from the even spectral moments.

    activity = sum(x^2); the second and fourth moments divide the squared
    first/second difference sums by the original N (not N-1/N-2), matching the
    printed definitions. Zero-denominator ratios collapse to 0.
    """
    a = _as_array(x)
    n = a.size
    if n < 3:
        raise TooShort(f"hjorth needs N >= 3, got {n}")
    m0 = float(np.sum(a * a))
    d1 = np.diff(a)
    d2 = np.diff(d1)
    m2 = float(np.sum(d1 * d1)) / n
    m4 = float(np.sum(d2 * d2)) / n
    mobility = math.sqrt(m2 / m0) if m0 > 0 else 0.0
    complexity = math.sqrt(m4 / m2) / mobility if m2 > 0 else 0.0
    return HjorthTriple(activity=m0, mobility=mobility, complexity=complexity)


def waveform_length(x) -> float:
    """Cumulative length of the waveform: sum of absolute first differences."""
    a = _as_array(x)
    if a.size < 2:
        raise TooShort(f"waveform_length needs N >= 2, got {a.size}")
    return float(np.sum(np.abs(np.diff(a))))


def ssi(x) -> float:
    """Simple square integral: signal energy sum(|x|^2)."""
    a = _as_array(x)
    if a.size < 1:
        raise TooShort("ssi needs N >= 1")
    return float(np.sum(np.abs(a) ** 2))


def crest_factor(x) -> float:
    """Peak magnitude over RMS; 1 means no peaks."""
    a = _as_array(x)
    if a.size < 1:
        raise TooShort("crest_factor needs N >= 1")
    rms = math.sqrt(float(np.mean(a * a)))
    if rms == 0.0:
        raise ZeroSignal("crest factor undefined for the all-zero signal")
    return float(np.max(np.abs(a))) / rms


def _positivity_offset(a: np.ndarray) -> np.ndarray:
    """Shift a signal containing values <= 0 into the strictly positive range."""
    lo = float(np.min(a))
    if lo > 0:
        return a
    span = float(np.max(a)) - lo
    shifted = a + (-lo + OFFSET_EPS * span)
    if np.min(shifted) <= 0:
        raise NonPositiveSample("signal not positive even after range offset")
    return shifted


def flatness(x) -> float:
    """Geometric over arithmetic mean, computed in log form. In (0, 1]."""
    a = _as_array(x)
    if a.size < 1:
        raise TooShort("flatness needs N >= 1")
    a = _positivity_offset(a)
    geo = math.exp(float(np.mean(np.log(a))))
    return geo / float(np.mean(a))


def svd_entropy(x, embed_dim: int = 10) -> float:
    """Shannon entropy of normalized singular values of the delay-embedding
    (trajectory) matrix with the given column count and delay 1.
    """
    if embed_dim < 2:
        raise ValueError(f"embed_dim must be >= 2, got {embed_dim}")
    a = _as_array(x)
    if a.size < 2 * embed_dim:
        raise TooShort(f"svd_entropy needs N >= {2 * embed_dim}, got {a.size}")
    traj = np.lib.stride_tricks.sliding_window_view(a, embed_dim)
    sv = np.linalg.svd(np.ascontiguousarray(traj), compute_uv=False)
    total = float(np.sum(sv))
    if total == 0.0:
        raise DegenerateMatrix("all singular values are zero")
    lam = sv / total
    lam = lam[lam > 0]
    return float(-np.sum(lam * np.log(lam)))


def descriptive_stats(x) -> tuple[float, ...]:
    """Max, standard deviation, skewness, kurtosis, mean, geometric mean,
    median, in that order.

    Skewness and kurtosis are the standardized 3rd/4th central moments
    (population divisor, kurtosis not excess-adjusted); both collapse to 0 for
    constant signals.
    """
    a = _as_array(x)
    if a.size < 2:
        raise TooShort(f"descriptive_stats needs N >= 2, got {a.size}")
    mean = float(np.mean(a))
    centered = a - mean
    m2 = float(np.mean(centered ** 2))
    if m2 > 0:
        skew = float(np.mean(centered ** 3)) / m2 ** 1.5
        kurt = float(np.mean(centered ** 4)) / (m2 * m2)
    else:
        skew = 0.0
        kurt = 0.0
    geo = math.exp(float(np.mean(np.log(_positivity_offset(a)))))
    return (float(np.max(a)), math.sqrt(m2), skew, kurt, mean, geo, float(np.median(a)))


def pressure_ratio(rotation_pressure, feed_pressure) -> np.ndarray:
    """Per-sample rotationPressure / feedPressure with an epsilon floor."""
    rp = _as_array(rotation_pressure)
    fp = _as_array(feed_pressure)
    if rp.size != fp.size:
        raise LengthMismatch(f"pressure sequences differ: {rp.size} vs {fp.size}")
    return rp / np.maximum(fp, LOG_EPS)


def pressure_ratio_features(rotation_pressure, feed_pressure, fob) -> PRIndicators:
    """The seven pressure-ratio indicators over one hole."""
    pr = pressure_ratio(rotation_pressure, feed_pressure)
    fob_a = _as_array(fob)
    if fob_a.size != pr.size:
        raise LengthMismatch(f"fob length {fob_a.size} differs from pressures {pr.size}")
    if pr.size < 3:
        raise TooShort(f"pressure_ratio_features needs N >= 3, got {pr.size}")
    d1 = np.diff(pr)
    d2 = np.diff(d1)
    sad = float(np.sum(np.abs(d1)))
    spr2 = float(np.sum(pr * pr))
    sdpr2 = float(np.sum(d1 * d1))
    sddpr2 = float(np.sum(d2 * d2))
    return PRIndicators(
        sad=sad,
        log_spr2=math.log(spr2 + LOG_EPS),
        sdpr2=sdpr2,
        sddpr2=sddpr2,
        log_ratio1=math.log(sdpr2 / max(spr2, LOG_EPS) + LOG_EPS),
        log_ratio2=math.log(sddpr2 / max(sdpr2, LOG_EPS) + LOG_EPS),
        maxpr_maxfob=float(np.max(pr)) * float(np.max(fob_a)),
    )


# -- registry / assembly -------------------------------------------------------

HJORTH_NAMES = ("hjorth_activity", "hjorth_mobility", "hjorth_complexity")
STAT_NAMES = ("stat_max", "stat_std", "stat_skewness", "stat_kurtosis",
              "stat_mean", "stat_geomean", "stat_median")
EXTRACTOR_GROUPS = ("hjorth", "wl", "ssi", "crest_factor", "flatness",
                    "svd_entropy", "stats")
PR_NAMES = ("sad", "log_spr2", "sdpr2", "sddpr2", "log_ratio1", "log_ratio2",
            "maxpr_maxfob")

_GROUP_FEATURES = {
    "hjorth": HJORTH_NAMES,
    "wl": ("wl",),
    "ssi": ("ssi",),
    "crest_factor": ("crest_factor",),
    "flatness": ("flatness",),
    "svd_entropy": ("svd_entropy",),
    "stats": STAT_NAMES,
}

_GROUP_MIN_N = {
    "hjorth": 3,
    "wl": 2,
    "ssi": 1,
    "crest_factor": 1,
    "flatness": 1,
    "stats": 2,
}


@dataclass(frozen=True)
class FeatureConfig:
    """Which signals and extractor groups to apply, plus knobs.

    include_pr_signal treats the derived pressure ratio as a twelfth signal
    receiving the full extractor set; include_raw_spr2 additionally emits the
    unlogged squared-ratio sum alongside its logarithmic form.
    """

    signals: tuple[str, ...] = SIGNAL_NAMES
    extractors: tuple[str, ...] = EXTRACTOR_GROUPS
    embed_dim: int = 10
    include_pr_indicators: bool = True
    include_pr_signal: bool = False
    include_raw_spr2: bool = False

    def __post_init__(self):
        unknown = set(self.extractors) - set(EXTRACTOR_GROUPS)
        if unknown:
            raise ValueError(f"unknown extractor groups {sorted(unknown)}")
        unknown = set(self.signals) - set(SIGNAL_NAMES)
        if unknown:
            raise ValueError(f"unknown signals {sorted(unknown)}")
        if self.embed_dim < 2:
            raise ValueError("embed_dim must be >= 2")

    def min_samples(self) -> int:
        """Smallest N any enabled extractor can run on."""
        mins = [_GROUP_MIN_N.get(g, 2 * self.embed_dim) for g in self.extractors]
        if self.include_pr_indicators:
            mins.append(3)
        return min(mins) if mins else 1


@dataclass(frozen=True)
class FeatureVector:
    """Fixed-order feature values with the registry naming each coordinate."""

    values: np.ndarray
    registry: tuple[tuple[str, str], ...]

    def __post_init__(self):
        if len(self.values) != len(self.registry):
            raise ValueError("values and registry lengths differ")

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(f"{sig}__{feat}" for sig, feat in self.registry)


def build_registry(config: FeatureConfig = FeatureConfig()) -> tuple[tuple[str, str], ...]:
    """Deterministic (signal, feature) coordinate order for a config."""
    registry: list[tuple[str, str]] = []
    signals = list(config.signals)
    if config.include_pr_signal:
        signals.append(PR_SIGNAL)
    for sig in signals:
        for group in config.extractors:
            for feat in _GROUP_FEATURES[group]:
                registry.append((sig, feat))
    if config.include_pr_indicators:
        for feat in PR_NAMES:
            registry.append((PR_SIGNAL, feat))
            if feat == "log_spr2" and config.include_raw_spr2:
                registry.append((PR_SIGNAL, "spr2"))
    return tuple(registry)


def registry_names(registry: tuple[tuple[str, str], ...]) -> tuple[str, ...]:
    return tuple(f"{sig}__{feat}" for sig, feat in registry)


def registry_hash(registry: tuple[tuple[str, str], ...]) -> str:
    digest = hashlib.sha256("\n".join(registry_names(registry)).encode()).hexdigest()
    return digest


def _signal_features(a: np.ndarray, config: FeatureConfig) -> list[float]:
    """One signal's feature block; failed extractors yield NaN sentinels."""
    out: list[float] = []
    for group in config.extractors:
        width = len(_GROUP_FEATURES[group])
        try:
            if group == "hjorth":
                h = hjorth(a)
                out.extend((h.activity, h.mobility, h.complexity))
            elif group == "wl":
                out.append(waveform_length(a))
            elif group == "ssi":
                out.append(ssi(a))
            elif group == "crest_factor":
                out.append(crest_factor(a))
            elif group == "flatness":
                out.append(flatness(a))
            elif group == "svd_entropy":
                out.append(svd_entropy(a, config.embed_dim))
            else:
                out.extend(descriptive_stats(a))
        except (TooShort, ZeroSignal, NonPositiveSample, DegenerateMatrix):
            out.extend([math.nan] * width)
    return out


def extract_hole_features(hole: HoleSignalSet,
                          config: FeatureConfig = FeatureConfig()) -> FeatureVector:
    """Assemble the full per-hole feature vector in registry order.

    Individual extractor failures become NaN sentinels so that dataset-level
    assembly can drop the affected column everywhere (never imputed).
    """
    n = hole.n_samples
    if n < config.min_samples():
        raise TooShort(f"hole {hole.hole_id}: {n} samples below extractor minimum")
    values: list[float] = []
    signals = [(name, np.asarray(hole.signals[name], dtype=float)) for name in config.signals]
    if config.include_pr_signal:
        signals.append((PR_SIGNAL, pressure_ratio(hole.signals["rotationPressure"],
                                                  hole.signals["feedPressure"])))
    for _, a in signals:
        values.extend(_signal_features(a, config))
    if config.include_pr_indicators:
        try:
            ind = pressure_ratio_features(hole.signals["rotationPressure"],
                                          hole.signals["feedPressure"],
                                          hole.signals["fob"])
            pr_values = list(ind.as_tuple())
            pr = pressure_ratio(hole.signals["rotationPressure"],
                                hole.signals["feedPressure"])
            spr2_raw = float(np.sum(pr * pr))
        except TooShort:
            pr_values = [math.nan] * len(PR_NAMES)
            spr2_raw = math.nan
        for feat, v in zip(PR_NAMES, pr_values):
            values.append(v)
            if feat == "log_spr2" and config.include_raw_spr2:
                values.append(spr2_raw)
    return FeatureVector(values=np.array(values, dtype=float),
                         registry=build_registry(config))


@dataclass(frozen=True)
class FeatureTable:
    """Rectangular per-hole feature matrix with its surviving registry."""

    hole_ids: tuple[str, ...]
    matrix: np.ndarray
    registry: tuple[tuple[str, str], ...]
    dropped: tuple[str, ...] = ()

    def __post_init__(self):
        if self.matrix.shape != (len(self.hole_ids), len(self.registry)):
            raise ValueError("matrix shape inconsistent with ids/registry")

    @property
    def names(self) -> tuple[str, ...]:
        return registry_names(self.registry)

    @property
    def hash(self) -> str:
        return registry_hash(self.registry)

    def column(self, name: str) -> np.ndarray:
        return self.matrix[:, self.names.index(name)]


def extract_dataset_features(dataset: Dataset,
                             config: FeatureConfig = FeatureConfig()) -> FeatureTable:
    """Extract features for every hole; columns failing on any hole are dropped
    dataset-wide to keep the matrix rectangular and finite.
    """
    registry = build_registry(config)
    rows = []
    ids = []
    for hole, _ in dataset.holes:
        fv = extract_hole_features(hole, config)
        rows.append(fv.values)
        ids.append(hole.hole_id)
    matrix = np.vstack(rows) if rows else np.empty((0, len(registry)))
    bad = ~np.all(np.isfinite(matrix), axis=0) if len(rows) else np.zeros(len(registry), bool)
    names = registry_names(registry)
    dropped = tuple(names[j] for j in np.flatnonzero(bad))
    keep = ~bad
    return FeatureTable(
        hole_ids=tuple(ids),
        matrix=matrix[:, keep],
        registry=tuple(r for r, k in zip(registry, keep) if k),
        dropped=dropped,
    )


def feature_matrix_csv(table: FeatureTable) -> str:
    """Export as CSV: header is hole_id plus the <signal>__<feature> names."""
    lines = ["hole_id," + ",".join(table.names)]
    for i, hole_id in enumerate(table.hole_ids):
        lines.append(hole_id + "," + ",".join(repr(float(v)) for v in table.matrix[i]))
    return "\n".join(lines) + "\n"


def parse_feature_csv(text: str) -> FeatureTable:
    """Read back a feature matrix CSV produced by feature_matrix_csv."""
    lines = [ln for ln in text.splitlines() if ln and not ln.lstrip().startswith("#")]
    header = lines[0].split(",")
    if header[0] != "hole_id":
        raise ValueError("feature CSV must start with a hole_id column")
    registry = []
    for name in header[1:]:
        sig, _, feat = name.partition("__")
        if not feat:
            raise ValueError(f"feature column {name!r} lacks the signal__feature form")
        registry.append((sig, feat))
    ids = []
    rows = []
    for ln in lines[1:]:
        cells = ln.split(",")
        ids.append(cells[0])
        rows.append([float(c) for c in cells[1:]])
    matrix = np.array(rows, dtype=float) if rows else np.empty((0, len(registry)))
    return FeatureTable(hole_ids=tuple(ids), matrix=matrix, registry=tuple(registry))
