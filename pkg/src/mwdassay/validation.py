"""Cross-validation regimes, agreement statistics, and report assembly.

Two fold modes: random k-fold (balanced, seeded) and leave-one-blast-out (one
fold per blast). Statistics follow the agreement-analysis catalogue: slope and
intercept of prediction on reference, Pearson r and its two-sided p, RMSE,
pair count, the 1.96*SD reproducibility coefficient, and a coefficient of
variation. Differences are oriented reference-minus-prediction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import betainc, ndtri

from .datamodel import ASSAY_CODES, Dataset, LabelRecord
from .errors import (
    AugmentEqualsTarget,
    CodeMissing,
    ConstantInput,
    LengthMismatch,
    MissingTarget,
    TooFewBlasts,
    TooFewHoles,
    TooFewPoints,
    TooShort,
)
from .features import FeatureConfig, FeatureTable, extract_dataset_features, registry_hash
from .models import (
    GPParams,
    ModelHandle,
    RFParams,
    SVMParams,
    predict,
    state_digest,
    train_gp,
    train_mvrf,
    train_rf,
    train_svm,
)

TOOL_VERSION = "0.1.0"


def format_stat(v: float) -> str:
    """Single formatting used by both reports and SVG annotations."""
    if isinstance(v, float) and math.isnan(v):
        return "NaN"
    return f"{v:.6g}"


# -- fold plans ----------------------------------------------------------------

@dataclass(frozen=True)
class FoldPlan:
    mode: str  # random_kfold | leave_one_blast_out
    assignments: dict[str, int]
    k: int
    seed: int

    def folds(self) -> int:
        return self.k

    def holes_in_fold(self, fold: int) -> list[str]:
        return [h for h, f in self.assignments.items() if f == fold]


def make_folds(dataset: Dataset, mode: str, k: int = 5, seed: int = 0) -> FoldPlan:
    """Assign every hole to exactly one fold.

    random_kfold: balanced assignment (sizes differ by at most one).
    leave_one_blast_out: ignores k; one fold per distinct blast_id.
    """
    ids = dataset.hole_ids()
    if mode == "random_kfold":
        if k < 2:
            raise TooFewHoles(f"random k-fold needs k >= 2, got {k}")
        if len(ids) < k:
            raise TooFewHoles(f"{len(ids)} holes cannot fill {k} folds")
        rng = np.random.Generator(np.random.PCG64(seed))
        order = rng.permutation(len(ids))
        assignments = {ids[int(j)]: int(pos % k) for pos, j in enumerate(order)}
        return FoldPlan(mode=mode, assignments=assignments, k=k, seed=seed)
    if mode == "leave_one_blast_out":
        blast_of = {h.hole_id: h.blast_id for h, _ in dataset.holes}
        blasts = sorted(set(blast_of.values()))
        if len(blasts) < 2:
            raise TooFewBlasts(f"need >= 2 blasts, got {len(blasts)}")
        fold_of_blast = {b: i for i, b in enumerate(blasts)}
        assignments = {hid: fold_of_blast[blast_of[hid]] for hid in ids}
        return FoldPlan(mode=mode, assignments=assignments, k=len(blasts), seed=seed)
    raise ValueError(f"unknown fold mode {mode!r}")


# -- scalar statistics -----------------------------------------------------------

def pearson_r(a, b) -> float:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.size != b.size:
        raise LengthMismatch(f"{a.size} vs {b.size}")
    if a.size < 2:
        raise TooFewPoints("pearson_r needs n >= 2")
    da = a - a.mean()
    db = b - b.mean()
    na = float(np.sqrt(np.sum(da * da)))
    nb = float(np.sqrt(np.sum(db * db)))
    if na == 0.0 or nb == 0.0:
        raise ConstantInput("correlation undefined for constant input")
    r = float(np.sum(da * db)) / (na * nb)
    return max(-1.0, min(1.0, r))


def pearson_p(r: float, n: int) -> float:
    """Two-sided p for the no-correlation null, via the t distribution with
    n-2 degrees of freedom (regularized incomplete beta form). |r| = 1 returns
    the limit 0."""
    if n < 3:
        raise TooFewPoints("pearson_p needs n >= 3")
    if abs(r) >= 1.0:
        return 0.0
    nu = n - 2
    t2 = r * r * nu / (1.0 - r * r)
    return float(betainc(nu / 2.0, 0.5, nu / (nu + t2)))


def linear_fit(a, b) -> tuple[float, float]:
    """Ordinary least squares of b on a: (slope, intercept)."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.size != b.size:
        raise LengthMismatch(f"{a.size} vs {b.size}")
    if a.size < 2:
        raise TooFewPoints("linear_fit needs n >= 2")
    da = a - a.mean()
    denom = float(np.sum(da * da))
    if denom == 0.0:
        raise ConstantInput("slope undefined for constant regressor")
    slope = float(np.sum(da * (b - b.mean()))) / denom
    return slope, float(b.mean() - slope * a.mean())


def rmse(a, b) -> float:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.size != b.size:
        raise LengthMismatch(f"{a.size} vs {b.size}")
    return float(np.sqrt(np.mean((a - b) ** 2)))


@dataclass(frozen=True)
class AgreementStats:
    """The reporting block shown on agreement plots.

    Differences are reference - prediction; rpc is 1.96 times their sample
    standard deviation; cv_percent divides that SD by the mean of the pair
    averages (a provisional reading of the coefficient-of-variation item).
    """

    slope: float
    intercept: float
    r: float
    rmse: float
    p: float
    n: int
    rpc: float
    cv_percent: float
    bias: float
    ba_pairs: tuple[tuple[float, float], ...]
    r_defined: bool = True
    fit_defined: bool = True

    def items(self) -> list[tuple[str, float]]:
        return [("slope", self.slope), ("intercept", self.intercept),
                ("r", self.r), ("rmse", self.rmse), ("p", self.p),
                ("n", float(self.n)), ("rpc", self.rpc),
                ("cv_percent", self.cv_percent), ("bias", self.bias)]


def bland_altman(lab, pred) -> AgreementStats:
    """Agreement statistics for paired (reference, prediction) values."""
    lab = np.asarray(lab, dtype=float)
    pred = np.asarray(pred, dtype=float)
    if lab.size != pred.size:
        raise LengthMismatch(f"{lab.size} vs {pred.size}")
    if lab.size < 2:
        raise TooFewPoints("bland_altman needs n >= 2")
    n = lab.size
    diffs = lab - pred
    means = (lab + pred) / 2.0
    bias = float(np.mean(diffs))
    sd = float(np.std(diffs, ddof=1))
    rpc = 1.96 * sd
    mean_of_means = float(np.mean(means))
    cv = sd / mean_of_means * 100.0 if mean_of_means != 0.0 else math.nan

    try:
        r = pearson_r(lab, pred)
        r_defined = True
        p = pearson_p(r, n) if n >= 3 else math.nan
    except ConstantInput:
        r, p, r_defined = math.nan, math.nan, False
    try:
        slope, intercept = linear_fit(lab, pred)
        fit_defined = True
    except ConstantInput:
        slope, intercept, fit_defined = math.nan, math.nan, False

    return AgreementStats(
        slope=slope, intercept=intercept, r=r, rmse=rmse(lab, pred), p=p, n=n,
        rpc=rpc, cv_percent=cv, bias=bias,
        ba_pairs=tuple(zip(means.tolist(), diffs.tolist())),
        r_defined=r_defined, fit_defined=fit_defined)


def _empirical_quantiles(sorted_vals: np.ndarray, probs: np.ndarray) -> np.ndarray:
    n = sorted_vals.size
    knots = (np.arange(1, n + 1) - 0.5) / n
    return np.interp(probs, knots, sorted_vals)


def qq_points(sample, reference="normal") -> np.ndarray:
    """Quantile pairs (reference_q, sample_q).

    Against the normal the sample is standardized by its mean/SD; against a
    second sample the larger side is interpolated at the smaller side's
    plotting positions (i - 0.5)/n.
    """
    s = np.sort(np.asarray(sample, dtype=float))
    if s.size < 3:
        raise TooShort("qq_points needs n >= 3")
    if isinstance(reference, str):
        if reference != "normal":
            raise ValueError(f"unknown reference {reference!r}")
        probs = (np.arange(1, s.size + 1) - 0.5) / s.size
        xs = ndtri(probs)
        sd = float(np.std(s, ddof=1))
        ys = (s - np.mean(s)) / (sd if sd > 0 else 1.0)
        return np.column_stack([xs, ys])
    ref = np.sort(np.asarray(reference, dtype=float))
    if ref.size < 3:
        raise TooShort("qq_points reference needs n >= 3")
    m = min(s.size, ref.size)
    probs = (np.arange(1, m + 1) - 0.5) / m
    return np.column_stack([_empirical_quantiles(ref, probs),
                            _empirical_quantiles(s, probs)])


FE_WASTE_MAX = 50.0
FE_MED_MAX = 60.0


def fe_grade_class(fe: float) -> str:
    """waste below 50, med in [50, 60), high at or above 60 (mass %)."""
    if not math.isfinite(fe):
        raise ValueError(f"non-finite Fe value {fe}")
    if fe < FE_WASTE_MAX:
        return "waste"
    if fe < FE_MED_MAX:
        return "med"
    return "high"


def materialize_presence(labels: LabelRecord, code: str, threshold: float = 0.0) -> bool:
    """Strictly-greater presence rule against the logged percentage."""
    if code not in labels.materials:
        raise CodeMissing(f"hole {labels.hole_id} has no {code} logging")
    return labels.materials[code] > threshold


@dataclass(frozen=True)
class ConfusionMatrix2:
    tn: int
    fp: int
    fn: int
    tp: int

    @property
    def n(self) -> int:
        return self.tn + self.fp + self.fn + self.tp

    @property
    def accuracy(self) -> float:
        return (self.tn + self.tp) / self.n if self.n else math.nan


def confusion(pred, true) -> ConfusionMatrix2:
    p = np.asarray(pred).astype(bool)
    t = np.asarray(true).astype(bool)
    if p.size != t.size:
        raise LengthMismatch(f"{p.size} vs {t.size}")
    return ConfusionMatrix2(
        tn=int(np.sum(~p & ~t)), fp=int(np.sum(p & ~t)),
        fn=int(np.sum(~p & t)), tp=int(np.sum(p & t)))


# -- cross-validated evaluation ---------------------------------------------------

@dataclass(frozen=True)
class TargetSpec:
    kind: str  # assay | material
    code: str
    threshold: float = 0.0  # material presence threshold, strict-greater

    def __post_init__(self):
        if self.kind not in ("assay", "material"):
            raise ValueError(f"unknown target kind {self.kind!r}")

    def describe(self) -> str:
        if self.kind == "material":
            return f"material {self.code} > {format_stat(self.threshold)}%"
        return f"assay {self.code}"


@dataclass(frozen=True)
class ModelSpec:
    kind: str  # rf | mvrf | gp | svm
    params: object | None = None

    def resolved_params(self):
        if self.params is not None:
            return self.params
        if self.kind in ("rf", "mvrf"):
            return RFParams()
        if self.kind == "gp":
            return None  # grid search defaults
        if self.kind == "svm":
            return SVMParams()
        raise ValueError(f"unknown model kind {self.kind!r}")


@dataclass(frozen=True)
class EvaluationReport:
    """Pooled out-of-fold results for one target."""

    target: TargetSpec
    model_kind: str
    plan: FoldPlan
    hole_ids: tuple[str, ...]
    fold_of: tuple[int, ...]
    lab: tuple[float, ...]
    pred: tuple[float, ...]
    stats: AgreementStats | None
    matrix: ConfusionMatrix2 | None
    registry_hash: str
    augment: str | None = None
    fold_state_digests: tuple[str, ...] = ()
    warnings: tuple[str, ...] = ()

    def residuals(self) -> np.ndarray:
        return np.asarray(self.lab) - np.asarray(self.pred)


def _target_values(dataset: Dataset, target: TargetSpec) -> dict[str, float]:
    values: dict[str, float] = {}
    for hole, rec in dataset.holes:
        if target.kind == "assay":
            if rec is None or target.code not in rec.assays:
                raise MissingTarget(f"hole {hole.hole_id} lacks assay {target.code}")
            values[hole.hole_id] = rec.assays[target.code]
        else:
            if rec is None:
                raise MissingTarget(f"hole {hole.hole_id} lacks material logging")
            values[hole.hole_id] = float(materialize_presence(rec, target.code,
                                                              target.threshold))
    return values


def _train_fold(model_spec: ModelSpec, target: TargetSpec, X, y, Y_multi,
                reg_hash, names):
    kind = model_spec.kind
    params = model_spec.resolved_params()
    if target.kind == "material":
        if kind == "rf":
            return train_rf(X, y, params, task="classification",
                            registry_hash=reg_hash, feature_names=names)
        if kind == "svm":
            return train_svm(X, 2.0 * y - 1.0, params,
                             registry_hash=reg_hash, feature_names=names)
        raise ValueError(f"{kind} cannot classify material presence")
    if kind == "rf":
        return train_rf(X, y, params, task="regression",
                        registry_hash=reg_hash, feature_names=names)
    if kind == "mvrf":
        return train_mvrf(X, Y_multi, params, registry_hash=reg_hash,
                          feature_names=names)
    if kind == "gp":
        if params is None:
            return train_gp(X, y, registry_hash=reg_hash, feature_names=names)
        return train_gp(X, y, init=params, grid=False,
                        registry_hash=reg_hash, feature_names=names)
    raise ValueError(f"{kind} cannot regress an assay")


def run_cv(dataset: Dataset, target: TargetSpec, model_spec: ModelSpec,
           plan: FoldPlan, augment: str | None = None,
           features: FeatureTable | None = None,
           feature_config: FeatureConfig = FeatureConfig(),
           capture_state: bool = False) -> EvaluationReport:
    """Train on each fold complement, predict the fold, pool the predictions.

    Standardization (where a model needs it) is fitted inside training on the
    fold complement only. ``augment`` appends the named laboratory assay as one
    extra feature column. For the multi-output forest the targets are every
    assay present on all holes; the named target must be among them.
    """
    if features is None:
        features = extract_dataset_features(dataset, feature_config)
    ids = list(features.hole_ids)
    if set(ids) != set(dataset.hole_ids()):
        raise ValueError("feature table does not cover the dataset's holes")
    for hid in ids:
        if hid not in plan.assignments:
            raise ValueError(f"hole {hid} missing from the fold plan")

    targets = _target_values(dataset, target)
    y = np.array([targets[h] for h in ids])

    X = features.matrix
    registry = list(features.registry)
    if augment is not None:
        if target.kind == "assay" and augment == target.code:
            raise AugmentEqualsTarget(augment)
        aug_vals = []
        for hole, rec in dataset.holes:
            if rec is None or augment not in rec.assays:
                raise MissingTarget(f"hole {hole.hole_id} lacks augment assay {augment}")
            aug_vals.append(rec.assays[augment])
        by_id = dict(zip(dataset.hole_ids(), aug_vals))
        X = np.column_stack([X, [by_id[h] for h in ids]])
        registry = registry + [("augment", augment)]
    reg_hash = registry_hash(tuple(registry))
    names = tuple(f"{s}__{f}" for s, f in registry)

    Y_multi = None
    multi_targets: list[str] = []
    if model_spec.kind == "mvrf":
        label_sets = [rec.assays for _, rec in dataset.holes if rec is not None]
        common = set(ASSAY_CODES)
        for assays in label_sets:
            common &= set(assays)
        multi_targets = [c for c in ASSAY_CODES if c in common]
        if target.code not in multi_targets:
            raise MissingTarget(f"target {target.code} not present on every hole")
        cols = {c: _target_values(dataset, TargetSpec("assay", c)) for c in multi_targets}
        Y_multi = np.column_stack([[cols[c][h] for h in ids] for c in multi_targets])

    fold_of = np.array([plan.assignments[h] for h in ids])
    pooled_idx: list[int] = []
    pooled_pred: list[float] = []
    digests: list[str] = []
    warns: list[str] = []
    for f in range(plan.folds()):
        test = np.flatnonzero(fold_of == f)
        train = np.flatnonzero(fold_of != f)
        if test.size == 0:
            continue
        Ym = Y_multi[train] if Y_multi is not None else None
        model = _train_fold(model_spec, target, X[train], y[train], Ym,
                            reg_hash, names)
        if not model.flags.get("converged", True):
            warns.append(f"fold {f}: optimizer did not converge")
        if capture_state:
            digests.append(state_digest(model))
        out = predict(model, X[test], registry_hash=reg_hash)
        if model_spec.kind == "mvrf":
            out = out[:, multi_targets.index(target.code)]
        elif model_spec.kind == "svm":
            out = (out + 1.0) / 2.0
        pooled_idx.extend(int(i) for i in test)
        pooled_pred.extend(float(v) for v in out)

    order = np.argsort(np.array([fold_of[i] for i in pooled_idx]), kind="stable")
    hole_order = [pooled_idx[int(j)] for j in order]
    lab = tuple(float(y[i]) for i in hole_order)
    pred = tuple(pooled_pred[int(j)] for j in order)
    pooled_ids = tuple(ids[i] for i in hole_order)
    pooled_folds = tuple(int(fold_of[i]) for i in hole_order)

    stats = matrix = None
    if target.kind == "assay":
        stats = bland_altman(np.array(lab), np.array(pred))
    else:
        matrix = confusion(np.array(pred) > 0.5, np.array(lab) > 0.5)

    return EvaluationReport(
        target=target, model_kind=model_spec.kind, plan=plan,
        hole_ids=pooled_ids, fold_of=pooled_folds, lab=lab, pred=pred,
        stats=stats, matrix=matrix, registry_hash=reg_hash, augment=augment,
        fold_state_digests=tuple(digests), warnings=tuple(warns))


def render_report(report: EvaluationReport, meta: dict | None = None) -> str:
    """Serialize a report as the structured text document (stats block,
    paired-values table, fold table). Stable bytes at fixed seed."""
    lines = [
        "# mwdassay evaluation report v1",
        f"version: {TOOL_VERSION}",
        f"target: {report.target.describe()}",
        f"model: {report.model_kind}",
        f"cv: {report.plan.mode} k={report.plan.k}",
        f"seed: {report.plan.seed}",
        f"augment: {report.augment or 'none'}",
        f"registry_hash: {report.registry_hash}",
    ]
    if meta:
        for key in sorted(meta):
            lines.append(f"meta.{key}: {meta[key]}")
    for w in report.warnings:
        lines.append(f"warning: {w}")
    lines.append("")
    if report.stats is not None:
        s = report.stats
        lines.append("[stats]")
        for name, value in s.items():
            lines.append(f"{name}: {format_stat(value)}")
        lines.append(f"r_defined: {str(s.r_defined).lower()}")
        lines.append(f"fit_defined: {str(s.fit_defined).lower()}")
    if report.matrix is not None:
        m = report.matrix
        lines.append("[confusion]")
        lines.append(f"tn: {m.tn}")
        lines.append(f"fp: {m.fp}")
        lines.append(f"fn: {m.fn}")
        lines.append(f"tp: {m.tp}")
        lines.append(f"accuracy: {format_stat(m.accuracy)}")
    lines.append("")
    lines.append("[pairs]")
    lines.append("hole_id,fold,lab,pred")
    for hid, fold, lab, pred in zip(report.hole_ids, report.fold_of,
                                    report.lab, report.pred):
        lines.append(f"{hid},{fold},{repr(lab)},{repr(pred)}")
    lines.append("")
    lines.append("[folds]")
    lines.append("hole_id,fold")
    for hid in sorted(report.plan.assignments):
        lines.append(f"{hid},{report.plan.assignments[hid]}")
    return "\n".join(lines) + "\n"
