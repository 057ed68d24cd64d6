"""Batch command line: generate | features | evaluate | importance.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 numeric failure.
Every emitted file records the tool version, the full run configuration, and
the seed, so a rerun from the recorded configuration reproduces identical
bytes.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import datamodel, synth
from .datamodel import ASSAY_CODES, MATERIAL_CODES, join, parse_labels_csv, parse_mwd_csv
from .errors import (
    DegenerateMatrix,
    DegenerateTarget,
    IllConditionedKernel,
    IoFailure,
    MwdError,
)
from .features import FeatureConfig, extract_dataset_features, feature_matrix_csv, parse_feature_csv
from .models import RFParams, SVMParams, rf_feature_importance, train_mvrf, train_rf
from .svgplot import (
    bland_altman_svg,
    confusion_svg,
    histogram_svg,
    qq_svg,
    residuals_by_grade_svg,
)
from .validation import (
    TOOL_VERSION,
    ModelSpec,
    TargetSpec,
    fe_grade_class,
    make_folds,
    qq_points,
    render_report,
    run_cv,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4

NUMERIC_ERRORS = (IllConditionedKernel, DegenerateTarget, DegenerateMatrix)


class ConfigError(Exception):
    pass


def _config_line(args: dict, seed: int) -> str:
    cfg = json.dumps(args, sort_keys=True)
    return f"# mwdassay v{TOOL_VERSION} seed={seed} config={cfg}"


def _write(path: Path, text: str):
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8", newline="")
    except OSError as exc:
        raise IoFailure(str(exc)) from exc


def _read(path: str) -> str:
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"input path does not exist: {path}")
    try:
        return p.read_text(encoding="utf-8")
    except OSError as exc:
        raise IoFailure(str(exc)) from exc


def _target_spec(code: str, threshold: float) -> TargetSpec:
    if code in ASSAY_CODES:
        return TargetSpec("assay", code)
    if code in MATERIAL_CODES:
        return TargetSpec("material", code, threshold)
    raise ConfigError(f"unknown target {code!r}; expected an assay "
                      f"({', '.join(ASSAY_CODES)}) or material code")


def cmd_generate(args) -> int:
    if args.spec:
        spec = synth.site_spec_from_json(_read(args.spec))
    else:
        spec = synth.default_site_spec(
            seed=args.seed, n_blasts=args.blasts, holes_per_blast=args.holes,
            hole_depth=args.depth, signal_noise=args.signal_noise,
            blast_bias=args.blast_bias, chem_coverage=args.chem_coverage,
            material_coverage=args.material_coverage)
    dataset, truth = synth.generate_site(spec)
    out = Path(args.out)
    cfg = _config_line({"command": "generate", "spec": args.spec or "default",
                        "n_blasts": spec.n_blasts,
                        "holes_per_blast": spec.holes_per_blast}, spec.seed)
    _write(out / "mwd.csv", cfg + "\n" + datamodel.serialize_mwd_csv(
        [h for h, _ in dataset.holes]))
    records = [rec for _, rec in dataset.holes if rec is not None]
    mat_codes = tuple(m.code for m in spec.materials)
    _write(out / "labels.csv", cfg + "\n" + datamodel.serialize_labels_csv(
        records, material_codes=mat_codes))
    _write(out / "truth.csv", cfg + "\n" + synth.truth_serialize_csv(truth, dataset))
    _write(out / "site_spec.json", spec.to_json() + "\n")
    print(f"generate: {len(dataset)} holes, {len(records)} labelled -> {out}")
    return EXIT_OK


def _feature_config(args) -> FeatureConfig:
    return FeatureConfig(embed_dim=args.embed_dim,
                         include_pr_signal=args.pr_signal)


def cmd_features(args) -> int:
    holes = parse_mwd_csv(_read(args.mwd))
    dataset = datamodel.Dataset(holes=tuple((h, None) for h in holes))
    table = extract_dataset_features(dataset, _feature_config(args))
    out = Path(args.out)
    cfg = _config_line({"command": "features", "mwd": args.mwd,
                        "embed_dim": args.embed_dim,
                        "pr_signal": args.pr_signal}, args.seed)
    _write(out / "features.csv", cfg + "\n" + feature_matrix_csv(table))
    if table.dropped:
        _write(out / "features_dropped.txt",
               cfg + "\n" + "\n".join(table.dropped) + "\n")
        print(f"features: dropped {len(table.dropped)} columns "
              f"(see features_dropped.txt)", file=sys.stderr)
    print(f"features: {len(table.hole_ids)} holes x {len(table.registry)} "
          f"columns -> {out / 'features.csv'}")
    return EXIT_OK


def _model_spec(args) -> ModelSpec:
    if args.model in ("rf", "mvrf"):
        params = RFParams(n_trees=args.trees, min_leaf=args.min_leaf,
                          mtry=args.mtry, seed=args.seed)
        return ModelSpec(args.model, params)
    if args.model == "svm":
        return ModelSpec("svm", SVMParams(C=args.svm_c, seed=args.seed))
    if args.model == "gp":
        return ModelSpec("gp", None)
    raise ConfigError(f"unknown model {args.model!r}")


def _load_eval_inputs(args):
    table = parse_feature_csv(_read(args.features))
    labels = parse_labels_csv(_read(args.labels),
                              material_codes=tuple(args.material_codes.split(","))
                              if args.material_codes else MATERIAL_CODES)
    label_by_id = {rec.hole_id: rec for rec in labels}
    return table, label_by_id


def _evaluation_dataset(args, table, label_by_id, target: TargetSpec):
    """Dataset restricted to feature-table holes carrying the target."""
    blast_of = {}
    holes_by_id = {}
    if args.mwd:
        for h in parse_mwd_csv(_read(args.mwd)):
            holes_by_id[h.hole_id] = h
    if getattr(args, "cv", None) == "spatial" and not args.mwd:
        raise ConfigError("--cv spatial requires --mwd for blast membership")

    keep_ids = []
    keep_rows = []
    pairs = []
    for i, hid in enumerate(table.hole_ids):
        rec = label_by_id.get(hid)
        if rec is None:
            continue
        if target.kind == "assay" and target.code not in rec.assays:
            continue
        if target.kind == "material" and target.code not in rec.materials:
            continue
        augment = getattr(args, "augment", None)
        if augment and target.kind == "assay" and augment not in rec.assays:
            continue
        hole = holes_by_id.get(hid)
        if hole is None:
            # placeholder carrier when MWD metadata is not supplied
            hole = _stub_hole(hid)
        pairs.append((hole, rec))
        keep_ids.append(hid)
        keep_rows.append(i)
    if not pairs:
        raise MwdError(f"no holes carry target {target.code}")
    dataset = datamodel.Dataset(holes=tuple(pairs))
    from .features import FeatureTable
    sub = FeatureTable(hole_ids=tuple(keep_ids),
                       matrix=table.matrix[keep_rows],
                       registry=table.registry)
    return dataset, sub


_STUB_CACHE: dict[str, datamodel.HoleSignalSet] = {}


def _stub_hole(hole_id: str) -> datamodel.HoleSignalSet:
    if hole_id not in _STUB_CACHE:
        zeros = (0.0, 0.0)
        signals = {name: zeros for name in datamodel.SIGNAL_NAMES}
        signals["depth"] = (0.1, 0.2)
        _STUB_CACHE[hole_id] = datamodel.HoleSignalSet(
            hole_id=hole_id, blast_id="", collar_x=0.0, collar_y=0.0,
            depth_step=0.1, signals=signals, hole_depth=0.2)
    return _STUB_CACHE[hole_id]


def cmd_evaluate(args) -> int:
    target = _target_spec(args.target, args.threshold)
    table, label_by_id = _load_eval_inputs(args)
    dataset, sub = _evaluation_dataset(args, table, label_by_id, target)
    mode = "random_kfold" if args.cv == "random" else "leave_one_blast_out"
    plan = make_folds(dataset, mode, k=args.k, seed=args.seed)
    model_spec = _model_spec(args)
    report = run_cv(dataset, target, model_spec, plan,
                    augment=args.augment, features=sub)

    out = Path(args.out)
    cfg_dict = {"command": "evaluate", "target": args.target, "model": args.model,
                "cv": args.cv, "k": args.k, "augment": args.augment,
                "threshold": args.threshold, "features": args.features,
                "labels": args.labels}
    cfg = _config_line(cfg_dict, args.seed)
    meta = {"config": json.dumps(cfg_dict, sort_keys=True)}
    _write(out / "report.txt", render_report(report, meta))

    pairs_lines = [cfg, "hole_id,fold,lab,pred"]
    for hid, fold, lab, pred in zip(report.hole_ids, report.fold_of,
                                    report.lab, report.pred):
        pairs_lines.append(f"{hid},{fold},{repr(lab)},{repr(pred)}")
    _write(out / "pairs.csv", "\n".join(pairs_lines) + "\n")

    svg_meta = cfg.lstrip("# ")
    title = f"{target.describe()} | {args.model} | {args.cv} CV"
    if report.stats is not None:
        _write(out / "bland_altman.svg",
               bland_altman_svg(report.stats, f"Agreement: {title}", svg_meta))
        residuals = report.residuals()
        _write(out / "residual_hist.svg",
               histogram_svg(residuals, bins=24,
                             title=f"Residuals: {title}",
                             xlabel="lab - pred", meta=svg_meta))
        _write(out / "qq.svg",
               qq_svg(qq_points(np.asarray(report.lab), "normal"),
                      f"QQ vs normal: {title}",
                      "normal quantile", "sample quantile", svg_meta))
        if target.code == "Fe":
            grades = [fe_grade_class(v) for v in report.lab]
            _write(out / "residuals_by_grade.svg",
                   residuals_by_grade_svg(residuals, grades,
                                          f"Residuals by grade: {title}", svg_meta))
    if report.matrix is not None:
        _write(out / "confusion.svg",
               confusion_svg(report.matrix, f"Presence: {title}", svg_meta))
    if report.stats is not None:
        print(f"evaluate: r={report.stats.r:.4f} rmse={report.stats.rmse:.4f} "
              f"n={report.stats.n} -> {out}")
    else:
        print(f"evaluate: accuracy={report.matrix.accuracy:.4f} "
              f"n={report.matrix.n} -> {out}")
    return EXIT_OK


def cmd_importance(args) -> int:
    target = _target_spec(args.target, 0.0)
    table, label_by_id = _load_eval_inputs(args)
    dataset, sub = _evaluation_dataset(args, table, label_by_id, target)
    y = []
    for hole, rec in dataset.holes:
        if target.kind == "assay":
            y.append(rec.assays[target.code])
        else:
            y.append(float(rec.materials[target.code] > args.threshold))
    y = np.asarray(y)
    params = RFParams(n_trees=args.trees, min_leaf=args.min_leaf,
                      mtry=args.mtry, seed=args.seed)
    task = "regression" if target.kind == "assay" else "classification"
    if args.model == "mvrf":
        model = train_mvrf(sub.matrix, y[:, None], params,
                           feature_names=sub.names)
    else:
        model = train_rf(sub.matrix, y, params, task=task,
                         feature_names=sub.names)
    ranking = rf_feature_importance(model)

    out = Path(args.out)
    cfg = _config_line({"command": "importance", "target": args.target,
                        "model": args.model, "trees": args.trees}, args.seed)
    csv_lines = [cfg, "rank,feature,importance"]
    for rank, (name, imp) in enumerate(ranking, start=1):
        csv_lines.append(f"{rank},{name},{repr(imp)}")
    _write(out / "importance.csv", "\n".join(csv_lines) + "\n")
    txt = [cfg, f"top 10 features for {target.describe()}:"]
    for rank, (name, imp) in enumerate(ranking[:10], start=1):
        txt.append(f"{rank:3d}. {name:40s} {imp:.6f}")
    _write(out / "importance.txt", "\n".join(txt) + "\n")
    print(f"importance: top feature {ranking[0][0]} -> {out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mwdassay",
        description="Assay and material prediction from drilling signals")
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("generate", help="write a synthetic site as CSV files")
    gen.add_argument("--spec", help="site spec JSON (overrides size knobs)")
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--blasts", type=int, default=40)
    gen.add_argument("--holes", type=int, default=50)
    gen.add_argument("--depth", type=float, default=12.0)
    gen.add_argument("--signal-noise", type=float, default=0.1)
    gen.add_argument("--blast-bias", type=float, default=0.3)
    gen.add_argument("--chem-coverage", type=float, default=0.25)
    gen.add_argument("--material-coverage", type=float, default=1.0 / 6.0)
    gen.add_argument("--out", required=True)
    gen.set_defaults(func=cmd_generate)

    feat = sub.add_parser("features", help="extract the per-hole feature matrix")
    feat.add_argument("--mwd", required=True)
    feat.add_argument("--embed-dim", type=int, default=10)
    feat.add_argument("--pr-signal", action="store_true",
                      help="treat the pressure ratio as a twelfth signal")
    feat.add_argument("--seed", type=int, default=0)
    feat.add_argument("--out", required=True)
    feat.set_defaults(func=cmd_features)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--features", required=True)
    common.add_argument("--labels", required=True)
    common.add_argument("--mwd", help="MWD CSV (needed for spatial CV blast ids)")
    common.add_argument("--target", required=True)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--trees", type=int, default=300)
    common.add_argument("--min-leaf", type=int, default=5)
    common.add_argument("--mtry", type=int, default=None)
    common.add_argument("--material-codes", default=None,
                        help="comma list overriding the registered material codes")
    common.add_argument("--out", required=True)

    ev = sub.add_parser("evaluate", parents=[common],
                        help="cross-validated evaluation with reports and plots")
    ev.add_argument("--model", choices=("rf", "mvrf", "gp", "svm"), default="rf")
    ev.add_argument("--cv", choices=("random", "spatial"), default="random")
    ev.add_argument("--k", type=int, default=5)
    ev.add_argument("--augment", default=None,
                    help="assay code appended as an extra feature column")
    ev.add_argument("--threshold", type=float, default=0.0,
                    help="material presence threshold in percent (strict greater)")
    ev.add_argument("--svm-c", type=float, default=1.0)
    ev.set_defaults(func=cmd_evaluate)

    imp = sub.add_parser("importance", parents=[common],
                         help="forest split-gain feature ranking")
    imp.add_argument("--model", choices=("rf", "mvrf"), default="rf")
    imp.add_argument("--threshold", type=float, default=0.0)
    imp.set_defaults(func=cmd_importance)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code not in (0, None) else 0
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NUMERIC_ERRORS as exc:
        print(f"numeric failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except MwdError as exc:
        print(f"data error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
