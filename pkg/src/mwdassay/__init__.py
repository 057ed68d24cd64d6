"""Predict per-hole chemical assays and material presence from
measure-while-drilling signals: feature extraction, models, cross-validated
agreement reports, and a synthetic site generator for verification."""

from .datamodel import (
    ASSAY_CODES,
    MATERIAL_CODES,
    SIGNAL_NAMES,
    Dataset,
    HoleSignalSet,
    LabelRecord,
    join,
    parse_labels_csv,
    parse_mwd_csv,
)
from .features import (
    FeatureConfig,
    FeatureTable,
    FeatureVector,
    extract_dataset_features,
    extract_hole_features,
)
from .models import GPParams, ModelHandle, RFParams, SVMParams, predict
from .synth import SiteSpec, default_site_spec, generate_site, truth_check
from .validation import (
    EvaluationReport,
    FoldPlan,
    ModelSpec,
    TargetSpec,
    bland_altman,
    make_folds,
    run_cv,
)

__version__ = "0.1.0"
