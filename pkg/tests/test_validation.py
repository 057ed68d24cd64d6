"""Fold plans, agreement statistics, and the cross-validated evaluation loop."""

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import oracles
from mwdassay.datamodel import LabelRecord
from mwdassay.errors import (
    AugmentEqualsTarget,
    CodeMissing,
    ConstantInput,
    LengthMismatch,
    TooFewBlasts,
    TooFewHoles,
)
from mwdassay.models import RFParams
from mwdassay.synth import default_site_spec, generate_site
from mwdassay.validation import (
    ModelSpec,
    TargetSpec,
    bland_altman,
    confusion,
    fe_grade_class,
    linear_fit,
    make_folds,
    materialize_presence,
    pearson_p,
    pearson_r,
    qq_points,
    render_report,
    rmse,
    run_cv,
)


@pytest.fixture(scope="module")
def small_site():
    spec = default_site_spec(seed=21, n_blasts=6, holes_per_blast=10,
                             chem_coverage=0.5, material_coverage=0.5)
    dataset, truth = generate_site(spec)
    from mwdassay.datamodel import join
    chem = join([h for h, _ in dataset.holes],
                [r for _, r in dataset.holes if r is not None], "chemistry")
    return chem


class TestFolds:
    def test_balanced_random_folds(self, small_site):
        plan = make_folds(small_site, "random_kfold", k=5, seed=3)
        sizes = [len(plan.holes_in_fold(f)) for f in range(5)]
        assert max(sizes) - min(sizes) <= 1
        assert sum(sizes) == len(small_site)

    def test_spatial_folds_group_by_blast(self, small_site):
        plan = make_folds(small_site, "leave_one_blast_out", seed=0)
        blast_of = {h.hole_id: h.blast_id for h, _ in small_site.holes}
        blasts = {blast_of[h] for h in plan.assignments}
        assert plan.k == len(blasts)
        for f in range(plan.k):
            in_fold = {blast_of[h] for h in plan.holes_in_fold(f)}
            assert len(in_fold) == 1

    def test_deterministic_assignments(self, small_site):
        a = make_folds(small_site, "random_kfold", k=4, seed=9)
        b = make_folds(small_site, "random_kfold", k=4, seed=9)
        assert a.assignments == b.assignments

    def test_fold_errors(self, small_site):
        with pytest.raises(TooFewHoles):
            make_folds(small_site, "random_kfold", k=len(small_site) + 1)
        from mwdassay.datamodel import Dataset
        one_blast = Dataset(holes=tuple(
            (h, r) for h, r in small_site.holes if h.blast_id == "A000"))
        with pytest.raises(TooFewBlasts):
            make_folds(one_blast, "leave_one_blast_out")


class TestScalarStats:
    def test_pearson_exact_lines(self):
        a = np.array([1.0, 2.0, 4.0, 7.0])
        assert pearson_r(a, 2 * a + 3) == pytest.approx(1.0, abs=1e-15)
        assert pearson_r(a, -a) == pytest.approx(-1.0, abs=1e-15)

    def test_pearson_fixed_table_matches_oracle(self):
        a = [1.0, 2.0, 3.0, 5.0, 8.0]
        b = [2.1, 2.9, 4.2, 5.0, 9.1]
        assert pearson_r(a, b) == pytest.approx(oracles.o_pearson_r(a, b), rel=1e-12)

    def test_pearson_constant_input(self):
        with pytest.raises(ConstantInput):
            pearson_r([1.0, 1.0, 1.0], [1.0, 2.0, 3.0])

    @given(st.lists(st.floats(-100, 100), min_size=4, max_size=30),
           st.floats(0.001, 5), st.booleans(), st.floats(-10, 10))
    @settings(max_examples=50, deadline=None)
    def test_pearson_affine_covariance(self, a, mag, negate, d):
        c = -mag if negate else mag
        b = [2.0 * v + 1.0 + 0.01 * i for i, v in enumerate(a)]
        if len(set(a)) < 2 or len(set(b)) < 2 or max(a) - min(a) < 1e-6:
            return
        scaled = [c * v + d for v in b]
        if len(set(scaled)) < 2:
            return
        base = pearson_r(a, b)
        assert pearson_r(a, scaled) == pytest.approx(
            math.copysign(1.0, c) * base, abs=1e-12)

    def test_p_value_r_zero_is_one(self):
        assert pearson_p(0.0, 10) == pytest.approx(1.0, rel=1e-12)

    def test_p_value_against_integration(self):
        assert pearson_p(0.8, 5) == pytest.approx(0.10408800514650511, abs=1e-6)

    def test_p_monotone_in_r(self):
        for n in (5, 12, 40):
            ps = [pearson_p(r, n) for r in np.linspace(0.05, 0.95, 10)]
            assert all(p1 > p2 for p1, p2 in zip(ps, ps[1:]))

    def test_linear_fit_exact_and_constant(self):
        a = np.array([0.0, 1.0, 2.0, 3.0])
        slope, intercept = linear_fit(a, 2 * a + 3)
        assert slope == pytest.approx(2.0, abs=1e-12)
        assert intercept == pytest.approx(3.0, abs=1e-12)
        slope, intercept = linear_fit(a, np.full(4, 5.5))
        assert slope == pytest.approx(0.0, abs=1e-12)
        assert intercept == pytest.approx(5.5, abs=1e-12)

    def test_linear_fit_residual_orthogonality(self):
        rng = np.random.default_rng(2)
        a = rng.standard_normal(60)
        b = 1.7 * a + rng.standard_normal(60)
        slope, intercept = linear_fit(a, b)
        resid = b - (slope * a + intercept)
        assert abs(float(resid @ (a - a.mean()))) < 1e-9


class TestBlandAltman:
    def test_identity(self):
        s = bland_altman([1.0, 2.0, 3.0], [1.0, 2.0, 3.0])
        assert s.bias == 0.0 and s.rpc == 0.0
        assert s.r == pytest.approx(1.0)
        assert s.rmse == 0.0
        assert all(d == 0.0 for _, d in s.ba_pairs)

    def test_constant_offset(self):
        s = bland_altman([1.0, 2.0, 3.0], [2.0, 3.0, 4.0])
        assert s.bias == pytest.approx(-1.0, abs=1e-12)
        assert s.rpc == pytest.approx(0.0, abs=1e-12)

    @given(st.floats(-10, 10))
    @settings(max_examples=30, deadline=None)
    def test_offset_property(self, delta):
        lab = np.array([50.0, 55.0, 60.0, 62.0])
        s = bland_altman(lab, lab + delta)
        assert s.bias == pytest.approx(-delta, abs=1e-9)
        assert s.rpc == pytest.approx(0.0, abs=1e-9)

    def test_fixed_table_matches_oracle(self):
        lab = [61.2, 58.4, 49.9, 63.0, 55.5, 60.1]
        pred = [60.0, 59.2, 51.3, 61.8, 54.9, 60.5]
        s = bland_altman(lab, pred)
        want = oracles.o_bland_altman(lab, pred)
        assert s.bias == pytest.approx(want["bias"], rel=1e-12, abs=1e-12)
        assert s.rpc == pytest.approx(want["rpc"], rel=1e-12)
        assert s.cv_percent == pytest.approx(want["cv_percent"], rel=1e-12)
        assert s.rmse == pytest.approx(want["rmse"], rel=1e-12)
        assert s.r == pytest.approx(oracles.o_pearson_r(lab, pred), rel=1e-12)
        slope, intercept = oracles.o_linear_fit(lab, pred)
        assert s.slope == pytest.approx(slope, rel=1e-12)
        assert s.intercept == pytest.approx(intercept, rel=1e-12)
        for got, exp in zip(s.ba_pairs, want["pairs"]):
            assert got == pytest.approx(exp, rel=1e-12)

    def test_constant_inputs_flagged(self):
        s = bland_altman([5.0, 5.0, 5.0], [5.0, 5.0, 5.0])
        assert not s.r_defined and math.isnan(s.r)
        assert not s.fit_defined
        assert s.rmse == 0.0

    def test_length_mismatch(self):
        with pytest.raises(LengthMismatch):
            bland_altman([1.0, 2.0], [1.0])


class TestQQ:
    def test_sample_vs_itself_diagonal(self):
        rng = np.random.default_rng(4)
        x = rng.standard_normal(40)
        pts = qq_points(x, x)
        assert np.allclose(pts[:, 0], pts[:, 1], rtol=0, atol=0)

    def test_normal_sample_close_to_diagonal(self):
        x = np.random.default_rng(8).standard_normal(10_000)
        pts = qq_points(x, "normal")
        central = pts[500:9500]
        assert float(np.max(np.abs(central[:, 0] - central[:, 1]))) < 0.1

    def test_different_distributions_curve_away(self):
        rng = np.random.default_rng(9)
        uniform = rng.uniform(0, 1, 4000)
        exponential = rng.exponential(1.0, 4000)
        pts = qq_points(exponential, uniform)
        assert float(np.max(np.abs(pts[:, 0] - pts[:, 1]))) > 0.2


class TestClassificationHelpers:
    def test_grade_boundaries(self):
        assert fe_grade_class(49.9) == "waste"
        assert fe_grade_class(50.0) == "med"
        assert fe_grade_class(59.999) == "med"
        assert fe_grade_class(60.0) == "high"

    def test_presence_strictness(self):
        rec = LabelRecord("H1", {}, {"SHL": 5.0, "BIF": 0.0})
        assert materialize_presence(rec, "SHL", 0.0) is True
        assert materialize_presence(rec, "BIF", 0.0) is False
        assert materialize_presence(rec, "SHL", 5.0) is False
        with pytest.raises(CodeMissing):
            materialize_presence(rec, "GOL", 0.0)

    def test_confusion_counts(self):
        same = confusion([1, 0, 1], [1, 0, 1])
        assert (same.fp, same.fn) == (0, 0) and same.accuracy == 1.0
        flipped = confusion([0, 1, 0], [1, 0, 1])
        assert (flipped.tn, flipped.tp) == (0, 0) and flipped.accuracy == 0.0
        pred = [1, 0, 1, 1, 0, 0, 1, 0]
        true = [1, 0, 0, 1, 0, 1, 1, 1]
        m = confusion(pred, true)
        assert (m.tn, m.fp, m.fn, m.tp) == (2, 1, 2, 3)
        assert m.accuracy == pytest.approx(5 / 8)
        assert m.n == 8
        inverted = confusion([1 - p for p in pred], [1 - t for t in true])
        assert inverted.accuracy == m.accuracy


class TestRunCV:
    def test_pooled_stats_match_recomputation(self, small_site):
        plan = make_folds(small_site, "random_kfold", k=4, seed=2)
        report = run_cv(small_site, TargetSpec("assay", "Fe"),
                        ModelSpec("rf", RFParams(n_trees=20, seed=5)), plan)
        again = bland_altman(np.array(report.lab), np.array(report.pred))
        assert report.stats.r == again.r
        assert report.stats.rmse == again.rmse
        assert set(report.hole_ids) == set(small_site.hole_ids())

    def test_constant_target_flagged(self, small_site):
        # 0.125 is dyadic: leaf means reproduce it bit-exactly
        constant = _with_constant_assay(small_site, "S", 0.125)
        plan = make_folds(constant, "random_kfold", k=3, seed=1)
        report = run_cv(constant, TargetSpec("assay", "S"),
                        ModelSpec("rf", RFParams(n_trees=5, seed=1)), plan)
        assert report.stats.rmse == 0.0
        assert not report.stats.r_defined and math.isnan(report.stats.r)

    def test_augment_equals_target_rejected(self, small_site):
        plan = make_folds(small_site, "random_kfold", k=3, seed=1)
        with pytest.raises(AugmentEqualsTarget):
            run_cv(small_site, TargetSpec("assay", "Fe"),
                   ModelSpec("rf", RFParams(n_trees=5)), plan, augment="Fe")

    def test_report_render_stable(self, small_site):
        plan = make_folds(small_site, "random_kfold", k=3, seed=7)
        spec = ModelSpec("rf", RFParams(n_trees=10, seed=3))
        r1 = run_cv(small_site, TargetSpec("assay", "Fe"), spec, plan)
        r2 = run_cv(small_site, TargetSpec("assay", "Fe"), spec, plan)
        assert render_report(r1) == render_report(r2)
        text = render_report(r1)
        assert "[stats]" in text and "[pairs]" in text and "[folds]" in text


def _with_constant_assay(dataset, code, value):
    from mwdassay.datamodel import Dataset
    pairs = []
    for hole, rec in dataset.holes:
        assays = dict(rec.assays)
        assays[code] = value
        pairs.append((hole, LabelRecord(hole.hole_id, assays, dict(rec.materials))))
    return Dataset(holes=tuple(pairs), region_tag=dataset.region_tag)


def test_rmse_helper():
    assert rmse([1.0, 2.0], [1.0, 2.0]) == 0.0
    assert rmse([0.0, 0.0], [3.0, 4.0]) == pytest.approx(math.sqrt(12.5))
