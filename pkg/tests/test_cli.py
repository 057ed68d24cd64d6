"""Command-line behaviour: artifacts, annotations, exit codes, reruns."""

import xml.etree.ElementTree as ET
from pathlib import Path

import pytest

from mwdassay.cli import main

GEN = ["generate", "--seed", "5", "--blasts", "6", "--holes", "8",
       "--depth", "6.0"]


@pytest.fixture(scope="module")
def site_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("site")
    assert main(GEN + ["--out", str(out)]) == 0
    return out


@pytest.fixture(scope="module")
def features_dir(tmp_path_factory, site_dir):
    out = tmp_path_factory.mktemp("features")
    assert main(["features", "--mwd", str(site_dir / "mwd.csv"),
                 "--out", str(out)]) == 0
    return out


def test_generate_writes_expected_files(site_dir):
    mwd = (site_dir / "mwd.csv").read_text().splitlines()
    labels = (site_dir / "labels.csv").read_text().splitlines()
    truth = (site_dir / "truth.csv").read_text().splitlines()
    n_holes = 6 * 8
    n_samples = 60
    assert len(mwd) == 2 + n_holes * n_samples  # config line + header + rows
    assert len(truth) == len(mwd)
    labelled = len(labels) - 2
    assert 0 < labelled < n_holes
    assert mwd[0].startswith("# mwdassay v")
    assert (site_dir / "site_spec.json").exists()


def test_generate_zero_noise_truth_equals_mwd(tmp_path):
    out = tmp_path / "quiet"
    assert main(["generate", "--seed", "2", "--blasts", "2", "--holes", "3",
                 "--depth", "4.0", "--signal-noise", "0", "--blast-bias", "0",
                 "--out", str(out)]) == 0
    mwd = (out / "mwd.csv").read_text()
    truth = (out / "truth.csv").read_text()
    assert mwd == truth


def test_generate_rerun_byte_identical(tmp_path, site_dir):
    again = tmp_path / "again"
    assert main(GEN + ["--out", str(again)]) == 0
    for name in ("mwd.csv", "labels.csv", "truth.csv", "site_spec.json"):
        assert (again / name).read_bytes() == (site_dir / name).read_bytes()


def test_features_header_and_determinism(features_dir, site_dir, tmp_path):
    lines = (features_dir / "features.csv").read_text().splitlines()
    header = lines[1].split(",")
    assert header[0] == "hole_id"
    assert len(header) == 1 + 11 * 15 + 7
    assert "torque__hjorth_activity" in header
    assert "pressureRatio__maxpr_maxfob" in header
    again = tmp_path / "feat2"
    assert main(["features", "--mwd", str(site_dir / "mwd.csv"),
                 "--out", str(again)]) == 0
    assert (again / "features.csv").read_bytes() == \
        (features_dir / "features.csv").read_bytes()


def _evaluate(site_dir, features_dir, out, target, extra=()):
    return main(["evaluate",
                 "--features", str(features_dir / "features.csv"),
                 "--labels", str(site_dir / "labels.csv"),
                 "--target", target, "--seed", "3", "--trees", "15",
                 "--k", "3", "--out", str(out), *extra])


def test_evaluate_regression_artifacts(site_dir, features_dir, tmp_path):
    out = tmp_path / "eval_fe"
    assert _evaluate(site_dir, features_dir, out, "Fe") == 0
    expected = ["report.txt", "pairs.csv", "bland_altman.svg",
                "residual_hist.svg", "qq.svg"]
    for name in expected:
        assert (out / name).exists(), name
    assert (out / "residuals_by_grade.svg").exists()  # Fe-specific chart
    for svg in out.glob("*.svg"):
        ET.fromstring(svg.read_text())


def test_evaluate_annotations_match_report(site_dir, features_dir, tmp_path):
    out = tmp_path / "eval_match"
    assert _evaluate(site_dir, features_dir, out, "SiO2") == 0
    report = (out / "report.txt").read_text()
    svg = (out / "bland_altman.svg").read_text()
    stats = {}
    for line in report.splitlines():
        if ":" in line and not line.startswith(("#", "[")):
            key, _, value = line.partition(":")
            stats[key.strip()] = value.strip()
    assert f"r: {stats['r']}" in svg
    assert f"RMSE: {stats['rmse']}" in svg
    assert f"RPC: {stats['rpc']}" in svg
    assert f"CV: {stats['cv_percent']}%" in svg


def test_evaluate_classification_artifacts(site_dir, features_dir, tmp_path):
    out = tmp_path / "eval_mat"
    code = _logged_material(site_dir)
    assert _evaluate(site_dir, features_dir, out, code,
                     ("--model", "svm")) == 0
    svg = (out / "confusion.svg").read_text()
    assert "1 - Material does not exist, 2 - Material exist" in svg
    assert "[confusion]" in (out / "report.txt").read_text()


def _logged_material(site_dir):
    """First material code with both presence states in the labels file."""
    lines = [ln for ln in (site_dir / "labels.csv").read_text().splitlines()
             if not ln.startswith("#")]
    header = lines[0].split(",")
    from mwdassay.datamodel import MATERIAL_CODES
    for code in MATERIAL_CODES:
        idx = header.index(code)
        seen = {ln.split(",")[idx] for ln in lines[1:]} - {""}
        values = {float(v) > 0 for v in seen}
        if len(values) == 2:
            return code
    raise AssertionError("no material with both classes")


def test_evaluate_spatial_requires_mwd(site_dir, features_dir, tmp_path):
    out = tmp_path / "eval_spatial"
    code = _evaluate(site_dir, features_dir, out, "Fe", ("--cv", "spatial"))
    assert code == 2
    assert _evaluate(site_dir, features_dir, out, "Fe",
                     ("--cv", "spatial", "--mwd", str(site_dir / "mwd.csv"))) == 0


def test_evaluate_rerun_byte_identical(site_dir, features_dir, tmp_path):
    a = tmp_path / "a"
    b = tmp_path / "b"
    assert _evaluate(site_dir, features_dir, a, "Fe") == 0
    assert _evaluate(site_dir, features_dir, b, "Fe") == 0
    for name in ("report.txt", "pairs.csv", "bland_altman.svg"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_unknown_target_is_config_error(site_dir, features_dir, tmp_path):
    assert _evaluate(site_dir, features_dir, tmp_path / "x", "Gold") == 2


def test_missing_input_is_config_error(tmp_path):
    code = main(["features", "--mwd", str(tmp_path / "nope.csv"),
                 "--out", str(tmp_path / "o")])
    assert code == 2


def test_malformed_csv_is_data_error(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("hole_id,blast_id\nH1,B1\n")
    assert main(["features", "--mwd", str(bad),
                 "--out", str(tmp_path / "o")]) == 3


def test_importance_outputs(site_dir, features_dir, tmp_path):
    out = tmp_path / "imp"
    assert main(["importance",
                 "--features", str(features_dir / "features.csv"),
                 "--labels", str(site_dir / "labels.csv"),
                 "--target", "Fe", "--seed", "1", "--trees", "20",
                 "--out", str(out)]) == 0
    lines = [ln for ln in (out / "importance.csv").read_text().splitlines()
             if ln and not ln.startswith(("#", "rank"))]
    total = sum(float(ln.split(",")[2]) for ln in lines)
    assert total == pytest.approx(1.0, abs=1e-9)
    txt = (out / "importance.txt").read_text()
    ranked = [ln.split(",")[1] for ln in lines[:10]]
    for name in ranked:
        assert name in txt
