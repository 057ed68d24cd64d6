"""Parsing, serialization, and join semantics."""

import logging

import pytest
from hypothesis import given, settings, strategies as st

from mwdassay.datamodel import (
    MWD_HEADER,
    Dataset,
    HoleSignalSet,
    LabelRecord,
    join,
    parse_labels_csv,
    parse_mwd_csv,
    serialize_labels_csv,
    serialize_mwd_csv,
)
from mwdassay.errors import (
    MissingColumn,
    NonFiniteSample,
    NonMonotonicDepth,
    PercentOutOfRange,
    RaggedSignals,
    UnknownColumn,
)


def make_mwd_csv(holes, fmt=repr):
    """Build a valid CSV: holes is {hole_id: (blast_id, n_rows)}."""
    lines = [",".join(MWD_HEADER)]
    for hole_id, (blast_id, n) in holes.items():
        for j in range(n):
            depth = (j + 1) * 0.1
            sig = [fmt(depth)] + [fmt(1.0 + 0.1 * j + k) for k in range(10)]
            lines.append(",".join([hole_id, blast_id, "10.0", "20.0"] + sig))
    return "\n".join(lines) + "\n"


def test_parse_two_holes_five_rows():
    text = make_mwd_csv({"H1": ("B1", 5), "H2": ("B1", 5)})
    holes = parse_mwd_csv(text)
    assert [h.hole_id for h in holes] == ["H1", "H2"]
    assert all(h.n_samples == 5 for h in holes)
    assert holes[0].blast_id == "B1"
    assert holes[0].signals["depth"] == (0.1, 0.2, 0.30000000000000004, 0.4, 0.5)


def test_parse_repeated_depth_rejected():
    text = make_mwd_csv({"H1": ("B1", 3)})
    lines = text.splitlines()
    lines[2] = lines[1]  # duplicate first sample row: depth repeats
    with pytest.raises(NonMonotonicDepth):
        parse_mwd_csv("\n".join(lines))


def test_parse_off_grid_step_rejected():
    text = make_mwd_csv({"H1": ("B1", 3)})
    lines = text.splitlines()
    cells = lines[3].split(",")
    cells[4] = "0.45"  # 0.25 step from 0.2, outside the 10% grid tolerance
    lines[3] = ",".join(cells)
    with pytest.raises(NonMonotonicDepth):
        parse_mwd_csv("\n".join(lines))


def test_parse_missing_torque_column():
    text = make_mwd_csv({"H1": ("B1", 3)})
    lines = text.splitlines()
    cols = lines[0].split(",")
    drop = cols.index("torque")
    out = [",".join(c for i, c in enumerate(ln.split(",")) if i != drop)
           for ln in lines]
    with pytest.raises(MissingColumn, match="torque"):
        parse_mwd_csv("\n".join(out))


def test_parse_short_row_is_ragged():
    text = make_mwd_csv({"H1": ("B1", 3)})
    lines = text.splitlines()
    lines[2] = ",".join(lines[2].split(",")[:-1])
    with pytest.raises(RaggedSignals):
        parse_mwd_csv("\n".join(lines))


def test_parse_non_finite_sample():
    text = make_mwd_csv({"H1": ("B1", 3)})
    with pytest.raises(NonFiniteSample):
        parse_mwd_csv(text.replace("1.1", "nan"))


def test_labels_basic_row():
    recs = parse_labels_csv("hole_id,Fe,Al2O3\nH1,61.2,2.1\n")
    assert recs == [LabelRecord("H1", {"Fe": 61.2, "Al2O3": 2.1}, {})]


def test_labels_empty_cell_absent():
    recs = parse_labels_csv("hole_id,Fe,Al2O3\nH1,,2.1\n")
    assert "Fe" not in recs[0].assays
    assert recs[0].assays["Al2O3"] == 2.1


def test_labels_material_out_of_range():
    with pytest.raises(PercentOutOfRange):
        parse_labels_csv("hole_id,SHL\nH1,105\n")


def test_labels_unknown_column():
    with pytest.raises(UnknownColumn):
        parse_labels_csv("hole_id,Fe,Unobtanium\nH1,61.2,3\n")


def _hole(hole_id, blast="B1"):
    return parse_mwd_csv(make_mwd_csv({hole_id: (blast, 4)}))[0]


def test_join_modes_and_counts():
    holes = [_hole(f"H{i}") for i in range(10)]
    labels = []
    for i in range(4):
        mats = {"SHL": 5.0} if i < 2 else {}
        labels.append(LabelRecord(f"H{i}", {"Fe": 50.0 + i}, mats))
    labels.append(LabelRecord("H8", {}, {"SHL": 1.0}))
    # chemistry: H0..H3; materials: H0, H1, H8; both: H0, H1
    assert len(join(holes, labels, "chemistry")) == 4
    assert len(join(holes, labels, "material")) == 3
    both = join(holes, labels, "both")
    assert len(both) == 2
    chem_ids = set(join(holes, labels, "chemistry").hole_ids())
    mat_ids = set(join(holes, labels, "material").hole_ids())
    assert set(both.hole_ids()) <= chem_ids
    assert set(both.hole_ids()) <= mat_ids


def test_join_unknown_hole_id_logged(caplog):
    holes = [_hole("H0")]
    labels = [LabelRecord("H0", {"Fe": 50.0}, {}),
              LabelRecord("GHOST", {"Fe": 1.0}, {})]
    with caplog.at_level(logging.WARNING):
        ds = join(holes, labels, "chemistry")
    assert len(ds) == 1
    assert any("dropped 1 label" in rec.message for rec in caplog.records)


def test_join_coverage_counts_from_generator():
    from mwdassay.synth import default_site_spec, generate_site

    spec = default_site_spec(seed=5, n_blasts=8, holes_per_blast=12,
                             chem_coverage=0.25, material_coverage=1 / 6)
    dataset, _ = generate_site(spec)
    holes = [h for h, _ in dataset.holes]
    labels = [r for _, r in dataset.holes if r is not None]
    n = len(dataset)
    assert abs(len(join(holes, labels, "chemistry")) - n / 4) <= 1
    assert abs(len(join(holes, labels, "material")) - n / 6) <= 1


@given(st.lists(st.floats(min_value=-1e6, max_value=1e6,
                          allow_nan=False, allow_infinity=False),
                min_size=30, max_size=30))
@settings(max_examples=25, deadline=None)
def test_round_trip_nine_significant_digits(values):
    cells = [float(f"{v:.9g}") for v in values]
    text = make_mwd_csv({"H1": ("B1", 3)})
    lines = text.splitlines()
    for r in range(3):
        parts = lines[1 + r].split(",")
        parts[5:] = [repr(cells[r * 10 + k]) for k in range(10)]
        lines[1 + r] = ",".join(parts)
    first = parse_mwd_csv("\n".join(lines))
    second = parse_mwd_csv(serialize_mwd_csv(first))
    assert first == second


def test_labels_round_trip():
    recs = [LabelRecord("H1", {"Fe": 61.2, "P": 0.035}, {"SHL": 12.5}),
            LabelRecord("H2", {"Al2O3": 2.25}, {})]
    assert parse_labels_csv(serialize_labels_csv(recs)) == recs


def test_dataset_rejects_duplicate_ids():
    h = _hole("H1")
    with pytest.raises(ValueError, match="duplicate"):
        Dataset(holes=((h, None), (h, None)))


def test_hole_requires_all_signals():
    h = _hole("H1")
    partial = dict(h.signals)
    partial.pop("sed")
    with pytest.raises(ValueError, match="11 logged"):
        HoleSignalSet(hole_id="H1", blast_id="B", collar_x=0, collar_y=0,
                      depth_step=0.1, signals=partial, hole_depth=0.4)
