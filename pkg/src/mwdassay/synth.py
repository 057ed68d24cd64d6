"""Synthetic layered-stratigraphy site generator.

Stands in for proprietary mine data: each blast gets a layered material
column; per-sample signals are simple monotone functions of the local material
hardness (affine response plus saturation) with Gaussian sample noise and a
per-blast bias; per-hole assay labels are the depth-weighted mean of the layer
signatures plus a shared per-(hole, layer) grade draw scaled by each
signature's spread (the spread sign sets the loading, which is how assays end
up cross-correlated). The per-blast bias is the designed mechanism that makes
leave-one-blast-out validation harder than random folds.

Everything is deterministic per seed; the noiseless per-sample values and
per-hole mixtures are retained as ground truth.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, asdict

import numpy as np

from .datamodel import ASSAY_CODES, Dataset, HoleSignalSet, LabelRecord
from .errors import InvalidSpec, MismatchedProvenance
from .validation import EvaluationReport, pearson_r, rmse

#: Affine hardness response per signal: (base level, slope vs hardness).
#: Positive slopes rise in hard rock; rop and rotationRPM fall.
SIGNAL_RESPONSE = {
    "rotationRPM": (90.0, -6.0),
    "airPressure": (300.0, 0.0),
    "feedPressure": (35.0, 1.5),
    "torque": (8.0, 4.0),
    "rop": (30.0, -7.0),
    "fob": (120.0, 25.0),
    "rotationPressure": (40.0, 10.0),
    "apr": (24.0, -5.6),
    "sed": (20.0, 12.0),
}
#: Signal floor applied after noise (keeps rates physical).
SIGNAL_FLOOR = {"rop": 2.0, "apr": 1.6, "feedPressure": 1.0}
#: Characteristic scale per signal used to size noise and blast bias:
#: the dynamic range over hardness 0.5..3, or an arbitrary span for flat ones.
_H_SPAN = 2.5
SIGNAL_SCALE = {name: (abs(slope) * _H_SPAN if slope else 20.0)
                for name, (_, slope) in SIGNAL_RESPONSE.items()}


@dataclass(frozen=True)
class MaterialSpec:
    """One rock type: drilling hardness and its assay signature.

    assay_signature maps assay code to (mean mass %, spread); |spread| is the
    per-hole standard deviation and its sign the loading on the shared grade
    draw.
    """

    code: str
    hardness: float
    assay_signature: dict[str, tuple[float, float]]

    def __post_init__(self):
        if self.hardness <= 0:
            raise InvalidSpec(f"material {self.code}: hardness must be > 0")
        for code, (mean, _) in self.assay_signature.items():
            if code not in ASSAY_CODES:
                raise InvalidSpec(f"material {self.code}: unknown assay {code}")
            if mean < 0:
                raise InvalidSpec(f"material {self.code}: negative {code} mean")
        majors = sum(self.assay_signature.get(c, (0.0, 0.0))[0]
                     for c in ("Fe", "SiO2", "Al2O3"))
        if majors > 100:
            raise InvalidSpec(f"material {self.code}: Fe+SiO2+Al2O3 means exceed 100")


@dataclass(frozen=True)
class LayerColumn:
    """Stratigraphy under one blast: interior boundaries and a material code
    per layer (len(materials) == len(boundaries) + 1)."""

    boundaries: tuple[float, ...]
    materials: tuple[str, ...]


@dataclass(frozen=True)
class SiteSpec:
    n_blasts: int
    holes_per_blast: int
    hole_depth: float
    depth_step: float
    materials: tuple[MaterialSpec, ...]
    columns: tuple[LayerColumn, ...]
    signal_noise: float
    blast_bias: float
    chem_coverage: float
    material_coverage: float
    seed: int

    def __post_init__(self):
        if self.n_blasts < 1 or self.holes_per_blast < 1:
            raise InvalidSpec("need at least one blast and one hole per blast")
        if self.depth_step <= 0 or self.hole_depth < 2 * self.depth_step:
            raise InvalidSpec("hole_depth must cover at least two depth steps")
        for frac, name in ((self.chem_coverage, "chem"), (self.material_coverage, "material")):
            if not 0 < frac <= 1:
                raise InvalidSpec(f"{name} coverage must be in (0, 1], got {frac}")
        if self.signal_noise < 0 or self.blast_bias < 0:
            raise InvalidSpec("noise levels must be >= 0")
        if len(self.columns) != self.n_blasts:
            raise InvalidSpec(f"{len(self.columns)} columns for {self.n_blasts} blasts")
        codes = {m.code for m in self.materials}
        if len(codes) != len(self.materials):
            raise InvalidSpec("duplicate material codes")
        for col in self.columns:
            if len(col.materials) != len(col.boundaries) + 1:
                raise InvalidSpec("column needs one material per layer")
            if list(col.boundaries) != sorted(col.boundaries):
                raise InvalidSpec("column boundaries must be sorted")
            if col.boundaries and not (0 < col.boundaries[0] and
                                       col.boundaries[-1] < self.hole_depth):
                raise InvalidSpec("column boundaries must lie inside (0, hole_depth)")
            for code in col.materials:
                if code not in codes:
                    raise InvalidSpec(f"column references unknown material {code}")

    @property
    def n_samples(self) -> int:
        return int(round(self.hole_depth / self.depth_step))

    def material_by_code(self) -> dict[str, MaterialSpec]:
        return {m.code: m for m in self.materials}

    def to_json(self) -> str:
        doc = asdict(self)
        doc["materials"] = [
            {"code": m.code, "hardness": m.hardness,
             "assay_signature": {k: list(v) for k, v in m.assay_signature.items()}}
            for m in self.materials]
        doc["columns"] = [{"boundaries": list(c.boundaries),
                           "materials": list(c.materials)} for c in self.columns]
        return json.dumps(doc, sort_keys=True, indent=1)


def site_spec_from_json(text: str) -> SiteSpec:
    doc = json.loads(text)
    materials = tuple(
        MaterialSpec(code=m["code"], hardness=m["hardness"],
                     assay_signature={k: (v[0], v[1])
                                      for k, v in m["assay_signature"].items()})
        for m in doc["materials"])
    columns = tuple(
        LayerColumn(boundaries=tuple(c["boundaries"]),
                    materials=tuple(c["materials"])) for c in doc["columns"])
    return SiteSpec(
        n_blasts=doc["n_blasts"], holes_per_blast=doc["holes_per_blast"],
        hole_depth=doc["hole_depth"], depth_step=doc["depth_step"],
        materials=materials, columns=columns,
        signal_noise=doc["signal_noise"], blast_bias=doc["blast_bias"],
        chem_coverage=doc["chem_coverage"],
        material_coverage=doc["material_coverage"], seed=doc["seed"])


#: Default rock library. Hardness runs opposite to iron content so the
#: drilling response carries grade information; silica and alumina move
#: against iron (negative spreads share the same per-hole grade draw).
DEFAULT_MATERIALS = (
    MaterialSpec("SHL", 2.9, {"Fe": (20.0, 2.0), "SiO2": (45.0, -1.6), "Al2O3": (18.0, -1.2),
                              "P": (0.12, -0.01), "S": (0.05, 0.004), "Mn": (0.10, 0.01),
                              "MgO": (1.8, 0.1), "TiO2": (0.9, 0.05), "CaO": (1.2, 0.1),
                              "LOI": (7.0, 0.5)}),
    MaterialSpec("BIF", 2.5, {"Fe": (34.0, 2.0), "SiO2": (42.0, -1.6), "Al2O3": (3.0, -0.5),
                              "P": (0.03, -0.003), "S": (0.01, 0.001), "Mn": (0.05, 0.005),
                              "MgO": (0.3, 0.03), "TiO2": (0.1, 0.01), "CaO": (0.2, 0.02),
                              "LOI": (2.0, 0.2)}),
    MaterialSpec("SHF", 2.1, {"Fe": (44.0, 2.0), "SiO2": (22.0, -1.5), "Al2O3": (11.0, -1.0),
                              "P": (0.09, -0.008), "S": (0.03, 0.003), "Mn": (0.12, 0.01),
                              "MgO": (1.0, 0.08), "TiO2": (0.6, 0.04), "CaO": (0.8, 0.06),
                              "LOI": (6.0, 0.4)}),
    MaterialSpec("BPO", 1.8, {"Fe": (50.0, 1.8), "SiO2": (18.0, -1.4), "Al2O3": (5.0, -0.6),
                              "P": (0.05, -0.004), "S": (0.02, 0.002), "Mn": (0.08, 0.008),
                              "MgO": (0.4, 0.04), "TiO2": (0.2, 0.02), "CaO": (0.3, 0.03),
                              "LOI": (4.0, 0.3)}),
    MaterialSpec("GOL", 1.5, {"Fe": (55.0, 1.6), "SiO2": (8.0, -1.0), "Al2O3": (5.0, -0.6),
                              "P": (0.06, -0.005), "S": (0.02, 0.002), "Mn": (0.15, 0.01),
                              "MgO": (0.3, 0.03), "TiO2": (0.3, 0.02), "CaO": (0.4, 0.03),
                              "LOI": (9.0, 0.5)}),
    MaterialSpec("GMO", 1.2, {"Fe": (58.0, 1.5), "SiO2": (7.0, -0.9), "Al2O3": (3.5, -0.5),
                              "P": (0.05, -0.004), "S": (0.015, 0.0015), "Mn": (0.10, 0.01),
                              "MgO": (0.2, 0.02), "TiO2": (0.2, 0.02), "CaO": (0.3, 0.03),
                              "LOI": (8.0, 0.4)}),
    MaterialSpec("HGF", 0.9, {"Fe": (61.0, 1.4), "SiO2": (5.0, -0.8), "Al2O3": (2.8, -0.4),
                              "P": (0.04, -0.004), "S": (0.01, 0.001), "Mn": (0.07, 0.007),
                              "MgO": (0.15, 0.015), "TiO2": (0.15, 0.01), "CaO": (0.2, 0.02),
                              "LOI": (5.0, 0.3)}),
    MaterialSpec("HGM", 0.6, {"Fe": (63.0, 1.3), "SiO2": (4.0, -0.7), "Al2O3": (2.2, -0.3),
                              "P": (0.04, -0.003), "S": (0.01, 0.001), "Mn": (0.06, 0.006),
                              "MgO": (0.1, 0.01), "TiO2": (0.1, 0.01), "CaO": (0.15, 0.015),
                              "LOI": (3.0, 0.2)}),
)


def random_columns(n_blasts: int, hole_depth: float,
                   materials: tuple[MaterialSpec, ...],
                   rng: np.random.Generator,
                   min_layers: int = 2, max_layers: int = 4) -> tuple[LayerColumn, ...]:
    """Independent layered columns: 2-4 layers of comparable thickness, no
    immediate material repeats."""
    codes = [m.code for m in materials]
    columns = []
    for _ in range(n_blasts):
        n_layers = int(rng.integers(min_layers, max_layers + 1))
        shares = 0.5 + rng.random(n_layers)
        shares /= shares.sum()
        bounds = np.cumsum(shares)[:-1] * hole_depth
        picks = [int(rng.integers(len(codes)))]
        for _ in range(n_layers - 1):
            step = int(rng.integers(1, len(codes)))
            picks.append((picks[-1] + step) % len(codes))
        columns.append(LayerColumn(boundaries=tuple(round(float(b), 6) for b in bounds),
                                   materials=tuple(codes[i] for i in picks)))
    return tuple(columns)


def default_site_spec(seed: int = 0, n_blasts: int = 40, holes_per_blast: int = 50,
                      hole_depth: float = 12.0, depth_step: float = 0.1,
                      signal_noise: float = 0.1, blast_bias: float = 0.3,
                      chem_coverage: float = 0.25,
                      material_coverage: float = 1.0 / 6.0,
                      materials: tuple[MaterialSpec, ...] = DEFAULT_MATERIALS) -> SiteSpec:
    """The stock two-region site: 2 x 20 blasts of 50 holes, 12 m holes."""
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(
        entropy=seed, spawn_key=(0xC0,))))
    columns = random_columns(n_blasts, hole_depth, materials, rng)
    return SiteSpec(
        n_blasts=n_blasts, holes_per_blast=holes_per_blast, hole_depth=hole_depth,
        depth_step=depth_step, materials=materials, columns=columns,
        signal_noise=signal_noise, blast_bias=blast_bias,
        chem_coverage=chem_coverage, material_coverage=material_coverage, seed=seed)


@dataclass(frozen=True)
class GroundTruth:
    """Noiseless per-sample signals and per-hole mixtures kept by the generator."""

    site_seed: int
    signals: dict[str, dict[str, tuple[float, ...]]]  # hole -> signal -> samples
    assays: dict[str, dict[str, float]]               # hole -> assay -> mixture mean
    material_shares: dict[str, dict[str, float]]      # hole -> code -> depth share


def _blast_id(b: int, n_blasts: int) -> str:
    region = "A" if b < (n_blasts + 1) // 2 else "B"
    return f"{region}{b:03d}"


def _layer_index(col: LayerColumn, depths: np.ndarray) -> np.ndarray:
    return np.searchsorted(np.asarray(col.boundaries), depths, side="left")


def _layer_shares(col: LayerColumn, hole_depth: float) -> dict[str, float]:
    edges = [0.0, *col.boundaries, hole_depth]
    shares: dict[str, float] = {}
    for i, code in enumerate(col.materials):
        shares[code] = shares.get(code, 0.0) + (edges[i + 1] - edges[i]) / hole_depth
    return shares


def generate_site(spec: SiteSpec) -> tuple[Dataset, GroundTruth]:
    """Build the full dataset plus its ground truth. Deterministic per seed."""
    by_code = spec.material_by_code()
    n_samp = spec.n_samples
    depths = (np.arange(n_samp) + 1) * spec.depth_step
    n_holes = spec.n_blasts * spec.holes_per_blast

    root = np.random.SeedSequence(spec.seed)
    bias_ss, holes_ss, labels_ss, cover_ss = root.spawn(4)
    bias_rng = np.random.Generator(np.random.PCG64(bias_ss))
    hole_seeds = holes_ss.spawn(n_holes)
    label_seeds = labels_ss.spawn(n_holes)

    noisy_names = sorted(SIGNAL_RESPONSE)
    biases = {}
    for b in range(spec.n_blasts):
        draw = bias_rng.standard_normal(len(noisy_names))
        biases[b] = {name: spec.blast_bias * SIGNAL_SCALE[name] * float(e)
                     for name, e in zip(noisy_names, draw)}

    staged: list[tuple[HoleSignalSet, dict[str, float], dict[str, float]]] = []
    truth_signals: dict[str, dict[str, tuple[float, ...]]] = {}
    truth_assays: dict[str, dict[str, float]] = {}
    truth_shares: dict[str, dict[str, float]] = {}

    flat = 0
    for b in range(spec.n_blasts):
        col = spec.columns[b]
        blast_id = _blast_id(b, spec.n_blasts)
        layer_of = _layer_index(col, depths)
        hardness = np.array([by_code[col.materials[l]].hardness for l in layer_of])
        shares = _layer_shares(col, spec.hole_depth)
        cx = float((b % 8) * 120.0)
        cy = float((b // 8) * 150.0)
        for j in range(spec.holes_per_blast):
            hole_id = f"{blast_id}-H{j:03d}"
            rng = np.random.Generator(np.random.PCG64(hole_seeds[flat]))
            lab_rng = np.random.Generator(np.random.PCG64(label_seeds[flat]))
            flat += 1

            clean: dict[str, np.ndarray] = {}
            noisy: dict[str, np.ndarray] = {}
            for name in noisy_names:
                base, slope = SIGNAL_RESPONSE[name]
                level = base + slope * hardness
                floor = SIGNAL_FLOOR.get(name)
                if floor is not None:
                    level = np.maximum(level, floor)
                clean[name] = level
                eps = rng.standard_normal(n_samp)
                values = level + spec.signal_noise * SIGNAL_SCALE[name] * eps \
                    + biases[b][name]
                if floor is not None:
                    values = np.maximum(values, floor)
                noisy[name] = values
            clean["depth"] = depths
            noisy["depth"] = depths
            clean["duration"] = np.cumsum(spec.depth_step / np.maximum(clean["rop"], 0.5))
            noisy["duration"] = np.cumsum(spec.depth_step / np.maximum(noisy["rop"], 0.5))

            hole = HoleSignalSet(
                hole_id=hole_id, blast_id=blast_id,
                collar_x=cx + (j % 10) * 5.0, collar_y=cy + (j // 10) * 5.0,
                depth_step=spec.depth_step,
                signals={k: tuple(float(v) for v in noisy[k]) for k in noisy},
                hole_depth=n_samp * spec.depth_step)

            edges = [0.0, *col.boundaries, spec.hole_depth]
            widths = np.diff(edges) / spec.hole_depth
            grade = lab_rng.standard_normal(len(col.materials))
            assay_label: dict[str, float] = {}
            assay_truth: dict[str, float] = {}
            for code in ASSAY_CODES:
                mix = 0.0
                noisy_mix = 0.0
                defined = False
                for l, mat_code in enumerate(col.materials):
                    sig = by_code[mat_code].assay_signature.get(code)
                    if sig is None:
                        continue
                    defined = True
                    mean, spread = sig
                    mix += float(widths[l]) * mean
                    noisy_mix += float(widths[l]) * max(mean + spread * float(grade[l]), 0.0)
                if defined:
                    assay_truth[code] = mix
                    assay_label[code] = noisy_mix
            materials_label = {m.code: round(float(shares.get(m.code, 0.0)) * 100.0, 9)
                               for m in spec.materials}

            staged.append((hole, assay_label, materials_label))
            truth_signals[hole_id] = {k: tuple(float(v) for v in clean[k]) for k in clean}
            truth_assays[hole_id] = assay_truth
            truth_shares[hole_id] = {m.code: shares.get(m.code, 0.0)
                                     for m in spec.materials}

    cover_rng = np.random.Generator(np.random.PCG64(cover_ss))
    chem_n = int(round(n_holes * spec.chem_coverage))
    mat_n = int(round(n_holes * spec.material_coverage))
    chem_idx = set(int(i) for i in cover_rng.choice(n_holes, size=chem_n, replace=False))
    mat_idx = set(int(i) for i in cover_rng.choice(n_holes, size=mat_n, replace=False))

    final: list[tuple[HoleSignalSet, LabelRecord | None]] = []
    for i, (hole, assay_label, materials_label) in enumerate(staged):
        assays = assay_label if i in chem_idx else {}
        materials = materials_label if i in mat_idx else {}
        record = LabelRecord(hole_id=hole.hole_id, assays=assays,
                             materials=materials) if (assays or materials) else None
        final.append((hole, record))

    dataset = Dataset(holes=tuple(final), region_tag="synthetic")
    truth = GroundTruth(site_seed=spec.seed, signals=truth_signals,
                        assays=truth_assays, material_shares=truth_shares)
    return dataset, truth


def truth_serialize_csv(truth: GroundTruth, dataset: Dataset) -> str:
    """Per-sample noiseless values in the MWD CSV schema."""
    from .datamodel import serialize_mwd_csv

    clean_holes = []
    for hole, _ in dataset.holes:
        clean = truth.signals[hole.hole_id]
        clean_holes.append(HoleSignalSet(
            hole_id=hole.hole_id, blast_id=hole.blast_id,
            collar_x=hole.collar_x, collar_y=hole.collar_y,
            depth_step=hole.depth_step, signals=clean,
            hole_depth=hole.hole_depth))
    return serialize_mwd_csv(clean_holes)


def truth_check(dataset: Dataset, truth: GroundTruth,
                report: EvaluationReport) -> dict[str, float]:
    """Compare a report's pooled predictions against the noisy labels and the
    noiseless truth; returns r/rmse for both (regression targets)."""
    ids = set(dataset.hole_ids())
    labels = {h.hole_id: rec for h, rec in dataset.holes if rec is not None}
    for hid, lab_value in zip(report.hole_ids, report.lab):
        if hid not in ids or hid not in truth.assays:
            raise MismatchedProvenance(f"report hole {hid} unknown to this site")
        rec = labels.get(hid)
        if report.target.kind == "assay":
            recorded = None if rec is None else rec.assays.get(report.target.code)
        else:
            recorded = None
            if rec is not None and report.target.code in rec.materials:
                recorded = float(rec.materials[report.target.code]
                                 > report.target.threshold)
        if recorded is None or recorded != lab_value:
            raise MismatchedProvenance(
                f"report label for {hid} does not match this dataset")
    pred = np.asarray(report.pred)
    lab = np.asarray(report.lab)
    if report.target.kind == "assay":
        code = report.target.code
        tvals = np.array([truth.assays[h][code] for h in report.hole_ids])
        return {
            "r_vs_labels": pearson_r(lab, pred),
            "rmse_vs_labels": rmse(lab, pred),
            "r_vs_truth": pearson_r(tvals, pred),
            "rmse_vs_truth": rmse(tvals, pred),
        }
    code = report.target.code
    tpres = np.array([truth.material_shares[h][code] > report.target.threshold / 100.0
                      for h in report.hole_ids])
    pres = pred > 0.5
    labp = lab > 0.5
    return {
        "accuracy_vs_labels": float(np.mean(pres == labp)),
        "accuracy_vs_truth": float(np.mean(pres == tpres)),
    }
