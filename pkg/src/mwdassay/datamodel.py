"""Typed containers for drilling signals and per-hole labels, CSV I/O, joins.

The MWD CSV layout is one row per 0.1 m depth sample:

    hole_id,blast_id,collar_x,collar_y,depth,duration,rotationRPM,airPressure,
    feedPressure,torque,rop,fob,rotationPressure,apr,sed

The labels CSV is one row per hole: ``hole_id,<assay codes...>,<material
codes...>`` with empty cells meaning "not measured" (never zero). UTF-8,
comma separated, ``.`` decimal point, first row is the header.
"""

from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import dataclass, field

from .errors import (
    MissingColumn,
    NegativeAssay,
    NonFiniteSample,
    NonMonotonicDepth,
    PercentOutOfRange,
    RaggedSignals,
    UnknownColumn,
)

log = logging.getLogger(__name__)

#: The eleven logged drill parameters, in canonical order. ``depth`` doubles as
#: the sample grid; the rotation/feed pressure ratio is derived, never stored.
SIGNAL_NAMES = (
    "duration",
    "depth",
    "rotationRPM",
    "airPressure",
    "feedPressure",
    "torque",
    "rop",
    "fob",
    "rotationPressure",
    "apr",
    "sed",
)

#: Laboratory assay codes (mass %).
ASSAY_CODES = ("Al2O3", "Fe", "SiO2", "P", "S", "Mn", "MgO", "TiO2", "CaO", "LOI")

#: Material type codes logged by geologists.
MATERIAL_CODES = ("SHL", "BIF", "BPO", "GOL", "HGM", "HGF", "SHF", "GMO")

MWD_HEADER = (
    "hole_id",
    "blast_id",
    "collar_x",
    "collar_y",
    "depth",
    "duration",
    "rotationRPM",
    "airPressure",
    "feedPressure",
    "torque",
    "rop",
    "fob",
    "rotationPressure",
    "apr",
    "sed",
)

#: Tolerated deviation of a depth increment from depth_step (fraction).
DEPTH_GRID_TOLERANCE = 0.10


@dataclass(frozen=True)
class HoleSignalSet:
    """One blast-hole's depth-indexed MWD record plus collar metadata."""

    hole_id: str
    blast_id: str
    collar_x: float
    collar_y: float
    depth_step: float
    signals: dict[str, tuple[float, ...]]
    hole_depth: float

    def __post_init__(self):
        if self.depth_step <= 0:
            raise ValueError(f"depth_step must be > 0, got {self.depth_step}")
        if set(self.signals) != set(SIGNAL_NAMES):
            missing = set(SIGNAL_NAMES) - set(self.signals)
            extra = set(self.signals) - set(SIGNAL_NAMES)
            raise ValueError(f"signal names must be exactly the 11 logged parameters "
                             f"(missing={sorted(missing)}, extra={sorted(extra)})")
        lengths = {len(v) for v in self.signals.values()}
        if len(lengths) != 1:
            raise RaggedSignals(f"hole {self.hole_id}: unequal signal lengths {sorted(lengths)}")
        n = lengths.pop()
        if n < 2:
            raise ValueError(f"hole {self.hole_id}: need at least 2 samples, got {n}")
        if abs(n * self.depth_step - self.hole_depth) > self.depth_step:
            raise ValueError(f"hole {self.hole_id}: N*depth_step = {n * self.depth_step} "
                             f"inconsistent with hole_depth = {self.hole_depth}")
        for name, seq in self.signals.items():
            for v in seq:
                if not math.isfinite(v):
                    raise NonFiniteSample(f"hole {self.hole_id}: non-finite {name} sample")

    @property
    def n_samples(self) -> int:
        return len(self.signals["depth"])


@dataclass(frozen=True)
class LabelRecord:
    """Per-hole targets: assay mass percentages and logged material percentages."""

    hole_id: str
    assays: dict[str, float] = field(default_factory=dict)
    materials: dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if not self.assays and not self.materials:
            raise ValueError(f"hole {self.hole_id}: label record is empty")
        for code, v in self.assays.items():
            if not math.isfinite(v):
                raise NonFiniteSample(f"hole {self.hole_id}: non-finite assay {code}")
            if v < 0:
                raise NegativeAssay(f"hole {self.hole_id}: assay {code} = {v}")
        for code, v in self.materials.items():
            if not math.isfinite(v) or not 0 <= v <= 100:
                raise PercentOutOfRange(f"hole {self.hole_id}: material {code} = {v}")


@dataclass(frozen=True)
class Dataset:
    """Holes with optional labels. Immutable once constructed."""

    holes: tuple[tuple[HoleSignalSet, LabelRecord | None], ...]
    region_tag: str = ""

    def __post_init__(self):
        seen = set()
        for hole, record in self.holes:
            if hole.hole_id in seen:
                raise ValueError(f"duplicate hole_id {hole.hole_id}")
            seen.add(hole.hole_id)
            if record is not None and record.hole_id != hole.hole_id:
                raise ValueError(f"label for {record.hole_id} attached to hole {hole.hole_id}")

    def __len__(self) -> int:
        return len(self.holes)

    def hole_ids(self) -> list[str]:
        return [h.hole_id for h, _ in self.holes]


def _parse_float(cell: str, context: str) -> float:
    try:
        v = float(cell)
    except ValueError:
        raise NonFiniteSample(f"{context}: unparseable value {cell!r}") from None
    if not math.isfinite(v):
        raise NonFiniteSample(f"{context}: non-finite value {cell!r}")
    return v


def _comment_free(text: str | io.TextIOBase):
    lines = text.splitlines() if isinstance(text, str) else text
    return (ln for ln in lines if not ln.lstrip().startswith("#"))


def parse_mwd_csv(text: str | io.TextIOBase, depth_step: float = 0.1) -> list[HoleSignalSet]:
    """Parse an MWD CSV stream into one HoleSignalSet per hole.

    Rows must be grouped by hole_id and ordered by depth; the depth column must
    increase by depth_step within each hole (10% grid tolerance, no resampling).
    Lines starting with '#' (the emitted config header) are skipped.
    """
    reader = csv.reader(_comment_free(text))
    try:
        header = next(reader)
    except StopIteration:
        raise MissingColumn("empty file") from None
    header = [h.strip() for h in header]
    for col in MWD_HEADER:
        if col not in header:
            raise MissingColumn(col)
    idx = {col: header.index(col) for col in MWD_HEADER}

    holes: list[HoleSignalSet] = []
    current: str | None = None
    rows: list[list[str]] = []
    seen_ids: set[str] = set()

    def flush():
        if current is None:
            return
        if current in seen_ids:
            raise NonMonotonicDepth(f"hole {current}: rows are not contiguous in the file")
        seen_ids.add(current)
        depths = [_parse_float(r[idx["depth"]], f"hole {current} depth") for r in rows]
        for j in range(1, len(depths)):
            step = depths[j] - depths[j - 1]
            if step <= 0:
                raise NonMonotonicDepth(f"hole {current}: depth {depths[j]} after {depths[j - 1]}")
            if abs(step - depth_step) > DEPTH_GRID_TOLERANCE * depth_step:
                raise NonMonotonicDepth(
                    f"hole {current}: depth increment {step:.6g} departs from grid {depth_step}")
        signals = {}
        for name in SIGNAL_NAMES:
            signals[name] = tuple(
                _parse_float(r[idx[name]], f"hole {current} {name}") for r in rows)
        first = rows[0]
        holes.append(HoleSignalSet(
            hole_id=current,
            blast_id=first[idx["blast_id"]],
            collar_x=_parse_float(first[idx["collar_x"]], f"hole {current} collar_x"),
            collar_y=_parse_float(first[idx["collar_y"]], f"hole {current} collar_y"),
            depth_step=depth_step,
            signals=signals,
            hole_depth=len(rows) * depth_step,
        ))

    for row in reader:
        if not row:
            continue
        if len(row) != len(header):
            raise RaggedSignals(f"row with {len(row)} cells, header has {len(header)}")
        hole_id = row[idx["hole_id"]]
        if hole_id != current:
            flush()
            current = hole_id
            rows = []
        rows.append(row)
    flush()
    return holes


def serialize_mwd_csv(holes: list[HoleSignalSet]) -> str:
    """Inverse of parse_mwd_csv; floats use shortest round-trip formatting."""
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(MWD_HEADER)
    for hole in holes:
        n = hole.n_samples
        for j in range(n):
            writer.writerow(
                [hole.hole_id, hole.blast_id, repr(hole.collar_x), repr(hole.collar_y)]
                + [repr(hole.signals[name][j]) for name in MWD_HEADER[4:]])
    return out.getvalue()


def parse_labels_csv(text: str | io.TextIOBase,
                     material_codes: tuple[str, ...] = MATERIAL_CODES) -> list[LabelRecord]:
    """Parse a labels CSV. Empty cells become absent entries, never zeros."""
    reader = csv.reader(_comment_free(text))
    try:
        header = [h.strip() for h in next(reader)]
    except StopIteration:
        raise MissingColumn("empty file") from None
    if "hole_id" not in header:
        raise MissingColumn("hole_id")
    known_assays = set(ASSAY_CODES)
    known_materials = set(material_codes)
    for col in header:
        if col != "hole_id" and col not in known_assays and col not in known_materials:
            raise UnknownColumn(col)

    records = []
    for row in reader:
        if not row:
            continue
        if len(row) != len(header):
            raise RaggedSignals(f"row with {len(row)} cells, header has {len(header)}")
        assays: dict[str, float] = {}
        materials: dict[str, float] = {}
        hole_id = ""
        for col, cell in zip(header, row):
            cell = cell.strip()
            if col == "hole_id":
                hole_id = cell
            elif cell == "":
                continue
            elif col in known_assays:
                assays[col] = _parse_float(cell, f"hole {hole_id} assay {col}")
            else:
                materials[col] = _parse_float(cell, f"hole {hole_id} material {col}")
        records.append(LabelRecord(hole_id=hole_id, assays=assays, materials=materials))
    return records


def serialize_labels_csv(records: list[LabelRecord],
                         material_codes: tuple[str, ...] = MATERIAL_CODES) -> str:
    """Inverse of parse_labels_csv over the full assay + material header."""
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    header = ("hole_id",) + ASSAY_CODES + material_codes
    writer.writerow(header)
    for rec in records:
        row = [rec.hole_id]
        for code in ASSAY_CODES:
            row.append(repr(float(rec.assays[code])) if code in rec.assays else "")
        for code in material_codes:
            row.append(repr(float(rec.materials[code])) if code in rec.materials else "")
        writer.writerow(row)
    return out.getvalue()


def join(holes: list[HoleSignalSet], labels: list[LabelRecord], mode: str,
         region_tag: str = "") -> Dataset:
    """Keep only holes carrying the requested label kinds.

    mode is one of ``material``, ``chemistry``, ``both``. Labels referencing
    unknown hole ids are dropped (counted in a log warning).
    """
    if mode not in ("material", "chemistry", "both"):
        raise ValueError(f"unknown join mode {mode!r}")
    by_id = {h.hole_id: h for h in holes}
    orphans = sum(1 for rec in labels if rec.hole_id not in by_id)
    if orphans:
        log.warning("join: dropped %d label records with unknown hole_id", orphans)

    pairs = []
    for rec in labels:
        hole = by_id.get(rec.hole_id)
        if hole is None:
            continue
        want_chem = mode in ("chemistry", "both")
        want_mat = mode in ("material", "both")
        if want_chem and not rec.assays:
            continue
        if want_mat and not rec.materials:
            continue
        pairs.append((hole, rec))
    return Dataset(holes=tuple(pairs), region_tag=region_tag)
