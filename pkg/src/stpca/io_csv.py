"""CSV input and output, plus the JSON run configuration.

All numeric values are written with 17 significant digits so that a write
followed by a load reproduces every float bit-exactly.  Parsers report the
offending row and column on failure; rows are counted over data rows
(the header is row 0) and columns over the value columns.

Formats
-------
series   : wide, header ``var,<t1>,...``; one row per variable.  Time
           labels that all parse as numbers become the time index.
sweep    : ``position,fl`` pairs from a fluctuation sweep.
curve    : header ``c1,...,cd``; one row per curve point.
patients : long format ``subject_id,hour,indicator,value`` together with a
           bounds file ``indicator,lb,ub`` and an events file
           ``subject_id,discharge_hour,outcome``.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass

import numpy as np

from .analysis import FluctuationSweep
from .core import EmbeddingConfig, SeriesMatrix
from .decision import DecisionConfig, DecisionMetrics, DecisionOutcome, PatientRecord
from .errors import DataFormatError, InvalidDataError, ParameterError

_MIN_HOURS = 10
_MIN_INDICATORS = 5


def _fmt(x) -> str:
    x = float(x)
    if math.isnan(x):
        return "NaN"
    return format(x, ".17g")


def _read_rows(path) -> list[list[str]]:
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            return [row for row in csv.reader(fh) if row]
    except OSError as exc:
        raise DataFormatError(f"cannot read {path}: {exc}") from exc


def _open_writer(path):
    fh = open(path, "w", newline="", encoding="utf-8")
    return fh, csv.writer(fh, lineterminator="\n")


def _parse_float(cell, path, row, col):
    try:
        return float(cell)
    except ValueError:
        raise DataFormatError(
            f"{path}: row {row}, column {col}: cannot parse {cell!r} as a number"
        ) from None


def _parse_int(cell, path, row, col):
    value = _parse_float(cell, path, row, col)
    if value != int(value):
        raise DataFormatError(
            f"{path}: row {row}, column {col}: expected an integer, got {cell!r}"
        )
    return int(value)


# ---------------------------------------------------------------- series


def load_series_csv(path) -> SeriesMatrix:
    """Read a wide series CSV into a SeriesMatrix.

    The header must start with 'var'; the remaining labels become the time
    index when they all parse as numbers.  Raises DataFormatError for
    malformed content and InvalidDataError for structurally valid files
    with unusable data (too few columns, non-finite values).
    """
    rows = _read_rows(path)
    if not rows:
        raise InvalidDataError(f"{path}: file is empty")
    header = rows[0]
    if len(header) < 2 or header[0].strip() != "var":
        raise DataFormatError(
            f"{path}: header must be 'var' followed by one label per time point"
        )
    m = len(header) - 1
    try:
        time_index = np.array([float(s) for s in header[1:]])
    except ValueError:
        time_index = None
    data = rows[1:]
    if not data:
        raise InvalidDataError(f"{path}: no variable rows")
    names = []
    values = np.empty((len(data), m))
    for i, row in enumerate(data, start=1):
        if len(row) != m + 1:
            raise DataFormatError(
                f"{path}: row {i}: expected {m + 1} cells, got {len(row)}"
            )
        names.append(row[0])
        for j, cell in enumerate(row[1:], start=1):
            values[i - 1, j - 1] = _parse_float(cell, path, i, j)
    return SeriesMatrix(values, names, time_index)


def write_series_csv(x: SeriesMatrix, path) -> None:
    """Write a SeriesMatrix in the wide format; inverse of load_series_csv."""
    names = x.variable_names or [f"v{i + 1}" for i in range(x.n)]
    if x.time_index is not None:
        labels = [_fmt(t) for t in x.time_index]
    else:
        labels = [f"t{j + 1}" for j in range(x.m)]
    fh, writer = _open_writer(path)
    with fh:
        writer.writerow(["var", *labels])
        for name, row in zip(names, x.values):
            writer.writerow([name, *(_fmt(v) for v in row)])


# ---------------------------------------------------------------- sweep


def write_sweep_csv(sweep: FluctuationSweep, path) -> None:
    fh, writer = _open_writer(path)
    with fh:
        writer.writerow(["position", "fl"])
        for pos, fl in zip(sweep.positions, sweep.fl):
            writer.writerow([str(int(pos)), _fmt(fl)])


def load_sweep_csv(path) -> FluctuationSweep:
    """Read a position,fl file.

    The window geometry is not stored in this format, so window_width and
    stride come back as 0; detection only needs the fl column.
    """
    rows = _read_rows(path)
    if not rows or rows[0][:2] != ["position", "fl"]:
        raise DataFormatError(f"{path}: expected header 'position,fl'")
    positions = []
    fl = []
    for i, row in enumerate(rows[1:], start=1):
        if len(row) != 2:
            raise DataFormatError(f"{path}: row {i}: expected 2 cells, got {len(row)}")
        positions.append(_parse_int(row[0], path, i, 1))
        fl.append(_parse_float(row[1], path, i, 2))
    if not fl:
        raise InvalidDataError(f"{path}: no sweep rows")
    return FluctuationSweep(
        positions=np.asarray(positions),
        fl=np.asarray(fl),
        window_width=0,
        stride=0,
    )


# ---------------------------------------------------------------- curves


def write_curve_csv(curve, path) -> None:
    curve = np.asarray(curve, dtype=float)
    if curve.ndim == 1:
        curve = curve[:, None]
    fh, writer = _open_writer(path)
    with fh:
        writer.writerow([f"c{k + 1}" for k in range(curve.shape[1])])
        for point in curve:
            writer.writerow([_fmt(v) for v in point])


def load_curve_csv(path) -> np.ndarray:
    """Read a points x dims curve written by write_curve_csv."""
    rows = _read_rows(path)
    if not rows:
        raise InvalidDataError(f"{path}: file is empty")
    d = len(rows[0])
    points = np.empty((len(rows) - 1, d))
    if points.shape[0] < 1:
        raise InvalidDataError(f"{path}: curve has no points")
    for i, row in enumerate(rows[1:], start=1):
        if len(row) != d:
            raise DataFormatError(f"{path}: row {i}: expected {d} cells, got {len(row)}")
        for j, cell in enumerate(row, start=1):
            points[i - 1, j - 1] = _parse_float(cell, path, i, j)
    return points


# ---------------------------------------------------------------- patients


def _fill_gaps(row):
    # forward fill, then back fill whatever leads the first observation
    out = row.copy()
    last = np.nan
    for j in range(out.size):
        if np.isnan(out[j]):
            out[j] = last
        else:
            last = out[j]
    nxt = np.nan
    for j in range(out.size - 1, -1, -1):
        if np.isnan(out[j]):
            out[j] = nxt
        else:
            nxt = out[j]
    return out


def load_bounds_csv(path) -> dict[str, tuple[float, float]]:
    rows = _read_rows(path)
    if not rows or rows[0][:3] != ["indicator", "lb", "ub"]:
        raise DataFormatError(f"{path}: expected header 'indicator,lb,ub'")
    bounds = {}
    for i, row in enumerate(rows[1:], start=1):
        if len(row) != 3:
            raise DataFormatError(f"{path}: row {i}: expected 3 cells, got {len(row)}")
        name = row[0]
        if name in bounds:
            raise DataFormatError(f"{path}: row {i}: duplicate bounds for {name!r}")
        lb = _parse_float(row[1], path, i, 2)
        ub = _parse_float(row[2], path, i, 3)
        if lb > ub:
            raise DataFormatError(
                f"{path}: row {i}: lower bound {lb} exceeds upper bound {ub}"
            )
        bounds[name] = (lb, ub)
    return bounds


def load_events_csv(path) -> dict[str, tuple[int | None, str | None]]:
    rows = _read_rows(path)
    if not rows or rows[0][:3] != ["subject_id", "discharge_hour", "outcome"]:
        raise DataFormatError(
            f"{path}: expected header 'subject_id,discharge_hour,outcome'"
        )
    events = {}
    for i, row in enumerate(rows[1:], start=1):
        if len(row) != 3:
            raise DataFormatError(f"{path}: row {i}: expected 3 cells, got {len(row)}")
        subject = row[0]
        if subject in events:
            raise DataFormatError(f"{path}: row {i}: duplicate event for {subject!r}")
        hour = _parse_int(row[1], path, i, 2) if row[1] != "" else None
        outcome = row[2] if row[2] != "" else None
        if outcome is not None and outcome not in ("survived", "died"):
            raise DataFormatError(
                f"{path}: row {i}: outcome must be 'survived' or 'died', got {outcome!r}"
            )
        events[subject] = (hour, outcome)
    return events


def load_patient_records(path, bounds_path, events_path):
    """Assemble PatientRecords from the long, bounds, and events files.

    Per subject, the indicator grid spans the sorted union of its recorded
    hours; gaps are forward-filled then back-filled.  Subjects with fewer
    than 10 hours or 5 indicators are dropped.  Returns (records, dropped)
    where dropped lists (subject_id, reason) pairs, and records are sorted
    by subject id.
    """
    rows = _read_rows(path)
    if not rows or rows[0][:4] != ["subject_id", "hour", "indicator", "value"]:
        raise DataFormatError(
            f"{path}: expected header 'subject_id,hour,indicator,value'"
        )
    cells: dict[str, dict[tuple[int, str], float]] = {}
    seen_indicators: set[str] = set()
    for i, row in enumerate(rows[1:], start=1):
        if len(row) != 4:
            raise DataFormatError(f"{path}: row {i}: expected 4 cells, got {len(row)}")
        subject = row[0]
        hour = _parse_int(row[1], path, i, 2)
        indicator = row[2]
        value = _parse_float(row[3], path, i, 4)
        key = (hour, indicator)
        per = cells.setdefault(subject, {})
        if key in per:
            raise DataFormatError(
                f"{path}: row {i}: duplicate measurement for "
                f"({subject!r}, hour {hour}, {indicator!r})"
            )
        per[key] = value
        seen_indicators.add(indicator)
    if not cells:
        raise InvalidDataError(f"{path}: no measurement rows")

    bounds = load_bounds_csv(bounds_path)
    for name in bounds:
        if name not in seen_indicators:
            raise DataFormatError(
                f"{bounds_path}: bounds reference unknown indicator {name!r}"
            )
    events = load_events_csv(events_path)

    records = []
    dropped = []
    for subject in sorted(cells):
        per = cells[subject]
        hours = sorted({h for h, _ in per})
        indicators = sorted({ind for _, ind in per})
        if len(hours) < _MIN_HOURS:
            dropped.append((subject, "min time points"))
            continue
        if len(indicators) < _MIN_INDICATORS:
            dropped.append((subject, "min indicators"))
            continue
        grid = np.full((len(indicators), len(hours)), np.nan)
        col = {h: j for j, h in enumerate(hours)}
        row_of = {ind: i for i, ind in enumerate(indicators)}
        for (h, ind), value in per.items():
            grid[row_of[ind], col[h]] = value
        for i in range(grid.shape[0]):
            grid[i] = _fill_gaps(grid[i])
        discharge, outcome = events.get(subject, (None, None))
        records.append(
            PatientRecord(
                subject_id=subject,
                indicators=SeriesMatrix(
                    grid,
                    variable_names=indicators,
                    time_index=np.asarray(hours, dtype=float),
                ),
                bounds={k: v for k, v in bounds.items() if k in row_of},
                discharge_hour=discharge,
                outcome=outcome,
            )
        )
    return records, dropped


# ---------------------------------------------------------------- decisions


def write_decisions_csv(rows: list[tuple[str, DecisionOutcome]], path) -> None:
    fh, writer = _open_writer(path)
    with fh:
        writer.writerow(
            ["subject_id", "t", "idx", "items_in_range", "decision", "label"]
        )
        for subject, o in rows:
            writer.writerow(
                [
                    subject,
                    str(o.t),
                    _fmt(o.idx),
                    str(o.items_in_range),
                    str(o.decision),
                    o.label or "",
                ]
            )


def write_metrics_csv(rows: list[tuple[str, DecisionMetrics]], path) -> None:
    fh, writer = _open_writer(path)
    with fh:
        writer.writerow(
            ["subject_id", "tp", "fp", "tn", "fn",
             "recall", "precision", "f1", "accuracy", "fpr"]
        )
        for subject, mt in rows:
            writer.writerow(
                [
                    subject,
                    str(mt.tp), str(mt.fp), str(mt.tn), str(mt.fn),
                    _fmt(mt.recall), _fmt(mt.precision), _fmt(mt.f1),
                    _fmt(mt.accuracy), _fmt(mt.fpr),
                ]
            )


# ---------------------------------------------------------------- run config


@dataclass
class RunConfig:
    """Configuration of a full decision run, loadable from JSON.

    Bundles the embedding, the decision rule, the scoring horizon, and the
    input and output locations so a run is reproducible from one file.
    """

    embedding: EmbeddingConfig
    decision: DecisionConfig
    horizon: int = 5
    seed: int = 0
    patients_path: str = ""
    bounds_path: str = ""
    events_path: str = ""
    out_prefix: str = ""

    def __post_init__(self):
        if self.horizon < 0:
            raise ParameterError(f"horizon must be >= 0, got {self.horizon}")
        for field_name in ("patients_path", "bounds_path", "events_path", "out_prefix"):
            if not getattr(self, field_name):
                raise ParameterError(f"run config field {field_name!r} must be non-empty")

    @classmethod
    def from_json(cls, path) -> "RunConfig":
        try:
            with open(path, encoding="utf-8") as fh:
                raw = json.load(fh)
        except OSError as exc:
            raise DataFormatError(f"cannot read {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise DataFormatError(f"{path}: invalid JSON: {exc}") from exc
        known = {
            "embedding", "decision", "horizon", "seed",
            "patients_path", "bounds_path", "events_path", "out_prefix",
        }
        unknown = set(raw) - known
        if unknown:
            raise DataFormatError(f"{path}: unknown config keys {sorted(unknown)}")
        try:
            embedding = EmbeddingConfig(**raw.get("embedding", {}))
            decision = DecisionConfig(**raw.get("decision", {}))
        except TypeError as exc:
            raise DataFormatError(f"{path}: bad sub-config: {exc}") from exc
        return cls(
            embedding=embedding,
            decision=decision,
            horizon=raw.get("horizon", 5),
            seed=raw.get("seed", 0),
            patients_path=raw.get("patients_path", ""),
            bounds_path=raw.get("bounds_path", ""),
            events_path=raw.get("events_path", ""),
            out_prefix=raw.get("out_prefix", ""),
        )
