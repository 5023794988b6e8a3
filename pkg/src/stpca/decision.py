"""Discharge decision support driven by latent fluctuation histories.

The workflow mirrors how the fluctuation index is used at the bedside:
per recorded hour a trailing window of the patient's indicator matrix is
fitted with stPCA, the sample SD of the latent series gives one
fluctuation value per hour, and a discharge is suggested at hour t when

* the fluctuation history has calmed down: the best past short-window
  mean exceeds the most recent one by at least the factor fc (idx_z), and
* every selected indicator currently sits inside its normal range
  (item_flags equals the number of selected items).

Suggestions are scored against the recorded discharge hour: a positive
decision counts as a true positive when the patient was actually
discharged within `horizon` hours, or when all selected indicators stay
in range for the rest of the record; a negative decision is correct
while the patient remains in the ICU.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np

from .core import EmbeddingConfig, SeriesMatrix, fit_stpca
from .errors import InvalidDataError, ParameterError, ShapeError

_VALID_OUTCOMES = {"survived", "died"}


@dataclass(eq=False)
class PatientRecord:
    """One subject's indicator history plus normal ranges and the known outcome.

    indicators : SeriesMatrix with one row per indicator (named) and one
        column per recorded hour; needs at least 5 indicators and 10 hours.
        The time index carries the hour stamps.
    bounds : indicator name -> (lower, upper) normal range, inclusive
    discharge_hour : hour of discharge, None while still in the ICU
    outcome : "survived", "died", or None when unknown
    """

    subject_id: str
    indicators: SeriesMatrix
    bounds: dict[str, tuple[float, float]]
    discharge_hour: int | None = None
    outcome: str | None = None

    def __post_init__(self):
        if self.indicators.variable_names is None:
            raise InvalidDataError("patient indicators must carry row names")
        if self.indicators.n < 5:
            raise InvalidDataError(
                f"subject {self.subject_id}: needs >= 5 indicators, "
                f"got {self.indicators.n}"
            )
        if self.indicators.m < 10:
            raise InvalidDataError(
                f"subject {self.subject_id}: needs >= 10 recorded hours, "
                f"got {self.indicators.m}"
            )
        for name, (lb, ub) in self.bounds.items():
            if not (np.isfinite(lb) and np.isfinite(ub)) or lb > ub:
                raise InvalidDataError(
                    f"subject {self.subject_id}: bad bounds for {name!r}: ({lb}, {ub})"
                )
        if self.outcome is not None and self.outcome not in _VALID_OUTCOMES:
            raise InvalidDataError(f"unknown outcome {self.outcome!r}")

    def hours(self):
        """Hour stamps of the recorded columns (defaults to 1..m)."""
        if self.indicators.time_index is not None:
            return self.indicators.time_index
        return np.arange(1, self.indicators.m + 1, dtype=float)

    def in_icu_at(self, hour) -> bool:
        """True while the subject has not yet been discharged at `hour`."""
        return self.discharge_hour is None or hour < self.discharge_hour


@dataclass
class DecisionConfig:
    """Parameters of the discharge rule.

    items : the 2 to 5 indicator names the rule watches
    wl : length of the short averaging window in the fluctuation history
    fc : how many times larger the best past window mean must be than the
        recent one before discharge is considered
    """

    items: list[str]
    wl: int = 5
    fc: float = 2.0

    def __post_init__(self):
        if not 2 <= len(self.items) <= 5:
            raise ParameterError(
                f"need between 2 and 5 selected items, got {len(self.items)}"
            )
        if len(set(self.items)) != len(self.items):
            raise ParameterError("selected items must be distinct")
        if self.wl < 1:
            raise ParameterError(f"wl must be >= 1, got {self.wl}")
        if self.fc <= 0:
            raise ParameterError(f"fc must be positive, got {self.fc}")


@dataclass
class DecisionOutcome:
    """One evaluated decision: the hour, its evidence, and (after scoring) a label."""

    t: int
    idx: float
    items_in_range: int
    decision: int
    label: str | None = None


@dataclass
class DecisionMetrics:
    """Confusion counts and the derived rates; NaN marks 'no such event'."""

    tp: int
    fp: int
    tn: int
    fn: int
    recall: float
    precision: float
    f1: float
    accuracy: float
    fpr: float


def idx_z(fl, wl: int, t: int) -> float:
    """Calm-down index at position t of a fluctuation history.

    Positions are 1-based: fl[0] is position 1.  With mean_w(j) the mean of
    the wl values ending at position j,

        idx(t) = max_{j = wl .. t-1} mean_w(j) / mean_w(t).

    Requires t >= wl + 1 so at least one complete past window exists, and a
    strictly positive recent mean.  Large values mean fluctuations have
    shrunk relative to the worst earlier episode.
    """
    fl = np.asarray(fl, dtype=float)
    if fl.ndim != 1:
        raise ShapeError("fluctuation history must be 1-D")
    if not np.all(np.isfinite(fl)):
        raise InvalidDataError("fluctuation history contains non-finite values")
    if wl < 1:
        raise ParameterError(f"wl must be >= 1, got {wl}")
    if not 1 <= t <= fl.size:
        raise ParameterError(f"t must lie in [1, {fl.size}], got {t}")
    if t <= wl:
        raise ParameterError(
            f"t={t} leaves no complete past window of length wl={wl}"
        )
    recent = float(fl[t - wl : t].mean())
    if recent <= 0.0:
        raise InvalidDataError("recent fluctuation mean is zero; index undefined")
    kernel = np.full(wl, 1.0 / wl)
    past_means = np.convolve(fl[: t - 1], kernel, mode="valid")
    return float(past_means.max() / recent)


def item_flags(values, bounds) -> int:
    """Count how many values fall inside their (lower, upper) bounds, inclusive."""
    values = np.asarray(values, dtype=float)
    bounds = np.asarray(bounds, dtype=float)
    if values.ndim != 1 or bounds.shape != (values.size, 2):
        raise ShapeError(
            f"expected K values and K x 2 bounds, got {values.shape} and {bounds.shape}"
        )
    lb = bounds[:, 0]
    ub = bounds[:, 1]
    if np.any(lb > ub):
        raise ParameterError("each lower bound must not exceed its upper bound")
    return int(np.count_nonzero((values >= lb) & (values <= ub)))


def discharge_decision(fl, t: int, values, bounds, cfg: DecisionConfig) -> DecisionOutcome:
    """Evaluate the discharge rule at position t of a fluctuation history.

    Positive (decision = 1) exactly when idx_z(fl, wl, t) >= fc and every
    one of the K item values is inside its bounds.
    """
    values = np.asarray(values, dtype=float)
    if values.size != len(cfg.items):
        raise ShapeError(
            f"got {values.size} item values for {len(cfg.items)} configured items"
        )
    idx = idx_z(fl, cfg.wl, t)
    flags = item_flags(values, bounds)
    decision = 1 if (idx >= cfg.fc and flags == len(cfg.items)) else 0
    return DecisionOutcome(t=int(t), idx=idx, items_in_range=flags, decision=decision)


def _selected(record: PatientRecord, cfg: DecisionConfig):
    names = record.indicators.variable_names
    rows = []
    bounds = []
    for item in cfg.items:
        if item not in names:
            raise InvalidDataError(
                f"subject {record.subject_id}: selected item {item!r} not recorded"
            )
        if item not in record.bounds:
            raise InvalidDataError(
                f"subject {record.subject_id}: no bounds for selected item {item!r}"
            )
        rows.append(names.index(item))
        bounds.append(record.bounds[item])
    return np.asarray(rows), np.asarray(bounds, dtype=float)


def fluctuation_history(
    record: PatientRecord, ecfg: EmbeddingConfig, width: int
) -> np.ndarray:
    """Per-hour latent fluctuation from trailing windows of `width` columns.

    Entry k corresponds to the window ending at column width + k (1-based),
    i.e. the first value belongs to the earliest hour with a full window.
    """
    m = record.indicators.m
    if width > m:
        raise ParameterError(
            f"subject {record.subject_id}: window of {width} columns does not fit "
            f"into {m} recorded hours"
        )
    vals = record.indicators.values
    out = np.empty(m - width + 1)
    for k in range(out.size):
        sub = SeriesMatrix(vals[:, k : k + width])
        out[k] = float(np.std(fit_stpca(sub, ecfg).z_extended, ddof=1))
    return out


def evaluate_patient(
    record: PatientRecord,
    cfg: DecisionConfig,
    ecfg: EmbeddingConfig,
) -> list[DecisionOutcome]:
    """Run the discharge rule over every eligible hour of one record.

    The trailing-window width is max(L, wl).  Decisions start once the
    fluctuation history holds wl + 1 values, i.e. at column max(L, wl) + wl.
    Hours where the recent fluctuation mean is exactly zero are skipped
    because the index is undefined there.  Outcome times are the record's
    hour stamps, ascending.
    """
    rows, bounds = _selected(record, cfg)
    width = max(ecfg.L, cfg.wl)
    m = record.indicators.m
    if width + cfg.wl > m:
        raise ParameterError(
            f"subject {record.subject_id}: record too short for window width "
            f"{width} plus wl={cfg.wl}"
        )
    fl = fluctuation_history(record, ecfg, width)
    hours = record.hours()
    outcomes = []
    for col in range(width + cfg.wl, m + 1):
        t_fl = col - width + 1
        values = record.indicators.values[rows, col - 1]
        try:
            outcome = discharge_decision(fl, t_fl, values, bounds, cfg)
        except InvalidDataError:
            continue
        outcomes.append(dataclasses.replace(outcome, t=int(hours[col - 1])))
    return outcomes


def _all_in_range_thereafter(record, rows, bounds, hour) -> bool:
    hours = record.hours()
    cols = np.flatnonzero(hours >= hour)
    if cols.size == 0:
        return False
    vals = record.indicators.values[np.ix_(rows, cols)]
    lb = bounds[:, 0][:, None]
    ub = bounds[:, 1][:, None]
    return bool(np.all((vals >= lb) & (vals <= ub)))


def _ratio(num, den) -> float:
    return num / den if den else float("nan")


def _metrics_from_counts(tp, fp, tn, fn) -> DecisionMetrics:
    return DecisionMetrics(
        tp=tp,
        fp=fp,
        tn=tn,
        fn=fn,
        recall=_ratio(tp, tp + fn),
        precision=_ratio(tp, tp + fp),
        f1=_ratio(2 * tp, 2 * tp + fp + fn),
        accuracy=_ratio(tp + tn, tp + fp + tn + fn),
        fpr=_ratio(fp, fp + tn),
    )


def score_decisions(
    outcomes: list[DecisionOutcome],
    record: PatientRecord,
    cfg: DecisionConfig,
    horizon: int = 5,
) -> DecisionMetrics:
    """Label each outcome against the record and compute summary rates.

    decision = 1 is a TP when the subject was discharged within `horizon`
    hours (t <= discharge_hour <= t + horizon) or when every selected item
    stays within bounds from t to the end of the record; otherwise FP.
    decision = 0 is a TN while the subject is still in the ICU at t,
    otherwise FN.  Labels are written back onto the outcomes.

    Rates with an empty denominator are returned as NaN, meaning the
    corresponding event never occurred.
    """
    if horizon < 0:
        raise ParameterError(f"horizon must be >= 0, got {horizon}")
    times = [o.t for o in outcomes]
    if any(b < a for a, b in zip(times, times[1:])):
        raise ParameterError("outcomes must be sorted by decision time")
    rows, bounds = _selected(record, cfg)
    tp = fp = tn = fn = 0
    for o in outcomes:
        if o.decision == 1:
            discharged_soon = (
                record.discharge_hour is not None
                and o.t <= record.discharge_hour <= o.t + horizon
            )
            if discharged_soon or _all_in_range_thereafter(record, rows, bounds, o.t):
                o.label = "TP"
                tp += 1
            else:
                o.label = "FP"
                fp += 1
        else:
            if record.in_icu_at(o.t):
                o.label = "TN"
                tn += 1
            else:
                o.label = "FN"
                fn += 1
    return _metrics_from_counts(tp, fp, tn, fn)


def aggregate_metrics(per_patient: list[DecisionMetrics]) -> DecisionMetrics:
    """Pool confusion counts across patients and recompute the rates."""
    tp = sum(mt.tp for mt in per_patient)
    fp = sum(mt.fp for mt in per_patient)
    tn = sum(mt.tn for mt in per_patient)
    fn = sum(mt.fn for mt in per_patient)
    return _metrics_from_counts(tp, fp, tn, fn)
