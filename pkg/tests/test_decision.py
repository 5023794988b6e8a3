"""Discharge-rule tests.

The calm-down index, the flag counter, and the scoring rules are small
enough to re-derive with plain loops, so every numeric expectation here
comes from an in-test oracle or a hand-computed fixture.
"""

import dataclasses

import numpy as np
import pytest

from stpca import (
    DecisionConfig,
    DecisionOutcome,
    EmbeddingConfig,
    InvalidDataError,
    ParameterError,
    PatientRecord,
    SeriesMatrix,
    ShapeError,
    aggregate_metrics,
    discharge_decision,
    evaluate_patient,
    fluctuation_history,
    idx_z,
    item_flags,
    score_decisions,
)


def idx_oracle(fl, wl, t):
    """Plain-loop version of the calm-down index, 1-based positions."""
    recent = np.mean(fl[t - wl : t])
    best = max(np.mean(fl[j - wl : j]) for j in range(wl, t))
    return best / recent


# ----------------------------------------------------------------- idx_z


def test_idx_z_worked_example():
    # best past pair mean is (4+2)/2 = 3, recent pair mean is (1+1)/2 = 1
    assert idx_z([1.0, 4.0, 2.0, 1.0, 1.0], wl=2, t=5) == pytest.approx(3.0, abs=1e-15)


def test_idx_z_constant_history_is_one():
    assert idx_z(np.full(10, 0.7), wl=3, t=10) == pytest.approx(1.0, abs=1e-15)


def test_idx_z_matches_loop_oracle():
    rng = np.random.default_rng(11)
    for _ in range(200):
        n = int(rng.integers(4, 30))
        fl = rng.uniform(0.1, 5.0, size=n)
        wl = int(rng.integers(1, max(2, n // 2)))
        t = int(rng.integers(wl + 1, n + 1))
        assert idx_z(fl, wl, t) == pytest.approx(idx_oracle(fl, wl, t), rel=1e-12)


def test_idx_z_parameter_errors():
    fl = np.ones(6)
    with pytest.raises(ParameterError):
        idx_z(fl, wl=3, t=3)  # no complete past window
    with pytest.raises(ParameterError):
        idx_z(fl, wl=0, t=4)
    with pytest.raises(ParameterError):
        idx_z(fl, wl=2, t=7)  # past the end
    with pytest.raises(ParameterError):
        idx_z(fl, wl=2, t=0)
    with pytest.raises(ShapeError):
        idx_z(np.ones((2, 3)), wl=1, t=2)
    with pytest.raises(InvalidDataError):
        idx_z([1.0, np.nan, 2.0], wl=1, t=3)


def test_idx_z_zero_recent_mean_rejected():
    with pytest.raises(InvalidDataError):
        idx_z([2.0, 1.0, 0.0, 0.0], wl=2, t=4)


def test_idx_z_scale_invariance():
    rng = np.random.default_rng(12)
    fl = rng.uniform(0.5, 3.0, size=12)
    base = idx_z(fl, wl=3, t=12)
    # power-of-two scaling is exact in binary floating point
    assert idx_z(fl * 4.0, wl=3, t=12) == base
    assert idx_z(fl * 0.125, wl=3, t=12) == base
    assert idx_z(fl * 3.7, wl=3, t=12) == pytest.approx(base, rel=1e-12)


# ------------------------------------------------------------- item_flags


def test_item_flags_inclusive_bounds():
    values = [1.0, 2.0, 3.0]
    bounds = [(1.0, 1.0), (0.0, 1.5), (3.0, 9.0)]
    # first sits exactly on both bounds, second is above, third on the lower
    assert item_flags(values, bounds) == 2
    assert item_flags([0.5, 0.5], [(0.0, 1.0), (0.6, 1.0)]) == 1
    assert item_flags([0.5], [(0.5, 0.5)]) == 1


def test_item_flags_validation():
    with pytest.raises(ShapeError):
        item_flags([1.0, 2.0], [(0.0, 1.0)])
    with pytest.raises(ShapeError):
        item_flags(np.ones((2, 2)), [(0.0, 1.0), (0.0, 1.0)])
    with pytest.raises(ParameterError):
        item_flags([1.0], [(2.0, 1.0)])


# ----------------------------------------------------- discharge_decision


CFG = DecisionConfig(items=["hr", "spo2"], wl=2, fc=2.0)
FL = np.array([1.0, 4.0, 2.0, 1.0, 1.0])  # idx at t=5 is 3.0
BOUNDS = np.array([[60.0, 100.0], [92.0, 100.0]])


def test_discharge_decision_positive():
    out = discharge_decision(FL, 5, [80.0, 97.0], BOUNDS, CFG)
    assert (out.decision, out.items_in_range) == (1, 2)
    assert out.idx == pytest.approx(3.0, abs=1e-15)
    assert out.t == 5 and out.label is None


def test_discharge_decision_blocked_by_item():
    out = discharge_decision(FL, 5, [80.0, 85.0], BOUNDS, CFG)
    assert (out.decision, out.items_in_range) == (0, 1)


def test_discharge_decision_blocked_by_index():
    # history never calms down: idx stays below fc
    flat = np.array([1.0, 1.1, 0.9, 1.0, 1.05])
    out = discharge_decision(flat, 5, [80.0, 97.0], BOUNDS, CFG)
    assert out.decision == 0
    assert out.idx < CFG.fc


def test_discharge_decision_value_count_mismatch():
    with pytest.raises(ShapeError):
        discharge_decision(FL, 5, [80.0], BOUNDS, CFG)


def test_decision_config_validation():
    with pytest.raises(ParameterError):
        DecisionConfig(items=["a"])
    with pytest.raises(ParameterError):
        DecisionConfig(items=list("abcdef"))
    with pytest.raises(ParameterError):
        DecisionConfig(items=["a", "a"])
    with pytest.raises(ParameterError):
        DecisionConfig(items=["a", "b"], wl=0)
    with pytest.raises(ParameterError):
        DecisionConfig(items=["a", "b"], fc=0.0)


# ---------------------------------------------------------- PatientRecord


def named_series(values, names):
    return SeriesMatrix(values, variable_names=names)


def test_patient_record_validation():
    vals = np.ones((5, 10))
    names = [f"i{k}" for k in range(5)]
    bounds = {n: (0.0, 2.0) for n in names}
    PatientRecord("ok", named_series(vals, names), bounds)
    with pytest.raises(InvalidDataError):
        PatientRecord("anon", SeriesMatrix(vals), bounds)
    with pytest.raises(InvalidDataError):
        PatientRecord("few", named_series(np.ones((4, 10)), names[:4]), bounds)
    with pytest.raises(InvalidDataError):
        PatientRecord("short", named_series(np.ones((5, 9)), names), bounds)
    with pytest.raises(InvalidDataError):
        PatientRecord("bad", named_series(vals, names), {"i0": (3.0, 1.0)})
    with pytest.raises(InvalidDataError):
        PatientRecord("out", named_series(vals, names), bounds, outcome="left")


def test_patient_record_icu_membership():
    vals = np.ones((5, 10))
    names = [f"i{k}" for k in range(5)]
    rec = PatientRecord("p", named_series(vals, names), {}, discharge_hour=7)
    assert rec.in_icu_at(6) and not rec.in_icu_at(7) and not rec.in_icu_at(9)
    stay = PatientRecord("q", named_series(vals, names), {})
    assert stay.in_icu_at(10**6)
    assert np.array_equal(rec.hours(), np.arange(1.0, 11.0))


# --------------------------------------------------------- score_decisions


def fixture_record():
    """60 recorded hours, discharge at hour 50, item 'a' spikes at hour 30."""
    names = ["a", "b", "c", "d", "e"]
    vals = np.full((5, 60), 0.5)
    vals[0, 29] = 5.0  # hour 30 out of range for 'a'
    rec = PatientRecord(
        "fx",
        named_series(vals, names),
        {n: (0.0, 1.0) for n in names},
        discharge_hour=50,
        outcome="survived",
    )
    return rec


def outcome(t, decision):
    return DecisionOutcome(t=t, idx=5.0 if decision else 1.0,
                           items_in_range=2 if decision else 1, decision=decision)


def test_score_decisions_fixture_counts_and_rates():
    rec = fixture_record()
    cfg = DecisionConfig(items=["a", "b"], wl=2, fc=2.0)
    outs = [
        outcome(10, 0),  # in ICU            -> TN
        outcome(20, 1),  # spike at 30 ahead -> FP
        outcome(25, 0),  # TN
        outcome(35, 0),  # TN
        outcome(40, 0),  # TN
        outcome(45, 1),  # discharge in 5h   -> TP
        outcome(47, 1),  # TP
        outcome(50, 1),  # discharge hour    -> TP
    ]
    mt = score_decisions(outs, rec, cfg, horizon=5)
    assert (mt.tp, mt.fp, mt.tn, mt.fn) == (3, 1, 4, 0)
    assert mt.recall == pytest.approx(1.0, abs=1e-15)
    assert mt.precision == pytest.approx(0.75, abs=1e-15)
    assert mt.f1 == pytest.approx(6.0 / 7.0, abs=1e-15)
    assert mt.accuracy == pytest.approx(7.0 / 8.0, abs=1e-15)
    assert mt.fpr == pytest.approx(0.2, abs=1e-15)
    assert [o.label for o in outs] == ["TN", "FP", "TN", "TN", "TN", "TP", "TP", "TP"]
    assert mt.tp + mt.fp + mt.tn + mt.fn == len(outs)


def test_score_decisions_in_range_thereafter_counts_as_tp():
    # no recorded discharge, but the watched items stay in range to the end
    names = ["a", "b", "c", "d", "e"]
    rec = PatientRecord("stay", named_series(np.full((5, 12), 0.5), names),
                        {n: (0.0, 1.0) for n in names})
    cfg = DecisionConfig(items=["a", "b"], wl=2, fc=2.0)
    mt = score_decisions([outcome(6, 1), outcome(8, 0)], rec, cfg)
    assert (mt.tp, mt.fp, mt.tn, mt.fn) == (1, 0, 1, 0)


def test_score_decisions_negative_after_discharge_is_fn():
    rec = fixture_record()
    cfg = DecisionConfig(items=["a", "b"], wl=2, fc=2.0)
    mt = score_decisions([outcome(55, 0)], rec, cfg)
    assert (mt.tp, mt.fp, mt.tn, mt.fn) == (0, 0, 0, 1)
    assert mt.recall == pytest.approx(0.0, abs=1e-15)


def test_score_decisions_nan_rates():
    rec = fixture_record()
    cfg = DecisionConfig(items=["a", "b"], wl=2, fc=2.0)
    mt = score_decisions([outcome(10, 0), outcome(12, 0)], rec, cfg)
    assert np.isnan(mt.recall) and np.isnan(mt.precision) and np.isnan(mt.f1)
    assert mt.accuracy == 1.0 and mt.fpr == 0.0
    empty = score_decisions([], rec, cfg)
    assert all(np.isnan(v) for v in
               (empty.recall, empty.precision, empty.f1, empty.accuracy, empty.fpr))


def test_score_decisions_rejects_unsorted_and_bad_horizon():
    rec = fixture_record()
    cfg = DecisionConfig(items=["a", "b"], wl=2, fc=2.0)
    with pytest.raises(ParameterError):
        score_decisions([outcome(30, 0), outcome(20, 0)], rec, cfg)
    with pytest.raises(ParameterError):
        score_decisions([outcome(10, 0)], rec, cfg, horizon=-1)


def test_score_decisions_unknown_selected_item():
    rec = fixture_record()
    with pytest.raises(InvalidDataError):
        score_decisions([], rec, DecisionConfig(items=["a", "zz"]))
    no_bounds = dataclasses.replace(rec, bounds={"a": (0.0, 1.0)})
    with pytest.raises(InvalidDataError):
        score_decisions([], no_bounds, DecisionConfig(items=["a", "b"]))


def test_aggregate_metrics_pools_counts():
    part = [
        score_decisions([outcome(10, 0)], fixture_record(),
                        DecisionConfig(items=["a", "b"])),
        score_decisions([outcome(45, 1), outcome(20, 1)][::-1], fixture_record(),
                        DecisionConfig(items=["a", "b"])),
    ]
    pooled = aggregate_metrics(part)
    assert (pooled.tp, pooled.fp, pooled.tn, pooled.fn) == (1, 1, 1, 0)
    assert pooled.recall == pytest.approx(1.0, abs=1e-15)
    assert pooled.precision == pytest.approx(0.5, abs=1e-15)
    assert pooled.accuracy == pytest.approx(2.0 / 3.0, abs=1e-12)


# -------------------------------------------------------- evaluate_patient


def random_record(rng, m=24):
    names = ["hr", "rr", "spo2", "map", "temp"]
    base = np.array([80.0, 18.0, 96.0, 85.0, 37.0])[:, None]
    vals = base + rng.normal(0.0, 1.0, size=(5, m))
    bounds = {n: (float(vals[k].min() - 0.5), float(vals[k].max() + 0.5))
              for k, n in enumerate(names)}
    # push one recorded hour of hr out of range so flags vary
    vals[0, m // 2] = bounds["hr"][1] + 10.0
    return PatientRecord("r", named_series(vals, names), bounds, discharge_hour=m - 2)


def test_fluctuation_history_contract():
    rng = np.random.default_rng(21)
    rec = random_record(rng, m=16)
    ecfg = EmbeddingConfig(2, 0.5)
    fl = fluctuation_history(rec, ecfg, width=4)
    assert fl.shape == (13,)
    from stpca import fit_stpca

    for k in (0, 5, 12):
        sub = SeriesMatrix(rec.indicators.values[:, k : k + 4])
        direct = float(np.std(fit_stpca(sub, ecfg).z_extended, ddof=1))
        assert fl[k] == pytest.approx(direct, rel=1e-12)
    with pytest.raises(ParameterError):
        fluctuation_history(rec, ecfg, width=17)


def test_evaluate_patient_times_and_rule_consistency():
    rng = np.random.default_rng(22)
    rec = random_record(rng, m=24)
    cfg = DecisionConfig(items=["hr", "spo2"], wl=3, fc=1.2)
    ecfg = EmbeddingConfig(2, 0.5)
    outs = evaluate_patient(rec, cfg, ecfg)
    width = max(ecfg.L, cfg.wl)
    assert [o.t for o in outs] == list(range(width + cfg.wl, 25))
    fl = fluctuation_history(rec, ecfg, width)
    names = rec.indicators.variable_names
    rows = [names.index(it) for it in cfg.items]
    bounds = np.array([rec.bounds[it] for it in cfg.items])
    for o in outs:
        # the decision must follow from its own evidence fields
        assert o.decision == int(o.idx >= cfg.fc and o.items_in_range == 2)
        # and the evidence must match an independent recomputation
        t_fl = o.t - width + 1
        assert o.idx == pytest.approx(idx_oracle(fl, cfg.wl, t_fl), rel=1e-12)
        vals = rec.indicators.values[rows, o.t - 1]
        flags = int(np.sum((vals >= bounds[:, 0]) & (vals <= bounds[:, 1])))
        assert o.items_in_range == flags


def test_evaluate_patient_fc_monotone():
    rng = np.random.default_rng(23)
    rec = random_record(rng, m=24)
    ecfg = EmbeddingConfig(2, 0.5)
    loose = evaluate_patient(rec, DecisionConfig(items=["hr", "spo2"], wl=3, fc=1.05), ecfg)
    tight = evaluate_patient(rec, DecisionConfig(items=["hr", "spo2"], wl=3, fc=2.5), ecfg)
    pos_loose = {o.t for o in loose if o.decision == 1}
    pos_tight = {o.t for o in tight if o.decision == 1}
    assert pos_tight <= pos_loose


def test_evaluate_patient_rejects_short_record():
    rng = np.random.default_rng(24)
    rec = random_record(rng, m=10)
    with pytest.raises(ParameterError):
        evaluate_patient(rec, DecisionConfig(items=["hr", "spo2"], wl=8),
                         EmbeddingConfig(2, 0.5))


def test_score_after_evaluate_label_rederivation():
    rng = np.random.default_rng(25)
    rec = random_record(rng, m=24)
    cfg = DecisionConfig(items=["rr", "map"], wl=3, fc=1.1)
    ecfg = EmbeddingConfig(2, 0.5)
    outs = evaluate_patient(rec, cfg, ecfg)
    mt = score_decisions(outs, rec, cfg, horizon=4)
    names = rec.indicators.variable_names
    rows = [names.index(it) for it in cfg.items]
    bounds = np.array([rec.bounds[it] for it in cfg.items])
    counts = {"TP": 0, "FP": 0, "TN": 0, "FN": 0}
    for o in outs:
        if o.decision == 1:
            soon = rec.discharge_hour is not None and \
                o.t <= rec.discharge_hour <= o.t + 4
            cols = np.arange(o.t - 1, rec.indicators.m)
            sub = rec.indicators.values[np.ix_(rows, cols)]
            calm = bool(np.all((sub >= bounds[:, :1]) & (sub <= bounds[:, 1:])))
            label = "TP" if (soon or calm) else "FP"
        else:
            label = "TN" if (rec.discharge_hour is None or o.t < rec.discharge_hour) \
                else "FN"
        counts[label] += 1
        assert o.label == label
    assert (mt.tp, mt.fp, mt.tn, mt.fn) == \
        (counts["TP"], counts["FP"], counts["TN"], counts["FN"])
