"""Command line interface.

Subcommands wire the simulators, the solver, sweeps, detection, curve
comparison, and decision scoring together.  Results go to files or stdout;
errors and progress go to stderr.  Exit codes: 0 on success, 1 when input
data is unusable, 2 for usage errors (argparse's convention).

The environment variable STPCA_THREADS caps worker threads for the
sliding-window sweep; 0 or 1 means sequential.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import analysis, decision, io_csv, synth
from .core import EmbeddingConfig, fit_stpca
from .errors import ParameterError, StpcaError


def _workers() -> int:
    raw = os.environ.get("STPCA_THREADS", "0")
    try:
        value = int(raw)
    except ValueError:
        raise ParameterError(f"STPCA_THREADS must be an integer, got {raw!r}") from None
    if value < 0:
        raise ParameterError(f"STPCA_THREADS must be >= 0, got {value}")
    return max(value, 1)


def _embedding(args) -> EmbeddingConfig:
    return EmbeddingConfig(
        L=args.L, lam=args.lam, scale_rows=getattr(args, "scale_rows", False)
    )


def _cmd_simulate(args) -> int:
    if args.model == "lorenz":
        if args.n is None or args.m is None:
            raise ParameterError("simulate --model lorenz requires --n and --m")
        cfg = synth.LorenzConfig(
            n=args.n,
            m=args.m,
            coupling=args.coupling,
            dt=args.dt,
            sample_every=args.sample_every,
            transient_steps=args.transient,
            seed=args.seed,
        )
        series = synth.simulate_coupled_lorenz(cfg)
    else:
        cfg = synth.BifNetConfig(
            kind=args.model,
            nodes=args.nodes,
            tau_steps=args.tau_steps,
            tau_star=args.tau_star,
            coupling=args.coupling,
            noise=args.dyn_noise,
            seed=args.seed,
        )
        series, tau_star = synth.simulate_bifurcation_network(cfg)
        print(f"tau_star={tau_star}")
    if args.noise > 0:
        series = synth.add_observation_noise(
            series, synth.NoiseSpec(sd=args.noise, seed=args.seed + 1)
        )
    io_csv.write_series_csv(series, args.out)
    print(f"wrote {series.n} x {series.m} series to {args.out}")
    return 0


def _cmd_fit(args) -> int:
    series = io_csv.load_series_csv(args.input)
    fit = fit_stpca(series, _embedding(args))
    print(f"alpha={io_csv._fmt(fit.alpha)}")
    print(f"embedding_error={io_csv._fmt(fit.embedding_error)}")
    print(f"iterations={fit.iterations}")
    print(f"degenerate={int(fit.degenerate)}")
    if args.out_prefix:
        from .core import SeriesMatrix

        names = series.variable_names or [f"v{i + 1}" for i in range(series.n)]
        io_csv.write_series_csv(
            SeriesMatrix(fit.w, variable_names=[f"w{i + 1}" for i in range(fit.w.shape[0])]),
            f"{args.out_prefix}_w.csv",
        )
        io_csv.write_series_csv(
            SeriesMatrix(fit.z, variable_names=[f"z{i + 1}" for i in range(fit.z.shape[0])]),
            f"{args.out_prefix}_z.csv",
        )
        io_csv.write_curve_csv(fit.z_extended, f"{args.out_prefix}_latent.csv")
        print(f"wrote {args.out_prefix}_w.csv (columns follow {names[0]}..{names[-1]})",
              file=sys.stderr)
    return 0


def _cmd_sweep(args) -> int:
    series = io_csv.load_series_csv(args.input)
    sweep = analysis.fluctuation_sweep(
        series,
        _embedding(args),
        window_width=args.window_width,
        stride=args.stride,
        workers=_workers(),
    )
    io_csv.write_sweep_csv(sweep, args.out)
    print(f"wrote {sweep.fl.size} windows to {args.out}")
    return 0


def _cmd_detect(args) -> int:
    sweep = io_csv.load_sweep_csv(args.input)
    flagged = analysis.detect_tipping(
        sweep, args.rule, factor=args.fc, baseline_len=args.baseline
    )
    for idx in flagged:
        print(idx)
    if not flagged:
        print("no windows flagged", file=sys.stderr)
    return 0


def _cmd_pcfd(args) -> int:
    a = io_csv.load_curve_csv(args.a)
    b = io_csv.load_curve_csv(args.b)
    print(f"pcfd={io_csv._fmt(analysis.pcfd(a, b))}")
    return 0


def _cmd_project(args) -> int:
    series = io_csv.load_series_csv(args.input)
    if args.pca_method == "stpca":
        fit = fit_stpca(series, _embedding(args))
        proj = analysis.hankel_svd_projections(fit.z, args.r)
    else:
        proj = analysis.pca_baseline(series, args.r)
    io_csv.write_curve_csv(proj.components, args.out)
    sv = " ".join(io_csv._fmt(s) for s in proj.singular_values)
    print(f"singular_values={sv}")
    top = float(np.sum(proj.variance_proportions[: args.r]))
    print(f"variance_captured={io_csv._fmt(top)}")
    return 0


def _cmd_decide(args) -> int:
    if args.config:
        cfg = io_csv.RunConfig.from_json(args.config)
        embedding, dec_cfg, horizon = cfg.embedding, cfg.decision, cfg.horizon
        patients = args.patients or cfg.patients_path
        bounds = args.bounds or cfg.bounds_path
        events = args.events or cfg.events_path
        out_prefix = args.out_prefix or cfg.out_prefix
    else:
        for flag in ("patients", "bounds", "events", "out_prefix", "items"):
            if getattr(args, flag) in (None, ""):
                raise ParameterError(f"decide requires --{flag.replace('_', '-')} "
                                     "(or --config)")
        embedding = _embedding(args)
        dec_cfg = decision.DecisionConfig(
            items=[s for s in args.items.split(",") if s], wl=args.wl, fc=args.fc
        )
        patients, bounds, events = args.patients, args.bounds, args.events
        out_prefix = args.out_prefix
        horizon = args.horizon
    records, dropped = io_csv.load_patient_records(patients, bounds, events)
    for subject, reason in dropped:
        print(f"dropped {subject}: {reason}", file=sys.stderr)
    decision_rows = []
    metric_rows = []
    per_patient = []
    for record in records:
        outcomes = decision.evaluate_patient(record, dec_cfg, embedding)
        metrics = decision.score_decisions(outcomes, record, dec_cfg, horizon=horizon)
        decision_rows.extend((record.subject_id, o) for o in outcomes)
        metric_rows.append((record.subject_id, metrics))
        per_patient.append(metrics)
    pooled = decision.aggregate_metrics(per_patient)
    metric_rows.append(("ALL", pooled))
    io_csv.write_decisions_csv(decision_rows, f"{out_prefix}_decisions.csv")
    io_csv.write_metrics_csv(metric_rows, f"{out_prefix}_metrics.csv")
    print(
        f"subjects={len(records)} dropped={len(dropped)} "
        f"tp={pooled.tp} fp={pooled.fp} tn={pooled.tn} fn={pooled.fn}"
    )
    return 0


def _add_embedding_flags(sub, default_l=20, default_lam=0.95):
    sub.add_argument("--L", type=int, default=default_l, help="embedding rows")
    sub.add_argument("--lambda", dest="lam", type=float, default=default_lam,
                     help="delay-consistency weight in [0, 1]")
    sub.add_argument("--scale-rows", action="store_true",
                     help="rescale rows to unit sample SD before fitting")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="stpca",
        description="spatial-temporal PCA: latent series, sweeps, and decisions",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate a synthetic series CSV")
    p.add_argument("--model", choices=("lorenz", "fold", "hopf"), required=True)
    p.add_argument("--n", type=int, help="number of variables (lorenz)")
    p.add_argument("--m", type=int, help="number of samples (lorenz)")
    p.add_argument("--nodes", type=int, default=None, help="network size (fold, hopf)")
    p.add_argument("--tau-steps", type=int, default=300)
    p.add_argument("--tau-star", type=int, default=200)
    p.add_argument("--coupling", type=float, default=1.0)
    p.add_argument("--dt", type=float, default=0.01)
    p.add_argument("--sample-every", type=int, default=10)
    p.add_argument("--transient", type=int, default=2000)
    p.add_argument("--dyn-noise", type=float, default=0.05,
                   help="dynamical noise SD (fold, hopf)")
    p.add_argument("--noise", type=float, default=0.0,
                   help="observation noise SD added after simulation")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("fit", help="fit stPCA and report alpha and the latent series")
    p.add_argument("--input", required=True)
    _add_embedding_flags(p)
    p.add_argument("--out-prefix", default="",
                   help="write <prefix>_w.csv, <prefix>_z.csv, <prefix>_latent.csv")
    p.set_defaults(func=_cmd_fit)

    p = sub.add_parser("sweep", help="sliding-window latent fluctuation sweep")
    p.add_argument("--input", required=True)
    _add_embedding_flags(p)
    p.add_argument("--window-width", type=int, default=50)
    p.add_argument("--stride", type=int, default=1)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("detect", help="flag anomalous windows of a sweep CSV")
    p.add_argument("--input", required=True)
    p.add_argument("--rule", choices=("mean-exceed", "fold-change"),
                   default="mean-exceed")
    p.add_argument("--fc", type=float, default=3.0, help="fold-change factor")
    p.add_argument("--baseline", type=int, default=5,
                   help="baseline windows for fold-change")
    p.set_defaults(func=_cmd_detect)

    p = sub.add_parser("pcfd", help="normalized Frechet distance between two curves")
    p.add_argument("--a", required=True)
    p.add_argument("--b", required=True)
    p.set_defaults(func=_cmd_pcfd)

    p = sub.add_parser("project", help="component time series of a fitted projection")
    p.add_argument("--input", required=True)
    _add_embedding_flags(p)
    p.add_argument("--r", type=int, default=2, help="number of components")
    p.add_argument("--method", dest="pca_method", choices=("stpca", "pca"),
                   default="stpca")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_project)

    p = sub.add_parser("decide", help="run and score the discharge rule")
    p.add_argument("--config", default="", help="JSON run configuration")
    p.add_argument("--patients", default="")
    p.add_argument("--bounds", default="")
    p.add_argument("--events", default="")
    _add_embedding_flags(p, default_l=5)
    p.add_argument("--items", default="", help="comma-separated indicator names")
    p.add_argument("--wl", type=int, default=5, help="short averaging window")
    p.add_argument("--fc", type=float, default=2.0, help="calm-down threshold")
    p.add_argument("--horizon", type=int, default=5,
                   help="hours after t counting as a timely discharge")
    p.add_argument("--out-prefix", default="")
    p.set_defaults(func=_cmd_decide)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (StpcaError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
