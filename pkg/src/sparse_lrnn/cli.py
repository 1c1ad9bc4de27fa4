"""Command-line entry point: ``sparse-lrnn {generate,train,experiment,stats,plot}``."""

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from .costs import Regime
from .experiment import (
    ExperimentConfig,
    emit_report,
    load_config,
    load_report,
    problem_series,
    run_experiments,
)
from .lrnn import TrainingProblem, predict_insample, random_model, train
from .plots import emit_plots
from .series import (
    MgConfig,
    Source,
    gen_henon,
    gen_mackey_glass,
    load_fir_laser,
    read_csv,
    scale_to_unit,
    write_csv,
)
from .stats import crossing_stats, eps_error_timeavg, nmrse

log = logging.getLogger("sparse_lrnn")

GENERATED = ("mg17", "mg30", "henon")


def _generate(args):
    if args.problem == "henon":
        x0 = y0 = 0.0
        if args.seed is not None:
            x0, y0 = np.random.default_rng(args.seed).uniform(-0.1, 0.1, size=2)
        raw = gen_henon(n=args.length, transient=args.transient, x0=x0, y0=y0)
    else:
        tau = 17.0 if args.problem == "mg17" else 30.0
        history = 1.2
        if args.seed is not None:
            history = float(np.random.default_rng(args.seed).uniform(1.1, 1.3))
        raw = gen_mackey_glass(MgConfig(tau=tau, length=args.length, history=history,
                                        transient_discard=args.transient))
    series = raw if args.raw else scale_to_unit(raw)
    write_csv(series, args.out)
    print(f"wrote {len(series)} samples to {args.out}")


def _train(args):
    values = problem_series(args.problem, args.length + 1, args.fir_path)
    prob = TrainingProblem.from_series(values, args.length, d_u=args.d_u,
                                       regime=args.regime, eps=args.eps)
    init = random_model(args.d_u, prob.d_x, np.random.default_rng(args.seed))
    state = train(prob, init, args.max_iters, args.tol, args.lp_method)
    print("iteration,half_step,cost")
    for rec in state.cost_trace:
        print(f"{rec.iteration},{rec.half_step},{rec.cost!r}")
    pred = predict_insample(state, prob)
    print(f"# converged_at={state.converged_at} "
          f"eps_error={eps_error_timeavg(pred, prob.zX, args.eps, prob.lambdas.appr):.6g} "
          f"nmrse={nmrse(pred, prob.zX):.6g}")


def _experiment(args):
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    if args.workers:
        cfg.workers = args.workers
    outdir = Path(args.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    report = run_experiments(cfg)
    emit_report(report, "json", outdir / "report.json")
    emit_report(report, "csv", outdir / "report.csv")
    failed = [r for r in report.records if not r.ok]
    print(f"{len(report.records)} runs, {len(failed)} failed; report in {outdir}")
    if not args.no_plots and len(failed) < len(report.records):
        for path in emit_plots(report, outdir / "plots"):
            print(f"plot {path}")


def _read_series(path):
    path = Path(path)
    with open(path) as fh:
        first = fh.readline()
    if first.strip().lower().startswith("index"):
        return read_csv(path)
    return load_fir_laser(path)


def _stats(args):
    series = _read_series(args.input)
    if len(series) < 2 or np.ptp(series.values) == 0:
        raise ValueError("constant series: nothing to analyse")
    if not series.scaled:
        series = scale_to_unit(series)
    st = crossing_stats(series.values)
    print(f"samples={len(series)}")
    print(f"crossing_distances={st.distances.size}")
    print(f"kurtosis={st.kurtosis:.6g}")
    print(f"loglog_slope={st.loglog_slope:.6g}")
    print(f"slope_r2={st.slope_r2:.6g}")


def _plot(args):
    report = load_report(args.report)
    for path in emit_plots(report, args.outdir):
        print(f"plot {path}")


def build_parser():
    parser = argparse.ArgumentParser(prog="sparse-lrnn", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="write a benchmark series as index,value CSV")
    p.add_argument("--problem", choices=GENERATED, required=True)
    p.add_argument("--length", type=int, required=True)
    p.add_argument("--seed", type=int, default=None,
                   help="randomize the initial condition (default: canonical start)")
    p.add_argument("--transient", type=int, default=1000)
    p.add_argument("--raw", action="store_true", help="skip scaling onto [-1, 1]")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_generate)

    p = sub.add_parser("train", help="train one network and print its cost trace")
    p.add_argument("--problem", choices=[s.value for s in Source if s is not Source.SYNTHETIC],
                   required=True)
    p.add_argument("--length", type=int, required=True)
    p.add_argument("--regime", choices=[r.value for r in Regime], default="sparse")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--d-u", dest="d_u", type=int, default=4)
    p.add_argument("--eps", type=float, default=0.05)
    p.add_argument("--max-iters", type=int, default=50)
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--lp-method", choices=("highs", "simplex"), default="highs")
    p.add_argument("--fir-path", default=None)
    p.set_defaults(func=_train)

    p = sub.add_parser("experiment", help="run the experiment matrix")
    p.add_argument("--config", default=None, help="key = value config file")
    p.add_argument("--outdir", default="results")
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--no-plots", action="store_true")
    p.set_defaults(func=_experiment)

    p = sub.add_parser("stats", help="zero-crossing statistics of a series")
    p.add_argument("--in", dest="input", required=True)
    p.set_defaults(func=_stats)

    p = sub.add_parser("plot", help="render figures from a saved report")
    p.add_argument("--report", required=True)
    p.add_argument("--outdir", default="plots")
    p.set_defaults(func=_plot)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)  # exits with status 2 on usage errors
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
