"""Static SVG figures from an experiment report.

Per problem:

* ``convergence_<problem>_<regime>.svg``: mean cost against iteration, one
  curve per series length (plus ``convergence_<problem>_shared.svg`` with
  both regimes on one vertical scale);
* ``predictions_<problem>.svg``: target series and in-sample predictions at
  the longest length, first restart;
* ``error_vs_length_<problem>.svg``: approximation error against length with
  mean, standard deviation, best and worst over restarts.
"""

from pathlib import Path

import matplotlib

matplotlib.use("svg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .experiment import problem_series  # noqa: E402
from .series import Source  # noqa: E402

__all__ = ["emit_plots"]

REGIME_STYLE = {"quadratic": {"color": "black"}, "sparse": {"color": "0.55"}}
_SVG_META = {"Date": None, "Creator": None}


def _save(fig, path):
    with plt.rc_context({"svg.hashsalt": "sparse-lrnn", "svg.fonttype": "none"}):
        fig.savefig(path, format="svg", metadata=_SVG_META)
    plt.close(fig)
    return path


def _mean_trace(records):
    """Per-iteration mean of the end-of-iteration costs; short runs hold their last value."""
    per_run = []
    for r in records:
        steps = len(r.cost_trace) // max(r.iterations, 1)
        per_run.append(r.cost_trace[steps - 1::steps] if steps else r.cost_trace)
    n = max(len(c) for c in per_run)
    padded = np.array([c + [c[-1]] * (n - len(c)) for c in per_run])
    return np.arange(1, n + 1), padded.mean(axis=0)


def _convergence(report, problem, regimes, path, title):
    fig, axes = plt.subplots(1, len(regimes), figsize=(5 * len(regimes), 4),
                             sharey=True, squeeze=False)
    for ax, regime in zip(axes[0], regimes):
        lengths = sorted({r.T for r in report.select(problem, regime=regime)})
        cmap = plt.get_cmap("viridis", max(len(lengths), 2))
        for i, T in enumerate(lengths):
            it, mean = _mean_trace(report.select(problem, T, regime))
            ax.plot(it, mean, color=cmap(i), label=f"T={T}")
        ax.set_xlabel("iteration")
        ax.set_ylabel("mean cost")
        ax.set_title(f"{title} ({regime})")
        ax.legend(fontsize="small")
    fig.tight_layout()
    return _save(fig, path)


def _predictions(report, problem, path):
    fig, ax = plt.subplots(figsize=(8, 4))
    T = max(r.T for r in report.select(problem))
    cfg = report.config
    try:
        target = problem_series(problem, T + 1, cfg.get("fir_path"), cfg.get("fir_start", 0))
    except (OSError, ValueError):
        target = None
    if target is not None:
        ax.plot(np.arange(2, T + 2), target[1:T + 1], color="black", lw=1.5, label="original")
    for regime, style in REGIME_STYLE.items():
        recs = report.select(problem, T, regime)
        if recs:
            ax.plot(np.arange(2, T + 2), recs[0].prediction, ls="--", lw=1.2,
                    label=f"approximation ({regime})", **style)
    ax.set_xlabel("t")
    ax.set_ylabel("x (scaled)")
    ax.set_title(f"{problem}: one-step predictions, T={T}")
    ax.legend(fontsize="small")
    fig.tight_layout()
    return _save(fig, path)


def _error_vs_length(report, problem, path):
    fig, ax = plt.subplots(figsize=(6, 4))
    aggs = report.aggregates()
    for regime, style in REGIME_STYLE.items():
        rows = sorted((cell[1], a["approx_cost"]) for cell, a in aggs.items()
                      if cell[0] == problem and cell[2] == regime and a["approx_cost"])
        if not rows:
            continue
        T = [t for t, _ in rows]
        ax.plot(T, [a.mean for _, a in rows], ls="-", label=f"{regime} mean", **style)
        ax.plot(T, [a.std for _, a in rows], ls="--", label=f"{regime} std", **style)
        ax.plot(T, [a.best for _, a in rows], ls=":", label=f"{regime} best/worst", **style)
        ax.plot(T, [a.worst for _, a in rows], ls=":", **style)
    ax.set_xlabel("T")
    ax.set_ylabel("approximation error")
    ax.set_title(f"{problem}: error over restarts")
    ax.legend(fontsize="small")
    fig.tight_layout()
    return _save(fig, path)


def emit_plots(report, outdir):
    """Write the figures for every problem in ``report``; return the paths."""
    if not report.select():
        raise ValueError("report has no successful records to plot")
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    written = []
    problems = list(dict.fromkeys(r.problem for r in report.select()))
    for problem in problems:
        regimes = [g for g in ("quadratic", "sparse") if report.select(problem, regime=g)]
        for regime in regimes:
            written.append(_convergence(report, problem, [regime],
                                        outdir / f"convergence_{problem}_{regime}.svg",
                                        problem))
        if len(regimes) > 1:
            written.append(_convergence(report, problem, regimes,
                                        outdir / f"convergence_{problem}_shared.svg", problem))
        written.append(_predictions(report, Source(problem).value,
                                    outdir / f"predictions_{problem}.svg"))
        written.append(_error_vs_length(report, problem,
                                        outdir / f"error_vs_length_{problem}.svg"))
    return written
