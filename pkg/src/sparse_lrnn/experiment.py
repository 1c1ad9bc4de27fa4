"""Experiment matrix: problems x lengths x regimes x restarts.

Every cell draws its random network from a seed derived from
``(master_seed, problem, T, regime, restart)``, so results do not depend on
execution order or on the number of worker processes.
"""

import csv
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from functools import lru_cache
from pathlib import Path

import numpy as np

from .costs import Regime
from .lrnn import (
    DEFAULT_EPS,
    DEFAULT_HIDDEN,
    TrainingProblem,
    approximation_cost,
    predict_insample,
    random_model,
    train,
)
from .series import (
    MgConfig,
    Source,
    gen_henon,
    gen_mackey_glass,
    load_fir_laser,
    scale_to_unit,
)
from .stats import eps_error_timeavg, nmrse, sparsity_fraction

__all__ = [
    "ExperimentConfig",
    "CellRecord",
    "Aggregate",
    "ExperimentReport",
    "load_config",
    "problem_series",
    "cell_seed",
    "run_cell",
    "run_experiments",
    "aggregate",
    "emit_report",
    "load_report",
]

log = logging.getLogger(__name__)

# fixed codes keep seeds stable when the problem list changes
PROBLEM_CODES = {Source.MG17: 0, Source.MG30: 1, Source.FIR_LASER: 2, Source.HENON: 3}
REGIME_CODES = {Regime.SPARSE: 0, Regime.QUADRATIC: 1}
BASE_LENGTH = 1000
SPARSITY_THRESHOLD = 1e-6
AGGREGATED = ("eps_error", "sq_error", "approx_cost", "final_cost", "nmrse",
              "iters_to_1pct", "sparsity_F", "sparsity_U")


def _parse_problem(name):
    if isinstance(name, Source):
        return name
    aliases = {"mg-17": "mg17", "mg-30": "mg30", "fir-laser": "fir", "firlaser": "fir",
               "fir_laser": "fir", "laser": "fir"}
    key = str(name).strip().lower()
    return Source(aliases.get(key, key))


@dataclass
class ExperimentConfig:
    problems: list = field(default_factory=lambda: [Source.MG17, Source.MG30, Source.HENON])
    lengths: list = field(default_factory=lambda: list(range(10, 101, 10)))
    restarts: int = 20
    regimes: list = field(default_factory=lambda: [Regime.SPARSE, Regime.QUADRATIC])
    d_u: int = DEFAULT_HIDDEN
    eps: float = DEFAULT_EPS
    max_iters: int = 50
    tol: float = 1e-6
    master_seed: int = 0
    fir_path: str | None = None
    fir_start: int = 0
    lp_method: str = "highs"
    optimize_G: bool = False
    workers: int = 1

    def __post_init__(self):
        self.problems = [_parse_problem(p) for p in self.problems]
        self.regimes = [Regime.parse(r) for r in self.regimes]
        self.lengths = [int(t) for t in self.lengths]
        if any(t < 2 for t in self.lengths):
            raise ValueError("every length must be at least 2")
        if self.restarts < 1:
            raise ValueError("restarts must be at least 1")
        if Source.FIR_LASER in self.problems and not self.fir_path:
            raise ValueError("FIR-laser runs need fir_path")
        if Source.SYNTHETIC in self.problems:
            raise ValueError("synthetic series are not an experiment problem")

    def to_dict(self):
        d = asdict(self)
        d["problems"] = [p.value for p in self.problems]
        d["regimes"] = [r.value for r in self.regimes]
        d.pop("workers")  # does not affect results
        return d


_LIST_KEYS = {"problems", "lengths", "regimes"}


def load_config(path):
    """Parse ``key = value`` lines (``#`` starts a comment) into a config."""
    types = {f.name: f for f in fields(ExperimentConfig)}
    kwargs = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in types:
            raise ValueError(f"{path}:{lineno}: unknown key {key!r}")
        if key in _LIST_KEYS:
            kwargs[key] = [v.strip() for v in value.split(",") if v.strip()]
        elif key in ("restarts", "d_u", "max_iters", "master_seed", "fir_start", "workers"):
            kwargs[key] = int(value)
        elif key in ("eps", "tol"):
            kwargs[key] = float(value)
        elif key == "optimize_G":
            kwargs[key] = value.lower() in ("1", "true", "yes", "on")
        elif key == "fir_path":
            kwargs[key] = value or None
        else:
            kwargs[key] = value
    return ExperimentConfig(**kwargs)


@lru_cache(maxsize=None)
def _base_series(problem, length, fir_path, fir_start):
    if problem is Source.MG17:
        raw = gen_mackey_glass(MgConfig(tau=17.0, length=length))
    elif problem is Source.MG30:
        raw = gen_mackey_glass(MgConfig(tau=30.0, length=length))
    elif problem is Source.HENON:
        raw = gen_henon(n=length)
    elif problem is Source.FIR_LASER:
        raw = load_fir_laser(fir_path)
    else:
        raise ValueError(f"no generator for {problem}")
    scaled = scale_to_unit(raw).values
    return scaled[fir_start:] if problem is Source.FIR_LASER else scaled


def problem_series(problem, min_length, fir_path=None, fir_start=0):
    """Scaled benchmark series with at least ``min_length`` samples.

    Generated series are scaled over ``max(1000, min_length)`` samples; the
    FIR data are scaled as a whole and read from ``fir_start``.
    """
    problem = _parse_problem(problem)
    length = max(BASE_LENGTH, min_length)
    values = _base_series(problem, length, fir_path, fir_start)
    if values.size < min_length:
        raise ValueError(f"{problem.value} series has {values.size} samples, need {min_length}")
    return values


def cell_seed(master_seed, problem, T, regime, restart):
    """64-bit seed for one cell, derived from the full cell key."""
    key = [int(master_seed), PROBLEM_CODES[problem], int(T), REGIME_CODES[regime], int(restart)]
    state = np.random.SeedSequence(key).generate_state(2, dtype=np.uint32)
    return int(state[0]) << 32 | int(state[1])


@dataclass
class CellRecord:
    problem: str
    T: int
    regime: str
    restart: int
    seed: int
    status: str = "ok"
    error: str = ""
    iterations: int = 0
    converged_at: int | None = None
    iters_to_1pct: int | None = None
    final_cost: float | None = None
    approx_cost: float | None = None
    eps_error: float | None = None
    sq_error: float | None = None
    nmrse: float | None = None
    sparsity_F: float | None = None
    sparsity_U: float | None = None
    rejected_steps: int = 0
    monotone: bool | None = None
    cost_trace: list = field(default_factory=list)
    prediction: list = field(default_factory=list)

    @property
    def ok(self):
        return self.status == "ok"

    @property
    def cell(self):
        return (self.problem, self.T, self.regime)


def _monotone(trace, slack=1e-9):
    return all(b <= a + slack for a, b in zip(trace, trace[1:]))


def run_cell(cfg, problem, T, regime, restart):
    """Train one network and evaluate it; failures are recorded, not raised."""
    seed = cell_seed(cfg.master_seed, problem, T, regime, restart)
    rec = CellRecord(problem.value, T, regime.value, restart, seed)
    try:
        values = problem_series(problem, T + 1, cfg.fir_path, cfg.fir_start)
        prob = TrainingProblem.from_series(values, T, d_u=cfg.d_u, regime=regime, eps=cfg.eps)
        init = random_model(cfg.d_u, prob.d_x, np.random.default_rng(seed))
        state = train(prob, init, cfg.max_iters, cfg.tol, cfg.lp_method, cfg.optimize_G)
    except Exception as exc:  # one bad cell must not sink the matrix
        rec.status = "failed"
        rec.error = f"{type(exc).__name__}: {exc}"
        log.warning("cell %s T=%d %s #%d failed: %s", problem.value, T, regime.value,
                    restart, rec.error)
        return rec

    pred = predict_insample(state, prob)
    resid = pred - prob.zX
    trace = [c.cost for c in state.cost_trace]
    rec.iterations = state.cost_trace[-1].iteration
    rec.converged_at = state.converged_at
    rec.iters_to_1pct = state.iterations_to_within(0.01)
    rec.final_cost = state.final_cost
    rec.approx_cost = approximation_cost(prob, state.model, state.U)
    rec.eps_error = eps_error_timeavg(pred, prob.zX, cfg.eps, prob.lambdas.appr)
    rec.sq_error = float(prob.lambdas.appr * np.sum(resid**2))
    rec.nmrse = nmrse(pred, prob.zX)
    rec.sparsity_F = sparsity_fraction(state.model.F, SPARSITY_THRESHOLD)
    rec.sparsity_U = sparsity_fraction(state.U, SPARSITY_THRESHOLD)
    rec.rejected_steps = state.rejected_steps
    rec.monotone = _monotone(trace)
    rec.cost_trace = trace
    rec.prediction = [float(v) for v in pred.ravel()]
    return rec


@dataclass
class Aggregate:
    n: int
    mean: float
    std: float
    best: float
    worst: float


def aggregate(values):
    """Mean, population standard deviation, min and max of finite values."""
    v = np.array([x for x in values if x is not None and math.isfinite(x)], dtype=np.float64)
    if v.size == 0:
        return None
    mean = float(np.mean(v))
    # clamp: mean of equal values can round a hair outside [min, max]
    best, worst = float(v.min()), float(v.max())
    return Aggregate(int(v.size), min(max(mean, best), worst), float(np.std(v)), best, worst)


@dataclass
class ExperimentReport:
    config: dict
    records: list

    def cells(self):
        """Cell keys in first-appearance order."""
        seen = {}
        for r in self.records:
            seen.setdefault(r.cell, None)
        return list(seen)

    def select(self, problem=None, T=None, regime=None, ok_only=True):
        out = []
        for r in self.records:
            if ok_only and not r.ok:
                continue
            if problem is not None and r.problem != _value(problem):
                continue
            if T is not None and r.T != T:
                continue
            if regime is not None and r.regime != _value(regime):
                continue
            out.append(r)
        return out

    def aggregates(self):
        """``{(problem, T, regime): {metric: Aggregate}}`` over successful records."""
        out = {}
        for cell in self.cells():
            recs = self.select(*cell)
            out[cell] = {m: aggregate(getattr(r, m) for r in recs) for m in AGGREGATED}
        return out


def _value(x):
    return x.value if hasattr(x, "value") else str(x)


def _cells(cfg):
    for problem in cfg.problems:
        for T in cfg.lengths:
            for regime in cfg.regimes:
                for restart in range(cfg.restarts):
                    yield problem, T, regime, restart


def _run_packed(args):
    return run_cell(*args)


def run_experiments(cfg):
    """Run every cell of the matrix and collect the records in matrix order."""
    jobs = [(cfg, *cell) for cell in _cells(cfg)]
    if cfg.workers > 1:
        with ProcessPoolExecutor(cfg.workers) as pool:
            records = list(pool.map(_run_packed, jobs, chunksize=4))
    else:
        records = [_run_packed(j) for j in jobs]
    return ExperimentReport(cfg.to_dict(), records)


# -- serialization -----------------------------------------------------------

CSV_FIELDS = [f.name for f in fields(CellRecord)]
_INT_FIELDS = {"T", "restart", "seed", "iterations", "converged_at", "iters_to_1pct",
               "rejected_steps"}
_LIST_FIELDS = {"cost_trace", "prediction"}
_STR_FIELDS = {"problem", "regime", "status", "error"}


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, list):
        return ";".join(repr(float(x)) for x in v)
    return str(v)


def _parse(name, s):
    if name in _STR_FIELDS:
        return s
    if name in _LIST_FIELDS:
        return [float(x) for x in s.split(";")] if s else []
    if s == "":
        return None
    if name == "monotone":
        return s == "true"
    if name in _INT_FIELDS:
        return int(s)
    return float(s)


def _json_ready(x):
    if isinstance(x, float) and not math.isfinite(x):
        return None
    return x


def _report_json(report):
    tree = {}
    aggs = report.aggregates()
    for cell in report.cells():
        problem, T, regime = cell
        node = tree.setdefault(problem, {}).setdefault(str(T), {})
        node[regime] = {
            "aggregates": {m: (asdict(a) if a else None) for m, a in aggs[cell].items()},
            "records": [
                {k: _json_ready(v) for k, v in asdict(r).items()}
                for r in report.select(*cell, ok_only=False)
            ],
        }
    return {"config": report.config, "results": tree}


def emit_report(report, fmt, path):
    """Write ``report`` as CSV (one row per record) or nested JSON."""
    path = Path(path)
    fmt = fmt.lower()
    try:
        if fmt == "csv":
            with open(path, "w", newline="") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(CSV_FIELDS)
                for r in report.records:
                    w.writerow([_fmt(getattr(r, k)) for k in CSV_FIELDS])
        elif fmt == "json":
            text = json.dumps(_report_json(report), indent=1, allow_nan=False)
            path.write_text(text + "\n")
        else:
            raise ValueError(f"unknown report format {fmt!r}")
    except OSError as exc:
        raise OSError(f"cannot write report to {path}: {exc}") from exc


def load_report(path):
    """Read a report written by :func:`emit_report` (format from the suffix)."""
    path = Path(path)
    if path.suffix.lower() == ".json":
        data = json.loads(path.read_text())
        records = []
        for per_T in data["results"].values():
            for per_regime in per_T.values():
                for node in per_regime.values():
                    records.extend(CellRecord(**r) for r in node["records"])
        return ExperimentReport(data["config"], records)
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    records = [CellRecord(**{k: _parse(k, row[k]) for k in CSV_FIELDS}) for row in rows]
    return ExperimentReport({}, records)
