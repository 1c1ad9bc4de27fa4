"""Benchmark series: Mackey-Glass, Henon, and the Santa Fe FIR-laser data."""

import csv
import enum
import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

__all__ = [
    "Source",
    "TimeSeries",
    "MgConfig",
    "MG17",
    "MG30",
    "gen_mackey_glass",
    "gen_henon",
    "load_fir_laser",
    "scale_to_unit",
    "write_csv",
    "read_csv",
]


class Source(enum.Enum):
    MG17 = "mg17"
    MG30 = "mg30"
    FIR_LASER = "fir"
    HENON = "henon"
    SYNTHETIC = "synthetic"


@dataclass(frozen=True)
class TimeSeries:
    values: np.ndarray
    source: Source = Source.SYNTHETIC
    dt: float = 1.0
    scaled: bool = False

    def __len__(self):
        return len(self.values)


@dataclass(frozen=True)
class MgConfig:
    """Mackey-Glass ``dx/dt = a x(t-tau) / (1 + x(t-tau)^c) - b x(t)``.

    Integrated by RK4 with step ``h`` on a fine grid, sampled every
    ``sample_dt``. The first ``transient_discard`` samples are dropped.
    """

    a: float = 0.2
    b: float = 0.1
    c: float = 10.0
    tau: float = 17.0
    sample_dt: float = 6.0
    h: float = 0.1
    transient_discard: int = 1000
    length: int = 1000
    history: float = 1.2

    def __post_init__(self):
        for name, num in (("tau", self.tau), ("sample_dt", self.sample_dt)):
            ratio = num / self.h
            if abs(ratio - round(ratio)) > 1e-9 * max(1.0, ratio) or round(ratio) < 1:
                raise ValueError(f"{name}={num} is not a positive multiple of h={self.h}")

    @property
    def delay_steps(self):
        return round(self.tau / self.h)

    @property
    def sample_steps(self):
        return round(self.sample_dt / self.h)


MG17 = MgConfig(tau=17.0)
MG30 = MgConfig(tau=30.0)


def gen_mackey_glass(cfg=MG17, source=None):
    """Sample the Mackey-Glass delay equation.

    History is constant ``cfg.history`` on ``[-tau, 0]``. Delayed values at
    the half-step RK4 stages fall halfway between grid points and are
    linearly interpolated.
    """
    a, b, c, h = cfg.a, cfg.b, cfg.c, cfg.h
    n_tau, every = cfg.delay_steps, cfg.sample_steps
    n_samples = cfg.transient_discard + cfg.length
    n_steps = (n_samples - 1) * every

    x = np.empty(n_tau + n_steps + 1)
    x[:n_tau + 1] = cfg.history

    def rhs(xt, xd):
        return a * xd / (1.0 + xd**c) - b * xt

    for i in range(n_tau, n_tau + n_steps):
        xt = x[i]
        d0 = x[i - n_tau]
        d1 = x[i - n_tau + 1]
        dm = 0.5 * (d0 + d1)
        k1 = rhs(xt, d0)
        k2 = rhs(xt + 0.5 * h * k1, dm)
        k3 = rhs(xt + 0.5 * h * k2, dm)
        k4 = rhs(xt + h * k3, d1)
        nxt = xt + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not math.isfinite(nxt):
            raise FloatingPointError(f"Mackey-Glass state became {nxt} at step {i - n_tau + 1}")
        x[i + 1] = nxt

    samples = x[n_tau::every][cfg.transient_discard:]
    if source is None:
        source = {17.0: Source.MG17, 30.0: Source.MG30}.get(cfg.tau, Source.SYNTHETIC)
    return TimeSeries(samples, source, cfg.sample_dt)


def gen_henon(a=1.4, b=0.3, n=1000, transient=1000, x0=0.0, y0=0.0):
    """``x`` coordinate of the Henon map after ``transient`` discarded iterates."""
    if n < 1:
        raise ValueError("n must be positive")
    x, y = float(x0), float(y0)
    out = np.empty(n)
    for i in range(transient + n):
        x, y = 1.0 - a * x * x + y, b * x
        if abs(x) > 1e6:
            raise FloatingPointError(f"Henon orbit escaped at iterate {i + 1}")
        if i >= transient:
            out[i - transient] = x
    return TimeSeries(out, Source.HENON, 1.0)


def load_fir_laser(path, dt=1.0):
    """Read one integer sample per line; blank lines are skipped."""
    path = Path(path)
    values = []
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise OSError(f"cannot read {path}: {exc}") from exc
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line:
            continue
        try:
            values.append(float(int(line)))
        except ValueError:
            raise ValueError(f"{path}:{lineno}: not an integer sample: {line!r}") from None
    return TimeSeries(np.array(values), Source.FIR_LASER, dt)


def scale_to_unit(series):
    """Affinely map the series onto [-1, 1]."""
    v = np.asarray(series.values, dtype=np.float64)
    lo, hi = v.min(), v.max()
    if not hi > lo:
        raise ValueError("constant series cannot be scaled")
    scaled = 2.0 * (v - lo) / (hi - lo) - 1.0
    return replace(series, values=scaled, scaled=True)


def write_csv(series, path):
    """``index,value`` rows; ``repr`` gives the shortest exact round-trip decimal."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["index", "value"])
        for i, v in enumerate(np.asarray(series.values, dtype=np.float64)):
            w.writerow([i, repr(float(v))])


def read_csv(path, source=Source.SYNTHETIC):
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if rows and "value" not in rows[0]:
        raise ValueError(f"{path}: missing 'value' column")
    return TimeSeries(np.array([float(r["value"]) for r in rows]), source)
