"""Acceptance suite: one test per criterion, each reporting a PASS/FAIL line.

The training matrix (MG-17, MG-30, Henon; T = 10..100; 20 restarts; both
regimes) is run once per session and reused; criterion 11 runs it a second
time. Set ``SPARSE_LRNN_FIR`` to a local copy of the Santa Fe series A to
include the FIR-laser problem.
"""

import itertools
import os
import time

import numpy as np
import pytest

from helpers import sparse_grid_min, teacher_problem
from sparse_lrnn.costs import (
    CostFunction,
    CostTerm,
    EpsInsensitive,
    MultiTermExpr,
    Regime,
    SquaredK,
    assemble_lp,
    assemble_qp,
    eval_cost,
    l1_penalty,
    squared_penalty,
)
from sparse_lrnn.experiment import ExperimentConfig, emit_report, run_experiments
from sparse_lrnn.linalg import kron, trace_bilinear_check, vec
from sparse_lrnn.lrnn import approximation_cost, random_model, train
from sparse_lrnn.optimize import minimize_quadratic, solve_lp
from sparse_lrnn.series import MgConfig, gen_henon, gen_mackey_glass, load_fir_laser, scale_to_unit
from sparse_lrnn.stats import crossing_stats

pytestmark = pytest.mark.slow

FIR_PATH = os.environ.get("SPARSE_LRNN_FIR")
RESULTS = {}


def verdict(number, ok, detail):
    """Record the criterion outcome for the summary, then assert it."""
    RESULTS[number] = (bool(ok), detail)
    assert ok, f"criterion {number}: {detail}"


def matrix_config():
    problems = ["mg17", "mg30", "henon"] + (["fir"] if FIR_PATH else [])
    return ExperimentConfig(problems=problems, restarts=20, master_seed=0, fir_path=FIR_PATH)


def report_bytes(report, tmp_dir, tag):
    out = []
    for fmt in ("json", "csv"):
        p = tmp_dir / f"{tag}.{fmt}"
        emit_report(report, fmt, p)
        out.append(p.read_bytes())
    return out


@pytest.fixture(scope="session")
def matrix(tmp_path_factory):
    t0 = time.perf_counter()
    report = run_experiments(matrix_config())
    elapsed = time.perf_counter() - t0
    return report, elapsed, report_bytes(report, tmp_path_factory.mktemp("run1"), "report")


def mean_of(records, attr):
    return float(np.mean([getattr(r, attr) for r in records]))


def rel_err(a, b):
    a, b = np.asarray(a, float), np.asarray(b, float)
    scale = max(np.abs(a).max(), np.abs(b).max(), 1e-300)
    return float(np.abs(a - b).max() / scale)


# 1 ---------------------------------------------------------------------------

def test_criterion_01_identity_suite():
    rng = np.random.default_rng(1)
    t0 = time.perf_counter()
    worst = {"vec": 0.0, "mixed": 0.0, "transpose": 0.0}
    trace_ok = 0
    for _ in range(100):
        a, b, c, d = rng.integers(1, 6, size=4)
        B, C, D = rng.normal(size=(a, b)), rng.normal(size=(b, c)), rng.normal(size=(c, d))
        worst["vec"] = max(worst["vec"], rel_err(vec(B @ C @ D), kron(D.T, B) @ vec(C)))
        P, Q = rng.normal(size=(a, b)), rng.normal(size=(c, d))
        R, S = rng.normal(size=(b, 3)), rng.normal(size=(d, 2))
        worst["mixed"] = max(worst["mixed"],
                             rel_err(kron(P, Q) @ kron(R, S), kron(P @ R, Q @ S)))
        worst["transpose"] = max(worst["transpose"], rel_err(kron(P, Q).T, kron(P.T, Q.T)))
    for _ in range(100):
        p, q, m, n, k = rng.integers(1, 6, size=5)
        # tr(B X^T C Y D) with B: p x q, X: m x q, C: m x n, Y: n x k, D: k x p
        trace_ok += trace_bilinear_check(rng.normal(size=(p, q)), rng.normal(size=(m, q)),
                                         rng.normal(size=(m, n)), rng.normal(size=(n, k)),
                                         rng.normal(size=(k, p)), rtol=1e-10)
    elapsed = time.perf_counter() - t0
    ok = max(worst.values()) <= 1e-10 and trace_ok == 100 and elapsed < 1.0
    verdict(1, ok, f"max rel err {max(worst.values()):.1e}, trace {trace_ok}/100, "
                   f"{elapsed:.2f}s")


# 2 ---------------------------------------------------------------------------

def random_sparse_cost(rng, z_shape):
    out = (int(rng.integers(1, 4)), int(rng.integers(1, 3)))
    terms = [(rng.normal(size=(out[0], z_shape[0])) * 0.8,
              rng.normal(size=(z_shape[1], out[1])) * 0.8)
             for _ in range(int(rng.integers(1, 3)))]
    Z0 = rng.uniform(-2, 2, size=z_shape)
    N = sum(L @ Z0 @ M for L, M in terms) + 0.3 * rng.normal(size=out)
    expr = MultiTermExpr(terms, N, z_shape)
    return CostFunction([CostTerm(float(rng.uniform(0.5, 2)), expr,
                                  EpsInsensitive(np.full(out, 0.05))),
                         l1_penalty(float(rng.uniform(0.01, 0.3)), z_shape)], Regime.SPARSE)


def random_quadratic_cost(rng):
    z_shape = (int(rng.integers(1, 4)), int(rng.integers(1, 3)))
    out = (int(rng.integers(1, 4)), int(rng.integers(1, 4)))
    terms = [(rng.normal(size=(out[0], z_shape[0])), rng.normal(size=(z_shape[1], out[1])))
             for _ in range(int(rng.integers(1, 3)))]
    A = rng.normal(size=(out[0], out[0]))
    K = A @ A.T + np.eye(out[0])
    expr = MultiTermExpr(terms, rng.normal(size=out), z_shape)
    return CostFunction([CostTerm(float(rng.uniform(0.5, 2)), expr, SquaredK(K)),
                         squared_penalty(float(rng.uniform(0.01, 0.3)), z_shape)],
                        Regime.QUADRATIC)


def test_criterion_02_reduction_equivalence():
    rng = np.random.default_rng(2)
    t0 = time.perf_counter()
    shapes = [(1, 1), (2, 1), (1, 2), (3, 1), (2, 2)]
    lp_gap = 0.0
    lp_below = True
    for i in range(50):
        cost = random_sparse_cost(rng, shapes[i % len(shapes)])
        sol = solve_lp(assemble_lp(cost), "simplex")
        best = sparse_grid_min(cost)
        lp_below &= sol.objective_value <= best + 1e-9
        lp_gap = max(lp_gap, abs(best - sol.objective_value))
    qp_err, grad_max = 0.0, 0.0
    for _ in range(50):
        cost = random_quadratic_cost(rng)
        H, f, c = assemble_qp(cost)
        for _ in range(50):
            Z = rng.normal(size=cost.z_shape) * 2
            z = vec(Z).ravel()
            qp_err = max(qp_err, abs(0.5 * z @ H @ z + f @ z + c - eval_cost(cost, Z))
                         / max(1.0, abs(eval_cost(cost, Z))))
        zstar, _ = minimize_quadratic(H, f, c)
        h = 1e-5
        q = lambda v: 0.5 * v @ H @ v + f @ v  # noqa: E731
        g = [(q(zstar + h * e) - q(zstar - h * e)) / (2 * h) for e in np.eye(zstar.size)]
        grad_max = max(grad_max, float(np.abs(g).max()))
    elapsed = time.perf_counter() - t0
    ok = lp_below and lp_gap <= 0.1 and qp_err <= 1e-9 and grad_max <= 1e-6 and elapsed < 60
    verdict(2, ok, f"LP vs grid gap {lp_gap:.3g}, QP rel err {qp_err:.1e}, "
                   f"grad {grad_max:.1e}, {elapsed:.1f}s")


# 3 ---------------------------------------------------------------------------

def test_criterion_03_monotone_descent(matrix):
    report, _, _ = matrix
    failed = [r for r in report.records if not r.ok]
    violations = [r for r in report.records if r.ok and not r.monotone]
    verdict(3, not failed and not violations,
            f"{len(report.records)} runs, {len(violations)} violations, {len(failed)} failed")


# 4 ---------------------------------------------------------------------------

def test_criterion_04_teacher_recovery():
    prob = teacher_problem(Regime.QUADRATIC)
    costs = []
    for seed in range(20):
        state = train(prob, random_model(3, prob.d_x, np.random.default_rng(seed)),
                      max_iters=25)
        costs.append(approximation_cost(prob, state.model, state.U))
    worst = max(costs)
    verdict(4, worst <= 1e-6, f"worst approximation cost over 20 inits {worst:.2e}")


# 5 ---------------------------------------------------------------------------

def test_criterion_05_convergence_speed(matrix):
    report, elapsed, _ = matrix
    sparse = report.select("mg30", regime="sparse")
    quad = report.select("mg30", regime="quadratic")
    fs = np.mean([r.iters_to_1pct <= 10 for r in sparse])
    fq = np.mean([r.iters_to_1pct <= 25 for r in quad])
    ok = len(sparse) == len(quad) == 200 and fs >= 0.9 and fq >= 0.9 and elapsed < 1800
    verdict(5, ok, f"MG-30 sparse <=10: {fs:.1%}, quadratic <=25: {fq:.1%}; "
                   f"matrix {elapsed / 60:.1f} min")


# 6 ---------------------------------------------------------------------------

def test_criterion_06_table_one_band(matrix):
    report, _, _ = matrix
    problems = ["mg17", "mg30", "henon"] + (["fir"] if FIR_PATH else [])
    values = {p: mean_of(report.select(p, 100, "sparse"), "eps_error") for p in problems}
    ok = all(1e-5 <= v <= 5e-3 for v in values.values())
    verdict(6, ok, ", ".join(f"{p} {v:.2e}" for p, v in values.items()) + " (band [1e-5, 5e-3])")


# 7 ---------------------------------------------------------------------------

def test_criterion_07_nmrse_ordering(matrix):
    report, _, _ = matrix
    s = mean_of(report.select(regime="sparse"), "nmrse")
    q = mean_of(report.select(regime="quadratic"), "nmrse")
    verdict(7, s <= 0.15 and q >= 2 * s, f"sparse {s:.3f}, quadratic {q:.3f} "
                                         f"(ratio {q / s:.2f})")


# 8 ---------------------------------------------------------------------------

def test_criterion_08_table_two_signs():
    n = 10_000
    series = {
        "mg17": gen_mackey_glass(MgConfig(tau=17.0, length=n)),
        "mg30": gen_mackey_glass(MgConfig(tau=30.0, length=n)),
        "henon": gen_henon(n=n),
    }
    if FIR_PATH:
        series["fir"] = load_fir_laser(FIR_PATH)
    st = {k: crossing_stats(scale_to_unit(v).values) for k, v in series.items()}
    checks = [
        st["mg17"].kurtosis < 0,
        0.3 <= st["mg30"].kurtosis <= 3,
        1 <= st["henon"].kurtosis <= 6,
        st["mg30"].loglog_slope < -1,
        st["henon"].loglog_slope < -1,
    ]
    if FIR_PATH:
        checks.append(st["fir"].kurtosis > 10)
    detail = ", ".join(f"{k} kurt {s.kurtosis:.2f} slope {s.loglog_slope:.2f}"
                       for k, s in st.items())
    verdict(8, all(checks), detail)


# 9 ---------------------------------------------------------------------------

def test_criterion_09_sparsity(matrix):
    report, _, _ = matrix
    sp, qu = report.select("mg30", 100, "sparse"), report.select("mg30", 100, "quadratic")
    vals = {f"{m} {tag}": mean_of(recs, m)
            for m in ("sparsity_F", "sparsity_U") for tag, recs in (("sp", sp), ("qu", qu))}
    ok = (len(sp) == len(qu) == 20
          and vals["sparsity_F sp"] > vals["sparsity_F qu"]
          and vals["sparsity_U sp"] > vals["sparsity_U qu"])
    verdict(9, ok, ", ".join(f"{k} {v:.3f}" for k, v in vals.items()))


# 10 --------------------------------------------------------------------------

def test_criterion_10_rk4_order():
    errs = []
    for h in (0.1, 0.05, 0.025):
        cfg = MgConfig(a=0.0, b=1.0, tau=1.0, sample_dt=0.2, h=h, transient_discard=0, length=26)
        t = np.arange(26) * 0.2
        errs.append(np.abs(gen_mackey_glass(cfg).values - 1.2 * np.exp(-t)).max())
    factors = [a / b for a, b in itertools.pairwise(errs)]
    verdict(10, all(12 <= f <= 20 for f in factors),
            "factors " + ", ".join(f"{f:.2f}" for f in factors))


# 11 --------------------------------------------------------------------------

def test_criterion_11_determinism(matrix, tmp_path):
    _, _, first = matrix
    second = report_bytes(run_experiments(matrix_config()), tmp_path, "again")
    same = [a == b for a, b in zip(first, second)]
    verdict(11, all(same), f"json identical: {same[0]}, csv identical: {same[1]} "
                           f"({len(first[0])} / {len(first[1])} bytes)")
