"""Linear recurrent network identification by alternating minimization.

The network is::

    u_{t+1} = F u_t + G x_t
    o_{t+1} = H u_{t+1}            (o_{t+1} estimates x_{t+1})

Given ``X = [x_1 .. x_T]`` and its shift ``zX = [x_2 .. x_{T+1}]``, the
objective is

    lam_appr ||H (F U + G X) - zX||  +  lam_state ||(F U + G X) C_e - U C_b||
        + lam_F ||F||  +  lam_U ||U||

under either epsilon-insensitive/L1 norms (sparse regime) or squared norms
(quadratic regime). With ``F`` fixed every term is a multi-term expression in
``U`` and vice versa, so each half-step is an exact LP or SPD solve.
"""

import logging
from dataclasses import dataclass, field, replace
from typing import NamedTuple

import numpy as np

from .costs import (
    CostFunction,
    CostTerm,
    EpsInsensitive,
    MultiTermExpr,
    Regime,
    SquaredK,
    assemble_lp,
    assemble_qp,
    eval_cost,
    eval_norm,
    l1_penalty,
    recover_z,
    squared_penalty,
)
from .linalg import as_matrix, unvec
from .optimize import minimize_quadratic, solve_lp

__all__ = [
    "LrnnModel",
    "Lambdas",
    "TrainingProblem",
    "TrainingState",
    "CostRecord",
    "RecursivePrediction",
    "SolverError",
    "cut_begin",
    "cut_end",
    "default_lambdas",
    "random_model",
    "build_f_step",
    "build_u_step",
    "build_g_step",
    "full_cost",
    "approximation_cost",
    "solve_step",
    "train",
    "predict_insample",
    "predict_recursive",
    "teacher_series",
]

log = logging.getLogger(__name__)

DEFAULT_EPS = 0.05
DEFAULT_HIDDEN = 4
DESCENT_SLACK = 1e-9


class SolverError(RuntimeError):
    """A half-step solve failed; the message names the iteration and step."""


def cut_begin(T):
    """``T x (T-1)`` matrix with ``U @ cut_begin(T) == U[:, 1:]``."""
    return np.eye(T, T - 1, k=-1)


def cut_end(T):
    """``T x (T-1)`` matrix with ``U @ cut_end(T) == U[:, :-1]``."""
    return np.eye(T, T - 1)


class Lambdas(NamedTuple):
    appr: float
    state: float
    U: float
    F: float


def default_lambdas(T, d_x, d_u):
    """Weights that give every term a comparable contribution.

    ``1/(T d_x)``, ``1/((T-1) d_u)``, ``1/(T d_u)`` and ``1/d_u^2`` for the
    approximation, state, ``U`` and ``F`` terms respectively.
    """
    if T < 2:
        raise ValueError(f"need at least two time steps, got T={T}")
    return Lambdas(1.0 / (T * d_x), 1.0 / ((T - 1) * d_u), 1.0 / (T * d_u), 1.0 / d_u**2)


@dataclass(frozen=True)
class LrnnModel:
    F: np.ndarray
    G: np.ndarray
    H: np.ndarray

    def __post_init__(self):
        F, G, H = as_matrix(self.F), as_matrix(self.G), as_matrix(self.H)
        d_u = F.shape[0]
        if F.shape != (d_u, d_u) or G.shape[0] != d_u or H.shape != (G.shape[1], d_u):
            raise ValueError(f"inconsistent shapes F{F.shape} G{G.shape} H{H.shape}")
        object.__setattr__(self, "F", F)
        object.__setattr__(self, "G", G)
        object.__setattr__(self, "H", H)

    @property
    def d_u(self):
        return self.F.shape[0]

    @property
    def d_x(self):
        return self.G.shape[1]


def random_model(d_u, d_x, rng):
    """``F`` and ``G`` uniform on [0, 1]; ``H`` reads the leading hidden coordinates."""
    F = rng.uniform(0.0, 1.0, size=(d_u, d_u))
    G = rng.uniform(0.0, 1.0, size=(d_u, d_x))
    H = np.eye(d_x, d_u)
    return LrnnModel(F, G, H)


@dataclass(frozen=True)
class TrainingProblem:
    """Inputs ``X`` (``d_x x T``), targets ``zX`` and the cost settings."""

    X: np.ndarray
    zX: np.ndarray
    lambdas: Lambdas
    eps: float = DEFAULT_EPS
    regime: Regime = Regime.SPARSE
    lam_G: float | None = None

    def __post_init__(self):
        X, zX = as_matrix(self.X), as_matrix(self.zX)
        if X.ndim != 2 or X.shape != zX.shape:
            raise ValueError(f"X{X.shape} and zX{zX.shape} must share one shape")
        if X.shape[1] < 2:
            raise ValueError("need at least two time steps")
        if min(self.lambdas) <= 0:
            raise ValueError(f"weights must be positive: {self.lambdas}")
        if self.eps < 0:
            raise ValueError("eps must be nonnegative")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "zX", zX)
        object.__setattr__(self, "lambdas", Lambdas(*map(float, self.lambdas)))
        object.__setattr__(self, "regime", Regime.parse(self.regime))

    @classmethod
    def from_series(cls, values, T, d_u=DEFAULT_HIDDEN, regime=Regime.SPARSE,
                    eps=DEFAULT_EPS, lambdas=None):
        """Use the first ``T + 1`` samples: ``x_1..x_T`` as input, ``x_2..x_{T+1}`` as target."""
        v = np.asarray(values, dtype=np.float64)
        if v.ndim == 1:
            v = v[None, :]
        if v.shape[1] < T + 1:
            raise ValueError(f"need {T + 1} samples for T={T}, got {v.shape[1]}")
        d_x = v.shape[0]
        if lambdas is None:
            lambdas = default_lambdas(T, d_x, d_u)
        return cls(v[:, :T], v[:, 1:T + 1], lambdas, eps, Regime.parse(regime))

    @property
    def T(self):
        return self.X.shape[1]

    @property
    def d_x(self):
        return self.X.shape[0]

    @property
    def C_b(self):
        return cut_begin(self.T)

    @property
    def C_e(self):
        return cut_end(self.T)

    def residual_norm(self, shape):
        if self.regime is Regime.SPARSE:
            return EpsInsensitive(np.full(shape, self.eps))
        return SquaredK(np.eye(shape[0]))

    def penalty(self, weight, z_shape, name):
        if self.regime is Regime.SPARSE:
            return l1_penalty(weight, z_shape, name)
        return squared_penalty(weight, z_shape, name)


class CostRecord(NamedTuple):
    iteration: int
    half_step: str
    cost: float


@dataclass
class TrainingState:
    model: LrnnModel
    U: np.ndarray
    cost_trace: list = field(default_factory=list)
    converged_at: int | None = None
    rejected_steps: int = 0

    @property
    def final_cost(self):
        return self.cost_trace[-1].cost

    def iteration_costs(self):
        """Cost after each completed iteration (its last half-step)."""
        by_iter = {}
        for rec in self.cost_trace:
            by_iter[rec.iteration] = rec.cost
        return [by_iter[k] for k in sorted(by_iter)]

    def iterations_to_within(self, rel=0.01):
        """First iteration whose cost is within ``rel`` of the final cost."""
        costs = self.iteration_costs()
        final = costs[-1]
        for k, c in enumerate(costs, start=1):
            if c <= final + rel * abs(final):
                return k
        return len(costs)


def _appr_terms(problem, model):
    # residual H (F U + G X) - zX, split into the part that depends on Z
    return problem.zX - model.H @ model.G @ problem.X


def build_f_step(problem, model, U):
    """Cost over ``Z = F`` with ``U``, ``G`` and ``H`` held fixed.

    The ``lam_U ||U||`` term is constant here and left out.
    """
    U = as_matrix(U)
    lam = problem.lambdas
    d_u, T = model.d_u, problem.T
    if U.shape != (d_u, T):
        raise ValueError(f"U has shape {U.shape}, expected {(d_u, T)}")
    z_shape = (d_u, d_u)
    Ce, Cb = problem.C_e, problem.C_b
    GX = model.G @ problem.X

    appr = MultiTermExpr(((model.H, U),), _appr_terms(problem, model), z_shape)
    state = MultiTermExpr(((np.eye(d_u), U @ Ce),), U @ Cb - GX @ Ce, z_shape)
    terms = (
        CostTerm(lam.appr, appr, problem.residual_norm(appr.residual_shape), "appr"),
        CostTerm(lam.state, state, problem.residual_norm(state.residual_shape), "state"),
        problem.penalty(lam.F, z_shape, "reg_F"),
    )
    return CostFunction(terms, problem.regime)


def build_u_step(problem, model):
    """Cost over ``Z = U`` with the network fixed; ``lam_F ||F||`` is left out."""
    lam = problem.lambdas
    d_u, T = model.d_u, problem.T
    z_shape = (d_u, T)
    Ce, Cb = problem.C_e, problem.C_b
    GX = model.G @ problem.X

    appr = MultiTermExpr(((model.H @ model.F, np.eye(T)),),
                         _appr_terms(problem, model), z_shape)
    state = MultiTermExpr(((model.F, Ce), (np.eye(d_u), -Cb)), -GX @ Ce, z_shape)
    terms = (
        CostTerm(lam.appr, appr, problem.residual_norm(appr.residual_shape), "appr"),
        CostTerm(lam.state, state, problem.residual_norm(state.residual_shape), "state"),
        problem.penalty(lam.U, z_shape, "reg_U"),
    )
    return CostFunction(terms, problem.regime)


def _lam_G(problem, model):
    if problem.lam_G is not None:
        return problem.lam_G
    return 1.0 / (model.d_u * model.d_x)


def build_g_step(problem, model, U):
    """Cost over ``Z = G`` for the optional input-weight update."""
    U = as_matrix(U)
    lam = problem.lambdas
    d_u = model.d_u
    z_shape = (d_u, model.d_x)
    Ce, Cb = problem.C_e, problem.C_b
    FU = model.F @ U

    appr = MultiTermExpr(((model.H, problem.X),), problem.zX - model.H @ FU, z_shape)
    state = MultiTermExpr(((np.eye(d_u), problem.X @ Ce),), U @ Cb - FU @ Ce, z_shape)
    terms = (
        CostTerm(lam.appr, appr, problem.residual_norm(appr.residual_shape), "appr"),
        CostTerm(lam.state, state, problem.residual_norm(state.residual_shape), "state"),
        problem.penalty(_lam_G(problem, model), z_shape, "reg_G"),
    )
    return CostFunction(terms, problem.regime)


def full_cost(problem, model, U, include_G=False):
    """The complete objective at ``(F, U)`` (plus the ``G`` penalty if trained)."""
    lam = problem.lambdas
    F_cost = build_f_step(problem, model, U)
    total = eval_cost(F_cost, model.F)
    reg = problem.penalty(lam.U, U.shape, "reg_U")
    total += reg.weight * eval_norm(reg.norm, U)
    if include_G:
        reg = problem.penalty(_lam_G(problem, model), model.G.shape, "reg_G")
        total += reg.weight * eval_norm(reg.norm, model.G)
    return total


def approximation_cost(problem, model, U):
    """``lam_appr ||H (F U + G X) - zX||`` under the problem's norm."""
    resid = predict_insample_raw(model, U, problem.X) - problem.zX
    return problem.lambdas.appr * eval_norm(problem.residual_norm(resid.shape), resid)


def solve_step(cost, lp_method="highs"):
    """Exact minimizer of one half-step cost."""
    if cost.regime is Regime.SPARSE:
        sol = solve_lp(assemble_lp(cost, sparse=lp_method != "simplex"), lp_method)
        if not sol.optimal:
            raise SolverError(f"LP returned {sol.status.value}")
        return recover_z(cost, sol.y)
    H, f, const = assemble_qp(cost)
    z, _ = minimize_quadratic(H, f, const)
    return unvec(z, *cost.z_shape)


def train(problem, init, max_iters=50, tol=1e-6, lp_method="highs", optimize_G=False):
    """Alternate exact ``U``- and ``F``-steps starting from ``init``.

    The first half-step fits ``U`` to the initial network, so no initial
    ``U`` is needed. The full objective is recorded after every half-step.
    Iteration stops after ``max_iters`` or once a full iteration lowers the
    objective by less than ``tol`` relative. A half-step whose numerical
    solution scores worse than the current block keeps the current block.
    """
    model = init
    U = np.zeros((init.d_u, problem.T))
    state = TrainingState(model, U)
    prev_iter_cost = None

    def step(k, name, build, current, apply):
        nonlocal model, U
        cost = build()
        try:
            Z = solve_step(cost, lp_method)
        except Exception as exc:
            raise SolverError(f"iteration {k}, {name}: {exc}") from exc
        candidate = apply(Z)
        new = full_cost(problem, candidate[0], candidate[1], optimize_G)
        if current is not None and new > current:
            state.rejected_steps += 1
            return current
        model, U = candidate
        return new

    current = None
    for k in range(1, max_iters + 1):
        current = step(k, "U-step", lambda: build_u_step(problem, model), current,
                       lambda Z: (model, Z))
        state.cost_trace.append(CostRecord(k, "U-step", current))

        current = step(k, "F-step", lambda: build_f_step(problem, model, U), current,
                       lambda Z: (replace(model, F=Z), U))
        state.cost_trace.append(CostRecord(k, "F-step", current))

        if optimize_G:
            current = step(k, "G-step", lambda: build_g_step(problem, model, U), current,
                           lambda Z: (replace(model, G=Z), U))
            state.cost_trace.append(CostRecord(k, "G-step", current))

        state.model, state.U = model, U
        if prev_iter_cost is not None:
            drop = prev_iter_cost - current
            if drop <= tol * max(abs(prev_iter_cost), np.finfo(float).tiny):
                state.converged_at = k
                break
        prev_iter_cost = current

    log.debug("trained %s regime, T=%d: %d iterations, cost %.6g",
              problem.regime.value, problem.T, k, current)
    return state


def predict_insample_raw(model, U, X):
    return model.H @ (model.F @ U + model.G @ X)


def predict_insample(state, problem):
    """One-step predictions ``H (F U + G X)`` using the optimized hidden states."""
    return predict_insample_raw(state.model, state.U, problem.X)


@dataclass(frozen=True)
class RecursivePrediction:
    values: np.ndarray
    diverged: bool
    behaviour: str


def predict_recursive(model, x_seed, u_seed, horizon, limit=1e12):
    """Run the network closed-loop on its own outputs for ``horizon`` steps.

    A linear network either decays or blows up; once the state norm passes
    ``limit`` (or stops being finite) the trajectory is cut short and
    flagged. ``behaviour`` is ``"diverged"``, ``"growing"`` or ``"decaying"``
    from the trajectory norm.
    """
    x = as_matrix(x_seed).reshape(model.d_x, 1)
    u = as_matrix(u_seed).reshape(model.d_u, 1)
    out = []
    diverged = False
    for _ in range(horizon):
        u = model.F @ u + model.G @ x
        if not np.all(np.isfinite(u)) or np.abs(u).max() > limit:
            diverged = True
            break
        x = model.H @ u
        out.append(x[:, 0])
    values = np.array(out).T if out else np.zeros((model.d_x, 0))

    if diverged:
        behaviour = "diverged"
    else:
        norms = np.abs(values).max(axis=0) if values.size else np.zeros(0)
        w = max(1, norms.size // 4)
        head, tail = norms[:w].max(initial=0.0), norms[-w:].max(initial=0.0)
        behaviour = "growing" if tail > head else "decaying"
    return RecursivePrediction(values, diverged, behaviour)


def teacher_series(model, u1, T):
    """``T + 1`` outputs ``x_t = H u_t`` of ``model`` driven by its own output."""
    u = as_matrix(u1).reshape(model.d_u, 1)
    xs = []
    for _ in range(T + 1):
        x = model.H @ u
        xs.append(x[:, 0])
        u = model.F @ u + model.G @ x
    return np.array(xs).T
