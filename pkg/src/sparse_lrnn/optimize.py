"""Linear-program and quadratic minimizers used by the alternating trainer.

Two LP backends share one interface:

``"simplex"``
    A dense two-phase tableau simplex with Bland's rule. Slow, but
    self-contained and guaranteed to terminate; it is the reference solver.
``"highs"``
    scipy's HiGHS dual simplex. Used for the training-scale programs, which
    run to a few thousand rows.
"""

import enum
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.optimize import linprog

from .linalg import as_matrix, solve_spd

__all__ = [
    "LinearProgram",
    "LpStatus",
    "LpSolution",
    "solve_lp",
    "simplex",
    "minimize_quadratic",
]

PIVOT_TOL = 1e-9
FEAS_TOL = 1e-9


class LpStatus(enum.Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"


@dataclass(frozen=True)
class LinearProgram:
    """``min w^T y`` subject to ``D y <= q``.

    The first ``num_free`` entries of ``y`` are unrestricted in sign, the rest
    are nonnegative. ``D`` may be a dense array or a scipy sparse matrix.
    """

    w: np.ndarray
    D: object
    q: np.ndarray
    num_free: int = 0

    def __post_init__(self):
        w = np.asarray(self.w, dtype=np.float64).ravel()
        q = np.asarray(self.q, dtype=np.float64).ravel()
        D = self.D if sp.issparse(self.D) else as_matrix(self.D)
        if D.shape != (q.size, w.size):
            raise ValueError(f"D has shape {D.shape}, expected {(q.size, w.size)}")
        if not 0 <= self.num_free <= w.size:
            raise ValueError(f"num_free={self.num_free} out of range for {w.size} variables")
        object.__setattr__(self, "w", w)
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "D", D)

    @property
    def num_vars(self):
        return self.w.size

    def dense_D(self):
        return self.D.toarray() if sp.issparse(self.D) else self.D


@dataclass(frozen=True)
class LpSolution:
    status: LpStatus
    y: np.ndarray | None = None
    objective_value: float = float("nan")
    iterations: int = 0
    info: dict = field(default_factory=dict)

    @property
    def optimal(self):
        return self.status is LpStatus.OPTIMAL


def _drop_bound_rows(lp):
    """Drop rows that only restate ``y_j >= 0`` for a nonnegative ``y_j``.

    The Appendix-style constructions carry explicit ``-a <= 0`` rows; they are
    implied by the variable bounds and only inflate the tableau.
    """
    D = sp.csr_array(lp.D) if not sp.issparse(lp.D) else sp.csr_array(lp.D)
    nnz = np.diff(D.indptr)
    keep = np.ones(D.shape[0], dtype=bool)
    single = np.flatnonzero(nnz == 1)
    if single.size:
        cols = D.indices[D.indptr[single]]
        vals = D.data[D.indptr[single]]
        redundant = (cols >= lp.num_free) & (vals < 0) & (lp.q[single] >= 0)
        keep[single[redundant]] = False
    empty = np.flatnonzero(nnz == 0)
    keep[empty[lp.q[empty] >= 0]] = False
    return keep


def solve_lp(lp, method="simplex"):
    """Solve ``lp`` with the chosen backend and return an :class:`LpSolution`."""
    keep = _drop_bound_rows(lp)
    if method == "simplex":
        D = lp.dense_D()[keep]
        return simplex(lp.w, D, lp.q[keep], lp.num_free)
    if method == "highs":
        return _solve_highs(lp, keep)
    raise ValueError(f"unknown LP method {method!r}")


def _solve_highs(lp, keep):
    D = sp.csr_array(lp.D)[keep] if keep.any() else None
    q = lp.q[keep] if keep.any() else None
    bounds = [(None, None)] * lp.num_free + [(0, None)] * (lp.num_vars - lp.num_free)
    res = linprog(lp.w, A_ub=D, b_ub=q, bounds=bounds, method="highs-ds")
    if res.status == 0:
        return LpSolution(LpStatus.OPTIMAL, np.asarray(res.x), float(res.fun),
                          int(res.nit))
    if res.status == 2:
        return LpSolution(LpStatus.INFEASIBLE, info={"message": res.message})
    if res.status == 3:
        return LpSolution(LpStatus.UNBOUNDED, info={"message": res.message})
    raise RuntimeError(f"HiGHS failed: {res.message}")


class _Tableau:
    """Dense tableau ``[B^-1 A | B^-1 b]`` with one objective row."""

    def __init__(self, A, b, basis):
        self.body = np.hstack([A, b[:, None]])
        self.basis = list(basis)
        self.cost = None
        self.iterations = 0

    def set_cost(self, c):
        # reduced costs c_j - c_B^T B^-1 A_j, last entry is -objective
        row = np.append(c, 0.0)
        cb = c[self.basis]
        self.cost = row - cb @ self.body

    def pivot(self, r, j):
        body = self.body
        body[r] /= body[r, j]
        col = body[:, j].copy()
        col[r] = 0.0
        body -= np.outer(col, body[r])
        self.cost -= self.cost[j] * body[r]
        self.basis[r] = j
        self.iterations += 1

    def entering(self, allowed):
        # Bland: lowest-index column with negative reduced cost
        cand = np.flatnonzero((self.cost[:-1] < -PIVOT_TOL) & allowed)
        return int(cand[0]) if cand.size else None

    def leaving(self, j):
        col = self.body[:, j]
        rhs = self.body[:, -1]
        rows = np.flatnonzero(col > PIVOT_TOL)
        if rows.size == 0:
            return None
        ratios = rhs[rows] / col[rows]
        best = ratios.min()
        ties = rows[ratios <= best + PIVOT_TOL * max(1.0, abs(best))]
        # Bland: among tied rows, the one whose basic variable has lowest index
        return int(min(ties, key=lambda i: self.basis[i]))

    def run(self, allowed, max_iter):
        while True:
            j = self.entering(allowed)
            if j is None:
                return LpStatus.OPTIMAL
            r = self.leaving(j)
            if r is None:
                return LpStatus.UNBOUNDED
            if self.iterations >= max_iter:
                raise RuntimeError(f"simplex exceeded {max_iter} pivots")
            self.pivot(r, j)


def simplex(w, D, q, num_free=0, max_iter=100_000):
    """Two-phase dense tableau simplex for ``min w^T y, D y <= q``.

    Free variables are split as ``y = y+ - y-``; every row gets a slack and
    rows with negative right-hand side also get a phase-1 artificial.
    """
    w = np.asarray(w, dtype=np.float64)
    D = np.asarray(D, dtype=np.float64)
    D = as_matrix(D) if D.size else np.zeros((0, w.size))
    q = np.asarray(q, dtype=np.float64)
    m, n = D.shape
    k = num_free

    # columns: [y_free+, y_free-, y_nonneg, slack]
    A = np.hstack([D[:, :k], -D[:, :k], D[:, k:], np.eye(m)])
    c = np.concatenate([w[:k], -w[:k], w[k:], np.zeros(m)])
    b = q.copy()
    neg = b < 0
    A[neg] *= -1.0
    b[neg] *= -1.0
    n_struct = A.shape[1]

    art_rows = np.flatnonzero(neg)
    n_art = art_rows.size
    art = np.zeros((m, n_art))
    art[art_rows, np.arange(n_art)] = 1.0
    A = np.hstack([A, art])
    basis = [2 * k + (n - k) + i for i in range(m)]
    for a, i in enumerate(art_rows):
        basis[i] = n_struct + a

    tab = _Tableau(A, b, basis)
    allowed = np.ones(A.shape[1], dtype=bool)

    if n_art:
        phase1 = np.zeros(A.shape[1])
        phase1[n_struct:] = 1.0
        tab.set_cost(phase1)
        tab.run(allowed, max_iter)
        if -tab.cost[-1] > FEAS_TOL * max(1.0, float(np.abs(b).max())):
            return LpSolution(LpStatus.INFEASIBLE, iterations=tab.iterations)
        # pivot zero-level artificials out of the basis, or drop their rows
        for r in range(m - 1, -1, -1):
            if tab.basis[r] < n_struct:
                continue
            nz = np.flatnonzero(np.abs(tab.body[r, :n_struct]) > PIVOT_TOL)
            if nz.size:
                tab.pivot(r, int(nz[0]))
            else:
                tab.body = np.delete(tab.body, r, axis=0)
                del tab.basis[r]
        allowed[n_struct:] = False

    tab.set_cost(np.concatenate([c, np.zeros(n_art)]))
    status = tab.run(allowed, max_iter)
    if status is LpStatus.UNBOUNDED:
        return LpSolution(status, iterations=tab.iterations)

    x = np.zeros(A.shape[1])
    x[tab.basis] = tab.body[:, -1]
    y = np.concatenate([x[:k] - x[k:2 * k], x[2 * k:2 * k + n - k]])
    return LpSolution(LpStatus.OPTIMAL, y, float(w @ y), tab.iterations)


def minimize_quadratic(h, f, constant=0.0):
    """Minimize ``0.5 z^T h z + f^T z + constant`` for SPD ``h``.

    Returns the minimizer and the minimum value.
    """
    h = as_matrix(h)
    f = np.asarray(f, dtype=np.float64).ravel()
    z = solve_spd(h, f)
    value = 0.5 * z @ h @ z + f @ z + constant
    return z, float(value)
