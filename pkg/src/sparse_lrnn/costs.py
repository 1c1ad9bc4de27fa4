"""Weighted sums of norms of linear multi-term residuals, and their LP/QP forms.

A residual is ``sum_i L_i Z M_i - N`` for a matrix variable ``Z``. Each cost
term puts either an epsilon-insensitive norm (entrywise ``max(0, |m| - eps)``,
with per-entry ``eps`` taken from a matrix ``R``) or a squared ``K``-norm
(``tr(M^T K M)``) on one residual. A plain L1 penalty is the ``R = 0`` case.

Sparse costs reduce to a linear program over ``y = (vec Z, a_1, a*_1, ...)``
with one pair of slack blocks per term; quadratic costs reduce to
``0.5 z^T H z + f^T z + const``.
"""

import enum
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .linalg import as_matrix, vec, unvec
from .optimize import LinearProgram

__all__ = [
    "Regime",
    "MultiTermExpr",
    "EpsInsensitive",
    "SquaredK",
    "CostTerm",
    "CostFunction",
    "eval_residual",
    "eval_norm",
    "eval_cost",
    "assemble_lp",
    "assemble_qp",
    "recover_z",
    "l1_penalty",
    "squared_penalty",
]


class Regime(enum.Enum):
    SPARSE = "sparse"
    QUADRATIC = "quadratic"

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        return cls(str(value).strip().lower())


@dataclass(frozen=True)
class MultiTermExpr:
    """Affine map ``Z -> sum_i L_i Z M_i - N`` on ``z_shape``-shaped ``Z``."""

    terms: tuple
    N: np.ndarray
    z_shape: tuple

    def __post_init__(self):
        terms = tuple((as_matrix(L), as_matrix(M)) for L, M in self.terms)
        if not terms:
            raise ValueError("a multi-term expression needs at least one term")
        N = as_matrix(self.N)
        zr, zc = self.z_shape
        for L, M in terms:
            if L.shape[1] != zr or M.shape[0] != zc:
                raise ValueError(
                    f"term L{L.shape} Z{self.z_shape} M{M.shape} is not conformable")
            if (L.shape[0], M.shape[1]) != N.shape:
                raise ValueError(
                    f"term output {(L.shape[0], M.shape[1])} does not match N{N.shape}")
        object.__setattr__(self, "terms", terms)
        object.__setattr__(self, "N", N)
        object.__setattr__(self, "z_shape", (int(zr), int(zc)))

    @classmethod
    def identity(cls, z_shape):
        r, c = z_shape
        return cls(((np.eye(r), np.eye(c)),), np.zeros((r, c)), z_shape)

    @property
    def residual_shape(self):
        return self.N.shape

    def operator(self):
        """Dense matrix ``sum_i M_i^T kron L_i`` acting on ``vec(Z)``."""
        return sum(np.kron(M.T, L) for L, M in self.terms)


@dataclass(frozen=True)
class EpsInsensitive:
    R: np.ndarray

    def __post_init__(self):
        R = as_matrix(self.R)
        if np.any(R < 0):
            raise ValueError("insensitivity widths must be nonnegative")
        object.__setattr__(self, "R", R)


@dataclass(frozen=True)
class SquaredK:
    K: np.ndarray

    def __post_init__(self):
        K = as_matrix(self.K)
        if K.shape[0] != K.shape[1] or not np.allclose(K, K.T, rtol=0, atol=1e-12):
            raise ValueError("K must be square and symmetric")
        object.__setattr__(self, "K", K)


@dataclass(frozen=True)
class CostTerm:
    weight: float
    expr: MultiTermExpr
    norm: object
    name: str = ""

    def __post_init__(self):
        if not self.weight > 0:
            raise ValueError(f"term weight must be positive, got {self.weight}")
        shape = self.expr.residual_shape
        if isinstance(self.norm, EpsInsensitive):
            if self.norm.R.shape == (1, 1) and shape != (1, 1):
                object.__setattr__(
                    self, "norm", EpsInsensitive(np.full(shape, self.norm.R.item())))
            elif self.norm.R.shape != shape:
                raise ValueError(f"R{self.norm.R.shape} does not match residual {shape}")
        elif isinstance(self.norm, SquaredK):
            if self.norm.K.shape[0] != shape[0]:
                raise ValueError(f"K{self.norm.K.shape} does not match residual rows {shape[0]}")
        else:
            raise TypeError(f"unsupported norm {self.norm!r}")


@dataclass(frozen=True)
class CostFunction:
    terms: tuple
    regime: Regime

    def __post_init__(self):
        terms = tuple(self.terms)
        if not terms:
            raise ValueError("empty cost function")
        shapes = {t.expr.z_shape for t in terms}
        if len(shapes) != 1:
            raise ValueError(f"terms disagree on the variable shape: {shapes}")
        want = EpsInsensitive if self.regime is Regime.SPARSE else SquaredK
        if not all(isinstance(t.norm, want) for t in terms):
            raise ValueError(f"{self.regime.value} costs need {want.__name__} norms throughout")
        object.__setattr__(self, "terms", terms)

    @property
    def z_shape(self):
        return self.terms[0].expr.z_shape

    def term(self, name):
        for t in self.terms:
            if t.name == name:
                return t
        raise KeyError(name)


def l1_penalty(weight, z_shape, name="reg"):
    return CostTerm(weight, MultiTermExpr.identity(z_shape),
                    EpsInsensitive(np.zeros(z_shape)), name)


def squared_penalty(weight, z_shape, name="reg"):
    return CostTerm(weight, MultiTermExpr.identity(z_shape),
                    SquaredK(np.eye(z_shape[0])), name)


def eval_residual(expr, z):
    z = as_matrix(z)
    if z.shape != expr.z_shape:
        raise ValueError(f"Z has shape {z.shape}, expected {expr.z_shape}")
    out = -expr.N.copy()
    for L, M in expr.terms:
        out += L @ z @ M
    return out


def eval_norm(norm, m):
    if isinstance(norm, EpsInsensitive):
        return float(np.maximum(np.abs(m) - norm.R, 0.0).sum())
    return float(np.trace(m.T @ norm.K @ m))


def eval_cost(cost, z):
    """Weighted sum of the term norms at ``z``."""
    return sum(t.weight * eval_norm(t.norm, eval_residual(t.expr, z)) for t in cost.terms)


def assemble_lp(cost, sparse=False):
    """Linear program whose optimum equals ``min_Z eval_cost(cost, Z)``.

    Per term, with ``A = M_L z - n`` the vectorized residual and ``r = vec(R)``,
    the rows are::

        [ M_L  -I   0 ] [z ]    [r + n]
        [-M_L   0  -I ] [a ] <= [r - n]
        [  0   -I   0 ] [a*]    [  0  ]
        [  0    0  -I ]         [  0  ]

    and the objective is ``weight * (sum a + sum a*)``. Terms share ``z`` and
    each gets its own ``a, a*``. The leading ``prod(z_shape)`` variables of
    the solution are ``vec(Z)``.
    """
    if cost.regime is not Regime.SPARSE:
        raise ValueError("assemble_lp needs a sparse (epsilon-insensitive) cost")
    p = int(np.prod(cost.z_shape))
    n_terms = len(cost.terms)
    grid = [[None] * (1 + 2 * n_terms) for _ in range(4 * n_terms)]
    rhs, weights = [], [np.zeros(p)]
    for k, t in enumerate(cost.terms):
        s = t.expr.N.size
        ML = sp.csr_array(t.expr.operator())
        n = vec(t.expr.N).ravel()
        r = vec(t.norm.R).ravel()
        neg_eye = -sp.identity(s, format="csr")
        rows, a, a_star = 4 * k, 1 + 2 * k, 2 + 2 * k
        grid[rows][0] = ML
        grid[rows][a] = neg_eye
        grid[rows + 1][0] = -ML
        grid[rows + 1][a_star] = neg_eye
        grid[rows + 2][a] = neg_eye
        grid[rows + 3][a_star] = neg_eye
        rhs.append(np.concatenate([r + n, r - n, np.zeros(2 * s)]))
        weights.append(np.full(2 * s, t.weight))

    D = sp.bmat(grid, format="csr")
    q = np.concatenate(rhs)
    w = np.concatenate(weights)
    return LinearProgram(w, D if sparse else D.toarray(), q, num_free=p)


def recover_z(cost, y):
    p = int(np.prod(cost.z_shape))
    return unvec(np.asarray(y)[:p], *cost.z_shape)


def assemble_qp(cost):
    """Return ``(H, f, const)`` with ``0.5 z^T H z + f^T z + const == eval_cost``.

    For each term ``weight * ||sum_i L_i Z M_i - N||_K^2``::

        H     = 2 weight sum_ij (M_i M_j^T) kron (L_i^T K L_j)
        f     = -2 weight sum_j vec(L_j^T K N M_j^T)
        const = weight tr(N^T K N)

    ``(M_i^T kron I)^T (M_j^T kron A)`` collapses to ``(M_i M_j^T) kron A`` by
    the mixed-product rule. ``H`` is symmetrized before returning.
    """
    if cost.regime is not Regime.QUADRATIC:
        raise ValueError("assemble_qp needs a quadratic cost")
    p = int(np.prod(cost.z_shape))
    H = np.zeros((p, p))
    f = np.zeros(p)
    const = 0.0
    for t in cost.terms:
        K, N, lam = t.norm.K, t.expr.N, t.weight
        KN = K @ N
        for Li, Mi in t.expr.terms:
            LiK = Li.T @ K
            for Lj, Mj in t.expr.terms:
                H += 2 * lam * np.kron(Mi @ Mj.T, LiK @ Lj)
            f -= 2 * lam * vec(Li.T @ KN @ Mi.T).ravel()
        const += lam * float(np.sum(N * KN))
    H = 0.5 * (H + H.T)
    return H, f, const
