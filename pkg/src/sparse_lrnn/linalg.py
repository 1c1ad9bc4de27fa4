"""Dense matrix helpers and the vectorization identities used by the cost reductions.

Matrices are plain 2-D ``float64`` numpy arrays. ``vec`` stacks columns
(Fortran order), so ``vec(B @ C @ D) == kron(D.T, B) @ vec(C)``.
"""

import numpy as np
from scipy.linalg import solve_triangular

__all__ = [
    "as_matrix",
    "matmul",
    "kron",
    "vec",
    "unvec",
    "trace_bilinear_check",
    "NotPositiveDefiniteError",
    "cholesky",
    "solve_spd",
]

SYMMETRY_TOL = 1e-9
PIVOT_TOL = 1e-12


class NotPositiveDefiniteError(np.linalg.LinAlgError):
    """Raised when a Cholesky pivot falls below the positivity threshold."""

    def __init__(self, index, pivot):
        super().__init__(f"non-positive pivot {pivot:.3e} at index {index}")
        self.index = index
        self.pivot = pivot


def as_matrix(a):
    """Coerce scalars, vectors and arrays to a 2-D float64 array.

    1-D input becomes a column vector.
    """
    m = np.asarray(a, dtype=np.float64)
    if m.ndim == 0:
        return m.reshape(1, 1)
    if m.ndim == 1:
        return m.reshape(-1, 1)
    if m.ndim != 2:
        raise ValueError(f"expected at most 2 dimensions, got {m.ndim}")
    return m


def matmul(a, b):
    a, b = as_matrix(a), as_matrix(b)
    if a.shape[1] != b.shape[0]:
        raise ValueError(f"cannot multiply {a.shape} by {b.shape}")
    return a @ b


def kron(a, b):
    """Kronecker product ``[a_ij * b]``."""
    return np.kron(as_matrix(a), as_matrix(b))


def vec(m):
    """Stack the columns of ``m`` into a column vector."""
    m = as_matrix(m)
    return m.reshape(-1, 1, order="F")


def unvec(v, rows, cols):
    v = np.asarray(v, dtype=np.float64).ravel()
    if v.size != rows * cols:
        raise ValueError(f"cannot unvec {v.size} entries into {rows}x{cols}")
    return v.reshape(rows, cols, order="F")


def trace_bilinear_check(B, X, C, Y, D, rtol=1e-10):
    """Check ``tr(B X^T C Y D) == vec(X)^T (B kron I)^T (D^T kron C) vec(Y)``.

    Returns True when both sides agree within ``rtol`` relative to the
    magnitude of the terms involved.
    """
    B, X, C, Y, D = (as_matrix(m) for m in (B, X, C, Y, D))
    lhs_product = matmul(matmul(matmul(matmul(B, X.T), C), Y), D)
    if lhs_product.shape[0] != lhs_product.shape[1]:
        raise ValueError(f"B X^T C Y D is {lhs_product.shape}, not square")
    lhs = np.trace(lhs_product)

    left = kron(B, np.eye(X.shape[0]))
    right = kron(D.T, C)
    if left.shape[0] != right.shape[0]:
        raise ValueError("Kronecker factors are not conformable")
    rhs = (vec(X).T @ left.T @ right @ vec(Y)).item()

    # scale: the largest partial sum that could cancel
    scale = np.abs(vec(X)).T @ np.abs(left.T @ right) @ np.abs(vec(Y))
    scale = max(scale.item(), abs(lhs), 1.0)
    return bool(abs(lhs - rhs) <= rtol * scale)


def cholesky(h):
    """Lower-triangular factor ``L`` with ``h == L @ L.T``.

    Raises
    ------
    ValueError
        If ``h`` is not square or not symmetric within 1e-9 (relative).
    NotPositiveDefiniteError
        If a pivot drops below 1e-12; carries the offending index.
    """
    h = as_matrix(h)
    n = h.shape[0]
    if h.shape != (n, n):
        raise ValueError(f"expected a square matrix, got {h.shape}")
    scale = max(1.0, float(np.max(np.abs(h)))) if h.size else 1.0
    if np.max(np.abs(h - h.T), initial=0.0) > SYMMETRY_TOL * scale:
        raise ValueError("matrix is not symmetric")

    L = np.zeros_like(h)
    for j in range(n):
        row = L[j, :j]
        pivot = h[j, j] - row @ row
        if not pivot > PIVOT_TOL:
            raise NotPositiveDefiniteError(j, pivot)
        d = np.sqrt(pivot)
        L[j, j] = d
        if j + 1 < n:
            L[j + 1:, j] = (h[j + 1:, j] - L[j + 1:, :j] @ row) / d
    return L


def solve_spd(h, f):
    """Return ``z`` solving ``h z + f = 0`` for symmetric positive definite ``h``.

    Equivalently, the minimizer of ``0.5 z^T h z + f^T z``.
    """
    f = np.asarray(f, dtype=np.float64)
    L = cholesky(h)
    rhs = -f.reshape(L.shape[0], -1)
    y = solve_triangular(L, rhs, lower=True)
    z = solve_triangular(L.T, y, lower=False)
    return z.reshape(f.shape)
