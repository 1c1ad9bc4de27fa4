"""Shared oracles for the test modules."""

import itertools

import numpy as np

from sparse_lrnn.costs import EpsInsensitive
from sparse_lrnn.linalg import vec
from sparse_lrnn.lrnn import Lambdas, LrnnModel, TrainingProblem, default_lambdas, teacher_series

TEACHER_T = 30


def rotation(theta):
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, -s], [s, c]])


def teacher_model():
    """Stable two-state network; its closed loop F + G H is 0.97 times a rotation."""
    G = np.array([[0.3], [0.2]])
    H = np.array([[1.0, 0.0]])
    F = 0.97 * rotation(0.5) - G @ H
    return LrnnModel(F, G, H)


def teacher_problem(regime, d_u=3, reg=1e-6, T=TEACHER_T):
    """Teacher data with appr/state weights at their defaults and small F, U penalties."""
    values = teacher_series(teacher_model(), [1.0, 0.5], T)
    lam = default_lambdas(T, 1, d_u)
    lam = Lambdas(lam.appr, lam.state, reg, reg)
    return TrainingProblem(values[:, :T], values[:, 1:], lam, regime=regime)


def _sparse_grid_costs(cost, points):
    """Vectorized eval_cost of a sparse cost at each row of ``points`` (vec(Z) rows)."""
    total = np.zeros(len(points))
    for t in cost.terms:
        ML = t.expr.operator()
        res = points @ ML.T - vec(t.expr.N).ravel()
        r = vec(t.norm.R).ravel()
        total += t.weight * np.maximum(np.abs(res) - r, 0.0).sum(axis=1)
    return total


def sparse_grid_min(cost, lo=-5.0, hi=5.0, step=0.05):
    """Grid-search minimum of a convex sparse cost on ``[lo, hi]^p``.

    Up to two dimensions the full grid is scanned. Beyond that a coarse pass
    is followed by repeated recentred passes at decreasing step down to
    ``step``; convexity makes the local refinement sound.
    """
    p = int(np.prod(cost.z_shape))
    if p <= 2:
        axis = np.arange(lo, hi + step / 2, step)
        pts = np.array(list(itertools.product(axis, repeat=p)))
        return _sparse_grid_costs(cost, pts).min()
    h = 0.5
    axis = np.arange(lo, hi + h / 2, h)
    pts = np.array(list(itertools.product(axis, repeat=p)))
    vals = _sparse_grid_costs(cost, pts)
    centre, best = pts[np.argmin(vals)], vals.min()
    while True:
        h_next = max(h / 2, step)
        offsets = np.arange(-5, 6) * h_next
        moved = True
        while moved:
            pts = np.clip(centre + np.array(list(itertools.product(offsets, repeat=p))), lo, hi)
            vals = _sparse_grid_costs(cost, pts)
            moved = vals.min() < best - 1e-15
            if moved:
                centre, best = pts[np.argmin(vals)], vals.min()
        if h_next == step:
            return best
        h = h_next


def is_sparse_norm(norm):
    return isinstance(norm, EpsInsensitive)
