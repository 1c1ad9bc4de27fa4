import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sparse_lrnn.optimize import (
    LinearProgram,
    LpStatus,
    minimize_quadratic,
    simplex,
    solve_lp,
)
from sparse_lrnn.linalg import NotPositiveDefiniteError

METHODS = ["simplex", "highs"]


def assert_feasible(lp, sol):
    D = lp.dense_D()
    assert np.all(D @ sol.y <= lp.q + 1e-8)
    assert np.all(sol.y[lp.num_free:] >= -1e-10)


def appendix_lp(ML, n, r, lam):
    """Single-term epsilon-insensitive LP built by hand, independent of costs.py."""
    s, p = ML.shape
    I, Z = np.eye(s), np.zeros((s, s))
    D = np.block([
        [ML, -I, Z],
        [-ML, Z, -I],
        [np.zeros((s, p)), -I, Z],
        [np.zeros((s, p)), Z, -I],
    ])
    q = np.concatenate([r + n, r - n, np.zeros(2 * s)])
    w = np.concatenate([np.zeros(p), np.full(2 * s, lam)])
    return LinearProgram(w, D, q, num_free=p)


def eps_cost(ML, n, r, lam, z):
    return lam * np.maximum(np.abs(ML @ z - n) - r, 0.0).sum()


class TestLinearProgram:
    def test_shape_validation(self):
        with pytest.raises(ValueError):
            LinearProgram(np.ones(2), np.ones((3, 3)), np.ones(3))

    def test_num_free_range(self):
        with pytest.raises(ValueError):
            LinearProgram(np.ones(2), np.ones((1, 2)), np.ones(1), num_free=3)

    def test_unknown_method(self):
        lp = LinearProgram([1.0], [[-1.0]], [-1.0])
        with pytest.raises(ValueError):
            solve_lp(lp, method="interior")


@pytest.mark.parametrize("method", METHODS)
class TestSolveLp:
    def test_single_lower_bound(self, method):
        lp = LinearProgram([1.0], [[-1.0]], [-1.0])
        sol = solve_lp(lp, method)
        assert sol.status is LpStatus.OPTIMAL
        assert sol.y[0] == pytest.approx(1.0, abs=1e-9)
        assert sol.objective_value == pytest.approx(1.0, abs=1e-9)

    def test_textbook_facet(self, method):
        lp = LinearProgram([-1.0, -1.0], [[1.0, 1.0]], [1.0])
        sol = solve_lp(lp, method)
        assert sol.objective_value == pytest.approx(-1.0, abs=1e-9)
        assert sol.y.sum() == pytest.approx(1.0, abs=1e-9)
        assert_feasible(lp, sol)

    def test_free_variable(self, method):
        # min |y - (-2)| written as min t with y - t <= -2, -y - t <= 2
        lp = LinearProgram([0.0, 1.0], [[1.0, -1.0], [-1.0, -1.0]], [-2.0, 2.0], num_free=1)
        sol = solve_lp(lp, method)
        assert sol.y[0] == pytest.approx(-2.0, abs=1e-9)
        assert sol.objective_value == pytest.approx(0.0, abs=1e-9)

    def test_infeasible(self, method):
        lp = LinearProgram([1.0], [[1.0], [-1.0]], [1.0, -2.0])
        assert solve_lp(lp, method).status is LpStatus.INFEASIBLE

    def test_unbounded(self, method):
        lp = LinearProgram([-1.0, 0.0], [[-1.0, 1.0]], [1.0])
        assert solve_lp(lp, method).status is LpStatus.UNBOUNDED

    def test_beale_cycling_example(self, method):
        # classic instance on which the largest-coefficient rule cycles
        w = [-0.75, 20.0, -0.5, 6.0]
        D = [[0.25, -8.0, -1.0, 9.0], [0.5, -12.0, -0.5, 3.0], [0.0, 0.0, 1.0, 0.0]]
        lp = LinearProgram(w, D, [0.0, 0.0, 1.0])
        sol = solve_lp(lp, method)
        assert sol.objective_value == pytest.approx(-1.25, abs=1e-9)
        assert_feasible(lp, sol)

    def test_degenerate_vertex(self, method):
        # many constraints active at the optimum
        D = [[1, 1], [1, 2], [2, 1], [1, 0], [0, 1]]
        lp = LinearProgram([-1.0, -1.0], D, [2.0, 3.0, 3.0, 1.0, 1.0])
        sol = solve_lp(lp, method)
        assert sol.objective_value == pytest.approx(-2.0, abs=1e-9)
        assert_feasible(lp, sol)

    def test_appendix_instance_grid_oracle(self, method):
        rng = np.random.default_rng(11)
        ML = rng.normal(size=(2, 2))
        n = rng.normal(size=2)
        r = np.full(2, 0.05)
        lp = appendix_lp(ML, n, r, 1.0)
        sol = solve_lp(lp, method)
        assert_feasible(lp, sol)
        grid = np.linspace(-3, 3, 200)
        step = grid[1] - grid[0]
        best = min(eps_cost(ML, n, r, 1.0, np.array(z)) for z in itertools.product(grid, grid))
        lipschitz = np.abs(ML).sum(axis=0).max()
        assert sol.objective_value <= best + 1e-9
        assert best - sol.objective_value <= lipschitz * 2 * step * 2
        assert sol.objective_value == pytest.approx(eps_cost(ML, n, r, 1.0, sol.y[:2]), abs=1e-7)

    def test_nonnegative_objective_on_appendix_instances(self, method):
        rng = np.random.default_rng(5)
        for _ in range(10):
            ML = rng.normal(size=(4, 3))
            lp = appendix_lp(ML, rng.normal(size=4), np.full(4, 0.1), 0.5)
            sol = solve_lp(lp, method)
            assert sol.optimal
            assert sol.objective_value >= -1e-12
            assert_feasible(lp, sol)


def test_backends_agree_on_random_instances():
    rng = np.random.default_rng(3)
    for _ in range(20):
        ML = rng.normal(size=(5, 3))
        lp = appendix_lp(ML, rng.normal(size=5), np.abs(rng.normal(size=5)) * 0.1, 1.0)
        a, b = solve_lp(lp, "simplex"), solve_lp(lp, "highs")
        assert a.objective_value == pytest.approx(b.objective_value, abs=1e-7)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_simplex_feasible_and_bounded_by_feasible_point(seed):
    # a random feasible polytope around a known interior point
    r = np.random.default_rng(seed)
    D = r.normal(size=(6, 3))
    y0 = r.uniform(0, 1, size=3)
    q = D @ y0 + r.uniform(0.1, 1, size=6)
    w = r.uniform(0.1, 1, size=3)
    lp = LinearProgram(w, D, q)
    sol = solve_lp(lp, "simplex")
    assert sol.optimal
    assert_feasible(lp, sol)
    assert sol.objective_value <= w @ y0 + 1e-9
    assert sol.objective_value >= -1e-12  # w > 0 and y >= 0


def test_simplex_direct_call_matches_solve_lp():
    sol = simplex([1.0, 2.0], [[-1.0, -1.0]], [-1.0])
    assert sol.objective_value == pytest.approx(1.0)
    np.testing.assert_allclose(sol.y, [1.0, 0.0], atol=1e-12)


class TestMinimizeQuadratic:
    def test_scalar(self):
        # 0.5*2*z^2 - 6z + c has its minimum -9 + c at z = 3
        z, value = minimize_quadratic([[2.0]], [-6.0], 4.5)
        assert z[0] == pytest.approx(3.0)
        assert value == pytest.approx(-4.5, abs=1e-12)
        z, value = minimize_quadratic([[2.0]], [-6.0], 9.0)
        assert value == pytest.approx(0.0, abs=1e-12)

    def test_identity_zero_linear(self):
        z, value = minimize_quadratic(np.eye(3), np.zeros(3), 1.25)
        np.testing.assert_array_equal(z, 0.0)
        assert value == 1.25

    def test_perturbation_oracle(self, rng):
        A = rng.normal(size=(6, 6))
        H = A @ A.T + 0.5 * np.eye(6)
        f = rng.normal(size=6)
        z, value = minimize_quadratic(H, f, 0.3)
        for _ in range(100):
            d = rng.normal(size=6)
            d *= 1e-2 / np.linalg.norm(d)
            zz = z + d
            assert value <= 0.5 * zz @ H @ zz + f @ zz + 0.3

    def test_finite_difference_gradient(self, rng):
        A = rng.normal(size=(5, 5))
        H = A @ A.T + np.eye(5)
        f = rng.normal(size=5)
        z, _ = minimize_quadratic(H, f)
        q = lambda v: 0.5 * v @ H @ v + f @ v  # noqa: E731
        h = 1e-6
        grad = np.array([(q(z + h * e) - q(z - h * e)) / (2 * h) for e in np.eye(5)])
        assert np.abs(grad).max() <= 1e-6 * (1 + np.abs(f).max())

    def test_indefinite_propagates(self):
        with pytest.raises(NotPositiveDefiniteError):
            minimize_quadratic(np.diag([1.0, -1.0]), np.zeros(2))
