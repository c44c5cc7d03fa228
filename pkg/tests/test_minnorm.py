"""Minimum-norm-point solver against independent oracles."""

import numpy as np
import pytest

from nsmooth.minnorm import min_norm_point


def test_two_point_grid_search_oracle():
    pts = np.array([[1.0, 0.0], [0.0, 1.0]])
    lam = np.arange(0.0, 1.0 + 1e-12, 1e-4)
    combos = lam[:, None] * pts[0] + (1 - lam)[:, None] * pts[1]
    oracle = combos[np.argmin(np.linalg.norm(combos, axis=1))]
    res = min_norm_point(pts)
    assert np.linalg.norm(res.vector - oracle) <= 1e-4
    assert np.allclose(res.vector, [0.5, 0.5], atol=1e-12)
    assert np.isclose(res.norm, 0.7071067811865476, atol=1e-12)


def test_degenerate_inputs():
    res = min_norm_point(np.array([[0.3, -0.4]]))
    assert np.allclose(res.vector, [0.3, -0.4])
    assert np.isclose(res.norm, 0.5)
    res = min_norm_point(np.array([[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, 0.0]]))
    assert res.norm <= 1e-12
    # duplicated points
    res = min_norm_point(np.array([[1.0, 1.0]] * 5))
    assert np.allclose(res.vector, [1.0, 1.0])


def _cvxpy_oracle(pts):
    import cvxpy as cp

    lam = cp.Variable(len(pts), nonneg=True)
    prob = cp.Problem(cp.Minimize(cp.sum_squares(pts.T @ lam)), [cp.sum(lam) == 1])
    prob.solve(solver=cp.CLARABEL)
    return pts.T @ lam.value


@pytest.mark.parametrize("dim", [2, 3])
def test_random_hulls_match_qp_oracle(dim):
    rng = np.random.default_rng(23 + dim)
    for _ in range(25):
        k = rng.integers(2, 7)
        pts = rng.standard_normal((k, dim)) + 0.8 * rng.standard_normal(dim)
        res = min_norm_point(pts)
        oracle = _cvxpy_oracle(pts)
        assert np.linalg.norm(res.vector - oracle) <= 1e-6
        assert res.wolfe_gap(pts) >= -1e-8


def test_monotonicity_adding_points():
    rng = np.random.default_rng(4)
    base = rng.standard_normal((4, 3)) + 1.0
    n0 = min_norm_point(base).norm
    for _ in range(20):
        extra = rng.standard_normal((2, 3)) + 1.0
        n1 = min_norm_point(np.concatenate([base, extra])).norm
        assert n1 <= n0 + 1e-12


def test_caratheodory_representation():
    rng = np.random.default_rng(8)
    for _ in range(30):
        pts = rng.standard_normal((12, 3)) + rng.uniform(-1, 1, 3)
        res = min_norm_point(pts)
        assert len(res.support) <= 4  # dim + 1
        assert np.all(res.coefficients >= -1e-12)
        assert abs(res.coefficients.sum() - 1.0) <= 1e-10
        rebuilt = res.coefficients @ pts[res.support]
        assert np.linalg.norm(rebuilt - res.vector) <= 1e-10


def test_high_dim_flattened_matrices():
    rng = np.random.default_rng(15)
    pts = rng.standard_normal((30, 8)) + 0.5
    res = min_norm_point(pts)
    assert res.converged
    assert res.wolfe_gap(pts) >= -1e-8


def test_rejects_empty():
    with pytest.raises(ValueError):
        min_norm_point(np.zeros((0, 2)))
