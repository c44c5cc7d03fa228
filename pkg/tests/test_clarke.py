"""Generalized gradient/differential estimation and singularity verdicts."""

import numpy as np
import pytest

from nsmooth.clarke import (
    LinearMapRep,
    MapField,
    SamplingParams,
    ScalarField,
    adjoint,
    generalized_differential,
    generalized_gradient,
    gs_critical,
    is_singular_map,
    is_singular_scalar,
    sample_mixture,
)
from nsmooth.catalog import dist_to_point, x2sin
from nsmooth.errors import InsufficientSamples, TargetBallViolation
from nsmooth.manifold import Euclidean, FlatTorus, Sphere

E1 = Euclidean(1)
E2 = Euclidean(2)


def convex_max_example():
    return ScalarField(E1, lambda X: np.maximum(np.abs(X[:, 0]) - 1.0, (X[:, 0] - 2.0) ** 2 - 1.0))


def test_mixture_hull_at_kink():
    f = convex_max_example()
    H = sample_mixture(f, np.array([1.0]), radius=0.01, n=60)
    lo, hi = H.interval()
    assert abs(lo - (-2.0)) < 0.03
    assert abs(hi - 1.0) < 1e-6


def test_generalized_gradient_intervals_at_kinks():
    f = convex_max_example()
    lo, hi = generalized_gradient(f, np.array([1.0])).interval()
    assert abs(lo - (-2.0)) < 0.02 and abs(hi - 1.0) < 0.02
    lo, hi = generalized_gradient(f, np.array([4.0])).interval()
    assert abs(lo - 1.0) < 0.02 and abs(hi - 4.0) < 0.02


def test_smooth_field_hull_collapses():
    a = np.array([0.8, -0.4])
    f = ScalarField(E2, lambda X: X @ a)
    H = generalized_gradient(f, np.array([0.3, 0.2]))
    assert np.linalg.norm(H.points - a, axis=1).max() < 1e-8
    # radius -> 0 shrinks the hull of a C^1 (but nonlinear) field
    g = ScalarField(E1, lambda X: np.sin(X[:, 0]))
    diam = []
    for r in (1e-2, 1e-3, 1e-4):
        pts = sample_mixture(g, np.array([0.5]), radius=r, n=40).points
        diam.append(pts.max() - pts.min())
    assert diam[2] < diam[1] < diam[0]


def test_x2sin_hull_endpoints():
    entry = x2sin()
    lo, hi = generalized_gradient(entry.field, np.array([0.0])).interval()
    assert abs(lo - (-1.0)) < 0.05
    assert abs(hi - 1.0) < 0.05


def test_dist_field_hull_at_antipode_contains_origin():
    S2 = Sphere(2, 1.0)
    north = np.array([0.0, 0.0, 1.0])
    entry = dist_to_point(S2, north)
    H = generalized_gradient(entry.field, -north)
    assert H.min_norm().norm < 1e-3


def test_singular_verdicts_convex_max():
    f = convex_max_example()
    v1 = is_singular_scalar(f, np.array([1.0]))
    assert v1.singular
    v4 = is_singular_scalar(f, np.array([4.0]))
    assert not v4.singular
    assert abs(v4.margin - 1.0) < 0.02


def test_dist_singular_at_base_point():
    S2 = Sphere(2, 1.0)
    north = np.array([0.0, 0.0, 1.0])
    entry = dist_to_point(S2, north)
    v = is_singular_scalar(entry.field, north)
    assert v.singular and v.margin < 1e-3


def test_insufficient_samples_on_fd_scale_sawtooth():
    # kink spacing comparable to the FD step: quotients disagree everywhere
    P = 3e-6

    def ev(X):
        return np.abs(np.mod(X[:, 0], P) - P / 2.0)

    f = ScalarField(E1, ev, lipschitz_hint=1.0)
    with pytest.raises(InsufficientSamples):
        sample_mixture(f, np.array([0.0]), radius=0.01, n=40)


def test_scale_equivariance():
    f = convex_max_example()
    base = is_singular_scalar(f, np.array([4.0])).margin
    for c in (2.0, 7.5):
        fc = ScalarField(E1, lambda X, c=c: c * f.eval(X))
        m = is_singular_scalar(fc, np.array([4.0])).margin
        assert abs(m - c * base) / (c * base) < 0.05


# ----------------------------------------------------------------------
# adjoints


def _frame_at(M, p):
    return M.frame(np.asarray(p, float))


def test_adjoint_transpose_and_involution():
    T2 = FlatTorus([1.0, 1.0])
    fr = _frame_at(T2, [0.2, 0.3])
    A = LinearMapRep(fr, fr, np.array([[1.0, 2.0], [0.0, 1.0]]))
    At = adjoint(A)
    assert np.allclose(At.matrix, [[1.0, 0.0], [2.0, 1.0]])
    assert np.allclose(adjoint(At).matrix, A.matrix)
    assert np.linalg.matrix_rank(At.matrix) == np.linalg.matrix_rank(A.matrix)
    ident = LinearMapRep(fr, fr, np.eye(2))
    assert np.allclose(adjoint(ident).matrix, np.eye(2))


def test_adjoint_inner_product_identity():
    S2 = Sphere(2, 1.0)
    T2 = FlatTorus([1.0, 1.0])
    rng = np.random.default_rng(12)
    p = T2.random_points(1, rng)[0]
    q = S2.random_points(1, rng)[0]
    fr_p, fr_q = T2.frame(p), S2.frame(q)
    for _ in range(20):
        A = LinearMapRep(fr_p, fr_q, rng.standard_normal((2, 2)))
        v = fr_p.vec_of(rng.standard_normal(2))
        w = fr_q.vec_of(rng.standard_normal(2))
        lhs = np.dot(A.apply(v), w)
        rhs = np.dot(v, adjoint(A).apply(w))
        assert abs(lhs - rhs) <= 1e-12 * max(1.0, abs(lhs))


# ----------------------------------------------------------------------
# map differentials


def test_identity_map_flat_torus():
    T2 = FlatTorus([1.0, 1.0])
    F = MapField(T2, T2, lambda X: X.copy())
    H, fr_p, fr_Fp, _ = generalized_differential(F, np.array([0.3, 0.7]))
    mats = H.points.reshape(-1, 2, 2)
    assert np.abs(mats - np.eye(2)).max() < 1e-6


def test_angle_projection_differential():
    from nsmooth.catalog import angle

    entry = angle()
    F = entry.field
    p = np.array([0.3, 0.6])
    H, *_ = generalized_differential(F, p)
    mats = H.points.reshape(-1, 1, 2)
    assert np.abs(np.abs(mats[:, 0, 0]) - 2.0 * np.pi).max() < 1e-6
    assert np.abs(mats[:, 0, 1]).max() < 1e-6


def test_smooth_map_hull_shrinks():
    T2 = FlatTorus([1.0, 1.0])
    S1 = Sphere(1, 1.0)

    def ev(X):
        a = 2.0 * np.pi * (X[:, 0] + 0.3 * np.sin(2.0 * np.pi * X[:, 1]))
        return np.stack([np.cos(a), np.sin(a)], axis=1)

    F = MapField(T2, S1, ev)
    p = np.array([0.25, 0.4])
    diams = []
    for r in (5e-3, 5e-4):
        params = SamplingParams(radius0=r, rung_factors=(1.0,))
        H, *_ = generalized_differential(F, p, params)
        diams.append(np.ptp(H.points, axis=0).max())
    assert diams[1] < diams[0]


def test_unit_speed_projection_margin_half():
    # theta_1 projection T^2 -> S^1 of circumference 1: min singular value 1
    T2 = FlatTorus([1.0, 1.0])
    T1 = FlatTorus([1.0])
    F = MapField(T2, T1, lambda X: X[:, :1].copy(), lipschitz_hint=1.0)
    H, *_ = generalized_differential(F, np.array([0.4, 0.9]))
    mats = H.points.reshape(-1, 1, 2)
    assert np.abs(np.abs(mats[:, 0, 0]) - 1.0).max() < 1e-8  # rows ~ (1 0)
    assert np.abs(mats[:, 0, 1]).max() < 1e-8
    v = is_singular_map(F, np.array([0.4, 0.9]))
    assert not v.singular
    assert abs(v.margin - 0.5) < 1e-6


def test_constant_map_singular():
    T2 = FlatTorus([1.0, 1.0])
    T1 = FlatTorus([1.0])
    F = MapField(T2, T1, lambda X: np.full((len(X), 1), 0.25))
    v = is_singular_map(F, np.array([0.4, 0.9]))
    assert v.singular and v.margin < 1e-12


def test_scalar_and_map_paths_agree():
    rng = np.random.default_rng(31)
    E1t = Euclidean(1)
    for _ in range(20):
        a = rng.standard_normal(2)
        b = rng.standard_normal()
        kinked = rng.random() < 0.5

        def ev(X, a=a, b=b, kinked=kinked):
            v = X @ a + b
            return v + (0.5 * np.abs(X[:, 0]) if kinked else 0.0)

        p = rng.standard_normal(2) + np.array([1.0, 0.0])
        scalar = ScalarField(E2, ev)
        vs = is_singular_scalar(scalar, p)
        amap = MapField(E2, E1t, lambda X, ev=ev: ev(X)[:, None])
        vm = is_singular_map(amap, p)
        assert vs.singular == vm.singular
        # map margin is half the scalar min-norm by construction
        assert abs(vm.margin - vs.margin / 2.0) < 0.05 * max(vs.margin, 0.1)


def test_target_ball_violation():
    T2 = FlatTorus([1.0, 1.0])
    S1 = Sphere(1, 1.0)

    def ev(X):
        a = 300.0 * X[:, 0]
        return np.stack([np.cos(a), np.sin(a)], axis=1)

    F = MapField(T2, S1, ev)
    with pytest.raises(TargetBallViolation):
        generalized_differential(F, np.array([0.2, 0.2]))


# ----------------------------------------------------------------------
# Grove-Shiohama criticality


def test_gs_sphere_antipode_critical():
    S2 = Sphere(2, 1.0)
    p = np.array([0.0, 0.0, 1.0])
    v = gs_critical(S2, p, -p)
    assert v.singular and v.continuum
    # equator point: single minimal geodesic, margin 1
    q = np.array([1.0, 0.0, 0.0])
    v2 = gs_critical(S2, p, q)
    assert not v2.singular
    assert abs(v2.margin - 1.0) < 1e-12
    assert v2.samples_used == 1


def test_gs_torus_diagonal_critical():
    T2 = FlatTorus([1.0, 1.0])
    p = np.array([0.0, 0.0])
    v = gs_critical(T2, p, np.array([0.5, 0.5]))
    assert v.singular and v.samples_used == 4
    v2 = gs_critical(T2, p, np.array([0.3, 0.1]))
    assert not v2.singular and abs(v2.margin - 1.0) < 1e-12


def test_gs_base_point_convention():
    S2 = Sphere(2, 1.0)
    p = np.array([0.0, 0.0, 1.0])
    v = gs_critical(S2, p, p)
    assert v.singular and v.margin == 0.0


def test_nonsingular_stability_neighborhood():
    # high-margin points keep nonsingular verdicts at nearby grid points
    S2 = Sphere(2, 1.0)
    entry = dist_to_point(S2, np.array([0.0, 0.0, 1.0]))
    params = SamplingParams()
    q0 = S2.project_point(np.array([1.0, 0.2, 0.4]))
    v0 = is_singular_scalar(entry.field, q0, params)
    assert v0.margin > 2.0 * params.tol_sing
    lam = 0.05
    rng = np.random.default_rng(2)
    for _ in range(10):
        u = S2.project_tangent(q0, rng.standard_normal(3))
        u /= np.linalg.norm(u)
        qn = S2.exp(q0, lam * rng.uniform(0, 1) * u)
        assert not is_singular_scalar(entry.field, qn, params).singular
