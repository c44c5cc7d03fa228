"""Geometry kernel tests: closed-form ops against independent oracles."""

import numpy as np
import pytest
from scipy.special import gamma

from nsmooth.errors import CutLocusAmbiguity, DomainViolation, UnsupportedDim
from nsmooth.manifold import Euclidean, FlatTorus, Sphere, jacobi_endpoint
from nsmooth.quadrature import ball_quadrature, ball_quadrature_qmc, ball_volume

MANIFOLDS = [Euclidean(2), Sphere(2, 1.0), Sphere(2, 2.5), FlatTorus([1.0, 1.0]), FlatTorus([0.7, 1.3])]


def random_tangents(M, P, rng, scale):
    V = M.project_tangent(P, rng.standard_normal(P.shape))
    V /= np.linalg.norm(V, axis=1, keepdims=True)
    return V * (scale * rng.uniform(0.01, 1.0, (len(P), 1)))


@pytest.mark.parametrize("M", MANIFOLDS, ids=lambda m: str(m.descriptor()))
def test_exp_log_roundtrip(M):
    rng = np.random.default_rng(7)
    P = M.random_points(1000, rng)
    cap = M.injectivity_radius if np.isfinite(M.injectivity_radius) else 10.0
    V = random_tangents(M, P, rng, 0.9 * cap)
    Q = M.exp(P, V)
    back = M.log(P, Q) if isinstance(M, Euclidean) else M.log(P, Q, strict=False)
    err = np.linalg.norm(back - V, axis=1) / (1.0 + np.linalg.norm(V, axis=1))
    assert err.max() <= 1e-9
    # distance along the geodesic equals the tangent norm
    assert np.abs(M.distance(P, Q) - np.linalg.norm(V, axis=1)).max() <= 1e-10
    # the other inversion direction, and log at the base point itself
    again = M.exp(P, back)
    assert M.distance(again, Q).max() <= 1e-10
    zero = M.log(P, P) if isinstance(M, Euclidean) else M.log(P, P, strict=False)
    assert np.abs(zero).max() <= 1e-12


@pytest.mark.parametrize("M", MANIFOLDS, ids=lambda m: str(m.descriptor()))
def test_distance_metric_axioms(M):
    rng = np.random.default_rng(3)
    P, Q, R = (M.random_points(300, rng) for _ in range(3))
    assert np.abs(M.distance(P, Q) - M.distance(Q, P)).max() <= 1e-12
    assert np.all(M.distance(P, Q) <= M.distance(P, R) + M.distance(R, Q) + 1e-10)
    assert np.all(M.distance(P, P) <= 1e-12)


def test_sphere_examples():
    S = Sphere(2, 1.0)
    north = np.array([0.0, 0.0, 1.0])
    ex = np.array([1.0, 0.0, 0.0])
    assert S.distance(north, north) == 0.0
    assert np.isclose(S.distance(north, ex), np.pi / 2, atol=1e-15)
    assert np.allclose(S.exp(north, (np.pi / 2) * ex), ex, atol=1e-12)
    v = S.log(north, ex)
    assert np.allclose(v, (np.pi / 2) * ex, atol=1e-12)
    with pytest.raises(CutLocusAmbiguity):
        S.log(north, -north)
    with pytest.raises(CutLocusAmbiguity):
        S.transport(north, -north, ex)


def test_torus_examples():
    T = FlatTorus([1.0, 1.0])
    assert np.isclose(T.distance([0.0, 0.0], [0.75, 0.0]), 0.25)
    T1 = FlatTorus([1.0])
    assert np.allclose(T1.exp([0.9], [0.2]), [0.1])
    vels, cont = T1.minimal_geodesics(np.array([0.0]), np.array([0.5]))
    assert not cont
    assert sorted(v[0] for v in vels) == [-1.0, 1.0]


def test_exp_zero_is_identity():
    for M in MANIFOLDS:
        rng = np.random.default_rng(1)
        P = M.random_points(5, rng)
        assert np.allclose(M.exp(P, np.zeros_like(P)), P, atol=1e-14)


def torus_lattice_oracle(T, p, q, tol=1e-9):
    """Brute-force enumeration of minimizing lattice translates."""
    base = np.asarray(q, float) - np.asarray(p, float)
    best = []
    ks = np.arange(-3, 4)
    mesh = np.stack(np.meshgrid(*[ks] * T.dim, indexing="ij"), axis=-1).reshape(-1, T.dim)
    cands = base[None, :] + mesh * T.periods[None, :]
    norms = np.linalg.norm(cands, axis=1)
    dmin = norms.min()
    return cands[norms <= dmin + tol] / norms[norms <= dmin + tol][:, None]


def test_minimal_geodesics_torus_against_oracle():
    rng = np.random.default_rng(11)
    for T in (FlatTorus([1.0, 1.0]), FlatTorus([0.5, 2.0])):
        for _ in range(100):
            p = T.random_points(1, rng)[0]
            q = T.random_points(1, rng)[0]
            if T.distance(p, q) < 1e-9:
                continue
            vels, cont = T.minimal_geodesics(p, q, cap=32)
            assert not cont
            oracle = torus_lattice_oracle(T, p, q)
            assert len(vels) == len(oracle)
            d = T.distance(p, q)
            for u in vels:
                assert np.allclose(T.exp(p, d * u), T.wrap(q), atol=1e-9)
                assert min(np.linalg.norm(oracle - u, axis=1)) < 1e-9


def test_minimal_geodesics_torus_diagonal():
    T = FlatTorus([1.0, 1.0])
    vels, _ = T.minimal_geodesics(np.array([0.0, 0.0]), np.array([0.5, 0.5]))
    assert len(vels) == 4
    expect = np.array([[1, 1], [1, -1], [-1, 1], [-1, -1]]) / np.sqrt(2)
    for e in expect:
        assert min(np.linalg.norm(vels - e, axis=1)) < 1e-12


def test_minimal_geodesics_sphere():
    S = Sphere(2, 1.0)
    p = np.array([0.0, 0.0, 1.0])
    q = S.project_point(np.array([0.3, -0.2, 0.8]))
    vels, cont = S.minimal_geodesics(p, q)
    assert len(vels) == 1 and not cont
    lg = S.log(p, q)
    assert np.allclose(vels[0], lg / np.linalg.norm(lg), atol=1e-12)
    # antipode: continuum flag plus a spanning sample of cap directions
    vels, cont = S.minimal_geodesics(p, -p, cap=16)
    assert cont and len(vels) == 16
    d = S.distance(p, -p)
    for u in vels:
        assert np.allclose(S.exp(p, d * u), -p, atol=1e-9)


def test_transport_isometry_and_gram():
    rng = np.random.default_rng(5)
    for M in MANIFOLDS:
        P = M.random_points(200, rng)
        Q = M.exp(P, random_tangents(M, P, rng, 0.4 * min(M.injectivity_radius, 5.0)))
        W1 = M.project_tangent(P, rng.standard_normal(P.shape))
        W2 = M.project_tangent(P, rng.standard_normal(P.shape))
        T1 = M.transport(P, Q, W1)
        T2 = M.transport(P, Q, W2)
        assert np.abs(np.sum(T1 * T2, axis=1) - np.sum(W1 * W2, axis=1)).max() <= 1e-10
        assert np.abs(np.linalg.norm(T1, axis=1) - np.linalg.norm(W1, axis=1)).max() <= 1e-10
        # linearity
        T12 = M.transport(P, Q, 2.0 * W1 - 0.5 * W2)
        assert np.abs(T12 - (2.0 * T1 - 0.5 * T2)).max() <= 1e-10


def test_transport_geodesic_velocity():
    S = Sphere(2, 1.0)
    p = np.array([0.0, 0.0, 1.0])
    u = np.array([1.0, 0.0, 0.0])
    t = 0.7
    q = S.exp(p, t * u)
    arrived = S.transport(p, q, u)
    expect = -np.sin(t) * p + np.cos(t) * u
    assert np.allclose(arrived, expect, atol=1e-12)
    # transport to the same point is the identity
    assert np.allclose(S.transport(p, p, u), u, atol=1e-14)
    T = FlatTorus([1.0, 1.0])
    w = np.array([0.3, -0.1])
    assert np.allclose(T.transport([0.1, 0.1], [0.8, 0.4], w), w)


def test_frames_orthonormal():
    rng = np.random.default_rng(9)
    for M in MANIFOLDS:
        P = M.random_points(50, rng)
        frames = M.frames(P)
        grams = np.einsum("nia,nja->nij", frames, frames)
        assert np.abs(grams - np.eye(M.dim)).max() <= 1e-10
        if isinstance(M, Sphere):
            assert np.abs(np.einsum("nia,na->ni", frames, P)).max() <= 1e-10 * M.radius


# ----------------------------------------------------------------------
# Jacobi fields


def variation_fd(M, center, q, y, v, h=1e-5):
    """Central difference of s -> exp_center(log_center(exp_q(s v)) - y)."""
    def phi(s):
        c_s = M.exp(q, s * v)
        w = M.log(center, c_s) if isinstance(M, Euclidean) is False else c_s - center
        return M.exp(center, w - y)

    plus, minus = phi(h), phi(-h)
    if isinstance(M, FlatTorus):
        return M.wrapped_diff(minus, plus) / (2.0 * h)
    return (plus - minus) / (2.0 * h)


def test_jacobi_zero_shift_returns_v():
    rng = np.random.default_rng(2)
    for M in MANIFOLDS:
        center = M.random_points(1, rng)[0]
        step = 0.2 * min(M.injectivity_radius, 5.0)
        q = M.exp(center, step * _unit(M, center, rng))
        v = M.project_tangent(q, rng.standard_normal(M.coord_dim))
        J = jacobi_endpoint(M, center, q, np.zeros(M.coord_dim), v)
        assert np.allclose(J.vec, v, atol=1e-9)
        assert np.allclose(J.base, q, atol=1e-12)


def _unit(M, p, rng):
    u = M.project_tangent(p, rng.standard_normal(M.coord_dim))
    return u / np.linalg.norm(u)


def test_jacobi_flat_translates():
    E = Euclidean(2)
    center = np.array([0.0, 0.0])
    q = np.array([0.4, 0.1])
    y = np.array([0.05, -0.2])
    v = np.array([0.3, 0.7])
    J = jacobi_endpoint(E, center, q, y, v)
    assert np.allclose(J.base, q - y)
    assert np.allclose(J.vec, v)


@pytest.mark.parametrize("M", MANIFOLDS, ids=lambda m: str(m.descriptor()))
def test_jacobi_matches_finite_differences(M):
    rng = np.random.default_rng(17)
    inj = min(M.injectivity_radius, 4.0)
    for _ in range(100):
        center = M.random_points(1, rng)[0]
        q = M.exp(center, (0.3 * inj) * _unit(M, center, rng) * rng.uniform(0.1, 1.0))
        y = (0.15 * inj) * _unit(M, center, rng) * rng.uniform(0.1, 1.0)
        v = _unit(M, q, rng)
        J = jacobi_endpoint(M, center, q, y, v)
        fd = variation_fd(M, center, q, y, v)
        denom = max(np.linalg.norm(fd), 1e-12)
        assert np.linalg.norm(J.vec - fd) / denom <= 1e-6


def test_jacobi_domain_violation():
    S = Sphere(2, 1.0)
    center = np.array([0.0, 0.0, 1.0])
    q = S.exp(center, 2.0 * np.array([1.0, 0.0, 0.0]))
    y = 1.5 * np.array([0.0, 1.0, 0.0])
    with pytest.raises(DomainViolation):
        jacobi_endpoint(S, center, q, y, np.array([0.0, 1.0, 0.0]))


# ----------------------------------------------------------------------
# ball quadrature


def monomial_ball_integral(alpha, radius):
    """Closed form for the integral of prod x_i^alpha_i over the ball."""
    alpha = np.asarray(alpha)
    if np.any(alpha % 2 == 1):
        return 0.0
    m = len(alpha)
    s = alpha.sum()
    surface = 2.0 * np.prod([gamma((a + 1) / 2.0) for a in alpha]) / gamma((s + m) / 2.0)
    return surface * radius ** (s + m) / (s + m)


@pytest.mark.parametrize("m", [1, 2, 3, 4])
@pytest.mark.parametrize("order", [4, 7])
def test_ball_quadrature_monomial_exactness(m, order):
    eps = 0.8
    nodes, w = ball_quadrature(m, eps, order)
    assert np.all(w > 0)
    assert np.all(np.linalg.norm(nodes, axis=1) < eps)
    rng = np.random.default_rng(0)
    exponents = [tuple(rng.integers(0, order + 1, m)) for _ in range(40)]
    exponents = [e for e in exponents if sum(e) <= order] + [(0,) * m]
    for alpha in exponents:
        approx = float(w @ np.prod(nodes ** np.asarray(alpha), axis=1))
        exact = monomial_ball_integral(alpha, eps)
        scale = max(abs(exact), ball_volume(m, eps))
        assert abs(approx - exact) / scale <= 1e-10, (alpha, approx, exact)


def test_ball_quadrature_examples():
    nodes, w = ball_quadrature(2, 1.0, 6)
    assert np.isclose(w.sum(), np.pi, rtol=1e-12)
    assert abs(float(w @ nodes[:, 0])) <= 1e-12
    assert np.isclose(float(w @ (nodes ** 2).sum(axis=1)), np.pi / 2, rtol=1e-12)


def test_ball_quadrature_unsupported_dim():
    with pytest.raises(UnsupportedDim):
        ball_quadrature(5, 1.0, 4)
    nodes, w = ball_quadrature_qmc(5, 1.0, 4096, seed=1)
    assert np.isclose(w.sum(), ball_volume(5, 1.0), rtol=1e-12)
    assert np.all(np.linalg.norm(nodes, axis=1) < 1.0)
    # equal-weight rule integrates a smooth function to a few percent
    val = float(w @ np.exp(-np.sum(nodes ** 2, axis=1)))
    ref = 2.63896899  # radial quadrature of exp(-r^2) over the unit 5-ball
    assert abs(val - ref) / ref < 0.05


def test_injectivity_and_convexity_radii():
    assert Euclidean(3).injectivity_radius == np.inf
    assert np.isclose(Sphere(2, 2.0).injectivity_radius, 2.0 * np.pi)
    assert np.isclose(FlatTorus([1.0, 0.4]).injectivity_radius, 0.2)
    assert np.isclose(FlatTorus([1.0, 0.4]).convexity_radius, 0.1)
    with pytest.raises(ValueError):
        Sphere(2, -1.0)
    with pytest.raises(ValueError):
        FlatTorus([1.0, -2.0])


def test_point_validation():
    S = Sphere(2, 1.0)
    with pytest.raises(ValueError):
        S.check_point(np.array([1.0, 1.0, 1.0]))
    T = FlatTorus([1.0, 1.0])
    assert np.allclose(T.wrap([1.25, -0.25]), [0.25, 0.75])
