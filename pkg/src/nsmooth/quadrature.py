"""Deterministic quadrature over Euclidean balls and spheres.

Product rules (Gauss-Legendre radial x symmetric angular grids) cover
dimensions 1..4; higher dimensions fall back to a seeded Halton rule.
All rules are fully deterministic for a given (dim, order/seed).
"""

import numpy as np
from scipy.special import gamma, ndtri, roots_jacobi

from .errors import UnsupportedDim

MAX_PRODUCT_DIM = 4

_PRIMES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37)


def sphere_surface_area(d):
    """Surface area of the unit sphere S^{d-1} in R^d."""
    return 2.0 * np.pi ** (d / 2.0) / gamma(d / 2.0)


def ball_volume(m, radius=1.0):
    return sphere_surface_area(m) / m * radius ** m


def _circle_rule(n):
    theta = 2.0 * np.pi * np.arange(n) / n
    nodes = np.stack([np.cos(theta), np.sin(theta)], axis=1)
    weights = np.full(n, 2.0 * np.pi / n)
    return nodes, weights


def sphere_quadrature(d, order):
    """Nodes/weights on the unit sphere S^{d-1}, exact for polynomials of
    total degree <= order (weights sum to the surface area)."""
    if d == 1:
        return np.array([[-1.0], [1.0]]), np.array([1.0, 1.0])
    if d == 2:
        n = 2 * max(int(np.ceil((order + 1) / 2.0)), 2)
        return _circle_rule(n)
    # recursive product: point = (x, sqrt(1-x^2) * omega), omega in S^{d-2};
    # the slice weight is (1-x^2)^{(d-3)/2}, handled by Gauss-Jacobi nodes
    alpha = (d - 3) / 2.0
    n_x = max(int(np.ceil((order + 1) / 2.0)), 2)
    x, wx = roots_jacobi(n_x, alpha, alpha)
    sub_nodes, sub_weights = sphere_quadrature(d - 1, order)
    s = np.sqrt(np.clip(1.0 - x ** 2, 0.0, None))
    nodes = np.concatenate(
        [
            np.repeat(x, len(sub_nodes))[:, None],
            np.kron(s[:, None], sub_nodes),
        ],
        axis=1,
    )
    weights = np.kron(wx, sub_weights)
    return nodes, weights


def ball_quadrature(m, eps, order):
    """Quadrature rule over the open ball of radius eps in R^m.

    Returns (nodes, weights) with nodes of shape (k, m). The rule integrates
    polynomials of total degree <= order exactly; nodes are strictly interior
    and weights positive. Dimensions above MAX_PRODUCT_DIM raise
    UnsupportedDim (use ball_quadrature_qmc there instead).
    """
    if m < 1:
        raise UnsupportedDim(f"dimension {m} < 1")
    if m > MAX_PRODUCT_DIM:
        raise UnsupportedDim(f"product rule capped at dim {MAX_PRODUCT_DIM}, got {m}")
    if eps <= 0:
        raise ValueError(f"ball radius must be positive, got {eps}")
    if order < 2:
        raise ValueError(f"order must be >= 2, got {order}")
    n_r = max(int(np.ceil((order + m) / 2.0)), 2)
    x, wx = np.polynomial.legendre.leggauss(n_r)
    r = 0.5 * eps * (x + 1.0)
    wr = 0.5 * eps * wx * r ** (m - 1)
    ang_nodes, ang_weights = sphere_quadrature(m, order)
    nodes = r[:, None, None] * ang_nodes[None, :, :]
    weights = wr[:, None] * ang_weights[None, :]
    return nodes.reshape(-1, m), weights.reshape(-1)


def halton(n, dim, offset=0):
    """First n points of the Halton sequence in [0,1)^dim, skipping `offset`
    initial terms (plus a fixed burn-in to avoid the degenerate prefix)."""
    if dim > len(_PRIMES):
        raise UnsupportedDim(f"halton limited to {len(_PRIMES)} dims")
    idx = np.arange(n, dtype=np.int64) + offset + 31
    out = np.empty((n, dim))
    for j in range(dim):
        base = _PRIMES[j]
        i = idx.copy()
        f = np.ones(n)
        r = np.zeros(n)
        while np.any(i > 0):
            f = f / base
            r = r + f * (i % base)
            i = i // base
        out[:, j] = r
    return out


def ball_points_halton(m, eps, n, seed=0):
    """n deterministic quasi-random points in the open ball of radius eps,
    seeded by shifting the Halton index."""
    u = halton(n, m + 1, offset=int(seed) * 7919)
    radius = eps * u[:, 0] ** (1.0 / m) * (1.0 - 1e-12)
    if m == 1:
        sign = np.where(u[:, 1] < 0.5, -1.0, 1.0)
        return (radius * sign)[:, None]
    z = ndtri(np.clip(u[:, 1:], 1e-12, 1.0 - 1e-12))
    norms = np.linalg.norm(z, axis=1)
    norms[norms == 0] = 1.0
    return radius[:, None] * z / norms[:, None]


def ball_quadrature_qmc(m, eps, n, seed=0):
    """Equal-weight Halton rule over the ball (fallback for m > 4)."""
    nodes = ball_points_halton(m, eps, n, seed=seed)
    weights = np.full(n, ball_volume(m, eps) / n)
    return nodes, weights


def fibonacci_sphere(n):
    """n quasi-uniform points on the unit 2-sphere (deterministic)."""
    i = np.arange(n) + 0.5
    phi = np.arccos(1.0 - 2.0 * i / n)
    golden = np.pi * (1.0 + np.sqrt(5.0))
    theta = golden * i
    return np.stack(
        [np.sin(phi) * np.cos(theta), np.sin(phi) * np.sin(theta), np.cos(phi)], axis=1
    )


def unit_directions(n_dim, count=64):
    """Deterministic grid of unit vectors in R^{n_dim} (singularity search)."""
    if n_dim == 1:
        return np.array([[1.0], [-1.0]])
    if n_dim == 2:
        theta = 2.0 * np.pi * np.arange(count) / count
        return np.stack([np.cos(theta), np.sin(theta)], axis=1)
    if n_dim == 3:
        return fibonacci_sphere(count)
    z = ndtri(np.clip(halton(count, n_dim, offset=97), 1e-12, 1 - 1e-12))
    return z / np.linalg.norm(z, axis=1, keepdims=True)
