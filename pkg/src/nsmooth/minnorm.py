"""Minimum-norm point of the convex hull of finitely many vectors.

Wolfe's algorithm with major/minor cycles. The active set ("corral") stays
affinely independent, so the returned combination has at most dim+1 support
points (Caratheodory form). Optimality is certified by the Wolfe criterion
    <x, p_i - x> >= -tol * |x| * max_i |p_i|   for all i.
"""

from dataclasses import dataclass

import numpy as np

WOLFE_TOL = 1e-10
MAX_ITER = 1000


@dataclass
class MinNormResult:
    vector: np.ndarray
    norm: float
    coefficients: np.ndarray  # convex weights over `support`
    support: np.ndarray  # indices into the input point list
    converged: bool
    iterations: int

    def wolfe_gap(self, points):
        points = np.atleast_2d(points)
        scale = max(float(np.max(np.linalg.norm(points, axis=1))), 1e-300)
        return float(np.min(points @ self.vector) - self.norm ** 2) / scale


def _affine_min_norm(P):
    """Coefficients a (sum 1, sign-free) minimizing |a @ P| over the affine
    hull of the rows of P, via the KKT system."""
    k = len(P)
    G = P @ P.T
    A = np.zeros((k + 1, k + 1))
    A[:k, :k] = G
    A[:k, k] = 1.0
    A[k, :k] = 1.0
    b = np.zeros(k + 1)
    b[k] = 1.0
    sol, *_ = np.linalg.lstsq(A, b, rcond=None)
    return sol[:k]


def _caratheodory_reduce(P, support, lam):
    """Drop affinely dependent support points without moving the
    combination, until at most dim+1 remain."""
    d = P.shape[1]
    while len(support) > d + 1:
        Ps = P[support]
        A = np.vstack([Ps.T, np.ones(len(Ps))])
        _, s, Vt = np.linalg.svd(A)
        gamma = Vt[-1]
        if np.linalg.norm(A @ gamma) > 1e-9 * max(1.0, np.abs(Ps).max()):
            break
        if np.all(gamma <= 1e-15):
            gamma = -gamma
        pos = gamma > 1e-15
        theta = float(np.min(lam[pos] / gamma[pos]))
        lam = lam - theta * gamma
        lam[np.abs(lam) < 1e-14] = 0.0
        keep = lam > 0.0
        support = [sp for sp, k in zip(support, keep) if k]
        lam = lam[keep]
        lam = lam / lam.sum()
    return support, lam


def min_norm_point(points, tol=WOLFE_TOL, max_iter=MAX_ITER):
    """Euclidean minimum-norm point of Conv(points), points of shape (k, d)."""
    P = np.atleast_2d(np.asarray(points, dtype=float))
    if P.ndim != 2 or len(P) == 0:
        raise ValueError("need a nonempty (k, d) array of points")
    norms = np.linalg.norm(P, axis=1)
    scale = max(float(norms.max()), 1e-300)

    support = [int(np.argmin(norms))]
    lam = np.array([1.0])
    x = P[support[0]].copy()

    iters = 0
    converged = False
    while iters < max_iter:
        iters += 1
        scores = P @ x
        j = int(np.argmin(scores))
        if scores[j] >= x @ x - tol * scale * max(np.linalg.norm(x), tol):
            converged = True
            break
        if j in support:
            converged = True  # numerically stalled at the certificate
            break
        support.append(j)
        lam = np.append(lam, 0.0)
        # minor cycles: project onto the affine hull of the corral, walking
        # back toward the previous feasible point when weights go negative
        while True:
            a = _affine_min_norm(P[support])
            if np.all(a > 1e-12):
                lam = a
                break
            neg = a <= 1e-12
            with np.errstate(divide="ignore", invalid="ignore"):
                ratios = np.where(lam - a > 1e-300, lam / (lam - a), np.inf)
            theta = min(1.0, float(np.min(ratios[neg])))
            lam = (1.0 - theta) * lam + theta * a
            lam[lam < 1e-12] = 0.0
            keep = lam > 0.0
            if not np.any(keep):
                keep[int(np.argmax(a))] = True
                lam[keep] = 1.0
            support = [s for s, k in zip(support, keep) if k]
            lam = lam[keep]
            lam = lam / lam.sum()
        x = lam @ P[support]

    support, lam = _caratheodory_reduce(P, support, lam)
    support = np.asarray(support, dtype=int)
    order = np.argsort(support)
    return MinNormResult(
        vector=x,
        norm=float(np.linalg.norm(x)),
        coefficients=lam[order],
        support=support[order],
        converged=converged,
        iterations=iters,
    )
