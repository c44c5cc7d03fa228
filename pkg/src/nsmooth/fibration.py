"""Tubular-neighborhood projections and approximate-fibration checks.

The target manifold is embedded isometrically in closed form (no general
embedding machinery is needed for the built-ins), the smoothed map is
composed with the nearest-point projection onto the embedded image, and
the fibration-adjacent certificates are computed on a declared scan grid:
the n-th singular value of the composed differential (submersion rank) and
the max intrinsic distance to the original map (the eta bound).
"""

from dataclasses import dataclass, field as dc_field
from typing import Callable

import numpy as np

from .clarke import MapField
from .errors import DomainViolation, TubeEscape, UnsupportedTarget
from .manifold import Euclidean, FlatTorus, Manifold, Sphere
from .smoothing import SmoothedMap, build_cover, build_smoothed, differentials_batch


@dataclass
class EmbeddingSpec:
    target: Manifold
    ambient_dim: int
    tube_radius: float  # mu0
    embed: Callable  # (B, a_tgt) -> (B, l)
    project: Callable  # (B, l) -> (B, a_tgt), the nearest-point map pi_N
    dproject: Callable  # (B, l) -> (B, l, l), ambient differential of embed o pi_N

    def image_distance(self, Y):
        Y = np.atleast_2d(Y)
        return np.linalg.norm(Y - self.embed(self.project(Y)), axis=1)


def embed(N: Manifold) -> EmbeddingSpec:
    """Closed-form isometric embedding with its tube projection."""
    if isinstance(N, Euclidean):
        ident = lambda X: np.atleast_2d(np.asarray(X, float))
        deye = lambda Y: np.broadcast_to(np.eye(N.dim), (len(np.atleast_2d(Y)), N.dim, N.dim)).copy()
        return EmbeddingSpec(N, N.dim, np.inf, ident, ident, deye)
    if isinstance(N, Sphere):
        R = N.radius
        l = N.coord_dim

        def project(Y):
            Y = np.atleast_2d(np.asarray(Y, float))
            return R * Y / np.linalg.norm(Y, axis=1, keepdims=True)

        def dproject(Y):
            Y = np.atleast_2d(np.asarray(Y, float))
            norms = np.linalg.norm(Y, axis=1)
            yhat = Y / norms[:, None]
            eye = np.broadcast_to(np.eye(l), (len(Y), l, l))
            return (R / norms)[:, None, None] * (eye - yhat[:, :, None] * yhat[:, None, :])

        return EmbeddingSpec(N, l, R / 2.0, lambda X: np.atleast_2d(np.asarray(X, float)),
                             project, dproject)
    if isinstance(N, FlatTorus):
        L = N.periods
        radii = L / (2.0 * np.pi)
        n = N.dim
        l = 2 * n

        def emb(X):
            X = np.atleast_2d(np.asarray(X, float))
            ang = 2.0 * np.pi * X / L
            out = np.empty((len(X), l))
            out[:, 0::2] = radii * np.cos(ang)
            out[:, 1::2] = radii * np.sin(ang)
            return out

        def project(Y):
            Y = np.atleast_2d(np.asarray(Y, float))
            ang = np.arctan2(Y[:, 1::2], Y[:, 0::2])
            return np.mod(ang * L / (2.0 * np.pi), L)

        def dproject(Y):
            Y = np.atleast_2d(np.asarray(Y, float))
            out = np.zeros((len(Y), l, l))
            for i in range(n):
                yi = Y[:, 2 * i : 2 * i + 2]
                rho = np.linalg.norm(yi, axis=1)
                yhat = yi / rho[:, None]
                block = (radii[i] / rho)[:, None, None] * (
                    np.broadcast_to(np.eye(2), (len(Y), 2, 2))
                    - yhat[:, :, None] * yhat[:, None, :]
                )
                out[:, 2 * i : 2 * i + 2, 2 * i : 2 * i + 2] = block
            return out

        return EmbeddingSpec(N, l, float(np.min(radii)) / 2.0, emb, project, dproject)
    raise UnsupportedTarget(f"no built-in embedding for {type(N).__name__}")


@dataclass
class Fibration:
    """f_eps = pi_N o F_eps, with chain-rule differentials."""

    smoothed: SmoothedMap
    embedding: EmbeddingSpec

    def values(self, P):
        return self.embedding.project(self.smoothed.values(P))

    def __call__(self, p):
        return self.values(np.atleast_2d(np.asarray(p, float)))[0]

    def differentials(self, P):
        """Ambient differentials of embed o f_eps along source frames:
        (B, l, m) together with the frames used."""
        D, frames = differentials_batch(self.smoothed, P)
        Y = self.smoothed.values(np.atleast_2d(P))
        dpi = self.embedding.dproject(Y)
        return np.einsum("bij,bjm->bim", dpi, D), frames


def compose_fibration(S: SmoothedMap, E: EmbeddingSpec, grid) -> Fibration:
    """Compose the projection with the smoothed map after checking the
    containment F_eps(grid) inside the tube of radius mu0."""
    grid = np.atleast_2d(grid)
    vals = S.values(grid)
    dists = E.image_distance(vals)
    worst = int(np.argmax(dists))
    if dists[worst] >= E.tube_radius:
        raise TubeEscape(grid[worst], float(dists[worst]), E.tube_radius)
    return Fibration(S, E)


def submersion_check(fib: Fibration, grid, tol=1e-3):
    """Min over the grid of the n-th singular value of df_eps; transversal
    when it clears tol, certifying full rank (the Im-Ker intersection of
    the tube-projection kernel meets the image trivially exactly when this rank is n)."""
    grid = np.atleast_2d(grid)
    D, _ = fib.differentials(grid)
    svals = np.linalg.svd(D, compute_uv=False)
    n = fib.embedding.target.dim
    sigma_n = svals[:, n - 1]
    j = int(np.argmin(sigma_n))
    return float(sigma_n[j]), bool(sigma_n[j] > tol), grid[j]


@dataclass
class FibrationReport:
    eta: float
    eps: float
    min_sigma: float
    max_dist: float
    transversal: bool
    accepted: bool
    grid_size: int
    sigma_tol: float
    rungs: list = dc_field(default_factory=list)

    def to_dict(self):
        return {
            "eta": float(self.eta),
            "eps": float(self.eps) if self.eps is not None else None,
            "min_sigma": float(self.min_sigma),
            "max_dist": float(self.max_dist),
            "transversal": bool(self.transversal),
            "accepted": bool(self.accepted),
            "grid_size": int(self.grid_size),
            "sigma_tol": float(self.sigma_tol),
            "rungs": self.rungs,
            "properness": "by construction (compact source, connected target)",
        }


DEFAULT_EPS_LADDER = (0.2, 0.1, 0.05, 0.025, 0.0125)


def eta_search(F: MapField, E: EmbeddingSpec, eta, eps_ladder=DEFAULT_EPS_LADDER,
               grid=None, grid_size=4096, cover=None, order=None, sigma_tol=1e-3):
    """Descend the eps ladder until the composed map satisfies both the
    eta-approximation bound and the submersion certificate."""
    if eta <= 0:
        raise DomainViolation("eta must be positive")
    M = F.source
    if grid is None:
        grid = M.grid(grid_size)
    grid = np.atleast_2d(grid)
    if cover is None:
        cover = build_cover(M, M.injectivity_radius / 4.0)
    base_vals = F.eval(grid)
    best = None
    rung_log = []
    for eps in eps_ladder:
        entry = {"eps": float(eps)}
        try:
            kwargs = {"order": order} if order is not None else {}
            S = build_smoothed(F, cover, eps, embedding=E, **kwargs)
            fib = compose_fibration(S, E, grid)
        except (DomainViolation, TubeEscape) as exc:
            entry["status"] = type(exc).__name__
            rung_log.append(entry)
            continue
        proj_vals = fib.values(grid)
        max_dist = float(np.max(E.target.distance(proj_vals, base_vals)))
        min_sigma, transversal, _ = submersion_check(fib, grid, tol=sigma_tol)
        entry.update(status="evaluated", max_dist=max_dist,
                     min_sigma=min_sigma, transversal=transversal)
        rung_log.append(entry)
        report = FibrationReport(
            eta=float(eta), eps=float(eps), min_sigma=min_sigma, max_dist=max_dist,
            transversal=transversal, accepted=bool(max_dist < eta and transversal),
            grid_size=len(grid), sigma_tol=sigma_tol, rungs=rung_log,
        )
        if report.accepted:
            return eps, report
        if best is None or max_dist < best.max_dist:
            best = report
    if best is None:
        best = FibrationReport(eta=float(eta), eps=None, min_sigma=0.0, max_dist=np.inf,
                               transversal=False, accepted=False, grid_size=len(grid),
                               sigma_tol=sigma_tol, rungs=rung_log)
    best.rungs = rung_log
    return None, best
