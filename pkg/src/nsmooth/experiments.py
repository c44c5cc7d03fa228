"""Scenario runners: criticality-equivalence scans, nonvanishing-gradient
scans of the smoothed fields, and the two-singular-point sphere check.

Every runner is deterministic given (config, seed) and returns a report
object that serializes to plain JSON types.
"""

from dataclasses import dataclass, field as dc_field
from typing import Optional

import numpy as np

from .catalog import FieldCatalogEntry, dist_to_point
from .clarke import SamplingParams, ScalarField, gs_critical, is_singular_scalar
from .errors import HypothesisFailure, InsufficientSamples
from .manifold import Manifold
from .smoothing import (
    build_cover,
    build_smoothed,
    grad_norms_batch,
    lipschitz_estimate,
)

NEIGHBOR_GRAPH_FACTOR = 2.5  # connectivity radius in units of grid spacing


def grid_spacing(grid):
    """Median nearest-neighbor distance (Euclidean in coords) of a grid."""
    G = np.atleast_2d(grid)
    d2 = np.sum((G[:, None, :] - G[None, :, :]) ** 2, axis=2)
    np.fill_diagonal(d2, np.inf)
    return float(np.median(np.sqrt(d2.min(axis=1))))


def cluster_count(M: Manifold, points, radius):
    """Connected components of the radius-graph on `points` (intrinsic
    distances); returns (count, labels)."""
    P = np.atleast_2d(points)
    n = len(P)
    if n == 0:
        return 0, np.zeros(0, dtype=int)
    D = M.distance(P[:, None, :], P[None, :, :])
    adj = D <= radius
    labels = -np.ones(n, dtype=int)
    comp = 0
    for i in range(n):
        if labels[i] >= 0:
            continue
        stack = [i]
        labels[i] = comp
        while stack:
            j = stack.pop()
            for k in np.where(adj[j] & (labels < 0))[0]:
                labels[k] = comp
                stack.append(k)
        comp += 1
    return comp, labels


@dataclass
class ScanReport:
    manifold: dict
    base_point: list
    grid: np.ndarray
    distances: np.ndarray
    gs_singular: np.ndarray
    gs_margin: np.ndarray
    clarke_singular: np.ndarray
    clarke_margin: np.ndarray
    indeterminate: np.ndarray
    band_width: float
    disagreements: list
    params: dict = dc_field(default_factory=dict)

    @property
    def singular_indices(self):
        return np.where(self.gs_singular)[0]

    def summary(self):
        return {
            "grid_points": int(len(self.grid)),
            "band_width": float(self.band_width),
            "n_indeterminate": int(np.sum(self.indeterminate)),
            "n_singular_gs": int(np.sum(self.gs_singular)),
            "n_singular_clarke_determinate": int(
                np.sum(self.clarke_singular & ~self.indeterminate)
            ),
            "disagreements": [int(i) for i in self.disagreements],
            "n_disagreements": int(len(self.disagreements)),
        }


def equivalence_scan(M: Manifold, p, grid, params: SamplingParams = None) -> ScanReport:
    """Per grid point, compare the Grove-Shiohama criticality test with the
    Clarke singularity verdict for the distance function from p.

    Points within the declared band of the cut locus of p are flagged
    indeterminate for the sampling-based verdict (the sampling ball would
    straddle the cut locus) and are excluded from the disagreement count,
    not from the report.
    """
    params = params or SamplingParams()
    p = M.check_point(np.asarray(p, float))
    grid = np.atleast_2d(grid)
    entry = dist_to_point(M, p)
    band = 2.0 * params.base_radius(M)

    n = len(grid)
    gs_sing = np.zeros(n, dtype=bool)
    gs_margin = np.zeros(n)
    cl_sing = np.zeros(n, dtype=bool)
    cl_margin = np.zeros(n)
    indet = np.zeros(n, dtype=bool)
    dists = M.distance(grid, np.broadcast_to(p, grid.shape))
    for i, q in enumerate(grid):
        g = gs_critical(M, p, q, params)
        gs_sing[i], gs_margin[i] = g.singular, g.margin
        indet[i] = M.cut_locus_distance(p, q) < band
        if dists[i] < 1e-12:
            cl_sing[i], cl_margin[i] = True, 0.0
            continue
        try:
            c = is_singular_scalar(entry.field, q, params)
        except InsufficientSamples:
            indet[i] = True
            cl_margin[i] = np.nan
            continue
        cl_sing[i], cl_margin[i] = c.singular, c.margin
    determinate = ~indet
    disagreements = [int(i) for i in np.where(determinate & (gs_sing != cl_sing))[0]]
    return ScanReport(
        manifold=M.descriptor(),
        base_point=[float(x) for x in p],
        grid=grid,
        distances=dists,
        gs_singular=gs_sing,
        gs_margin=gs_margin,
        clarke_singular=cl_sing,
        clarke_margin=cl_margin,
        indeterminate=indet,
        band_width=band,
        disagreements=disagreements,
        params={"n": params.n, "seed": params.seed, "tol_sing": params.tol_sing},
    )


@dataclass
class SingularScanResult:
    grid: np.ndarray
    margins: np.ndarray
    singular: np.ndarray
    spacing: float

    def clusters(self, M):
        pts = self.grid[self.singular]
        return cluster_count(M, pts, NEIGHBOR_GRAPH_FACTOR * self.spacing)


def singular_scan(field: ScalarField, grid, params: SamplingParams = None,
                  extra_points=None) -> SingularScanResult:
    """Clarke margins over a grid (optionally extended by candidate points);
    verdict-singular points are those below the scaled tolerance."""
    params = params or SamplingParams()
    grid = np.atleast_2d(grid)
    if extra_points is not None and len(extra_points):
        grid = np.concatenate([grid, np.atleast_2d(extra_points)], axis=0)
    spacing = grid_spacing(grid)
    margins = np.empty(len(grid))
    singular = np.zeros(len(grid), dtype=bool)
    for i, q in enumerate(grid):
        v = is_singular_scalar(field, q, params)
        margins[i] = v.margin
        singular[i] = v.singular
    return SingularScanResult(grid, margins, singular, spacing)


@dataclass
class NonvanishingReport:
    eps_ladder: list
    min_grad: dict  # eps -> min |grad F_eps| over the grid
    threshold_eps: Optional[float]
    min_delta_hat: float
    delta_check: dict  # eps -> bool, min grad >= delta_hat/3 - slack
    grid_size: int
    grad_tol: float

    def to_dict(self):
        return {
            "eps_ladder": [float(e) for e in self.eps_ladder],
            "min_grad": {f"{k:.17g}": float(v) for k, v in self.min_grad.items()},
            "threshold_eps": None if self.threshold_eps is None else float(self.threshold_eps),
            "min_delta_hat": float(self.min_delta_hat),
            "delta_check": {f"{k:.17g}": bool(v) for k, v in self.delta_check.items()},
            "grid_size": int(self.grid_size),
            "grad_tol": float(self.grad_tol),
        }


def nonvanishing_scan(field: ScalarField, grid, eps_ladder, cover=None,
                      params: SamplingParams = None, grad_tol=1e-3,
                      delta_slack=0.05) -> NonvanishingReport:
    """Minimum smoothed-gradient norm over a region of nonsingular points,
    per epsilon, cross-referenced against the sampled margin delta_hat:
    min |grad F_eps| >= delta_hat / 3 - slack at accepted rungs."""
    params = params or SamplingParams()
    M = field.manifold
    grid = np.atleast_2d(grid)
    margins = np.array([is_singular_scalar(field, q, params).margin for q in grid])
    if np.any(margins <= params.tol_sing):
        raise HypothesisFailure(0, "region grid contains verdict-singular points")
    min_delta_hat = float(np.min(margins) / 2.0)
    if cover is None:
        cover = build_cover(M, M.injectivity_radius / 4.0)
    min_grad = {}
    delta_check = {}
    for eps in eps_ladder:
        S = build_smoothed(field, cover, eps)
        g = grad_norms_batch(S, grid)
        min_grad[eps] = float(g.min())
        delta_check[eps] = bool(min_grad[eps] >= min_delta_hat / 3.0 - delta_slack)
    threshold = None
    for eps in sorted(eps_ladder, reverse=True):
        if all(min_grad[e] > grad_tol for e in eps_ladder if e <= eps):
            threshold = eps
            break
    return NonvanishingReport(
        eps_ladder=list(eps_ladder),
        min_grad=min_grad,
        threshold_eps=threshold,
        min_delta_hat=min_delta_hat,
        delta_check=delta_check,
        grid_size=len(grid),
        grad_tol=grad_tol,
    )


@dataclass
class ReebReport:
    steps: dict
    passed: bool

    def to_dict(self):
        return {"steps": self.steps, "passed": bool(self.passed)}


def reeb_check(entry: FieldCatalogEntry, c, band, eps, grid=None, n_grid=600,
               params: SamplingParams = None, grad_tol=1e-3, level_fracs=(0.02, 0.15),
               localization_radius=0.7, level_grid_size=4000) -> ReebReport:
    """Numerical content of the two-singular-point sphere scenario.

    (1) the singular set clusters into exactly two components;
    (2) the c-level band is connected;
    (3) the smoothed gradient does not vanish on the band F_eps in [b1, b2];
    (4) levels near the extremes localize around the singular clusters.

    Raises HypothesisFailure naming the first failing step. The scan grid is
    extended with the catalog's candidate singular points when available
    (the verdicts still come from the sampling machinery).
    """
    params = params or SamplingParams()
    field = entry.field if isinstance(entry, FieldCatalogEntry) else entry
    known = entry.known_singular_set if isinstance(entry, FieldCatalogEntry) else None
    M = field.manifold
    if grid is None:
        grid = M.grid(n_grid)
    grid = np.atleast_2d(grid)
    steps = {}

    level_grid = M.grid(level_grid_size)
    level_vals = field.eval(level_grid)
    b1, b2 = float(band[0]), float(band[1])
    fmin, fmax = float(level_vals.min()), float(level_vals.max())
    if not (fmin < b1 < c < b2 < fmax):
        raise HypothesisFailure(0, f"need min < b1 < c < b2 < max, got {fmin} .. {fmax}")

    # (1) singular clusters
    scan = singular_scan(field, grid, params, extra_points=known)
    n_clusters, labels = scan.clusters(M)
    steps["1_singular_clusters"] = {
        "count": int(n_clusters),
        "n_singular_points": int(np.sum(scan.singular)),
    }
    report = ReebReport(steps, False)
    if n_clusters != 2:
        raise HypothesisFailure(1, f"expected 2 singular clusters, found {n_clusters}", report)
    sing_pts = scan.grid[scan.singular]
    cluster_vals = [float(np.mean(field.eval(sing_pts[labels == k]))) for k in range(2)]
    z_low = sing_pts[labels == int(np.argmin(cluster_vals))]
    z_high = sing_pts[labels == int(np.argmax(cluster_vals))]

    # (2) level-set connectivity at c, on the denser value-only grid
    lip = field.lipschitz_hint or lipschitz_estimate(field).value
    spacing = grid_spacing(level_grid)
    level_tol = 2.0 * lip * spacing
    vals = level_vals
    level_pts = level_grid[np.abs(vals - c) < level_tol]
    n_comp, _ = cluster_count(M, level_pts, NEIGHBOR_GRAPH_FACTOR * spacing)
    steps["2_level_connectivity"] = {
        "level": float(c),
        "level_tol": float(level_tol),
        "n_points": int(len(level_pts)),
        "n_components": int(n_comp),
    }
    if len(level_pts) == 0 or n_comp != 1:
        raise HypothesisFailure(2, f"level band has {n_comp} components", report)

    # (3) nonvanishing smoothed gradient on the band
    cover = build_cover(M, M.injectivity_radius / 4.0)
    S = build_smoothed(field, cover, eps)
    smoothed_vals = S.values(grid)
    band_mask = (smoothed_vals >= b1) & (smoothed_vals <= b2)
    band_grad_min = float(grad_norms_batch(S, grid[band_mask]).min()) if np.any(band_mask) else np.inf
    steps["3_band_gradient"] = {
        "eps": float(eps),
        "band": [b1, b2],
        "n_points": int(np.sum(band_mask)),
        "min_grad": band_grad_min,
    }
    if not np.isfinite(band_grad_min) or band_grad_min <= grad_tol:
        raise HypothesisFailure(3, f"min smoothed gradient {band_grad_min:.3g} <= {grad_tol}", report)

    # (4) shrinking levels localize at the singular clusters
    loc = {}
    for which, zc in (("min", z_low), ("max", z_high)):
        maxdists = []
        for frac in level_fracs:
            kappa = fmin + frac * (fmax - fmin) if which == "min" else fmax - frac * (fmax - fmin)
            pts = level_grid[np.abs(vals - kappa) < level_tol]
            if len(pts) == 0:
                maxdists.append(np.inf)
                continue
            d = M.distance(pts[:, None, :], zc[None, :, :]).min(axis=1)
            maxdists.append(float(d.max()))
        loc[which] = {"fracs": list(level_fracs), "max_dist_to_cluster": maxdists}
    steps["4_localization"] = {**loc, "radius": float(localization_radius)}
    for which in ("min", "max"):
        md = loc[which]["max_dist_to_cluster"]
        if not (md[0] < localization_radius and md[0] <= md[-1] + 1e-9):
            raise HypothesisFailure(4, f"{which}-side levels fail to localize: {md}", report)

    report.passed = True
    return report
