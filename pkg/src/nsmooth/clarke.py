"""Sampling estimators for generalized gradients/differentials and the
singularity tests built on them.

Gradients are sampled at quasi-random points of shrinking balls around the
query point, parallel-transported back, and collected into a finite hull
whose minimum-norm point decides singularity. Map differentials follow the
same pattern with both sides transported into fixed frames.
"""

from dataclasses import dataclass, field as dc_field
from typing import Callable, Optional

import numpy as np

from .errors import InsufficientSamples, TargetBallViolation
from .manifold import Frame, Manifold
from .minnorm import MinNormResult, min_norm_point
from .quadrature import ball_points_halton, unit_directions

TOL_SING = 1e-4


@dataclass
class ScalarField:
    """Lipschitz function on a manifold. `eval` maps a (B, a) batch of
    points to (B,) values; `grad_oracle`, when given, returns (B, a) tangent
    reps with NaN rows where the function is not differentiable."""

    manifold: Manifold
    eval: Callable[[np.ndarray], np.ndarray]
    grad_oracle: Optional[Callable[[np.ndarray], np.ndarray]] = None
    lipschitz_hint: Optional[float] = None
    name: str = ""

    def value(self, x):
        return float(self.eval(np.atleast_2d(np.asarray(x, float)))[0])


@dataclass
class MapField:
    """Lipschitz map between manifolds; `eval` maps (B, a_src) to (B, a_tgt).
    `diff_oracle`, when given, returns (B, a_tgt, a_src) ambient-rep
    differentials with NaN slabs where undefined."""

    source: Manifold
    target: Manifold
    eval: Callable[[np.ndarray], np.ndarray]
    diff_oracle: Optional[Callable[[np.ndarray], np.ndarray]] = None
    lipschitz_hint: Optional[float] = None
    name: str = ""

    def value(self, x):
        return self.eval(np.atleast_2d(np.asarray(x, float)))[0]


@dataclass
class LinearMapRep:
    """Linear map between tangent spaces as a matrix in orthonormal frames."""

    source_frame: Frame
    target_frame: Frame
    matrix: np.ndarray  # (n, m)

    def apply(self, vec):
        c = self.source_frame.coords_of(vec)
        return self.target_frame.vec_of(self.matrix @ c)

    def operator_norm(self):
        return float(np.linalg.norm(self.matrix, 2))


def adjoint(A: LinearMapRep) -> LinearMapRep:
    """Adjoint w.r.t. the Riemannian inner products: transpose in
    orthonormal frames, with source and target swapped."""
    return LinearMapRep(
        source_frame=A.target_frame,
        target_frame=A.source_frame,
        matrix=A.matrix.T.copy(),
    )


@dataclass
class HullSample:
    """Finite sample whose convex hull approximates a generalized
    gradient/differential; points are rows (tangent coordinates or
    flattened matrices)."""

    ambient_dim: int
    points: np.ndarray
    _min_norm: Optional[MinNormResult] = dc_field(default=None, repr=False)

    def min_norm(self) -> MinNormResult:
        if self._min_norm is None:
            self._min_norm = min_norm_point(self.points)
        return self._min_norm

    def interval(self):
        """Hull endpoints for one-dimensional samples."""
        if self.points.shape[1] != 1:
            raise ValueError("interval() is for 1-D hulls")
        return float(self.points.min()), float(self.points.max())


@dataclass
class SingularityVerdict:
    singular: bool
    margin: float
    samples_used: int
    radii_used: list
    threshold: float = TOL_SING
    continuum: bool = False

    def to_dict(self):
        return {
            "singular": bool(self.singular),
            "margin": float(self.margin),
            "samples_used": int(self.samples_used),
            "radii_used": [float(r) for r in self.radii_used],
            "threshold": float(self.threshold),
            "continuum": bool(self.continuum),
        }


@dataclass
class SamplingParams:
    n: int = 40
    seed: int = 0
    radius0: Optional[float] = None  # default: min(1e-2, convexity_radius/10)
    rung_factors: tuple = (1.0, 0.5, 0.25)
    h_fd: float = 1e-6
    discard_factor: float = 0.1
    tol_sing: float = TOL_SING
    direction_count: int = 64
    geodesic_cap: int = 16

    def base_radius(self, manifold):
        if self.radius0 is not None:
            return self.radius0
        conv = manifold.convexity_radius
        return min(1e-2, conv / 10.0) if np.isfinite(conv) else 1e-2


def _fd_gradients(F, X, frames_at_X, h, discard_factor, lip_hint):
    """Central-difference gradients at the rows of X in the given frames.

    Returns (gradients (n, a), keep mask). A sample is dropped when forward
    and backward quotients disagree by more than discard_factor * Lip scale.
    """
    M = F.manifold
    n, m, a = frames_at_X.shape
    f0 = F.eval(X)
    plus = np.empty((n, m))
    minus = np.empty((n, m))
    for k in range(m):
        step = h * frames_at_X[:, k, :]
        plus[:, k] = F.eval(M.exp(X, step))
        minus[:, k] = F.eval(M.exp(X, -step))
    central = (plus - minus) / (2.0 * h)
    fwd = (plus - f0[:, None]) / h
    bwd = (f0[:, None] - minus) / h
    disagreement = np.max(np.abs(fwd - bwd), axis=1)
    lip_scale = lip_hint if lip_hint is not None else max(float(np.max(np.abs(central))), 1e-12)
    keep = disagreement <= discard_factor * lip_scale
    grads = np.einsum("nk,nka->na", central, frames_at_X)
    return grads, keep


def sample_mixture(F: ScalarField, p, radius, n, seed=0, params=None) -> HullSample:
    """Sample transported gradients of F over the ball of the given radius
    around p, as coordinates in the frame at p."""
    params = params or SamplingParams()
    M = F.manifold
    p = M.check_point(np.asarray(p, float))
    m = M.dim
    if n < m + 1:
        raise ValueError(f"need n >= dim+1 = {m + 1} samples")
    if radius >= M.convexity_radius:
        raise ValueError("sampling radius must stay below the convexity radius")
    fr = M.frame(p)
    coords = ball_points_halton(m, radius, n, seed=seed)
    X = M.exp(np.broadcast_to(p, (n, M.coord_dim)), coords @ fr.basis)

    if F.grad_oracle is not None:
        grads = np.asarray(F.grad_oracle(X), float)
        keep = ~np.any(np.isnan(grads), axis=1)
        grads = np.where(np.isnan(grads), 0.0, grads)
    else:
        frames_at_X = np.einsum("kb,nab->nka", fr.basis, _transport_ops(M, p, X))
        h = params.h_fd * (1.0 + np.linalg.norm(p))
        grads, keep = _fd_gradients(F, X, frames_at_X, h, params.discard_factor, F.lipschitz_hint)

    if keep.sum() < 0.5 * n:
        raise InsufficientSamples(int(keep.sum()), n)
    X = X[keep]
    grads = grads[keep]
    back = M.transport(X, np.broadcast_to(p, X.shape), grads)
    return HullSample(ambient_dim=m, points=back @ fr.basis.T)


def _transport_ops(M, p, X):
    """Matrices (n, a, a) sending ambient tangent reps at p to reps at each
    row of X (parallel transport along the unique minimal geodesics)."""
    n = len(X)
    a = M.coord_dim
    eye = np.eye(a)
    cols = [M.transport(np.broadcast_to(p, X.shape), X, np.broadcast_to(eye[j], X.shape)) for j in range(a)]
    return np.stack(cols, axis=2)  # op[n] @ v = sum_j v_j * transport(e_j)


def generalized_gradient(F: ScalarField, p, params: SamplingParams = None) -> HullSample:
    """Shrinking-radius merge of sample_mixture; approximates the convex
    hull of transported limiting gradients at p."""
    params = params or SamplingParams()
    M = F.manifold
    r0 = params.base_radius(M)
    chunks = []
    for i, f in enumerate(params.rung_factors):
        chunks.append(sample_mixture(F, p, r0 * f, params.n, seed=params.seed + i, params=params).points)
    return HullSample(ambient_dim=M.dim, points=np.concatenate(chunks, axis=0))


def _lip_scale_from_points(points, hint=None):
    if hint is not None:
        return max(1.0, hint)
    return max(1.0, float(np.max(np.linalg.norm(np.atleast_2d(points), axis=1))))


def is_singular_scalar(F: ScalarField, p, params: SamplingParams = None) -> SingularityVerdict:
    """p is singular iff the origin lies in the sampled generalized
    gradient hull, within tol_sing scaled by the Lipschitz estimate."""
    params = params or SamplingParams()
    H = generalized_gradient(F, p, params)
    res = H.min_norm()
    threshold = params.tol_sing * _lip_scale_from_points(H.points, F.lipschitz_hint)
    r0 = params.base_radius(F.manifold)
    return SingularityVerdict(
        singular=bool(res.norm < threshold),
        margin=res.norm,
        samples_used=len(H.points),
        radii_used=[r0 * f for f in params.rung_factors],
        threshold=threshold,
    )


def generalized_differential(F: MapField, p, params: SamplingParams = None):
    """Sampled generalized differential of a map, as a HullSample of
    flattened frame matrices plus the (source, target) frames at (p, F(p))."""
    params = params or SamplingParams()
    M, N = F.source, F.target
    p = M.check_point(np.asarray(p, float))
    Fp = F.value(p)
    fr_p = M.frame(p)
    fr_Fp = N.frame(Fp)
    m, nt = M.dim, N.dim
    r0 = params.base_radius(M)
    mats = []
    radii = []
    for i, f in enumerate(params.rung_factors):
        radius = r0 * f
        radii.append(radius)
        coords = ball_points_halton(m, radius, params.n, seed=params.seed + i)
        X = M.exp(np.broadcast_to(p, (params.n, M.coord_dim)), coords @ fr_p.basis)
        FX = F.eval(X)
        dists = N.distance(np.broadcast_to(Fp, FX.shape), FX)
        if np.any(dists >= N.convexity_radius):
            raise TargetBallViolation(
                f"image left the convex ball around F(p) (max dist {float(dists.max()):.4g})"
            )
        src_frames = np.einsum("kb,nab->nka", fr_p.basis, _transport_ops(M, p, X))
        tgt_frames = np.einsum("kb,nab->nka", fr_Fp.basis, _transport_ops(N, Fp, FX))
        if F.diff_oracle is not None:
            D = np.asarray(F.diff_oracle(X), float)  # (n, a_tgt, a_src)
            keep = ~np.any(np.isnan(D), axis=(1, 2))
            D = np.where(np.isnan(D), 0.0, D)
            cols = np.einsum("nbs,nks->nbk", D, src_frames)  # ambient target vecs
        else:
            h = params.h_fd * (1.0 + np.linalg.norm(p))
            cols = np.empty((params.n, N.coord_dim, m))
            disagreement = np.zeros(params.n)
            for k in range(m):
                step = h * src_frames[:, k, :]
                Fp_plus = F.eval(M.exp(X, step))
                Fp_minus = F.eval(M.exp(X, -step))
                v_plus = _safe_log(N, FX, Fp_plus)
                v_minus = _safe_log(N, FX, Fp_minus)
                cols[:, :, k] = (v_plus - v_minus) / (2.0 * h)
                disagreement = np.maximum(
                    disagreement,
                    np.linalg.norm(v_plus + v_minus, axis=1) / h,
                )
            lip_scale = F.lipschitz_hint or max(float(np.max(np.abs(cols))), 1e-12)
            keep = disagreement <= params.discard_factor * lip_scale
        if keep.sum() < 0.5 * params.n:
            raise InsufficientSamples(int(keep.sum()), params.n)
        rung_mats = np.einsum("njb,nbk->njk", tgt_frames, cols)
        mats.append(rung_mats[keep])
    stacked = np.concatenate(mats, axis=0)
    H = HullSample(ambient_dim=nt * m, points=stacked.reshape(len(stacked), -1))
    return H, fr_p, fr_Fp, radii


def _safe_log(N, base, pts):
    return N.log(base, pts, strict=False)


def is_singular_map(F: MapField, p, params: SamplingParams = None) -> SingularityVerdict:
    """Maximal-rank test via the adjoint construction: for each unit u in
    the target tangent sphere, the hull {A^T u} must avoid the origin; the
    margin is half the worst-case distance."""
    params = params or SamplingParams()
    H, fr_p, fr_Fp, radii = generalized_differential(F, p, params)
    nt, m = F.target.dim, F.source.dim
    mats = H.points.reshape(len(H.points), nt, m)
    dirs = unit_directions(nt, params.direction_count)
    worst = np.inf
    for u in dirs:
        pulled = np.einsum("njk,j->nk", mats, u)  # rows A^T u
        worst = min(worst, min_norm_point(pulled).norm)
    delta_hat = worst / 2.0
    op_norms = np.linalg.norm(mats, ord=2, axis=(1, 2))
    threshold = params.tol_sing * max(1.0, float(op_norms.max()) if len(op_norms) else 1.0)
    return SingularityVerdict(
        singular=bool(delta_hat <= threshold),
        margin=float(delta_hat),
        samples_used=len(mats),
        radii_used=radii,
        threshold=threshold,
    )


def gs_critical(M: Manifold, p, q, params: SamplingParams = None) -> SingularityVerdict:
    """Grove-Shiohama criticality of q for the distance function from p:
    the convex hull of the arrival velocities of all minimal geodesics
    p -> q contains the origin."""
    params = params or SamplingParams()
    p = np.asarray(p, float)
    q = np.asarray(q, float)
    if float(M.distance(p, q)) < 1e-12:
        # the base point is critical for its own distance function by convention
        return SingularityVerdict(True, 0.0, 0, [], threshold=params.tol_sing)
    vels, continuum = M.arrival_velocities(p, q, cap=params.geodesic_cap)
    fr = M.frame(q)
    coords = vels @ fr.basis.T
    res = min_norm_point(coords)
    return SingularityVerdict(
        singular=bool(res.norm < params.tol_sing),
        margin=res.norm,
        samples_used=len(vels),
        radii_used=[],
        threshold=params.tol_sing,
        continuum=continuum,
    )
