"""Mollifier smoothing of Lipschitz fields on the built-in manifolds.

The pipeline follows the convolution-in-the-tangent-space construction:
a finite strongly-convex cover, a smooth bump partition of unity
subordinate to it, a compactly supported mollifier of unit mass, local
smoothing by quadrature over the mollifier ball, and a global blend.
The discrete mollifier weights are normalized to sum exactly to one, so
every smoothed value is a convex combination of field values at points
at most eps away in the tangent chart; the error bound
    |F_eps(q) - F(q)| <= eps * Lambda(eps) * Lip(F)
then holds for the discrete rule as well.
"""

from dataclasses import dataclass, field as dc_field
from typing import Callable, Optional

import numpy as np

from .clarke import MapField, ScalarField
from .errors import CoverageFailure, DomainViolation, UnsupportedDim
from .manifold import Euclidean, FlatTorus, Manifold, Sphere, jacobi_endpoint
from .quadrature import ball_quadrature, sphere_surface_area

DEFAULT_QUAD_ORDER = 14  # 8 radial x 16 angular nodes in dimension 2
DEFAULT_COVER_GRID = 10_000


def bump_profile(t):
    """The flat bump e^{-1/(1-t^2)} on (-1, 1), zero outside."""
    t = np.asarray(t, float)
    out = np.zeros_like(t)
    inside = np.abs(t) < 1.0 - 1e-12
    x = t[inside]
    out[inside] = np.exp(-1.0 / (1.0 - x ** 2))
    return out


def mollifier_alpha(m, n_radial=200):
    """Normalizing constant: alpha * integral of e^{-1/(1-|y|^2)} over the
    unit ball of R^m equals 1. Fixed high-order radial Gauss-Legendre."""
    if not 1 <= m <= 4:
        raise UnsupportedDim(f"mollifier normalization covers dims 1..4, got {m}")
    x, w = np.polynomial.legendre.leggauss(n_radial)
    r = 0.5 * (x + 1.0)
    integrand = bump_profile(r) * r ** (m - 1)
    radial = 0.5 * float(w @ integrand)
    return 1.0 / (sphere_surface_area(m) * radial)


@dataclass
class MollifierSpec:
    """Mollifier rho_eps(y) = alpha * e^{-1/(1-|y/eps|^2)} / eps^m."""

    dim: int
    eps: float
    alpha: float = None

    def __post_init__(self):
        if self.alpha is None:
            self.alpha = mollifier_alpha(self.dim)

    def density(self, y):
        y = np.atleast_2d(y)
        r = np.linalg.norm(y, axis=1) / self.eps
        return self.alpha * bump_profile(r) / self.eps ** self.dim


@dataclass
class Cover:
    """Finite cover of the manifold by strongly convex balls."""

    manifold: Manifold
    centers: np.ndarray  # (k, a)
    radii: np.ndarray  # (k,)
    test_grid: np.ndarray  # (G, a)

    def __post_init__(self):
        inj = self.manifold.injectivity_radius
        if np.isfinite(inj) and np.any(self.radii >= inj / 2.0):
            raise DomainViolation("cover radii must stay below inj/2")

    @property
    def size(self):
        return len(self.centers)

    def gap(self):
        """Worst slack min_i (d(grid, p_i) - r_i); coverage iff < 0."""
        d = self.manifold.distance(self.test_grid[:, None, :], self.centers[None, :, :])
        return float(np.max(np.min(d - self.radii[None, :], axis=1)))

    def covers_grid(self):
        return self.gap() < 0.0


def build_cover(M: Manifold, target_r, grid=None, grid_size=DEFAULT_COVER_GRID) -> Cover:
    """Greedy farthest-point cover by balls of radius target_r, verified
    against a dense test grid."""
    inj = M.injectivity_radius
    if not 0 < target_r < inj / 2.0:
        raise DomainViolation(f"need 0 < target_r < inj/2 = {inj / 2.0}")
    if grid is None:
        grid = M.grid(grid_size)
    grid = np.atleast_2d(grid)
    centers = [grid[0]]
    dists = M.distance(grid, np.broadcast_to(grid[0], grid.shape))
    diam = _diameter(M)
    if np.isfinite(diam):
        cap = 10 * max(4, int(np.ceil((diam / target_r + 1.0) ** M.dim)))
    else:
        cap = 10 * len(grid)
    while np.max(dists) >= target_r:
        if len(centers) > cap:
            raise CoverageFailure(f"greedy cover exceeded {cap} centers")
        j = int(np.argmax(dists))
        centers.append(grid[j])
        dists = np.minimum(dists, M.distance(grid, np.broadcast_to(grid[j], grid.shape)))
    centers = np.stack(centers)
    cover = Cover(M, centers, np.full(len(centers), float(target_r)), grid)
    if not cover.covers_grid():
        raise CoverageFailure("greedy construction finished but grid is not covered")
    return cover


def _diameter(M):
    if isinstance(M, Sphere):
        return np.pi * M.radius
    if isinstance(M, FlatTorus):
        return float(np.linalg.norm(M.periods / 2.0))
    return np.inf


class PartitionOfUnity:
    """Normalized flat bumps psi_i = b_i / sum_j b_j subordinate to the
    cover; each b_i vanishes with all derivatives on the ball boundary."""

    def __init__(self, cover: Cover):
        if not cover.covers_grid():
            raise CoverageFailure("partition of unity needs a covering family")
        self.cover = cover

    def _bumps(self, Q):
        M = self.cover.manifold
        d = M.distance(Q[:, None, :], self.cover.centers[None, :, :])
        s = (d / self.cover.radii[None, :]) ** 2
        return bump_profile(np.sqrt(np.clip(s, 0.0, None)))

    def weights(self, Q):
        Q = np.atleast_2d(Q)
        b = self._bumps(Q)
        tot = b.sum(axis=1, keepdims=True)
        if np.any(tot <= 0.0):
            raise CoverageFailure("query point outside every cover ball")
        return b / tot

    def weights_and_grads(self, Q):
        """psi values (B, k) and ambient gradient vectors (B, k, a)."""
        Q = np.atleast_2d(Q)
        M = self.cover.manifold
        B, k = len(Q), self.cover.size
        a = M.coord_dim
        b = np.zeros((B, k))
        db = np.zeros((B, k, a))
        for i in range(k):
            c = self.cover.centers[i]
            r = self.cover.radii[i]
            d = M.distance(Q, np.broadcast_to(c, Q.shape))
            s = (d / r) ** 2
            inside = s < 1.0 - 1e-12
            if not np.any(inside):
                continue
            si = s[inside]
            bi = np.exp(-1.0 / (1.0 - si))
            b[inside, i] = bi
            # d/dq of s is -2 log_q(c) / r^2; chain through e^{-1/(1-s)}
            lg = M.log(Q[inside], np.broadcast_to(c, Q[inside].shape), strict=False)
            ds = -2.0 * lg / r ** 2
            db[inside, i] = (bi / (1.0 - si) ** 2)[:, None] * (-ds)
        tot = b.sum(axis=1, keepdims=True)
        if np.any(tot <= 0.0):
            raise CoverageFailure("query point outside every cover ball")
        dtot = db.sum(axis=1, keepdims=True)
        psi = b / tot
        dpsi = db / tot[:, :, None] - (b / tot ** 2)[:, :, None] * dtot
        return psi, dpsi


def build_partition(cover: Cover) -> "PartitionOfUnity":
    """Smooth partition of unity subordinate to the cover balls."""
    return PartitionOfUnity(cover)


def lambda_eps(M: Manifold, cover: Cover, eps) -> float:
    """Max Lipschitz constant of exp restricted to the (r_i + eps)-balls.

    Flat manifolds give exactly 1; on the sphere the differential of exp has
    singular values {1, sin(t/R)/(t/R)} <= 1, so the sup is also 1 while the
    restriction stays inside the injectivity radius.
    """
    b = float(np.max(cover.radii)) + eps
    inj = M.injectivity_radius
    if np.isfinite(inj) and b >= inj:
        raise DomainViolation("r + eps must stay below the injectivity radius")
    return 1.0


@dataclass
class LipschitzEstimate:
    value: float
    lower_bound: bool = True
    n_pairs: int = 0


def lipschitz_estimate(field, n_pairs=2000, seed=0, local_step=1e-4) -> LipschitzEstimate:
    """Max sampled difference quotient (a lower bound on Lip, flagged).

    Half the budget goes to independent pairs, half to short geodesic
    perturbations whose quotients converge to local slopes.
    """
    if n_pairs < 1000:
        raise ValueError("need n_pairs >= 1000 for a meaningful estimate")
    if isinstance(field, MapField):
        M, N = field.source, field.target
        dist_out = lambda u, v: N.distance(u, v)
    else:
        M = field.manifold
        dist_out = lambda u, v: np.abs(u - v)
    rng = np.random.default_rng(seed)
    n_half = n_pairs // 2
    X = M.random_points(n_half, rng)
    Y = M.random_points(n_half, rng)
    ok = M.distance(X, Y) > 1e-9
    q_global = dist_out(field.eval(X[ok]), field.eval(Y[ok])) / M.distance(X[ok], Y[ok])
    Xl = M.random_points(n_half, rng)
    dirs = rng.standard_normal((n_half, M.coord_dim))
    dirs = M.project_tangent(Xl, dirs)
    norms = np.linalg.norm(dirs, axis=1, keepdims=True)
    norms[norms == 0] = 1.0
    Yl = M.exp(Xl, local_step * dirs / norms)
    dl = M.distance(Xl, Yl)
    okl = dl > 1e-12
    q_local = dist_out(field.eval(Xl[okl]), field.eval(Yl[okl])) / dl[okl]
    value = float(max(np.max(q_global, initial=0.0), np.max(q_local, initial=0.0)))
    if not isinstance(field, MapField):
        # steepest-direction probes: a.e. the sup of |grad| equals Lip, and
        # probing along the sampled gradient removes the alignment gap
        Xg = M.random_points(max(n_pairs // 8, 32), rng)
        g = _base_gradient(field, Xg)
        gn = np.linalg.norm(g, axis=1)
        ok = gn > 1e-12
        if np.any(ok):
            Yg = M.exp(Xg[ok], local_step * g[ok] / gn[ok][:, None])
            dg = M.distance(Xg[ok], Yg)
            q_grad = np.abs(field.eval(Xg[ok]) - field.eval(Yg)) / np.where(dg > 0, dg, 1.0)
            value = float(max(value, np.max(q_grad, initial=0.0)))
    return LipschitzEstimate(value=value, lower_bound=True, n_pairs=n_pairs)


@dataclass
class SmoothedMap:
    """Global smooth approximation of a Lipschitz field.

    `value_fn` is the (possibly embedded) field being smoothed, mapping a
    point batch (B, a) to (B,) for scalars or (B, l) for maps.
    """

    manifold: Manifold
    base: object  # ScalarField or MapField
    value_fn: Callable
    scalar: bool
    cover: Cover
    pou: PartitionOfUnity
    eps: float
    order: int = DEFAULT_QUAD_ORDER
    embedding: object = None
    _nodes: np.ndarray = dc_field(default=None, repr=False)
    _mweights: np.ndarray = dc_field(default=None, repr=False)
    _frames: list = dc_field(default=None, repr=False)

    def __post_init__(self):
        M = self.manifold
        inj = M.injectivity_radius
        if np.isfinite(inj):
            if self.eps >= inj / 2.0:
                raise DomainViolation("eps must stay below inj/2")
            lam = lambda_eps(M, self.cover, self.eps)
            if self.eps >= inj / (2.0 * lam * 1.01):
                raise DomainViolation("eps violates the transport-margin bound eps*Lambda < inj/2")
        nodes, w = ball_quadrature(M.dim, self.eps, self.order)
        rho = MollifierSpec(M.dim, self.eps).density(nodes)
        mw = w * rho
        self._mweights = mw / mw.sum()  # exact discrete unit mass
        self._nodes = nodes
        self._frames = [M.frame(c) for c in self.cover.centers]

    @property
    def out_dim(self):
        return 1 if self.scalar else len(np.atleast_1d(self.value_fn(self.cover.centers[:1])[0]))

    def local_values(self, i, Q):
        """Local convolution smoothing around center i for points Q inside
        the i-th cover ball."""
        M = self.manifold
        Q = np.atleast_2d(Q)
        fr = self._frames[i]
        c = self.cover.centers[i]
        w_q = M.log(np.broadcast_to(c, Q.shape), Q, strict=False)
        w_coords = w_q @ fr.basis.T  # (B, m)
        shifted = w_coords[:, None, :] - self._nodes[None, :, :]  # (B, K, m)
        pts = M.exp(np.broadcast_to(c, (len(Q), len(self._nodes), M.coord_dim)),
                    shifted @ fr.basis)
        vals = self.value_fn(pts.reshape(-1, M.coord_dim))
        vals = vals.reshape(len(Q), len(self._nodes), -1)
        out = np.einsum("k,bkl->bl", self._mweights, vals)
        return out[:, 0] if self.scalar else out

    def values(self, Q):
        """Global smoothed values on a batch of points."""
        Q = np.atleast_2d(Q)
        psi = self.pou.weights(Q)
        out = np.zeros(len(Q)) if self.scalar else np.zeros((len(Q), self.out_dim))
        for i in range(self.cover.size):
            mask = psi[:, i] > 0.0
            if not np.any(mask):
                continue
            li = self.local_values(i, Q[mask])
            if self.scalar:
                out[mask] += psi[mask, i] * li
            else:
                out[mask] += psi[mask, i][:, None] * li
        return out

    def value(self, q):
        v = self.values(np.atleast_2d(np.asarray(q, float)))
        return float(v[0]) if self.scalar else v[0]


def build_smoothed(field, cover, eps, order=DEFAULT_QUAD_ORDER, embedding=None) -> SmoothedMap:
    if isinstance(field, ScalarField):
        return SmoothedMap(field.manifold, field, field.eval, True, cover,
                           PartitionOfUnity(cover), eps, order)
    if embedding is None:
        raise DomainViolation("map fields need an EmbeddingSpec for the target")
    value_fn = lambda X: embedding.embed(field.eval(X))
    return SmoothedMap(field.source, field, value_fn, False, cover,
                       PartitionOfUnity(cover), eps, order, embedding=embedding)


def local_smooth(field, center, eps, q, order=DEFAULT_QUAD_ORDER, embedding=None, radius=None):
    """One-chart convolution smoothing of the field at q around `center`."""
    M = field.manifold if isinstance(field, ScalarField) else field.source
    center = np.asarray(center, float)
    q = np.asarray(q, float)
    r = radius if radius is not None else max(float(M.distance(center, q)) * 1.001, 0.1 * eps)
    inj = M.injectivity_radius
    if np.isfinite(inj) and (r + eps >= inj or eps >= inj / 2.0):
        raise DomainViolation("need r + eps < inj and eps < inj/2")
    if float(M.distance(center, q)) > r:
        raise DomainViolation("q must lie in the chart ball around center")
    cover = Cover(M, center[None, :], np.array([r]), center[None, :])
    S = _single_chart(field, cover, eps, order, embedding)
    out = S.local_values(0, q[None, :])
    return float(out[0]) if S.scalar else out[0]


def _single_chart(field, cover, eps, order, embedding):
    if isinstance(field, ScalarField):
        return SmoothedMap(field.manifold, field, field.eval, True, cover,
                           _TrivialPOU(cover), eps, order)
    value_fn = lambda X: embedding.embed(field.eval(X))
    return SmoothedMap(field.source, field, value_fn, False, cover,
                       _TrivialPOU(cover), eps, order, embedding=embedding)


class _TrivialPOU:
    def __init__(self, cover):
        self.cover = cover

    def weights(self, Q):
        return np.ones((len(np.atleast_2d(Q)), 1))

    def weights_and_grads(self, Q):
        Q = np.atleast_2d(Q)
        return np.ones((len(Q), 1)), np.zeros((len(Q), 1, self.cover.manifold.coord_dim))


def global_smooth(S: SmoothedMap, q):
    return S.value(q)


# ----------------------------------------------------------------------
# differentials of the smoothed map


def _base_gradient(field: ScalarField, z, h=1e-6):
    """Gradient of the base scalar field at z (oracle when available)."""
    M = field.manifold
    z = np.atleast_2d(z)
    if field.grad_oracle is not None:
        g = np.asarray(field.grad_oracle(z), float)
        return np.where(np.isnan(g), 0.0, g)
    frames = M.frames(z)
    g = np.zeros_like(z)
    for k in range(M.dim):
        step = h * frames[:, k, :]
        df = (field.eval(M.exp(z, step)) - field.eval(M.exp(z, -step))) / (2.0 * h)
        g += df[:, None] * frames[:, k, :]
    return g


def _base_jacobian_cols(S: SmoothedMap, z, h=1e-6):
    """Ambient Jacobian columns of the (embedded) base field at rows of z,
    in the frames at z: returns (B, l, m) and the frames (B, m, a)."""
    M = S.manifold
    z = np.atleast_2d(z)
    frames = M.frames(z)
    cols = np.empty((len(z), S.out_dim, M.dim))
    for k in range(M.dim):
        step = h * frames[:, k, :]
        cols[:, :, k] = (S.value_fn(M.exp(z, step)) - S.value_fn(M.exp(z, -step))) / (2.0 * h)
    return cols, frames


def grad_global_smooth(S: SmoothedMap, q, method="jacobi", fd_step=1e-5):
    """Differential of the global smoothing at q.

    Scalar fields: the ambient gradient vector. Map fields: (D, frame) with
    D of shape (l, m), the ambient differential along the frame directions.
    Two routes are available: "jacobi" differentiates under the integral via
    Jacobi fields and the product rule over the partition; "fd" takes
    central differences of the global value. They agree to ~1e-4 relative.
    """
    q = np.asarray(q, float)
    M = S.manifold
    fr = M.frame(q)
    if method == "fd":
        return _grad_fd(S, q, fr, fd_step)
    if method != "jacobi":
        raise ValueError(f"unknown method {method!r}")

    psi, dpsi = S.pou.weights_and_grads(q[None, :])
    psi, dpsi = psi[0], dpsi[0]
    base_val = S.values(q[None, :])[0]
    if S.scalar:
        total = np.zeros(M.coord_dim)
    else:
        total = np.zeros((S.out_dim, M.dim))
    for i in range(S.cover.size):
        if psi[i] <= 0.0 and not np.any(np.abs(dpsi[i]) > 0.0):
            continue
        c = S.cover.centers[i]
        frc = S._frames[i]
        w_q = M.log(c, q, strict=False)
        w_coords = frc.coords_of(w_q)
        shifted = w_coords[None, :] - S._nodes
        Z = M.exp(np.broadcast_to(c, (len(S._nodes), M.coord_dim)), shifted @ frc.basis)
        local_val = S.local_values(i, q[None, :])[0]

        # Jacobi endpoints for each node and frame direction at q
        Jmat = np.empty((len(S._nodes), M.dim, M.coord_dim))
        for j in range(len(S._nodes)):
            y_vec = frc.vec_of(S._nodes[j])
            for k in range(M.dim):
                Jmat[j, k] = jacobi_endpoint(M, c, q, y_vec, fr.basis[k]).vec
        if S.scalar:
            g = _base_gradient(S.base, Z)
            dloc_coords = np.einsum("k,kja->j", S._mweights, np.einsum("ka,kja->kja", g, Jmat))
            dloc = fr.vec_of(dloc_coords)
            total += dpsi[i] * (local_val - base_val) + psi[i] * dloc
        else:
            cols, z_frames = _base_jacobian_cols(S, Z)
            J_coords = np.einsum("kja,kma->kjm", Jmat, z_frames)
            dloc = np.einsum("k,klm,kjm->lj", S._mweights, cols, J_coords)
            total += np.einsum("l,j->lj", local_val - base_val, dpsi[i] @ fr.basis.T) + psi[i] * dloc
    if S.scalar:
        return M.project_tangent(q, total)
    return total, fr


def _grad_fd(S, q, fr, h):
    M = S.manifold
    if S.scalar:
        g = np.zeros(M.coord_dim)
        for k in range(M.dim):
            df = (S.value(M.exp(q, h * fr.basis[k])) - S.value(M.exp(q, -h * fr.basis[k]))) / (2.0 * h)
            g += df * fr.basis[k]
        return g
    D = np.empty((S.out_dim, M.dim))
    for k in range(M.dim):
        D[:, k] = (S.value(M.exp(q, h * fr.basis[k])) - S.value(M.exp(q, -h * fr.basis[k]))) / (2.0 * h)
    return D, fr


def grad_norms_batch(S: SmoothedMap, Q, h=1e-5):
    """Norm of grad of a scalar smoothed field on a batch (FD route)."""
    if not S.scalar:
        raise ValueError("grad_norms_batch is for scalar fields")
    M = S.manifold
    Q = np.atleast_2d(Q)
    frames = M.frames(Q)
    comps = np.empty((len(Q), M.dim))
    for k in range(M.dim):
        step = h * frames[:, k, :]
        comps[:, k] = (S.values(M.exp(Q, step)) - S.values(M.exp(Q, -step))) / (2.0 * h)
    return np.linalg.norm(comps, axis=1)


def differentials_batch(S: SmoothedMap, Q, h=1e-5):
    """Ambient differentials (B, l, m) of an embedded smoothed map along
    the frames at the rows of Q (FD route); also returns the frames."""
    M = S.manifold
    Q = np.atleast_2d(Q)
    frames = M.frames(Q)
    D = np.empty((len(Q), S.out_dim, M.dim))
    for k in range(M.dim):
        step = h * frames[:, k, :]
        D[:, :, k] = (S.values(M.exp(Q, step)) - S.values(M.exp(Q, -step))) / (2.0 * h)
    return D, frames


def max_error_on_grid(S: SmoothedMap, grid):
    """Max deviation of the smoothing from the base field over a grid
    (absolute value for scalars, ambient norm for embedded maps)."""
    grid = np.atleast_2d(grid)
    approx = S.values(grid)
    exact = S.value_fn(grid)
    if S.scalar:
        return float(np.max(np.abs(approx - exact)))
    return float(np.max(np.linalg.norm(approx - exact, axis=1)))
