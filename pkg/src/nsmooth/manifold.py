"""Closed-form Riemannian geometry for the built-in manifolds.

Three constant-curvature spaces are supported: Euclidean space, the round
sphere of radius R (embedded, coords in R^{m+1}), and the flat torus with
periods L_i (angle coords in [0, L_i)). Every operation is a pure function
and broadcasts over leading axes: points are arrays of shape (..., a) where
a is the coordinate length.
"""

from abc import ABC, abstractmethod
from dataclasses import dataclass

import numpy as np

from .errors import CutLocusAmbiguity, DomainViolation
from .quadrature import fibonacci_sphere, halton

TOL_CUT = 1e-8
SPHERE_ANTIPODE_ANGLE_TOL = 1e-6


@dataclass(frozen=True)
class Tangent:
    """A tangent vector attached to a base point (ambient/coordinate rep)."""

    base: np.ndarray
    vec: np.ndarray

    @property
    def norm(self):
        return float(np.linalg.norm(self.vec))


@dataclass(frozen=True)
class Frame:
    """Orthonormal basis of the tangent space at `base`, rows of `basis`."""

    base: np.ndarray
    basis: np.ndarray  # (dim, coord_dim)

    def coords_of(self, vec):
        return self.basis @ np.asarray(vec)

    def vec_of(self, coords):
        return np.asarray(coords) @ self.basis


def _sinc(x):
    # sin(x)/x with the removable singularity filled in
    return np.sinc(x / np.pi)


class Manifold(ABC):
    """Common interface of the built-in constant-curvature manifolds."""

    dim: int
    coord_dim: int

    @property
    @abstractmethod
    def injectivity_radius(self):
        ...

    @property
    @abstractmethod
    def convexity_radius(self):
        """Radius below which balls are strongly convex (conservative)."""

    @abstractmethod
    def distance(self, p, q):
        ...

    @abstractmethod
    def exp(self, p, v):
        ...

    @abstractmethod
    def log(self, p, q):
        """Initial velocity of the unique minimal geodesic p -> q.

        Raises CutLocusAmbiguity when uniqueness fails within tolerance.
        """

    @abstractmethod
    def transport(self, p, q, w):
        """Parallel translation of w along the unique minimal geodesic."""

    @abstractmethod
    def minimal_geodesics(self, p, q, cap=16):
        """Unit initial velocities of all minimal geodesics p -> q.

        Returns (velocities (k, a), continuum_flag); the flag marks the
        sphere-antipode case where the true set is a continuum and the
        velocities are a spanning sample of size `cap`.
        """

    @abstractmethod
    def cut_locus_distance(self, p, q):
        """Distance from q to the cut locus of p (inf when empty)."""

    @abstractmethod
    def frame(self, p):
        ...

    @abstractmethod
    def random_points(self, n, rng):
        ...

    @abstractmethod
    def grid(self, n):
        """Deterministic quasi-uniform scan grid with >= n points."""

    @abstractmethod
    def descriptor(self):
        ...

    # ------------------------------------------------------------------
    # shared helpers

    def check_point(self, p):
        p = np.asarray(p, dtype=float)
        if p.shape[-1] != self.coord_dim:
            raise ValueError(f"expected coord length {self.coord_dim}, got {p.shape[-1]}")
        return p

    def project_tangent(self, p, w):
        return np.asarray(w, dtype=float)

    def frames(self, P):
        P = np.atleast_2d(P)
        return np.stack([self.frame(p).basis for p in P])

    def arrival_velocities(self, p, q, cap=16):
        """Arrival velocities gamma'(d) at q of all minimal geodesics p -> q."""
        units, continuum = self.minimal_geodesics(p, q, cap=cap)
        if len(units) == 0:
            return units, continuum
        d = self.distance(p, q)
        return self.geodesic_velocity_at(p, units, d), continuum

    def geodesic_velocity_at(self, p, units, d):
        """Velocity at time d of unit-speed geodesics from p with initial
        velocities `units` (flat default: components unchanged)."""
        return np.atleast_2d(units)

    def tangent(self, p, vec):
        return Tangent(self.check_point(p), self.project_tangent(p, vec))


class Euclidean(Manifold):
    def __init__(self, dim):
        if dim < 1:
            raise ValueError("dim must be >= 1")
        self.dim = int(dim)
        self.coord_dim = int(dim)

    @property
    def injectivity_radius(self):
        return np.inf

    @property
    def convexity_radius(self):
        return np.inf

    def distance(self, p, q):
        return np.linalg.norm(np.asarray(q, float) - np.asarray(p, float), axis=-1)

    def exp(self, p, v):
        return np.asarray(p, float) + np.asarray(v, float)

    def log(self, p, q, strict=True):
        return np.asarray(q, float) - np.asarray(p, float)

    def transport(self, p, q, w):
        return np.asarray(w, float)

    def minimal_geodesics(self, p, q, cap=16):
        d = float(self.distance(p, q))
        if d < 1e-14:
            return np.zeros((0, self.dim)), False
        return (np.asarray(q, float) - np.asarray(p, float))[None, :] / d, False

    def cut_locus_distance(self, p, q):
        return np.inf

    def frame(self, p):
        return Frame(self.check_point(p), np.eye(self.dim))

    def frames(self, P):
        P = np.atleast_2d(P)
        return np.broadcast_to(np.eye(self.dim), (len(P), self.dim, self.dim)).copy()

    def random_points(self, n, rng):
        return rng.standard_normal((n, self.dim))

    def grid(self, n, bounds=None):
        if bounds is None:
            raise DomainViolation("Euclidean grids need explicit bounds (lo, hi) per axis")
        lo, hi = (np.asarray(b, float) for b in bounds)
        k = max(int(np.ceil(n ** (1.0 / self.dim))), 2)
        axes = [np.linspace(lo[i], hi[i], k) for i in range(self.dim)]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)

    def descriptor(self):
        return {"kind": "euclidean", "dim": self.dim}


class Sphere(Manifold):
    def __init__(self, dim, radius=1.0):
        if dim < 1:
            raise ValueError("dim must be >= 1")
        if radius <= 0:
            raise ValueError("radius must be positive")
        self.dim = int(dim)
        self.radius = float(radius)
        self.coord_dim = int(dim) + 1

    @property
    def injectivity_radius(self):
        return np.pi * self.radius

    @property
    def convexity_radius(self):
        # Whitehead radius with margin; hemispheres are the sharp bound
        return 0.99 * np.pi * self.radius / 2.0

    def check_point(self, p):
        p = super().check_point(p)
        err = np.abs(np.linalg.norm(p, axis=-1) - self.radius)
        if np.any(err > 1e-12 * self.radius * 10):
            raise ValueError("point not on the sphere within tolerance")
        return p

    def project_point(self, y):
        y = np.asarray(y, float)
        return self.radius * y / np.linalg.norm(y, axis=-1, keepdims=True)

    def project_tangent(self, p, w):
        p = np.asarray(p, float)
        w = np.asarray(w, float)
        return w - (np.sum(w * p, axis=-1, keepdims=True) / self.radius ** 2) * p

    def _angle(self, p, q):
        # 2*atan2(|p-q|, |p+q|) is well conditioned at both theta ~ 0 and ~ pi
        p = np.asarray(p, float)
        q = np.asarray(q, float)
        return 2.0 * np.arctan2(np.linalg.norm(p - q, axis=-1), np.linalg.norm(p + q, axis=-1))

    def distance(self, p, q):
        return self.radius * self._angle(p, q)

    def exp(self, p, v):
        p = np.asarray(p, float)
        v = np.asarray(v, float)
        theta = np.linalg.norm(v, axis=-1, keepdims=True) / self.radius
        return np.cos(theta) * p + _sinc(theta) * v

    def log(self, p, q, strict=True):
        p = np.asarray(p, float)
        q = np.asarray(q, float)
        theta = self._angle(p, q)
        if strict and np.any(theta > np.pi - SPHERE_ANTIPODE_ANGLE_TOL):
            raise CutLocusAmbiguity("antipodal pair: minimal geodesic not unique")
        c = np.cos(theta)[..., None]
        q_perp = q - c * p
        s = np.sin(theta)
        factor = np.where(s > 1e-300, theta / np.where(s > 1e-300, s, 1.0), 1.0)
        return factor[..., None] * q_perp

    def transport(self, p, q, w):
        p = np.asarray(p, float)
        q = np.asarray(q, float)
        w = np.asarray(w, float)
        lg = self.log(p, q)
        d = np.linalg.norm(lg, axis=-1, keepdims=True)
        u = np.where(d > 1e-14, lg / np.where(d > 1e-14, d, 1.0), 0.0)
        theta = d / self.radius
        a = np.sum(w * u, axis=-1, keepdims=True)
        return w + a * ((np.cos(theta) - 1.0) * u - np.sin(theta) * p / self.radius)

    def minimal_geodesics(self, p, q, cap=16):
        theta = float(self._angle(p, q))
        if theta < 1e-12:
            return np.zeros((0, self.coord_dim)), False
        if theta > np.pi - SPHERE_ANTIPODE_ANGLE_TOL:
            basis = self.frame(np.asarray(p, float)).basis
            if self.dim == 1:
                dirs = np.array([[1.0], [-1.0]])
            else:
                # spanning sample of unit tangent directions
                angles = 2.0 * np.pi * np.arange(cap) / cap
                if self.dim == 2:
                    dirs = np.stack([np.cos(angles), np.sin(angles)], axis=1)
                else:
                    dirs = halton(cap, self.dim, offset=11) * 2.0 - 1.0
                    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
            return dirs @ basis, True
        u = self.log(p, q)
        return (u / np.linalg.norm(u))[None, :], False

    def geodesic_velocity_at(self, p, units, d):
        p = np.asarray(p, float)
        units = np.atleast_2d(units)
        theta = d / self.radius
        return np.cos(theta) * units - np.sin(theta) * p[None, :] / self.radius

    def cut_locus_distance(self, p, q):
        return np.pi * self.radius - float(self.distance(p, q))

    def frame(self, p):
        p = self.check_point(np.asarray(p, float))
        nhat = p / self.radius
        basis = []
        for k in np.argsort(np.abs(nhat)):
            e = np.zeros(self.coord_dim)
            e[k] = 1.0
            for b in basis:
                e = e - np.dot(e, b) * b
            e = e - np.dot(e, nhat) * nhat
            norm = np.linalg.norm(e)
            if norm > 1e-8:
                basis.append(e / norm)
            if len(basis) == self.dim:
                break
        return Frame(p, np.stack(basis))

    def frames(self, P):
        P = np.atleast_2d(P)
        if self.dim != 2:
            return super().frames(P)
        nhat = P / self.radius
        k = np.argmin(np.abs(nhat), axis=1)
        e = np.zeros_like(P)
        e[np.arange(len(P)), k] = 1.0
        t1 = e - np.sum(e * nhat, axis=1, keepdims=True) * nhat
        t1 /= np.linalg.norm(t1, axis=1, keepdims=True)
        t2 = np.cross(nhat, t1)
        return np.stack([t1, t2], axis=1)

    def random_points(self, n, rng):
        z = rng.standard_normal((n, self.coord_dim))
        return self.radius * z / np.linalg.norm(z, axis=1, keepdims=True)

    def grid(self, n):
        if self.dim == 1:
            t = 2.0 * np.pi * np.arange(n) / n
            return self.radius * np.stack([np.cos(t), np.sin(t)], axis=1)
        if self.dim == 2:
            return self.radius * fibonacci_sphere(n)
        z = halton(n, self.coord_dim, offset=5) * 2.0 - 1.0
        return self.radius * z / np.linalg.norm(z, axis=1, keepdims=True)

    def descriptor(self):
        return {"kind": "sphere", "dim": self.dim, "radius": self.radius}


class FlatTorus(Manifold):
    def __init__(self, periods):
        periods = np.asarray(periods, dtype=float).ravel()
        if len(periods) < 1 or np.any(periods <= 0):
            raise ValueError("all periods must be positive")
        self.periods = periods
        self.dim = len(periods)
        self.coord_dim = len(periods)

    @property
    def injectivity_radius(self):
        return float(np.min(self.periods)) / 2.0

    @property
    def convexity_radius(self):
        return float(np.min(self.periods)) / 4.0

    def wrap(self, p):
        return np.mod(np.asarray(p, float), self.periods)

    def wrapped_diff(self, p, q):
        d = np.asarray(q, float) - np.asarray(p, float)
        return np.mod(d + self.periods / 2.0, self.periods) - self.periods / 2.0

    def distance(self, p, q):
        return np.linalg.norm(self.wrapped_diff(p, q), axis=-1)

    def exp(self, p, v):
        return self.wrap(np.asarray(p, float) + np.asarray(v, float))

    def log(self, p, q, strict=True):
        d = self.wrapped_diff(p, q)
        if strict and np.any(np.abs(d) > self.periods / 2.0 - TOL_CUT):
            raise CutLocusAmbiguity("coordinate at half period: geodesic not unique")
        return d

    def transport(self, p, q, w):
        return np.asarray(w, float)

    def minimal_geodesics(self, p, q, cap=16):
        base = self.wrapped_diff(p, q)
        d0 = float(np.linalg.norm(base))
        if d0 < 1e-14:
            return np.zeros((0, self.dim)), False
        tol = 1e-9 * (1.0 + d0)
        ranges = [np.arange(-(int(np.ceil((d0 + tol) / L)) + 1), int(np.ceil((d0 + tol) / L)) + 2) for L in self.periods]
        mesh = np.meshgrid(*ranges, indexing="ij")
        ks = np.stack([m.ravel() for m in mesh], axis=1)
        cands = base[None, :] + ks * self.periods[None, :]
        norms = np.linalg.norm(cands, axis=1)
        dmin = norms.min()
        keep = norms <= dmin + tol
        vels = cands[keep] / norms[keep][:, None]
        order = np.lexsort(vels.T[::-1])
        vels = vels[order]
        return vels[:cap], False

    def cut_locus_distance(self, p, q):
        d = np.abs(self.wrapped_diff(p, q))
        return float(np.min(self.periods / 2.0 - d))

    def frame(self, p):
        return Frame(self.wrap(p), np.eye(self.dim))

    def frames(self, P):
        P = np.atleast_2d(P)
        return np.broadcast_to(np.eye(self.dim), (len(P), self.dim, self.dim)).copy()

    def random_points(self, n, rng):
        return rng.uniform(0.0, 1.0, (n, self.dim)) * self.periods

    def grid(self, n, counts=None):
        if counts is None:
            k = max(int(np.ceil(n ** (1.0 / self.dim))), 2)
            counts = [k] * self.dim
        axes = [np.arange(c) * (self.periods[i] / c) for i, c in enumerate(counts)]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)

    def descriptor(self):
        return {"kind": "flat_torus", "periods": list(self.periods)}


def jacobi_endpoint(M, center, q, y, v):
    """Endpoint value J(1) of the Jacobi field of the geodesic variation
    phi(t, s) = exp_center(t * [log_center(exp_q(s v)) - y]).

    `y` is a tangent vector at `center`, `v` a tangent vector at `q`; the
    result is a Tangent at q_shift = exp_center(log_center(q) - y). Closed
    form for constant curvature: the radial component transports, the normal
    component scales by sin(theta)/theta on the sphere (identity when flat).
    """
    center = np.asarray(center, float)
    q = np.asarray(q, float)
    y = np.asarray(y, float)
    v = np.asarray(v, float)
    w_q = M.log(center, q)
    w0 = w_q - y
    if np.linalg.norm(w_q) + np.linalg.norm(y) >= M.injectivity_radius:
        raise DomainViolation("|log(center, q)| + |y| must stay below the injectivity radius")
    q_shift = M.exp(center, w0)
    if not isinstance(M, Sphere):
        return Tangent(q_shift, v.copy())

    R = M.radius
    b_q = np.linalg.norm(w_q)
    # pull v back to the center and undo the differential of exp at w_q
    if b_q < 1e-14:
        xi = v.copy()
    else:
        v_c = M.transport(q, center, v)
        what = w_q / b_q
        par = np.dot(v_c, what) * what
        xi = par + (v_c - par) / _sinc(b_q / R)
    # push xi forward through the differential of exp at w0
    b0 = np.linalg.norm(w0)
    if b0 < 1e-14:
        J = xi
    else:
        what0 = w0 / b0
        par0 = np.dot(xi, what0) * what0
        J_c = par0 + _sinc(b0 / R) * (xi - par0)
        J = M.transport(center, q_shift, J_c)
    return Tangent(q_shift, M.project_tangent(q_shift, J))


def manifold_from_descriptor(desc):
    kind = desc["kind"]
    if kind == "euclidean":
        return Euclidean(desc["dim"])
    if kind == "sphere":
        return Sphere(desc["dim"], desc.get("radius", 1.0))
    if kind == "flat_torus":
        return FlatTorus(desc["periods"])
    raise ValueError(f"unknown manifold kind: {kind}")
