"""Built-in Lipschitz field catalog.

Every entry is deterministic given its parameters and carries analytic
ground truth (gradient oracles valid off the non-differentiable set, and
the known singular set where one is available). Oracles return NaN rows
at points where the field is not differentiable; the samplers discard
those rows.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .clarke import MapField, ScalarField
from .errors import DomainViolation
from .manifold import Euclidean, FlatTorus, Manifold, Sphere


@dataclass
class FieldCatalogEntry:
    name: str
    field: object  # ScalarField or MapField
    known_singular_set: Optional[np.ndarray] = None  # (k, a) or None

    @property
    def is_map(self):
        return isinstance(self.field, MapField)


def dist_to_point(M: Manifold, p) -> FieldCatalogEntry:
    p = M.check_point(np.asarray(p, float))

    def ev(X):
        X = np.atleast_2d(X)
        return M.distance(X, np.broadcast_to(p, X.shape))

    def grad(X):
        X = np.atleast_2d(X)
        d = M.distance(X, np.broadcast_to(p, X.shape))
        out = np.full_like(X, np.nan)
        ok = d > 1e-9
        for i in np.where(ok)[0]:
            if M.cut_locus_distance(p, X[i]) < 1e-7:
                continue
            lg = M.log(X[i], p)
            out[i] = -lg / d[i]
        return out

    if isinstance(M, Sphere):
        known = np.stack([p, -p])
    elif isinstance(M, FlatTorus):
        shifts = np.stack(np.meshgrid(*[[0.0, L / 2.0] for L in M.periods], indexing="ij"), axis=-1)
        known = M.wrap(p + shifts.reshape(-1, M.dim))
    else:
        known = p[None, :]
    f = ScalarField(M, ev, grad_oracle=grad, lipschitz_hint=1.0, name="dist-to-point")
    return FieldCatalogEntry("dist-to-point", f, known)


def height(M: Sphere, axis=None) -> FieldCatalogEntry:
    if not isinstance(M, Sphere):
        raise DomainViolation("height is defined on spheres")
    axis = M.coord_dim - 1 if axis is None else int(axis)

    def ev(X):
        return np.atleast_2d(X)[:, axis]

    def grad(X):
        X = np.atleast_2d(X)
        e = np.zeros(M.coord_dim)
        e[axis] = 1.0
        return M.project_tangent(X, np.broadcast_to(e, X.shape))

    poles = np.zeros((2, M.coord_dim))
    poles[0, axis] = M.radius
    poles[1, axis] = -M.radius
    f = ScalarField(M, ev, grad_oracle=grad, lipschitz_hint=1.0, name="height")
    return FieldCatalogEntry("height", f, poles)


def abs_max() -> FieldCatalogEntry:
    """The 1-D convex example max{|x| - 1, (x-2)^2 - 1}."""
    M = Euclidean(1)

    def ev(X):
        x = np.atleast_2d(X)[:, 0]
        return np.maximum(np.abs(x) - 1.0, (x - 2.0) ** 2 - 1.0)

    f = ScalarField(M, ev, name="abs-max")
    return FieldCatalogEntry("abs-max", f, np.array([[1.0]]))


def x2sin() -> FieldCatalogEntry:
    """g(x) = x^2 sin(1/x), differentiable but not C^1 at 0."""
    M = Euclidean(1)

    def ev(X):
        x = np.atleast_2d(X)[:, 0]
        with np.errstate(divide="ignore", invalid="ignore"):
            v = np.where(x != 0.0, x ** 2 * np.sin(np.where(x != 0.0, 1.0 / x, 1.0)), 0.0)
        return v

    def grad(X):
        x = np.atleast_2d(X)[:, 0]
        with np.errstate(divide="ignore", invalid="ignore"):
            inv = np.where(x != 0.0, 1.0 / x, 0.0)
            g = np.where(x != 0.0, 2.0 * x * np.sin(inv) - np.cos(inv), 0.0)
        return g[:, None]

    f = ScalarField(M, ev, grad_oracle=grad, lipschitz_hint=1.5, name="x2sin")
    return FieldCatalogEntry("x2sin", f, None)


def _circle_map_entry(name, L, angle_fn, dangle_fn, kink_fn=None):
    """Map T^m -> S^1(1): theta |-> unit-circle point at angle angle_fn(theta)."""
    src = FlatTorus(L)
    tgt = Sphere(1, 1.0)

    def ev(X):
        a = angle_fn(np.atleast_2d(X))
        return np.stack([np.cos(a), np.sin(a)], axis=1)

    def diff(X):
        X = np.atleast_2d(X)
        a = angle_fn(X)
        da = dangle_fn(X)  # (B, m) partials of the angle
        tang = np.stack([-np.sin(a), np.cos(a)], axis=1)  # (B, 2)
        D = tang[:, :, None] * da[:, None, :]
        if kink_fn is not None:
            D[kink_fn(X)] = np.nan
        return D

    probes = np.stack([0.26211 * src.periods, 0.73377 * src.periods])
    lip = float(np.max(np.linalg.norm(dangle_fn(probes), axis=1)))
    f = MapField(src, tgt, ev, diff_oracle=diff, lipschitz_hint=lip, name=name)
    return FieldCatalogEntry(name, f, np.zeros((0, src.dim)))


def angle(L=(1.0, 1.0)) -> FieldCatalogEntry:
    L = np.asarray(L, float)

    def angle_fn(X):
        return 2.0 * np.pi * X[:, 0] / L[0]

    def dangle_fn(X):
        out = np.zeros((len(X), len(L)))
        out[:, 0] = 2.0 * np.pi / L[0]
        return out

    return _circle_map_entry("angle", L, angle_fn, dangle_fn)


def _triangle_wave(t):
    """Period-1 triangle wave: -1 at 0, +1 at 1/2, kinks at {0, 1/2}."""
    s = np.mod(t, 1.0)
    return 1.0 - 4.0 * np.abs(s - 0.5)


def _triangle_slope(t):
    s = np.mod(t, 1.0)
    return np.where(s < 0.5, 4.0, -4.0)


def pwl_wobble(L=(1.0, 1.0), amplitude=0.1) -> FieldCatalogEntry:
    """Piecewise-linear wobble of the angle map; the first angle partial is
    constantly 2*pi/L0, so every convex combination of differentials has
    full rank: no singular points by construction."""
    L = np.asarray(L, float)
    amp = float(amplitude)

    def angle_fn(X):
        return 2.0 * np.pi * X[:, 0] / L[0] + amp * _triangle_wave(X[:, 1] / L[1])

    def dangle_fn(X):
        out = np.zeros((len(X), len(L)))
        out[:, 0] = 2.0 * np.pi / L[0]
        out[:, 1] = amp * _triangle_slope(X[:, 1] / L[1]) / L[1]
        return out

    def kink_fn(X):
        s = np.mod(X[:, 1] / L[1], 1.0)
        return (np.abs(s) < 1e-9) | (np.abs(s - 0.5) < 1e-9) | (np.abs(s - 1.0) < 1e-9)

    return _circle_map_entry("pwl-wobble", L, angle_fn, dangle_fn, kink_fn)


def double_bump(M: Sphere = None, second_pole_angle=1.0) -> FieldCatalogEntry:
    """max of two unit-slope height functions: exactly four singular points
    (the two peaks, and the antipodal pair on the ridge where the branch
    gradients cancel)."""
    M = M or Sphere(2, 1.0)
    if not isinstance(M, Sphere) or M.dim != 2:
        raise DomainViolation("double-bump is defined on 2-spheres")
    a = np.zeros(M.coord_dim)
    a[-1] = 1.0
    b = np.zeros(M.coord_dim)
    b[0] = np.sin(second_pole_angle)
    b[-1] = np.cos(second_pole_angle)

    def ev(X):
        X = np.atleast_2d(X) / M.radius
        return np.maximum(X @ a, X @ b)

    def grad(X):
        X = np.atleast_2d(X)
        fa = X @ a / M.radius
        fb = X @ b / M.radius
        ga = M.project_tangent(X, np.broadcast_to(a / M.radius, X.shape))
        gb = M.project_tangent(X, np.broadcast_to(b / M.radius, X.shape))
        out = np.where((fa > fb)[:, None], ga, gb)
        out[np.abs(fa - fb) < 1e-9] = np.nan
        return out

    s = (a + b) / np.linalg.norm(a + b)
    known = M.radius * np.stack([a, b, s, -s])
    f = ScalarField(M, ev, grad_oracle=grad, lipschitz_hint=1.0 / M.radius, name="double-bump")
    return FieldCatalogEntry("double-bump", f, known)


_BUILDERS = {
    "dist-to-point": lambda M, params: dist_to_point(M, params["point"]),
    "height": lambda M, params: height(M, params.get("axis")),
    "abs-max": lambda M, params: abs_max(),
    "x2sin": lambda M, params: x2sin(),
    "angle": lambda M, params: angle(M.periods if isinstance(M, FlatTorus) else params.get("periods", (1.0, 1.0))),
    "pwl-wobble": lambda M, params: pwl_wobble(
        M.periods if isinstance(M, FlatTorus) else params.get("periods", (1.0, 1.0)),
        params.get("amplitude", 0.1),
    ),
    "double-bump": lambda M, params: double_bump(M if isinstance(M, Sphere) else None,
                                                 params.get("second_pole_angle", 1.0)),
}


def catalog_names():
    return sorted(_BUILDERS)


def build_entry(name, manifold, params=None) -> FieldCatalogEntry:
    if name not in _BUILDERS:
        raise DomainViolation(f"unknown catalog field {name!r}; known: {catalog_names()}")
    return _BUILDERS[name](manifold, params or {})


# ----------------------------------------------------------------------
# compositions (scale / add / max / min of scalar entries), used by run
# configs in place of arbitrary user code


def _combine(op, fields):
    M = fields[0].manifold
    evs = [f.eval for f in fields]
    oracles = [f.grad_oracle for f in fields]

    if op == "add":
        ev = lambda X: sum(e(X) for e in evs)
        if all(o is not None for o in oracles):
            grad = lambda X: sum(o(X) for o in oracles)
        else:
            grad = None
    elif op in ("max", "min"):
        pick = np.argmax if op == "max" else np.argmin

        def ev(X):
            return np.stack([e(X) for e in evs], axis=1).max(axis=1) if op == "max" \
                else np.stack([e(X) for e in evs], axis=1).min(axis=1)

        if all(o is not None for o in oracles):
            def grad(X):
                X = np.atleast_2d(X)
                vals = np.stack([e(X) for e in evs], axis=1)
                winner = pick(vals, axis=1)
                sorted_vals = np.sort(vals, axis=1)
                tie = (sorted_vals[:, -1] - sorted_vals[:, -2] < 1e-9) if op == "max" \
                    else (sorted_vals[:, 1] - sorted_vals[:, 0] < 1e-9)
                gs = np.stack([o(X) for o in oracles], axis=1)
                out = gs[np.arange(len(X)), winner]
                out[tie] = np.nan
                return out
        else:
            grad = None
    else:
        raise DomainViolation(f"unknown composition op {op!r}")
    hints = [f.lipschitz_hint for f in fields]
    hint = sum(h for h in hints) if op == "add" and all(h is not None for h in hints) else (
        max(hints) if all(h is not None for h in hints) else None)
    return ScalarField(M, ev, grad_oracle=grad, lipschitz_hint=hint, name=f"{op}-composite")


def _scale(c, f: ScalarField):
    grad = (lambda X: c * f.grad_oracle(X)) if f.grad_oracle is not None else None
    hint = abs(c) * f.lipschitz_hint if f.lipschitz_hint is not None else None
    return ScalarField(f.manifold, lambda X: c * f.eval(X), grad_oracle=grad,
                       lipschitz_hint=hint, name=f"scale({c:g})-{f.name}")


def build_field_expr(expr, manifold) -> FieldCatalogEntry:
    """Field expression from a config: either {"catalog": name, "params": {}}
    or a composition {"op": "scale"|"add"|"max"|"min", ...}."""
    if "catalog" in expr:
        return build_entry(expr["catalog"], manifold, expr.get("params"))
    op = expr.get("op")
    if op == "scale":
        inner = build_field_expr(expr["of"], manifold)
        if inner.is_map:
            raise DomainViolation("compositions are defined for scalar fields only")
        return FieldCatalogEntry(f"scale-{inner.name}", _scale(float(expr["factor"]), inner.field), None)
    if op in ("add", "max", "min"):
        inners = [build_field_expr(e, manifold) for e in expr["args"]]
        if any(e.is_map for e in inners):
            raise DomainViolation("compositions are defined for scalar fields only")
        return FieldCatalogEntry(f"{op}-composite", _combine(op, [e.field for e in inners]), None)
    raise DomainViolation(f"bad field expression: {expr!r}")
