"""Criticality of distance functions: geodesic test vs gradient sampling.

For the distance function from a base point, a point is critical in the
geodesic sense when the arrival directions of minimal geodesics fail to fit
in an open half space; it is singular in the nonsmooth-gradient sense when
the sampled gradient hull contains the origin. The two verdicts agree, and
the scan below exercises that on the round sphere and the square flat torus,
recovering the known critical sets exactly.
"""

import numpy as np

from nsmooth import equivalence_scan, gs_critical
from nsmooth.manifold import FlatTorus, Sphere


def main():
    S2 = Sphere(2, 1.0)
    north = np.array([0.0, 0.0, 1.0])

    print("Round sphere, base point = north pole")
    grid = np.concatenate([S2.grid(198), np.array([north, -north])])
    rep = equivalence_scan(S2, north, grid)
    s = rep.summary()
    print(f"  {s['grid_points']} grid points, {s['n_disagreements']} disagreements,"
          f" {s['n_indeterminate']} flagged near the cut locus")
    for q in rep.grid[rep.gs_singular]:
        print(f"  singular grid point: {np.round(q, 6)}")

    print()
    print("Margins along a meridian (distance of the hull from the origin):")
    for t in (0.25, 0.75, 1.5, 2.4, 3.0):
        q = S2.exp(north, t * np.array([1.0, 0.0, 0.0]))
        v = gs_critical(S2, north, q)
        print(f"  d(north, q) = {t:4.2f}: margin {v.margin:.4f}"
              + ("  <- continuum of geodesics" if v.continuum else ""))

    print()
    print("Flat torus, base point = origin")
    T2 = FlatTorus([1.0, 1.0])
    rep = equivalence_scan(T2, np.array([0.0, 0.0]), T2.grid(200, counts=[10, 20]))
    s = rep.summary()
    print(f"  {s['grid_points']} grid points, {s['n_disagreements']} disagreements")
    print("  critical set (grid):", [[float(x) for x in q] for q in rep.grid[rep.gs_singular]])
    print("  (the three half-period points and the base point itself)")


if __name__ == "__main__":
    main()
