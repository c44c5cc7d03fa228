"""From a kinked Lipschitz map to a certified smooth submersion.

The wobbled angle map T^2 -> S^1 is piecewise linear in its second argument
(so not differentiable along two circles) but has no singular points: every
sampled differential keeps full rank. Smoothing it, projecting back onto the
embedded circle through the tube projection, and scanning a grid certifies
an approximate fibration: the composed map stays within eta of the original
while its differential keeps rank 1 everywhere on the grid.
"""

import numpy as np

from nsmooth import embed, eta_search, is_singular_map
from nsmooth.catalog import pwl_wobble
from nsmooth.manifold import FlatTorus


def main():
    entry = pwl_wobble(amplitude=0.1)
    T2 = FlatTorus([1.0, 1.0])

    print("spot-checking nonsingularity of the wobbled angle map:")
    for q in ([0.1, 0.2], [0.6, 0.5], [0.9, 0.75]):
        v = is_singular_map(entry.field, np.array(q))
        print(f"  at {q}: margin {v.margin:.4f} (threshold {v.threshold:.2e})")

    E = embed(entry.field.target)
    print(f"\ntarget embedded as the unit circle, tube radius mu0 = {E.tube_radius}")

    eps, rep = eta_search(entry.field, E, eta=0.2, grid_size=4096)
    print(f"\neta-search at eta = 0.2 over a {rep.grid_size}-point grid:")
    for rung in rep.rungs:
        line = f"  eps = {rung['eps']:7.4f}: {rung['status']}"
        if rung["status"] == "evaluated":
            line += (f", max distance {rung['max_dist']:.4f},"
                     f" min singular value {rung['min_sigma']:.4f}")
        print(line)
    print(f"\naccepted eps = {eps}: max_dist {rep.max_dist:.4f} < 0.2,"
          f" min_sigma {rep.min_sigma:.4f} > {rep.sigma_tol}")
    print("surjectivity/properness hold by construction (compact source, connected target)")


if __name__ == "__main__":
    main()
