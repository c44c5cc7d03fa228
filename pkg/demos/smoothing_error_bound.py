"""Mollifier smoothing of Lipschitz fields with a certified error bound.

A finite cover of strongly convex balls, a flat-bump partition of unity,
and convolution against a compactly supported mollifier in each tangent
chart produce a smooth blend F_eps with

    max |F_eps - F|  <=  eps * Lambda(eps) * Lip(F),

where Lambda(eps) is the chart-distortion constant (exactly 1 on flat
manifolds and on the sphere). The table below tracks the bound down an
epsilon ladder for the height function and the kinked distance function.
"""

import numpy as np

from nsmooth import (
    build_cover,
    build_smoothed,
    grad_global_smooth,
    lambda_eps,
    lipschitz_estimate,
    max_error_on_grid,
)
from nsmooth.catalog import dist_to_point, height
from nsmooth.manifold import Sphere


def main():
    S2 = Sphere(2, 1.0)
    north = np.array([0.0, 0.0, 1.0])
    cover = build_cover(S2, np.pi / 4.0)
    grid = S2.grid(600)
    print(f"cover: {cover.size} balls of radius pi/4; scan grid: {len(grid)} points")

    for entry in (height(S2), dist_to_point(S2, north)):
        lip = lipschitz_estimate(entry.field, seed=0)
        print(f"\n{entry.name}: sampled Lipschitz lower bound {lip.value:.6f}")
        print("    eps     max|F_eps - F|   eps*Lambda*Lip   slack")
        for eps in (0.2, 0.1, 0.05, 0.025):
            S = build_smoothed(entry.field, cover, eps)
            err = max_error_on_grid(S, grid)
            bound = eps * lambda_eps(S2, cover, eps) * lip.value
            print(f"  {eps:6.3f}   {err:13.6f}   {bound:13.6f}   {bound - err:+.6f}")

    # the smoothed height keeps a healthy gradient on the equatorial band
    S = build_smoothed(height(S2).field, cover, 0.05)
    q = S2.project_point(np.array([1.0, 0.2, 0.3]))
    g_jac = grad_global_smooth(S, q, method="jacobi")
    g_fd = grad_global_smooth(S, q, method="fd")
    print("\ngradient of the eps=0.05 smoothing at a band point:")
    print(f"  via Jacobi-field quadrature: {np.round(g_jac, 8)}")
    print(f"  via central differences:     {np.round(g_fd, 8)}")
    print(f"  |grad| = {np.linalg.norm(g_jac):.6f} (analytic height gradient: {np.sqrt(1 - q[2] ** 2):.6f})")


if __name__ == "__main__":
    main()
