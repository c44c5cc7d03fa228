"""Two-singular-point functions and the sphere recognition checks.

A Lipschitz function on a closed surface with exactly two singular points
and a sphere-like middle level forces sphere topology. The numerical
shadow of that statement is a four-step check: (1) the singular set
clusters into exactly two components, (2) the middle level band is
connected, (3) the smoothed field has no critical points between the
bands, (4) levels near the extremes collapse onto the singular clusters.

The distance from the north pole and the height function both pass; a
double-bump function with four singular points fails at step (1), as it
must.
"""

import numpy as np

from nsmooth import reeb_check
from nsmooth.catalog import dist_to_point, double_bump, height
from nsmooth.errors import HypothesisFailure
from nsmooth.manifold import Sphere


def show(entry, c, band, eps=0.05):
    print(f"{entry.name}: level c = {c:g}, band {band}")
    try:
        rep = reeb_check(entry, c=c, band=band, eps=eps)
    except HypothesisFailure as exc:
        print(f"  FAILED at step ({exc.step}): {exc.detail}")
        return
    s = rep.steps
    print(f"  (1) singular clusters: {s['1_singular_clusters']['count']}")
    print(f"  (2) level band: {s['2_level_connectivity']['n_points']} points,"
          f" {s['2_level_connectivity']['n_components']} component(s)")
    print(f"  (3) min |grad F_eps| on the band: {s['3_band_gradient']['min_grad']:.4f}")
    md = s["4_localization"]["min"]["max_dist_to_cluster"]
    print(f"  (4) near-min levels localize: max dist {md[0]:.3f} -> {md[1]:.3f} as the level recedes")
    print("  all four checks passed")


def main():
    S2 = Sphere(2, 1.0)
    north = np.array([0.0, 0.0, 1.0])
    show(dist_to_point(S2, north), c=np.pi / 2, band=(1.2, 1.9))
    print()
    show(height(S2), c=0.0, band=(-0.5, 0.5))
    print()
    show(double_bump(S2), c=0.6, band=(0.2, 0.9))


if __name__ == "__main__":
    main()
