"""Generalized gradients of two classic one-dimensional Lipschitz functions.

First the convex max of |x|-1 and (x-2)^2-1: its subdifferential at the two
kinks x=1 and x=4 is an interval bridging the one-sided slopes. Then the
rougher x^2 sin(1/x): differentiable everywhere but not C^1 at 0, where the
limiting gradients fill [-1, 1]. Both hulls come out of the same sampling
estimator; no symbolic work anywhere.
"""

import numpy as np

from nsmooth import generalized_gradient, is_singular_scalar
from nsmooth.catalog import abs_max, x2sin


def describe(entry, x):
    p = np.array([x])
    hull = generalized_gradient(entry.field, p)
    lo, hi = hull.interval()
    verdict = is_singular_scalar(entry.field, p)
    tag = "singular" if verdict.singular else "nonsingular"
    print(f"  {entry.name} at x={x:g}: hull ~ [{lo:+.4f}, {hi:+.4f}], "
          f"{tag} (margin {verdict.margin:.3g})")
    return lo, hi


def main():
    print("Convex example f = max(|x|-1, (x-2)^2-1)")
    entry = abs_max()
    describe(entry, 1.0)   # expect ~[-2, 1], singular: 0 sits inside
    describe(entry, 4.0)   # expect ~[1, 4], nonsingular: margin ~ 1
    describe(entry, 0.0)   # smooth branch: hull collapses near {-4}

    print()
    print("Oscillatory example g = x^2 sin(1/x)")
    entry = x2sin()
    describe(entry, 0.0)   # expect ~[-1, 1]: limits of -cos(1/x) fill it
    describe(entry, 0.5)   # smooth point: singleton at g'(0.5)


if __name__ == "__main__":
    main()
