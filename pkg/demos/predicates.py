"""Exact predicates on inputs where plain floating point gets the sign wrong."""

import numpy as np

from sampledt.geometry import in_sphere, orient

# a point a few ulps off the line through b and c
b, c = (12.0, 12.0), (24.0, 24.0)
a = (0.5 + 41 * 2.0 ** -53, 0.5 + 48 * 2.0 ** -53)
naive = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
print(f"naive float determinant: {naive:+.3e}  (sign {int(np.sign(naive)):+d})")
print(f"orient (exact):          {orient([a, b, c]):+d}")

# a cocircular query point: exactly on the circle, so neither in nor out
tri = [(0.0, 0.0), (2.0, 0.0), (0.0, 2.0)]
for q in [(1.0, 1.0), (2.0, 2.0), (5.0, 5.0)]:
    print(f"in_sphere{tri} vs {q}: {in_sphere(tri, q):+d}")
