"""Sphere geometry of an invertible jump coefficient.

A matrix A maps the unit sphere to itself through F(w) = A^{-1}w / |A^{-1}w|.
The intrinsic Jacobian determinant of F has the closed form
det(A^{-1}) / |A^{-1}w|^d, and the image of the uniform law on the sphere
has angular density proportional to |det A^{-1}| / |A^{-1}w|^d.  Both
formulas are checked here: the first against finite differences of F along
geodesics, the second against a Monte Carlo histogram.
"""

import numpy as np

from slowfast.sphere_geometry import (
    JumpMatrix,
    SpherePoint,
    finite_difference_jacobian_det,
    jacobian_det,
    pushforward_angular_density,
    spherical_density_H,
)

rng = np.random.default_rng(1)
A = JumpMatrix(np.array([[2.0, 0.5], [0.0, 1.0]]))
print(f"singular values of A: c_l = {A.c_l:.4f}, c_u = {A.c_u:.4f}")

print("\nJacobian determinant vs finite differences")
for _ in range(4):
    w = rng.standard_normal(2)
    om = SpherePoint(w / np.linalg.norm(w))
    jac = jacobian_det(A, om)
    fd = finite_difference_jacobian_det(A, om)
    print(f"  at {np.round(om.coords, 3)}: analytic {jac:+.8f}, finite diff {fd:+.8f}")
lo, hi = (A.c_l / A.c_u) ** 2, (A.c_u / A.c_l) ** 2
print(f"  bound sandwich: {lo:.4f} <= |J_F| <= {hi:.4f}")

print("\nspherical density H at a few directions (alpha = 1.5)")
for theta in (0.0, np.pi / 3, np.pi / 2):
    z = SpherePoint(np.array([np.cos(theta), np.sin(theta)]))
    print(f"  H(A, {theta:4.2f} rad) = {spherical_density_H(A, z, 1.5):.5f}")

print("\npushforward of the uniform circle law")
n, bins = 1_000_000, 12
theta = rng.uniform(0, 2 * np.pi, n)
z = np.stack([np.cos(theta), np.sin(theta)], axis=1)
w = z @ A.entries.T
ang = np.mod(np.arctan2(w[:, 1], w[:, 0]), 2 * np.pi)
counts, edges = np.histogram(ang, bins=bins, range=(0, 2 * np.pi))
centers = 0.5 * (edges[:-1] + edges[1:])
width = edges[1] - edges[0]
expected = pushforward_angular_density(A, centers)
print("  bin centre   empirical   density formula")
for c, k, e in zip(centers, counts, expected):
    print(f"  {c:10.3f}   {k / (n * width):9.5f}   {e:15.5f}")
