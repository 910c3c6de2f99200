"""Sphere maps induced by an invertible jump-coefficient matrix.

For an invertible d x d matrix A the map

    F(omega_hat) = A^{-1} omega_hat / |A^{-1} omega_hat|

sends the unit sphere to itself.  This module provides F, its tangent map
between tangent spaces, the intrinsic Jacobian determinant

    J_F(omega_hat) = det(A^{-1}) / |A^{-1} omega_hat|**d,

and the induced spherical density

    H(A, z_hat) = ( |det A| * |A^{-1} z_hat|**(alpha + d) )**(-1),

together with singular-value (ellipticity) bookkeeping.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ParameterError, PreconditionError

_UNIT_TOL = 1e-12


@dataclass(frozen=True)
class JumpMatrix:
    """An invertible coefficient matrix with its singular-value bounds.

    ``c_l`` and ``c_u`` are always computed from the SVD of ``entries``.
    Declared ellipticity constants, when given, are checked against the
    computed ones: every singular value must lie in [declared_c_l,
    declared_c_u].
    """

    entries: np.ndarray
    c_l: float = field(init=False)
    c_u: float = field(init=False)
    declared_c_l: float | None = None
    declared_c_u: float | None = None

    def __post_init__(self):
        a = np.asarray(self.entries, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ParameterError(f"entries must be a square matrix, got shape {a.shape}")
        if not np.all(np.isfinite(a)):
            raise ParameterError("entries must be finite")
        sigma = np.linalg.svd(a, compute_uv=False)
        if not np.isfinite(sigma[0]) or sigma[-1] <= sigma[0] * 1e-12:
            raise np.linalg.LinAlgError("matrix is singular")
        object.__setattr__(self, "entries", a)
        object.__setattr__(self, "c_l", float(sigma[-1]))
        object.__setattr__(self, "c_u", float(sigma[0]))
        if self.declared_c_l is not None and self.c_l < self.declared_c_l - 1e-12:
            raise ParameterError(
                f"singular value {self.c_l} below declared lower bound {self.declared_c_l}"
            )
        if self.declared_c_u is not None and self.c_u > self.declared_c_u + 1e-12:
            raise ParameterError(
                f"singular value {self.c_u} above declared upper bound {self.declared_c_u}"
            )

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    @property
    def inverse(self) -> np.ndarray:
        return np.linalg.inv(self.entries)


@dataclass(frozen=True)
class SpherePoint:
    """A point on the unit sphere S^{d-1}."""

    coords: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coords, dtype=float)
        if c.ndim != 1:
            raise ParameterError("coords must be a 1-d vector")
        r = np.linalg.norm(c)
        if abs(r - 1.0) > _UNIT_TOL:
            raise ParameterError(f"|coords| = {r} is not 1 within {_UNIT_TOL}")
        object.__setattr__(self, "coords", c)

    @classmethod
    def normalize(cls, v) -> "SpherePoint":
        v = np.asarray(v, dtype=float)
        r = np.linalg.norm(v)
        if r == 0.0:
            raise ParameterError("cannot normalise the zero vector")
        return cls(v / r)

    @property
    def dim(self) -> int:
        return self.coords.shape[0]


def _as_matrix(a) -> JumpMatrix:
    return a if isinstance(a, JumpMatrix) else JumpMatrix(np.asarray(a, dtype=float))


def immersion(A, omega_hat: SpherePoint) -> SpherePoint:
    """F(omega_hat) = A^{-1} omega_hat / |A^{-1} omega_hat|."""
    A = _as_matrix(A)
    w = np.linalg.solve(A.entries, omega_hat.coords)
    return SpherePoint(w / np.linalg.norm(w))


def immersion_inverse(A, z_hat: SpherePoint) -> SpherePoint:
    """G(z_hat) = A z_hat / |A z_hat|, the round-trip partner of F."""
    A = _as_matrix(A)
    w = A.entries @ z_hat.coords
    return SpherePoint(w / np.linalg.norm(w))


def tangent_map(A, omega_hat: SpherePoint, v) -> np.ndarray:
    """Differential dF(omega_hat): tangent vectors at omega_hat to F(omega_hat).

    dF(v) = (1/|A^{-1}w|) (I - (A^{-1}w)(A^{-1}w)^T / |A^{-1}w|^2) A^{-1} v
    with w = omega_hat.  ``v`` must be tangent: <omega_hat, v> = 0 within
    1e-10.
    """
    A = _as_matrix(A)
    v = np.asarray(v, dtype=float)
    if abs(float(np.dot(omega_hat.coords, v))) > 1e-10:
        raise PreconditionError("v is not tangent to the sphere at omega_hat")
    ainv = A.inverse
    w = ainv @ omega_hat.coords
    nw = np.linalg.norm(w)
    av = ainv @ v
    return (av - w * (np.dot(w, av) / nw**2)) / nw


def jacobian_det(A, omega_hat: SpherePoint) -> float:
    """Intrinsic Jacobian determinant det(A^{-1}) / |A^{-1} omega_hat|**d."""
    A = _as_matrix(A)
    ainv = A.inverse
    w = ainv @ omega_hat.coords
    return float(np.linalg.det(ainv) / np.linalg.norm(w) ** A.dim)


def spherical_density_H(A, z_hat: SpherePoint, alpha: float) -> float:
    """H = ( |det A| * |A^{-1} z_hat|**(alpha + d) )**(-1)."""
    if not (1.0 < alpha < 2.0):
        raise ParameterError(f"alpha must lie in (1, 2), got {alpha}")
    A = _as_matrix(A)
    w = np.linalg.solve(A.entries, z_hat.coords)
    return float(
        1.0 / (abs(np.linalg.det(A.entries)) * np.linalg.norm(w) ** (alpha + A.dim))
    )


def orthonormal_tangent_basis(omega_hat: SpherePoint) -> np.ndarray:
    """Deterministic orthonormal basis of the tangent space at omega_hat.

    Householder completion: the reflector mapping omega_hat to -sign(w_1) e_1
    has its remaining columns orthonormal and orthogonal to omega_hat.
    Returns an array of shape (d - 1, d) whose rows are the basis vectors.
    """
    w = omega_hat.coords
    d = w.shape[0]
    sign = 1.0 if w[0] >= 0.0 else -1.0
    u = w.copy()
    u[0] += sign  # reflector maps omega_hat to -sign * e_1; stable for all omega_hat
    u /= np.linalg.norm(u)
    H = np.eye(d) - 2.0 * np.outer(u, u)
    return H[:, 1:].T


def pushforward_angular_density(A, theta, alpha_unused=None):
    """Angular probability density (d = 2) of omega = A z_hat / |A z_hat|.

    For z_hat uniform on the circle the image angle has density
    |det A^{-1}| / |A^{-1} omega(theta)|**2 / (2 pi).
    """
    A = _as_matrix(A)
    if A.dim != 2:
        raise ParameterError("angular density is defined for d = 2 only")
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    omega = np.stack([np.cos(theta), np.sin(theta)], axis=-1)
    ainv = A.inverse
    w = omega @ ainv.T
    rho = abs(np.linalg.det(ainv)) / (np.linalg.norm(w, axis=-1) ** 2) / (2.0 * np.pi)
    return rho if rho.shape != (1,) else float(rho[0])


def finite_difference_jacobian_det(A, omega_hat: SpherePoint, h: float = 1e-6) -> float:
    """Jacobian determinant assembled from central differences of F.

    Perturbs omega_hat along geodesics through its orthonormal tangent
    basis, maps back to the sphere via the exponential map, and evaluates
    the determinant of dF in the tangent bases at omega_hat and F(omega_hat).
    Independent of :func:`tangent_map`; used as its oracle.
    """
    A = _as_matrix(A)
    d = A.dim
    V = orthonormal_tangent_basis(omega_hat)
    U = orthonormal_tangent_basis(immersion(A, omega_hat))
    M = np.empty((d - 1, d - 1))
    w = omega_hat.coords
    for i in range(d - 1):
        plus = immersion(A, SpherePoint(np.cos(h) * w + np.sin(h) * V[i])).coords
        minus = immersion(A, SpherePoint(np.cos(h) * w - np.sin(h) * V[i])).coords
        df = (plus - minus) / (2.0 * h)
        M[i] = U @ df
    # Rows indexed by the source basis, columns by the target basis; the
    # intrinsic determinant is basis-orientation dependent only in sign.
    return float(np.linalg.det(M))


def tangent_map_det(A, omega_hat: SpherePoint) -> float:
    """Determinant of the analytic tangent map in orthonormal tangent bases."""
    A = _as_matrix(A)
    d = A.dim
    V = orthonormal_tangent_basis(omega_hat)
    U = orthonormal_tangent_basis(immersion(A, omega_hat))
    M = np.empty((d - 1, d - 1))
    for i in range(d - 1):
        M[i] = U @ tangent_map(A, omega_hat, V[i])
    return float(np.linalg.det(M))
