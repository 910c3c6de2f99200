"""Reflection coupling primitives and the C^2 distance function psi.

The reflection map mirrors a jump across the hyperplane orthogonal to the
difference of the two coupled states.  The distance function

    psi(r) = 1 - exp(-c1 r)                                  on (0, 2 L0],
    psi(r) = A exp(c2 (r - 2 L0)) + B (r - 2 L0)^2
             + (1 - exp(-2 c1 L0) - A)                       on [2 L0, inf),

with A = (c1/c2) exp(-2 L0 c1) > 0 and B = -((c1 + c2) c1 / 2)
exp(-2 L0 c1) < 0, is C^2 across the junction by construction.  The module
also evaluates, in dimension one, the drift-plus-reflected-small-jump bound
whose negativity certifies exponential contraction.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import integrate, optimize

from .errors import NumericError, ParameterError, PreconditionError
from .sphere_geometry import JumpMatrix, SpherePoint, spherical_density_H


@dataclass(frozen=True)
class PsiParams:
    """Parameters of the distance function psi.

    ``c2 >= 20 c1`` keeps log(2 (c1 + c2) / c2) <= log 2.1, which makes the
    auxiliary function g strictly positive beyond the junction.
    """

    c1: float
    c2: float
    L0: float

    def __post_init__(self):
        if self.c1 <= 0 or self.c2 <= 0 or self.L0 <= 0:
            raise ParameterError("c1, c2, L0 must all be positive")
        if self.c2 < 20.0 * self.c1:
            raise ParameterError(f"c2 must be >= 20 c1, got c2={self.c2}, c1={self.c1}")

    @property
    def A(self) -> float:
        return (self.c1 / self.c2) * np.exp(-2.0 * self.L0 * self.c1)

    @property
    def B(self) -> float:
        return -((self.c1 + self.c2) * self.c1 / 2.0) * np.exp(-2.0 * self.L0 * self.c1)


@dataclass(frozen=True)
class QuadConfig:
    """Adaptive-quadrature settings for the jump integral."""

    rel_tol: float = 1e-10
    abs_tol: float = 1e-12
    limit: int = 200


def reflection_map(y1, y2, z) -> np.ndarray:
    """Reflect z across the hyperplane orthogonal to y1 - y2.

    phi(z) = z - 2 <y1 - y2, z> (y1 - y2) / |y1 - y2|^2 for y1 != y2, and
    phi(z) = -z on the degenerate branch y1 = y2.
    """
    y1 = np.atleast_1d(np.asarray(y1, dtype=float))
    y2 = np.atleast_1d(np.asarray(y2, dtype=float))
    z = np.atleast_1d(np.asarray(z, dtype=float))
    e = y1 - y2
    n2 = float(np.dot(e, e))
    if n2 == 0.0:
        return -z
    return z - (2.0 * np.dot(e, z) / n2) * e


def _split_branches(params: PsiParams, r: np.ndarray):
    if np.any(r < 0):
        raise ParameterError("psi is defined for r >= 0 only")
    return r <= 2.0 * params.L0


def psi(params: PsiParams, r):
    """Evaluate psi(r); accepts scalars or arrays, r >= 0."""
    r = np.asarray(r, dtype=float)
    scalar = r.ndim == 0
    r = np.atleast_1d(r)
    low = _split_branches(params, r)
    out = np.empty_like(r)
    out[low] = 1.0 - np.exp(-params.c1 * r[low])
    s = r[~low] - 2.0 * params.L0
    out[~low] = (
        params.A * np.exp(params.c2 * s)
        + params.B * s**2
        + (1.0 - np.exp(-2.0 * params.c1 * params.L0) - params.A)
    )
    return float(out[0]) if scalar else out


def psi_d1(params: PsiParams, r):
    """First derivative of psi."""
    r = np.asarray(r, dtype=float)
    scalar = r.ndim == 0
    r = np.atleast_1d(r)
    low = _split_branches(params, r)
    out = np.empty_like(r)
    out[low] = params.c1 * np.exp(-params.c1 * r[low])
    s = r[~low] - 2.0 * params.L0
    out[~low] = params.A * params.c2 * np.exp(params.c2 * s) + 2.0 * params.B * s
    return float(out[0]) if scalar else out


def psi_d2(params: PsiParams, r):
    """Second derivative of psi."""
    r = np.asarray(r, dtype=float)
    scalar = r.ndim == 0
    r = np.atleast_1d(r)
    low = _split_branches(params, r)
    out = np.empty_like(r)
    out[low] = -params.c1**2 * np.exp(-params.c1 * r[low])
    s = r[~low] - 2.0 * params.L0
    out[~low] = params.A * params.c2**2 * np.exp(params.c2 * s) + 2.0 * params.B
    return float(out[0]) if scalar else out


def g_tail(params: PsiParams, r):
    """g(r) = (1/2) A c2 exp(c2 (r - 2 L0)) + 2 B (r - 2 L0) on [2 L0, inf).

    Strict positivity of g is what keeps psi' positive beyond the junction.
    """
    r = np.asarray(r, dtype=float)
    s = r - 2.0 * params.L0
    if np.any(s < -1e-12):
        raise ParameterError("g_tail is defined on [2 L0, inf)")
    return 0.5 * params.A * params.c2 * np.exp(params.c2 * s) + 2.0 * params.B * s


def comparison_constant(params: PsiParams, p: float, r_max: float, n_grid: int = 10_000) -> float:
    """c(p) = sup of r**p / psi(r) on (0, r_max].

    The supremum of the fine-grid ratio is sharpened by a bounded scalar
    maximisation around the grid argmax, so r**p <= c(p) psi(r) holds on
    any grid up to float rounding.  For p > 1 the ratio vanishes at 0+ so
    the supremum sits away from the origin; for p = 1 it tends to 1/c1.
    """
    if p < 1:
        raise ParameterError(f"p must be >= 1, got {p}")
    if r_max <= 0:
        raise ParameterError(f"r_max must be positive, got {r_max}")
    grid = np.geomspace(r_max * 1e-9, r_max, n_grid)
    ratio = grid**p / psi(params, grid)
    k = int(np.argmax(ratio))
    lo = grid[max(k - 1, 0)]
    hi = grid[min(k + 1, n_grid - 1)]
    res = optimize.minimize_scalar(
        lambda r: -(r**p) / psi(params, r), bounds=(lo, hi), method="bounded",
        options={"xatol": 1e-14},
    )
    best = max(float(np.max(ratio)), float(-res.fun))
    # cover the boundary r_max as well (the ratio can be increasing there)
    return max(best, float(r_max**p / psi(params, r_max)))


def paper_c1(c_local: float, M: float, L0: float, alpha: float, d: int = 1) -> float:
    """The coupling constant choice c1 = (2c/K)^{1/(alpha-1)} e^{2 L0/(alpha-1)} + 2.

    Here K = 2 M L0^{1-alpha} / (d (2-alpha)) with M the lower bound of the
    four-way minimum of spherical densities.  Exposed as a helper; callers
    may pick any c1 > 0 and check the achieved contraction rate instead.
    """
    if not (1.0 < alpha < 2.0):
        raise ParameterError(f"alpha must lie in (1, 2), got {alpha}")
    K = 2.0 * M * L0 ** (1.0 - alpha) / (d * (2.0 - alpha))
    return (2.0 * c_local / K) ** (1.0 / (alpha - 1.0)) * np.exp(
        2.0 * L0 / (alpha - 1.0)
    ) + 2.0


def _h_tilde_1d(system, x: float, y1: float, y2: float) -> float:
    """Four-way minimum of spherical densities, d = 1 (sphere = {-1, +1})."""
    vals = []
    for y in (y1, y2):
        d2 = np.asarray(system.delta2(np.array([[float(x)]]), np.array([[float(y)]])))
        a = JumpMatrix(d2.reshape(1, 1))
        for zhat in (1.0, -1.0):
            vals.append(spherical_density_H(a, SpherePoint(np.array([zhat])), system.alpha2))
    return float(min(vals))


def lyapunov_rhs(
    system,
    y1: float,
    y2: float,
    params: PsiParams,
    a: float,
    quad_config: QuadConfig = QuadConfig(),
    x: float = 0.0,
) -> float:
    """Drift-plus-jump bound on the coupled generator applied to psi(|y1-y2|).

    Dimension-one specialisation: the drift term
    ``psi'(r) <f(y1) - f(y2), y1 - y2> / r`` plus, for r <= L0, the
    reflected-small-jump term
    ``2 psi''((1+2a) r) * integral_{|z| <= a r} z^2 H~ / |z|^{1+alpha} dz``,
    where H~ is the four-way minimum of spherical densities.  Jumps larger
    than ``a r`` move both copies synchronously and cancel in the distance,
    so they contribute nothing.  A negative value certifies contraction at
    that pair.
    """
    if getattr(system, "d2", 1) != 1:
        raise PreconditionError("lyapunov_rhs is implemented for d2 = 1 only")
    if y1 == y2:
        raise PreconditionError("y1 and y2 must differ")
    if not (0.0 < a < 0.5):
        raise ParameterError(f"a must lie in (0, 1/2), got {a}")
    r = abs(float(y1) - float(y2))
    alpha = system.alpha2

    xb = np.array([[float(x)]])
    f1 = float(np.asarray(system.f(xb, np.array([[float(y1)]]))).reshape(()))
    f2 = float(np.asarray(system.f(xb, np.array([[float(y2)]]))).reshape(()))
    drift = psi_d1(params, r) * (f1 - f2) * (y1 - y2) / r

    if r > params.L0:
        return float(drift)

    h_tilde = _h_tilde_1d(system, x, y1, y2)
    integrand = lambda z: z ** (1.0 - alpha) * h_tilde  # z^2 * H~ / z^{1+alpha}
    val, err = integrate.quad(
        integrand,
        0.0,
        a * r,
        epsabs=quad_config.abs_tol,
        epsrel=quad_config.rel_tol,
        limit=quad_config.limit,
    )
    if not np.isfinite(val) or err > max(quad_config.abs_tol, abs(val) * 1e-6, 1e-12):
        raise NumericError(f"jump-integral quadrature did not converge (err={err})")
    jump = 2.0 * psi_d2(params, (1.0 + 2.0 * a) * r) * 2.0 * val  # both signs of z
    return float(drift + jump)
