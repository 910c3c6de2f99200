"""Built-in test systems and the coefficient mini-language for configs.

The registry holds the systems used throughout the test and experiment
suite (all one-dimensional in both components):

``D1``     b = -x + cos(y - x), delta1 = 1, f = x - y, delta2 = 1,
           alpha1 = alpha2 = 1.5; the averaged drift is
           b_bar(x) = -x + exp(-1/1.5) because the frozen equation is a
           stable Ornstein-Uhlenbeck process centred at x.
``D2``     as D1 but with multiplicative slow noise
           delta1 = 1 + 0.2 sin(x) cos(y) and v = 1.5.
``OU``     pure frozen-equation testbed f = -a y, delta2 = sigma.
``cubic``  dissipative nonlinear drift f = -y - y^3.

User-defined one-dimensional systems can be described in config files with
polynomial/trig terms; see :func:`build_coefficient`.
"""

from __future__ import annotations

import numpy as np

from .errors import ConfigurationError
from .sde_core import SlowFastSystem

#: invariant average of cos under the stable OU law with a = sigma = 1,
#: alpha = 3/2: E cos(Y_inf) = exp(-sigma^alpha / (a alpha))
OU_COS_AVERAGE = float(np.exp(-1.0 / 1.5))


def ou_cos_average(a: float = 1.0, sigma: float = 1.0, alpha: float = 1.5) -> float:
    """Stationary E cos(Y) for dY = -a Y dt + sigma dL, L alpha-stable."""
    return float(np.exp(-(sigma**alpha) / (a * alpha)))


def _d1_b(t, x, y):
    return -x + np.cos(y - x)


def _d1_f(x, y):
    return x - y


def _d1_b_bar(t, x):
    return -x + OU_COS_AVERAGE


def _d2_delta1(t, x, y):
    return (1.0 + 0.2 * np.sin(x) * np.cos(y))[:, :, None]


def _d2_delta1_bar(t, x):
    return (1.0 + 0.2 * OU_COS_AVERAGE * np.sin(x) * np.cos(x))[:, :, None]


def _one_txy(t, x, y):
    return 1.0


def _one_xy(x, y):
    return 1.0


def _zero_b(t, x, y):
    return np.zeros_like(x)


def _zero_b_bar(t, x):
    return np.zeros_like(x)


def _cubic_f(x, y):
    return -y - y**3


class _LinearDrift:
    """Picklable f(x, y) = -a y."""

    def __init__(self, a):
        self.a = float(a)

    def __call__(self, x, y):
        return -self.a * y


class _ConstantNoise:
    """Picklable constant jump coefficient."""

    def __init__(self, sigma):
        self.sigma = float(sigma)

    def __call__(self, x, y):
        return self.sigma


def make_d1(alpha1: float = 1.5, alpha2: float = 1.5) -> SlowFastSystem:
    return SlowFastSystem(
        b=_d1_b,
        delta1=_one_txy,
        f=_d1_f,
        delta2=_one_xy,
        alpha1=alpha1,
        alpha2=alpha2,
        v=1.0,
        L0=4.0,
        c_loc=0.5,
        C_dissip=0.5,
        delta1_time_only=True,
        name="D1",
        b_bar=_d1_b_bar,
    )


def make_d2(alpha1: float = 1.5, alpha2: float = 1.5) -> SlowFastSystem:
    return SlowFastSystem(
        b=_d1_b,
        delta1=_d2_delta1,
        f=_d1_f,
        delta2=_one_xy,
        alpha1=alpha1,
        alpha2=alpha2,
        v=1.5,
        L0=4.0,
        c_loc=0.5,
        C_dissip=0.5,
        delta1_time_only=False,
        name="D2",
        b_bar=_d1_b_bar,
        delta1_bar=_d2_delta1_bar,
    )


def make_ou(a: float = 1.0, sigma: float = 1.0, alpha2: float = 1.5, alpha1: float = 1.5) -> SlowFastSystem:
    """Frozen-equation testbed: f = -a y with constant jump coefficient."""
    return SlowFastSystem(
        b=_zero_b,
        delta1=_one_txy,
        f=_LinearDrift(a),
        delta2=_ConstantNoise(sigma),
        alpha1=alpha1,
        alpha2=alpha2,
        v=1.0,
        L0=1.0,
        c_loc=0.5,
        C_dissip=a / 2.0,
        name="OU",
        b_bar=_zero_b_bar,
    )


def make_anchored_ou(alpha2: float = 1.5) -> SlowFastSystem:
    """Frozen dY = (x - Y) dt + dL: the OU process centred at the slow state."""
    sys = make_ou(alpha2=alpha2)
    sys.f = _d1_f
    sys.name = "OU-anchored"
    return sys


def make_cubic(alpha2: float = 1.5) -> SlowFastSystem:
    """Dissipative nonlinear fast drift f = -y - y^3."""
    return SlowFastSystem(
        b=_zero_b,
        delta1=_one_txy,
        f=_cubic_f,
        delta2=_one_xy,
        alpha1=1.5,
        alpha2=alpha2,
        v=1.0,
        L0=1.0,
        c_loc=0.5,
        C_dissip=1.0,
        name="cubic",
        b_bar=_zero_b_bar,
    )


REGISTRY = {
    "D1": make_d1,
    "D2": make_d2,
    "OU": make_ou,
    "OU-anchored": make_anchored_ou,
    "cubic": make_cubic,
}


def _term_value(term, t, x, y):
    val = float(term.get("coef", 1.0)) * np.ones_like(x[:, 0])
    for var, power in term.get("powers", {}).items():
        base = {"t": np.full_like(x[:, 0], t), "x": x[:, 0], "y": y[:, 0]}[var]
        val = val * base ** float(power)
    if "trig" in term:
        lin = term.get("lin", {})
        arg = float(term.get("phase", 0.0)) * np.ones_like(x[:, 0])
        for var, c in lin.items():
            base = {"t": np.full_like(x[:, 0], t), "x": x[:, 0], "y": y[:, 0]}[var]
            arg = arg + float(c) * base
        fn = {"cos": np.cos, "sin": np.sin, "tanh": np.tanh}[term["trig"]]
        val = val * fn(arg)
    gate = term.get("indicator")
    if gate is not None:
        base = {"t": np.full_like(x[:, 0], t), "x": x[:, 0], "y": y[:, 0]}[gate["var"]]
        lo = float(gate.get("min", -np.inf))
        hi = float(gate.get("max", np.inf))
        val = val * ((base >= lo) & (base <= hi))
    return val


def build_coefficient(spec, kind: str):
    """Compile a piecewise polynomial/trig coefficient spec (d1 = d2 = 1).

    ``spec`` is {"terms": [...]} where each term multiplies an optional
    monomial (``powers``), an optional trig factor (``trig``/``lin``/
    ``phase``) and an optional interval indicator.  ``kind`` selects the
    callback signature: "b"/"delta1" get (t, x, y), "f"/"delta2" get
    (x, y).  Noise coefficients are returned with a trailing (1, 1) matrix
    axis.
    """
    terms = spec.get("terms")
    if not terms:
        raise ConfigurationError(f"coefficient spec for {kind!r} has no terms")

    def drift_txy(t, x, y):
        return sum(_term_value(tm, t, x, y) for tm in terms)[:, None]

    def drift_xy(x, y):
        return sum(_term_value(tm, 0.0, x, y) for tm in terms)[:, None]

    if kind == "b":
        return drift_txy
    if kind == "f":
        return drift_xy
    if kind == "delta1":
        return lambda t, x, y: drift_txy(t, x, y)[:, :, None]
    if kind == "delta2":
        return lambda x, y: drift_xy(x, y)[:, :, None]
    raise ConfigurationError(f"unknown coefficient kind {kind!r}")


def build_system(spec) -> SlowFastSystem:
    """Build a system from a registry name or an inline coefficient spec."""
    if isinstance(spec, str):
        name, params = spec, {}
    elif isinstance(spec, dict) and "name" in spec:
        name = spec["name"]
        params = {k: v for k, v in spec.items() if k != "name"}
    else:
        name, params = None, None
    if name is not None:
        if name not in REGISTRY:
            raise ConfigurationError(
                f"unknown system {name!r}; known: {sorted(REGISTRY)}"
            )
        return REGISTRY[name](**params)

    if not isinstance(spec, dict):
        raise ConfigurationError("system spec must be a name or an object")
    try:
        coeffs = {k: build_coefficient(spec[k], k) for k in ("b", "delta1", "f", "delta2")}
    except KeyError as exc:
        raise ConfigurationError(f"system spec is missing coefficient {exc}") from exc
    meta = spec.get("meta", {})
    return SlowFastSystem(
        b=coeffs["b"],
        delta1=coeffs["delta1"],
        f=coeffs["f"],
        delta2=coeffs["delta2"],
        alpha1=float(spec.get("alpha1", 1.5)),
        alpha2=float(spec.get("alpha2", 1.5)),
        v=float(meta.get("v", 1.0)),
        L0=float(meta.get("L0", 1.0)),
        c_loc=float(meta.get("c_loc", 1.0)),
        C_dissip=float(meta.get("C_dissip", 1.0)),
        delta1_time_only=bool(spec.get("delta1_time_only", False)),
        name=str(spec.get("label", "custom")),
    )


OBSERVABLES = {
    "cos": np.cos,
    "sin": np.sin,
    "tanh": np.tanh,
    "identity": lambda v: v,
    "abs": np.abs,
}


class _Observable:
    """Picklable first-coordinate observable base(scale * u) + offset."""

    def __init__(self, name, scale=1.0, offset=0.0):
        self.name = name
        self.scale = float(scale)
        self.offset = float(offset)

    def __call__(self, state):
        state = np.asarray(state, dtype=float)
        u = state[:, 0] if state.ndim == 2 else state
        return OBSERVABLES[self.name](self.scale * u) + self.offset


def build_observable(spec):
    """Compile an observable spec: first-coordinate map with offset/scale.

    ``spec`` is a name from OBSERVABLES or {"name": ..., "scale": s,
    "offset": o} computing base(s * u) + o on the first state coordinate.
    """
    if isinstance(spec, str):
        spec = {"name": spec}
    name = spec.get("name")
    if name not in OBSERVABLES:
        raise ConfigurationError(f"unknown observable {name!r}; known: {sorted(OBSERVABLES)}")
    return _Observable(name, spec.get("scale", 1.0), spec.get("offset", 0.0))
