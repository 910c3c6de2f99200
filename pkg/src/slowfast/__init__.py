"""Monte Carlo laboratory for slow-fast systems driven by multiplicative
isotropic alpha-stable noise: exact stable samplers, sphere geometry of the
jump coefficient, Euler integrators, ergodic estimation of the averaged
equation, reflection-coupling diagnostics and convergence-rate harnesses.
"""

from .coupling import (
    PsiParams,
    QuadConfig,
    comparison_constant,
    g_tail,
    lyapunov_rhs,
    paper_c1,
    psi,
    psi_d1,
    psi_d2,
    reflection_map,
)
from .ergodics import (
    CorrectorValue,
    ErgodicConfig,
    ErgodicEstimate,
    averaged_drift,
    averaged_noise,
    check_centering,
    corrector_eval,
    ergodic_decay_rate,
    invariant_average,
    wasserstein_contraction,
)
from .errors import (
    ConfigurationError,
    DivergenceError,
    FitError,
    InsufficientSignalError,
    NumericError,
    ParameterError,
    PreconditionError,
    SingularityError,
)
from .rates import (
    RateTable,
    fit_loglog,
    strong_error_sweep,
    theoretical_strong_order,
    theoretical_weak_order,
    weak_error_sweep,
)
from .sde_core import (
    PathSample,
    SlowFastSystem,
    simulate_averaged,
    simulate_frozen,
    simulate_slow_fast,
    stable_dt,
    step_slow_fast,
)
from .sphere_geometry import (
    JumpMatrix,
    SpherePoint,
    immersion,
    jacobian_det,
    orthonormal_tangent_basis,
    spherical_density_H,
    tangent_map,
)
from .stable_noise import (
    StableSpec,
    levy_density,
    sample_isotropic_stable,
    sample_stable_1d,
    split_increment,
)
from .systems import REGISTRY, build_observable, build_system

__version__ = "0.1.0"
