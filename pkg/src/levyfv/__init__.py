"""Monotone finite volume schemes for nonlocal convection-diffusion equations.

``u_t + div f(u) = L[A(u)]`` on a periodic box, where ``L`` is the
generator of a Lévy process with measure ``mu``.
"""

__version__ = "0.1.0"

from .errors import (
    BandwidthTooSmall,
    CFLViolation,
    ConfigError,
    DivergentMoment,
    InvalidMeasure,
    LevyFVError,
    NoConvergence,
    OutOfRange,
    QuadratureFailure,
    ShapeMismatch,
)
from .measures import CGMY, Atomic, LevyMeasure, PowerLaw, Tabulated, gamma_drift, levy_symbol, tail_moments, validate
from .weights import LawReport, SplitKernel, WeightKernel, apply, assemble, sigma_hat, split, to_dense, verify_laws
from .nonlinear import Diffusion, Flux, Nonlinearity, NumericalFlux
from .initial import Bump, Cosine, Step, riemann, square_wave
from .scheme import (
    FixedPoint,
    GridFunction,
    Problem,
    SchemeConfig,
    Trajectory,
    explicit_step,
    imex_step,
    implicit_step,
    max_dt,
    project_initial,
    run,
)
from .diagnostics import (
    EntropyProbe,
    InvariantReport,
    check_entropy,
    check_kato,
    check_pair,
    check_trajectory,
    norms,
    time_modulus,
)
from .reference import dense_operator_oracle, fine_grid_reference, spectral_solution
from .harness import ErrorTable, RateRule, convergence_study, kuznetsov_bound, minimise_bound, theoretical_rate
from .config import load_config, parse_config
