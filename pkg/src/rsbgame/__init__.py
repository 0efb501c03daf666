"""Finite-horizon risk-sensitive benchmarked asset management as a zero-sum game.

Solve for the quadratic value function and saddle feedback strategies,
certify them against the HJBI equation, and cross-check by Monte Carlo.
"""

from .model import (
    CorrelationWarning,
    DimensionMismatch,
    GameSpec,
    MarketModel,
    NonpositiveInitialState,
    RankDeficientSigma,
    ScenarioError,
    ThetaOutOfRange,
    TimeScalar,
    ValidationReport,
    excess_drift,
    g_value,
    validate,
)
from .saddle import (
    ControlPair,
    FeedbackStrategy,
    PerturbedStrategy,
    SingularSaddleSystem,
    best_response_gamma,
    best_response_h,
    feedback_strategy,
    reduced_hamiltonian,
    solve_inner_saddle,
)
from .valueode import (
    NonFiniteCoefficients,
    TimeOutOfRange,
    ValueCoefficients,
    paper_coefficients_compare,
    solve_backward,
    stage_rhs,
    value_and_gradient,
)
from .verify import GridSpec, VerificationReport, apply_generator, fd_consistency_check, isaacs_sign_check
from .mcsim import (
    Estimate,
    PathBundle,
    doleans_mean_check,
    estimate_I_changed_measure,
    estimate_J,
    richardson_J,
    saddle_tournament,
    simulate,
)
from .oracle import (
    GaussianMoments,
    NoConvergence,
    brute_saddle,
    gaussian_J_constant_controls,
    gaussian_moments_constant_controls,
)
from .scenario import Scenario, bundled_scenario, load_scenario, parse_scenario

__version__ = "0.1.0"
