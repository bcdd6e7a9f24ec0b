"""Behavioral New Keynesian model toolkit.

Solves a three-equation behavioral model with cognitive discounting,
simulates it, estimates it by state-space maximum likelihood with
score-based identification-robust confidence sets, and estimates its two
structural equations by continuous-updating GMM with two-step
distortion-cutoff confidence sets.
"""

from .chi2mix import a_of_gamma, chi2mix_cdf, chi2mix_quantile, gamma_of_a
from .data import (
    InstrumentSpec,
    TimeSeriesPanel,
    TransformSpec,
    apply_transforms,
    build_instruments,
    load_panel,
    packaged_panel_path,
)
from .errors import (
    BehavnkError,
    ConfigError,
    DataError,
    DomainError,
    FilterError,
    IndeterminacyError,
    NoStableSolutionError,
    SingularSystemError,
)
from .gmm import (
    MomentBundle,
    MomentProblem,
    build_moment_problem,
    cugmm_objective,
    fit_cugmm,
    k_statistic,
    newey_west,
    residual_is,
    residual_nkpc,
    s_statistic,
)
from .likelihood import (
    LikelihoodProblem,
    MaximumLikelihoodEstimator,
    ScoreBundle,
    ScoreProjectionSet,
    kalman_loglik_terms,
    lm_test,
    restricted_loglik,
    score_bundle,
)
from .params import (
    PARAM_NAMES,
    ReducedParams,
    StructuralParams,
    derive_reduced,
    effective_eis,
    firm_attention,
    phillips_slope,
)
from .simulate import (
    ShockPath,
    SimulationPlan,
    build_demo_panel,
    simulate_observables,
    simulate_shocks,
    spawn_seeds,
)
from .solve import (
    IdentifiedQuantities,
    SolutionMatrix,
    StateSpaceSolution,
    identified_quantities,
    is_restricted_regime,
    population_autocov,
    solve_full_re,
    solve_restricted,
)
from .twostep import (
    DistortionCalibration,
    GridSpec,
    TwoStepConfidenceSet,
    TwoStepResult,
    grid_invert,
)

__version__ = "0.1.0"

__all__ = [
    "BehavnkError",
    "ConfigError",
    "DataError",
    "DistortionCalibration",
    "DomainError",
    "FilterError",
    "GridSpec",
    "IdentifiedQuantities",
    "IndeterminacyError",
    "InstrumentSpec",
    "LikelihoodProblem",
    "MaximumLikelihoodEstimator",
    "MomentBundle",
    "MomentProblem",
    "NoStableSolutionError",
    "PARAM_NAMES",
    "ReducedParams",
    "ScoreBundle",
    "ScoreProjectionSet",
    "ShockPath",
    "SimulationPlan",
    "SingularSystemError",
    "SolutionMatrix",
    "StateSpaceSolution",
    "StructuralParams",
    "TimeSeriesPanel",
    "TransformSpec",
    "TwoStepConfidenceSet",
    "TwoStepResult",
    "a_of_gamma",
    "apply_transforms",
    "build_demo_panel",
    "build_instruments",
    "build_moment_problem",
    "chi2mix_cdf",
    "chi2mix_quantile",
    "cugmm_objective",
    "derive_reduced",
    "effective_eis",
    "firm_attention",
    "fit_cugmm",
    "gamma_of_a",
    "identified_quantities",
    "is_restricted_regime",
    "k_statistic",
    "kalman_loglik_terms",
    "lm_test",
    "load_panel",
    "newey_west",
    "packaged_panel_path",
    "phillips_slope",
    "population_autocov",
    "residual_is",
    "residual_nkpc",
    "restricted_loglik",
    "s_statistic",
    "score_bundle",
    "simulate_observables",
    "simulate_shocks",
    "solve_full_re",
    "solve_restricted",
    "spawn_seeds",
]
