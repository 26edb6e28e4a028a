"""Numerical laboratory for minimum-l2-norm interpolation in linear regression.

The package computes covariance rank functionals, samples sub-gaussian and
heavy-tailed random designs, solves the minimum-norm interpolation problem,
evaluates the theoretical risk-bound parameters, and runs seeded Monte Carlo
experiments that compare the two sides.
"""

from .bounds import (
    BoundConfig,
    BoundReport,
    InfeasibleBoundError,
    bound_report,
    compute_nu,
    compute_r_star,
    compute_rho,
    dm_bounds,
    find_k_star,
    operator_norm_bound,
    prediction_exclusion_threshold,
    probability_floor,
    s_min_lower_bound,
    select_working_k,
    width_proxies,
)
from .designs import (
    DesignSpec,
    SmallBallParams,
    check_paley_zygmund,
    compute_c0,
    coordinate_smallball_count,
    estimate_wsba,
    rng_stream,
    sample_design,
    sample_isotropic,
)
from .estimators import (
    MCEstimate,
    empirical_process_suprema,
    estimate_coordinate_smallball_prob,
    estimate_gaussian_width,
    estimate_smin_distribution,
    sample_localized_candidates,
)
from .harness import (
    AlphaStarSpec,
    ConfigError,
    ExperimentConfig,
    NoiseSpec,
    OutputPaths,
    TrialRecord,
    emit_outputs,
    preset_example_31,
    run_experiment,
    sweep,
)
from .interpolator import (
    InterpolationResult,
    RankDeficientDesignError,
    RegressionInstance,
    decomposition_check,
    empirical_excess_risk,
    estimation_error,
    exclusion_event_check,
    min_norm_interpolate,
    prediction_error,
)
from .spectra import (
    RankProfile,
    Spectrum,
    TruncationError,
    effective_rank_R,
    effective_rank_r,
    make_example_spectrum,
    rank_profile,
    stable_rank4,
    stable_rank_lower_bound_check,
)

__version__ = "0.1.0"
