"""Binary Markov chains with duration-dependent exit probabilities for dry/wet spell modelling."""
from __future__ import annotations

__version__ = "0.1.0"

from .core import (
    ChainPath,
    DistributionExitProbs,
    Finiteness,
    TabulatedDistribution,
    TabulatedExitProbs,
    check_finiteness,
    distribution_from_exit_probs,
    exit_probs_from_distribution,
    renewal_view,
    simulate_chain,
    spells_from_path,
)
from .diagnostics import acf_bivariate, empirical_exit_probs, exit_curve, gof_test, model_exit_probs, qq_envelope
from .distributions import (
    Egpd1Params,
    GeometricParams,
    GeomMixParams,
    HdeGpdParams,
    egpd1_cdf,
    egpd1_mean,
    egpd1_survival,
    egpd1_tail_integral,
)
from .errors import (
    BmcdError,
    InsufficientDataError,
    InvalidParameterError,
    MeanUndefinedError,
    NonConvergedError,
    ParseError,
    SingularMatrixError,
)
from .estimation import FitResult, em_fit_geommix, estimate_f1, fit_geometric, fit_hdegpd, pwm_fit_egpd
from .risk import (
    RiskBound,
    asymptotic_reward_mc,
    mean_residual_geometric,
    mean_residual_hdegpd,
    mean_residual_tabulated,
    proportion_time_long_dry,
)
