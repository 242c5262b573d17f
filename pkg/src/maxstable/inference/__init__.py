"""Bayesian and frequentist inference for max-stable models."""

from .bayes_factor import bayes_factor_trend
from .estimators import (
    EstimationError,
    FitResult,
    extremal_coeff_test,
    independence_mle,
    pairwise_mle,
    stephenson_tawn_mle,
)
from .mcmc import (
    ChainState,
    McmcConfig,
    McmcError,
    gibbs_partition_step,
    mh_parameter_step,
    run_chain,
    state_log_likelihood,
)
from .parameterize import FreeParam, Parameterization, make_parameterization
from .priors import (
    IDENTITY_WALK,
    LOG_WALK,
    LOGIT_WALK,
    REFLECT_WALK,
    BetaPrior,
    IdentityWalk,
    LogitWalk,
    LogWalk,
    NormalPrior,
    ReflectWalk,
    SpikeSlabPrior,
    SpikeSlabWalk,
    UniformPrior,
)
from .trace import Trace, autocorrelation, batch_means_se, posterior_summary

__all__ = [
    "BetaPrior",
    "ChainState",
    "EstimationError",
    "FitResult",
    "FreeParam",
    "IDENTITY_WALK",
    "IdentityWalk",
    "LOG_WALK",
    "LOGIT_WALK",
    "LogWalk",
    "LogitWalk",
    "McmcConfig",
    "McmcError",
    "NormalPrior",
    "Parameterization",
    "REFLECT_WALK",
    "ReflectWalk",
    "SpikeSlabPrior",
    "SpikeSlabWalk",
    "Trace",
    "UniformPrior",
    "autocorrelation",
    "batch_means_se",
    "bayes_factor_trend",
    "extremal_coeff_test",
    "gibbs_partition_step",
    "independence_mle",
    "make_parameterization",
    "mh_parameter_step",
    "pairwise_mle",
    "posterior_summary",
    "run_chain",
    "state_log_likelihood",
    "stephenson_tawn_mle",
]
