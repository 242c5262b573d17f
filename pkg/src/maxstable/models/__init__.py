"""Max-stable dependence families, GEV margins, and the joint likelihood."""

from . import dirichlet, extremal_t, husler_reiss, logistic
from .base import (
    GUMBEL_XI,
    GevMargin,
    ModelSpec,
    OutOfSupportError,
    exponent_V,
    extremal_t_from_sites,
    frechet_to_gev,
    gev_to_frechet,
    husler_reiss_from_sites,
    joint_log_likelihood,
    log_density,
    log_joint_frechet,
    log_weight,
    pairwise_extremal_coefficient,
    restrict,
    weight_dirichlet,
    weight_extremal_t,
    weight_husler_reiss,
    weight_logistic,
)
from .dirichlet import DirichletParams
from .extremal_t import ExtremalTParams
from .husler_reiss import HuslerReissParams
from .logistic import LogisticParams

__all__ = [
    "GUMBEL_XI",
    "GevMargin",
    "ModelSpec",
    "OutOfSupportError",
    "DirichletParams",
    "ExtremalTParams",
    "HuslerReissParams",
    "LogisticParams",
    "dirichlet",
    "extremal_t",
    "exponent_V",
    "extremal_t_from_sites",
    "frechet_to_gev",
    "gev_to_frechet",
    "husler_reiss",
    "husler_reiss_from_sites",
    "joint_log_likelihood",
    "log_density",
    "log_joint_frechet",
    "log_weight",
    "logistic",
    "pairwise_extremal_coefficient",
    "restrict",
    "weight_dirichlet",
    "weight_extremal_t",
    "weight_husler_reiss",
    "weight_logistic",
]
