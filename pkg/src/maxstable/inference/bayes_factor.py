"""Spike-and-slab Bayes factor for a linear trend in the GEV shapes.

Margins are parameterized as xi_i = alpha + i beta with prior
0.5 delta_0 + 0.5 N(0, slab_sd^2) on beta, so the models {beta = 0} and
{beta != 0} have prior odds one and the Bayes factor B12 is the posterior
odds, estimated by the frequency of exact zeros in the beta trace.
"""

import numpy as np

from ..models import LogisticParams, ModelSpec
from .mcmc import McmcConfig, run_chain
from .parameterize import make_parameterization
from .trace import batch_means_se


def bayes_factor_trend(
    data,
    template=None,
    config=None,
    seed=0,
    theta_prior=None,
    slab_sd=0.5,
):
    """B12 for {no shape trend} against {trend} from one posterior chain.

    data holds observations under some max-stable dependence (template
    defaults to logistic) with GEV margins following the trend layout. When
    one of the two models never appears post burn-in the point estimate is
    replaced by a one-sided bound computed as if the unseen model had been
    hit once. Returns a dict with the estimate, MC error and the trace.
    """
    values = data.values if hasattr(data, "values") else data
    values = np.atleast_2d(np.asarray(values, dtype=float))
    k = values.shape[1]
    if template is None:
        template = ModelSpec(LogisticParams(0.5), k=k)
    cfg = config if config is not None else McmcConfig()
    par = make_parameterization(
        template, margins="trend", data=values, theta_prior=theta_prior, slab_sd=slab_sd
    )
    trace = run_chain(values, par, cfg, seed)
    beta = trace.post[:, par.names.index("xi_beta")]
    n_post = beta.size
    n_zero = int(np.count_nonzero(beta == 0.0))
    n_nonzero = n_post - n_zero
    out = {
        "p_zero": n_zero / n_post,
        "n_zero": n_zero,
        "n_nonzero": n_nonzero,
        "n_post": n_post,
        "b12": None,
        "mc_se": float("nan"),
        "trace": trace,
    }
    if n_zero == 0:
        out["upper_bound"] = 1.0 / n_nonzero
    elif n_nonzero == 0:
        out["lower_bound"] = float(n_zero)
    else:
        p = n_zero / n_post
        out["b12"] = n_zero / n_nonzero
        se_p = batch_means_se((beta == 0.0).astype(float))
        out["mc_se"] = se_p / (1.0 - p) ** 2
    return out
