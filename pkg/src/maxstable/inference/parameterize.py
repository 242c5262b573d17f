"""Free-parameter layout for MCMC and optimizers.

A Parameterization is a list of FreeParam (name, prior, proposal walk,
initial value) plus a builder mapping the natural-scale vector to a ModelSpec.
Dependence parameters come from the family of a template spec; marginal
parameters are optionally appended, either one common (mu, sigma, xi) triple
or the shape-trend layout xi_i = alpha + i beta.
"""

import numpy as np

from ..models import (
    DirichletParams,
    GevMargin,
    LogisticParams,
    ModelSpec,
    extremal_t_from_sites,
    husler_reiss_from_sites,
)
from .priors import (
    IDENTITY_WALK,
    LOG_WALK,
    LOGIT_WALK,
    REFLECT_WALK,
    NormalPrior,
    SpikeSlabPrior,
    SpikeSlabWalk,
    UniformPrior,
)


class FreeParam:
    """scale, when set, fixes the proposal scale for walks that opt out of
    acceptance-rate adaptation (None defers to the chain config)."""

    __slots__ = ("name", "prior", "walk", "init", "scale")

    def __init__(self, name, prior, walk, init, scale=None):
        self.name = name
        self.prior = prior
        self.walk = walk
        self.init = float(init)
        self.scale = None if scale is None else float(scale)

    def __repr__(self):
        return f"FreeParam({self.name}, init={self.init}, prior={self.prior!r})"


class Parameterization:
    """Free parameters plus the map from their values to a ModelSpec."""

    __slots__ = ("params", "build")

    def __init__(self, params, build):
        self.params = list(params)
        self.build = build

    @property
    def names(self):
        return [p.name for p in self.params]

    @property
    def inits(self):
        return np.array([p.init for p in self.params])

    def spec(self, x):
        return self.build(np.asarray(x, dtype=float))

    def log_prior(self, x):
        return sum(p.prior.log_density(v) for p, v in zip(self.params, x))


def _dependence_params(template, theta_prior=None):
    """Free dependence parameters for a template spec, by family."""
    fam = template.family
    if fam == "logistic":
        prior = theta_prior if theta_prior is not None else UniformPrior(0.0, 1.0)
        return [FreeParam("theta", prior, LOGIT_WALK, template.params.theta)]
    if fam == "dirichlet":
        alpha = template.params.alpha
        return [
            FreeParam(f"alpha_{i + 1}", UniformPrior(0.0, 50.0), REFLECT_WALK, a)
            for i, a in enumerate(alpha)
        ]
    if fam in ("husler_reiss", "extremal_t"):
        if template.site_params is None:
            raise ValueError(
                f"{fam} inference needs the (s, alpha) variogram "
                "parameterization; build the template from sites"
            )
        sp = template.site_params
        return [
            FreeParam("s", NormalPrior(0.0, 3.0, on_log_scale=True), LOG_WALK, sp["s"]),
            FreeParam("alpha", UniformPrior(0.0, 2.0), REFLECT_WALK, sp["alpha"]),
        ]
    raise ValueError(f"unknown family {fam}")


def _dependence_builder(template):
    fam = template.family

    def build(dep_values, margins):
        if fam == "logistic":
            return ModelSpec(
                LogisticParams(dep_values[0]),
                k=template.k,
                margins=margins,
                qmc=template.qmc,
            )
        if fam == "dirichlet":
            return ModelSpec(
                DirichletParams(dep_values),
                margins=margins,
                qmc=template.qmc,
            )
        if fam == "husler_reiss":
            return husler_reiss_from_sites(
                template.sites,
                dep_values[0],
                dep_values[1],
                margins=margins,
                qmc=template.qmc,
            )
        return extremal_t_from_sites(
            template.sites,
            dep_values[0],
            dep_values[1],
            template.params.nu,
            margins=margins,
            qmc=template.qmc,
        )

    return build


def make_parameterization(
    template,
    margins="fixed",
    data=None,
    theta_prior=None,
    slab_sd=0.5,
):
    """Parameterization for a template ModelSpec.

    margins: 'fixed' (template margins stay as they are), 'common' (one
    (mu, sigma, xi) triple shared by all components), or 'trend'
    (common mu and sigma, shapes xi_i = alpha + i beta with a spike-and-slab
    prior on beta). data, when given, informs the marginal initial values.
    """
    if margins not in ("fixed", "common", "trend"):
        raise ValueError(f"margins must be fixed, common or trend, got {margins!r}")
    k = template.k
    params = _dependence_params(template, theta_prior)
    n_dep = len(params)
    build_dep = _dependence_builder(template)

    if margins == "fixed":
        fixed = template.margins

        def build(x):
            return build_dep(x[:n_dep], fixed)

        return Parameterization(params, build)

    if data is not None:
        vals = np.asarray(data.values if hasattr(data, "values") else data)
        mu0 = float(np.median(vals))
        sigma0 = max(float(np.std(vals)) * 0.78, 1e-3)  # moment-style start
        xi0 = 0.1
    else:
        mu0, sigma0, xi0 = 1.0, 1.0, 0.1

    params.append(FreeParam("mu", NormalPrior(0.0, 100.0), IDENTITY_WALK, mu0))
    params.append(
        FreeParam("sigma", NormalPrior(0.0, 10.0, on_log_scale=True), LOG_WALK, sigma0)
    )

    if margins == "common":
        params.append(FreeParam("xi", NormalPrior(0.0, 10.0), IDENTITY_WALK, xi0))

        def build(x):
            mu, sigma, xi = x[n_dep], x[n_dep + 1], x[n_dep + 2]
            m = tuple(GevMargin(mu, sigma, xi) for _ in range(k))
            return build_dep(x[:n_dep], m)

        return Parameterization(params, build)

    params.append(FreeParam("xi_alpha", NormalPrior(0.0, 1.0), IDENTITY_WALK, xi0))
    params.append(
        FreeParam(
            "xi_beta",
            SpikeSlabPrior(0.5, slab_sd),
            SpikeSlabWalk(0.5),
            0.0,
            scale=slab_sd,
        )
    )

    def build(x):
        mu, sigma = x[n_dep], x[n_dep + 1]
        a, b = x[n_dep + 2], x[n_dep + 3]
        m = tuple(GevMargin(mu, sigma, a + (i + 1) * b) for i in range(k))
        return build_dep(x[:n_dep], m)

    return Parameterization(params, build)
