"""Model layer tying dependence families to GEV margins.

A ModelSpec bundles one of the four dependence families with per-component
GEV margins (defaulting to unit Frechet, which makes the margin map the
identity). All likelihood math runs in log space; the weight_* functions are
thin positive-real wrappers kept for formula-level checks.
"""

import numpy as np
from scipy.special import logsumexp

from ..numerics import QmcConfig
from ..partitions import enumerate_all
from . import dirichlet, extremal_t, husler_reiss, logistic
from .dirichlet import DirichletParams
from .extremal_t import ExtremalTParams
from .husler_reiss import HuslerReissParams
from .logistic import LogisticParams

GUMBEL_XI = 1e-8  # |xi| below this is treated as the Gumbel limit

_PARAM_TYPES = {
    "logistic": LogisticParams,
    "dirichlet": DirichletParams,
    "extremal_t": ExtremalTParams,
    "husler_reiss": HuslerReissParams,
}


class OutOfSupportError(ValueError):
    """An observation falls outside the support of its GEV margin."""


class GevMargin:
    """Location mu, scale sigma > 0, shape xi. The default (1, 1, 1) is the
    unit Frechet distribution, for which the margin transform is the identity."""

    __slots__ = ("mu", "sigma", "xi")

    def __init__(self, mu=1.0, sigma=1.0, xi=1.0):
        sigma = float(sigma)
        if not sigma > 0:
            raise ValueError(f"sigma must be positive, got {sigma}")
        self.mu = float(mu)
        self.sigma = sigma
        self.xi = float(xi)

    def astuple(self):
        return (self.mu, self.sigma, self.xi)

    def __repr__(self):
        return f"GevMargin(mu={self.mu}, sigma={self.sigma}, xi={self.xi})"

    def __eq__(self, other):
        return isinstance(other, GevMargin) and self.astuple() == other.astuple()


def gev_to_frechet(x, margins):
    """Map GEV observations to the unit Frechet scale.

    x has shape (..., k); margins is a length-k sequence of GevMargin.
    Returns (u, log_jacobian) with log_jacobian summing the per-coordinate
    log-derivatives -log(sigma_i) + (1 - xi_i) log u_i over the last axis.
    Raises OutOfSupportError naming the first offending component.
    """
    x = np.asarray(x, dtype=float)
    mu = np.array([m.mu for m in margins])
    sigma = np.array([m.sigma for m in margins])
    xi = np.array([m.xi for m in margins])
    if x.shape[-1] != mu.size:
        raise ValueError(f"last axis of x must have length {mu.size}")
    s = (x - mu) / sigma
    gumbel = np.abs(xi) < GUMBEL_XI
    t = 1.0 + xi * s
    bad = ~gumbel & (t <= 0.0)
    if np.any(bad):
        comp = int(np.argmax(np.any(bad.reshape(-1, mu.size), axis=0))) + 1
        raise OutOfSupportError(
            f"component {comp}: 1 + xi (x - mu) / sigma is not positive"
        )
    logu = np.where(gumbel, s, np.log(np.where(gumbel, 1.0, t)) / np.where(gumbel, 1.0, xi))
    with np.errstate(over="ignore"):
        u = np.exp(logu)
    log_jac = np.sum(-np.log(sigma) + (1.0 - xi) * logu, axis=-1)
    return u, log_jac


def frechet_to_gev(u, margins):
    """Inverse margin map; u has shape (..., k) and is positive."""
    u = np.asarray(u, dtype=float)
    mu = np.array([m.mu for m in margins])
    sigma = np.array([m.sigma for m in margins])
    xi = np.array([m.xi for m in margins])
    if u.shape[-1] != mu.size:
        raise ValueError(f"last axis of u must have length {mu.size}")
    if np.any(u <= 0):
        raise ValueError("u must be positive")
    logu = np.log(u)
    gumbel = np.abs(xi) < GUMBEL_XI
    with np.errstate(over="ignore"):
        x = np.where(
            gumbel,
            mu + sigma * logu,
            mu + sigma * np.expm1(np.where(gumbel, 1.0, xi) * logu) / np.where(gumbel, 1.0, xi),
        )
    return x


class ModelSpec:
    """One dependence family plus margins (plus optional spatial generators).

    Immutable by convention; all evaluations are pure functions of the spec.
    qmc controls the lattice-rule CDF evaluations of the Husler-Reiss and
    extremal-t families (None means library defaults).
    """

    __slots__ = ("params", "k", "margins", "qmc", "sites", "site_params")

    def __init__(self, params, k=None, margins=None, qmc=None, sites=None, site_params=None):
        if type(params).__name__ not in {t.__name__ for t in _PARAM_TYPES.values()}:
            raise TypeError(f"unknown parameter type {type(params).__name__}")
        pk = params.k
        if pk is None and k is None:
            raise ValueError("k is required for the logistic family")
        if pk is not None and k is not None and pk != k:
            raise ValueError(f"k={k} inconsistent with parameters of dimension {pk}")
        self.params = params
        self.k = int(pk if pk is not None else k)
        if self.k < 1:
            raise ValueError("k must be at least 1")
        if margins is None:
            margins = [GevMargin() for _ in range(self.k)]
        margins = tuple(margins)
        if len(margins) != self.k or not all(isinstance(m, GevMargin) for m in margins):
            raise ValueError(f"margins must be {self.k} GevMargin instances")
        self.margins = margins
        if qmc is not None and not isinstance(qmc, QmcConfig):
            raise TypeError("qmc must be a QmcConfig or None")
        self.qmc = qmc
        if sites is not None:
            sites = np.atleast_2d(np.asarray(sites, dtype=float))
            if sites.shape[0] != self.k:
                raise ValueError("sites must have one row per component")
        self.sites = sites
        self.site_params = dict(site_params) if site_params is not None else None

    @property
    def family(self):
        return self.params.family

    def replace(self, params=None, margins=None, qmc=None):
        """New spec with some parts swapped; dimensions are revalidated."""
        return ModelSpec(
            params if params is not None else self.params,
            k=self.k,
            margins=margins if margins is not None else self.margins,
            qmc=qmc if qmc is not None else self.qmc,
            sites=self.sites,
            site_params=self.site_params,
        )

    def __repr__(self):
        return f"ModelSpec({self.family}, k={self.k})"

    def to_dict(self):
        p = self.params
        if self.family == "logistic":
            pd = {"theta": p.theta}
        elif self.family == "dirichlet":
            pd = {"alpha": p.alpha.tolist()}
        elif self.family == "extremal_t":
            pd = {"sigma": p.sigma.mat.tolist(), "nu": p.nu, "nu_fixed": p.nu_fixed}
        else:
            pd = {"lambda_sq": p.lambda_sq.tolist()}
        return {
            "family": self.family,
            "k": self.k,
            "params": pd,
            "margins": [m.astuple() for m in self.margins],
            "qmc": self.qmc.to_dict() if self.qmc is not None else None,
            "sites": self.sites.tolist() if self.sites is not None else None,
            "site_params": self.site_params,
        }

    @classmethod
    def from_dict(cls, d):
        fam = d["family"]
        pd = d["params"]
        if fam == "logistic":
            params = LogisticParams(pd["theta"])
        elif fam == "dirichlet":
            params = DirichletParams(pd["alpha"])
        elif fam == "extremal_t":
            params = ExtremalTParams(
                np.asarray(pd["sigma"], dtype=float), pd["nu"], pd.get("nu_fixed", True)
            )
        elif fam == "husler_reiss":
            params = HuslerReissParams(np.asarray(pd["lambda_sq"], dtype=float))
        else:
            raise ValueError(f"unknown family {fam!r}")
        margins = d.get("margins")
        if margins is not None:
            margins = [GevMargin(*m) for m in margins]
        qmc = d.get("qmc")
        if qmc is not None:
            qmc = QmcConfig.from_dict(qmc)
        return cls(
            params,
            k=d.get("k"),
            margins=margins,
            qmc=qmc,
            sites=d.get("sites"),
            site_params=d.get("site_params"),
        )


def _check_z(spec, z):
    z = np.asarray(z, dtype=float)
    if z.shape != (spec.k,):
        raise ValueError(f"z must have shape ({spec.k},), got {z.shape}")
    if np.any(np.isnan(z)) or np.any(z <= 0):
        raise ValueError("z must be positive componentwise")
    return z


def _check_block(spec, block):
    b = tuple(int(i) for i in block)
    if not b or len(set(b)) != len(b) or any(i < 1 or i > spec.k for i in b):
        raise ValueError(f"block must be a nonempty subset of 1..{spec.k}")
    return b


def restrict(spec, indices):
    """Marginal model for a subset of components (1-based, strictly increasing)."""
    idx = tuple(int(i) for i in indices)
    if not idx or any(i < 1 or i > spec.k for i in idx) or list(idx) != sorted(set(idx)):
        raise ValueError(f"indices must be a strictly increasing subset of 1..{spec.k}")
    i0 = np.asarray(idx, dtype=int) - 1
    p = spec.params
    if spec.family == "logistic":
        params = LogisticParams(p.theta)
    elif spec.family == "dirichlet":
        params = DirichletParams(p.alpha[i0])
    elif spec.family == "extremal_t":
        params = ExtremalTParams(p.sigma.mat[np.ix_(i0, i0)], p.nu, p.nu_fixed)
    else:
        params = HuslerReissParams(p.lambda_sq[np.ix_(i0, i0)])
    return ModelSpec(
        params,
        k=len(idx),
        margins=[spec.margins[j] for j in i0],
        qmc=spec.qmc,
        sites=spec.sites[i0] if spec.sites is not None else None,
        site_params=spec.site_params,
    )


def exponent_V(spec, z):
    """V(z) on the Frechet scale. Infinite coordinates are marginalized out
    exactly (the exponent measure of a subvector is the restriction)."""
    z = _check_z(spec, z)
    if np.any(np.isinf(z)):
        finite = np.where(np.isfinite(z))[0]
        if finite.size == 0:
            raise ValueError("at least one coordinate must be finite")
        sub = restrict(spec, tuple(finite + 1))
        return exponent_V(sub, z[finite])
    p = spec.params
    if spec.family == "logistic":
        return logistic.exponent_V(z, p.theta)
    if spec.family == "dirichlet":
        return dirichlet.exponent_V(z, p.alpha)
    if spec.family == "extremal_t":
        return extremal_t.exponent_V(z, p.sigma.mat, p.nu, spec.qmc)
    return husler_reiss.exponent_V(z, p.lambda_sq, spec.qmc)


def log_weight(spec, block, z):
    """log omega(block, z) on the Frechet scale."""
    z = _check_z(spec, z)
    block = _check_block(spec, block)
    p = spec.params
    if spec.family == "logistic":
        return logistic.log_weight(block, z, p.theta)
    if spec.family == "dirichlet":
        return dirichlet.log_weight(block, z, p.alpha)
    if spec.family == "extremal_t":
        return extremal_t.log_weight(block, z, p.sigma.mat, p.nu, spec.qmc)
    return husler_reiss.log_weight(block, z, p.lambda_sq, spec.qmc)


def weight_logistic(params, block, z):
    return float(np.exp(logistic.log_weight(block, np.asarray(z, dtype=float), params.theta)))


def weight_dirichlet(params, block, z):
    return float(np.exp(dirichlet.log_weight(block, np.asarray(z, dtype=float), params.alpha)))


def weight_extremal_t(params, block, z, qmc=None):
    return float(
        np.exp(extremal_t.log_weight(block, np.asarray(z, dtype=float), params.sigma.mat, params.nu, qmc))
    )


def weight_husler_reiss(params, block, z, qmc=None):
    return float(
        np.exp(husler_reiss.log_weight(block, np.asarray(z, dtype=float), params.lambda_sq, qmc))
    )


def log_joint_frechet(spec, u, tau):
    """log of exp(-V(u)) prod_j omega(tau_j, u) for Frechet-scale u."""
    if tau.ground != tuple(range(1, spec.k + 1)):
        raise ValueError(f"partition must cover 1..{spec.k}")
    out = -exponent_V(spec, u)
    for b in tau.blocks:
        out += log_weight(spec, b, u)
    return float(out)


def joint_log_likelihood(spec, x, tau):
    """log L(x, tau): joint density of one observation and one partition,
    margin Jacobian included."""
    u, ljac = gev_to_frechet(np.asarray(x, dtype=float), spec.margins)
    return log_joint_frechet(spec, u, tau) + float(ljac)


def log_density(spec, x):
    """Full log density of one observation: the sum of L(x, tau) over all
    partitions of 1..k. Enumeration-bounded, so only for small k; the samplers
    never call this."""
    u, ljac = gev_to_frechet(np.asarray(x, dtype=float), spec.margins)
    u = _check_z(spec, u)
    V = exponent_V(spec, u)
    cache = {}

    def lw(b):
        if b not in cache:
            cache[b] = log_weight(spec, b, u)
        return cache[b]

    terms = [sum(lw(b) for b in tau.blocks) for tau in enumerate_all(spec.k)]
    return float(-V + logsumexp(np.asarray(terms)) + ljac)


def pairwise_extremal_coefficient(spec, i1, i2):
    """tau_{i1,i2} in [1,2]: the exponent function of the (i1, i2) margin at (1,1).

    Closed forms for logistic, Husler-Reiss and extremal-t; one-dimensional
    quadrature of the Gamma survival representation for Dirichlet.
    """
    if not (1 <= i1 <= spec.k and 1 <= i2 <= spec.k) or i1 == i2:
        raise ValueError("i1, i2 must be distinct indices in 1..k")
    p = spec.params
    if spec.family == "logistic":
        return logistic.extremal_coefficient(p.theta)
    if spec.family == "dirichlet":
        return dirichlet.extremal_coefficient(p.alpha[i1 - 1], p.alpha[i2 - 1])
    if spec.family == "extremal_t":
        return extremal_t.extremal_coefficient(p.sigma.mat[i1 - 1, i2 - 1], p.nu)
    return husler_reiss.extremal_coefficient(p.lambda_sq[i1 - 1, i2 - 1])


def _site_distances(sites):
    sites = np.atleast_2d(np.asarray(sites, dtype=float))
    d = sites[:, None, :] - sites[None, :, :]
    return sites, np.sqrt(np.sum(d * d, axis=-1))


def husler_reiss_from_sites(sites, s, alpha, margins=None, qmc=None):
    """Husler-Reiss spec from site coordinates with fractional variogram
    gamma(h) = ||h||^alpha / s, alpha in (0,2); lambda_sq = gamma / 4."""
    if not 0.0 < alpha < 2.0:
        raise ValueError("alpha must lie in (0,2)")
    if s <= 0:
        raise ValueError("s must be positive")
    sites, h = _site_distances(sites)
    lam2 = h ** alpha / (4.0 * s)
    return ModelSpec(
        HuslerReissParams(lam2),
        margins=margins,
        qmc=qmc,
        sites=sites,
        site_params={"s": float(s), "alpha": float(alpha)},
    )


def extremal_t_from_sites(sites, s, alpha, nu, nu_fixed=True, margins=None, qmc=None):
    """Extremal-t spec from site coordinates with powered-exponential
    correlation rho(h) = exp(-||h||^alpha / s), alpha in (0,2]."""
    if not 0.0 < alpha <= 2.0:
        raise ValueError("alpha must lie in (0,2]")
    if s <= 0:
        raise ValueError("s must be positive")
    sites, h = _site_distances(sites)
    rho = np.exp(-(h ** alpha) / s)
    return ModelSpec(
        ExtremalTParams(rho, nu, nu_fixed),
        margins=margins,
        qmc=qmc,
        sites=sites,
        site_params={"s": float(s), "alpha": float(alpha)},
    )
