"""Extremal-t max-stable family.

Spectral representation c_nu * E[max(0, W_i)^nu / z_i] for a standardized
Gaussian vector W with correlation matrix sigma. Weights carry a Student CDF
factor of dimension k - |block| with degrees of freedom |block| + nu.
"""

import numpy as np
from scipy.linalg import cho_factor, cho_solve
from scipy.special import gammaln, logsumexp, stdtr

from ..numerics import mvt_cdf


class ExtremalTParams:
    """Correlation matrix sigma plus degrees of freedom nu.

    nu is held fixed during inference by default: (sigma, nu) jointly are not
    identifiable from pairwise dependence summaries.
    """

    __slots__ = ("sigma", "nu", "nu_fixed")
    family = "extremal_t"

    def __init__(self, sigma, nu, nu_fixed=True):
        from ..numerics import CovMatrix

        cov = sigma if isinstance(sigma, CovMatrix) else CovMatrix(sigma)
        if not cov.is_correlation():
            raise ValueError("sigma must be a correlation matrix (unit diagonal)")
        nu = float(nu)
        if nu <= 0:
            raise ValueError("nu must be positive")
        self.sigma = cov
        self.nu = nu
        self.nu_fixed = bool(nu_fixed)

    @property
    def k(self):
        return self.sigma.mat.shape[0]


def log_c_nu(nu):
    """log of the spectral normalizing constant sqrt(pi) 2^{-(nu-2)/2} / Gamma((nu+1)/2)."""
    return 0.5 * np.log(np.pi) - 0.5 * (nu - 2.0) * np.log(2.0) - gammaln(0.5 * (nu + 1.0))


def log_weight(block, z, sigma, nu, qmc=None):
    """log omega(block, z); sigma is the full k x k correlation matrix."""
    z = np.asarray(z, dtype=float)
    k = z.size
    idx = np.asarray(block, dtype=int) - 1
    comp = np.setdiff1d(np.arange(k), idx)
    m = idx.size
    zb = z[idx] ** (1.0 / nu)
    cf = cho_factor(sigma[np.ix_(idx, idx)], lower=True)
    w = cho_solve(cf, zb)
    Q = float(zb @ w)
    logdet = 2.0 * float(np.sum(np.log(np.diag(cf[0]))))
    out = (
        (1.0 - m) * np.log(nu)
        + 0.5 * (1.0 - m) * np.log(np.pi)
        - 0.5 * logdet
        + gammaln(0.5 * (nu + m))
        - gammaln(0.5 * (nu + 1.0))
        + (1.0 / nu - 1.0) * float(np.sum(np.log(z[idx])))
        - 0.5 * (nu + m) * np.log(Q)
    )
    if comp.size:
        Scb = sigma[np.ix_(comp, idx)]
        mu_cond = Scb @ w
        cond = sigma[np.ix_(comp, comp)] - Scb @ cho_solve(cf, Scb.T)
        scale = (Q / (m + nu)) * cond
        prob, _ = mvt_cdf(z[comp] ** (1.0 / nu) - mu_cond, scale, df=m + nu, cfg=qmc)
        with np.errstate(divide="ignore"):
            out += np.log(prob)
    return float(out)


def exponent_V(z, sigma, nu, qmc=None):
    """V(z) by Euler's identity: sum_p z_p omega({p}, z), each singleton weight
    being z_p^{-2} times a Student CDF of dimension k-1 with nu+1 dof."""
    z = np.asarray(z, dtype=float)
    terms = [np.log(z[p]) + log_weight((p + 1,), z, sigma, nu, qmc) for p in range(z.size)]
    return float(np.exp(logsumexp(terms)))


def extremal_coefficient(rho, nu):
    arg = np.sqrt((nu + 1.0) * (1.0 - rho) / (1.0 + rho))
    return float(2.0 * stdtr(nu + 1.0, arg))
