"""Symmetric logistic max-stable family.

V(z) = (z_1^{-1/theta} + ... + z_k^{-1/theta})^theta with theta in (0,1);
theta -> 1 is independence, theta -> 0 complete dependence. All weights are
evaluated in log space.
"""

import numpy as np
from scipy.special import gammaln, logsumexp


class LogisticParams:
    """Dependence parameter theta in the open interval (0,1)."""

    __slots__ = ("theta",)
    family = "logistic"

    def __init__(self, theta):
        theta = float(theta)
        if not 0.0 < theta < 1.0:
            raise ValueError(f"theta must lie in (0,1), got {theta}")
        self.theta = theta

    @property
    def k(self):
        return None  # any dimension


def log_S(z, theta):
    """log of S = sum_i z_i^{-1/theta} over all components."""
    return float(logsumexp(-np.log(z) / theta))


def exponent_V(z, theta):
    z = np.asarray(z, dtype=float)
    return float(np.exp(theta * log_S(z, theta)))


def log_weight(block, z, theta):
    """log omega(block, z): minus the partial derivative of V over the block,
    with the radial part integrated out."""
    z = np.asarray(z, dtype=float)
    idx = np.asarray(block, dtype=int) - 1
    n = idx.size
    lS = log_S(z, theta)
    return float(
        (1.0 - n) * np.log(theta)
        + gammaln(n - theta)
        - gammaln(1.0 - theta)
        + (theta - n) * lS
        - (1.0 + 1.0 / theta) * np.sum(np.log(z[idx]))
    )


def log_simplified_weight(size, theta, lS):
    """log of the reduced weight theta * Gamma(size-theta)/Gamma(1-theta) * S^theta.

    Differs from omega by a factor that is constant across the blocks of a
    partition of fixed z, so ratios of products over blocks are unchanged;
    this is the form the partition sampler uses.
    """
    return (
        np.log(theta)
        + gammaln(size - theta)
        - gammaln(1.0 - theta)
        + theta * lS
    )


def pairwise_log_density(z1, z2, theta):
    """Bivariate log density on the Frechet scale, vectorized over observations."""
    lz1, lz2 = np.log(z1), np.log(z2)
    lS = np.logaddexp(-lz1 / theta, -lz2 / theta)
    Vt = np.exp(theta * lS)
    # f = exp(-V) (z1 z2)^{-1-1/theta} S^{theta-2} (S^theta + (1-theta)/theta)
    return (
        -Vt
        + (theta - 2.0) * lS
        - (1.0 + 1.0 / theta) * (lz1 + lz2)
        + np.log(Vt + (1.0 - theta) / theta)
    )


def extremal_coefficient(theta):
    return float(2.0 ** theta)
