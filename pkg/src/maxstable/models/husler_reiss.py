"""Husler-Reiss max-stable family.

Parameterized by the symmetric matrix lambda_sq of pairwise dependence
coefficients lambda^2_{ij} (a quarter of the variogram of the underlying
Gaussian vector). The exponent function is a sum of k Gaussian CDF terms and
the partition weights factor into a Gaussian density times a conditional
Gaussian CDF.
"""

import numpy as np
from scipy.linalg import cho_factor, cho_solve
from scipy.special import ndtr

from ..numerics import NonPositiveDefiniteError, mvn_cdf


def validate_lambda_sq(lam2):
    """Symmetry, zero diagonal, and strict conditional negative definiteness.

    Strictness (a' L a < 0 for every nonzero a with sum(a) = 0) is what makes
    every induced covariance Sigma^{(p)} positive definite; it is checked by a
    Cholesky factorization of -D L D' on the contrast basis
    D = [e_1 - e_k, ..., e_{k-1} - e_k]'.
    """
    lam2 = np.asarray(lam2, dtype=float)
    k = lam2.shape[0]
    if lam2.ndim != 2 or lam2.shape != (k, k):
        raise ValueError("lambda_sq must be a square matrix")
    if not np.allclose(lam2, lam2.T, rtol=1e-10, atol=1e-12):
        raise ValueError("lambda_sq must be symmetric")
    if np.any(np.abs(np.diag(lam2)) > 1e-12):
        raise ValueError("lambda_sq must have zero diagonal")
    if np.any(lam2 < 0) or not np.all(np.isfinite(lam2)):
        raise ValueError("lambda_sq entries must be nonnegative and finite")
    if k >= 2:
        D = np.hstack([np.eye(k - 1), -np.ones((k - 1, 1))])
        eig = np.linalg.eigvalsh(-D @ lam2 @ D.T)
        # relative floor: boundary cases land at 0 up to rounding, and a raw
        # Cholesky can step over them
        if eig[0] <= 1e-10 * max(1.0, eig[-1]):
            raise NonPositiveDefiniteError(
                "lambda_sq is not strictly conditionally negative definite"
            )
    return lam2


class HuslerReissParams:
    """Matrix of pairwise coefficients lambda^2_{ij}, strictly conditionally
    negative definite with zero diagonal."""

    __slots__ = ("lambda_sq",)
    family = "husler_reiss"

    def __init__(self, lambda_sq):
        self.lambda_sq = validate_lambda_sq(lambda_sq)

    @property
    def k(self):
        return self.lambda_sq.shape[0]


def _sigma_p(lam2, p):
    """Indices i != p and the covariance with entries
    2 (lambda^2_{pi} + lambda^2_{pj} - lambda^2_{ij}); p is 0-based."""
    others = np.delete(np.arange(lam2.shape[0]), p)
    lp = lam2[p, others]
    return others, 2.0 * (lp[:, None] + lp[None, :] - lam2[np.ix_(others, others)])


def exponent_V(z, lam2, qmc=None):
    """V(z) = sum_p z_p^{-1} Phi_{k-1}(2 lambda^2_{p,-p} + log(z_{-p}/z_p); Sigma^{(p)})."""
    z = np.asarray(z, dtype=float)
    k = z.size
    if k == 1:
        return 1.0 / float(z[0])
    total = 0.0
    for p in range(k):
        others, Sp = _sigma_p(lam2, p)
        upper = 2.0 * lam2[p, others] + np.log(z[others] / z[p])
        prob, _ = mvn_cdf(upper, Sp, cfg=qmc)
        total += prob / z[p]
    return float(total)


def log_weight(block, z, lam2, qmc=None, anchor=None):
    """log omega(block, z) with anchor p = min(block) by default.

    The value is invariant to the anchor choice; the keyword exists so the
    invariance can be exercised directly.
    """
    z = np.asarray(z, dtype=float)
    block = sorted(int(i) for i in block)
    p = (block[0] if anchor is None else int(anchor)) - 1
    if p + 1 not in block:
        raise ValueError("anchor must belong to the block")
    tau = np.asarray([i - 1 for i in block if i - 1 != p], dtype=int)
    others, Sp = _sigma_p(lam2, p)
    pos = {j: i for i, j in enumerate(others)}
    it = np.asarray([pos[j] for j in tau], dtype=int)
    ic = np.asarray([pos[j] for j in others if j not in set(tau)], dtype=int)
    zs = np.log(z[others] / z[p]) + 2.0 * lam2[p, others]
    out = -2.0 * np.log(z[p]) - float(np.sum(np.log(z[tau])))
    w = None
    if it.size:
        cf = cho_factor(Sp[np.ix_(it, it)], lower=True)
        w = cho_solve(cf, zs[it])
        logdet = 2.0 * float(np.sum(np.log(np.diag(cf[0]))))
        out += -0.5 * (it.size * np.log(2.0 * np.pi) + logdet + float(zs[it] @ w))
    if ic.size:
        if it.size:
            Sct = Sp[np.ix_(ic, it)]
            mean = Sct @ w
            cond = Sp[np.ix_(ic, ic)] - Sct @ cho_solve(cf, Sct.T)
        else:
            mean = 0.0
            cond = Sp[np.ix_(ic, ic)]
        prob, _ = mvn_cdf(zs[ic] - mean, cond, cfg=qmc)
        with np.errstate(divide="ignore"):
            out += np.log(prob)
    return float(out)


def extremal_coefficient(lam2_12):
    return float(2.0 * ndtr(np.sqrt(lam2_12)))
