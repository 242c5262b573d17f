"""Dirichlet max-stable family.

The spectral measure is the law of (Y(alpha_i)/alpha_i)_i for independent
Gamma(alpha_i, 1) variables, normalized to the simplex. Weights reduce to a
one-dimensional integral against products of Gamma distribution functions.
"""

import numpy as np
from scipy.special import gammaln, logsumexp

from ..numerics import gamma_cdf, integrate_semi_infinite, log_integrate_semi_infinite


class DirichletParams:
    """Shape vector alpha with all entries positive."""

    __slots__ = ("alpha",)
    family = "dirichlet"

    def __init__(self, alpha):
        alpha = np.atleast_1d(np.asarray(alpha, dtype=float))
        if alpha.ndim != 1 or alpha.size == 0:
            raise ValueError("alpha must be a nonempty vector")
        if not np.all(np.isfinite(alpha)) or np.any(alpha <= 0):
            raise ValueError("alpha entries must be positive and finite")
        self.alpha = alpha

    @property
    def k(self):
        return self.alpha.size


def _log_kernel_integral(a_in, z_in, a_out, z_out):
    """log of I = int_0^inf u^B exp(-u A) prod_out F_{a}(a z u) du,

    where A = sum_in a*z and B = sum_in a. This is the radial integral of the
    spectral intensity after the substitution u = 1/r. With an empty
    complement the integral is Gamma(B+1) / A^(B+1).
    """
    A = float(np.sum(a_in * z_in))
    B = float(np.sum(a_in))
    if a_out.size == 0:
        return gammaln(B + 1.0) - (B + 1.0) * np.log(A)
    az = a_out * z_out

    def log_f(u):
        u_arr = np.atleast_1d(np.asarray(u, dtype=float))
        with np.errstate(divide="ignore"):
            lcdf = np.sum(np.log(gamma_cdf(u_arr[:, None] * az[None, :], a_out)), axis=1)
            out = B * np.log(u_arr) - u_arr * A + lcdf
        return out[0] if np.ndim(u) == 0 else out

    log_I, _ = log_integrate_semi_infinite(log_f, tol=1e-10)
    return log_I


def log_weight(block, z, alpha):
    """log omega(block, z) for the Dirichlet family."""
    z = np.asarray(z, dtype=float)
    alpha = np.asarray(alpha, dtype=float)
    mask = np.zeros(z.size, dtype=bool)
    mask[np.asarray(block, dtype=int) - 1] = True
    a_in, z_in = alpha[mask], z[mask]
    a_out, z_out = alpha[~mask], z[~mask]
    core = float(np.sum(a_in * np.log(a_in) + (a_in - 1.0) * np.log(z_in) - gammaln(a_in)))
    return core + _log_kernel_integral(a_in, z_in, a_out, z_out)


def exponent_V(z, alpha):
    """V(z) as the Euler sum of singleton weights, V = sum_p z_p omega({p}, z).

    No closed form exists; each term reuses the weight quadrature kernel.
    """
    z = np.asarray(z, dtype=float)
    terms = [np.log(z[p]) + log_weight((p + 1,), z, alpha) for p in range(z.size)]
    return float(np.exp(logsumexp(terms)))


def extremal_coefficient(a1, a2):
    """tau(a1, a2) = E[Y(a1)/a1 v Y(a2)/a2] via the survival-function integral
    int_0^inf 1 - F_{a1}(a1 t) F_{a2}(a2 t) dt. Strictly decreasing in both
    shape arguments."""

    def sf(t):
        return 1.0 - gamma_cdf(a1 * t, a1) * gamma_cdf(a2 * t, a2)

    value, _ = integrate_semi_infinite(sf, tol=1e-10)
    return float(value)
