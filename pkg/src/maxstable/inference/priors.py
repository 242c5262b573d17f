"""Priors and random-walk proposal transforms for the MH-within-Gibbs chain.

Priors are densities on the natural parameter scale (the spike-and-slab prior
is a density with respect to point-mass-at-zero plus Lebesgue). Walks propose
on a transformed scale; each returns the proposal together with the log
proposal-density correction so the acceptance ratio can stay on the natural
scale. All priors here are proper with finite mean, which the posterior-median
theory requires.
"""

import numpy as np
from scipy.special import betaln

_LOG_SQRT_2PI = 0.5 * np.log(2.0 * np.pi)


class UniformPrior:
    __slots__ = ("low", "high")

    def __init__(self, low, high):
        if not low < high:
            raise ValueError("need low < high")
        self.low = float(low)
        self.high = float(high)

    def log_density(self, x):
        if self.low <= x <= self.high:
            return -np.log(self.high - self.low)
        return -np.inf

    def __repr__(self):
        return f"UniformPrior({self.low}, {self.high})"


class NormalPrior:
    """Normal on x, or on log x when on_log_scale (a lognormal density in x)."""

    __slots__ = ("mean", "sd", "on_log_scale")

    def __init__(self, mean, sd, on_log_scale=False):
        if sd <= 0:
            raise ValueError("sd must be positive")
        self.mean = float(mean)
        self.sd = float(sd)
        self.on_log_scale = bool(on_log_scale)

    def log_density(self, x):
        if self.on_log_scale:
            if x <= 0:
                return -np.inf
            t = (np.log(x) - self.mean) / self.sd
            return -0.5 * t * t - np.log(self.sd) - _LOG_SQRT_2PI - np.log(x)
        t = (x - self.mean) / self.sd
        return -0.5 * t * t - np.log(self.sd) - _LOG_SQRT_2PI

    def __repr__(self):
        return f"NormalPrior({self.mean}, {self.sd}, on_log_scale={self.on_log_scale})"


class BetaPrior:
    __slots__ = ("a", "b")

    def __init__(self, a, b):
        if a <= 0 or b <= 0:
            raise ValueError("beta parameters must be positive")
        self.a = float(a)
        self.b = float(b)

    def log_density(self, x):
        if not 0.0 < x < 1.0:
            return -np.inf
        return (
            (self.a - 1.0) * np.log(x)
            + (self.b - 1.0) * np.log1p(-x)
            - betaln(self.a, self.b)
        )

    def __repr__(self):
        return f"BetaPrior({self.a}, {self.b})"


class SpikeSlabPrior:
    """p_zero point mass at 0 plus (1 - p_zero) times a centered normal slab.

    log_density is taken with respect to (delta_0 + Lebesgue), so the atom and
    the continuous part are directly comparable in MH ratios.
    """

    __slots__ = ("p_zero", "slab_sd")

    def __init__(self, p_zero=0.5, slab_sd=0.5):
        if not 0.0 < p_zero < 1.0:
            raise ValueError("p_zero must be in (0, 1)")
        if slab_sd <= 0:
            raise ValueError("slab_sd must be positive")
        self.p_zero = float(p_zero)
        self.slab_sd = float(slab_sd)

    def log_density(self, x):
        if x == 0.0:
            return np.log(self.p_zero)
        t = x / self.slab_sd
        return (
            np.log1p(-self.p_zero)
            - 0.5 * t * t
            - np.log(self.slab_sd)
            - _LOG_SQRT_2PI
        )

    def __repr__(self):
        return f"SpikeSlabPrior({self.p_zero}, {self.slab_sd})"


class IdentityWalk:
    adapts = True  # scale is Robbins-Monro tuned during burn-in

    def propose(self, x, scale, rng):
        return x + scale * rng.standard_normal(), 0.0


class ReflectWalk:
    """Gaussian step reflected at 0; the kernel is symmetric, no correction."""

    adapts = True

    def propose(self, x, scale, rng):
        return abs(x + scale * rng.standard_normal()), 0.0


class LogWalk:
    adapts = True

    def propose(self, x, scale, rng):
        x_star = x * np.exp(scale * rng.standard_normal())
        return x_star, np.log(x_star) - np.log(x)


class LogitWalk:
    """Gaussian step on logit(x) for x in (0, 1)."""

    adapts = True

    def propose(self, x, scale, rng):
        eta = np.log(x) - np.log1p(-x) + scale * rng.standard_normal()
        x_star = 1.0 / (1.0 + np.exp(-eta))
        corr = (np.log(x_star) + np.log1p(-x_star)) - (np.log(x) + np.log1p(-x))
        return x_star, corr


class SpikeSlabWalk:
    """Mixture proposal p_jump * delta_0 + (1 - p_jump) * random walk.

    Densities are with respect to (delta_0 + Lebesgue), matching
    SpikeSlabPrior, so moves between the atom and the slab get the proper
    cross correction.

    Excluded from acceptance-rate adaptation: atom self-moves always accept,
    which would drag the tuned scale upward without bound. Setting the fixed
    scale equal to the slab sd makes the prior and proposal corrections
    cancel for atom-slab exchanges, leaving the bare likelihood ratio.
    """

    adapts = False

    __slots__ = ("p_jump",)

    def __init__(self, p_jump=0.5):
        if not 0.0 < p_jump < 1.0:
            raise ValueError("p_jump must be in (0, 1)")
        self.p_jump = float(p_jump)

    def _log_q(self, a, b, scale):
        if b == 0.0:
            return np.log(self.p_jump)
        t = (b - a) / scale
        return (
            np.log1p(-self.p_jump)
            - 0.5 * t * t
            - np.log(scale)
            - _LOG_SQRT_2PI
        )

    def propose(self, x, scale, rng):
        if rng.random() < self.p_jump:
            x_star = 0.0
        else:
            x_star = x + scale * rng.standard_normal()
        corr = self._log_q(x_star, x, scale) - self._log_q(x, x_star, scale)
        return x_star, corr


IDENTITY_WALK = IdentityWalk()
REFLECT_WALK = ReflectWalk()
LOG_WALK = LogWalk()
LOGIT_WALK = LogitWalk()
