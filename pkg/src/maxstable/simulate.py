"""Samplers for max-stable vectors and max-domain-of-attraction block maxima.

Also home of the Dataset container and its CSV round-trip, since simulated
data is what gets written to disk and shared across fitting routines.
"""

import csv
import os

import numpy as np
from scipy.stats import kstest

from .models.base import (
    GevMargin,
    ModelSpec,
    frechet_to_gev,
    pairwise_extremal_coefficient,
)
from .models.husler_reiss import _sigma_p
from .partitions import Partition

DEFAULT_BUDGET = 10_000


class SamplerBudgetError(RuntimeError):
    """Extremal-functions sampler exceeded its per-site candidate budget."""


class Dataset:
    """n x k observations: unit-Frechet scale when margins is None, GEV scale
    otherwise.

    partitions, when present, is one occurrence-time Partition per row, kept as
    a side channel so Stephenson-Tawn fits and Bayes fits see identical data.
    """

    __slots__ = ("values", "margins", "partitions")

    def __init__(self, values, margins=None, partitions=None):
        values = np.atleast_2d(np.asarray(values, dtype=float))
        if values.ndim != 2:
            raise ValueError("values must be an n x k matrix")
        if not np.all(np.isfinite(values)):
            raise ValueError("values must be finite")
        self.values = values
        if margins is not None:
            margins = tuple(margins)
            if len(margins) != values.shape[1] or not all(
                isinstance(m, GevMargin) for m in margins
            ):
                raise ValueError("margins must be one GevMargin per component")
        self.margins = margins
        if partitions is not None:
            partitions = list(partitions)
            if len(partitions) != values.shape[0]:
                raise ValueError("need one partition per observation")
            for p in partitions:
                if not isinstance(p, Partition) or p.k != values.shape[1]:
                    raise ValueError("each partition must cover {1..k}")
        self.partitions = partitions

    @property
    def n(self):
        return self.values.shape[0]

    @property
    def k(self):
        return self.values.shape[1]


def _partition_path(path):
    base = os.fspath(path)
    stem, dot, ext = base.rpartition(".")
    return f"{stem}.partitions.{ext}" if dot else f"{base}.partitions"


def write_datasets(path, datasets):
    """Write replicate datasets to CSV with header rep,obs,comp_1..comp_k.

    rep and obs are 1-based; floats go out as repr so the file is
    byte-deterministic and round-trips exactly. When every dataset carries
    partitions they go to a sibling .partitions.csv file (all or none).
    Margin metadata is not stored here; the experiment manifest owns it.
    """
    datasets = list(datasets)
    if not datasets:
        raise ValueError("no datasets to write")
    k = datasets[0].k
    if any(d.k != k for d in datasets):
        raise ValueError("datasets must share the same k")
    have = [d.partitions is not None for d in datasets]
    if any(have) and not all(have):
        raise ValueError("either every dataset has partitions or none")
    lines = ["rep,obs," + ",".join(f"comp_{j}" for j in range(1, k + 1))]
    for r, d in enumerate(datasets, start=1):
        for i in range(d.n):
            row = ",".join(repr(float(v)) for v in d.values[i])
            lines.append(f"{r},{i + 1},{row}")
    with open(path, "w", newline="") as fh:
        fh.write("\n".join(lines) + "\n")
    if all(have):
        with open(_partition_path(path), "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["rep", "obs", "partition"])
            for r, d in enumerate(datasets, start=1):
                for i, p in enumerate(d.partitions, start=1):
                    w.writerow([r, i, str(p)])


def read_datasets(path):
    """Inverse of write_datasets; loads the sibling partition file if present."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header = rows[0]
    if header[:2] != ["rep", "obs"] or not header[2].startswith("comp_"):
        raise ValueError(f"unexpected dataset header: {header}")
    k = len(header) - 2
    by_rep = {}
    for row in rows[1:]:
        by_rep.setdefault(int(row[0]), []).append([float(v) for v in row[2:]])
    parts_by_rep = {}
    sibling = _partition_path(path)
    if os.path.exists(sibling):
        with open(sibling, newline="") as fh:
            prows = list(csv.reader(fh))
        for row in prows[1:]:
            parts_by_rep.setdefault(int(row[0]), []).append(
                Partition.parse(row[2], k=k)
            )
    return [
        Dataset(np.array(by_rep[r]), partitions=parts_by_rep.get(r))
        for r in sorted(by_rep)
    ]


def _log_stable_pow_theta(theta, shape, rng):
    """theta * log S for S positive stable with Laplace transform exp(-s^theta).

    Chambers-Mallows-Stuck in log space; working with theta*log S directly
    keeps small theta (where S itself overflows) finite.
    """
    u = rng.uniform(0.0, np.pi, shape)
    w = rng.standard_exponential(shape)
    return (
        (1.0 - theta) * (np.log(np.sin((1.0 - theta) * u)) - np.log(w))
        + theta * np.log(np.sin(theta * u))
        - np.log(np.sin(u))
    )


def sample_logistic(theta, k, rng, n=None):
    """Exact logistic max-stable draws: Z_i = S^theta V_i with S positive
    stable of index theta and V_i i.i.d. Frechet with shape 1/theta, so
    P(Z <= z) = exp(-(sum z_i^(-1/theta))^theta).

    Returns a length-k vector, or an (n, k) matrix when n is given.
    """
    if not 0.0 < theta < 1.0:
        raise ValueError(f"theta must be in (0, 1), got {theta}")
    m = 1 if n is None else int(n)
    log_s = _log_stable_pow_theta(theta, m, rng)
    log_v = -theta * np.log(rng.standard_exponential((m, k)))
    z = np.exp(log_s[:, None] + log_v)
    return z[0] if n is None else z


def _site_laws(spec):
    """Per-site spectral law: law(j, rng) draws Y with Y[j] = 1, distributed
    as the site-j size-biased spectral function of the family."""
    k = spec.k
    fam = spec.family
    if fam == "dirichlet":
        alpha = spec.params.alpha

        def law(j, rng):
            # size-biasing Gamma(a) by its value gives Gamma(a+1)
            y = rng.gamma(alpha) / alpha
            y /= rng.gamma(alpha[j] + 1.0) / alpha[j]
            y[j] = 1.0
            return y

        return law
    if fam == "husler_reiss":
        lam2 = spec.params.lambda_sq
        pre = []
        for j in range(k):
            others, sig = _sigma_p(lam2, j)
            pre.append((others, np.linalg.cholesky(sig), 2.0 * lam2[others, j]))

        def law(j, rng):
            others, chol, half_var = pre[j]
            y = np.ones(k)
            y[others] = np.exp(chol @ rng.standard_normal(k - 1) - half_var)
            return y

        return law
    if fam == "extremal_t":
        sigma = spec.params.sigma.mat
        nu = spec.params.nu
        df = nu + 1.0
        pre = []
        for j in range(k):
            others = np.delete(np.arange(k), j)
            rho = sigma[others, j]
            scale = (sigma[np.ix_(others, others)] - np.outer(rho, rho)) / df
            pre.append((others, rho, np.linalg.cholesky(scale)))

        def law(j, rng):
            others, rho, chol = pre[j]
            t = rho + (chol @ rng.standard_normal(k - 1)) / np.sqrt(
                rng.chisquare(df) / df
            )
            y = np.ones(k)
            y[others] = np.maximum(t, 0.0) ** nu
            return y

        return law
    raise ValueError(
        f"extremal-functions sampling needs dirichlet, husler_reiss or "
        f"extremal_t, got {fam}"
    )


def _one_extremal_draw(k, law, rng, budget):
    z = np.zeros(k)
    for site in range(k):
        gamma = rng.standard_exponential()
        n_drawn = 0
        while 1.0 / gamma > z[site]:
            n_drawn += 1
            if n_drawn > budget:
                raise SamplerBudgetError(
                    f"site {site + 1}: more than {budget} spectral functions"
                )
            y = law(site, rng) / gamma
            if site == 0 or np.all(y[:site] < z[:site]):
                np.maximum(z, y, out=z)
            gamma += rng.standard_exponential()
        assert 1.0 / gamma <= z[site]
    assert np.all(z > 0.0)
    return z


def sample_extremal_functions(spec, rng, budget=DEFAULT_BUDGET):
    """One exact draw for Dirichlet / Huesler-Reiss / extremal-t.

    Sweeps sites 1..k; at each site proposes spectral functions from the
    site's size-biased law at Poisson arrival heights and keeps those not
    dominated at earlier sites. Raises SamplerBudgetError if a site consumes
    more than budget candidates.
    """
    if budget < 1:
        raise ValueError("budget must be >= 1")
    return _one_extremal_draw(spec.k, _site_laws(spec), rng, budget)


def sample_max_stable(spec, n, rng, budget=DEFAULT_BUDGET):
    """(n, k) exact unit-Frechet-scale draws, family dispatched."""
    if spec.family == "logistic":
        return sample_logistic(spec.params.theta, spec.k, rng, n=n)
    law = _site_laws(spec)
    return np.stack([_one_extremal_draw(spec.k, law, rng, budget) for _ in range(n)])


def exponential_ks_gate(spec, i1, i2, n=10_000, rng=None, budget=DEFAULT_BUDGET):
    """p-value of a KS test of 1/(Z_i1 v Z_i2) against Exp(tau_{i1,i2}).

    The pairwise minimum of reciprocals is exactly exponential with the
    extremal coefficient as rate, so this gates each spectral sampler against
    the family it claims to draw from. Reject below 1e-3.
    """
    rng = np.random.default_rng(0) if rng is None else rng
    zz = sample_max_stable(spec, n, rng, budget)
    w = 1.0 / np.maximum(zz[:, i1 - 1], zz[:, i2 - 1])
    tau = pairwise_extremal_coefficient(spec, i1, i2)
    return float(kstest(w, "expon", args=(0.0, 1.0 / tau)).pvalue)


def sample_block_maxima_clayton(theta_target, k, b, n, rng):
    """n block maxima, each over b outer-power Clayton vectors, rescaled by b,
    plus the occurrence-time partitions (components sharing an argmax time
    share a block).

    Clayton generator parameter c = 1 and outer power beta = 1/theta_target
    put the block maxima in the max-domain of attraction of the logistic with
    theta = theta_target (the mapping is checked by the large-b test, not
    assumed). Margins are exactly unit Frechet at every b. Argmax ties break
    to the smallest time index, so b = 1 collapses to the one-block partition.
    """
    theta = float(theta_target)
    if not 0.0 < theta < 1.0:
        raise ValueError(f"theta_target must be in (0, 1), got {theta_target}")
    b, n, k = int(b), int(n), int(k)
    if b < 1 or n < 1 or k < 1:
        raise ValueError("need b >= 1, n >= 1, k >= 1")
    values = np.empty((n, k))
    labels = np.empty((n, k), dtype=np.int64)
    step = max(1, 4_000_000 // (b * k))
    for lo in range(0, n, step):
        m = min(step, n - lo)
        # frailty M = S V^(1/theta) with V ~ Exp(1) has Laplace transform
        # (1 + s^theta)^(-1); U_i = (1 + (E_i/M)^theta)^(-1) is the copula
        log_m_pow = _log_stable_pow_theta(theta, (m, b), rng) + np.log(
            rng.standard_exponential((m, b))
        )
        r = np.exp(
            theta * np.log(rng.standard_exponential((m, b, k)))
            - log_m_pow[:, :, None]
        )
        x = 1.0 / np.log1p(r)  # unit Frechet margins, exactly
        values[lo : lo + m] = x.max(axis=1) / b
        labels[lo : lo + m] = x.argmax(axis=1)
    parts = [Partition.from_labels(row) for row in labels]
    return Dataset(values, partitions=parts)


_MODES = ("exact-max-stable", "block-maxima")


class SimJob:
    """One simulation task; (seed, replicate id) fully determine the draws."""

    __slots__ = ("spec", "n_samples", "seed", "mode", "block_size")

    def __init__(self, spec, n_samples, seed, mode="exact-max-stable", block_size=None):
        if not isinstance(spec, ModelSpec):
            raise TypeError("spec must be a ModelSpec")
        n_samples = int(n_samples)
        if n_samples < 1:
            raise ValueError("n_samples must be >= 1")
        seed = int(seed)
        if not 0 <= seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        if mode not in _MODES:
            raise ValueError(f"mode must be one of {_MODES}, got {mode!r}")
        if mode == "block-maxima":
            if spec.family != "logistic":
                raise ValueError(
                    "block-maxima mode targets the logistic attractor; "
                    "spec must be logistic"
                )
            if block_size is None or int(block_size) < 1:
                raise ValueError("block-maxima mode needs block_size >= 1")
            block_size = int(block_size)
        elif block_size is not None:
            raise ValueError("block_size only applies in block-maxima mode")
        self.spec = spec
        self.n_samples = n_samples
        self.seed = seed
        self.mode = mode
        self.block_size = block_size

    def to_dict(self):
        d = {
            "spec": self.spec.to_dict(),
            "n_samples": self.n_samples,
            "seed": self.seed,
            "mode": self.mode,
        }
        if self.block_size is not None:
            d["block_size"] = self.block_size
        return d

    @classmethod
    def from_dict(cls, d):
        return cls(
            ModelSpec.from_dict(d["spec"]),
            d["n_samples"],
            d["seed"],
            mode=d.get("mode", "exact-max-stable"),
            block_size=d.get("block_size"),
        )


def run_job(job, replicate=0, budget=DEFAULT_BUDGET):
    """Draw one replicate Dataset for a SimJob.

    Each replicate gets an independent stream seeded by (job.seed, replicate),
    so parallel and serial execution produce identical data.
    """
    replicate = int(replicate)
    if replicate < 0:
        raise ValueError("replicate must be >= 0")
    rng = np.random.default_rng(np.random.SeedSequence((job.seed, replicate)))
    spec = job.spec
    if job.mode == "block-maxima":
        ds = sample_block_maxima_clayton(
            spec.params.theta, spec.k, job.block_size, job.n_samples, rng
        )
        values, parts = ds.values, ds.partitions
    else:
        values = sample_max_stable(spec, job.n_samples, rng, budget)
        parts = None
    identity = GevMargin()
    if any(m != identity for m in spec.margins):
        values = frechet_to_gev(values, spec.margins)
        return Dataset(values, margins=spec.margins, partitions=parts)
    return Dataset(values, partitions=parts)
