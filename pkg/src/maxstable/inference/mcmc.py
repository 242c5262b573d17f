"""Metropolis-within-Gibbs over parameters and latent partitions.

The target is pi(x) prod_l L(z_l, tau_l; x): the joint posterior of the free
parameters and one partition per observation. Parameters move one at a time
by random-walk MH at fixed partitions; partitions move by exact single-site
conditional draws. For the logistic family the conditional weights collapse
to block sizes (join a block of size n with weight n - theta, open a fresh
singleton with weight theta S^theta), which gives a fast vectorized path.
Other families score candidates through cached per-block log-weights.
"""

import hashlib
import json
import time
from dataclasses import asdict, dataclass

import numpy as np
from scipy.special import gammaln, logsumexp

from ..models import OutOfSupportError, exponent_V, gev_to_frechet, log_weight
from ..partitions import Partition
from .trace import Trace


class McmcError(RuntimeError):
    """Numeric failure inside a chain; .trace carries the iterations
    completed before the failure (None if it died before recording any)."""

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace


@dataclass(frozen=True)
class McmcConfig:
    n_iter: int = 1500
    burn_in: int = 500
    gibbs_per_iter: int = 0  # single-site partition updates per iteration; 0 means N*k
    init_scale: float = 0.5
    target_accept: float = 0.3
    adapt: bool = True
    init_partitions: str = "singletons"
    likelihood_on: bool = True  # False turns the chain into a prior sampler

    def __post_init__(self):
        if self.n_iter < 1:
            raise ValueError("n_iter must be positive")
        if not 0 <= self.burn_in < self.n_iter:
            raise ValueError("burn_in must lie in [0, n_iter)")
        if self.gibbs_per_iter < 0:
            raise ValueError("gibbs_per_iter must be nonnegative")
        if not self.init_scale > 0:
            raise ValueError("init_scale must be positive")
        if not 0.0 < self.target_accept < 1.0:
            raise ValueError("target_accept must lie in (0,1)")
        if self.init_partitions not in ("singletons", "one-block"):
            raise ValueError("init_partitions must be 'singletons' or 'one-block'")

    def to_dict(self):
        return asdict(self)


def config_hash(config, names):
    payload = json.dumps(
        {"config": config.to_dict(), "params": list(names)}, sort_keys=True
    )
    return hashlib.sha256(payload.encode()).hexdigest()[:12]


class ChainState:
    """Free-parameter point, per-observation partition labels, and the
    caches tied to the current spec.

    labels[l, i] is the block id of component i+1 in observation l and
    counts[l, b] the size of block id b; ids live in 0..k-1 and need not be
    contiguous. u is the data on the Frechet scale under the current margins,
    ljac the total margin log-Jacobian. wcache (per-observation block
    log-weight tables), vcache (per-observation exponent V) and log_s
    (logistic log S_l) are all invalidated on any accepted parameter move.
    """

    __slots__ = (
        "x",
        "spec",
        "values",
        "u",
        "lnz",
        "ljac",
        "labels",
        "counts",
        "wcache",
        "vcache",
        "log_s",
        "loglik_on",
    )

    def __init__(self, x, spec, values, init_partitions="singletons", likelihood_on=True):
        values = np.atleast_2d(np.asarray(values, dtype=float))
        n, k = values.shape
        if spec.k != k:
            raise ValueError(f"spec has k={spec.k} but data has {k} components")
        self.x = np.asarray(x, dtype=float).copy()
        self.spec = spec
        self.values = values
        self.loglik_on = bool(likelihood_on)
        self.u, ljac_rows = gev_to_frechet(values, spec.margins)
        self.ljac = float(np.sum(ljac_rows))
        self.lnz = np.log(self.u)
        if init_partitions == "singletons":
            self.labels = np.tile(np.arange(k, dtype=np.int64), (n, 1))
            self.counts = np.ones((n, k), dtype=np.int64)
        elif init_partitions == "one-block":
            self.labels = np.zeros((n, k), dtype=np.int64)
            self.counts = np.zeros((n, k), dtype=np.int64)
            self.counts[:, 0] = k
        else:
            raise ValueError("init_partitions must be 'singletons' or 'one-block'")
        self.wcache = [{} for _ in range(n)]
        self.vcache = np.full(n, np.nan)
        self.log_s = None

    @property
    def n(self):
        return self.values.shape[0]

    @property
    def k(self):
        return self.values.shape[1]

    @property
    def partitions(self):
        return [Partition.from_labels(row) for row in self.labels]

    def set_partition(self, l, partition):
        if partition.ground != tuple(range(1, self.k + 1)):
            raise ValueError(f"partition must cover 1..{self.k}")
        lab = partition.to_labels()
        self.labels[l] = lab
        self.counts[l] = np.bincount(lab, minlength=self.k)


def _cached_log_weight(spec, cache, block, u_row):
    v = cache.get(block)
    if v is None:
        v = float(log_weight(spec, block, u_row))
        cache[block] = v
    return v


def _loglik_logistic(theta, lnz, ljac, counts):
    """Joint log-likelihood at fixed partitions, all observations, vectorized.

    Summing log omega over the blocks of each observation telescopes into
    block-size terms: with L total blocks, ell_l blocks in observation l and
    S_l the full Frechet-scale sum, the total is
    (L - N k) log theta + sum gammaln(n_b - theta) - L gammaln(1-theta)
    + sum_l (theta ell_l - k) log S_l - sum_l S_l^theta
    - (1 + 1/theta) sum log z + log-Jacobian.
    Returns (loglik, log_s) so callers can keep the per-observation log S_l.
    """
    n, k = lnz.shape
    if not 0.0 < theta < 1.0:
        # expit can saturate to exactly 0 or 1 under optimizer excursions
        return -np.inf, np.zeros(n)
    ln_s = logsumexp(lnz / (-theta), axis=1)
    ell = np.count_nonzero(counts, axis=1)
    total_blocks = int(ell.sum())
    sizes = counts[counts > 0]
    with np.errstate(over="ignore"):
        ll = (
            np.log(theta) * (total_blocks - n * k)
            + gammaln(sizes - theta).sum()
            - total_blocks * gammaln(1.0 - theta)
            + float(np.dot(theta * ell - k, ln_s))
            - np.exp(theta * ln_s).sum()
            - (1.0 + 1.0 / theta) * lnz.sum()
            + ljac
        )
    return float(ll), ln_s


def _loglik_generic(spec, u, ljac, labels, vcache=None, wcache=None):
    """Joint log-likelihood at fixed partitions by direct evaluation;
    vcache/wcache, when given, are filled in place and must belong to spec."""
    n, k = u.shape
    total = ljac
    for l in range(n):
        if vcache is not None and np.isfinite(vcache[l]):
            v = float(vcache[l])
        else:
            v = float(exponent_V(spec, u[l]))
            if vcache is not None:
                vcache[l] = v
        cache = wcache[l] if wcache is not None else {}
        members = {}
        row = labels[l]
        for j in range(k):
            members.setdefault(int(row[j]), []).append(j + 1)
        term = -v
        for mem in members.values():
            term += _cached_log_weight(spec, cache, tuple(mem), u[l])
        total += term
    if np.isnan(total):
        raise McmcError("non-finite log-likelihood")
    return float(total)


def state_log_likelihood(state):
    """Joint log-likelihood of the state's data and partitions at its current
    parameters (0 when the likelihood is switched off)."""
    if not state.loglik_on:
        return 0.0
    if state.spec.family == "logistic":
        ll, state.log_s = _loglik_logistic(
            state.spec.params.theta, state.lnz, state.ljac, state.counts
        )
        return ll
    return _loglik_generic(
        state.spec, state.u, state.ljac, state.labels, state.vcache, state.wcache
    )


def _ensure_log_s(state):
    if state.log_s is None:
        state.log_s = logsumexp(state.lnz / (-state.spec.params.theta), axis=1)
    return state.log_s


def _logistic_gibbs_site(labels_row, counts_row, i0, theta, w_fresh, u01):
    """One exact conditional draw for component i0 (0-based) of one
    observation. Join weights are n - theta per block of the restriction;
    the fresh-singleton weight theta S^theta comes in as w_fresh."""
    counts_row[labels_row[i0]] -= 1
    w = counts_row - theta
    empty = counts_row == 0
    w[empty] = 0.0
    c = np.cumsum(w)
    tot = c[-1]
    t = u01 * (tot + w_fresh)
    if t < tot:
        new = int(np.argmax(c > t))
    else:  # covers the overflow w_fresh = inf case: fresh block wins
        new = int(np.argmax(empty))
    counts_row[new] += 1
    labels_row[i0] = new


def _logistic_gibbs_round(labels, counts, theta, w_fresh, i_vec, u_vec):
    """One conditional draw per observation, all observations at once.
    Distribution-identical to looping _logistic_gibbs_site over rows because
    observations are conditionally independent given the parameters."""
    n = labels.shape[0]
    rows = np.arange(n)
    counts[rows, labels[rows, i_vec]] -= 1
    w = counts - theta
    empty = counts == 0
    w[empty] = 0.0
    c = np.cumsum(w, axis=1)
    tot = c[:, -1]
    with np.errstate(invalid="ignore"):
        t = u_vec * (tot + w_fresh)
        join = t < tot
    new = np.where(
        join,
        np.argmax(c > t[:, None], axis=1),
        np.argmax(empty, axis=1),
    )
    counts[rows, new] += 1
    labels[rows, i_vec] = new


def _generic_gibbs_site(state, l0, i0, u01):
    """Exact conditional draw through per-block log-weight ratios; at most
    one changed block per candidate plus the fresh singleton."""
    spec = state.spec
    u_row = state.u[l0]
    cache = state.wcache[l0]
    labels_row = state.labels[l0]
    counts_row = state.counts[l0]
    k = labels_row.size
    i1 = i0 + 1
    counts_row[labels_row[i0]] -= 1
    members = {}
    for j in range(k):
        if j != i0:
            members.setdefault(int(labels_row[j]), []).append(j + 1)
    labs = list(members)
    scores = np.empty(len(labs) + 1)
    for a, lab in enumerate(labs):
        mem = members[lab]
        scores[a] = _cached_log_weight(
            spec, cache, tuple(sorted(mem + [i1])), u_row
        ) - _cached_log_weight(spec, cache, tuple(mem), u_row)
    scores[-1] = _cached_log_weight(spec, cache, (i1,), u_row)
    if not np.all(np.isfinite(scores)):
        counts_row[labels_row[i0]] += 1  # leave the state untouched
        raise McmcError(
            f"non-finite partition weight at observation {l0 + 1}, component {i1}"
        )
    p = np.exp(scores - scores.max())
    c = np.cumsum(p)
    t = u01 * c[-1]
    if t < c[-1]:
        idx = int(np.argmax(c > t))
    else:
        idx = len(labs)
    if idx < len(labs):
        new = labs[idx]
    else:
        new = int(np.argmax(counts_row == 0))
    counts_row[new] += 1
    labels_row[i0] = new


def gibbs_partition_step(state, l, i, rng):
    """Single-site Gibbs update from the exact conditional of component i
    (1-based, as in partitions) of observation row l (0-based). Mutates the
    state and returns the updated Partition of that observation."""
    n, k = state.values.shape
    if not 0 <= l < n:
        raise IndexError(f"observation row {l} out of range 0..{n - 1}")
    if not 1 <= i <= k:
        raise IndexError(f"component {i} out of range 1..{k}")
    if state.spec.family == "logistic":
        theta = state.spec.params.theta
        log_s = _ensure_log_s(state)
        with np.errstate(over="ignore"):
            w_fresh = float(np.exp(np.log(theta) + theta * log_s[l]))
        _logistic_gibbs_site(
            state.labels[l], state.counts[l], i - 1, theta, w_fresh, rng.random()
        )
    else:
        _generic_gibbs_site(state, l, i - 1, rng.random())
    return Partition.from_labels(state.labels[l])


def mh_parameter_step(state, parameterization, j, scale, rng):
    """One random-walk move on free parameter j at fixed partitions.

    The acceptance ratio is the joint likelihood ratio times the prior ratio
    times the proposal correction of the walk's transform. Proposals outside
    the prior support, outside the family's parameter domain, or outside the
    margins' data support are rejected without error. Returns True on
    acceptance; the state is mutated in place.
    """
    par = parameterization.params[j]
    xj = float(state.x[j])
    xj_star, corr = par.walk.propose(xj, scale, rng)
    lp_star = par.prior.log_density(xj_star)
    if lp_star == -np.inf:
        return False
    x_star = state.x.copy()
    x_star[j] = xj_star
    try:
        spec_star = parameterization.spec(x_star)
    except ValueError:
        return False
    same_margins = spec_star.margins == state.spec.margins
    ll_cur = ll_star = 0.0
    ln_s_star = None
    u_star, lnz_star, ljac_star = state.u, state.lnz, state.ljac
    if state.loglik_on:
        if not same_margins:
            try:
                u_star, ljac_rows = gev_to_frechet(state.values, spec_star.margins)
            except OutOfSupportError:
                return False
            lnz_star = np.log(u_star)
            ljac_star = float(np.sum(ljac_rows))
        ll_cur = state_log_likelihood(state)
        if spec_star.family == "logistic":
            ll_star, ln_s_star = _loglik_logistic(
                spec_star.params.theta, lnz_star, ljac_star, state.counts
            )
        else:
            ll_star = _loglik_generic(spec_star, u_star, ljac_star, state.labels)
    log_a = (ll_star - ll_cur) + (lp_star - par.prior.log_density(xj)) + corr
    if np.isnan(log_a):
        raise McmcError(f"non-finite acceptance ratio for {par.name}")
    if log_a < 0.0 and not rng.random() < np.exp(log_a):
        return False
    state.x = x_star
    state.spec = spec_star
    if state.loglik_on and not same_margins:
        state.u, state.lnz, state.ljac = u_star, lnz_star, ljac_star
    state.log_s = ln_s_star
    if spec_star.family != "logistic":
        for cache in state.wcache:
            cache.clear()
        state.vcache[:] = np.nan
    return True


def run_chain(data, parameterization, config=None, seed=0):
    """MH-within-Gibbs chain on (parameters, partitions); returns a Trace.

    data is a Dataset or an (N, k) array on the margins' observation scale.
    Each iteration sweeps every free parameter once, then performs
    gibbs_per_iter single-site partition updates (default N*k). The logistic
    family runs the partition scan in vectorized rounds of one draw per
    observation, a schedule with the same invariant distribution because
    observations are independent given the parameters. Proposal scales adapt
    toward target_accept during burn-in only. seed may be an int,
    SeedSequence or Generator.
    """
    cfg = config if config is not None else McmcConfig()
    values = data.values if hasattr(data, "values") else data
    values = np.atleast_2d(np.asarray(values, dtype=float))
    n, k = values.shape
    if n < 1 or k < 2:
        raise ValueError("need at least one observation and two components")
    rng = np.random.default_rng(seed)
    names = parameterization.names
    n_par = len(names)
    if n_par < 1:
        raise ValueError("parameterization has no free parameters")
    chash = config_hash(cfg, names)
    seed_repr = seed if isinstance(seed, int) else str(seed)
    x0 = parameterization.inits
    state = ChainState(
        x0, parameterization.spec(x0), values, cfg.init_partitions, cfg.likelihood_on
    )
    pars = parameterization.params
    scales = np.array(
        [cfg.init_scale if getattr(p, "scale", None) is None else p.scale for p in pars]
    )
    adaptable = np.array([getattr(p.walk, "adapts", True) for p in pars])
    n_gibbs = cfg.gibbs_per_iter if cfg.gibbs_per_iter else n * k
    rounds = -(-n_gibbs // n)
    samples = np.empty((cfg.n_iter, n_par))
    mean_blocks = np.empty(cfg.n_iter)
    accepted = np.empty(cfg.n_iter)
    acc_post = np.zeros(n_par)
    t_start = time.perf_counter()
    it = 0
    try:
        for it in range(cfg.n_iter):
            n_acc = 0
            for j in range(n_par):
                ok = mh_parameter_step(state, parameterization, j, scales[j], rng)
                n_acc += ok
                if cfg.adapt and adaptable[j] and it < cfg.burn_in:
                    scales[j] *= np.exp(
                        (it + 1.0) ** -0.6 * (ok - cfg.target_accept)
                    )
                if it >= cfg.burn_in:
                    acc_post[j] += ok
            if cfg.likelihood_on:
                if state.spec.family == "logistic":
                    theta = state.spec.params.theta
                    log_s = _ensure_log_s(state)
                    with np.errstate(over="ignore"):
                        w_fresh = np.exp(np.log(theta) + theta * log_s)
                    for _ in range(rounds):
                        _logistic_gibbs_round(
                            state.labels,
                            state.counts,
                            theta,
                            w_fresh,
                            rng.integers(0, k, n),
                            rng.random(n),
                        )
                else:
                    obs_idx = rng.integers(0, n, n_gibbs)
                    comp_idx = rng.integers(0, k, n_gibbs)
                    u01 = rng.random(n_gibbs)
                    for t in range(n_gibbs):
                        _generic_gibbs_site(state, int(obs_idx[t]), int(comp_idx[t]), u01[t])
            samples[it] = state.x
            mean_blocks[it] = np.count_nonzero(state.counts, axis=1).mean()
            accepted[it] = n_acc / n_par
    except Exception as exc:
        partial = Trace(
            names,
            samples[:it],
            mean_blocks[:it],
            accepted[:it],
            min(cfg.burn_in, it),
            seed=seed_repr,
            config_hash=chash,
        )
        if isinstance(exc, McmcError):
            exc.trace = partial
            raise
        raise McmcError(f"chain failed at iteration {it + 1}: {exc}", partial) from exc
    n_post = max(cfg.n_iter - cfg.burn_in, 1)
    meta = {
        "acceptance_rates": {names[j]: float(acc_post[j] / n_post) for j in range(n_par)},
        "runtime_seconds": time.perf_counter() - t_start,
        "final_scales": [float(s) for s in scales],
    }
    return Trace(
        names,
        samples,
        mean_blocks,
        accepted,
        cfg.burn_in,
        seed=seed_repr,
        config_hash=chash,
        meta=meta,
    )
