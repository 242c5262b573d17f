"""Chain traces: storage, CSV round-trip, posterior summaries."""

import json

import numpy as np


def _sidecar_path(path):
    head, dot, _ = str(path).rpartition(".")
    if not dot:
        return str(path) + ".json"
    return head + ".json"


class Trace:
    """Recorded chain output.

    samples holds one row per iteration on the natural parameter scale
    (burn-in included); mean_blocks is the per-iteration average partition
    block count over observations; accepted is the fraction of parameter
    moves accepted in the iteration.
    """

    __slots__ = (
        "names",
        "samples",
        "mean_blocks",
        "accepted",
        "burn_in",
        "seed",
        "config_hash",
        "meta",
    )

    def __init__(
        self,
        names,
        samples,
        mean_blocks,
        accepted,
        burn_in,
        seed=None,
        config_hash="",
        meta=None,
    ):
        samples = np.atleast_2d(np.asarray(samples, dtype=float))
        n = samples.shape[0]
        if samples.shape[1] != len(names):
            raise ValueError("one sample column per parameter name")
        mean_blocks = np.asarray(mean_blocks, dtype=float)
        accepted = np.asarray(accepted, dtype=float)
        if mean_blocks.shape != (n,) or accepted.shape != (n,):
            raise ValueError("mean_blocks and accepted must have one entry per iteration")
        burn_in = int(burn_in)
        if burn_in < 0:
            raise ValueError("burn_in must be nonnegative")
        self.names = list(names)
        self.samples = samples
        self.mean_blocks = mean_blocks
        self.accepted = accepted
        self.burn_in = burn_in
        self.seed = seed
        self.config_hash = str(config_hash)
        self.meta = dict(meta) if meta else {}

    def __len__(self):
        return self.samples.shape[0]

    @property
    def post(self):
        """Post-burn-in samples."""
        return self.samples[self.burn_in :]

    def param(self, name):
        return self.samples[:, self.names.index(name)]

    def to_csv(self, path):
        """Write `iter,param_1..param_p,mean_blocks,accepted` plus a JSON
        sidecar (parameter names, burn-in, seed, config hash, meta)."""
        p = len(self.names)
        cols = ",".join(f"param_{j + 1}" for j in range(p))
        lines = [f"iter,{cols},mean_blocks,accepted"]
        for t in range(len(self)):
            row = ",".join(repr(float(v)) for v in self.samples[t])
            lines.append(
                f"{t + 1},{row},{float(self.mean_blocks[t])!r},{float(self.accepted[t])!r}"
            )
        with open(path, "w") as fh:
            fh.write("\n".join(lines) + "\n")
        sidecar = {
            "params": self.names,
            "burn_in": self.burn_in,
            "seed": self.seed if isinstance(self.seed, (int, type(None))) else str(self.seed),
            "config_hash": self.config_hash,
        }
        sidecar.update(self.meta)
        with open(_sidecar_path(path), "w") as fh:
            json.dump(sidecar, fh, indent=1, sort_keys=True)
            fh.write("\n")

    @classmethod
    def from_csv(cls, path):
        with open(path) as fh:
            header = fh.readline().strip().split(",")
            body = np.loadtxt(fh, delimiter=",", ndmin=2)
        p = len(header) - 3
        if p < 1 or header[0] != "iter" or header[-2:] != ["mean_blocks", "accepted"]:
            raise ValueError(f"unrecognized trace header {header!r}")
        try:
            with open(_sidecar_path(path)) as fh:
                side = json.load(fh)
        except FileNotFoundError:
            side = {}
        names = side.get("params", header[1:-2])
        meta = {
            k: v
            for k, v in side.items()
            if k not in ("params", "burn_in", "seed", "config_hash")
        }
        return cls(
            names,
            body[:, 1 : 1 + p],
            body[:, -2],
            body[:, -1],
            side.get("burn_in", 0),
            seed=side.get("seed"),
            config_hash=side.get("config_hash", ""),
            meta=meta,
        )


def batch_means_se(series, n_batches=30):
    """Monte Carlo standard error of the mean of a correlated series."""
    series = np.asarray(series, dtype=float)
    n = series.size
    m = min(n_batches, n)
    b = n // m
    if b < 1 or m < 2:
        return float("nan")
    means = series[: m * b].reshape(m, b).mean(axis=1)
    return float(means.std(ddof=1) / np.sqrt(m))


def autocorrelation(x, lags):
    """Sample ACF of x at the given lags; a zero-variance series has acf 1."""
    x = np.asarray(x, dtype=float)
    xc = x - x.mean()
    denom = float(np.dot(xc, xc))
    out = {}
    for h in lags:
        h = int(h)
        if h < 0 or h >= x.size:
            raise ValueError(f"lag {h} out of range for series of length {x.size}")
        if denom == 0.0:
            out[h] = 1.0
        elif h == 0:
            out[h] = 1.0
        else:
            out[h] = float(np.dot(xc[:-h], xc[h:]) / denom)
    return out


def posterior_summary(trace, level=0.95, lags=(1, 5, 10, 30)):
    """Per-parameter median, mean, sd, equal-tailed credible interval and ACF.

    Operates on the post-burn-in samples; raises on an empty trace. Lags
    beyond the available length are reported as None.
    """
    if not 0.0 < level < 1.0:
        raise ValueError("level must lie in (0,1)")
    post = trace.post
    if post.shape[0] == 0:
        raise ValueError("trace has no post-burn-in samples")
    lo_q, hi_q = (1.0 - level) / 2.0, (1.0 + level) / 2.0
    params = {}
    for j, name in enumerate(trace.names):
        x = post[:, j]
        usable = [h for h in lags if h < x.size]
        acf = autocorrelation(x, usable)
        params[name] = {
            "median": float(np.median(x)),
            "mean": float(x.mean()),
            "sd": float(x.std(ddof=1)) if x.size > 1 else 0.0,
            "ci": [float(np.quantile(x, lo_q)), float(np.quantile(x, hi_q))],
            "acf": {int(h): acf.get(h) for h in lags},
        }
    mb = trace.mean_blocks[trace.burn_in :]
    return {
        "level": float(level),
        "n_post": int(post.shape[0]),
        "params": params,
        "mean_blocks": {"mean": float(mb.mean()), "median": float(np.median(mb))},
        "acceptance": float(trace.accepted[trace.burn_in :].mean()),
    }
