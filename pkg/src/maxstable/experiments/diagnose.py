"""Plot-ready CSV diagnostics for chain traces. No rendering happens here;
the report module turns these files into figures."""

import csv
import io
import math
from pathlib import Path

import numpy as np

from ..inference import Trace, autocorrelation, batch_means_se

ACF_LAGS = tuple(range(1, 31))


def silverman_bandwidth(x):
    """0.9 min(sd, iqr/1.34) n^(-1/5); zero for a degenerate sample."""
    x = np.asarray(x, dtype=float)
    if x.size < 2:
        return 0.0
    sd = float(x.std(ddof=1))
    q75, q25 = np.percentile(x, [75, 25])
    iqr = float(q75 - q25)
    spread = min(sd, iqr / 1.34) if iqr > 0 else sd
    return 0.9 * spread * x.size ** (-0.2)


def kde_curve(x, bandwidth, n_grid=200):
    """Gaussian kernel density on an evenly spaced grid."""
    x = np.asarray(x, dtype=float)
    lo = x.min() - 3.0 * bandwidth
    hi = x.max() + 3.0 * bandwidth
    grid = np.linspace(lo, hi, n_grid)
    z = (grid[:, None] - x[None, :]) / bandwidth
    dens = np.exp(-0.5 * z * z).sum(axis=1) / (x.size * bandwidth * math.sqrt(2.0 * math.pi))
    return grid, dens


def _write_csv(path, header, rows):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(
        [repr(v) if isinstance(v, float) else str(v) for v in row] for row in rows
    )
    Path(path).write_text(buf.getvalue())


def _unique_stems(paths):
    stems, seen = [], {}
    for p in paths:
        s = Path(p).stem
        seen[s] = seen.get(s, 0) + 1
        stems.append(s if seen[s] == 1 else f"{s}_{seen[s]}")
    return stems


def _replication_rows(entries):
    """Pairwise seed-replication check among traces sharing a config hash.

    Medians of two chains run with the same settings but different seeds
    should agree within 2 combined MC standard errors; the per-chain error
    of the median uses the large-sample normal factor 1.2533 on the
    batch-means error of the mean.
    """
    rows = []
    all_pass = None
    groups = {}
    for stem, tr in entries:
        if tr.config_hash:
            groups.setdefault(tr.config_hash, []).append((stem, tr))
    for h, members in sorted(groups.items()):
        for a in range(len(members)):
            for b in range(a + 1, len(members)):
                stem_a, tr_a = members[a]
                stem_b, tr_b = members[b]
                if tr_a.seed is not None and tr_a.seed == tr_b.seed:
                    continue
                for j, name in enumerate(tr_a.names):
                    if name not in tr_b.names:
                        continue
                    xa = tr_a.post[:, j]
                    xb = tr_b.post[:, tr_b.names.index(name)]
                    med_a, med_b = float(np.median(xa)), float(np.median(xb))
                    se = 1.2533 * math.hypot(batch_means_se(xa), batch_means_se(xb))
                    ok = abs(med_a - med_b) <= 2.0 * se
                    rows.append((h, name, stem_a, stem_b, med_a, med_b, se, int(ok)))
                    all_pass = ok if all_pass is None else (all_pass and ok)
    return rows, all_pass


def diagnose(trace_paths, out_dir, bins=40):
    """Emit histogram, smoothed-density, ACF and mean-block CSVs per trace,
    plus a cross-trace seed-replication table. Returns a summary dict."""
    if not trace_paths:
        raise ValueError("need at least one trace")
    bins = int(bins)
    if bins < 1:
        raise ValueError("bins must be >= 1")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    entries, files = [], []

    stems = _unique_stems(trace_paths)
    for stem, path in zip(stems, trace_paths):
        tr = Trace.from_csv(path)
        post = tr.post
        if post.shape[0] == 0:
            raise ValueError(f"{path}: no post-burn-in samples")
        hist_rows, dens_rows, acf_rows = [], [], []
        for j, name in enumerate(tr.names):
            x = post[:, j]
            counts, edges = np.histogram(x, bins=bins)
            hist_rows += [
                (name, float(edges[i]), float(edges[i + 1]), int(counts[i]))
                for i in range(bins)
            ]
            bw = silverman_bandwidth(x)
            if bw > 0:
                grid, dens = kde_curve(x, bw)
                dens_rows += [(name, float(g), float(d)) for g, d in zip(grid, dens)]
            usable = [h for h in ACF_LAGS if h < x.size]
            acf = autocorrelation(x, usable)
            acf_rows += [(name, h, acf[h]) for h in usable]
        for suffix, header, rows in (
            ("hist", ("param", "bin_lo", "bin_hi", "count"), hist_rows),
            ("density", ("param", "x", "density"), dens_rows),
            ("acf", ("param", "lag", "acf"), acf_rows),
        ):
            p = out / f"{stem}.{suffix}.csv"
            _write_csv(p, header, rows)
            files.append(str(p))
        p = out / f"{stem}.mean_blocks.csv"
        _write_csv(
            p,
            ("iter", "mean_blocks"),
            [(i, float(v)) for i, v in enumerate(tr.mean_blocks)],
        )
        files.append(str(p))
        entries.append((stem, tr))

    rep_rows, rep_pass = _replication_rows(entries)
    p = out / "replication.csv"
    _write_csv(
        p,
        ("config_hash", "param", "trace_a", "trace_b", "median_a", "median_b", "se", "pass"),
        rep_rows,
    )
    files.append(str(p))
    return {
        "n_traces": len(entries),
        "files": files,
        "replication_pairs": len(rep_rows),
        "replication_pass": rep_pass,
    }
