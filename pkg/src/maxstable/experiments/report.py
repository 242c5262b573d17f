"""Render experiment tables and trace diagnostics into PNG figures."""

import csv
import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def _read_csv(path):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = list(reader)
    return header, rows


def _save(fig, path, made):
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    made.append(str(path))


def _render_rmse(result, out, made):
    rows = result["rows"]
    params = sorted({r[2] for r in rows})
    estimators = list(dict.fromkeys(r[1] for r in rows))
    for param in params:
        sub = [r for r in rows if r[2] == param]
        cells = list(dict.fromkeys(r[0] for r in sub))
        fig, ax = plt.subplots(figsize=(1.8 + 1.1 * len(cells), 3.6))
        width = 0.8 / max(len(estimators), 1)
        xs = np.arange(len(cells))
        for e_idx, est in enumerate(estimators):
            vals = [next((r[3] for r in sub if r[0] == c and r[1] == est), np.nan) for c in cells]
            errs = [next((2 * r[5] for r in sub if r[0] == c and r[1] == est), 0.0) for c in cells]
            ax.bar(xs + e_idx * width, vals, width, yerr=errs, capsize=2, label=est)
        ax.set_xticks(xs + width * (len(estimators) - 1) / 2)
        ax.set_xticklabels(cells, rotation=20, ha="right", fontsize=8)
        scale = result.get("scale", 1.0)
        ax.set_ylabel(f"rmse x {scale:g}")
        ax.set_title(f"{result['name']}: {param}")
        ax.legend(fontsize=8)
        _save(fig, out / f"rmse_{param}.png", made)


def _render_coverage(result, out, made):
    rows = result["rows"]
    cells = [r[0] for r in rows]
    cov = [r[2] for r in rows]
    err = [2 * r[3] for r in rows]
    fig, ax = plt.subplots(figsize=(1.8 + 1.1 * len(cells), 3.6))
    ax.bar(range(len(cells)), cov, 0.6, yerr=err, capsize=3, color="#4878a8")
    ax.axhline(0.95, ls="--", c="k", lw=1)
    ax.set_ylim(0.0, 1.05)
    ax.set_xticks(range(len(cells)))
    ax.set_xticklabels(cells, rotation=20, ha="right", fontsize=8)
    ax.set_ylabel("coverage")
    ax.set_title(result["name"])
    _save(fig, out / "coverage.png", made)


def _render_bayes_factor(result, out, made):
    rows = result["rows"]
    beta, med = [], []
    for r in rows:
        label = r[0]
        try:
            beta.append(float(label.split("beta=")[1].split(",")[0]))
        except (IndexError, ValueError):
            beta.append(len(beta))
        med.append(r[1])
    order = np.argsort(beta)
    fig, ax = plt.subplots(figsize=(4.5, 3.4))
    ax.semilogy(np.asarray(beta)[order], np.asarray(med)[order], "o-")
    ax.axhline(1.0, ls="--", c="k", lw=1)
    ax.set_xlabel("beta")
    ax.set_ylabel("median Bayes factor")
    ax.set_title(result["name"])
    _save(fig, out / "bayes_factor.png", made)


def _render_single_fit(result, out, made):
    rows = result["rows"]
    params = list(dict.fromkeys(r[1] for r in rows))
    estimators = list(dict.fromkeys(r[0] for r in rows))
    fig, ax = plt.subplots(figsize=(1.8 + 0.9 * len(params), 3.4))
    width = 0.8 / max(len(estimators), 1)
    xs = np.arange(len(params))
    for e_idx, est in enumerate(estimators):
        vals = [next((r[2] for r in rows if r[0] == est and r[1] == p), np.nan) for p in params]
        ax.bar(xs + e_idx * width, vals, width, label=est)
    ax.set_xticks(xs + width * (len(estimators) - 1) / 2)
    ax.set_xticklabels(params)
    ax.set_title(result["name"])
    ax.legend(fontsize=8)
    _save(fig, out / "fit_estimates.png", made)


def _render_trace(stem, directory, out, made):
    hist_h, hist_rows = _read_csv(directory / f"{stem}.hist.csv")
    dens_path = directory / f"{stem}.density.csv"
    dens_rows = _read_csv(dens_path)[1] if dens_path.exists() else []
    params = list(dict.fromkeys(r[0] for r in hist_rows))
    for param in params:
        sub = [r for r in hist_rows if r[0] == param]
        lo = np.array([float(r[1]) for r in sub])
        hi = np.array([float(r[2]) for r in sub])
        counts = np.array([float(r[3]) for r in sub])
        widths = hi - lo
        total = counts.sum()
        dens_scale = counts / np.where(widths * total > 0, widths * total, 1.0)
        fig, ax = plt.subplots(figsize=(4.4, 3.2))
        ax.bar(lo, dens_scale, widths, align="edge", color="#9fc2e0", edgecolor="white")
        d = [(float(r[1]), float(r[2])) for r in dens_rows if r[0] == param]
        if d:
            gx, gy = zip(*d)
            ax.plot(gx, gy, c="#13335a", lw=1.6)
        ax.set_title(f"{stem}: {param}")
        ax.set_ylabel("density")
        _save(fig, out / f"{stem}_{param}_posterior.png", made)

    acf_path = directory / f"{stem}.acf.csv"
    if acf_path.exists():
        _, acf_rows = _read_csv(acf_path)
        fig, ax = plt.subplots(figsize=(4.4, 3.0))
        for param in params:
            pts = [(int(r[1]), float(r[2])) for r in acf_rows if r[0] == param]
            if pts:
                lags, vals = zip(*pts)
                ax.plot(lags, vals, "o-", ms=3, label=param)
        ax.axhline(0.0, c="k", lw=0.8)
        ax.set_xlabel("lag")
        ax.set_ylabel("acf")
        ax.set_title(stem)
        ax.legend(fontsize=8)
        _save(fig, out / f"{stem}_acf.png", made)

    mb_path = directory / f"{stem}.mean_blocks.csv"
    if mb_path.exists():
        _, mb_rows = _read_csv(mb_path)
        fig, ax = plt.subplots(figsize=(4.6, 2.8))
        ax.plot([int(r[0]) for r in mb_rows], [float(r[1]) for r in mb_rows], lw=0.7)
        ax.set_xlabel("iteration")
        ax.set_ylabel("mean blocks")
        ax.set_title(stem)
        _save(fig, out / f"{stem}_mean_blocks.png", made)


_RESULT_RENDERERS = {
    "rmse-maxstable": _render_rmse,
    "rmse-clayton": _render_rmse,
    "rmse-margins": _render_rmse,
    "coverage": _render_coverage,
    "bayes-factor": _render_bayes_factor,
    "single-fit": _render_single_fit,
}


def render_report(directory, out_dir=None):
    """Render figures for an experiment or diagnostics directory.

    Looks for results.json (experiment tables) and *.hist.csv families
    (diagnose output). Returns the list of files written."""
    directory = Path(directory)
    out = Path(out_dir) if out_dir is not None else directory / "figures"
    made = []
    results_path = directory / "results.json"
    todo = []
    if results_path.exists():
        result = json.loads(results_path.read_text())
        renderer = _RESULT_RENDERERS.get(result["kind"])
        if renderer is not None and result["rows"]:
            todo.append(lambda: renderer(result, out, made))
    stems = [p.name[: -len(".hist.csv")] for p in sorted(directory.glob("*.hist.csv"))]
    todo.extend((lambda s=s: _render_trace(s, directory, out, made)) for s in stems)
    if not todo:
        raise FileNotFoundError(f"nothing to render in {directory}")
    out.mkdir(parents=True, exist_ok=True)
    for fn in todo:
        fn()
    return made
