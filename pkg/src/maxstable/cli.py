"""Command line entry points for simulation, fitting, experiments and reports."""

import json
import sys
from pathlib import Path

import click
import numpy as np

from .experiments import ManifestError, diagnose, resume_experiment, run_experiment
from .inference import (
    EstimationError,
    McmcConfig,
    independence_mle,
    make_parameterization,
    pairwise_mle,
    posterior_summary,
    run_chain,
    stephenson_tawn_mle,
)
from .models import LogisticParams, ModelSpec
from .simulate import SimJob, read_datasets, run_job, write_datasets


@click.group()
def main():
    """Max-stable dependence estimation with latent partition chains."""


@main.command()
@click.option("--theta", required=True, type=float, help="Logistic dependence parameter.")
@click.option("--k", "k", required=True, type=int, help="Dimension.")
@click.option("-n", "--n-samples", required=True, type=int, help="Observations to draw.")
@click.option(
    "--mode",
    type=click.Choice(["exact-max-stable", "block-maxima"]),
    default="exact-max-stable",
    show_default=True,
)
@click.option("--block-size", type=int, default=None, help="Block length for block-maxima mode.")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option(
    "--out",
    type=click.Path(dir_okay=False, writable=True),
    default="data.csv",
    show_default=True,
)
def simulate(theta, k, n_samples, mode, block_size, seed, out):
    """Draw a logistic max-stable sample (or Clayton block maxima) to CSV."""
    spec = ModelSpec(LogisticParams(theta), k=k)
    job = SimJob(spec, n_samples, seed, mode=mode, block_size=block_size)
    ds = run_job(job)
    write_datasets(out, [ds])
    click.echo(f"wrote {n_samples} x {k} samples to {out}")


@main.command()
@click.argument("data_csv", type=click.Path(exists=True, dir_okay=False))
@click.option(
    "--method",
    "-m",
    "methods",
    multiple=True,
    type=click.Choice(["bayes", "pairwise", "independence", "stephenson-tawn"]),
    default=("bayes",),
    show_default=True,
)
@click.option(
    "--margins",
    type=click.Choice(["fixed", "common"]),
    default="fixed",
    show_default=True,
    help="fixed: data already unit Frechet; common: estimate shared GEV margins.",
)
@click.option("--n-iter", type=int, default=1500, show_default=True)
@click.option("--burn-in", type=int, default=500, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", type=click.Path(file_okay=False), default="fit", show_default=True)
def fit(data_csv, methods, margins, n_iter, burn_in, seed, out):
    """Fit dependence (and optionally margins) to a dataset by one or more methods."""
    ds = read_datasets(data_csv)[0]
    x = ds.values
    template = ModelSpec(LogisticParams(0.5), k=x.shape[1])
    out_dir = Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)
    summary, failed = {}, []
    for method in methods:
        try:
            if method == "bayes":
                par = make_parameterization(
                    template, margins=margins, data=x if margins == "common" else None
                )
                cfg = McmcConfig(n_iter=n_iter, burn_in=burn_in)
                trace = run_chain(x, par, cfg, seed=seed)
                summ = posterior_summary(trace)
                trace.to_csv(out_dir / "trace.csv")
                summary["bayes"] = summ
                line = ", ".join(
                    f"{name}={summ['params'][name]['median']:.4f}" for name in trace.names
                )
            elif method == "pairwise":
                fit_res = pairwise_mle(x, estimate_margins=margins == "common", seed=seed)
                summary["pairwise"] = {"params": fit_res.params, "loglik": fit_res.loglik}
                line = ", ".join(f"{p}={v:.4f}" for p, v in fit_res.params.items())
            elif method == "independence":
                fit_res = independence_mle(x, seed=seed)
                summary["independence"] = {"params": fit_res.params, "loglik": fit_res.loglik}
                line = ", ".join(f"{p}={v:.4f}" for p, v in fit_res.params.items())
            else:
                fit_res = stephenson_tawn_mle(ds, seed=seed)
                summary["stephenson-tawn"] = {"params": fit_res.params, "loglik": fit_res.loglik}
                line = ", ".join(f"{p}={v:.4f}" for p, v in fit_res.params.items())
            click.echo(f"{method}: {line}")
        except (EstimationError, ValueError) as e:
            failed.append(method)
            summary[method] = {"error": str(e)}
            click.echo(f"{method}: FAILED ({e})", err=True)
    (out_dir / "summary.json").write_text(json.dumps(summary, sort_keys=True, indent=1) + "\n")
    click.echo(f"summary written to {out_dir / 'summary.json'}")
    if failed:
        sys.exit(1)


@main.group()
def experiment():
    """Run or resume manifest-defined simulation studies."""


def _finish_experiment(result):
    for row in result["rows"]:
        click.echo("  " + ", ".join(str(v) for v in row))
    for chk in result["checks"]:
        status = "pass" if chk["pass"] else "FAIL"
        click.echo(f"check {chk['type']} (cell {chk['cell']}): {status}")
    click.echo(
        f"jobs ok={result['n_ok']} failed={result['n_failed']} missing={result['n_missing']}"
    )
    sys.exit(0 if result["ok"] else 1)


@experiment.command("run")
@click.argument("manifest", type=click.Path(exists=True, dir_okay=False))
@click.option("--out", type=click.Path(file_okay=False), default=None, help="Output directory.")
@click.option("--workers", type=int, default=1, show_default=True)
@click.option("--seed", type=int, default=None, help="Override the manifest master seed.")
def experiment_run(manifest, out, workers, seed):
    """Run every job in MANIFEST, then aggregate and evaluate its checks."""
    try:
        raw = json.loads(Path(manifest).read_text())
    except json.JSONDecodeError as e:
        raise click.ClickException(f"{manifest}: not valid JSON ({e})")
    if seed is not None:
        raw["master_seed"] = seed
    out = out or raw.get("out") or (Path(manifest).stem + "-out")
    try:
        result = run_experiment(raw, out, workers=workers)
    except ManifestError as e:
        raise click.ClickException(str(e))
    _finish_experiment(result)


@experiment.command("resume")
@click.argument("directory", type=click.Path(exists=True, file_okay=False))
@click.option("--workers", type=int, default=1, show_default=True)
def experiment_resume(directory, workers):
    """Finish the remaining jobs of an interrupted experiment DIRECTORY."""
    try:
        result = resume_experiment(directory, workers=workers)
    except ManifestError as e:
        raise click.ClickException(str(e))
    _finish_experiment(result)


@main.command("diagnose")
@click.argument("traces", nargs=-1, required=True, type=click.Path(exists=True, dir_okay=False))
@click.option(
    "--out", type=click.Path(file_okay=False), default="diagnostics", show_default=True
)
@click.option("--bins", type=int, default=40, show_default=True)
def diagnose_cmd(traces, out, bins):
    """Emit plot-ready CSV diagnostics for one or more chain trace files."""
    try:
        info = diagnose(traces, out, bins=bins)
    except ValueError as e:
        raise click.ClickException(str(e))
    click.echo(f"{info['n_traces']} trace(s), {len(info['files'])} files in {out}")
    if info["replication_pass"] is not None:
        status = "pass" if info["replication_pass"] else "FAIL"
        click.echo(f"seed replication ({info['replication_pairs']} pairs): {status}")
        if not info["replication_pass"]:
            sys.exit(1)


@main.command("report")
@click.argument("directory", type=click.Path(exists=True, file_okay=False))
@click.option("--out", type=click.Path(file_okay=False), default=None, help="Figure directory.")
def report_cmd(directory, out):
    """Render PNG figures from experiment tables or diagnostics CSVs."""
    from .experiments.report import render_report

    try:
        made = render_report(directory, out_dir=out)
    except FileNotFoundError as e:
        raise click.ClickException(str(e))
    for p in made:
        click.echo(p)
    click.echo(f"{len(made)} figure(s)")


if __name__ == "__main__":
    main()
