"""Run manifest-defined simulation studies job by job.

Each (cell, replicate) job simulates its own data, fits the requested
estimators and writes one JSON marker file. Markers make runs resumable:
killing the process and starting again skips every finished job and yields
the same final tables. RNG streams are derived per job from
(master_seed, cell index, replicate), so parallel and serial execution draw
identical data.
"""

import json
import os
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from ..inference import (
    bayes_factor_trend,
    independence_mle,
    make_parameterization,
    pairwise_mle,
    posterior_summary,
    run_chain,
    stephenson_tawn_mle,
)
from ..models import GevMargin, LogisticParams, ModelSpec, frechet_to_gev
from ..simulate import (
    SimJob,
    read_datasets,
    run_job,
    sample_block_maxima_clayton,
    sample_logistic,
    sample_max_stable,
    write_datasets,
)
from .aggregate import aggregate
from .manifest import ExperimentManifest, ManifestError


def job_marker(out_dir, cell_idx, rep):
    return Path(out_dir) / "jobs" / f"cell{cell_idx:03d}_rep{rep:04d}.json"


def write_json_atomic(path, payload):
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(json.dumps(payload, sort_keys=True, indent=1) + "\n")
    os.replace(tmp, path)


def _streams(master_seed, cell_idx, rep):
    """Independent per-job streams: data rng, chain seed, optimizer seed."""
    ss = np.random.SeedSequence((master_seed, cell_idx, rep))
    data_ss, chain_ss, opt_ss = ss.spawn(3)
    return np.random.default_rng(data_ss), chain_ss, int(opt_ss.generate_state(1)[0])


def _bayes_fit(values, template, man, chain_seed, margins="fixed", data_for_inits=None):
    par = make_parameterization(template, margins=margins, data=data_for_inits)
    trace = run_chain(values, par, man.mcmc_config(), seed=chain_seed)
    summ = posterior_summary(trace)
    medians = {name: summ["params"][name]["median"] for name in trace.names}
    return trace, summ, medians


def _run_rmse_maxstable(man, cell, cell_idx, rep, out_dir):
    data_rng, chain_ss, opt_seed = _streams(man.master_seed, cell_idx, rep)
    if "spec" in cell:
        template = ModelSpec.from_dict(cell["spec"])
        truth = dict(cell["truth"])
        z = sample_max_stable(template, man.n_samples, data_rng)
    else:
        template = ModelSpec(LogisticParams(0.5), k=cell["k"])
        truth = {"theta": cell["theta0"]}
        z = sample_logistic(cell["theta0"], cell["k"], data_rng, n=man.n_samples)
    estimates, extras = {}, {}
    for name in man.estimators:
        if name == "bayes":
            _, summ, medians = _bayes_fit(z, template, man, chain_ss)
            estimates["bayes"] = {p: medians[p] for p in truth}
            extras["mean_blocks"] = summ["mean_blocks"]["mean"]
        else:
            fit = pairwise_mle(z, family=template, seed=opt_seed)
            estimates["pairwise"] = {p: fit.params[p] for p in truth}
    return {"truth": truth, "estimates": estimates, **extras}


def _run_rmse_clayton(man, cell, cell_idx, rep, out_dir):
    data_rng, chain_ss, opt_seed = _streams(man.master_seed, cell_idx, rep)
    ds = sample_block_maxima_clayton(
        cell["theta0"], cell["k"], cell["b"], man.n_samples, data_rng
    )
    template = ModelSpec(LogisticParams(0.5), k=cell["k"])
    truth = {"theta": cell["theta0"]}
    estimates, extras = {}, {}
    for name in man.estimators:
        if name == "bayes":
            _, summ, medians = _bayes_fit(ds.values, template, man, chain_ss)
            estimates["bayes"] = {"theta": medians["theta"]}
            extras["mean_blocks"] = summ["mean_blocks"]["mean"]
        elif name == "pairwise":
            estimates["pairwise"] = {
                "theta": pairwise_mle(ds.values, seed=opt_seed).params["theta"]
            }
        else:
            estimates["stephenson-tawn"] = {
                "theta": stephenson_tawn_mle(ds, seed=opt_seed).params["theta"]
            }
    return {"truth": truth, "estimates": estimates, **extras}


def _run_rmse_margins(man, cell, cell_idx, rep, out_dir):
    data_rng, chain_ss, opt_seed = _streams(man.master_seed, cell_idx, rep)
    k = man.raw["k"]
    mu, sigma, xi = man.raw["mu"], man.raw["sigma"], cell["xi"]
    truth = {"mu": mu, "sigma": sigma, "xi": xi}
    z = sample_logistic(cell["theta0"], k, data_rng, n=man.n_samples)
    x = frechet_to_gev(z, (GevMargin(mu, sigma, xi),) * k)
    template = ModelSpec(LogisticParams(0.5), k=k)
    estimates = {}
    for name in man.estimators:
        if name == "bayes":
            _, _, medians = _bayes_fit(
                x, template, man, chain_ss, margins="common", data_for_inits=x
            )
            estimates["bayes"] = {p: medians[p] for p in truth}
        elif name == "pairwise":
            fit = pairwise_mle(x, estimate_margins=True, seed=opt_seed)
            estimates["pairwise"] = {p: fit.params[p] for p in truth}
        else:
            fit = independence_mle(x, seed=opt_seed)
            estimates["independence"] = {p: fit.params[p] for p in truth}
    return {"truth": truth, "estimates": estimates}


def _run_coverage(man, cell, cell_idx, rep, out_dir):
    data_rng, chain_ss, _ = _streams(man.master_seed, cell_idx, rep)
    theta0 = cell["theta0"]
    z = sample_logistic(theta0, cell["k"], data_rng, n=man.n_samples)
    template = ModelSpec(LogisticParams(0.5), k=cell["k"])
    par = make_parameterization(template)
    trace = run_chain(z, par, man.mcmc_config(), seed=chain_ss)
    summ = posterior_summary(trace, level=man.raw["level"])
    lo, hi = summ["params"]["theta"]["ci"]
    return {
        "truth": {"theta": theta0},
        "estimates": {"bayes": {"theta": summ["params"]["theta"]["median"]}},
        "ci": [lo, hi],
        "hit": bool(lo <= theta0 <= hi),
    }


def _run_bayes_factor(man, cell, cell_idx, rep, out_dir):
    data_rng, chain_ss, _ = _streams(man.master_seed, cell_idx, rep)
    k = man.raw["k"]
    beta = cell["beta"]
    margins = [
        GevMargin(man.raw["mu"], man.raw["sigma"], man.raw["xi_alpha"] + (i + 1) * beta)
        for i in range(k)
    ]
    z = sample_logistic(man.raw["theta0"], k, data_rng, n=man.n_samples)
    x = frechet_to_gev(z, margins)
    out = bayes_factor_trend(
        x,
        template=ModelSpec(LogisticParams(man.raw["theta0"]), k=k),
        config=man.mcmc_config(),
        seed=chain_ss,
        slab_sd=man.raw["slab_sd"],
    )
    if out["b12"] is not None:
        b12_eff = out["b12"]
    elif "upper_bound" in out:
        b12_eff = out["upper_bound"]
    else:
        b12_eff = out["lower_bound"]
    return {
        "truth": {"beta": beta},
        "b12": out["b12"],
        "b12_effective": b12_eff,
        "p_zero": out["p_zero"],
        "n_zero": out["n_zero"],
        "n_nonzero": out["n_nonzero"],
    }


def _run_single_fit(man, cell, cell_idx, rep, out_dir):
    data_rng, chain_ss, opt_seed = _streams(man.master_seed, cell_idx, rep)
    if "data_csv" in cell:
        ds = read_datasets(cell["data_csv"])[0]
        x = ds.values
        template = ModelSpec(LogisticParams(0.5), k=x.shape[1])
    else:
        x = sample_logistic(cell["theta0"], cell["k"], data_rng, n=man.n_samples)
        ds = None
        template = ModelSpec(LogisticParams(0.5), k=cell["k"])
    margins = man.raw["margins"]
    estimates = {}
    for name in man.estimators:
        if name == "bayes":
            trace, summ, medians = _bayes_fit(
                x, template, man, chain_ss, margins=margins, data_for_inits=x
            )
            estimates["bayes"] = medians
            trace.to_csv(Path(out_dir) / "trace.csv")
            write_json_atomic(Path(out_dir) / "posterior.json", summ)
        elif name == "pairwise":
            fit = pairwise_mle(
                x, estimate_margins=margins == "common", seed=opt_seed
            )
            estimates["pairwise"] = dict(fit.params)
        elif name == "independence":
            estimates["independence"] = dict(independence_mle(x, seed=opt_seed).params)
        else:
            if ds is None or ds.partitions is None:
                raise ValueError("stephenson-tawn needs a dataset with partitions")
            estimates["stephenson-tawn"] = dict(stephenson_tawn_mle(ds, seed=opt_seed).params)
    return {"estimates": estimates}


def _run_simulate_only(man, cell, cell_idx, rep, out_dir):
    job = SimJob.from_dict(cell["job"])
    ds = run_job(job, replicate=rep)
    rel = f"data/cell{cell_idx:03d}_rep{rep:04d}.csv"
    write_datasets(Path(out_dir) / rel, [ds])
    return {"path": rel, "n": ds.values.shape[0], "k": ds.values.shape[1]}


_KIND_RUNNERS = {
    "rmse-maxstable": _run_rmse_maxstable,
    "rmse-clayton": _run_rmse_clayton,
    "rmse-margins": _run_rmse_margins,
    "coverage": _run_coverage,
    "bayes-factor": _run_bayes_factor,
    "single-fit": _run_single_fit,
    "simulate-only": _run_simulate_only,
}


def run_single_job(raw_manifest, cell_idx, rep, out_dir):
    """Execute one (cell, replicate) job and write its marker. Failures are
    recorded in the marker, not raised, so the experiment keeps going."""
    man = ExperimentManifest(raw_manifest)
    cell = man.cells[cell_idx]
    payload = {"cell_idx": cell_idx, "rep": rep, "cell": cell}
    try:
        payload.update(_KIND_RUNNERS[man.kind](man, cell, cell_idx, rep, out_dir))
    except Exception as e:
        payload["error"] = f"{type(e).__name__}: {e}"
    write_json_atomic(job_marker(out_dir, cell_idx, rep), payload)
    return payload


def run_experiment(manifest, out_dir, workers=1):
    """Expand, run (skipping finished jobs), aggregate, evaluate checks.

    Returns the aggregation result dict; result["ok"] is True only when every
    job succeeded and every manifest check passed.
    """
    if isinstance(manifest, ExperimentManifest):
        man = manifest
    elif isinstance(manifest, dict):
        man = ExperimentManifest(manifest)
    else:
        man = ExperimentManifest.from_json(manifest)
    out = Path(out_dir)
    (out / "jobs").mkdir(parents=True, exist_ok=True)
    if man.kind == "simulate-only":
        (out / "data").mkdir(exist_ok=True)
    man_path = out / "manifest.json"
    if man_path.exists():
        prev = json.loads(man_path.read_text())
        if prev != man.raw:
            raise ManifestError(f"{out} already holds a different manifest")
    else:
        man.to_json(man_path)

    pending = [(ci, rep) for ci, rep in man.jobs() if not job_marker(out, ci, rep).exists()]
    t0 = time.monotonic()
    workers = max(1, int(workers))
    if workers > 1 and len(pending) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [
                pool.submit(run_single_job, man.raw, ci, rep, str(out)) for ci, rep in pending
            ]
            for f in futures:
                f.result()
    else:
        for ci, rep in pending:
            run_single_job(man.raw, ci, rep, str(out))

    result = aggregate(out)
    write_json_atomic(
        out / "run_info.json",
        {
            "jobs_ran": len(pending),
            "workers": workers,
            "runtime_seconds": time.monotonic() - t0,
        },
    )
    return result


def resume_experiment(out_dir, workers=1):
    """Finish a partially run experiment directory."""
    man_path = Path(out_dir) / "manifest.json"
    if not man_path.exists():
        raise ManifestError(f"{out_dir} has no manifest.json to resume")
    return run_experiment(ExperimentManifest.from_json(man_path), out_dir, workers=workers)
