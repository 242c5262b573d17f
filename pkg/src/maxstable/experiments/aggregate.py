"""Deterministic aggregation of job markers into result tables and checks.

Reads manifest.json plus jobs/*.json and writes:
  replicates.csv   raw per-replicate estimates (the audit trail)
  results.csv      the summary table, scaled like the published conventions
  results.json     same content plus failure records, machine readable
  checks.json      manifest-declared assertions evaluated against the table

Tables depend only on the marker contents, never on wall-clock or ordering,
so identical manifests give byte-identical files.
"""

import csv
import io
import json
import math
from pathlib import Path

import numpy as np

from .manifest import ExperimentManifest, cell_label

# published tables print dependence errors times 1e4 and margin errors
# times 1e3; keeping that makes side-by-side reading painless
SCALES = {"rmse-maxstable": 1e4, "rmse-clayton": 1e4, "rmse-margins": 1e3}


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _write_csv(path, header, rows):
    # cell labels contain commas, so fields need real CSV quoting
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows([_fmt(v) for v in row] for row in rows)
    Path(path).write_text(buf.getvalue())


def load_job_markers(out_dir, man):
    """All job payloads in job order, plus the list of missing (ci, rep)."""
    payloads, missing = [], []
    for ci, rep in man.jobs():
        p = Path(out_dir) / "jobs" / f"cell{ci:03d}_rep{rep:04d}.json"
        if p.exists():
            payloads.append(json.loads(p.read_text()))
        else:
            missing.append([ci, rep])
    return payloads, missing


def _rmse_stats(errors):
    """RMSE, bias and a delta-method MC standard error for the RMSE."""
    e = np.asarray(errors, dtype=float)
    sq = e * e
    rmse = math.sqrt(sq.mean())
    bias = float(e.mean())
    if e.size > 1 and rmse > 0:
        se = float(sq.std(ddof=1) / math.sqrt(sq.size) / (2.0 * rmse))
    else:
        se = 0.0
    return rmse, bias, se


def _aggregate_rmse(man, jobs_by_cell):
    scale = SCALES[man.kind]
    rows, raw = [], []
    for ci, cell in enumerate(man.cells):
        label = cell_label(cell, ci)
        ok = jobs_by_cell.get(ci, [])
        if not ok:
            continue
        params = list(ok[0]["truth"])
        for est in man.estimators:
            for param in params:
                errs, ests = [], []
                for j in ok:
                    if est in j["estimates"] and param in j["estimates"][est]:
                        ests.append((j["rep"], j["estimates"][est][param], j["truth"][param]))
                        errs.append(ests[-1][1] - ests[-1][2])
                if not errs:
                    continue
                rmse, bias, se = _rmse_stats(errs)
                rows.append((label, est, param, rmse * scale, bias * scale, se * scale))
                raw.extend((label, rep, est, param, e, t) for rep, e, t in ests)
    header = ("cell", "estimator", "param", "rmse", "bias", "mc_se")
    raw_header = ("cell", "rep", "estimator", "param", "estimate", "truth")
    return header, rows, raw_header, raw


def _aggregate_coverage(man, jobs_by_cell):
    rows, raw = [], []
    for ci, cell in enumerate(man.cells):
        label = cell_label(cell, ci)
        ok = jobs_by_cell.get(ci, [])
        if not ok:
            continue
        hits = np.array([bool(j["hit"]) for j in ok])
        p = float(hits.mean())
        se = math.sqrt(p * (1.0 - p) / hits.size)
        rows.append((label, "bayes", p, se, hits.size))
        raw.extend(
            (label, j["rep"], int(j["hit"]), j["ci"][0], j["ci"][1],
             j["estimates"]["bayes"]["theta"])
            for j in ok
        )
    header = ("cell", "estimator", "coverage", "mc_se", "n")
    raw_header = ("cell", "rep", "hit", "ci_lo", "ci_hi", "median")
    return header, rows, raw_header, raw


def _aggregate_bayes_factor(man, jobs_by_cell):
    rows, raw = [], []
    for ci, cell in enumerate(man.cells):
        label = cell_label(cell, ci)
        ok = jobs_by_cell.get(ci, [])
        if not ok:
            continue
        vals = np.array([j["b12_effective"] for j in ok], dtype=float)
        n_bounded = sum(1 for j in ok if j["b12"] is None)
        rows.append(
            (label, float(np.median(vals)), float((vals > 1.0).mean()), n_bounded, vals.size)
        )
        raw.extend((label, j["rep"], j["b12_effective"], j["p_zero"]) for j in ok)
    header = ("cell", "median_b12", "frac_support_null", "n_bounded", "n")
    raw_header = ("cell", "rep", "b12_effective", "p_zero")
    return header, rows, raw_header, raw


def _aggregate_single_fit(man, jobs_by_cell):
    rows = []
    for ok in jobs_by_cell.values():
        for j in ok:
            for est in man.estimators:
                if est in j["estimates"]:
                    for param, val in j["estimates"][est].items():
                        rows.append((est, param, val))
    return ("estimator", "param", "estimate"), rows, None, None


def _aggregate_simulate_only(man, jobs_by_cell):
    rows = []
    for ci, cell in enumerate(man.cells):
        label = cell_label(cell, ci)
        for j in jobs_by_cell.get(ci, []):
            rows.append((label, j["rep"], j["path"], j["n"], j["k"]))
    return ("cell", "rep", "path", "n", "k"), rows, None, None


def _row_maps(man, rows):
    """Index the summary rows for check evaluation."""
    labels = [cell_label(c, i) for i, c in enumerate(man.cells)]
    rmse, se, coverage, bf = {}, {}, {}, {}
    if man.kind in SCALES:
        for label, est, param, r, _, s in rows:
            ci = labels.index(label)
            rmse[(ci, est, param)] = r
            se[(ci, est, param)] = s
    elif man.kind == "coverage":
        for label, _, p, _, _ in rows:
            coverage[labels.index(label)] = p
    elif man.kind == "bayes-factor":
        for label, med, _, _, _ in rows:
            bf[labels.index(label)] = med
    return rmse, se, coverage, bf


def evaluate_checks(man, rows):
    """Evaluate manifest checks against the summary rows.

    A check whose inputs are missing (failed jobs upstream) fails with
    observed None rather than passing silently.
    """
    rmse, se, coverage, bf = _row_maps(man, rows)
    out = []
    for chk in man.checks:
        t, ci = chk["type"], chk["cell"]
        entry = dict(chk)
        observed, ok = None, False
        try:
            if t == "rmse-ordering":
                vals = [rmse[(ci, e, chk["param"])] for e in chk["estimators"]]
                observed = vals
                ok = all(a < b for a, b in zip(vals, vals[1:]))
            elif t == "rmse-ratio":
                ratio = rmse[(ci, chk["num"], chk["param"])] / rmse[(ci, chk["den"], chk["param"])]
                observed = ratio
                ok = True
                if "max" in chk:
                    ok = ok and ratio < chk["max"]
                if "min" in chk:
                    ok = ok and ratio > chk["min"]
            elif t == "rmse-gap-se":
                a = rmse[(ci, chk["smaller"], chk["param"])]
                b = rmse[(ci, chk["larger"], chk["param"])]
                sa = se[(ci, chk["smaller"], chk["param"])]
                sb = se[(ci, chk["larger"], chk["param"])]
                k_se = chk.get("k_se", 2.0)
                gap, combined = b - a, math.hypot(sa, sb)
                observed = {"gap": gap, "combined_se": combined}
                ok = gap > k_se * combined
            elif t == "rmse-spread":
                observed = {}
                ok = True
                for param in chk["params"]:
                    vals = [rmse[(ci, e, param)] for e in man.estimators if (ci, e, param) in rmse]
                    rel = max(vals) / min(vals) - 1.0
                    observed[param] = rel
                    ok = ok and rel <= chk["max_rel"]
            elif t == "coverage-range":
                observed = coverage[ci]
                ok = chk["lo"] <= observed <= chk["hi"]
            elif t == "bf-median":
                observed = bf[ci]
                ok = observed > chk["value"] if chk["op"] == ">" else observed < chk["value"]
        except (KeyError, IndexError, ValueError, ZeroDivisionError):
            observed, ok = None, False
        entry["observed"] = observed
        entry["pass"] = bool(ok)
        out.append(entry)
    return out


_AGGREGATORS = {
    "rmse-maxstable": _aggregate_rmse,
    "rmse-clayton": _aggregate_rmse,
    "rmse-margins": _aggregate_rmse,
    "coverage": _aggregate_coverage,
    "bayes-factor": _aggregate_bayes_factor,
    "single-fit": _aggregate_single_fit,
    "simulate-only": _aggregate_simulate_only,
}


def aggregate(out_dir):
    """Aggregate an experiment directory; writes tables, returns the result."""
    out = Path(out_dir)
    man = ExperimentManifest.from_json(out / "manifest.json")
    payloads, missing = load_job_markers(out, man)
    failures = [
        {"cell_idx": p["cell_idx"], "rep": p["rep"], "error": p["error"]}
        for p in payloads
        if "error" in p
    ]
    jobs_by_cell = {}
    for p in payloads:
        if "error" not in p:
            jobs_by_cell.setdefault(p["cell_idx"], []).append(p)
    for v in jobs_by_cell.values():
        v.sort(key=lambda p: p["rep"])

    header, rows, raw_header, raw = _AGGREGATORS[man.kind](man, jobs_by_cell)
    _write_csv(out / "results.csv", header, rows)
    if raw_header is not None:
        _write_csv(out / "replicates.csv", raw_header, raw)

    checks = evaluate_checks(man, rows)
    checks_path = out / "checks.json"
    checks_path.write_text(json.dumps(checks, sort_keys=True, indent=1) + "\n")

    result = {
        "kind": man.kind,
        "name": man.name,
        "scale": SCALES.get(man.kind, 1.0),
        "header": list(header),
        "rows": [list(r) for r in rows],
        "checks": checks,
        "n_jobs": len(man.jobs()),
        "n_ok": len(payloads) - len(failures),
        "n_failed": len(failures),
        "n_missing": len(missing),
        "failures": failures,
        "missing": missing,
    }
    result["ok"] = (
        result["n_failed"] == 0
        and result["n_missing"] == 0
        and all(c["pass"] for c in checks)
    )
    (out / "results.json").write_text(json.dumps(result, sort_keys=True, indent=1) + "\n")
    return result
