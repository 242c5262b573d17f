"""Experiment manifests: validated JSON descriptions of simulation studies.

A manifest pins everything needed to reproduce a study: the kind of
experiment, the grid of cells, replicate count, sample sizes, estimator set,
chain settings and the master seed. Expansion to (cell, replicate) jobs is
deterministic, so two runs of the same manifest do the same work in the same
order.
"""

import json
from pathlib import Path

from ..inference import McmcConfig

KINDS = (
    "rmse-maxstable",
    "rmse-clayton",
    "rmse-margins",
    "coverage",
    "bayes-factor",
    "single-fit",
    "simulate-only",
)

ESTIMATORS = ("bayes", "pairwise", "independence", "stephenson-tawn")

_ALLOWED_ESTIMATORS = {
    "rmse-maxstable": ("bayes", "pairwise"),
    "rmse-clayton": ("bayes", "pairwise", "stephenson-tawn"),
    "rmse-margins": ("bayes", "pairwise", "independence"),
    "coverage": ("bayes",),
    "bayes-factor": ("bayes",),
    "single-fit": ESTIMATORS,
    "simulate-only": (),
}

_CHECK_TYPES = (
    "rmse-ordering",
    "rmse-ratio",
    "rmse-gap-se",
    "rmse-spread",
    "coverage-range",
    "bf-median",
)

_TOP_KEYS = {
    "kind",
    "name",
    "master_seed",
    "replicates",
    "n_samples",
    "cells",
    "estimators",
    "mcmc",
    "checks",
    "out",
    "k",
    "mu",
    "sigma",
    "theta0",
    "xi_alpha",
    "slab_sd",
    "level",
    "margins",
}


class ManifestError(ValueError):
    pass


def _require(cond, msg):
    if not cond:
        raise ManifestError(msg)


def _check_theta(x, where):
    _require(isinstance(x, (int, float)) and 0.0 < x < 1.0, f"{where}: theta0 must be in (0, 1)")


def _check_k(x, where):
    _require(isinstance(x, int) and x >= 2, f"{where}: k must be an integer >= 2")


def _validate_cell(kind, cell, idx):
    where = f"cells[{idx}]"
    _require(isinstance(cell, dict), f"{where} must be an object")
    keys = set(cell) - {"label"}
    if kind == "rmse-maxstable":
        if "spec" in cell:
            _require(
                keys == {"spec", "truth"},
                f"{where}: a spec cell needs exactly spec and truth",
            )
            _require(
                isinstance(cell["truth"], dict) and cell["truth"],
                f"{where}: truth must map parameter names to values",
            )
        else:
            _require(keys == {"k", "theta0"}, f"{where} needs exactly k and theta0")
            _check_k(cell["k"], where)
            _check_theta(cell["theta0"], where)
    elif kind == "rmse-clayton":
        _require(keys == {"k", "theta0", "b"}, f"{where} needs exactly k, theta0 and b")
        _check_k(cell["k"], where)
        _check_theta(cell["theta0"], where)
        _require(isinstance(cell["b"], int) and cell["b"] >= 1, f"{where}: b must be >= 1")
    elif kind == "rmse-margins":
        _require(keys == {"theta0", "xi"}, f"{where} needs exactly theta0 and xi")
        _check_theta(cell["theta0"], where)
        _require(isinstance(cell["xi"], (int, float)), f"{where}: xi must be numeric")
    elif kind == "coverage":
        _require(keys == {"k", "theta0"}, f"{where} needs exactly k and theta0")
        _check_k(cell["k"], where)
        _check_theta(cell["theta0"], where)
    elif kind == "bayes-factor":
        _require(keys == {"beta"}, f"{where} needs exactly beta")
        _require(isinstance(cell["beta"], (int, float)), f"{where}: beta must be numeric")
    elif kind == "single-fit":
        if "data_csv" in cell:
            _require(keys == {"data_csv"}, f"{where}: a data cell carries only data_csv")
        else:
            _require(keys == {"k", "theta0"}, f"{where} needs k and theta0 or data_csv")
            _check_k(cell["k"], where)
            _check_theta(cell["theta0"], where)
    elif kind == "simulate-only":
        _require(keys == {"job"}, f"{where} needs exactly a job object")
        _require(isinstance(cell["job"], dict), f"{where}: job must be an object")


def _validate_check(check, idx, cells, estimators):
    where = f"checks[{idx}]"
    _require(isinstance(check, dict), f"{where} must be an object")
    t = check.get("type")
    _require(t in _CHECK_TYPES, f"{where}: type must be one of {_CHECK_TYPES}")
    ci = check.get("cell")
    _require(isinstance(ci, int) and 0 <= ci < len(cells), f"{where}: cell index out of range")
    if t == "rmse-ordering":
        ests = check.get("estimators")
        _require(
            isinstance(ests, list) and len(ests) >= 2 and all(e in estimators for e in ests),
            f"{where}: estimators must list >= 2 estimators from the manifest",
        )
        _require("param" in check, f"{where}: param required")
    elif t == "rmse-ratio":
        _require(
            check.get("num") in estimators and check.get("den") in estimators,
            f"{where}: num and den must be manifest estimators",
        )
        _require("param" in check, f"{where}: param required")
        _require("max" in check or "min" in check, f"{where}: needs max and/or min")
    elif t == "rmse-gap-se":
        _require(
            check.get("smaller") in estimators and check.get("larger") in estimators,
            f"{where}: smaller and larger must be manifest estimators",
        )
        _require("param" in check, f"{where}: param required")
    elif t == "rmse-spread":
        _require(
            isinstance(check.get("params"), list) and check["params"],
            f"{where}: params list required",
        )
        _require(isinstance(check.get("max_rel"), (int, float)), f"{where}: max_rel required")
    elif t == "coverage-range":
        _require(
            isinstance(check.get("lo"), (int, float)) and isinstance(check.get("hi"), (int, float)),
            f"{where}: lo and hi required",
        )
    elif t == "bf-median":
        _require(check.get("op") in (">", "<"), f"{where}: op must be > or <")
        _require(isinstance(check.get("value"), (int, float)), f"{where}: value required")


def _normalize(raw):
    _require(isinstance(raw, dict), "manifest must be a JSON object")
    unknown = set(raw) - _TOP_KEYS
    _require(not unknown, f"unknown manifest keys: {sorted(unknown)}")
    kind = raw.get("kind")
    _require(kind in KINDS, f"kind must be one of {KINDS}")
    out = {"kind": kind, "name": raw.get("name", kind)}
    _require(isinstance(out["name"], str) and out["name"], "name must be a non-empty string")

    seed = raw.get("master_seed")
    _require(isinstance(seed, int) and 0 <= seed < 2**63, "master_seed must be a non-negative int")
    out["master_seed"] = seed

    default_r = 1 if kind in ("single-fit", "simulate-only") else None
    r = raw.get("replicates", default_r)
    _require(isinstance(r, int) and r >= 1, "replicates must be an integer >= 1")
    if kind == "single-fit":
        _require(r == 1, "single-fit runs exactly one replicate")
    out["replicates"] = r

    cells = raw.get("cells")
    _require(isinstance(cells, list) and cells, "cells must be a non-empty list")
    if kind == "single-fit":
        _require(len(cells) == 1, "single-fit takes exactly one cell")
    for i, c in enumerate(cells):
        _validate_cell(kind, c, i)
    labels = [cell_label(c, i) for i, c in enumerate(cells)]
    _require(len(set(labels)) == len(labels), "cells must have distinct labels")
    out["cells"] = cells

    if kind != "simulate-only":
        needs_n = kind != "single-fit" or "data_csv" not in cells[0]
        if needs_n:
            n = raw.get("n_samples")
            _require(isinstance(n, int) and n >= 1, "n_samples must be an integer >= 1")
            out["n_samples"] = n

    allowed = _ALLOWED_ESTIMATORS[kind]
    ests = raw.get("estimators", list(allowed))
    _require(isinstance(ests, list), "estimators must be a list")
    for e in ests:
        _require(e in allowed, f"estimator {e!r} not valid for kind {kind}")
    _require(len(set(ests)) == len(ests), "duplicate estimators")
    if kind not in ("simulate-only",):
        _require(ests, "at least one estimator required")
    out["estimators"] = ests

    mcmc = {"n_iter": 1500, "burn_in": 500}
    mcmc.update(raw.get("mcmc", {}))
    try:
        McmcConfig(**mcmc)
    except (TypeError, ValueError) as e:
        raise ManifestError(f"bad mcmc settings: {e}") from None
    out["mcmc"] = mcmc

    # kind-specific scalars shared across cells
    if kind == "rmse-margins":
        _check_k(raw.get("k"), "manifest")
        out["k"] = raw["k"]
        out["mu"] = float(raw.get("mu", 1.0))
        out["sigma"] = float(raw.get("sigma", 1.0))
        _require(out["sigma"] > 0, "sigma must be positive")
    elif kind == "bayes-factor":
        _check_k(raw.get("k"), "manifest")
        out["k"] = raw["k"]
        _check_theta(raw.get("theta0", 0.5), "manifest")
        out["theta0"] = float(raw.get("theta0", 0.5))
        out["mu"] = float(raw.get("mu", 1.0))
        out["sigma"] = float(raw.get("sigma", 1.0))
        _require(out["sigma"] > 0, "sigma must be positive")
        out["xi_alpha"] = float(raw.get("xi_alpha", 1.0))
        out["slab_sd"] = float(raw.get("slab_sd", 0.5))
        _require(out["slab_sd"] > 0, "slab_sd must be positive")
    elif kind == "coverage":
        level = float(raw.get("level", 0.95))
        _require(0.0 < level < 1.0, "level must be in (0, 1)")
        out["level"] = level
    elif kind == "single-fit":
        margins = raw.get("margins", "fixed")
        _require(margins in ("fixed", "common"), "margins must be fixed or common")
        out["margins"] = margins

    checks = raw.get("checks", [])
    _require(isinstance(checks, list), "checks must be a list")
    for i, c in enumerate(checks):
        _validate_check(c, i, cells, out["estimators"])
    out["checks"] = checks

    if "out" in raw:
        _require(isinstance(raw["out"], str) and raw["out"], "out must be a non-empty string")
        out["out"] = raw["out"]
    return out


class ExperimentManifest:
    """Validated, normalized manifest with deterministic job expansion."""

    __slots__ = ("raw",)

    def __init__(self, raw):
        self.raw = _normalize(raw)

    @classmethod
    def from_json(cls, path):
        try:
            raw = json.loads(Path(path).read_text())
        except json.JSONDecodeError as e:
            raise ManifestError(f"{path}: not valid JSON ({e})") from None
        return cls(raw)

    def to_json(self, path):
        Path(path).write_text(json.dumps(self.raw, sort_keys=True, indent=1) + "\n")

    @property
    def kind(self):
        return self.raw["kind"]

    @property
    def name(self):
        return self.raw["name"]

    @property
    def master_seed(self):
        return self.raw["master_seed"]

    @property
    def replicates(self):
        return self.raw["replicates"]

    @property
    def n_samples(self):
        return self.raw.get("n_samples")

    @property
    def cells(self):
        return self.raw["cells"]

    @property
    def estimators(self):
        return self.raw["estimators"]

    @property
    def checks(self):
        return self.raw["checks"]

    def mcmc_config(self):
        return McmcConfig(**self.raw["mcmc"])

    def jobs(self):
        return [(ci, rep) for ci in range(len(self.cells)) for rep in range(self.replicates)]


def cell_label(cell, idx):
    """Compact deterministic label, e.g. 'k=6,theta0=0.7'."""
    if "label" in cell:
        return str(cell["label"])
    order = ("k", "theta0", "b", "beta", "xi", "data_csv")
    keys = [k for k in order if k in cell]
    keys += sorted(k for k in cell if k not in order and k not in ("spec", "truth", "job"))
    if not keys:
        return f"cell{idx}"
    return ",".join(f"{k}={cell[k]:g}" if isinstance(cell[k], float) else f"{k}={cell[k]}" for k in keys)
