"""Experiment harness: manifests, determinism, resumability, aggregation
audit, diagnostics CSVs, report rendering and the command line."""

import csv
import json
import math
from pathlib import Path

import numpy as np
import pytest
from click.testing import CliRunner

from maxstable import LogisticParams, ModelSpec
from maxstable.cli import main as cli_main
from maxstable.experiments import (
    ExperimentManifest,
    ManifestError,
    cell_label,
    diagnose,
    evaluate_checks,
    job_marker,
    kde_curve,
    resume_experiment,
    run_experiment,
    silverman_bandwidth,
)
from maxstable.inference import McmcConfig, Trace, make_parameterization, run_chain
from maxstable.simulate import sample_logistic


def rmse_manifest(**overrides):
    man = {
        "kind": "rmse-maxstable",
        "master_seed": 11,
        "replicates": 4,
        "n_samples": 40,
        "cells": [{"k": 4, "theta0": 0.4}, {"k": 4, "theta0": 0.7}],
        "estimators": ["bayes", "pairwise"],
        "mcmc": {"n_iter": 200, "burn_in": 80},
    }
    man.update(overrides)
    return man


class TestManifest:
    def test_normalization_and_jobs(self):
        man = ExperimentManifest(rmse_manifest())
        assert man.kind == "rmse-maxstable"
        assert man.name == "rmse-maxstable"
        assert man.jobs() == [(ci, r) for ci in range(2) for r in range(4)]
        assert man.mcmc_config() == McmcConfig(n_iter=200, burn_in=80)

    def test_rejects_bad_input(self):
        with pytest.raises(ManifestError):
            ExperimentManifest(rmse_manifest(kind="rmse"))
        with pytest.raises(ManifestError):
            ExperimentManifest(rmse_manifest(replicates=0))
        with pytest.raises(ManifestError):
            ExperimentManifest(rmse_manifest(cells=[]))
        with pytest.raises(ManifestError):
            ExperimentManifest(rmse_manifest(cells=[{"k": 4}]))
        with pytest.raises(ManifestError):
            ExperimentManifest(rmse_manifest(cells=[{"k": 1, "theta0": 0.5}]))
        with pytest.raises(ManifestError):
            ExperimentManifest(rmse_manifest(estimators=["bayes", "stephenson-tawn"]))
        with pytest.raises(ManifestError):
            ExperimentManifest(rmse_manifest(typo_field=3))
        with pytest.raises(ManifestError):
            ExperimentManifest(rmse_manifest(mcmc={"n_iter": 10, "burn_in": 20}))
        # duplicate cells collide on their label
        with pytest.raises(ManifestError):
            ExperimentManifest(
                rmse_manifest(cells=[{"k": 4, "theta0": 0.4}, {"k": 4, "theta0": 0.4}])
            )

    def test_rejects_bad_checks(self):
        for chk in (
            {"type": "nope", "cell": 0},
            {"type": "rmse-ratio", "cell": 5, "param": "theta", "num": "bayes", "den": "pairwise", "max": 1.0},
            {"type": "rmse-ratio", "cell": 0, "param": "theta", "num": "bayes", "den": "pairwise"},
            {"type": "rmse-ordering", "cell": 0, "param": "theta", "estimators": ["bayes"]},
            {"type": "bf-median", "cell": 0, "op": ">=", "value": 1.0},
        ):
            with pytest.raises(ManifestError):
                ExperimentManifest(rmse_manifest(checks=[chk]))

    def test_kind_specific_requirements(self):
        with pytest.raises(ManifestError):
            ExperimentManifest(
                {
                    "kind": "rmse-margins",
                    "master_seed": 1,
                    "replicates": 2,
                    "n_samples": 10,
                    "cells": [{"theta0": 0.5, "xi": 0.2}],
                }
            )  # missing k
        with pytest.raises(ManifestError):
            ExperimentManifest(
                {
                    "kind": "single-fit",
                    "master_seed": 1,
                    "replicates": 2,
                    "n_samples": 10,
                    "cells": [{"k": 3, "theta0": 0.5}],
                }
            )  # single-fit means one replicate

    def test_cell_labels(self):
        assert cell_label({"k": 6, "theta0": 0.7}, 0) == "k=6,theta0=0.7"
        assert cell_label({"k": 10, "theta0": 0.9, "b": 50}, 0) == "k=10,theta0=0.9,b=50"
        assert cell_label({"beta": 0.02}, 3) == "beta=0.02"
        assert cell_label({"label": "x"}, 0) == "x"
        assert cell_label({"spec": {}, "truth": {}}, 4) == "cell4"


class TestRunExperiment:
    def test_rmse_schema_checks_and_determinism(self, tmp_path):
        man = rmse_manifest(
            checks=[
                {"type": "rmse-ratio", "cell": 1, "param": "theta",
                 "num": "bayes", "den": "pairwise", "max": 100.0},
                {"type": "rmse-gap-se", "cell": 1, "param": "theta",
                 "smaller": "bayes", "larger": "pairwise", "k_se": -100.0},
            ]
        )
        res = run_experiment(man, tmp_path / "a", workers=1)
        assert res["ok"]
        assert res["n_ok"] == 8 and res["n_failed"] == 0 and res["n_missing"] == 0
        header = (tmp_path / "a" / "results.csv").read_text().splitlines()[0].split(",")
        assert {"cell", "estimator", "rmse", "bias", "mc_se"} <= set(header)
        assert all(c["pass"] for c in res["checks"])
        # parallel execution must not change a single byte of the tables
        run_experiment(man, tmp_path / "b", workers=3)
        for name in ("results.csv", "replicates.csv", "results.json", "checks.json"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()

    def test_resume_after_partial_run(self, tmp_path):
        man = rmse_manifest()
        out = tmp_path / "exp"
        res = run_experiment(man, out, workers=1)
        before = (out / "results.csv").read_bytes()
        for ci, rep in ((0, 0), (1, 2), (1, 3)):
            job_marker(out, ci, rep).unlink()
        (out / "results.csv").unlink()
        res2 = resume_experiment(out, workers=1)
        assert (out / "results.csv").read_bytes() == before
        assert res2["rows"] == res["rows"]

    def test_mismatched_directory_refused(self, tmp_path):
        out = tmp_path / "exp"
        run_experiment(rmse_manifest(replicates=1), out, workers=1)
        with pytest.raises(ManifestError):
            run_experiment(rmse_manifest(replicates=2), out, workers=1)

    def test_aggregation_matches_independent_recompute(self, tmp_path):
        out = tmp_path / "exp"
        run_experiment(rmse_manifest(), out, workers=1)
        sums = {}
        with open(out / "replicates.csv", newline="") as fh:
            for row in csv.DictReader(fh):
                key = (row["cell"], row["estimator"], row["param"])
                e = float(row["estimate"]) - float(row["truth"])
                s = sums.setdefault(key, [0, 0.0, 0.0, 0.0])
                s[0] += 1
                s[1] += e
                s[2] += e * e
                s[3] += e**4
        with open(out / "results.csv", newline="") as fh:
            rows = list(csv.DictReader(fh))
        assert rows
        for row in rows:
            n, se_sum, sq_sum, q_sum = sums[(row["cell"], row["estimator"], row["param"])]
            rmse = math.sqrt(sq_sum / n)
            bias = se_sum / n
            var_sq = (q_sum - n * (sq_sum / n) ** 2) / (n - 1)
            mc_se = math.sqrt(var_sq / n) / (2 * rmse)
            assert float(row["rmse"]) == pytest.approx(rmse * 1e4, rel=1e-9)
            assert float(row["bias"]) == pytest.approx(bias * 1e4, rel=1e-9)
            assert float(row["mc_se"]) == pytest.approx(mc_se * 1e4, rel=1e-9)

    def test_failed_job_recorded_and_flagged(self, tmp_path):
        # stephenson-tawn on simulated max-stable data has no partitions
        man = {
            "kind": "single-fit",
            "master_seed": 2,
            "n_samples": 20,
            "cells": [{"k": 3, "theta0": 0.5}],
            "estimators": ["pairwise", "stephenson-tawn"],
            "mcmc": {"n_iter": 100, "burn_in": 40},
        }
        res = run_experiment(man, tmp_path / "exp", workers=1)
        assert res["n_failed"] == 1 and not res["ok"]
        assert "partitions" in res["failures"][0]["error"]

    def test_coverage_rows(self, tmp_path):
        man = {
            "kind": "coverage",
            "master_seed": 5,
            "replicates": 4,
            "n_samples": 50,
            "cells": [{"k": 3, "theta0": 0.5}],
            "mcmc": {"n_iter": 300, "burn_in": 100},
        }
        res = run_experiment(man, tmp_path / "exp", workers=1)
        (label, est, cov, se, n) = res["rows"][0]
        assert est == "bayes" and n == 4 and 0.0 <= cov <= 1.0

    def test_simulate_only_then_fit_roundtrip(self, tmp_path):
        sim = {
            "kind": "simulate-only",
            "master_seed": 2,
            "replicates": 1,
            "cells": [
                {
                    "job": {
                        "spec": {"family": "logistic", "k": 3, "params": {"theta": 0.5}},
                        "n_samples": 25,
                        "seed": 9,
                    }
                }
            ],
        }
        res = run_experiment(sim, tmp_path / "sim", workers=1)
        data_csv = tmp_path / "sim" / res["rows"][0][2]
        assert data_csv.exists()
        fit = {
            "kind": "single-fit",
            "master_seed": 3,
            "cells": [{"data_csv": str(data_csv)}],
            "estimators": ["bayes"],
            "mcmc": {"n_iter": 150, "burn_in": 50},
        }
        res = run_experiment(fit, tmp_path / "fit", workers=1)
        assert res["ok"]
        assert (tmp_path / "fit" / "trace.csv").exists()
        assert (tmp_path / "fit" / "posterior.json").exists()
        assert res["rows"][0][:2] == ["bayes", "theta"]

    def test_bayes_factor_rows(self, tmp_path):
        man = {
            "kind": "bayes-factor",
            "master_seed": 3,
            "replicates": 2,
            "n_samples": 15,
            "k": 10,
            "theta0": 0.5,
            "cells": [{"beta": 0.0}],
            "mcmc": {"n_iter": 500, "burn_in": 200},
            "checks": [{"type": "bf-median", "cell": 0, "op": ">", "value": 1.0}],
        }
        res = run_experiment(man, tmp_path / "exp", workers=1)
        label, med, frac, n_bounded, n = res["rows"][0]
        assert label == "beta=0" and n == 2 and med > 0
        assert res["checks"][0]["observed"] == med


class TestChecks:
    def _man(self, checks):
        return ExperimentManifest(rmse_manifest(checks=checks))

    def test_evaluation_against_synthetic_rows(self):
        rows = [
            ("k=4,theta0=0.4", "bayes", "theta", 100.0, 1.0, 5.0),
            ("k=4,theta0=0.4", "pairwise", "theta", 150.0, 2.0, 5.0),
            ("k=4,theta0=0.7", "bayes", "theta", 200.0, 1.0, 10.0),
            ("k=4,theta0=0.7", "pairwise", "theta", 300.0, 3.0, 10.0),
        ]
        man = self._man(
            [
                {"type": "rmse-ordering", "cell": 0, "param": "theta",
                 "estimators": ["bayes", "pairwise"]},
                {"type": "rmse-ratio", "cell": 1, "param": "theta",
                 "num": "bayes", "den": "pairwise", "max": 0.95},
                {"type": "rmse-gap-se", "cell": 1, "param": "theta",
                 "smaller": "bayes", "larger": "pairwise", "k_se": 2.0},
                {"type": "rmse-spread", "cell": 0, "params": ["theta"], "max_rel": 0.4},
            ]
        )
        out = evaluate_checks(man, rows)
        assert [c["pass"] for c in out] == [True, True, True, False]
        assert out[1]["observed"] == pytest.approx(200.0 / 300.0)
        gap = out[2]["observed"]
        assert gap["gap"] == 100.0 and gap["combined_se"] == pytest.approx(math.hypot(10, 10))

    def test_missing_inputs_fail_closed(self):
        man = self._man(
            [{"type": "rmse-ratio", "cell": 0, "param": "theta",
              "num": "bayes", "den": "pairwise", "max": 2.0}]
        )
        out = evaluate_checks(man, [])
        assert out[0]["pass"] is False and out[0]["observed"] is None


class TestDiagnose:
    def _write_trace(self, path, samples, seed, config_hash="abc123", burn_in=0,
                     mean_blocks=None):
        samples = np.asarray(samples, dtype=float)
        n = samples.shape[0]
        if mean_blocks is None:
            mean_blocks = np.full(n, 2.0)
        tr = Trace(
            ["theta"], samples[:, None], mean_blocks, np.ones(n), burn_in,
            seed=seed, config_hash=config_hash,
        )
        tr.to_csv(path)

    def test_constant_trace_single_occupied_bin(self, tmp_path):
        self._write_trace(tmp_path / "t.csv", np.full(200, 1.25), seed=1)
        info = diagnose([str(tmp_path / "t.csv")], tmp_path / "d", bins=40)
        with open(tmp_path / "d" / "t.hist.csv", newline="") as fh:
            rows = list(csv.DictReader(fh))
        occupied = [r for r in rows if int(r["count"]) > 0]
        assert len(rows) == 40 and len(occupied) == 1
        assert int(occupied[0]["count"]) == 200
        # degenerate bandwidth: no density curve
        dens = (tmp_path / "d" / "t.density.csv").read_text().splitlines()
        assert len(dens) == 1
        assert info["replication_pass"] is None

    def test_acf_includes_lag_30(self, tmp_path):
        rng = np.random.default_rng(1)
        self._write_trace(tmp_path / "t.csv", rng.normal(size=500), seed=1)
        diagnose([str(tmp_path / "t.csv")], tmp_path / "d")
        with open(tmp_path / "d" / "t.acf.csv", newline="") as fh:
            lags = {int(r["lag"]) for r in csv.DictReader(fh)}
        assert lags == set(range(1, 31))

    def test_replication_pass_same_run_different_seeds(self, tmp_path):
        rng = np.random.default_rng(14)
        z = sample_logistic(0.5, 3, rng, n=40)
        par = make_parameterization(ModelSpec(LogisticParams(0.5), k=3))
        cfg = McmcConfig(n_iter=3000, burn_in=500)
        paths = []
        for seed in (1, 2):
            tr = run_chain(z, par, cfg, seed=seed)
            p = tmp_path / f"chain{seed}.csv"
            tr.to_csv(p)
            paths.append(str(p))
        info = diagnose(paths, tmp_path / "d")
        assert info["replication_pairs"] == 1
        assert info["replication_pass"] is True

    def test_replication_flags_disagreement(self, tmp_path):
        rng = np.random.default_rng(3)
        x = rng.normal(0.0, 0.05, 2000)
        self._write_trace(tmp_path / "a.csv", x, seed=1)
        self._write_trace(tmp_path / "b.csv", x + 0.2, seed=2)
        info = diagnose([str(tmp_path / "a.csv"), str(tmp_path / "b.csv")], tmp_path / "d")
        assert info["replication_pass"] is False

    def test_same_seed_pairs_skipped(self, tmp_path):
        rng = np.random.default_rng(4)
        self._write_trace(tmp_path / "a.csv", rng.normal(size=300), seed=7)
        self._write_trace(tmp_path / "b.csv", rng.normal(size=300), seed=7)
        info = diagnose([str(tmp_path / "a.csv"), str(tmp_path / "b.csv")], tmp_path / "d")
        assert info["replication_pairs"] == 0

    def test_malformed_trace(self, tmp_path):
        p = tmp_path / "bad.csv"
        p.write_text("iter,param_1\n0,not-a-number\n")
        with pytest.raises(ValueError):
            diagnose([str(p)], tmp_path / "d")

    def test_silverman_and_kde(self):
        rng = np.random.default_rng(8)
        x = rng.normal(0.0, 1.0, 4000)
        bw = silverman_bandwidth(x)
        # classical rule lands near 1.06 sigma n^(-1/5) for normal data
        assert 0.15 < bw < 0.35
        grid, dens = kde_curve(x, bw)
        mass = np.trapezoid(dens, grid)
        assert abs(mass - 1.0) < 0.01
        assert abs(grid[np.argmax(dens)]) < 0.2


class TestReport:
    def test_renders_experiment_and_trace_figures(self, tmp_path):
        from maxstable.experiments.report import render_report

        out = tmp_path / "exp"
        run_experiment(rmse_manifest(replicates=2), out, workers=1)
        made = render_report(out)
        assert (out / "figures" / "rmse_theta.png").exists()

        rng = np.random.default_rng(2)
        tr_dir = tmp_path / "diag"
        samples = rng.normal(size=(300, 1))
        tr = Trace(["theta"], samples, np.full(300, 2.0), np.ones(300), 50, seed=1)
        tr.to_csv(tmp_path / "trace.csv")
        diagnose([str(tmp_path / "trace.csv")], tr_dir)
        made = render_report(tr_dir, out_dir=tmp_path / "figs")
        names = {Path(p).name for p in made}
        assert {"trace_theta_posterior.png", "trace_acf.png", "trace_mean_blocks.png"} <= names

    def test_nothing_to_render(self, tmp_path):
        from maxstable.experiments.report import render_report

        with pytest.raises(FileNotFoundError):
            render_report(tmp_path)


class TestCli:
    def test_simulate_fit_diagnose_report(self, tmp_path):
        runner = CliRunner()
        data = tmp_path / "d.csv"
        res = runner.invoke(
            cli_main,
            ["simulate", "--theta", "0.6", "--k", "3", "-n", "40", "--seed", "3",
             "--out", str(data)],
        )
        assert res.exit_code == 0, res.output
        fit_dir = tmp_path / "fit"
        res = runner.invoke(
            cli_main,
            ["fit", str(data), "-m", "bayes", "-m", "pairwise", "--n-iter", "200",
             "--burn-in", "80", "--seed", "1", "--out", str(fit_dir)],
        )
        assert res.exit_code == 0, res.output
        assert (fit_dir / "summary.json").exists() and (fit_dir / "trace.csv").exists()
        summary = json.loads((fit_dir / "summary.json").read_text())
        assert "bayes" in summary and "pairwise" in summary

        diag_dir = tmp_path / "diag"
        res = runner.invoke(
            cli_main, ["diagnose", str(fit_dir / "trace.csv"), "--out", str(diag_dir)]
        )
        assert res.exit_code == 0, res.output
        assert (diag_dir / "replication.csv").exists()

        res = runner.invoke(
            cli_main, ["report", str(diag_dir), "--out", str(tmp_path / "figs")]
        )
        assert res.exit_code == 0, res.output
        assert list((tmp_path / "figs").glob("*.png"))

    def test_experiment_run_and_exit_codes(self, tmp_path):
        runner = CliRunner()
        man = rmse_manifest(
            replicates=1,
            mcmc={"n_iter": 100, "burn_in": 40},
            estimators=["pairwise"],
            checks=[
                {"type": "rmse-ratio", "cell": 0, "param": "theta",
                 "num": "pairwise", "den": "pairwise", "max": 2.0}
            ],
        )
        man_path = tmp_path / "m.json"
        man_path.write_text(json.dumps(man))
        out = tmp_path / "exp"
        res = runner.invoke(
            cli_main, ["experiment", "run", str(man_path), "--out", str(out)]
        )
        assert res.exit_code == 0, res.output
        assert "pass" in res.output

        # a failing check must flip the exit code
        man["checks"][0]["max"] = 1e-12
        man["name"] = "failing"
        man_path2 = tmp_path / "m2.json"
        man_path2.write_text(json.dumps(man))
        res = runner.invoke(
            cli_main, ["experiment", "run", str(man_path2), "--out", str(tmp_path / "exp2")]
        )
        assert res.exit_code == 1
        assert "FAIL" in res.output

        res = runner.invoke(cli_main, ["experiment", "resume", str(out)])
        assert res.exit_code == 0, res.output

    def test_experiment_seed_override(self, tmp_path):
        runner = CliRunner()
        man_path = tmp_path / "m.json"
        man_path.write_text(
            json.dumps(rmse_manifest(replicates=1, estimators=["pairwise"],
                                     mcmc={"n_iter": 100, "burn_in": 40}))
        )
        for seed, sub in ((101, "a"), (101, "b"), (202, "c")):
            res = runner.invoke(
                cli_main,
                ["experiment", "run", str(man_path), "--out", str(tmp_path / sub),
                 "--seed", str(seed)],
            )
            assert res.exit_code == 0, res.output
        a = (tmp_path / "a" / "results.csv").read_bytes()
        b = (tmp_path / "b" / "results.csv").read_bytes()
        c = (tmp_path / "c" / "results.csv").read_bytes()
        assert a == b and a != c

    def test_shipped_manifests_parse(self):
        root = Path(__file__).resolve().parents[1] / "manifests"
        paths = sorted(root.glob("*.json"))
        assert len(paths) >= 8
        for p in paths:
            man = ExperimentManifest.from_json(p)
            assert man.jobs()
