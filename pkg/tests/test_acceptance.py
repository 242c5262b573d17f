"""Acceptance gate: ten end-to-end checks at desk scale, one test each.

Run with -v to get one pass/fail line per criterion; each test also prints
the measured quantities. The four simulation studies (tests 04-07) execute
the shipped desk manifests through the experiment harness, so passing here
also exercises determinism, job markers and check evaluation on real
workloads. Heavy tests stay far inside their stated ceilings on one core.
"""

import json
import time
from pathlib import Path

import numpy as np
import pytest
from scipy.special import gamma as gamma_fn
from scipy.special import ndtr, roots_genlaguerre, stdtr

from oracles import (
    bvn_cdf,
    bvt_cdf,
    dirichlet_V_survival,
    husler_reiss_V_oracle,
    logistic_density_mp,
    mixed_partial,
    t1_cdf_closed_df2,
    trivariate_normal_cdf,
)
from maxstable.models import (
    DirichletParams,
    ExtremalTParams,
    HuslerReissParams,
    LogisticParams,
    ModelSpec,
    dirichlet,
    log_density,
    log_joint_frechet,
    pairwise_extremal_coefficient,
)
from maxstable.numerics import QmcConfig, gamma_cdf, mvn_cdf, mvt_cdf
from maxstable.partitions import Partition, enumerate_all, gibbs_neighborhood
from maxstable.simulate import exponential_ks_gate, sample_logistic
from maxstable.inference import (
    ChainState,
    McmcConfig,
    gibbs_partition_step,
    make_parameterization,
    run_chain,
)
from maxstable.experiments import run_experiment

MANIFESTS = Path(__file__).resolve().parents[1] / "manifests"

LAM2_3 = np.array([[0.0, 0.25, 0.5], [0.25, 0.0, 0.25], [0.5, 0.25, 0.0]])


def info(msg):
    print(f"[acceptance] {msg}")


def partition_sum_density(spec, z):
    terms = [log_joint_frechet(spec, z, tau) for tau in enumerate_all(spec.k)]
    return float(np.sum(np.exp(terms)))


# --- fast deterministic oracles for the Student-t family -------------------
# The quad-in-quad reference bvt is exact but ~1s per call; the nested
# finite differences below need thousands of evaluations. Same mixture
# identity, fixed generalized Gauss-Laguerre nodes instead of QUADPACK.

_GL_X, _GL_W = np.polynomial.legendre.leggauss(96)


def _bvn_fast(b1, b2, rho):
    base = float(ndtr(b1) * ndtr(b2))
    if rho == 0.0:
        return base
    r = 0.5 * rho * (_GL_X + 1.0)
    om = 1.0 - r * r
    dens = np.exp(-(b1 * b1 - 2.0 * r * b1 * b2 + b2 * b2) / (2.0 * om)) / (
        2.0 * np.pi * np.sqrt(om)
    )
    return base + float(0.5 * rho * np.sum(_GL_W * dens))


def _bvt_fast(b1, b2, rho, df, n_nodes=64):
    x, w = roots_genlaguerre(n_nodes, df / 2.0 - 1.0)
    s = np.sqrt(2.0 * x / df)
    vals = np.array([_bvn_fast(b1 * si, b2 * si, rho) for si in s])
    return float(np.sum(w * vals) / gamma_fn(df / 2.0))


def extremal_t_V_fast(z, sigma, nu):
    z = np.asarray(z, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    total = 0.0
    for p in range(len(z)):
        others = [i for i in range(len(z)) if i != p]
        zp = z[p] ** (1.0 / nu)
        loc = sigma[others, p] * zp
        cov = sigma[np.ix_(others, others)] - np.outer(sigma[others, p], sigma[others, p])
        cov = zp ** 2 * cov / (nu + 1.0)
        arg = np.array([z[i] ** (1.0 / nu) for i in others]) - loc
        rho = cov[0, 1] / np.sqrt(cov[0, 0] * cov[1, 1])
        total += _bvt_fast(
            arg[0] / np.sqrt(cov[0, 0]), arg[1] / np.sqrt(cov[1, 1]), rho, nu + 1.0
        ) / z[p]
    return total


def test_01_partition_sum_matches_finite_difference_density():
    # the fast t oracle must agree with the slow quadrature reference
    for b1, b2, rho in ((0.5, -0.3, 0.4), (1.2, 0.8, -0.2)):
        assert _bvn_fast(b1, b2, rho) == pytest.approx(bvn_cdf(b1, b2, rho), abs=5e-12)
        assert _bvt_fast(b1, b2, rho, 3.0) == pytest.approx(
            bvt_cdf(b1, b2, rho, 3.0), abs=5e-5
        )

    rng = np.random.default_rng(1302)
    worst = {}

    for k in (3, 4):
        w = 0.0
        for _ in range(20):
            z = rng.uniform(0.6, 2.2, k)
            mine = partition_sum_density(ModelSpec(LogisticParams(0.55), k=k), z)
            w = max(w, abs(mine / logistic_density_mp(z, 0.55) - 1.0))
        worst[f"logistic k={k}"] = w
        assert w < 1e-5

    family_cases = [
        (
            "husler-reiss",
            ModelSpec(HuslerReissParams(LAM2_3)),
            lambda zz: np.exp(-husler_reiss_V_oracle(zz, LAM2_3)),
        ),
    ]
    S = np.full((3, 3), 0.3)
    np.fill_diagonal(S, 1.0)
    family_cases.append(
        (
            "extremal-t",
            ModelSpec(ExtremalTParams(S, 2.0)),
            lambda zz: np.exp(-extremal_t_V_fast(zz, S, 2.0)),
        )
    )
    al = np.array([0.6, 1.0, 3.0])
    family_cases.append(
        (
            "dirichlet",
            ModelSpec(DirichletParams(al)),
            lambda zz: np.exp(-dirichlet_V_survival(zz, al)),
        )
    )
    for name, spec, cdf in family_cases:
        w = 0.0
        for _ in range(20):
            z = rng.uniform(0.7, 2.0, 3)
            mine = partition_sum_density(spec, z)
            w = max(w, abs(mine / mixed_partial(cdf, z, h_rel=0.04) - 1.0))
        worst[name] = w
        assert w < 1e-3

    info("criterion 1 worst rel errors: " + ", ".join(f"{k}={v:.1e}" for k, v in worst.items()))


def _exact_gibbs_conditional(spec, z, tau, i):
    cands = gibbs_neighborhood(tau, i)
    lp = np.array([log_joint_frechet(spec, z, c) for c in cands])
    p = np.exp(lp - lp.max())
    return cands, p / p.sum()


def _worst_gibbs_zscore(spec, oracle_spec, z, tau, n_site, rng):
    worst = 0.0
    state = ChainState(np.array([0.5]), spec, z[None, :], "singletons")
    for i in range(1, z.size + 1):
        cands, p = _exact_gibbs_conditional(oracle_spec, z, tau, i)
        counts = {}
        for _ in range(n_site):
            state.set_partition(0, tau)
            out = gibbs_partition_step(state, 0, i, rng)
            counts[out] = counts.get(out, 0) + 1
        for cand, pc in zip(cands, p):
            sigma = max(np.sqrt(pc * (1.0 - pc) / n_site), 1e-12)
            worst = max(worst, abs(counts.get(cand, 0) / n_site - pc) / sigma)
    return worst


def test_02_gibbs_one_step_conditionals_exact():
    rng_z = np.random.default_rng(5)
    z4 = rng_z.uniform(0.5, 3.0, 4)
    z3 = rng_z.uniform(0.5, 3.0, 3)

    # 1e5 one-step updates split over the four sites, frequencies vs the
    # enumerated conditional
    spec4 = ModelSpec(LogisticParams(0.6), k=4)
    tau4 = Partition.parse("{1,2|3|4}", k=4)
    z_log = _worst_gibbs_zscore(spec4, spec4, z4, tau4, 25_000, np.random.default_rng(11))
    assert z_log < 3.0

    # sampled path on a light lattice; reference probabilities on a heavy
    # one so reference bias is negligible against the 3-sigma band
    spec_path = ModelSpec(HuslerReissParams(LAM2_3), qmc=QmcConfig(512, 8))
    spec_orc = ModelSpec(HuslerReissParams(LAM2_3), qmc=QmcConfig(16384, 8))
    tau3 = Partition.parse("{1,2|3}", k=3)
    z_hr = _worst_gibbs_zscore(
        spec_path, spec_orc, z3, tau3, 33_334, np.random.default_rng(21)
    )
    assert z_hr < 3.0

    info(f"criterion 2 worst z-scores: logistic k=4 {z_log:.2f}, husler-reiss k=3 {z_hr:.2f}")


def test_03_latent_chain_matches_grid_posterior():
    rng = np.random.default_rng(31)
    z = sample_logistic(0.5, 3, rng, n=50)

    # exact posterior mass per bin (uniform prior): likelihood averaged over
    # five midpoints inside each of 40 bins
    n_bins, sub = 40, 5
    edges = np.linspace(0.0, 1.0, n_bins + 1)
    mids = (np.arange(n_bins * sub) + 0.5) / (n_bins * sub)
    ll = np.array(
        [sum(log_density(ModelSpec(LogisticParams(th), k=3), row) for row in z) for th in mids]
    )
    w = np.exp(ll - ll.max()).reshape(n_bins, sub).mean(axis=1)
    exact = w / w.sum()

    par = make_parameterization(ModelSpec(LogisticParams(0.5), k=3))
    tr = run_chain(z, par, McmcConfig(n_iter=42_000, burn_in=2_000), seed=7)
    emp = np.histogram(tr.post[:, 0], bins=edges)[0] / tr.post.shape[0]

    tv = 0.5 * float(np.abs(emp - exact).sum())
    info(f"criterion 3 total variation: {tv:.4f} (limit 0.03)")
    assert tv <= 0.03


def _run_desk(manifest, tmp_path, label):
    t0 = time.time()
    res = run_experiment(manifest, tmp_path / "out", workers=1)
    assert res["n_failed"] == 0 and res["n_missing"] == 0, res["failures"]
    lines = []
    for chk in res["checks"]:
        lines.append(f"{chk['type']}[cell {chk['cell']}] observed={chk['observed']}")
        assert chk["pass"], f"{label}: failed {chk['type']} on cell {chk['cell']}: {chk['observed']}"
    info(f"{label} ({time.time() - t0:.0f}s): " + "; ".join(lines))
    assert res["ok"]
    return res


def test_04_bayes_beats_pairwise_rmse_logistic(tmp_path):
    res = _run_desk(MANIFESTS / "rmse-logistic-desk.json", tmp_path, "criterion 4")
    for row in res["rows"]:
        info("  " + ", ".join(str(v) for v in row))


def test_05_credible_interval_coverage(tmp_path):
    res = _run_desk(MANIFESTS / "coverage-desk.json", tmp_path, "criterion 5")
    for row in res["rows"]:
        info("  " + ", ".join(str(v) for v in row))


def test_06_clayton_block_maxima_rmse_ordering(tmp_path):
    res = _run_desk(MANIFESTS / "rmse-clayton-desk.json", tmp_path, "criterion 6")
    for row in res["rows"]:
        info("  " + ", ".join(str(v) for v in row))


def test_07_margin_rmse_with_dependence_gain(tmp_path):
    res = _run_desk(MANIFESTS / "rmse-margins-desk.json", tmp_path, "criterion 7")
    for row in res["rows"]:
        info("  " + ", ".join(str(v) for v in row))


def test_08_shape_trend_bayes_factor_direction(tmp_path):
    man = {
        "kind": "bayes-factor",
        "name": "bf-acceptance",
        "master_seed": 411011,
        "replicates": 20,
        "n_samples": 15,
        "k": 10,
        "theta0": 0.5,
        "cells": [{"beta": 0.0}, {"beta": 0.08}],
        "mcmc": {"n_iter": 3000, "burn_in": 1000},
        "checks": [
            {"type": "bf-median", "cell": 0, "op": ">", "value": 1.0},
            {"type": "bf-median", "cell": 1, "op": "<", "value": 1.0},
        ],
    }
    res = _run_desk(man, tmp_path, "criterion 8")
    for row in res["rows"]:
        info("  " + ", ".join(str(v) for v in row))


def test_09_extremal_coefficient_closed_forms():
    for theta in (0.1, 0.3, 0.5, 0.7, 0.9):
        spec = ModelSpec(LogisticParams(theta), k=2)
        assert abs(pairwise_extremal_coefficient(spec, 1, 2) - 2.0 ** theta) < 1e-6

    for lam2 in (0.04, 0.25, 1.0, 4.0):
        spec = ModelSpec(HuslerReissParams(np.array([[0.0, lam2], [lam2, 0.0]])))
        closed = 2.0 * float(ndtr(np.sqrt(lam2)))
        assert abs(pairwise_extremal_coefficient(spec, 1, 2) - closed) < 1e-6

    for rho, nu in ((0.0, 1.0), (0.5, 2.0), (-0.3, 3.0), (0.8, 1.5)):
        spec = ModelSpec(ExtremalTParams(np.array([[1.0, rho], [rho, 1.0]]), nu))
        closed = 2.0 * float(stdtr(nu + 1.0, np.sqrt((nu + 1.0) * (1.0 - rho) / (1.0 + rho))))
        assert abs(pairwise_extremal_coefficient(spec, 1, 2) - closed) < 1e-6

    assert abs(dirichlet.extremal_coefficient(1.0, 1.0) - 1.5) < 1e-8
    grid = (0.25, 0.5, 1.0, 2.0, 4.0, 8.0)
    vals = [dirichlet.extremal_coefficient(a, 1.0) for a in grid]
    assert all(v1 > v2 for v1, v2 in zip(vals, vals[1:]))
    assert all(1.0 < v < 2.0 for v in vals)

    info(
        "criterion 9: logistic/husler-reiss/extremal-t closed forms within 1e-6; "
        "dirichlet grid " + ", ".join(f"{v:.4f}" for v in vals)
    )


def test_10_numerics_and_sampler_gates():
    # 2-D normal boxes vs the Plackett-identity oracle
    worst2 = 0.0
    for b1, b2, rho in (
        (0.3, -0.4, 0.5),
        (1.5, 1.0, -0.6),
        (-0.8, 0.2, 0.9),
        (0.0, 0.0, -0.3),
        (2.5, -1.2, 0.35),
    ):
        sig = np.array([[1.0, rho], [rho, 1.0]])
        got, _ = mvn_cdf(np.array([b1, b2]), sig)
        worst2 = max(worst2, abs(got - bvn_cdf(b1, b2, rho)))
    assert worst2 < 1e-5

    # 3-D vs the conditional-decomposition quadrature oracle
    worst3 = 0.0
    for b, sig in (
        (
            np.array([0.5, 0.2, -0.1]),
            np.array([[1.0, 0.4, 0.2], [0.4, 1.0, 0.5], [0.2, 0.5, 1.0]]),
        ),
        (
            np.array([1.2, -0.5, 0.8]),
            np.array([[2.0, -0.3, 0.4], [-0.3, 1.0, 0.2], [0.4, 0.2, 1.5]]),
        ),
        (
            np.array([0.0, 0.0, 0.0]),
            np.array([[1.0, 0.7, 0.7], [0.7, 1.0, 0.7], [0.7, 0.7, 1.0]]),
        ),
    ):
        got, _ = mvn_cdf(b, sig)
        worst3 = max(worst3, abs(got - trivariate_normal_cdf(b, sig)))
    assert worst3 < 1e-5

    # Student CDF at df=2 has a closed form
    worst_t = 0.0
    for x in (-3.0, -1.0, -0.25, 0.0, 0.6, 1.7, 4.0):
        got, _ = mvt_cdf(np.array([x]), np.array([[1.0]]), 2.0)
        worst_t = max(worst_t, abs(got - t1_cdf_closed_df2(x)))
    assert worst_t < 1e-8

    import mpmath as mp

    worst_g = 0.0
    for alpha in (0.3, 1.0, 2.5, 7.0):
        for x in (0.05, 0.8, 2.0, 9.0):
            ref = float(mp.gammainc(alpha, 0, x, regularized=True))
            worst_g = max(worst_g, abs(gamma_cdf(x, alpha) - ref))
    assert worst_g < 1e-8

    # spectral samplers against their own families: the pairwise reciprocal
    # maximum is exactly exponential with the extremal coefficient as rate
    gates = {
        "logistic": (ModelSpec(LogisticParams(0.7), k=2), 31),
        "dirichlet": (ModelSpec(DirichletParams([2.0, 0.5])), 33),
        "husler-reiss": (ModelSpec(HuslerReissParams(np.array([[0.0, 0.25], [0.25, 0.0]]))), 34),
        "extremal-t": (ModelSpec(ExtremalTParams([[1.0, 0.5], [0.5, 1.0]], 2.0)), 35),
    }
    pvals = {}
    for name, (spec, seed) in gates.items():
        pvals[name] = exponential_ks_gate(spec, 1, 2, rng=np.random.default_rng(seed))
        assert pvals[name] > 1e-3

    info(
        f"criterion 10: mvn2 {worst2:.1e}, mvn3 {worst3:.1e}, t(df=2) {worst_t:.1e}, "
        f"gamma {worst_g:.1e}; KS p-values "
        + ", ".join(f"{k}={v:.3f}" for k, v in pvals.items())
    )
