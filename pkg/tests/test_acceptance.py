"""Acceptance criteria, each run at its stated tolerance and time budget."""

from __future__ import annotations

import math
import time

import numpy as np
import pytest
from scipy import integrate as sciint
from scipy import stats
from scipy.optimize import lsq_linear

from blacknoise import cli
from blacknoise.baseline import WhiteCascadeParams, run_white_baseline
from blacknoise.blackstat import Partition, empirical_covariance, h1_estimate
from blacknoise.cascade import CascadeParams, ScalingMap, Tower, b_functional_values, phi, plan_domains, xi_step
from blacknoise.gridfn import Grid, GridFunction
from blacknoise.inference import ChainConfig, LikelihoodSpec, observation_values, run_chains, run_mixture
from blacknoise.measures import RngSeed, gamma_covariance, gamma_paths, sample_prior

SEED = 20240601


def black_h1(M, seed=SEED):
    p = CascadeParams.standard(M, 3)
    spec = LikelihoodSpec.default(p)
    t0 = time.perf_counter()
    run = run_mixture(20, 10, spec, ChainConfig(), p, RngSeed(seed))
    reports = {k: h1_estimate(run.samples, k, Partition.for_level(p.s(k))) for k in (1, 2, 3)}
    return run, reports, time.perf_counter() - t0


@pytest.fixture(scope="module")
def black_m4():
    return black_h1(4)


@pytest.fixture(scope="module")
def black_m6():
    return black_h1(6)


def test_criterion_1_cascade_identities(criterion):
    t0 = time.perf_counter()
    worst = 0.0
    for M in (2, 4, 5, 6):
        p = CascadeParams.standard(M, 2)
        g = Grid.from_step(-3 * M, 3 * M, 1 / M)
        for c in (1.0, -1.0):
            out = xi_step(GridFunction(g, np.full(g.n, c)), p)
            worst = max(worst, float(np.max(np.abs(out.values - c * math.sqrt(M - 1)))))
    u = np.random.default_rng(0).normal(0, 3, 10_000)
    v = np.random.default_rng(1).normal(0, 3, 10_000)
    phi_ok = (np.array_equal(phi(-u), -phi(u))
              and bool(np.all(np.abs(phi(u) - phi(v)) <= np.abs(u - v)))
              and bool(np.all(phi(u[u >= 1]) == 1.0)))
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-9 and phi_ok and elapsed < 1.0
    assert criterion.record("criterion 1 (cascade identities)", ok,
                            f"max |xi - c sqrt(M-1)| = {worst:.2e}, phi conditions {phi_ok}, {elapsed:.2f}s")


def test_criterion_2_domain_planner(criterion):
    from fractions import Fraction

    t0 = time.perf_counter()
    plan = plan_domains(CascadeParams.standard(5, 4))
    ok = (plan.exact[4] == (Fraction(-624), Fraction(2499)) and plan.prior_size == 15620
          and plan.s_image_exact == (Fraction(-4, 5), Fraction(19, 5)))
    elapsed = time.perf_counter() - t0
    ok = ok and elapsed < 1.0
    assert criterion.record("criterion 2 (domain planner)", ok,
                            f"level 4 {plan.exact[4]}, d = {plan.prior_size}, S image {plan.s_image_exact}")


def test_criterion_3_gamma_covariance(criterion):
    t0 = time.perf_counter()
    lags = [0.0, 0.5, 1.0, 1.5, 2.0, 3.0]
    grid = Grid.from_step(0.0, 4.0, 0.05)
    vals = gamma_paths(grid, 10_000, RngSeed(SEED, 3))
    errs = [abs(empirical_covariance(vals, grid, g) - float(gamma_covariance(g))) for g in lags]
    elapsed = time.perf_counter() - t0
    ok = max(errs) <= 0.03 and elapsed < 60
    assert criterion.record("criterion 3 (gamma covariance)", ok,
                            f"max abs error {max(errs):.4f} over lags {lags}, {elapsed:.1f}s")


def test_criterion_4_b_functional(criterion):
    t0 = time.perf_counter()
    oracle, _ = sciint.quad(lambda x: (2 / math.pi) * math.asin(max(0.0, 1 - x / 2)), 0, 2,
                            epsabs=1e-13)
    closed = 2 - 4 / math.pi
    grid = Grid.from_step(0.0, 2.0, 0.02)
    vals = gamma_paths(grid, 10_000, RngSeed(SEED, 4))
    b = b_functional_values(grid, vals, 100.0)
    elapsed = time.perf_counter() - t0
    ok = abs(oracle - closed) < 1e-10 and abs(b - oracle) <= 0.03 and elapsed < 120
    assert criterion.record("criterion 4 (B_L oracle)", ok,
                            f"B_100 = {b:.5f}, quadrature oracle {oracle:.5f}, 2-4/pi = {closed:.5f}")


def test_criterion_5_pushforward(criterion):
    t0 = time.perf_counter()
    M = 20
    p = CascadeParams.standard(M, 1)
    grid = Grid.from_step(0.0, float(M), 0.02)
    smap = ScalingMap(grid, [0.0, 1.0], p)
    img = smap(gamma_paths(grid, 2000, RngSeed(SEED, 5)))
    var = float(np.var(img[:, 1] - img[:, 0], ddof=1))
    target = 4 * (math.pi - 2) / math.pi
    elapsed = time.perf_counter() - t0
    ok = abs(var - target) <= 0.15 * target and elapsed < 300
    assert criterion.record("criterion 5 (pushforward variance)", ok,
                            f"Var(S(1)-S(0)) = {var:.4f} vs {target:.4f} "
                            f"({100 * (var / target - 1):+.1f}%), {elapsed:.1f}s")


def lipschitz_floor(obs_x, obs_w, slope):
    """Smallest RMS to ``obs_w`` of any function vanishing at 0 with
    ``|f(x) - f(y)| <= slope |x - y|``; every ``S xi_1`` is such a function."""
    pts = np.unique(np.append(obs_x, 0.0))
    j0 = int(np.flatnonzero(pts == 0.0)[0])
    gaps = np.diff(pts)
    A = np.zeros((obs_x.size, gaps.size))
    for i, x in enumerate(obs_x):
        j = int(np.searchsorted(pts, x))
        if j > j0:
            A[i, j0:j] = 1.0
        elif j < j0:
            A[i, j:j0] = -1.0
    res = lsq_linear(A * gaps, obs_w, bounds=(-slope, slope))
    return float(np.sqrt(np.mean((A @ (res.x * gaps) - obs_w) ** 2)))


def test_criterion_6_pcn(criterion, black_m4):
    t0 = time.perf_counter()
    p = CascadeParams.standard(4, 3)
    spec = LikelihoodSpec.default(p)
    tower = Tower(p, s_points=spec.points)

    flat = LikelihoodSpec(spec.obs_grid, math.inf)
    (res,) = run_chains(np.zeros((1, spec.points.size)), flat,
                        ChainConfig(n_burn=500, n_keep=10_000, thin=1), p, [RngSeed(SEED, 6)],
                        tower=tower)
    coords = np.random.default_rng(SEED).choice(tower.prior_size, 5, replace=False)
    crit = stats.kstwo.ppf(0.99, 10_000)
    ks = [stats.kstest(res.draws[:, c], "norm").statistic for c in coords]
    flat_ok = max(ks) < crit

    # held-out prior draws give observations inside the range of the forward map
    n_w = 5
    truth = np.stack([sample_prior(tower.prior_size, RngSeed(SEED, 600 + i)) for i in range(n_w)])
    obs = tower.forward(truth)
    chains = run_chains(obs, spec, ChainConfig(), p, [RngSeed(SEED, 700 + i) for i in range(n_w)],
                        tower=tower)
    rms = [float(np.sqrt(np.mean((tower.forward(c.draws).mean(axis=0) - o) ** 2)))
           for c, o in zip(chains, obs)]
    elapsed = time.perf_counter() - t0
    tight_ok = max(rms) <= 0.1
    ok = flat_ok and tight_ok and elapsed < 600
    criterion.record("criterion 6 (pCN correctness)", ok,
                     f"flat: max KS {max(ks):.4f} < {crit:.4f} on 5 coords x 10^4 draws; "
                     f"tight: posterior-mean RMS {max(rms):.4f} <= 0.1 on {n_w} well-specified w; "
                     f"{elapsed:.1f}s")

    run = black_m4[0]
    got, floor = [], []
    for w_id, ch in run.chains.items():
        o = observation_values(run.observations[w_id], spec)
        got.append(float(np.sqrt(np.mean((tower.forward(ch.draws).mean(axis=0) - o) ** 2))))
        floor.append(lipschitz_floor(spec.points, o, math.sqrt(p.M)))
    criterion.info("criterion 6 (Brownian w)",
                   f"posterior-mean RMS mean {np.mean(got):.3f}; best possible for any S xi_1 "
                   f"(slope <= sqrt(M)) mean {np.mean(floor):.3f}, min {np.min(floor):.3f}")
    assert ok


def test_criterion_7_white_control(criterion):
    t0 = time.perf_counter()
    res = run_white_baseline(WhiteCascadeParams(5, 6), 500, RngSeed(SEED, 7))
    h = {k: r.estimate for k, r in res.reports.items()}
    elapsed = time.perf_counter() - t0
    ok = (all(0.8 <= h[k] <= 1.2 for k in (4, 5, 6)) and abs(h[6] - 1) < abs(h[1] - 1)
          and elapsed < 600)
    detail = ", ".join(f"H1(f_{k})={v:.3f}" for k, v in h.items())
    assert criterion.record("criterion 7 (white control)", ok, f"{detail}; {elapsed:.1f}s")


def test_criterion_8_black_trend(criterion, black_m4):
    run, reports, elapsed = black_m4
    h = [reports[k].estimate for k in (1, 2, 3)]
    se = [reports[k].std_error for k in (1, 2, 3)]
    monotone = all(h[i + 1] <= h[i] + max(se[i], se[i + 1]) for i in range(2))
    ok = len(run.samples) >= 200 and monotone and h[2] < 0.5 * h[0] and elapsed < 1800
    detail = ", ".join(f"H1(f_{k})={v:.4f}+-{s:.4f}" for k, v, s in zip((1, 2, 3), h, se))
    assert criterion.record("criterion 8 (black trend)", ok,
                            f"{detail}; {len(run.samples)} samples; {elapsed:.1f}s")


def test_criterion_9_m_monotonicity(criterion, black_m4, black_m6):
    r4, r6 = black_m4[1][3], black_m6[1][3]
    elapsed = black_m6[2]
    ok = r6.estimate <= r4.estimate + max(r4.std_error, r6.std_error) and elapsed < 2700
    assert criterion.record("criterion 9 (M monotonicity)", ok,
                            f"H1(f_3): M=6 {r6.estimate:.5f} vs M=4 {r4.estimate:.5f}; "
                            f"M=6 run {elapsed:.1f}s")


def test_criterion_10_reproducibility(criterion, tmp_path):
    def one_run(root, *extra):
        assert cli.main(["simulate-black", "--out", str(root), *extra]) == 0
        (run,) = [p for p in root.iterdir() if p.is_dir()]
        return run

    base = one_run(tmp_path / "a", "--seed", "77", "--set", "mixture.n_w=8",
                   "--set", "mixture.draws_per_w=5", "--set", "chain.n_burn=1000")
    replay = one_run(tmp_path / "b", "--config", str(base / "manifest.json"), "--threads", "8")
    files = ("h1.csv", "diagnostics.csv", "chains.csv")
    same = all((base / f).read_bytes() == (replay / f).read_bytes() for f in files)

    assert cli.main(["simulate-white", "--out", str(tmp_path / "c"), "--seed", "5",
                     "--set", "white.M=4", "--set", "white.N=4", "--set", "white.n_samples=60"]) == 0
    (white,) = list((tmp_path / "c").iterdir())
    assert cli.main(["simulate-white", "--out", str(tmp_path / "d"), "--config",
                     str(white / "manifest.json")]) == 0
    (white2,) = list((tmp_path / "d").iterdir())
    same_white = all((white / f).read_bytes() == (white2 / f).read_bytes()
                     for f in ("h1.csv", "diagnostics.csv"))
    ok = same and same_white
    assert criterion.record("criterion 10 (reproducibility)", ok,
                            f"black replay from manifest with 8 threads vs 1 byte-identical: {same}; "
                            f"white replay byte-identical: {same_white}")
