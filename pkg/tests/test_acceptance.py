"""Acceptance gate: ten end-to-end checks, each printing one PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v``; the lines are written past
pytest's capture so they show up in the normal report.
"""

from __future__ import annotations

import math
import time

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from leanols.maxnorm import exponent_for, inflation, qnorm_bounds, sampled_max_upper
from leanols.model_space import enumerate_up_to_k
from leanols.regress_core import (
    Dataset,
    compute_gram,
    d_sigma,
    det_inequality_report,
    full_model,
    loo_gram_bound,
)
from leanols.simlab.designs import DesignSpec
from leanols.simlab.experiment import SimConfig, run_experiment
from leanols.simlab.posi_max import k0_ratio
from leanols.simlab.rates import rate_scan
from leanols.simlab.report import report_csv

from conftest import random_pd


@pytest.fixture
def verdict(capsys):
    def emit(number: int, ok: bool, detail: str) -> None:
        with capsys.disabled():
            print(f"\ncriterion {number}: {'PASS' if ok else 'FAIL'} ({detail})")

    return emit


def _instance(rng):
    n = int(rng.integers(5, 201))
    d = int(rng.integers(1, 11))
    kind = rng.integers(0, 4)
    if kind == 0:  # near-singular sample Gram
        base = rng.standard_normal((n, max(1, d - 1)))
        x = np.column_stack([base, base[:, :1] + 1e-6 * rng.standard_normal((n, 1))])[:, :d]
    else:
        x = rng.standard_normal((n, d)) * np.exp(rng.uniform(-2, 2, size=d))
    y = x @ rng.standard_normal(d) + rng.standard_normal(n) * rng.uniform(0, 3)
    data = Dataset(x, y)
    if kind == 3:  # sigma far from the sample Gram
        sigma = random_pd(rng, d, spread=4.0) * 10.0 ** rng.uniform(-3, 3)
    else:
        sigma = random_pd(rng, d, spread=float(rng.uniform(0, 2)))
    beta = rng.standard_normal(d) * 10.0 ** rng.uniform(-2, 2)
    return data, sigma, beta


# 1 -------------------------------------------------------------------------

def test_criterion_1_deterministic_inequality(verdict):
    rng = np.random.default_rng(1)
    start = time.perf_counter()
    trials, bad = 1500, 0
    for _ in range(trials):
        data, sigma, beta = _instance(rng)
        bad += not det_inequality_report(data, full_model(data.d), sigma, beta).holds(1e-8)
    elapsed = time.perf_counter() - start
    ok = bad == 0 and elapsed < 30
    verdict(1, ok, f"{trials} instances, {bad} violations, {elapsed:.1f}s")
    assert ok


# 2 -------------------------------------------------------------------------

_worst_2 = [0.0]


@given(st.integers(0, 2**32 - 1), st.integers(1, 8))
def _fixed_covariate_property(seed, d):
    rng = np.random.default_rng(seed)
    n = d + int(rng.integers(1, 60))
    x = rng.standard_normal((n, d))
    data = Dataset(x, x @ rng.standard_normal(d) + rng.standard_normal(n))
    g = compute_gram(data)
    beta = rng.standard_normal(d)
    rep = det_inequality_report(data, full_model(d), g.sigma_hat, beta)
    assert rep.d_sigma <= 1e-10
    assert d_sigma(g.sigma_hat, g.sigma_hat) <= 1e-10
    lhs = rep.extras["beta_hat"] - beta
    rhs = np.linalg.solve(g.sigma_hat, g.gamma_hat - g.sigma_hat @ beta)
    err = float(np.max(np.abs(lhs - rhs)) / max(1.0, np.max(np.abs(rhs))))
    _worst_2[0] = max(_worst_2[0], err)
    assert err <= 1e-10


def test_criterion_2_fixed_covariate_exactness(verdict):
    start = time.perf_counter()
    ok = True
    try:
        _fixed_covariate_property()
    except AssertionError:
        ok = False
    elapsed = time.perf_counter() - start
    ok = ok and elapsed < 1.0
    verdict(2, ok, f"worst relative gap {_worst_2[0]:.1e}, {elapsed:.2f}s")
    assert ok


# 3 -------------------------------------------------------------------------

def test_criterion_3_submodel_suite(verdict):
    rng = np.random.default_rng(3)
    coll = enumerate_up_to_k(8, 3)
    start = time.perf_counter()
    bad = 0
    for _ in range(200):
        n = int(rng.integers(12, 200))
        sigma = random_pd(rng, 8, spread=1.5)
        root = np.linalg.cholesky(sigma)
        x = rng.standard_normal((n, 8)) @ root.T
        b0 = rng.standard_normal(8)
        data = Dataset(x, x @ b0 + np.sin(x[:, 0]) + rng.standard_normal(n))
        for m in coll:
            c = m.cols
            s_m = sigma[np.ix_(c, c)]
            beta_m = np.linalg.solve(s_m, (sigma @ b0)[c])  # population projection target
            bad += not det_inequality_report(data, m, s_m, beta_m).holds(1e-8)
    elapsed = time.perf_counter() - start
    ok = bad == 0 and elapsed < 30
    verdict(3, ok, f"200 trials x {len(coll)} models, {bad} violations, {elapsed:.1f}s")
    assert ok


# 4 -------------------------------------------------------------------------

def test_criterion_4_leave_one_out(verdict):
    rng = np.random.default_rng(4)
    start = time.perf_counter()
    bad = 0
    for _ in range(500):
        d = int(rng.integers(1, 8))
        n = d + int(rng.integers(2, 80))
        x = rng.standard_normal((n, d)) * rng.exponential(size=(n, 1))
        lhs, rhs = loo_gram_bound(Dataset(x, np.zeros(n)))
        bad += lhs > rhs + 1e-10
    elapsed = time.perf_counter() - start
    ok = bad == 0 and elapsed < 5
    verdict(4, ok, f"500 datasets, {bad} violations, {elapsed:.2f}s")
    assert ok


# 5, 6, 10 ------------------------------------------------------------------

DESK = SimConfig(design=DesignSpec("orthogonal", 10, 100), k_max=5, alpha=0.05, replications=300,
                 b_boot=200, seed=0)


@pytest.fixture(scope="module")
def desk_run():
    start = time.perf_counter()
    report = run_experiment(DESK, workers=1)
    return report, time.perf_counter() - start


def test_criterion_5_table_one_desk_scale(verdict, desk_run):
    report, elapsed = desk_run
    tot = report.total_coverage
    directional = bool(np.all(tot[0] >= tot[1:]))
    floor = bool(np.all(tot >= 0.92))
    ok = directional and floor and elapsed < 30 * 60
    cov = ", ".join(f"m{m}={c:.4f}" for m, c in zip(report.methods, tot))
    verdict(5, ok, f"total coverage {cov}; method 0 >= others: {directional}; all >= 0.92: {floor}; "
                   f"{elapsed:.0f}s")
    assert ok


def test_criterion_6_width_ordering(verdict, desk_run):
    report, _ = desk_run
    reps = report.replicates
    constant = all(np.array_equal(r.width_min[0], r.width_max[0]) and np.all(r.width_min[0] == r.k[0])
                   for r in reps)
    # smallest model size is column 0; rows 1..3 are methods 1..3
    share = np.mean([r.width_med[1:, 0] <= r.width_med[0, 0] for r in reps], axis=0)
    ok = constant and bool(np.all(share >= 0.6))
    verdict(6, ok, f"method 0 constant: {constant}; share of replications with smaller s=1 median "
                   f"threshold: " + ", ".join(f"m{j + 1}={s:.2f}" for j, s in enumerate(share)))
    assert ok


def test_criterion_10_determinism(verdict, desk_run, tmp_path):
    report, _ = desk_run
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    report_csv(report, a)
    report_csv(run_experiment(DESK, workers=2, keep_replicates=False), b)
    same = a.read_bytes() == b.read_bytes()
    verdict(10, same, "workers=1 and workers=2 reports are byte-identical" if same else "reports differ")
    assert same


# 7 -------------------------------------------------------------------------

def test_criterion_7_worst_case_growth(verdict):
    start = time.perf_counter()
    ratios = [k0_ratio(d, b=2000, seed=0) for d in (8, 16, 32)]
    elapsed = time.perf_counter() - start
    ok = ratios[0] < ratios[1] < ratios[2] and elapsed < 600
    verdict(7, ok, "K0 worst/orth at d=8,16,32: " + ", ".join(f"{r:.4f}" for r in ratios) + f"; {elapsed:.1f}s")
    assert ok


# 8 -------------------------------------------------------------------------

def test_criterion_8_qnorm(verdict):
    rng = np.random.default_rng(8)
    start = time.perf_counter()

    bracket_bad = 0
    for _ in range(10**5):
        m = int(rng.integers(1, 200))
        w = rng.exponential(size=m) * (rng.uniform(size=m) < rng.uniform())
        lo, hi = qnorm_bounds(w, float(rng.choice([1.0, 2.0, 8.0, 32.0, rng.uniform(1, 100)])))
        bracket_bad += not (lo <= w.max() <= hi)

    identity_bad = 0
    for m in (10, 10**3, 10**6, 10**9):
        for eps in (0.05, 0.2, 0.5, 1.0):
            q = math.log(m) / eps
            if q >= 1:
                identity_bad += inflation(m, q) != pytest.approx(math.exp(eps), rel=4e-16)
    identity_bad += exponent_for(10**3, 0.5) != math.log(10**3) / 0.5

    delta, trials, m = 0.1, 10**4, 10**3
    hits = 0
    for t in range(trials):
        scale = rng.uniform(0.3, 3.0)
        w = scale * rng.uniform(size=m) ** rng.uniform(0.5, 2.0)
        est = sampled_max_upper(lambda idx: w[idx], m, 1.0, delta, scale, seed=t)
        hits += est.upper >= w.max()
    rate = hits / trials
    floor = 1 - delta - 3 * math.sqrt(delta * (1 - delta) / trials)
    elapsed = time.perf_counter() - start
    ok = bracket_bad == 0 and identity_bad == 0 and rate >= floor and elapsed < 120
    verdict(8, ok, f"bracket violations {bracket_bad}/100000; e^eps mismatches {identity_bad}; "
                   f"coverage {rate:.4f} (floor {floor:.4f}); {elapsed:.1f}s")
    assert ok


# 9 -------------------------------------------------------------------------

def test_criterion_9_rate_diagnostic(verdict):
    start = time.perf_counter()
    grid = [(n, 12, s) for n in (200, 400, 800) for s in (1, 2, 3)]
    rows = rate_scan(["orthogonal"], grid, 50, seed=9)
    med = np.array([r["median_ratio"] for r in rows])
    spread = float(med.max() / med.min())
    elapsed = time.perf_counter() - start
    ok = spread <= 3 and elapsed < 300
    verdict(9, ok, f"median ratios {np.round(med, 3).tolist()}; max/min {spread:.3f}; {elapsed:.1f}s")
    assert ok
