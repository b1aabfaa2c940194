from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from leanols.errors import BoundViolationError, DomainError
from leanols.maxnorm import (
    MaxEstimate,
    exponent_for,
    hoeffding_draws,
    inflation,
    qnorm_bounds,
    sampled_max_upper,
)


def test_constant_vector_bracket():
    for q in (1.0, 3.0, 50.0):
        lo, hi = qnorm_bounds(np.ones(10), q)
        assert lo == 1.0
        assert lo == pytest.approx(hi * 10 ** (-1 / q), rel=1e-15)


def test_spike_within_e_eps():
    m, eps = 1000, 0.25
    w = np.zeros(m)
    w[-1] = 5.0
    q = math.log(m) / eps
    lo, hi = qnorm_bounds(w, q)
    assert lo <= 5.0 <= hi
    assert 5.0 / lo == pytest.approx(math.exp(eps), rel=1e-12)


@pytest.mark.parametrize("q", [1, 2, 8, 32])
def test_bracket_random(q, rng):
    for _ in range(200):
        w = rng.exponential(size=int(rng.integers(1, 500)))
        lo, hi = qnorm_bounds(w, q)
        assert lo <= w.max() <= hi


@given(arrays(np.float64, st.integers(1, 60), elements=st.floats(0, 1e6)), st.floats(1, 500))
def test_bracket_property(w, q):
    lo, hi = qnorm_bounds(w, q)
    assert lo <= w.max() <= hi


def test_bracket_matches_plain_formula(rng):
    w = rng.uniform(size=50)
    lo, hi = qnorm_bounds(w, 3.0)
    plain = np.mean(w**3) ** (1 / 3)
    assert lo == pytest.approx(plain, rel=1e-13)
    assert hi == pytest.approx(50 ** (1 / 3) * plain, rel=1e-13)


def test_bracket_errors():
    with pytest.raises(DomainError):
        qnorm_bounds([1.0, -0.1], 2.0)
    with pytest.raises(DomainError):
        qnorm_bounds([1.0], 0.5)


@pytest.mark.parametrize("m", [2, 10, 1000, 10**6, 10**12])
@pytest.mark.parametrize("eps", [0.01, 0.1, 0.5])
def test_inflation_is_e_eps(m, eps):
    q = math.log(m) / eps
    if q < 1:
        pytest.skip("q floored at 1")
    assert inflation(m, q) == pytest.approx(math.exp(eps), rel=4 * np.finfo(float).eps)


def test_exponent_floored_at_one():
    assert exponent_for(3, 10.0) == 1.0
    assert exponent_for(1000, 1.0) == pytest.approx(math.log(1000))


def test_hoeffding_draws():
    assert hoeffding_draws(0.1, 0.05) == math.ceil(math.log(40) / 0.02)


def test_constant_vector_estimate():
    c, b, m = 0.5, 1.0, 1000
    est = sampled_max_upper(lambda idx: np.full(idx.shape, c), m, 0.5, 0.05, b, seed=1)
    assert est.point == pytest.approx(c, rel=1e-12)
    expect = b * m ** (1 / est.q) * ((c / b) ** est.q + est.margin) ** (1 / est.q)
    assert est.upper == pytest.approx(expect, rel=1e-12)
    assert est.point <= est.upper


def test_small_vector_coverage():
    rng = np.random.default_rng(11)
    w = rng.uniform(0, 1, 8)
    delta = 0.1
    hits = 0
    trials = 10_000
    for t in range(trials):
        est = sampled_max_upper(lambda idx: w[idx], 8, 0.5, delta, 1.0, seed=t)
        hits += est.upper >= w.max()
    assert hits / trials >= 1 - delta


def test_q_one_limit():
    # with q = 1 the upper bound is m times the (inflated) mean
    w = np.linspace(0, 1, 11)
    est = sampled_max_upper(lambda idx: w[idx], 11, 100.0, 0.1, 1.0, seed=0)
    assert est.q == 1.0
    assert est.upper == pytest.approx(11 * (est.point + est.margin), rel=1e-12)


def test_bound_violation():
    with pytest.raises(BoundViolationError):
        sampled_max_upper(lambda idx: np.full(idx.shape, 2.0), 10, 0.5, 0.1, 1.0)


def test_scalar_evaluator_agrees_with_vectorised():
    w = np.random.default_rng(2).uniform(size=40)
    a = sampled_max_upper(lambda idx: w[idx], 40, 0.5, 0.1, 1.0, seed=3)
    b = sampled_max_upper(lambda j: w[j], 40, 0.5, 0.1, 1.0, seed=3, vectorized=False)
    assert a == b


def test_draw_cap_keeps_coverage():
    w = np.zeros(10**4)
    w[0] = 1.0
    est = sampled_max_upper(lambda idx: w[idx], w.size, 0.5, 0.1, 10.0, seed=0, max_draws=1000)
    assert est.k == 1000
    assert est.upper >= 1.0


@pytest.mark.parametrize("kw", [dict(m=0), dict(eps=0.0), dict(delta=1.0), dict(bound_B=0.0)])
def test_argument_errors(kw):
    args = dict(w_access=lambda idx: np.zeros(idx.shape), m=5, eps=0.5, delta=0.1, bound_B=1.0)
    args.update(kw)
    with pytest.raises(DomainError):
        sampled_max_upper(**args)


def test_estimate_rejects_small_q():
    with pytest.raises(DomainError):
        MaxEstimate(1.0, 2.0, 0.5, 10, 0.1, 0.1)
