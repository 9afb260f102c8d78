import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from edgeavg.errors import EstimationError, FitError
from edgeavg.initials import symmetric_stable
from edgeavg.stats import (effective_time, empirical_lp_norm, linear_fit, mean_ci, powerlaw_fit, tail_prob,
                           variance_estimate)


def test_mean_ci_examples():
    e = mean_ci([1, 1, 1, 1])
    assert (e.point, e.standard_error, e.sample_count) == (1.0, 0.0, 4)
    e = mean_ci([0, 2])
    assert e.point == 1.0 and math.isclose(e.standard_error, 1.0)
    e = mean_ci([-1, 1] * 5000)
    assert abs(e.point) < 1e-12 and e.standard_error < 0.011
    assert e.interval(2) == (e.point - 2 * e.standard_error, e.point + 2 * e.standard_error)


def test_mean_ci_errors():
    with pytest.raises(EstimationError):
        mean_ci([1.0])
    with pytest.raises(EstimationError):
        mean_ci([1.0, math.nan])
    with pytest.raises(EstimationError):
        tail_prob([0.0, math.inf], 1.0)


def test_tail_prob_examples():
    assert tail_prob(np.zeros(10), 0.5).point == 0.0
    e = tail_prob(np.tile([1.0, -1.0], 500), 0.5)
    assert e.point == 1.0 and e.standard_error == 0.0
    e = tail_prob([0.0, 1.0, 0.2, -0.6], 0.5)
    assert e.point == 0.5 and math.isclose(e.standard_error, math.sqrt(0.25 / 4))


def test_lp_norm_examples():
    assert empirical_lp_norm([1, -1], 2).point == 1.0
    assert empirical_lp_norm([2, 0], 1, center=1).point == 1.0
    x = symmetric_stable(2.0, 100_000, np.random.default_rng(0))
    e = empirical_lp_norm(x, 2)
    assert abs(e.point - math.sqrt(2)) < 0.05
    assert 0 < e.standard_error < 0.01
    with pytest.raises(EstimationError):
        empirical_lp_norm(x, 0.5)


def test_lp_norm_warns_on_heavy_tails():
    x = np.zeros(100_000)
    x[0] = 1e3
    with pytest.warns(RuntimeWarning, match="kurtosis"):
        empirical_lp_norm(x + 1e-3, 2)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        empirical_lp_norm(np.random.default_rng(1).normal(size=1000), 2)


def _welford(xs):
    n, mean, m2 = 0, 0.0, 0.0
    for x in xs:
        n += 1
        d = x - mean
        mean += d / n
        m2 += d * (x - mean)
    return mean, math.sqrt(m2 / (n - 1) / n)


def test_agrees_with_streaming_one_pass():
    x = np.random.default_rng(2).normal(1.5, 3.0, 1_000_000)
    mean, se = _welford(x.tolist())
    e = mean_ci(x)
    assert abs(e.point - mean) < 1e-10 and abs(e.standard_error - se) < 1e-10
    p = 3.0
    m, m_se = _welford((np.abs(x - 0.5) ** p).tolist())
    norm = m ** (1 / p)
    e = empirical_lp_norm(x, p, center=0.5)
    assert abs(e.point - norm) < 1e-10
    assert abs(e.standard_error - norm / (p * m) * m_se) < 1e-10


def test_variance_estimate_against_normal_theory():
    x = np.random.default_rng(3).normal(size=200_000)
    e = variance_estimate(x)
    assert abs(e.point - 1) < 4 * e.standard_error
    assert math.isclose(e.standard_error, math.sqrt(2 / x.size), rel_tol=0.02)


def test_powerlaw_examples():
    fit = powerlaw_fit([(x, x ** -0.5) for x in (1, 4, 16, 64)])
    assert math.isclose(fit.exponent, -0.5) and math.isclose(fit.r_squared, 1.0)
    assert np.allclose(fit.predict([4, 16]), [0.5, 0.25])
    assert abs(powerlaw_fit([(x, 7.0) for x in (1, 2, 3)]).exponent) < 1e-12
    rng = np.random.default_rng(4)
    xs = np.geomspace(1, 1000, 8)
    ys = 3 * xs ** -0.25 * (1 + rng.uniform(-0.02, 0.02, 8))
    assert abs(powerlaw_fit(np.column_stack([xs, ys])).exponent + 0.25) < 0.03


@settings(max_examples=50, deadline=None)
@given(exponent=st.floats(-3, 3), scale=st.floats(0.01, 100), seed=st.integers(0, 2 ** 32 - 1))
def test_powerlaw_recovers_planted_exponent(exponent, scale, seed):
    rng = np.random.default_rng(seed)
    xs = np.geomspace(1, 1000, 8)
    ys = scale * xs ** exponent * (1 + 0.01 * rng.uniform(-1, 1, 8))
    assert abs(powerlaw_fit(np.column_stack([xs, ys])).exponent - exponent) <= 0.02


def test_fit_errors():
    with pytest.raises(FitError):
        powerlaw_fit([(1, 1), (2, 2)])
    with pytest.raises(FitError):
        powerlaw_fit([(1, 1), (2, 0), (3, 1)])
    with pytest.raises(FitError):
        linear_fit([1, 1, 1], [1, 2, 3])


def test_effective_time_examples():
    assert effective_time(100, 5) == 25
    assert effective_time(100, math.inf) == 100
    assert effective_time(10, 100) == 10
    with pytest.raises(EstimationError):
        effective_time(-1, 5)
