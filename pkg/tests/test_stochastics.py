import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from indexfish.stochastics import (
    INDEPENDENT,
    PERFECTLY_CORRELATED,
    ShockSpec,
    cdf_at,
    conditional_mean,
    sample_shocks,
)

sigmas = st.floats(0.01, 2.0)


def test_independent_panel_moments():
    panel = sample_shocks(ShockSpec(0.2, 0.2, INDEPENDENT), 1000, seed=42)
    # CLT bound: 3 sigma / sqrt(n)
    assert abs(panel.theta.mean()) < 3 * 0.2 / math.sqrt(1000)
    assert abs(panel.theta.mean()) < 0.02
    assert abs(np.corrcoef(panel.theta, panel.omega)[0, 1]) < 0.1


def test_perfect_correlation_equal_sigmas_gives_identical_draws():
    panel = sample_shocks(ShockSpec(0.3, 0.3, PERFECTLY_CORRELATED), 100, seed=1)
    np.testing.assert_array_equal(panel.theta, panel.omega)


@given(st_theta=sigmas, st_omega=sigmas, seed=st.integers(0, 2**32))
@settings(max_examples=30, deadline=None)
def test_perfect_correlation_is_exact_rescaling(st_theta, st_omega, seed):
    panel = sample_shocks(ShockSpec(st_theta, st_omega, PERFECTLY_CORRELATED), 64, seed)
    np.testing.assert_allclose(panel.theta, st_theta / st_omega * panel.omega, rtol=1e-12, atol=0)


def test_zero_sigma_is_point_mass():
    panel = sample_shocks(ShockSpec(0.0, 0.4), 10, seed=3)
    assert np.all(panel.theta == 0)
    assert np.any(panel.omega != 0)


def test_panel_is_pure_function_of_inputs():
    spec = ShockSpec(0.2, 0.3)
    a = sample_shocks(spec, 500, seed=9)
    b = sample_shocks(spec, 500, seed=9)
    np.testing.assert_array_equal(a.draws, b.draws)
    c = sample_shocks(spec, 500, seed=10)
    assert not np.array_equal(a.theta, c.theta)


def test_theta_stream_independent_of_sigma_omega():
    a = sample_shocks(ShockSpec(0.2, 0.1), 200, seed=5)
    b = sample_shocks(ShockSpec(0.2, 0.4), 200, seed=5)
    np.testing.assert_array_equal(a.theta, b.theta)
    np.testing.assert_allclose(b.omega, 4 * a.omega)


def test_panel_arrays_are_read_only():
    panel = sample_shocks(ShockSpec(0.2, 0.2), 8, seed=0)
    with pytest.raises(ValueError):
        panel.theta[0] = 1.0


def test_antithetic_panel_exact_zero_moments():
    panel = sample_shocks(ShockSpec(0.3, 0.2), 1000, seed=4, antithetic=True)
    assert panel.n == 1000
    assert abs(panel.theta.mean()) < 1e-15
    assert abs(panel.omega.mean()) < 1e-15
    assert abs(np.mean(panel.theta * panel.omega)) < 1e-15
    assert abs(panel.theta[panel.omega < 0].mean()) < 1e-15


def test_invalid_arguments():
    with pytest.raises(ValueError):
        sample_shocks(ShockSpec(0.2, 0.2), 0, seed=0)
    with pytest.raises(ValueError):
        sample_shocks(ShockSpec(0.2, 0.2), 10, seed=0, antithetic=True)
    with pytest.raises(ValueError):
        sample_shocks(ShockSpec(0.2, 0.0, PERFECTLY_CORRELATED), 10, seed=0)
    with pytest.raises(ValueError):
        ShockSpec(-0.1, 0.2)
    with pytest.raises(ValueError):
        ShockSpec(0.1, 0.2, dependence="copula")


@pytest.mark.parametrize("variable", ["theta", "omega"])
def test_large_panel_moments(variable):
    sigma = 0.3
    panel = sample_shocks(ShockSpec(sigma, sigma), 100_000, seed=11)
    v = panel.values(variable)
    assert abs(v.mean()) <= 4 * sigma / math.sqrt(v.size)
    assert abs(v.std() - sigma) / sigma <= 0.02


@pytest.mark.parametrize("spec, variable, value, expected", [
    (ShockSpec(0.1, 0.3), "omega", 0.0, 0.5),
    (ShockSpec(0.1, 0.2), "omega", 0.2, 0.8413447460685429),
    (ShockSpec(0.1, 0.2), "theta", -0.1, 0.15865525393145707),
])
def test_cdf_examples(spec, variable, value, expected):
    assert cdf_at(spec, variable, value) == pytest.approx(expected, abs=1e-12)


@given(sigma=sigmas, a=st.floats(-3, 3), b=st.floats(-3, 3))
def test_cdf_monotone_and_centered(sigma, a, b):
    spec = ShockSpec(sigma, sigma)
    lo, hi = sorted((a, b))
    assert cdf_at(spec, "omega", lo) <= cdf_at(spec, "omega", hi)
    assert cdf_at(spec, "theta", 0.0) == 0.5
    # independent oracle
    assert cdf_at(spec, "omega", a) == pytest.approx(stats.norm.cdf(a, scale=sigma), abs=1e-12)


def test_cdf_degenerate_raises():
    with pytest.raises(ValueError):
        cdf_at(ShockSpec(0.0, 0.2), "theta", 0.0)


@pytest.mark.parametrize("sigma, side, expected", [
    (0.2, "below", -0.2 * math.sqrt(2 / math.pi)),
    (0.2, "above", 0.2 * math.sqrt(2 / math.pi)),
    (0.4, "below", -0.4 * math.sqrt(2 / math.pi)),
])
def test_conditional_mean_examples(sigma, side, expected):
    got = conditional_mean(ShockSpec(sigma, sigma), "omega", side, 0.0)
    assert got == pytest.approx(expected, rel=1e-12)
    assert round(got, 4) in (-0.1596, 0.1596, -0.3192)


@given(sigma=sigmas, z=st.floats(-3, 3))
def test_conditional_mean_brackets_trigger(sigma, z):
    spec = ShockSpec(sigma, sigma)
    t = z * sigma
    assert conditional_mean(spec, "theta", "below", t) < t
    assert conditional_mean(spec, "theta", "above", t) > t
    # scipy truncated normal as oracle
    below = stats.truncnorm(-np.inf, z, scale=sigma).mean()
    assert conditional_mean(spec, "theta", "below", t) == pytest.approx(below, rel=1e-7, abs=1e-12)


@pytest.mark.parametrize("trigger", [-0.2, 0.0, 0.1])
def test_conditional_mean_matches_monte_carlo(trigger):
    spec = ShockSpec(0.25, 0.25)
    v = sample_shocks(spec, 100_000, seed=21).omega
    for side, mask in (("below", v < trigger), ("above", v > trigger)):
        sample = v[mask]
        se = sample.std(ddof=1) / math.sqrt(sample.size)
        assert abs(sample.mean() - conditional_mean(spec, "omega", side, trigger)) <= 3 * se


def test_conditional_mean_degenerate_tail_raises():
    with pytest.raises(ValueError):
        conditional_mean(ShockSpec(0.1, 0.1), "omega", "below", -10.0)
