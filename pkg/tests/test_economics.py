import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from indexfish.economics import (
    STANDARD,
    Contract,
    InputSpec,
    Preferences,
    ProductionSpec,
    cara_utility,
    certainty_equivalent,
    expected_harvest,
    harvest,
    marginal_profit,
    net_transfer,
    price_contract,
    profit,
)
from indexfish.experiments import COASTAL_SEINERS
from indexfish.stochastics import ShockSpec, sample_shocks

single = ProductionSpec.single(0.5, 0.3)


def test_harvest_examples():
    assert harvest(single, [1.0], 0.0, 0.0) == pytest.approx(1.0)
    assert harvest(single, [4.0], 0.1, 0.0) == pytest.approx(2.2)
    assert harvest(COASTAL_SEINERS.production(), [1, 1, 1], 0.0, 0.0) == pytest.approx(1.0)


def test_profit_examples():
    assert profit(single, [1.0], 0.0, 0.0) == pytest.approx(0.75)
    assert profit(single, [1.0], -1.0, 0.0) == pytest.approx(-0.25)
    assert profit(ProductionSpec.single(0.3, -0.4, biomass_mean=2.0), [1.0], -2.0, 0.0) == pytest.approx(-0.25)
    assert profit(COASTAL_SEINERS.production(), [1, 1, 1], 0.0, 0.0) == pytest.approx(0.25)


def test_standard_mode_ignores_extraction_risk():
    spec = ProductionSpec.single(0.5, 0.7, mode=STANDARD)
    assert harvest(spec, [2.0], 0.0, 0.5) == pytest.approx(2 ** 0.5)
    np.testing.assert_array_equal(spec.betas, [0.0])


def test_spec_validation():
    with pytest.raises(ValueError):
        InputSpec("x", 0.0)
    with pytest.raises(ValueError):
        InputSpec("x", 0.5, cost_coeff=0.0)
    with pytest.raises(ValueError):
        ProductionSpec.single(0.5, biomass_mean=0.0)
    with pytest.raises(ValueError):
        ProductionSpec.single(0.5, mode="other")
    with pytest.raises(ValueError):
        ProductionSpec((InputSpec("x", 0.5), InputSpec("x", 0.3)))
    with pytest.raises(ValueError):
        harvest(single, [0.0], 0.0, 0.0)


@given(x=st.floats(0.05, 5), alpha=st.floats(0.05, 1), beta=st.floats(-1, 1),
       biomass=st.floats(0.2, 3), mode=st.sampled_from(["risky", "standard"]))
def test_zero_shock_identity(x, alpha, beta, biomass, mode):
    spec = ProductionSpec.single(alpha, beta, mode=mode, biomass_mean=biomass)
    assert harvest(spec, [x], 0.0, 0.0) == pytest.approx(biomass * x ** alpha, rel=1e-12)


def test_mean_harvest_identity():
    panel = sample_shocks(ShockSpec(0.3, 0.4), 100_000, seed=2)
    spec = ProductionSpec.single(0.5, -0.5)
    for x in (0.5, 1.0, 2.0):
        h = harvest(spec, [x], panel.theta, panel.omega)
        assert abs(h.mean() / expected_harvest(spec, [x]) - 1) <= 0.01


@pytest.mark.parametrize("beta", [0.3, -0.3])
def test_risk_effect_sign(beta):
    spec = ProductionSpec.single(0.5, beta)
    panel = sample_shocks(ShockSpec(0.0, 0.3), 2000, seed=3)
    var = [np.var(harvest(spec, [x], panel.theta, panel.omega)) for x in (0.5, 1.0, 1.5)]
    diffs = np.diff(var)
    assert np.all(diffs > 0) if beta > 0 else np.all(diffs < 0)


def test_marginal_profit_matches_finite_difference():
    spec = COASTAL_SEINERS.production()
    x = np.array([0.8, 1.3, 0.6])
    theta = np.array([-0.2, 0.0, 0.3])
    omega = np.array([0.1, -0.4, 0.2])
    grad = marginal_profit(spec, x, theta, omega)
    assert grad.shape == (3, 3)
    for i in range(3):
        h = 1e-6
        up, dn = x.copy(), x.copy()
        up[i] += h
        dn[i] -= h
        fd = (profit(spec, up, theta, omega) - profit(spec, dn, theta, omega)) / (2 * h)
        np.testing.assert_allclose(grad[i], fd, rtol=1e-7)


def test_price_contract_examples():
    assert price_contract("omega", 0.0, 10.0, ShockSpec(0.2, 0.3)).premium_abs == pytest.approx(5.0)
    c = price_contract("omega", -0.2, 1.0, ShockSpec(0.2, 0.2))
    assert c.premium_abs == pytest.approx(0.15865525393145707, rel=1e-12)
    assert c.premium_abs == c.payout_prob * c.gamma_abs
    zero = price_contract("theta", 0.0, 0.0, ShockSpec(0.3, 0.2))
    assert zero.premium_abs == 0.0 and zero.gamma_abs == 0.0
    with pytest.raises(ValueError):
        price_contract("theta", 0.0, 1.0, ShockSpec(0.0, 0.2))


def test_net_transfer_examples():
    c = Contract("omega", 0.0, 1.0, 10.0, 5.0, 0.5)
    assert net_transfer(c, -0.1) == pytest.approx(5.0)
    assert net_transfer(c, 0.1) == pytest.approx(-5.0)
    # exactly at the trigger is the good state
    assert net_transfer(c, 0.0) == pytest.approx(-5.0)
    none = Contract("omega")
    np.testing.assert_array_equal(net_transfer(none, np.array([-1.0, 0.0, 2.0])), 0.0)


def test_fair_premium_has_zero_mean():
    shocks = ShockSpec(0.2, 0.3)
    panel = sample_shocks(shocks, 100_000, seed=8)
    c = price_contract("omega", -0.1, 2.0, shocks)
    t = net_transfer(c, panel.omega)
    assert abs(t.mean()) <= 3 * t.std(ddof=1) / math.sqrt(t.size)


@pytest.mark.parametrize("a, w, expected", [(1, 0, 0.0), (2, 1, 1 - math.exp(-2)), (3, -0.5, 1 - math.exp(1.5))])
def test_cara_examples(a, w, expected):
    assert cara_utility(Preferences(a), w) == pytest.approx(expected, rel=1e-12, abs=1e-15)
    assert round(cara_utility(Preferences(a), w), 4) in (0.0, 0.8647, -3.4817)


# a * w stays below ~15 so that 1 - exp(-a w) is still resolvable from 1 in doubles
@given(a=st.floats(0.1, 3), w1=st.floats(-20, 5), w2=st.floats(-20, 5), d=st.floats(1e-2, 5))
def test_cara_monotone_and_concave(a, w1, w2, d):
    prefs = Preferences(a)
    assert cara_utility(prefs, w1 + d) > cara_utility(prefs, w1)
    mid = cara_utility(prefs, (w1 + w2) / 2)
    avg = (cara_utility(prefs, w1) + cara_utility(prefs, w2)) / 2
    assert mid >= avg - 1e-12 * max(1.0, abs(avg))


def test_cara_saturates_instead_of_overflowing():
    u = cara_utility(Preferences(1.0), -1e6)
    assert np.isfinite(u)
    assert u == cara_utility(Preferences(1.0), -800.0)


@given(a=st.floats(0.1, 2), w=st.floats(-5, 5))
def test_certainty_equivalent_inverts_utility(a, w):
    prefs = Preferences(a)
    assert certainty_equivalent(prefs, cara_utility(prefs, w)) == pytest.approx(w, abs=1e-9)


def test_preferences_validation():
    with pytest.raises(ValueError):
        Preferences(0.0)
