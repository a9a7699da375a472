"""Production, profit, CARA utility and the index-insurance contract.

Output price is normalized to one. Production follows the Just-Pope form

    y = f(x) * (B + theta) + omega * h(x)

with Cobb-Douglas ``f(x) = prod x_i**alpha_i`` and ``h(x) = prod x_i**beta_i``.
In ``standard`` mode the extraction term is dropped. Costs are quadratic,
``c(x) = sum c_i * x_i**2``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .stochastics import ShockSpec, cdf_at

STANDARD = "standard"
RISKY = "risky"
MODES = (STANDARD, RISKY)

DEFAULT_COST = 0.25

# exp() argument cap for CARA utility; wealth below -UTILITY_EXP_CAP / a saturates.
UTILITY_EXP_CAP = 700.0


@dataclass(frozen=True)
class InputSpec:
    name: str
    alpha: float
    beta: float = 0.0
    cost_coeff: float = DEFAULT_COST

    def __post_init__(self):
        if not 0 < self.alpha <= 1:
            raise ValueError(f"input {self.name!r}: alpha must lie in (0, 1], got {self.alpha}")
        if not self.cost_coeff > 0:
            raise ValueError(f"input {self.name!r}: cost_coeff must be positive, got {self.cost_coeff}")


@dataclass(frozen=True)
class ProductionSpec:
    """Technology of a fisher choosing one or more inputs."""

    inputs: tuple[InputSpec, ...]
    mode: str = RISKY
    biomass_mean: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "inputs", tuple(self.inputs))
        if not self.inputs:
            raise ValueError("at least one input is required")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if not self.biomass_mean > 0:
            raise ValueError(f"biomass_mean must be positive, got {self.biomass_mean}")
        names = [inp.name for inp in self.inputs]
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate input names: {names}")

    @classmethod
    def single(cls, alpha, beta=0.0, cost=DEFAULT_COST, mode=RISKY, biomass_mean=1.0, name="x"):
        return cls((InputSpec(name, alpha, beta, cost),), mode=mode, biomass_mean=biomass_mean)

    @property
    def n_inputs(self) -> int:
        return len(self.inputs)

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(inp.name for inp in self.inputs)

    @property
    def alphas(self) -> np.ndarray:
        return np.array([inp.alpha for inp in self.inputs])

    @property
    def betas(self) -> np.ndarray:
        # standard production has no extraction channel
        if self.mode == STANDARD:
            return np.zeros(self.n_inputs)
        return np.array([inp.beta for inp in self.inputs])

    @property
    def costs(self) -> np.ndarray:
        return np.array([inp.cost_coeff for inp in self.inputs])


@dataclass(frozen=True)
class Preferences:
    risk_aversion: float

    def __post_init__(self):
        if not self.risk_aversion > 0:
            raise ValueError(f"risk_aversion must be positive, got {self.risk_aversion}")


@dataclass(frozen=True)
class Contract:
    """An index-insurance contract paying ``gamma_abs`` when the index falls below ``trigger``.

    ``payout_prob`` is ``J(trigger)`` and ``premium_abs = payout_prob * gamma_abs``.
    """

    index: str
    trigger: float = 0.0
    gamma_frac: float = 0.0
    gamma_abs: float = 0.0
    premium_abs: float = 0.0
    payout_prob: float = 0.0

    def __post_init__(self):
        if self.index not in ("theta", "omega"):
            raise ValueError(f"contract index must be 'theta' or 'omega', got {self.index!r}")
        if self.gamma_abs < 0 or self.gamma_frac < 0:
            raise ValueError("payouts must be nonnegative")


def _as_inputs(spec: ProductionSpec, x) -> np.ndarray:
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.shape != (spec.n_inputs,):
        raise ValueError(f"expected {spec.n_inputs} input levels, got shape {x.shape}")
    if np.any(~(x > 0)):
        raise ValueError(f"inputs must be strictly positive, got {x}")
    return x


def mean_production(spec: ProductionSpec, x) -> float:
    """``f(x)``, the Cobb-Douglas mean-production term."""
    x = _as_inputs(spec, x)
    return float(np.prod(x ** spec.alphas))


def risk_function(spec: ProductionSpec, x) -> float:
    """``h(x)``, the extraction-risk term; zero in standard mode."""
    x = _as_inputs(spec, x)
    if spec.mode == STANDARD:
        return 0.0
    return float(np.prod(x ** spec.betas))


def cost(spec: ProductionSpec, x) -> float:
    x = _as_inputs(spec, x)
    return float(np.sum(spec.costs * x * x))


def harvest(spec: ProductionSpec, x, theta, omega):
    """Realized harvest for input vector ``x``.

    ``theta`` and ``omega`` may be scalars or equal-length arrays. Harvest is
    allowed to go negative under extreme shocks.
    """
    f = mean_production(spec, x)
    h = risk_function(spec, x)
    return f * (spec.biomass_mean + np.asarray(theta)) + np.asarray(omega) * h


def expected_harvest(spec: ProductionSpec, x) -> float:
    return spec.biomass_mean * mean_production(spec, x)


def profit(spec: ProductionSpec, x, theta, omega):
    return harvest(spec, x, theta, omega) - cost(spec, x)


def marginal_profit(spec: ProductionSpec, x, theta, omega) -> np.ndarray:
    """Analytic gradient of profit in ``x``.

    Returns an array of shape ``(n_inputs,) + broadcast(theta, omega).shape``.
    """
    x = _as_inputs(spec, x)
    theta = np.asarray(theta, dtype=float)
    omega = np.asarray(omega, dtype=float)
    f = mean_production(spec, x)
    h = risk_function(spec, x)
    alphas, betas, costs = spec.alphas, spec.betas, spec.costs
    shape = (spec.n_inputs,) + np.broadcast(theta, omega).shape
    grad = np.empty(shape)
    for i in range(spec.n_inputs):
        grad[i] = (
            alphas[i] * f / x[i] * (spec.biomass_mean + theta)
            + betas[i] * h / x[i] * omega
            - 2.0 * costs[i] * x[i]
        )
    return grad


def price_contract(index: str, trigger: float, gamma_abs: float, shocks: ShockSpec,
                   gamma_frac: float = 0.0) -> Contract:
    """Actuarially fair contract: premium = J(trigger) * payout."""
    if gamma_abs < 0:
        raise ValueError(f"gamma_abs must be nonnegative, got {gamma_abs}")
    if gamma_abs == 0:
        return Contract(index, trigger, gamma_frac, 0.0, 0.0, 0.0)
    if shocks.sigma(index) <= 0:
        raise ValueError(f"cannot insure on {index}: its sigma is zero")
    prob = cdf_at(shocks, index, trigger)
    return Contract(index, trigger, gamma_frac, float(gamma_abs), prob * gamma_abs, prob)


def net_transfer(contract: Contract, index_value):
    """Payout minus premium for realized index values.

    The bad state is ``index_value < trigger``; a value exactly at the
    trigger counts as the good state.
    """
    v = np.asarray(index_value, dtype=float)
    return np.where(v < contract.trigger, contract.gamma_abs, 0.0) - contract.premium_abs


def cara_utility(prefs: Preferences, wealth):
    """``1 - exp(-a * wealth)``, saturating at wealth ``-UTILITY_EXP_CAP / a``."""
    arg = np.minimum(-prefs.risk_aversion * np.asarray(wealth, dtype=float), UTILITY_EXP_CAP)
    out = 1.0 - np.exp(arg)
    return float(out) if out.ndim == 0 else out


def certainty_equivalent(prefs: Preferences, expected_utility: float) -> float:
    """Sure wealth with the same CARA utility: ``-ln(1 - EU) / a``."""
    return float(-np.log1p(-expected_utility) / prefs.risk_aversion)
