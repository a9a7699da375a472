"""Monte Carlo expected-utility maximization over inputs and coverage.

Inputs are searched in log space with a bounded Nelder-Mead simplex from
several starts. A candidate only counts as converged once a direct
perturbation test passes: moving any input by a relative ``CHECK_STEP``
(or coverage by an absolute ``CHECK_STEP``) must not raise expected utility
by more than ``TOL_EU``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import minimize

from .economics import (
    Contract,
    Preferences,
    ProductionSpec,
    cara_utility,
    cost,
    expected_harvest,
    net_transfer,
    price_contract,
    profit,
    UTILITY_EXP_CAP,
)
from .stochastics import ShockPanel, ShockSpec, sample_shocks

logger = logging.getLogger(__name__)

X_BOUNDS = (1e-3, 1e3)
GAMMA_MAX = 2.0
TOL_EU = 1e-9
CHECK_STEP = 1e-3
XATOL = 1e-8
FATOL = 1e-13
MAX_EVALS = 100_000
START_SCALES = (1.0, 0.5, 2.0)
GAMMA_START = 0.5
_SIMPLEX_STEP = 0.1
_POLISH_STEP = 1e-3
_MAX_POLISH = 4


@dataclass(frozen=True)
class DecisionProblem:
    """A fisher's choice problem on one fixed shock panel."""

    production: ProductionSpec
    shocks: ShockSpec
    panel: ShockPanel
    prefs: Preferences
    contract: Contract
    x_bounds: tuple[float, float] = X_BOUNDS
    gamma_max: float = GAMMA_MAX

    def __post_init__(self):
        if self.panel.spec != self.shocks:
            raise ValueError("panel was not sampled from this ShockSpec")
        lo, hi = self.x_bounds
        if not 0 < lo < hi:
            raise ValueError(f"invalid input bounds {self.x_bounds}")

    @property
    def insurable(self) -> bool:
        return self.shocks.sigma(self.contract.index) > 0


def make_problem(production: ProductionSpec, shocks: ShockSpec, risk_aversion: float,
                 index: str = "omega", trigger: float = 0.0, draws: int = 1000,
                 seed: int = 0, antithetic: bool = True, **kwargs) -> DecisionProblem:
    """Convenience constructor that samples the panel as well."""
    use_antithetic = antithetic and draws % 4 == 0
    panel = sample_shocks(shocks, draws, seed, antithetic=use_antithetic)
    return DecisionProblem(production, shocks, panel, Preferences(risk_aversion),
                           Contract(index, trigger), **kwargs)


@dataclass(frozen=True, eq=False)
class OptimalChoice:
    inputs: np.ndarray
    gamma_frac: float
    gamma_abs: float
    expected_utility: float
    expected_profit: float
    expected_harvest: float
    converged: bool
    evaluations: int
    max_check_gain: float
    tolerances: dict = field(default_factory=dict)

    def __eq__(self, other):
        if not isinstance(other, OptimalChoice):
            return NotImplemented
        return (np.array_equal(self.inputs, other.inputs)
                and all(getattr(self, f) == getattr(other, f)
                        for f in ("gamma_frac", "gamma_abs", "expected_utility", "expected_profit",
                                  "expected_harvest", "converged", "evaluations", "max_check_gain")))

    __hash__ = None


def resolve_contract(problem: DecisionProblem, gamma_frac: float, baseline_profit=None) -> Contract:
    if gamma_frac < 0:
        raise ValueError(f"gamma_frac must be nonnegative, got {gamma_frac}")
    if gamma_frac == 0:
        return replace(problem.contract, gamma_frac=0.0, gamma_abs=0.0, premium_abs=0.0, payout_prob=0.0)
    if baseline_profit is None or not baseline_profit > 0:
        raise ValueError(f"positive gamma needs a positive baseline profit, got {baseline_profit}")
    c = problem.contract
    return price_contract(c.index, c.trigger, gamma_frac * baseline_profit, problem.shocks,
                          gamma_frac=gamma_frac)


def expected_utility(problem: DecisionProblem, x, gamma_frac: float = 0.0,
                     baseline_profit=None) -> float:
    """Panel average of CARA utility of profit plus the contract's net transfer."""
    contract = resolve_contract(problem, gamma_frac, baseline_profit)
    panel = problem.panel
    wealth = profit(problem.production, x, panel.theta, panel.omega)
    wealth = wealth + net_transfer(contract, panel.values(contract.index))
    return float(np.mean(cara_utility(problem.prefs, wealth)))


class _Objective:
    """Vectorized expected utility with everything panel-dependent precomputed."""

    def __init__(self, problem: DecisionProblem):
        prod = problem.production
        panel = problem.panel
        self.alphas = prod.alphas
        self.betas = prod.betas
        self.costs = prod.costs
        self.stock = prod.biomass_mean + panel.theta
        self.omega = np.asarray(panel.omega)
        self.a = problem.prefs.risk_aversion
        c = problem.contract
        self.bad = panel.values(c.index) < c.trigger
        self.prob = 0.0
        if problem.insurable:
            self.prob = price_contract(c.index, c.trigger, 1.0, problem.shocks).payout_prob
        self.evaluations = 0
        self._standard = prod.mode == "standard"

    def __call__(self, x: np.ndarray, gamma_abs: float = 0.0) -> float:
        self.evaluations += 1
        logx = np.log(x)
        f = math.exp(float(self.alphas @ logx))
        w = f * self.stock - float(self.costs @ (x * x))
        if not self._standard:
            w = w + math.exp(float(self.betas @ logx)) * self.omega
        if gamma_abs:
            w = w + np.where(self.bad, gamma_abs, 0.0) - self.prob * gamma_abs
        arg = np.minimum(-self.a * w, UTILITY_EXP_CAP)
        return float(np.mean(1.0 - np.exp(arg)))


def deterministic_optimum(production: ProductionSpec) -> np.ndarray:
    """Riskless optimum of ``B f(x) - sum c_i x_i^2``.

    The first-order conditions give ``x_i**2 = alpha_i f / (2 c_i)``; with
    ``S = sum alpha_i < 2`` this solves in closed form. Falls back to ones
    when ``S >= 2`` (no interior riskless optimum).
    """
    alphas, costs = production.alphas, production.costs
    s = alphas.sum()
    if s >= 2:
        return np.ones(production.n_inputs)
    ratios = alphas / (2.0 * costs)
    log_f = (math.log(production.biomass_mean) + float(np.sum(alphas / 2 * np.log(ratios)))) / (1 - s / 2)
    return np.sqrt(ratios * math.exp(log_f))


def _perturbation_gain(obj: _Objective, problem: DecisionProblem, x: np.ndarray,
                       gamma_frac: float, base_profit: float, vary_gamma: bool):
    """Expected utility at ``(x, gamma)`` and the best gain from one-coordinate moves."""
    lo, hi = problem.x_bounds
    eu0 = obj(x, gamma_frac * base_profit)
    gain = -np.inf
    for i in range(x.size):
        for sign in (-1.0, 1.0):
            xi = x[i] * (1 + sign * CHECK_STEP)
            if lo <= xi <= hi:
                xp = x.copy()
                xp[i] = xi
                gain = max(gain, obj(xp, gamma_frac * base_profit) - eu0)
    if vary_gamma:
        for sign in (-1.0, 1.0):
            gp = gamma_frac + sign * CHECK_STEP
            if 0 <= gp <= problem.gamma_max:
                gain = max(gain, obj(x, gp * base_profit) - eu0)
    return eu0, float(gain)


def _nelder_mead(fun, p0, bounds, step, maxfev):
    p0 = np.asarray(p0, dtype=float)
    simplex = [p0]
    for i in range(p0.size):
        v = p0.copy()
        v[i] = v[i] + step if v[i] + step <= bounds[i][1] else v[i] - step
        simplex.append(v)
    res = minimize(
        fun, p0, method="Nelder-Mead", bounds=bounds,
        options={"initial_simplex": np.array(simplex), "xatol": XATOL, "fatol": FATOL,
                 "maxfev": maxfev, "maxiter": maxfev},
    )
    return res.x


def _search(problem: DecisionProblem, starts, base_profit: float, joint: bool, gamma_frac: float = 0.0):
    obj = _Objective(problem)
    lo, hi = problem.x_bounds
    k = problem.production.n_inputs
    log_lo, log_hi = math.log(lo), math.log(hi)
    bounds = [(log_lo, log_hi)] * k + ([(0.0, problem.gamma_max)] if joint else [])

    def decode(p):
        x = np.exp(np.clip(p[:k], log_lo, log_hi))
        g = float(np.clip(p[k], 0.0, problem.gamma_max)) if joint else gamma_frac
        return x, g

    def neg(p):
        x, g = decode(p)
        return -obj(x, g * base_profit)

    candidates = []
    for p0 in starts:
        if obj.evaluations >= MAX_EVALS:
            break
        p = _nelder_mead(neg, p0, bounds, _SIMPLEX_STEP, MAX_EVALS - obj.evaluations)
        for attempt in range(_MAX_POLISH + 1):
            x, g = decode(p)
            eu, gain = _perturbation_gain(obj, problem, x, g, base_profit, joint)
            if gain <= TOL_EU or attempt == _MAX_POLISH or obj.evaluations >= MAX_EVALS:
                break
            # restart from the stalled point with a small simplex
            p = _nelder_mead(neg, p, bounds, _POLISH_STEP, MAX_EVALS - obj.evaluations)
        candidates.append((eu, x, g, gain))

    best_eu = max(c[0] for c in candidates)
    tied = [c for c in candidates if c[0] >= best_eu - TOL_EU]
    eu, x, g, gain = min(tied, key=lambda c: (float(np.linalg.norm(c[1])), -c[0]))
    return eu, x, g, gain, obj.evaluations


def _choice(problem, x, gamma_frac, gamma_abs, eu, gain, evaluations) -> OptimalChoice:
    prod = problem.production
    x = np.array(x, dtype=float)
    x.setflags(write=False)
    return OptimalChoice(
        inputs=x,
        gamma_frac=float(gamma_frac),
        gamma_abs=float(gamma_abs),
        expected_utility=float(eu),
        expected_profit=expected_harvest(prod, x) - cost(prod, x),
        expected_harvest=expected_harvest(prod, x),
        converged=bool(gain <= TOL_EU),
        evaluations=int(evaluations),
        max_check_gain=float(gain),
        tolerances={"tol_eu": TOL_EU, "check_step": CHECK_STEP, "xatol": XATOL,
                    "fatol": FATOL, "max_evals": MAX_EVALS},
    )


def _input_starts(problem: DecisionProblem, anchor=None) -> list[np.ndarray]:
    lo, hi = problem.x_bounds
    anchor = deterministic_optimum(problem.production) if anchor is None else np.asarray(anchor)
    return [np.log(np.clip(anchor * s, lo, hi)) for s in START_SCALES]


def optimize_inputs(problem: DecisionProblem, gamma_frac: float = 0.0,
                    baseline_profit=None) -> OptimalChoice:
    """Optimal inputs for a fixed coverage level ``gamma_frac``.

    Starts from the riskless optimum and from half and twice it.
    """
    contract = resolve_contract(problem, gamma_frac, baseline_profit)
    if contract.gamma_abs > 0 and not problem.insurable:
        raise ValueError("positive coverage on a degenerate index")
    eu, x, _, gain, n_eval = _search(problem, _input_starts(problem), baseline_profit or 0.0,
                                     joint=False, gamma_frac=gamma_frac)
    choice = _choice(problem, x, gamma_frac, contract.gamma_abs, eu, gain, n_eval)
    if not choice.converged:
        logger.warning("optimize_inputs failed the local optimality check (gain %.3g)", gain)
    return choice


def baseline(problem: DecisionProblem) -> OptimalChoice:
    """No-insurance optimum; its expected profit normalizes coverage."""
    choice = optimize_inputs(problem, 0.0)
    if not choice.expected_profit > 0:
        raise ValueError(
            f"baseline expected profit {choice.expected_profit:.6g} is not positive; "
            "coverage normalization is undefined"
        )
    return choice


def optimize_inputs_and_coverage(problem: DecisionProblem,
                                 base: OptimalChoice | None = None) -> OptimalChoice:
    """Jointly optimal inputs and coverage ``gamma_frac`` in ``[0, gamma_max]``.

    ``gamma_frac`` is a multiple of the baseline expected profit, resolved
    once from ``base`` (solved here when not supplied).
    """
    if base is None:
        base = baseline(problem)
    if not problem.insurable:
        return base
    base_profit = base.expected_profit
    lo, hi = problem.x_bounds
    starts = [np.append(np.log(np.clip(base.inputs, lo, hi)), GAMMA_START)]
    starts += [np.append(p, GAMMA_START) for p in _input_starts(problem)[1:]]
    eu, x, g, gain, n_eval = _search(problem, starts, base_profit, joint=True)
    if eu < base.expected_utility:
        # zero coverage is feasible, so never report anything worse
        eu0, gain0 = _perturbation_gain(_Objective(problem), problem, np.array(base.inputs),
                                        0.0, base_profit, True)
        return _choice(problem, base.inputs, 0.0, 0.0, eu0, gain0, n_eval)
    choice = _choice(problem, x, g, g * base_profit, eu, gain, n_eval)
    if not choice.converged:
        logger.warning("joint optimization failed the local optimality check (gain %.3g)", gain)
    return choice
