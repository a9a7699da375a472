"""Sign checks for the lemmas and propositions on insured input choice.

Each check returns :class:`SignReport` records. A predicted sign is one of
``positive``, ``negative`` or ``ambiguous``; the observed sign is
``positive``, ``negative`` or ``zero`` (inside the claim's noise floor).

Weak claims (standard production or a stock-shock contract, where inputs
never fall) pass when the observation sits inside the floor. Strict claims
must clear it.
"""

from __future__ import annotations

import itertools
from dataclasses import asdict, dataclass, field

import numpy as np

from .economics import STANDARD, marginal_profit, profit
from .optimizer import (
    DecisionProblem,
    OptimalChoice,
    baseline,
    expected_utility,
    optimize_inputs,
    optimize_inputs_and_coverage,
)
from .stochastics import PERFECTLY_CORRELATED

POSITIVE, NEGATIVE, ZERO, AMBIGUOUS = "positive", "negative", "zero", "ambiguous"

# percentage-point floor on input responses
RESPONSE_FLOOR_PP = 0.1
MIN_STATE_DRAWS = 50
FD_STEP = 1e-6
# standard errors of the conditional-mean gap treated as noise
GAP_FLOOR_SE = 3.0
# relative tolerance on x*(gamma) ordering, matching optimizer resolution
MONOTONE_RTOL = 1e-6


@dataclass
class SignReport:
    claim_id: str
    predicted_sign: str
    observed_value: float
    observed_sign: str
    passed: bool
    noise_floor: float
    context: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)


def _sign(value: float, floor: float) -> str:
    if abs(value) <= floor:
        return ZERO
    return POSITIVE if value > 0 else NEGATIVE


def _verdict(predicted: str, observed: str, weak: bool) -> bool:
    if predicted == AMBIGUOUS:
        return True
    if observed == predicted:
        return True
    return weak and observed == ZERO


def _problem_context(problem: DecisionProblem) -> dict:
    prod = problem.production
    return {
        "mode": prod.mode,
        "alphas": prod.alphas.tolist(),
        "betas": [inp.beta for inp in prod.inputs],
        "costs": prod.costs.tolist(),
        "risk_aversion": problem.prefs.risk_aversion,
        "sigma_theta": problem.shocks.sigma_theta,
        "sigma_omega": problem.shocks.sigma_omega,
        "dependence": problem.shocks.dependence,
        "index": problem.contract.index,
        "trigger": problem.contract.trigger,
        "draws": problem.panel.n,
    }


def fd_marginal_profit(problem: DecisionProblem, x, input_index: int = 0, step: float = FD_STEP) -> np.ndarray:
    """Central finite difference of per-draw profit in one input (relative step)."""
    x = np.asarray(x, dtype=float)
    hi, lo = x.copy(), x.copy()
    hi[input_index] *= 1 + step
    lo[input_index] *= 1 - step
    p = problem.panel
    diff = profit(problem.production, hi, p.theta, p.omega) - profit(problem.production, lo, p.theta, p.omega)
    return diff / (2 * step * x[input_index])


def _gap_prediction(problem: DecisionProblem, index: str, beta: float) -> tuple[str, str]:
    prod = problem.production
    if problem.shocks.dependence == PERFECTLY_CORRELATED:
        if prod.mode != STANDARD and beta > 0:
            return NEGATIVE, "Lemma-A5-riskinc"
        if prod.mode == STANDARD or beta == 0:
            return NEGATIVE, "Lemma-A5-stock"
        return AMBIGUOUS, "Lemma-A5-riskdec"
    if index == "theta":
        return NEGATIVE, "Lemma-2.1"
    if prod.mode == STANDARD or beta == 0:
        return AMBIGUOUS, "Lemma-3.1-noriskeffect"
    if beta < 0:
        return POSITIVE, "Lemma-3.1-riskdec"
    return NEGATIVE, "Lemma-3.1-riskinc"


def check_marginal_profit_gap(problem: DecisionProblem, index: str | None = None,
                              trigger: float | None = None, x=None,
                              input_index: int = 0) -> SignReport:
    """Bad-state minus good-state mean marginal profit at the baseline optimum.

    Marginal profit is taken by central finite differences of profit on the
    panel. The noise floor is ``GAP_FLOOR_SE`` standard errors of the
    difference of the two conditional means.
    """
    index = problem.contract.index if index is None else index
    trigger = problem.contract.trigger if trigger is None else trigger
    if x is None:
        x = baseline(problem).inputs
    v = problem.panel.values(index)
    bad = v < trigger
    n_bad, n_good = int(bad.sum()), int((~bad).sum())
    if min(n_bad, n_good) < MIN_STATE_DRAWS:
        raise ValueError(
            f"too few draws per state for a gap estimate: {n_bad} bad, {n_good} good "
            f"(need {MIN_STATE_DRAWS} each)"
        )
    mp = fd_marginal_profit(problem, x, input_index)
    gap = float(mp[bad].mean() - mp[~bad].mean())
    se = float(np.sqrt(mp[bad].var(ddof=1) / n_bad + mp[~bad].var(ddof=1) / n_good))
    floor = GAP_FLOOR_SE * se
    beta = problem.production.inputs[input_index].beta
    predicted, claim = _gap_prediction(problem, index, beta)
    observed = _sign(gap, floor)
    ctx = _problem_context(problem)
    ctx.update(gap_index=index, gap_trigger=trigger, x=np.asarray(x).tolist(),
               input=problem.production.names[input_index], n_bad=n_bad, n_good=n_good)
    return SignReport(claim, predicted, gap, observed, _verdict(predicted, observed, weak=False), floor, ctx)


def analytic_marginal_profit(problem: DecisionProblem, x, input_index: int = 0) -> np.ndarray:
    p = problem.panel
    return marginal_profit(problem.production, x, p.theta, p.omega)[input_index]


def _response_prediction(problem: DecisionProblem) -> tuple[str, str, bool]:
    """(predicted sign, claim id, weak) for a single-input insured response."""
    prod = problem.production
    beta = prod.inputs[0].beta
    index = problem.contract.index
    if problem.shocks.dependence == PERFECTLY_CORRELATED:
        if prod.mode == STANDARD or beta > 0:
            return POSITIVE, "Prop-A5-riskinc", True
        return AMBIGUOUS, "Prop-A5-riskdec", True
    if prod.mode == STANDARD:
        if index == "theta":
            return POSITIVE, "Prop-2.1", True
        return AMBIGUOUS, "Prop-2.1-omega-unpriced", True
    if index == "theta":
        return POSITIVE, "Prop-3.2", True
    if beta > 0:
        return POSITIVE, "Prop-3.1-riskinc", False
    if beta < 0:
        return NEGATIVE, "Prop-3.1-riskdec", False
    return AMBIGUOUS, "Prop-3.1-noriskeffect", True


def _monotone(values, rtol: float = MONOTONE_RTOL) -> str | None:
    """'increasing', 'decreasing', 'flat' or None when the sequence turns."""
    v = np.asarray(values, dtype=float)
    d = np.diff(v)
    tol = rtol * np.abs(v[:-1])
    up = np.all(d >= -tol)
    down = np.all(d <= tol)
    if up and down:
        return "flat"
    if up:
        return "increasing"
    if down:
        return "decreasing"
    return None


def input_path(problem: DecisionProblem, gamma_levels, base: OptimalChoice | None = None):
    """Optimal inputs at each fixed coverage level (``gamma_frac`` units)."""
    base = baseline(problem) if base is None else base
    path = []
    for g in gamma_levels:
        if g == 0:
            path.append(base)
        else:
            path.append(optimize_inputs(problem, g, base.expected_profit))
    return base, path


def check_input_response(problem: DecisionProblem, gamma_levels=None) -> SignReport:
    """Sign of ``x*(gamma_hi) - x*(0)`` and monotonicity along ``gamma_levels``."""
    if problem.production.n_inputs != 1:
        raise ValueError("check_input_response needs a single-input problem")
    if gamma_levels is None:
        gamma_levels = [round(0.1 * i, 10) for i in range(11)]
    levels = sorted(set(float(g) for g in gamma_levels) | {0.0})
    base, path = input_path(problem, levels)
    xs = [c.inputs[0] for c in path]
    pct = [(x / xs[0] - 1) * 100 for x in xs]
    predicted, claim, weak = _response_prediction(problem)
    observed = _sign(pct[-1], RESPONSE_FLOOR_PP)
    shape = _monotone(xs)
    converged = all(c.converged for c in path)
    passed = converged and shape is not None and _verdict(predicted, observed, weak)
    if predicted == POSITIVE and shape == "decreasing" and observed != ZERO:
        passed = False
    if predicted == NEGATIVE and shape == "increasing" and observed != ZERO:
        passed = False
    ctx = _problem_context(problem)
    ctx.update(gamma_levels=levels, x_path=xs, pct_path=pct, monotone=shape, converged=converged)
    return SignReport(claim, predicted, pct[-1], observed, passed, RESPONSE_FLOOR_PP, ctx)


def utility_cross_partials(problem: DecisionProblem, x, step: float = 1e-4) -> np.ndarray:
    """Finite-difference Hessian of uninsured expected utility in ``x``."""
    x = np.asarray(x, dtype=float)
    k = x.size
    h = step * x
    hess = np.empty((k, k))

    def eu(z):
        return expected_utility(problem, z, 0.0)

    f0 = eu(x)
    for i in range(k):
        for j in range(i, k):
            if i == j:
                up, dn = x.copy(), x.copy()
                up[i] += h[i]
                dn[i] -= h[i]
                hess[i, i] = (eu(up) - 2 * f0 + eu(dn)) / h[i] ** 2
                continue
            vals = []
            for si, sj in ((1, 1), (1, -1), (-1, 1), (-1, -1)):
                z = x.copy()
                z[i] += si * h[i]
                z[j] += sj * h[j]
                vals.append(eu(z))
            hess[i, j] = hess[j, i] = (vals[0] - vals[1] - vals[2] + vals[3]) / (4 * h[i] * h[j])
    return hess


def sign_condition_holds(hessian: np.ndarray, betas) -> bool:
    """Pairwise cross-partial condition for unambiguous input responses.

    Every pair with matching risk effects needs a positive cross-partial and
    every pair with opposite risk effects a negative one. For two inputs this
    is the stated sufficient condition; for more, it makes the sign-adjusted
    Hessian a Metzler matrix, which keeps the same conclusion.
    """
    s = np.sign(np.asarray(betas, dtype=float))
    if np.any(s == 0):
        return False
    for i, j in itertools.combinations(range(len(s)), 2):
        if s[i] * s[j] * hessian[i, j] <= 0:
            return False
    return True


def check_multi_input(problem: DecisionProblem, base: OptimalChoice | None = None,
                      insured: OptimalChoice | None = None) -> list[SignReport]:
    """Per-input response signs and the harvest-direction claim for several inputs."""
    prod = problem.production
    if prod.n_inputs < 2:
        raise ValueError("check_multi_input needs at least two inputs")
    base = baseline(problem) if base is None else base
    insured = optimize_inputs_and_coverage(problem, base) if insured is None else insured
    hess = utility_cross_partials(problem, base.inputs)
    betas = [inp.beta for inp in prod.inputs]
    holds = (problem.contract.index == "omega" and prod.mode != STANDARD
             and problem.shocks.dependence != PERFECTLY_CORRELATED
             and sign_condition_holds(hess, betas))
    ctx = _problem_context(problem)
    ctx.update(hessian=hess.tolist(), condition_holds=holds, gamma_star=insured.gamma_frac,
               converged=bool(base.converged and insured.converged))
    reports = []
    pct = (np.asarray(insured.inputs) / np.asarray(base.inputs) - 1) * 100
    for i, name in enumerate(prod.names):
        if holds:
            predicted = POSITIVE if betas[i] > 0 else NEGATIVE
            claim = "Prop-4.1"
        else:
            predicted = AMBIGUOUS
            claim = "Prop-4.1-condition-not-met"
        observed = _sign(pct[i], RESPONSE_FLOOR_PP)
        rctx = dict(ctx, input=name)
        reports.append(SignReport(f"{claim}:{name}", predicted, float(pct[i]), observed,
                                  _verdict(predicted, observed, weak=False) and rctx["converged"],
                                  RESPONSE_FLOOR_PP, rctx))

    d_harvest = (insured.expected_harvest / base.expected_harvest - 1) * 100
    if np.all(pct > 0):
        predicted = POSITIVE
    elif np.all(pct < 0):
        predicted = NEGATIVE
    else:
        predicted = AMBIGUOUS
    # harvest follows from the inputs exactly, so no floor is needed
    observed = _sign(d_harvest, 0.0)
    reports.append(SignReport("Prop-4.2", predicted, float(d_harvest), observed,
                              _verdict(predicted, observed, weak=False), 0.0,
                              dict(ctx, pct_change_inputs=pct.tolist())))
    return reports
