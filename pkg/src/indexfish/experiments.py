"""Parameter sweeps for single-input fishers and the Norwegian fleet calibration.

Every grid cell gets its own shock panel, seeded from a stable hash of the
cell's parameters and the base seed, so adding grid points never changes
an existing cell. Within a cell the baseline and insured solves share the
panel. Results come back sorted by cell key regardless of worker order.
"""

from __future__ import annotations

import hashlib
import itertools
import json
import logging
import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .economics import DEFAULT_COST, RISKY, InputSpec, ProductionSpec, certainty_equivalent
from .optimizer import (
    DecisionProblem,
    OptimalChoice,
    baseline,
    make_problem,
    optimize_inputs_and_coverage,
)
from .stochastics import INDEPENDENT, ShockSpec

logger = logging.getLogger(__name__)

ALPHAS = (0.25, 0.5, 0.75)
BETAS = (-0.7, -0.5, -0.3, -0.1, 0.1, 0.3, 0.5, 0.7)
RISK_AVERSIONS = (1.0, 2.0, 3.0)
SIGMAS = (0.1, 0.2, 0.3, 0.4)
TRIGGER_SWEEP = (-1.0, -0.5, 0.0, 0.5, 1.0)
MAX_FAILED_FRACTION = 0.01


class SweepError(RuntimeError):
    """Raised when too many cells of a sweep fail to converge."""

    def __init__(self, message, records):
        super().__init__(message)
        self.records = records


@dataclass(frozen=True)
class SweepGrid:
    """Single-input parameter grid.

    ``triggers`` are multiples of the indexed shock's sigma; the default
    ``(0.0,)`` triggers a payout whenever the index is negative.
    """

    alphas: tuple = ALPHAS
    betas: tuple = BETAS
    risk_aversions: tuple = RISK_AVERSIONS
    sigma_thetas: tuple = SIGMAS
    sigma_omegas: tuple = SIGMAS
    contract_index: str = "omega"
    triggers: tuple = (0.0,)
    draws: int = 1000
    base_seed: int = 0
    cost: float = DEFAULT_COST
    mode: str = RISKY
    dependence: str = INDEPENDENT

    def __post_init__(self):
        for name in ("alphas", "betas", "risk_aversions", "sigma_thetas", "sigma_omegas", "triggers"):
            values = tuple(float(v) for v in getattr(self, name))
            if not values:
                raise ValueError(f"grid axis {name} is empty")
            object.__setattr__(self, name, values)
        if self.contract_index not in ("theta", "omega"):
            raise ValueError(f"contract_index must be 'theta' or 'omega', got {self.contract_index!r}")
        if self.draws < 1:
            raise ValueError("draws must be at least 1")

    def cells(self) -> list[dict]:
        out = []
        for a, b, r, st, so, t in itertools.product(self.alphas, self.betas, self.risk_aversions,
                                                    self.sigma_thetas, self.sigma_omegas, self.triggers):
            out.append({
                "index": self.contract_index, "alpha": a, "beta": b, "risk_aversion": r,
                "sigma_theta": st, "sigma_omega": so, "trigger": t,
            })
        return out


@dataclass(frozen=True)
class FleetCalibration:
    fleet: str
    alpha_k: float
    alpha_l: float
    alpha_f: float
    beta_k: float
    beta_l: float
    beta_f: float
    cost_coeffs: tuple = (DEFAULT_COST, DEFAULT_COST, DEFAULT_COST)
    biomass_mean: float = 1.0

    def production(self) -> ProductionSpec:
        ck, cl, cf = self.cost_coeffs
        return ProductionSpec(
            (InputSpec("k", self.alpha_k, self.beta_k, ck),
             InputSpec("l", self.alpha_l, self.beta_l, cl),
             InputSpec("f", self.alpha_f, self.beta_f, cf)),
            mode=RISKY, biomass_mean=self.biomass_mean,
        )

    def with_costs(self, cost_coeffs) -> "FleetCalibration":
        return FleetCalibration(self.fleet, self.alpha_k, self.alpha_l, self.alpha_f,
                                self.beta_k, self.beta_l, self.beta_f, tuple(cost_coeffs), self.biomass_mean)


# Production and risk elasticities of capital, labor and fuel by vessel type.
COASTAL_SEINERS = FleetCalibration("Coastal Seiners", 0.294, 0.421, 0.457, 0.184, -0.432, 0.119)
COASTAL_GROUNDFISH = FleetCalibration("Coastal Groundfish", 0.463, 0.421, 0.355, 0.965, -0.080, 0.113)
GROUNDFISH_TRAWLERS = FleetCalibration("Groundfish Trawlers", 0.210, 0.106, 0.531, -2.788, -0.110, -0.024)
FLEETS = {f.fleet: f for f in (COASTAL_SEINERS, COASTAL_GROUNDFISH, GROUNDFISH_TRAWLERS)}


@dataclass
class SweepRecord:
    """Outcome of one grid cell: baseline, insured optimum and percent changes."""

    cell: dict
    input_names: tuple
    baseline_inputs: tuple
    baseline_profit: float
    baseline_harvest: float
    insured_inputs: tuple
    gamma_star: float
    insured_profit: float
    insured_harvest: float
    pct_change_inputs: tuple
    pct_change_harvest: float
    utility_gain_pct: float
    converged: bool
    seed: int
    error: str = ""

    def to_row(self) -> dict:
        """Flat record in the fixed export column order."""
        row = dict(self.cell)
        for name, v in zip(self.input_names, self.baseline_inputs):
            row[f"baseline_{name}"] = v
        row["baseline_profit"] = self.baseline_profit
        row["baseline_harvest"] = self.baseline_harvest
        for name, v in zip(self.input_names, self.insured_inputs):
            row[f"insured_{name}"] = v
        row["insured_profit"] = self.insured_profit
        row["insured_harvest"] = self.insured_harvest
        for name, v in zip(self.input_names, self.pct_change_inputs):
            row[f"pct_change_{name}"] = v
        row["pct_change_harvest"] = self.pct_change_harvest
        row["gamma_star"] = self.gamma_star
        row["utility_gain_pct"] = self.utility_gain_pct
        row["converged"] = self.converged
        row["seed"] = self.seed
        return row

    @property
    def pct_change_input(self) -> float:
        """Percent change of the first (for single-input cells, the only) input."""
        return self.pct_change_inputs[0]


def cell_key(cell: dict) -> str:
    return json.dumps(cell, sort_keys=True, separators=(",", ":"))


def cell_seed(base_seed: int, cell: dict) -> int:
    """Stable 63-bit seed from the base seed and the cell parameters."""
    digest = hashlib.sha256(f"{int(base_seed)}|{cell_key(cell)}".encode()).digest()
    return int.from_bytes(digest[:8], "big") & (2**63 - 1)


def _sort_key(cell: dict):
    return tuple((k, str(cell[k]) if isinstance(cell[k], str) else float(cell[k])) for k in sorted(cell))


def _utility_gain_pct(problem: DecisionProblem, base: OptimalChoice, insured: OptimalChoice) -> float:
    ce_base = certainty_equivalent(problem.prefs, base.expected_utility)
    ce_ins = certainty_equivalent(problem.prefs, insured.expected_utility)
    return (ce_ins - ce_base) / base.expected_profit * 100.0


def solve_cell(problem: DecisionProblem, cell: dict, seed: int) -> SweepRecord:
    """Baseline and joint insured solve for one prepared problem."""
    names = problem.production.names
    try:
        base = baseline(problem)
        insured = optimize_inputs_and_coverage(problem, base)
    except (ValueError, FloatingPointError) as exc:
        nan = float("nan")
        k = len(names)
        return SweepRecord(cell, names, (nan,) * k, nan, nan, (nan,) * k, nan, nan, nan,
                           (nan,) * k, nan, nan, False, seed, error=str(exc))
    b_in = tuple(float(v) for v in base.inputs)
    i_in = tuple(float(v) for v in insured.inputs)
    pct = tuple((i / b - 1) * 100 for i, b in zip(i_in, b_in))
    return SweepRecord(
        cell=cell, input_names=names,
        baseline_inputs=b_in, baseline_profit=base.expected_profit, baseline_harvest=base.expected_harvest,
        insured_inputs=i_in, gamma_star=insured.gamma_frac,
        insured_profit=insured.expected_profit, insured_harvest=insured.expected_harvest,
        pct_change_inputs=pct,
        pct_change_harvest=(insured.expected_harvest / base.expected_harvest - 1) * 100,
        utility_gain_pct=_utility_gain_pct(problem, base, insured),
        converged=bool(base.converged and insured.converged), seed=seed,
    )


def _single_input_cell(args) -> SweepRecord:
    cell, grid_opts = args
    seed = cell_seed(grid_opts["base_seed"], cell)
    sigma_index = cell["sigma_omega"] if cell["index"] == "omega" else cell["sigma_theta"]
    production = ProductionSpec.single(cell["alpha"], cell["beta"], cost=grid_opts["cost"],
                                       mode=grid_opts["mode"])
    shocks = ShockSpec(cell["sigma_theta"], cell["sigma_omega"], grid_opts["dependence"])
    problem = make_problem(production, shocks, cell["risk_aversion"], index=cell["index"],
                           trigger=cell["trigger"] * sigma_index, draws=grid_opts["draws"], seed=seed)
    return solve_cell(problem, cell, seed)


def _norwegian_cell(args) -> SweepRecord:
    cell, calibration, opts = args
    seed = cell_seed(opts["base_seed"], cell)
    sigma_index = cell["sigma_omega"] if cell["index"] == "omega" else cell["sigma_theta"]
    shocks = ShockSpec(cell["sigma_theta"], cell["sigma_omega"])
    problem = make_problem(calibration.production(), shocks, cell["risk_aversion"], index=cell["index"],
                           trigger=cell["trigger"] * sigma_index, draws=opts["draws"], seed=seed)
    return solve_cell(problem, cell, seed)


def _run_cells(worker, tasks, jobs: int) -> list[SweepRecord]:
    if jobs is None or jobs <= 1 or len(tasks) < 2:
        records = [worker(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            records = list(pool.map(worker, tasks, chunksize=max(1, len(tasks) // (8 * jobs))))
    return sorted(records, key=lambda r: _sort_key(r.cell))


def _enforce_failure_rate(records: list[SweepRecord], label: str) -> None:
    failed = sum(not r.converged for r in records)
    if failed:
        logger.warning("%s: %d of %d cells did not converge", label, failed, len(records))
    if failed > MAX_FAILED_FRACTION * len(records):
        raise SweepError(f"{label}: {failed}/{len(records)} cells failed (limit "
                         f"{MAX_FAILED_FRACTION:.0%})", records)


def run_single_input_sweep(grid: SweepGrid, jobs: int = 1) -> list[SweepRecord]:
    """Baseline and joint (input, coverage) optimum for every cell of ``grid``."""
    opts = {"base_seed": grid.base_seed, "cost": grid.cost, "mode": grid.mode,
            "dependence": grid.dependence, "draws": grid.draws}
    records = _run_cells(_single_input_cell, [(c, opts) for c in grid.cells()], jobs)
    _enforce_failure_rate(records, f"{grid.contract_index} sweep")
    return records


def norwegian_cells(calibration: FleetCalibration, index: str, risk_aversions=RISK_AVERSIONS,
                    sigma_thetas=SIGMAS, sigma_omegas=SIGMAS, triggers=(0.0,)) -> list[dict]:
    return [
        {"fleet": calibration.fleet, "index": index, "risk_aversion": float(a),
         "sigma_theta": float(st), "sigma_omega": float(so), "trigger": float(t)}
        for a, st, so, t in itertools.product(risk_aversions, sigma_thetas, sigma_omegas, triggers)
    ]


def run_norwegian(calibration: FleetCalibration, index: str = "omega", risk_aversions=RISK_AVERSIONS,
                  sigma_thetas=SIGMAS, sigma_omegas=SIGMAS, triggers=(0.0,), draws: int = 1000,
                  base_seed: int = 0, jobs: int = 1) -> list[SweepRecord]:
    """Three-input (capital, labor, fuel) sweep for one fleet."""
    cells = norwegian_cells(calibration, index, risk_aversions, sigma_thetas, sigma_omegas, triggers)
    opts = {"base_seed": base_seed, "draws": draws}
    records = _run_cells(_norwegian_cell, [(c, calibration, opts) for c in cells], jobs)
    _enforce_failure_rate(records, f"{calibration.fleet} {index}")
    return records


@dataclass
class GroupSummary:
    group: dict
    field_name: str
    count: int
    median: float
    mean: float
    mean_abs: float
    min: float
    max: float
    hist_counts: list = field(default_factory=list)
    hist_edges: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)


def _field_value(record: SweepRecord, name: str) -> float:
    if name == "pct_change_input":
        return record.pct_change_input
    if name.startswith("pct_change_") and name[len("pct_change_"):] in record.input_names:
        return record.pct_change_inputs[record.input_names.index(name[len("pct_change_"):])]
    return float(getattr(record, name))


def _group_value(record: SweepRecord, name):
    if callable(name):
        return name(record)
    if name == "beta_sign":
        return "positive" if record.cell["beta"] > 0 else "negative"
    return record.cell[name]


def summarize(records, group_by=(), fields=("pct_change_harvest",), bins: int = 50) -> list[GroupSummary]:
    """Median, mean, range and a fixed-width histogram of each field per group.

    ``group_by`` holds cell parameter names, the derived ``"beta_sign"``, or
    ``(label, callable)`` pairs. Non-converged records are left out; a group
    left with no records is dropped with a warning.
    """
    records = list(records)
    if not records:
        raise ValueError("summarize needs at least one record")
    labels = [g[0] if isinstance(g, tuple) else g for g in group_by]
    getters = [g[1] if isinstance(g, tuple) else g for g in group_by]
    groups: dict = {}
    for r in records:
        key = tuple(_group_value(r, g) for g in getters)
        groups.setdefault(key, []).append(r)
    out = []
    for key in sorted(groups, key=lambda k: tuple(str(v) if isinstance(v, str) else v for v in k)):
        members = [r for r in groups[key] if r.converged]
        group = dict(zip(labels, key))
        if not members:
            warnings.warn(f"group {group} has no converged records; omitted", stacklevel=2)
            continue
        for name in fields:
            vals = np.array([_field_value(r, name) for r in members], dtype=float)
            lo, hi = float(vals.min()), float(vals.max())
            span = (lo - 0.5, hi + 0.5) if math.isclose(lo, hi) else (lo, hi)
            counts, edges = np.histogram(vals, bins=bins, range=span)
            out.append(GroupSummary(group, name, int(vals.size), float(np.median(vals)),
                                    float(vals.mean()), float(np.abs(vals).mean()), lo, hi,
                                    counts.tolist(), edges.tolist()))
    return out
