"""Command-line front end: ``indexfish solve | sweep | norwegian | verify``.

Settings come from built-in defaults, then an optional JSON config file
(``--config``), then command-line flags; later sources win. Unknown config
keys are rejected. Every command that writes files writes ``results.csv`` or
``results.json`` plus ``manifest.json`` into ``--output``; ``verify`` also
writes ``verify_report.json``.

Exit status: 0 on success, 1 when verification or a sweep fails, 2 on a
configuration error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import sys
from pathlib import Path

from . import __version__
from .economics import DEFAULT_COST, RISKY, MODES, ProductionSpec
from .experiments import (
    ALPHAS,
    BETAS,
    FLEETS,
    RISK_AVERSIONS,
    SIGMAS,
    SweepError,
    SweepGrid,
    run_norwegian,
    run_single_input_sweep,
)
from .optimizer import baseline, make_problem, optimize_inputs, optimize_inputs_and_coverage
from .stochastics import DEPENDENCE, ShockSpec

logger = logging.getLogger(__name__)

EXIT_OK, EXIT_FAILED, EXIT_CONFIG = 0, 1, 2
SIG_DIGITS = 6

COMMON_DEFAULTS = {
    "seed": 0,
    "draws": 1000,
    "jobs": None,
    "format": "csv",
    "output": "indexfish-out",
    "index": "omega",
    "trigger": 0.0,
}

COMMAND_DEFAULTS = {
    "solve": {
        "alpha": 0.5, "beta": 0.3, "c": DEFAULT_COST, "risk_aversion": 2.0,
        "sigma_theta": 0.2, "sigma_omega": 0.2, "gamma": None, "mode": RISKY,
        "dependence": "independent", "biomass_mean": 1.0, "output": None,
    },
    "sweep": {
        "alphas": list(ALPHAS), "betas": list(BETAS), "risk_aversions": list(RISK_AVERSIONS),
        "sigma_thetas": list(SIGMAS), "sigma_omegas": list(SIGMAS), "triggers": None,
        "cost": DEFAULT_COST, "mode": RISKY, "dependence": "independent",
    },
    "norwegian": {
        "fleets": list(FLEETS), "risk_aversions": list(RISK_AVERSIONS),
        "sigma_thetas": list(SIGMAS), "sigma_omegas": list(SIGMAS), "triggers": None,
        "cost": DEFAULT_COST,
    },
    "verify": {"quick": False, "draws": None},
}


class ConfigError(ValueError):
    pass


# --------------------------------------------------------------------------
# configuration


def load_config_file(path) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"config {path} must hold a JSON object")
    return data


def resolve_config(command: str, file_values: dict, flag_values: dict) -> dict:
    """Merge defaults, file values and explicitly given flags for ``command``."""
    config = dict(COMMON_DEFAULTS)
    config.update(COMMAND_DEFAULTS[command])
    for key in file_values:
        if key not in config:
            raise ConfigError(f"unknown config key {key!r} for command {command!r}")
    config.update(file_values)
    config.update({k: v for k, v in flag_values.items() if v is not None and k in config})
    _validate(config)
    return config


def _validate(config: dict) -> None:
    if config["format"] not in ("csv", "json"):
        raise ConfigError(f"format must be csv or json, got {config['format']!r}")
    if config["index"] not in ("theta", "omega"):
        raise ConfigError(f"index must be theta or omega, got {config['index']!r}")
    draws = config.get("draws")
    if draws is not None and (not isinstance(draws, int) or draws < 4):
        raise ConfigError(f"draws must be an integer >= 4, got {draws!r}")
    if not isinstance(config["seed"], int):
        raise ConfigError(f"seed must be an integer, got {config['seed']!r}")
    if config.get("mode", RISKY) not in MODES:
        raise ConfigError(f"mode must be one of {MODES}, got {config['mode']!r}")
    if config.get("dependence", "independent") not in DEPENDENCE:
        raise ConfigError(f"dependence must be one of {DEPENDENCE}, got {config['dependence']!r}")
    for name in config.get("fleets", ()):
        if name not in FLEETS:
            raise ConfigError(f"unknown fleet {name!r}; choose from {sorted(FLEETS)}")


def _triggers(config: dict) -> tuple:
    if config.get("triggers") is not None:
        return tuple(config["triggers"])
    return (config["trigger"],)


# --------------------------------------------------------------------------
# export


def _format_value(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (int, float)):
        return format(float(v), f".{SIG_DIGITS}g") if isinstance(v, float) else str(v)
    return str(v)


def _json_value(v):
    if isinstance(v, bool) or v is None or isinstance(v, str):
        return v
    if isinstance(v, int):
        return v
    v = float(v)
    if not math.isfinite(v):
        return None
    return float(format(v, f".{SIG_DIGITS}g"))


def render(records, fmt: str) -> str:
    """Serialize records in fixed column order with 6 significant digits."""
    if not records:
        raise ValueError("nothing to export")
    rows = [r.to_row() if hasattr(r, "to_row") else dict(r) for r in records]
    columns = list(rows[0])
    for row in rows[1:]:
        if list(row) != columns:
            raise ValueError("records do not share one column layout")
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_format_value(row[c]) for c in columns])
        return buf.getvalue()
    if fmt == "json":
        out = [{c: _json_value(row[c]) for c in columns} for row in rows]
        return json.dumps(out, indent=1) + "\n"
    raise ValueError(f"unknown format {fmt!r}")


def export(records, fmt: str, path) -> Path:
    """Write ``records`` to ``path`` as CSV or JSON."""
    text = render(records, fmt)
    path = Path(path)
    try:
        path.write_text(text, encoding="utf-8")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror}") from exc
    return path


def _write_json(path: Path, data) -> None:
    try:
        path.write_text(json.dumps(data, indent=1, sort_keys=True, default=_json_default) + "\n",
                        encoding="utf-8")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror}") from exc


def _json_default(o):
    if hasattr(o, "tolist"):
        return o.tolist()
    if isinstance(o, tuple):
        return list(o)
    raise TypeError(f"not serializable: {type(o).__name__}")


def _output_dir(config: dict) -> Path:
    out = Path(config["output"])
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"cannot create output directory {out}: {exc.strerror}") from exc
    return out


def write_outputs(command: str, config: dict, records, extra_files=()) -> Path:
    out = _output_dir(config)
    results = out / f"results.{config['format']}"
    export(records, config["format"], results)
    failed = [r.cell for r in records if not r.converged]
    _write_json(out / "manifest.json", _manifest(command, config, len(records), failed, extra_files))
    return out


def _manifest(command: str, config: dict, cells: int, failed: list, extra_files=()) -> dict:
    """Config echo, seed and version: enough to rerun the command exactly."""
    return {
        "tool": "indexfish",
        "version": __version__,
        "command": command,
        # jobs and output location do not affect results
        "config": {k: v for k, v in config.items() if k not in ("jobs", "output")},
        "seed": config["seed"],
        "cells": cells,
        "failed_cells": len(failed),
        "failed": failed,
        "outputs": sorted([f"results.{config['format']}", "manifest.json", *extra_files]),
    }


# --------------------------------------------------------------------------
# commands


def cmd_solve(config: dict) -> int:
    prod = ProductionSpec.single(config["alpha"], config["beta"], config["c"], config["mode"],
                                 config["biomass_mean"])
    shocks = ShockSpec(config["sigma_theta"], config["sigma_omega"], config["dependence"])
    draws = config["draws"] - config["draws"] % 4 if config["draws"] >= 4 else 4
    problem = make_problem(prod, shocks, config["risk_aversion"], index=config["index"],
                           trigger=config["trigger"] * shocks.sigma(config["index"]),
                           draws=draws, seed=config["seed"])
    base = baseline(problem)
    if config["gamma"] is None:
        choice = optimize_inputs_and_coverage(problem, base)
    elif config["gamma"] == 0:
        choice = base
    else:
        choice = optimize_inputs(problem, config["gamma"], base.expected_profit)
    if config["output"] is not None:
        row = {**{k: config[k] for k in ("index", "alpha", "beta", "c", "risk_aversion",
                                          "sigma_theta", "sigma_omega", "trigger")},
               "baseline_x": base.inputs[0], "baseline_profit": base.expected_profit,
               "insured_x": choice.inputs[0], "insured_profit": choice.expected_profit,
               "gamma_star": choice.gamma_frac, "expected_utility": choice.expected_utility,
               "converged": choice.converged}
        out = _output_dir(config)
        export([row], config["format"], out / f"results.{config['format']}")
        _write_json(out / "manifest.json", _manifest("solve", config, 1, []))
    print(f"x*={choice.inputs[0]:.4f}, profit={choice.expected_profit:.4f}")
    print(f"gamma*={choice.gamma_frac:.4f}, harvest={choice.expected_harvest:.4f}, "
          f"expected_utility={choice.expected_utility:.6f}, converged={choice.converged}")
    return EXIT_OK if choice.converged else EXIT_FAILED


def _sweep_records(config: dict):
    grid = SweepGrid(
        alphas=config["alphas"], betas=config["betas"], risk_aversions=config["risk_aversions"],
        sigma_thetas=config["sigma_thetas"], sigma_omegas=config["sigma_omegas"],
        contract_index=config["index"], triggers=_triggers(config), draws=config["draws"],
        base_seed=config["seed"], cost=config["cost"], mode=config["mode"],
        dependence=config["dependence"],
    )
    return run_single_input_sweep(grid, jobs=config["jobs"])


def _norwegian_records(config: dict):
    records = []
    for name in config["fleets"]:
        fleet = FLEETS[name].with_costs((config["cost"],) * 3)
        records.extend(run_norwegian(fleet, config["index"], config["risk_aversions"],
                                     config["sigma_thetas"], config["sigma_omegas"], _triggers(config),
                                     draws=config["draws"], base_seed=config["seed"], jobs=config["jobs"]))
    return records


def _run_and_write(command: str, config: dict, produce) -> int:
    status = EXIT_OK
    try:
        records = produce(config)
    except SweepError as exc:
        logger.error("%s", exc)
        records, status = exc.records, EXIT_FAILED
    out = write_outputs(command, config, records)
    logger.info("wrote %d records to %s", len(records), out)
    return status


def cmd_verify(config: dict) -> int:
    from .verify import run_verification

    def render_small_sweep():
        grid = SweepGrid(alphas=(0.5,), betas=(-0.3, 0.3), risk_aversions=(2.0,), sigma_thetas=(0.2,),
                         sigma_omegas=(0.2,), contract_index=config["index"], draws=100,
                         base_seed=config["seed"])
        return render(run_single_input_sweep(grid), config["format"]).encode()

    report = run_verification(quick=config["quick"], draws=config["draws"], seed=config["seed"],
                              jobs=config["jobs"], render_sweep=render_small_sweep)
    out = _output_dir(config)
    rows = [
        {"id": c["id"], "title": c["title"], "hard": c["hard"], "passed": c["passed"]}
        for c in report["criteria"]
    ]
    export(rows, config["format"], out / f"results.{config['format']}")
    _write_json(out / "verify_report.json", report)
    failed = [c for c in report["claims"] if not c["passed"]]
    _write_json(out / "manifest.json",
                _manifest("verify", config, len(report["claims"]), failed, ["verify_report.json"]))
    for line in report["lines"]:
        print(line)
    print(f"claims: {sum(c['passed'] for c in report['claims'])}/{len(report['claims'])} passed")
    return EXIT_OK if report["all_hard_passed"] else EXIT_FAILED


COMMANDS = {
    "solve": cmd_solve,
    "sweep": lambda cfg: _run_and_write("sweep", cfg, _sweep_records),
    "norwegian": lambda cfg: _run_and_write("norwegian", cfg, _norwegian_records),
    "verify": cmd_verify,
}


# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="JSON file of settings; flags override it")
    common.add_argument("--seed", type=int, help="base random seed (default 0)")
    common.add_argument("--draws", type=int, help="Monte Carlo draws per cell (default 1000)")
    common.add_argument("--jobs", type=int, help="worker processes (default: available cores)")
    common.add_argument("--format", choices=("csv", "json"), help="results format (default csv)")
    common.add_argument("--output", metavar="DIR", help="output directory (default indexfish-out)")
    common.add_argument("--index", choices=("theta", "omega"), help="contract index (default omega)")
    common.add_argument("--trigger", type=float,
                        help="payout trigger in units of the indexed sigma (default 0)")
    common.add_argument("--quick", action="store_const", const=True,
                        help="reduced verification tier")
    common.add_argument("-v", "--verbose", action="store_true", help="log progress")

    parser = argparse.ArgumentParser(prog="indexfish", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    solve = sub.add_parser("solve", parents=[common], help="optimal input for one fisher")
    solve.add_argument("--alpha", type=float)
    solve.add_argument("--beta", type=float)
    solve.add_argument("--c", type=float, help="quadratic cost coefficient")
    solve.add_argument("--risk-aversion", type=float)
    solve.add_argument("--sigma-theta", type=float)
    solve.add_argument("--sigma-omega", type=float)
    solve.add_argument("--gamma", type=float,
                       help="fixed coverage as a multiple of baseline expected profit; omit to optimize")
    solve.add_argument("--mode", choices=MODES)

    sub.add_parser("sweep", parents=[common], help="single-input grid sweep")
    sub.add_parser("norwegian", parents=[common], help="three-input fleet calibration runs")
    sub.add_parser("verify", parents=[common], help="run the verification suite")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    flags = {k: v for k, v in vars(args).items() if k not in ("command", "config", "verbose")}
    try:
        file_values = load_config_file(args.config) if args.config else {}
        config = resolve_config(args.command, file_values, flags)
        if config["jobs"] is None:
            config["jobs"] = os.cpu_count() or 1
        return COMMANDS[args.command](config)
    except (ConfigError, ValueError) as exc:
        print(f"indexfish: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"indexfish: {exc}", file=sys.stderr)
        return EXIT_FAILED


if __name__ == "__main__":
    sys.exit(main())
