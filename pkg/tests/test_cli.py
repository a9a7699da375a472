import csv
import io
import json
import math

import pytest

from indexfish import __version__
from indexfish.cli import export, main, render
from indexfish.experiments import SweepGrid, run_single_input_sweep

SMALL_SWEEP = {"alphas": [0.5], "betas": [-0.3, 0.3], "risk_aversions": [2.0],
               "sigma_thetas": [0.2], "sigma_omegas": [0.2], "draws": 100}


@pytest.fixture(scope="module")
def records():
    return run_single_input_sweep(SweepGrid(alphas=(0.5,), betas=(-0.3, 0.3), risk_aversions=(1.0, 3.0),
                                            sigma_thetas=(0.2,), sigma_omegas=(0.3,), draws=100))


def write_config(tmp_path, data, name="config.json"):
    path = tmp_path / name
    path.write_text(json.dumps(data))
    return str(path)


def test_solve_deterministic_example(capsys):
    code = main(["solve", "--alpha", "0.5", "--c", "0.25", "--sigma-theta", "0", "--sigma-omega", "0",
                 "--gamma", "0"])
    assert code == 0
    assert capsys.readouterr().out.splitlines()[0] == "x*=1.0000, profit=0.7500"


def test_solve_joint_writes_outputs(tmp_path, capsys):
    out = tmp_path / "solve"
    assert main(["solve", "--alpha", "0.5", "--beta", "-0.5", "--draws", "400", "--output", str(out)]) == 0
    rows = list(csv.DictReader((out / "results.csv").open()))
    assert len(rows) == 1 and float(rows[0]["insured_x"]) < float(rows[0]["baseline_x"])
    assert json.loads((out / "manifest.json").read_text())["command"] == "solve"


def test_unknown_config_key_exits_2(tmp_path, capsys):
    path = write_config(tmp_path, {"seed": 1, "alpah": 0.5})
    assert main(["sweep", "--config", path, "--output", str(tmp_path / "o")]) == 2
    assert "'alpah'" in capsys.readouterr().err


@pytest.mark.parametrize("content", ["{not json", "[1, 2]"])
def test_malformed_config_file_exits_2(tmp_path, content):
    path = tmp_path / "bad.json"
    path.write_text(content)
    assert main(["sweep", "--config", str(path)]) == 2


def test_invalid_values_exit_2(tmp_path, capsys):
    assert main(["sweep", "--config", write_config(tmp_path, {"format": "xml"})]) == 2
    assert main(["norwegian", "--config", write_config(tmp_path, {"fleets": ["Whalers"]})]) == 2
    assert "Whalers" in capsys.readouterr().err
    assert main(["solve", "--alpha", "1.5", "--sigma-theta", "0", "--sigma-omega", "0"]) == 2
    assert main(["sweep", "--draws", "0"]) == 2


def test_missing_config_file_exits_2(tmp_path):
    assert main(["sweep", "--config", str(tmp_path / "absent.json")]) == 2


def test_export_one_record_csv(tmp_path, records):
    path = export(records[:1], "csv", tmp_path / "one.csv")
    assert len(path.read_text().splitlines()) == 2


def test_export_is_byte_identical(tmp_path, records):
    a = export(records, "csv", tmp_path / "a.csv").read_bytes()
    b = export(records, "csv", tmp_path / "b.csv").read_bytes()
    assert a == b
    assert render(records, "json") == render(records, "json")


def test_export_header_and_digits(records):
    text = render(records, "csv")
    header = text.splitlines()[0].split(",")
    assert header[:7] == ["index", "alpha", "beta", "risk_aversion", "sigma_theta", "sigma_omega", "trigger"]
    assert header[-3:] == ["utility_gain_pct", "converged", "seed"]
    row = next(csv.DictReader(io.StringIO(text)))
    mantissa = row["baseline_x"].lstrip("-").split("e")[0].replace(".", "").lstrip("0")
    assert len(mantissa) <= 6


def test_json_and_csv_round_trip(records):
    from_json = json.loads(render(records, "json"))
    from_csv = list(csv.DictReader(io.StringIO(render(records, "csv"))))
    assert len(from_json) == len(from_csv) == len(records)
    for j, c in zip(from_json, from_csv):
        assert list(j) == list(c)
        for key, value in j.items():
            text = c[key]
            if isinstance(value, bool):
                assert text == ("true" if value else "false")
            elif isinstance(value, int):
                assert int(text) == value
            elif isinstance(value, float):
                assert float(text) == value
            elif value is None:
                assert math.isnan(float(text))
            else:
                assert text == value


def test_export_errors(tmp_path, records):
    with pytest.raises(ValueError):
        render([], "csv")
    with pytest.raises(OSError, match="nowhere"):
        export(records, "csv", tmp_path / "nowhere" / "x.csv")


def test_sweep_twice_is_byte_identical(tmp_path):
    config = write_config(tmp_path, SMALL_SWEEP)
    outs = []
    for name in ("a", "b"):
        out = tmp_path / name
        assert main(["sweep", "--config", config, "--output", str(out), "--jobs", "1"]) == 0
        outs.append(out)
    for fname in ("results.csv", "manifest.json"):
        assert (outs[0] / fname).read_bytes() == (outs[1] / fname).read_bytes()


def test_flags_override_file_and_manifest_reruns(tmp_path):
    config = write_config(tmp_path, {**SMALL_SWEEP, "seed": 3, "index": "theta"})
    out = tmp_path / "first"
    assert main(["sweep", "--config", config, "--seed", "8", "--format", "json", "--output", str(out)]) == 0
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["seed"] == 8 and manifest["config"]["index"] == "theta"
    assert manifest["version"] == __version__ and manifest["failed_cells"] == 0
    # the echoed config alone reproduces the results
    rerun_cfg = write_config(tmp_path, manifest["config"], "rerun.json")
    again = tmp_path / "again"
    assert main(["sweep", "--config", rerun_cfg, "--output", str(again)]) == 0
    assert (again / "results.json").read_bytes() == (out / "results.json").read_bytes()


def test_norwegian_command(tmp_path):
    config = write_config(tmp_path, {"fleets": ["Groundfish Trawlers"], "risk_aversions": [2.0],
                                     "sigma_thetas": [0.2], "sigma_omegas": [0.2], "draws": 200})
    out = tmp_path / "nor"
    assert main(["norwegian", "--config", config, "--output", str(out)]) == 0
    rows = list(csv.DictReader((out / "results.csv").open()))
    assert rows[0]["fleet"] == "Groundfish Trawlers"
    assert all(float(rows[0][f"pct_change_{k}"]) < 0 for k in "klf")


def test_verify_quick(tmp_path, capsys):
    out = tmp_path / "verify"
    assert main(["verify", "--quick", "--output", str(out)]) == 0
    report = json.loads((out / "verify_report.json").read_text())
    assert report["tier"] == "quick" and report["draws"] == 500
    assert report["claims"] and all(c["passed"] for c in report["claims"])
    assert all(c["passed"] for c in report["criteria"] if c["hard"])
    assert (out / "manifest.json").exists() and (out / "results.csv").exists()
    printed = capsys.readouterr().out
    assert "criterion 1" in printed
