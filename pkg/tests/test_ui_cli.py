import csv
import json

import pytest

from src.ui.cli import (
    EXIT_CONFIG,
    EXIT_NUMERIC,
    EXIT_OK,
    build_parser,
    load_scenario,
    run,
)
from src.core.exceptions import ConfigError


def _config(scenario_dir):
    return str(scenario_dir / "scenario.json")


def test_parser_requires_subcommand():
    print("TEST: test_parser_requires_subcommand — argparse exits with code 2 without a command")
    with pytest.raises(SystemExit) as info:
        build_parser().parse_args([])
    assert info.value.code == 2


def test_load_scenario_defaults_and_paths(scenario_dir):
    print("TEST: test_load_scenario_defaults_and_paths — paths resolved next to the scenario file")
    config = load_scenario(scenario_dir / "scenario.json")
    assert config.network == scenario_dir / "network.json"
    assert config.out_dir == scenario_dir / "out"
    assert config.variance_mode == "empirical"
    assert config.tolerances["bootstrap_resamples"] == 200
    assert config.tolerances["mc_z"] == 3.0


def test_load_scenario_invalid_json(tmp_path):
    print("TEST: test_load_scenario_invalid_json — ConfigError with the offending line")
    path = tmp_path / "bad.json"
    path.write_text('{\n  "network": "x.json",\n  "t": ,\n}\n', encoding="utf-8")
    with pytest.raises(ConfigError) as info:
        load_scenario(path)
    assert info.value.line == 3


def test_solve_writes_traffic_table(scenario_dir):
    print("TEST: test_solve_writes_traffic_table — α_1 = 1.25 in traffic.csv")
    assert run(["solve", "--config", _config(scenario_dir)]) == EXIT_OK
    with open(scenario_dir / "out" / "traffic.csv", newline="", encoding="utf-8") as f:
        rows = list(csv.DictReader(f))
    assert float(rows[0]["alpha"]) == pytest.approx(1.25)
    assert (scenario_dir / "out" / "stationary.csv").exists()


def test_analyze_feedback(scenario_dir):
    print("TEST: test_analyze_feedback — analysis.json carries w_C, ε_C, σ_C and the bound")
    assert run(["analyze", "--config", _config(scenario_dir), "--t", "400"]) == EXIT_OK
    data = json.loads((scenario_dir / "out" / "analysis.json").read_text(encoding="utf-8"))
    stats = data["link_stats"]
    assert stats["w_C"] == pytest.approx(0.64)
    assert stats["eps_C"] == pytest.approx(0.5)
    assert stats["sigma_C"] == pytest.approx(1.375)
    assert data["bounds"]["bound_simplified"] == pytest.approx(0.1005, abs=1e-4)
    assert len(data["provenance"]["config_hash"]) == 64


def test_analyze_zero_flow_link_is_numeric_error(scenario_dir):
    print("TEST: test_analyze_zero_flow_link_is_numeric_error — exit code 3 for an invalid link set")
    scenario = json.loads((scenario_dir / "scenario.json").read_text(encoding="utf-8"))
    scenario["links"] = [[1, 2]]
    (scenario_dir / "scenario.json").write_text(json.dumps(scenario), encoding="utf-8")
    assert run(["analyze", "--config", _config(scenario_dir)]) == EXIT_NUMERIC


def test_row_sum_violation_points_to_file_line(scenario_dir, capsys):
    print("TEST: test_row_sum_violation_points_to_file_line — message names the network file and line")
    network = json.loads((scenario_dir / "network.json").read_text(encoding="utf-8"))
    network["routing"] = [[0.5]]
    (scenario_dir / "network.json").write_text(json.dumps(network, indent=2), encoding="utf-8")
    assert run(["analyze", "--config", _config(scenario_dir)]) == EXIT_NUMERIC
    out = capsys.readouterr().out
    assert "network.json:" in out
    assert "RowSumViolation(1)" in out


def test_compare_without_samples_is_config_error(scenario_dir):
    print("TEST: test_compare_without_samples_is_config_error — missing samples.csv exits with 2")
    assert run(["compare", "--config", _config(scenario_dir)]) == EXIT_CONFIG


def test_compare_rejects_other_window(scenario_dir):
    print("TEST: test_compare_rejects_other_window — samples at t=40 compared at t=10")
    assert run(["simulate", "--config", _config(scenario_dir)]) == EXIT_OK
    assert run(["compare", "--config", _config(scenario_dir), "--t", "10"]) == EXIT_CONFIG


def test_pipeline_is_byte_identical(scenario_dir):
    print("TEST: test_pipeline_is_byte_identical — simulate + compare twice with the same seed")
    reports = []
    for name in ("a", "b"):
        out = scenario_dir / name
        args = ["--config", _config(scenario_dir), "--out", str(out), "--seed", "21"]
        assert run(["simulate", *args, "--dump-events"]) == EXIT_OK
        assert run(["compare", *args]) == EXIT_OK
        reports.append(((out / "report.json").read_bytes(), (out / "samples.csv").read_bytes()))
    assert reports[0] == reports[1]

    report = json.loads(reports[0][0])
    names = {c["name"] for c in report["checks"]}
    assert {"tv_nb_vs_bound_simplified", "shift_tv_vs_shift_bound", "mean_vs_rho_C_t"} <= names
    assert report["provenance"]["seed"] == 21
    assert report["clusters"]["label"].startswith("window-truncated")
    assert (scenario_dir / "a" / "pmf.csv").exists()
    assert (scenario_dir / "a" / "events.csv").exists()


def test_sweep_writes_table(scenario_dir):
    print("TEST: test_sweep_writes_table — one row per t in sweep_t")
    assert run(["sweep", "--config", _config(scenario_dir), "--replicates", "30"]) == EXIT_OK
    with open(scenario_dir / "out" / "sweep.csv", newline="", encoding="utf-8") as f:
        rows = list(csv.DictReader(f))
    assert [float(r["t"]) for r in rows] == [10.0, 40.0]
    assert float(rows[0]["bound_simplified"]) == pytest.approx(2 * float(rows[1]["bound_simplified"]))
