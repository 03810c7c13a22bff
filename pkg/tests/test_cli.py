"""CLI behavior: schemas, determinism, exit codes, and chart output."""

import numpy as np
import pytest
from click.testing import CliRunner

from confope.cli import main
from confope.results import RESULT_HEADER, BoundResult, results_from_csv, results_to_csv
from confope.plotting import render_chart
from confope.errors import ValidationError


@pytest.fixture
def runner():
    return CliRunner()


def test_sweep_header_and_schema(runner):
    result = runner.invoke(main, ["sweep", "--env", "toy", "--gamma", "2"])
    assert result.exit_code == 0
    lines = result.output.splitlines()
    assert lines[0] == ",".join(RESULT_HEADER)
    rows = results_from_csv(result.output)
    assert len(rows) == 1
    assert rows[0].env == "toy"
    assert rows[0].bound <= rows[0].nominal_value + 1e-9


def test_sweep_gamma_one_equals_nominal(runner):
    result = runner.invoke(
        main, ["sweep", "--env", "toy", "--method", "robust", "--gamma", "1",
               "--delta", "4"],
    )
    assert result.exit_code == 0
    row = results_from_csv(result.output)[0]
    assert abs(row.bound - row.nominal_value) <= 1e-9


def test_population_sweep_is_byte_identical(runner):
    args = ["sweep", "--env", "toy", "--method", "robust",
            "--gamma", "1.5", "--gamma", "2", "--delta", "2"]
    a = runner.invoke(main, args)
    b = runner.invoke(main, args)
    assert a.exit_code == 0 and b.exit_code == 0
    assert a.output == b.output
    # population rows never report wall-clock noise
    assert all(r.runtime_ms == 0 for r in results_from_csv(a.output))


def test_thread_cap_does_not_change_output(runner, monkeypatch):
    args = ["sweep", "--env", "toy", "--method", "fqe",
            "--gamma", "1.5", "--gamma", "2", "--gamma", "4"]
    monkeypatch.setenv("CONFOPE_THREADS", "1")
    a = runner.invoke(main, args)
    monkeypatch.setenv("CONFOPE_THREADS", "3")
    b = runner.invoke(main, args)
    assert a.exit_code == 0 and b.exit_code == 0
    assert a.output == b.output


def test_invalid_thread_cap(runner, monkeypatch):
    monkeypatch.setenv("CONFOPE_THREADS", "zero")
    result = runner.invoke(main, ["sweep", "--env", "toy", "--gamma", "2"])
    assert result.exit_code == 2


def test_sampled_sweep_requires_seed(runner):
    result = runner.invoke(
        main, ["sweep", "--env", "toy", "--gamma", "2", "--sample", "50"]
    )
    assert result.exit_code == 2


def test_sampled_sweep_records_seed(runner):
    result = runner.invoke(
        main, ["sweep", "--env", "toy", "--gamma", "2", "--sample", "200",
               "--seed", "7"],
    )
    assert result.exit_code == 0
    row = results_from_csv(result.output)[0]
    assert row.seed == 7


def test_unknown_env_is_usage_error(runner):
    result = runner.invoke(main, ["sweep", "--env", "nope", "--gamma", "2"])
    assert result.exit_code == 2


def test_env_and_env_file_are_exclusive(runner, tmp_path):
    path = tmp_path / "e.json"
    path.write_text("{}")
    result = runner.invoke(
        main, ["sweep", "--env", "toy", "--env-file", str(path), "--gamma", "2"]
    )
    assert result.exit_code == 2


def test_tightness_emits_gap_column(runner):
    result = runner.invoke(main, ["tightness", "--env", "toy"])
    assert result.exit_code == 0
    lines = result.output.splitlines()
    assert lines[0] == ",".join(RESULT_HEADER) + ",gap"
    rows = results_from_csv(result.output)
    assert all(r.gap is not None and r.gap >= -1e-9 for r in rows)


def test_tightness_mismatched_lists(runner):
    result = runner.invoke(
        main, ["tightness", "--env", "toy", "--gamma", "2"]
    )
    assert result.exit_code == 2


def test_single_step_command(runner):
    result = runner.invoke(
        main, ["single-step", "--env", "toy", "--gamma", "3", "--delta", "2"]
    )
    assert result.exit_code == 0
    row = results_from_csv(result.output)[0]
    assert row.method == "single-step"
    assert row.gamma == pytest.approx(3.0, abs=1e-6)
    assert row.bound <= row.nominal_value + 1e-9


def test_simulate_is_deterministic(runner):
    args = ["simulate", "--env", "toy", "--sample", "5", "--seed", "3"]
    a = runner.invoke(main, args)
    b = runner.invoke(main, args)
    assert a.exit_code == 0
    assert a.output == b.output
    assert a.output.splitlines()[0] == "traj_id,t,x,a,x_next,r"


def test_inspect_outputs_summary(runner):
    result = runner.invoke(main, ["inspect", "--env", "ope-gridworld"])
    assert result.exit_code == 0
    assert '"n_states": 16' in result.output


def test_plot_round_trip(runner, tmp_path):
    csv_path = tmp_path / "sweep.csv"
    svg_path = tmp_path / "sweep.svg"
    run = runner.invoke(
        main, ["sweep", "--env", "toy", "--method", "robust", "--gamma", "1.5",
               "--gamma", "2", "--delta", "2", "--out", str(csv_path)],
    )
    assert run.exit_code == 0
    a = runner.invoke(main, ["plot", str(csv_path), "--out", str(svg_path)])
    assert a.exit_code == 0
    first = svg_path.read_text()
    assert first.startswith("<svg")
    assert "polyline" in first
    b = runner.invoke(main, ["plot", str(csv_path), "--out", str(svg_path)])
    assert b.exit_code == 0
    assert svg_path.read_text() == first


def test_plot_empty_csv_errors_without_output(runner, tmp_path):
    csv_path = tmp_path / "empty.csv"
    csv_path.write_text(",".join(RESULT_HEADER) + "\n")
    svg_path = tmp_path / "out.svg"
    result = runner.invoke(main, ["plot", str(csv_path), "--out", str(svg_path)])
    assert result.exit_code == 1
    assert not svg_path.exists()


def test_results_csv_round_trip():
    rows = [
        BoundResult("toy", "fqe", 2.0, 1.0, 0.5, 5, 0.25, 0.5, 0.3, 0, None),
        BoundResult("toy", "robust", 2.0, 2.0, 0.5, 5, 0.3, 0.5, 0.3, 12, 9),
    ]
    text = results_to_csv(rows)
    again = results_from_csv(text)
    assert again == rows


def test_single_row_chart_has_point_and_references():
    row = BoundResult("toy", "fqe", 2.0, 1.0, 0.5, 5, 0.25, 0.5, 0.3, 0, None)
    svg = render_chart([row])
    assert "<circle" in svg
    assert svg.count("stroke-dasharray") >= 2


def test_render_chart_rejects_empty():
    with pytest.raises(ValidationError):
        render_chart([])
