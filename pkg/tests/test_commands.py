"""End-to-end runs of the four commands against temporary directories."""

from __future__ import annotations

import dataclasses
import json
from pathlib import Path

import numpy as np
import pytest

from problems import kinked_bid, problem_json, uniform_problem, write_problem, write_strategy
from src.cli import run_solver as cli
from src.components.optimizer import leader_utility, step_equal_bid
from src.components.smoothing import reconstruct
from src.contracts.errors import InputFileError, ProblemSpecError
from src.contracts.manifest import Manifest
from src.pipeline.commands import (
    CommandConfig,
    cmd_respond,
    cmd_smooth,
    cmd_solve,
    cmd_verify,
    read_solution_files,
    write_solution_files,
)
from src.pipeline.io import build_output_paths, read_csv_file, read_json_file

GRIDS = {"leader_types": 1000, "follower_types": 1000, "bids": 1000}
OMEGA = 0.5671432904097838


@pytest.fixture
def problem_path(tmp_path: Path) -> Path:
    return write_problem(tmp_path / "problem.json", problem_json(grids=GRIDS))


@pytest.fixture
def strategy_path(tmp_path: Path) -> Path:
    xs = np.linspace(0.0, 1.0, 2001)
    return write_strategy(tmp_path / "strategy.csv", xs, kinked_bid(xs))


def _header(path: Path) -> str:
    return path.read_text(encoding="utf-8").splitlines()[0]


def test_solve_uniform_first_price(tmp_path: Path, problem_path: Path) -> None:
    result = cmd_solve(problem_path, CommandConfig(output_dir=tmp_path / "out"))

    assert result.exit_code == 0
    solution = read_json_file(result.paths.solution_path)
    assert solution["method"] == "first_price_uniform"
    assert solution["cut_points"] == [pytest.approx(OMEGA, abs=5e-4)]
    assert _header(result.paths.g_csv_path) == "x,g"
    assert _header(result.paths.s_star_csv_path) == "x,s_star"

    manifest = Manifest.read_json(result.paths.manifest_path)
    assert set(manifest.steps) == {"validate", "solve", "write_outputs"}
    assert all(step.status == "success" for step in manifest.steps.values())
    assert manifest.artifacts.g_csv_path == "g.csv"
    assert manifest.problem_sha256 is not None


def test_solve_all_pay(tmp_path: Path) -> None:
    path = write_problem(tmp_path / "problem.json", problem_json(auction="all_pay", grids=GRIDS))
    result = cmd_solve(path, CommandConfig(output_dir=tmp_path / "out"))
    solution = read_json_file(result.paths.solution_path)
    assert solution["method"] == "all_pay"
    assert solution["cut_points"] == [pytest.approx(0.5, abs=1e-9)]
    assert solution["leader_utility"] == pytest.approx(0.25, abs=1e-9)


def test_closed_form_request_falls_back_when_it_does_not_apply(tmp_path: Path) -> None:
    path = write_problem(tmp_path / "problem.json", problem_json(grids={**GRIDS, "curve_samples": 201}))
    config = CommandConfig(output_dir=tmp_path / "out", method="all_pay", max_steps=1, restarts=1)
    result = cmd_solve(path, config)
    solution = read_json_file(result.paths.solution_path)
    assert solution["method"] == "general_search"
    assert any("fell back to general search" in note for note in solution["notes"])


def test_malformed_problem_writes_nothing(tmp_path: Path) -> None:
    path = tmp_path / "problem.json"
    path.write_text('{"f1": ', encoding="utf-8")
    with pytest.raises(ProblemSpecError):
        cmd_solve(path, CommandConfig(output_dir=tmp_path / "out"))
    assert not (tmp_path / "out").exists()


def test_main_reports_input_errors(tmp_path: Path, monkeypatch: pytest.MonkeyPatch) -> None:
    monkeypatch.setattr(cli, "configure_logging", lambda *args, **kwargs: "")
    path = tmp_path / "problem.json"
    path.write_text("[]", encoding="utf-8")
    assert cli.main(["solve", str(path), "--out", str(tmp_path / "out")]) == 2


def test_respond_writes_the_profile(tmp_path: Path, strategy_path: Path) -> None:
    data = problem_json(grids={**GRIDS, "curve_samples": 401})
    path = write_problem(tmp_path / "respond_problem.json", data)
    result = cmd_respond(path, strategy_path, CommandConfig(output_dir=tmp_path / "out"))

    assert _header(result.paths.response_csv_path) == "y,u_B,best_bid,win_cutoff"
    rows = read_csv_file(result.paths.response_csv_path, columns=4)
    assert len(rows) == 401
    y, utility, bid, _ = rows[200]
    assert y == pytest.approx(0.5)
    assert utility == pytest.approx(0.16, abs=1e-3)
    assert bid == pytest.approx(0.1, abs=1e-3)
    assert Manifest.read_json(result.paths.manifest_path).artifacts.strategy_sha256 is not None


def test_smooth_writes_three_curves(tmp_path: Path, problem_path: Path, strategy_path: Path) -> None:
    result = cmd_smooth(problem_path, strategy_path, CommandConfig(output_dir=tmp_path / "out"))

    assert _header(result.paths.s_star_csv_path) == "x,s_star"
    assert _header(result.paths.g_csv_path) == "x,g"
    assert _header(result.paths.eu_curves_csv_path) == "y,x,t"
    s_rows = read_csv_file(result.paths.s_star_csv_path, columns=2)
    assert s_rows[-1][0] == pytest.approx(1.0)
    assert s_rows[-1][1] == pytest.approx(1.0 - 0.4225, abs=1e-3)
    ys = {row[0] for row in read_csv_file(result.paths.eu_curves_csv_path, columns=3)}
    assert len(ys) == 11


def test_verify_passes_on_a_fresh_solution(tmp_path: Path, problem_path: Path) -> None:
    solved = cmd_solve(problem_path, CommandConfig(output_dir=tmp_path / "solved"))
    config = CommandConfig(output_dir=tmp_path / "solved" / "verify", trials=60, seed=3)
    result = cmd_verify(problem_path, solved.paths.run_dir, config)

    assert result.exit_code == 0, result.audit.failed_checks()
    audit = read_json_file(result.paths.audit_path)
    assert audit["passed"] is True
    assert audit["cut_point"]["overbids"] is False
    assert _header(result.paths.sweep_csv_path) == "t,leader_utility"
    assert len(read_csv_file(result.paths.sweep_csv_path, columns=2)) == 500


def test_verify_rejects_a_shifted_cut_point(tmp_path: Path, problem_path: Path) -> None:
    solved = cmd_solve(problem_path, CommandConfig(output_dir=tmp_path / "solved"))
    p = uniform_problem()
    stored = read_solution_files(p, solved.paths.run_dir)
    g = step_equal_bid(p, [stored.cut_points[0] + 0.1], [0.0, 1.0])
    tampered = dataclasses.replace(
        stored,
        g=g,
        s_star=reconstruct(p, g),
        cut_points=[stored.cut_points[0] + 0.1],
        leader_utility=leader_utility(p, g),
    )
    write_solution_files(build_output_paths(tmp_path / "tampered"), tampered)

    config = CommandConfig(output_dir=tmp_path / "verify", trials=60, seed=3)
    result = cmd_verify(problem_path, tmp_path / "tampered", config)

    assert result.exit_code == 1
    failed = result.audit.failed_checks()
    assert "perturbation gain" in failed
    assert "cut-point sweep" in failed
    assert "stored utility" not in failed
    assert json.loads(result.paths.audit_path.read_text(encoding="utf-8"))["passed"] is False


def test_verify_needs_the_curve_files(tmp_path: Path, problem_path: Path) -> None:
    solved = cmd_solve(problem_path, CommandConfig(output_dir=tmp_path / "solved"))
    solved.paths.g_csv_path.unlink()
    with pytest.raises(InputFileError):
        cmd_verify(problem_path, solved.paths.run_dir, CommandConfig(output_dir=tmp_path / "verify", trials=5))
    manifest = Manifest.read_json(tmp_path / "verify" / "manifest.json")
    assert manifest.steps["load_solution"].status == "failed"
    assert "verify" not in manifest.steps
