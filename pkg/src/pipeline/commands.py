from __future__ import annotations

import logging
import traceback as tb
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Any, Literal, NoReturn
from uuid import uuid4

import numpy as np

from src.components.follower import CommitmentProblem, response_profile
from src.components.optimizer import (
    DEFAULT_RESTARTS,
    Solution,
    leader_utility,
    overbidding_margin,
    sign_structure,
    solve_all_pay,
    solve_first_price_uniform_F2,
    solve_general,
    stationarity_residual,
)
from src.components.oracle import (
    adjudicate_cut_point,
    agreement_tolerance,
    brute_force_leader_utility,
    perturbation_audit,
    sweep_cut_point,
)
from src.components.smoothing import equal_bid, eu_curve, reconstruct, smooth
from src.components.strategy import MonotoneCurve, RawStrategy, sort_strategy
from src.contracts.artifacts import AuditReport, Finding
from src.contracts.errors import ComponentError, ContractError, InputFileError, SolverError, UnsupportedProblemError
from src.contracts.manifest import Manifest, StepRecord
from src.pipeline.io import (
    OutputPaths,
    build_output_paths,
    manifest_path_ref,
    persist_manifest,
    read_csv_file,
    read_json_file,
    write_csv_file,
    write_json_file,
)
from src.pipeline.problem import load_problem
from src.utils.hashing import sha256_file
from src.utils.time import Timer

logger = logging.getLogger(__name__)

type MethodChoice = Literal["auto", "first_price_uniform", "all_pay", "general"]

METHOD_CHOICES: tuple[str, ...] = ("auto", "first_price_uniform", "all_pay", "general")
STORED_UTILITY_TOL = 1e-6
RECONSTRUCTION_TOL = 1e-6
SWEEP_AGREEMENT = 3e-3
EU_CURVE_COUNT = 11


@dataclass(frozen=True, slots=True)
class CommandConfig:
    output_dir: Path
    seed: int = 0
    trials: int = 200
    method: MethodChoice = "auto"
    max_steps: int = 2
    restarts: int = DEFAULT_RESTARTS
    tol: float | None = None
    leader_types: int | None = None
    follower_types: int | None = None
    bids: int | None = None
    include_error_traceback: bool = False
    run_id: str | None = None

    def problem_overrides(self) -> dict[str, Any]:
        return {
            "tol": self.tol,
            "leader_types": self.leader_types,
            "follower_types": self.follower_types,
            "bids": self.bids,
        }


@dataclass(frozen=True, slots=True)
class CommandResult:
    command: str
    exit_code: int
    manifest: Manifest
    paths: OutputPaths
    audit: AuditReport | None = None


class _Steps:
    """Step bookkeeping for one command run; the manifest is persisted after every transition."""

    def __init__(self, manifest: Manifest, paths: OutputPaths, config: CommandConfig, inputs: dict[str, str]) -> None:
        self._manifest = manifest
        self._paths = paths
        self._config = config
        self._inputs = inputs
        self._timers: dict[str, Timer] = {}

    def start(self, name: str, *, step_context: dict[str, Any] | None = None) -> StepRecord:
        step = self._manifest.ensure_step(name)
        step.start()
        self._timers[name] = Timer.start()
        if step_context:
            step.meta["context"] = _json_safe(step_context)
        return step

    def complete(
        self,
        step: StepRecord,
        *,
        step_context: dict[str, Any] | None = None,
        artifacts: dict[str, Any] | None = None,
    ) -> None:
        meta: dict[str, Any] = {}
        if step_context:
            meta["context"] = _json_safe(step_context)
        if artifacts:
            meta["artifacts"] = _json_safe(artifacts)
        step.finish(status="success", meta=meta or None)
        logger.info("step %s finished in %.3fs", step.name, self._timers[step.name].elapsed_s())
        self._persist()

    def fail(self, step: StepRecord, exc: Exception, *, step_context: dict[str, Any] | None = None) -> NoReturn:
        error_payload: dict[str, Any] = {
            "type": type(exc).__name__,
            "message": str(exc),
            "context": {
                "step": step.name,
                "run_dir": str(self._paths.run_dir),
                **self._inputs,
                "step_context": _json_safe(step_context or {}),
            },
        }
        if self._config.include_error_traceback:
            error_payload["traceback"] = "".join(tb.format_exception(type(exc), exc, exc.__traceback__))

        step.finish(
            status="failed",
            error=error_payload,
            error_type=type(exc).__name__,
            meta={"context": _json_safe(step_context or {})},
        )
        self._manifest.errors.append(f"{step.name}: {type(exc).__name__}: {exc}")
        logger.error("step %s failed: %s: %s", step.name, type(exc).__name__, exc)
        self._persist()

        if isinstance(exc, SolverError):
            raise exc
        if step.name == "validate" and isinstance(exc, ComponentError):
            raise ContractError(f"invalid input: {exc}") from exc
        raise SolverError(f"command failed at step '{step.name}': {exc}") from exc

    def _persist(self) -> None:
        # nothing is written until validation has created the output directory
        if self._paths.run_dir.is_dir():
            persist_manifest(self._manifest, self._paths.manifest_path)


def _new_run(command: str, config: CommandConfig, inputs: dict[str, str]) -> tuple[Manifest, OutputPaths, _Steps]:
    paths = build_output_paths(config.output_dir)
    manifest = Manifest(command=command, run_id=config.run_id or uuid4().hex, seed=config.seed)
    return manifest, paths, _Steps(manifest, paths, config, inputs)


def _prepare_run_dir(paths: OutputPaths) -> None:
    if paths.run_dir.exists() and not paths.run_dir.is_dir():
        raise InputFileError(f"output path is not a directory: {paths.run_dir}")
    paths.run_dir.mkdir(parents=True, exist_ok=True)


def _record_problem(manifest: Manifest, problem_path: Path) -> None:
    manifest.artifacts.problem_path = str(problem_path)
    manifest.problem_sha256 = sha256_file(problem_path)
    manifest.artifacts.problem_sha256 = manifest.problem_sha256


def _load_validated(
    problem_path: Path,
    config: CommandConfig,
    manifest: Manifest,
    paths: OutputPaths,
    steps: _Steps,
    *,
    strategy_path: Path | None = None,
) -> tuple[CommitmentProblem, MonotoneCurve | None]:
    """Parse the problem (and strategy CSV) before anything is written to disk."""
    validate_context = {
        "problem_path": str(problem_path),
        "strategy_path": str(strategy_path) if strategy_path is not None else None,
        "output_dir": str(paths.run_dir),
    }
    step = steps.start("validate", step_context=validate_context)
    try:
        _, problem = load_problem(problem_path, **config.problem_overrides())
        strategy: MonotoneCurve | None = None
        if strategy_path is not None:
            raw = RawStrategy.from_rows(read_csv_file(strategy_path, columns=2))
            strategy = sort_strategy(raw, problem.F1)
        _prepare_run_dir(paths)
        _record_problem(manifest, problem_path)
        if strategy_path is not None:
            manifest.artifacts.strategy_path = str(strategy_path)
            manifest.artifacts.strategy_sha256 = sha256_file(strategy_path)
        steps.complete(
            step,
            step_context=validate_context,
            artifacts={
                "problem_sha256": manifest.artifacts.problem_sha256,
                "strategy_sha256": manifest.artifacts.strategy_sha256,
            },
        )
    except Exception as exc:
        steps.fail(step, exc, step_context=validate_context)
    return problem, strategy


def _auto_method(p: CommitmentProblem) -> MethodChoice:
    if p.rule.kind == "first_price" and p.F2.is_uniform and p.b1 == 0.0:
        return "first_price_uniform"
    if p.rule.kind == "all_pay" and p.F2.density_nondecreasing:
        return "all_pay"
    return "general"


def dispatch(p: CommitmentProblem, config: CommandConfig) -> Solution:
    """Run the requested solver; a closed form whose preconditions fail falls back to the general search."""
    method = _auto_method(p) if config.method == "auto" else config.method
    logger.info("solving with method %s (requested %s)", method, config.method)
    try:
        if method == "first_price_uniform":
            return solve_first_price_uniform_F2(p)
        if method == "all_pay":
            return solve_all_pay(p)
    except UnsupportedProblemError as exc:
        logger.warning("%s closed form does not apply (%s); falling back to the general search", method, exc)
        fallback = solve_general(p, config.max_steps, restarts=config.restarts, seed=config.seed)
        note = f"requested {method} closed form does not apply ({exc}); fell back to general search"
        return replace(fallback, notes=[note, *fallback.notes])
    return solve_general(p, config.max_steps, restarts=config.restarts, seed=config.seed)


def write_solution_files(paths: OutputPaths, solution: Solution) -> None:
    write_json_file(paths.solution_path, solution.to_json())
    write_csv_file(paths.g_csv_path, ("x", "g"), solution.g.to_rows())
    write_csv_file(paths.s_star_csv_path, ("x", "s_star"), solution.s_star.to_rows())


def cmd_solve(problem_path: Path, config: CommandConfig) -> CommandResult:
    problem_path = Path(problem_path)
    manifest, paths, steps = _new_run("solve", config, {"problem_path": str(problem_path)})
    problem, _ = _load_validated(problem_path, config, manifest, paths, steps)

    solve_context = {
        "method": config.method,
        "max_steps": config.max_steps,
        "restarts": config.restarts,
        "seed": config.seed,
    }
    step = steps.start("solve", step_context=solve_context)
    try:
        solution = dispatch(problem, config)
        manifest.artifacts.method = solution.method
        manifest.artifacts.leader_utility = solution.leader_utility
        manifest.artifacts.cut_points = list(solution.cut_points)
        if solution.residual_flagged:
            manifest.warnings.append(f"stationarity residual {solution.stationarity_residual:.3g}")
        steps.complete(
            step,
            step_context=solve_context,
            artifacts={
                "method": solution.method,
                "cut_points": solution.cut_points,
                "leader_utility": solution.leader_utility,
                "stationarity_residual": solution.stationarity_residual,
            },
        )
    except Exception as exc:
        steps.fail(step, exc, step_context=solve_context)

    write_context = {
        "solution_path": str(paths.solution_path),
        "g_csv_path": str(paths.g_csv_path),
        "s_star_csv_path": str(paths.s_star_csv_path),
    }
    step = steps.start("write_outputs", step_context=write_context)
    try:
        write_solution_files(paths, solution)
        refs = _record_outputs(manifest, paths, ("solution", "g_csv", "s_star_csv"))
        steps.complete(step, step_context=write_context, artifacts=refs)
    except Exception as exc:
        steps.fail(step, exc, step_context=write_context)

    return CommandResult(command="solve", exit_code=0, manifest=manifest, paths=paths)


def cmd_respond(problem_path: Path, strategy_path: Path, config: CommandConfig) -> CommandResult:
    problem_path, strategy_path = Path(problem_path), Path(strategy_path)
    inputs = {"problem_path": str(problem_path), "strategy_path": str(strategy_path)}
    manifest, paths, steps = _new_run("respond", config, inputs)
    problem, strategy = _load_validated(problem_path, config, manifest, paths, steps, strategy_path=strategy_path)

    respond_context = {"samples": problem.grid.curve_samples}
    step = steps.start("respond", step_context=respond_context)
    try:
        profile = response_profile(problem, strategy)
        steps.complete(step, step_context=respond_context, artifacts={"max_utility": float(profile.utility.values[-1])})
    except Exception as exc:
        steps.fail(step, exc, step_context=respond_context)

    write_context = {"response_csv_path": str(paths.response_csv_path)}
    step = steps.start("write_outputs", step_context=write_context)
    try:
        write_csv_file(paths.response_csv_path, ("y", "u_B", "best_bid", "win_cutoff"), profile.to_rows())
        refs = _record_outputs(manifest, paths, ("response_csv",))
        steps.complete(step, step_context=write_context, artifacts=refs)
    except Exception as exc:
        steps.fail(step, exc, step_context=write_context)

    return CommandResult(command="respond", exit_code=0, manifest=manifest, paths=paths)


def cmd_smooth(problem_path: Path, strategy_path: Path, config: CommandConfig) -> CommandResult:
    problem_path, strategy_path = Path(problem_path), Path(strategy_path)
    inputs = {"problem_path": str(problem_path), "strategy_path": str(strategy_path)}
    manifest, paths, steps = _new_run("smooth", config, inputs)
    problem, strategy = _load_validated(problem_path, config, manifest, paths, steps, strategy_path=strategy_path)

    smooth_context = {"eu_curves": EU_CURVE_COUNT}
    step = steps.start("smooth", step_context=smooth_context)
    try:
        s_star = smooth(problem, strategy)
        g = equal_bid(problem, s_star)
        eu_rows: list[tuple[float, float, float]] = []
        for y in np.linspace(0.0, problem.b2, EU_CURVE_COUNT):
            eu_rows.extend(eu_curve(problem, strategy, float(y)).to_rows())
        drop = float(np.max(strategy.values - s_star.values))
        steps.complete(step, step_context=smooth_context, artifacts={"max_drop": drop, "jumps": g.jump_points().tolist()})
    except Exception as exc:
        steps.fail(step, exc, step_context=smooth_context)

    write_context = {
        "s_star_csv_path": str(paths.s_star_csv_path),
        "g_csv_path": str(paths.g_csv_path),
        "eu_curves_csv_path": str(paths.eu_curves_csv_path),
    }
    step = steps.start("write_outputs", step_context=write_context)
    try:
        write_csv_file(paths.s_star_csv_path, ("x", "s_star"), s_star.to_rows())
        write_csv_file(paths.g_csv_path, ("x", "g"), g.to_rows())
        write_csv_file(paths.eu_curves_csv_path, ("y", "x", "t"), eu_rows)
        refs = _record_outputs(manifest, paths, ("s_star_csv", "g_csv", "eu_curves_csv"))
        steps.complete(step, step_context=write_context, artifacts=refs)
    except Exception as exc:
        steps.fail(step, exc, step_context=write_context)

    return CommandResult(command="smooth", exit_code=0, manifest=manifest, paths=paths)


def read_solution_files(p: CommitmentProblem, solution_dir: Path) -> Solution:
    """Solution from a solve output directory; g.csv and s_star.csv take precedence over the JSON copies."""
    source = build_output_paths(solution_dir)
    data = read_json_file(source.solution_path)
    if not isinstance(data, dict):
        raise ContractError(f"{source.solution_path}: expected a JSON object")
    g_rows = read_csv_file(source.g_csv_path, columns=2)
    s_rows = read_csv_file(source.s_star_csv_path, columns=2)
    try:
        stored = Solution.from_json({**data, "g": g_rows, "s_star": s_rows})
    except ComponentError as exc:
        raise ContractError(f"malformed solution in {solution_dir}: {exc}") from exc
    if abs(float(stored.g.grid[0]) - p.a1) > 1e-9 * max(1.0, abs(p.a2)):
        raise ContractError(f"{source.g_csv_path}: grid must start at a1 = {p.a1}")
    return stored


def audit_solution(p: CommitmentProblem, stored: Solution, *, trials: int, seed: int) -> tuple[AuditReport, list[tuple[float, float]]]:
    """All verification findings for a stored solution, plus the cut-point sweep curve."""
    findings: list[Finding] = []

    recomputed = leader_utility(p, stored.g)
    gap = abs(recomputed - stored.leader_utility)
    findings.append(
        Finding(
            check="stored utility",
            passed=gap <= STORED_UTILITY_TOL,
            message=f"recomputed {recomputed:.9g} vs stored {stored.leader_utility:.9g}",
            meta={"gap": gap},
        )
    )

    rebuilt = reconstruct(p, stored.g)
    if rebuilt.grid.size == stored.s_star.grid.size and np.allclose(rebuilt.grid, stored.s_star.grid):
        error = float(np.max(np.abs(rebuilt.values - stored.s_star.values)))
    else:
        error = float(np.max(np.abs(np.asarray(stored.s_star.eval(rebuilt.grid)) - rebuilt.values)))
    findings.append(
        Finding(
            check="reconstruction",
            passed=error <= RECONSTRUCTION_TOL * max(1.0, p.b2),
            message=f"max |reconstruct(g) - s_star| = {error:.3g}",
            meta={"max_error": error},
        )
    )

    oracle_value = brute_force_leader_utility(p, stored.s_star)
    allowed = agreement_tolerance(p, p.grid)
    findings.append(
        Finding(
            check="brute-force agreement",
            passed=abs(oracle_value - recomputed) <= allowed,
            message=f"oracle {oracle_value:.6g} vs integral {recomputed:.6g} (allowed {allowed:.3g})",
            meta={"oracle": oracle_value, "integral": recomputed, "allowed": allowed},
        )
    )

    sweep = sweep_cut_point(p)
    levels = np.unique(stored.g.values)
    two_level = len(stored.cut_points) == 1 and levels.size == 2 and levels[0] <= 1e-12 and levels[-1] >= p.b2 - 1e-12
    if two_level:
        allowed_shift = SWEEP_AGREEMENT * (p.a2 - p.a1)
        shift = abs(sweep.argmax - stored.cut_points[0])
        findings.append(
            Finding(
                check="cut-point sweep",
                passed=shift <= allowed_shift,
                message=f"sweep argmax {sweep.argmax:.6g} vs cut point {stored.cut_points[0]:.6g}",
                meta={"sweep_argmax": sweep.argmax, "allowed": allowed_shift},
            )
        )
    else:
        logger.info("solution is not a single 0/b2 step; the sweep is recorded without a finding")

    audit = perturbation_audit(p, stored, trials, seed)
    findings.append(
        Finding(
            check="perturbation gain",
            passed=audit.passed,
            message=f"max gain {audit.max_gain:.3g} over {audit.trials} perturbations (threshold {audit.threshold:.0e})",
            meta={"max_gain": audit.max_gain, "worst_kind": audit.worst_kind, "base_utility": audit.base_utility},
        )
    )

    cut_point = None
    if p.rule.kind == "first_price" and p.F2.is_uniform and p.b1 == 0.0:
        cut_point = adjudicate_cut_point(p, sweep=sweep)

    diagnostics = {
        "stationarity_residual": stationarity_residual(p, stored.g),
        "sign_structure_violations": float(sign_structure(p, stored.g, tol=1e-3)),
        "overbidding_margin": overbidding_margin(stored.s_star),
    }
    report = AuditReport(seed=seed, trials=trials, findings=findings, cut_point=cut_point, diagnostics=diagnostics)
    return report, sweep.curve


def cmd_verify(problem_path: Path, solution_dir: Path, config: CommandConfig) -> CommandResult:
    problem_path, solution_dir = Path(problem_path), Path(solution_dir)
    inputs = {"problem_path": str(problem_path), "solution_dir": str(solution_dir)}
    manifest, paths, steps = _new_run("verify", config, inputs)
    problem, _ = _load_validated(problem_path, config, manifest, paths, steps)

    load_context = {"solution_dir": str(solution_dir)}
    step = steps.start("load_solution", step_context=load_context)
    try:
        stored = read_solution_files(problem, solution_dir)
        manifest.artifacts.method = stored.method
        manifest.artifacts.leader_utility = stored.leader_utility
        manifest.artifacts.cut_points = list(stored.cut_points)
        steps.complete(step, step_context=load_context, artifacts={"method": stored.method})
    except Exception as exc:
        steps.fail(step, exc, step_context=load_context)

    verify_context = {"trials": config.trials, "seed": config.seed}
    step = steps.start("verify", step_context=verify_context)
    try:
        report, sweep_curve = audit_solution(problem, stored, trials=config.trials, seed=config.seed)
        for finding in report.findings:
            if not finding.passed:
                manifest.warnings.append(f"{finding.check}: {finding.message}")
        steps.complete(
            step,
            step_context=verify_context,
            artifacts={"passed": report.passed, "failed_checks": report.failed_checks()},
        )
    except Exception as exc:
        steps.fail(step, exc, step_context=verify_context)

    write_context = {"sweep_csv_path": str(paths.sweep_csv_path), "audit_path": str(paths.audit_path)}
    step = steps.start("write_outputs", step_context=write_context)
    try:
        write_csv_file(paths.sweep_csv_path, ("t", "leader_utility"), sweep_curve)
        write_json_file(paths.audit_path, _json_safe(report.to_dict()))
        refs = _record_outputs(manifest, paths, ("sweep_csv", "audit"))
        steps.complete(step, step_context=write_context, artifacts=refs)
    except Exception as exc:
        steps.fail(step, exc, step_context=write_context)

    exit_code = 0 if report.passed else 1
    logger.info("verify finished: %s", "pass" if report.passed else f"fail {report.failed_checks()}")
    return CommandResult(command="verify", exit_code=exit_code, manifest=manifest, paths=paths, audit=report)


def _record_outputs(manifest: Manifest, paths: OutputPaths, names: tuple[str, ...]) -> dict[str, Any]:
    refs: dict[str, Any] = {}
    for name in names:
        path = getattr(paths, f"{name}_path")
        ref = manifest_path_ref(path, base_dir=paths.run_dir)
        digest = sha256_file(path)
        setattr(manifest.artifacts, f"{name}_path", ref)
        setattr(manifest.artifacts, f"{name}_sha256", digest)
        refs[f"{name}_path"] = ref
        refs[f"{name}_sha256"] = digest
    return refs


def _json_safe(value: Any) -> Any:
    if value is None or isinstance(value, (str, int, bool)):
        return value
    if isinstance(value, (float, np.floating)):
        number = float(value)
        return number if np.isfinite(number) else str(number)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.ndarray):
        return [_json_safe(v) for v in value.tolist()]
    if isinstance(value, Path):
        return str(value)
    if isinstance(value, dict):
        return {str(k): _json_safe(v) for k, v in value.items()}
    if isinstance(value, (list, tuple, set)):
        return [_json_safe(v) for v in value]
    return repr(value)


__all__ = [
    "METHOD_CHOICES",
    "CommandConfig",
    "CommandResult",
    "MethodChoice",
    "audit_solution",
    "cmd_respond",
    "cmd_smooth",
    "cmd_solve",
    "cmd_verify",
    "dispatch",
    "read_solution_files",
    "write_solution_files",
]
