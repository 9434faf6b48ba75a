from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path
from typing import Sequence

from src.contracts.errors import ContractError, InputFileError, ProblemSpecError, SolverError
from src.exception import error_message_detail
from src.logger import configure_logging
from src.pipeline.commands import (
    METHOD_CHOICES,
    CommandConfig,
    CommandResult,
    cmd_respond,
    cmd_smooth,
    cmd_solve,
    cmd_verify,
)

type Argv = Sequence[str]

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_INPUT = 2


def _positive_int(value: str) -> int:
    try:
        parsed = int(value)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"invalid int value: {value}") from exc
    if parsed <= 0:
        raise argparse.ArgumentTypeError("must be > 0")
    return parsed


def _nonnegative_int(value: str) -> int:
    try:
        parsed = int(value)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"invalid int value: {value}") from exc
    if parsed < 0:
        raise argparse.ArgumentTypeError("must be >= 0")
    return parsed


def _grid_count(value: str) -> int:
    parsed = _positive_int(value)
    if parsed < 2:
        raise argparse.ArgumentTypeError("must be >= 2")
    return parsed


def _positive_float(value: str) -> float:
    try:
        parsed = float(value)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"invalid float value: {value}") from exc
    if not parsed > 0:
        raise argparse.ArgumentTypeError("must be > 0")
    return parsed


def _add_common(parser: argparse.ArgumentParser, *, out_required: bool = True) -> None:
    parser.add_argument("problem", type=Path, help="Problem JSON (f1, f2, auction, optional tolerances/grids).")
    parser.add_argument(
        "--out",
        type=Path,
        required=out_required,
        default=None,
        help="Output directory." if out_required else "Output directory (default: <solution_dir>/verify).",
    )
    parser.add_argument("--seed", type=_nonnegative_int, default=0, help="Seed for every random choice.")
    parser.add_argument("--tol", type=_positive_float, default=None, help="Absolute tolerance override.")
    parser.add_argument("--grid-n", type=_grid_count, default=None, help="Leader types on the verification grid.")
    parser.add_argument("--grid-m", type=_grid_count, default=None, help="Bids on the verification grid.")
    parser.add_argument("--grid-k", type=_grid_count, default=None, help="Follower types on the verification grid.")
    parser.add_argument("--run-id", default=None, help="Optional deterministic run identifier.")
    parser.add_argument(
        "--include-error-traceback",
        action="store_true",
        help="Persist traceback details in manifest step errors.",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description="Leader commitment strategies in two-bidder auctions.")
    commands = parser.add_subparsers(dest="command", required=True)

    solve = commands.add_parser("solve", help="Compute the optimal equal-bid function g and the strategy s*.")
    _add_common(solve)
    solve.add_argument("--method", choices=METHOD_CHOICES, default="auto", help="Solver to use.")
    solve.add_argument("--max-steps", type=_positive_int, default=2, help="Step count for the general search.")
    solve.add_argument("--restarts", type=_positive_int, default=None, help="Restarts for the general search.")

    respond = commands.add_parser("respond", help="Follower utility and best responses to a leader strategy.")
    _add_common(respond)
    respond.add_argument("strategy", type=Path, help="Two-column CSV (x, bid) with a header row.")

    smooth = commands.add_parser("smooth", help="Smoothed strategy, equal-bid function and equal-utility curves.")
    _add_common(smooth)
    smooth.add_argument("strategy", type=Path, help="Two-column CSV (x, bid) with a header row.")

    verify = commands.add_parser("verify", help="Audit a solve output directory against the brute-force oracle.")
    _add_common(verify, out_required=False)
    verify.add_argument("solution_dir", type=Path, help="Directory written by 'solve'.")
    verify.add_argument("--trials", type=_nonnegative_int, default=200, help="Random perturbations to audit.")
    return parser


def parse_args(argv: Argv | None = None) -> argparse.Namespace:
    return build_parser().parse_args(list(argv) if argv is not None else None)


def build_command_config(args: argparse.Namespace) -> CommandConfig:
    out = args.out
    if out is None:
        out = Path(args.solution_dir) / "verify"
    extra: dict[str, object] = {}
    if getattr(args, "restarts", None) is not None:
        extra["restarts"] = int(args.restarts)
    return CommandConfig(
        output_dir=Path(out),
        seed=int(args.seed),
        trials=int(getattr(args, "trials", 200)),
        method=getattr(args, "method", "auto"),
        max_steps=int(getattr(args, "max_steps", 2)),
        tol=args.tol,
        leader_types=args.grid_n,
        follower_types=args.grid_k,
        bids=args.grid_m,
        include_error_traceback=bool(args.include_error_traceback),
        run_id=args.run_id,
        **extra,
    )


def run_from_args(args: argparse.Namespace) -> CommandResult:
    config = build_command_config(args)
    if args.command == "solve":
        return cmd_solve(Path(args.problem), config)
    if args.command == "respond":
        return cmd_respond(Path(args.problem), Path(args.strategy), config)
    if args.command == "smooth":
        return cmd_smooth(Path(args.problem), Path(args.strategy), config)
    return cmd_verify(Path(args.problem), Path(args.solution_dir), config)


def main(argv: Argv | None = None) -> int:
    args = parse_args(argv)
    configure_logging()
    try:
        result = run_from_args(args)
    except (ProblemSpecError, ContractError, InputFileError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except SolverError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILED
    except Exception as exc:
        logger.error(error_message_detail(exc, sys))
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILED

    print(f"manifest_path={result.paths.manifest_path}")
    print(f"output_dir={result.paths.run_dir}")
    if result.audit is not None:
        for check in result.audit.failed_checks():
            print(f"failed_check={check}")
    print(f"status={'pass' if result.exit_code == EXIT_OK else 'fail'}")
    return result.exit_code


if __name__ == "__main__":
    raise SystemExit(main())
