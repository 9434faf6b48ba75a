from .commands import CommandConfig, CommandResult, cmd_respond, cmd_smooth, cmd_solve, cmd_verify
from .problem import ProblemSpec, load_problem

__all__ = [
    "CommandConfig",
    "CommandResult",
    "ProblemSpec",
    "cmd_respond",
    "cmd_smooth",
    "cmd_solve",
    "cmd_verify",
    "load_problem",
]
