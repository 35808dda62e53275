"""
Error Types

All failures raised by the toolkit derive from MultifloorError.
Each class carries the process exit code the CLI returns for it:

- 0: success (no exception)
- 2: input / validation problems
- 3: pose-graph optimization failure
- 4: unreachable planning goal
"""

from typing import Any, Dict, List, Optional, Tuple


class MultifloorError(Exception):
    """Root of the toolkit's exception hierarchy."""

    exit_code = 1


class InvalidInputError(MultifloorError, ValueError):
    """Bad arguments, empty inputs, unknown ids, malformed files."""

    exit_code = 2


class DomainError(InvalidInputError):
    """Argument outside the mathematical domain of a formula."""


class SpecValidationError(InvalidInputError):
    """
    A specification (building, route, waypoint list) failed validation.

    Args:
        violations: Every rule the input broke, one human-readable line each
    """

    def __init__(self, violations: List[str]):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations) or "validation failed")


class SizeLimitError(InvalidInputError):
    """Request exceeds the size an exhaustive search accepts."""


class RejectedLoopError(MultifloorError):
    """Loop candidate whose scan alignment residual is too large."""

    def __init__(self, message: str, rms: float):
        self.rms = rms
        super().__init__(message)


class OptimizationError(MultifloorError):
    """
    Levenberg-Marquardt could not make progress.

    Args:
        message: What went wrong
        last_poses: Last accepted iterate (node id -> 4x4 matrix)
    """

    exit_code = 3

    def __init__(self, message: str, last_poses: Optional[Dict[int, Any]] = None):
        self.last_poses = last_poses or {}
        super().__init__(message)


class UnreachableError(MultifloorError):
    """No traversable route between two voxels."""

    exit_code = 4

    def __init__(
        self,
        start: Tuple[int, int, int],
        goal: Tuple[int, int, int],
        leg: Optional[int] = None,
        start_component: int = 0,
        goal_component: int = 0,
    ):
        self.start = start
        self.goal = goal
        self.leg = leg
        self.start_component = start_component
        self.goal_component = goal_component
        where = f"leg {leg}: " if leg is not None else ""
        super().__init__(
            f"{where}goal {goal} unreachable from {start} "
            f"(start component size {start_component}, goal component size {goal_component})"
        )
