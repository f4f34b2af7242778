"""Exception types shared across the package."""


class AchopfError(Exception):
    """Base class for all package errors."""


class AdmissibilityError(AchopfError):
    """A parameter set violates a structural precondition (named field in message)."""


class AssemblyError(AchopfError):
    """Operator block cannot be assembled for the requested mode/variant."""


class TruncationError(AchopfError):
    """Truncation too small, mismatched, or critical mode on the boundary."""


class SolvabilityError(AchopfError):
    """Right-hand side violates a solvability condition, or a block is singular."""


class ConvergenceFailure(AchopfError):
    """An iteration failed to converge within its budget."""


class ConfigError(AchopfError):
    """Run configuration is malformed or incomplete."""
