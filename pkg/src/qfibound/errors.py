"""Exception types shared across the package.

Invalid arguments raise plain ValueError; the classes here cover the
failure modes that callers are expected to branch on (and that the CLI
maps to distinct exit codes).
"""


class CapacityError(RuntimeError):
    """Problem size exceeds a configured or hard-coded cap."""


class InfeasibleError(RuntimeError):
    """Constraint values are not attainable by any quantum state."""


class ValidationFailure(RuntimeError):
    """A self-check (residual, cross-check, verification pass) failed."""
