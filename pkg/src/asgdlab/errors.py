"""Exception types shared across the package."""


class ValidationError(ValueError):
    """An input violates a documented precondition.

    The message names the violated constraint so callers (and the CLI)
    can report it verbatim.
    """


class InfeasibleError(ValidationError):
    """A derived constant is infeasible (e.g. a geometric series diverges)."""
