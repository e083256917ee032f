"""Shared exception types."""


class InputError(ValueError):
    """Malformed or inconsistent user-supplied data (CLI exit code 2)."""


class StepError(RuntimeError):
    """A constrained integrator step failed; usually the time step is too large."""
