"""Exception types shared across the package.

The CLI maps each class to a distinct exit status.
"""


class ValidationError(ValueError):
    """Invalid input: bad parameters, region, or a cap exceeded."""


class ConvergenceError(RuntimeError):
    """An iterative eigensolver stopped before meeting its tolerance."""


class ConsistencyError(RuntimeError):
    """Two independent evaluations of the same quantity disagree."""
