"""Exception types shared across the library.

The CLI maps these onto process exit codes: InputError -> 1,
ConvergenceError -> 2, NumericalError -> 3.
"""


class KrrSolveError(Exception):
    """Base class for all library errors."""


class InputError(KrrSolveError):
    """Invalid argument, configuration, or unreadable/malformed data."""


class NumericalError(KrrSolveError):
    """Numerical breakdown: non-finite values or loss of positive definiteness."""


class ConvergenceError(KrrSolveError):
    """An iterative solve failed to reach its tolerance within the iteration cap."""
