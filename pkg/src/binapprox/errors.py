"""Exception and warning types shared across the package."""


class InvalidArgumentError(ValueError):
    """Bad parameter value or misaligned grids."""


class NumericOverflowError(ArithmeticError):
    """A simulated value became non-finite."""


class PreconditionError(RuntimeError):
    """An operation was called without a required certificate."""


class BudgetExceededError(RuntimeError):
    """A parameter sweep ran out of candidates before reaching its target.

    ``best`` holds the closest values reached, keyed by parameter name.
    """

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = dict(best or {})


class UnverifiedBoundWarning(UserWarning):
    """The input violates the slope precondition, so the error bound is not guaranteed."""
