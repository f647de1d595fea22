"""Exception hierarchy and the global enumeration budget."""

DEFAULT_BUDGET = 10**7
DEFAULT_RANK_CAP = 200
DEFAULT_BCH_STEP_CAP = 6


class NilprogError(Exception):
    """Base class for all package errors."""


class CapExceededError(NilprogError):
    """A structural size cap (basis rank, BCH step) would be exceeded."""


class BudgetExceededError(NilprogError):
    """An exhaustive enumeration would exceed the configured budget.

    Budgets fail loudly; results are never silently truncated.
    """


class TriangularityError(NilprogError):
    """A basis violates the triangular bracket condition required for
    normal-form coordinate peeling."""


class ThicknessError(NilprogError):
    """A convex body is not strictly thick with respect to the lattice."""

    def __init__(self, message, lambda_last=None):
        super().__init__(message)
        self.lambda_last = lambda_last


class NotPrimitiveError(NilprogError):
    """A lattice vector has content > 1 where a primitive vector is required."""

    def __init__(self, message, content=None):
        super().__init__(message)
        self.content = content


class ValidationError(NilprogError):
    """Structured input failed an algebraic consistency check."""


class HypothesisFailure(NilprogError):
    """A stated hypothesis of an operation does not hold for the given input.

    This is a report, not an internal error; the CLI maps it to exit code 2.
    """


def check_budget(size, budget, what="enumeration"):
    if budget is not None and size > budget:
        raise BudgetExceededError(
            f"{what} of size {size} exceeds budget {budget}"
        )
    return size
