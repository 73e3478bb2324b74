"""Exception hierarchy shared by all modules."""


class BootpercError(Exception):
    """Base class for library errors."""


class PreconditionError(BootpercError, ValueError):
    """An operation was called outside its documented domain."""


class BudgetExceeded(BootpercError):
    """An exhaustive enumeration hit its work cap."""


class Inconclusive(BootpercError):
    """Finite data could not decide the question asked."""


class NonConvergence(BootpercError):
    """An iterative solver hit its iteration cap."""


class DegenerateDistribution(BootpercError):
    """Offspring law puts mass below k, so the critical probability is 1."""

    p_crit = 1.0
