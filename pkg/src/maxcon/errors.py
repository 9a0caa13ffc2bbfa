"""Shared exception types."""


class MaxconError(Exception):
    """Base class for errors raised by this package."""


class BudgetError(MaxconError):
    """An enumeration or solver budget would be exceeded; the work was refused."""


class ContractError(MaxconError):
    """A caller violated a documented precondition."""


class SolverError(MaxconError):
    """An underlying numerical solver failed to converge."""
