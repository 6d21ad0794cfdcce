"""Exception hierarchy shared by all modules."""

from typing import Iterable, List


class ClampRiskError(Exception):
    """Base class for every error raised by the engine."""


class DomainError(ClampRiskError, ValueError):
    """An input lies outside the mathematical domain of an operation."""


class PreconditionError(ClampRiskError, ValueError):
    """An operation was called on a state it does not accept."""


class InfeasiblePolicyError(PreconditionError):
    """The borrow policy forbids borrowing a token the position needs."""


class UnsafeAtDeploymentError(PreconditionError):
    """Margin at the deployment price is already at or below the threshold."""


class UnhealthyPositionError(PreconditionError):
    """The operation only applies to positions above the liquidation threshold."""


class NotDeleveragedError(PreconditionError):
    """Liquidation requires a fully deleveraged position."""


class ConvergenceError(ClampRiskError, RuntimeError):
    """An iterative search did not converge within its iteration budget."""


class BracketError(ConvergenceError):
    """The search could not bracket the target liquidity."""


class MonotonicityError(ClampRiskError, RuntimeError):
    """Endpoint margin was observed to increase with liquidity during a search."""


class ValidationError(ClampRiskError, ValueError):
    """One or more configuration invariants are violated.

    All violations are collected so callers can report them at once.
    """

    def __init__(self, violations: Iterable[str]):
        self.violations: List[str] = list(violations)
        super().__init__("; ".join(self.violations))
