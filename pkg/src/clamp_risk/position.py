"""
Leveraged position construction and the evolution of assets and debt with price.

A position is an LP range plus free collateral ``(x_C, y_C)`` and debt
``(x_D, y_D)``. Construction never swaps: the user covers what they hold,
debt covers the per-token shortfall, surplus user tokens become collateral.
"""

import enum
import math
from dataclasses import dataclass, field, replace
from typing import List

from clamp_risk.clmm import PriceRange, TokenAmounts, position_amounts, position_value
from clamp_risk.errors import DomainError, InfeasiblePolicyError


class BorrowPolicy(str, enum.Enum):
    """Which tokens a position may borrow."""

    QUOTE_ONLY = "quote-only"
    BASE_ONLY = "base-only"
    BOTH_PROPORTIONAL = "both-proportional"

    @property
    def may_borrow_base(self) -> bool:
        return self is not BorrowPolicy.QUOTE_ONLY

    @property
    def may_borrow_quote(self) -> bool:
        return self is not BorrowPolicy.BASE_ONLY


@dataclass(frozen=True)
class UserCapital:
    """The user's own tokens brought to the position."""

    x_user: float
    y_user: float

    def __post_init__(self):
        if not (self.x_user >= 0 and self.y_user >= 0):
            raise DomainError(f"capital must be >= 0, got ({self.x_user}, {self.y_user})")
        if self.x_user == 0 and self.y_user == 0:
            raise DomainError("capital must not be zero in both tokens")

    def value(self, P: float) -> float:
        return self.x_user * P + self.y_user


@dataclass(frozen=True)
class Position:
    """A leveraged LP position.

    Attributes:
        L: Liquidity deployed in the pool.
        range: Price range of the liquidity.
        collateral: Extra collateral kept outside the pool.
        debt: Borrowed token amounts.
        p0: Deployment price; initial quantities derive from it.
    """

    L: float
    range: PriceRange
    collateral: TokenAmounts = field(default_factory=TokenAmounts)
    debt: TokenAmounts = field(default_factory=TokenAmounts)
    p0: float = 1.0

    def __post_init__(self):
        if not (self.L >= 0 and math.isfinite(self.L)):
            raise DomainError(f"liquidity must be finite and >= 0, got {self.L}")
        if not (self.p0 > 0 and math.isfinite(self.p0)):
            raise DomainError(f"deployment price must be positive, got {self.p0}")

    @property
    def has_debt(self) -> bool:
        return not self.debt.is_zero

    def violations(self) -> List[str]:
        """Record-level invariants that construction alone does not enforce."""
        out = []
        if self.L == 0 and self.collateral.is_zero and self.has_debt:
            out.append("position with no liquidity and no collateral must carry no debt")
        return out

    def with_liquidity(self, L: float) -> "Position":
        return replace(self, L=L)


# Relative shortfall treated as rounding noise rather than debt.
_DUST = 1e-12


def _shortfall(required: float, owned: float) -> float:
    short = required - owned
    if short <= _DUST * max(required, owned):
        return 0.0
    return short


def build_position(
    capital: UserCapital,
    rng: PriceRange,
    L: float,
    P0: float,
    policy: BorrowPolicy = BorrowPolicy.BOTH_PROPORTIONAL,
) -> Position:
    """Open a position of liquidity ``L`` at ``P0`` funded by ``capital`` plus debt.

    Debt per token is ``max(required - owned, 0)``; the policy decides which
    tokens may be borrowed at all.

    Raises:
        InfeasiblePolicyError: if a shortfall exists on a token the policy
            does not allow borrowing.
    """
    policy = BorrowPolicy(policy)
    need = position_amounts(L, rng, P0)
    x_short = _shortfall(need.x, capital.x_user)
    y_short = _shortfall(need.y, capital.y_user)
    if x_short > 0 and not policy.may_borrow_base:
        raise InfeasiblePolicyError(
            f"policy {policy.value} cannot borrow base token; shortfall {x_short}"
        )
    if y_short > 0 and not policy.may_borrow_quote:
        raise InfeasiblePolicyError(
            f"policy {policy.value} cannot borrow quote token; shortfall {y_short}"
        )
    collateral = TokenAmounts(
        max(capital.x_user - need.x, 0.0),
        max(capital.y_user - need.y, 0.0),
    )
    return Position(L, rng, collateral, TokenAmounts(x_short, y_short), P0)


def debt_value(pos: Position, P: float) -> float:
    """Debt in quote units at price P: ``x_D * P + y_D``."""
    if not P > 0:
        raise DomainError(f"price must be positive, got {P}")
    return pos.debt.value(P)


def asset_value(pos: Position, P: float) -> float:
    """Pool position value plus extra collateral at price P."""
    return position_value(pos.L, pos.range, P) + pos.collateral.value(P)
