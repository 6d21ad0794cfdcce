"""
Price and liquidity primitives of a constant-product concentrated liquidity AMM.

Prices are quote-per-base. A position ``(L, p_a, p_b)`` holds virtual reserves
``x_v = L / sqrt(P)`` and ``y_v = L * sqrt(P)``; the real amounts are the virtual
ones minus the range offsets ``L / sqrt(p_b)`` and ``L * sqrt(p_a)``.

Side convention: below the range the position is entirely base token X (its
value grows linearly with P), above the range it is entirely quote token Y.
This is the convention under which ``value(amounts(P), P)`` reproduces the
piecewise position-value formula. Some prose descriptions of CL pools state
the opposite orientation; the value formula is authoritative here.

A full-range position is ``PriceRange(0, INF)``. Every branch formula takes the
limits ``L / sqrt(INF) = 0`` and ``P / sqrt(INF) = 0``, which IEEE floats give
for free.
"""

import math
from dataclasses import dataclass

from clamp_risk.errors import DomainError

INF = math.inf


@dataclass(frozen=True)
class SqrtPrice:
    """Square root of a price, sqrt(quote per base)."""

    s: float

    def __post_init__(self):
        if not self.s >= 0:
            raise DomainError(f"sqrt price must be >= 0, got {self.s}")

    def to_price(self) -> float:
        return self.s * self.s


def sqrt_price(P: float) -> SqrtPrice:
    if not P >= 0:
        raise DomainError(f"price must be >= 0, got {P}")
    return SqrtPrice(math.sqrt(P))


@dataclass(frozen=True)
class PriceRange:
    """Liquidity range ``[p_a, p_b]``; ``PriceRange(0, INF)`` is full range."""

    p_a: float
    p_b: float

    def __post_init__(self):
        if not (0 <= self.p_a < self.p_b):
            raise DomainError(f"range requires 0 <= p_a < p_b, got ({self.p_a}, {self.p_b})")

    @classmethod
    def full(cls) -> "PriceRange":
        return cls(0.0, INF)

    @property
    def is_full_range(self) -> bool:
        return self.p_a == 0 and self.p_b == INF

    @property
    def sqrt_a(self) -> float:
        return math.sqrt(self.p_a)

    @property
    def sqrt_b(self) -> float:
        return math.sqrt(self.p_b)

    def contains(self, P: float) -> bool:
        """True when P is strictly inside the range (the position is in range)."""
        return self.p_a < P < self.p_b


@dataclass(frozen=True)
class TokenAmounts:
    """Base amount ``x`` and quote amount ``y``, both non-negative."""

    x: float = 0.0
    y: float = 0.0

    def __post_init__(self):
        if not (self.x >= 0 and self.y >= 0):
            raise DomainError(f"token amounts must be >= 0, got ({self.x}, {self.y})")

    def value(self, P: float) -> float:
        """Value in quote units at price P."""
        return self.x * P + self.y

    def scaled(self, factor: float) -> "TokenAmounts":
        return TokenAmounts(self.x * factor, self.y * factor)

    def __add__(self, other: "TokenAmounts") -> "TokenAmounts":
        return TokenAmounts(self.x + other.x, self.y + other.y)

    @property
    def is_zero(self) -> bool:
        return self.x == 0 and self.y == 0


def _check_inputs(L: float, P: float):
    if not L >= 0:
        raise DomainError(f"liquidity must be >= 0, got {L}")
    if not (P > 0 and math.isfinite(P)):
        raise DomainError(f"price must be positive and finite, got {P}")


def position_amounts(L: float, rng: PriceRange, P: float) -> TokenAmounts:
    """Real token amounts held by liquidity ``L`` over ``rng`` at price ``P``."""
    _check_inputs(L, P)
    if L == 0:
        return TokenAmounts(0.0, 0.0)
    sa, sb = rng.sqrt_a, rng.sqrt_b
    if P <= rng.p_a:
        return TokenAmounts(L * (1.0 / sa - 1.0 / sb), 0.0)
    if P >= rng.p_b:
        return TokenAmounts(0.0, L * (sb - sa))
    s = math.sqrt(P)
    return TokenAmounts(L * (1.0 / s - 1.0 / sb), L * (s - sa))


def position_value(L: float, rng: PriceRange, P: float) -> float:
    """Value in quote units of a CL position at price ``P``, fees excluded."""
    _check_inputs(L, P)
    sa, sb = rng.sqrt_a, rng.sqrt_b
    if P <= rng.p_a:
        return L * (sb - sa) / (sa * sb) * P
    if P >= rng.p_b:
        return L * (sb - sa)
    return L * (2.0 * math.sqrt(P) - sa - P / sb)


def hold_value(amounts_at_p0: TokenAmounts, P: float) -> float:
    """Value of a buy-and-hold portfolio frozen at ``amounts_at_p0``."""
    if not P > 0:
        raise DomainError(f"price must be positive, got {P}")
    return amounts_at_p0.value(P)


def divergence_loss(L: float, rng: PriceRange, P0: float, P: float) -> float:
    """Relative divergence loss of the position vs. holding its P0 composition.

    Returns ``(V_pos(P) - V_hold(P)) / V_hold(P)``, always <= 0 up to rounding.
    """
    held = position_amounts(L, rng, P0)
    v_hold = hold_value(held, P)
    if v_hold == 0:
        raise DomainError("hold value is zero; divergence loss undefined")
    return position_value(L, rng, P) / v_hold - 1.0
