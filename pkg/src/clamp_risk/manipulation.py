"""
Spot-price manipulation audit.

A fee-free swap moving the pool price from ``P`` to ``P'`` changes an in-range
position's reserves by ``dx = L/sqrt(P') - L/sqrt(P)`` and
``dy = L*sqrt(P') - L*sqrt(P)``. Valued at the oracle price ``P`` the change
is ``L * (sqrt(P) - sqrt(P'))**2 / sqrt(P')``, never negative, so a
manipulator cannot lower the oracle-priced assets of a position.
"""

import decimal
import math
from dataclasses import dataclass
from typing import List, Sequence

from clamp_risk.clmm import INF, TokenAmounts, position_amounts
from clamp_risk.errors import DomainError
from clamp_risk.margin import margin_level
from clamp_risk.position import Position, asset_value


@dataclass(frozen=True)
class SwapDelta:
    delta_x: float
    delta_y: float
    p_before: float
    p_after: float

    def value(self, P: float) -> float:
        return self.delta_x * P + self.delta_y


def _check(L, P, P_prime):
    if not L > 0:
        raise DomainError(f"liquidity must be > 0, got {L}")
    if not (P > 0 and P_prime > 0):
        raise DomainError(f"prices must be > 0, got ({P}, {P_prime})")


def swap_deltas(L: float, P: float, P_prime: float) -> SwapDelta:
    """Reserve changes of a constant-liquidity pool moved from P to P'."""
    _check(L, P, P_prime)
    s, s_new = math.sqrt(P), math.sqrt(P_prime)
    return SwapDelta(L / s_new - L / s, L * s_new - L * s, P, P_prime)


# dx * P and dy nearly cancel when P' is close to P, so the sum is formed in
# extended precision from the exact float inputs.
_CTX = decimal.Context(prec=40)


def _delta_value(L: float, start: float, end: float, P: float) -> float:
    D = _CTX.create_decimal
    l, s, s_new, p = D(L), D(start).sqrt(_CTX), D(end).sqrt(_CTX), D(P)
    dx = _CTX.subtract(_CTX.divide(l, s_new), _CTX.divide(l, s))
    dy = _CTX.multiply(l, _CTX.subtract(s_new, s))
    return float(_CTX.add(_CTX.multiply(dx, p), dy))


def swap_value_delta(L: float, P: float, P_prime: float) -> float:
    """Oracle-priced value change ``dx * P + dy`` of a swap from P to P'."""
    _check(L, P, P_prime)
    return _delta_value(L, P, P_prime, P)


def swap_value_delta_closed_form(L: float, P: float, P_prime: float) -> float:
    _check(L, P, P_prime)
    s, s_new = math.sqrt(P), math.sqrt(P_prime)
    return L * (s - s_new) ** 2 / s_new


@dataclass(frozen=True)
class AuditEntry:
    target: float
    delta_value: float
    assets_after: float
    margin_after: float


@dataclass(frozen=True)
class AuditReport:
    p_oracle: float
    assets_before: float
    margin_before: float
    entries: List[AuditEntry]

    @property
    def min_delta(self) -> float:
        return min((e.delta_value for e in self.entries), default=0.0)

    @property
    def passed(self) -> bool:
        return self.min_delta >= -1e-12 * self.assets_before


def manipulated_amounts(pos: Position, P_spot: float) -> TokenAmounts:
    """Total token holdings once the pool spot price has been moved to ``P_spot``."""
    return position_amounts(pos.L, pos.range, P_spot) + pos.collateral


def path_value_delta(pos: Position, P_oracle: float, target: float) -> float:
    """Oracle-priced asset change from moving spot from ``P_oracle`` to ``target``.

    The move is split at the range edges; only the in-range piece changes the
    composition, and each in-range piece contributes ``dx * P_oracle + dy``.
    """
    if pos.L == 0 or target == P_oracle:
        return 0.0
    rng = pos.range
    lo, hi = sorted((P_oracle, target))
    cuts = sorted({lo, hi, *(b for b in (rng.p_a, rng.p_b) if lo < b < hi)})
    if target < P_oracle:
        cuts.reverse()
    total = 0.0
    for start, end in zip(cuts, cuts[1:]):
        mid = math.sqrt(start * end)
        if not rng.contains(mid):
            continue
        total += _delta_value(pos.L, start, end, P_oracle)
    return total


def audit_position(pos: Position, P_oracle: float, manipulation_targets: Sequence[float]) -> AuditReport:
    """Measure the oracle-priced effect of moving spot to each target price.

    Debt is priced at the oracle and does not change, so the margin after a
    manipulation can only rise when the asset delta is non-negative.
    """
    if not P_oracle > 0:
        raise DomainError(f"oracle price must be > 0, got {P_oracle}")
    A0 = asset_value(pos, P_oracle)
    D = pos.debt.value(P_oracle)
    entries = []
    for target in manipulation_targets:
        if not target > 0:
            raise DomainError(f"manipulation target must be > 0, got {target}")
        delta = path_value_delta(pos, P_oracle, target)
        after = A0 + delta
        entries.append(AuditEntry(target, delta, after, after / D if D > 0 else INF))
    return AuditReport(P_oracle, A0, margin_level(pos, P_oracle), entries)
