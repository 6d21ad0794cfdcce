"""
Maximum safe liquidity over a price interval by bracketed binary search.

For a fixed user capital, raising L beyond the self-funded level adds debt and
lowers the margin at any fixed price. The largest L whose margin stays at or
above the threshold at both interval endpoints is therefore found by
bisection, and the absence of interior margin minima extends the guarantee to
the whole interval.
"""

import logging
import math
from dataclasses import dataclass
from typing import Tuple

from clamp_risk.clmm import INF, PriceRange, position_amounts, position_value
from clamp_risk.errors import (
    BracketError,
    ConvergenceError,
    DomainError,
    MonotonicityError,
)
from clamp_risk.margin import margin_level
from clamp_risk.position import BorrowPolicy, UserCapital, build_position

log = logging.getLogger(__name__)

# Allowed relative increase of endpoint margin between two larger-L evaluations.
_MONOTONE_SLACK = 1e-9


@dataclass(frozen=True)
class SolverConfig:
    rel_tolerance: float = 1e-9
    max_iterations: int = 200
    bracket_growth: float = 2.0

    def __post_init__(self):
        if not self.rel_tolerance > 0:
            raise DomainError("rel_tolerance must be > 0")
        if self.max_iterations < 1:
            raise DomainError("max_iterations must be >= 1")
        if not self.bracket_growth > 1:
            raise DomainError("bracket_growth must be > 1")


@dataclass(frozen=True)
class RangeFactor:
    r: float

    def __post_init__(self):
        if not (self.r > 1 and math.isfinite(self.r)):
            raise DomainError(f"range factor must be finite and > 1, got {self.r}")


def interval_from_factor(P0: float, r) -> Tuple[float, float]:
    """Geometric interval ``(P0 / r, P0 * r)``."""
    if isinstance(r, RangeFactor):
        r = r.r
    RangeFactor(r)
    if not P0 > 0:
        raise DomainError(f"P0 must be positive, got {P0}")
    return P0 / r, P0 * r


def self_funded_liquidity(capital: UserCapital, rng: PriceRange, P0: float) -> float:
    """Largest L the user's own tokens cover at ``P0`` without borrowing."""
    unit = position_amounts(1.0, rng, P0)
    lx = capital.x_user / unit.x if unit.x > 0 else INF
    ly = capital.y_user / unit.y if unit.y > 0 else INF
    return min(lx, ly)


def _policy_cap(capital: UserCapital, rng: PriceRange, P0: float, policy: BorrowPolicy) -> float:
    # Largest L the policy can fund at all (single-sided policies cannot
    # borrow the other token).
    unit = position_amounts(1.0, rng, P0)
    if not policy.may_borrow_base and unit.x > 0:
        return capital.x_user / unit.x
    if not policy.may_borrow_quote and unit.y > 0:
        return capital.y_user / unit.y
    return INF


def solve_endpoint_liquidity(
    capital: UserCapital,
    rng: PriceRange,
    P0: float,
    policy: BorrowPolicy,
    P: float,
    M_L: float,
    cfg: SolverConfig = SolverConfig(),
) -> float:
    """Largest L with ``M(P) >= M_L`` for the position built at ``P0``."""
    policy = BorrowPolicy(policy)

    def margin_at(L):
        return margin_level(build_position(capital, rng, L, P0, policy), P)

    lo = self_funded_liquidity(capital, rng, P0)
    if lo == INF:
        # Finite capital always needs debt eventually; reaching here is a bug.
        raise AssertionError("self-funded liquidity is unbounded")
    cap = _policy_cap(capital, rng, P0, policy)
    if cap <= lo:
        return cap

    m_lo = INF
    step = lo if lo > 0 else capital.value(P0) / position_value(1.0, rng, P0)
    hi = lo + step * (cfg.bracket_growth - 1.0)
    for _ in range(cfg.max_iterations):
        if hi >= cap:
            if margin_at(cap) >= M_L:
                return cap
            hi = cap
            break
        m_hi = margin_at(hi)
        _check_monotone(m_lo, m_hi, lo, hi)
        if m_hi < M_L:
            break
        lo, m_lo = hi, m_hi
        step *= cfg.bracket_growth
        hi = lo + step
    else:
        raise BracketError(
            f"margin at P={P} stayed above {M_L} up to L={hi} after {cfg.max_iterations} steps"
        )

    for _ in range(cfg.max_iterations):
        if hi - lo <= cfg.rel_tolerance * hi:
            return lo
        mid = 0.5 * (lo + hi)
        m_mid = margin_at(mid)
        _check_monotone(m_lo, m_mid, lo, mid)
        if m_mid >= M_L:
            lo, m_lo = mid, m_mid
        else:
            hi = mid
    raise ConvergenceError(
        f"bisection did not reach rel tolerance {cfg.rel_tolerance} in {cfg.max_iterations} steps"
    )


def _check_monotone(m_small_l, m_large_l, l_small, l_large):
    if m_large_l > m_small_l * (1 + _MONOTONE_SLACK):
        log.debug("monotonicity violated: M(%r)=%r < M(%r)=%r", l_small, m_small_l, l_large, m_large_l)
        raise MonotonicityError(
            f"endpoint margin rose from {m_small_l} to {m_large_l} as L grew "
            f"from {l_small} to {l_large}; binary search is invalid"
        )


def max_safe_liquidity(
    capital: UserCapital,
    rng: PriceRange,
    P0: float,
    policy: BorrowPolicy,
    interval: Tuple[float, float],
    M_L: float,
    cfg: SolverConfig = SolverConfig(),
) -> float:
    """Largest liquidity whose margin stays at or above ``M_L`` on ``interval``.

    Solves each endpoint separately and returns the smaller liquidity.
    Single-sided policies are additionally capped by the largest liquidity
    they can fund at all.

    Raises:
        BracketError: if no failing liquidity is found within the iteration budget.
        ConvergenceError: if bisection does not converge.
        MonotonicityError: if endpoint margin is seen increasing in L.
    """
    p_low, p_high = interval
    if not (0 < p_low <= P0 <= p_high):
        raise DomainError(f"need 0 < p_low <= P0 <= p_high, got ({p_low}, {P0}, {p_high})")
    if not M_L > 1:
        raise DomainError(f"threshold must be > 1, got {M_L}")
    ends = (p_low,) if p_low == p_high else (p_low, p_high)
    return min(solve_endpoint_liquidity(capital, rng, P0, policy, P, M_L, cfg) for P in ends)

