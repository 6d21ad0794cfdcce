"""
Protocol state transitions: creation checks, reduce, deleverage, liquidate.

All transitions price conversions at the given oracle price with no slippage
or swap fee, and return new position values instead of mutating.
"""

import bisect
from dataclasses import dataclass, replace
from typing import List, Optional, Tuple

from clamp_risk.clmm import INF, TokenAmounts, position_amounts
from clamp_risk.errors import (
    DomainError,
    NotDeleveragedError,
    UnhealthyPositionError,
    ValidationError,
)
from clamp_risk.margin import margin_level
from clamp_risk.position import Position, asset_value, debt_value


@dataclass(frozen=True)
class ProtocolParams:
    """Risk parameters of the lending protocol.

    Attributes:
        M_L: Liquidation threshold.
        M_T: Target margin a partial liquidation restores.
        beta: Liquidation bonus as a fraction of repaid value.
        M_deleverage: Margin below which the admin deleverages a position.
        M_0: Minimum margin at creation.
        delta_p: Relative price offset for the creation margin check.
        max_position_l: Liquidity cap per position.
        max_global_l: Liquidity cap across the pool.
        full_liq_below: Margin below which liquidation repays all debt instead
            of restoring ``M_T``. Defaults to ``(M_L + M_C) / 2``; set it to
            ``M_C`` to liquidate strictly by the target formula.
    """

    M_L: float
    M_T: float
    beta: float
    M_deleverage: float
    M_0: float
    delta_p: float
    max_position_l: float = INF
    max_global_l: float = INF
    full_liq_below: Optional[float] = None

    @property
    def M_C(self) -> float:
        """Critical margin ``1 + beta``; below it liquidation leaves bad debt."""
        return 1.0 + self.beta

    @property
    def full_liquidation_threshold(self) -> float:
        if self.full_liq_below is None:
            return 0.5 * (self.M_L + self.M_C)
        return self.full_liq_below

    def violations(self) -> List[str]:
        out = []
        if not self.beta > 0:
            out.append(f"beta must be > 0 (1 < 1+beta), got {self.beta}")
        if not self.M_C < self.M_L:
            out.append(f"M_C = 1+beta must be < M_L, got M_C={self.M_C}, M_L={self.M_L}")
        if not self.M_L < self.M_T:
            out.append(f"M_L must be < M_T, got M_L={self.M_L}, M_T={self.M_T}")
        if not self.M_deleverage > self.M_L:
            out.append(
                f"M_deleverage must be > M_L, got M_deleverage={self.M_deleverage}, M_L={self.M_L}"
            )
        if not self.M_0 > 1:
            out.append(f"M_0 must be > 1, got {self.M_0}")
        if not 0 < self.delta_p < 1:
            out.append(f"delta_p must be in (0, 1), got {self.delta_p}")
        if not self.max_position_l > 0:
            out.append(f"max_position_l must be > 0, got {self.max_position_l}")
        if not self.max_global_l > 0:
            out.append(f"max_global_l must be > 0, got {self.max_global_l}")
        f = self.full_liquidation_threshold
        if not self.M_C <= f <= self.M_L:
            out.append(f"full_liq_below must lie in [M_C, M_L], got {f}")
        return out

    def validate(self) -> "ProtocolParams":
        errs = self.violations()
        if errs:
            raise ValidationError(errs)
        return self


@dataclass(frozen=True)
class CreationVerdict:
    violations: List[str]

    @property
    def ok(self) -> bool:
        return not self.violations


@dataclass(frozen=True)
class ReductionOutcome:
    k: float
    v_removed: float
    v_repaid: float
    v_freed: float


@dataclass(frozen=True)
class LiquidationOutcome:
    """Result of one liquidation at a fixed price.

    ``k`` is the liquidated asset fraction ``v_repaid / A``. ``post_margin`` is
    None when both assets and debt are exhausted and ``INF`` when debt is
    cleared with assets left over. ``mode`` is one of "none", "partial",
    "full", "insolvent".
    """

    k: float
    v_repaid: float
    v_bonus: float
    residual_assets: float
    residual_debt: float
    post_margin: Optional[float]
    bad_debt: float
    pre_margin: float
    mode: str


def check_creation(pos: Position, params: ProtocolParams, current_global_l: float = 0.0) -> CreationVerdict:
    """Evaluate every position-creation assertion and collect all failures."""
    out = []
    p0, rng = pos.p0, pos.range
    if not rng.p_a <= p0 <= rng.p_b:
        out.append(f"assertion 1: deployment price {p0} outside range [{rng.p_a}, {rng.p_b}]")
    lo_p = (1 - params.delta_p) * p0
    hi_p = (1 + params.delta_p) * p0
    m_delta = min(margin_level(pos, lo_p), margin_level(pos, hi_p))
    if not m_delta > params.M_L:
        out.append(
            f"assertion 2: margin {m_delta} at +/-{params.delta_p} of p0 not above M_L={params.M_L}"
        )
    m0 = margin_level(pos, p0)
    if not m0 > params.M_0:
        out.append(f"assertion 3: initial margin {m0} not above M_0={params.M_0}")
    if not pos.L <= params.max_position_l:
        out.append(f"assertion 4: L={pos.L} exceeds max_position_l={params.max_position_l}")
    if not current_global_l + pos.L <= params.max_global_l:
        out.append(
            f"assertion 5: global liquidity {current_global_l + pos.L} exceeds "
            f"max_global_l={params.max_global_l}"
        )
    return CreationVerdict(out)


def _scale(pos: Position, factor: float) -> Position:
    return replace(
        pos,
        L=pos.L * factor,
        collateral=pos.collateral.scaled(factor),
        debt=pos.debt.scaled(factor),
    )


def reduce(pos: Position, k: float, P: float, params: ProtocolParams) -> Tuple[Position, ReductionOutcome]:
    """Scale liquidity, collateral and debt by ``1 - k``; margin is unchanged.

    Raises:
        DomainError: if ``k`` is outside ``(0, 1)``.
        UnhealthyPositionError: if ``M(P) <= M_L``.
    """
    if not 0 < k < 1:
        raise DomainError(f"reduction fraction must be in (0, 1), got {k}")
    M = margin_level(pos, P)
    if not M > params.M_L:
        raise UnhealthyPositionError(f"margin {M} not above M_L={params.M_L}; cannot reduce")
    A = asset_value(pos, P)
    D = debt_value(pos, P)
    removed, repaid = k * A, k * D
    return _scale(pos, 1 - k), ReductionOutcome(k, removed, repaid, removed - repaid)


def deleverage(pos: Position, P: float) -> Tuple[Position, float]:
    """Withdraw all liquidity and repay debt per token without swapping.

    Returns the deleveraged position and the repaid value at ``P``. When the
    pre-deleverage margin is above 1, the result holds collateral in at most
    one token and debt in at most the other.
    """
    out = position_amounts(pos.L, pos.range, P)
    x = out.x + pos.collateral.x
    y = out.y + pos.collateral.y
    pay_x = min(x, pos.debt.x)
    pay_y = min(y, pos.debt.y)
    new = replace(
        pos,
        L=0.0,
        collateral=TokenAmounts(x - pay_x, y - pay_y),
        debt=TokenAmounts(pos.debt.x - pay_x, pos.debt.y - pay_y),
    )
    return new, pay_x * P + pay_y


def liquidation_fraction(M: float, params: ProtocolParams) -> float:
    """Fraction of assets to liquidate so that the remainder sits at ``M_T``."""
    if M >= params.M_L:
        return 0.0
    if M > params.M_C:
        return (params.M_T - M) / ((params.M_T - params.M_C) * M)
    return 1.0 / (1.0 + params.beta)


def _is_deleveraged(pos: Position) -> bool:
    c, d = pos.collateral, pos.debt
    return pos.L == 0 and not (c.x > 0 and d.x > 0) and not (c.y > 0 and d.y > 0)


def liquidate(pos: Position, P: float, params: ProtocolParams) -> Tuple[Position, LiquidationOutcome]:
    """Liquidate a fully deleveraged position at oracle price ``P``.

    Below ``M_C`` the bonus ``beta * D`` is paid first and whatever assets
    remain repay debt; the unpaid debt is reported as bad debt and written
    off the returned position. If assets cannot cover even the bonus, all of
    them go to the liquidator.

    Raises:
        NotDeleveragedError: if liquidity is still deployed or a token is held
            both as collateral and as debt.
    """
    if not _is_deleveraged(pos):
        raise NotDeleveragedError("only fully deleveraged positions can be liquidated")
    A = asset_value(pos, P)
    D = debt_value(pos, P)
    M = margin_level(pos, P)
    beta = params.beta

    if D == 0 or M >= params.M_L:
        return pos, LiquidationOutcome(0.0, 0.0, 0.0, A, D, M, 0.0, M, "none")

    if M <= params.M_C:
        bonus = min(beta * D, A)
        repaid = A - bonus
        bad = D - repaid if M < params.M_C else 0.0
        emptied = replace(pos, collateral=TokenAmounts(), debt=TokenAmounts())
        k = repaid / A if A > 0 else 0.0
        return emptied, LiquidationOutcome(k, repaid, bonus, 0.0, 0.0, None, max(bad, 0.0), M, "insolvent")

    if M < params.full_liquidation_threshold:
        repaid = D
        mode = "full"
    else:
        repaid = min(liquidation_fraction(M, params) * A, D)
        mode = "partial"
    bonus = beta * repaid
    rest_a = A - repaid - bonus
    rest_d = D - repaid
    new = replace(
        pos,
        collateral=pos.collateral.scaled(rest_a / A),
        debt=pos.debt.scaled(rest_d / D),
    )
    post = rest_a / rest_d if rest_d > 0 else INF
    return new, LiquidationOutcome(repaid / A, repaid, bonus, rest_a, rest_d, post, 0.0, M, mode)


@dataclass(frozen=True)
class InterestCurve:
    """Piecewise-linear borrow rate over utilization.

    ``knots`` are ``(utilization, rate)`` pairs with utilization strictly
    increasing from 0 to 1 and rates non-decreasing.
    """

    knots: Tuple[Tuple[float, float], ...]

    def __post_init__(self):
        knots = tuple((float(u), float(r)) for u, r in self.knots)
        object.__setattr__(self, "knots", knots)
        if len(knots) < 2:
            raise DomainError("interest curve needs at least two knots")
        us = [u for u, _ in knots]
        rs = [r for _, r in knots]
        if us[0] != 0.0 or us[-1] != 1.0:
            raise DomainError("interest curve knots must span utilization 0 to 1")
        if any(b <= a for a, b in zip(us, us[1:])):
            raise DomainError("interest curve utilizations must be strictly increasing")
        if any(b < a for a, b in zip(rs, rs[1:])):
            raise DomainError("interest curve rates must be non-decreasing")

    @classmethod
    def kinked(cls, base: float, kink: float, rate_at_kink: float, max_rate: float) -> "InterestCurve":
        return cls(((0.0, base), (kink, rate_at_kink), (1.0, max_rate)))


def interest_rate(utilization: float, curve: InterestCurve) -> float:
    """Annualized borrow rate at ``utilization`` by linear interpolation."""
    if not 0 <= utilization <= 1:
        raise DomainError(f"utilization must be in [0, 1], got {utilization}")
    us = [u for u, _ in curve.knots]
    i = bisect.bisect_right(us, utilization)
    if i == len(us):
        return curve.knots[-1][1]
    (u0, r0), (u1, r1) = curve.knots[i - 1], curve.knots[i]
    if utilization == u0:
        return r0
    return r0 + (r1 - r0) * (utilization - u0) / (u1 - u0)
