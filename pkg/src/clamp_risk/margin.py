"""
Margin level, leverage, derivative analysis, and inverse price bounds.

The margin level is ``M(P) = A(P) / D(P)``. Outside the range both assets and
debt are linear in P, so M is a ratio of linear functions there. Inside the
range, with ``S = sqrt(P)``::

    M(S) = (a S^2 + b S + c) / (d S^2 + e)
    a = x_C - L / S_b,  b = 2L,  c = y_C - L S_a,  d = x_D,  e = y_D

M has no local minimum for S > 0, so on any interval it attains its minimum at
an endpoint. That is what makes endpoint checks and bisection sound.
"""

import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

from clamp_risk.clmm import INF, PriceRange
from clamp_risk.errors import DomainError, PreconditionError, UnsafeAtDeploymentError
from clamp_risk.position import Position, asset_value, debt_value

# Relative slack when deciding whether a computed root lies inside a segment.
_SEGMENT_TOL = 1e-12
# Below this, the squared-root denominator of the closed form counts as zero.
_DEGENERATE_DEN = 1e-300


@dataclass(frozen=True)
class MarginSample:
    P: float
    M: float
    in_range: bool = False


@dataclass(frozen=True)
class PriceBounds:
    """Prices where margin first reaches the threshold below/above ``p0``.

    ``p_low == 0.0`` and ``p_high == INF`` mean no crossing on that side.
    """

    p_low: float
    p_high: float

    @property
    def unbounded_below(self) -> bool:
        return self.p_low == 0.0

    @property
    def unbounded_above(self) -> bool:
        return self.p_high == INF


@dataclass(frozen=True)
class DerivativeAnalysis:
    """Coefficients of the in-range margin function and its derivative numerator.

    ``s1`` is the negative-to-positive crossing of ``A S^2 + B S + C`` (a local
    minimum of M(S) if it were in the domain), ``s2`` the positive-to-negative
    one (local maximum).
    """

    a: float
    b: float
    c: float
    d: float
    e: float
    A: float
    B: float
    C: float
    s1: Optional[float]
    s2: Optional[float]

    @property
    def has_interior_minimum(self) -> bool:
        return self.s1 is not None and self.s1 > 0

    @property
    def peak_price(self) -> Optional[float]:
        """Price of the margin maximum of the in-range formula, if S2 > 0."""
        if self.s2 is None or self.s2 <= 0:
            return None
        return self.s2 * self.s2


@dataclass(frozen=True)
class MarginCurve:
    samples: List[MarginSample]
    threshold: Optional[float] = None
    bounds: Optional[PriceBounds] = None
    range: Optional[PriceRange] = None


def margin_level(pos: Position, P: float) -> float:
    """``A(P) / D(P)``, or ``INF`` when the position carries no debt."""
    D = debt_value(pos, P)
    if D == 0:
        return INF
    return asset_value(pos, P) / D


def leverage(M: float) -> float:
    """Leverage factor ``1 + 1 / (M - 1)`` for margin level ``M > 1``."""
    if M == INF:
        return 1.0
    if not M > 1:
        raise DomainError(f"leverage undefined for margin level {M} <= 1")
    return 1.0 + 1.0 / (M - 1.0)


def _quadratic_roots(A: float, B: float, C: float) -> Tuple[Optional[float], Optional[float]]:
    # Cancellation-free form; roots returned ascending.
    disc = B * B - 4.0 * A * C
    if disc < 0:
        return None, None
    sq = math.sqrt(disc)
    q = -0.5 * (B + math.copysign(sq, B))
    if q == 0:
        return 0.0, 0.0
    r1, r2 = q / A, C / q
    return (r1, r2) if r1 <= r2 else (r2, r1)


def derivative_analysis(pos: Position) -> DerivativeAnalysis:
    """Coefficients and critical points of the in-range margin function.

    Raises:
        PreconditionError: if the position has no liquidity or no base-token
            debt (those cases are monotone and need no quadratic analysis).
    """
    if pos.L == 0:
        raise PreconditionError("derivative analysis needs L > 0")
    if pos.debt.x == 0:
        raise PreconditionError("derivative analysis needs x_D > 0")
    L = pos.L
    a = pos.collateral.x - L / pos.range.sqrt_b
    b = 2.0 * L
    c = pos.collateral.y - L * pos.range.sqrt_a
    d = pos.debt.x
    e = pos.debt.y
    A = -b * d
    B = 2.0 * (a * e - c * d)
    C = b * e
    # A < 0, so the smaller root is where the numerator turns positive.
    s1, s2 = _quadratic_roots(A, B, C)
    return DerivativeAnalysis(a, b, c, d, e, A, B, C, s1, s2)


def check_interval_safety(pos: Position, p_low: float, p_high: float, M_L: float) -> bool:
    """True iff margin is at least ``M_L`` everywhere on ``[p_low, p_high]``.

    Only the endpoints are evaluated; the absence of interior minima makes
    that sufficient.
    """
    if not (0 < p_low < p_high):
        raise DomainError(f"need 0 < p_low < p_high, got ({p_low}, {p_high})")
    return margin_level(pos, p_low) >= M_L and margin_level(pos, p_high) >= M_L


def inverse_prices_closed_form(pos: Position, M: float) -> Tuple[Optional[float], Optional[float]]:
    """In-range prices where the in-range margin formula equals ``M``.

    Price-domain closed form ``P = (N1 -/+ 2 L sqrt(N2)) / D`` for a finite upper
    bound ``p_b``. Both returned values are squares of the roots in sqrt-price
    space, so one of them can be spurious (the square of a negative root);
    callers must check membership. ``(None, None)`` when ``N2 < 0`` or ``D``
    vanishes.
    """
    L, pa, pb = pos.L, pos.range.p_a, pos.range.p_b
    if pb == INF:
        raise DomainError("price-domain closed form needs a finite p_b")
    xC, yC = pos.collateral.x, pos.collateral.y
    xD, yD = pos.debt.x, pos.debt.y
    ra, rb = math.sqrt(pa), math.sqrt(pb)
    cross = (
        -xC * yC * pb
        + xC * yD * M * pb
        + xC * L * ra * pb
        + yC * xD * M * pb
        + yC * L * rb
        - xD * yD * M * M * pb
        - xD * L * M * ra * pb
        - yD * L * M * rb
        - L * L * ra * rb
    )
    N1 = 2.0 * L * L * pb + cross
    N2 = pb * (L * L * pb + cross)
    D = (
        xC * xC * pb
        - 2.0 * xC * xD * M * pb
        - 2.0 * xC * L * rb
        + xD * xD * M * M * pb
        + 2.0 * xD * L * M * rb
        + L * L
    )
    if N2 < 0 or abs(D) < _DEGENERATE_DEN:
        return None, None
    root = 2.0 * L * math.sqrt(N2)
    return (N1 - root) / D, (N1 + root) / D


def _linear_coeffs(pos: Position, side: str) -> Tuple[float, float]:
    # A(P) = alpha * P + gamma on an out-of-range side.
    rng = pos.range
    if pos.L == 0:
        return pos.collateral.x, pos.collateral.y
    if side == "below":
        alpha = pos.L * (1.0 / rng.sqrt_a - 1.0 / rng.sqrt_b) + pos.collateral.x
        return alpha, pos.collateral.y
    return pos.collateral.x, pos.L * (rng.sqrt_b - rng.sqrt_a) + pos.collateral.y


def _linear_crossing(pos: Position, m: float, side: str) -> Optional[float]:
    alpha, gamma = _linear_coeffs(pos, side)
    slope = alpha - m * pos.debt.x
    if slope == 0:
        return None
    P = (m * pos.debt.y - gamma) / slope
    return P if P > 0 else None


def _in_range_crossings(pos: Position, m: float) -> List[float]:
    # Roots of q S^2 + 2 L S + r = 0 mapped back to prices; this is the same
    # closed form as inverse_prices_closed_form divided through by p_b, kept in
    # sqrt space so the sign of each root survives.
    L = pos.L
    q = pos.collateral.x - L / pos.range.sqrt_b - m * pos.debt.x
    r = pos.collateral.y - L * pos.range.sqrt_a - m * pos.debt.y
    disc = L * L - q * r
    if disc < 0:
        return []
    sq = math.sqrt(disc)
    roots = []
    if L + sq > 0:
        roots.append(-r / (L + sq))
    if q * q >= _DEGENERATE_DEN:
        roots.append(-(L + sq) / q)
    return [s * s for s in roots if s > 0]


def _segment_crossing(pos: Position, m: float, lo: float, hi: float, want: str) -> Optional[float]:
    """Crossing of ``M = m`` on ``[lo, hi]`` (one segment), or None.

    ``want`` is "max" when searching downward from ``hi`` and "min" when
    searching upward from ``lo``.
    """
    rng = pos.range
    if pos.L == 0 or hi <= rng.p_a:
        cands = [c for c in [_linear_crossing(pos, m, "below")] if c is not None]
    elif lo >= rng.p_b:
        cands = [c for c in [_linear_crossing(pos, m, "above")] if c is not None]
    else:
        cands = _in_range_crossings(pos, m)
    upper = hi * (1 + _SEGMENT_TOL)
    lower = lo * (1 - _SEGMENT_TOL)
    inside = [min(max(c, lo), hi) for c in cands if lower <= c <= upper]
    if not inside:
        return None
    return max(inside) if want == "max" else min(inside)


def _bisect_price(pos: Position, m: float, lo: float, hi: float, max_iter: int = 300) -> float:
    # Anchored on the sign at hi, which is always a positive price.
    hi_above = margin_level(pos, hi) > m
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if (margin_level(pos, mid) > m) == hi_above:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def _bounded_crossing(pos: Position, m: float, lo: float, hi: float, want: str) -> float:
    root = _segment_crossing(pos, m, lo, hi, want)
    if root is None:
        # Sign change is known to exist; only rounding can land here.
        root = _bisect_price(pos, m, lo, hi)
    return root


def price_bounds(pos: Position, M_L: float) -> PriceBounds:
    """Prices below and above ``p0`` where the margin level falls to ``M_L``.

    Walks outward from ``p0`` across the range breakpoints ``p_a`` and ``p_b``.
    The first breakpoint whose margin is at or below ``M_L`` brackets the
    crossing, which is then solved exactly: linearly outside the range, from
    the quadratic in ``sqrt(P)`` inside it. If no breakpoint brackets, the
    unbounded outer segment is solved, and its absence yields the sentinel.

    Raises:
        UnsafeAtDeploymentError: if ``M(p0) <= M_L``.
    """
    p0 = pos.p0
    if not pos.has_debt:
        return PriceBounds(0.0, INF)
    m0 = margin_level(pos, p0)
    if not m0 > M_L:
        raise UnsafeAtDeploymentError(
            f"margin {m0} at deployment price {p0} is not above threshold {M_L}"
        )
    rng = pos.range
    breaks = [b for b in (rng.p_a, rng.p_b) if 0 < b < INF]

    p_low = None
    hi = p0
    for b in sorted((b for b in breaks if b < p0), reverse=True):
        if margin_level(pos, b) <= M_L:
            p_low = _bounded_crossing(pos, M_L, b, hi, "max")
            break
        hi = b
    if p_low is None:
        root = _segment_crossing(pos, M_L, 0.0, hi, "max")
        p_low = 0.0 if root is None else root

    p_high = None
    lo = p0
    for b in sorted(b for b in breaks if b > p0):
        if margin_level(pos, b) <= M_L:
            p_high = _bounded_crossing(pos, M_L, lo, b, "min")
            break
        lo = b
    if p_high is None:
        root = _segment_crossing(pos, M_L, lo, INF, "min")
        p_high = INF if root is None else root

    return PriceBounds(p_low, p_high)


def margin_curve(pos: Position, grid: Sequence[float], threshold: Optional[float] = None) -> MarginCurve:
    """Sample M over a strictly increasing price grid.

    When ``threshold`` is given and the position is healthy at ``p0``, the
    curve is annotated with the price bounds for that threshold.
    """
    prev = 0.0
    for P in grid:
        if not P > prev:
            raise DomainError("grid must be positive and strictly increasing")
        prev = P
    samples = [MarginSample(P, margin_level(pos, P), pos.range.contains(P)) for P in grid]
    bounds = None
    if threshold is not None:
        try:
            bounds = price_bounds(pos, threshold)
        except UnsafeAtDeploymentError:
            bounds = None
    return MarginCurve(samples, threshold, bounds, pos.range)
