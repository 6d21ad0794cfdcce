import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from clamp_risk import (
    INF,
    BorrowPolicy,
    DomainError,
    Position,
    PreconditionError,
    PriceRange,
    TokenAmounts,
    UnsafeAtDeploymentError,
    UserCapital,
    build_position,
    check_interval_safety,
    derivative_analysis,
    inverse_prices_closed_form,
    leverage,
    margin_curve,
    margin_level,
    position_amounts,
    price_bounds,
)

from conftest import margin_grid_np, random_position

RNG = PriceRange(1, 4)
NEED = position_amounts(1000.0, RNG, 2.25)


def example_position():
    # Half-funded on [1, 4] at 2.25, debt in both tokens.
    return build_position(UserCapital(100.0, 300.0), RNG, 1000.0, 2.25)


def bisect_oracle(pos, m, lo, hi, iters=200):
    """Plain bisection on the vectorised oracle; lo and hi must bracket m."""
    f_lo = margin_grid_np(pos, [lo])[0] - m
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if (margin_grid_np(pos, [mid])[0] - m > 0) == (f_lo > 0):
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


class TestMarginLevel:
    def test_no_debt_is_infinite(self):
        pos = build_position(UserCapital(NEED.x, NEED.y), RNG, 1000.0, 2.25)
        assert margin_level(pos, 2.25) == INF

    def test_ratio(self):
        pos = Position(0.0, RNG, TokenAmounts(0.0, 150.0), TokenAmounts(0.0, 100.0))
        assert margin_level(pos, 3.0) == pytest.approx(1.5)

    def test_example_value(self):
        # A = 875 + 0, D = 875 - (100 * 2.25 + 300) = 350.
        assert margin_level(example_position(), 2.25) == pytest.approx(2.5, rel=1e-14)

    def test_matches_oracle(self):
        g = np.random.default_rng(3)
        for _ in range(500):
            pos = random_position(g)
            P = np.exp(g.uniform(-5, 5, size=20)) * pos.p0
            want = margin_grid_np(pos, P)
            got = np.array([margin_level(pos, p) for p in P])
            np.testing.assert_allclose(got, want, rtol=1e-9)


class TestLeverage:
    def test_values(self):
        assert leverage(1.5) == pytest.approx(3.0)
        assert leverage(2.0) == pytest.approx(2.0)
        assert leverage(INF) == 1.0

    def test_undefined_at_or_below_one(self):
        for M in (1.0, 0.5, -2.0):
            with pytest.raises(DomainError):
                leverage(M)

    @given(a=st.floats(1.0001, 1e6), b=st.floats(1.0001, 1e6))
    def test_decreasing(self, a, b):
        if a < b:
            assert leverage(a) > leverage(b)


class TestDerivative:
    def test_example_roots(self):
        da = derivative_analysis(example_position())
        assert da.A < 0 and da.C >= 0
        assert da.s1 == pytest.approx(-2.0)
        assert da.s2 == pytest.approx(1.5)

    def test_full_range_no_collateral(self):
        pos = build_position(UserCapital(1.0, 1.0), PriceRange.full(), 10.0, 1.0)
        da = derivative_analysis(pos)
        assert da.a == 0.0 and da.c == 0.0

    def test_base_only_debt_has_root_at_zero(self):
        pos = build_position(UserCapital(0.0, NEED.y), RNG, 1000.0, 2.25, BorrowPolicy.BASE_ONLY)
        da = derivative_analysis(pos)
        assert da.C == 0.0
        assert min(abs(da.s1), abs(da.s2)) == 0.0

    def test_preconditions(self):
        quote = build_position(UserCapital(NEED.x, 10.0), RNG, 1000.0, 2.25, BorrowPolicy.QUOTE_ONLY)
        with pytest.raises(PreconditionError):
            derivative_analysis(quote)
        with pytest.raises(PreconditionError):
            derivative_analysis(Position(0.0, RNG, TokenAmounts(), TokenAmounts(1.0, 1.0)))

    def test_smaller_root_never_positive(self):
        g = np.random.default_rng(5)
        for _ in range(1000):
            pos = random_position(g, policy=BorrowPolicy.BOTH_PROPORTIONAL, in_range=True)
            if pos.debt.x == 0:
                continue
            da = derivative_analysis(pos)
            assert da.A < 0
            assert da.C >= 0
            assert da.s1 <= 0

    def test_single_peak_in_range(self):
        # No interior minimum: in-range M rises then falls at most once.
        g = np.random.default_rng(6)
        for _ in range(300):
            pos = random_position(g, in_range=True)
            lo = max(pos.range.p_a, pos.p0 * 1e-3)
            hi = min(pos.range.p_b, pos.p0 * 1e3)
            m = margin_grid_np(pos, np.geomspace(lo, hi, 400)[1:-1])
            if not np.all(np.isfinite(m)):
                continue
            d = np.sign(np.diff(m))
            d = d[d != 0]
            assert np.count_nonzero(np.diff(d) > 0) == 0


class TestIntervalSafety:
    def test_example(self):
        pos = example_position()
        assert check_interval_safety(pos, 1.5, 3.0, 1.2)
        assert not check_interval_safety(pos, 0.1, 3.0, 1.2)

    def test_rejects_bad_interval(self):
        with pytest.raises(DomainError):
            check_interval_safety(example_position(), 3.0, 1.0, 1.2)

    def test_endpoint_verdict_matches_grid_scan(self):
        g = np.random.default_rng(8)
        checked = 0
        for _ in range(600):
            pos = random_position(g)
            lo = pos.p0 / math.exp(g.uniform(0.01, 2))
            hi = pos.p0 * math.exp(g.uniform(0.01, 2))
            M_L = g.uniform(1.02, 1.6)
            scan = margin_grid_np(pos, np.geomspace(lo, hi, 2000)).min()
            if abs(scan - M_L) < 1e-6 * M_L:
                continue
            assert check_interval_safety(pos, lo, hi, M_L) == (scan >= M_L)
            checked += 1
        assert checked > 500


class TestPriceBounds:
    def test_example(self):
        pos = example_position()
        b = price_bounds(pos, 1.1)
        assert b.p_low == pytest.approx(0.515625, rel=1e-12)
        assert margin_level(pos, b.p_high) == pytest.approx(1.1, rel=1e-12)
        assert margin_level(pos, b.p_low) == pytest.approx(1.1, rel=1e-12)

    def test_no_debt(self):
        pos = build_position(UserCapital(NEED.x, NEED.y), RNG, 1000.0, 2.25)
        b = price_bounds(pos, 1.1)
        assert b.unbounded_below and b.unbounded_above

    def test_unsafe_at_deployment(self):
        with pytest.raises(UnsafeAtDeploymentError):
            price_bounds(example_position(), 2.6)

    def test_quote_debt_unbounded_above(self):
        # Above p_b: M = (1000 + 10 P) / 400, rising, so no upper crossing.
        pos = build_position(UserCapital(NEED.x + 10, 100.0), RNG, 1000.0, 2.25, BorrowPolicy.QUOTE_ONLY)
        b = price_bounds(pos, 1.2)
        assert b.p_high == INF
        assert 0 < b.p_low < 2.25
        assert margin_level(pos, b.p_low) == pytest.approx(1.2, rel=1e-9)

    def test_base_debt_unbounded_below(self):
        pos = build_position(UserCapital(0.0, NEED.y + 50), RNG, 1000.0, 2.25, BorrowPolicy.BASE_ONLY)
        b = price_bounds(pos, 1.2)
        # Below p_a both assets and debt are pure base plus a quote cushion.
        assert b.p_low == 0.0
        assert margin_level(pos, b.p_high) == pytest.approx(1.2, rel=1e-9)

    def test_matches_bisection_oracle(self):
        g = np.random.default_rng(9)
        done = 0
        while done < 300:
            pos = random_position(g)
            M0 = margin_level(pos, pos.p0)
            if not (math.isfinite(M0) and M0 > 1.05):
                continue
            m = 1 + (M0 - 1) * g.uniform(0.1, 0.9)
            b = price_bounds(pos, m)
            if b.p_low > 0:
                # The crossing nearest p0 from below.
                grid = np.geomspace(b.p_low * 0.999, pos.p0, 4000)
                assert margin_grid_np(pos, grid[grid > b.p_low * (1 + 1e-9)]).min() >= m * (1 - 1e-9)
                want = bisect_oracle(pos, m, b.p_low * 0.999, b.p_low * 1.001)
                assert b.p_low == pytest.approx(want, rel=1e-8)
            if b.p_high < INF:
                grid = np.geomspace(pos.p0, b.p_high * 1.001, 4000)
                assert margin_grid_np(pos, grid[grid < b.p_high * (1 - 1e-9)]).min() >= m * (1 - 1e-9)
                want = bisect_oracle(pos, m, b.p_high * 0.999, b.p_high * 1.001)
                assert b.p_high == pytest.approx(want, rel=1e-8)
            done += 1

    @settings(max_examples=200, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1), frac=st.floats(0.05, 0.95))
    def test_round_trip(self, seed, frac):
        pos = random_position(np.random.default_rng(seed))
        M0 = margin_level(pos, pos.p0)
        if not math.isfinite(M0) or M0 <= 1.0001:
            return
        m = 1 + (M0 - 1) * frac
        b = price_bounds(pos, m)
        assert b.p_low < pos.p0 < b.p_high
        for p in (b.p_low, b.p_high):
            if 0 < p < INF:
                assert margin_level(pos, p) == pytest.approx(m, rel=1e-7)


class TestClosedForm:
    def test_contains_true_crossing(self):
        g = np.random.default_rng(10)
        for _ in range(1000):
            pos = random_position(g, in_range=True)
            if pos.range.p_b == INF or not pos.has_debt:
                continue
            P = math.exp(g.uniform(math.log(max(pos.range.p_a, 1e-300)), math.log(pos.range.p_b)))
            P = min(max(P, pos.range.p_a * 1.001), pos.range.p_b * 0.999)
            m = margin_level(pos, P)
            roots = [r for r in inverse_prices_closed_form(pos, m) if r is not None]
            assert any(abs(r - P) <= 1e-6 * P for r in roots)

    def test_infinite_upper_bound_rejected(self):
        pos = build_position(UserCapital(1.0, 1.0), PriceRange.full(), 10.0, 1.0)
        with pytest.raises(DomainError):
            inverse_prices_closed_form(pos, 1.2)


class TestMarginCurve:
    def test_samples_and_bounds(self):
        pos = example_position()
        grid = np.geomspace(0.2, 20, 50)
        c = margin_curve(pos, grid, 1.1)
        assert len(c.samples) == 50
        assert c.samples[10].M == pytest.approx(margin_level(pos, grid[10]))
        assert c.bounds.p_low == pytest.approx(0.515625)
        assert [s.in_range for s in c.samples] == [bool(1 < p < 4) for p in grid]

    def test_singleton_grid(self):
        c = margin_curve(example_position(), [2.25])
        assert c.samples[0].M == pytest.approx(2.5)
        assert c.bounds is None

    def test_unsafe_threshold_drops_bounds(self):
        assert margin_curve(example_position(), [2.25], 3.0).bounds is None

    def test_grid_must_increase(self):
        with pytest.raises(DomainError):
            margin_curve(example_position(), [1.0, 1.0])
        with pytest.raises(DomainError):
            margin_curve(example_position(), [0.0, 1.0])

    def test_continuous_across_range_bounds(self):
        pos = example_position()
        for edge in (1.0, 4.0):
            c = margin_curve(pos, [edge * (1 - 1e-10), edge, edge * (1 + 1e-10)])
            ms = [s.M for s in c.samples]
            assert max(ms) - min(ms) < 1e-8
