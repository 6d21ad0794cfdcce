import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from clamp_risk import (
    BorrowPolicy,
    DomainError,
    InfeasiblePolicyError,
    Position,
    PriceRange,
    TokenAmounts,
    UserCapital,
    asset_value,
    build_position,
    debt_value,
    position_amounts,
    position_value,
)

from conftest import random_position

RNG = PriceRange(1, 4)
NEED = position_amounts(1000.0, RNG, 2.25)  # x = 1000/1.5 - 500, y = 500


class TestCapital:
    def test_rejects_negative(self):
        with pytest.raises(DomainError):
            UserCapital(-1.0, 2.0)

    def test_rejects_all_zero(self):
        with pytest.raises(DomainError):
            UserCapital(0.0, 0.0)

    def test_value(self):
        assert UserCapital(2.0, 3.0).value(5.0) == 13.0

    def test_policy_parses_from_string(self):
        assert BorrowPolicy("quote-only") is BorrowPolicy.QUOTE_ONLY
        assert not BorrowPolicy.QUOTE_ONLY.may_borrow_base
        assert not BorrowPolicy.BASE_ONLY.may_borrow_quote
        with pytest.raises(ValueError):
            BorrowPolicy("everything")


class TestBuild:
    def test_self_funded_has_no_debt(self):
        pos = build_position(UserCapital(NEED.x, NEED.y), RNG, 1000.0, 2.25)
        assert not pos.has_debt
        assert pos.collateral.x == pytest.approx(0.0, abs=1e-12)
        assert pos.collateral.y == pytest.approx(0.0, abs=1e-12)

    def test_half_capital_borrows_both(self):
        pos = build_position(UserCapital(NEED.x / 2, NEED.y / 2), RNG, 1000.0, 2.25)
        assert pos.debt.x == pytest.approx(NEED.x / 2)
        assert pos.debt.y == pytest.approx(NEED.y / 2)
        assert debt_value(pos, 2.25) == pytest.approx(875.0 / 2)

    def test_base_only(self):
        pos = build_position(UserCapital(0.0, NEED.y), RNG, 1000.0, 2.25, BorrowPolicy.BASE_ONLY)
        assert pos.debt.x == pytest.approx(NEED.x)
        assert pos.debt.y == 0.0

    def test_quote_only_with_surplus_base(self):
        pos = build_position(UserCapital(NEED.x + 10, 100.0), RNG, 1000.0, 2.25, BorrowPolicy.QUOTE_ONLY)
        assert pos.debt.x == 0.0
        assert pos.debt.y == pytest.approx(400.0)
        assert pos.collateral.x == pytest.approx(10.0)

    def test_policy_forbids_needed_borrow(self):
        with pytest.raises(InfeasiblePolicyError):
            build_position(UserCapital(1.0, 1e6), RNG, 1000.0, 2.25, BorrowPolicy.QUOTE_ONLY)
        with pytest.raises(InfeasiblePolicyError):
            build_position(UserCapital(1e6, 1.0), RNG, 1000.0, 2.25, BorrowPolicy.BASE_ONLY)

    def test_policy_accepts_string(self):
        pos = build_position(UserCapital(1.0, 1.0), RNG, 1000.0, 2.25, "both-proportional")
        assert pos.has_debt

    def test_rejects_bad_liquidity(self):
        with pytest.raises(DomainError):
            Position(-1.0, RNG)
        with pytest.raises(DomainError):
            Position(math.inf, RNG)

    def test_naked_debt_flagged(self):
        pos = Position(0.0, RNG, TokenAmounts(), TokenAmounts(1.0, 0.0), 2.0)
        assert pos.violations()
        assert not Position(0.0, RNG, TokenAmounts(0, 2), TokenAmounts(1.0, 0.0)).violations()


class TestValueEvolution:
    def test_asset_value_includes_collateral(self):
        pos = build_position(UserCapital(NEED.x + 10, 100.0), RNG, 1000.0, 2.25, BorrowPolicy.QUOTE_ONLY)
        assert asset_value(pos, 3.0) == pytest.approx(position_value(1000.0, RNG, 3.0) + 30.0)

    def test_quote_debt_is_flat(self):
        pos = build_position(UserCapital(NEED.x, 100.0), RNG, 1000.0, 2.25, BorrowPolicy.QUOTE_ONLY)
        assert debt_value(pos, 0.1) == debt_value(pos, 100.0)

    def test_both_debt_equals_hold_minus_user(self):
        cap = UserCapital(NEED.x * 0.3, NEED.y * 0.3)
        pos = build_position(cap, RNG, 1000.0, 2.25)
        for P in (0.2, 1.0, 2.25, 3.9, 40.0):
            assert debt_value(pos, P) == pytest.approx(NEED.value(P) - cap.value(P), rel=1e-12)

    def test_debt_value_domain(self):
        pos = build_position(UserCapital(1.0, 1.0), RNG, 1000.0, 2.25)
        with pytest.raises(DomainError):
            debt_value(pos, 0.0)

    @settings(max_examples=300, deadline=None)
    @given(
        L=st.floats(1.0, 1e6),
        P0=st.floats(0.05, 50.0),
        fx=st.floats(0.0, 2.0),
        fy=st.floats(0.01, 2.0),
    )
    def test_equity_at_deployment_is_user_capital(self, L, P0, fx, fy):
        rng = PriceRange(0.1, 20.0)
        need = position_amounts(L, rng, P0)
        cap = UserCapital(need.x * fx, need.y * fy + 1e-6)
        pos = build_position(cap, rng, L, P0)
        equity = asset_value(pos, P0) - debt_value(pos, P0)
        assert equity == pytest.approx(cap.value(P0), rel=1e-9, abs=1e-12 * need.value(P0))

    @settings(max_examples=200, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1), P=st.floats(1e-3, 1e3))
    def test_debt_is_linear_in_price(self, seed, P):
        pos = random_position(np.random.default_rng(seed))
        h = P * 1e-3
        second = debt_value(pos, P + h) - 2 * debt_value(pos, P) + debt_value(pos, P - h)
        assert abs(second) <= 1e-9 * max(debt_value(pos, P), 1.0)

    def test_collateral_and_debt_never_share_a_token(self):
        g = np.random.default_rng(11)
        for _ in range(2000):
            pos = random_position(g)
            assert not (pos.collateral.x > 0 and pos.debt.x > 0)
            assert not (pos.collateral.y > 0 and pos.debt.y > 0)
