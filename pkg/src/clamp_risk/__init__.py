"""Risk engine for leveraged concentrated-liquidity positions."""

from clamp_risk.clmm import (
    INF,
    PriceRange,
    SqrtPrice,
    TokenAmounts,
    divergence_loss,
    hold_value,
    position_amounts,
    position_value,
    sqrt_price,
)
from clamp_risk.errors import (
    BracketError,
    ClampRiskError,
    ConvergenceError,
    DomainError,
    InfeasiblePolicyError,
    MonotonicityError,
    NotDeleveragedError,
    PreconditionError,
    UnhealthyPositionError,
    UnsafeAtDeploymentError,
    ValidationError,
)
from clamp_risk.manipulation import (
    AuditEntry,
    AuditReport,
    SwapDelta,
    audit_position,
    swap_deltas,
    swap_value_delta,
    swap_value_delta_closed_form,
)
from clamp_risk.margin import (
    DerivativeAnalysis,
    MarginCurve,
    MarginSample,
    PriceBounds,
    check_interval_safety,
    derivative_analysis,
    inverse_prices_closed_form,
    leverage,
    margin_curve,
    margin_level,
    price_bounds,
)
from clamp_risk.position import (
    BorrowPolicy,
    Position,
    UserCapital,
    asset_value,
    build_position,
    debt_value,
)
from clamp_risk.protocol import (
    CreationVerdict,
    InterestCurve,
    LiquidationOutcome,
    ProtocolParams,
    ReductionOutcome,
    check_creation,
    deleverage,
    interest_rate,
    liquidate,
    liquidation_fraction,
    reduce,
)
from clamp_risk.simulation import Action, SimulationStep, SimulationTrace, simulate
from clamp_risk.solver import (
    RangeFactor,
    SolverConfig,
    interval_from_factor,
    max_safe_liquidity,
    self_funded_liquidity,
    solve_endpoint_liquidity,
)

__version__ = "0.1.0"
