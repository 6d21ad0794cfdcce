"""
Price-path simulation of the admin deleverage and permissionless liquidation flow.

At each price the admin deleverages a position whose margin fell below
``M_deleverage``. A fully deleveraged position whose margin is below ``M_L``
is then liquidated. With ``admin_failure`` set, the admin never acts;
liquidators deleverage a position themselves once it drops below ``M_L`` and
liquidate it in the same step if it is still below ``M_L``.
"""

from dataclasses import dataclass, field
from typing import List, Optional, Sequence

from clamp_risk.errors import DomainError
from clamp_risk.margin import margin_level
from clamp_risk.position import Position
from clamp_risk.protocol import LiquidationOutcome, ProtocolParams, deleverage, liquidate


@dataclass(frozen=True)
class Action:
    kind: str  # "deleverage" or "liquidate"
    actor: str  # "admin" or "liquidator"
    repaid: float
    bonus: float = 0.0
    bad_debt: float = 0.0
    margin_after: Optional[float] = None
    liquidation: Optional[LiquidationOutcome] = None


@dataclass(frozen=True)
class SimulationStep:
    step: int
    price: float
    margin: float
    actions: List[Action]
    margin_after: Optional[float]
    cumulative_bad_debt: float


@dataclass
class SimulationTrace:
    steps: List[SimulationStep] = field(default_factory=list)
    final_position: Optional[Position] = None
    admin_failure: bool = False

    @property
    def bad_debt(self) -> float:
        return self.steps[-1].cumulative_bad_debt if self.steps else 0.0

    def events(self):
        """``(step, action)`` pairs in execution order."""
        return [(s.step, a) for s in self.steps for a in s.actions]


def simulate(
    pos: Position,
    path: Sequence[float],
    params: ProtocolParams,
    admin_failure: bool = False,
) -> SimulationTrace:
    trace = SimulationTrace(admin_failure=admin_failure)
    bad_debt = 0.0
    for i, P in enumerate(path):
        if not P > 0:
            raise DomainError(f"path price at step {i} must be > 0, got {P}")
        M = margin_level(pos, P)
        actions = []
        if pos.L > 0 and pos.has_debt:
            trigger = params.M_L if admin_failure else params.M_deleverage
            if M < trigger:
                pos, repaid = deleverage(pos, P)
                actor = "liquidator" if admin_failure else "admin"
                actions.append(Action("deleverage", actor, repaid, margin_after=_post(pos, P)))
        if pos.L == 0 and pos.has_debt and margin_level(pos, P) < params.M_L:
            pos, out = liquidate(pos, P, params)
            bad_debt += out.bad_debt
            actions.append(
                Action("liquidate", "liquidator", out.v_repaid, out.v_bonus, out.bad_debt,
                       out.post_margin, out)
            )
        trace.steps.append(SimulationStep(i, P, M, actions, _post(pos, P), bad_debt))
    trace.final_position = pos
    return trace


def _post(pos: Position, P: float) -> Optional[float]:
    # No margin exists once both assets and debt are gone.
    if not pos.has_debt and pos.L == 0 and pos.collateral.is_zero:
        return None
    return margin_level(pos, P)
