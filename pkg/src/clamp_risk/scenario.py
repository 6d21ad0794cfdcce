"""
Scenario files: a JSON description of a position, protocol parameters, and
the analyses to run on it.

Loading happens in two phases. :func:`parse_scenario` checks structure and
types and raises :class:`ParseError` naming the offending field.
:meth:`ScenarioConfig.violations` then checks every domain invariant and
collects all failures, so a single run reports everything that is wrong.

Example::

    {
      "name": "volatile",
      "position": {
        "range": {"p_a": 0.5, "p_b": 2.0},
        "p0": 1.0,
        "capital": {"x": 100.0, "y": 100.0},
        "policy": "both-proportional",
        "liquidity": "solve",
        "solve": {"range_factor": 1.5}
      },
      "params": {"M_L": 1.1, "M_T": 1.25, "beta": 0.05, "M_deleverage": 1.15,
                 "M_0": 1.2, "delta_p": 0.05},
      "analyses": [{"kind": "bounds", "thresholds": [1.1, 1.15]}],
      "output": {"format": "both"}
    }
"""

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

from clamp_risk.clmm import INF, PriceRange
from clamp_risk.errors import ClampRiskError, ValidationError
from clamp_risk.position import BorrowPolicy, Position, UserCapital, build_position
from clamp_risk.protocol import ProtocolParams
from clamp_risk.solver import SolverConfig, interval_from_factor, max_safe_liquidity

ANALYSIS_KINDS = (
    "check-create",
    "margin-curve",
    "bounds",
    "max-liquidity",
    "simulate",
    "audit-manipulation",
)
FORMATS = ("json", "csv", "both")


class ParseError(ClampRiskError, ValueError):
    """Malformed scenario file; ``location`` is a dotted field path."""

    def __init__(self, location: str, message: str):
        self.location = location
        super().__init__(f"{location}: {message}")


def _num(value: Any, where: str, allow_inf: bool = False) -> float:
    if isinstance(value, bool):
        raise ParseError(where, "expected a number, got a boolean")
    if isinstance(value, (int, float)):
        return float(value)
    if allow_inf and isinstance(value, str) and value.lower() in ("inf", "infinity"):
        return INF
    raise ParseError(where, f"expected a number, got {value!r}")


def _get(d: Dict, key: str, where: str, required: bool = True, default: Any = None) -> Any:
    if not isinstance(d, dict):
        raise ParseError(where, "expected an object")
    if key not in d:
        if required:
            raise ParseError(f"{where}.{key}" if where else key, "missing required field")
        return default
    return d[key]


def _num_list(value: Any, where: str) -> List[float]:
    if not isinstance(value, list):
        raise ParseError(where, "expected a list of numbers")
    return [_num(v, f"{where}[{i}]") for i, v in enumerate(value)]


@dataclass
class GridSpec:
    points: Optional[List[float]] = None
    start: float = 0.0
    stop: float = 0.0
    num: int = 0
    spacing: str = "geometric"

    def violations(self, where: str) -> List[str]:
        if self.points is not None:
            if not self.points:
                return [f"{where}: grid is empty"]
            if any(not p > 0 for p in self.points):
                return [f"{where}: grid prices must be > 0"]
            if any(b <= a for a, b in zip(self.points, self.points[1:])):
                return [f"{where}: grid must be strictly increasing"]
            return []
        out = []
        if not 0 < self.start < self.stop:
            out.append(f"{where}: need 0 < start < stop")
        if self.num < 2:
            out.append(f"{where}: num must be >= 2")
        if self.spacing not in ("geometric", "linear"):
            out.append(f"{where}: spacing must be 'geometric' or 'linear'")
        return out

    def prices(self) -> List[float]:
        if self.points is not None:
            return list(self.points)
        n = self.num
        if self.spacing == "linear":
            step = (self.stop - self.start) / (n - 1)
            return [self.start + i * step for i in range(n - 1)] + [self.stop]
        ratio = math.log(self.stop / self.start) / (n - 1)
        return [self.start * math.exp(i * ratio) for i in range(n - 1)] + [self.stop]


@dataclass
class AnalysisRequest:
    kind: str
    where: str
    thresholds: List[float] = field(default_factory=list)
    grid: Optional[GridSpec] = None
    threshold: Optional[float] = None
    range_factor: Optional[float] = None
    interval: Optional[Tuple[float, float]] = None
    margin: Optional[float] = None
    solver: SolverConfig = field(default_factory=SolverConfig)
    path: List[float] = field(default_factory=list)
    admin_failure: bool = False
    targets: List[float] = field(default_factory=list)
    oracle_price: Optional[float] = None
    current_global_l: float = 0.0


@dataclass
class PositionSpec:
    rng: Tuple[float, float]
    p0: float
    capital: Tuple[float, float]
    policy: str
    liquidity: Optional[float]  # None means solve
    solve: Optional[AnalysisRequest] = None


@dataclass
class ScenarioConfig:
    name: str
    position: PositionSpec
    params: ProtocolParams
    analyses: List[AnalysisRequest]
    output_format: str = "both"

    def violations(self) -> List[str]:
        out = [f"params: {v}" for v in self.params.violations()]
        ps = self.position
        rng = cap = None
        try:
            rng = PriceRange(*ps.rng)
        except ClampRiskError as e:
            out.append(f"position.range: {e}")
        if not (ps.p0 > 0 and math.isfinite(ps.p0)):
            out.append(f"position.p0: must be positive and finite, got {ps.p0}")
        try:
            cap = UserCapital(*ps.capital)
        except ClampRiskError as e:
            out.append(f"position.capital: {e}")
        if ps.policy not in {p.value for p in BorrowPolicy}:
            out.append(f"position.policy: unknown policy {ps.policy!r}")
        if ps.liquidity is None:
            if ps.solve is None:
                out.append("position.solve: required when liquidity is 'solve'")
            else:
                out.extend(self._solver_violations(ps.solve))
        elif not (ps.liquidity >= 0 and math.isfinite(ps.liquidity)):
            out.append(f"position.liquidity: must be finite and >= 0, got {ps.liquidity}")
        elif not out and rng is not None and cap is not None:
            try:
                build_position(cap, rng, ps.liquidity, ps.p0, BorrowPolicy(ps.policy))
            except ClampRiskError as e:
                out.append(f"position: {e}")
        for req in self.analyses:
            out.extend(self._request_violations(req))
        if self.output_format not in FORMATS:
            out.append(f"output.format: must be one of {FORMATS}, got {self.output_format!r}")
        return out

    def _solver_violations(self, req: AnalysisRequest) -> List[str]:
        out = []
        if (req.range_factor is None) == (req.interval is None):
            out.append(f"{req.where}: give exactly one of range_factor or interval")
        elif req.range_factor is not None and not req.range_factor > 1:
            out.append(f"{req.where}.range_factor: must be > 1, got {req.range_factor}")
        elif req.interval is not None and not (0 < req.interval[0] <= self.position.p0 <= req.interval[1]):
            out.append(f"{req.where}.interval: must satisfy 0 < low <= p0 <= high")
        if req.margin is not None and not req.margin > 1:
            out.append(f"{req.where}.margin: must be > 1, got {req.margin}")
        return out

    def _request_violations(self, req: AnalysisRequest) -> List[str]:
        w = req.where
        if req.kind == "margin-curve":
            out = req.grid.violations(f"{w}.grid") if req.grid else []
            if req.threshold is not None and not req.threshold > 1:
                out.append(f"{w}.threshold: must be > 1")
            return out
        if req.kind == "bounds":
            if any(not t > 1 for t in req.thresholds):
                return [f"{w}.thresholds: values must be > 1"]
            return []
        if req.kind == "max-liquidity":
            return self._solver_violations(req)
        if req.kind == "simulate":
            if any(not p > 0 for p in req.path):
                return [f"{w}.path: prices must be > 0"]
            return []
        if req.kind == "audit-manipulation":
            out = []
            if any(not p > 0 for p in req.targets):
                out.append(f"{w}.targets: prices must be > 0")
            if req.oracle_price is not None and not req.oracle_price > 0:
                out.append(f"{w}.oracle_price: must be > 0")
            return out
        if req.kind == "check-create" and not req.current_global_l >= 0:
            return [f"{w}.current_global_l: must be >= 0"]
        return []

    def validate(self) -> "ScenarioConfig":
        errs = self.violations()
        if errs:
            raise ValidationError(errs)
        return self

    def solver_interval(self, req: AnalysisRequest) -> Tuple[float, float]:
        if req.interval is not None:
            return req.interval
        return interval_from_factor(self.position.p0, req.range_factor)

    def build_with_liquidity(self, L: float) -> Position:
        ps = self.position
        return build_position(
            UserCapital(*ps.capital), PriceRange(*ps.rng), L, ps.p0, BorrowPolicy(ps.policy)
        )

    def build(self) -> Position:
        """Construct the position, solving for liquidity if requested."""
        ps = self.position
        L = ps.liquidity
        if L is None:
            req = ps.solve
            margin = req.margin if req.margin is not None else self.params.M_L
            L = max_safe_liquidity(
                UserCapital(*ps.capital),
                PriceRange(*ps.rng),
                ps.p0,
                BorrowPolicy(ps.policy),
                self.solver_interval(req),
                margin,
                req.solver,
            )
        return self.build_with_liquidity(L)

def _parse_solver_fields(d: Dict, where: str, req: AnalysisRequest):
    if "range_factor" in d:
        req.range_factor = _num(d["range_factor"], f"{where}.range_factor")
    if "interval" in d:
        iv = _num_list(d["interval"], f"{where}.interval")
        if len(iv) != 2:
            raise ParseError(f"{where}.interval", "expected [low, high]")
        req.interval = (iv[0], iv[1])
    if "margin" in d:
        req.margin = _num(d["margin"], f"{where}.margin")
    if "solver" in d:
        s = d["solver"]
        sw = f"{where}.solver"
        try:
            req.solver = SolverConfig(
                rel_tolerance=_num(_get(s, "rel_tolerance", sw, False, 1e-9), f"{sw}.rel_tolerance"),
                max_iterations=int(_num(_get(s, "max_iterations", sw, False, 200), f"{sw}.max_iterations")),
                bracket_growth=_num(_get(s, "bracket_growth", sw, False, 2.0), f"{sw}.bracket_growth"),
            )
        except ClampRiskError as e:
            if isinstance(e, ParseError):
                raise
            raise ParseError(sw, str(e))


def _parse_grid(g: Any, where: str) -> GridSpec:
    if isinstance(g, list):
        return GridSpec(points=_num_list(g, where))
    if not isinstance(g, dict):
        raise ParseError(where, "expected a list of prices or {start, stop, num}")
    num = _num(_get(g, "num", where), f"{where}.num")
    if num != int(num):
        raise ParseError(f"{where}.num", "expected an integer")
    spacing = _get(g, "spacing", where, False, "geometric")
    if not isinstance(spacing, str):
        raise ParseError(f"{where}.spacing", "expected a string")
    return GridSpec(
        start=_num(_get(g, "start", where), f"{where}.start"),
        stop=_num(_get(g, "stop", where), f"{where}.stop"),
        num=int(num),
        spacing=spacing,
    )


def _parse_request(d: Any, where: str) -> AnalysisRequest:
    kind = _get(d, "kind", where)
    if kind not in ANALYSIS_KINDS:
        raise ParseError(f"{where}.kind", f"unknown analysis kind {kind!r}; expected one of {ANALYSIS_KINDS}")
    req = AnalysisRequest(kind=kind, where=where)
    if kind == "margin-curve":
        if "grid" in d:
            req.grid = _parse_grid(d["grid"], f"{where}.grid")
        if "threshold" in d:
            req.threshold = _num(d["threshold"], f"{where}.threshold")
    elif kind == "bounds":
        if "thresholds" in d:
            req.thresholds = _num_list(d["thresholds"], f"{where}.thresholds")
    elif kind == "max-liquidity":
        _parse_solver_fields(d, where, req)
    elif kind == "simulate":
        req.path = _num_list(_get(d, "path", where), f"{where}.path")
        af = d.get("admin_failure", False)
        if not isinstance(af, bool):
            raise ParseError(f"{where}.admin_failure", "expected a boolean")
        req.admin_failure = af
    elif kind == "audit-manipulation":
        req.targets = _num_list(_get(d, "targets", where), f"{where}.targets")
        if "oracle_price" in d:
            req.oracle_price = _num(d["oracle_price"], f"{where}.oracle_price")
    elif kind == "check-create":
        req.current_global_l = _num(d.get("current_global_l", 0.0), f"{where}.current_global_l")
    return req


def _parse_params(d: Any) -> ProtocolParams:
    w = "params"
    full = _get(d, "full_liq_below", w, False)
    return ProtocolParams(
        M_L=_num(_get(d, "M_L", w), "params.M_L"),
        M_T=_num(_get(d, "M_T", w), "params.M_T"),
        beta=_num(_get(d, "beta", w), "params.beta"),
        M_deleverage=_num(_get(d, "M_deleverage", w), "params.M_deleverage"),
        M_0=_num(_get(d, "M_0", w), "params.M_0"),
        delta_p=_num(_get(d, "delta_p", w), "params.delta_p"),
        max_position_l=_num(_get(d, "max_position_l", w, False, INF), "params.max_position_l", True),
        max_global_l=_num(_get(d, "max_global_l", w, False, INF), "params.max_global_l", True),
        full_liq_below=None if full is None else _num(full, "params.full_liq_below"),
    )


def _parse_position(d: Any) -> PositionSpec:
    w = "position"
    r = _get(d, "range", w)
    c = _get(d, "capital", w)
    liq = _get(d, "liquidity", w)
    solve = None
    if liq == "solve":
        liquidity = None
        s = _get(d, "solve", w, False)
        if s is not None:
            solve = AnalysisRequest(kind="solve", where="position.solve")
            _parse_solver_fields(s, "position.solve", solve)
    else:
        liquidity = _num(liq, "position.liquidity")
    policy = _get(d, "policy", w, False, BorrowPolicy.BOTH_PROPORTIONAL.value)
    if not isinstance(policy, str):
        raise ParseError("position.policy", "expected a string")
    return PositionSpec(
        rng=(
            _num(_get(r, "p_a", "position.range"), "position.range.p_a"),
            _num(_get(r, "p_b", "position.range"), "position.range.p_b", allow_inf=True),
        ),
        p0=_num(_get(d, "p0", w), "position.p0"),
        capital=(
            _num(_get(c, "x", "position.capital"), "position.capital.x"),
            _num(_get(c, "y", "position.capital"), "position.capital.y"),
        ),
        policy=policy,
        liquidity=liquidity,
        solve=solve,
    )


def parse_scenario(data: Any, default_name: str = "scenario") -> ScenarioConfig:
    """Build a :class:`ScenarioConfig` from decoded JSON."""
    if not isinstance(data, dict):
        raise ParseError("<root>", "expected a JSON object")
    name = data.get("name", default_name)
    if not isinstance(name, str):
        raise ParseError("name", "expected a string")
    analyses = _get(data, "analyses", "", False, [])
    if not isinstance(analyses, list):
        raise ParseError("analyses", "expected a list")
    output = _get(data, "output", "", False, {})
    fmt = _get(output, "format", "output", False, "both")
    return ScenarioConfig(
        name=name,
        position=_parse_position(_get(data, "position", "")),
        params=_parse_params(_get(data, "params", "")),
        analyses=[_parse_request(a, f"analyses[{i}]") for i, a in enumerate(analyses)],
        output_format=fmt,
    )


def load_scenario(path) -> ScenarioConfig:
    """Read and parse a scenario file (no invariant validation)."""
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ParseError(f"line {e.lineno} column {e.colno}", e.msg) from None
    return parse_scenario(data, default_name=Path(path).stem)
