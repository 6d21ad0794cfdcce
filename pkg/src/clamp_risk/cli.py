"""
Batch command line front end.

    clamp-risk <verb> --scenario FILE [--out DIR] [--format json|csv|both] [--admin-failure]

``run`` executes every analysis listed in the scenario; the other verbs run
only the analyses of their kind. Command line flags override the file.

Exit codes: 0 ok, 2 parse error, 3 validation error, 4 analysis error.
"""

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

from clamp_risk.clmm import INF
from clamp_risk.errors import ClampRiskError, ValidationError
from clamp_risk.manipulation import audit_position
from clamp_risk.margin import margin_curve, margin_level, price_bounds
from clamp_risk.position import Position, UserCapital
from clamp_risk.protocol import check_creation
from clamp_risk.report import dumps, flatten, to_csv
from clamp_risk.scenario import (
    ANALYSIS_KINDS,
    FORMATS,
    AnalysisRequest,
    GridSpec,
    ParseError,
    ScenarioConfig,
    load_scenario,
)
from clamp_risk.simulation import simulate
from clamp_risk.solver import max_safe_liquidity, self_funded_liquidity

log = logging.getLogger("clamp_risk")

EXIT_OK = 0
EXIT_PARSE = 2
EXIT_VALIDATION = 3
EXIT_ANALYSIS = 4

VERBS = ("run",) + ANALYSIS_KINDS

CURVE_COLUMNS = ("price", "margin", "in_range")
TRACE_COLUMNS = (
    "step", "price", "margin", "action", "actor", "repaid", "bonus", "bad_debt",
    "margin_after", "cumulative_bad_debt",
)

# A table is (columns, rows); analyses without one are flattened to key/value.
Table = Tuple[Tuple[str, ...], List[Dict[str, Any]]]


def _position_dict(pos: Position) -> Dict[str, Any]:
    return {
        "L": pos.L,
        "p_a": pos.range.p_a,
        "p_b": pos.range.p_b,
        "p0": pos.p0,
        "collateral": {"x": pos.collateral.x, "y": pos.collateral.y},
        "debt": {"x": pos.debt.x, "y": pos.debt.y},
        "margin_at_p0": margin_level(pos, pos.p0),
    }


def _default_grid(pos: Position) -> GridSpec:
    rng = pos.range
    lo = rng.p_a / 2 if rng.p_a > 0 else pos.p0 / 10
    hi = rng.p_b * 2 if rng.p_b < INF else pos.p0 * 10
    return GridSpec(start=lo, stop=hi, num=201)


def _run_check_create(cfg, pos, req) -> Tuple[Dict, Optional[Table]]:
    verdict = check_creation(pos, cfg.params, req.current_global_l)
    return {"kind": req.kind, "ok": verdict.ok, "violations": verdict.violations}, None


def _run_margin_curve(cfg, pos, req):
    grid = (req.grid or _default_grid(pos)).prices()
    threshold = req.threshold if req.threshold is not None else cfg.params.M_L
    curve = margin_curve(pos, grid, threshold)
    rows = [{"price": s.P, "margin": s.M, "in_range": s.in_range} for s in curve.samples]
    bounds = None
    if curve.bounds is not None:
        bounds = {"p_low": curve.bounds.p_low, "p_high": curve.bounds.p_high}
    result = {"kind": req.kind, "threshold": threshold, "bounds": bounds, "samples": rows}
    return result, (CURVE_COLUMNS, rows)


def _run_bounds(cfg, pos, req):
    out = []
    for t in req.thresholds or [cfg.params.M_L]:
        b = price_bounds(pos, t)
        out.append({"threshold": t, "p_low": b.p_low, "p_high": b.p_high})
    return {"kind": req.kind, "bounds": out}, (("threshold", "p_low", "p_high"), out)


def _run_max_liquidity(cfg, pos, req):
    ps = cfg.position
    cap = UserCapital(*ps.capital)
    margin = req.margin if req.margin is not None else cfg.params.M_L
    lo, hi = cfg.solver_interval(req)
    L = max_safe_liquidity(cap, pos.range, ps.p0, ps.policy, (lo, hi), margin, req.solver)
    solved = cfg.build_with_liquidity(L)
    result = {
        "kind": req.kind,
        "interval": [lo, hi],
        "margin": margin,
        "L_max": L,
        "self_funded_L": self_funded_liquidity(cap, pos.range, ps.p0),
        "endpoint_margins": [margin_level(solved, lo), margin_level(solved, hi)],
    }
    return result, None


def _run_simulate(cfg, pos, req):
    trace = simulate(pos, req.path, cfg.params, admin_failure=req.admin_failure)
    steps, rows = [], []
    for s in trace.steps:
        actions = [
            {
                "kind": a.kind,
                "actor": a.actor,
                "repaid": a.repaid,
                "bonus": a.bonus,
                "bad_debt": a.bad_debt,
                "pre_margin": a.liquidation.pre_margin if a.liquidation else None,
                "mode": a.liquidation.mode if a.liquidation else None,
                "margin_after": a.margin_after,
            }
            for a in s.actions
        ]
        steps.append({
            "step": s.step,
            "price": s.price,
            "margin": s.margin,
            "actions": actions,
            "margin_after": s.margin_after,
            "cumulative_bad_debt": s.cumulative_bad_debt,
        })
        base = {"step": s.step, "price": s.price, "margin": s.margin,
                "cumulative_bad_debt": s.cumulative_bad_debt}
        if not actions:
            rows.append({**base, "action": "none", "margin_after": s.margin_after})
        for a in actions:
            rows.append({**base, "action": a["kind"], "actor": a["actor"], "repaid": a["repaid"],
                         "bonus": a["bonus"], "bad_debt": a["bad_debt"],
                         "margin_after": a["margin_after"]})
    result = {
        "kind": req.kind,
        "admin_failure": req.admin_failure,
        "bad_debt": trace.bad_debt,
        "final_position": _position_dict(trace.final_position) if trace.final_position else None,
        "steps": steps,
    }
    return result, (TRACE_COLUMNS, rows)


def _run_audit(cfg, pos, req):
    oracle = req.oracle_price if req.oracle_price is not None else pos.p0
    rep = audit_position(pos, oracle, req.targets)
    entries = [
        {"target": e.target, "delta_value": e.delta_value, "assets_after": e.assets_after,
         "margin_after": e.margin_after}
        for e in rep.entries
    ]
    result = {
        "kind": req.kind,
        "oracle_price": oracle,
        "assets_before": rep.assets_before,
        "margin_before": rep.margin_before,
        "min_delta": rep.min_delta,
        "passed": rep.passed,
        "entries": entries,
    }
    return result, (("target", "delta_value", "assets_after", "margin_after"), entries)


RUNNERS = {
    "check-create": _run_check_create,
    "margin-curve": _run_margin_curve,
    "bounds": _run_bounds,
    "max-liquidity": _run_max_liquidity,
    "simulate": _run_simulate,
    "audit-manipulation": _run_audit,
}


def select_requests(cfg: ScenarioConfig, verb: str) -> List[AnalysisRequest]:
    if verb == "run":
        return list(cfg.analyses)
    reqs = [r for r in cfg.analyses if r.kind == verb]
    if reqs:
        return reqs
    if verb in ("check-create", "margin-curve", "bounds"):
        return [AnalysisRequest(kind=verb, where=f"<{verb}>")]
    raise ValidationError([f"analyses: no {verb!r} request in scenario"])


def run_analyses(cfg: ScenarioConfig, verb: str) -> Tuple[Dict[str, Any], List[Tuple[str, Any]]]:
    """Run the requested analyses; returns the JSON report and CSV tables."""
    reqs = select_requests(cfg, verb)
    pos = cfg.build()
    results, tables = [], []
    for i, req in enumerate(reqs):
        result, table = RUNNERS[req.kind](cfg, pos, req)
        results.append(result)
        if table is None:
            table = (("key", "value"), flatten(result))
        tables.append((f"{i}-{req.kind}", table))
    report = {
        "scenario": cfg.name,
        "verb": verb,
        "position": _position_dict(pos),
        "params": {
            "M_L": cfg.params.M_L,
            "M_T": cfg.params.M_T,
            "beta": cfg.params.beta,
            "M_C": cfg.params.M_C,
            "M_deleverage": cfg.params.M_deleverage,
            "M_0": cfg.params.M_0,
            "delta_p": cfg.params.delta_p,
            "max_position_l": cfg.params.max_position_l,
            "max_global_l": cfg.params.max_global_l,
            "full_liq_below": cfg.params.full_liquidation_threshold,
        },
        "results": results,
    }
    return report, tables


def write_outputs(report, tables, out_dir: Path, stem: str, verb: str, fmt: str) -> List[Path]:
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    if fmt in ("json", "both"):
        p = out_dir / f"{stem}.{verb}.json"
        p.write_text(dumps(report), encoding="utf-8")
        written.append(p)
    if fmt in ("csv", "both"):
        for suffix, (cols, rows) in tables:
            p = out_dir / f"{stem}.{verb}.{suffix}.csv"
            p.write_text(to_csv(cols, rows), encoding="utf-8")
            written.append(p)
    return written


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="clamp-risk",
        description="Risk analyses for leveraged concentrated-liquidity positions",
    )
    parser.add_argument("verb", choices=VERBS, help="analysis to run ('run' = all in file)")
    parser.add_argument("--scenario", "-s", required=True, type=Path, help="scenario JSON file")
    parser.add_argument("--out", "-o", type=Path, default=Path("reports"), help="output directory")
    parser.add_argument("--format", "-f", choices=FORMATS, help="override the scenario output format")
    parser.add_argument(
        "--admin-failure",
        action="store_true",
        help="simulate with the admin deleverage system disabled",
    )
    parser.add_argument("--verbose", "-v", action="store_true")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_scenario(args.scenario)
    except OSError as e:
        print(f"parse error: cannot read {args.scenario}: {e.strerror}", file=sys.stderr)
        return EXIT_PARSE
    except ParseError as e:
        print(f"parse error: {args.scenario}: {e}", file=sys.stderr)
        return EXIT_PARSE

    if args.admin_failure:
        cfg.analyses = [replace(r, admin_failure=True) if r.kind == "simulate" else r
                        for r in cfg.analyses]
    fmt = args.format or cfg.output_format

    try:
        cfg.validate()
    except ValidationError as e:
        print(f"validation error: {args.scenario}", file=sys.stderr)
        for v in e.violations:
            print(f"  - {v}", file=sys.stderr)
        return EXIT_VALIDATION

    try:
        report, tables = run_analyses(cfg, args.verb)
    except ValidationError as e:
        for v in e.violations:
            print(f"validation error: {v}", file=sys.stderr)
        return EXIT_VALIDATION
    except ClampRiskError as e:
        print(f"analysis error: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_ANALYSIS

    for p in write_outputs(report, tables, args.out, args.scenario.stem, args.verb, fmt):
        print(p)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
