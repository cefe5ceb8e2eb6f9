"""Nodal planning (every node its own price) and the nodal auction."""

from __future__ import annotations

from pathlib import Path

from .case import PlanningCase
from .formulation.backends import SolverBackend
from .formulation.builder import NODAL, FixedDecisions
from .results import PlanningError, PlanningResult, solve_and_price


def plan_nodal(case: PlanningCase, backend: SolverBackend | None = None,
               fixed: FixedDecisions | None = None) -> PlanningResult:
    """Joint generation and transmission expansion with nodal balances."""
    result, _, _ = solve_and_price(case, NODAL, backend, fixed=fixed)
    return result


def clear_nodal_auction(case: PlanningCase, fixed: FixedDecisions,
                        backend: SolverBackend | None = None) -> PlanningResult:
    """Dispatch and nodal prices on a fully fixed topology."""
    _require_complete(case, fixed)
    result, _, _ = solve_and_price(case, NODAL, backend, fixed=fixed)
    result.regime = "nodal-auction"
    return result


def _require_complete(case: PlanningCase, fixed: FixedDecisions) -> None:
    years = case.scenarios.years
    net = case.network
    missing = []
    for b in net.branches:
        if b.is_candidate:
            missing += [f"{b.id}@{y}" for y in years if (b.id, y) not in fixed.alpha]
    for g in net.generators:
        if g.is_candidate:
            missing += [f"{g.id}@{y}" for y in years if (g.id, y) not in fixed.gen_cap]
    for c in net.converters:
        if c.is_candidate:
            missing += [f"{c.id}@{y}" for y in years if (c.id, y) not in fixed.conv_cap]
    for j in net.storage:
        if j.is_candidate:
            missing += [f"{j.id}@{y}" for y in years if (j.id, y) not in fixed.stor_cap]
    if missing:
        raise PlanningError("auction needs a fixed topology; free decisions: " + ", ".join(missing[:10]))


def write_results(result: PlanningResult, out_dir: str | Path, prefix: str = "") -> dict[str, Path]:
    """Build schedule, prices and dispatch as CSV files."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "schedule": out / f"{prefix}schedule.csv",
        "prices": out / f"{prefix}prices.csv",
        "dispatch": out / f"{prefix}dispatch.csv",
    }
    result.schedule_frame().to_csv(paths["schedule"], index=False)
    result.prices_frame().to_csv(paths["prices"], index=False)
    result.dispatch_frame().to_csv(paths["dispatch"], index=False)
    return paths


def read_schedule(path: str | Path) -> FixedDecisions:
    """Inverse of the schedule CSV written by :func:`write_results`."""
    import pandas as pd

    df = pd.read_csv(path)
    fixed = FixedDecisions()
    target = {"alpha": fixed.alpha, "cap_gen": fixed.gen_cap, "cap_conv": fixed.conv_cap, "cap_stor": fixed.stor_cap}
    for rec in df.itertuples(index=False):
        target[rec.variable][(str(rec.asset), int(rec.year))] = float(rec.value)
    return fixed
