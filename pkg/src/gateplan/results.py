"""Solution containers and the solve-then-price routine shared by all regimes."""

from __future__ import annotations

import dataclasses
import logging
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from .case import PlanningCase
from .formulation.backends import SolverBackend, SolverError, fix_integers_and_resolve, solve
from .formulation.builder import FixedDecisions, build_model
from .formulation.model import ModelInstance, SolveResult, dual_objective
from .grid import AC, DC, ZonePartition

log = logging.getLogger(__name__)

DISPATCH_FAMILIES = (
    "pg", "pu_firm", "pu_flex", "st_abs", "st_inj", "soc",
    "conv_ac", "conv_dc", "conv_loss", "flow",
)
CAPACITY_FAMILIES = {"alpha": "branch", "cap_gen": "generator", "cap_conv": "converter", "cap_stor": "storage"}


class PlanningError(RuntimeError):
    """A planning or auction model could not be solved to a usable point."""


@dataclass
class PlanningResult:
    """Build schedule, dispatch cube and prices of one solved model.

    ``dispatch[family][asset]`` and ``prices[node]`` are arrays shaped
    (scenarios, years, hours). ``prices`` are the reported (capped) prices;
    ``raw_prices`` keep the uncapped duals.
    """

    case: PlanningCase
    regime: str
    schedule: dict
    dispatch: dict
    prices: dict
    raw_prices: dict
    objective: float
    status: str
    mip_gap: float = 0.0
    wall_time: float = 0.0
    partition: ZonePartition | None = None
    duality_gap: float = 0.0
    meta: dict = field(default_factory=dict)

    def fixed_decisions(self) -> FixedDecisions:
        s = self.schedule
        return FixedDecisions(dict(s["alpha"]), dict(s["cap_gen"]), dict(s["cap_conv"]), dict(s["cap_stor"]))

    def cube(self, family: str, asset: str) -> np.ndarray:
        fam = self.dispatch.get(family, {})
        if asset in fam:
            return fam[asset]
        return np.zeros(self.case_shape)

    @property
    def case_shape(self) -> tuple[int, int, int]:
        s = self.case.scenarios
        return (len(s.scenarios), len(s.years), s.n_hours)

    def capacity(self, family: str, asset: str, year: int) -> float:
        return float(self.schedule[family].get((asset, year), 0.0))

    def schedule_frame(self) -> pd.DataFrame:
        rows = []
        for fam, kind in CAPACITY_FAMILIES.items():
            for (asset, year), val in sorted(self.schedule[fam].items()):
                rows.append({"asset_type": kind, "asset": asset, "year": year, "variable": fam, "value": val})
        return pd.DataFrame(rows, columns=["asset_type", "asset", "year", "variable", "value"])

    def prices_frame(self, raw: bool = False) -> pd.DataFrame:
        src = self.raw_prices if raw else self.prices
        sset = self.case.scenarios
        rows = []
        for node, arr in sorted(src.items()):
            for si, s in enumerate(sset.scenarios):
                for yi, y in enumerate(sset.years):
                    for t in range(sset.n_hours):
                        rows.append((node, s, y, t, float(arr[si, yi, t])))
        return pd.DataFrame(rows, columns=["node", "scenario", "year", "hour", "price"])

    def dispatch_frame(self) -> pd.DataFrame:
        sset = self.case.scenarios
        rows = []
        for fam in sorted(self.dispatch):
            for asset, arr in sorted(self.dispatch[fam].items()):
                for si, s in enumerate(sset.scenarios):
                    for yi, y in enumerate(sset.years):
                        for t in range(sset.n_hours):
                            rows.append((fam, asset, s, y, t, float(arr[si, yi, t])))
        return pd.DataFrame(rows, columns=["variable", "asset", "scenario", "year", "hour", "value"])


def extract_schedule(model: ModelInstance, x: np.ndarray) -> dict:
    out = {}
    for fam in CAPACITY_FAMILIES:
        vals = {}
        for idx, vid in model.family(fam).items():
            v = float(x[vid])
            vals[idx] = float(round(v)) if fam == "alpha" else max(v, 0.0)
        out[fam] = vals
    return out


def extract_dispatch(model: ModelInstance, case: PlanningCase, x: np.ndarray) -> dict:
    sset = case.scenarios
    shape = (len(sset.scenarios), len(sset.years), sset.n_hours)
    ypos = {y: i for i, y in enumerate(sset.years)}
    out: dict[str, dict[str, np.ndarray]] = {}
    for fam in DISPATCH_FAMILIES:
        cubes: dict[str, np.ndarray] = {}
        for (asset, si, y, t), vid in model.family(fam).items():
            arr = cubes.get(asset)
            if arr is None:
                arr = cubes[asset] = np.zeros(shape)
            arr[si, ypos[y], t] = x[vid]
        out[fam] = cubes
    return out


def extract_prices(model: ModelInstance, case: PlanningCase, duals: np.ndarray,
                   partition: ZonePartition | None = None) -> dict:
    """Node prices from balance duals; zonal rows broadcast to member nodes."""
    sset = case.scenarios
    shape = (len(sset.scenarios), len(sset.years), sset.n_hours)
    ypos = {y: i for i, y in enumerate(sset.years)}
    w = model.meta["weights"]
    groups = model.meta["balance_groups"]
    prices = {n.id: np.zeros(shape) for n in case.network.nodes}
    for tag, kind in (("balance_ac", AC), ("balance_dc", DC)):
        for (name, si, y, t), rid in model.row_family(tag).items():
            yi = ypos[y]
            weight = w[si, yi, t]
            # rows read "net injection = 0": raising the right side costs lambda
            val = -float(duals[rid] / weight) if weight > 0 else 0.0
            for node in groups[(kind, name)]:
                prices[node][si, yi, t] = val
    return prices


def cap_prices(prices: dict, cap: float | None) -> dict:
    if cap is None:
        return {k: v.copy() for k, v in prices.items()}
    return {k: np.minimum(v, cap) for k, v in prices.items()}


def _price_duals(case: PlanningCase, build_kwargs: dict, fixed_lp: ModelInstance, lp_res: SolveResult,
                 backend: SolverBackend | None) -> np.ndarray:
    """Duals used as prices.

    Flat merit-order segments leave the balance dual anywhere between two
    offers. Shrinking every demand bound by a tiny fraction selects the lower
    end, which is the price of the last accepted offer.
    """
    eps = case.settings.price_perturbation
    if not eps:
        return lp_res.row_duals
    pm = build_model(case, demand_scale=1.0 - eps, **build_kwargs)
    if pm.n_vars != fixed_lp.n_vars or pm.n_rows != fixed_lp.n_rows:
        raise PlanningError("price model does not match the fixed model")
    for vid in fixed_lp.integer_ids:
        v = fixed_lp.variables[vid]
        pm.fix(vid, v.lb)
    res = solve(pm, backend)
    if not res.ok or res.row_duals is None:
        log.warning("price re-solve failed (%s); using unperturbed duals", res.status)
        return lp_res.row_duals
    return res.row_duals


def solve_and_price(
    case: PlanningCase,
    regime: str,
    backend: SolverBackend | None = None,
    partition: ZonePartition | None = None,
    **build_kwargs,
) -> tuple[PlanningResult, ModelInstance, SolveResult]:
    """Solve the MILP, fix binaries, re-solve the LP and read prices off the balance rows."""
    kwargs = dict(regime=regime, partition=partition, **build_kwargs)
    model = build_model(case, **kwargs)
    res = solve(model, backend)
    if not res.ok:
        raise PlanningError(f"{regime} model is {res.status}: {res.message}")
    lp_res = fix_integers_and_resolve(model, res, backend)
    lp = lp_res.extra["lp"]
    dual_obj = dual_objective(lp, lp_res)
    gap = abs(dual_obj - lp_res.objective) / max(1.0, abs(lp_res.objective))
    duals = _price_duals(case, kwargs, lp, lp_res, backend)
    raw = extract_prices(lp, case, duals, partition)
    result = PlanningResult(
        case=case,
        regime=regime,
        schedule=extract_schedule(lp, lp_res.x),
        dispatch=extract_dispatch(lp, case, lp_res.x),
        prices=cap_prices(raw, case.settings.price_cap),
        raw_prices=raw,
        objective=lp_res.objective,
        status=res.status,
        mip_gap=res.mip_gap,
        wall_time=res.wall_time + lp_res.wall_time,
        partition=partition,
        duality_gap=gap,
        meta={"milp_objective": res.objective, "n_vars": model.n_vars, "n_rows": model.n_rows,
              "n_binaries": len(model.integer_ids)},
    )
    return result, lp, lp_res


def with_prices(result: PlanningResult, raw: dict) -> PlanningResult:
    return dataclasses.replace(result, raw_prices=raw, prices=cap_prices(raw, result.case.settings.price_cap))


def simultaneous_storage_use(result: PlanningResult, tol: float = 1e-7) -> list[tuple[str, int, int, int]]:
    """(storage, scenario index, year, hour) where a unit charges and discharges at once."""
    years = result.case.scenarios.years
    out = []
    for j in result.case.network.storage:
        both = np.minimum(result.cube("st_abs", j.id), result.cube("st_inj", j.id)) > tol
        for si, yi, t in zip(*np.nonzero(both)):
            out.append((j.id, int(si), years[int(yi)], int(t)))
    return out


__all__ = [
    "PlanningError",
    "PlanningResult",
    "SolverError",
    "cap_prices",
    "extract_dispatch",
    "extract_prices",
    "extract_schedule",
    "simultaneous_storage_use",
    "solve_and_price",
]
