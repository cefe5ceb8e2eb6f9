"""Four-step zonal pipeline: inter-zonal build, intra-zonal build, zonal auction, re-dispatch."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd

from .case import PlanningCase
from .formulation.backends import SolverBackend, solve
from .formulation.builder import NODAL, SCOPE_INTER, SCOPE_INTRA, ZONAL, FixedDecisions, build_model
from .formulation.model import INF, ModelInstance
from .grid import ZonePartition
from .results import PlanningError, PlanningResult, extract_dispatch, solve_and_price

log = logging.getLogger(__name__)

LOST_LOAD = "VOLL"


@dataclass
class RedispatchResult:
    """Deviations from the market schedule needed to respect the physical grid.

    Arrays are shaped (scenarios, years, hours). ``hour_cost`` is the net
    cost per simulated hour in currency/h before flooring; ``npv_cost``
    applies the floor at zero and the objective weights.
    """

    up: dict
    down: dict
    shed_firm: dict
    shed_flex: dict
    hour_cost: np.ndarray
    npv_cost: float
    payments: dict
    dispatch: dict
    status: str
    residual: float = 0.0
    meta: dict = field(default_factory=dict)

    def totals(self) -> dict:
        return {
            "up": float(sum(a.sum() for a in self.up.values())),
            "down": float(sum(a.sum() for a in self.down.values())),
            "shed": float(sum(a.sum() for a in self.shed_firm.values()) + sum(a.sum() for a in self.shed_flex.values())),
        }

    def frame(self, case: PlanningCase) -> pd.DataFrame:
        sset = case.scenarios
        rows = []
        for kind, src in (("up", self.up), ("down", self.down), ("shed_firm", self.shed_firm),
                          ("shed_flex", self.shed_flex)):
            for asset, arr in sorted(src.items()):
                for si, s in enumerate(sset.scenarios):
                    for yi, y in enumerate(sset.years):
                        for t in range(sset.n_hours):
                            if arr[si, yi, t] != 0:
                                rows.append((kind, asset, s, y, t, float(arr[si, yi, t])))
        return pd.DataFrame(rows, columns=["action", "asset", "scenario", "year", "hour", "mw"])


@dataclass
class ZonalResult:
    partition: ZonePartition
    inter: PlanningResult
    intra: PlanningResult
    auction: PlanningResult
    redispatch: RedispatchResult

    @property
    def welfare(self) -> float:
        """Auction welfare net of the re-dispatch bill."""
        return self.auction.objective - self.redispatch.npv_cost

    def trace_frame(self) -> pd.DataFrame:
        return pipeline_trace(self)


def _free_intra_binaries_off(case: PlanningCase, partition: ZonePartition) -> dict:
    return {(b.id, y): 0.0 for b in case.network.branches
            if b.is_candidate and not partition.is_inter(b.id) for y in case.scenarios.years}


def plan_inter_zonal(case: PlanningCase, partition: ZonePartition,
                     backend: SolverBackend | None = None) -> tuple[dict, PlanningResult]:
    """Step one: inter-zonal line decisions from a zonal-balance expansion model."""
    off = FixedDecisions(alpha=_free_intra_binaries_off(case, partition))
    result, _, _ = solve_and_price(case, ZONAL, backend, partition=partition, scope=SCOPE_INTER, fixed=off)
    alpha_te = {k: v for k, v in result.schedule["alpha"].items() if partition.is_inter(k[0])}
    result.regime = "zonal-step1"
    return alpha_te, result


def plan_intra_zonal(case: PlanningCase, partition: ZonePartition, alpha_te: dict,
                     backend: SolverBackend | None = None) -> tuple[FixedDecisions, PlanningResult]:
    """Step two: nodal model with the inter-zonal lines fixed; returns every investment."""
    try:
        result, _, _ = solve_and_price(case, NODAL, backend, partition=partition, scope=SCOPE_INTRA,
                                       fixed=FixedDecisions(alpha=dict(alpha_te)))
    except PlanningError as exc:
        raise PlanningError(f"intra-zonal step infeasible under the fixed inter-zonal topology: {exc}") from None
    result.regime = "zonal-step2"
    return result.fixed_decisions(), result


def clear_zonal_auction(case: PlanningCase, partition: ZonePartition, fixed: FixedDecisions,
                        backend: SolverBackend | None = None) -> PlanningResult:
    """Step three: zonal balances and inter-zonal limits only, on a fixed topology."""
    result, _, _ = solve_and_price(case, ZONAL, backend, partition=partition, fixed=fixed)
    result.regime = "zonal-auction"
    return result


def build_redispatch_model(case: PlanningCase, market: PlanningResult, fixed: FixedDecisions) -> ModelInstance:
    """Nodal network model whose objective is the cost of deviating from ``market``.

    Generators move up at their marginal cost and hand back their reclaimable
    cost when moved down; served demand can only be shed. Storage keeps its
    market schedule.
    """
    model = build_model(case, NODAL, fixed=fixed, name="redispatch")
    model.obj.clear()
    model.obj_constant = 0.0
    w = model.meta["weights"]
    ypos = {y: i for i, y in enumerate(case.scenarios.years)}
    net = case.network
    for g in net.generators:
        m_cube = market.cube("pg", g.id)
        for (gid, si, y, t), vid in _items(model, "pg", g.id):
            yi = ypos[y]
            m = max(float(m_cube[si, yi, t]), 0.0)
            v = model.variables[vid]
            if v.ub < INF:
                m = min(m, v.ub)
            up = model.add_var("rd_up", (g.id, si, y, t), 0.0, INF)
            dn = model.add_var("rd_down", (g.id, si, y, t), 0.0, m)
            model.add_eq("redispatch_generation", (g.id, si, y, t), {vid: 1.0, up: -1.0, dn: 1.0}, m)
            model.add_obj(up, -w[si, yi, t] * g.marginal_cost)
            model.add_obj(dn, w[si, yi, t] * g.reclaimable_cost)
    for u in net.demands:
        for fam, price in (("pu_firm", u.lost_load_value), ("pu_flex", u.dsr_price)):
            m_cube = market.cube(fam, u.id)
            for (uid, si, y, t), vid in _items(model, fam, u.id):
                yi = ypos[y]
                v = model.variables[vid]
                m = min(max(float(m_cube[si, yi, t]), 0.0), v.ub)
                v.ub = m
                # cost price * (m - served)
                model.add_obj(vid, w[si, yi, t] * price)
                model.obj_constant -= w[si, yi, t] * price * m
    for j in net.storage:
        for fam in ("st_abs", "st_inj"):
            m_cube = market.cube(fam, j.id)
            for (jid, si, y, t), vid in _items(model, fam, j.id):
                v = model.variables[vid]
                val = min(max(float(m_cube[si, ypos[y], t]), v.lb), v.ub)
                model.fix(vid, val)
    return model


def _items(model: ModelInstance, fam: str, asset: str):
    return [(idx, vid) for idx, vid in model.family(fam).items() if idx[0] == asset]


def redispatch_rdcc(case: PlanningCase, market: PlanningResult, fixed: FixedDecisions,
                    backend: SolverBackend | None = None,
                    categories: dict | None = None) -> RedispatchResult:
    """Step four: least-cost deviations that make the market schedule physically feasible."""
    model = build_redispatch_model(case, market, fixed)
    res = solve(model, backend)
    if not res.ok:
        raise PlanningError(f"re-dispatch LP is {res.status}; check lost-load data")
    x = res.x
    sset = case.scenarios
    shape = (len(sset.scenarios), len(sset.years), sset.n_hours)
    ypos = {y: i for i, y in enumerate(sset.years)}
    w = model.meta["weights"]
    net = case.network

    def cube_of(fam, asset, fn=None):
        arr = np.zeros(shape)
        for (a, si, y, t), vid in _items(model, fam, asset):
            arr[si, ypos[y], t] = x[vid] if fn is None else fn(si, y, t, x[vid])
        return arr

    # offsetting up and down moves on one unit cost nothing extra; report the net move
    net_move = {g.id: cube_of("rd_up", g.id) - cube_of("rd_down", g.id) for g in net.generators}
    up = {k: np.maximum(v, 0.0) for k, v in net_move.items()}
    down = {k: np.maximum(-v, 0.0) for k, v in net_move.items()}
    shed_firm, shed_flex = {}, {}
    for u in net.demands:
        shed_firm[u.id] = np.maximum(market.cube("pu_firm", u.id) - cube_of("pu_firm", u.id), 0.0)
        shed_flex[u.id] = np.maximum(market.cube("pu_flex", u.id) - cube_of("pu_flex", u.id), 0.0)

    hour_cost, npv_cost, payments = settle_redispatch(case, up, down, shed_firm, shed_flex, w, categories)
    return RedispatchResult(
        up=up,
        down=down,
        shed_firm=shed_firm,
        shed_flex=shed_flex,
        hour_cost=hour_cost,
        npv_cost=npv_cost,
        payments=payments,
        dispatch=extract_dispatch(model, case, x),
        status=res.status,
        residual=float(model.residuals(x).max(initial=0.0)),
        meta={"lp_objective": res.objective},
    )


def settle_redispatch(case: PlanningCase, up: dict, down: dict, shed_firm: dict, shed_flex: dict,
                      weights: np.ndarray, categories: dict | None = None) -> tuple[np.ndarray, float, dict]:
    """Cost-compensation settlement of re-dispatch moves.

    Up-regulation is paid at marginal cost, down-regulated units hand back
    their reclaimable cost and shed load is paid at its bid. Returns the
    unweighted net cost per hour, the weighted total with each hour floored
    at zero, and weighted gross payments per reporting category.
    """
    shape = weights.shape
    zero = np.zeros(shape)
    hour_cost = np.zeros(shape)
    gross: dict[str, np.ndarray] = {}
    cats = categories or {}
    for g in case.network.generators:
        pay = g.marginal_cost * up.get(g.id, zero)
        hour_cost = hour_cost + pay - g.reclaimable_cost * down.get(g.id, zero)
        key = generator_category(g.gen_type, cats)
        gross[key] = gross.get(key, zero) + pay
    for u in case.network.demands:
        pay = u.lost_load_value * shed_firm.get(u.id, zero) + u.dsr_price * shed_flex.get(u.id, zero)
        hour_cost = hour_cost + pay
        gross[LOST_LOAD] = gross.get(LOST_LOAD, zero) + pay
    npv_cost = float(np.sum(weights * np.maximum(hour_cost, 0.0)))
    payments = {k: float(np.sum(weights * v)) for k, v in gross.items()}
    return hour_cost, npv_cost, payments


DEFAULT_CATEGORIES = {
    "wind": "RES", "offshore_wind": "RES", "onshore_wind": "RES", "owpp": "RES", "pv": "RES",
    "solar": "RES", "hydro": "RES", "other_res": "RES", "res": "RES",
    "ccgt": "CCGT", "gas": "CCGT", "ocgt": "OCGT",
}


def generator_category(gen_type: str, overrides: dict | None = None) -> str:
    """Re-dispatch reporting class of a generator type (RES, CCGT, OCGT or REST)."""
    key = (gen_type or "").lower()
    if overrides and key in overrides:
        return overrides[key]
    return DEFAULT_CATEGORIES.get(key, "REST")


def run_zonal_pipeline(case: PlanningCase, partition: ZonePartition,
                       backend: SolverBackend | None = None) -> ZonalResult:
    """Steps one to four in order; zonal prices are broadcast to member nodes."""
    alpha_te, inter = plan_inter_zonal(case, partition, backend)
    fixed, intra = plan_intra_zonal(case, partition, alpha_te, backend)
    auction = clear_zonal_auction(case, partition, fixed, backend)
    rd = redispatch_rdcc(case, auction, fixed, backend, categories=case.generator_types)
    log.info("zonal pipeline: auction %.6g, re-dispatch %.6g", auction.objective, rd.npv_cost)
    return ZonalResult(partition, inter, intra, auction, rd)


def pipeline_trace(result: ZonalResult) -> pd.DataFrame:
    """Fixed-variable snapshot after each step."""
    rows = []
    te = result.inter.schedule["alpha"]
    for (asset, y), v in sorted(te.items()):
        if result.partition.is_inter(asset):
            rows.append(("1-inter-zonal", "alpha", asset, y, v))
    for fam, vals in result.intra.schedule.items():
        for (asset, y), v in sorted(vals.items()):
            rows.append(("2-intra-zonal", fam, asset, y, v))
    sset = result.auction.case.scenarios
    for zone in result.partition.zones:
        members = result.partition.members(zone)
        arr = result.auction.prices[members[0]]
        for si, s in enumerate(sset.scenarios):
            for yi, y in enumerate(sset.years):
                rows.append(("3-auction", "mean_price", f"{zone}|{s}", y, float(arr[si, yi].mean())))
    rows.append(("4-redispatch", "npv_cost", "total", sset.years[0], result.redispatch.npv_cost))
    return pd.DataFrame(rows, columns=["step", "variable", "asset", "year", "value"])


def write_trace(result: ZonalResult, out_dir: str | Path) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "pipeline_trace.csv"
    pipeline_trace(result).to_csv(path, index=False)
    return path
