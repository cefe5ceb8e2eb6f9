"""Compile a planning case and a market regime into a MILP.

Sign conventions: every flow variable is measured in its branch direction
``from_node -> to_node``; converter AC and DC powers are withdrawals from the
respective node into the converter, so ``ac + dc = loss``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from ..case import PlanningCase
from ..grid import AC, DC, Branch, ZonePartition
from .model import BINARY, INF, ModelInstance

NODAL = "nodal"
ZONAL = "zonal"
SCOPE_ALL = "all"
SCOPE_INTER = "inter"
SCOPE_INTRA = "intra"


@dataclass
class FixedDecisions:
    """Investment decisions pinned to given values, keyed by (asset id, year)."""

    alpha: dict = field(default_factory=dict)
    gen_cap: dict = field(default_factory=dict)
    conv_cap: dict = field(default_factory=dict)
    stor_cap: dict = field(default_factory=dict)

    def merged(self, other: "FixedDecisions") -> "FixedDecisions":
        return FixedDecisions(
            {**self.alpha, **other.alpha},
            {**self.gen_cap, **other.gen_cap},
            {**self.conv_cap, **other.conv_cap},
            {**self.stor_cap, **other.stor_cap},
        )


def _hours(case: PlanningCase):
    sset = case.scenarios
    for si in range(len(sset.scenarios)):
        for yi, y in enumerate(sset.years):
            for t in range(sset.n_hours):
                yield si, yi, y, t


def new_model(case: PlanningCase, name: str = "gate") -> ModelInstance:
    model = ModelInstance(name)
    model.meta["weights"] = case.scenarios.objective_weights(case.settings.discount_rate)
    model.meta["npv"] = case.scenarios.npv(case.settings.discount_rate)
    return model


def build_device_constraints(case: PlanningCase, model: ModelInstance, demand_scale: float = 1.0) -> ModelInstance:
    """Generators, demands and storage with their capacity and expansion rules."""
    net = case.network
    sset = case.scenarios
    years = sset.years
    dt = sset.dt

    for g in net.generators:
        psi = case.psi_gen(g)
        if g.is_candidate:
            for y in years:
                model.add_var("cap_gen", (g.id, y), 0.0, g.capacity)
            for yp, y in zip(years, years[1:]):
                model.add_le("gen_expansion_monotone", (g.id, y),
                             {model.var("cap_gen", (g.id, yp)): 1.0, model.var("cap_gen", (g.id, y)): -1.0})
        for si, yi, y, t in _hours(case):
            if g.is_candidate:
                v = model.add_var("pg", (g.id, si, y, t), 0.0, INF)
                model.add_le("gen_capacity", (g.id, si, y, t),
                             {v: 1.0, model.var("cap_gen", (g.id, y)): -float(psi[si, yi, t])})
            else:
                model.add_var("pg", (g.id, si, y, t), 0.0, float(psi[si, yi, t]) * g.capacity)

    for u in net.demands:
        psi = case.psi_demand(u)
        for si, yi, y, t in _hours(case):
            load = float(psi[si, yi, t]) * demand_scale
            model.add_var("pu_firm", (u.id, si, y, t), 0.0, (1.0 - u.dsr_share) * load)
            if u.dsr_share > 0:
                model.add_var("pu_flex", (u.id, si, y, t), 0.0, u.dsr_share * load)

    for j in net.storage:
        cand = j.is_candidate
        if cand:
            for y in years:
                model.add_var("cap_stor", (j.id, y), 0.0, j.energy_cap)
            for yp, y in zip(years, years[1:]):
                model.add_le("storage_expansion_monotone", (j.id, y),
                             {model.var("cap_stor", (j.id, yp)): 1.0, model.var("cap_stor", (j.id, y)): -1.0})
        keep = (1.0 - j.self_discharge) ** dt
        for si, yi, y, t in _hours(case):
            idx = (j.id, si, y, t)
            e_cap = None if cand else j.energy_cap
            soc = model.add_var("soc", idx, 0.0, INF if cand else e_cap)
            ab = model.add_var("st_abs", idx, 0.0, INF if cand else j.charge_rate * e_cap)
            inj = model.add_var("st_inj", idx, 0.0, INF if cand else j.discharge_rate * e_cap)
            if cand:
                cap = model.var("cap_stor", (j.id, y))
                model.add_le("storage_energy_limit", idx, {soc: 1.0, cap: -1.0})
                model.add_le("storage_charge_limit", idx, {ab: 1.0, cap: -j.charge_rate})
                model.add_le("storage_discharge_limit", idx, {inj: 1.0, cap: -j.discharge_rate})
            flows = {ab: -dt * j.charge_eff, inj: dt / j.discharge_eff}
            if sset.is_block_start(t):
                coefs = {soc: 1.0, **flows}
                if cand:
                    coefs[model.var("cap_stor", (j.id, y))] = -0.5
                    model.add_eq("storage_start", idx, coefs, 0.0)
                else:
                    model.add_eq("storage_start", idx, coefs, 0.5 * e_cap)
            else:
                prev = model.var("soc", (j.id, si, y, t - 1))
                model.add_eq("storage_level", idx, {soc: 1.0, prev: -keep, **flows}, 0.0)
            if sset.is_block_end(t):
                if cand:
                    model.add_eq("storage_end", idx, {soc: 1.0, model.var("cap_stor", (j.id, y)): -0.5}, 0.0)
                else:
                    model.add_eq("storage_end", idx, {soc: 1.0}, 0.5 * e_cap)
    return model


def build_network_constraints(
    case: PlanningCase,
    model: ModelInstance,
    branches: Iterable[Branch] | None = None,
) -> ModelInstance:
    """Linear AC flow with big-M candidate links, converters and DC network flow."""
    net = case.network
    st = case.settings
    years = case.scenarios.years
    branches = list(net.branches if branches is None else branches)
    missing_b = [b.id for b in branches if b.network == AC and b.susceptance is None]
    if missing_b:
        raise ValueError(f"AC branch without susceptance: {', '.join(missing_b)}")
    big_m = st.angle_big_m

    for n in net.ac_nodes:
        for si, yi, y, t in _hours(case):
            model.add_var("theta", (n.id, si, y, t), st.theta_min, st.theta_max)

    for b in branches:
        if not b.is_candidate:
            continue
        for y in years:
            model.add_var("alpha", (b.id, y), 0.0, 1.0, BINARY)
        for yp, y in zip(years, years[1:]):
            model.add_le("build_monotone", (b.id, y),
                         {model.var("alpha", (b.id, yp)): 1.0, model.var("alpha", (b.id, y)): -1.0})

    for b in branches:
        k = net.base_mva * (b.susceptance or 0.0) / b.transformer_ratio
        for si, yi, y, t in _hours(case):
            idx = (b.id, si, y, t)
            if not b.is_candidate:
                f = model.add_var("flow", idx, -b.capacity, b.capacity)
                if b.network == AC:
                    th_f = model.var("theta", (b.from_node, si, y, t))
                    th_t = model.var("theta", (b.to_node, si, y, t))
                    model.add_eq("ac_flow", idx, {f: 1.0, th_f: -k, th_t: k})
                    model.add_row("angle_difference", idx, {th_f: 1.0, th_t: -1.0}, -st.dtheta_max, st.dtheta_max)
                continue
            f = model.add_var("flow", idx, -INF, INF)
            a = model.var("alpha", (b.id, y))
            model.add_le("cand_capacity_up", idx, {f: 1.0, a: -b.capacity})
            model.add_ge("cand_capacity_lo", idx, {f: 1.0, a: b.capacity})
            if b.network != AC:
                continue
            c_f = model.add_var("theta_cand_from", idx, st.theta_min, st.theta_max)
            c_t = model.add_var("theta_cand_to", idx, st.theta_min, st.theta_max)
            th_f = model.var("theta", (b.from_node, si, y, t))
            th_t = model.var("theta", (b.to_node, si, y, t))
            model.add_eq("cand_ac_flow", idx, {f: 1.0, c_f: -k, c_t: k})
            model.add_row("cand_angle_difference", idx, {c_f: 1.0, c_t: -1.0}, -st.dtheta_max, st.dtheta_max)
            # |cand angle - bus angle| <= (1 - alpha) M
            model.add_le("cand_angle_link_from_up", idx, {c_f: 1.0, th_f: -1.0, a: big_m}, big_m)
            model.add_ge("cand_angle_link_from_lo", idx, {c_f: 1.0, th_f: -1.0, a: -big_m}, -big_m)
            model.add_le("cand_angle_link_to_up", idx, {c_t: 1.0, th_t: -1.0, a: big_m}, big_m)
            model.add_ge("cand_angle_link_to_lo", idx, {c_t: 1.0, th_t: -1.0, a: -big_m}, -big_m)

    for c in net.converters:
        cand = c.is_candidate
        if cand:
            for y in years:
                model.add_var("cap_conv", (c.id, y), 0.0, c.capacity)
            for yp, y in zip(years, years[1:]):
                model.add_le("converter_expansion_monotone", (c.id, y),
                             {model.var("cap_conv", (c.id, yp)): 1.0, model.var("cap_conv", (c.id, y)): -1.0})
        span = 1.0 - c.loss_factor
        for si, yi, y, t in _hours(case):
            idx = (c.id, si, y, t)
            p_in = model.add_var("conv_in", idx, 0.0, INF)
            p_out = model.add_var("conv_out", idx, 0.0, INF)
            ac = model.add_var("conv_ac", idx, -INF, INF)
            dc = model.add_var("conv_dc", idx, -INF, INF)
            loss = model.add_var("conv_loss", idx, 0.0, INF)
            model.add_eq("converter_ac_def", idx, {ac: 1.0, p_in: -1.0, p_out: 1.0})
            model.add_eq("converter_loss", idx, {loss: 1.0, p_in: -c.loss_factor, p_out: -c.loss_factor})
            model.add_eq("converter_link", idx, {ac: 1.0, dc: 1.0, loss: -1.0})
            if cand:
                cap = model.var("cap_conv", (c.id, y))
                model.add_le("converter_ac_capacity", idx, {p_in: 1.0, p_out: 1.0, cap: -1.0})
                model.add_le("converter_dc_capacity_up", idx, {dc: 1.0, cap: -span})
                model.add_ge("converter_dc_capacity_lo", idx, {dc: 1.0, cap: span})
            else:
                model.add_le("converter_ac_capacity", idx, {p_in: 1.0, p_out: 1.0}, c.capacity)
                model.add_le("converter_dc_capacity_up", idx, {dc: 1.0}, span * c.capacity)
                model.add_ge("converter_dc_capacity_lo", idx, {dc: 1.0}, -span * c.capacity)
    model.meta["branches"] = [b.id for b in branches]
    return model


def _node_injection_terms(case: PlanningCase, model: ModelInstance, node_ids: set[str],
                          branch_ids: set[str], si, y, t) -> dict[int, float]:
    """Net injection into a set of nodes (one node for nodal balance, a zone otherwise)."""
    net = case.network
    coefs: dict[int, float] = {}

    def add(vid, c):
        coefs[vid] = coefs.get(vid, 0.0) + c

    for g in net.generators:
        if g.node in node_ids:
            add(model.var("pg", (g.id, si, y, t)), 1.0)
    for u in net.demands:
        if u.node in node_ids:
            add(model.var("pu_firm", (u.id, si, y, t)), -1.0)
            if model.has_var("pu_flex", (u.id, si, y, t)):
                add(model.var("pu_flex", (u.id, si, y, t)), -1.0)
    for j in net.storage:
        if j.node in node_ids:
            add(model.var("st_inj", (j.id, si, y, t)), 1.0)
            add(model.var("st_abs", (j.id, si, y, t)), -1.0)
    for c in net.converters:
        if c.ac_node in node_ids:
            add(model.var("conv_ac", (c.id, si, y, t)), -1.0)
        if c.dc_node in node_ids:
            add(model.var("conv_dc", (c.id, si, y, t)), -1.0)
    for b in net.branches:
        if b.id not in branch_ids:
            continue
        f = model.var("flow", (b.id, si, y, t))
        if b.from_node in node_ids:
            add(f, -1.0)
        if b.to_node in node_ids:
            add(f, 1.0)
    return {k: v for k, v in coefs.items() if v != 0.0}


def build_balance_constraints(
    case: PlanningCase,
    partition: ZonePartition | None,
    regime: str,
    model: ModelInstance,
) -> ModelInstance:
    """Nodal or zonal power balance rows; their duals are energy prices."""
    net = case.network
    included = set(model.meta.get("branches", [b.id for b in net.branches]))
    if regime == NODAL:
        groups = [(n.id, n.kind, {n.id}) for n in net.nodes]
        flows = included
    elif regime == ZONAL:
        if partition is None:
            raise ValueError("zonal regime requires a zone partition")
        groups = []
        for z in partition.zones:
            members = set(partition.members(z))
            for kind in (AC, DC):
                ids = {n for n in members if net.node(n).kind == kind}
                if ids:
                    groups.append((z, kind, ids))
        flows = {b for b in included if partition.is_inter(b)}
    else:
        raise ValueError(f"unknown regime {regime!r}")
    for name, kind, ids in groups:
        tag = "balance_ac" if kind == AC else "balance_dc"
        for si, yi, y, t in _hours(case):
            model.add_eq(tag, (name, si, y, t), _node_injection_terms(case, model, ids, flows, si, y, t))
    model.meta["regime"] = regime
    model.meta["balance_groups"] = {(kind, name): sorted(ids) for name, kind, ids in groups}
    return model


def build_objective(
    case: PlanningCase,
    model: ModelInstance,
    scope: str = SCOPE_ALL,
    partition: ZonePartition | None = None,
) -> ModelInstance:
    """Expected NPV welfare: consumer bids minus generation cost minus investments."""
    net = case.network
    w = model.meta["weights"]
    npv = model.meta["npv"]
    years = case.scenarios.years
    for g in net.generators:
        if g.marginal_cost == 0:
            continue
        for (gid, si, y, t), vid in _family_items(model, "pg", g.id):
            model.add_obj(vid, -w[si, years.index(y), t] * g.marginal_cost)
    for u in net.demands:
        for (uid, si, y, t), vid in _family_items(model, "pu_firm", u.id):
            model.add_obj(vid, w[si, years.index(y), t] * u.bid_price)
        for (uid, si, y, t), vid in _family_items(model, "pu_flex", u.id):
            model.add_obj(vid, w[si, years.index(y), t] * u.dsr_price)

    def incremental(name, asset_id, unit_cost):
        # -f^y_y * c * (X_y - X_{y-dy}) summed over years
        for i, y in enumerate(years):
            vid = model.var(name, (asset_id, y))
            coef = -npv.yearly[i] * unit_cost
            if i + 1 < len(years):
                coef += npv.yearly[i + 1] * unit_cost
            model.add_obj(vid, coef)

    for g in net.generators:
        if g.is_candidate:
            incremental("cap_gen", g.id, g.unit_investment)
    for c in net.converters:
        if c.is_candidate:
            incremental("cap_conv", c.id, c.unit_investment)
    for j in net.storage:
        if j.is_candidate:
            incremental("cap_stor", j.id, j.unit_investment)
    for b in net.branches:
        if not b.is_candidate:
            continue
        if scope != SCOPE_ALL:
            if partition is None:
                raise ValueError("investment scope restriction needs a partition")
            inter = partition.is_inter(b.id)
            if (scope == SCOPE_INTER) != inter:
                continue
        incremental("alpha", b.id, b.investment_cost or 0.0)
    model.meta["scope"] = scope
    return model


def _family_items(model: ModelInstance, name: str, asset_id: str):
    cache = model.meta.setdefault("_family_cache", {})
    if name not in cache:
        grouped: dict[str, list] = {}
        for idx, vid in model.family(name).items():
            grouped.setdefault(idx[0], []).append((idx, vid))
        cache[name] = grouped
    return cache[name].get(asset_id, [])


def _add_detached_build_variables(case: PlanningCase, model: ModelInstance) -> None:
    """Build binaries for candidate branches left out of the flow model.

    They carry no flow rows, so a zonal model can still price the investment
    of intra-zonal lines once their decisions are fixed.
    """
    included = set(model.meta.get("branches", []))
    years = case.scenarios.years
    for b in case.network.branches:
        if not b.is_candidate or b.id in included:
            continue
        for y in years:
            model.add_var("alpha", (b.id, y), 0.0, 1.0, BINARY)
        for yp, y in zip(years, years[1:]):
            model.add_le("build_monotone", (b.id, y),
                         {model.var("alpha", (b.id, yp)): 1.0, model.var("alpha", (b.id, y)): -1.0})


def apply_fixed(model: ModelInstance, fixed: FixedDecisions | None) -> ModelInstance:
    if fixed is None:
        return model
    for name, values in (("alpha", fixed.alpha), ("cap_gen", fixed.gen_cap),
                         ("cap_conv", fixed.conv_cap), ("cap_stor", fixed.stor_cap)):
        for key, val in values.items():
            if model.has_var(name, key):
                v = model.variables[model.var(name, key)]
                val = float(val)
                if name == "alpha":
                    val = float(round(val))
                else:
                    # keep fixed capacities inside the declared bounds despite solver noise
                    val = min(max(val, v.lb), v.ub)
                model.fix(model.var(name, key), val)
    return model


def build_model(
    case: PlanningCase,
    regime: str = NODAL,
    partition: ZonePartition | None = None,
    scope: str = SCOPE_ALL,
    fixed: FixedDecisions | None = None,
    branches: Iterable[Branch] | None = None,
    demand_scale: float = 1.0,
    name: str = "gate",
) -> ModelInstance:
    """Complete planning model.

    Zonal models carry only inter-zonal branches: intra-zonal flows cancel in
    every zonal balance, so their variables would be free-floating.
    """
    if branches is None:
        if regime == ZONAL:
            if partition is None:
                raise ValueError("zonal regime requires a zone partition")
            branches = [b for b in case.network.branches if partition.is_inter(b.id)]
        else:
            branches = case.network.branches
    model = new_model(case, name)
    build_device_constraints(case, model, demand_scale=demand_scale)
    build_network_constraints(case, model, branches)
    _add_detached_build_variables(case, model)
    build_balance_constraints(case, partition, regime, model)
    build_objective(case, model, scope, partition)
    apply_fixed(model, fixed)
    model.meta["_family_cache"] = {}
    return model


def expected_row_counts(case: PlanningCase, branches: Iterable[Branch] | None = None,
                        regime: str = NODAL, partition: ZonePartition | None = None) -> dict[str, int]:
    """Closed-form row counts per constraint family."""
    net = case.network
    sset = case.scenarios
    S, Y, H = len(sset.scenarios), len(sset.years), sset.n_hours
    hours = S * Y * H
    n_blocks = sset.n_blocks
    branches = list(net.branches if branches is None else branches)
    cg = sum(g.is_candidate for g in net.generators)
    cs = sum(j.is_candidate for j in net.storage)
    ns = len(net.storage)
    cc = sum(c.is_candidate for c in net.converters)
    nc = len(net.converters)
    ex_ac = sum((not b.is_candidate) and b.network == AC for b in branches)
    cand = sum(b.is_candidate for b in branches)
    cand_ac = sum(b.is_candidate and b.network == AC for b in branches)
    counts = {
        "gen_capacity": cg * hours,
        "gen_expansion_monotone": cg * (Y - 1),
        "storage_expansion_monotone": cs * (Y - 1),
        "storage_energy_limit": cs * hours,
        "storage_charge_limit": cs * hours,
        "storage_discharge_limit": cs * hours,
        "storage_start": ns * S * Y * n_blocks,
        "storage_end": ns * S * Y * n_blocks,
        "storage_level": ns * S * Y * (H - n_blocks),
        "build_monotone": sum(b.is_candidate for b in net.branches) * (Y - 1),
        "ac_flow": ex_ac * hours,
        "angle_difference": ex_ac * hours,
        "cand_capacity_up": cand * hours,
        "cand_capacity_lo": cand * hours,
        "cand_ac_flow": cand_ac * hours,
        "cand_angle_difference": cand_ac * hours,
        "cand_angle_link_from_up": cand_ac * hours,
        "cand_angle_link_from_lo": cand_ac * hours,
        "cand_angle_link_to_up": cand_ac * hours,
        "cand_angle_link_to_lo": cand_ac * hours,
        "converter_expansion_monotone": cc * (Y - 1),
        "converter_ac_def": nc * hours,
        "converter_loss": nc * hours,
        "converter_link": nc * hours,
        "converter_ac_capacity": nc * hours,
        "converter_dc_capacity_up": nc * hours,
        "converter_dc_capacity_lo": nc * hours,
    }
    if regime == NODAL:
        counts["balance_ac"] = len(net.ac_nodes) * hours
        counts["balance_dc"] = len(net.dc_nodes) * hours
    else:
        zac = {partition.zone_of[n.id] for n in net.ac_nodes}
        zdc = {partition.zone_of[n.id] for n in net.dc_nodes}
        counts["balance_ac"] = len(zac) * hours
        counts["balance_dc"] = len(zdc) * hours
    return {k: v for k, v in counts.items() if v}


def hour_weight(model: ModelInstance, case: PlanningCase, si: int, y: int, t: int) -> float:
    return float(model.meta["weights"][si, case.scenarios.years.index(y), t])


def prices_from_duals(model: ModelInstance, case: PlanningCase, duals: np.ndarray) -> dict:
    """Balance-row duals divided by the hour weight: EUR/MWh per (kind, group, s, y, t)."""
    out = {}
    years = case.scenarios.years
    w = model.meta["weights"]
    for tag, kind in (("balance_ac", AC), ("balance_dc", DC)):
        for (name, si, y, t), rid in model.row_family(tag).items():
            weight = w[si, years.index(y), t]
            out[(kind, name, si, y, t)] = -float(duals[rid] / weight) if weight > 0 else 0.0
    return out
