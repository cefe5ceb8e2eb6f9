"""Agent ledgers, consumer surplus, welfare ranking, curtailment and re-dispatch shares."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd

from .case import PlanningCase
from .results import PlanningResult

CATEGORIES = ("RES", "CCGT", "OCGT", "REST", "VOLL")


@dataclass
class AgentLedger:
    benefit: float = 0.0
    cost: float = 0.0

    @property
    def net(self) -> float:
        return self.benefit - self.cost


@dataclass
class WelfareReport:
    name: str
    owpp: AgentLedger
    transmission: AgentLedger
    storage: AgentLedger
    existing_profit: float
    gcs: float
    redispatch_cost: float
    objective: float
    curtailment_mwh: float = 0.0
    lost_load_mwh: float = 0.0
    roi: dict = field(default_factory=dict)
    redispatch_shares: dict = field(default_factory=dict)
    mean_prices: dict = field(default_factory=dict)

    @property
    def net_benefit(self) -> float:
        return self.owpp.net + self.transmission.net + self.storage.net

    @property
    def social_welfare(self) -> float:
        return self.net_benefit + self.gcs - self.redispatch_cost

    def to_dict(self) -> dict:
        d = asdict(self)
        d["net_benefit"] = self.net_benefit
        d["social_welfare"] = self.social_welfare
        return d


def _weights(result: PlanningResult) -> np.ndarray:
    case = result.case
    return case.scenarios.objective_weights(case.settings.discount_rate)


def _price(prices: dict, node: str) -> np.ndarray:
    if node not in prices:
        raise KeyError(f"missing price for node {node}")
    return prices[node]


def investment_costs(result: PlanningResult) -> dict[str, float]:
    """NPV of investments per agent class, charged on yearly increments."""
    case = result.case
    npv = case.scenarios.npv(case.settings.discount_rate)
    years = case.scenarios.years
    net = case.network

    def incremental(values: dict, asset: str, unit: float) -> float:
        total, prev = 0.0, 0.0
        for i, y in enumerate(years):
            cur = values.get((asset, y), 0.0)
            total += npv.yearly[i] * unit * (cur - prev)
            prev = cur
        return total

    s = result.schedule
    owpp = sum(incremental(s["cap_gen"], g.id, g.unit_investment) for g in net.generators if g.is_candidate)
    lines = sum(incremental(s["alpha"], b.id, b.investment_cost or 0.0) for b in net.branches if b.is_candidate)
    conv = sum(incremental(s["cap_conv"], c.id, c.unit_investment) for c in net.converters if c.is_candidate)
    stor = sum(incremental(s["cap_stor"], j.id, j.unit_investment) for j in net.storage if j.is_candidate)
    return {"owpp": owpp, "transmission": lines + conv, "lines": lines, "converters": conv, "storage": stor}


def branch_rent(result: PlanningResult, prices: dict, branch_id: str) -> float:
    b = next(x for x in result.case.network.branches if x.id == branch_id)
    f = result.cube("flow", b.id)
    w = _weights(result)
    return float(np.sum(w * f * (_price(prices, b.to_node) - _price(prices, b.from_node))))


def converter_rent(result: PlanningResult, prices: dict, conv_id: str) -> float:
    c = next(x for x in result.case.network.converters if x.id == conv_id)
    w = _weights(result)
    ac = result.cube("conv_ac", c.id)
    dc = result.cube("conv_dc", c.id)
    return float(np.sum(w * -(_price(prices, c.ac_node) * ac + _price(prices, c.dc_node) * dc)))


def agent_benefits(result: PlanningResult, prices: dict | None = None) -> dict[str, AgentLedger | float]:
    """Per-agent NPV ledgers plus the profit of existing generators and lines."""
    prices = result.prices if prices is None else prices
    net = result.case.network
    w = _weights(result)
    inv = investment_costs(result)

    owpp_b = 0.0
    existing = 0.0
    for g in net.generators:
        pg = result.cube("pg", g.id)
        if not pg.any():
            continue
        lam = _price(prices, g.node)
        if g.is_candidate:
            owpp_b += float(np.sum(w * lam * pg))
        else:
            existing += float(np.sum(w * (lam - g.marginal_cost) * pg))
    trans_b = 0.0
    for b in net.branches:
        rent = branch_rent(result, prices, b.id)
        if b.is_candidate:
            trans_b += rent
        else:
            existing += rent
    for c in net.converters:
        rent = converter_rent(result, prices, c.id)
        if c.is_candidate:
            trans_b += rent
        else:
            existing += rent
    stor_b = 0.0
    for j in net.storage:
        lam = _price(prices, j.node)
        val = float(np.sum(w * lam * (result.cube("st_inj", j.id) - result.cube("st_abs", j.id))))
        if j.is_candidate:
            stor_b += val
        else:
            existing += val
    return {
        "owpp": AgentLedger(owpp_b, inv["owpp"]),
        "transmission": AgentLedger(trans_b, inv["transmission"]),
        "storage": AgentLedger(stor_b, inv["storage"]),
        "existing": existing,
    }


def supply_cost(result: PlanningResult, prices: dict | None = None) -> float:
    """What the market pays generators: NPV-weighted price x dispatch at each generator's node."""
    prices = result.prices if prices is None else prices
    w = _weights(result)
    total = 0.0
    for g in result.case.network.generators:
        pg = result.cube("pg", g.id)
        if pg.any():
            total += float(np.sum(w * _price(prices, g.node) * pg))
    return total


def served_demand(result: PlanningResult, demand_id: str) -> np.ndarray:
    return result.cube("pu_firm", demand_id) + result.cube("pu_flex", demand_id)


def gross_consumer_surplus(result: PlanningResult, prices: dict | None = None,
                           consumer_bid: float | None = None) -> float:
    """NPV of (consumer bid - price) x served demand; the bid defaults to the case setting."""
    prices = result.prices if prices is None else prices
    bid = result.case.settings.consumer_bid if consumer_bid is None else consumer_bid
    w = _weights(result)
    total = 0.0
    for u in result.case.network.demands:
        total += float(np.sum(w * (bid - _price(prices, u.node)) * served_demand(result, u.id)))
    return total


def own_bid_surplus(result: PlanningResult, prices: dict | None = None) -> float:
    """Consumer surplus valued at each tranche's own bid; used for reconciliation."""
    prices = result.prices if prices is None else prices
    w = _weights(result)
    total = 0.0
    for u in result.case.network.demands:
        lam = _price(prices, u.node)
        total += float(np.sum(w * (u.bid_price - lam) * result.cube("pu_firm", u.id)))
        total += float(np.sum(w * (u.dsr_price - lam) * result.cube("pu_flex", u.id)))
    return total


def reconcile(result: PlanningResult, prices: dict | None = None) -> float:
    """Objective minus the sum of all ledgers; zero up to round-off for any prices
    under which every balance row is priced consistently."""
    prices = result.raw_prices if prices is None else prices
    led = agent_benefits(result, prices)
    total = led["owpp"].net + led["transmission"].net + led["storage"].net + led["existing"]
    total += own_bid_surplus(result, prices)
    return result.objective - total


def curtailment_and_lost_load(result: PlanningResult, dispatch: dict | None = None) -> dict[str, float]:
    """Energy in MWh over the horizon; day weights, calendar years and probabilities applied."""
    case = result.case
    sset = case.scenarios
    hw = sset.hour_weights() * sset.multiplicity * sset.probabilities[:, None, None]
    disp = result.dispatch if dispatch is None else dispatch
    ypos = {y: i for i, y in enumerate(sset.years)}

    def cube(fam, asset):
        return disp.get(fam, {}).get(asset, np.zeros(result.case_shape))

    curtailed, potential = 0.0, 0.0
    for g in case.network.generators:
        if not g.is_candidate:
            continue
        psi = case.psi_gen(g)
        cap = np.zeros(result.case_shape)
        for (gid, y), v in result.schedule["cap_gen"].items():
            if gid == g.id:
                cap[:, ypos[y], :] = v
        avail = psi * cap
        potential += float(np.sum(hw * avail))
        curtailed += float(np.sum(hw * np.maximum(avail - cube("pg", g.id), 0.0)))
    lost = 0.0
    for u in case.network.demands:
        firm = (1.0 - u.dsr_share) * case.psi_demand(u)
        lost += float(np.sum(hw * np.maximum(firm - cube("pu_firm", u.id), 0.0)))
    return {"curtailment_mwh": curtailed, "potential_mwh": potential, "lost_load_mwh": lost,
            "curtailment_share": curtailed / potential if potential > 0 else 0.0}


def redispatch_breakdown(payments: dict[str, float]) -> tuple[dict[str, float], bool]:
    """Percentage shares by category, rounded to 0.01 and summing to exactly 100.

    Returns ``(shares, empty)``; ``empty`` flags a zero re-dispatch bill.
    """
    vals = {k: max(float(payments.get(k, 0.0)), 0.0) for k in CATEGORIES}
    for k, v in payments.items():
        if k not in vals:
            vals["REST"] += max(float(v), 0.0)
    total = sum(vals.values())
    if total <= 0:
        return {k: 0.0 for k in CATEGORIES}, True
    # largest remainder on hundredths of a percent
    raw = {k: 10000.0 * v / total for k, v in vals.items()}
    floors = {k: int(np.floor(v)) for k, v in raw.items()}
    left = 10000 - sum(floors.values())
    for k in sorted(raw, key=lambda k: (floors[k] - raw[k], k))[:left]:
        floors[k] += 1
    return {k: floors[k] / 100.0 for k in CATEGORIES}, False


def annuity_factor(result: PlanningResult) -> float:
    """Discounted calendar years represented by the horizon."""
    case = result.case
    return float(case.scenarios.npv(case.settings.discount_rate).hourly.sum())


def return_on_investment(ledger: AgentLedger, annuity: float) -> float:
    """Yearly percent return: annualised net benefit over the NPV of investment."""
    if ledger.cost <= 0 or annuity <= 0:
        return 0.0
    return 100.0 * ledger.net / annuity / ledger.cost


def mean_prices(result: PlanningResult, prices: dict | None = None) -> dict[str, float]:
    prices = result.prices if prices is None else prices
    hw = result.case.scenarios.hour_weights() * result.case.scenarios.probabilities[:, None, None]
    tot = hw.sum()
    return {n: float(np.sum(hw * p) / tot) if tot > 0 else 0.0 for n, p in sorted(prices.items())}


def welfare_report(name: str, result: PlanningResult, redispatch=None) -> WelfareReport:
    """Ledger of one run; ``redispatch`` is a RedispatchResult for zonal runs."""
    led = agent_benefits(result)
    rd_cost = redispatch.npv_cost if redispatch is not None else 0.0
    shares = {}
    if redispatch is not None:
        shares, _ = redispatch_breakdown(redispatch.payments)
    energy = curtailment_and_lost_load(result, redispatch.dispatch if redispatch is not None else None)
    ann = annuity_factor(result)
    return WelfareReport(
        name=name,
        owpp=led["owpp"],
        transmission=led["transmission"],
        storage=led["storage"],
        existing_profit=led["existing"],
        gcs=gross_consumer_surplus(result),
        redispatch_cost=rd_cost,
        objective=result.objective - rd_cost,
        curtailment_mwh=energy["curtailment_mwh"],
        lost_load_mwh=energy["lost_load_mwh"],
        roi={k: return_on_investment(led[k], ann) for k in ("owpp", "transmission", "storage")},
        redispatch_shares=shares,
        mean_prices=mean_prices(result),
    )


def percent_difference(value: float, reference: float) -> float:
    return 100.0 * (value - reference) / abs(reference) if reference else 0.0


def welfare_summary(reports: list[WelfareReport], reference: str | None = None) -> pd.DataFrame:
    """Rank runs by social welfare with the percent difference to a reference run.

    The reference is ``reference`` when given, else the best run whose name
    starts with "nodal" or "nOBZ", else the best run overall.
    """
    if not reports:
        raise ValueError("no reports to summarise")
    rows = [{
        "name": r.name,
        "net_benefit": r.net_benefit,
        "gcs": r.gcs,
        "redispatch_cost": r.redispatch_cost,
        "social_welfare": r.social_welfare,
    } for r in reports]
    df = pd.DataFrame(rows).sort_values("social_welfare", ascending=False, kind="mergesort").reset_index(drop=True)
    if reference is not None:
        ref = float(df.loc[df["name"] == reference, "social_welfare"].iloc[0])
    else:
        nodal = df[df["name"].str.lower().str.startswith(("nodal", "nobz"))]
        ref = float((nodal if len(nodal) else df)["social_welfare"].max())
    df["difference_pct"] = [percent_difference(v, ref) for v in df["social_welfare"]]
    df.insert(0, "rank", range(1, len(df) + 1))
    return df


def ledger_frame(reports: list[WelfareReport]) -> pd.DataFrame:
    """Cost/benefit table, one row per run and agent columns."""
    rows = []
    for r in reports:
        rows.append({
            "name": r.name,
            "transmission_cost": r.transmission.cost, "transmission_benefit": r.transmission.benefit,
            "owpp_cost": r.owpp.cost, "owpp_benefit": r.owpp.benefit,
            "storage_cost": r.storage.cost, "storage_benefit": r.storage.benefit,
            "existing_profit": r.existing_profit,
        })
    return pd.DataFrame(rows)


def write_reports(reports: list[WelfareReport], out_dir: str | Path) -> dict[str, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {"ledger": out / "cost_benefit.csv", "welfare": out / "welfare.csv", "json": out / "welfare.json"}
    ledger_frame(reports).to_csv(paths["ledger"], index=False)
    welfare_summary(reports).to_csv(paths["welfare"], index=False)
    paths["json"].write_text(json.dumps([r.to_dict() for r in reports], indent=1, default=float))
    return paths


def check_case_prices(case: PlanningCase, prices: dict) -> list[str]:
    """Nodes with no price entry."""
    return [n.id for n in case.network.nodes if n.id not in prices]
