import numpy as np
import pytest

from gateplan.accounting import supply_cost
from gateplan.formulation import FixedDecisions, build_model, get_backend, solve
from gateplan.grid import (
    AC,
    CANDIDATE,
    EXISTING,
    Branch,
    Demand,
    Generator,
    Node,
    partition_zones,
    single_zone_partition,
    singleton_partition,
)
from gateplan.nodal import clear_nodal_auction, plan_nodal
from gateplan.toycases import pivotal_supplier_case, random_small_case
from gateplan.zonal import (
    clear_zonal_auction,
    generator_category,
    plan_inter_zonal,
    plan_intra_zonal,
    redispatch_rdcc,
    run_zonal_pipeline,
    settle_redispatch,
)

from oracles import one_hour_case, random_redispatch_case, redispatch_grid_search


def test_pivotal_one_zone_auction_and_redispatch():
    case = pivotal_supplier_case()
    res = run_zonal_pipeline(case, single_zone_partition(case.network))
    auction = res.auction
    disp = {g: float(auction.cube("pg", g)[0, 0, 0]) for g in ("wind", "pv", "gas")}
    assert disp == pytest.approx({"wind": 5.0, "pv": 5.0, "gas": 0.0}, abs=1e-6)
    assert auction.prices["m"][0, 0, 0] == pytest.approx(10.0, abs=1e-6)
    assert auction.prices["n"][0, 0, 0] == pytest.approx(10.0, abs=1e-6)
    assert supply_cost(auction) == pytest.approx(100.0, abs=1e-6)
    rd = res.redispatch
    assert rd.down["wind"][0, 0, 0] == pytest.approx(1.0, abs=1e-6)
    assert rd.up["gas"][0, 0, 0] == pytest.approx(1.0, abs=1e-6)
    assert rd.up["pv"][0, 0, 0] == pytest.approx(0.0, abs=1e-6)
    assert rd.npv_cost == pytest.approx(100.0, abs=1e-6)
    assert supply_cost(auction) + rd.npv_cost == pytest.approx(200.0, abs=1e-6)
    assert rd.residual < 1e-8


def test_uncongested_zonal_prices_match_nodal():
    case = pivotal_supplier_case(line_capacity=20.0)
    zonal = clear_zonal_auction(case, single_zone_partition(case.network), FixedDecisions())
    nodal = clear_nodal_auction(case, FixedDecisions())
    for n in ("m", "n"):
        assert zonal.prices[n][0, 0, 0] == pytest.approx(nodal.prices[n][0, 0, 0], abs=1e-6)
    rd = redispatch_rdcc(case, zonal, FixedDecisions())
    assert rd.npv_cost == pytest.approx(0.0, abs=1e-9)
    assert rd.totals()["up"] == pytest.approx(0.0, abs=1e-9)


def test_binding_interconnector_splits_prices():
    case = one_hour_case(
        [Node("a", AC, "A"), Node("b", AC, "B")],
        [Branch("ab", "a", "b", AC, EXISTING, capacity=4.0, susceptance=1.0)],
        [Generator("cheap", "a", marginal_cost=10.0, capacity=20.0),
         Generator("dear", "b", marginal_cost=89.0, capacity=20.0)],
        [Demand("d", "b", "l")],
        {"l": [10.0]},
    )
    part = partition_zones(case.network, {"a": "A", "b": "B"})
    res = clear_zonal_auction(case, part, FixedDecisions())
    assert res.prices["a"][0, 0, 0] == pytest.approx(10.0, abs=1e-6)
    assert res.prices["b"][0, 0, 0] == pytest.approx(89.0, abs=1e-6)
    assert res.cube("flow", "ab")[0, 0, 0] == pytest.approx(4.0, abs=1e-6)


def test_settlement_floor_example():
    case = one_hour_case(
        [Node("a", AC, "Z")],
        gens=[Generator("ccgt", "a", marginal_cost=89.0, capacity=5.0, gen_type="ccgt"),
              Generator("coal", "a", marginal_cost=120.0, capacity=5.0, gen_type="coal")],
    )
    w = np.ones((1, 1, 1))
    hour, total, pay = settle_redispatch(case, {"ccgt": 2 * w}, {"coal": 2 * w}, {}, {}, w)
    assert hour[0, 0, 0] == pytest.approx(2 * 89 - 2 * 120)
    assert hour[0, 0, 0] == pytest.approx(-62.0)
    assert total == 0.0
    assert pay == {"CCGT": pytest.approx(178.0), "REST": 0.0}


def test_generator_categories():
    assert generator_category("ccgt") == "CCGT"
    assert generator_category("OCGT") == "OCGT"
    assert generator_category("wind") == "RES"
    assert generator_category("nuclear") == "REST"
    assert generator_category("coal", {"coal": "OCGT"}) == "OCGT"


@pytest.mark.parametrize("seed", range(6))
def test_rdcc_matches_grid_search(seed):
    case = random_redispatch_case(seed)
    market = clear_zonal_auction(case, single_zone_partition(case.network), FixedDecisions())
    rd = redispatch_rdcc(case, market, FixedDecisions())
    dispatch = {g.id: float(market.cube("pg", g.id)[0, 0, 0]) for g in case.network.generators}
    grid = redispatch_grid_search(case, dispatch)
    step_cost = 0.1 * max(g.marginal_cost for g in case.network.generators)
    assert rd.hour_cost[0, 0, 0] <= grid + 1e-6
    assert rd.hour_cost[0, 0, 0] >= grid - step_cost - 1e-6


def test_single_zone_has_no_inter_zonal_decisions():
    case = random_small_case(3, n_candidates=2)
    alpha_te, _ = plan_inter_zonal(case, single_zone_partition(case.network))
    assert alpha_te == {}


def _two_zone_case(line_cost):
    return one_hour_case(
        [Node("a", AC, "A"), Node("b", AC, "B")],
        [Branch("ab", "a", "b", AC, EXISTING, capacity=2.0, susceptance=1.0),
         Branch("new", "a", "b", AC, CANDIDATE, capacity=5.0, susceptance=1.0, investment_cost=line_cost)],
        [Generator("cheap", "a", marginal_cost=10.0, capacity=20.0),
         Generator("dear", "b", marginal_cost=89.0, capacity=20.0)],
        [Demand("d", "b", "l")],
        {"l": [10.0]},
    )


@pytest.mark.parametrize("cost", [50.0, 1000.0])
def test_inter_zonal_line_selected_when_worth_it(cost):
    case = _two_zone_case(cost)
    part = partition_zones(case.network, {"a": "A", "b": "B"})
    alpha_te, _ = plan_inter_zonal(case, part)
    # five more MWh from 10 instead of 89
    assert alpha_te[("new", 2020)] == (1.0 if 5 * 79 > cost else 0.0)


def _corridor_case(line_cost):
    # zone A holds a congested internal corridor; zone B is an empty neighbour
    return one_hour_case(
        [Node("a1", AC, "A"), Node("a2", AC, "A"), Node("b", AC, "B")],
        [Branch("e", "a1", "a2", AC, EXISTING, capacity=2.0, susceptance=1.0),
         Branch("x", "a2", "b", AC, EXISTING, capacity=1.0, susceptance=1.0),
         Branch("cor", "a1", "a2", AC, CANDIDATE, capacity=6.0, susceptance=1.0, investment_cost=line_cost)],
        [Generator("wind", "a1", marginal_cost=0.0, capacity=8.0),
         Generator("gas", "a2", marginal_cost=100.0, capacity=8.0)],
        [Demand("d", "a2", "l")],
        {"l": [8.0]},
    )


@pytest.mark.parametrize("cost", [100.0, 900.0])
def test_intra_zonal_corridor_built_in_step_two(cost):
    case = _corridor_case(cost)
    part = partition_zones(case.network, {"a1": "A", "a2": "A", "b": "B"})
    backend = get_backend()
    on = solve(build_model(case, fixed=FixedDecisions(alpha={("cor", 2020): 1.0})), backend).objective
    off = solve(build_model(case, fixed=FixedDecisions(alpha={("cor", 2020): 0.0})), backend).objective
    alpha_te, _ = plan_inter_zonal(case, part)
    fixed, _ = plan_intra_zonal(case, part, alpha_te)
    assert fixed.alpha[("cor", 2020)] == (1.0 if on > off else 0.0)
    assert (on > off) == (cost < 600.0)


def test_single_node_pipeline_equals_nodal():
    case = one_hour_case([Node("a", AC, "Z")], gens=[Generator("g", "a", marginal_cost=10.0, capacity=20.0)],
                         demands=[Demand("d", "a", "l", bid_price=150.0)], loads={"l": [10.0]})
    z = run_zonal_pipeline(case, single_zone_partition(case.network))
    assert z.welfare == pytest.approx(plan_nodal(case).objective)


@pytest.mark.parametrize("seed", [0, 2, 5])
def test_singleton_partition_recovers_nodal(seed):
    case = random_small_case(seed, n_candidates=2)
    z = run_zonal_pipeline(case, singleton_partition(case.network))
    nodal = plan_nodal(case)
    assert z.welfare == pytest.approx(nodal.objective, rel=1e-6)
    assert z.redispatch.npv_cost == pytest.approx(0.0, abs=1e-6)


@pytest.mark.parametrize("seed", range(8))
def test_zonal_welfare_never_beats_nodal(seed):
    case = random_small_case(seed)
    nodal = plan_nodal(case)
    for part in (single_zone_partition(case.network),
                 partition_zones(case.network, {n.id: n.zone_id for n in case.network.nodes})):
        z = run_zonal_pipeline(case, part)
        assert z.welfare <= nodal.objective * (1 + 1e-5) + 1e-6


def test_trace_lists_all_steps(tmp_path):
    case = random_small_case(1, n_candidates=2)
    z = run_zonal_pipeline(case, partition_zones(case.network, {n.id: n.zone_id for n in case.network.nodes}))
    steps = set(z.trace_frame()["step"])
    assert {"2-intra-zonal", "3-auction", "4-redispatch"} <= steps
