import numpy as np
import pytest

from gateplan.accounting import supply_cost
from gateplan.formulation import FixedDecisions, build_model, get_backend, solve
from gateplan.grid import AC, CANDIDATE, Branch, Demand, Generator, Node
from gateplan.nodal import clear_nodal_auction, plan_nodal, read_schedule, write_results
from gateplan.results import PlanningError
from gateplan.toycases import pivotal_supplier_case, random_small_case

from oracles import one_hour_case


def test_pivotal_nodal_plan():
    res = plan_nodal(pivotal_supplier_case())
    disp = {g: float(res.cube("pg", g)[0, 0, 0]) for g in ("wind", "pv", "gas")}
    assert disp == pytest.approx({"wind": 4.0, "pv": 5.0, "gas": 1.0}, abs=1e-6)
    assert res.prices["m"][0, 0, 0] == pytest.approx(10.0, abs=1e-6)
    assert res.prices["n"][0, 0, 0] == pytest.approx(100.0, abs=1e-6)
    assert supply_cost(res) == pytest.approx(640.0, abs=1e-6)


def test_no_candidates_plan_equals_auction():
    case = pivotal_supplier_case()
    plan = plan_nodal(case)
    auction = clear_nodal_auction(case, FixedDecisions())
    assert plan.objective == pytest.approx(auction.objective)


def _pivotal_with_candidate(cost):
    case = pivotal_supplier_case()
    net = case.network
    extra = Branch("mn2", "m", "n", AC, CANDIDATE, capacity=4.0, susceptance=1.0, investment_cost=cost)
    return case.with_network(type(net)(net.nodes, net.branches + (extra,), net.converters, net.generators,
                                       net.demands, net.storage))


@pytest.mark.parametrize("cost", [30.0, 200.0])
def test_line_built_when_cheaper_than_congestion(cost):
    case = _pivotal_with_candidate(cost)
    backend = get_backend()
    # two LPs: with and without the line
    on = solve(build_model(case, fixed=FixedDecisions(alpha={("mn2", 2020): 1.0})), backend).objective
    off = solve(build_model(case, fixed=FixedDecisions(alpha={("mn2", 2020): 0.0})), backend).objective
    res = plan_nodal(case, backend)
    assert res.schedule["alpha"][("mn2", 2020)] == (1.0 if on > off else 0.0)
    assert (cost < 90.0) == (on > off)


def test_dsr_sets_the_price():
    case = one_hour_case([Node("a", AC, "Z")], gens=[Generator("g", "a", marginal_cost=10.0, capacity=9.0)],
                         demands=[Demand("d", "a", "l", dsr_share=0.1)], loads={"l": [10.0]})
    res = clear_nodal_auction(case, FixedDecisions())
    assert res.cube("pu_flex", "d")[0, 0, 0] == pytest.approx(0.0, abs=1e-9)
    assert res.prices["a"][0, 0, 0] == pytest.approx(119.0, abs=1e-6)


def test_zero_demand():
    case = one_hour_case([Node("a", AC, "Z")], gens=[Generator("g", "a", marginal_cost=10.0, capacity=9.0)],
                         demands=[Demand("d", "a", "l")], loads={"l": [0.0]})
    res = clear_nodal_auction(case, FixedDecisions())
    assert res.cube("pg", "g")[0, 0, 0] == pytest.approx(0.0)
    assert 0.0 <= res.prices["a"][0, 0, 0] <= 10.0 + 1e-9


def test_auction_needs_fixed_topology():
    with pytest.raises(PlanningError, match="c0@2020"):
        clear_nodal_auction(random_small_case(1, n_candidates=1), FixedDecisions())


def test_prices_capped_and_raw_kept():
    # load above capacity: lost load sets a 5000 dual, reported at the cap
    case = one_hour_case([Node("a", AC, "Z")], gens=[Generator("g", "a", marginal_cost=10.0, capacity=5.0)],
                         demands=[Demand("d", "a", "l")], loads={"l": [10.0]})
    res = clear_nodal_auction(case, FixedDecisions())
    assert res.raw_prices["a"][0, 0, 0] == pytest.approx(5000.0)
    assert res.prices["a"][0, 0, 0] == pytest.approx(180.0)


def test_every_ac_node_priced():
    case = random_small_case(4, with_dc=True)
    res = plan_nodal(case)
    assert set(res.prices) == {n.id for n in case.network.nodes}
    assert res.duality_gap < 1e-6


def test_schedule_round_trip(tmp_path):
    case = random_small_case(6, with_storage=True)
    res = plan_nodal(case)
    paths = write_results(res, tmp_path)
    fixed = read_schedule(paths["schedule"])
    assert fixed.alpha == res.schedule["alpha"]
    assert fixed.stor_cap == pytest.approx(res.schedule["cap_stor"])
    again = clear_nodal_auction(case, fixed)
    assert again.objective == pytest.approx(res.objective, rel=1e-6)


def test_auction_on_planned_lines_reproduces_prices():
    # with binary-only investments, fixing them again leaves the same LP
    case = random_small_case(6)
    res = plan_nodal(case)
    again = clear_nodal_auction(case, res.fixed_decisions())
    for node in res.prices:
        assert np.allclose(again.prices[node], res.prices[node], atol=1e-6)


def test_hybrid_link_preferred_over_direct_interconnector():
    # cheap power in B and wind at W both want to reach A
    case = one_hour_case(
        [Node("A", AC, "A"), Node("B", AC, "B"), Node("W", AC, "OBZ", home_zone="A")],
        [Branch("AW", "A", "W", AC, CANDIDATE, capacity=10.0, susceptance=1.0, investment_cost=10.0),
         Branch("WB", "W", "B", AC, CANDIDATE, capacity=10.0, susceptance=1.0, investment_cost=10.0),
         Branch("AB", "A", "B", AC, CANDIDATE, capacity=10.0, susceptance=1.0, investment_cost=100.0)],
        [Generator("wind", "W", marginal_cost=0.0, capacity=4.0),
         Generator("gasA", "A", marginal_cost=100.0, capacity=20.0),
         Generator("cheapB", "B", marginal_cost=10.0, capacity=20.0)],
        [Demand("d", "A", "l")],
        {"l": [10.0]},
    )
    res = plan_nodal(case)
    built = {b for (b, _), v in res.schedule["alpha"].items() if v > 0.5}
    assert built == {"AW", "WB"}
