"""Small programmatic cases: the two-node pivotal supplier and random instances."""

from __future__ import annotations

import numpy as np

from .case import PlanningCase, Settings
from .grid import AC, CANDIDATE, DC, EXISTING, Branch, Converter, Demand, Generator, Network, Node, StorageUnit
from .scenario import ProfileLibrary, ScenarioSet


def single_period(n_hours: int = 1, n_scenarios: int = 1, year: int = 2020) -> ScenarioSet:
    """One year, one block of ``n_hours`` unit-weight hours per scenario."""
    return ScenarioSet(
        scenarios=tuple(f"s{i}" for i in range(n_scenarios)),
        probabilities=np.full(n_scenarios, 1.0 / n_scenarios),
        years=(year,),
        block_weights=np.ones((n_scenarios, 1, 1)),
        hours_per_block=n_hours,
    )


def pivotal_supplier_case(line_capacity: float = 4.0) -> PlanningCase:
    """Wind at m; PV, gas and a 10 MW load at n; one 4 MW line between them."""
    nodes = (Node("m", AC, "Z1"), Node("n", AC, "Z1"))
    branches = (Branch("mn", "m", "n", AC, EXISTING, capacity=line_capacity, susceptance=1.0),)
    gens = (
        Generator("wind", "m", EXISTING, 10.0, 5.0, gen_type="wind", avoided_cost=0.0),
        Generator("pv", "n", EXISTING, 10.0, 5.0, gen_type="pv"),
        Generator("gas", "n", EXISTING, 100.0, 5.0, gen_type="ccgt"),
    )
    demands = (Demand("load", "n", "load_n"),)
    net = Network(nodes, branches, (), gens, demands, ())
    sset = single_period(1)
    profiles = ProfileLibrary({"load_n": np.full((1, 1, 1), 10.0)})
    return PlanningCase(net, sset, profiles, Settings(), name="pivotal-supplier")


def random_small_case(
    seed: int,
    n_nodes: int | None = None,
    n_candidates: int | None = None,
    n_hours: int | None = None,
    with_storage: bool = False,
    with_dc: bool = False,
) -> PlanningCase:
    """Random connected AC case with up to 6 nodes, 4 candidate lines and 4 hours.

    Nodes are split over two zones. Generators, loads and line data are drawn
    so that congestion is likely, which is where nodal and zonal designs differ.
    """
    rng = np.random.default_rng(seed)
    n = int(n_nodes or rng.integers(2, 7))
    hours = int(n_hours or rng.integers(1, 5))
    n_cand = int(n_candidates if n_candidates is not None else rng.integers(1, 5))
    ids = [f"n{i}" for i in range(n)]
    half = max(1, n // 2)
    nodes = [Node(nid, AC, "A" if i < half else "B") for i, nid in enumerate(ids)]

    branches = []
    # spanning tree keeps every node reachable
    for i in range(1, n):
        j = int(rng.integers(0, i))
        branches.append(Branch(f"e{i}", ids[j], ids[i], AC, EXISTING,
                               capacity=float(rng.uniform(2, 8)), susceptance=float(rng.uniform(0.5, 2.0))))
    pairs = [(a, b) for a in range(n) for b in range(a + 1, n)]
    for k in range(n_cand):
        a, b = pairs[int(rng.integers(len(pairs)))]
        branches.append(Branch(f"c{k}", ids[a], ids[b], AC, CANDIDATE,
                               capacity=float(rng.uniform(2, 10)), susceptance=float(rng.uniform(0.5, 2.0)),
                               investment_cost=float(rng.uniform(10, 400))))

    gens, demands, profiles = [], [], {}
    shape = (1, 1, hours)
    for i, nid in enumerate(ids):
        if rng.random() < 0.7 or i == 0:
            cost = float(rng.choice([0.0, 10.0, 25.0, 60.0, 89.0, 120.0]))
            g = Generator(f"g{i}", nid, EXISTING, cost, float(rng.uniform(3, 15)),
                          gen_type="wind" if cost == 0 else "ccgt", profile_key=None)
            if cost == 0:
                key = f"psi_g{i}"
                profiles[key] = rng.uniform(0.2, 1.0, size=shape)
                g = Generator(g.id, nid, EXISTING, 0.0, g.capacity, profile_key=key, gen_type="wind")
            gens.append(g)
        if rng.random() < 0.6 or i == n - 1:
            key = f"load{i}"
            profiles[key] = rng.uniform(2, 10, size=shape)
            demands.append(Demand(f"d{i}", nid, key, bid_price=float(rng.choice([150.0, 500.0])),
                                  dsr_price=119.0, dsr_share=float(rng.choice([0.0, 0.1]))))
    storage = []
    if with_storage:
        storage.append(StorageUnit("st0", ids[0], CANDIDATE, energy_cap=10.0, unit_investment=5.0,
                                   charge_eff=0.9, discharge_eff=0.9, self_discharge=0.01))
    converters = []
    if with_dc and n >= 2:
        nodes += [Node("x0", DC, "A"), Node("x1", DC, "B")]
        converters += [Converter("cv0", ids[0], "x0", CANDIDATE, 10.0, 2.0, 0.01),
                       Converter("cv1", ids[-1], "x1", CANDIDATE, 10.0, 2.0, 0.01)]
        branches.append(Branch("dc0", "x0", "x1", DC, CANDIDATE, capacity=8.0, investment_cost=50.0))
    net = Network(tuple(nodes), tuple(branches), tuple(converters), tuple(gens), tuple(demands), tuple(storage))
    sset = ScenarioSet(("s0",), np.ones(1), (2020,), np.ones((1, 1, 1)), hours_per_block=hours)
    return PlanningCase(net, sset, ProfileLibrary(profiles), Settings(), name=f"random-{seed}")
