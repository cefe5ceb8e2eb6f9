"""Independent reference computations and small case builders shared by tests."""

from __future__ import annotations

import dataclasses
import itertools

import numpy as np

from gateplan.case import PlanningCase, Settings
from gateplan.formulation import FixedDecisions, build_model, get_backend, solve
from gateplan.grid import AC, EXISTING, Branch, Demand, Generator, Network, Node
from gateplan.scenario import ProfileLibrary, ScenarioSet
from gateplan.toycases import single_period


def one_hour_case(nodes, branches=(), gens=(), demands=(), loads=None, storage=(), converters=(),
                  settings=None, n_hours=1):
    """Case with one scenario, one year and unit hour weights."""
    net = Network(tuple(nodes), tuple(branches), tuple(converters), tuple(gens), tuple(demands), tuple(storage))
    sset = single_period(n_hours)
    prof = {k: np.asarray(v, dtype=float).reshape(1, 1, n_hours) for k, v in (loads or {}).items()}
    return PlanningCase(net, sset, ProfileLibrary(prof), settings or Settings(discount_rate=0.0))


def with_years(case: PlanningCase, years=(2020, 2030)) -> PlanningCase:
    """Copy of a one-year case repeated over several simulation years."""
    s = case.scenarios
    n = len(years)
    sset = ScenarioSet(s.scenarios, s.probabilities, tuple(years),
                       np.repeat(s.block_weights, n, axis=1), hours_per_block=s.hours_per_block, dt=s.dt)
    prof = ProfileLibrary({k: np.repeat(case.profiles[k], n, axis=1) for k in case.profiles.keys()})
    return dataclasses.replace(case, scenarios=sset, profiles=prof)


def brute_force_optimum(case: PlanningCase, backend_name: str = "scipy") -> tuple[float, dict]:
    """Best objective over every 0/1 assignment of the build binaries, one LP each."""
    backend = get_backend(backend_name)
    keys = list(build_model(case).family("alpha"))
    best, best_alpha = -np.inf, None
    for bits in itertools.product((0.0, 1.0), repeat=len(keys)):
        alpha = dict(zip(keys, bits))
        model = build_model(case, fixed=FixedDecisions(alpha=alpha))
        res = solve(model, backend)
        if res.ok and res.objective > best:
            best, best_alpha = res.objective, alpha
    return best, best_alpha


def random_redispatch_case(seed: int, n_gens: int = 3) -> PlanningCase:
    """Two nodes, one line, up to three generators; always feasible without shedding."""
    rng = np.random.default_rng(seed)
    cap = float(rng.choice([2.0, 3.0, 4.0]))
    load_m, load_n = float(rng.choice([0.0, 1.0, 2.0])), float(rng.choice([4.0, 6.0, 8.0]))
    nodes_of = ["m", "n"] + [str(rng.choice(["m", "n"])) for _ in range(n_gens - 2)]
    costs = rng.choice([0.0, 10.0, 25.0, 60.0, 89.0, 120.0], size=n_gens, replace=False)
    gens = [Generator(f"g{i}", nodes_of[i], EXISTING, float(costs[i]), float(rng.choice([4.0, 6.0, 9.0])),
                      gen_type="ccgt") for i in range(n_gens)]
    # the n side must cover its load through the line limit
    need = load_n - cap - sum(g.capacity for g in gens if g.node == "n")
    if need > 0:
        g = gens[1]
        gens[1] = dataclasses.replace(g, capacity=g.capacity + need + 1.0)
    demands = [Demand("dn", "n", "ln")]
    loads = {"ln": [load_n]}
    if load_m > 0:
        demands.append(Demand("dm", "m", "lm"))
        loads["lm"] = [load_m]
    return one_hour_case(
        [Node("m", AC, "Z"), Node("n", AC, "Z")],
        [Branch("mn", "m", "n", AC, EXISTING, capacity=cap, susceptance=1.0)],
        gens, demands, loads,
    )


def redispatch_grid_search(case: PlanningCase, market: dict[str, float], step: float = 0.1) -> float:
    """Cheapest cost-compensated re-dispatch found on a ``step`` MW grid.

    ``market`` maps generator id to its auction output. Loads are served in
    full; the line limits the net export of node ``m``.
    """
    net = case.network
    gens = list(net.generators)
    cap = net.branches[0].capacity
    load = {u.node: float(case.psi_demand(u).ravel()[0]) for u in net.demands}
    ranges = []
    for g in gens[:-1]:
        lo = -int(np.floor(market[g.id] / step + 1e-9))
        hi = int(np.floor((g.capacity - market[g.id]) / step + 1e-9))
        ranges.append(range(lo, hi + 1))
    last = gens[-1]
    best = np.inf
    for ks in itertools.product(*ranges):
        deltas = [k * step for k in ks]
        d_last = -sum(deltas)
        p_last = market[last.id] + d_last
        if p_last < -1e-9 or p_last > last.capacity + 1e-9:
            continue
        deltas.append(d_last)
        out = {g.id: market[g.id] + d for g, d in zip(gens, deltas)}
        export = sum(out[g.id] for g in gens if g.node == "m") - load.get("m", 0.0)
        if abs(export) > cap + 1e-9:
            continue
        cost = sum(g.marginal_cost * max(d, 0.0) - g.reclaimable_cost * max(-d, 0.0) for g, d in zip(gens, deltas))
        best = min(best, cost)
    return best


def fake_result(case: PlanningCase, dispatch: dict, prices: dict, schedule: dict | None = None,
                objective: float = 0.0):
    """PlanningResult with hand-set dispatch and prices for ledger arithmetic."""
    from gateplan.results import PlanningResult

    sched = {"alpha": {}, "cap_gen": {}, "cap_conv": {}, "cap_stor": {}}
    sched.update(schedule or {})
    shape = (len(case.scenarios.scenarios), len(case.scenarios.years), case.scenarios.n_hours)
    disp = {fam: {a: np.asarray(v, dtype=float).reshape(shape) for a, v in d.items()} for fam, d in dispatch.items()}
    pr = {n: np.asarray(prices.get(n, 0.0), dtype=float) * np.ones(shape) for n in (x.id for x in case.network.nodes)}
    return PlanningResult(case, "test", sched, disp, pr, pr, objective, "optimal")
