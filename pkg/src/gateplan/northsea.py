"""Built-in North Sea test case: appendix tables plus a synthetic profile pack.

Demand and existing-generation magnitudes are not part of the published
tables, so the profile pack is synthetic. It keeps the published structure:
three pathways times two weather years, simulation years 2020, 2030 and
2040, clustered to representative days. Replace ``synthetic_raw_profiles``
output with real series to study real data.
"""

from __future__ import annotations

import math

import numpy as np

from .case import PlanningCase, Settings
from .grid import (
    AC,
    CANDIDATE,
    DC,
    EXISTING,
    Branch,
    Converter,
    Demand,
    Generator,
    Network,
    Node,
    StorageUnit,
    candidate_route_length,
)
from .scenario import build_scenario_set

# id, latitude, longitude, converter limit GW, OWPP limit GW, storage limit GWh
NODE_TABLE = (
    ("UK1", 52.21025, 1.57374, 3.0, 0.0, 1.0),
    ("FR", 50.96332, 1.82967, 3.0, 0.0, 1.0),
    ("BE", 51.32081, 3.20768, 3.0, 0.0, 1.0),
    ("NL", 52.22215, 4.49556, 3.0, 0.0, 1.0),
    ("DE", 53.67043, 7.84620, 3.0, 0.0, 1.0),
    ("DK", 55.61420, 8.72899, 3.0, 0.0, 1.0),
    ("NO", 58.43791, 6.00292, 3.0, 0.0, 1.0),
    ("UK2", 55.68940, -1.91052, 3.0, 0.0, 1.0),
    ("BE(WF)", 51.53509, 2.59644, 4.0, 4.0, 0.02),
    ("NL(WF)", 53.08300, 3.51802, 4.0, 4.0, 0.02),
    ("DE(WF)", 54.34610, 5.52400, 4.0, 4.0, 0.02),
    ("DK(WF)", 55.90115, 6.22240, 4.0, 4.0, 0.02),
    ("UK(WF)", 57.33721, 0.81425, 4.0, 4.0, 0.02),
)
ONSHORE = ("UK1", "FR", "BE", "NL", "DE", "DK", "NO", "UK2")
OFFSHORE = ("BE(WF)", "NL(WF)", "DE(WF)", "DK(WF)", "UK(WF)")
COUNTRY = {"UK1": "UK", "UK2": "UK", "BE(WF)": "BE", "NL(WF)": "NL", "DE(WF)": "DE",
           "DK(WF)": "DK", "UK(WF)": "UK"}
OFFSHORE_ZONE = "OBZ"

DC_ONLY = ("DC1", "DC2", "DC3")
# start, end, listed km, cable options
ROUTES = (
    ("UK1", "FR", 175, DC_ONLY), ("UK1", "BE", 188, DC_ONLY), ("UK1", "NL", 250, DC_ONLY),
    ("UK1", "DE", 565, DC_ONLY), ("UK1", "DK", 754, DC_ONLY), ("UK1", "BE(WF)", 129, DC_ONLY),
    ("UK1", "DE(WF)", 443, DC_ONLY), ("UK1", "NL(WF)", 204, DC_ONLY), ("UK1", "DK(WF)", 639, DC_ONLY),
    ("UK1", "UK(WF)", 716, DC_ONLY), ("FR", "BE", 130, DC_ONLY), ("FR", "DE(WF)", 565, DC_ONLY),
    ("FR", "NL(WF)", 328, DC_ONLY), ("BE", "NL", 168, DC_ONLY), ("BE", "DE", 511, DC_ONLY),
    ("BE", "DK", 752, DC_ONLY), ("BE", "BE(WF)", 61, DC_ONLY + ("AC1", "AC2", "AC3")),
    ("BE", "DE(WF)", 464, DC_ONLY), ("BE", "NL(WF)", 247, DC_ONLY), ("BE", "DK(WF)", 684, DC_ONLY),
    ("BE", "UK(WF)", 859, DC_ONLY), ("NL", "DE", 346, DC_ONLY), ("NL", "DK", 586, DC_ONLY),
    ("NL", "NO", 873, DC_ONLY), ("NL", "UK2", 713, DC_ONLY), ("NL", "BE(WF)", 189, DC_ONLY),
    ("NL", "DE(WF)", 308, DC_ONLY), ("NL", "NL(WF)", 146, DC_ONLY + ("AC4", "AC5")),
    ("NL", "DK(WF)", 531, DC_ONLY), ("NL", "UK(WF)", 770, DC_ONLY), ("DE", "DK", 280, DC_ONLY),
    ("DE", "NO", 679, DC_ONLY), ("DE", "UK2", 834, DC_ONLY), ("DE", "BE(WF)", 534, DC_ONLY),
    ("DE", "DE(WF)", 212, DC_ONLY), ("DE", "NL(WF)", 369, DC_ONLY), ("DE", "DK(WF)", 337, DC_ONLY),
    ("DE", "UK(WF)", 753, DC_ONLY), ("DK", "NO", 444, DC_ONLY), ("DK", "UK2", 836, DC_ONLY),
    ("DK", "BE(WF)", 761, DC_ONLY), ("DK", "DE(WF)", 311, DC_ONLY), ("DK", "NL(WF)", 550, DC_ONLY),
    ("DK", "DK(WF)", 201, DC_ONLY), ("DK", "UK(WF)", 654, DC_ONLY), ("NO", "UK2", 711, DC_ONLY),
    ("NO", "DE(WF)", 571, DC_ONLY), ("NO", "DK(WF)", 353, DC_ONLY), ("NO", "UK(WF)", 414, DC_ONLY),
    ("UK2", "DK(WF)", 638, DC_ONLY), ("UK2", "UK(WF)", 311, DC_ONLY), ("BE(WF)", "DE(WF)", 462, DC_ONLY),
    ("BE(WF)", "NL(WF)", 229, DC_ONLY), ("BE(WF)", "DK(WF)", 677, DC_ONLY), ("BE(WF)", "UK(WF)", 820, DC_ONLY),
    ("DE(WF)", "NL(WF)", 241, DC_ONLY), ("DE(WF)", "DK(WF)", 223, DC_ONLY), ("DE(WF)", "UK(WF)", 556, DC_ONLY),
    ("NL(WF)", "DK(WF)", 449, DC_ONLY), ("NL(WF)", "UK(WF)", 630, DC_ONLY), ("DK(WF)", "UK(WF)", 460, DC_ONLY),
)

# name: (network, MVA, listed km or None, cost in EUR: total for AC, per km for DC)
CABLES = {
    "AC1": (AC, 4213.0, 61, 1520e6),
    "AC2": (AC, 3319.0, 61, 1065e6),
    "AC3": (AC, 2414.0, 61, 785e6),
    "AC4": (AC, 3236.0, 146, 3345e6),
    "AC5": (AC, 2479.0, 146, 2338e6),
    "DC1": (DC, 4085.0, None, 3.593e6),
    "DC2": (DC, 3288.0, None, 3.194e6),
    "DC3": (DC, 2407.0, None, 2.575e6),
}

# EUR/MWh by generation class
MERIT_ORDER = {
    "PV, Hydro": 18.0,
    "Onshore wind": 25.0,
    "Offshore wind": 59.0,
    "Other RES": 60.0,
    "Gas CCGT": 89.0,
    "Nuclear": 110.0,
    "DSR": 119.0,
    "Gas OCGT, Coal, Pump storage, P2G, Other non-RES": 120.0,
    "Light oil": 140.0,
    "Heavy oil, Shale oil": 150.0,
}

# GW between market zones
NTC_GW = {
    ("UK", "FR"): 4.0, ("UK", "BE"): 1.0, ("UK", "NL"): 1.0, ("UK", "DE"): 1.4, ("UK", "DK"): 1.4,
    ("UK", "NO"): 2.8, ("FR", "BE"): 4.3, ("FR", "DE"): 3.0, ("BE", "NL"): 2.4, ("BE", "DE"): 1.0,
    ("NL", "DE"): 5.0, ("NL", "DK"): 0.7, ("NL", "NO"): 0.7, ("DE", "DK"): 3.5, ("DK", "NO"): 1.64,
}
# UK is split in two nodes; the NTC to Norway lands in the north
NTC_UK_NODE = {"NO": "UK2"}

# EUR/kW (EUR/kWh for storage)
INFRASTRUCTURE_COST = {
    "owpp": 2100.0,
    "converter_onshore": 192.5,
    "converter_offshore": 577.5,
    "storage_onshore": 183.0,
    "storage_offshore": 275.0,
}

VOLL = 5000.0
DSR_PRICE = MERIT_ORDER["DSR"]
PRICE_CAP = 180.0
CONSUMER_BID = 150.0
DISCOUNT_RATE = 0.04
SIM_YEARS = (2020, 2030, 2040)
CALENDAR_YEARS_PER_SIM_YEAR = 10
PATHWAYS = ("NT", "DG", "GA")
WEATHER_YEARS = (2014, 2015)

# synthetic assumptions (not in the published tables)
NTC_SUSCEPTANCE = 500.0
AC_CABLE_SUSCEPTANCE_KM = 15000.0
CONVERTER_LOSS = 0.01
STORAGE_EFFICIENCY = 0.95
DOMESTIC_UK_MW = 8000.0
DSR_SHARE = 0.03

# average demand in MW (2030, NT)
DEMAND_MW = {"UK1": 24000, "UK2": 9000, "FR": 52000, "BE": 10000, "NL": 13000, "DE": 60000,
             "DK": 4000, "NO": 15000}
# installed capacity in MW for 2040; earlier years are scaled by YEAR_FACTOR
GENERATION_MW = {
    "UK1": {"pv": 14000, "onwind": 6000, "ccgt": 22000, "nuclear": 6000, "ocgt": 3000, "light_oil": 1000},
    "UK2": {"onwind": 14000, "ccgt": 5000, "other_res": 2000, "ocgt": 1000},
    "FR": {"pv": 30000, "onwind": 30000, "hydro": 20000, "nuclear": 45000, "ccgt": 6000, "ocgt": 4000,
           "heavy_oil": 2000},
    "BE": {"pv": 8000, "onwind": 4000, "ccgt": 8000, "ocgt": 2000, "other_res": 1000},
    "NL": {"pv": 20000, "onwind": 8000, "ccgt": 12000, "coal": 2000, "other_res": 1000},
    "DE": {"pv": 80000, "onwind": 70000, "ccgt": 30000, "coal": 10000, "ocgt": 8000, "other_res": 8000,
           "light_oil": 2000},
    "DK": {"pv": 4000, "onwind": 7000, "ccgt": 1500, "other_res": 1500},
    "NO": {"hydro": 30000, "onwind": 6000, "ocgt": 500},
}
TYPE_COST = {
    "pv": 18.0, "hydro": 18.0, "onwind": 25.0, "offwind": 59.0, "other_res": 60.0, "ccgt": 89.0,
    "nuclear": 110.0, "ocgt": 120.0, "coal": 120.0, "light_oil": 140.0, "heavy_oil": 150.0,
}
TYPE_CATEGORY = {
    "pv": "RES", "hydro": "RES", "onwind": "RES", "offwind": "RES", "owpp": "RES", "other_res": "RES",
    "ccgt": "CCGT", "ocgt": "OCGT", "nuclear": "REST", "coal": "REST", "light_oil": "REST", "heavy_oil": "REST",
}
VARIABLE_TYPES = ("pv", "onwind", "offwind")
# share of the 2040 fleet available per simulation year, by pathway
YEAR_FACTOR = {
    "res": {"NT": (0.45, 0.75, 1.0), "DG": (0.45, 0.85, 1.0), "GA": (0.45, 0.8, 1.0)},
    "fossil": {"NT": (1.0, 0.85, 0.7), "DG": (1.0, 0.8, 0.6), "GA": (1.0, 0.75, 0.55)},
}
DEMAND_GROWTH = {"NT": (0.95, 1.0, 1.08), "DG": (0.95, 1.05, 1.15), "GA": (0.95, 1.02, 1.1)}


def route_key(a: str, b: str) -> str:
    return f"{a}-{b}"


def dc_node(node_id: str) -> str:
    return f"{node_id}-DC"


def node_coordinates() -> dict[str, tuple[float, float]]:
    return {r[0]: (r[1], r[2]) for r in NODE_TABLE}


def route_lengths(computed: bool = True) -> dict[tuple[str, str], float]:
    """Route lengths in km, from coordinates (default) or the listed table values."""
    coords = node_coordinates()
    if not computed:
        return {(a, b): float(km) for a, b, km, _ in ROUTES}
    return {(a, b): float(candidate_route_length(coords[a], coords[b])) for a, b, _, _ in ROUTES}


def home_zone(node_id: str) -> str:
    return COUNTRY.get(node_id, node_id)


def build_network() -> Network:
    nodes, branches, converters, gens, demands, storage = [], [], [], [], [], []
    for nid, lat, lon, conv_gw, owpp_gw, stor_gwh in NODE_TABLE:
        offshore = nid in OFFSHORE
        zone = OFFSHORE_ZONE if offshore else home_zone(nid)
        home = home_zone(nid)
        nodes.append(Node(nid, AC, zone, lat, lon, conv_gw * 1000, owpp_gw * 1000, stor_gwh * 1000, home_zone=home))
        nodes.append(Node(dc_node(nid), DC, zone, lat, lon, 0.0, 0.0, 0.0, home_zone=home))
        conv_cost = INFRASTRUCTURE_COST["converter_offshore" if offshore else "converter_onshore"] * 1000
        converters.append(Converter(f"CONV:{nid}", nid, dc_node(nid), CANDIDATE, conv_gw * 1000, conv_cost,
                                    CONVERTER_LOSS))
        stor_cost = INFRASTRUCTURE_COST["storage_offshore" if offshore else "storage_onshore"] * 1000
        storage.append(StorageUnit(f"STOR:{nid}", nid, CANDIDATE, stor_gwh * 1000, stor_cost,
                                   STORAGE_EFFICIENCY, STORAGE_EFFICIENCY, 0.0, 0.25, 0.25))
        if offshore:
            gens.append(Generator(f"OWPP:{nid}", nid, CANDIDATE, 0.0, owpp_gw * 1000,
                                  INFRASTRUCTURE_COST["owpp"] * 1000, profile_key=f"offwind:{nid}",
                                  gen_type="owpp"))
        else:
            demands.append(Demand(f"LOAD:{nid}", nid, f"demand:{nid}", bid_price=VOLL, dsr_price=DSR_PRICE,
                                  dsr_share=DSR_SHARE, voll=VOLL))
            for gtype, mw in GENERATION_MW[nid].items():
                gens.append(Generator(f"{gtype.upper()}:{nid}", nid, EXISTING, TYPE_COST[gtype], float(mw),
                                      profile_key=f"{gtype}:{nid}", gen_type=gtype))

    uk_node = {}
    for (a, b), gw in NTC_GW.items():
        na = NTC_UK_NODE.get(b, "UK1") if a == "UK" else a
        branches.append(Branch(f"NTC:{a}-{b}", na, b, AC, EXISTING, capacity=gw * 1000,
                               susceptance=NTC_SUSCEPTANCE, source="ntc"))
        uk_node[(a, b)] = na
    branches.append(Branch("DOM:UK1-UK2", "UK1", "UK2", AC, EXISTING, capacity=DOMESTIC_UK_MW,
                           susceptance=NTC_SUSCEPTANCE, source="domestic"))

    for a, b, km, cables in ROUTES:
        for cab in cables:
            net, mva, listed_km, cost = CABLES[cab]
            if net == AC:
                branches.append(Branch(f"{cab}:{route_key(a, b)}", a, b, AC, CANDIDATE, capacity=mva,
                                       susceptance=AC_CABLE_SUSCEPTANCE_KM / km, investment_cost=cost,
                                       length_km=float(km), cable=cab, source="route"))
            else:
                branches.append(Branch(f"{cab}:{route_key(a, b)}", dc_node(a), dc_node(b), DC, CANDIDATE,
                                       capacity=mva, investment_cost=cost * km, length_km=float(km),
                                       cable=cab, source="route"))
    return Network(tuple(nodes), tuple(branches), tuple(converters), tuple(gens), tuple(demands), tuple(storage))


def _wind_series(rng: np.random.Generator, days: int, mean_cf: float, common: np.ndarray) -> np.ndarray:
    hours = days * 24
    own = np.zeros(hours)
    shocks = rng.normal(0.0, 0.35, hours)
    for t in range(1, hours):
        own[t] = 0.97 * own[t - 1] + shocks[t]
    season = 0.35 * np.cos(2 * np.pi * np.arange(hours) / 8760.0)
    latent = 0.7 * common + 0.3 * own / 3.0 + season + math.log(mean_cf / (1 - mean_cf))
    return 1.0 / (1.0 + np.exp(-latent))


def _pv_series(rng: np.random.Generator, days: int, lat: float) -> np.ndarray:
    h = np.arange(days * 24)
    doy = h / 24.0
    decl = 23.45 * np.sin(2 * np.pi * (doy - 81) / 365.0)
    hour_angle = (h % 24 - 12) * 15.0
    phi, d = np.radians(lat), np.radians(decl)
    elev = np.sin(phi) * np.sin(d) + np.cos(phi) * np.cos(d) * np.cos(np.radians(hour_angle))
    clouds = np.repeat(rng.uniform(0.3, 1.0, days), 24)
    return np.clip(elev, 0.0, None) * clouds * 0.9


def _demand_series(rng: np.random.Generator, days: int, mean_mw: float) -> np.ndarray:
    h = np.arange(days * 24)
    daily = 1.0 + 0.15 * np.sin(2 * np.pi * (h % 24 - 8) / 24.0)
    season = 1.0 + 0.12 * np.cos(2 * np.pi * h / 8760.0)
    noise = np.repeat(rng.normal(1.0, 0.03, days), 24)
    return mean_mw * daily * season * noise


def synthetic_raw_profiles(days: int = 365, seed: int = 0, years=SIM_YEARS, pathways=PATHWAYS,
                           weather_years=WEATHER_YEARS) -> dict:
    """Hourly series ``raw[scenario][year][key]`` for every pathway and weather year.

    Generator series are per unit of the 2040 fleet; demand series are MW.
    """
    coords = node_coordinates()
    raw: dict = {}
    for wy in weather_years:
        wrng = np.random.default_rng([seed, wy])
        common = np.zeros(days * 24)
        shocks = wrng.normal(0.0, 0.25, days * 24)
        for t in range(1, days * 24):
            common[t] = 0.98 * common[t - 1] + shocks[t]
        common /= max(common.std(), 1e-9)
        weather = {}
        for nid in ONSHORE:
            lat = coords[nid][0]
            weather[f"onwind:{nid}"] = _wind_series(wrng, days, 0.27, common)
            weather[f"pv:{nid}"] = _pv_series(wrng, days, lat)
            weather[f"demand:{nid}"] = _demand_series(wrng, days, DEMAND_MW[nid])
        for nid in OFFSHORE:
            weather[f"offwind:{nid}"] = _wind_series(wrng, days, 0.48, common)
        for pw in pathways:
            scen = f"{pw}-{wy}"
            raw[scen] = {}
            for yi, y in enumerate(years):
                yidx = SIM_YEARS.index(y) if y in SIM_YEARS else min(yi, 2)
                res_f = YEAR_FACTOR["res"][pw][yidx]
                fos_f = YEAR_FACTOR["fossil"][pw][yidx]
                series = {}
                for nid in ONSHORE:
                    for gtype in GENERATION_MW[nid]:
                        key = f"{gtype}:{nid}"
                        if gtype in ("pv", "onwind"):
                            series[key] = weather[key] * res_f
                        elif TYPE_CATEGORY[gtype] == "RES":
                            series[key] = np.full(days * 24, res_f)
                        else:
                            series[key] = np.full(days * 24, fos_f)
                    series[f"demand:{nid}"] = weather[f"demand:{nid}"] * DEMAND_GROWTH[pw][yidx]
                for nid in OFFSHORE:
                    series[f"offwind:{nid}"] = weather[f"offwind:{nid}"]
                raw[scen][y] = series
    return raw


def builtin_north_sea(
    reduced: bool = False,
    days_per_year: int | None = None,
    seed: int = 0,
    raw: dict | None = None,
) -> PlanningCase:
    """The North Sea case with clustered synthetic profiles.

    Full: six scenarios, three simulation years, four days each, ten
    calendar years per simulation year. Reduced: one scenario, the 2030
    simulation year standing for 2030-2049, two days.
    """
    net = build_network()
    if reduced:
        years = (2030,)
        raw = raw or synthetic_raw_profiles(seed=seed, years=years, pathways=("NT",), weather_years=(2014,))
        k = days_per_year or 2
        sset, lib = build_scenario_set(raw, k, seed=seed, base_year=SIM_YEARS[0],
                                       multiplicity=CALENDAR_YEARS_PER_SIM_YEAR * 2)
    else:
        raw = raw or synthetic_raw_profiles(seed=seed)
        k = days_per_year or 4
        sset, lib = build_scenario_set(raw, k, seed=seed, base_year=SIM_YEARS[0],
                                       multiplicity=CALENDAR_YEARS_PER_SIM_YEAR)
    settings = Settings(discount_rate=DISCOUNT_RATE, price_cap=PRICE_CAP, consumer_bid=CONSUMER_BID)
    case = PlanningCase(net, sset, lib, settings, name="north-sea-reduced" if reduced else "north-sea",
                        generator_types=dict(TYPE_CATEGORY))
    return case


def hybrid_offshore_nodes(case: PlanningCase, schedule: dict, year: int | None = None) -> dict[str, set[str]]:
    """Offshore nodes whose built links reach two or more home market zones.

    Counts the home zones of the far ends of every built branch touching the
    offshore AC node or its DC node.
    """
    net = case.network
    year = case.scenarios.years[-1] if year is None else year
    built = {b for (b, y), v in schedule["alpha"].items() if y == year and v > 0.5}
    out = {}
    for nid in OFFSHORE:
        ends = {nid, dc_node(nid)}
        zones = set()
        for br in net.branches:
            if br.id not in built and br.is_candidate:
                continue
            if br.from_node in ends and br.to_node not in ends:
                zones.add(net.node(br.to_node).home)
            elif br.to_node in ends and br.from_node not in ends:
                zones.add(net.node(br.from_node).home)
        if len(zones) >= 2:
            out[nid] = zones
    return out


def table_counts() -> dict[str, int]:
    return {
        "routes": len(ROUTES),
        "cables": len(CABLES),
        "ntc": len(NTC_GW),
        "nodes": len(NODE_TABLE),
        "merit_order": len(MERIT_ORDER),
    }
