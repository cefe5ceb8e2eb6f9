"""Hybrid AC/DC network data model, validation and zone partitions."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping

AC = "AC"
DC = "DC"
EXISTING = "existing"
CANDIDATE = "candidate"
INTER = "inter"
INTRA = "intra"

EARTH_RADIUS_KM = 6371.0
ROUTE_LENGTH_FACTOR = 1.25


@dataclass(frozen=True)
class Node:
    id: str
    kind: str = AC
    zone_id: str = ""
    latitude: float = 0.0
    longitude: float = 0.0
    converter_cap_limit: float = 0.0
    owpp_cap_limit: float = 0.0
    storage_cap_limit: float = 0.0
    # zone used by the home market design; falls back to zone_id
    home_zone: str | None = None

    @property
    def home(self) -> str:
        return self.home_zone or self.zone_id


@dataclass(frozen=True)
class Branch:
    """AC or DC transmission branch between two nodes of the same network type."""

    id: str
    from_node: str
    to_node: str
    network: str = AC
    status: str = EXISTING
    capacity: float = 0.0
    susceptance: float | None = None
    transformer_ratio: float = 1.0
    investment_cost: float | None = None
    length_km: float | None = None
    cable: str | None = None
    source: str | None = None

    @property
    def is_candidate(self) -> bool:
        return self.status == CANDIDATE

    @property
    def endpoints(self) -> tuple[str, str]:
        return (self.from_node, self.to_node)


@dataclass(frozen=True)
class Converter:
    id: str
    ac_node: str
    dc_node: str
    status: str = CANDIDATE
    capacity: float = 0.0
    unit_investment: float = 0.0
    loss_factor: float = 0.0

    @property
    def is_candidate(self) -> bool:
        return self.status == CANDIDATE


@dataclass(frozen=True)
class Generator:
    id: str
    node: str
    status: str = EXISTING
    marginal_cost: float = 0.0
    capacity: float = 0.0
    unit_investment: float = 0.0
    profile_key: str | None = None
    gen_type: str = "conventional"
    # variable cost reclaimed on down-regulation; None means the marginal cost
    avoided_cost: float | None = None

    @property
    def is_candidate(self) -> bool:
        return self.status == CANDIDATE

    @property
    def reclaimable_cost(self) -> float:
        if self.avoided_cost is not None:
            return self.avoided_cost
        if self.marginal_cost == 0.0:
            return 0.0
        return self.marginal_cost


@dataclass(frozen=True)
class Demand:
    """Load with a firm tranche bid at ``bid_price`` and an optional DSR tranche.

    ``dsr_share`` of the profile is flexible and bids ``dsr_price``. The firm
    remainder bids ``bid_price``; unserved firm load is lost load and is
    charged at ``voll`` during re-dispatch.
    """

    id: str
    node: str
    profile_key: str
    bid_price: float = 5000.0
    dsr_price: float = 119.0
    dsr_share: float = 0.0
    voll: float | None = None

    @property
    def lost_load_value(self) -> float:
        return self.bid_price if self.voll is None else self.voll


@dataclass(frozen=True)
class StorageUnit:
    id: str
    node: str
    status: str = CANDIDATE
    energy_cap: float = 0.0
    unit_investment: float = 0.0
    charge_eff: float = 1.0
    discharge_eff: float = 1.0
    self_discharge: float = 0.0
    charge_rate: float = 0.25
    discharge_rate: float = 0.25

    @property
    def is_candidate(self) -> bool:
        return self.status == CANDIDATE


@dataclass(frozen=True)
class Network:
    nodes: tuple[Node, ...] = ()
    branches: tuple[Branch, ...] = ()
    converters: tuple[Converter, ...] = ()
    generators: tuple[Generator, ...] = ()
    demands: tuple[Demand, ...] = ()
    storage: tuple[StorageUnit, ...] = ()
    base_mva: float = 100.0
    _node_index: dict = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "_node_index", {n.id: n for n in self.nodes})

    def node(self, node_id: str) -> Node:
        try:
            return self._node_index[node_id]
        except KeyError:
            raise KeyError(f"unknown node {node_id!r}") from None

    def has_node(self, node_id: str) -> bool:
        return node_id in self._node_index

    @property
    def ac_nodes(self) -> list[Node]:
        return [n for n in self.nodes if n.kind == AC]

    @property
    def dc_nodes(self) -> list[Node]:
        return [n for n in self.nodes if n.kind == DC]

    def ac_branches(self) -> list[Branch]:
        return [b for b in self.branches if b.network == AC]

    def dc_branches(self) -> list[Branch]:
        return [b for b in self.branches if b.network == DC]

    def candidate_branches(self) -> list[Branch]:
        return [b for b in self.branches if b.is_candidate]


def validate_network(network: Network) -> list[str]:
    """Return a list of human-readable violations; empty when well-formed."""
    problems: list[str] = []
    ids = [n.id for n in network.nodes]
    seen: set[str] = set()
    for nid in ids:
        if nid in seen:
            problems.append(f"duplicate node {nid}")
        seen.add(nid)

    for n in network.nodes:
        if n.kind not in (AC, DC):
            problems.append(f"node {n.id}: unknown kind {n.kind!r}")
        if not n.zone_id:
            problems.append(f"node {n.id}: zone coverage gap (no zone label)")
        for name in ("converter_cap_limit", "owpp_cap_limit", "storage_cap_limit"):
            if getattr(n, name) < 0:
                problems.append(f"node {n.id}: negative {name}")

    def kind_of(nid: str) -> str | None:
        return network.node(nid).kind if network.has_node(nid) else None

    for b in network.branches:
        for end in b.endpoints:
            if kind_of(end) is None:
                problems.append(f"branch {b.id}: dangling endpoint {end}")
        if b.from_node == b.to_node:
            problems.append(f"branch {b.id}: self loop")
        if b.network not in (AC, DC):
            problems.append(f"branch {b.id}: unknown network {b.network!r}")
        elif all(kind_of(e) is not None for e in b.endpoints):
            if any(kind_of(e) != b.network for e in b.endpoints):
                problems.append(f"branch {b.id}: endpoints not on the {b.network} network")
        if b.capacity <= 0:
            problems.append(f"branch {b.id}: capacity must be positive")
        if b.is_candidate and b.investment_cost is None:
            problems.append(f"branch {b.id}: candidate missing cost")
        if b.network == AC:
            if b.susceptance is None:
                problems.append(f"branch {b.id}: AC branch without susceptance")
            if b.transformer_ratio <= 0:
                problems.append(f"branch {b.id}: transformer ratio must be positive")

    for c in network.converters:
        if kind_of(c.ac_node) != AC:
            problems.append(f"converter {c.id}: AC side {c.ac_node} is not an AC node")
        if kind_of(c.dc_node) != DC:
            problems.append(f"converter {c.id}: DC side {c.dc_node} is not a DC node")
        if not 0 <= c.loss_factor < 1:
            problems.append(f"converter {c.id}: loss factor outside [0, 1)")
        if c.capacity < 0:
            problems.append(f"converter {c.id}: negative capacity")

    for g in network.generators:
        k = kind_of(g.node)
        if k is None:
            problems.append(f"generator {g.id}: dangling node {g.node}")
        elif k != AC:
            problems.append(f"generator {g.id}: generator on DC node")
        if g.capacity < 0:
            problems.append(f"generator {g.id}: negative capacity")
        if g.is_candidate and g.marginal_cost != 0:
            problems.append(f"generator {g.id}: candidate OWPP with nonzero marginal cost")

    for u in network.demands:
        k = kind_of(u.node)
        if k is None:
            problems.append(f"demand {u.id}: dangling node {u.node}")
        elif k != AC:
            problems.append(f"demand {u.id}: demand on DC node")
        if not 0 <= u.dsr_price <= u.lost_load_value:
            problems.append(f"demand {u.id}: dsr price outside [0, voll]")
        if u.lost_load_value < u.bid_price:
            problems.append(f"demand {u.id}: voll below bid price")
        if not 0 <= u.dsr_share <= 1:
            problems.append(f"demand {u.id}: dsr share outside [0, 1]")

    for j in network.storage:
        k = kind_of(j.node)
        if k is None:
            problems.append(f"storage {j.id}: dangling node {j.node}")
        elif k != AC:
            problems.append(f"storage {j.id}: storage on DC node")
        if not (0 < j.charge_eff <= 1 and 0 < j.discharge_eff <= 1):
            problems.append(f"storage {j.id}: efficiency outside (0, 1]")
        if not 0 <= j.self_discharge < 1:
            problems.append(f"storage {j.id}: self discharge outside [0, 1)")
        if j.charge_rate <= 0 or j.discharge_rate <= 0:
            problems.append(f"storage {j.id}: rates must be positive")
        if j.energy_cap < 0:
            problems.append(f"storage {j.id}: negative energy capacity")
    return problems


@dataclass(frozen=True)
class ZonePartition:
    """Node to zone map with the derived inter/intra edge classification."""

    zone_of: Mapping[str, str]
    edge_class: Mapping[str, str]

    @property
    def zones(self) -> list[str]:
        return sorted(set(self.zone_of.values()))

    def members(self, zone: str) -> list[str]:
        return [n for n, z in self.zone_of.items() if z == zone]

    def inter_edges(self) -> list[str]:
        return [e for e, c in self.edge_class.items() if c == INTER]

    def intra_edges(self) -> list[str]:
        return [e for e, c in self.edge_class.items() if c == INTRA]

    def is_inter(self, branch_id: str) -> bool:
        return self.edge_class[branch_id] == INTER


def partition_zones(network: Network, zone_map: Mapping[str, str]) -> ZonePartition:
    missing = [n.id for n in network.nodes if n.id not in zone_map]
    if missing:
        raise ValueError(f"zone map does not cover nodes: {', '.join(missing)}")
    zone_of = {n.id: zone_map[n.id] for n in network.nodes}
    edge_class = {
        b.id: INTER if zone_of[b.from_node] != zone_of[b.to_node] else INTRA
        for b in network.branches
    }
    return ZonePartition(zone_of, edge_class)


def zonal_partition(network: Network) -> ZonePartition:
    """Partition by each node's own zone label (zOBZ in the North Sea case)."""
    return partition_zones(network, {n.id: n.zone_id for n in network.nodes})


def home_market_partition(network: Network) -> ZonePartition:
    return partition_zones(network, {n.id: n.home for n in network.nodes})


def singleton_partition(network: Network) -> ZonePartition:
    return partition_zones(network, {n.id: n.id for n in network.nodes})


def single_zone_partition(network: Network, name: str = "ALL") -> ZonePartition:
    return partition_zones(network, {n.id: name for n in network.nodes})


def neighbors(network: Network, node_id: str) -> tuple[set[str], set[str]]:
    """AC and DC neighbours of a node.

    For an AC node the DC neighbours are the DC sides of attached converters;
    for a DC node the AC neighbours are the AC sides of attached converters.
    """
    node = network.node(node_id)
    ac: set[str] = set()
    dc: set[str] = set()
    for b in network.branches:
        if node_id in b.endpoints:
            other = b.to_node if b.from_node == node_id else b.from_node
            (ac if b.network == AC else dc).add(other)
    for c in network.converters:
        if node.kind == AC and c.ac_node == node_id:
            dc.add(c.dc_node)
        elif node.kind == DC and c.dc_node == node_id:
            ac.add(c.ac_node)
    return ac, dc


def great_circle_km(lat1: float, lon1: float, lat2: float, lon2: float) -> float:
    p1, p2 = math.radians(lat1), math.radians(lat2)
    dp = p2 - p1
    dl = math.radians(lon2 - lon1)
    h = math.sin(dp / 2) ** 2 + math.cos(p1) * math.cos(p2) * math.sin(dl / 2) ** 2
    return 2 * EARTH_RADIUS_KM * math.asin(min(1.0, math.sqrt(h)))


def candidate_route_length(a: tuple[float, float], b: tuple[float, float]) -> int:
    """Route length in km: 1.25 times the great-circle distance, rounded."""
    return int(round(ROUTE_LENGTH_FACTOR * great_circle_km(a[0], a[1], b[0], b[1])))


def ac_flow_pu(susceptance: float, transformer_ratio: float, angle_diff: float) -> float:
    return susceptance / transformer_ratio * angle_diff


def iter_assets(network: Network) -> Iterable[tuple[str, object]]:
    for g in network.generators:
        yield "generator", g
    for c in network.converters:
        yield "converter", c
    for j in network.storage:
        yield "storage", j
    for b in network.branches:
        yield "branch", b
