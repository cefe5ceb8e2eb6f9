"""Planning case container and the JSON case schema."""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from .grid import (
    Branch,
    Converter,
    Demand,
    Generator,
    Network,
    Node,
    StorageUnit,
    validate_network,
)
from .scenario import ProfileLibrary, ScenarioSet

SCHEMA_VERSION = 1
REQUIRED_SECTIONS = ("nodes", "branches", "converters", "generators", "demands", "storage", "zones", "scenarios")


class CaseError(ValueError):
    """Raised for schema or validation problems in a case document."""


@dataclass(frozen=True)
class Settings:
    discount_rate: float = 0.04
    price_cap: float = 180.0
    consumer_bid: float = 150.0
    theta_min: float = -0.5
    theta_max: float = 0.5
    dtheta_max: float = 0.4
    big_m: float | None = None
    # relative demand decrement used to pick the lower price at flat merit-order segments
    price_perturbation: float = 1e-6

    @property
    def angle_big_m(self) -> float:
        return self.big_m if self.big_m is not None else self.theta_max - self.theta_min


@dataclass(frozen=True)
class PlanningCase:
    network: Network
    scenarios: ScenarioSet
    profiles: ProfileLibrary
    settings: Settings = field(default_factory=Settings)
    name: str = "case"
    generator_types: dict = field(default_factory=dict, compare=False)

    def psi_gen(self, gen: Generator) -> np.ndarray:
        shape = (len(self.scenarios.scenarios), len(self.scenarios.years), self.scenarios.n_hours)
        if gen.profile_key is None:
            return np.ones(shape)
        return self.profiles[gen.profile_key]

    def psi_demand(self, demand: Demand) -> np.ndarray:
        return self.profiles[demand.profile_key]

    def validate(self) -> list[str]:
        problems = validate_network(self.network)
        for g in self.network.generators:
            if g.profile_key is not None and g.profile_key not in self.profiles:
                problems.append(f"generator {g.id}: profile {g.profile_key!r} missing")
        for u in self.network.demands:
            if u.profile_key not in self.profiles:
                problems.append(f"demand {u.id}: profile {u.profile_key!r} missing")
        per_unit = [g.profile_key for g in self.network.generators if g.profile_key]
        problems += self.profiles.check(self.scenarios, per_unit=per_unit)
        return problems

    def with_network(self, network: Network) -> "PlanningCase":
        return dataclasses.replace(self, network=network)


def _records(objs) -> list[dict]:
    return [dataclasses.asdict(o) for o in objs]


def case_to_dict(case: PlanningCase, inline_profiles: bool = True) -> dict:
    net = case.network
    sset = case.scenarios
    doc: dict[str, Any] = {
        "schema": SCHEMA_VERSION,
        "name": case.name,
        "base_mva": net.base_mva,
        "settings": dataclasses.asdict(case.settings),
        "nodes": _records(net.nodes),
        "branches": _records(net.branches),
        "converters": _records(net.converters),
        "generators": _records(net.generators),
        "demands": _records(net.demands),
        "storage": _records(net.storage),
        "zones": {n.id: n.zone_id for n in net.nodes},
        "generator_types": dict(case.generator_types),
        "scenarios": {
            "names": list(sset.scenarios),
            "probabilities": sset.probabilities.tolist(),
            "years": list(sset.years),
            "base_year": sset.base_year,
            "multiplicity": sset.multiplicity,
            "hours_per_block": sset.hours_per_block,
            "dt": sset.dt,
            "block_weights": sset.block_weights.tolist(),
        },
    }
    if inline_profiles:
        doc["scenarios"]["profiles"] = {k: case.profiles[k].tolist() for k in sorted(case.profiles.keys())}
    return doc


def _build(cls, records, section):
    names = {f.name for f in dataclasses.fields(cls) if f.init}
    out = []
    for i, rec in enumerate(records):
        if not isinstance(rec, dict):
            raise CaseError(f"{section}[{i}]: expected an object")
        unknown = set(rec) - names
        if unknown:
            raise CaseError(f"{section}[{i}]: unknown field(s) {sorted(unknown)}")
        try:
            out.append(cls(**rec))
        except TypeError as exc:
            raise CaseError(f"{section}[{i}]: {exc}") from None
    return tuple(out)


def case_from_dict(doc: dict, profiles: ProfileLibrary | None = None, validate: bool = True) -> PlanningCase:
    missing = [s for s in REQUIRED_SECTIONS if s not in doc]
    if missing:
        raise CaseError(f"case document missing section(s): {', '.join(missing)}")
    nodes = _build(Node, doc["nodes"], "nodes")
    zones = doc["zones"] or {}
    if zones:
        nodes = tuple(dataclasses.replace(n, zone_id=zones.get(n.id, n.zone_id)) for n in nodes)
    net = Network(
        nodes=nodes,
        branches=_build(Branch, doc["branches"], "branches"),
        converters=_build(Converter, doc["converters"], "converters"),
        generators=_build(Generator, doc["generators"], "generators"),
        demands=_build(Demand, doc["demands"], "demands"),
        storage=_build(StorageUnit, doc["storage"], "storage"),
        base_mva=float(doc.get("base_mva", 100.0)),
    )
    sc = doc["scenarios"]
    for key in ("names", "probabilities", "years", "block_weights"):
        if key not in sc:
            raise CaseError(f"scenarios: missing field {key!r}")
    try:
        sset = ScenarioSet(
            scenarios=tuple(str(s) for s in sc["names"]),
            probabilities=np.asarray(sc["probabilities"], dtype=float),
            years=tuple(int(y) for y in sc["years"]),
            block_weights=np.asarray(sc["block_weights"], dtype=float),
            hours_per_block=int(sc.get("hours_per_block", 24)),
            dt=float(sc.get("dt", 1.0)),
            base_year=sc.get("base_year"),
            multiplicity=int(sc.get("multiplicity", 1)),
        )
    except ValueError as exc:
        raise CaseError(f"scenarios: {exc}") from None
    if profiles is None:
        if "profiles" not in sc:
            raise CaseError("scenarios: no inline profiles and no profile pack given")
        profiles = ProfileLibrary({k: np.asarray(v, dtype=float) for k, v in sc["profiles"].items()})
    settings = Settings(**doc.get("settings", {}))
    case = PlanningCase(net, sset, profiles, settings, name=doc.get("name", "case"),
                        generator_types=dict(doc.get("generator_types", {})))
    if validate:
        problems = case.validate()
        if problems:
            raise CaseError("invalid case: " + "; ".join(problems))
    return case


def load_case(path: str | Path, validate: bool = True) -> PlanningCase:
    """Load a JSON case; a sibling ``<stem>.profiles.csv`` pack is used when present."""
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise CaseError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    profiles = None
    pack = doc.get("scenarios", {}).get("profile_pack")
    if pack:
        import pandas as pd

        from .scenario import profiles_from_frame

        sc = doc["scenarios"]
        tmp = ScenarioSet(
            scenarios=tuple(str(s) for s in sc["names"]),
            probabilities=np.asarray(sc["probabilities"], dtype=float),
            years=tuple(int(y) for y in sc["years"]),
            block_weights=np.asarray(sc["block_weights"], dtype=float),
            hours_per_block=int(sc.get("hours_per_block", 24)),
        )
        profiles = profiles_from_frame(pd.read_csv(path.parent / pack), tmp)
    return case_from_dict(doc, profiles=profiles, validate=validate)


def save_case(case: PlanningCase, path: str | Path, profile_pack: bool = False) -> Path:
    """Write a case as JSON; optionally with profiles in a CSV pack next to it."""
    path = Path(path)
    doc = case_to_dict(case, inline_profiles=not profile_pack)
    if profile_pack:
        from .scenario import profiles_to_frame

        pack = path.with_suffix(".profiles.csv")
        profiles_to_frame(case.scenarios, case.profiles).to_csv(pack, index=False)
        doc["scenarios"]["profile_pack"] = pack.name
    path.write_text(json.dumps(doc, indent=1, sort_keys=False))
    return path
