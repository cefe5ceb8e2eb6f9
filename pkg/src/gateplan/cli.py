"""Command line entry point: plan, auction, redispatch and export-model."""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pandas as pd

from . import __version__
from .accounting import redispatch_breakdown, welfare_report, write_reports
from .case import CaseError, PlanningCase, case_to_dict, load_case
from .formulation.backends import SolverError, get_backend
from .formulation.builder import NODAL, ZONAL, FixedDecisions, build_model
from .formulation.model import export_model
from .grid import (
    ZonePartition,
    home_market_partition,
    partition_zones,
    single_zone_partition,
    singleton_partition,
    zonal_partition,
)
from .nodal import clear_nodal_auction, plan_nodal, read_schedule, write_results
from .results import PlanningError, PlanningResult, cap_prices
from .zonal import clear_zonal_auction, redispatch_rdcc, run_zonal_pipeline, write_trace

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_SOLVER = 4

REGIMES = ("nodal", "zonal", "hmd")
ZONE_PRESETS = ("labels", "home", "one", "singleton")

log = logging.getLogger("gateplan")


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    case: str
    regime: str
    zones: str | None
    backend: str | None
    gap: float
    time_limit: float | None
    seed: int
    out: Path
    reduced: bool
    figures: bool = True


def load_case_source(source: str, reduced: bool = False, seed: int = 0) -> PlanningCase:
    """``builtin`` (North Sea), ``pivotal`` (two-node example) or a JSON case path."""
    if source == "builtin":
        from .northsea import builtin_north_sea

        return builtin_north_sea(reduced=reduced, seed=seed)
    if source == "pivotal":
        from .toycases import pivotal_supplier_case

        return pivotal_supplier_case()
    path = Path(source)
    if not path.exists():
        raise CaseError(f"case file not found: {source}")
    return load_case(path)


def resolve_partition(case: PlanningCase, regime: str, zones: str | None) -> ZonePartition | None:
    net = case.network
    if regime == "nodal" and zones is None:
        return None
    preset = zones or ("home" if regime == "hmd" else "labels")
    if preset == "labels":
        return zonal_partition(net)
    if preset == "home":
        return home_market_partition(net)
    if preset == "one":
        return single_zone_partition(net)
    if preset == "singleton":
        return singleton_partition(net)
    path = Path(preset)
    if not path.exists():
        raise ConfigError(f"--zones must be one of {ZONE_PRESETS} or a JSON node->zone file, got {preset!r}")
    try:
        mapping = json.loads(path.read_text())
        return partition_zones(net, mapping)
    except (json.JSONDecodeError, ValueError) as exc:
        raise CaseError(f"zone map {path}: {exc}") from None


def _backend(cfg: RunConfig):
    try:
        return get_backend(cfg.backend, mip_gap=cfg.gap, time_limit=cfg.time_limit)
    except SolverError as exc:
        raise ConfigError(str(exc)) from None


def _setup_logging(out: Path) -> logging.Handler:
    out.mkdir(parents=True, exist_ok=True)
    handler = logging.FileHandler(out / "solver.log", mode="w")
    handler.setFormatter(logging.Formatter("%(levelname)s %(name)s: %(message)s"))
    root = logging.getLogger()
    root.addHandler(handler)
    root.setLevel(logging.INFO)
    logging.getLogger("matplotlib").setLevel(logging.WARNING)
    return handler


def case_digest(case: PlanningCase) -> str:
    doc = json.dumps(case_to_dict(case), sort_keys=True, default=float)
    return hashlib.sha256(doc.encode()).hexdigest()[:16]


def write_manifest(cfg: RunConfig, command: str, case: PlanningCase, outputs: dict, summary: dict) -> Path:
    manifest = {
        "command": command,
        "version": __version__,
        "case": cfg.case,
        "case_name": case.name,
        "case_digest": case_digest(case),
        "regime": cfg.regime,
        "zones": cfg.zones,
        "backend": cfg.backend or "default",
        "gap": cfg.gap,
        "time_limit": cfg.time_limit,
        "seed": cfg.seed,
        "reduced": cfg.reduced,
        "outputs": {k: Path(v).name for k, v in sorted(outputs.items())},
        "summary": summary,
    }
    path = cfg.out / "manifest.json"
    path.write_text(json.dumps(manifest, indent=1, sort_keys=True, default=float))
    return path


def _figures(cfg: RunConfig, outputs: dict, shares: dict | None = None) -> None:
    if not cfg.figures:
        return
    from . import plotting

    outputs["fig_prices"] = plotting.plot_mean_prices(pd.read_csv(outputs["prices"]), cfg.out / "prices.png")
    if "schedule" in outputs:
        outputs["fig_build"] = plotting.plot_build_schedule(pd.read_csv(outputs["schedule"]), cfg.out / "build.png")
    if shares:
        outputs["fig_redispatch"] = plotting.plot_redispatch_shares(shares, cfg.out / "redispatch_shares.png")


def cmd_plan(cfg: RunConfig) -> dict:
    case = load_case_source(cfg.case, cfg.reduced, cfg.seed)
    partition = resolve_partition(case, cfg.regime, cfg.zones)
    backend = _backend(cfg)
    if cfg.regime == "nodal" and partition is None:
        result = plan_nodal(case, backend)
        outputs = write_results(result, cfg.out)
        report = welfare_report("nodal", result)
        shares = None
        summary = {"status": result.status, "objective": result.objective, "mip_gap": result.mip_gap}
    else:
        zres = run_zonal_pipeline(case, partition, backend)
        result = zres.auction
        outputs = write_results(result, cfg.out)
        outputs["trace"] = write_trace(zres, cfg.out)
        rd_path = cfg.out / "redispatch.csv"
        zres.redispatch.frame(case).to_csv(rd_path, index=False)
        outputs["redispatch"] = rd_path
        report = welfare_report(cfg.regime, result, zres.redispatch)
        shares = report.redispatch_shares
        summary = {"status": result.status, "objective": result.objective,
                   "redispatch_cost": zres.redispatch.npv_cost, "welfare": zres.welfare,
                   "mip_gap": max(zres.inter.mip_gap, zres.intra.mip_gap)}
    outputs.update(write_reports([report], cfg.out))
    summary["social_welfare"] = report.social_welfare
    summary["gcs"] = report.gcs
    _figures(cfg, outputs, shares)
    write_manifest(cfg, "plan", case, outputs, summary)
    return summary


def _auction(case: PlanningCase, cfg: RunConfig, fixed: FixedDecisions) -> PlanningResult:
    partition = resolve_partition(case, cfg.regime, cfg.zones)
    backend = _backend(cfg)
    if partition is None:
        return clear_nodal_auction(case, fixed, backend)
    return clear_zonal_auction(case, partition, fixed, backend)


def cmd_auction(cfg: RunConfig, topology: Path) -> dict:
    case = load_case_source(cfg.case, cfg.reduced, cfg.seed)
    if not topology.exists():
        raise CaseError(f"topology file not found: {topology}")
    fixed = read_schedule(topology)
    result = _auction(case, cfg, fixed)
    outputs = write_results(result, cfg.out)
    report = welfare_report(f"{cfg.regime}-auction", result)
    outputs.update(write_reports([report], cfg.out))
    summary = {"status": result.status, "objective": result.objective, "social_welfare": report.social_welfare}
    _figures(cfg, outputs)
    write_manifest(cfg, "auction", case, outputs, summary)
    return summary


def result_from_files(case: PlanningCase, schedule: Path, dispatch: Path, prices: Path | None = None) -> PlanningResult:
    """Rebuild a result from the CSV files written by ``write_results``."""
    fixed = read_schedule(schedule)
    sset = case.scenarios
    shape = (len(sset.scenarios), len(sset.years), sset.n_hours)
    s_pos = {s: i for i, s in enumerate(sset.scenarios)}
    y_pos = {y: i for i, y in enumerate(sset.years)}
    disp: dict = {}
    df = pd.read_csv(dispatch)
    for rec in df.itertuples(index=False):
        arr = disp.setdefault(rec.variable, {}).setdefault(str(rec.asset), np.zeros(shape))
        arr[s_pos[str(rec.scenario)], y_pos[int(rec.year)], int(rec.hour)] = rec.value
    raw = {n.id: np.zeros(shape) for n in case.network.nodes}
    if prices is not None and prices.exists():
        for rec in pd.read_csv(prices).itertuples(index=False):
            raw[str(rec.node)][s_pos[str(rec.scenario)], y_pos[int(rec.year)], int(rec.hour)] = rec.price
    schedule_dict = {"alpha": fixed.alpha, "cap_gen": fixed.gen_cap, "cap_conv": fixed.conv_cap,
                     "cap_stor": fixed.stor_cap}
    return PlanningResult(case, "loaded", schedule_dict, disp, cap_prices(raw, case.settings.price_cap), raw,
                          float("nan"), "loaded")


def cmd_redispatch(cfg: RunConfig, topology: Path, auction_dir: Path) -> dict:
    case = load_case_source(cfg.case, cfg.reduced, cfg.seed)
    dispatch = auction_dir / "dispatch.csv"
    for p in (topology, dispatch):
        if not p.exists():
            raise CaseError(f"missing input artifact: {p}")
    market = result_from_files(case, topology, dispatch, auction_dir / "prices.csv")
    rd = redispatch_rdcc(case, market, read_schedule(topology), _backend(cfg), categories=case.generator_types)
    cfg.out.mkdir(parents=True, exist_ok=True)
    path = cfg.out / "redispatch.csv"
    rd.frame(case).to_csv(path, index=False)
    shares, empty = redispatch_breakdown(rd.payments)
    summary = {"status": rd.status, "redispatch_cost": rd.npv_cost, "shares": shares, "empty": empty}
    (cfg.out / "redispatch.json").write_text(json.dumps(summary, indent=1, sort_keys=True, default=float))
    outputs = {"redispatch": path, "summary": cfg.out / "redispatch.json"}
    if cfg.figures and not empty:
        from . import plotting

        outputs["fig_redispatch"] = plotting.plot_redispatch_shares(shares, cfg.out / "redispatch_shares.png")
    write_manifest(cfg, "redispatch", case, outputs, summary)
    return summary


def cmd_export_model(cfg: RunConfig, fmt: str) -> dict:
    case = load_case_source(cfg.case, cfg.reduced, cfg.seed)
    partition = resolve_partition(case, cfg.regime, cfg.zones)
    regime = NODAL if partition is None else ZONAL
    model = build_model(case, regime, partition=partition)
    try:
        text = export_model(model, fmt)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    cfg.out.mkdir(parents=True, exist_ok=True)
    path = cfg.out / f"model.{fmt}"
    path.write_text(text)
    tags = cfg.out / "constraint_tags.csv"
    model.tag_table().to_csv(tags, index=False)
    summary = {"rows": model.n_rows, "columns": model.n_vars, "binaries": len(model.integer_ids)}
    write_manifest(cfg, "export-model", case, {"model": path, "tags": tags}, summary)
    return summary


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="gateplan", description="Offshore grid generation and transmission planning")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--case", required=True, help="builtin, pivotal, or a JSON case file")
        sp.add_argument("--regime", choices=REGIMES, default="nodal")
        sp.add_argument("--zones", default=None,
                        help="labels, home, one, singleton, or a JSON node->zone map")
        sp.add_argument("--backend", default=None, help="highs or scipy (default: $GATEPLAN_BACKEND or highs)")
        sp.add_argument("--gap", type=float, default=1e-4, help="relative MIP gap")
        sp.add_argument("--time-limit", type=float, default=None, help="seconds per solve")
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--out", type=Path, default=Path("gateplan-out"))
        sp.add_argument("--reduced", action="store_true", help="1 scenario, 2 days, 1 year (builtin case)")
        sp.add_argument("--no-figures", action="store_true", help="skip PNG figures")

    sp = sub.add_parser("plan", help="expansion planning run")
    common(sp)
    sp = sub.add_parser("auction", help="clear a market on a saved topology")
    common(sp)
    sp.add_argument("--topology", type=Path, required=True, help="schedule.csv from a plan run")
    sp = sub.add_parser("redispatch", help="re-dispatch a saved auction outcome")
    common(sp)
    sp.add_argument("--topology", type=Path, required=True)
    sp.add_argument("--auction", type=Path, required=True, help="output directory of an auction run")
    sp = sub.add_parser("export-model", help="write the planning model as MPS or LP text")
    common(sp)
    sp.add_argument("--format", choices=("mps", "lp"), default="mps")
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code not in (0, None) else EXIT_OK
    cfg = RunConfig(args.case, args.regime, args.zones, args.backend, args.gap, args.time_limit, args.seed,
                    args.out, args.reduced, not args.no_figures)
    handler = _setup_logging(cfg.out)
    try:
        if args.command == "plan":
            summary = cmd_plan(cfg)
        elif args.command == "auction":
            summary = cmd_auction(cfg, args.topology)
        elif args.command == "redispatch":
            summary = cmd_redispatch(cfg, args.topology, args.auction)
        else:
            summary = cmd_export_model(cfg, args.format)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (CaseError, FileNotFoundError, KeyError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (PlanningError, SolverError) as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    finally:
        logging.getLogger().removeHandler(handler)
        handler.close()
    print(json.dumps(summary, indent=1, sort_keys=True, default=float))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
