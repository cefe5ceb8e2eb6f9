import json
from pathlib import Path

import pandas as pd
import pytest

from gateplan.cli import EXIT_CONFIG, EXIT_DATA, EXIT_OK, main

PIVOTAL_JSON = str(Path(__file__).resolve().parents[1] / "cases" / "pivotal.json")


def run(*args):
    return main([str(a) for a in args])


def test_plan_zonal_pivotal_reports_redispatch(tmp_path, capsys):
    out = tmp_path / "z"
    assert run("plan", "--case", PIVOTAL_JSON, "--regime", "zonal", "--zones", "one", "--out", out) == EXIT_OK
    welfare = json.loads((out / "welfare.json").read_text())
    assert welfare[0]["redispatch_cost"] == pytest.approx(100.0)
    for name in ("schedule.csv", "prices.csv", "dispatch.csv", "pipeline_trace.csv", "manifest.json",
                 "solver.log", "prices.png", "redispatch_shares.png"):
        assert (out / name).exists(), name
    summary = json.loads(capsys.readouterr().out)
    assert summary["redispatch_cost"] == pytest.approx(100.0)


def test_no_figures_flag(tmp_path):
    assert run("plan", "--case", "pivotal", "--out", tmp_path, "--no-figures") == EXIT_OK
    assert not list(tmp_path.glob("*.png"))


def test_manifest_is_reproducible(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    run("plan", "--case", "pivotal", "--out", a, "--no-figures")
    run("plan", "--case", "pivotal", "--out", b, "--no-figures")
    assert (a / "manifest.json").read_text() == (b / "manifest.json").read_text()
    assert (a / "prices.csv").read_text() == (b / "prices.csv").read_text()


def test_invalid_regime_exits_2(tmp_path, capsys):
    assert run("plan", "--case", "pivotal", "--regime", "bogus", "--out", tmp_path) == EXIT_CONFIG
    assert "usage" in capsys.readouterr().err


def test_bad_zone_map_exits_2(tmp_path):
    assert run("plan", "--case", "pivotal", "--zones", "nope", "--out", tmp_path) == EXIT_CONFIG


def test_missing_case_exits_3(tmp_path, capsys):
    assert run("plan", "--case", tmp_path / "missing.json", "--out", tmp_path) == EXIT_DATA
    assert "data error" in capsys.readouterr().err


def test_zone_map_file(tmp_path):
    zmap = tmp_path / "zones.json"
    zmap.write_text(json.dumps({"m": "A", "n": "B"}))
    out = tmp_path / "o"
    assert run("plan", "--case", "pivotal", "--regime", "zonal", "--zones", zmap, "--out", out,
               "--no-figures") == EXIT_OK
    welfare = json.loads((out / "welfare.json").read_text())
    # two zones price the line limit, so nothing needs re-dispatch
    assert welfare[0]["redispatch_cost"] == pytest.approx(0.0, abs=1e-9)


def test_saved_topology_nodal_auction(tmp_path):
    plan = tmp_path / "plan"
    run("plan", "--case", "pivotal", "--out", plan, "--no-figures")
    auc = tmp_path / "auction"
    assert run("auction", "--case", "pivotal", "--topology", plan / "schedule.csv", "--out", auc,
               "--no-figures") == EXIT_OK
    prices = pd.read_csv(auc / "prices.csv").set_index("node")["price"]
    assert prices["m"] == pytest.approx(10.0) and prices["n"] == pytest.approx(100.0)


def test_nodal_topology_in_zonal_auction_then_redispatch(tmp_path):
    plan = tmp_path / "plan"
    run("plan", "--case", "pivotal", "--out", plan, "--no-figures")
    auc = tmp_path / "auction"
    assert run("auction", "--case", "pivotal", "--regime", "zonal", "--zones", "one",
               "--topology", plan / "schedule.csv", "--out", auc, "--no-figures") == EXIT_OK
    rd = tmp_path / "rd"
    assert run("redispatch", "--case", "pivotal", "--topology", plan / "schedule.csv", "--auction", auc,
               "--out", rd, "--no-figures") == EXIT_OK
    summary = json.loads((rd / "redispatch.json").read_text())
    assert summary["redispatch_cost"] == pytest.approx(100.0)
    assert summary["shares"]["CCGT"] == 100.0


def test_redispatch_of_uncongested_auction_costs_nothing(tmp_path):
    plan = tmp_path / "plan"
    run("plan", "--case", "pivotal", "--out", plan, "--no-figures")
    rd = tmp_path / "rd"
    assert run("redispatch", "--case", "pivotal", "--topology", plan / "schedule.csv", "--auction", plan,
               "--out", rd, "--no-figures") == EXIT_OK
    assert json.loads((rd / "redispatch.json").read_text())["redispatch_cost"] == pytest.approx(0.0, abs=1e-9)


def test_redispatch_missing_artifact_exits_3(tmp_path):
    assert run("redispatch", "--case", "pivotal", "--topology", tmp_path / "s.csv", "--auction", tmp_path,
               "--out", tmp_path / "rd") == EXIT_DATA


def test_export_balance_rows_and_determinism(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert run("export-model", "--case", "pivotal", "--format", "lp", "--out", a) == EXIT_OK
    run("export-model", "--case", "pivotal", "--format", "lp", "--out", b)
    assert (a / "model.lp").read_bytes() == (b / "model.lp").read_bytes()
    tags = pd.read_csv(a / "constraint_tags.csv")
    assert (tags["tag"] == "balance_ac").sum() == 2


def test_export_builtin_reduced_without_solving(tmp_path):
    assert run("export-model", "--case", "builtin", "--reduced", "--out", tmp_path) == EXIT_OK
    text = (tmp_path / "model.mps").read_text()
    assert text.startswith("NAME")
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert manifest["summary"]["binaries"] > 0
