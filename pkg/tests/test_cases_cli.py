import csv
import json

import pytest

from h2supply.cases import (CASES, ConfigError, RunConfig, case_variants, emit_plots_csv, exit_code, mip_options,
                            parse_tolerances, run_config)
from h2supply.cli import main

SHORT = "first_hours:48"


def write_config(tmp_path, **fields):
    data = {"case": "base", "year": 2030, "scale": 2, "reduction": SHORT, "weather_years": [2019], **fields}
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps(data))
    return p


# --- configuration --------------------------------------------------------------

def test_tolerance_parsing():
    assert parse_tolerances("gap_tol=1e-6, feas_tol=1e-8") == {"gap_tol": 1e-6, "feas_tol": 1e-8}
    assert parse_tolerances('{"node_limit": 50}') == {"node_limit": 50}
    assert parse_tolerances(None) == {}
    opts = mip_options({"gap_tol": 1e-4, "opt_tol": 1e-8, "node_limit": 7})
    assert opts.gap_tol == 1e-4 and opts.node_limit == 7 and opts.lp.opt_tol == 1e-8
    for bad in ("gap_tol", "speed=1", "gap_tol=-1", "gap_tol=inf"):
        with pytest.raises(ConfigError):
            parse_tolerances(bad)


def test_config_forms(tmp_path):
    cfg = RunConfig.load(write_config(tmp_path, years=[2030, 2040], scales=[2, 20]))
    assert cfg.years == (2030, 2040) and cfg.scales_kt == (2.0, 20.0)
    cfg = RunConfig.load(write_config(tmp_path, catalog="cat.json"))
    assert cfg.catalog == str((tmp_path / "cat.json").resolve())


@pytest.mark.parametrize("fields,msg", [
    ({"case": "everything"}, "unknown case"),
    ({"backend": "gurobi"}, "backend"),
    ({"colour": "blue"}, "unknown config keys"),
    ({"reduction": "weekly"}, "reduction"),
    ({"scale": -2}, "positive"),
    ({"demand_kind": "lumpy"}, "demand kind"),
])
def test_config_errors(tmp_path, fields, msg):
    with pytest.raises(ConfigError, match=msg):
        RunConfig.load(write_config(tmp_path, **fields))


def test_config_needs_year(tmp_path):
    p = tmp_path / "c.json"
    p.write_text(json.dumps({"case": "base", "scale": 2}))
    with pytest.raises(ConfigError):
        RunConfig.load(p)
    p.write_text("[1, 2]")
    with pytest.raises(ConfigError):
        RunConfig.load(p)


def test_case_variants(catalog):
    assert [v.label for v in case_variants("base", catalog, 2030)] == ["base"]
    unique = case_variants("unique", catalog, 2030)
    assert len(unique) == 15 and len({v.label for v in unique}) == 15
    no_low_c = case_variants("no_low_c", catalog, 2030)[0]
    assert "NGCC" not in no_low_c.restriction and "SMR" in no_low_c.restriction
    assert case_variants("expensive_ng", catalog, 2030)[0].cost_book.ng_price == 10.5
    taxes = [v.cost_book.co2_tax for v in case_variants("co2_sweep", catalog, 2030)]
    assert taxes == [100.0, 200.0, 300.0]
    assert set(CASES) == {"base", "unique", "no_low_c", "expensive_ng", "co2_sweep", "ideal"}


# --- running cases ------------------------------------------------------------------

def test_base_artifacts_and_schema(tmp_path):
    out = tmp_path / "results"
    assert main(["run", "--config", str(write_config(tmp_path)), "--out-dir", str(out)]) == 0
    cell = out / "base" / "2030" / "2kt"
    assert sorted(p.name for p in cell.iterdir()) == ["model_stats.json", "report.json", "table_e.csv"]
    rep = json.loads((cell / "report.json").read_text())
    assert {"case", "year", "scale_kt", "demand_kind", "reduction", "weather_years", "cheapest", "runs"} <= set(rep)
    run = rep["runs"][0]
    assert run["status"] == "optimal" and run["max_residual"] <= 1e-6
    cr = run["report"]
    assert set(cr["components"]) == {"co2_tax", "electricity", "natural_gas", "facility"}
    assert sum(cr["components"].values()) == pytest.approx(cr["lcoh_total"], abs=1e-9)
    rows = list(csv.reader((cell / "table_e.csv").open()))
    assert rows[0][:3] == ["label", "status", "PV (MW)"] and rows[1][:2] == ["base", "optimal"]
    stats = json.loads((cell / "model_stats.json").read_text())
    assert stats["base"]["binaries"] > 0
    assert not list(cell.glob(".*"))          # no temp files left behind


@pytest.fixture(scope="module")
def unique_report(tmp_path_factory):
    out = tmp_path_factory.mktemp("unique")
    cfg = RunConfig("unique", (2030,), (2.0,), reduction=SHORT, weather_years=(2019,))
    return run_config(cfg, out)[0]


def test_unique_enumerates_and_ranks(unique_report):
    runs = {r["label"]: r for r in unique_report["runs"]}
    assert len(runs) == 15
    lcoh = {k: r["report"]["lcoh_total"] for k, r in runs.items() if r["report"]}
    assert lcoh["SMR+NGCC"] < lcoh["PEM+PV"]
    assert unique_report["cheapest"] == min(lcoh, key=lcoh.get)
    for r in runs.values():
        assert r["status"] in ("optimal", "infeasible")


def test_unique_never_beats_base(unique_report, tmp_path):
    cfg = RunConfig("base", (2030,), (2.0,), reduction=SHORT, weather_years=(2019,))
    base = run_config(cfg, tmp_path)[0]["runs"][0]["report"]["lcoh_total"]
    best = min(r["report"]["lcoh_total"] for r in unique_report["runs"] if r["report"])
    assert best >= base - 1e-6


def test_co2_sweep_monotone_emissions(tmp_path):
    cfg = RunConfig("co2_sweep", (2030,), (2.0,), reduction=SHORT, weather_years=(2019,))
    rep = run_config(cfg, tmp_path)[0]
    co2 = [r["report"]["annual_co2_kt"] for r in rep["runs"]]
    assert [r["label"] for r in rep["runs"]] == ["co2_-50%", "co2_base", "co2_+50%"]
    assert all(b <= a + 1e-9 for a, b in zip(co2, co2[1:]))


def test_mps_export_backend(tmp_path):
    pytest.importorskip("highspy")
    cfg = RunConfig("base", (2030,), (2.0,), reduction="first_hours:24", weather_years=(2019,), backend="mps_export")
    rep = run_config(cfg, tmp_path)[0]
    run = rep["runs"][0]
    assert run["status"] == "optimal" and run["backend"] == "mps_export"
    assert (tmp_path / "base" / "2030" / "2kt" / "base" / "model.mps").exists()
    emb = run_config(RunConfig("base", (2030,), (2.0,), reduction="first_hours:24", weather_years=(2019,)),
                     tmp_path / "emb")[0]["runs"][0]
    assert run["objective"] == pytest.approx(emb["objective"], rel=1e-6)


def test_exit_codes():
    ok = [{"runs": [{"status": "optimal"}, {"status": "exported"}]}]
    assert exit_code(ok) == 0
    assert exit_code(ok + [{"runs": [{"status": "infeasible"}]}]) == 2
    assert exit_code([{"runs": [{"status": "node_limit"}]}]) == 2


def test_cli_errors_return_one(tmp_path, capsys):
    assert main(["run", "--config", str(tmp_path / "missing.json")]) == 1
    assert main(["run", "--config", str(write_config(tmp_path, case="nope"))]) == 1
    assert main(["plots-csv", str(tmp_path)]) == 1
    assert "error:" in capsys.readouterr().err


def test_cli_overrides_and_seed_check(tmp_path, capsys):
    cfg = write_config(tmp_path, reduction="first_hours:96")
    code = main(["run", "--config", str(cfg), "--out-dir", str(tmp_path / "r"), "--reduction", "first_hours:24",
                 "--tolerances", "gap_tol=1e-7", "--seed-check"])
    assert code == 0
    assert "seed check passed" in capsys.readouterr().out
    rep = json.loads((tmp_path / "r" / "base" / "2030" / "2kt" / "report.json").read_text())
    assert rep["reduction"] == "first_hours:24"


# --- plot export ---------------------------------------------------------------------

def test_plots_csv(tmp_path):
    cfg = RunConfig("co2_sweep", (2030,), (2.0,), reduction="first_hours:24", weather_years=(2019,))
    run_config(cfg, tmp_path / "one")
    one = list(csv.DictReader(emit_plots_csv(tmp_path / "one").open()))
    cfg3 = RunConfig("co2_sweep", (2030, 2040, 2050), (2.0,), reduction="first_hours:24", weather_years=(2019,))
    reports = run_config(cfg3, tmp_path / "three")
    path = emit_plots_csv(tmp_path / "three", tmp_path / "bundle.csv")
    rows = list(csv.DictReader(path.open()))
    assert len(rows) == 3 * len(one)
    assert list(rows[0]) == ["case", "year", "scale", "run", "metric", "component", "value"]
    # every value round-trips exactly
    by_key = {(r["year"], r["run"], r["metric"], r["component"]): r["value"] for r in rows}
    for rep in reports:
        for run in rep["runs"]:
            for comp, v in run["report"]["components"].items():
                assert float(by_key[(str(rep["year"]), run["label"], "lcoh", comp)]) == v
            assert float(by_key[(str(rep["year"]), run["label"], "lcoh", "total")]) == run["report"]["lcoh_total"]


def test_plots_csv_cli(tmp_path, capsys):
    run_config(RunConfig("base", (2030,), (2.0,), reduction="first_hours:24", weather_years=(2019,)), tmp_path)
    assert main(["plots-csv", str(tmp_path)]) == 0
    assert (tmp_path / "plots.csv").exists()
    with pytest.raises(FileNotFoundError):
        emit_plots_csv(tmp_path / "empty")
