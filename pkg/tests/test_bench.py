import json
import os
import subprocess
import sys

import pytest

from splitql.bench import (
    breakeven_count,
    default_scenarios,
    run_micro,
    run_split,
    synthetic_scenarios,
)


def test_breakeven_definition():
    # k*direct >= mvq + copy + k*view at the smallest integer k >= 1
    assert breakeven_count(10.0, 25.0, 5.0, 1.0) == 4   # 30/9 -> ceil
    assert breakeven_count(10.0, 5.0, 1.0, 1.0) == 1
    assert breakeven_count(10.0, 100.0, 0.0, 10.0) is None  # view >= direct
    assert breakeven_count(10.0, 100.0, 0.0, 12.0) is None
    k = breakeven_count(4362.0, 9815.0, 247.0, 7.0)
    assert k == 3  # the canonical warehouse-scale reference point


def test_breakeven_is_minimal():
    direct, mvq, copy, view = 7.3, 31.0, 2.2, 1.9
    k = breakeven_count(direct, mvq, copy, view)
    assert k * direct >= mvq + copy + k * view
    if k > 1:
        assert (k - 1) * direct < mvq + copy + (k - 1) * view


def test_default_scenarios_cover_templates():
    scenarios = default_scenarios()
    assert len(scenarios) >= 12
    ids = [s["id"] for s in scenarios]
    assert len(ids) == len(set(ids))


def test_micro_selectivities(tpch_session):
    rows = run_micro(tpch_session, warmups=1, trials=2)
    by_type = {r["type"]: r for r in rows}
    assert by_type["integer"]["observed_selectivity"] == 1.0
    assert by_type["float"]["observed_selectivity"] == 1.0
    assert 0.17 <= by_type["string"]["observed_selectivity"] <= 0.23
    assert all(r["rows_per_s"] > 0 for r in rows)


def test_split_bench_small(tpch_session):
    scenarios = [s for s in default_scenarios() if s["id"] in ("q6a", "q12a")]
    records = run_split(tpch_session, scenarios, warmups=1, trials=2,
                        client_heap_mb=32)
    assert len(records) == 2
    for r in records:
        assert r.rejected is None
        assert r.mv_rows > 0 and r.mv_bytes > 0
        assert r.direct_ms > 0 and r.view_ms > 0


def test_split_bench_records_rejection(tpch_session):
    from splitql.tpch import join_example

    records = run_split(tpch_session,
                        [{"id": "bad", "spec": join_example(), "free": "l_orderkey"}],
                        warmups=1, trials=1)
    assert records[0].rejected is not None


def test_report_files(tmp_path, tpch_session):
    from splitql.report import micro_figure, split_figure, write_csv

    rows = run_micro(tpch_session, warmups=0, trials=1)
    write_csv(rows, tmp_path / "m.csv")
    micro_figure(rows, tmp_path / "m.png")
    records = run_split(tpch_session,
                        [s for s in default_scenarios() if s["id"] == "q6a"],
                        warmups=0, trials=1, client_heap_mb=32)
    write_csv([r.as_row() for r in records], tmp_path / "s.csv")
    split_figure(records, tmp_path / "s.png")
    for name in ("m.csv", "m.png", "s.csv", "s.png"):
        assert (tmp_path / name).stat().st_size > 0


@pytest.mark.parametrize("args", [["--help"], ["gen-data", "--help"]])
def test_cli_help(args):
    out = subprocess.run([sys.executable, "-m", "splitql.cli", *args],
                         capture_output=True, text=True)
    assert out.returncode == 0


def test_cli_end_to_end(tmp_path):
    env = dict(os.environ, AB_HEAP_MB="128")
    data = tmp_path / "data"
    run = lambda *args: subprocess.run(
        [sys.executable, "-m", "splitql.cli", *args],
        capture_output=True, text=True, env=env)

    out = run("gen-data", "--sf", "0.001", "--out", str(data))
    assert out.returncode == 0, out.stderr

    out = run("load", "--dir", str(data), "--scale-note", "0.001")
    assert out.returncode == 0, out.stderr
    assert "lineitem" in out.stdout

    from splitql.query import dumps
    from splitql.tpch import q6

    spec_file = tmp_path / "q6.json"
    spec_file.write_text(dumps(q6()))
    out = run("query", "--data-dir", str(data), "--spec", str(spec_file))
    assert out.returncode == 0, out.stderr
    assert "revenue" in out.stdout

    view_file = tmp_path / "view.abmv"
    out = run("free", "--data-dir", str(data), "--spec", str(spec_file),
              "--column", "l_shipdate", "--out", str(view_file))
    assert out.returncode == 0, out.stderr
    assert view_file.read_bytes()[:4] == b"ABMV"

    from splitql.tpch import join_example

    join_file = tmp_path / "join.json"
    join_file.write_text(dumps(join_example()))
    out = run("free", "--data-dir", str(data), "--spec", str(join_file),
              "--column", "l_orderkey", "--out", str(tmp_path / "x.abmv"))
    assert out.returncode == 1
    assert "join" in out.stderr

    reports = tmp_path / "reports"
    out = run("bench-micro", "--data-dir", str(data), "--report-dir", str(reports))
    assert out.returncode == 0, out.stderr
    assert (reports / "bench_micro.csv").exists()
    assert (reports / "bench_micro.png").exists()


def test_cli_bench_split_with_scenario_file(tmp_path):
    env = dict(os.environ, AB_HEAP_MB="128")
    data = tmp_path / "data"
    subprocess.run([sys.executable, "-m", "splitql.cli", "gen-data", "--sf",
                    "0.001", "--out", str(data)], capture_output=True, env=env)
    from splitql.query import to_json
    from splitql.tpch import q6

    scen = tmp_path / "scenarios.json"
    scen.write_text(json.dumps([{"id": "q6a", "spec": to_json(q6()),
                                 "free": "l_shipdate"}]))
    reports = tmp_path / "reports"
    out = subprocess.run([sys.executable, "-m", "splitql.cli", "bench-split",
                          "--data-dir", str(data), "--scenarios", str(scen),
                          "--report-dir", str(reports)],
                         capture_output=True, text=True, env=env)
    assert out.returncode == 0, out.stderr
    assert "q6a" in out.stdout
    assert (reports / "bench_split.csv").exists()
    assert (reports / "bench_split.png").exists()
