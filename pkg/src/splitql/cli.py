"""Command-line entry points.

    splitql gen-data   --sf 0.01 --out data/            write a warehouse
    splitql load       --dir data/ [--scale-note 0.01]  load + print catalog
    splitql query      --data-dir data/ --spec q.json
    splitql free       --data-dir data/ --spec q.json --column l_shipdate --out view.abmv
    splitql bench-micro  --data-dir data/ [--report-dir reports/]
    splitql bench-split  --data-dir data/ [--scenarios file] [--report-dir reports/]
    splitql serve      --data-dir data/ --port 8750

Heap capacity comes from AB_HEAP_MB (default 512).
"""

from __future__ import annotations

import argparse
import json
import sys

from .heap import D32, F32, F64, STR, days_to_date
from .query import from_json, loads as spec_loads
from .rewriter import FreeRejected
from .session import Session, ValidationFailed


def _load_session(args) -> Session:
    session = Session()
    data_dir = getattr(args, "data_dir", None) or getattr(args, "dir", None)
    if data_dir:
        counts = session.load_dir(data_dir)
        print(f"loaded {len(counts)} tables from {data_dir}", file=sys.stderr)
    return session


def _print_result(rs, latency_ms: float) -> None:
    names = rs.names()
    print("|".join(names))
    for row in rs.rows():
        cells = []
        for (name, phys), value in zip(rs.schema, row):
            if phys == D32:
                cells.append(days_to_date(value).isoformat())
            elif phys in (F32, F64):
                cells.append(format(value, ".6f"))
            else:
                cells.append(str(value))
        print("|".join(cells))
    print(f"-- {rs.row_count} rows in {latency_ms:.2f} ms", file=sys.stderr)


def cmd_gen_data(args) -> int:
    from .tpch import generate, write_dir

    tables = generate(sf=args.sf, seed=args.seed)
    counts = write_dir(tables, args.out)
    for name, n in sorted(counts.items()):
        print(f"{name}: {n} rows")
    return 0


def cmd_load(args) -> int:
    session = Session()
    counts = session.load_dir(args.dir)
    if args.scale_note:
        print(f"# scale note: {args.scale_note}")
    for entry in session.catalog_listing():
        cols = ", ".join(f"{c['name']}:{c['type']}" for c in entry["columns"])
        print(f"{entry['name']} ({entry['row_count']} rows): {cols}")
    print(f"heap high water: {session.heap.high_water} / {session.heap.capacity} bytes")
    return 0


def cmd_query(args) -> int:
    session = _load_session(args)
    with open(args.spec, "r", encoding="utf-8") as fh:
        spec = spec_loads(fh.read())
    try:
        rs, ms = session.query(spec)
    except ValidationFailed as exc:
        for d in exc.diagnostics:
            print(f"error: {d}", file=sys.stderr)
        return 1
    _print_result(rs, ms)
    return 0


def cmd_free(args) -> int:
    session = _load_session(args)
    with open(args.spec, "r", encoding="utf-8") as fh:
        spec = spec_loads(fh.read())
    try:
        result = session.free(spec, args.column)
    except FreeRejected as exc:
        print(f"cannot free {args.column!r}: {exc.reason}", file=sys.stderr)
        return 1
    except ValidationFailed as exc:
        for d in exc.diagnostics:
            print(f"error: {d}", file=sys.stderr)
        return 1
    with open(args.out, "wb") as fh:
        fh.write(result.payload)
    print(f"{result.definition.name}: {result.row_count} rows, "
          f"{len(result.payload)} bytes, view build {result.mvq_ms:.2f} ms")
    return 0


def cmd_bench_micro(args) -> int:
    from .bench import run_micro
    from .report import micro_figure, write_csv

    session = _load_session(args)
    rows = run_micro(session)
    for r in rows:
        print(f"{r['type']:8s} {r['filter']:30s} sel={r['observed_selectivity']:<6} "
              f"{r['latency_ms']:>8.3f} ms  {r['rows_per_s']:>12,} rows/s")
    if args.report_dir:
        write_csv(rows, f"{args.report_dir}/bench_micro.csv")
        micro_figure(rows, f"{args.report_dir}/bench_micro.png")
        print(f"report written to {args.report_dir}/bench_micro.{{csv,png}}", file=sys.stderr)
    return 0


def cmd_bench_split(args) -> int:
    from .bench import default_scenarios, run_split
    from .report import split_figure, write_csv

    session = _load_session(args)
    if args.scenarios:
        with open(args.scenarios, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
        scenarios = [{"id": s["id"], "spec": from_json(s["spec"]), "free": s["free"]}
                     for s in raw]
    else:
        scenarios = default_scenarios()
    records = run_split(session, scenarios)
    header = f"{'scenario':12s} {'freed':14s} {'direct':>9s} {'mvq':>9s} {'rows':>8s} " \
             f"{'copy':>8s} {'view':>8s} {'breakeven':>9s}"
    print(header)
    for r in records:
        if r.rejected:
            print(f"{r.scenario:12s} {r.freed:14s} rejected: {r.rejected}")
            continue
        be = "never" if r.breakeven is None else str(r.breakeven)
        print(f"{r.scenario:12s} {r.freed:14s} {r.direct_ms:>9.2f} {r.mvq_ms:>9.2f} "
              f"{r.mv_rows:>8d} {r.copy_ms:>8.2f} {r.view_ms:>8.2f} {be:>9s}")
    if args.report_dir:
        write_csv([r.as_row() for r in records], f"{args.report_dir}/bench_split.csv")
        split_figure(records, f"{args.report_dir}/bench_split.png")
        print(f"report written to {args.report_dir}/bench_split.{{csv,png}}", file=sys.stderr)
    return 0


def cmd_serve(args) -> int:
    from .server import serve

    session = _load_session(args)
    serve(session, args.port)
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="splitql")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="write a TPC-H-shaped .tbl warehouse")
    p.add_argument("--sf", type=float, default=0.01)
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_gen_data)

    p = sub.add_parser("load", help="load a .tbl directory and print the catalog")
    p.add_argument("--dir", required=True)
    p.add_argument("--scale-note", default=None)
    p.set_defaults(fn=cmd_load)

    p = sub.add_parser("query", help="run a query spec file")
    p.add_argument("--data-dir", default=None)
    p.add_argument("--spec", required=True)
    p.set_defaults(fn=cmd_query)

    p = sub.add_parser("free", help="free a column: build and save its view payload")
    p.add_argument("--data-dir", default=None)
    p.add_argument("--spec", required=True)
    p.add_argument("--column", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_free)

    p = sub.add_parser("bench-micro", help="count-under-filter microbenchmarks")
    p.add_argument("--data-dir", default=None)
    p.add_argument("--report-dir", default="reports")
    p.set_defaults(fn=cmd_bench_micro)

    p = sub.add_parser("bench-split", help="split-execution scenario benchmarks")
    p.add_argument("--data-dir", default=None)
    p.add_argument("--scenarios", default=None)
    p.add_argument("--report-dir", default="reports")
    p.set_defaults(fn=cmd_bench_split)

    p = sub.add_parser("serve", help="serve the HTTP API")
    p.add_argument("--data-dir", default=None)
    p.add_argument("--port", type=int, default=8750)
    p.set_defaults(fn=cmd_serve)

    args = parser.parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    raise SystemExit(main())
