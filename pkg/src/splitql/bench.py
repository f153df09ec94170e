"""Benchmark harness: filter microbenchmarks and split-execution scenarios.

Every measurement runs warm: five warmup executions, then the mean over five
timed trials. A split scenario measures four costs -- the direct query, the
view-building query, the view copy (serialize + deserialize into a client
heap) and the rewritten view query -- and reports the breakeven count: the
smallest number of follow-ups at which shipping the view beats re-running the
direct query every time.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

from . import dsl as q
from .query import QuerySpec
from .rewriter import generate_vq
from .session import Session


@dataclass
class BenchRecord:
    scenario: str
    freed: str
    direct_ms: float
    mvq_ms: float
    mv_rows: int
    mv_bytes: int
    copy_ms: float
    view_ms: float
    breakeven: int | None  # None reads as "never"
    rejected: str | None = None

    def as_row(self) -> dict:
        return {
            "scenario": self.scenario,
            "freed": self.freed,
            "direct_ms": round(self.direct_ms, 3),
            "mvq_ms": round(self.mvq_ms, 3),
            "mv_rows": self.mv_rows,
            "mv_bytes": self.mv_bytes,
            "copy_ms": round(self.copy_ms, 3),
            "view_ms": round(self.view_ms, 3),
            "breakeven": "never" if self.breakeven is None else self.breakeven,
            "rejected": self.rejected or "",
        }


def breakeven_count(direct_ms: float, mvq_ms: float, copy_ms: float,
                    view_ms: float) -> int | None:
    """Smallest k >= 1 with k*direct >= mvq + copy + k*view, else None."""
    if view_ms >= direct_ms:
        return None
    k = (mvq_ms + copy_ms) / (direct_ms - view_ms)
    return max(1, -int(-k // 1))  # ceil


def timed(fn, warmups: int = 5, trials: int = 5) -> float:
    for _ in range(warmups):
        fn()
    t0 = time.perf_counter()
    for _ in range(trials):
        fn()
    return (time.perf_counter() - t0) * 1000.0 / trials


# --------------------------------------------------------------- scenarios

def default_scenarios() -> list[dict]:
    """Split templates over the warehouse tables, one freed column each."""
    lineitem_revenue = (
        q.select().from_("lineitem")
        .field(q.sum(q.mul("l_extendedprice", "l_discount")), alias="revenue")
        .where(q.ge("l_shipdate", q.date("1994-01-01")))
        .where(q.lt("l_shipdate", q.date("1995-01-01")))
        .where(q.between("l_discount", 0.05, 0.07))
        .where(q.lt("l_quantity", 24))
        .build()
    )
    pricing_summary = (
        q.select().from_("lineitem")
        .field("l_returnflag").field("l_linestatus")
        .field(q.sum("l_quantity"), alias="sum_qty")
        .field(q.sum("l_extendedprice"), alias="sum_base_price")
        .field(q.avg("l_quantity"), alias="avg_qty")
        .field(q.avg("l_discount"), alias="avg_disc")
        .field(q.count(), alias="count_order")
        .where(q.le("l_shipdate", q.date("1998-09-02")))
        .groupby("l_returnflag", "l_linestatus")
        .orderby("l_returnflag").orderby("l_linestatus")
        .build()
    )
    revenue_by_orderdate = (
        q.select().from_("lineitem").join("orders").on("l_orderkey", "o_orderkey")
        .field("o_orderdate")
        .field(q.sum(q.mul("l_extendedprice", "l_discount")), alias="revenue")
        .where(q.lt("o_orderdate", q.date("1995-03-15")))
        .groupby("o_orderdate")
        .orderby("revenue", desc=True)
        .limit(10)
        .build()
    )
    shipmode_counts = (
        q.select().from_("lineitem").join("orders").on("l_orderkey", "o_orderkey")
        .field("l_shipmode")
        .field(q.count(), alias="orders_n")
        .where(q.ge("l_receiptdate", q.date("1994-01-01")))
        .where(q.lt("l_receiptdate", q.date("1995-01-01")))
        .groupby("l_shipmode")
        .orderby("l_shipmode")
        .build()
    )
    promo_revenue = (
        q.select().from_("lineitem").join("part").on("l_partkey", "p_partkey")
        .field(q.sum(q.mul("l_extendedprice", q.sub(1.0, "l_discount"))), alias="promo")
        .where(q.ge("l_shipdate", q.date("1995-09-01")))
        .where(q.lt("l_shipdate", q.date("1995-10-01")))
        .where(q.gt("p_size", 10))
        .build()
    )
    priority_counts = (
        q.select().from_("orders")
        .field("o_orderpriority")
        .field(q.count(), alias="n")
        .where(q.ge("o_orderdate", q.date("1993-07-01")))
        .where(q.lt("o_orderdate", q.date("1993-10-01")))
        .groupby("o_orderpriority")
        .orderby("o_orderpriority")
        .build()
    )
    urgent_lineitems = (
        q.select().from_("lineitem")
        .field(q.sum("l_extendedprice"), alias="total")
        .field(q.count(), alias="n")
        .where(q.isin("l_orderkey",
                      q.select().from_("orders").field("o_orderkey")
                      .where(q.eq("o_orderpriority", "1-URGENT"))))
        .where(q.lt("l_quantity", 30))
        .build()
    )
    price_spread = (
        q.select().from_("lineitem")
        .field("l_returnflag")
        .field(q.min("l_extendedprice"), alias="lo")
        .field(q.max("l_extendedprice"), alias="hi")
        .field(q.avg("l_extendedprice"), alias="mid")
        .where(q.gt("l_quantity", 5))
        .groupby("l_returnflag")
        .build()
    )
    quantity_profile = (
        q.select().from_("lineitem")
        .field("l_quantity").field(q.count(), alias="n")
        .where(q.between("l_discount", 0.02, 0.08))
        .groupby("l_quantity")
        .orderby("l_quantity")
        .build()
    )
    order_value_by_status = (
        q.select().from_("orders")
        .field("o_orderstatus")
        .field(q.sum("o_totalprice"), alias="value")
        .field(q.count(), alias="n")
        .where(q.gt("o_totalprice", 1000.0))
        .groupby("o_orderstatus")
        .build()
    )
    tax_projection = (
        q.select().from_("lineitem")
        .field("l_orderkey").field("l_quantity").field("l_tax")
        .where(q.ge("l_shipdate", q.date("1997-01-01")))
        .where(q.gt("l_tax", 0.05))
        .build()
    )
    clerk_activity = (
        q.select().from_("orders")
        .field("o_clerk").field(q.count(), alias="handled")
        .where(q.ge("o_orderdate", q.date("1996-01-01")))
        .groupby("o_clerk")
        .orderby("handled", desc=True)
        .limit(25)
        .build()
    )

    return [
        {"id": "q6a", "spec": lineitem_revenue, "free": "l_shipdate"},
        {"id": "q6b", "spec": lineitem_revenue, "free": "l_discount"},
        {"id": "q6c", "spec": lineitem_revenue, "free": "l_quantity"},
        {"id": "q1a", "spec": pricing_summary, "free": "l_shipdate"},
        {"id": "q3a", "spec": revenue_by_orderdate, "free": "o_orderdate"},
        {"id": "q12a", "spec": shipmode_counts, "free": "l_receiptdate"},
        {"id": "q14a", "spec": promo_revenue, "free": "l_shipdate"},
        {"id": "q4a", "spec": priority_counts, "free": "o_orderdate"},
        {"id": "q21a", "spec": urgent_lineitems, "free": "l_quantity"},
        {"id": "q17a", "spec": price_spread, "free": "l_quantity"},
        {"id": "q20a", "spec": quantity_profile, "free": "l_discount"},
        {"id": "q5a", "spec": order_value_by_status, "free": "o_totalprice"},
        {"id": "proj", "spec": tax_projection, "free": "l_shipdate"},
        {"id": "clerk", "spec": clerk_activity, "free": "o_orderdate"},
    ]


def synthetic_scenarios(table: str = "synth", second: str = "synth_dim") -> list[dict]:
    """The same template shapes instantiated over the synthetic columns."""
    revenue = (
        q.select().from_(table)
        .field(q.sum(q.mul("v_float", "v_int")), alias="revenue")
        .where(q.ge("when", q.date("1994-01-01")))
        .where(q.lt("when", q.date("1995-01-01")))
        .where(q.between("v_float", 0.2, 0.8))
        .build()
    )
    summary = (
        q.select().from_(table)
        .field("tag")
        .field(q.sum("v_int"), alias="sum_v")
        .field(q.avg("v_float"), alias="avg_f")
        .field(q.count(), alias="n")
        .where(q.le("when", q.date("1998-01-01")))
        .groupby("tag")
        .orderby("tag")
        .build()
    )
    joined = (
        q.select().from_(table).join(second).on("fk", "pk")
        .field("dim_tag")
        .field(q.sum("v_float"), alias="total")
        .where(q.gt("dim_weight", 0.3))
        .groupby("dim_tag")
        .build()
    )
    spread = (
        q.select().from_(table)
        .field("k_sparse")
        .field(q.min("v_float"), alias="lo")
        .field(q.max("v_float"), alias="hi")
        .where(q.gt("v_int", 10))
        .groupby("k_sparse")
        .orderby("k_sparse")
        .build()
    )
    membership = (
        q.select().from_(table)
        .field(q.count(), alias="n")
        .where(q.isin("fk", q.select().from_(second).field("pk")
                      .where(q.eq("dim_tag", "alpha"))))
        .build()
    )
    projection = (
        q.select().from_(table)
        .field("k_dense").field("v_int").field("tag")
        .where(q.lt("v_float", 0.5))
        .build()
    )
    return [
        {"id": "syn_revenue_date", "spec": revenue, "free": "when"},
        {"id": "syn_revenue_band", "spec": revenue, "free": "v_int"},
        {"id": "syn_summary", "spec": summary, "free": "when"},
        {"id": "syn_join", "spec": joined, "free": "when"},
        {"id": "syn_spread", "spec": spread, "free": "v_int"},
        {"id": "syn_member", "spec": membership, "free": "when"},
        {"id": "syn_proj", "spec": projection, "free": "when"},
        {"id": "syn_summary_tag", "spec": summary, "free": "v_int"},
    ]


# ----------------------------------------------------------------- running

def run_split(session: Session, scenarios: list[dict], warmups: int = 5,
              trials: int = 5, client_heap_mb: int = 64) -> list[BenchRecord]:
    from .rewriter import FreeRejected
    from .session import ValidationFailed
    from .transport import mv_deserialize, mv_serialize

    records = []
    for sc in scenarios:
        spec: QuerySpec = sc["spec"]
        freed: str = sc["free"]
        try:
            direct_ms = timed(lambda: session.query(spec)[0], warmups, trials)
            free_result = session.free(spec, freed)
        except (FreeRejected, ValidationFailed) as exc:
            records.append(BenchRecord(sc["id"], freed, 0.0, 0.0, 0, 0, 0.0, 0.0,
                                       None, rejected=str(exc)))
            continue
        definition = free_result.definition
        mvq_ms = timed(lambda: session.query(definition.mvq)[0], warmups, trials)
        mv_rs, _ = session.query(definition.mvq)

        def copy_once(tag=[0]):
            payload = mv_serialize(mv_rs, definition)
            client = Session(heap_mb=client_heap_mb)
            mv_deserialize(payload, client.heap, client.catalog,
                           table_name=definition.name)
            tag[0] += 1
            return payload

        copy_ms = timed(copy_once, warmups, trials)

        client = Session(heap_mb=client_heap_mb)
        client.install_view(free_result.payload)
        vq = generate_vq(spec, definition)
        view_ms = timed(lambda: client.query(vq)[0], warmups, trials)

        records.append(BenchRecord(
            sc["id"], freed, direct_ms, mvq_ms, free_result.row_count,
            len(free_result.payload), copy_ms, view_ms,
            breakeven_count(direct_ms, mvq_ms, copy_ms, view_ms),
        ))
    return records


MICRO_FILTERS = [
    ("integer", "o_shippriority == 0", 1.0,
     lambda: q.select().from_("orders").field(q.count(), alias="n")
     .where(q.eq("o_shippriority", 0)).build()),
    ("float", "o_totalprice > 555.5", 1.0,
     lambda: q.select().from_("orders").field(q.count(), alias="n")
     .where(q.gt("o_totalprice", 555.5)).build()),
    ("string", "o_orderpriority == '1-URGENT'", 0.2,
     lambda: q.select().from_("orders").field(q.count(), alias="n")
     .where(q.eq("o_orderpriority", "1-URGENT")).build()),
]


def run_micro(session: Session, warmups: int = 5, trials: int = 5) -> list[dict]:
    """Count-under-filter latency per column type over the orders table."""
    rows = []
    table_rows = session.catalog.get("orders").row_count
    for kind, label, selectivity, build in MICRO_FILTERS:
        spec = build()
        ms = timed(lambda: session.query(spec)[0], warmups, trials)
        matched = int(session.query(spec)[0].rows()[0][0])
        rows.append({
            "type": kind,
            "filter": label,
            "selectivity": selectivity,
            "matched": matched,
            "observed_selectivity": round(matched / table_rows, 4) if table_rows else 0.0,
            "latency_ms": round(ms, 3),
            "rows_per_s": int(table_rows / (ms / 1000.0)) if ms > 0 else 0,
        })
    return rows
