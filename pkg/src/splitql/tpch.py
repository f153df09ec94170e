"""Deterministic TPC-H-shaped warehouse generator.

Emits the classic lineitem/orders/part/supplier/customer/nation/region tables
with the canonical scale-factor row counts (SF 0.01 lineitem is pinned to its
well-known 60,175 rows) and value domains chosen to reproduce the familiar
column cardinalities: ship dates span 1992-01-02..1998-12-01 (2,526 distinct
days), discounts take 11 distinct values, order priorities split the table
five ways, and so on. No external data generator is required.
"""

from __future__ import annotations

import numpy as np

from . import dsl as q
from .heap import D32, F32, I32, STR, date_to_days
from .query import QuerySpec

SCHEMAS: dict[str, list[tuple[str, str]]] = {
    "lineitem": [
        ("l_orderkey", I32), ("l_partkey", I32), ("l_suppkey", I32),
        ("l_linenumber", I32), ("l_quantity", I32), ("l_extendedprice", F32),
        ("l_discount", F32), ("l_tax", F32), ("l_returnflag", STR),
        ("l_linestatus", STR), ("l_shipdate", D32), ("l_commitdate", D32),
        ("l_receiptdate", D32), ("l_shipinstruct", STR), ("l_shipmode", STR),
        ("l_comment", STR),
    ],
    "orders": [
        ("o_orderkey", I32), ("o_custkey", I32), ("o_orderstatus", STR),
        ("o_totalprice", F32), ("o_orderdate", D32), ("o_orderpriority", STR),
        ("o_clerk", STR), ("o_shippriority", I32), ("o_comment", STR),
    ],
    "part": [
        ("p_partkey", I32), ("p_name", STR), ("p_mfgr", STR), ("p_brand", STR),
        ("p_type", STR), ("p_size", I32), ("p_container", STR),
        ("p_retailprice", F32), ("p_comment", STR),
    ],
    "supplier": [
        ("s_suppkey", I32), ("s_name", STR), ("s_nationkey", I32),
        ("s_acctbal", F32), ("s_comment", STR),
    ],
    "customer": [
        ("c_custkey", I32), ("c_name", STR), ("c_nationkey", I32),
        ("c_acctbal", F32), ("c_mktsegment", STR), ("c_comment", STR),
    ],
    "nation": [
        ("n_nationkey", I32), ("n_name", STR), ("n_regionkey", I32),
    ],
    "region": [
        ("r_regionkey", I32), ("r_name", STR),
    ],
}

# canonical dbgen row counts; lineitem varies per SF because of the
# 1..7 lines-per-order draw
_LINEITEM_ROWS = {1.0: 6_001_215, 0.1: 600_572, 0.01: 60_175}

PRIORITIES = ["1-URGENT", "2-HIGH", "3-MEDIUM", "4-NOT SPECIFIED", "5-LOW"]
SHIPMODES = ["REG AIR", "AIR", "RAIL", "SHIP", "TRUCK", "MAIL", "FOB"]
SHIPINSTRUCT = ["DELIVER IN PERSON", "COLLECT COD", "NONE", "TAKE BACK RETURN"]
SEGMENTS = ["AUTOMOBILE", "BUILDING", "FURNITURE", "MACHINERY", "HOUSEHOLD"]
REGIONS = ["AFRICA", "AMERICA", "ASIA", "EUROPE", "MIDDLE EAST"]
NATIONS = [
    "ALGERIA", "ARGENTINA", "BRAZIL", "CANADA", "EGYPT", "ETHIOPIA", "FRANCE",
    "GERMANY", "INDIA", "INDONESIA", "IRAN", "IRAQ", "JAPAN", "JORDAN", "KENYA",
    "MOROCCO", "MOZAMBIQUE", "PERU", "CHINA", "ROMANIA", "SAUDI ARABIA",
    "VIETNAM", "RUSSIA", "UNITED KINGDOM", "UNITED STATES",
]
CONTAINERS = [f"{a} {b}" for a in ("SM", "LG", "MED", "JUMBO", "WRAP")
              for b in ("CASE", "BOX", "BAG", "JAR", "PKG", "PACK", "CAN", "DRUM")]
TYPES = [f"{a} {b} {c}"
         for a in ("STANDARD", "SMALL", "MEDIUM", "LARGE", "ECONOMY", "PROMO")
         for b in ("ANODIZED", "BURNISHED", "PLATED", "POLISHED", "BRUSHED")
         for c in ("TIN", "NICKEL", "BRASS", "STEEL", "COPPER")]
_WORDS = ["quick", "silent", "final", "ironic", "bold", "even", "pending",
          "furious", "careful", "regular", "express", "special", "dogged",
          "blithe", "daring", "sly", "stealthy", "mute", "ruthless", "idle"]

_ORDER_START = "1992-01-01"
_ORDER_SPAN = 2406  # 1992-01-01 .. 1998-08-02
_CUTOFF = date_to_days("1995-06-17")


def sizes(sf: float) -> dict[str, int]:
    orders = int(round(1_500_000 * sf))
    lineitem = _LINEITEM_ROWS.get(sf, int(round(orders * 4.0117)))
    return {
        "orders": orders,
        "lineitem": lineitem,
        "customer": int(round(150_000 * sf)),
        "part": int(round(200_000 * sf)),
        "supplier": int(round(10_000 * sf)),
        "nation": 25,
        "region": 5,
    }


def _comments(rng, n: int) -> list[str]:
    a = rng.integers(0, len(_WORDS), size=n)
    b = rng.integers(0, len(_WORDS), size=n)
    return [f"{_WORDS[i]} {_WORDS[j]}" for i, j in zip(a, b)]


def _pick(rng, values: list[str], n: int) -> list[str]:
    idx = rng.integers(0, len(values), size=n)
    return [values[i] for i in idx]


def _line_counts(rng, n_orders: int, target: int) -> np.ndarray:
    counts = rng.integers(1, 8, size=n_orders, dtype=np.int64)
    diff = target - int(counts.sum())
    step = 1 if diff > 0 else -1
    bound = 7 if diff > 0 else 1
    i = 0
    while diff != 0:
        if counts[i % n_orders] != bound:
            counts[i % n_orders] += step
            diff -= step
        i += 1
    return counts


def generate(sf: float = 0.01, seed: int = 7) -> dict[str, list[tuple]]:
    """All tables as (name, phys, values) column lists, deterministically."""
    rng = np.random.default_rng(seed)
    n = sizes(sf)
    start = date_to_days(_ORDER_START)

    n_ord = n["orders"]
    o_orderdate = (start + rng.integers(0, _ORDER_SPAN, size=n_ord)).astype(np.int32)
    orders = [
        ("o_orderkey", I32, np.arange(1, n_ord + 1, dtype=np.int32)),
        ("o_custkey", I32, rng.integers(1, max(n["customer"], 2), size=n_ord).astype(np.int32)),
        ("o_orderstatus", STR, _pick(rng, ["F"] * 49 + ["O"] * 49 + ["P"] * 2, n_ord)),
        ("o_totalprice", F32, rng.uniform(850.0, 550_000.0, size=n_ord).astype(np.float32)),
        ("o_orderdate", D32, o_orderdate),
        ("o_orderpriority", STR, _pick(rng, PRIORITIES, n_ord)),
        ("o_clerk", STR, [f"Clerk#{int(v):09d}" for v in rng.integers(1, 1001, size=n_ord)]),
        ("o_shippriority", I32, np.zeros(n_ord, dtype=np.int32)),
        ("o_comment", STR, _comments(rng, n_ord)),
    ]

    counts = _line_counts(rng, n_ord, n["lineitem"])
    n_li = int(counts.sum())
    l_orderkey = np.repeat(np.arange(1, n_ord + 1, dtype=np.int32), counts)
    order_date_per_line = np.repeat(o_orderdate, counts).astype(np.int64)
    linenumber = (np.arange(n_li) - np.repeat(np.cumsum(counts) - counts, counts) + 1)
    quantity = rng.integers(1, 51, size=n_li).astype(np.int32)
    unit_cents = rng.integers(90_100, 10_495_001, size=n_li)
    extprice = (quantity.astype(np.float64) * unit_cents / 100.0).astype(np.float32)
    discount = (rng.integers(0, 11, size=n_li) / 100.0).astype(np.float32)
    tax = (rng.integers(0, 9, size=n_li) / 100.0).astype(np.float32)
    shipdate = order_date_per_line + rng.integers(1, 122, size=n_li)
    commitdate = order_date_per_line + rng.integers(30, 91, size=n_li)
    receiptdate = shipdate + rng.integers(1, 31, size=n_li)
    returned = receiptdate <= _CUTOFF
    rflag_pick = _pick(rng, ["R", "A"], n_li)
    returnflag = [rflag_pick[i] if returned[i] else "N" for i in range(n_li)]
    linestatus = ["F" if d <= _CUTOFF else "O" for d in shipdate]

    lineitem = [
        ("l_orderkey", I32, l_orderkey),
        ("l_partkey", I32, rng.integers(1, max(n["part"], 2), size=n_li).astype(np.int32)),
        ("l_suppkey", I32, rng.integers(1, max(n["supplier"], 2), size=n_li).astype(np.int32)),
        ("l_linenumber", I32, linenumber.astype(np.int32)),
        ("l_quantity", I32, quantity),
        ("l_extendedprice", F32, extprice),
        ("l_discount", F32, discount),
        ("l_tax", F32, tax),
        ("l_returnflag", STR, returnflag),
        ("l_linestatus", STR, linestatus),
        ("l_shipdate", D32, shipdate.astype(np.int32)),
        ("l_commitdate", D32, commitdate.astype(np.int32)),
        ("l_receiptdate", D32, receiptdate.astype(np.int32)),
        ("l_shipinstruct", STR, _pick(rng, SHIPINSTRUCT, n_li)),
        ("l_shipmode", STR, _pick(rng, SHIPMODES, n_li)),
        ("l_comment", STR, _comments(rng, n_li)),
    ]

    n_part = n["part"]
    part = [
        ("p_partkey", I32, np.arange(1, n_part + 1, dtype=np.int32)),
        ("p_name", STR, _comments(rng, n_part)),
        ("p_mfgr", STR, [f"Manufacturer#{int(v)}" for v in rng.integers(1, 6, size=n_part)]),
        ("p_brand", STR, [f"Brand#{int(v)}{int(w)}" for v, w in
                          zip(rng.integers(1, 6, size=n_part), rng.integers(1, 6, size=n_part))]),
        ("p_type", STR, _pick(rng, TYPES, n_part)),
        ("p_size", I32, rng.integers(1, 51, size=n_part).astype(np.int32)),
        ("p_container", STR, _pick(rng, CONTAINERS, n_part)),
        ("p_retailprice", F32, rng.uniform(901.0, 2098.99, size=n_part).astype(np.float32)),
        ("p_comment", STR, _comments(rng, n_part)),
    ]

    n_supp = n["supplier"]
    supplier = [
        ("s_suppkey", I32, np.arange(1, n_supp + 1, dtype=np.int32)),
        ("s_name", STR, [f"Supplier#{i:09d}" for i in range(1, n_supp + 1)]),
        ("s_nationkey", I32, rng.integers(0, 25, size=n_supp).astype(np.int32)),
        ("s_acctbal", F32, rng.uniform(-999.99, 9999.99, size=n_supp).astype(np.float32)),
        ("s_comment", STR, _comments(rng, n_supp)),
    ]

    n_cust = n["customer"]
    customer = [
        ("c_custkey", I32, np.arange(1, n_cust + 1, dtype=np.int32)),
        ("c_name", STR, [f"Customer#{i:09d}" for i in range(1, n_cust + 1)]),
        ("c_nationkey", I32, rng.integers(0, 25, size=n_cust).astype(np.int32)),
        ("c_acctbal", F32, rng.uniform(-999.99, 9999.99, size=n_cust).astype(np.float32)),
        ("c_mktsegment", STR, _pick(rng, SEGMENTS, n_cust)),
        ("c_comment", STR, _comments(rng, n_cust)),
    ]

    nation = [
        ("n_nationkey", I32, np.arange(25, dtype=np.int32)),
        ("n_name", STR, NATIONS),
        ("n_regionkey", I32, (np.arange(25) % 5).astype(np.int32)),
    ]
    region = [
        ("r_regionkey", I32, np.arange(5, dtype=np.int32)),
        ("r_name", STR, REGIONS),
    ]

    return {
        "lineitem": lineitem, "orders": orders, "part": part,
        "supplier": supplier, "customer": customer, "nation": nation,
        "region": region,
    }


def write_dir(tables: dict[str, list[tuple]], path) -> dict[str, int]:
    """Write every table as <name>.tbl under path; returns row counts."""
    import os

    from .transport import write_tbl

    os.makedirs(path, exist_ok=True)
    counts = {}
    for name, columns in tables.items():
        counts[name] = write_tbl(os.path.join(path, f"{name}.tbl"), columns)
    return counts


# ------------------------------------------------------ canonical queries

def q6() -> QuerySpec:
    """The classic what-if revenue query: one SUM, a date range, a discount
    band and a quantity cap."""
    return (
        q.select()
        .from_("lineitem")
        .field(q.sum(q.mul("l_extendedprice", "l_discount")), alias="revenue")
        .where(q.ge("l_shipdate", q.date("1994-01-01")))
        .where(q.lt("l_shipdate", q.date("1995-01-01")))
        .where(q.between("l_discount", 0.05, 0.07))
        .where(q.lt("l_quantity", 24))
        .build()
    )


def q6_template() -> QuerySpec:
    """Q6 without its date predicates, freeing l_shipdate for follow-ups."""
    return (
        q.select()
        .from_("lineitem")
        .field(q.sum(q.mul("l_extendedprice", "l_discount")), alias="revenue")
        .where(q.between("l_discount", 0.05, 0.07))
        .where(q.lt("l_quantity", 24))
        .free("l_shipdate")
        .build()
    )


def join_example() -> QuerySpec:
    """Two-way join: total extended price for orders placed before a date."""
    return (
        q.select()
        .from_("lineitem")
        .join("orders")
        .on("l_orderkey", "o_orderkey")
        .field(q.sum("l_extendedprice"))
        .where(q.lt("o_orderdate", q.date("1995-03-15")))
        .build()
    )
