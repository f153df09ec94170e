"""Row-at-a-time reference evaluator.

Deliberately naive and independent of the engine kernels: nested-loop joins,
dict-based grouping with sorted output, per-row predicate checks. Float
aggregates accumulate in Python floats (64-bit); integer sums/counts in exact
Python ints. Used to check engine results on small inputs.
"""

from __future__ import annotations

import math

from splitql.heap import D32, F32, F64, I32, I64, STR
from splitql.query import (
    Agg,
    Arith,
    Between,
    ColumnRef,
    Cmp,
    IsIn,
    LitDate,
    LitFloat,
    LitInt,
    LitString,
    OrGroup,
    QuerySpec,
)

INT32_ABSENT = -(2**31)
INT64_ABSENT = -(2**63)

_CMP = {
    "lt": lambda a, b: a < b,
    "le": lambda a, b: a <= b,
    "gt": lambda a, b: a > b,
    "ge": lambda a, b: a >= b,
    "eq": lambda a, b: a == b,
    "ne": lambda a, b: a != b,
}


class OracleTable:
    def __init__(self, schema: list[tuple[str, str]], rows: list[tuple]):
        self.schema = schema
        self.rows = rows
        self.index = {name: i for i, (name, _) in enumerate(schema)}
        self.phys = dict(schema)

    @classmethod
    def from_columns(cls, columns: list[tuple]) -> "OracleTable":
        schema = [(name, phys) for name, phys, _ in columns]
        data = []
        for name, phys, values in columns:
            if phys == STR:
                data.append([str(v) for v in values])
            elif phys in (F32, F64):
                data.append([float(v) for v in values])
            else:
                data.append([int(v) for v in values])
        rows = list(zip(*data)) if data else []
        return cls(schema, rows)


class _Row:
    """A row spanning one or two tables, resolved by column name."""

    def __init__(self, tables: list[OracleTable], cells: list[tuple]):
        self.tables = tables
        self.cells = cells

    def get(self, ref: ColumnRef):
        for table, row in zip(self.tables, self.cells):
            if ref.table is not None and getattr(table, "name", None) not in (None, ref.table):
                continue
            if ref.name in table.index:
                return row[table.index[ref.name]]
        raise KeyError(f"oracle cannot resolve {ref}")

    def phys_of(self, ref: ColumnRef) -> str:
        for table in self.tables:
            if ref.name in table.phys:
                return table.phys[ref.name]
        raise KeyError(f"oracle cannot resolve {ref}")


def _lit_value(lit):
    if isinstance(lit, LitDate):
        return lit.days
    return lit.value


def _eval_expr(expr, row: _Row):
    if isinstance(expr, ColumnRef):
        return row.get(expr)
    if isinstance(expr, (LitInt, LitFloat, LitString)):
        return expr.value
    if isinstance(expr, LitDate):
        return expr.days
    if isinstance(expr, Arith):
        a = _eval_expr(expr.left, row)
        b = _eval_expr(expr.right, row)
        if expr.op == "add":
            return a + b
        if expr.op == "sub":
            return a - b
        if expr.op == "mul":
            return a * b
        return a / b
    raise TypeError(f"row-space expression expected, got {expr!r}")


def _expr_is_float(expr, row: _Row | None, tables) -> bool:
    if isinstance(expr, ColumnRef):
        for t in tables:
            if expr.name in t.phys:
                return t.phys[expr.name] in (F32, F64)
        return False
    if isinstance(expr, LitFloat):
        return True
    if isinstance(expr, (LitInt, LitDate, LitString)):
        return False
    if isinstance(expr, Arith):
        if expr.op == "div":
            return True
        return _expr_is_float(expr.left, row, tables) or _expr_is_float(expr.right, row, tables)
    if isinstance(expr, Agg):
        if expr.fn == "avg":
            return True
        if expr.fn == "count":
            return False
        return _expr_is_float(expr.arg, row, tables)
    return False


def _pred_holds(pred, row: _Row, tables_by_name) -> bool:
    if isinstance(pred, Cmp):
        return _CMP[pred.op](row.get(pred.col), _lit_value(pred.value))
    if isinstance(pred, Between):
        v = row.get(pred.col)
        return _lit_value(pred.lo) <= v <= _lit_value(pred.hi)
    if isinstance(pred, OrGroup):
        return any(_pred_holds(m, row, tables_by_name) for m in pred.members)
    if isinstance(pred, IsIn):
        _, sub_rows, _ = evaluate(pred.query, tables_by_name)
        members = {r[0] for r in sub_rows}
        return row.get(pred.col) in members
    raise TypeError(f"unknown predicate {pred!r}")


def _phys_of_expr(expr, tables) -> str:
    if isinstance(expr, ColumnRef):
        for t in tables:
            if expr.name in t.phys:
                return t.phys[expr.name]
        return F64
    if isinstance(expr, LitInt):
        return I32
    if isinstance(expr, LitFloat):
        return F32
    if isinstance(expr, LitDate):
        return D32
    if isinstance(expr, LitString):
        return STR
    if isinstance(expr, Arith):
        if expr.op == "div" or _expr_is_float(expr, None, tables):
            return F64
        return I64
    if isinstance(expr, Agg):
        if expr.fn == "count":
            return I64
        if expr.fn == "avg":
            return F64
        if expr.fn == "sum":
            return F64 if _expr_is_float(expr.arg, None, tables) else I64
        return _phys_of_expr(expr.arg, tables)
    raise TypeError(f"unknown expression {expr!r}")


def _absent(phys: str):
    if phys in (F32, F64):
        return math.nan
    if phys == I64:
        return INT64_ABSENT
    return INT32_ABSENT


def _agg_value(agg: Agg, rows: list[_Row], tables):
    if agg.fn == "count":
        return len(rows)
    vals = [_eval_expr(agg.arg, r) for r in rows]
    is_float = _expr_is_float(agg.arg, None, tables)
    if agg.fn == "sum":
        total = 0.0 if is_float else 0
        for v in vals:
            total += v
        return total
    if agg.fn == "avg":
        if not rows:
            return math.nan
        total = 0.0
        for v in vals:
            total += v
        return total / len(rows)
    phys = _phys_of_expr(agg.arg, tables)
    if not rows:
        return _absent(phys)
    return min(vals) if agg.fn == "min" else max(vals)


def _eval_term(expr, rows: list[_Row], tables):
    """Select-term value over an aggregation scope (rows of one group)."""
    if isinstance(expr, Agg):
        return _agg_value(expr, rows, tables)
    if isinstance(expr, ColumnRef):
        return rows[0].get(expr)
    if isinstance(expr, (LitInt, LitFloat, LitString)):
        return expr.value
    if isinstance(expr, LitDate):
        return expr.days
    if isinstance(expr, Arith):
        a = _eval_term(expr.left, rows, tables)
        b = _eval_term(expr.right, rows, tables)
        if expr.op == "add":
            return a + b
        if expr.op == "sub":
            return a - b
        if expr.op == "mul":
            return a * b
        return a / b
    raise TypeError(f"unknown expression {expr!r}")


def evaluate(spec: QuerySpec, tables_by_name: dict[str, OracleTable]):
    """Returns (column names, row tuples, column phys types)."""
    entry = spec.tables[0]
    if isinstance(entry, QuerySpec):
        names, rows, phys = evaluate(entry, tables_by_name)
        base = OracleTable(list(zip(names, phys)), rows)
    else:
        base = tables_by_name[entry]

    scope_tables = [base]
    if spec.joins:
        j = spec.joins[0]
        other = tables_by_name[j.table]
        scope_tables.append(other)
        lkey, rkey = j.left, j.right
        if lkey.name not in base.index and rkey.name in base.index:
            lkey, rkey = rkey, lkey
        li, ri = base.index[lkey.name], other.index[rkey.name]
        joined = []
        for lrow in base.rows:
            for rrow in other.rows:  # nested loop on purpose
                if lrow[li] == rrow[ri]:
                    joined.append(_Row(scope_tables, [lrow, rrow]))
        current = joined
    else:
        current = [_Row(scope_tables, [r]) for r in base.rows]

    kept = []
    for row in current:
        if all(_pred_holds(p, row, tables_by_name) for p in spec.where):
            kept.append(row)

    from splitql.query import contains_agg

    has_agg = any(contains_agg(t.expr) for t in spec.select)

    names = []
    phys = []
    for i, term in enumerate(spec.select):
        if term.alias:
            names.append(term.alias)
        elif isinstance(term.expr, ColumnRef):
            names.append(term.expr.name)
        else:
            names.append(f"f{i + 1}")
        phys.append(_phys_of_expr(term.expr, scope_tables))

    if spec.group:
        groups: dict[tuple, list[_Row]] = {}
        for row in kept:
            key = tuple(row.get(c) for c in spec.group)
            groups.setdefault(key, []).append(row)
        out = []
        for key in sorted(groups.keys(), key=lambda k: tuple(_sortable(v) for v in k)):
            rows = groups[key]
            out.append(tuple(_eval_term(t.expr, rows, scope_tables) for t in spec.select))
    elif has_agg:
        out = [tuple(_eval_term(t.expr, kept, scope_tables) for t in spec.select)]
    else:
        out = [tuple(_eval_expr(t.expr, row) for t in spec.select) for row in kept]

    if spec.order:
        for term in reversed(spec.order):
            idx = names.index(term.key)
            out.sort(key=lambda r: _sortable(r[idx]), reverse=term.desc)
    if spec.limit is not None:
        out = out[: spec.limit]
    return names, out, phys


def _sortable(v):
    return v


# --------------------------------------------------------------- comparison

def _cell_equal(a, b, phys: str, rel: float) -> bool:
    if phys in (F32, F64):
        if math.isnan(float(a)) and math.isnan(float(b)):
            return True
        if phys == F32:
            return float(a) == float(b)
        return math.isclose(a, b, rel_tol=rel, abs_tol=1e-12)
    return a == b


def assert_equivalent(engine_rs, oracle_out, ordered: bool, rel: float = 1e-9) -> None:
    """Engine ResultSet vs oracle output: exact for int/date/string, rel for f64."""
    names, rows, phys = oracle_out
    assert engine_rs.names() == names, f"schema {engine_rs.names()} != {names}"
    engine_rows = engine_rs.rows()
    assert len(engine_rows) == len(rows), (
        f"row count {len(engine_rows)} != {len(rows)}"
    )
    if not ordered:
        exact_idx = [i for i, p in enumerate(phys) if p != F64]

        def key(row):
            return tuple(_sortable(row[i]) for i in exact_idx)

        engine_rows = sorted(engine_rows, key=key)
        rows = sorted(rows, key=key)
    for er, orow in zip(engine_rows, rows):
        for (ev, ov, p) in zip(er, orow, phys):
            assert _cell_equal(ev, ov, p, rel), (
                f"cell mismatch: engine {ev!r} vs oracle {ov!r} ({p})\n"
                f"engine row {er}\noracle row {orow}"
            )
