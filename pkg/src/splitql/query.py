"""Logical query representation.

A QuerySpec is an immutable value: select/from/joins/where/group/order/limit
plus the optional freed column. Helper functions here validate a spec against
a catalog, put it into a deterministic canonical form (used as structural
equality by the view matcher) and round-trip it through a stable JSON shape
whose keys mirror the field names (``from`` is spelled out in JSON, ``tables``
in Python).
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, replace

from .heap import D32, F32, F64, I32, I64, STR, Catalog, TableDescriptor, date_to_days

ARITH_OPS = ("add", "sub", "mul", "div")
CMP_OPS = ("lt", "le", "gt", "ge", "eq", "ne")
AGG_FNS = ("sum", "count", "avg", "min", "max")


# ---------------------------------------------------------------- expressions

@dataclass(frozen=True)
class ColumnRef:
    name: str
    table: str | None = None

    def __str__(self):
        return f"{self.table}.{self.name}" if self.table else self.name


@dataclass(frozen=True)
class LitInt:
    value: int


@dataclass(frozen=True)
class LitFloat:
    value: float


@dataclass(frozen=True)
class LitDate:
    days: int  # epoch days


@dataclass(frozen=True)
class LitString:
    value: str


@dataclass(frozen=True)
class Arith:
    op: str
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Agg:
    fn: str
    arg: "Expr | None"  # None means count(*)


Expr = ColumnRef | LitInt | LitFloat | LitDate | LitString | Arith | Agg
Literal = LitInt | LitFloat | LitDate | LitString


# ----------------------------------------------------------------- predicates

@dataclass(frozen=True)
class Cmp:
    op: str
    col: ColumnRef
    value: Literal


@dataclass(frozen=True)
class Between:
    col: ColumnRef
    lo: Literal
    hi: Literal


@dataclass(frozen=True)
class IsIn:
    col: ColumnRef
    query: "QuerySpec"


@dataclass(frozen=True)
class OrGroup:
    members: tuple  # Cmp | Between


Predicate = Cmp | Between | IsIn | OrGroup


# ----------------------------------------------------------------- query spec

@dataclass(frozen=True)
class SelectTerm:
    expr: Expr
    alias: str | None = None


@dataclass(frozen=True)
class JoinSpec:
    table: str
    left: ColumnRef
    right: ColumnRef


@dataclass(frozen=True)
class OrderTerm:
    key: str  # select alias or column name
    desc: bool = False


@dataclass(frozen=True)
class QuerySpec:
    select: tuple[SelectTerm, ...] = ()
    tables: tuple = ()  # FROM list: table names or QuerySpec subqueries
    joins: tuple[JoinSpec, ...] = ()
    where: tuple = ()
    group: tuple[ColumnRef, ...] = ()
    order: tuple[OrderTerm, ...] = ()
    limit: int | None = None
    free: ColumnRef | None = None


def contains_agg(expr: Expr) -> bool:
    if isinstance(expr, Agg):
        return True
    if isinstance(expr, Arith):
        return contains_agg(expr.left) or contains_agg(expr.right)
    return False


def agg_nodes(expr: Expr) -> list[Agg]:
    if isinstance(expr, Agg):
        return [expr]
    if isinstance(expr, Arith):
        return agg_nodes(expr.left) + agg_nodes(expr.right)
    return []


def expr_columns(expr: Expr) -> list[ColumnRef]:
    if isinstance(expr, ColumnRef):
        return [expr]
    if isinstance(expr, Arith):
        return expr_columns(expr.left) + expr_columns(expr.right)
    if isinstance(expr, Agg):
        return expr_columns(expr.arg) if expr.arg is not None else []
    return []


def pred_columns(pred: Predicate) -> list[ColumnRef]:
    """Columns a predicate mentions directly (subquery internals excluded)."""
    if isinstance(pred, (Cmp, Between)):
        return [pred.col]
    if isinstance(pred, IsIn):
        return [pred.col]
    if isinstance(pred, OrGroup):
        out = []
        for m in pred.members:
            out.extend(pred_columns(m))
        return out
    raise TypeError(f"not a predicate: {pred!r}")


def spec_column_names(spec: QuerySpec) -> set[str]:
    """Every column name referenced anywhere in the spec, subqueries included."""
    names: set[str] = set()

    def walk(s: QuerySpec):
        for term in s.select:
            names.update(c.name for c in expr_columns(term.expr))
        for p in s.where:
            names.update(c.name for c in pred_columns(p))
            if isinstance(p, IsIn):
                walk(p.query)
        for j in s.joins:
            names.add(j.left.name)
            names.add(j.right.name)
        for c in s.group:
            names.add(c.name)
        for t in s.tables:
            if isinstance(t, QuerySpec):
                walk(t)
        if s.free:
            names.add(s.free.name)

    walk(spec)
    return names


# --------------------------------------------------------------------- json

def _expr_to_json(e: Expr):
    if isinstance(e, ColumnRef):
        return {"col": str(e)}
    if isinstance(e, LitInt):
        return {"int": e.value}
    if isinstance(e, LitFloat):
        return {"float": e.value}
    if isinstance(e, LitDate):
        return {"date": e.days}
    if isinstance(e, LitString):
        return {"str": e.value}
    if isinstance(e, Arith):
        return {"arith": {"op": e.op, "left": _expr_to_json(e.left), "right": _expr_to_json(e.right)}}
    if isinstance(e, Agg):
        return {"agg": {"fn": e.fn, "arg": None if e.arg is None else _expr_to_json(e.arg)}}
    raise TypeError(f"not an expression: {e!r}")


def _colref_from_str(s: str) -> ColumnRef:
    if "." in s:
        table, name = s.split(".", 1)
        return ColumnRef(name, table)
    return ColumnRef(s)


def _expr_from_json(d) -> Expr:
    if "col" in d:
        return _colref_from_str(d["col"])
    if "int" in d:
        return LitInt(int(d["int"]))
    if "float" in d:
        return LitFloat(float(d["float"]))
    if "date" in d:
        v = d["date"]
        return LitDate(v if isinstance(v, int) else date_to_days(v))
    if "str" in d:
        return LitString(d["str"])
    if "arith" in d:
        a = d["arith"]
        return Arith(a["op"], _expr_from_json(a["left"]), _expr_from_json(a["right"]))
    if "agg" in d:
        a = d["agg"]
        return Agg(a["fn"], None if a["arg"] is None else _expr_from_json(a["arg"]))
    raise ValueError(f"bad expression JSON: {d!r}")


def _pred_to_json(p: Predicate):
    if isinstance(p, Cmp):
        return {"cmp": {"op": p.op, "col": str(p.col), "value": _expr_to_json(p.value)}}
    if isinstance(p, Between):
        return {"between": {"col": str(p.col), "lo": _expr_to_json(p.lo), "hi": _expr_to_json(p.hi)}}
    if isinstance(p, IsIn):
        return {"isin": {"col": str(p.col), "query": to_json(p.query)}}
    if isinstance(p, OrGroup):
        return {"or": [_pred_to_json(m) for m in p.members]}
    raise TypeError(f"not a predicate: {p!r}")


def _pred_from_json(d) -> Predicate:
    if "cmp" in d:
        c = d["cmp"]
        return Cmp(c["op"], _colref_from_str(c["col"]), _expr_from_json(c["value"]))
    if "between" in d:
        b = d["between"]
        return Between(_colref_from_str(b["col"]), _expr_from_json(b["lo"]), _expr_from_json(b["hi"]))
    if "isin" in d:
        i = d["isin"]
        return IsIn(_colref_from_str(i["col"]), from_json(i["query"]))
    if "or" in d:
        return OrGroup(tuple(_pred_from_json(m) for m in d["or"]))
    raise ValueError(f"bad predicate JSON: {d!r}")


def to_json(spec: QuerySpec) -> dict:
    """Stable JSON shape; keys follow the logical field names."""
    return {
        "select": [{"expr": _expr_to_json(t.expr), "alias": t.alias} for t in spec.select],
        "from": [to_json(t) if isinstance(t, QuerySpec) else t for t in spec.tables],
        "joins": [{"table": j.table, "left": str(j.left), "right": str(j.right)} for j in spec.joins],
        "where": [_pred_to_json(p) for p in spec.where],
        "group": [str(c) for c in spec.group],
        "order": [{"key": o.key, "dir": "desc" if o.desc else "asc"} for o in spec.order],
        "limit": spec.limit,
        "free": str(spec.free) if spec.free else None,
    }


def from_json(d: dict) -> QuerySpec:
    return QuerySpec(
        select=tuple(SelectTerm(_expr_from_json(t["expr"]), t.get("alias")) for t in d.get("select", [])),
        tables=tuple(from_json(t) if isinstance(t, dict) else t for t in d.get("from", [])),
        joins=tuple(JoinSpec(j["table"], _colref_from_str(j["left"]), _colref_from_str(j["right"]))
                    for j in d.get("joins", [])),
        where=tuple(_pred_from_json(p) for p in d.get("where", [])),
        group=tuple(_colref_from_str(c) for c in d.get("group", [])),
        order=tuple(OrderTerm(o["key"], o.get("dir") == "desc") for o in d.get("order", [])),
        limit=d.get("limit"),
        free=_colref_from_str(d["free"]) if d.get("free") else None,
    )


def dumps(spec: QuerySpec, indent: int | None = 2) -> str:
    return json.dumps(to_json(spec), indent=indent)


def loads(text: str) -> QuerySpec:
    return from_json(json.loads(text))


# ------------------------------------------------------------- canonical form

def _expr_key(e: Expr):
    if isinstance(e, ColumnRef):
        return ("col", e.table or "", e.name)
    if isinstance(e, LitInt):
        return ("lit_i", e.value)
    if isinstance(e, LitFloat):
        return ("lit_f", repr(e.value))
    if isinstance(e, LitDate):
        return ("lit_d", e.days)
    if isinstance(e, LitString):
        return ("lit_s", e.value)
    if isinstance(e, Arith):
        return ("arith", e.op, _expr_key(e.left), _expr_key(e.right))
    if isinstance(e, Agg):
        return ("agg", e.fn, _expr_key(e.arg) if e.arg is not None else ())
    raise TypeError(f"not an expression: {e!r}")


def _canon_expr(e: Expr) -> Expr:
    if isinstance(e, Arith):
        left, right = _canon_expr(e.left), _canon_expr(e.right)
        if e.op in ("add", "mul") and _expr_key(left) > _expr_key(right):
            left, right = right, left
        return Arith(e.op, left, right)
    if isinstance(e, Agg) and e.arg is not None:
        return Agg(e.fn, _canon_expr(e.arg))
    return e


def _pred_key(p: Predicate):
    if isinstance(p, Cmp):
        return ("cmp", str(p.col), CMP_OPS.index(p.op), _expr_key(p.value))
    if isinstance(p, Between):
        return ("between", str(p.col), _expr_key(p.lo), _expr_key(p.hi))
    if isinstance(p, IsIn):
        return ("isin", str(p.col), fingerprint(p.query))
    if isinstance(p, OrGroup):
        return ("or",) + tuple(_pred_key(m) for m in p.members)
    raise TypeError(f"not a predicate: {p!r}")


def _canon_pred(p: Predicate) -> Predicate:
    if isinstance(p, Cmp):
        return Cmp(p.op, p.col, p.value)
    if isinstance(p, IsIn):
        return IsIn(p.col, canonicalize(p.query))
    if isinstance(p, OrGroup):
        members = tuple(sorted((_canon_pred(m) for m in p.members), key=_pred_key))
        return OrGroup(members)
    return p


def canonicalize(spec: QuerySpec) -> QuerySpec:
    """Deterministic form: WHERE sorted, commutative operands ordered.

    Two specs are structurally equal iff their canonical forms compare equal;
    select/group/order lists keep their order (it defines output shape).
    """
    select = tuple(SelectTerm(_canon_expr(t.expr), t.alias) for t in spec.select)
    tables = tuple(canonicalize(t) if isinstance(t, QuerySpec) else t for t in spec.tables)
    where = tuple(sorted((_canon_pred(p) for p in spec.where), key=_pred_key))
    return replace(spec, select=select, tables=tables, where=where)


def fingerprint(spec: QuerySpec) -> str:
    """Hash of the canonical JSON rendering; stable across processes."""
    canon = canonicalize(spec)
    blob = json.dumps(to_json(canon), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:12]


def specs_equal(a: QuerySpec, b: QuerySpec) -> bool:
    return canonicalize(a) == canonicalize(b)


def expr_key_json(expr: Expr) -> str:
    """Canonical JSON rendering of one expression; a stable structural key."""
    return json.dumps(_expr_to_json(_canon_expr(expr)), sort_keys=True, separators=(",", ":"))


# ----------------------------------------------------------------- validation

_NUMERIC = (I32, F32, I64, F64)


class Scope:
    """Column resolution over the FROM tables plus the joined table."""

    def __init__(self, entries: list[tuple[str, "TableLikeSchema"]]):
        self.entries = entries

    def resolve(self, ref: ColumnRef) -> tuple[str, str] | None:
        """Returns (table name, phys type) or None when unresolvable/ambiguous."""
        if ref.table is not None:
            for name, schema in self.entries:
                if name == ref.table and schema.has(ref.name):
                    return name, schema.phys(ref.name)
            return None
        hits = [(name, schema.phys(ref.name))
                for name, schema in self.entries if schema.has(ref.name)]
        if len(hits) == 1:
            return hits[0]
        return None


class TableLikeSchema:
    def __init__(self, columns: dict[str, str]):
        self.columns = columns

    def has(self, name: str) -> bool:
        return name in self.columns

    def phys(self, name: str) -> str:
        return self.columns[name]


def _schema_of(entry, catalog: Catalog, diags: list[str]) -> tuple[str, TableLikeSchema] | None:
    if isinstance(entry, QuerySpec):
        sub_diags = validate(entry, catalog)
        if sub_diags:
            diags.extend(f"subquery: {d}" for d in sub_diags)
            return None
        cols = output_schema(entry, catalog)
        return ("<subquery>", TableLikeSchema(dict(cols)))
    if not catalog.has(entry):
        diags.append(f"unknown table {entry!r}")
        return None
    table = catalog.get(entry)
    return (entry, TableLikeSchema({c.name: c.phys for c in table.columns}))


def _literal_phys(lit: Literal) -> str:
    if isinstance(lit, LitInt):
        return I32
    if isinstance(lit, LitFloat):
        return F32
    if isinstance(lit, LitDate):
        return D32
    return STR


def infer_type(expr: Expr, scope: Scope) -> str | None:
    """Physical type of an expression's value; None when unresolvable."""
    if isinstance(expr, ColumnRef):
        hit = scope.resolve(expr)
        return hit[1] if hit else None
    if isinstance(expr, (LitInt, LitFloat, LitDate, LitString)):
        return _literal_phys(expr)
    if isinstance(expr, Arith):
        lt, rt = infer_type(expr.left, scope), infer_type(expr.right, scope)
        if lt is None or rt is None:
            return None
        if expr.op == "div" or F32 in (lt, rt) or F64 in (lt, rt):
            return F64
        return I64
    if isinstance(expr, Agg):
        if expr.fn == "count":
            return I64
        at = infer_type(expr.arg, scope) if expr.arg is not None else None
        if expr.fn == "avg":
            return F64
        if expr.fn == "sum":
            return F64 if at in (F32, F64) else I64
        return at  # min/max preserve the input type
    return None


def _check_expr(expr: Expr, scope: Scope, diags: list[str], in_agg: bool = False) -> None:
    if isinstance(expr, ColumnRef):
        if scope.resolve(expr) is None:
            diags.append(f"cannot resolve column {expr}")
    elif isinstance(expr, Arith):
        for side in (expr.left, expr.right):
            _check_expr(side, scope, diags, in_agg)
            t = infer_type(side, scope)
            if t is not None and t not in _NUMERIC and not contains_agg(side):
                diags.append(f"arithmetic over non-numeric operand {side!r} ({t})")
    elif isinstance(expr, Agg):
        if in_agg:
            diags.append(f"aggregate {expr.fn} nested inside another aggregate")
        if expr.fn not in AGG_FNS:
            diags.append(f"unknown aggregate {expr.fn!r}")
        if expr.arg is not None:
            _check_expr(expr.arg, scope, diags, in_agg=True)
            t = infer_type(expr.arg, scope)
            if expr.fn in ("sum", "avg") and t is not None and t not in _NUMERIC:
                diags.append(f"{expr.fn} over non-numeric argument ({t})")
            if expr.fn in ("min", "max") and t is not None and t not in _NUMERIC + (D32,):
                diags.append(f"{expr.fn} over unsupported argument type ({t})")
        elif expr.fn != "count":
            diags.append(f"{expr.fn} requires an argument")


def _lit_matches(col_phys: str, lit: Literal) -> bool:
    lp = _literal_phys(lit)
    if col_phys == STR or lp == STR:
        return col_phys == STR and lp == STR
    if col_phys == D32 or lp == D32:
        return col_phys == D32 and lp in (D32, I32)
    return True  # int/float literals compare against any numeric column


def _lit_value(lit: Literal):
    if isinstance(lit, LitDate):
        return lit.days
    return lit.value


def _check_pred(pred: Predicate, scope: Scope, catalog: Catalog, diags: list[str]) -> None:
    if isinstance(pred, Cmp):
        if pred.op not in CMP_OPS:
            diags.append(f"unknown comparison op {pred.op!r}")
        hit = scope.resolve(pred.col)
        if hit is None:
            diags.append(f"cannot resolve column {pred.col}")
        elif not _lit_matches(hit[1], pred.value):
            diags.append(f"type mismatch comparing {pred.col} ({hit[1]}) with {pred.value!r}")
    elif isinstance(pred, Between):
        hit = scope.resolve(pred.col)
        if hit is None:
            diags.append(f"cannot resolve column {pred.col}")
        else:
            for lit in (pred.lo, pred.hi):
                if not _lit_matches(hit[1], lit):
                    diags.append(f"type mismatch in BETWEEN on {pred.col}")
            if (_literal_phys(pred.lo) != STR and _literal_phys(pred.hi) != STR
                    and _lit_value(pred.lo) > _lit_value(pred.hi)):
                diags.append(f"BETWEEN bounds reversed on {pred.col}")
    elif isinstance(pred, IsIn):
        hit = scope.resolve(pred.col)
        if hit is None:
            diags.append(f"cannot resolve column {pred.col}")
        sub_diags = validate(pred.query, catalog)
        diags.extend(f"IS IN subquery: {d}" for d in sub_diags)
        if not sub_diags and len(pred.query.select) != 1:
            diags.append("IS IN subquery must select exactly one column")
    elif isinstance(pred, OrGroup):
        if not pred.members:
            diags.append("empty OR group")
        for m in pred.members:
            if isinstance(m, (Cmp, Between)):
                _check_pred(m, scope, catalog, diags)
            else:
                diags.append("OR groups may only contain comparisons and ranges")
    else:
        diags.append(f"unknown predicate {pred!r}")


def output_schema(spec: QuerySpec, catalog: Catalog) -> list[tuple[str, str]]:
    """(name, phys) of each select term, as the engine will emit them."""
    scope = _scope_of(spec, catalog, [])
    out = []
    for i, term in enumerate(spec.select):
        name = term.alias
        if name is None:
            name = term.expr.name if isinstance(term.expr, ColumnRef) else f"f{i + 1}"
        phys = infer_type(term.expr, scope) if scope else None
        out.append((name, phys or F64))
    return out


def _scope_of(spec: QuerySpec, catalog: Catalog, diags: list[str]) -> Scope | None:
    entries = []
    for entry in spec.tables:
        got = _schema_of(entry, catalog, diags)
        if got is None:
            return None
        entries.append(got)
    for j in spec.joins:
        got = _schema_of(j.table, catalog, diags)
        if got is None:
            return None
        entries.append(got)
    return Scope(entries)


def validate(spec: QuerySpec, catalog: Catalog) -> list[str]:
    """Structural and type diagnostics; an empty list means the spec is runnable."""
    diags: list[str] = []
    if not spec.select:
        diags.append("empty select list")
    if not spec.tables:
        diags.append("empty FROM list")
    if len(spec.tables) > 1:
        diags.append("multiple FROM entries unsupported; use an explicit join")
    if len(spec.joins) > 1:
        diags.append("only two-way joins are supported")

    scope = _scope_of(spec, catalog, diags)
    if scope is None or diags:
        return diags

    for j in spec.joins:
        for side in (j.left, j.right):
            if scope.resolve(side) is None:
                diags.append(f"cannot resolve join key {side}")
            else:
                phys = scope.resolve(side)[1]
                if phys not in (I32, D32, I64):
                    diags.append(f"join key {side} must be integer-typed, got {phys}")

    for term in spec.select:
        _check_expr(term.expr, scope, diags)

    for pred in spec.where:
        _check_pred(pred, scope, catalog, diags)

    group_keys = set()
    for c in spec.group:
        if scope.resolve(c) is None:
            diags.append(f"cannot resolve GROUP BY column {c}")
        group_keys.add(c.name)

    has_agg = any(contains_agg(t.expr) for t in spec.select)
    if has_agg:
        for term in spec.select:
            if contains_agg(term.expr):
                continue
            if not isinstance(term.expr, ColumnRef):
                diags.append(f"non-aggregate select term {term.expr!r} must be a grouped column")
            elif term.expr.name not in group_keys:
                diags.append(f"column {term.expr} selected alongside aggregates but not grouped")
    elif spec.group:
        for term in spec.select:
            if isinstance(term.expr, ColumnRef) and term.expr.name not in group_keys:
                diags.append(f"column {term.expr} not in GROUP BY")

    out_names = {name for name, _ in output_schema(spec, catalog)}
    for o in spec.order:
        if o.key not in out_names and o.key not in group_keys:
            diags.append(f"ORDER BY key {o.key!r} is not an output column")

    if spec.limit is not None and spec.limit < 0:
        diags.append("LIMIT must be non-negative")

    if spec.free is not None and scope.resolve(spec.free) is None:
        diags.append(f"cannot resolve freed column {spec.free}")

    return diags
