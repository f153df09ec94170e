"""Freed-column split execution: view generation, matching and rewriting.

Freeing a column c of query q_o produces a materialized-view query whose
WHERE drops every predicate on c and whose SELECT/GROUP gain c; aggregates
are rewritten so follow-ups can be derived from the view (AVG ships as a
SUM/COUNT pair). A follow-up q_n may then differ from q_o only in predicates
on c and in grouping by c; matches() checks that through five structural
conditions over canonical forms, and generate_vq() rewrites a matching q_n
into a single-table query against the shipped view.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .query import (
    Agg,
    Between,
    ColumnRef,
    Cmp,
    IsIn,
    OrGroup,
    QuerySpec,
    SelectTerm,
    canonicalize,
    contains_agg,
    expr_key_json,
    fingerprint,
    from_json,
    pred_columns,
    spec_column_names,
    to_json,
)


class FreeRejected(Exception):
    def __init__(self, reason: str):
        super().__init__(reason)
        self.reason = reason


class NoMatch(Exception):
    def __init__(self, report: "MatchReport"):
        super().__init__(report.failure or "follow-up does not match the view")
        self.report = report


@dataclass
class MVDefinition:
    """A generated view: its defining query, freed column and aggregate map."""

    name: str
    mvq: QuerySpec
    free_col: ColumnRef
    agg_map: dict[str, dict[str, str]]  # original agg term key -> role -> view column
    source_fingerprint: str

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "mvq": to_json(self.mvq),
            "free": str(self.free_col),
            "agg_map": self.agg_map,
            "source_fingerprint": self.source_fingerprint,
        }

    @classmethod
    def from_json(cls, d: dict) -> "MVDefinition":
        free = d["free"]
        col = ColumnRef(*reversed(free.split("."))) if "." in free else ColumnRef(free)
        return cls(d["name"], from_json(d["mvq"]), col, d["agg_map"], d["source_fingerprint"])

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True)

    @classmethod
    def loads(cls, text: str) -> "MVDefinition":
        return cls.from_json(json.loads(text))


@dataclass
class MatchReport:
    matched: bool
    verdicts: dict[str, bool] = field(default_factory=dict)
    failure: str | None = None


# ------------------------------------------------------------------ freeing

def _is_pred_on(pred, col_name: str) -> bool:
    """Syntactic rule: a predicate is 'on' a column iff it is a plain
    comparison or range whose only column reference is that column."""
    if isinstance(pred, (Cmp, Between)):
        return pred.col.name == col_name
    return False


def can_free(q: QuerySpec, col: ColumnRef | str, catalog=None) -> str | None:
    """None when the column is freeable, else the rejection reason.

    Rejected: join-key columns, columns inside OR groups, columns referenced
    by (or probed through) a subquery. With a catalog, the column must also
    resolve: referenced by the query or present in one of its base tables.
    """
    name = col.name if isinstance(col, ColumnRef) else str(col)

    if catalog is not None:
        known = name in spec_column_names(q)
        if not known:
            for entry in q.tables + tuple(j.table for j in q.joins):
                if isinstance(entry, str) and catalog.has(entry) \
                        and catalog.get(entry).has_column(name):
                    known = True
                    break
        if not known:
            raise KeyError(f"unknown column {name!r}")

    for j in q.joins:
        if name in (j.left.name, j.right.name):
            return f"column {name!r} appears in a join condition"
    for pred in q.where:
        if isinstance(pred, OrGroup):
            if any(c.name == name for c in pred_columns(pred)):
                return f"column {name!r} is mentioned in an OR clause"
        elif isinstance(pred, IsIn):
            if pred.col.name == name:
                return f"column {name!r} is probed through a subquery condition"
            if name in spec_column_names(pred.query):
                return f"column {name!r} is referenced inside a subquery"
    for entry in q.tables:
        if isinstance(entry, QuerySpec) and name in spec_column_names(entry):
            return f"column {name!r} is referenced inside a subquery"
    return None


def rewrite_agg(term: Agg) -> list[Agg]:
    """View-side aggregates needed to later derive `term` from the view."""
    if term.fn == "avg":
        return [Agg("sum", term.arg), Agg("count", term.arg)]
    return [Agg(term.fn, term.arg)]


_ROLES = {"sum": ("sum",), "count": ("cnt",), "avg": ("sum", "cnt"),
          "min": ("min",), "max": ("max",)}


def generate_mvq(q_o: QuerySpec, cfree: ColumnRef | str, catalog=None) -> MVDefinition:
    """Build the materialized-view query for q_o with `cfree` freed.

    SELECT gains the freed column (deduplicated) and rewrites aggregates;
    WHERE drops every predicate on the freed column; GROUP gains the freed
    column whenever any aggregate is present; ORDER and LIMIT never carry
    over.
    """
    cfree = cfree if isinstance(cfree, ColumnRef) else ColumnRef(str(cfree))
    reason = can_free(q_o, cfree, catalog)
    if reason is not None:
        raise FreeRejected(reason)

    select: list[SelectTerm] = []
    agg_map: dict[str, dict[str, str]] = {}
    view_cols: dict[str, str] = {}  # canonical view-term key -> assigned alias
    plain_names: set[str] = set()
    next_alias = 1
    has_agg = False

    for term in q_o.select:
        if isinstance(term.expr, Agg):
            has_agg = True
            roles = _ROLES[term.expr.fn]
            mapping: dict[str, str] = {}
            for role, part in zip(roles, rewrite_agg(term.expr)):
                part_key = expr_key_json(part)
                alias = view_cols.get(part_key)
                if alias is None:
                    alias = f"f{next_alias}"
                    next_alias += 1
                    view_cols[part_key] = alias
                    select.append(SelectTerm(part, alias))
                mapping[role] = alias
            agg_map[expr_key_json(term.expr)] = mapping
        elif contains_agg(term.expr):
            raise FreeRejected("compound aggregate select terms cannot be freed")
        else:
            select.append(term)
            if isinstance(term.expr, ColumnRef):
                plain_names.add(term.expr.name)

    if cfree.name not in plain_names:
        select.append(SelectTerm(ColumnRef(cfree.name)))

    where = tuple(p for p in q_o.where if not _is_pred_on(p, cfree.name))
    group = tuple(q_o.group)
    if has_agg and cfree.name not in {c.name for c in group}:
        group = group + (ColumnRef(cfree.name),)

    mvq = QuerySpec(
        select=tuple(select),
        tables=q_o.tables,
        joins=q_o.joins,
        where=where,
        group=group,
    )
    source_fp = fingerprint(
        QuerySpec(select=q_o.select, tables=q_o.tables, joins=q_o.joins,
                  where=where, group=q_o.group)
    )
    return MVDefinition(f"mv_{source_fp}", mvq, cfree, agg_map, source_fp)


# ----------------------------------------------------------------- matching

def matches(q_n: QuerySpec, mv: MVDefinition) -> MatchReport:
    """Evaluate the five view-matching conditions on canonical forms."""
    qn = canonicalize(q_n)
    mvq = canonicalize(mv.mvq)
    cfree = mv.free_col.name
    verdicts: dict[str, bool] = {}
    failure = None

    def fail(cond: str, detail: str):
        nonlocal failure
        verdicts[cond] = False
        if failure is None:
            failure = f"{cond}: {detail}"

    # cond 1: every selected term is covered by the view
    view_plain = {t.expr.name for t in mvq.select if isinstance(t.expr, ColumnRef)}
    ok = True
    for term in qn.select:
        if isinstance(term.expr, Agg):
            if expr_key_json(term.expr) not in mv.agg_map:
                fail("cond1", f"aggregate {term.expr.fn}(...) not covered by the view")
                ok = False
                break
        elif isinstance(term.expr, ColumnRef):
            if term.expr.name != cfree and term.expr.name not in view_plain:
                fail("cond1", f"column {term.expr} not present in the view")
                ok = False
                break
        else:
            fail("cond1", f"select term {term.expr!r} not derivable from the view")
            ok = False
            break
    if ok:
        verdicts["cond1"] = True

    # cond 2 / cond 3: FROM and JOIN lists match exactly
    if tuple(qn.tables) == tuple(mvq.tables):
        verdicts["cond2"] = True
    else:
        fail("cond2", "FROM lists differ")
    if tuple(qn.joins) == tuple(mvq.joins):
        verdicts["cond3"] = True
    else:
        fail("cond3", "JOIN lists differ")

    # cond 4: WHERE minus freed-column predicates matches exactly
    qn_rest = tuple(p for p in qn.where if not _is_pred_on(p, cfree))
    if qn_rest == mvq.where:
        verdicts["cond4"] = True
    else:
        fail("cond4", "non-freed WHERE predicates differ from the view query")

    # cond 5: grouping minus the freed column is covered by the view grouping
    mv_groups = {c.name for c in mvq.group}
    extra = [c.name for c in qn.group if c.name != cfree and c.name not in mv_groups]
    if not extra:
        verdicts["cond5"] = True
    else:
        fail("cond5", f"GROUP BY column {extra[0]!r} not grouped in the view")

    return MatchReport(all(verdicts.values()), verdicts, failure)


def derive_agg(term: Agg, agg_map: dict[str, dict[str, str]]):
    """Rewrite an original aggregate into an expression over view columns."""
    from .query import Arith

    roles = agg_map.get(expr_key_json(term))
    if roles is None:
        raise KeyError(f"aggregate not present in the view map: {term!r}")
    if term.fn == "sum":
        return Agg("sum", ColumnRef(roles["sum"]))
    if term.fn == "count":
        return Agg("sum", ColumnRef(roles["cnt"]))
    if term.fn == "avg":
        return Arith("div", Agg("sum", ColumnRef(roles["sum"])),
                     Agg("sum", ColumnRef(roles["cnt"])))
    if term.fn == "min":
        return Agg("min", ColumnRef(roles["min"]))
    if term.fn == "max":
        return Agg("max", ColumnRef(roles["max"]))
    raise ValueError(f"unsupported aggregate {term.fn!r}")


def _unqualify(ref: ColumnRef) -> ColumnRef:
    return ColumnRef(ref.name)


def _retarget_pred(pred):
    if isinstance(pred, Cmp):
        return Cmp(pred.op, _unqualify(pred.col), pred.value)
    if isinstance(pred, Between):
        return Between(_unqualify(pred.col), pred.lo, pred.hi)
    raise TypeError(f"cannot retarget predicate {pred!r}")


def generate_vq(q_n: QuerySpec, mv: MVDefinition) -> QuerySpec:
    """Rewrite a matching follow-up against the view.

    SELECT keeps q_n's terms with aggregates derived from view columns, FROM
    becomes the view, WHERE keeps only q_n's freed-column predicates, and
    GROUP/ORDER/LIMIT carry over unchanged.
    """
    report = matches(q_n, mv)
    if not report.matched:
        raise NoMatch(report)
    cfree = mv.free_col.name

    select = []
    for term in q_n.select:
        if isinstance(term.expr, Agg):
            select.append(SelectTerm(derive_agg(term.expr, mv.agg_map), term.alias))
        else:
            select.append(SelectTerm(_unqualify(term.expr), term.alias))

    where = tuple(_retarget_pred(p) for p in q_n.where if _is_pred_on(p, cfree))
    group = tuple(_unqualify(c) for c in q_n.group)

    return QuerySpec(
        select=tuple(select),
        tables=(mv.name,),
        where=where,
        group=group,
        order=q_n.order,
        limit=q_n.limit,
    )
