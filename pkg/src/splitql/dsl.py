"""Fluent query builder.

Mirrors the method-chaining style familiar from dataframe APIs::

    from splitql import dsl as q

    spec = (q.select()
            .from_("lineitem")
            .field(q.sum(q.mul("l_extendedprice", "l_discount")), alias="revenue")
            .where(q.between("l_discount", 0.05, 0.07))
            .where(q.lt("l_quantity", 24))
            .free("l_shipdate")
            .build())

Column arguments accept bare names ("l_quantity"), qualified names
("orders.o_orderdate") or ColumnRef values. Plain Python literals are wrapped
automatically; use :func:`date` for date literals.
"""

from __future__ import annotations

import datetime

from .heap import date_to_days
from .query import (
    Agg,
    Arith,
    Between,
    ColumnRef,
    Cmp,
    IsIn,
    JoinSpec,
    LitDate,
    LitFloat,
    LitInt,
    LitString,
    OrGroup,
    OrderTerm,
    QuerySpec,
    SelectTerm,
)


class ChainError(Exception):
    """Malformed builder chain (e.g. on() without a preceding join())."""


def col(name, table: str | None = None) -> ColumnRef:
    if isinstance(name, ColumnRef):
        return name
    if "." in name and table is None:
        table, name = name.split(".", 1)
    return ColumnRef(name, table)


def date(value) -> LitDate:
    return LitDate(date_to_days(value))


def lit(value):
    if isinstance(value, (LitInt, LitFloat, LitDate, LitString)):
        return value
    if isinstance(value, bool):
        raise TypeError("boolean literals are not supported")
    if isinstance(value, int):
        return LitInt(value)
    if isinstance(value, float):
        return LitFloat(value)
    if isinstance(value, str):
        return LitString(value)
    if isinstance(value, datetime.date):
        return date(value)
    raise TypeError(f"cannot make a literal from {value!r}")


def _expr(value):
    if isinstance(value, (ColumnRef, Agg, Arith, LitInt, LitFloat, LitDate, LitString)):
        return value
    if isinstance(value, str):
        return col(value)
    return lit(value)


# arithmetic / aggregates

def add(left, right) -> Arith:
    return Arith("add", _expr(left), _expr(right))


def sub(left, right) -> Arith:
    return Arith("sub", _expr(left), _expr(right))


def mul(left, right) -> Arith:
    return Arith("mul", _expr(left), _expr(right))


def div(left, right) -> Arith:
    return Arith("div", _expr(left), _expr(right))


def sum(arg) -> Agg:  # noqa: A001 - DSL namespace, use via `q.sum`
    return Agg("sum", _expr(arg))


def count(arg=None) -> Agg:
    return Agg("count", None if arg is None else _expr(arg))


def avg(arg) -> Agg:
    return Agg("avg", _expr(arg))


def min(arg) -> Agg:  # noqa: A001
    return Agg("min", _expr(arg))


def max(arg) -> Agg:  # noqa: A001
    return Agg("max", _expr(arg))


def as_(expr, alias: str) -> SelectTerm:
    return SelectTerm(_expr(expr), alias)


# predicates

def _cmp(op, column, value) -> Cmp:
    return Cmp(op, col(column), lit(value))


def lt(column, value) -> Cmp:
    return _cmp("lt", column, value)


def le(column, value) -> Cmp:
    return _cmp("le", column, value)


def gt(column, value) -> Cmp:
    return _cmp("gt", column, value)


def ge(column, value) -> Cmp:
    return _cmp("ge", column, value)


def eq(column, value) -> Cmp:
    return _cmp("eq", column, value)


def ne(column, value) -> Cmp:
    return _cmp("ne", column, value)


def between(column, lo, hi) -> Between:
    return Between(col(column), lit(lo), lit(hi))


def isin(column, query) -> IsIn:
    spec = query.build() if isinstance(query, Query) else query
    return IsIn(col(column), spec)


def or_(*members) -> OrGroup:
    for m in members:
        if not isinstance(m, (Cmp, Between)):
            raise ChainError("or_() accepts comparison and range predicates only")
    return OrGroup(tuple(members))


class Query:
    """Accumulates clauses; build() freezes them into a QuerySpec."""

    def __init__(self):
        self._select: list[SelectTerm] = []
        self._from: list = []
        self._joins: list[JoinSpec] = []
        self._pending_join: str | None = None
        self._where: list = []
        self._group: list[ColumnRef] = []
        self._order: list[OrderTerm] = []
        self._limit: int | None = None
        self._free: ColumnRef | None = None

    def from_(self, source) -> "Query":
        if isinstance(source, Query):
            source = source.build()
        self._from.append(source)
        return self

    def join(self, table: str) -> "Query":
        if self._pending_join is not None:
            raise ChainError("join() already pending; call on() first")
        if self._joins:
            raise ChainError("only two-way joins are supported")
        self._pending_join = table
        return self

    def on(self, left, right) -> "Query":
        if self._pending_join is None:
            raise ChainError("on() without a preceding join()")
        self._joins.append(JoinSpec(self._pending_join, col(left), col(right)))
        self._pending_join = None
        return self

    def field(self, expr, alias: str | None = None) -> "Query":
        if isinstance(expr, SelectTerm):
            self._select.append(expr if alias is None else SelectTerm(expr.expr, alias))
        else:
            self._select.append(SelectTerm(_expr(expr), alias))
        return self

    def where(self, pred) -> "Query":
        self._where.append(pred)
        return self

    def groupby(self, *columns) -> "Query":
        self._group.extend(col(c) for c in columns)
        return self

    def orderby(self, key, desc: bool = False) -> "Query":
        # direction defaults to ascending
        self._order.append(OrderTerm(key if isinstance(key, str) else str(key), desc))
        return self

    def limit(self, n: int) -> "Query":
        self._limit = int(n)
        return self

    def free(self, column) -> "Query":
        if self._free is not None:
            raise ChainError("at most one free() per query")
        self._free = col(column)
        return self

    def build(self) -> QuerySpec:
        if self._pending_join is not None:
            raise ChainError(f"join({self._pending_join!r}) missing its on() clause")
        return QuerySpec(
            select=tuple(self._select),
            tables=tuple(self._from),
            joins=tuple(self._joins),
            where=tuple(self._where),
            group=tuple(self._group),
            order=tuple(self._order),
            limit=self._limit,
            free=self._free,
        )


def select() -> Query:
    return Query()
