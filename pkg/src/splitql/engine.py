"""Query execution over the columnar heap.

compile() binds a validated QuerySpec to one of a fixed set of kernel
templates (there is exactly one physical plan per query class; joins and
group-bys are always hash-based). execute() then runs the bound kernel:

    FilterProject      predicate scan + column/expression materialization
    FilterAgg          predicate scan + accumulator loop, no grouping
    GroupBy            hash table over the grouping keys, bitmap scan for
                       group discovery, per-group accumulation
    HashJoinAgg        record-id hash join (build on the smaller filtered
                       side, probe the other), then aggregate/project
    IsInSemiJoin       subquery materialized, then a join-style semi probe
    SubqueryMaterialize FROM-subquery materialized and scanned like a table

Hash tables hold record ids only; probing returns bucket supersets and every
kernel re-verifies true key equality through the record id before using a
match. Float aggregates accumulate in 64-bit floats, integer sums and counts
in 64-bit integers, regardless of the stored column width.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .heap import D32, F32, F64, I32, I64, STR, NUMERIC_DTYPES, Catalog, TableDescriptor
from .hashtable import hash_strings, mix32_array, pool_for
from .query import (
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
    SelectTerm,
    contains_agg,
    pred_columns,
)

INT32_ABSENT = -(2**31)       # MIN/MAX over empty ungrouped input, i32/d32
INT64_ABSENT = -(2**63)       # same, i64

_CMP = {
    "lt": np.less, "le": np.less_equal, "gt": np.greater,
    "ge": np.greater_equal, "eq": np.equal, "ne": np.not_equal,
}


class UnsupportedShape(Exception):
    """Query shape outside the fixed template set."""


# ------------------------------------------------------------------- columns

class StringColumn:
    """Columnar strings: u32 start offsets into a pool of 0-terminated bytes."""

    def __init__(self, offsets: np.ndarray, pool: bytes):
        self.offsets = np.asarray(offsets, dtype=np.uint32)
        self.pool = pool

    def __len__(self):
        return len(self.offsets)

    @classmethod
    def from_values(cls, values) -> "StringColumn":
        encoded = [v if isinstance(v, bytes) else str(v).encode("utf-8") for v in values]
        offsets = np.zeros(len(encoded), dtype=np.uint32)
        cursor = 0
        parts = []
        for i, e in enumerate(encoded):
            offsets[i] = cursor
            parts.append(e)
            parts.append(b"\x00")
            cursor += len(e) + 1
        return cls(offsets, b"".join(parts))

    @classmethod
    def from_s_array(cls, s_array: np.ndarray) -> "StringColumn":
        return cls.from_values([bytes(v) for v in s_array])

    def as_s(self) -> np.ndarray:
        n = len(self.offsets)
        if n == 0:
            return np.empty(0, dtype="S1")
        pool = np.frombuffer(self.pool, dtype=np.uint8)
        offs = self.offsets.astype(np.int64)
        ends = np.empty(n, dtype=np.int64)
        ends[:-1] = offs[1:]
        ends[-1] = len(self.pool)
        lens = ends - offs - 1
        width = max(int(lens.max()), 1)
        idx = offs[:, None] + np.arange(width)[None, :]
        valid = np.arange(width)[None, :] < lens[:, None]
        mat = np.where(valid, pool[np.minimum(idx, len(self.pool) - 1)], 0).astype(np.uint8)
        return np.ascontiguousarray(mat).view(f"S{width}").ravel()

    def get(self, i: int) -> str:
        start = int(self.offsets[i])
        end = int(self.offsets[i + 1]) - 1 if i + 1 < len(self.offsets) else len(self.pool) - 1
        return self.pool[start:end].decode("utf-8")

    def tolist(self) -> list[str]:
        return [self.get(i) for i in range(len(self))]


class ResultSet:
    """Columnar query output; schema order equals select-list order."""

    def __init__(self, schema: list[tuple[str, str]], columns: list):
        self.schema = schema
        self.columns = columns
        self.row_count = len(columns[0]) if columns else 0
        for c in columns:
            assert len(c) == self.row_count, "ragged result columns"

    def names(self) -> list[str]:
        return [n for n, _ in self.schema]

    def column(self, name: str):
        return self.columns[self.names().index(name)]

    def rows(self) -> list[tuple]:
        cols = []
        for (name, phys), data in zip(self.schema, self.columns):
            if phys == STR:
                cols.append(data.tolist())
            elif phys in (F32, F64):
                cols.append([float(v) for v in data])
            else:
                cols.append([int(v) for v in data])
        return list(zip(*cols)) if cols else []


# -------------------------------------------------------------- row sources

class HeapSource:
    def __init__(self, table: TableDescriptor):
        self.table = table
        self.name = table.name
        self.row_count = table.row_count

    def has(self, col: str) -> bool:
        return self.table.has_column(col)

    def phys(self, col: str) -> str:
        return self.table.phys(col)

    def values(self, col: str):
        if self.table.phys(col) == STR:
            return self.table.str_array(col)
        return self.table.array(col)


class ResultSource:
    def __init__(self, rs: ResultSet, name: str = "<subquery>"):
        self.rs = rs
        self.name = name
        self.row_count = rs.row_count
        self._schema = dict(rs.schema)

    def has(self, col: str) -> bool:
        return col in self._schema

    def phys(self, col: str) -> str:
        return self._schema[col]

    def values(self, col: str):
        data = self.rs.column(col)
        if isinstance(data, StringColumn):
            return data.as_s()
        return data


# ------------------------------------------------------------------ planning

@dataclass
class SideBinding:
    entry: object                      # table name or QuerySpec
    subplan: "PhysicalPlan | None" = None
    preds: list = field(default_factory=list)
    isin: list = field(default_factory=list)  # (IsIn, subplan) pairs


@dataclass
class PhysicalPlan:
    template_id: str
    spec: QuerySpec
    sides: list[SideBinding]
    join_keys: tuple[ColumnRef, ColumnRef] | None
    catalog: Catalog


def compile(spec: QuerySpec, catalog: Catalog) -> PhysicalPlan:  # noqa: A001
    """Bind a validated spec to its kernel template; deterministic plan."""
    if len(spec.joins) > 1:
        raise UnsupportedShape("only two-way joins are supported")
    if len(spec.tables) != 1:
        raise UnsupportedShape("FROM must name exactly one table or subquery")

    sides = [SideBinding(spec.tables[0])]
    if isinstance(spec.tables[0], QuerySpec):
        sides[0].subplan = compile(spec.tables[0], catalog)
    join_keys = None
    if spec.joins:
        j = spec.joins[0]
        sides.append(SideBinding(j.table))
        left, right = j.left, j.right
        # orient the key pair as (from side, joined side)
        if not _side_has(sides[1], catalog, right.name) and _side_has(sides[1], catalog, left.name):
            left, right = right, left
        join_keys = (left, right)

    for pred in spec.where:
        idx = _pred_side(pred, sides, catalog)
        if isinstance(pred, IsIn):
            sides[idx].isin.append((pred, compile(pred.query, catalog)))
        else:
            sides[idx].preds.append(pred)

    has_agg = any(contains_agg(t.expr) for t in spec.select)
    if spec.joins:
        template = "HashJoinAgg"
    elif isinstance(spec.tables[0], QuerySpec):
        template = "SubqueryMaterialize"
    elif any(s.isin for s in sides):
        template = "IsInSemiJoin"
    elif spec.group:
        template = "GroupBy"
    elif has_agg:
        template = "FilterAgg"
    else:
        template = "FilterProject"
    return PhysicalPlan(template, spec, sides, join_keys, catalog)


def _side_schema(side: SideBinding, catalog: Catalog) -> dict[str, str]:
    if isinstance(side.entry, QuerySpec):
        from .query import output_schema

        return dict(output_schema(side.entry, catalog))
    table = catalog.get(side.entry)
    return {c.name: c.phys for c in table.columns}


def _side_has(side: SideBinding, catalog: Catalog, col: str) -> bool:
    return col in _side_schema(side, catalog)


def _pred_side(pred, sides: list[SideBinding], catalog: Catalog) -> int:
    cols = pred_columns(pred)
    hits = set()
    for ref in cols:
        for i, side in enumerate(sides):
            if ref.table is not None:
                if not isinstance(side.entry, QuerySpec) and side.entry == ref.table:
                    hits.add(i)
            elif _side_has(side, catalog, ref.name):
                hits.add(i)
    if len(hits) != 1:
        raise UnsupportedShape(f"predicate on {cols} does not bind to a single table")
    return hits.pop()


# ----------------------------------------------------------------- execution

class RowCtx:
    """Aligned row selection over one or two sources."""

    def __init__(self, sides: list[tuple[object, np.ndarray]]):
        self.sides = sides
        self.n = len(sides[0][1])
        self._cache: dict = {}

    def resolve(self, ref: ColumnRef) -> tuple[object, np.ndarray]:
        if ref.table is not None:
            for src, rids in self.sides:
                if src.name == ref.table and src.has(ref.name):
                    return src, rids
        else:
            hits = [(src, rids) for src, rids in self.sides if src.has(ref.name)]
            if len(hits) == 1:
                return hits[0]
        raise KeyError(f"cannot resolve column {ref}")

    def col(self, ref: ColumnRef) -> tuple[np.ndarray, str]:
        key = (ref.table, ref.name)
        if key in self._cache:
            return self._cache[key]
        src, rids = self.resolve(ref)
        vals = src.values(ref.name)[rids]
        out = (vals, src.phys(ref.name))
        self._cache[key] = out
        return out

    def take(self, perm: np.ndarray) -> "RowCtx":
        return RowCtx([(src, rids[perm]) for src, rids in self.sides])


def _lit_np(lit):
    if isinstance(lit, LitInt):
        return lit.value, I32
    if isinstance(lit, LitFloat):
        return lit.value, F32
    if isinstance(lit, LitDate):
        return lit.days, D32
    if isinstance(lit, LitString):
        return np.bytes_(lit.value.encode("utf-8")), STR
    raise TypeError(f"not a literal: {lit!r}")


def eval_rows(expr, ctx: RowCtx) -> tuple[np.ndarray, str]:
    """Row-space expression evaluation; aggregates are not allowed here."""
    if isinstance(expr, ColumnRef):
        return ctx.col(expr)
    if isinstance(expr, (LitInt, LitFloat, LitDate, LitString)):
        return _lit_np(expr)
    if isinstance(expr, Arith):
        lv, lp = eval_rows(expr.left, ctx)
        rv, rp = eval_rows(expr.right, ctx)
        if expr.op == "div" or F32 in (lp, rp) or F64 in (lp, rp):
            lv = np.asarray(lv, dtype=np.float64)
            rv = np.asarray(rv, dtype=np.float64)
            out_phys = F64
        else:
            lv = np.asarray(lv, dtype=np.int64)
            rv = np.asarray(rv, dtype=np.int64)
            out_phys = I64
        op = {"add": np.add, "sub": np.subtract, "mul": np.multiply, "div": np.divide}[expr.op]
        return op(lv, rv), out_phys
    if isinstance(expr, Agg):
        raise UnsupportedShape("aggregate evaluated in row space")
    raise TypeError(f"not an expression: {expr!r}")


def _pred_mask(pred, ctx: RowCtx, heap) -> np.ndarray:
    if isinstance(pred, Cmp):
        vals, _ = ctx.col(pred.col)
        lit, lp = _lit_np(pred.value)
        if lp == STR:
            vals = vals.astype(_common_s(vals.dtype, lit))
            lit = np.bytes_(lit).astype(vals.dtype)
        return _CMP[pred.op](vals, lit)
    if isinstance(pred, Between):
        vals, _ = ctx.col(pred.col)
        lo, _ = _lit_np(pred.lo)
        hi, _ = _lit_np(pred.hi)
        return (vals >= lo) & (vals <= hi)
    if isinstance(pred, OrGroup):
        mask = np.zeros(ctx.n, dtype=bool)
        for m in pred.members:
            mask |= _pred_mask(m, ctx, heap)
        return mask
    raise TypeError(f"unexpected predicate {pred!r}")


def _common_s(dtype_a, scalar_b) -> np.dtype:
    width = max(dtype_a.itemsize, len(bytes(scalar_b)), 1)
    return np.dtype(f"S{width}")


def _hash_values(vals: np.ndarray) -> np.ndarray:
    """32-bit bucket hashes for join/group keys of any supported type."""
    if vals.dtype.kind == "S":
        return hash_strings(vals)
    if vals.dtype == np.int64 or vals.dtype == np.uint64:
        u = vals.astype(np.uint64)
        return mix32_array((u ^ (u >> np.uint64(32))).astype(np.uint32))
    if vals.dtype == np.float32:
        return mix32_array(vals.view(np.uint32))
    if vals.dtype == np.float64:
        u = vals.view(np.uint64)
        return mix32_array((u ^ (u >> np.uint64(32))).astype(np.uint32))
    return mix32_array(vals.astype(np.uint32))


def _filter_side(src, binding: SideBinding, heap) -> np.ndarray:
    rids = np.arange(src.row_count, dtype=np.int64)
    for pred in binding.preds:
        if len(rids) == 0:
            break
        ctx = RowCtx([(src, rids)])
        rids = rids[_pred_mask(pred, ctx, heap)]
    for isin_pred, subplan in binding.isin:
        if len(rids) == 0:
            break
        rids = rids[_isin_mask(isin_pred, subplan, src, rids, heap)]
    return rids


def _isin_mask(pred: IsIn, subplan: PhysicalPlan, src, rids: np.ndarray, heap) -> np.ndarray:
    sub = execute(subplan, heap)
    member = sub.columns[0]
    if isinstance(member, StringColumn):
        member = member.as_s()
    probe_vals = src.values(pred.col.name)[rids]
    if probe_vals.dtype.kind == "S" or np.asarray(member).dtype.kind == "S":
        width = max(probe_vals.dtype.itemsize, np.asarray(member).dtype.itemsize)
        probe_vals = probe_vals.astype(f"S{width}")
        member = np.asarray(member).astype(f"S{width}")
    seg = pool_for(heap).acquire(len(member))
    try:
        seg.bulk_insert(_hash_values(np.asarray(member)), np.arange(len(member)))
        pos, mpos = seg.bulk_probe(_hash_values(probe_vals))
        verified = pos[probe_vals[pos] == np.asarray(member)[mpos]]
    finally:
        pool_for(heap).release(seg)
    mask = np.zeros(len(rids), dtype=bool)
    mask[np.unique(verified)] = True
    return mask


def _join(ctx0_src, rids0, ctx1_src, rids1, keys, heap) -> RowCtx:
    key0 = ctx0_src.values(keys[0].name)[rids0]
    key1 = ctx1_src.values(keys[1].name)[rids1]
    # build on the smaller filtered side
    if len(rids0) <= len(rids1):
        b_src, b_rids, b_keys = ctx0_src, rids0, key0
        p_src, p_rids, p_keys = ctx1_src, rids1, key1
        build_is_left = True
    else:
        b_src, b_rids, b_keys = ctx1_src, rids1, key1
        p_src, p_rids, p_keys = ctx0_src, rids0, key0
        build_is_left = False
    seg = pool_for(heap).acquire(len(b_rids))
    try:
        seg.bulk_insert(_hash_values(b_keys), b_rids)
        pos, cand_rids = seg.bulk_probe(_hash_values(p_keys))
    finally:
        pool_for(heap).release(seg)
    if len(pos) == 0:
        empty = np.empty(0, dtype=np.int64)
        return RowCtx([(ctx0_src, empty), (ctx1_src, empty)])
    # candidates are a bucket superset: re-verify the actual key values
    build_all = b_src.values(keys[0].name if build_is_left else keys[1].name)
    keep = build_all[cand_rids] == p_keys[pos]
    pos, cand_rids = pos[keep], cand_rids[keep]
    if build_is_left:
        return RowCtx([(ctx0_src, cand_rids), (ctx1_src, p_rids[pos])])
    return RowCtx([(ctx0_src, p_rids[pos]), (ctx1_src, cand_rids)])


def _absent_value(phys: str):
    if phys in (F32, F64):
        return np.nan
    if phys == I64:
        return INT64_ABSENT
    return INT32_ABSENT


def _agg_slot(agg: Agg, ctx: RowCtx, starts: np.ndarray | None):
    """Aggregate values: per group when starts is given, else a scalar."""
    if agg.fn == "count":
        if starts is None:
            return np.int64(ctx.n), I64
        counts = np.diff(np.r_[starts, ctx.n])
        return counts.astype(np.int64), I64

    vals, phys = eval_rows(agg.arg, ctx)
    is_float = phys in (F32, F64)
    if agg.fn in ("sum", "avg"):
        acc = np.asarray(vals, dtype=np.float64 if is_float else np.int64)
        if starts is None:
            total = acc.sum() if ctx.n else (0.0 if is_float else np.int64(0))
            if agg.fn == "sum":
                return total, (F64 if is_float else I64)
            return (np.float64(total) / ctx.n if ctx.n else np.nan), F64
        sums = np.add.reduceat(acc, starts)
        if agg.fn == "sum":
            return sums, (F64 if is_float else I64)
        counts = np.diff(np.r_[starts, ctx.n])
        return np.asarray(sums, dtype=np.float64) / counts, F64

    # min / max preserve the argument type
    reducer = np.minimum if agg.fn == "min" else np.maximum
    if starts is None:
        if ctx.n == 0:
            return _absent_value(phys), phys
        return (vals.min() if agg.fn == "min" else vals.max()), phys
    return reducer.reduceat(vals, starts), phys


def _group_partition(ctx: RowCtx, group_cols, heap) -> tuple[RowCtx, np.ndarray]:
    """Hash-table group discovery, then partition by true key values.

    Returns the context permuted so equal keys are adjacent, plus the start
    offset of each group.
    """
    key_arrays = [ctx.col(c)[0] for c in group_cols]
    hashes = _hash_values(key_arrays[0])
    for extra in key_arrays[1:]:
        hashes = mix32_array(hashes * np.uint32(31) + _hash_values(extra))
    seg = pool_for(heap).acquire(ctx.n)
    try:
        seg.bulk_insert(hashes, np.arange(ctx.n))
        _, positions = seg._collect()
    finally:
        pool_for(heap).release(seg)
    # bucket order in, key order out; equal keys always share a bucket
    gathered = [a[positions] for a in key_arrays]
    order = np.lexsort(tuple(reversed(gathered))) if gathered else np.arange(len(positions))
    perm = positions[order]
    sorted_keys = [a[order] for a in gathered]
    if len(perm) == 0:
        return ctx.take(perm), np.empty(0, dtype=np.int64)
    changed = np.zeros(len(perm) - 1, dtype=bool)
    for a in sorted_keys:
        changed |= a[1:] != a[:-1]
    starts = np.flatnonzero(np.r_[True, changed])
    return ctx.take(perm), starts


def _term_name(term: SelectTerm, position: int) -> str:
    if term.alias:
        return term.alias
    if isinstance(term.expr, ColumnRef):
        return term.expr.name
    return f"f{position + 1}"


def _to_column(values, phys, n: int):
    if phys == STR:
        if isinstance(values, StringColumn):
            return values
        return StringColumn.from_s_array(np.asarray(values))
    arr = np.asarray(values)
    if arr.ndim == 0:
        arr = np.full(n, arr[()], dtype=NUMERIC_DTYPES[phys])
    return arr.astype(NUMERIC_DTYPES[phys], copy=False)


def _eval_with_slots(expr, slots: dict, ctx_first: RowCtx | None, n_groups: int):
    """Expression over aggregate slots; bare columns take first-per-group values."""
    if isinstance(expr, Agg):
        return slots[_agg_key(expr)]
    if isinstance(expr, ColumnRef):
        vals, phys = ctx_first.col(expr)
        return vals, phys
    if isinstance(expr, (LitInt, LitFloat, LitDate, LitString)):
        return _lit_np(expr)
    if isinstance(expr, Arith):
        lv, lp = _eval_with_slots(expr.left, slots, ctx_first, n_groups)
        rv, rp = _eval_with_slots(expr.right, slots, ctx_first, n_groups)
        if expr.op == "div" or F32 in (lp, rp) or F64 in (lp, rp):
            lv = np.asarray(lv, dtype=np.float64)
            rv = np.asarray(rv, dtype=np.float64)
            phys = F64
        else:
            lv = np.asarray(lv, dtype=np.int64)
            rv = np.asarray(rv, dtype=np.int64)
            phys = I64
        op = {"add": np.add, "sub": np.subtract, "mul": np.multiply, "div": np.divide}[expr.op]
        return op(lv, rv), phys
    raise TypeError(f"not an expression: {expr!r}")


def _agg_key(agg: Agg):
    from .query import _expr_key

    return _expr_key(agg)


def _collect_aggs(terms) -> list[Agg]:
    seen = {}
    for term in terms:
        stack = [term.expr]
        while stack:
            e = stack.pop()
            if isinstance(e, Agg):
                seen.setdefault(_agg_key(e), e)
            elif isinstance(e, Arith):
                stack.extend((e.left, e.right))
    return list(seen.values())


def execute(plan: PhysicalPlan, heap) -> ResultSet:
    spec = plan.spec
    sources = []
    for side in plan.sides:
        if side.subplan is not None:
            sources.append(ResultSource(execute(side.subplan, heap)))
        else:
            sources.append(HeapSource(plan.catalog.get(side.entry)))

    rid_sets = [_filter_side(src, side, heap) for src, side in zip(sources, plan.sides)]

    if plan.join_keys is not None:
        ctx = _join(sources[0], rid_sets[0], sources[1], rid_sets[1], plan.join_keys, heap)
    else:
        ctx = RowCtx([(sources[0], rid_sets[0])])

    has_agg = any(contains_agg(t.expr) for t in spec.select)

    schema: list[tuple[str, str]] = []
    columns: list = []

    if spec.group:
        sorted_ctx, starts = _group_partition(ctx, spec.group, heap)
        n_groups = len(starts)
        slots = {}
        for agg in _collect_aggs(spec.select):
            slots[_agg_key(agg)] = _agg_slot(agg, sorted_ctx, starts)
        firsts = sorted_ctx.take(starts)
        for i, term in enumerate(spec.select):
            vals, phys = _eval_with_slots(term.expr, slots, firsts, n_groups)
            schema.append((_term_name(term, i), phys))
            columns.append(_to_column(vals, phys, n_groups))
    elif has_agg:
        slots = {}
        for agg in _collect_aggs(spec.select):
            slots[_agg_key(agg)] = _agg_slot(agg, ctx, None)
        for i, term in enumerate(spec.select):
            vals, phys = _eval_with_slots(term.expr, slots, None, 1)
            schema.append((_term_name(term, i), phys))
            columns.append(_to_column(vals, phys, 1))
    else:
        for i, term in enumerate(spec.select):
            vals, phys = eval_rows(term.expr, ctx)
            schema.append((_term_name(term, i), phys))
            if phys == STR:
                columns.append(StringColumn.from_s_array(np.asarray(vals)))
            else:
                columns.append(_to_column(vals, phys, ctx.n))

    rs = ResultSet(schema, columns)
    if spec.order or spec.limit is not None:
        rs = sort_limit(rs, spec.order, spec.limit)
    return rs


def sort_limit(rs: ResultSet, order, limit: int | None) -> ResultSet:
    """Full stable sort, then cut; ties keep their pre-sort order."""
    if order:
        names = rs.names()
        keys = []
        for term in order:
            if term.key not in names:
                raise KeyError(f"ORDER BY key {term.key!r} not in result")
            data = rs.columns[names.index(term.key)]
            if isinstance(data, StringColumn):
                data = data.as_s()
            _, codes = np.unique(data, return_inverse=True)
            if term.desc:
                codes = codes.max(initial=0) - codes
            keys.append(codes)
        # np.lexsort is stable and sorts by the last key first
        perm = np.lexsort(tuple(reversed(keys)))
    else:
        perm = np.arange(rs.row_count)
    if limit is not None:
        perm = perm[:limit]
    columns = []
    for data in rs.columns:
        if isinstance(data, StringColumn):
            columns.append(StringColumn.from_s_array(data.as_s()[perm]))
        else:
            columns.append(data[perm])
    return ResultSet(list(rs.schema), columns)


def run(spec: QuerySpec, catalog: Catalog, heap) -> ResultSet:
    """validate-free convenience: compile then execute."""
    return execute(compile(spec, catalog), heap)
