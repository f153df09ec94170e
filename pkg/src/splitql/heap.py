"""Single-region columnar storage.

All table columns (and, at runtime, all hash-table segments) live inside one
pre-allocated byte region. Columns are laid out end-to-end; a table is just a
group of typed offsets into the region. Record ids are zero-based row indices
that translate directly into array positions.

Physical column types:

    i32   32-bit signed integer
    f32   32-bit float
    d32   date as signed days since 1970-01-01 (stored as i32)
    str   per-row 4-byte start offsets into a pool of 0-terminated bytes
    i64   64-bit signed integer   (materialized results/views only)
    f64   64-bit float            (materialized results/views only)

Base-table ingestion accepts the 32-bit types and str; the 64-bit types exist
so that shipped aggregates keep full accumulator precision.
"""

from __future__ import annotations

import datetime
from dataclasses import dataclass, field

import numpy as np

I32 = "i32"
F32 = "f32"
D32 = "d32"
STR = "str"
I64 = "i64"
F64 = "f64"

NUMERIC_DTYPES = {
    I32: np.dtype("<i4"),
    F32: np.dtype("<f4"),
    D32: np.dtype("<i4"),
    I64: np.dtype("<i8"),
    F64: np.dtype("<f8"),
}

_EPOCH = datetime.date(1970, 1, 1).toordinal()


class OutOfHeap(Exception):
    """Allocation would cross the end of the region. The heap never grows."""


class LoadError(Exception):
    """Ingestion failure; message names the offending row and column."""


def date_to_days(value) -> int:
    """Convert a civil date ('YYYY-MM-DD', datetime.date or int days) to epoch days."""
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, datetime.date):
        return value.toordinal() - _EPOCH
    return datetime.date.fromisoformat(str(value)).toordinal() - _EPOCH


def days_to_date(days: int) -> datetime.date:
    return datetime.date.fromordinal(int(days) + _EPOCH)


class ColumnarHeap:
    """One contiguous byte region with a bump allocator.

    high_water is the offset of the first free byte; allocations never move
    and are never freed. Running out of space is a hard error.
    """

    def __init__(self, capacity: int):
        if capacity <= 0:
            raise ValueError("heap capacity must be positive")
        self.capacity = capacity
        self.high_water = 0
        self.data = bytearray(capacity)
        # installed lazily by the execution engine
        self._segments = None

    def alloc(self, nbytes: int, align: int = 4) -> int:
        """Reserve nbytes at the next offset aligned to `align`; returns the offset."""
        if align not in (1, 4, 8):
            raise ValueError(f"unsupported alignment {align}")
        offset = (self.high_water + align - 1) & ~(align - 1)
        if offset + nbytes > self.capacity:
            raise OutOfHeap(
                f"alloc of {nbytes} bytes at {offset} exceeds capacity {self.capacity}"
            )
        if nbytes > 0:
            self.high_water = offset + nbytes
        return offset

    def view(self, dtype, offset: int, count: int) -> np.ndarray:
        """Typed, writable array view over [offset, offset + count*itemsize)."""
        return np.frombuffer(self.data, dtype=dtype, count=count, offset=offset)

    def u8(self, offset: int, count: int) -> np.ndarray:
        return self.view(np.uint8, offset, count)

    def write_bytes(self, offset: int, payload: bytes) -> None:
        self.data[offset : offset + len(payload)] = payload


# compatibility with the operation-style surface
def heap_create(capacity: int) -> ColumnarHeap:
    return ColumnarHeap(capacity)


def heap_alloc(heap: ColumnarHeap, nbytes: int, align: int = 4) -> int:
    return heap.alloc(nbytes, align)


@dataclass
class ColumnDescriptor:
    """Location of one column inside the heap.

    For str columns base_offset doubles as offsets_base (the 4-byte start
    offsets array); pool_base/pool_len locate the 0-terminated byte pool.
    """

    name: str
    phys: str
    base_offset: int
    row_count: int
    offsets_base: int = -1
    pool_base: int = -1
    pool_len: int = 0

    def nbytes(self) -> int:
        if self.phys == STR:
            return self.row_count * 4 + self.pool_len
        return self.row_count * NUMERIC_DTYPES[self.phys].itemsize


@dataclass
class TableDescriptor:
    name: str
    columns: list[ColumnDescriptor]
    row_count: int
    heap: ColumnarHeap = field(repr=False, default=None)

    def __post_init__(self):
        self._by_name = {c.name: c for c in self.columns}

    def column(self, name: str) -> ColumnDescriptor:
        try:
            return self._by_name[name]
        except KeyError:
            raise KeyError(f"table {self.name!r} has no column {name!r}") from None

    def has_column(self, name: str) -> bool:
        return name in self._by_name

    def phys(self, name: str) -> str:
        return self.column(name).phys

    def array(self, name: str) -> np.ndarray:
        """Full typed view of a numeric column (i32/f32/d32/i64/f64)."""
        col = self.column(name)
        if col.phys == STR:
            raise TypeError(f"column {name!r} is a string column; use str_array()")
        return self.heap.view(NUMERIC_DTYPES[col.phys], col.base_offset, col.row_count)

    def str_array(self, name: str) -> np.ndarray:
        """String column materialized as a numpy 'S' array (byte-wise ordering)."""
        col = self.column(name)
        if col.phys != STR:
            raise TypeError(f"column {name!r} is not a string column")
        return _gather_strings(self.heap, col)

    def str_offsets(self, name: str) -> np.ndarray:
        col = self.column(name)
        return self.heap.view(np.uint32, col.offsets_base, col.row_count)

    def str_pool(self, name: str) -> bytes:
        col = self.column(name)
        return bytes(self.heap.data[col.pool_base : col.pool_base + col.pool_len])


def _gather_strings(heap: ColumnarHeap, col: ColumnDescriptor) -> np.ndarray:
    n = col.row_count
    if n == 0:
        return np.empty(0, dtype="S1")
    offsets = heap.view(np.uint32, col.offsets_base, n).astype(np.int64)
    pool = heap.u8(col.pool_base, col.pool_len)
    ends = np.empty(n, dtype=np.int64)
    ends[:-1] = offsets[1:]
    ends[-1] = col.pool_len
    lens = ends - offsets - 1  # strip the 0 terminator
    width = max(int(lens.max()), 1)
    idx = offsets[:, None] + np.arange(width)[None, :]
    valid = np.arange(width)[None, :] < lens[:, None]
    mat = np.where(valid, pool[np.minimum(idx, col.pool_len - 1)], 0).astype(np.uint8)
    return np.ascontiguousarray(mat).view(f"S{width}").ravel()


class Catalog:
    """Name -> TableDescriptor registry for one engine session."""

    def __init__(self):
        self.tables: dict[str, TableDescriptor] = {}

    def add(self, table: TableDescriptor) -> None:
        self.tables[table.name] = table

    def get(self, name: str) -> TableDescriptor:
        try:
            return self.tables[name]
        except KeyError:
            raise KeyError(f"unknown table {name!r}") from None

    def has(self, name: str) -> bool:
        return name in self.tables

    def names(self) -> list[str]:
        return sorted(self.tables)


def _convert_column(name: str, phys: str, cells: list) -> np.ndarray | tuple:
    """Convert one column of raw cells; raises LoadError naming row and column."""
    for i, cell in enumerate(cells):
        if cell is None or (isinstance(cell, str) and cell == ""):
            raise LoadError(f"empty cell at row {i}, column {name!r} (NULLs unsupported)")
    try:
        if phys == I32:
            return np.array([int(c) for c in cells], dtype=np.int32)
        if phys == F32:
            return np.array([float(c) for c in cells], dtype=np.float32)
        if phys == D32:
            return np.array([date_to_days(c) for c in cells], dtype=np.int32)
        if phys == STR:
            return tuple(str(c) for c in cells)
    except (ValueError, TypeError) as exc:
        for i, cell in enumerate(cells):
            try:
                if phys == I32:
                    int(cell)
                elif phys == F32:
                    float(cell)
                elif phys == D32:
                    date_to_days(cell)
            except (ValueError, TypeError):
                raise LoadError(
                    f"cannot convert {cell!r} at row {i}, column {name!r} to {phys}"
                ) from None
        raise LoadError(f"conversion failure in column {name!r}: {exc}") from None
    raise ValueError(f"unsupported physical type {phys!r}")


def _store_numeric(heap: ColumnarHeap, name: str, values: np.ndarray) -> ColumnDescriptor:
    dtype = values.dtype
    phys = {np.dtype("<i4"): I32, np.dtype("<f4"): F32,
            np.dtype("<i8"): I64, np.dtype("<f8"): F64}[np.dtype(dtype)]
    align = 8 if dtype.itemsize == 8 else 4
    offset = heap.alloc(len(values) * dtype.itemsize, align)
    heap.view(dtype, offset, len(values))[:] = values
    return ColumnDescriptor(name, phys, offset, len(values))


def _store_strings(heap: ColumnarHeap, name: str, values) -> ColumnDescriptor:
    encoded = [v.encode("utf-8") if isinstance(v, str) else bytes(v) for v in values]
    n = len(encoded)
    pool_len = sum(len(e) + 1 for e in encoded)
    offs_base = heap.alloc(n * 4, 4)
    pool_base = heap.alloc(pool_len, 1)
    offsets = heap.view(np.uint32, offs_base, n)
    cursor = 0
    chunks = []
    for i, e in enumerate(encoded):
        offsets[i] = cursor
        chunks.append(e)
        chunks.append(b"\x00")
        cursor += len(e) + 1
    heap.write_bytes(pool_base, b"".join(chunks))
    return ColumnDescriptor(name, STR, offs_base, n,
                            offsets_base=offs_base, pool_base=pool_base, pool_len=pool_len)


def load_arrays(heap: ColumnarHeap, name: str, columns: list[tuple], catalog: Catalog | None = None) -> TableDescriptor:
    """Load pre-typed columns: (col_name, phys, data) with numpy arrays or str sequences."""
    descs = []
    row_count = None
    for col_name, phys, data in columns:
        if phys == STR:
            desc = _store_strings(heap, col_name, data)
        else:
            values = np.asarray(data, dtype=NUMERIC_DTYPES[phys])
            desc = _store_numeric(heap, col_name, values)
            desc.phys = phys  # keep d32 tag (same dtype as i32)
        if row_count is None:
            row_count = desc.row_count
        elif row_count != desc.row_count:
            raise LoadError(f"column {col_name!r} has {desc.row_count} rows, expected {row_count}")
        descs.append(desc)
    table = TableDescriptor(name, descs, row_count or 0, heap)
    if catalog is not None:
        catalog.add(table)
    return table


def table_load(heap: ColumnarHeap, name: str, schema: list[tuple[str, str]], rows,
               catalog: Catalog | None = None) -> TableDescriptor:
    """Lay out each column of `rows` end-to-end in the heap.

    schema is an ordered list of (column name, phys type); every row must
    have one cell per schema entry.
    """
    rows = list(rows)
    n_cols = len(schema)
    cells_by_col: list[list] = [[] for _ in range(n_cols)]
    for i, row in enumerate(rows):
        if len(row) != n_cols:
            raise LoadError(f"row {i} has {len(row)} cells, schema has {n_cols}")
        for j, cell in enumerate(row):
            cells_by_col[j].append(cell)
    columns = []
    for (col_name, phys), cells in zip(schema, cells_by_col):
        converted = _convert_column(col_name, phys, cells)
        columns.append((col_name, phys, converted))
    return load_arrays(heap, name, columns, catalog)


def col_read(table: TableDescriptor, column: str, rid: int):
    """Read the value at (column, record id). Dates come back as epoch-day ints."""
    assert 0 <= rid < table.row_count, f"rid {rid} out of range"
    col = table.column(column)
    if col.phys == STR:
        offsets = table.str_offsets(column)
        start = int(offsets[rid])
        end = int(offsets[rid + 1]) if rid + 1 < table.row_count else col.pool_len
        raw = table.heap.data[col.pool_base + start : col.pool_base + end - 1]
        return raw.decode("utf-8")
    value = table.array(column)[rid]
    if col.phys in (F32, F64):
        return float(value)
    return int(value)
