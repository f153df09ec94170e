"""Data ingestion and the ABMV1 view-shipping format.

ABMV1 is the binary payload a backend ships to a client: little-endian
throughout, bit-exact round trip, CRC32-checksummed.

    magic       4 bytes  'ABMV'
    version     u16      currently 1
    col count   u16
    def length  u32      embedded view definition (UTF-8 JSON), may be 0
    def bytes   ...
    per column:
        name length  u16
        name bytes   ...
        phys type    u8   0=i32 1=f32 2=d32 3=str 4=i64 5=f64
        row count    u32
        payload len  u32
        payload      raw column bytes; str = u32 offsets then byte pool
    checksum    u32      CRC32 of everything before it

Ingestion side: pipe-delimited ``.tbl`` files (trailing '|' tolerated) and a
seeded synthetic generator whose column domains mirror a warehouse mix of
sparse/dense integers, uniform floats, a multi-year date span and dictionary
strings.
"""

from __future__ import annotations

import struct
import zlib

import numpy as np

from .engine import ResultSet, StringColumn
from .heap import (
    D32,
    F32,
    F64,
    I32,
    I64,
    STR,
    NUMERIC_DTYPES,
    Catalog,
    ColumnarHeap,
    LoadError,
    TableDescriptor,
    date_to_days,
    load_arrays,
    table_load,
)
from .rewriter import MVDefinition

MAGIC = b"ABMV"
VERSION = 1

_TYPE_CODES = {I32: 0, F32: 1, D32: 2, STR: 3, I64: 4, F64: 5}
_CODE_TYPES = {v: k for k, v in _TYPE_CODES.items()}


class BadMagic(Exception):
    pass


class BadChecksum(Exception):
    pass


class VersionUnsupported(Exception):
    pass


# -------------------------------------------------------------------- loading

def load_tbl(path, schema: list[tuple[str, str]], heap: ColumnarHeap,
             name: str | None = None, catalog: Catalog | None = None) -> TableDescriptor:
    """Load a pipe-delimited file; row count equals line count."""
    if name is None:
        import os

        name = os.path.splitext(os.path.basename(str(path)))[0]
    rows = []
    n_cols = len(schema)
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            if line.endswith("|"):
                line = line[:-1]
            cells = line.split("|")
            if len(cells) != n_cols:
                raise LoadError(f"{path}: line {lineno} has {len(cells)} fields, expected {n_cols}")
            rows.append(cells)
    return table_load(heap, name, schema, rows, catalog)


def write_tbl(path, columns: list[tuple[str, str, object]]) -> int:
    """Write columns back out as a .tbl file; returns the row count."""
    n = len(columns[0][2]) if columns else 0
    from .heap import days_to_date

    rendered = []
    for _, phys, data in columns:
        if phys == STR:
            rendered.append([str(v) for v in data])
        elif phys == D32:
            rendered.append([days_to_date(int(v)).isoformat() for v in data])
        elif phys in (F32, F64):
            rendered.append([format(float(v), ".9g") for v in data])
        else:
            rendered.append([str(int(v)) for v in data])
    with open(path, "w", encoding="utf-8") as fh:
        for i in range(n):
            fh.write("|".join(col[i] for col in rendered))
            fh.write("|\n")
    return n


# ----------------------------------------------------------------- synthetic

def gen_columns(seed: int, row_count: int, columns: list[tuple]) -> list[tuple]:
    """Deterministic column data: (name, phys, params) -> (name, phys, values).

    params by phys type:
        i32: {"lo", "hi"}              uniform integers in [lo, hi]
        f32: {"lo", "hi", "step"?}     uniform floats, optionally quantized
        d32: {"start", "span_days"}    uniform dates from start
        str: {"values": [...]}         uniform picks from a dictionary
    """
    rng = np.random.default_rng(seed)
    out = []
    for name, phys, params in columns:
        if phys == I32:
            vals = rng.integers(params["lo"], params["hi"] + 1, size=row_count, dtype=np.int64)
            out.append((name, I32, vals.astype(np.int32)))
        elif phys == F32:
            vals = rng.uniform(params["lo"], params["hi"], size=row_count)
            step = params.get("step")
            if step:
                vals = np.round(vals / step) * step
            out.append((name, F32, vals.astype(np.float32)))
        elif phys == D32:
            start = date_to_days(params["start"])
            vals = start + rng.integers(0, params["span_days"], size=row_count, dtype=np.int64)
            out.append((name, D32, vals.astype(np.int32)))
        elif phys == STR:
            choices = params["values"]
            idx = rng.integers(0, len(choices), size=row_count)
            out.append((name, STR, [choices[i] for i in idx]))
        else:
            raise ValueError(f"unsupported synthetic type {phys!r}")
    return out


DEFAULT_SYNTHETIC = [
    ("k_sparse", I32, {"lo": 0, "hi": 7}),
    ("k_dense", I32, {"lo": 0, "hi": 1_000_000}),
    ("fk", I32, {"lo": 0, "hi": 400}),
    ("v_int", I32, {"lo": 0, "hi": 100}),
    ("v_float", F32, {"lo": 0.0, "hi": 1.0}),
    ("when", D32, {"start": "1992-01-01", "span_days": 7 * 365}),
    ("tag", STR, {"values": ["alpha", "beta", "gamma", "delta", "epsilon"]}),
]

DIM_SYNTHETIC = [
    ("pk", I32, {"lo": 0, "hi": 400}),
    ("dim_weight", F32, {"lo": 0.0, "hi": 1.0}),
    ("dim_tag", STR, {"values": ["alpha", "beta", "gamma", "delta", "epsilon"]}),
]


def gen_synthetic(seed: int, name: str, row_count: int, heap: ColumnarHeap,
                  columns: list[tuple] | None = None,
                  catalog: Catalog | None = None) -> TableDescriptor:
    """Load a deterministic synthetic table; same seed, same bytes."""
    data = gen_columns(seed, row_count, columns or DEFAULT_SYNTHETIC)
    return load_arrays(heap, name, data, catalog)


# --------------------------------------------------------------------- ABMV1

def _column_payload(phys: str, data) -> bytes:
    if phys == STR:
        col = data if isinstance(data, StringColumn) else StringColumn.from_values(data)
        return col.offsets.astype("<u4").tobytes() + col.pool
    arr = np.asarray(data, dtype=NUMERIC_DTYPES[phys])
    return arr.tobytes()


def mv_serialize(rs: ResultSet, definition: MVDefinition | None = None) -> bytes:
    """Serialize a result set (and optionally its view definition) to ABMV1."""
    def_bytes = definition.dumps().encode("utf-8") if definition is not None else b""
    parts = [MAGIC, struct.pack("<HHI", VERSION, len(rs.schema), len(def_bytes)), def_bytes]
    for (name, phys), data in zip(rs.schema, rs.columns):
        payload = _column_payload(phys, data)
        name_b = name.encode("utf-8")
        parts.append(struct.pack("<H", len(name_b)))
        parts.append(name_b)
        parts.append(struct.pack("<BII", _TYPE_CODES[phys], rs.row_count, len(payload)))
        parts.append(payload)
    body = b"".join(parts)
    return body + struct.pack("<I", zlib.crc32(body) & 0xFFFFFFFF)


def payload_size(rs: ResultSet, definition: MVDefinition | None = None) -> int:
    """Exact ABMV1 size, computable without serializing."""
    def_len = len(definition.dumps().encode("utf-8")) if definition is not None else 0
    size = 4 + 8 + def_len
    for (name, phys), data in zip(rs.schema, rs.columns):
        size += 2 + len(name.encode("utf-8")) + 9
        if phys == STR:
            col = data if isinstance(data, StringColumn) else StringColumn.from_values(data)
            size += 4 * len(col.offsets) + len(col.pool)
        else:
            size += len(data) * NUMERIC_DTYPES[phys].itemsize
    return size + 4


def mv_deserialize(payload: bytes, heap: ColumnarHeap,
                   catalog: Catalog | None = None,
                   table_name: str | None = None) -> tuple[ResultSet, MVDefinition | None]:
    """Parse an ABMV1 payload, copying column bytes straight into the heap.

    When a catalog is given the view is registered as a queryable table named
    after the embedded definition (or ``table_name``).
    """
    if len(payload) < 20 or payload[:4] != MAGIC:
        raise BadMagic("not an ABMV payload")
    body, (crc,) = payload[:-4], struct.unpack("<I", payload[-4:])
    if zlib.crc32(body) & 0xFFFFFFFF != crc:
        raise BadChecksum("payload checksum mismatch")
    version, n_cols, def_len = struct.unpack_from("<HHI", payload, 4)
    if version != VERSION:
        raise VersionUnsupported(f"payload version {version}, supported {VERSION}")
    pos = 12
    definition = None
    if def_len:
        definition = MVDefinition.loads(payload[pos : pos + def_len].decode("utf-8"))
        pos += def_len

    from .heap import ColumnDescriptor

    schema: list[tuple[str, str]] = []
    columns: list = []
    descs: list[ColumnDescriptor] = []
    row_count = 0
    for _ in range(n_cols):
        (name_len,) = struct.unpack_from("<H", payload, pos)
        pos += 2
        name = payload[pos : pos + name_len].decode("utf-8")
        pos += name_len
        code, row_count, plen = struct.unpack_from("<BII", payload, pos)
        pos += 9
        raw = payload[pos : pos + plen]
        pos += plen
        phys = _CODE_TYPES[code]
        if phys == STR:
            offs_base = heap.alloc(row_count * 4, 4)
            heap.write_bytes(offs_base, raw[: row_count * 4])
            pool = raw[row_count * 4 :]
            pool_base = heap.alloc(len(pool), 1)
            heap.write_bytes(pool_base, pool)
            descs.append(ColumnDescriptor(name, STR, offs_base, row_count,
                                          offsets_base=offs_base, pool_base=pool_base,
                                          pool_len=len(pool)))
            columns.append(StringColumn(np.frombuffer(raw[: row_count * 4], dtype="<u4"), pool))
        else:
            dtype = NUMERIC_DTYPES[phys]
            base = heap.alloc(plen, 8 if dtype.itemsize == 8 else 4)
            heap.write_bytes(base, raw)
            desc = ColumnDescriptor(name, phys, base, row_count)
            descs.append(desc)
            columns.append(heap.view(dtype, base, row_count))
        schema.append((name, phys))

    rs = ResultSet(schema, columns)
    if catalog is not None:
        name = table_name or (definition.name if definition else None)
        if name is None:
            raise ValueError("cannot register a view without a name")
        catalog.add(TableDescriptor(name, descs, row_count, heap))
    return rs, definition
