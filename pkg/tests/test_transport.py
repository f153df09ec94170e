import numpy as np
import pytest

from splitql.engine import ResultSet, StringColumn
from splitql.heap import ColumnarHeap, LoadError
from splitql.query import QuerySpec
from splitql.rewriter import generate_mvq
from splitql.transport import (
    DEFAULT_SYNTHETIC,
    BadChecksum,
    BadMagic,
    VersionUnsupported,
    gen_columns,
    gen_synthetic,
    load_tbl,
    mv_deserialize,
    mv_serialize,
    payload_size,
    write_tbl,
)
from splitql.tpch import q6


def test_load_tbl_counts_lines(tmp_path, heap):
    p = tmp_path / "t.tbl"
    p.write_text("1|2.5|x|\n2|3.5|y|\n")
    t = load_tbl(p, [("a", "i32"), ("b", "f32"), ("c", "str")], heap)
    assert t.row_count == 2
    assert t.name == "t"


def test_load_tbl_trailing_pipe_optional(tmp_path, heap):
    p = tmp_path / "t.tbl"
    p.write_text("1|x\n2|y|\n")
    t = load_tbl(p, [("a", "i32"), ("c", "str")], heap)
    assert t.row_count == 2


def test_load_tbl_empty_file(tmp_path, heap):
    p = tmp_path / "t.tbl"
    p.write_text("")
    t = load_tbl(p, [("a", "i32")], heap)
    assert t.row_count == 0


def test_load_tbl_arity_error_names_line(tmp_path, heap):
    p = tmp_path / "t.tbl"
    p.write_text("1|2|\n1|\n")
    with pytest.raises(LoadError) as exc:
        load_tbl(p, [("a", "i32"), ("b", "i32")], heap)
    assert "line 2" in str(exc.value)


def test_write_then_load_roundtrip(tmp_path, heap):
    cols = gen_columns(3, 50, DEFAULT_SYNTHETIC)
    p = tmp_path / "synth.tbl"
    write_tbl(p, cols)
    schema = [(n, phys) for n, phys, _ in cols]
    t = load_tbl(p, schema, heap)
    assert t.row_count == 50
    for name, phys, values in cols:
        if phys == "str":
            got = [t.str_array(name)[i].decode() for i in range(50)]
            assert got == list(values)
        else:
            assert np.array_equal(t.array(name), np.asarray(values))


def test_synthetic_deterministic():
    a = gen_columns(9, 200, DEFAULT_SYNTHETIC)
    b = gen_columns(9, 200, DEFAULT_SYNTHETIC)
    for (n1, p1, v1), (n2, p2, v2) in zip(a, b):
        assert n1 == n2 and p1 == p2
        if p1 == "str":
            assert list(v1) == list(v2)
        else:
            assert np.array_equal(v1, v2)


def test_synthetic_zero_rows(heap):
    t = gen_synthetic(1, "empty", 0, heap)
    assert t.row_count == 0


def test_synthetic_sparse_cardinality(heap):
    cols = gen_columns(5, 10_000, [("k", "i32", {"lo": 0, "hi": 4})])
    assert len(set(cols[0][2].tolist())) == 5


def _random_resultset(rng: np.random.Generator) -> ResultSet:
    n = int(rng.integers(0, 40))
    schema = []
    columns = []
    for i in range(int(rng.integers(1, 5))):
        kind = rng.integers(0, 5)
        if kind == 0:
            schema.append((f"c{i}", "i32"))
            columns.append(rng.integers(-1000, 1000, n).astype(np.int32))
        elif kind == 1:
            schema.append((f"c{i}", "f32"))
            columns.append(rng.uniform(-10, 10, n).astype(np.float32))
        elif kind == 2:
            schema.append((f"c{i}", "f64"))
            columns.append(rng.uniform(-10, 10, n))
        elif kind == 3:
            schema.append((f"c{i}", "i64"))
            columns.append(rng.integers(-10**12, 10**12, n).astype(np.int64))
        else:
            schema.append((f"c{i}", "str"))
            words = ["", "a", "bb", "ccc", "heavy" * 10, "zz"]
            columns.append(StringColumn.from_values(
                [words[j] for j in rng.integers(0, len(words), n)]))
    return ResultSet(schema, columns)


def _payload_columns(rs: ResultSet) -> list[bytes]:
    out = []
    for (name, phys), col in zip(rs.schema, rs.columns):
        if phys == "str":
            out.append(col.offsets.tobytes() + col.pool)
        else:
            out.append(np.asarray(col).tobytes())
    return out


def test_roundtrip_random_resultsets():
    rng = np.random.default_rng(17)
    for _ in range(30):
        rs = _random_resultset(rng)
        payload = mv_serialize(rs)
        heap = ColumnarHeap(1 << 22)
        back, definition = mv_deserialize(payload, heap)
        assert definition is None
        assert back.schema == rs.schema
        assert back.row_count == rs.row_count
        assert _payload_columns(back) == _payload_columns(rs)
        # a second serialization of the deserialized set is byte-identical
        assert mv_serialize(back) == payload


def test_payload_size_computable_a_priori():
    rng = np.random.default_rng(23)
    for _ in range(10):
        rs = _random_resultset(rng)
        assert payload_size(rs) == len(mv_serialize(rs))


def test_zero_row_single_column():
    rs = ResultSet([("x", "i32")], [np.empty(0, dtype=np.int32)])
    payload = mv_serialize(rs)
    heap = ColumnarHeap(1 << 16)
    back, _ = mv_deserialize(payload, heap)
    assert back.row_count == 0
    assert back.schema == [("x", "i32")]


def test_definition_travels():
    mv = generate_mvq(q6(), "l_shipdate")
    rs = ResultSet([("f1", "f64"), ("l_shipdate", "d32")],
                   [np.array([1.5]), np.array([8766], dtype=np.int32)])
    payload = mv_serialize(rs, mv)
    heap = ColumnarHeap(1 << 16)
    back, definition = mv_deserialize(payload, heap)
    assert definition is not None
    assert definition.name == mv.name
    assert definition.agg_map == mv.agg_map


def test_bad_magic():
    with pytest.raises(BadMagic):
        mv_deserialize(b"NOPE" + b"\x00" * 32, ColumnarHeap(1 << 12))


def test_bit_flip_detected():
    rs = ResultSet([("x", "i32")], [np.array([1, 2, 3], dtype=np.int32)])
    payload = bytearray(mv_serialize(rs))
    payload[len(payload) // 2] ^= 0x40
    with pytest.raises(BadChecksum):
        mv_deserialize(bytes(payload), ColumnarHeap(1 << 12))


def test_version_gate():
    rs = ResultSet([("x", "i32")], [np.array([1], dtype=np.int32)])
    payload = bytearray(mv_serialize(rs))
    payload[4] = 99  # version u16 low byte
    import struct
    import zlib

    body = bytes(payload[:-4])
    payload[-4:] = struct.pack("<I", zlib.crc32(body) & 0xFFFFFFFF)
    with pytest.raises(VersionUnsupported):
        mv_deserialize(bytes(payload), ColumnarHeap(1 << 12))


def test_deserialize_registers_view(tmp_path):
    from splitql.session import Session

    backend = Session(heap_mb=16)
    backend.load_table("t", [("k", "i32", np.arange(20, dtype=np.int32)),
                             ("v", "f32", np.ones(20, dtype=np.float32))])
    from splitql import dsl as q

    spec = (q.select().from_("t").field("k").field(q.sum("v"), alias="s")
            .groupby("k").build())
    fr = backend.free(spec, "k")
    client = Session(heap_mb=16)
    definition = client.install_view(fr.payload)
    assert client.catalog.has(definition.name)
    assert client.catalog.get(definition.name).row_count == fr.row_count
