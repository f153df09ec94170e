import datetime

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from splitql.heap import (
    Catalog,
    ColumnarHeap,
    LoadError,
    OutOfHeap,
    col_read,
    date_to_days,
    days_to_date,
    heap_alloc,
    heap_create,
    table_load,
)

LINEITEM_MINI = [
    ("l_orderkey", "i32"),
    ("l_extendedprice", "f32"),
    ("l_shipdate", "d32"),
]


def test_create_64mb():
    h = heap_create(64 * 1024 * 1024)
    assert h.capacity == 67108864
    assert h.high_water == 0


def test_create_minimal_and_overflow():
    h = heap_create(16)
    assert h.capacity == 16
    with pytest.raises(OutOfHeap):
        heap_alloc(h, 17, 1)


def test_create_rejects_nonpositive():
    with pytest.raises(ValueError):
        heap_create(0)


def test_alloc_alignment_padding():
    h = heap_create(64)
    heap_alloc(h, 5, 4)
    assert heap_alloc(h, 4, 4) == 8


def test_alloc_zero_bytes_is_free():
    h = heap_create(64)
    heap_alloc(h, 3, 1)
    hw = h.high_water
    assert heap_alloc(h, 0, 1) == hw
    assert h.high_water == hw


def test_alloc_overflow_on_16_byte_heap():
    h = heap_create(16)
    heap_alloc(h, 12, 4)
    with pytest.raises(OutOfHeap):
        heap_alloc(h, 8, 4)


def test_alloc_bad_alignment():
    h = heap_create(16)
    with pytest.raises(ValueError):
        heap_alloc(h, 4, 3)


def test_load_three_rows_each_numeric_column_12_bytes(heap):
    rows = [(1, 100.5, "1994-01-01"), (2, 200.25, "1994-06-01"), (3, 300.0, "1995-01-01")]
    t = table_load(heap, "mini", LINEITEM_MINI, rows)
    assert t.row_count == 3
    for col in t.columns:
        assert col.nbytes() == 12


def test_load_date_epoch_days(heap):
    # independent civil-date conversion: proleptic ordinal difference
    expected = datetime.date(1994, 1, 1).toordinal() - datetime.date(1970, 1, 1).toordinal()
    assert expected == 8766
    t = table_load(heap, "d", [("d", "d32")], [("1994-01-01",)])
    assert col_read(t, "d", 0) == 8766
    assert date_to_days("1970-01-01") == 0
    assert days_to_date(0) == datetime.date(1970, 1, 1)


def test_load_str_layout(heap):
    t = table_load(heap, "s", [("s", "str")], [("A",), ("BB",)])
    col = t.column("s")
    offsets = t.str_offsets("s")
    assert list(offsets) == [0, 2]
    assert t.str_pool("s") == b"A\x00BB\x00"
    assert col.pool_len == 5
    assert col_read(t, "s", 1) == "BB"


def test_col_read_roundtrip_int(heap):
    t = table_load(heap, "t", [("x", "i32")], [(5,), (6,), (-7,)])
    assert col_read(t, "x", 2) == -7


def test_col_read_f32_rounding(heap):
    t = table_load(heap, "t", [("x", "f32")], [(0.07,)])
    assert col_read(t, "x", 0) == float(np.float32(0.07))


def test_load_empty_cell_rejected(heap):
    with pytest.raises(LoadError) as exc:
        table_load(heap, "t", [("x", "i32")], [(1,), ("",)])
    assert "row 1" in str(exc.value)


def test_load_conversion_error_names_row_and_column(heap):
    with pytest.raises(LoadError) as exc:
        table_load(heap, "t", [("x", "i32")], [("1",), ("two",)])
    msg = str(exc.value)
    assert "row 1" in msg and "'x'" in msg


def test_load_arity_mismatch(heap):
    with pytest.raises(LoadError):
        table_load(heap, "t", [("x", "i32"), ("y", "i32")], [(1, 2), (3,)])


def test_catalog_registration(heap):
    cat = Catalog()
    table_load(heap, "t", [("x", "i32")], [(1,)], cat)
    assert cat.has("t")
    assert cat.names() == ["t"]


def test_columns_at_increasing_offsets(heap):
    t = table_load(heap, "t", [("a", "i32"), ("b", "f32"), ("c", "i32")],
                   [(1, 2.0, 3), (4, 5.0, 6)])
    offsets = [c.base_offset for c in t.columns]
    assert offsets == sorted(offsets)
    spans = [(c.base_offset, c.base_offset + c.nbytes()) for c in t.columns]
    for (s1, e1), (s2, e2) in zip(spans, spans[1:]):
        assert e1 <= s2  # disjoint
    assert spans[-1][1] <= heap.high_water


@given(st.lists(st.integers(min_value=-(2**31), max_value=2**31 - 1),
                min_size=0, max_size=200))
@settings(max_examples=50, deadline=None)
def test_roundtrip_i32(values):
    heap = ColumnarHeap(1 << 20)
    t = table_load(heap, "t", [("x", "i32")], [(v,) for v in values])
    assert [col_read(t, "x", i) for i in range(len(values))] == values


@given(st.lists(st.floats(width=32, allow_nan=False, allow_infinity=False),
                min_size=0, max_size=200))
@settings(max_examples=50, deadline=None)
def test_roundtrip_f32(values):
    heap = ColumnarHeap(1 << 20)
    t = table_load(heap, "t", [("x", "f32")], [(v,) for v in values])
    got = [col_read(t, "x", i) for i in range(len(values))]
    assert got == [float(np.float32(v)) for v in values]


@given(st.lists(st.text(alphabet=st.characters(min_codepoint=32, max_codepoint=126),
                        min_size=1, max_size=20), min_size=0, max_size=100))
@settings(max_examples=50, deadline=None)
def test_roundtrip_str(values):
    heap = ColumnarHeap(1 << 20)
    t = table_load(heap, "t", [("s", "str")], [(v,) for v in values])
    assert [col_read(t, "s", i) for i in range(len(values))] == values


@given(st.integers(min_value=-100000, max_value=100000))
@settings(max_examples=100, deadline=None)
def test_date_codec_inverse(days):
    assert date_to_days(days_to_date(days)) == days
