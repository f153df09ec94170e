"""splitql: in-memory columnar analytics with freed-column split execution.

Build a query with the fluent DSL, run it against a Session, or free a
column to get a shippable view that answers all predicate variations on
that column locally::

    from splitql import Session, dsl as q

    s = Session(heap_mb=64)
    s.load_table("t", [("x", "i32", [1, 2, 3]), ("y", "f32", [0.5, 1.5, 2.5])])
    spec = q.select().from_("t").field(q.sum("y"), alias="total").build()
    result, ms = s.query(spec)
"""

from . import dsl
from .engine import ResultSet, StringColumn, UnsupportedShape, compile, execute, sort_limit
from .heap import Catalog, ColumnarHeap, OutOfHeap, col_read, heap_alloc, heap_create, table_load
from .hashtable import ChainExhausted, HashTableSegment, SegmentPool
from .query import QuerySpec, canonicalize, fingerprint, from_json, to_json, validate
from .rewriter import (
    FreeRejected,
    MVDefinition,
    MatchReport,
    NoMatch,
    can_free,
    derive_agg,
    generate_mvq,
    generate_vq,
    matches,
    rewrite_agg,
)
from .session import FreeResult, Session, ValidationFailed
from .transport import (
    BadChecksum,
    BadMagic,
    VersionUnsupported,
    gen_synthetic,
    load_tbl,
    mv_deserialize,
    mv_serialize,
)

__version__ = "0.1.0"

__all__ = [
    "Session", "FreeResult", "ValidationFailed", "QuerySpec", "ResultSet",
    "StringColumn", "ColumnarHeap", "Catalog", "HashTableSegment", "SegmentPool",
    "MVDefinition", "MatchReport", "dsl", "canonicalize", "fingerprint",
    "validate", "to_json", "from_json", "compile", "execute", "sort_limit",
    "can_free", "generate_mvq", "generate_vq", "matches", "rewrite_agg",
    "derive_agg", "FreeRejected", "NoMatch", "OutOfHeap", "ChainExhausted",
    "UnsupportedShape", "BadMagic", "BadChecksum", "VersionUnsupported",
    "heap_create", "heap_alloc", "table_load", "col_read", "load_tbl",
    "gen_synthetic", "mv_serialize", "mv_deserialize",
]
