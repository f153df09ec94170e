"""One engine session: a heap, its catalog and the issued view registry."""

from __future__ import annotations

import os
import time
from dataclasses import dataclass

from .engine import ResultSet, compile as compile_plan, execute
from .heap import Catalog, ColumnarHeap, load_arrays
from .query import QuerySpec, validate
from .rewriter import FreeRejected, MVDefinition, generate_mvq
from .transport import load_tbl, mv_deserialize, mv_serialize

DEFAULT_HEAP_MB = 512


class ValidationFailed(Exception):
    def __init__(self, diagnostics: list[str]):
        super().__init__("; ".join(diagnostics))
        self.diagnostics = diagnostics


@dataclass
class FreeResult:
    definition: MVDefinition
    payload: bytes
    row_count: int
    mvq_ms: float


class Session:
    """Single-owner engine state; callers serialize access themselves."""

    def __init__(self, heap_mb: int | None = None):
        if heap_mb is None:
            heap_mb = int(os.environ.get("AB_HEAP_MB", DEFAULT_HEAP_MB))
        self.heap = ColumnarHeap(heap_mb * 1024 * 1024)
        self.catalog = Catalog()
        self.views: dict[str, MVDefinition] = {}

    # ------------------------------------------------------------------ data

    def load_table(self, name: str, columns: list[tuple]) -> int:
        table = load_arrays(self.heap, name, columns, self.catalog)
        return table.row_count

    def load_tbl_file(self, path, schema, name: str | None = None) -> int:
        table = load_tbl(path, schema, self.heap, name=name, catalog=self.catalog)
        return table.row_count

    def load_dir(self, path) -> dict[str, int]:
        """Load every <table>.tbl with a known warehouse schema."""
        from .tpch import SCHEMAS

        counts = {}
        for entry in sorted(os.listdir(path)):
            if not entry.endswith(".tbl"):
                continue
            name = entry[: -len(".tbl")]
            if name not in SCHEMAS:
                raise KeyError(f"no schema known for {entry}")
            counts[name] = self.load_tbl_file(os.path.join(path, entry), SCHEMAS[name], name)
        return counts

    # --------------------------------------------------------------- queries

    def check(self, spec: QuerySpec) -> list[str]:
        return validate(spec, self.catalog)

    def query(self, spec: QuerySpec) -> tuple[ResultSet, float]:
        """Validate, compile and run; returns (result, elapsed ms)."""
        diags = validate(spec, self.catalog)
        if diags:
            raise ValidationFailed(diags)
        t0 = time.perf_counter()
        rs = execute(compile_plan(spec, self.catalog), self.heap)
        return rs, (time.perf_counter() - t0) * 1000.0

    def free(self, spec: QuerySpec, column: str) -> FreeResult:
        """Generate, run and serialize the view for (spec, column)."""
        diags = validate(spec, self.catalog)
        if diags:
            raise ValidationFailed(diags)
        definition = generate_mvq(spec, column, self.catalog)  # raises FreeRejected
        mv_diags = validate(definition.mvq, self.catalog)
        if mv_diags:
            raise ValidationFailed([f"view query: {d}" for d in mv_diags])
        t0 = time.perf_counter()
        rs = execute(compile_plan(definition.mvq, self.catalog), self.heap)
        mvq_ms = (time.perf_counter() - t0) * 1000.0
        payload = mv_serialize(rs, definition)
        self.views[definition.name] = definition
        return FreeResult(definition, payload, rs.row_count, mvq_ms)

    def install_view(self, payload: bytes, table_name: str | None = None) -> MVDefinition:
        """Client side: copy a shipped view into the heap and register it."""
        rs, definition = mv_deserialize(payload, self.heap, self.catalog, table_name)
        if definition is None:
            raise ValueError("payload carries no view definition")
        self.views[definition.name] = definition
        return definition

    def catalog_listing(self) -> list[dict]:
        out = []
        for name in self.catalog.names():
            table = self.catalog.get(name)
            out.append({
                "name": name,
                "row_count": table.row_count,
                "columns": [{"name": c.name, "type": c.phys} for c in table.columns],
            })
        return out


__all__ = ["Session", "FreeResult", "ValidationFailed", "FreeRejected"]
