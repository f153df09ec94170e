import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(__file__))

from splitql import Session
from splitql.heap import ColumnarHeap
from splitql.transport import DEFAULT_SYNTHETIC, DIM_SYNTHETIC, gen_columns

from oracle import OracleTable


@pytest.fixture
def heap():
    return ColumnarHeap(8 * 1024 * 1024)


class SynthEnv:
    """One loaded engine session plus oracle-side copies of the same data."""

    def __init__(self, fact_rows=600, dim_rows=200, seed=42):
        self.session = Session(heap_mb=64)
        self.fact_cols = gen_columns(seed, fact_rows, DEFAULT_SYNTHETIC)
        self.dim_cols = gen_columns(seed + 1, dim_rows, DIM_SYNTHETIC)
        self.session.load_table("synth", self.fact_cols)
        self.session.load_table("synth_dim", self.dim_cols)
        self.oracle_tables = {
            "synth": OracleTable.from_columns(self.fact_cols),
            "synth_dim": OracleTable.from_columns(self.dim_cols),
        }
        self.arrays = {
            "synth": {name: list(vals) for name, _, vals in self.fact_cols},
            "synth_dim": {name: list(vals) for name, _, vals in self.dim_cols},
        }


@pytest.fixture(scope="session")
def synth_env():
    return SynthEnv()


@pytest.fixture(scope="session")
def tpch_dir(tmp_path_factory):
    """SF 0.01 warehouse written as .tbl files (lineitem pinned at 60,175 rows)."""
    from splitql.tpch import generate, write_dir

    path = tmp_path_factory.mktemp("tpch_sf001")
    tables = generate(sf=0.01, seed=7)
    write_dir(tables, path)
    return path


@pytest.fixture(scope="session")
def tpch_session(tpch_dir):
    session = Session(heap_mb=256)
    session.load_dir(tpch_dir)
    return session
