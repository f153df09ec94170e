import json
import threading
import urllib.error
import urllib.request

import numpy as np
import pytest

from oracle import assert_equivalent, evaluate

from splitql import dsl as q
from splitql.query import from_json, to_json
from splitql.server import make_server
from splitql.session import Session, ValidationFailed
from splitql.tpch import q6


@pytest.fixture(scope="module")
def served(tmp_path_factory):
    from splitql.transport import DEFAULT_SYNTHETIC, gen_columns
    from splitql.tpch import generate

    session = Session(heap_mb=128)
    tables = generate(sf=0.001, seed=7)
    for name in ("lineitem", "orders"):
        session.load_table(name, tables[name])
    server = make_server(session, port=0)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    base = f"http://127.0.0.1:{server.server_address[1]}"
    yield base, session
    server.shutdown()


def _get(url):
    with urllib.request.urlopen(url) as resp:
        return resp.status, dict(resp.headers), resp.read()


def _post(url, body: bytes, content_type="application/json"):
    req = urllib.request.Request(url, data=body, method="POST",
                                 headers={"Content-Type": content_type})
    try:
        with urllib.request.urlopen(req) as resp:
            return resp.status, dict(resp.headers), resp.read()
    except urllib.error.HTTPError as err:
        return err.code, dict(err.headers), err.read()


def test_catalog_lists_tables(served):
    base, _ = served
    status, _, body = _get(f"{base}/catalog")
    assert status == 200
    tables = {t["name"]: t for t in json.loads(body)["tables"]}
    assert "lineitem" in tables and "orders" in tables
    cols = {c["name"] for c in tables["lineitem"]["columns"]}
    assert "l_shipdate" in cols


def test_unknown_route_404(served):
    base, _ = served
    status, _, body = _post(f"{base}/nope", b"{}")
    assert status == 404


def test_query_endpoint_matches_local(served):
    base, session = served
    status, headers, body = _post(f"{base}/query",
                                  json.dumps(to_json(q6())).encode())
    assert status == 200
    payload = json.loads(body)
    assert payload["row_count"] == 1
    local, _ = session.query(q6())
    assert abs(payload["rows"][0][0] - local.rows()[0][0]) < 1e-6
    assert float(headers["X-Latency-Ms"]) >= 0.0


def test_query_endpoint_validation_error(served):
    base, _ = served
    bad = q.select().from_("lineitem").field("no_such").build()
    status, _, body = _post(f"{base}/query", json.dumps(to_json(bad)).encode())
    assert status == 400
    assert any("no_such" in d for d in json.loads(body)["diagnostics"])


def test_query_endpoint_unsupported_shape(served):
    base, _ = served
    two_joins_json = to_json(q6())
    two_joins_json["joins"] = [
        {"table": "orders", "left": "l_orderkey", "right": "o_orderkey"},
        {"table": "orders", "left": "l_orderkey", "right": "o_orderkey"},
    ]
    status, _, body = _post(f"{base}/query", json.dumps(two_joins_json).encode())
    assert status == 400
    assert any("join" in d for d in json.loads(body)["diagnostics"])


def test_free_endpoint_ships_payload(served):
    base, session = served
    req = {"spec": to_json(q6()), "column": "l_shipdate"}
    status, headers, body = _post(f"{base}/free", json.dumps(req).encode())
    assert status == 200
    assert body[:4] == b"ABMV"
    rows = int(headers["X-Mv-Rows"])
    assert rows <= 2526
    client = Session(heap_mb=32)
    definition = client.install_view(body)
    from splitql.rewriter import generate_vq

    vq = generate_vq(q6(), definition)
    via_view, _ = client.query(vq)
    direct, _ = session.query(q6())
    assert abs(via_view.rows()[0][0] - direct.rows()[0][0]) <= 1e-9 * abs(direct.rows()[0][0])


def test_free_endpoint_rejects_join_key(served):
    base, _ = served
    from splitql.tpch import join_example

    req = {"spec": to_json(join_example()), "column": "l_orderkey"}
    status, _, body = _post(f"{base}/free", json.dumps(req).encode())
    assert status == 422
    assert "join" in json.loads(body)["error"]


def test_free_endpoint_rejects_or_column(served):
    base, _ = served
    spec = (q.select().from_("lineitem").field(q.count(), alias="n")
            .where(q.or_(q.lt("l_quantity", 3), q.gt("l_tax", 0.07)))
            .build())
    req = {"spec": to_json(spec), "column": "l_quantity"}
    status, _, body = _post(f"{base}/free", json.dumps(req).encode())
    assert status == 422
    assert "OR" in json.loads(body)["error"]


def test_identical_free_calls_identical_payloads(served):
    base, _ = served
    req = json.dumps({"spec": to_json(q6()), "column": "l_shipdate"}).encode()
    _, _, body1 = _post(f"{base}/free", req)
    _, _, body2 = _post(f"{base}/free", req)
    assert body1 == body2


def test_session_validation_failure_raises():
    session = Session(heap_mb=16)
    session.load_table("t", [("x", "i32", np.arange(3, dtype=np.int32))])
    with pytest.raises(ValidationFailed):
        session.query(q.select().from_("t").field("missing").build())


def test_ab_heap_env(monkeypatch):
    monkeypatch.setenv("AB_HEAP_MB", "32")
    session = Session()
    assert session.heap.capacity == 32 * 1024 * 1024
