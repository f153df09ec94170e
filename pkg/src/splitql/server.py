"""HTTP service around one engine session.

    GET  /catalog   table/column listing (JSON)
    POST /query     body: QuerySpec JSON -> result JSON, X-Latency-Ms header
    POST /free      body: {"spec": ..., "column": ...} -> ABMV1 bytes,
                    X-Mvq-Ms and X-Mv-Rows headers; 422 when unfreeable

Engine access is serialized through one lock: at most one plan executes per
heap at any instant, while the accept loop itself may be concurrent.
"""

from __future__ import annotations

import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

from .query import from_json
from .rewriter import FreeRejected
from .session import Session, ValidationFailed


def make_server(session: Session, port: int = 0, host: str = "127.0.0.1") -> ThreadingHTTPServer:
    lock = threading.Lock()

    class Handler(BaseHTTPRequestHandler):
        def log_message(self, *args):  # keep test output quiet
            pass

        def _send(self, status: int, body: bytes, content_type: str,
                  headers: dict | None = None):
            self.send_response(status)
            self.send_header("Content-Type", content_type)
            self.send_header("Content-Length", str(len(body)))
            for k, v in (headers or {}).items():
                self.send_header(k, str(v))
            self.end_headers()
            self.wfile.write(body)

        def _send_json(self, status: int, obj, headers: dict | None = None):
            self._send(status, json.dumps(obj).encode("utf-8"), "application/json", headers)

        def _read_body(self) -> bytes:
            length = int(self.headers.get("Content-Length", "0"))
            return self.rfile.read(length)

        def do_GET(self):
            if self.path.rstrip("/") == "/catalog":
                with lock:
                    listing = session.catalog_listing()
                self._send_json(200, {"tables": listing})
            else:
                self._send_json(404, {"error": f"no route {self.path}"})

        def do_POST(self):
            if self.path.rstrip("/") == "/query":
                self._handle_query()
            elif self.path.rstrip("/") == "/free":
                self._handle_free()
            else:
                self._send_json(404, {"error": f"no route {self.path}"})

        def _handle_query(self):
            try:
                spec = from_json(json.loads(self._read_body()))
            except Exception as exc:
                self._send_json(400, {"diagnostics": [f"bad request body: {exc}"]})
                return
            try:
                with lock:
                    rs, ms = session.query(spec)
            except ValidationFailed as exc:
                self._send_json(400, {"diagnostics": exc.diagnostics})
                return
            except Exception as exc:
                self._send_json(400, {"diagnostics": [str(exc)]})
                return
            body = {
                "schema": [[n, p] for n, p in rs.schema],
                "rows": [list(r) for r in rs.rows()],
                "row_count": rs.row_count,
            }
            self._send_json(200, body, {"X-Latency-Ms": f"{ms:.3f}"})

        def _handle_free(self):
            try:
                req = json.loads(self._read_body())
                spec = from_json(req["spec"])
                column = req["column"]
            except Exception as exc:
                self._send_json(400, {"diagnostics": [f"bad request body: {exc}"]})
                return
            try:
                with lock:
                    result = session.free(spec, column)
            except FreeRejected as exc:
                self._send_json(422, {"error": exc.reason})
                return
            except ValidationFailed as exc:
                self._send_json(400, {"diagnostics": exc.diagnostics})
                return
            except KeyError as exc:
                self._send_json(422, {"error": str(exc)})
                return
            self._send(200, result.payload, "application/octet-stream", {
                "X-Mvq-Ms": f"{result.mvq_ms:.3f}",
                "X-Mv-Rows": result.row_count,
                "X-View-Name": result.definition.name,
            })

    return ThreadingHTTPServer((host, port), Handler)


def serve(session: Session, port: int, host: str = "127.0.0.1") -> None:
    server = make_server(session, port, host)
    print(f"serving on http://{host}:{server.server_address[1]}")
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        server.shutdown()
