"""HTTP segmentation service.

Endpoints: GET /mesh (geometry as JSON, sent once), POST /segment
(clicks in, per-vertex probabilities out), GET /health, GET /model.
Requests are stateless and read-only on the model; the threading server
allows concurrent queries. Model swaps replace the bound state
atomically so in-flight requests keep a consistent snapshot.
"""

from __future__ import annotations

import json
import time
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

from .evaluation import otsu_threshold
from .geometry import ClickSet, Click, NEGATIVE, POSITIVE
from .model import Model, ModelError
from .numerics import NumericError

REQUEST_FIELDS = {"version", "clicks"}
CLICK_FIELDS = {"vertex", "sign"}


class RequestError(Exception):
    """Maps to HTTP 400."""


def parse_segment_request(body: bytes, n_vertices: int) -> ClickSet:
    try:
        data = json.loads(body)
    except json.JSONDecodeError as exc:
        raise RequestError(f"invalid JSON: {exc}")
    if not isinstance(data, dict):
        raise RequestError("request body must be an object")
    unknown = set(data) - REQUEST_FIELDS
    if unknown:
        raise RequestError(f"unknown request fields: {sorted(unknown)}")
    if data.get("version", 1) != 1:
        raise RequestError(f"unsupported request version {data.get('version')!r}")
    clicks = data.get("clicks")
    if not isinstance(clicks, list) or not clicks:
        raise RequestError("clicks must be a non-empty list")
    entries = []
    for c in clicks:
        if not isinstance(c, dict):
            raise RequestError("each click must be an object")
        unknown = set(c) - CLICK_FIELDS
        if unknown:
            raise RequestError(f"unknown click fields: {sorted(unknown)}")
        if not isinstance(c.get("vertex"), int) or isinstance(c.get("vertex"), bool):
            raise RequestError("click vertex must be an integer")
        if c.get("sign") not in (POSITIVE, NEGATIVE):
            raise RequestError("click sign must be 'positive' or 'negative'")
        entries.append(Click(vertex=c["vertex"], sign=c["sign"]))
    try:
        cs = ClickSet(tuple(entries))
        cs.validate_against(n_vertices)
    except (ValueError, IndexError) as exc:
        raise RequestError(str(exc))
    return cs


def segment_response(model: Model, clicks: ClickSet) -> dict:
    t0 = time.perf_counter()
    field = model.predict(clicks)
    thr, degenerate = otsu_threshold(field.p)
    return {
        "version": 1,
        "probabilities": [float(x) for x in field.p],
        "threshold_otsu": float(thr),
        "threshold_degenerate": bool(degenerate),
        "model_id": model.model_id,
        "elapsed_ms": (time.perf_counter() - t0) * 1000.0,
    }


class MeshSegService:
    """Bound mesh + model state shared by the request handlers."""

    def __init__(self, model: Model | None = None):
        self.model = model
        self._mesh_doc = None

    def swap_model(self, model: Model) -> None:
        self.model = model
        self._mesh_doc = None

    def mesh_document(self) -> bytes:
        if self._mesh_doc is None:
            m = self.model.mesh
            doc = {
                "version": 1,
                "n": m.n,
                "m": m.m,
                "vertices": [[float(x) for x in v] for v in m.vertices],
                "faces": [[int(i) for i in f] for f in m.faces],
                "model_id": self.model.model_id,
            }
            self._mesh_doc = json.dumps(doc).encode()
        return self._mesh_doc


def make_handler(service: MeshSegService):
    class Handler(BaseHTTPRequestHandler):
        protocol_version = "HTTP/1.1"
        # Headers and body go out as separate writes; without TCP_NODELAY the
        # second write stalls on the peer's delayed ACK (~40 ms per request).
        disable_nagle_algorithm = True

        def log_message(self, fmt, *args):
            pass

        def _send(self, status: int, payload: dict | bytes) -> None:
            body = payload if isinstance(payload, bytes) else json.dumps(payload).encode()
            self.send_response(status)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(body)))
            self.send_header("Access-Control-Allow-Origin", "*")
            self.end_headers()
            self.wfile.write(body)

        def do_GET(self):
            model = service.model
            if self.path == "/health":
                self._send(200, {"status": "ok", "model_loaded": model is not None})
            elif self.path == "/model":
                if model is None:
                    self._send(409, {"error": "no model loaded"})
                    return
                self._send(200, {
                    "version": 1,
                    "model_id": model.model_id,
                    "stage": model.stage,
                    "d": model.enc_cfg.out_dim,
                    "n_vertices": model.mesh.n,
                    "mesh_hash": model.mesh.content_hash(),
                })
            elif self.path == "/mesh":
                if model is None:
                    self._send(409, {"error": "no model loaded"})
                    return
                self._send(200, service.mesh_document())
            else:
                self._send(404, {"error": f"unknown path {self.path}"})

        def do_POST(self):
            if self.path != "/segment":
                self._send(404, {"error": f"unknown path {self.path}"})
                return
            model = service.model
            if model is None:
                self._send(409, {"error": "no model loaded"})
                return
            length = int(self.headers.get("Content-Length", 0))
            body = self.rfile.read(length)
            try:
                clicks = parse_segment_request(body, model.mesh.n)
            except RequestError as exc:
                self._send(400, {"error": str(exc)})
                return
            try:
                self._send(200, segment_response(model, clicks))
            except ModelError as exc:
                self._send(409, {"error": str(exc)})
            except (NumericError, FloatingPointError) as exc:
                self._send(500, {"error": f"numeric failure: {exc}"})

    return Handler


def make_server(service: MeshSegService, host: str = "127.0.0.1",
                port: int = 8761) -> ThreadingHTTPServer:
    return ThreadingHTTPServer((host, port), make_handler(service))


def serve_forever(service: MeshSegService, host: str, port: int) -> None:
    server = make_server(service, host, port)
    print(f"serving on http://{host}:{port}")
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
