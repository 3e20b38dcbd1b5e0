"""Serve a trained model over HTTP and query it like a frontend would.

The service is stateless: every request carries the full click list, and
every response carries the model's parameter hash so a client can detect
hot swaps. This demo trains a tiny model, starts the server in-process,
and walks through the wire protocol.

Run:  python demos/service_roundtrip.py            (about half a minute)
"""

import http.client
import json
import threading
import time

from meshseg.checkpoint import Checkpoint
from meshseg.decoder import DecoderConfig
from meshseg.encoder import EncoderConfig
from meshseg.model import Model
from meshseg.service import MeshSegService, make_server
from meshseg.shapes import icosphere
from meshseg.teacher import SyntheticTeacher
from meshseg.training import (TrainConfig, distill_encoder,
                              generate_click_dataset, train_decoder)

# ---------------------------------------------------------------------------
# 1. Train a small model (same recipe as click_segmentation.py, shrunk).
# ---------------------------------------------------------------------------
mesh = icosphere(2)
enc_cfg = EncoderConfig(pe_frequencies=8, hidden_dim=48, layers=3, out_dim=24)
dec_cfg = DecoderConfig(feature_dim=24, mlp_layers=3, hidden_dim=48)
cfg = TrainConfig(image_size=40, views_per_epoch=16, stage1_epochs=5,
                  stage2_epochs=8, train_vertex_fraction=0.05,
                  views_per_click=4, heldout_views=4, seed=0)
teacher = SyntheticTeacher(d=enc_cfg.out_dim)
enc_params, enc_cfg, _ = distill_encoder(mesh, cfg, teacher, enc_cfg=enc_cfg)
records, samples, rasters, _ = generate_click_dataset(mesh, cfg, teacher)
dec_params, dec_cfg, _ = train_decoder(mesh, enc_params, enc_cfg, records,
                                       samples, cfg, dec_cfg=dec_cfg,
                                       raster_cache=rasters)
ckpt = Checkpoint(stage="decoder", seed=cfg.seed, mesh_hash=mesh.content_hash(),
                  enc_cfg=enc_cfg, enc_params=enc_params,
                  dec_cfg=dec_cfg, dec_params=dec_params)

# ---------------------------------------------------------------------------
# 2. Start the HTTP server on an ephemeral port.
# ---------------------------------------------------------------------------
service = MeshSegService(Model(mesh, ckpt))
server = make_server(service, "127.0.0.1", 0)
port = server.server_address[1]
threading.Thread(target=server.serve_forever, daemon=True).start()
print(f"serving on 127.0.0.1:{port}")

conn = http.client.HTTPConnection("127.0.0.1", port)

def call(method, path, body=None):
    conn.request(method, path, body,
                 {"Content-Type": "application/json"} if body else {})
    resp = conn.getresponse()
    return resp.status, json.loads(resp.read())

# ---------------------------------------------------------------------------
# 3. Health, model info, and the mesh document a viewer would download.
# ---------------------------------------------------------------------------
status, health = call("GET", "/health")
print(f"GET /health -> {status} {health}")
status, info = call("GET", "/model")
print(f"GET /model  -> {status} model {info['model_id']}, "
      f"{info['n_vertices']} vertices")
status, doc = call("GET", "/mesh")
print(f"GET /mesh   -> {status} ({len(doc['vertices'])} vertices, "
      f"{len(doc['faces'])} faces)")

# ---------------------------------------------------------------------------
# 4. Segment: clicks go up as vertex ids with string signs; probabilities
# and thresholds come back with the parameter hash and timing.
# ---------------------------------------------------------------------------
body = json.dumps({"version": 1,
                   "clicks": [{"vertex": 17, "sign": "positive"},
                              {"vertex": 99, "sign": "negative"}]})
t0 = time.perf_counter()
status, out = call("POST", "/segment", body)
ms = (time.perf_counter() - t0) * 1000.0
n_sel = sum(p > out["threshold_otsu"] for p in out["probabilities"])
print(f"POST /segment -> {status} in {ms:.1f}ms "
      f"(server reports {out['elapsed_ms']:.1f}ms)")
print(f"  {n_sel}/{len(out['probabilities'])} vertices above otsu threshold "
      f"{out['threshold_otsu']:.3f}, model {out['model_id']}")

# ---------------------------------------------------------------------------
# 5. Errors are JSON too: unknown vertices are a client mistake (400).
# ---------------------------------------------------------------------------
bad = json.dumps({"version": 1,
                  "clicks": [{"vertex": 10 ** 6, "sign": "positive"}]})
status, err = call("POST", "/segment", bad)
print(f"POST /segment with bad vertex -> {status} {err}")

server.shutdown()
print("server stopped")
