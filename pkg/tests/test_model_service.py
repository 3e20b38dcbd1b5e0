"""Loaded-model wrapper and the HTTP segmentation service."""

from __future__ import annotations

import http.client
import json
import threading

import numpy as np
import pytest

from meshseg.checkpoint import Checkpoint, STAGE_DECODER, STAGE_ENCODER
from meshseg.decoder import DecoderConfig, init_decoder_params, segment
from meshseg.encoder import EncoderConfig, init_encoder_params
from meshseg.geometry import ClickSet
from meshseg.model import Model, ModelError
from meshseg.numerics import NumericError
from meshseg.service import (MeshSegService, RequestError, make_server,
                             parse_segment_request, segment_response)
from meshseg.shapes import icosphere

ENC = EncoderConfig(pe_frequencies=4, hidden_dim=16, layers=3, out_dim=8)
DEC = DecoderConfig(feature_dim=8, mlp_layers=3, hidden_dim=12)
MESH = icosphere(1)


def build_model(stage=STAGE_DECODER, seed=0, mesh=MESH):
    enc = init_encoder_params(np.random.default_rng(seed), ENC, dtype=np.float32)
    if stage == STAGE_ENCODER:
        ckpt = Checkpoint(stage=stage, seed=seed, mesh_hash=mesh.content_hash(),
                          enc_cfg=ENC, enc_params=enc)
    else:
        dec = init_decoder_params(np.random.default_rng(seed + 1), DEC,
                                  dtype=np.float32)
        ckpt = Checkpoint(stage=stage, seed=seed, mesh_hash=mesh.content_hash(),
                          enc_cfg=ENC, enc_params=enc, dec_cfg=DEC, dec_params=dec)
    return Model(mesh, ckpt)


# ---------------------------------------------------------------- model


def test_model_rejects_foreign_mesh():
    enc = init_encoder_params(np.random.default_rng(0), ENC)
    ckpt = Checkpoint(stage=STAGE_ENCODER, seed=0,
                      mesh_hash=icosphere(2).content_hash(),
                      enc_cfg=ENC, enc_params=enc)
    with pytest.raises(ModelError):
        Model(MESH, ckpt)


def test_model_predict_matches_direct_segment():
    model = build_model()
    clicks = ClickSet.of([0, 3], [9])
    direct = segment(MESH, model.F, clicks, model.dec_params, model.dec_cfg)
    got = model.predict(clicks)
    assert np.allclose(got.p, direct.p, atol=1e-12)
    # Pure: a second call gives the identical answer, params untouched.
    h = model.param_hash()
    again = model.predict(clicks)
    assert np.array_equal(got.p, again.p)
    assert model.param_hash() == h
    assert model.model_id == h[:16]


def test_model_requires_trained_decoder():
    model = build_model(stage=STAGE_ENCODER)
    with pytest.raises(ModelError):
        model.predict(ClickSet.of([0]))
    with pytest.raises(ModelError):
        model.predictor()


def test_model_predictor_closure():
    model = build_model()
    predict = model.predictor()
    p = predict(ClickSet.of([4]))
    assert p.shape == (MESH.n,)
    assert np.all((p >= 0) & (p <= 1))


def test_model_validates_click_range():
    model = build_model()
    with pytest.raises(IndexError):
        model.predict(ClickSet.of([MESH.n]))


# ------------------------------------------------------- request parsing


def body(obj) -> bytes:
    return json.dumps(obj).encode()


def test_parse_segment_request_accepts_valid():
    cs = parse_segment_request(body({"version": 1, "clicks": [
        {"vertex": 3, "sign": "positive"},
        {"vertex": 5, "sign": "negative"},
    ]}), n_vertices=12)
    assert cs.positive == [3] and cs.negative == [5]
    # version optional
    cs = parse_segment_request(body({"clicks": [{"vertex": 0, "sign": "positive"}]}),
                               n_vertices=12)
    assert cs.positive == [0]


@pytest.mark.parametrize("payload", [
    b"not json",
    body([1, 2]),
    body({"clicks": [{"vertex": 0, "sign": "positive"}], "extra": 1}),
    body({"version": 2, "clicks": [{"vertex": 0, "sign": "positive"}]}),
    body({}),
    body({"clicks": []}),
    body({"clicks": "zero"}),
    body({"clicks": [17]}),
    body({"clicks": [{"vertex": 0, "sign": "positive", "weight": 2}]}),
    body({"clicks": [{"vertex": True, "sign": "positive"}]}),
    body({"clicks": [{"vertex": "0", "sign": "positive"}]}),
    body({"clicks": [{"vertex": 0, "sign": "pos"}]}),
    body({"clicks": [{"vertex": 0, "sign": "negative"}]}),          # no positive
    body({"clicks": [{"vertex": 0, "sign": "positive"},
                     {"vertex": 0, "sign": "negative"}]}),          # duplicate vertex
    body({"clicks": [{"vertex": 99, "sign": "positive"}]}),         # out of range
    body({"clicks": [{"vertex": -1, "sign": "positive"}]}),
])
def test_parse_segment_request_rejects(payload):
    with pytest.raises(RequestError):
        parse_segment_request(payload, n_vertices=12)


def test_segment_response_fields():
    model = build_model()
    resp = segment_response(model, ClickSet.of([2]))
    assert resp["version"] == 1
    assert len(resp["probabilities"]) == MESH.n
    assert resp["model_id"] == model.model_id
    assert isinstance(resp["threshold_otsu"], float)
    assert isinstance(resp["threshold_degenerate"], bool)
    assert resp["elapsed_ms"] >= 0.0


# ------------------------------------------------------------- endpoints


class LiveServer:
    def __init__(self, model=None):
        self.service = MeshSegService(model)
        self.server = make_server(self.service, port=0)
        self.port = self.server.server_address[1]
        self.thread = threading.Thread(target=self.server.serve_forever, daemon=True)
        self.thread.start()

    def request(self, method, path, payload=None):
        conn = http.client.HTTPConnection("127.0.0.1", self.port, timeout=10)
        try:
            conn.request(method, path, body=payload)
            resp = conn.getresponse()
            return resp.status, json.loads(resp.read())
        finally:
            conn.close()

    def close(self):
        self.server.shutdown()
        self.server.server_close()


@pytest.fixture()
def live():
    srv = LiveServer(build_model())
    yield srv
    srv.close()


@pytest.fixture()
def empty_live():
    srv = LiveServer(None)
    yield srv
    srv.close()


def test_health_and_model_endpoints(live):
    status, doc = live.request("GET", "/health")
    assert status == 200 and doc == {"status": "ok", "model_loaded": True}
    status, doc = live.request("GET", "/model")
    assert status == 200
    assert doc["n_vertices"] == MESH.n
    assert doc["stage"] == STAGE_DECODER
    assert doc["d"] == ENC.out_dim
    assert doc["mesh_hash"] == MESH.content_hash()


def test_mesh_endpoint_round_trips_geometry(live):
    status, doc = live.request("GET", "/mesh")
    assert status == 200
    assert doc["n"] == MESH.n and doc["m"] == MESH.m
    assert np.allclose(np.array(doc["vertices"]), MESH.vertices)
    assert np.array_equal(np.array(doc["faces"]), MESH.faces)


def test_segment_endpoint_round_trip(live):
    payload = json.dumps({"version": 1, "clicks": [{"vertex": 1, "sign": "positive"}]})
    status, doc = live.request("POST", "/segment", payload)
    assert status == 200
    assert len(doc["probabilities"]) == MESH.n
    model = live.service.model
    expect = model.predict(ClickSet.of([1])).p
    assert np.allclose(doc["probabilities"], expect, atol=1e-9)


def test_segment_endpoint_is_stateless(live):
    payload = json.dumps({"clicks": [{"vertex": 2, "sign": "positive"},
                                     {"vertex": 7, "sign": "negative"}]})
    digests = set()
    for _ in range(20):
        status, doc = live.request("POST", "/segment", payload)
        assert status == 200
        digests.add(json.dumps(doc["probabilities"]))
        assert doc["model_id"] == live.service.model.model_id
    assert len(digests) == 1


def test_segment_endpoint_errors(live):
    status, doc = live.request("POST", "/segment", "{bad json")
    assert status == 400 and "error" in doc
    status, doc = live.request("POST", "/segment",
                               json.dumps({"clicks": [{"vertex": 999,
                                                       "sign": "positive"}]}))
    assert status == 400
    status, doc = live.request("POST", "/elsewhere", "{}")
    assert status == 404
    status, doc = live.request("GET", "/nope")
    assert status == 404


def test_endpoints_without_model(empty_live):
    status, doc = empty_live.request("GET", "/health")
    assert status == 200 and doc["model_loaded"] is False
    for method, path in (("GET", "/model"), ("GET", "/mesh")):
        status, doc = empty_live.request(method, path)
        assert status == 409
    status, doc = empty_live.request(
        "POST", "/segment", json.dumps({"clicks": [{"vertex": 0,
                                                    "sign": "positive"}]}))
    assert status == 409


def test_untrained_model_maps_to_conflict(empty_live):
    empty_live.service.swap_model(build_model(stage=STAGE_ENCODER))
    status, doc = empty_live.request(
        "POST", "/segment", json.dumps({"clicks": [{"vertex": 0,
                                                    "sign": "positive"}]}))
    assert status == 409 and "decoder" in doc["error"]


def test_numeric_failure_maps_to_500(live):
    def boom(clicks):
        raise NumericError("non-finite gradient")
    live.service.model.predict = boom
    status, doc = live.request(
        "POST", "/segment", json.dumps({"clicks": [{"vertex": 0,
                                                    "sign": "positive"}]}))
    assert status == 500 and "numeric" in doc["error"]


def test_swap_model_changes_identity(live):
    old_id = live.service.model.model_id
    status, doc = live.request("GET", "/mesh")
    assert doc["model_id"] == old_id
    live.service.swap_model(build_model(seed=99))
    status, doc = live.request("GET", "/model")
    assert status == 200 and doc["model_id"] != old_id
    status, doc = live.request("GET", "/mesh")
    assert doc["model_id"] != old_id
