"""Checkpoint binary format: byte-stable round trips and corruption handling."""

from __future__ import annotations

import struct

import numpy as np
import pytest

from meshseg.checkpoint import (Checkpoint, CheckpointError, MAGIC, STAGE_DECODER,
                                STAGE_ENCODER, STAGE_JOINT, decoder_param_shapes,
                                encoder_param_shapes, load_checkpoint, save_checkpoint)
from meshseg.decoder import DecoderConfig, init_decoder_params
from meshseg.encoder import EncoderConfig, init_encoder_params
from meshseg.numerics import ParamStore
from meshseg.shapes import icosphere

ENC = EncoderConfig(pe_frequencies=4, hidden_dim=16, layers=3, out_dim=8)
DEC = DecoderConfig(feature_dim=8, mlp_layers=3, hidden_dim=12)


def fresh_ckpt(stage=STAGE_DECODER, mesh=None):
    mesh = mesh or icosphere(1)
    # float32 stores: the on-disk format is f32, so hashes survive the trip
    enc = init_encoder_params(np.random.default_rng(0), ENC, dtype=np.float32)
    dec = init_decoder_params(np.random.default_rng(1), DEC, dtype=np.float32)
    if stage == STAGE_ENCODER:
        return Checkpoint(stage=stage, seed=7, mesh_hash=mesh.content_hash(),
                          enc_cfg=ENC, enc_params=enc)
    return Checkpoint(stage=stage, seed=7, mesh_hash=mesh.content_hash(),
                      enc_cfg=ENC, enc_params=enc, dec_cfg=DEC, dec_params=dec)


def test_param_shape_tables():
    enc_shapes = encoder_param_shapes(ENC)
    assert enc_shapes["enc.W0"] == (ENC.pe_dim, 16)
    assert enc_shapes["enc.W2"] == (16, 8)
    assert enc_shapes["enc.b1"] == (1, 16)
    assert "enc.ln2.gain" not in enc_shapes  # no norm after the last layer
    dec_shapes = decoder_param_shapes(DEC)
    assert dec_shapes["att.W_Q"] == (8, 8)
    assert dec_shapes["dec.W0"] == (16, 12)
    assert dec_shapes["dec.W2"] == (12, 2)


def test_round_trip_is_byte_identical(tmp_path):
    mesh = icosphere(1)
    ckpt = fresh_ckpt(mesh=mesh)
    p1 = tmp_path / "a.ckpt"
    p2 = tmp_path / "b.ckpt"
    save_checkpoint(p1, ckpt)
    back = load_checkpoint(p1, mesh=mesh)
    save_checkpoint(p2, back)
    assert p1.read_bytes() == p2.read_bytes()
    assert back.stage == ckpt.stage
    assert back.seed == ckpt.seed
    assert back.enc_cfg == ckpt.enc_cfg
    assert back.dec_cfg == ckpt.dec_cfg
    assert back.enc_params.state_hash() == ckpt.enc_params.state_hash()
    assert back.dec_params.state_hash() == ckpt.dec_params.state_hash()


def test_encoder_only_checkpoint(tmp_path):
    ckpt = fresh_ckpt(stage=STAGE_ENCODER)
    path = tmp_path / "enc.ckpt"
    save_checkpoint(path, ckpt)
    back = load_checkpoint(path)
    assert back.stage == STAGE_ENCODER
    assert back.dec_params is None and back.dec_cfg is None
    assert back.d == ENC.out_dim


def test_stage_validation():
    mesh = icosphere(1)
    enc = init_encoder_params(np.random.default_rng(0), ENC)
    with pytest.raises(CheckpointError):
        Checkpoint(stage="bogus", seed=0, mesh_hash=mesh.content_hash(),
                   enc_cfg=ENC, enc_params=enc)
    for stage in (STAGE_DECODER, STAGE_JOINT):
        with pytest.raises(CheckpointError):
            Checkpoint(stage=stage, seed=0, mesh_hash=mesh.content_hash(),
                       enc_cfg=ENC, enc_params=enc)  # decoder params missing


def test_mesh_hash_mismatch(tmp_path):
    mesh = icosphere(1)
    path = tmp_path / "m.ckpt"
    save_checkpoint(path, fresh_ckpt(mesh=mesh))
    load_checkpoint(path, mesh=mesh)  # matching mesh passes
    with pytest.raises(CheckpointError):
        load_checkpoint(path, mesh=icosphere(2))


def corrupt(tmp_path, mutate):
    path = tmp_path / "c.ckpt"
    save_checkpoint(path, fresh_ckpt())
    raw = bytearray(path.read_bytes())
    mutate(raw)
    path.write_bytes(bytes(raw))
    return path


def test_bad_magic(tmp_path):
    path = corrupt(tmp_path, lambda raw: raw.__setitem__(slice(0, 4), b"NOPE"))
    with pytest.raises(CheckpointError, match="magic"):
        load_checkpoint(path)


def test_unsupported_version(tmp_path):
    def bump(raw):
        raw[4:8] = struct.pack("<I", 99)
    with pytest.raises(CheckpointError, match="version"):
        load_checkpoint(corrupt(tmp_path, bump))


def test_corrupt_metadata(tmp_path):
    def smash(raw):
        raw[12] = ord("!")
    with pytest.raises(CheckpointError, match="metadata"):
        load_checkpoint(corrupt(tmp_path, smash))


def test_truncated_file(tmp_path):
    def chop(raw):
        del raw[len(raw) // 2:]
    with pytest.raises(CheckpointError):
        load_checkpoint(corrupt(tmp_path, chop))


def test_trailing_bytes(tmp_path):
    path = corrupt(tmp_path, lambda raw: raw.extend(b"\x00\x00"))
    with pytest.raises(CheckpointError, match="trailing"):
        load_checkpoint(path)


def test_missing_parameter_rejected(tmp_path):
    mesh = icosphere(1)
    enc = init_encoder_params(np.random.default_rng(0), ENC)
    partial = ParamStore()
    for name in list(enc.names())[:-1]:
        partial.add(name, enc[name])
    ckpt = Checkpoint(stage=STAGE_ENCODER, seed=0, mesh_hash=mesh.content_hash(),
                      enc_cfg=ENC, enc_params=partial)
    path = tmp_path / "p.ckpt"
    save_checkpoint(path, ckpt)
    with pytest.raises(CheckpointError, match="mismatch"):
        load_checkpoint(path)


def test_unexpected_parameter_rejected(tmp_path):
    mesh = icosphere(1)
    enc = init_encoder_params(np.random.default_rng(0), ENC)
    enc.add("stray", np.zeros((2, 2)))
    ckpt = Checkpoint(stage=STAGE_ENCODER, seed=0, mesh_hash=mesh.content_hash(),
                      enc_cfg=ENC, enc_params=enc)
    path = tmp_path / "u.ckpt"
    save_checkpoint(path, ckpt)
    with pytest.raises(CheckpointError, match="unexpected"):
        load_checkpoint(path)


def test_wrong_shape_rejected(tmp_path):
    mesh = icosphere(1)
    enc = init_encoder_params(np.random.default_rng(0), ENC)
    reshaped = ParamStore()
    for name in enc.names():
        arr = enc[name]
        reshaped.add(name, arr.T if name == "enc.W0" else arr)
    ckpt = Checkpoint(stage=STAGE_ENCODER, seed=0, mesh_hash=mesh.content_hash(),
                      enc_cfg=ENC, enc_params=reshaped)
    path = tmp_path / "s.ckpt"
    save_checkpoint(path, ckpt)
    with pytest.raises(CheckpointError, match="shape"):
        load_checkpoint(path)


def test_magic_constant():
    assert MAGIC == b"ISEG" and len(MAGIC) == 4
