"""Binary checkpoint format.

Layout: 4-byte magic, u32 version, u32 meta length, canonical JSON meta
(stage tag, feature dim, encoder/decoder layer specs, training seed,
mesh content hash), u32 blob count, then name-sorted parameter blobs
(u16 name length, name, u8 rank, u32 dims, little-endian float32 data).
Sorted names and canonical JSON make save(load(x)) byte-identical.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass

import numpy as np

from .decoder import ATTENTION_NAMES, DecoderConfig
from .encoder import EncoderConfig
from .numerics import ParamStore

MAGIC = b"ISEG"
VERSION = 1

STAGE_ENCODER = "encoder"
STAGE_DECODER = "decoder"
STAGE_JOINT = "joint"
STAGES = (STAGE_ENCODER, STAGE_DECODER, STAGE_JOINT)


class CheckpointError(Exception):
    pass


@dataclass
class Checkpoint:
    stage: str
    seed: int
    mesh_hash: str
    enc_cfg: EncoderConfig
    enc_params: ParamStore
    dec_cfg: DecoderConfig | None = None
    dec_params: ParamStore | None = None

    def __post_init__(self):
        if self.stage not in STAGES:
            raise CheckpointError(f"unknown stage tag {self.stage!r}")
        if self.stage != STAGE_ENCODER and (self.dec_cfg is None or self.dec_params is None):
            raise CheckpointError(f"stage {self.stage!r} requires decoder parameters")

    @property
    def d(self) -> int:
        return self.enc_cfg.out_dim


def encoder_param_shapes(cfg: EncoderConfig) -> dict:
    shapes = {}
    dims = [cfg.pe_dim] + [cfg.hidden_dim] * (cfg.layers - 1) + [cfg.out_dim]
    for i in range(cfg.layers):
        shapes[f"enc.W{i}"] = (dims[i], dims[i + 1])
        shapes[f"enc.b{i}"] = (1, dims[i + 1])
        if i < cfg.layers - 1:
            shapes[f"enc.ln{i}.gain"] = (1, dims[i + 1])
            shapes[f"enc.ln{i}.offset"] = (1, dims[i + 1])
    return shapes


def decoder_param_shapes(cfg: DecoderConfig) -> dict:
    shapes = {}
    d = cfg.feature_dim
    for name in ATTENTION_NAMES:
        shapes[name] = (d, d)
    dims = cfg.mlp_dims()
    for i in range(cfg.mlp_layers):
        shapes[f"dec.W{i}"] = (dims[i], dims[i + 1])
        shapes[f"dec.b{i}"] = (1, dims[i + 1])
        if i < cfg.mlp_layers - 1:
            shapes[f"dec.ln{i}.gain"] = (1, dims[i + 1])
            shapes[f"dec.ln{i}.offset"] = (1, dims[i + 1])
    return shapes


def _expected_shapes(ckpt_stage: str, enc_cfg: EncoderConfig,
                     dec_cfg: DecoderConfig | None) -> dict:
    shapes = encoder_param_shapes(enc_cfg)
    if ckpt_stage != STAGE_ENCODER:
        shapes.update(decoder_param_shapes(dec_cfg))
    return shapes


def _validate_store(store: ParamStore, shapes: dict, what: str) -> None:
    names = set(store.names())
    expected = set(shapes)
    if names != expected:
        missing = sorted(expected - names)
        extra = sorted(names - expected)
        raise CheckpointError(f"{what} parameter names mismatch: missing {missing}, "
                              f"unexpected {extra}")
    for name in names:
        if store[name].shape != shapes[name]:
            raise CheckpointError(f"{what} parameter {name!r} has shape "
                                  f"{store[name].shape}, expected {shapes[name]}")


def save_checkpoint(path, ckpt: Checkpoint) -> None:
    meta = {
        "stage": ckpt.stage,
        "d": ckpt.d,
        "seed": int(ckpt.seed),
        "mesh_hash": ckpt.mesh_hash,
        "encoder": ckpt.enc_cfg.to_dict(),
        "decoder": ckpt.dec_cfg.to_dict() if ckpt.dec_cfg else None,
    }
    meta_bytes = json.dumps(meta, sort_keys=True, separators=(",", ":")).encode()
    blobs = {}
    for name in ckpt.enc_params.names():
        blobs[name] = ckpt.enc_params[name]
    if ckpt.dec_params is not None:
        for name in ckpt.dec_params.names():
            if name in blobs:
                raise CheckpointError(f"duplicate parameter {name!r} across stores")
            blobs[name] = ckpt.dec_params[name]
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", VERSION))
        fh.write(struct.pack("<I", len(meta_bytes)))
        fh.write(meta_bytes)
        fh.write(struct.pack("<I", len(blobs)))
        for name in sorted(blobs):
            arr = np.ascontiguousarray(blobs[name], dtype="<f4")
            encoded = name.encode()
            fh.write(struct.pack("<H", len(encoded)))
            fh.write(encoded)
            fh.write(struct.pack("<B", arr.ndim))
            fh.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
            fh.write(arr.tobytes())


def load_checkpoint(path, mesh=None) -> Checkpoint:
    """Read and validate a checkpoint; with a mesh, its content hash must
    match the one recorded at training time."""
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:4] != MAGIC:
        raise CheckpointError(f"{path}: bad magic, not a checkpoint")
    try:
        (version,) = struct.unpack_from("<I", data, 4)
        if version != VERSION:
            raise CheckpointError(f"{path}: unsupported checkpoint version {version}")
        (meta_len,) = struct.unpack_from("<I", data, 8)
        try:
            meta = json.loads(data[12: 12 + meta_len])
        except json.JSONDecodeError as exc:
            raise CheckpointError(f"{path}: corrupt metadata: {exc}")
        offset = 12 + meta_len
        (count,) = struct.unpack_from("<I", data, offset)
        offset += 4
        blobs = {}
        for _ in range(count):
            (name_len,) = struct.unpack_from("<H", data, offset)
            offset += 2
            name = data[offset: offset + name_len].decode()
            offset += name_len
            (ndim,) = struct.unpack_from("<B", data, offset)
            offset += 1
            shape = struct.unpack_from(f"<{ndim}I", data, offset)
            offset += 4 * ndim
            size = int(np.prod(shape)) if ndim else 1
            arr = np.frombuffer(data, dtype="<f4", count=size, offset=offset)
            offset += 4 * size
            blobs[name] = arr.reshape(shape).copy()
    except (struct.error, ValueError, UnicodeDecodeError) as exc:
        raise CheckpointError(f"{path}: truncated or corrupt checkpoint: {exc}")
    if offset != len(data):
        raise CheckpointError(f"{path}: trailing bytes after parameter blobs")

    stage = meta.get("stage")
    enc_cfg = EncoderConfig.from_dict(meta["encoder"])
    dec_cfg = DecoderConfig.from_dict(meta["decoder"]) if meta.get("decoder") else None
    enc_shapes = encoder_param_shapes(enc_cfg)
    enc_params = ParamStore()
    dec_params = ParamStore() if dec_cfg else None
    for name in sorted(blobs):
        if name in enc_shapes:
            enc_params.add(name, blobs[name])
        elif dec_params is not None:
            dec_params.add(name, blobs[name])
        else:
            raise CheckpointError(f"{path}: unexpected parameter {name!r}")
    _validate_store(enc_params, enc_shapes, "encoder")
    if dec_cfg is not None:
        _validate_store(dec_params, decoder_param_shapes(dec_cfg), "decoder")
    ckpt = Checkpoint(stage=stage, seed=int(meta["seed"]), mesh_hash=meta["mesh_hash"],
                      enc_cfg=enc_cfg, enc_params=enc_params,
                      dec_cfg=dec_cfg, dec_params=dec_params)
    if mesh is not None and mesh.content_hash() != ckpt.mesh_hash:
        raise CheckpointError("checkpoint was trained on a different mesh "
                              f"(hash {ckpt.mesh_hash[:12]}… != {mesh.content_hash()[:12]}…)")
    return ckpt
