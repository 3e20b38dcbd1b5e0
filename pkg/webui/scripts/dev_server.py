"""Start a local segmentation service for UI development and tests.

Builds a desk-scale mesh with a randomly initialized (untrained) model so
the HTTP surface is fully live without a training run, binds an ephemeral
port, prints it on the first stdout line, and serves until killed.

Usage: python3 scripts/dev_server.py [--mesh icosphere|torus] [--port N]
"""

import argparse

import numpy as np

from meshseg import (Checkpoint, DecoderConfig, EncoderConfig, MeshSegService,
                     Model, init_decoder_params, init_encoder_params,
                     make_server)
from meshseg.shapes import icosphere, torus


def build_model(kind: str) -> Model:
    mesh = torus(56, 54) if kind == "torus" else icosphere(3)
    enc_cfg = EncoderConfig(pe_frequencies=16, hidden_dim=128, layers=6, out_dim=64)
    dec_cfg = DecoderConfig(feature_dim=64, mlp_layers=8, hidden_dim=128)
    rng = np.random.default_rng(4)
    ckpt = Checkpoint(stage="decoder", seed=4, mesh_hash=mesh.content_hash(),
                      enc_cfg=enc_cfg,
                      enc_params=init_encoder_params(rng, enc_cfg, dtype=np.float32),
                      dec_cfg=dec_cfg,
                      dec_params=init_decoder_params(rng, dec_cfg, dtype=np.float32))
    return Model(mesh, ckpt)


def main() -> int:
    parser = argparse.ArgumentParser()
    parser.add_argument("--mesh", default="torus", choices=("torus", "icosphere"))
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=0)
    args = parser.parse_args()

    server = make_server(MeshSegService(build_model(args.mesh)), args.host, args.port)
    print(server.server_address[1], flush=True)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
