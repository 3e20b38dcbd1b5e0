"""Loaded-model wrapper binding a mesh to checkpoint parameters.

Computes the per-vertex feature field once at load time and precomputes
the attention queries, so a segmentation query costs one attention
lookup plus the decoder MLP. predict() is pure: repeated calls never
mutate parameters.
"""

from __future__ import annotations

import numpy as np

from .checkpoint import Checkpoint, STAGE_ENCODER
from .decoder import DecoderConfig, ProbabilityField, interactive_attention, decode
from .encoder import encoder_forward
from .geometry import ClickSet, Mesh


class ModelError(Exception):
    pass


class Model:
    def __init__(self, mesh: Mesh, ckpt: Checkpoint):
        if ckpt.mesh_hash != mesh.content_hash():
            raise ModelError("checkpoint mesh hash does not match the loaded mesh")
        self.mesh = mesh
        self.stage = ckpt.stage
        self.enc_cfg = ckpt.enc_cfg
        self.dec_cfg = ckpt.dec_cfg
        self.enc_params = ckpt.enc_params
        self.dec_params = ckpt.dec_params
        self.seed = ckpt.seed
        self.F = encoder_forward(mesh, ckpt.enc_params, ckpt.enc_cfg).F
        if ckpt.dec_params is not None:
            self.Q = self.F @ ckpt.dec_params["att.W_Q"]
        else:
            self.Q = None
        self.model_id = self.param_hash()[:16]

    def param_hash(self) -> str:
        import hashlib

        h = hashlib.sha256()
        h.update(self.enc_params.state_hash().encode())
        if self.dec_params is not None:
            h.update(self.dec_params.state_hash().encode())
        return h.hexdigest()

    def require_trained(self) -> None:
        if self.stage == STAGE_ENCODER or self.dec_params is None:
            raise ModelError("checkpoint has no trained decoder; "
                             "run decoder training first")

    def predict(self, clicks: ClickSet) -> ProbabilityField:
        """Per-vertex probabilities for a click set; read-only."""
        self.require_trained()
        clicks.validate_against(self.mesh.n)
        G = interactive_attention(self.F, clicks, self.dec_params, Q=self.Q)
        return decode(self.F, G, self.dec_params, self.dec_cfg)

    def predictor(self):
        """ClickSet -> probability vector closure for the evaluators."""
        self.require_trained()
        return lambda clicks: self.predict(clicks).p
