"""Click-conditioned decoding of the feature field into vertex probabilities.

The attention layer condenses any number of clicks into one n x d
conditioning matrix G: queries come from every vertex, keys and values
only from the clicked vertices' feature rows, projected by sign-specific
matrices (positives concatenated before negatives). A 16-layer MLP on
concat(f_i, g_i) then emits a 2-channel softmax; channel 0 is the
segment probability. Everything is row-wise, so vertex relabeling
commutes with the whole pipeline, and attention sums over keys, so the
click listing order never matters.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import numerics as nm
from .geometry import ClickSet, Mesh

ATTENTION_NAMES = ("att.W_Q", "att.W_K_pos", "att.W_K_neg", "att.W_V_pos", "att.W_V_neg")


@dataclass(frozen=True)
class DecoderConfig:
    feature_dim: int = 256
    mlp_layers: int = 16
    hidden_dim: int = 256
    out_channels: int = 2

    def __post_init__(self):
        if self.feature_dim < 1 or self.hidden_dim < 1:
            raise ValueError("decoder dims must be positive")
        if self.mlp_layers < 2:
            raise ValueError("decoder needs at least 2 layers")
        if self.out_channels < 2:
            raise ValueError("decoder needs at least 2 output channels")

    def mlp_dims(self) -> list:
        """Layer sizes: 2d input, hidden stack, 2-channel output."""
        dims = [2 * self.feature_dim]
        dims += [self.hidden_dim] * (self.mlp_layers - 1)
        dims += [self.out_channels]
        return dims

    def to_dict(self) -> dict:
        return {
            "feature_dim": self.feature_dim,
            "mlp_layers": self.mlp_layers,
            "hidden_dim": self.hidden_dim,
            "out_channels": self.out_channels,
        }

    @staticmethod
    def from_dict(d: dict) -> "DecoderConfig":
        return DecoderConfig(
            feature_dim=int(d["feature_dim"]),
            mlp_layers=int(d["mlp_layers"]),
            hidden_dim=int(d["hidden_dim"]),
            out_channels=int(d["out_channels"]),
        )


@dataclass
class ProbabilityField:
    """Per-vertex segment probability, channel 0 of the decoder softmax."""

    p: np.ndarray

    def __post_init__(self):
        self.p = np.asarray(self.p)
        if self.p.ndim != 1:
            raise ValueError("probability field must be a vector")


def init_decoder_params(rng: np.random.Generator, cfg: DecoderConfig,
                        dtype=np.float64) -> nm.ParamStore:
    """Attention projections plus the MLP stack in one store."""
    store = nm.ParamStore()
    d = cfg.feature_dim
    for name in ATTENTION_NAMES:
        store.add(name, nm.kaiming_uniform(rng, d, d))
    dims = cfg.mlp_dims()
    for i in range(cfg.mlp_layers):
        store.add(f"dec.W{i}", nm.kaiming_uniform(rng, dims[i], dims[i + 1]))
        store.add(f"dec.b{i}", np.zeros((1, dims[i + 1])))
        if i < cfg.mlp_layers - 1:
            store.add(f"dec.ln{i}.gain", np.ones((1, dims[i + 1])))
            store.add(f"dec.ln{i}.offset", np.zeros((1, dims[i + 1])))
    return store.astype(dtype)


def interactive_attention(F: np.ndarray, clicks: ClickSet, params: nm.ParamStore,
                          want_trace: bool = False, Q: np.ndarray | None = None):
    """G = softmax(Q K^T / sqrt(d)) V with keys/values from clicked rows.

    Q may be passed in precomputed (serving caches F W_Q); it must equal
    F @ att.W_Q. The scale always uses the feature dimension d, not the
    click count.
    """
    clicks.validate_against(F.shape[0])
    pos = list(clicks.positive)
    neg = list(clicks.negative)
    if Q is None:
        Q = F @ params["att.W_Q"]
    F_pos = F[pos]
    K_parts = [F_pos @ params["att.W_K_pos"]]
    V_parts = [F_pos @ params["att.W_V_pos"]]
    if neg:
        F_neg = F[neg]
        K_parts.append(F_neg @ params["att.W_K_neg"])
        V_parts.append(F_neg @ params["att.W_V_neg"])
    K = np.concatenate(K_parts, axis=0)
    V = np.concatenate(V_parts, axis=0)
    G, att_trace = nm.attention_forward(Q, K, V)
    if want_trace:
        return G, (att_trace, pos, neg)
    return G


def interactive_attention_backward(grad_G: np.ndarray, trace, F: np.ndarray,
                                   params: nm.ParamStore) -> np.ndarray:
    """Accumulate attention parameter gradients; return gradient wrt F."""
    att_trace, pos, neg = trace
    dQ, dK, dV = nm.attention_backward(att_trace, grad_G)
    n_pos = len(pos)
    grad_F = dQ @ params["att.W_Q"].T
    params.accumulate("att.W_Q", F.T @ dQ)
    F_pos = F[pos]
    dK_pos, dV_pos = dK[:n_pos], dV[:n_pos]
    params.accumulate("att.W_K_pos", F_pos.T @ dK_pos)
    params.accumulate("att.W_V_pos", F_pos.T @ dV_pos)
    np.add.at(grad_F, pos, dK_pos @ params["att.W_K_pos"].T)
    np.add.at(grad_F, pos, dV_pos @ params["att.W_V_pos"].T)
    if neg:
        F_neg = F[neg]
        dK_neg, dV_neg = dK[n_pos:], dV[n_pos:]
        params.accumulate("att.W_K_neg", F_neg.T @ dK_neg)
        params.accumulate("att.W_V_neg", F_neg.T @ dV_neg)
        np.add.at(grad_F, neg, dK_neg @ params["att.W_K_neg"].T)
        np.add.at(grad_F, neg, dV_neg @ params["att.W_V_neg"].T)
    return grad_F


def decode(F: np.ndarray, G: np.ndarray, params: nm.ParamStore, cfg: DecoderConfig,
           want_trace: bool = False):
    """Per-vertex MLP on concat(f_i, g_i) with a 2-way softmax head."""
    if F.shape != G.shape:
        raise ValueError("feature and conditioning matrices must match")
    x = np.concatenate([F, G], axis=1)
    trace = []
    for i in range(cfg.mlp_layers - 1):
        y, lin_tr = nm.linear_forward(x, params[f"dec.W{i}"], params[f"dec.b{i}"])
        r, relu_tr = nm.relu_forward(y)
        x, ln_tr = nm.layer_norm_forward(
            r, params[f"dec.ln{i}.gain"], params[f"dec.ln{i}.offset"])
        if want_trace:
            trace.append((lin_tr, relu_tr, ln_tr))
    last = cfg.mlp_layers - 1
    logits, lin_tr = nm.linear_forward(x, params[f"dec.W{last}"], params[f"dec.b{last}"])
    probs = nm.softmax_rows(logits)
    field = ProbabilityField(p=probs[:, 0])
    if want_trace:
        trace.append((lin_tr, probs))
        return field, trace
    return field


def decode_backward(grad_p: np.ndarray, trace, params: nm.ParamStore,
                    cfg: DecoderConfig) -> tuple:
    """Backward through the MLP head; returns (grad_F_direct, grad_G)."""
    last = cfg.mlp_layers - 1
    lin_tr, probs = trace[-1]
    grad_probs = np.zeros_like(probs)
    grad_probs[:, 0] = grad_p
    g = nm.softmax_rows_backward(probs, grad_probs)
    g, gW, gb = nm.linear_backward(lin_tr, g)
    params.accumulate(f"dec.W{last}", gW)
    params.accumulate(f"dec.b{last}", gb)
    for i in range(cfg.mlp_layers - 2, -1, -1):
        lin_tr, relu_tr, ln_tr = trace[i]
        g, ggain, goffset = nm.layer_norm_backward(ln_tr, g)
        params.accumulate(f"dec.ln{i}.gain", ggain)
        params.accumulate(f"dec.ln{i}.offset", goffset)
        g = nm.relu_backward(relu_tr, g)
        g, gW, gb = nm.linear_backward(lin_tr, g)
        params.accumulate(f"dec.W{i}", gW)
        params.accumulate(f"dec.b{i}", gb)
    d = cfg.feature_dim
    return g[:, :d], g[:, d:]


def segment(mesh: Mesh, field, clicks: ClickSet, params: nm.ParamStore,
            cfg: DecoderConfig | None = None, Q: np.ndarray | None = None) -> ProbabilityField:
    """Pure composition: attention then decode on the cached feature field.

    field may be a MeshFeatureField or a raw (n, d) feature matrix.
    """
    F = getattr(field, "F", field)
    if F.shape[0] != mesh.n:
        raise ValueError("feature rows do not match mesh vertex count")
    if cfg is None:
        cfg = DecoderConfig(feature_dim=F.shape[1])
    G = interactive_attention(F, clicks, params, Q=Q)
    return decode(F, G, params, cfg)
