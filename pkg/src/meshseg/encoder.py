"""Mesh Feature Field: positional encoding plus a 6-layer per-vertex MLP.

Each vertex is encoded independently, so the field is a pure pointwise
function of vertex coordinates and rows can be permuted freely. The
final tanh keeps features strictly inside (-1, 1), matching the range
of the teacher features they are distilled against.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dataclass_field

import numpy as np

from . import numerics as nm
from .geometry import Mesh
from .rasterizer import Camera, RasterOutput, rasterize, shade_attributes, shade_backward


@dataclass(frozen=True)
class EncoderConfig:
    pe_frequencies: int = 85
    hidden_dim: int = 256
    layers: int = 6
    out_dim: int = 256

    def __post_init__(self):
        if self.pe_frequencies < 0:
            raise ValueError("pe_frequencies must be non-negative")
        if self.hidden_dim < 1 or self.out_dim < 1:
            raise ValueError("encoder dims must be positive")
        if self.layers < 2:
            raise ValueError("encoder needs at least 2 layers")

    @property
    def pe_dim(self) -> int:
        return 3 + 6 * self.pe_frequencies

    def to_dict(self) -> dict:
        return {
            "pe_frequencies": self.pe_frequencies,
            "hidden_dim": self.hidden_dim,
            "layers": self.layers,
            "out_dim": self.out_dim,
        }

    @staticmethod
    def from_dict(d: dict) -> "EncoderConfig":
        return EncoderConfig(
            pe_frequencies=int(d["pe_frequencies"]),
            hidden_dim=int(d["hidden_dim"]),
            layers=int(d["layers"]),
            out_dim=int(d["out_dim"]),
        )


@dataclass
class MeshFeatureField:
    """Cached per-vertex features F (n, d) plus the parameters that made them."""

    F: np.ndarray
    params: nm.ParamStore
    config: EncoderConfig


def positional_encode(v: np.ndarray, L: int) -> np.ndarray:
    """Concatenate raw coordinates with sin/cos at octave frequencies 2^k pi.

    Accepts a single (3,) point or an (n, 3) batch; output dim is 3 + 6L,
    laid out as [xyz, sin(2^0 pi xyz), cos(2^0 pi xyz), ..., sin(2^{L-1} pi xyz),
    cos(2^{L-1} pi xyz)].
    """
    if L < 0:
        raise ValueError("frequency count must be >= 0")
    pts = np.atleast_2d(np.asarray(v, dtype=np.float64))
    if pts.shape[1] != 3:
        raise ValueError("expected 3D coordinates")
    n = pts.shape[0]
    out = np.empty((n, 3 + 6 * L), dtype=np.float64)
    out[:, :3] = pts
    for k in range(L):
        phase = (2.0 ** k) * np.pi * pts
        out[:, 3 + 6 * k: 6 + 6 * k] = np.sin(phase)
        out[:, 6 + 6 * k: 9 + 6 * k] = np.cos(phase)
    if np.asarray(v).ndim == 1:
        return out[0]
    return out


def init_encoder_params(rng: np.random.Generator, cfg: EncoderConfig,
                        dtype=np.float64) -> nm.ParamStore:
    """Fan-in uniform init; the last layer is scaled down 10x so initial
    features sit near zero and the tanh starts unsaturated."""
    store = nm.ParamStore()
    dims = [cfg.pe_dim] + [cfg.hidden_dim] * (cfg.layers - 1) + [cfg.out_dim]
    for i in range(cfg.layers):
        scale = 0.1 if i == cfg.layers - 1 else 1.0
        store.add(f"enc.W{i}", nm.kaiming_uniform(rng, dims[i], dims[i + 1], scale))
        store.add(f"enc.b{i}", np.zeros((1, dims[i + 1])))
        if i < cfg.layers - 1:
            store.add(f"enc.ln{i}.gain", np.ones((1, dims[i + 1])))
            store.add(f"enc.ln{i}.offset", np.zeros((1, dims[i + 1])))
    return store.astype(dtype)


def encoder_forward_from_pe(pe: np.ndarray, params: nm.ParamStore,
                            cfg: EncoderConfig, want_trace: bool = False):
    """MLP stack on precomputed positional encodings.

    Separated from encoder_forward so training loops can encode the
    vertex positions once and reuse them every step.
    """
    dtype = params["enc.W0"].dtype
    x = pe.astype(dtype, copy=False)
    trace = []
    for i in range(cfg.layers - 1):
        y, lin_tr = nm.linear_forward(x, params[f"enc.W{i}"], params[f"enc.b{i}"])
        r, relu_tr = nm.relu_forward(y)
        x, ln_tr = nm.layer_norm_forward(
            r, params[f"enc.ln{i}.gain"], params[f"enc.ln{i}.offset"])
        if want_trace:
            trace.append((lin_tr, relu_tr, ln_tr))
    last = cfg.layers - 1
    y, lin_tr = nm.linear_forward(x, params[f"enc.W{last}"], params[f"enc.b{last}"])
    F, tanh_tr = nm.tanh_forward(y)
    if want_trace:
        trace.append((lin_tr, tanh_tr))
        return F, trace
    return F


def encoder_backward_from_trace(trace, grad_F: np.ndarray, params: nm.ParamStore,
                                cfg: EncoderConfig) -> None:
    """Accumulate parameter gradients for a traced forward pass."""
    last = cfg.layers - 1
    lin_tr, tanh_tr = trace[-1]
    g = nm.tanh_backward(tanh_tr, grad_F)
    g, gW, gb = nm.linear_backward(lin_tr, g)
    params.accumulate(f"enc.W{last}", gW)
    params.accumulate(f"enc.b{last}", gb)
    for i in range(cfg.layers - 2, -1, -1):
        lin_tr, relu_tr, ln_tr = trace[i]
        g, ggain, goffset = nm.layer_norm_backward(ln_tr, g)
        params.accumulate(f"enc.ln{i}.gain", ggain)
        params.accumulate(f"enc.ln{i}.offset", goffset)
        g = nm.relu_backward(relu_tr, g)
        g, gW, gb = nm.linear_backward(lin_tr, g)
        params.accumulate(f"enc.W{i}", gW)
        params.accumulate(f"enc.b{i}", gb)


def encoder_forward(mesh: Mesh, params: nm.ParamStore, cfg: EncoderConfig) -> MeshFeatureField:
    pe = positional_encode(mesh.vertices, cfg.pe_frequencies)
    F = encoder_forward_from_pe(pe, params, cfg)
    return MeshFeatureField(F=F, params=params, config=cfg)


def encoder_loss(field_F: np.ndarray, mesh: Mesh, cam: Camera,
                 teacher_features: np.ndarray,
                 raster: RasterOutput | None = None):
    """Distillation loss: squared feature error of the rendered field
    against the teacher image, averaged over covered pixels.

    Returns (loss, gradient with respect to the per-vertex features).
    Background pixels carry no signal; the field only exists on the surface.
    """
    if teacher_features.shape[2] != field_F.shape[1]:
        raise ValueError("teacher channel count does not match feature dim")
    if raster is None:
        raster = rasterize(mesh, cam)
    if teacher_features.shape[:2] != raster.face_id.shape:
        raise ValueError("teacher image dims do not match camera")
    rendered = shade_attributes(raster, field_F, mesh.faces)
    cov = raster.coverage
    if not cov.any():
        return 0.0, np.zeros_like(field_F)
    loss, grad_rows = nm.squared_error_loss(rendered[cov], teacher_features[cov])
    grad_image = np.zeros(rendered.shape, dtype=grad_rows.dtype)
    grad_image[cov] = grad_rows
    grad_F = shade_backward(raster, mesh.faces, grad_image, field_F.shape[0])
    return loss, grad_F
