"""Feature field: encoding layout, pointwise purity, gradient checks."""

from __future__ import annotations

import math

import numpy as np
import pytest

import meshseg.numerics as nm
from meshseg.encoder import (EncoderConfig, encoder_backward_from_trace, encoder_forward,
                             encoder_forward_from_pe, encoder_loss, init_encoder_params,
                             positional_encode)
from meshseg.geometry import Mesh
from meshseg.rasterizer import Camera, rasterize
from meshseg.shapes import icosphere

from test_numerics import fd_grad, rel_err

RNG = np.random.default_rng(42)

SMALL = EncoderConfig(pe_frequencies=2, hidden_dim=8, layers=3, out_dim=4)


def test_positional_encode_layout_matches_brute_force():
    v = np.array([0.1, -0.2, 0.3])
    out = positional_encode(v, 2)
    assert out.shape == (15,)
    ref = list(v)
    for k in range(2):
        for fn in (math.sin, math.cos):
            ref.extend(fn((2.0 ** k) * math.pi * c) for c in v)
    assert np.abs(out - np.array(ref)).max() < 1e-15


def test_positional_encode_shapes():
    assert positional_encode(np.zeros(3), 0).shape == (3,)
    assert positional_encode(np.zeros((7, 3)), 85).shape == (7, 513)
    assert EncoderConfig().pe_dim == 513
    assert SMALL.pe_dim == 15
    with pytest.raises(ValueError):
        positional_encode(np.zeros((4, 2)), 3)
    with pytest.raises(ValueError):
        positional_encode(np.zeros(3), -1)


def test_encoder_output_inside_unit_box():
    params = init_encoder_params(RNG, SMALL)
    pe = positional_encode(RNG.uniform(-1, 1, size=(50, 3)), SMALL.pe_frequencies)
    F = encoder_forward_from_pe(pe, params, SMALL)
    assert F.shape == (50, 4)
    assert np.abs(F).max() < 1.0  # tanh range


def test_encoder_is_pointwise():
    # Row permutation of the input permutes the output rows exactly.
    params = init_encoder_params(np.random.default_rng(3), SMALL)
    pe = positional_encode(RNG.uniform(-1, 1, size=(20, 3)), SMALL.pe_frequencies)
    F = encoder_forward_from_pe(pe, params, SMALL)
    perm = np.random.default_rng(4).permutation(20)
    F_perm = encoder_forward_from_pe(pe[perm], params, SMALL)
    assert np.abs(F_perm - F[perm]).max() < 1e-12
    # Single rows evaluated in isolation agree too (up to the BLAS
    # matrix-vs-vector kernel switch, which reorders the dot products).
    for i in (0, 7, 19):
        row = encoder_forward_from_pe(pe[i:i + 1], params, SMALL)
        assert np.abs(row[0] - F[i]).max() < 1e-12


def test_encoder_forward_matches_straight_line_reimplementation():
    params = init_encoder_params(np.random.default_rng(8), SMALL)
    pe = positional_encode(RNG.uniform(-1, 1, size=(6, 3)), SMALL.pe_frequencies)
    x = pe.copy()
    for i in range(2):
        y = x @ params[f"enc.W{i}"] + params[f"enc.b{i}"]
        y = np.maximum(y, 0.0)
        mu = y.mean(axis=1, keepdims=True)
        var = ((y - mu) ** 2).mean(axis=1, keepdims=True)
        xhat = (y - mu) / np.sqrt(var + 1e-5)
        x = xhat * params[f"enc.ln{i}.gain"] + params[f"enc.ln{i}.offset"]
    ref = np.tanh(x @ params["enc.W2"] + params["enc.b2"])
    F = encoder_forward_from_pe(pe, params, SMALL)
    assert np.abs(F - ref).max() < 1e-12


def test_init_encoder_params_contract():
    a = init_encoder_params(np.random.default_rng(5), SMALL)
    b = init_encoder_params(np.random.default_rng(5), SMALL)
    assert a.state_hash() == b.state_hash()
    expected = set()
    for i in range(3):
        expected |= {f"enc.W{i}", f"enc.b{i}"}
        if i < 2:
            expected |= {f"enc.ln{i}.gain", f"enc.ln{i}.offset"}
    assert set(a.names()) == expected
    # Final layer initialized 10x smaller than kaiming bound.
    assert np.abs(a["enc.W2"]).max() <= 0.1 * np.sqrt(6.0 / SMALL.hidden_dim)
    assert np.abs(a["enc.W0"]).max() <= np.sqrt(6.0 / SMALL.pe_dim)


def test_encoder_parameter_gradients_finite_differences():
    params = init_encoder_params(np.random.default_rng(11), SMALL)
    pe = positional_encode(RNG.uniform(-1, 1, size=(5, 3)), SMALL.pe_frequencies)
    r = RNG.normal(size=(5, 4))

    def loss():
        return float((encoder_forward_from_pe(pe, params, SMALL) * r).sum())

    _, trace = encoder_forward_from_pe(pe, params, SMALL, want_trace=True)
    params.zero_grads()
    encoder_backward_from_trace(trace, r, params, SMALL)
    for name in ("enc.W0", "enc.b1", "enc.ln0.gain", "enc.ln1.offset", "enc.W2", "enc.b2"):
        analytic = params.params[name].grad
        assert rel_err(analytic, fd_grad(loss, params[name])) < 1e-6, name


def test_encoder_loss_gradient_finite_differences():
    mesh = icosphere(0)  # 12 vertices
    cam = Camera(azimuth=0.4, elevation=0.2, radius=2.5, width=8, height=8)
    raster = rasterize(mesh, cam)
    F = RNG.uniform(-0.5, 0.5, size=(mesh.n, 3))
    teacher = RNG.uniform(-1, 1, size=(8, 8, 3))

    def loss():
        return encoder_loss(F, mesh, cam, teacher, raster)[0]

    _, grad_F = encoder_loss(F, mesh, cam, teacher, raster)
    assert rel_err(grad_F, fd_grad(loss, F)) < 1e-6


def test_encoder_loss_validation_and_empty_coverage():
    mesh = icosphere(0)
    cam = Camera(azimuth=0.0, elevation=0.0, radius=2.5, width=8, height=8)
    with pytest.raises(ValueError):
        encoder_loss(np.zeros((12, 4)), mesh, cam, np.zeros((8, 8, 3)))
    with pytest.raises(ValueError):
        encoder_loss(np.zeros((12, 3)), mesh, cam, np.zeros((9, 8, 3)))
    # A face with a behind-camera vertex is dropped: no coverage, zero loss.
    soup = Mesh(vertices=np.array([[3.0, 0, 0], [0, 1, 0], [0, 0, 1]]),
                faces=np.array([[0, 1, 2]]))
    behind = Camera(azimuth=0.0, elevation=0.0, radius=2.0, width=8, height=8)
    loss, grad = encoder_loss(np.zeros((3, 2)), soup, behind, np.zeros((8, 8, 2)))
    assert loss == 0.0
    assert not grad.any()


def test_encoder_forward_wraps_mesh():
    mesh = icosphere(1)
    params = init_encoder_params(np.random.default_rng(2), SMALL)
    field = encoder_forward(mesh, params, SMALL)
    assert field.F.shape == (mesh.n, SMALL.out_dim)
    assert field.config == SMALL
    pe = positional_encode(mesh.vertices, SMALL.pe_frequencies)
    assert np.array_equal(field.F, encoder_forward_from_pe(pe, params, SMALL))


def test_config_dict_round_trip():
    cfg = EncoderConfig(pe_frequencies=7, hidden_dim=32, layers=4, out_dim=16)
    assert EncoderConfig.from_dict(cfg.to_dict()) == cfg
