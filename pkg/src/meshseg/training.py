"""Two-stage training: feature distillation, then click-conditioned decoding.

Stage 1 fits the per-vertex feature field so its renders match teacher
feature images over a pool of random views. Stage 2 freezes the encoder
(enforced by parameter hashing) and trains attention + decoder so
rendered probabilities match teacher masks under simulated clicks. The
joint ablation optimizes the weighted sum of both losses in one loop.

Every loop draws all randomness from seeds spawned off TrainConfig.seed,
runs single-threaded numpy, and touches vertices lazily: a view's loss
only involves vertices of faces that won pixels, so forward/backward
passes are restricted to those rows plus the clicked vertices.
"""

from __future__ import annotations

import json
import os
import time
from dataclasses import dataclass, field as dataclass_field, replace

import numpy as np

from . import numerics as nm
from .decoder import (DecoderConfig, decode, decode_backward, init_decoder_params,
                      interactive_attention, interactive_attention_backward)
from .encoder import (EncoderConfig, encoder_backward_from_trace, encoder_forward,
                      encoder_forward_from_pe, encoder_loss, init_encoder_params,
                      positional_encode)
from .geometry import ClickSet, Mesh, NEGATIVE, POSITIVE, sample_training_vertices
from .rasterizer import (Camera, ViewPolicy, ViewSampler, project_click, rasterize,
                         shade_attributes, shade_backward, visible_vertices)
from .teacher import PromptPixel, TeacherSample, save_dataset, load_dataset


@dataclass(frozen=True)
class TrainConfig:
    image_size: int = 64
    views_per_epoch: int = 200
    stage1_epochs: int = 5
    stage2_epochs: int = 20
    lr_encoder: float = 1e-4
    lr_decoder: float = 1e-4
    seed: int = 0
    train_vertex_fraction: float = 0.03
    views_per_click: int = 8
    second_click_change_threshold: float = 0.05
    max_resample_attempts: int = 50
    heldout_views: int = 16
    joint_weight: float = 5.0
    radius: float = 2.5
    fov_y: float = np.pi / 3.0
    dtype: str = "float32"

    def __post_init__(self):
        if not (0.0 < self.train_vertex_fraction <= 1.0):
            raise ValueError("train_vertex_fraction must be in (0, 1]")
        if not (0.0 < self.second_click_change_threshold <= 1.0):
            raise ValueError("second_click_change_threshold must be in (0, 1]")
        for name in ("image_size", "views_per_epoch", "stage1_epochs", "stage2_epochs",
                     "views_per_click", "max_resample_attempts", "heldout_views"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.dtype not in ("float32", "float64"):
            raise ValueError("dtype must be float32 or float64")

    @property
    def np_dtype(self):
        return np.float32 if self.dtype == "float32" else np.float64

    def view_policy(self) -> ViewPolicy:
        return ViewPolicy(radius=self.radius, fov_y=self.fov_y,
                          width=self.image_size, height=self.image_size)

    def to_dict(self) -> dict:
        return {
            "image_size": self.image_size,
            "views_per_epoch": self.views_per_epoch,
            "stage1_epochs": self.stage1_epochs,
            "stage2_epochs": self.stage2_epochs,
            "lr_encoder": self.lr_encoder,
            "lr_decoder": self.lr_decoder,
            "seed": self.seed,
            "train_vertex_fraction": self.train_vertex_fraction,
            "views_per_click": self.views_per_click,
            "second_click_change_threshold": self.second_click_change_threshold,
            "max_resample_attempts": self.max_resample_attempts,
            "heldout_views": self.heldout_views,
            "joint_weight": self.joint_weight,
            "radius": self.radius,
            "fov_y": self.fov_y,
            "dtype": self.dtype,
        }

    @staticmethod
    def from_dict(d: dict) -> "TrainConfig":
        known = set(TrainConfig().to_dict())
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return TrainConfig(**d)


@dataclass
class ClickRecord:
    """A simulated interaction: a first positive click, an optional second
    click, and the teacher samples (by index) supervising it."""

    first_click: int
    second_click: tuple | None
    sample_ids: list

    def click_set(self) -> ClickSet:
        pos = [self.first_click]
        neg = []
        if self.second_click is not None:
            vid, sign = self.second_click
            (pos if sign == POSITIVE else neg).append(vid)
        return ClickSet.of(pos, neg)

    def to_dict(self) -> dict:
        second = None
        if self.second_click is not None:
            second = [int(self.second_click[0]), self.second_click[1]]
        return {"first_click": int(self.first_click), "second_click": second,
                "sample_ids": [int(i) for i in self.sample_ids]}

    @staticmethod
    def from_dict(d: dict) -> "ClickRecord":
        second = d["second_click"]
        if second is not None:
            second = (int(second[0]), str(second[1]))
        return ClickRecord(first_click=int(d["first_click"]), second_click=second,
                           sample_ids=[int(i) for i in d["sample_ids"]])


class _LogWriter:
    """Line-oriented JSON training log; silently off when path is None."""

    def __init__(self, path=None):
        self.fh = open(path, "w") if path else None

    def write(self, **fields):
        if self.fh is not None:
            self.fh.write(json.dumps(fields) + "\n")

    def close(self):
        if self.fh is not None:
            self.fh.close()


def _spawn_rngs(seed: int, count: int) -> list:
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(count)]


def heldout_distill_loss(mesh: Mesh, F: np.ndarray, teacher, cams, rasters) -> float:
    """Mean distillation loss over a fixed list of evaluation views."""
    total = 0.0
    for cam, raster in zip(cams, rasters):
        tf = teacher.embed(mesh, cam, raster=raster).astype(F.dtype)
        loss, _ = encoder_loss(F, mesh, cam, tf, raster=raster)
        total += loss
    return total / len(cams)


def distill_encoder(mesh: Mesh, cfg: TrainConfig, teacher,
                    enc_cfg: EncoderConfig | None = None, log_path=None):
    """Stage 1: fit the feature field to rendered teacher features.

    Views form a fixed pool of cfg.views_per_epoch cameras (the finite
    set of random viewing angles the loss averages over); epochs iterate
    the shuffled pool with one optimizer step per view. Returns
    (params, enc_cfg, summary); on a non-finite loss the last epoch-end
    snapshot is returned with summary["aborted"] set.
    """
    if enc_cfg is None:
        enc_cfg = EncoderConfig()
    if teacher.d != enc_cfg.out_dim:
        raise ValueError("teacher feature dim does not match encoder output dim")
    rng_init, rng_views, rng_order = _spawn_rngs(cfg.seed, 3)
    dtype = cfg.np_dtype
    log = _LogWriter(log_path)
    t_start = time.perf_counter()

    sampler = ViewSampler(cfg.view_policy(), rng_views.integers(2 ** 63))
    cams = sampler.take(cfg.views_per_epoch)
    held_cams = sampler.take(cfg.heldout_views)
    rasters = [rasterize(mesh, c) for c in cams]
    held_rasters = [rasterize(mesh, c) for c in held_cams]
    teacher_feats = [teacher.embed(mesh, c, raster=r).astype(dtype)
                     for c, r in zip(cams, rasters)]

    params = init_encoder_params(rng_init, enc_cfg, dtype=dtype)
    pe = positional_encode(mesh.vertices, enc_cfg.pe_frequencies).astype(dtype)

    def heldout(F):
        return heldout_distill_loss(mesh, F, teacher, held_cams, held_rasters)

    initial_heldout = heldout(encoder_forward_from_pe(pe, params, enc_cfg))
    snapshot = params.copy_values()
    epoch_losses = []
    aborted = False
    step = 0
    for epoch in range(cfg.stage1_epochs):
        order = rng_order.permutation(len(cams))
        epoch_loss = 0.0
        for vi in order:
            F, trace = encoder_forward_from_pe(pe, params, enc_cfg, want_trace=True)
            loss, grad_F = encoder_loss(F, mesh, cams[vi], teacher_feats[vi],
                                        raster=rasters[vi])
            step += 1
            if not np.isfinite(loss):
                aborted = True
                break
            encoder_backward_from_trace(trace, grad_F, params, enc_cfg)
            try:
                nm.adam_step(params, cfg.lr_encoder, t=step)
            except nm.NumericError:
                aborted = True
                break
            epoch_loss += loss
            log.write(stage="distill", epoch=epoch, step=step, loss=float(loss),
                      seed=cfg.seed)
        if aborted:
            params.load_values(snapshot)
            break
        epoch_loss /= len(cams)
        epoch_losses.append(epoch_loss)
        snapshot = params.copy_values()
        log.write(stage="distill", epoch=epoch, step=step, epoch_loss=float(epoch_loss),
                  seed=cfg.seed)
    final_heldout = heldout(encoder_forward_from_pe(pe, params, enc_cfg))
    log.close()
    summary = {
        "stage": "distill",
        "initial_heldout_loss": float(initial_heldout),
        "final_heldout_loss": float(final_heldout),
        "heldout_ratio": float(final_heldout / initial_heldout) if initial_heldout else 0.0,
        "epoch_losses": [float(x) for x in epoch_losses],
        "steps": step,
        "aborted": aborted,
        "seconds": time.perf_counter() - t_start,
    }
    return params, enc_cfg, summary


def generate_click_dataset(mesh: Mesh, cfg: TrainConfig, teacher):
    """Simulated interactions in two phases.

    Phase 1: for each sampled training vertex, find views where it is
    visible and its projection lands on coverage, and record the teacher
    mask for that single positive prompt. Phase 2: for each phase-1 view,
    try second clicks (random visible vertex and sign) until the mask
    area grows (positive) or shrinks (negative) by at least the
    configured fraction; accepted pairs become their own single-view
    records. Returns (records, samples, raster_cache, summary).
    """
    rng_clicks, = _spawn_rngs(cfg.seed + 1, 1)
    sampler = ViewSampler(cfg.view_policy(), rng_clicks.integers(2 ** 63))
    train_vids = sample_training_vertices(mesh, cfg.train_vertex_fraction, cfg.seed)
    records, samples = [], []
    raster_cache = {}
    skipped = []
    view_count = 0

    def new_view():
        nonlocal view_count
        cam = sampler.sample()
        view_id = f"v{view_count:05d}"
        view_count += 1
        raster = rasterize(mesh, cam)
        raster_cache[view_id] = raster
        return view_id, cam, raster

    for vid in train_vids:
        found = []
        for _ in range(cfg.max_resample_attempts):
            if len(found) == cfg.views_per_click:
                break
            view_id, cam, raster = new_view()
            (px, py), visible = project_click(mesh, cam, int(vid), raster=raster)
            if not visible or not raster.coverage[py, px]:
                continue
            prompt = PromptPixel(x=px, y=py, sign=POSITIVE)
            mask = teacher.segment(mesh, cam, [prompt], raster=raster)
            samples.append(TeacherSample(view_id=view_id, camera=cam,
                                         prompts=[prompt], mask=mask))
            found.append(len(samples) - 1)
        if found:
            records.append(ClickRecord(first_click=int(vid), second_click=None,
                                       sample_ids=found))
        else:
            skipped.append(int(vid))

    phase1_count = len(samples)
    accepted_pairs = 0
    for rec in list(records):
        for sid in rec.sample_ids:
            base = samples[sid]
            raster = raster_cache[base.view_id]
            vis = np.where(visible_vertices(mesh, base.camera, raster))[0]
            base_area = int(base.mask.sum())
            for _ in range(cfg.max_resample_attempts):
                second = int(rng_clicks.choice(vis))
                if second == rec.first_click:
                    continue
                sign = POSITIVE if rng_clicks.random() < 0.5 else NEGATIVE
                (px, py), visible = project_click(mesh, base.camera, second, raster=raster)
                if not visible or not raster.coverage[py, px]:
                    continue
                prompts = base.prompts + [PromptPixel(x=px, y=py, sign=sign)]
                mask = teacher.segment(mesh, base.camera, prompts, raster=raster)
                area = int(mask.sum())
                change = (area - base_area) / max(base_area, 1)
                if sign == POSITIVE and change < cfg.second_click_change_threshold:
                    continue
                if sign == NEGATIVE and -change < cfg.second_click_change_threshold:
                    continue
                samples.append(TeacherSample(view_id=base.view_id, camera=base.camera,
                                             prompts=prompts, mask=mask))
                records.append(ClickRecord(first_click=rec.first_click,
                                           second_click=(second, sign),
                                           sample_ids=[len(samples) - 1]))
                accepted_pairs += 1
                break

    summary = {
        "train_vertices": [int(v) for v in train_vids],
        "skipped_vertices": skipped,
        "phase1_samples": phase1_count,
        "phase2_samples": accepted_pairs,
        "views": view_count,
    }
    return records, samples, raster_cache, summary


RECORDS_FILE = "records.json"


def save_click_dataset(root, records, samples, feature_dim: int) -> None:
    save_dataset(root, samples, feature_dim)
    with open(os.path.join(root, RECORDS_FILE), "w") as fh:
        json.dump({"version": 1, "records": [r.to_dict() for r in records]},
                  fh, indent=1, sort_keys=True)


def load_click_dataset(root):
    samples = load_dataset(root)
    with open(os.path.join(root, RECORDS_FILE)) as fh:
        data = json.load(fh)
    if data.get("version") != 1:
        raise ValueError(f"unsupported records version {data.get('version')!r}")
    records = [ClickRecord.from_dict(r) for r in data["records"]]
    for rec in records:
        for sid in rec.sample_ids:
            if not (0 <= sid < len(samples)):
                raise ValueError(f"record references missing sample {sid}")
    return records, samples


def _active_rows(raster, faces, click_vids):
    """Vertices that can influence this view's loss: corners of faces that
    won pixels, plus the clicked vertices (keys/values for attention)."""
    fids = np.unique(raster.face_id[raster.coverage])
    vids = np.unique(faces[fids])
    return np.union1d(vids, np.asarray(click_vids, dtype=np.int64))


def _local_clicks(clicks: ClickSet, active: np.ndarray) -> ClickSet:
    pos = [int(np.searchsorted(active, v)) for v in clicks.positive]
    neg = [int(np.searchsorted(active, v)) for v in clicks.negative]
    return ClickSet.of(pos, neg)


def _mask_loss_and_grad(p_active, active, raster, faces, mask, n_vertices):
    """Render (p, 1-p) through the raster and take binary cross-entropy
    against the mask over covered pixels; returns loss and dL/dp_active."""
    two = np.stack([p_active, 1.0 - p_active], axis=1)
    full = np.zeros((n_vertices, 2), dtype=two.dtype)
    full[active] = two
    img = shade_attributes(raster, full, faces)
    cov = raster.coverage
    target = mask[cov].astype(img.dtype)
    loss, grad_c0 = nm.binary_cross_entropy(img[cov][:, 0], target)
    grad_img = np.zeros_like(img)
    grad_img[cov, 0] = grad_c0
    grad_full = shade_backward(raster, faces, grad_img, n_vertices)
    # d(img)/dp routes +1 through channel 0 and -1 through channel 1
    grad_p = grad_full[active, 0] - grad_full[active, 1]
    return loss, grad_p


def train_decoder(mesh: Mesh, enc_params: nm.ParamStore, enc_cfg: EncoderConfig,
                  records, samples, cfg: TrainConfig,
                  dec_cfg: DecoderConfig | None = None, raster_cache=None,
                  log_path=None):
    """Stage 2: encoder frozen, attention + MLP trained on click records.

    One optimizer step per (record, view) pair; pairs are shuffled each
    epoch. Returns (dec_params, dec_cfg, summary).
    """
    if dec_cfg is None:
        dec_cfg = DecoderConfig(feature_dim=enc_cfg.out_dim)
    rng_init, rng_order = _spawn_rngs(cfg.seed + 2, 2)
    dtype = cfg.np_dtype
    log = _LogWriter(log_path)
    t_start = time.perf_counter()

    enc_hash_before = enc_params.state_hash()
    F = encoder_forward(mesh, enc_params, enc_cfg).F.astype(dtype)

    if raster_cache is None:
        raster_cache = {}
    for s in samples:
        if s.view_id not in raster_cache:
            raster_cache[s.view_id] = rasterize(mesh, s.camera)

    params = init_decoder_params(rng_init, dec_cfg, dtype=dtype)
    pairs = [(rec, sid) for rec in records for sid in rec.sample_ids]
    if not pairs:
        raise ValueError("empty click dataset")

    snapshot = params.copy_values()
    epoch_losses = []
    aborted = False
    step = 0
    for epoch in range(cfg.stage2_epochs):
        order = rng_order.permutation(len(pairs))
        epoch_loss = 0.0
        for pi in order:
            rec, sid = pairs[pi]
            sample = samples[sid]
            raster = raster_cache[sample.view_id]
            clicks = rec.click_set()
            active = _active_rows(raster, mesh.faces, [c.vertex for c in clicks.entries])
            Fa = F[active]
            local = _local_clicks(clicks, active)
            G, att_trace = interactive_attention(Fa, local, params, want_trace=True)
            field, dec_trace = decode(Fa, G, params, dec_cfg, want_trace=True)
            loss, grad_p = _mask_loss_and_grad(field.p, active, raster, mesh.faces,
                                               sample.mask, mesh.n)
            step += 1
            if not np.isfinite(loss):
                aborted = True
                break
            grad_F_direct, grad_G = decode_backward(grad_p, dec_trace, params, dec_cfg)
            interactive_attention_backward(grad_G, att_trace, Fa, params)
            try:
                nm.adam_step(params, cfg.lr_decoder, t=step)
            except nm.NumericError:
                aborted = True
                break
            epoch_loss += loss
            log.write(stage="decoder", epoch=epoch, step=step, loss=float(loss),
                      seed=cfg.seed)
        if aborted:
            params.load_values(snapshot)
            break
        epoch_loss /= len(pairs)
        epoch_losses.append(epoch_loss)
        snapshot = params.copy_values()
        log.write(stage="decoder", epoch=epoch, step=step, epoch_loss=float(epoch_loss),
                  seed=cfg.seed)
    log.close()
    assert enc_params.state_hash() == enc_hash_before, \
        "encoder parameters mutated during decoder training"
    summary = {
        "stage": "decoder",
        "epoch_losses": [float(x) for x in epoch_losses],
        "steps": step,
        "pairs": len(pairs),
        "aborted": aborted,
        "seconds": time.perf_counter() - t_start,
    }
    return params, dec_cfg, summary


def train_joint_ablation(mesh: Mesh, cfg: TrainConfig, teacher, records, samples,
                         w: float | None = None, enc_cfg: EncoderConfig | None = None,
                         dec_cfg: DecoderConfig | None = None, raster_cache=None,
                         epochs: int | None = None, log_path=None):
    """Ablation: one loop over the click dataset optimizing w*L_enc + L_dec
    with the encoder trainable. Both loss components are logged per step.
    Returns (enc_params, dec_params, enc_cfg, dec_cfg, summary).
    """
    if w is None:
        w = cfg.joint_weight
    if enc_cfg is None:
        enc_cfg = EncoderConfig()
    if dec_cfg is None:
        dec_cfg = DecoderConfig(feature_dim=enc_cfg.out_dim)
    if epochs is None:
        epochs = cfg.stage1_epochs + cfg.stage2_epochs
    rng_enc, rng_dec, rng_order = _spawn_rngs(cfg.seed + 3, 3)
    dtype = cfg.np_dtype
    log = _LogWriter(log_path)
    t_start = time.perf_counter()

    if raster_cache is None:
        raster_cache = {}
    for s in samples:
        if s.view_id not in raster_cache:
            raster_cache[s.view_id] = rasterize(mesh, s.camera)
    # Teacher features are a pure function of the view; embed each view once.
    teacher_cache = {}
    for s in samples:
        if s.view_id not in teacher_cache:
            teacher_cache[s.view_id] = teacher.embed(
                mesh, s.camera, raster=raster_cache[s.view_id]).astype(dtype)

    enc_params = init_encoder_params(rng_enc, enc_cfg, dtype=dtype)
    dec_params = init_decoder_params(rng_dec, dec_cfg, dtype=dtype)
    pe = positional_encode(mesh.vertices, enc_cfg.pe_frequencies).astype(dtype)
    pairs = [(rec, sid) for rec in records for sid in rec.sample_ids]
    if not pairs:
        raise ValueError("empty click dataset")

    enc_snap, dec_snap = enc_params.copy_values(), dec_params.copy_values()
    epoch_losses = []
    aborted = False
    step = 0
    for epoch in range(epochs):
        order = rng_order.permutation(len(pairs))
        epoch_enc = epoch_dec = 0.0
        for pi in order:
            rec, sid = pairs[pi]
            sample = samples[sid]
            raster = raster_cache[sample.view_id]
            clicks = rec.click_set()
            active = _active_rows(raster, mesh.faces, [c.vertex for c in clicks.entries])
            Fa, enc_trace = encoder_forward_from_pe(pe[active], enc_params, enc_cfg,
                                                    want_trace=True)
            F_full = np.zeros((mesh.n, enc_cfg.out_dim), dtype=dtype)
            F_full[active] = Fa
            tf = teacher_cache[sample.view_id]
            loss_enc, grad_F_enc = encoder_loss(F_full, mesh, sample.camera, tf,
                                                raster=raster)
            local = _local_clicks(clicks, active)
            G, att_trace = interactive_attention(Fa, local, dec_params, want_trace=True)
            field, dec_trace = decode(Fa, G, dec_params, dec_cfg, want_trace=True)
            loss_dec, grad_p = _mask_loss_and_grad(field.p, active, raster, mesh.faces,
                                                   sample.mask, mesh.n)
            loss = w * loss_enc + loss_dec
            step += 1
            if not np.isfinite(loss):
                aborted = True
                break
            grad_F_direct, grad_G = decode_backward(grad_p, dec_trace, dec_params, dec_cfg)
            grad_Fa = interactive_attention_backward(grad_G, att_trace, Fa, dec_params)
            grad_Fa += grad_F_direct
            grad_Fa += w * grad_F_enc[active]
            encoder_backward_from_trace(enc_trace, grad_Fa, enc_params, enc_cfg)
            try:
                nm.adam_step(enc_params, cfg.lr_encoder, t=step)
                nm.adam_step(dec_params, cfg.lr_decoder, t=step)
            except nm.NumericError:
                aborted = True
                break
            epoch_enc += loss_enc
            epoch_dec += loss_dec
            log.write(stage="joint", epoch=epoch, step=step, loss_enc=float(loss_enc),
                      loss_dec=float(loss_dec), loss=float(loss), seed=cfg.seed)
        if aborted:
            enc_params.load_values(enc_snap)
            dec_params.load_values(dec_snap)
            break
        epoch_losses.append((epoch_enc / len(pairs), epoch_dec / len(pairs)))
        enc_snap, dec_snap = enc_params.copy_values(), dec_params.copy_values()
        log.write(stage="joint", epoch=epoch, step=step,
                  epoch_loss_enc=float(epoch_losses[-1][0]),
                  epoch_loss_dec=float(epoch_losses[-1][1]), seed=cfg.seed)
    log.close()
    summary = {
        "stage": "joint",
        "weight": float(w),
        "epoch_losses": [(float(a), float(b)) for a, b in epoch_losses],
        "steps": step,
        "pairs": len(pairs),
        "aborted": aborted,
        "seconds": time.perf_counter() - t_start,
    }
    return enc_params, dec_params, enc_cfg, dec_cfg, summary


def evaluate_click_iou(mesh: Mesh, F: np.ndarray, dec_params: nm.ParamStore,
                       dec_cfg: DecoderConfig, teacher, vids, cfg: TrainConfig,
                       seed: int, views_per_vid: int = 2):
    """Held-out evaluation: for fresh random views of each clicked vertex,
    IoU between the rendered thresholded prediction and the teacher mask
    over covered pixels. Reports both 0.5 and Otsu binarization.
    """
    from .evaluation import iou, otsu_threshold

    rng, = _spawn_rngs(seed, 1)
    sampler = ViewSampler(cfg.view_policy(), rng.integers(2 ** 63))
    ious_05, ious_otsu = [], []
    evaluated = 0
    for vid in vids:
        got = 0
        for _ in range(cfg.max_resample_attempts):
            if got == views_per_vid:
                break
            cam = sampler.sample()
            raster = rasterize(mesh, cam)
            (px, py), visible = project_click(mesh, cam, int(vid), raster=raster)
            if not visible or not raster.coverage[py, px]:
                continue
            prompt = PromptPixel(x=px, y=py, sign=POSITIVE)
            mask = teacher.segment(mesh, cam, [prompt], raster=raster)
            clicks = ClickSet.of([int(vid)], [])
            active = _active_rows(raster, mesh.faces, [int(vid)])
            Fa = F[active]
            local = _local_clicks(clicks, active)
            G = interactive_attention(Fa, local, dec_params)
            field = decode(Fa, G, dec_params, dec_cfg)
            p_full = np.zeros((mesh.n, 1), dtype=F.dtype)
            p_full[active, 0] = field.p
            img = shade_attributes(raster, p_full, mesh.faces)[:, :, 0]
            cov = raster.coverage
            pred = img[cov]
            target = mask[cov]
            ious_05.append(iou(pred > 0.5, target))
            thr, degenerate = otsu_threshold(pred)
            ious_otsu.append(iou(pred > (0.5 if degenerate else thr), target))
            got += 1
        evaluated += got
    return {
        "mean_iou": float(np.mean(ious_05)) if ious_05 else 0.0,
        "mean_iou_otsu": float(np.mean(ious_otsu)) if ious_otsu else 0.0,
        "per_view_iou": [float(x) for x in ious_05],
        "views_evaluated": evaluated,
        "clicks": len(list(vids)),
    }
