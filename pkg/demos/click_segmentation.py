"""Full pipeline: distill, simulate clicks, train the decoder, query.

Stage 2 trains a click-conditioned attention head on top of the frozen
feature field. Positive and negative clicks select vertex features as
attention keys/values; the decoder turns the attended context plus each
vertex's own feature into a selection probability. Supervision comes from
the teacher's prompt-conditioned 2D masks, rendered through the same
differentiable shader as stage 1.

Run:  python demos/click_segmentation.py           (about a minute)
"""

import numpy as np

from meshseg.checkpoint import Checkpoint
from meshseg.decoder import DecoderConfig
from meshseg.encoder import EncoderConfig
from meshseg.evaluation import binarize, iou, otsu_threshold
from meshseg.geometry import ClickSet
from meshseg.model import Model
from meshseg.shapes import icosphere
from meshseg.teacher import SyntheticTeacher
from meshseg.training import (TrainConfig, distill_encoder,
                              generate_click_dataset, train_decoder)

# ---------------------------------------------------------------------------
# 1. Small two-stage training run on a sphere.
# ---------------------------------------------------------------------------
mesh = icosphere(2)
enc_cfg = EncoderConfig(pe_frequencies=8, hidden_dim=64, layers=4, out_dim=32)
dec_cfg = DecoderConfig(feature_dim=32, mlp_layers=4, hidden_dim=64)
cfg = TrainConfig(image_size=48, views_per_epoch=24, stage1_epochs=8,
                  stage2_epochs=14, train_vertex_fraction=0.06,
                  views_per_click=6, heldout_views=6, seed=0)
teacher = SyntheticTeacher(d=enc_cfg.out_dim)

enc_params, enc_cfg, s1 = distill_encoder(mesh, cfg, teacher, enc_cfg=enc_cfg)
print(f"stage 1: held-out ratio {s1['heldout_ratio']:.4f} "
      f"in {s1['seconds']:.1f}s")

# Click records pair a simulated click with teacher masks from the views
# where the clicked vertex is actually visible.
records, samples, rasters, gsum = generate_click_dataset(mesh, cfg, teacher)
print(f"click dataset: {len(records)} records over "
      f"{len(gsum['train_vertices'])} train vertices, {len(samples)} samples")

dec_params, dec_cfg, s2 = train_decoder(mesh, enc_params, enc_cfg, records,
                                        samples, cfg, dec_cfg=dec_cfg,
                                        raster_cache=rasters)
print(f"stage 2: final loss {s2['epoch_losses'][-1]:.4f} "
      f"in {s2['seconds']:.1f}s")

# ---------------------------------------------------------------------------
# 2. Wrap the two checkpoints into a queryable model.
# ---------------------------------------------------------------------------
ckpt = Checkpoint(stage="decoder", seed=cfg.seed, mesh_hash=mesh.content_hash(),
                  enc_cfg=enc_cfg, enc_params=enc_params,
                  dec_cfg=dec_cfg, dec_params=dec_params)
model = Model(mesh, ckpt)
print(f"model id: {model.model_id}")

# ---------------------------------------------------------------------------
# 3. Query with a single positive click. The answer is a full per-vertex
# probability field; Otsu's threshold turns it into a hard selection.
# ---------------------------------------------------------------------------
click_vertex = 17
p = model.predict(ClickSet.of([click_vertex])).p
thr, degenerate = otsu_threshold(p)
selected = binarize(p)
print(f"single click at vertex {click_vertex}: "
      f"{int(selected.sum())}/{mesh.n} vertices selected "
      f"(otsu threshold {thr:.3f})")

# ---------------------------------------------------------------------------
# 4. Refine with a negative click inside the selection: the region should
# shrink and pull away from the rejected vertex.
# ---------------------------------------------------------------------------
inside = np.flatnonzero(selected)
far_inside = inside[np.argmax(
    np.linalg.norm(mesh.vertices[inside] - mesh.vertices[click_vertex], axis=1))]
p2 = model.predict(ClickSet.of([click_vertex], [int(far_inside)])).p
sel2 = binarize(p2)
print(f"added negative click at vertex {int(far_inside)}: "
      f"{int(sel2.sum())} vertices remain "
      f"(p at negative click {p2[far_inside]:.3f}, was {p[far_inside]:.3f})")

# ---------------------------------------------------------------------------
# 5. How sharp is the field? Count vertices stuck in the ambiguous middle
# band; a well-trained decoder leaves very few.
# ---------------------------------------------------------------------------
mid = float(((p >= 0.25) & (p <= 0.75)).mean())
print(f"ambiguous probability band [0.25, 0.75]: {100 * mid:.1f}% of vertices")

# ---------------------------------------------------------------------------
# 6. Agreement with the teacher on a fresh view: render the selection and
# compare against the teacher's mask for the matching pixel prompt.
# ---------------------------------------------------------------------------
from meshseg.rasterizer import Camera, project_click, rasterize, shade_attributes
from meshseg.teacher import PromptPixel
from meshseg.geometry import POSITIVE

# A vertex can pass the visibility test yet floor to a silhouette pixel the
# rasterizer left uncovered, so scan angles for a clean on-coverage hit.
probe = None
for elevation in (0.35, 0.7, 1.0):
    for azimuth in (0.4, 0.9, 1.4, 1.9, 2.4, 2.9):
        cam = Camera(azimuth=azimuth, elevation=elevation, radius=2.5,
                     width=48, height=48)
        raster = rasterize(mesh, cam)
        (px, py), visible = project_click(mesh, cam, click_vertex, raster=raster)
        if visible and raster.coverage[py, px]:
            probe = (cam, raster, px, py)
            break
    if probe is not None:
        break
if probe is not None:
    cam, raster, px, py = probe
    mask_teacher = teacher.segment(mesh, cam,
                                   [PromptPixel(x=px, y=py, sign=POSITIVE)],
                                   raster=raster)
    # Render the same selection shown in step 3: shade the probabilities and
    # cut at the Otsu threshold that produced it.
    shaded = shade_attributes(raster, p[:, None], mesh.faces)[:, :, 0]
    mask_model = (shaded > thr) & raster.coverage
    print(f"rendered-mask IoU vs teacher on a fresh view "
          f"(azimuth {cam.azimuth}, elevation {cam.elevation}): "
          f"{iou(mask_model, mask_teacher):.3f} "
          f"(toy-size run; the full recipe trains far longer)")
else:
    print("clicked vertex not cleanly visible from any probe view; skipping IoU probe")
