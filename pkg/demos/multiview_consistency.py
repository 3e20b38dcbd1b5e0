"""Why distill into 3D at all? Per-view 2D masks contradict each other.

A 2D teacher segments each rendered view independently, so the same
surface point can be inside the mask in one view and outside in another.
A per-vertex probability field cannot contradict itself: every view reads
the same number off the surface. This demo constructs a concrete
counterexample for the teacher and shows the consistency check passing
for any vertex field.

Run:  python demos/multiview_consistency.py
"""

import numpy as np

from meshseg.evaluation import consistency_check, consistency_check_images
from meshseg.geometry import POSITIVE
from meshseg.rasterizer import Camera, project_click, rasterize
from meshseg.shapes import icosphere
from meshseg.teacher import PromptPixel, SyntheticTeacher

# ---------------------------------------------------------------------------
# 1. Two cameras 45 degrees apart on the orbit, both seeing vertex 15.
# ---------------------------------------------------------------------------
mesh = icosphere(3)
teacher = SyntheticTeacher(d=16)
cam_a = Camera(azimuth=0.9, elevation=0.25, radius=2.5, width=64, height=64)
cam_b = Camera(azimuth=0.9 + np.deg2rad(45.0), elevation=0.25, radius=2.5,
               width=64, height=64)
vid = 15

# ---------------------------------------------------------------------------
# 2. Ask the teacher for a mask around the SAME surface point from each
# view. The prompts are the projections of one vertex, so a consistent
# segmenter would select the same surface region twice.
# ---------------------------------------------------------------------------
masks = []
for cam in (cam_a, cam_b):
    raster = rasterize(mesh, cam)
    (px, py), visible = project_click(mesh, cam, vid, raster=raster)
    assert visible, "chosen vertex must be visible from both cameras"
    mask = teacher.segment(mesh, cam, [PromptPixel(x=px, y=py, sign=POSITIVE)],
                           raster=raster)
    masks.append(mask.astype(np.float64))
    print(f"view at azimuth {cam.azimuth:.2f}: mask covers "
          f"{int(mask.sum())} pixels")

# ---------------------------------------------------------------------------
# 3. Read both masks back onto the shared surface. consistency_check_images
# projects every vertex into every view where it is visible and compares
# the values it reads; any vertex that is selected in one view but not in
# the other fails the check.
# ---------------------------------------------------------------------------
teacher_ok = consistency_check_images(mesh, masks, [cam_a, cam_b])
print(f"teacher per-view masks consistent: {teacher_ok}   <- the 2D failure mode")

# ---------------------------------------------------------------------------
# 4. Any per-vertex field passes by construction: every view reads the same
# stored value back through exact barycentric interpolation, so even a
# random field agrees with itself across cameras.
# ---------------------------------------------------------------------------
rng = np.random.default_rng(1)
field = rng.uniform(size=mesh.n)
field_ok = consistency_check(mesh, field, [cam_a, cam_b])
print(f"vertex-field reads consistent:     {field_ok}   <- 3D by construction")
