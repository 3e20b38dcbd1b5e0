"""Turn a render bundle into a teacher dataset directory.

The input is the segmentation engine's ``render-views`` bundle: a
``bundle.json`` manifest plus one color PNG per view with prompt pixel
lists.  Each view's image is embedded by a backend, the coarse feature grid
is bilinearly resized to the render resolution, and one mask per prompt set
is produced with the smallest-scale policy.  The output directory is the
engine's teacher dataset format, written through its public dataset writer
so it replays through the file-backed teacher without translation.
"""

import dataclasses
import json
import os

import numpy as np

from meshseg import Camera, PromptPixel, TeacherSample, save_dataset

from .backends import ExportError
from .resize import bilinear_resize

BUNDLE_MANIFEST = "bundle.json"
EXPORT_MANIFEST = "export_manifest.json"
BUNDLE_VERSION = 1
BUNDLE_KIND = "render-bundle"


@dataclasses.dataclass
class ExportManifest:
    """Record of one export run, written next to the dataset manifest."""

    bundle: str
    model: str
    width: int
    height: int
    feature_dim: int
    feature_grid: list
    views: int
    scale_policy: str = "smallest"
    resize: str = "bilinear"

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @staticmethod
    def from_dict(d: dict) -> "ExportManifest":
        fields = {f.name for f in dataclasses.fields(ExportManifest)}
        return ExportManifest(**{k: d[k] for k in fields})


def load_bundle(bundle_dir: str) -> dict:
    """Read and structurally check a render bundle manifest."""
    path = os.path.join(bundle_dir, BUNDLE_MANIFEST)
    if not os.path.isfile(path):
        raise ExportError(f"no {BUNDLE_MANIFEST} in {bundle_dir}")
    with open(path) as fh:
        bundle = json.load(fh)
    if bundle.get("version") != BUNDLE_VERSION:
        raise ExportError(f"unsupported bundle version {bundle.get('version')!r}")
    if bundle.get("kind") != BUNDLE_KIND:
        raise ExportError(f"not a render bundle: kind={bundle.get('kind')!r}")
    for key in ("width", "height", "views"):
        if key not in bundle:
            raise ExportError(f"bundle manifest missing {key!r}")
    return bundle


def _read_image(bundle_dir: str, view: dict, width: int, height: int) -> np.ndarray:
    from meshseg import read_png

    path = os.path.join(bundle_dir, view["image_file"])
    if not os.path.isfile(path):
        raise ExportError(f"view {view['view_id']}: missing image {view['image_file']}")
    img = read_png(path)
    if img.ndim == 2:
        img = np.repeat(img[:, :, None], 3, axis=2)
    if img.shape[0] != height or img.shape[1] != width:
        raise ExportError(
            f"view {view['view_id']}: image is {img.shape[1]}x{img.shape[0]}, "
            f"bundle says {width}x{height}")
    return img


def export(bundle_dir: str, out_dir: str, backend) -> ExportManifest:
    """Export every view of a bundle to a teacher dataset under out_dir.

    Returns the export manifest, which is also written to
    ``out_dir/export_manifest.json``.  An empty bundle yields a valid empty
    dataset.
    """
    bundle = load_bundle(bundle_dir)
    width, height = int(bundle["width"]), int(bundle["height"])

    samples = []
    grid_shape = None
    for view in bundle["views"]:
        cam = Camera.from_dict(view["camera"])
        if (cam.width, cam.height) != (width, height):
            raise ExportError(
                f"view {view['view_id']}: camera size {cam.width}x{cam.height} "
                f"does not match bundle {width}x{height}")
        img = _read_image(bundle_dir, view, width, height)
        prompts = [PromptPixel(p["x"], p["y"], p["sign"]) for p in view["prompts"]]

        grid = np.asarray(backend.embed(img))
        if grid.ndim != 3 or grid.shape[2] != backend.feature_dim:
            raise ExportError(
                f"backend returned grid shape {grid.shape}, expected "
                f"(gh, gw, {backend.feature_dim})")
        grid_shape = [int(grid.shape[0]), int(grid.shape[1])]
        features = bilinear_resize(grid, height, width).astype(np.float32)

        mask = np.asarray(backend.masks(img, prompts), dtype=bool)
        samples.append(TeacherSample(view_id=view["view_id"], camera=cam,
                                     prompts=prompts, mask=mask,
                                     features=features))

    save_dataset(out_dir, samples, feature_dim=backend.feature_dim)
    manifest = ExportManifest(
        bundle=os.path.abspath(bundle_dir), model=backend.name,
        width=width, height=height, feature_dim=backend.feature_dim,
        feature_grid=grid_shape, views=len(samples))
    with open(os.path.join(out_dir, EXPORT_MANIFEST), "w") as fh:
        json.dump(manifest.to_dict(), fh, indent=1, sort_keys=True)
    return manifest
