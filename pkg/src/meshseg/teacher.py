"""2D supervision oracles: procedural (synthetic) and file-backed.

The synthetic teacher plays the role of a pretrained 2D segmentation
model: per view it emits a 256-channel feature image and, given prompt
pixels, a binary mask grown by flood fill over the covered pixels. The
masks are intentionally view-dependent (the fill cannot cross occlusion
boundaries or leave the frame), which reproduces the central training
condition of noisy, view-inconsistent 2D supervision. The file-backed
teacher serves the same interface from an exported dataset directory.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field as dataclass_field

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .geometry import Mesh, NEGATIVE, POSITIVE
from .rasterizer import (Camera, RasterOutput, pixel_normals, rasterize,
                         read_mffi, read_pgm, shade_attributes, write_mffi,
                         write_pgm)


class TeacherError(Exception):
    pass


@dataclass(frozen=True)
class PromptPixel:
    """A prompt at pixel (x=column, y=row) with a click sign."""

    x: int
    y: int
    sign: str

    def __post_init__(self):
        if self.sign not in (POSITIVE, NEGATIVE):
            raise TeacherError(f"bad prompt sign {self.sign!r}")

    def to_dict(self) -> dict:
        return {"x": int(self.x), "y": int(self.y), "sign": self.sign}

    @staticmethod
    def from_dict(d: dict) -> "PromptPixel":
        return PromptPixel(x=int(d["x"]), y=int(d["y"]), sign=str(d["sign"]))


def prompt_key(prompts) -> tuple:
    """Canonical order-independent key for a prompt multiset."""
    return tuple(sorted((p.x, p.y, p.sign) for p in prompts))


@dataclass
class TeacherSample:
    """One supervised view: camera, prompts, mask, optional features."""

    view_id: str
    camera: Camera
    prompts: list
    mask: np.ndarray
    features: np.ndarray | None = None

    def __post_init__(self):
        h, w = self.mask.shape
        if (h, w) != (self.camera.height, self.camera.width):
            raise TeacherError("mask dims do not match camera")
        if not any(p.sign == POSITIVE for p in self.prompts):
            raise TeacherError("sample needs at least one positive prompt")
        for p in self.prompts:
            if not (0 <= p.x < w and 0 <= p.y < h):
                raise TeacherError("prompt outside image bounds")


class SyntheticTeacher:
    """Deterministic procedural stand-in for the 2D foundation model.

    Features: per covered pixel, tanh(A @ [normal, depth, world_pos] + b)
    followed by one 3x3 box blur over covered pixels. A and b are fixed
    pseudo-random constants from the seed; the depth column of A is
    scaled down since depth is the only view-dependent input channel.

    Masks: flood fill from each prompt over covered pixels, 4-adjacency,
    restricted to pixels whose normal is within angle_deg of the prompt
    pixel's normal and to steps with a small depth change. Positive
    regions are unioned, negative regions subtracted.
    """

    def __init__(self, d: int = 256, seed: int = 2024,
                 normal_scale: float = 0.3, depth_scale: float = 0.1,
                 pos_scale: float = 0.3, angle_deg: float = 30.0,
                 depth_step_frac: float = 0.05):
        rng = np.random.default_rng(seed)
        A = rng.standard_normal((d, 7))
        A[:, 0:3] *= normal_scale
        A[:, 3] *= depth_scale
        A[:, 4:7] *= pos_scale
        self.A = A
        self.b = rng.uniform(-0.1, 0.1, size=d)
        self.d = d
        self.cos_thr = np.cos(np.deg2rad(angle_deg))
        self.depth_step_frac = depth_step_frac

    def embed(self, mesh: Mesh, cam: Camera,
              raster: RasterOutput | None = None) -> np.ndarray:
        if raster is None:
            raster = rasterize(mesh, cam)
        cov = raster.coverage
        normals = pixel_normals(mesh, raster)
        world = shade_attributes(raster, mesh.vertices, mesh.faces)
        k = int(cov.sum())
        feats = np.zeros((cov.shape[0], cov.shape[1], self.d))
        if k == 0:
            return feats
        x = np.concatenate(
            [normals[cov], raster.depth[cov][:, None], world[cov]], axis=1)
        feats[cov] = np.tanh(x @ self.A.T + self.b)
        return _box_blur_covered(feats, cov)

    def segment(self, mesh: Mesh, cam: Camera, prompts,
                raster: RasterOutput | None = None) -> np.ndarray:
        if raster is None:
            raster = rasterize(mesh, cam)
        if not any(p.sign == POSITIVE for p in prompts):
            raise TeacherError("need at least one positive prompt")
        cov = raster.coverage
        normals = pixel_normals(mesh, raster)
        depth_thr = self.depth_step_frac * cam.radius
        mask = np.zeros(cov.shape, dtype=bool)
        cut = np.zeros(cov.shape, dtype=bool)
        for p in prompts:
            region = self._region(cov, normals, raster.depth, p, depth_thr)
            if p.sign == POSITIVE:
                mask |= region
            else:
                cut |= region
        return mask & ~cut & cov

    def _region(self, cov, normals, depth, prompt: PromptPixel, depth_thr):
        if not cov[prompt.y, prompt.x]:
            raise TeacherError(f"prompt ({prompt.x},{prompt.y}) is off coverage")
        n_ref = normals[prompt.y, prompt.x]
        eligible = cov & ((normals @ n_ref) > self.cos_thr)
        return _flood_fill(eligible, depth, prompt.x, prompt.y, depth_thr)


def _box_blur_covered(feats: np.ndarray, cov: np.ndarray) -> np.ndarray:
    """3x3 mean over covered pixels only; background stays zero."""
    h, w, d = feats.shape
    acc = np.zeros((h + 2, w + 2, d), dtype=feats.dtype)
    cnt = np.zeros((h + 2, w + 2), dtype=np.int64)
    covf = feats * cov[:, :, None]
    for dy in range(3):
        for dx in range(3):
            acc[dy:dy + h, dx:dx + w] += covf
            cnt[dy:dy + h, dx:dx + w] += cov
    acc = acc[1:1 + h, 1:1 + w]
    cnt = cnt[1:1 + h, 1:1 + w]
    out = np.zeros_like(feats)
    out[cov] = acc[cov] / cnt[cov, None]
    return out


def _flood_fill(eligible: np.ndarray, depth: np.ndarray, x: int, y: int,
                depth_thr: float) -> np.ndarray:
    """Connected component of (x, y) in the 4-adjacency graph on eligible
    pixels, with edges only where the depth step is below the threshold."""
    h, w = eligible.shape
    idx = np.full((h, w), -1, dtype=np.int64)
    k = int(eligible.sum())
    idx[eligible] = np.arange(k)
    # Background depth is NaN; zero it out so the subtraction below stays
    # finite (such pairs are already excluded by the eligibility mask).
    depth = np.where(eligible, depth, 0.0)
    rows, cols = [], []
    right = eligible[:, :-1] & eligible[:, 1:] & \
        (np.abs(depth[:, :-1] - depth[:, 1:]) < depth_thr)
    down = eligible[:-1, :] & eligible[1:, :] & \
        (np.abs(depth[:-1, :] - depth[1:, :]) < depth_thr)
    rows.append(idx[:, :-1][right])
    cols.append(idx[:, 1:][right])
    rows.append(idx[:-1, :][down])
    cols.append(idx[1:, :][down])
    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    graph = coo_matrix((np.ones(len(rows)), (rows, cols)), shape=(k, k))
    _, labels = connected_components(graph, directed=False)
    mask = np.zeros((h, w), dtype=bool)
    mask[eligible] = labels == labels[idx[y, x]]
    return mask


# --- dataset directory format ---------------------------------------------------

DATASET_VERSION = 1


def save_dataset(root, samples, feature_dim: int) -> None:
    """Write manifest.json plus per-sample mask (PGM) and feature (MFFI) files.

    Samples sharing a view_id share one feature file; feature-less samples
    set feature_file null.
    """
    os.makedirs(os.path.join(root, "masks"), exist_ok=True)
    os.makedirs(os.path.join(root, "features"), exist_ok=True)
    if samples:
        cam0 = samples[0].camera
        width, height = cam0.width, cam0.height
    else:
        width = height = 0
    manifest = {
        "version": DATASET_VERSION,
        "kind": "teacher-dataset",
        "width": width,
        "height": height,
        "feature_dim": feature_dim,
        "samples": [],
    }
    written_features = {}
    for i, s in enumerate(samples):
        if (s.camera.width, s.camera.height) != (width, height):
            raise TeacherError("all samples must share one image size")
        mask_file = f"masks/{i:05d}.pgm"
        write_pgm(os.path.join(root, mask_file), s.mask)
        feature_file = None
        if s.features is not None:
            if s.view_id in written_features:
                feature_file = written_features[s.view_id]
            else:
                feature_file = f"features/{s.view_id}.mffi"
                write_mffi(os.path.join(root, feature_file), s.features)
                written_features[s.view_id] = feature_file
        manifest["samples"].append({
            "view_id": s.view_id,
            "camera": s.camera.to_dict(),
            "prompts": [p.to_dict() for p in s.prompts],
            "mask_file": mask_file,
            "feature_file": feature_file,
        })
    with open(os.path.join(root, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=1, sort_keys=True)


def load_dataset(root) -> list:
    """Read a dataset directory back into TeacherSamples (features lazy-free:
    loaded eagerly here; they are small at desk scale)."""
    with open(os.path.join(root, "manifest.json")) as fh:
        manifest = json.load(fh)
    if manifest.get("version") != DATASET_VERSION:
        raise TeacherError(f"unsupported dataset version {manifest.get('version')!r}")
    samples = []
    feature_cache = {}
    for rec in manifest["samples"]:
        mask = read_pgm(os.path.join(root, rec["mask_file"])) > 127
        features = None
        if rec.get("feature_file"):
            f = rec["feature_file"]
            if f not in feature_cache:
                feature_cache[f] = read_mffi(os.path.join(root, f))
            features = feature_cache[f]
        samples.append(TeacherSample(
            view_id=rec["view_id"],
            camera=Camera.from_dict(rec["camera"]),
            prompts=[PromptPixel.from_dict(p) for p in rec["prompts"]],
            mask=mask,
            features=features,
        ))
    return samples


class FileTeacher:
    """Teacher backed by an exported dataset directory.

    Features are keyed by view id; masks by (view id, prompt multiset),
    so prompt listing order never misses the cache.
    """

    def __init__(self, root):
        self.root = root
        self.samples = load_dataset(root)
        self._features = {}
        self._masks = {}
        for s in self.samples:
            if s.features is not None and s.view_id not in self._features:
                self._features[s.view_id] = s.features
            self._masks[(s.view_id, prompt_key(s.prompts))] = s.mask

    def embed(self, view_id: str) -> np.ndarray:
        if view_id not in self._features:
            raise TeacherError(f"no stored features for view {view_id!r}")
        return self._features[view_id]

    def segment(self, view_id: str, prompts) -> np.ndarray:
        key = (view_id, prompt_key(prompts))
        if key not in self._masks:
            raise TeacherError(f"no stored mask for view {view_id!r} with these prompts")
        return self._masks[key]


def validate_dataset(root, mesh: Mesh | None = None,
                     teacher: SyntheticTeacher | None = None) -> list:
    """Replay validation; returns a list of error strings (empty = pass).

    Structural checks always run: schema fields, image dims, feature
    channel count, prompt bounds, prompt signs. With a mesh, each view is
    re-rendered to check prompts land on coverage and masks stay inside
    coverage. With a synthetic teacher too, masks must regenerate
    bit-identically from the stored camera and prompts.
    """
    errors = []
    try:
        with open(os.path.join(root, "manifest.json")) as fh:
            manifest = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        return [f"manifest unreadable: {exc}"]
    for key in ("version", "width", "height", "feature_dim", "samples"):
        if key not in manifest:
            errors.append(f"manifest missing field {key!r}")
    if errors:
        return errors
    d = manifest["feature_dim"]
    try:
        samples = load_dataset(root)
    except (TeacherError, OSError, ValueError, KeyError) as exc:
        return [f"dataset unreadable: {exc}"]
    for i, s in enumerate(samples):
        tag = f"sample {i} (view {s.view_id})"
        if s.mask.shape != (manifest["height"], manifest["width"]):
            errors.append(f"{tag}: mask dims {s.mask.shape} do not match manifest")
            continue
        if s.features is not None and s.features.shape[2] != d:
            errors.append(f"{tag}: feature channels {s.features.shape[2]} != {d}")
        if not any(p.sign == POSITIVE for p in s.prompts):
            errors.append(f"{tag}: no positive prompt")
        if mesh is None:
            continue
        raster = rasterize(mesh, s.camera)
        cov = raster.coverage
        for p in s.prompts:
            if not cov[p.y, p.x]:
                errors.append(f"{tag}: prompt ({p.x},{p.y}) off coverage")
        if (s.mask & ~cov).any():
            errors.append(f"{tag}: mask extends outside coverage")
        pos = [p for p in s.prompts if p.sign == POSITIVE]
        if pos and not any(s.mask[p.y, p.x] for p in pos):
            errors.append(f"{tag}: no positive prompt inside mask")
        if teacher is not None:
            replay = teacher.segment(mesh, s.camera, s.prompts, raster=raster)
            if not np.array_equal(replay, s.mask):
                errors.append(f"{tag}: mask does not replay bit-identically")
            if s.features is not None:
                ref = teacher.embed(mesh, s.camera, raster=raster).astype(np.float32)
                if not np.array_equal(ref, s.features):
                    errors.append(f"{tag}: features do not replay")
    return errors
