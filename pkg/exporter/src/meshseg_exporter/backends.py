"""Image-embedding and mask backends for the exporter.

Two backends share one interface: ``embed(image)`` returns a coarse
``(gh, gw, feature_dim)`` float32 grid and ``masks(image, prompts)`` returns
one boolean mask per image.  ``StubBackend`` is fully deterministic and has
no model weights, so exports are reproducible in tests and on machines
without a GPU.  ``SamBackend`` wraps a locally installed Segment Anything
model and is imported lazily so the package works without the optional
heavy dependencies.
"""

import os

import numpy as np

from meshseg import NEGATIVE, POSITIVE


class ExportError(RuntimeError):
    """Raised for unusable bundles, missing weights, or size mismatches."""


def smallest_mask(candidates: list) -> np.ndarray:
    """Return the candidate mask with the fewest set pixels (ties: first)."""
    if not candidates:
        raise ExportError("backend produced no mask candidates")
    areas = [int(np.count_nonzero(c)) for c in candidates]
    return candidates[int(np.argmin(areas))]


def _luminance(image: np.ndarray) -> np.ndarray:
    """Mean-channel luminance in [0, 1] from an 8-bit image."""
    arr = np.asarray(image)
    if arr.ndim == 2:
        arr = arr[:, :, None]
    return arr[:, :, :3].astype(np.float64).mean(axis=2) / 255.0


class StubBackend:
    """Deterministic weight-free backend.

    Features are sinusoids of luminance and normalized grid position with
    fixed pseudo-random coefficients, evaluated on a coarse grid like a real
    image encoder's patch embedding.  Masks grow from the positive prompts:
    pixels within a radius whose luminance is close to the prompts' mean,
    excluding the white background, with small disks carved out around
    negative prompts.  Three nested radius scales are generated and the
    smallest-area candidate is kept, mirroring the scale policy used with
    the real model.
    """

    name = "stub"

    def __init__(self, feature_dim: int = 256, grid: int = 64,
                 radius_frac: float = 0.15, tol: float = 0.08):
        if feature_dim < 1 or grid < 1:
            raise ExportError("feature_dim and grid must be positive")
        self.feature_dim = feature_dim
        self.grid = grid
        self.radius_frac = radius_frac
        self.tol = tol
        rng = np.random.default_rng(2026)
        self._coef = rng.uniform(-3.0, 3.0, size=(3, feature_dim))
        self._phase = rng.uniform(0.0, 2.0 * np.pi, size=feature_dim)

    def embed(self, image: np.ndarray) -> np.ndarray:
        lum = _luminance(image)
        h, w = lum.shape
        ys = ((np.arange(self.grid) + 0.5) * (h / self.grid) - 0.5)
        xs = ((np.arange(self.grid) + 0.5) * (w / self.grid) - 0.5)
        yi = np.clip(np.round(ys), 0, h - 1).astype(np.intp)
        xi = np.clip(np.round(xs), 0, w - 1).astype(np.intp)
        lum_g = lum[yi[:, None], xi[None, :]]
        gy, gx = np.meshgrid(np.linspace(0.0, 1.0, self.grid),
                             np.linspace(0.0, 1.0, self.grid), indexing="ij")
        basis = np.stack([lum_g, gx, gy], axis=2)
        return np.sin(basis @ self._coef + self._phase).astype(np.float32)

    def masks(self, image: np.ndarray, prompts: list) -> np.ndarray:
        lum = _luminance(image)
        h, w = lum.shape
        pos = [(p.y, p.x) for p in prompts if p.sign == POSITIVE]
        neg = [(p.y, p.x) for p in prompts if p.sign == NEGATIVE]
        if not pos:
            raise ExportError("mask prompts need at least one positive click")

        # White (1.0) is the renderer's background; saturated surface pixels
        # lose out too, except prompt pixels which are re-added below.
        interior = lum < 1.0
        ref = float(np.mean([lum[y, x] for y, x in pos]))
        yy, xx = np.mgrid[0:h, 0:w]
        d_pos = np.min(np.stack([np.hypot(yy - y, xx - x) for y, x in pos]), axis=0)
        base = interior & (np.abs(lum - ref) <= self.tol)
        if neg:
            d_neg = np.min(np.stack([np.hypot(yy - y, xx - x) for y, x in neg]), axis=0)

        radius = max(3.0, self.radius_frac * min(h, w))
        candidates = []
        for scale in (1.0, 1.5, 2.0):
            m = base & (d_pos <= radius * scale)
            if neg:
                m &= d_neg > max(2.0, 0.4 * radius)
            for y, x in pos:
                m[y, x] = True
            candidates.append(m)
        return smallest_mask(candidates)


class SamBackend:
    """Segment Anything wrapper; needs the optional ``[sam]`` extra installed.

    The ViT image encoder's 64x64x256 embedding grid is returned as-is from
    ``embed``; the exporter handles resizing.  ``masks`` feeds all prompts as
    labeled points, requests the multi-scale outputs, and keeps the
    smallest-area mask.
    """

    feature_dim = 256

    def __init__(self, checkpoint: str, model_type: str = "vit_h",
                 device: str = "cpu"):
        try:
            import torch  # noqa: F401
            from segment_anything import SamPredictor, sam_model_registry
        except ImportError as exc:
            raise ExportError(
                "the 'sam' backend needs torch and segment-anything installed "
                "(pip install 'meshseg-exporter[sam]')") from exc
        if not checkpoint or not os.path.isfile(checkpoint):
            raise ExportError(f"model weights not found: {checkpoint!r}")
        model = sam_model_registry[model_type](checkpoint=checkpoint)
        model.to(device)
        self._predictor = SamPredictor(model)
        self._cached = None
        self.name = f"sam-{model_type}"

    def _set_image(self, image: np.ndarray) -> None:
        if self._cached is not image:
            self._predictor.set_image(np.ascontiguousarray(image[:, :, :3]))
            self._cached = image

    def embed(self, image: np.ndarray) -> np.ndarray:
        self._set_image(image)
        emb = self._predictor.get_image_embedding()[0]
        return emb.detach().cpu().numpy().transpose(1, 2, 0).astype(np.float32)

    def masks(self, image: np.ndarray, prompts: list) -> np.ndarray:
        if not any(p.sign == POSITIVE for p in prompts):
            raise ExportError("mask prompts need at least one positive click")
        self._set_image(image)
        coords = np.array([[p.x, p.y] for p in prompts], dtype=np.float64)
        labels = np.array([1 if p.sign == POSITIVE else 0 for p in prompts])
        out, _, _ = self._predictor.predict(
            point_coords=coords, point_labels=labels, multimask_output=True)
        return smallest_mask([m.astype(bool) for m in out])


def load_backend(name: str, **options):
    """Build a backend by name: ``stub`` or ``sam``."""
    if name == "stub":
        allowed = {k: v for k, v in options.items()
                   if k in ("feature_dim", "grid", "radius_frac", "tol")}
        return StubBackend(**allowed)
    if name == "sam":
        return SamBackend(checkpoint=options.get("checkpoint"),
                          model_type=options.get("model_type", "vit_h"),
                          device=options.get("device", "cpu"))
    raise ExportError(f"unknown backend {name!r} (expected 'stub' or 'sam')")
