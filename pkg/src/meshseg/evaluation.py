"""Metrics and baselines: IoU, Otsu binarization, one-ring click
stability, multi-view fusion, view-consistency checks, and cross-shape
conditioning.

The consistency pair of checks operationalizes the core structural
claim: a per-vertex field gives every view the same answer at a shared
surface point, while independently produced per-view masks do not have
to agree anywhere.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .decoder import DecoderConfig, ProbabilityField, decode
from .geometry import ClickSet, Mesh, one_ring_neighbors
from .numerics import ParamStore, attention_forward
from .rasterizer import (BACKGROUND, Camera, ViewPolicy, ViewSampler, project_click,
                         project_vertices, rasterize, visible_vertices)
from .teacher import PromptPixel
from .geometry import POSITIVE


def iou(a: np.ndarray, b: np.ndarray) -> float:
    """Intersection over union of boolean masks; two empty masks agree."""
    a = np.asarray(a, dtype=bool)
    b = np.asarray(b, dtype=bool)
    if a.shape != b.shape:
        raise ValueError("mask shapes differ")
    union = (a | b).sum()
    if union == 0:
        return 1.0
    return float((a & b).sum() / union)


def otsu_threshold(p: np.ndarray, bins: int = 256):
    """Histogram threshold maximizing between-class variance.

    Candidate thresholds are the interior bin edges; class means use the
    exact data sums per bin, so the result matches a direct exhaustive
    search over the same edges. Ties break toward the lower edge.
    Returns (threshold, degenerate); a constant field returns itself with
    the degenerate flag set. Selection is p > threshold.
    """
    p = np.asarray(p, dtype=np.float64).ravel()
    if p.size < 2:
        raise ValueError("need at least 2 values")
    lo, hi = float(p.min()), float(p.max())
    if lo == hi:
        return lo, True
    counts, edges = np.histogram(p, bins=bins, range=(lo, hi))
    sums, _ = np.histogram(p, bins=bins, range=(lo, hi), weights=p)
    c0 = np.cumsum(counts)[:-1].astype(np.float64)
    s0 = np.cumsum(sums)[:-1]
    total_c, total_s = float(p.size), float(p.sum())
    c1 = total_c - c0
    valid = (c0 > 0) & (c1 > 0)
    mu0 = np.divide(s0, c0, out=np.zeros_like(s0), where=c0 > 0)
    mu1 = np.divide(total_s - s0, c1, out=np.zeros_like(s0), where=c1 > 0)
    between = c0 * c1 * (mu0 - mu1) ** 2
    between[~valid] = -np.inf
    k = int(np.argmax(between))  # first maximum = lowest edge on ties
    return float(edges[k + 1]), False


def binarize(p: np.ndarray) -> np.ndarray:
    """Otsu selection with the 0.5 fallback for degenerate fields."""
    thr, degenerate = otsu_threshold(p)
    return p > (0.5 if degenerate else thr)


@dataclass
class StabilityReport:
    per_click: list
    mean_iou: float
    click_count: int
    method: str

    def to_dict(self) -> dict:
        return {
            "per_click": [float(x) for x in self.per_click],
            "mean_iou": float(self.mean_iou),
            "click_count": int(self.click_count),
            "method": self.method,
        }


def stability_eval(mesh: Mesh, predict, clicks, method: str = "engine") -> StabilityReport:
    """One-ring click stability: how much the selection moves when the
    click hops to an edge-adjacent vertex.

    predict maps a ClickSet to a per-vertex probability vector; per click
    the report holds the mean IoU of its mask against each one-ring
    neighbor's mask, both Otsu-binarized.
    """
    masks = {}

    def mask_for(vid: int) -> np.ndarray:
        if vid not in masks:
            p = np.asarray(predict(ClickSet.of([vid])))
            masks[vid] = binarize(p)
        return masks[vid]

    per_click = []
    for vid in clicks:
        vid = int(vid)
        base = mask_for(vid)
        ring = sorted(one_ring_neighbors(mesh, vid))
        if not ring:
            continue
        vals = [iou(base, mask_for(j)) for j in ring]
        per_click.append(float(np.mean(vals)))
    mean = float(np.mean(per_click)) if per_click else 0.0
    return StabilityReport(per_click=per_click, mean_iou=mean,
                           click_count=len(per_click), method=method)


def fusion_baseline(mesh: Mesh, teacher, click: int, cams, rasters=None) -> ProbabilityField:
    """Multi-view 2D masking averaged per vertex by visibility count.

    For every view where the click is visible (and lands on coverage), a
    single-positive teacher mask is back-projected: each visible vertex
    receives the mask value at its own projected pixel. The per-vertex
    probability is received-sum / times-seen; never-seen vertices are 0.
    """
    if rasters is None:
        rasters = [rasterize(mesh, cam) for cam in cams]
    sums = np.zeros(mesh.n)
    seen = np.zeros(mesh.n, dtype=np.int64)
    used = 0
    for cam, raster in zip(cams, rasters):
        (px, py), visible = project_click(mesh, cam, int(click), raster=raster)
        if not visible or not raster.coverage[py, px]:
            continue
        mask = teacher.segment(mesh, cam, [PromptPixel(x=px, y=py, sign=POSITIVE)],
                               raster=raster)
        vis = visible_vertices(mesh, cam, raster)
        screen, _ = project_vertices(mesh.vertices, cam)
        cols = np.floor(screen[vis, 0]).astype(np.int64)
        rows = np.floor(screen[vis, 1]).astype(np.int64)
        sums[vis] += mask[rows, cols]
        seen[vis] += 1
        used += 1
    if used == 0:
        raise ValueError(f"click vertex {click} is never visible in the view pool")
    p = np.divide(sums, seen, out=np.zeros(mesh.n), where=seen > 0)
    return ProbabilityField(p=p)


def _exact_bary_read(mesh: Mesh, p: np.ndarray, cam: Camera, raster) -> tuple:
    """Evaluate the rendered field at each visible vertex's exact projected
    position, via the covering face's barycentrics. Only faces containing
    the vertex are read (anything else means an occluder owns the pixel).
    Returns (values, readable) over all vertices."""
    screen, _ = project_vertices(mesh.vertices, cam)
    vis = visible_vertices(mesh, cam, raster)
    values = np.zeros(mesh.n)
    readable = np.zeros(mesh.n, dtype=bool)
    for v in np.where(vis)[0]:
        col = int(np.floor(screen[v, 0]))
        row = int(np.floor(screen[v, 1]))
        fid = raster.face_id[row, col]
        if fid == BACKGROUND:
            continue
        corners = mesh.faces[fid]
        if v not in corners:
            continue
        x0, y0 = screen[corners[0]]
        x1, y1 = screen[corners[1]]
        x2, y2 = screen[corners[2]]
        area = (x1 - x0) * (y2 - y0) - (y1 - y0) * (x2 - x0)
        if area == 0.0:
            continue
        px, py = screen[v]
        w0 = (x2 - x1) * (py - y1) - (y2 - y1) * (px - x1)
        w1 = (x0 - x2) * (py - y2) - (y0 - y2) * (px - x2)
        b0 = w0 / area
        b1 = w1 / area
        b2 = 1.0 - b0 - b1
        values[v] = b0 * p[corners[0]] + b1 * p[corners[1]] + b2 * p[corners[2]]
        readable[v] = True
    return values, readable


def _spread_consistent(readings, tol: float) -> bool:
    """readings: list of (values, readable) pairs over the same vertices."""
    if not readings:
        return True
    values = np.stack([r[0] for r in readings])
    readable = np.stack([r[1] for r in readings])
    counts = readable.sum(axis=0)
    multi = counts >= 2
    if not multi.any():
        return True
    lo = np.where(readable, values, np.inf).min(axis=0)
    hi = np.where(readable, values, -np.inf).max(axis=0)
    return bool(((hi - lo)[multi] <= tol).all())


def consistency_check(mesh: Mesh, p: np.ndarray, views, tol: float = 1e-4) -> bool:
    """True iff every vertex visible in two or more views reads back the
    same rendered probability at its projection (within interpolation
    tolerance). Holds structurally for any single per-vertex field."""
    p = np.asarray(p, dtype=np.float64)
    readings = []
    for cam in views:
        raster = rasterize(mesh, cam)
        readings.append(_exact_bary_read(mesh, p, cam, raster))
    return _spread_consistent(readings, tol)


def consistency_check_images(mesh: Mesh, images, views, tol: float = 1e-4) -> bool:
    """The same agreement test applied to independently produced per-view
    images (nearest-pixel read). Teacher masks are allowed to fail this."""
    readings = []
    for img, cam in zip(images, views):
        raster = rasterize(mesh, cam)
        screen, _ = project_vertices(mesh.vertices, cam)
        vis = visible_vertices(mesh, cam, raster)
        values = np.zeros(mesh.n)
        readable = np.zeros(mesh.n, dtype=bool)
        idx = np.where(vis)[0]
        cols = np.floor(screen[idx, 0]).astype(np.int64)
        rows = np.floor(screen[idx, 1]).astype(np.int64)
        covered = raster.coverage[rows, cols]
        idx, cols, rows = idx[covered], cols[covered], rows[covered]
        values[idx] = np.asarray(img, dtype=np.float64)[rows, cols]
        readable[idx] = True
        readings.append((values, readable))
    return _spread_consistent(readings, tol)


def cross_domain_segment(src_field, src_clicks: ClickSet, tgt_mesh: Mesh, tgt_field,
                         tgt_params: ParamStore,
                         tgt_cfg: DecoderConfig | None = None) -> ProbabilityField:
    """Condition the target decoder on clicked feature rows from another
    shape: keys/values come from the source field (projected by the
    target's click matrices), queries from the target field."""
    F_src = getattr(src_field, "F", src_field)
    F_tgt = getattr(tgt_field, "F", tgt_field)
    if F_src.shape[1] != F_tgt.shape[1]:
        raise ValueError("source and target feature dims differ")
    if F_tgt.shape[0] != tgt_mesh.n:
        raise ValueError("target field does not match target mesh")
    src_clicks.validate_against(F_src.shape[0])
    if tgt_cfg is None:
        tgt_cfg = DecoderConfig(feature_dim=F_tgt.shape[1])
    pos = list(src_clicks.positive)
    neg = list(src_clicks.negative)
    Q = F_tgt @ tgt_params["att.W_Q"]
    K_parts = [F_src[pos] @ tgt_params["att.W_K_pos"]]
    V_parts = [F_src[pos] @ tgt_params["att.W_V_pos"]]
    if neg:
        K_parts.append(F_src[neg] @ tgt_params["att.W_K_neg"])
        V_parts.append(F_src[neg] @ tgt_params["att.W_V_neg"])
    K = np.concatenate(K_parts, axis=0)
    V = np.concatenate(V_parts, axis=0)
    G, _ = attention_forward(Q, K, V)
    return decode(F_tgt, G, tgt_params, tgt_cfg)
