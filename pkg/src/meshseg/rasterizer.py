"""Deterministic z-buffered triangle rasterizer with attribute gradients.

Geometry is fixed: gradients flow only through per-vertex attributes
(barycentric weights are constants of the raster), which is all the
distillation and decoder losses need. Faces are processed in index
order with a strict depth test, so exact depth ties resolve to the
lower face index and identical inputs give bit-identical output.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .geometry import Mesh

BACKGROUND = -1


@dataclass(frozen=True)
class Camera:
    """Orbit camera looking at the origin, up +y."""

    azimuth: float
    elevation: float
    radius: float = 2.5
    fov_y: float = np.pi / 3.0
    width: int = 224
    height: int = 224

    def __post_init__(self):
        if self.radius <= 1.0:
            raise ValueError("camera radius must exceed the unit mesh sphere")
        if not (0.0 < self.fov_y < np.pi):
            raise ValueError("fov_y must be in (0, pi)")

    def eye(self) -> np.ndarray:
        ce = np.cos(self.elevation)
        return self.radius * np.array(
            [ce * np.cos(self.azimuth), np.sin(self.elevation), ce * np.sin(self.azimuth)]
        )

    def basis(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        eye = self.eye()
        forward = -eye / np.linalg.norm(eye)
        up = np.array([0.0, 1.0, 0.0])
        if abs(forward @ up) > 0.999999:  # pole fallback, outside default policy
            up = np.array([0.0, 0.0, 1.0])
        right = np.cross(forward, up)
        right /= np.linalg.norm(right)
        cam_up = np.cross(right, forward)
        return right, cam_up, forward

    def to_dict(self) -> dict:
        return {
            "azimuth": float(self.azimuth),
            "elevation": float(self.elevation),
            "radius": float(self.radius),
            "fov_y": float(self.fov_y),
            "width": int(self.width),
            "height": int(self.height),
        }

    @staticmethod
    def from_dict(d: dict) -> "Camera":
        return Camera(
            azimuth=float(d["azimuth"]),
            elevation=float(d["elevation"]),
            radius=float(d["radius"]),
            fov_y=float(d["fov_y"]),
            width=int(d["width"]),
            height=int(d["height"]),
        )


@dataclass
class RasterOutput:
    """Per-pixel face ids, barycentric weights and eye-space depth."""

    face_id: np.ndarray   # (h, w) int32, BACKGROUND where uncovered
    bary: np.ndarray      # (h, w, 3) float64
    depth: np.ndarray     # (h, w) float64, +inf where uncovered
    coverage: np.ndarray  # (h, w) bool


def project_vertices(vertices: np.ndarray, cam: Camera):
    """Screen coordinates (x right, y down, pixel units) and eye depth."""
    right, cam_up, forward = cam.basis()
    rel = vertices - cam.eye()
    xe = rel @ right
    ye = rel @ cam_up
    ze = rel @ forward
    f = 1.0 / np.tan(cam.fov_y / 2.0)
    aspect = cam.width / cam.height
    with np.errstate(divide="ignore", invalid="ignore"):
        ndc_x = (f / aspect) * xe / ze
        ndc_y = f * ye / ze
    sx = (ndc_x + 1.0) * 0.5 * cam.width
    sy = (1.0 - ndc_y) * 0.5 * cam.height
    return np.stack([sx, sy], axis=1), ze


def rasterize(mesh: Mesh, cam: Camera) -> RasterOutput:
    """Perspective projection, no back-face culling, nearest-depth z-buffer.

    Vectorized: all (face, pixel) candidates from clipped screen bounding
    boxes are scored in bulk and the nearest depth per pixel wins, exact
    ties to the lowest face index. Bit-identical to rasterize_reference,
    which implements the same rule as a sequential strict depth test.
    """
    h, w = cam.height, cam.width
    screen, ze = project_vertices(mesh.vertices, cam)
    face_id = np.full((h, w), BACKGROUND, dtype=np.int32)
    bary = np.zeros((h, w, 3), dtype=np.float64)
    depth = np.full((h, w), np.inf, dtype=np.float64)

    znear = 1e-6
    tz = ze[mesh.faces]
    tri = screen[mesh.faces]
    x0, y0 = tri[:, 0, 0], tri[:, 0, 1]
    x1, y1 = tri[:, 1, 0], tri[:, 1, 1]
    x2, y2 = tri[:, 2, 0], tri[:, 2, 1]
    area = (x1 - x0) * (y2 - y0) - (y1 - y0) * (x2 - x0)
    # Behind-camera faces are dropped, not clipped; zero-area faces skipped.
    fids = np.flatnonzero((tz > znear).all(axis=1) & (area != 0.0))
    if fids.size == 0:
        return RasterOutput(face_id=face_id, bary=bary, depth=depth,
                            coverage=face_id != BACKGROUND)
    x0, y0, x1, y1, x2, y2, area = (a[fids] for a in (x0, y0, x1, y1, x2, y2, area))
    za, zb, zc = tz[fids, 0], tz[fids, 1], tz[fids, 2]

    # Pixel centers sit at (col + 0.5, row + 0.5). Clip the boxes in float
    # so off-screen faces (possibly with huge coordinates) never reach the
    # integer cast; emptiness is decided after clipping, as the reference.
    cminf = np.maximum(np.floor(np.minimum(np.minimum(x0, x1), x2) - 0.5), 0.0)
    cmaxf = np.minimum(np.ceil(np.maximum(np.maximum(x0, x1), x2) - 0.5), w - 1.0)
    rminf = np.maximum(np.floor(np.minimum(np.minimum(y0, y1), y2) - 0.5), 0.0)
    rmaxf = np.minimum(np.ceil(np.maximum(np.maximum(y0, y1), y2) - 0.5), h - 1.0)
    good = (cminf <= cmaxf) & (rminf <= rmaxf)
    if not good.any():
        return RasterOutput(face_id=face_id, bary=bary, depth=depth,
                            coverage=face_id != BACKGROUND)
    fids = fids[good]
    x0, y0, x1, y1, x2, y2, area, za, zb, zc = (
        a[good] for a in (x0, y0, x1, y1, x2, y2, area, za, zb, zc))
    cmin = cminf[good].astype(np.int64)
    cmax = cmaxf[good].astype(np.int64)
    rmin = rminf[good].astype(np.int64)
    rmax = rmaxf[good].astype(np.int64)
    widths = cmax - cmin + 1
    counts = widths * (rmax - rmin + 1)

    # Chunk so the flat candidate arrays stay within a bounded footprint.
    cap = 2 << 20
    starts = np.concatenate([[0], np.cumsum(counts)[:-1]])
    cuts = np.flatnonzero(np.diff(starts // cap)) + 1
    bounds = np.concatenate([[0], cuts, [len(counts)]])
    flat_bary = bary.reshape(-1, 3)
    for lo, hi in zip(bounds[:-1], bounds[1:]):
        n = counts[lo:hi]
        total = int(n.sum())
        if total == 0:
            continue
        rep = np.repeat(np.arange(lo, hi), n)
        first = np.concatenate([[0], np.cumsum(n)[:-1]])
        k = np.arange(total) - np.repeat(first, n)
        wrep = widths[rep]
        col = cmin[rep] + k % wrep
        row = rmin[rep] + k // wrep
        pxg = col + 0.5
        pyg = row + 0.5
        x0r, y0r, x1r, y1r, x2r, y2r = (a[rep] for a in (x0, y0, x1, y1, x2, y2))
        w0 = (x2r - x1r) * (pyg - y1r) - (y2r - y1r) * (pxg - x1r)
        w1 = (x0r - x2r) * (pyg - y2r) - (y0r - y2r) * (pxg - x2r)
        ar = area[rep]
        b0 = w0 / ar
        b1 = w1 / ar
        b2 = 1.0 - b0 - b1
        inside = (b0 >= 0.0) & (b1 >= 0.0) & (b2 >= 0.0)
        if not inside.any():
            continue
        rep, col, row, b0, b1, b2 = (a[inside] for a in (rep, col, row, b0, b1, b2))
        zpix = b0 * za[rep] + b1 * zb[rep] + b2 * zc[rep]
        pid = row * w + col
        order = np.lexsort((fids[rep], zpix, pid))
        lead = np.ones(order.size, dtype=bool)
        lead[1:] = pid[order][1:] != pid[order][:-1]
        win = order[lead]
        better = zpix[win] < depth.flat[pid[win]]
        win = win[better]
        depth.flat[pid[win]] = zpix[win]
        face_id.flat[pid[win]] = fids[rep[win]].astype(np.int32)
        flat_bary[pid[win], 0] = b0[win]
        flat_bary[pid[win], 1] = b1[win]
        flat_bary[pid[win], 2] = b2[win]
    return RasterOutput(face_id=face_id, bary=bary, depth=depth,
                        coverage=face_id != BACKGROUND)


def rasterize_reference(mesh: Mesh, cam: Camera) -> RasterOutput:
    """Sequential per-face formulation of rasterize; the test oracle."""
    h, w = cam.height, cam.width
    screen, ze = project_vertices(mesh.vertices, cam)
    face_id = np.full((h, w), BACKGROUND, dtype=np.int32)
    bary = np.zeros((h, w, 3), dtype=np.float64)
    depth = np.full((h, w), np.inf, dtype=np.float64)

    znear = 1e-6
    for fi in range(len(mesh.faces)):
        ia, ib, ic = mesh.faces[fi]
        if ze[ia] <= znear or ze[ib] <= znear or ze[ic] <= znear:
            continue  # behind-camera faces are dropped, not clipped
        x0, y0 = screen[ia]
        x1, y1 = screen[ib]
        x2, y2 = screen[ic]
        area = (x1 - x0) * (y2 - y0) - (y1 - y0) * (x2 - x0)
        if area == 0.0:
            continue
        # Pixel centers sit at (col + 0.5, row + 0.5).
        cmin = max(0, int(np.floor(min(x0, x1, x2) - 0.5)))
        cmax = min(w - 1, int(np.ceil(max(x0, x1, x2) - 0.5)))
        rmin = max(0, int(np.floor(min(y0, y1, y2) - 0.5)))
        rmax = min(h - 1, int(np.ceil(max(y0, y1, y2) - 0.5)))
        if cmin > cmax or rmin > rmax:
            continue
        px = np.arange(cmin, cmax + 1) + 0.5
        py = np.arange(rmin, rmax + 1) + 0.5
        pxg, pyg = np.meshgrid(px, py)
        w0 = (x2 - x1) * (pyg - y1) - (y2 - y1) * (pxg - x1)
        w1 = (x0 - x2) * (pyg - y2) - (y0 - y2) * (pxg - x2)
        b0 = w0 / area
        b1 = w1 / area
        b2 = 1.0 - b0 - b1
        inside = (b0 >= 0.0) & (b1 >= 0.0) & (b2 >= 0.0)
        if not inside.any():
            continue
        zpix = b0 * ze[ia] + b1 * ze[ib] + b2 * ze[ic]
        tile = depth[rmin:rmax + 1, cmin:cmax + 1]
        win = inside & (zpix < tile)
        if not win.any():
            continue
        tile[win] = zpix[win]
        face_id[rmin:rmax + 1, cmin:cmax + 1][win] = fi
        btile = bary[rmin:rmax + 1, cmin:cmax + 1]
        btile[win, 0] = b0[win]
        btile[win, 1] = b1[win]
        btile[win, 2] = b2[win]
    coverage = face_id != BACKGROUND
    return RasterOutput(face_id=face_id, bary=bary, depth=depth, coverage=coverage)


def shade_attributes(raster: RasterOutput, attrs: np.ndarray, faces: np.ndarray,
                     background=None) -> np.ndarray:
    """Barycentric interpolation of per-vertex attributes into an image.

    attrs is (n, d); output is (h, w, d) in the attrs dtype with
    background pixels set to the given d-vector (zeros by default).
    """
    attrs = np.atleast_2d(attrs)
    d = attrs.shape[1]
    h, w = raster.face_id.shape
    if faces.max() >= attrs.shape[0]:
        raise ValueError("attribute rows must cover every face index")
    out = np.empty((h, w, d), dtype=attrs.dtype)
    if background is None:
        background = np.zeros(d, dtype=attrs.dtype)
    out[...] = np.asarray(background, dtype=attrs.dtype)
    cov = raster.coverage
    corners = faces[raster.face_id[cov]]          # (k, 3)
    weights = raster.bary[cov].astype(attrs.dtype)  # (k, 3)
    vals = np.einsum("kc,kcd->kd", weights, attrs[corners])
    out[cov] = vals
    return out


def shade_backward(raster: RasterOutput, faces: np.ndarray,
                   grad_image: np.ndarray, n_vertices: int) -> np.ndarray:
    """Adjoint of shade_attributes: scatter pixel gradients to vertices."""
    h, w = raster.face_id.shape
    if grad_image.shape[:2] != (h, w):
        raise ValueError("gradient image dimensions do not match raster")
    d = grad_image.shape[2]
    cov = raster.coverage
    corners = faces[raster.face_id[cov]]
    weights = raster.bary[cov].astype(grad_image.dtype)
    grads = np.zeros((n_vertices, d), dtype=grad_image.dtype)
    pix = grad_image[cov]
    for k in range(3):
        np.add.at(grads, corners[:, k], weights[:, k:k + 1] * pix)
    return grads


def render_color(mesh: Mesh, cam: Camera) -> np.ndarray:
    """Lambertian gray render with the light at the camera; white background.

    Intensity is 0.2 + 0.8 * max(0, n . l) with interpolated unit normals.
    """
    raster = rasterize(mesh, cam)
    return shade_color(mesh, cam, raster)


def shade_color(mesh: Mesh, cam: Camera, raster: RasterOutput) -> np.ndarray:
    normals = shade_attributes(raster, mesh.vertex_normals, mesh.faces)
    lengths = np.linalg.norm(normals, axis=2, keepdims=True)
    lengths[lengths == 0.0] = 1.0
    normals = normals / lengths
    light = cam.eye()
    light = light / np.linalg.norm(light)
    lambert = np.maximum(0.0, normals @ light)
    intensity = 0.2 + 0.8 * lambert
    img = np.repeat(intensity[:, :, None], 3, axis=2)
    img[~raster.coverage] = 1.0
    return img


def pixel_normals(mesh: Mesh, raster: RasterOutput) -> np.ndarray:
    """Interpolated unit vertex normals per covered pixel; zero elsewhere."""
    normals = shade_attributes(raster, mesh.vertex_normals, mesh.faces)
    lengths = np.linalg.norm(normals, axis=2, keepdims=True)
    lengths[lengths == 0.0] = 1.0
    normals = normals / lengths
    normals[~raster.coverage] = 0.0
    return normals


OFFSCREEN = (-1, -1)


def project_click(mesh: Mesh, cam: Camera, vid: int,
                  raster: RasterOutput | None = None):
    """Project vertex vid to its nearest pixel and depth-test visibility.

    Returns ((col, row), visible). Behind-camera or off-frame vertices get
    the off-screen sentinel and visible=False. The depth test allows an
    epsilon of 1e-3 * radius, so silhouette-adjacent vertices whose pixel
    rounds onto background still count as visible; callers that need a
    covered prompt pixel must check coverage separately.
    """
    if not (0 <= vid < mesh.n):
        raise IndexError(f"vertex id {vid} out of range")
    screen, ze = project_vertices(mesh.vertices, cam)
    if ze[vid] <= 1e-6:
        return OFFSCREEN, False
    col = int(np.floor(screen[vid, 0]))
    row = int(np.floor(screen[vid, 1]))
    if not (0 <= col < cam.width and 0 <= row < cam.height):
        return OFFSCREEN, False
    if raster is None:
        raster = rasterize(mesh, cam)
    visible = bool(ze[vid] <= raster.depth[row, col] + 1e-3 * cam.radius)
    return (col, row), visible


def visible_vertices(mesh: Mesh, cam: Camera, raster: RasterOutput) -> np.ndarray:
    """Vectorized project_click visibility for every vertex."""
    screen, ze = project_vertices(mesh.vertices, cam)
    cols = np.floor(screen[:, 0]).astype(np.int64)
    rows = np.floor(screen[:, 1]).astype(np.int64)
    ok = (ze > 1e-6) & (cols >= 0) & (cols < cam.width) & (rows >= 0) & (rows < cam.height)
    vis = np.zeros(mesh.n, dtype=bool)
    idx = np.where(ok)[0]
    vis[idx] = ze[idx] <= raster.depth[rows[idx], cols[idx]] + 1e-3 * cam.radius
    return vis


@dataclass(frozen=True)
class ViewPolicy:
    """Random-view distribution: uniform azimuth, bounded elevation."""

    azimuth_range: tuple = (0.0, 2.0 * np.pi)
    elevation_range: tuple = (-np.pi / 3.0, np.pi / 3.0)
    radius: float = 2.5
    fov_y: float = np.pi / 3.0
    width: int = 224
    height: int = 224


class ViewSampler:
    """Deterministic camera stream for a seed and policy."""

    def __init__(self, policy: ViewPolicy, seed: int):
        self.policy = policy
        self.rng = np.random.default_rng(seed)

    def sample(self) -> Camera:
        p = self.policy
        az = self.rng.uniform(*p.azimuth_range)
        el = self.rng.uniform(*p.elevation_range)
        return Camera(azimuth=az, elevation=el, radius=p.radius,
                      fov_y=p.fov_y, width=p.width, height=p.height)

    def take(self, count: int) -> list:
        return [self.sample() for _ in range(count)]


# --- image file formats --------------------------------------------------------


def write_png(path, image: np.ndarray) -> None:
    """8-bit PNG; float images are clamped from [0, 1]."""
    from PIL import Image

    arr = np.asarray(image)
    if arr.dtype != np.uint8:
        arr = (np.clip(arr, 0.0, 1.0) * 255.0 + 0.5).astype(np.uint8)
    if arr.ndim == 3 and arr.shape[2] == 1:
        arr = arr[:, :, 0]
    Image.fromarray(arr).save(path)


def read_png(path) -> np.ndarray:
    from PIL import Image

    return np.asarray(Image.open(path))


def write_pgm(path, image: np.ndarray) -> None:
    """Binary PGM (P5) for masks; boolean input maps to 0/255."""
    arr = np.asarray(image)
    if arr.dtype == bool:
        arr = arr.astype(np.uint8) * 255
    arr = arr.astype(np.uint8)
    with open(path, "wb") as fh:
        fh.write(f"P5\n{arr.shape[1]} {arr.shape[0]}\n255\n".encode())
        fh.write(arr.tobytes())


def read_pgm(path) -> np.ndarray:
    with open(path, "rb") as fh:
        data = fh.read()
    parts = data.split(maxsplit=4)
    if parts[0] != b"P5":
        raise ValueError(f"{path}: not a binary PGM file")
    w, h, maxval = int(parts[1]), int(parts[2]), int(parts[3])
    if maxval > 255:
        raise ValueError("16-bit PGM not supported")
    pixels = np.frombuffer(parts[4][: w * h], dtype=np.uint8)
    return pixels.reshape(h, w).copy()


MFFI_MAGIC = b"MFFI"


def write_mffi(path, image: np.ndarray) -> None:
    """Raw feature image: 16-byte header (magic, w, h, c) + f32 LE data."""
    arr = np.asarray(image, dtype=np.float32)
    if arr.ndim == 2:
        arr = arr[:, :, None]
    h, w, c = arr.shape
    with open(path, "wb") as fh:
        fh.write(MFFI_MAGIC)
        fh.write(struct.pack("<III", w, h, c))
        fh.write(arr.astype("<f4").tobytes())


def read_mffi(path) -> np.ndarray:
    with open(path, "rb") as fh:
        header = fh.read(16)
        if len(header) != 16 or header[:4] != MFFI_MAGIC:
            raise ValueError(f"{path}: not an MFFI feature image")
        w, h, c = struct.unpack("<III", header[4:])
        data = np.frombuffer(fh.read(), dtype="<f4")
    if data.size != w * h * c:
        raise ValueError(f"{path}: truncated MFFI payload")
    return data.reshape(h, w, c).copy()
