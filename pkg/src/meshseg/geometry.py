"""Triangle mesh container, OBJ I/O, normalization and adjacency.

The mesh is the substrate everything else operates on: vertices are
normalized into the unit bounding sphere, normals are recomputed as
area-weighted face-normal averages, and the one-ring adjacency drives
both neighbor queries and the stability evaluation.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np


class MeshError(Exception):
    """Invalid mesh input (parse failure, empty mesh, bad indices)."""


POSITIVE = "positive"
NEGATIVE = "negative"


@dataclass(frozen=True)
class Click:
    vertex: int
    sign: str  # POSITIVE or NEGATIVE

    def __post_init__(self):
        if self.sign not in (POSITIVE, NEGATIVE):
            raise ValueError(f"click sign must be positive/negative, got {self.sign!r}")


@dataclass(frozen=True)
class ClickSet:
    """User prompt state: distinct vertex ids, at least one positive."""

    entries: tuple[Click, ...]

    def __post_init__(self):
        ids = [c.vertex for c in self.entries]
        if len(set(ids)) != len(ids):
            raise ValueError("click vertex indices must be distinct")
        if not any(c.sign == POSITIVE for c in self.entries):
            raise ValueError("click set needs at least one positive click")

    def validate_against(self, n: int) -> None:
        for c in self.entries:
            if not (0 <= c.vertex < n):
                raise IndexError(f"click vertex {c.vertex} out of range [0, {n})")

    @property
    def positive(self) -> list[int]:
        return [c.vertex for c in self.entries if c.sign == POSITIVE]

    @property
    def negative(self) -> list[int]:
        return [c.vertex for c in self.entries if c.sign == NEGATIVE]

    @staticmethod
    def of(positive, negative=()) -> "ClickSet":
        pos = tuple(Click(int(v), POSITIVE) for v in positive)
        neg = tuple(Click(int(v), NEGATIVE) for v in negative)
        return ClickSet(pos + neg)


@dataclass
class Mesh:
    """Normalized triangle mesh.

    vertices: (n, 3) float64, centroid at origin, max norm 1.
    faces: (m, 3) int64 vertex indices.
    vertex_normals: (n, 3) float64 unit vectors.
    one_ring: per-vertex sorted arrays of edge-adjacent vertex ids.
    """

    vertices: np.ndarray
    faces: np.ndarray
    vertex_normals: np.ndarray = field(default=None)
    one_ring: list = field(default=None)

    def __post_init__(self):
        self.vertices = np.ascontiguousarray(self.vertices, dtype=np.float64)
        self.faces = np.ascontiguousarray(self.faces, dtype=np.int64)
        if self.vertices.ndim != 2 or self.vertices.shape[1] != 3:
            raise MeshError("vertices must be (n, 3)")
        if self.faces.ndim != 2 or self.faces.shape[1] != 3:
            raise MeshError("faces must be (m, 3)")
        n = len(self.vertices)
        if n == 0:
            raise MeshError("empty mesh: no vertices")
        if len(self.faces) == 0:
            raise MeshError("empty mesh: no faces")
        if self.faces.min() < 0 or self.faces.max() >= n:
            raise MeshError("face index out of range")
        if self.vertex_normals is None:
            self.vertex_normals = vertex_normals(self.vertices, self.faces)
        if self.one_ring is None:
            self.one_ring = one_ring_from_faces(len(self.vertices), self.faces)

    @property
    def n(self) -> int:
        return len(self.vertices)

    @property
    def m(self) -> int:
        return len(self.faces)

    def content_hash(self) -> str:
        import hashlib

        h = hashlib.sha256()
        h.update(np.ascontiguousarray(self.vertices).tobytes())
        h.update(np.ascontiguousarray(self.faces).tobytes())
        return h.hexdigest()


def normalize_vertices(vertices: np.ndarray) -> np.ndarray:
    """Translate centroid to origin and scale into the unit bounding sphere."""
    v = np.asarray(vertices, dtype=np.float64)
    v = v - v.mean(axis=0)
    r = np.linalg.norm(v, axis=1).max()
    if r == 0.0:
        raise MeshError("degenerate mesh: all vertices coincide")
    return v / r


def face_area_normals(vertices: np.ndarray, faces: np.ndarray) -> np.ndarray:
    """Per-face normal scaled by twice the face area (cross product)."""
    a = vertices[faces[:, 0]]
    b = vertices[faces[:, 1]]
    c = vertices[faces[:, 2]]
    return np.cross(b - a, c - a)


def vertex_normals(vertices: np.ndarray, faces: np.ndarray) -> np.ndarray:
    """Area-weighted average of incident face normals, unit length."""
    fn = face_area_normals(vertices, faces)
    vn = np.zeros_like(vertices)
    for k in range(3):
        np.add.at(vn, faces[:, k], fn)
    norms = np.linalg.norm(vn, axis=1, keepdims=True)
    # Isolated or perfectly canceling vertices fall back to an arbitrary axis.
    bad = norms[:, 0] < 1e-300
    vn[bad] = (0.0, 0.0, 1.0)
    norms[bad] = 1.0
    return vn / norms


def one_ring_from_faces(n: int, faces: np.ndarray) -> list:
    """Edge adjacency from the face list; symmetric by construction."""
    neighbors = [set() for _ in range(n)]
    for a, b, c in faces:
        neighbors[a].update((b, c))
        neighbors[b].update((a, c))
        neighbors[c].update((a, b))
    return [np.array(sorted(s), dtype=np.int64) for s in neighbors]


def one_ring_neighbors(mesh: Mesh, vid: int) -> set:
    """Vertices sharing an edge with vid, excluding vid itself."""
    if not (0 <= vid < mesh.n):
        raise IndexError(f"vertex id {vid} out of range [0, {mesh.n})")
    return set(int(j) for j in mesh.one_ring[vid])


def sample_training_vertices(mesh: Mesh, fraction: float, seed: int) -> np.ndarray:
    """Uniform sample without replacement of max(1, round(fraction*n)) vertices."""
    if not (0.0 < fraction <= 1.0):
        raise ValueError(f"fraction must be in (0, 1], got {fraction}")
    k = max(1, int(round(fraction * mesh.n)))
    rng = np.random.default_rng(seed)
    return np.sort(rng.choice(mesh.n, size=k, replace=False))


def _clean_faces(faces: list, vertices: np.ndarray) -> np.ndarray:
    """Drop faces with repeated indices or zero geometric area."""
    out = []
    for f in faces:
        a, b, c = f
        if a == b or b == c or a == c:
            continue
        area2 = np.linalg.norm(
            np.cross(vertices[b] - vertices[a], vertices[c] - vertices[a])
        )
        if area2 == 0.0:
            continue
        out.append(f)
    return np.array(out, dtype=np.int64).reshape(-1, 3)


def load_obj(path) -> Mesh:
    """Parse an ASCII OBJ (v/f records), fan-triangulate polygons, normalize.

    Vertex and face order follow the file. Texture and normal records are
    ignored; normals are recomputed. Duplicate vertices are kept so click
    indices always match the file's vertex ids.
    """
    raw_vertices = []
    raw_faces = []
    with open(path, "r") as fh:
        for lineno, line in enumerate(fh, start=1):
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue
            parts = stripped.split()
            tag = parts[0]
            try:
                if tag == "v":
                    if len(parts) < 4:
                        raise ValueError("vertex record needs 3 coordinates")
                    raw_vertices.append([float(x) for x in parts[1:4]])
                elif tag == "f":
                    if len(parts) < 4:
                        raise ValueError("face record needs at least 3 indices")
                    idx = []
                    for token in parts[1:]:
                        vi = int(token.split("/")[0])
                        # OBJ indices are 1-based; negative indexes count back.
                        idx.append(vi - 1 if vi > 0 else len(raw_vertices) + vi)
                    for k in range(1, len(idx) - 1):
                        raw_faces.append((idx[0], idx[k], idx[k + 1]))
            except ValueError as e:
                raise MeshError(f"{path}:{lineno}: cannot parse {tag!r} record: {e}")
    if not raw_vertices:
        raise MeshError(f"{path}: empty mesh (no vertices)")
    vertices = normalize_vertices(np.array(raw_vertices, dtype=np.float64))
    for a, b, c in raw_faces:
        if not all(0 <= i < len(vertices) for i in (a, b, c)):
            raise MeshError(f"{path}: face index out of range")
    faces = _clean_faces(raw_faces, vertices)
    if len(faces) == 0:
        raise MeshError(f"{path}: empty mesh (no faces)")
    return Mesh(vertices=vertices, faces=faces)


def save_obj(mesh: Mesh, path) -> None:
    with open(path, "w") as fh:
        for v in mesh.vertices:
            fh.write(f"v {v[0]:.9f} {v[1]:.9f} {v[2]:.9f}\n")
        for f in mesh.faces:
            fh.write(f"f {f[0] + 1} {f[1] + 1} {f[2] + 1}\n")


def export_selection(mesh: Mesh, probabilities: np.ndarray, selected: np.ndarray,
                     ply_path, sidecar_path) -> None:
    """Write the binarized selection as ASCII PLY (blue = selected) with a
    JSON probability sidecar keyed by vertex index."""
    p = np.asarray(probabilities, dtype=np.float64)
    sel = np.asarray(selected, dtype=bool)
    if len(p) != mesh.n or len(sel) != mesh.n:
        raise ValueError("probability/selection length must equal vertex count")
    with open(ply_path, "w") as fh:
        fh.write("ply\nformat ascii 1.0\n")
        fh.write(f"element vertex {mesh.n}\n")
        fh.write("property float x\nproperty float y\nproperty float z\n")
        fh.write("property uchar red\nproperty uchar green\nproperty uchar blue\n")
        fh.write(f"element face {mesh.m}\n")
        fh.write("property list uchar int vertex_indices\n")
        fh.write("end_header\n")
        for v, s in zip(mesh.vertices, sel):
            r, g, b = (40, 90, 235) if s else (200, 200, 200)
            fh.write(f"{v[0]:.6f} {v[1]:.6f} {v[2]:.6f} {r} {g} {b}\n")
        for f in mesh.faces:
            fh.write(f"3 {f[0]} {f[1]} {f[2]}\n")
    sidecar = {str(i): float(p[i]) for i in range(mesh.n)}
    with open(sidecar_path, "w") as fh:
        json.dump(sidecar, fh)
