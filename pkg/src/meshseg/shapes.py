"""Procedural test meshes: icosphere, torus, waisted peanut, grid patch.

These are the desk-scale shapes used by the demos and the acceptance
runs (icosphere n=642 at subdivision 3, non-convex peanut ~2k vertices,
torus for stress cases).
"""

from __future__ import annotations

import numpy as np

from .geometry import Mesh, normalize_vertices


def icosahedron() -> tuple[np.ndarray, np.ndarray]:
    t = (1.0 + np.sqrt(5.0)) / 2.0
    verts = np.array(
        [
            (-1, t, 0), (1, t, 0), (-1, -t, 0), (1, -t, 0),
            (0, -1, t), (0, 1, t), (0, -1, -t), (0, 1, -t),
            (t, 0, -1), (t, 0, 1), (-t, 0, -1), (-t, 0, 1),
        ],
        dtype=np.float64,
    )
    verts /= np.linalg.norm(verts, axis=1, keepdims=True)
    faces = np.array(
        [
            (0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11),
            (1, 5, 9), (5, 11, 4), (11, 10, 2), (10, 7, 6), (7, 1, 8),
            (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8), (3, 8, 9),
            (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1),
        ],
        dtype=np.int64,
    )
    return verts, faces


def icosphere(subdivisions: int = 3) -> Mesh:
    """Subdivided icosahedron projected to the unit sphere.

    Vertex count follows 10 * 4**s + 2 (642 at s=3).
    """
    verts, faces = icosahedron()
    verts = list(map(tuple, verts))
    midpoint_cache = {}

    def midpoint(i, j):
        key = (min(i, j), max(i, j))
        if key in midpoint_cache:
            return midpoint_cache[key]
        p = np.array(verts[i]) + np.array(verts[j])
        p /= np.linalg.norm(p)
        verts.append(tuple(p))
        midpoint_cache[key] = len(verts) - 1
        return midpoint_cache[key]

    for _ in range(subdivisions):
        new_faces = []
        for a, b, c in faces:
            ab, bc, ca = midpoint(a, b), midpoint(b, c), midpoint(c, a)
            new_faces += [(a, ab, ca), (b, bc, ab), (c, ca, bc), (ab, bc, ca)]
        faces = np.array(new_faces, dtype=np.int64)
    v = np.array(verts, dtype=np.float64)
    # Already centered on the origin with unit radius; normalize anyway so the
    # mesh invariants hold exactly.
    return Mesh(vertices=normalize_vertices(v), faces=faces)


def torus(major_segments: int = 48, minor_segments: int = 42,
          major_radius: float = 0.7, minor_radius: float = 0.32) -> Mesh:
    """Closed torus grid; non-convex with self-occlusion at low elevations."""
    us = np.arange(major_segments) / major_segments * 2 * np.pi
    vs = np.arange(minor_segments) / minor_segments * 2 * np.pi
    uu, vv = np.meshgrid(us, vs, indexing="ij")
    x = (major_radius + minor_radius * np.cos(vv)) * np.cos(uu)
    y = minor_radius * np.sin(vv)
    z = (major_radius + minor_radius * np.cos(vv)) * np.sin(uu)
    verts = np.stack([x, y, z], axis=-1).reshape(-1, 3)

    def vid(i, j):
        return (i % major_segments) * minor_segments + (j % minor_segments)

    faces = []
    for i in range(major_segments):
        for j in range(minor_segments):
            a, b = vid(i, j), vid(i + 1, j)
            c, d = vid(i + 1, j + 1), vid(i, j + 1)
            faces.append((a, b, c))
            faces.append((a, c, d))
    return Mesh(vertices=normalize_vertices(verts),
                faces=np.array(faces, dtype=np.int64))


def peanut(nlat: int = 46, nlon: int = 45, waist: float = 0.45) -> Mesh:
    """Surface of revolution with a concave equatorial waist (radius profile
    1 - waist * sin^2(latitude)): non-convex for waist > 1/3, with gentle
    curvature so self-occlusion stays mild.

    Vertex count is (nlat - 1) * nlon + 2 (2027 at the defaults).
    """
    lats = np.pi * np.arange(1, nlat) / nlat  # open interval, poles added apart
    lons = 2 * np.pi * np.arange(nlon) / nlon
    tt, pp = np.meshgrid(lats, lons, indexing="ij")
    d = np.stack([np.sin(tt) * np.cos(pp), np.cos(tt), np.sin(tt) * np.sin(pp)],
                 axis=-1).reshape(-1, 3)
    d = np.concatenate([[(0.0, 1.0, 0.0)], d, [(0.0, -1.0, 0.0)]], axis=0)
    theta = np.arccos(np.clip(d[:, 1], -1.0, 1.0))
    r = 1.0 - waist * np.sin(theta) ** 2
    verts = d * r[:, None]

    def vid(i, j):
        return 1 + i * nlon + (j % nlon)

    faces = []
    for j in range(nlon):  # pole fans
        faces.append((0, vid(0, j + 1), vid(0, j)))
        faces.append((len(verts) - 1, vid(nlat - 2, j), vid(nlat - 2, j + 1)))
    for i in range(nlat - 2):
        for j in range(nlon):
            a, b = vid(i, j), vid(i, j + 1)
            c, d2 = vid(i + 1, j + 1), vid(i + 1, j)
            faces.append((a, b, c))
            faces.append((a, c, d2))
    return Mesh(vertices=normalize_vertices(verts),
                faces=np.array(faces, dtype=np.int64))


def grid_patch(rows: int = 5, cols: int = 5) -> Mesh:
    """Flat triangulated grid in the xy plane; interior vertices have
    valence 6 under the diagonal split used here."""
    xs = np.linspace(-1.0, 1.0, cols)
    ys = np.linspace(-1.0, 1.0, rows)
    xx, yy = np.meshgrid(xs, ys, indexing="ij")
    verts = np.stack([xx, yy, np.zeros_like(xx)], axis=-1).reshape(-1, 3)

    def vid(i, j):
        return i * rows + j

    faces = []
    for i in range(cols - 1):
        for j in range(rows - 1):
            a, b, c, d = vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1)
            faces.append((a, b, c))
            faces.append((a, c, d))
    return Mesh(vertices=normalize_vertices(verts),
                faces=np.array(faces, dtype=np.int64))
