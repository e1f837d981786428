"""Deterministic synthetic assets so a session or benchmark runs with zero
data downloads: a ~100k-vertex head-shaped surface and a simple coil mesh
for the browser console.

Real anatomy is never redistributed here; the head stands in for subject
meshes wherever one is needed.
"""

from __future__ import annotations

import numpy as np

from .engine import CoilParams
from .volio import SurfaceMesh

# Scene convention: the coil sits at the origin with +z pointing into the
# head, so the head center sits on the +z axis with its crown ~15 mm from
# the coil plane (a scalp-plus-hair standoff).
HEAD_CENTER = (0.0, 0.0, 105.0)
HEAD_SEMI_AXES = (70.0, 85.0, 90.0)


def generate_head_mesh(n_azimuth: int = 360, n_rings: int = 280,
                       center=HEAD_CENTER, semi_axes=HEAD_SEMI_AXES,
                       bump: float = 0.02) -> SurfaceMesh:
    """Closed head-ish ellipsoid with smooth deterministic surface bumps.

    Default tessellation gives n_azimuth * n_rings + 2 = 100,802 vertices
    (two pole vertices), comfortably past the 100k mark a realistic
    cortical mesh carries.
    """
    az = 2.0 * np.pi * np.arange(n_azimuth) / n_azimuth
    pol = np.pi * (np.arange(n_rings) + 1) / (n_rings + 1)
    theta, phi = np.meshgrid(az, pol, indexing="ij")  # (n_azimuth, n_rings)

    wobble = (1.0
              + bump * np.sin(3.0 * theta) * np.sin(4.0 * phi)
              + 0.6 * bump * np.cos(5.0 * theta + 1.0) * np.sin(2.0 * phi))
    sx, sy, sz = semi_axes
    x = sx * wobble * np.sin(phi) * np.cos(theta)
    y = sy * wobble * np.sin(phi) * np.sin(theta)
    # crown (phi=0) faces -z so it points toward the coil plane at z=0
    z = -sz * wobble * np.cos(phi)

    ring_pts = np.stack([x, y, z], axis=-1).reshape(-1, 3)
    poles = np.array([[0.0, 0.0, -sz], [0.0, 0.0, sz]])
    vertices = np.vstack([poles, ring_pts]) + np.asarray(center, dtype=np.float64)

    def vid(a, r):
        return 2 + (a % n_azimuth) * n_rings + r

    tris = []
    for a in range(n_azimuth):
        b = a + 1
        tris.append((0, vid(a, 0), vid(b, 0)))
        tris.append((1, vid(b, n_rings - 1), vid(a, n_rings - 1)))
        for r in range(n_rings - 1):
            v00, v01 = vid(a, r), vid(a, r + 1)
            v10, v11 = vid(b, r), vid(b, r + 1)
            tris.append((v00, v01, v11))
            tris.append((v00, v11, v10))
    return SurfaceMesh(vertices=vertices, triangles=np.array(tris, dtype=np.int64))


def generate_coil_mesh(params: CoilParams | None = None,
                       segments: int = 48) -> SurfaceMesh:
    """Flat figure-8 display mesh: two annular wings plus a handle slab
    along +y. Purely for visualization; the physics model lives in
    navfield.engine."""
    params = params or CoilParams()
    r_out = params.wing_radius
    r_in = 0.55 * params.wing_radius
    half = params.wing_separation / 2.0

    verts: list[tuple[float, float, float]] = []
    tris: list[tuple[int, int, int]] = []

    def annulus(cx: float):
        base = len(verts)
        ang = 2.0 * np.pi * np.arange(segments) / segments
        for a in ang:
            verts.append((cx + r_in * np.cos(a), r_in * np.sin(a), 0.0))
            verts.append((cx + r_out * np.cos(a), r_out * np.sin(a), 0.0))
        for s in range(segments):
            i0 = base + 2 * s
            o0 = i0 + 1
            i1 = base + 2 * ((s + 1) % segments)
            o1 = i1 + 1
            tris.append((i0, o0, o1))
            tris.append((i0, o1, i1))

    annulus(-half)
    annulus(half)

    # handle: thin box from the junction along +y
    hw, hl, hz = 12.0, 90.0, 6.0
    base = len(verts)
    for zz in (0.0, hz):
        verts.extend([(-hw, 0.0, zz), (hw, 0.0, zz),
                      (hw, hl, zz), (-hw, hl, zz)])
    quads = [(0, 1, 2, 3), (7, 6, 5, 4), (0, 4, 5, 1),
             (1, 5, 6, 2), (2, 6, 7, 3), (3, 7, 4, 0)]
    for a, b, c, d in quads:
        tris.append((base + a, base + b, base + c))
        tris.append((base + a, base + c, base + d))

    return SurfaceMesh(vertices=np.array(verts, dtype=np.float64),
                       triangles=np.array(tris, dtype=np.int64))
