"""Synthetic fixture meshes: tubes, bent tubes, ellipsoids, spheres.

Stand-ins for reconstructed organ geometry; resolution is a parameter.
All generators wind triangles so face normals point away from the local
centerline (outward through the wall).
"""

from __future__ import annotations

import numpy as np

from .mesh import CenterlineSegment, TriMesh


def _ring_grid_triangles(n_rings: int, n_sectors: int, closed: bool = True):
    """Triangulate a (rings x sectors) cylindrical grid."""
    tris = []
    for i in range(n_rings - 1):
        for j in range(n_sectors):
            jn = (j + 1) % n_sectors
            if not closed and jn == 0:
                continue
            a = i * n_sectors + j
            b = i * n_sectors + jn
            c = (i + 1) * n_sectors + jn
            d = (i + 1) * n_sectors + j
            tris.append((a, b, c))
            tris.append((a, c, d))
    return np.asarray(tris, dtype=np.int64)


def tube(radius=0.01, length=0.5, n_rings=100, n_sectors=16) -> TriMesh:
    """Open straight tube along +z, from z=0 to z=length."""
    z = np.linspace(0.0, length, n_rings)
    theta = np.arange(n_sectors) * (2.0 * np.pi / n_sectors)
    zz, tt = np.meshgrid(z, theta, indexing="ij")
    verts = np.column_stack([
        radius * np.cos(tt).ravel(),
        radius * np.sin(tt).ravel(),
        zz.ravel(),
    ])
    return TriMesh(verts, _ring_grid_triangles(n_rings, n_sectors))


def tube_segments(length=0.5, n_rings=100, n_sectors=16,
                  n_segments=4) -> list[CenterlineSegment]:
    """Split a straight tube's rings into consecutive centerline segments."""
    ring_z = np.linspace(0.0, length, n_rings)
    edges = np.linspace(0, n_rings, n_segments + 1).astype(int)
    segs = []
    for k in range(n_segments):
        ring_ids = np.arange(edges[k], edges[k + 1])
        vertex_ids = (ring_ids[:, None] * n_sectors + np.arange(n_sectors)[None, :]).ravel()
        z0 = ring_z[edges[k]]
        z1 = ring_z[edges[k + 1] - 1] if k == n_segments - 1 else ring_z[edges[k + 1]]
        segs.append(CenterlineSegment(np.array([0.0, 0.0, z0]),
                                      np.array([0.0, 0.0, z1]), vertex_ids))
    return segs


def bent_tube(radius=0.01, bend_radius=0.08, bend_angle=np.pi / 2,
              n_rings=50, n_sectors=20) -> TriMesh:
    """Tube whose centerline is a circular arc in the xz-plane.

    Starts at the origin heading +z and turns toward +x.
    """
    phis = np.linspace(0.0, bend_angle, n_rings)
    theta = np.arange(n_sectors) * (2.0 * np.pi / n_sectors)
    center = np.array([bend_radius, 0.0, 0.0])
    verts = np.empty((n_rings * n_sectors, 3))
    for i, phi in enumerate(phis):
        c = center + bend_radius * np.array([-np.cos(phi), 0.0, np.sin(phi)])
        u = (c - center) / bend_radius  # radial, in-plane
        v = np.array([0.0, 1.0, 0.0])
        ring = c[None, :] + radius * (np.cos(theta)[:, None] * u[None, :]
                                      + np.sin(theta)[:, None] * v[None, :])
        verts[i * n_sectors:(i + 1) * n_sectors] = ring
    return TriMesh(verts, _ring_grid_triangles(n_rings, n_sectors))


def bent_tube_centerline(bend_radius=0.08, bend_angle=np.pi / 2, n=50) -> np.ndarray:
    phis = np.linspace(0.0, bend_angle, n)
    center = np.array([bend_radius, 0.0, 0.0])
    return center[None, :] + bend_radius * np.column_stack(
        [-np.cos(phis), np.zeros(n), np.sin(phis)])


def uv_sphere(radius=1.0, n_lat=16, n_lon=24) -> TriMesh:
    """Closed UV sphere centered at the origin, outward winding."""
    verts = [np.array([0.0, 0.0, radius])]
    for i in range(1, n_lat):
        polar = np.pi * i / n_lat
        for j in range(n_lon):
            az = 2.0 * np.pi * j / n_lon
            verts.append(radius * np.array([
                np.sin(polar) * np.cos(az),
                np.sin(polar) * np.sin(az),
                np.cos(polar),
            ]))
    verts.append(np.array([0.0, 0.0, -radius]))
    verts = np.asarray(verts)
    south = len(verts) - 1

    def rid(i, j):
        return 1 + (i - 1) * n_lon + (j % n_lon)

    tris = []
    for j in range(n_lon):
        tris.append((0, rid(1, j), rid(1, j + 1)))
    for i in range(1, n_lat - 1):
        for j in range(n_lon):
            a, b = rid(i, j), rid(i, j + 1)
            c, d = rid(i + 1, j + 1), rid(i + 1, j)
            tris.append((a, d, c))
            tris.append((a, c, b))
    for j in range(n_lon):
        tris.append((south, rid(n_lat - 1, j + 1), rid(n_lat - 1, j)))
    return TriMesh(verts, np.asarray(tris, dtype=np.int64))


def ellipsoid(a=0.06, b=0.04, c=0.09, n_lat=16, n_lon=24) -> TriMesh:
    """Stomach-like closed ellipsoid (semi-axes a, b, c)."""
    sphere = uv_sphere(1.0, n_lat, n_lon)
    verts = sphere.vertices * np.array([a, b, c])
    return TriMesh(verts, sphere.triangles)


def unit_tetrahedron() -> TriMesh:
    """Regular tetrahedron with unit edge length, centroid at origin."""
    verts = np.array([
        [1.0, 1.0, 1.0],
        [1.0, -1.0, -1.0],
        [-1.0, 1.0, -1.0],
        [-1.0, -1.0, 1.0],
    ]) / np.sqrt(8.0)
    tris = np.array([[0, 1, 2], [0, 3, 1], [0, 2, 3], [1, 3, 2]], dtype=np.int64)
    return TriMesh(verts, tris)
