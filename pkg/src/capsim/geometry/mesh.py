"""Triangle meshes with accelerated ray and closest-point queries."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..errors import ParseError
from . import meshio
from .bvh import Bvh, closest_point_brute, ray_cast_brute

log = logging.getLogger(__name__)

_DEGENERATE_AREA = 1e-14  # m^2, squared-norm threshold on the cross product


@dataclass(frozen=True)
class RayHit:
    distance: float
    triangle_id: int
    point: np.ndarray


@dataclass(frozen=True)
class SurfacePoint:
    point: np.ndarray
    distance: float
    triangle_id: int
    normal: np.ndarray


@dataclass
class CenterlineSegment:
    """One ordered piece of the organ centerline.

    ``vertex_ids`` lists the mesh vertices belonging to this segment;
    across all segments the ids partition the mesh.
    """

    start: np.ndarray
    end: np.ndarray
    vertex_ids: np.ndarray

    def __post_init__(self):
        self.start = np.asarray(self.start, dtype=float).reshape(3)
        self.end = np.asarray(self.end, dtype=float).reshape(3)
        self.vertex_ids = np.asarray(self.vertex_ids, dtype=np.int64)

    @property
    def length(self) -> float:
        return float(np.linalg.norm(self.end - self.start))


class TriMesh:
    """Indexed triangle mesh.

    Vertex positions may be mutated through :meth:`update_vertices` (the
    tissue step is the single writer); all queries are read-only.
    """

    def __init__(self, vertices, triangles, clean: bool = True):
        vertices = np.ascontiguousarray(vertices, dtype=float).reshape(-1, 3)
        triangles = np.ascontiguousarray(triangles, dtype=np.int64).reshape(-1, 3)
        if len(triangles) and triangles.max() >= len(vertices):
            raise ParseError("triangle index out of range")
        if len(triangles) and triangles.min() < 0:
            raise ParseError("negative triangle index")
        if clean and len(triangles):
            keep = self._nondegenerate_mask(vertices, triangles)
            dropped = int(len(triangles) - keep.sum())
            if dropped:
                log.warning("dropping %d degenerate triangles at load", dropped)
                triangles = triangles[keep]
        self.vertices = vertices
        self.triangles = triangles
        self.vertex_normals = _vertex_normals(vertices, triangles)
        self._bvh = None

    @staticmethod
    def _nondegenerate_mask(vertices, triangles):
        a = vertices[triangles[:, 0]]
        cr = np.cross(vertices[triangles[:, 1]] - a, vertices[triangles[:, 2]] - a)
        return np.einsum("ij,ij->i", cr, cr) > _DEGENERATE_AREA

    def __len__(self):
        return len(self.vertices)

    @property
    def bvh(self) -> Bvh:
        if self._bvh is None:
            self._bvh = Bvh(self.vertices, self.triangles)
        return self._bvh

    def update_vertices(self, positions):
        """Replace vertex positions (same topology); refits acceleration data."""
        positions = np.ascontiguousarray(positions, dtype=float)
        if positions.shape != self.vertices.shape:
            raise ValueError("vertex count must not change")
        self.vertices = positions
        self.vertex_normals = _vertex_normals(positions, self.triangles)
        if self._bvh is not None:
            self._bvh.refit(positions)

    def triangle_normal(self, tid: int) -> np.ndarray:
        a, b, c = self.vertices[self.triangles[tid]]
        n = np.cross(b - a, c - a)
        return n / np.linalg.norm(n)

    def triangle_centroids(self) -> np.ndarray:
        return self.vertices[self.triangles].mean(axis=1)

    def triangle_vertices(self) -> np.ndarray:
        """Corner positions per triangle, shape (M, 3, 3)."""
        return self.vertices[self.triangles]

    def ray_cast(self, origin, direction, max_dist, brute_force=False):
        """Nearest intersection within ``max_dist`` or None.

        Deterministic tie-break: lowest triangle id. ``direction`` must be
        unit length for ``distance`` to be metric.
        """
        if max_dist <= 0:
            raise ValueError("max_dist must be positive")
        if brute_force:
            hit = ray_cast_brute(self.vertices, self.triangles, origin, direction, max_dist)
        else:
            hit = self.bvh.ray_cast(origin, direction, max_dist)
        if hit is None:
            return None
        t, tid = hit
        point = np.asarray(origin, dtype=float) + t * np.asarray(direction, dtype=float)
        return RayHit(float(t), tid, point)

    def closest_point(self, query, brute_force=False) -> SurfacePoint:
        """Closest surface point to ``query``; ties -> lowest triangle id."""
        if len(self.triangles) == 0:
            raise ValueError("mesh has no triangles")
        if brute_force:
            point, d2, tid = closest_point_brute(self.vertices, self.triangles, query)
        else:
            point, d2, tid = self.bvh.closest_point(query)
        return SurfacePoint(np.asarray(point, dtype=float), float(np.sqrt(d2)),
                            int(tid), self.triangle_normal(int(tid)))

    def closest_points(self, queries, brute_force=False) -> list:
        """closest_point for a batch of queries in one traversal."""
        if len(self.triangles) == 0:
            raise ValueError("mesh has no triangles")
        if brute_force:
            return [self.closest_point(q, brute_force=True) for q in queries]
        pts, d2s, tids = self.bvh.closest_points(queries)
        return [SurfacePoint(pt, float(np.sqrt(d2)), int(tid),
                             self.triangle_normal(int(tid)))
                for pt, d2, tid in zip(pts, d2s, tids)]

    def bounds(self):
        return self.vertices.min(axis=0), self.vertices.max(axis=0)


def _vertex_normals(vertices, triangles):
    """Area-weighted vertex normals, unit length (zero where undefined)."""
    normals = np.zeros_like(vertices)
    if len(triangles) == 0:
        return normals
    a = vertices[triangles[:, 0]]
    face_n = np.cross(vertices[triangles[:, 1]] - a, vertices[triangles[:, 2]] - a)
    for k in range(3):
        np.add.at(normals, triangles[:, k], face_n)
    lens = np.linalg.norm(normals, axis=1, keepdims=True)
    return np.divide(normals, lens, out=np.zeros_like(normals), where=lens > 1e-300)


def load_mesh(path) -> tuple[TriMesh, np.ndarray | None]:
    """Load an OBJ or PLY mesh.

    Returns (mesh, per-vertex segment ids or None). Polygon faces are
    fan-triangulated. Segment ids come from a PLY integer property named
    "segment" when present.
    """
    path = Path(path)
    suffix = path.suffix.lower()
    segment_ids = None
    if suffix == ".obj":
        vertices, faces = meshio.load_obj(path)
    elif suffix == ".ply":
        data = meshio.load_ply(path)
        vertices, faces = data["vertices"], data["faces"]
        if "segment" in data["vertex_props"]:
            segment_ids = data["vertex_props"]["segment"].astype(np.int64)
    else:
        raise ParseError(f"unsupported mesh format: {path.suffix!r}")
    triangles = []
    for face in faces:
        for k in range(1, len(face) - 1):
            triangles.append((face[0], face[k], face[k + 1]))
    mesh = TriMesh(vertices, np.asarray(triangles, dtype=np.int64).reshape(-1, 3))
    return mesh, segment_ids


def save_mesh(path, mesh: TriMesh, segment_ids=None, binary=False):
    path = Path(path)
    if path.suffix.lower() == ".obj":
        meshio.save_obj(path, mesh.vertices, mesh.triangles)
    elif path.suffix.lower() == ".ply":
        props = {"segment": np.asarray(segment_ids, dtype=np.int64)} if segment_ids is not None else None
        meshio.save_ply(path, mesh.vertices, mesh.triangles, vertex_props=props, binary=binary)
    else:
        raise ParseError(f"unsupported mesh format: {path.suffix!r}")
