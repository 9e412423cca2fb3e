"""Core geometry: rotations, rigid transforms, meshes and spatial queries."""

from .bvh import Bvh, closest_point_brute, ray_cast_brute
from .mesh import CenterlineSegment, RayHit, SurfacePoint, TriMesh, load_mesh, save_mesh
from .rotation import UnitQuat
from .transform import RigidTransform, compose

__all__ = [
    "Bvh",
    "CenterlineSegment",
    "RayHit",
    "RigidTransform",
    "SurfacePoint",
    "TriMesh",
    "UnitQuat",
    "closest_point_brute",
    "compose",
    "load_mesh",
    "ray_cast_brute",
    "save_mesh",
]
