"""Capsule camera model, vertex visibility, and coverage planning.

Visibility is vertex-based: a wall vertex counts as seen when some
camera projects it inside the image, within its range and field-of-view
cone, with no nearer triangle blocking the ray.  The greedy planner is
a deterministic one-step-lookahead stand-in for a learned policy; the
coverage metric itself is policy-agnostic.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ValidationError
from .geometry import RigidTransform, TriMesh, UnitQuat
from .geometry.bvh import ray_triangle_ts

OCCLUSION_EPS = 1e-4  # m; pull-back so a vertex's own triangles never block it

REWARD_ALPHA = 5.0

#: planner translation step, m
ACTION_STEP = 0.005


@dataclass(frozen=True)
class CameraIntrinsics:
    """Affine camera with radial distortion, plus range and cone limits."""

    fx: float = 160.0
    fy: float = 160.0
    cx: float = 160.0
    cy: float = 160.0
    skew: float = 0.0
    k1: float = 0.0
    k2: float = 0.0
    width: int = 320
    height: int = 320
    fov: float = math.radians(140.0)
    max_range: float = 0.10

    def __post_init__(self):
        if self.fx <= 0 or self.fy <= 0:
            raise ValidationError("focal lengths must be positive", field="fx/fy")
        if self.width <= 0 or self.height <= 0:
            raise ValidationError("image size must be positive", field="width/height")

    def to_dict(self) -> dict:
        return {"fx": self.fx, "fy": self.fy, "cx": self.cx, "cy": self.cy,
                "skew": self.skew, "k1": self.k1, "k2": self.k2,
                "width": self.width, "height": self.height,
                "fov": self.fov, "max_range": self.max_range}

    @classmethod
    def from_dict(cls, d: dict) -> "CameraIntrinsics":
        return cls(**d)


def project(intr: CameraIntrinsics, p_cam) -> tuple | None:
    """Pixel (u, v) of a camera-frame point, or None if not imaged.

    Normalized coordinates are radially distorted by (1 + k1 r^2 +
    k2 r^4), then mapped through the affine intrinsics u = fx x + s y +
    cx, v = fy y + cy.  Points at or behind the camera plane and points
    landing outside the image return None.
    """
    p = np.asarray(p_cam, dtype=float)
    if p[2] <= 0.0:
        return None
    x = p[0] / p[2]
    y = p[1] / p[2]
    r2 = x * x + y * y
    scale = 1.0 + intr.k1 * r2 + intr.k2 * r2 * r2
    xd = x * scale
    yd = y * scale
    u = intr.fx * xd + intr.skew * yd + intr.cx
    v = intr.fy * yd + intr.cy
    if not (0.0 <= u < intr.width and 0.0 <= v < intr.height):
        return None
    return (u, v)


@dataclass(frozen=True)
class CameraRig:
    """Cameras mounted on the capsule body (pose maps camera to body)."""

    cameras: tuple  # of (RigidTransform, CameraIntrinsics)

    def __post_init__(self):
        object.__setattr__(self, "cameras", tuple(self.cameras))
        if not self.cameras:
            raise ValidationError("rig needs at least one camera", field="cameras")

    def to_dict(self) -> dict:
        return {"cameras": [{"mount": m.to_dict(), "intrinsics": i.to_dict()}
                            for m, i in self.cameras]}

    @classmethod
    def from_dict(cls, d: dict) -> "CameraRig":
        return cls(cameras=tuple(
            (RigidTransform.from_dict(c["mount"]), CameraIntrinsics.from_dict(c["intrinsics"]))
            for c in d["cameras"]))

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2)

    @classmethod
    def load(cls, path) -> "CameraRig":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def _look(axis_to: np.ndarray) -> UnitQuat:
    """Rotation taking the camera +z axis onto ``axis_to``."""
    z = np.array([0.0, 0.0, 1.0])
    axis_to = axis_to / np.linalg.norm(axis_to)
    dot = float(z @ axis_to)
    if dot > 1.0 - 1e-12:
        return UnitQuat.identity()
    if dot < -1.0 + 1e-12:
        return UnitQuat.from_axis_angle(np.array([1.0, 0.0, 0.0]), math.pi)
    axis = np.cross(z, axis_to)
    return UnitQuat.from_axis_angle(axis, math.acos(dot))


def make_rig(kind: str = "mono", intrinsics: CameraIntrinsics | None = None,
             tip_offset: float = 0.013, baseline: float = 0.004) -> CameraRig:
    """Standard capsule camera layouts.

    mono: one forward camera at the +z tip.  stereo: two forward
    cameras at the tip separated by ``baseline``.  dual: forward plus
    backward tip cameras.  panoramic: four side-looking cameras at 90
    degree offsets around the body.
    """
    intr = intrinsics or CameraIntrinsics()
    fwd = UnitQuat.identity()
    if kind == "mono":
        mounts = [RigidTransform(fwd, np.array([0.0, 0.0, tip_offset]))]
    elif kind == "stereo":
        half = baseline / 2.0
        mounts = [RigidTransform(fwd, np.array([-half, 0.0, tip_offset])),
                  RigidTransform(fwd, np.array([half, 0.0, tip_offset]))]
    elif kind == "dual":
        back = UnitQuat.from_axis_angle(np.array([1.0, 0.0, 0.0]), math.pi)
        mounts = [RigidTransform(fwd, np.array([0.0, 0.0, tip_offset])),
                  RigidTransform(back, np.array([0.0, 0.0, -tip_offset]))]
    elif kind == "panoramic":
        mounts = [RigidTransform(_look(np.array(d)), np.zeros(3))
                  for d in ([1.0, 0.0, 0.0], [0.0, 1.0, 0.0],
                            [-1.0, 0.0, 0.0], [0.0, -1.0, 0.0])]
    elif kind == "surround":
        # panoramic ring plus both tip cameras: full solid-angle sweep
        back = UnitQuat.from_axis_angle(np.array([1.0, 0.0, 0.0]), math.pi)
        mounts = [RigidTransform(_look(np.array(d)), np.zeros(3))
                  for d in ([1.0, 0.0, 0.0], [0.0, 1.0, 0.0],
                            [-1.0, 0.0, 0.0], [0.0, -1.0, 0.0])]
        mounts += [RigidTransform(fwd, np.array([0.0, 0.0, tip_offset])),
                   RigidTransform(back, np.array([0.0, 0.0, -tip_offset]))]
    else:
        raise ValidationError(f"unknown rig kind {kind!r}", field="kind")
    return CameraRig(cameras=tuple((m, intr) for m in mounts))


@dataclass
class CoverageMap:
    """Per-vertex seen flags; marking is monotone within an episode."""

    seen: np.ndarray

    @classmethod
    def empty(cls, total: int) -> "CoverageMap":
        return cls(seen=np.zeros(total, dtype=bool))

    @property
    def total(self) -> int:
        return len(self.seen)

    @property
    def covered_count(self) -> int:
        return int(np.sum(self.seen))

    def mark(self, vertex_ids) -> int:
        """Set flags; returns how many were newly covered."""
        ids = np.asarray(vertex_ids, dtype=int)
        if len(ids) == 0:
            return 0
        fresh = ids[~self.seen[ids]]
        self.seen[fresh] = True
        return len(fresh)


def coverage_fraction(cov: CoverageMap) -> float:
    if cov.total == 0:
        raise ValidationError("coverage map has no vertices", field="seen")
    return cov.covered_count / cov.total


def coverage_reward(c_t: float, c_prev: float, alpha: float = REWARD_ALPHA) -> float:
    """Linear coverage-gain reward, r = alpha (C_t - C_prev)."""
    if not 0.0 <= c_prev <= c_t <= 1.0:
        raise ValidationError("need 0 <= C_prev <= C_t <= 1", field="coverage")
    return alpha * (c_t - c_prev)


class VisibilityKernel:
    """Precomputed per-triangle arrays for shared-origin occlusion tests.

    For rays leaving one origin, the Moller-Trumbore terms split into
    per-triangle pieces plus three (rays x triangles) matmuls, which is
    what makes per-step planner lookahead affordable.
    """

    def __init__(self, mesh: TriMesh):
        self.mesh = mesh
        tri = mesh.triangle_vertices()  # (M, 3, 3)
        self.v0 = tri[:, 0]
        self.e1 = tri[:, 1] - tri[:, 0]
        self.e2 = tri[:, 2] - tri[:, 0]
        centroid = tri.mean(axis=1)
        self.centroid = centroid
        self.circumradius = np.sqrt(
            ((tri - centroid[:, None, :]) ** 2).sum(axis=2).max(axis=1))

    def occluded(self, origin: np.ndarray, targets: np.ndarray,
                 max_range: float) -> np.ndarray:
        """Bool per target: a triangle blocks the origin->target ray.

        Triangles entirely farther than ``max_range`` from the origin
        cannot intersect any tested ray and are culled exactly.
        """
        near = (np.linalg.norm(self.centroid - origin, axis=1)
                - self.circumradius) <= max_range
        v0, e1, e2 = self.v0[near], self.e1[near], self.e2[near]
        if len(v0) == 0:
            return np.zeros(len(targets), dtype=bool)

        rays = targets - origin  # unnormalized: t == 1 at the vertex
        tvec = origin - v0
        qvec = np.cross(tvec, e1)
        t_num = np.einsum("mk,mk->m", e2, qvec)
        u_rot = np.cross(e2, tvec)
        det = rays @ np.cross(e2, e1).T  # = -dir . (e1 x e2), (R, M)
        with np.errstate(divide="ignore", invalid="ignore"):
            inv_det = 1.0 / det
            u = (rays @ u_rot.T) * inv_det
            v = (rays @ qvec.T) * inv_det
            t = t_num[None, :] * inv_det

        dist = np.linalg.norm(rays, axis=1)
        limit = 1.0 - OCCLUSION_EPS / np.maximum(dist, 1e-300)
        hit = ((np.abs(det) > 1e-12) & (u >= 0.0) & (v >= 0.0) & (u + v <= 1.0)
               & (t > 1e-12) & (t < limit[:, None]))
        return hit.any(axis=1)


def _camera_world(capsule_pose: RigidTransform, mount: RigidTransform) -> RigidTransform:
    return capsule_pose.compose(mount)


def _image_mask(intr: CameraIntrinsics, p_cam: np.ndarray):
    """Vectorized projection test; bool mask over (N, 3) camera points."""
    z = p_cam[:, 2]
    dist = np.linalg.norm(p_cam, axis=1)
    ok = (z > 0.0) & (dist <= intr.max_range) & (dist > 0.0)
    cone = np.cos(intr.fov / 2.0)
    safe_dist = np.where(dist > 0.0, dist, 1.0)
    ok &= np.where(dist > 0.0, z / safe_dist, -1.0) >= cone
    safe_z = np.where(z > 0.0, z, 1.0)  # masked out above; avoids NaN noise
    x = p_cam[:, 0] / safe_z
    y = p_cam[:, 1] / safe_z
    r2 = x * x + y * y
    scale = 1.0 + intr.k1 * r2 + intr.k2 * r2 * r2
    u = intr.fx * (x * scale) + intr.skew * (y * scale) + intr.cx
    v = intr.fy * (y * scale) + intr.cy
    ok &= (u >= 0.0) & (u < intr.width) & (v >= 0.0) & (v < intr.height)
    return ok


def visible_vertices(mesh: TriMesh, capsule_pose: RigidTransform, rig: CameraRig,
                     kernel: VisibilityKernel | None = None,
                     candidates: np.ndarray | None = None,
                     brute_force: bool = False) -> np.ndarray:
    """Sorted ids of mesh vertices any rig camera can see from this pose.

    ``candidates`` restricts the probe set (the planner passes the
    still-unseen vertices).  ``brute_force`` swaps the batched occlusion
    kernel for an exhaustive per-vertex ray cast over every triangle.
    """
    if candidates is None:
        candidates = np.arange(len(mesh.vertices))
    else:
        candidates = np.asarray(candidates, dtype=int)
    if len(candidates) == 0:
        return candidates

    if kernel is None and not brute_force:
        kernel = VisibilityKernel(mesh)

    verts = mesh.vertices[candidates]
    visible = np.zeros(len(candidates), dtype=bool)
    for mount, intr in rig.cameras:
        cam = _camera_world(capsule_pose, mount)
        p_cam = cam.inverse().apply(verts)
        mask = _image_mask(intr, p_cam) & ~visible
        idx = np.nonzero(mask)[0]
        if len(idx) == 0:
            continue
        origin = cam.translation
        targets = verts[idx]
        if brute_force:
            blocked = _occluded_brute(mesh, origin, targets)
        else:
            blocked = kernel.occluded(origin, targets, intr.max_range)
        visible[idx[~blocked]] = True
    return np.sort(candidates[visible])


def _occluded_brute(mesh: TriMesh, origin: np.ndarray, targets: np.ndarray) -> np.ndarray:
    tri = mesh.triangle_vertices()
    out = np.zeros(len(targets), dtype=bool)
    for i, tgt in enumerate(targets):
        ray = tgt - origin
        dist = float(np.linalg.norm(ray))
        ts = ray_triangle_ts(origin, ray / dist, tri[:, 0], tri[:, 1], tri[:, 2])
        ts = ts[(ts > 1e-12) & np.isfinite(ts)]
        out[i] = bool(len(ts)) and float(ts.min()) < dist - OCCLUSION_EPS
    return out


def default_actions(step: float = ACTION_STEP) -> list:
    """Six axis-aligned translation actions of one step length."""
    return [np.array(v) * step for v in
            ([1.0, 0.0, 0.0], [-1.0, 0.0, 0.0], [0.0, 1.0, 0.0],
             [0.0, -1.0, 0.0], [0.0, 0.0, 1.0], [0.0, 0.0, -1.0])]


def greedy_plan_step(pose: RigidTransform, mesh: TriMesh, rig: CameraRig,
                     coverage: CoverageMap, actions,
                     kernel: VisibilityKernel | None = None) -> tuple:
    """One-step lookahead over the action set.

    Applies each candidate translation to a cloned pose, counts the
    still-unseen vertices it would cover, and returns (action index,
    newly visible ids for that action).  Ties keep the earliest action;
    the choice is deterministic.
    """
    if not len(actions):
        raise ValidationError("action set must be non-empty", field="actions")
    if kernel is None:
        kernel = VisibilityKernel(mesh)
    unseen = np.nonzero(~coverage.seen)[0]
    best_idx = 0
    best_ids = np.empty(0, dtype=int)
    for i, action in enumerate(actions):
        trial = replace(pose, translation=pose.translation + action)
        ids = visible_vertices(mesh, trial, rig, kernel=kernel, candidates=unseen)
        if len(ids) > len(best_ids):
            best_idx = i
            best_ids = ids
    return best_idx, best_ids


@dataclass
class CoverageEpisode:
    """Planner trace: per-step time, coverage, and reward."""

    times: list = field(default_factory=list)
    covered: list = field(default_factory=list)
    total: int = 0
    fractions: list = field(default_factory=list)
    rewards: list = field(default_factory=list)
    poses: list = field(default_factory=list)

    def record(self, t: float, cov: CoverageMap, reward: float, pose: RigidTransform):
        self.times.append(t)
        self.covered.append(cov.covered_count)
        self.total = cov.total
        self.fractions.append(coverage_fraction(cov))
        self.rewards.append(reward)
        self.poses.append(pose)

    def write_csv(self, path):
        with open(path, "w") as fh:
            fh.write("t, covered_count, total, C\n")
            for t, n, c in zip(self.times, self.covered, self.fractions):
                fh.write(f"{t:.6f}, {n}, {self.total}, {c:.9f}\n")


def run_coverage_episode(mesh: TriMesh, rig: CameraRig, start_pose: RigidTransform,
                         actions=None, max_steps: int = 2000,
                         target: float = 1.0, dt: float = 1.0,
                         alpha: float = REWARD_ALPHA) -> CoverageEpisode:
    """Greedy coverage run until ``target`` fraction or the step budget."""
    actions = default_actions() if actions is None else actions
    kernel = VisibilityKernel(mesh)
    coverage = CoverageMap.empty(len(mesh.vertices))
    episode = CoverageEpisode()

    pose = start_pose
    coverage.mark(visible_vertices(mesh, pose, rig, kernel=kernel))
    c_prev = coverage_fraction(coverage)
    episode.record(0.0, coverage, 0.0, pose)
    for step_idx in range(1, max_steps + 1):
        if c_prev >= target:
            break
        idx, ids = greedy_plan_step(pose, mesh, rig, coverage, actions, kernel=kernel)
        pose = replace(pose, translation=pose.translation + actions[idx])
        coverage.mark(ids)
        c_t = coverage_fraction(coverage)
        episode.record(step_idx * dt, coverage, coverage_reward(c_t, c_prev, alpha), pose)
        c_prev = c_t
    return episode
