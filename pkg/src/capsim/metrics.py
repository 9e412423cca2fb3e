"""Trajectory and reconstruction evaluation.

Rigid alignment (SVD, proper rotation only), absolute trajectory error
after alignment, relative pose error over consecutive steps, point-to-
point ICP, and asymmetric cloud-to-cloud RMSE with per-point distances
for heatmap export.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .errors import DegenerateError, LengthMismatchError, ParseError, ValidationError
from .geometry import RigidTransform, UnitQuat
from .geometry.meshio import load_ply, save_ply


@dataclass(frozen=True)
class PoseSample:
    t: float
    pose: RigidTransform


@dataclass(frozen=True)
class Trajectory:
    """Time-ordered pose samples; timestamps strictly increasing."""

    samples: tuple

    def __post_init__(self):
        object.__setattr__(self, "samples", tuple(self.samples))
        ts = [s.t for s in self.samples]
        if any(b <= a for a, b in zip(ts, ts[1:])):
            raise ValidationError("timestamps must be strictly increasing", field="samples")

    def __len__(self):
        return len(self.samples)

    def positions(self) -> np.ndarray:
        return np.array([s.pose.translation for s in self.samples]).reshape(-1, 3)

    def times(self) -> np.ndarray:
        return np.array([s.t for s in self.samples])

    def transformed(self, transform: RigidTransform) -> "Trajectory":
        return Trajectory(tuple(PoseSample(s.t, transform.compose(s.pose))
                                for s in self.samples))

    def save(self, path):
        """TUM-style text: "timestamp tx ty tz qx qy qz qw" per line."""
        with open(path, "w") as fh:
            for s in self.samples:
                tx, ty, tz = s.pose.translation
                q = s.pose.rotation
                fh.write(f"{s.t:.6f} {tx:.17g} {ty:.17g} {tz:.17g} "
                         f"{q.x:.17g} {q.y:.17g} {q.z:.17g} {q.w:.17g}\n")

    @classmethod
    def load(cls, path) -> "Trajectory":
        samples = []
        with open(path) as fh:
            for lineno, raw in enumerate(fh, start=1):
                line = raw.strip()
                if not line or line.startswith("#"):
                    continue
                parts = line.split()
                if len(parts) != 8:
                    raise ParseError(f"expected 8 fields, got {len(parts)}", line=lineno)
                try:
                    t, tx, ty, tz, qx, qy, qz, qw = map(float, parts)
                except ValueError as exc:
                    raise ParseError(str(exc), line=lineno) from None
                samples.append(PoseSample(
                    t, RigidTransform(UnitQuat(qw, qx, qy, qz), np.array([tx, ty, tz]))))
        return cls(tuple(samples))


def associate(pred: Trajectory, gt: Trajectory, max_dt: float = 0.02):
    """Pair samples by nearest timestamp; returns two equal trajectories.

    Each ground-truth sample grabs the closest predicted sample within
    ``max_dt``; unmatched samples drop out.  Predicted samples are used
    at most once.
    """
    pt = pred.times()
    used = np.zeros(len(pt), dtype=bool)
    pairs = []
    for s in gt.samples:
        i = int(np.argmin(np.abs(pt - s.t)))
        if abs(pt[i] - s.t) <= max_dt and not used[i]:
            used[i] = True
            pairs.append((pred.samples[i], s))
    return (Trajectory(tuple(p for p, _ in pairs)),
            Trajectory(tuple(q for _, q in pairs)))


def rigid_align(pred, gt, with_scale: bool = False) -> RigidTransform:
    """Least-squares rigid transform T with T(pred) ~= gt (SVD closed form).

    Reflections are excluded: the rotation determinant is always +1.
    ``with_scale`` additionally solves for a global scale (similarity
    alignment); off by default.
    """
    p = np.asarray(pred, dtype=float).reshape(-1, 3)
    q = np.asarray(gt, dtype=float).reshape(-1, 3)
    if len(p) != len(q):
        raise LengthMismatchError(f"point lists differ: {len(p)} vs {len(q)}")
    if len(p) < 3:
        raise DegenerateError("need at least 3 point pairs")

    p_mean = p.mean(axis=0)
    q_mean = q.mean(axis=0)
    p0 = p - p_mean
    q0 = q - q_mean
    cov = p0.T @ q0
    u, s, vt = np.linalg.svd(cov)
    rank = int(np.sum(s > 1e-12 * max(s[0], 1e-300)))
    if rank < 2:
        raise DegenerateError("points are collinear or coincident")
    d = np.sign(np.linalg.det(vt.T @ u.T))
    if d == 0:
        d = 1.0
    diag = np.diag([1.0, 1.0, d])
    r = vt.T @ diag @ u.T

    scale = 1.0
    if with_scale:
        var_p = float(np.sum(p0 * p0))
        if var_p <= 0:
            raise DegenerateError("zero-variance source points")
        scale = float(np.sum(s * np.diag(diag))) / var_p

    rot = UnitQuat.from_matrix(r)
    t = q_mean - scale * (r @ p_mean)
    if with_scale:
        return ScaledTransform(rot, t, scale)
    return RigidTransform(rot, t)


@dataclass(frozen=True)
class ScaledTransform:
    """Similarity transform: scale, then rotate, then translate."""

    rotation: UnitQuat
    translation: np.ndarray
    scale: float

    def apply(self, points):
        return self.scale * self.rotation.rotate(points) + self.translation


@dataclass(frozen=True)
class AteResult:
    distances: np.ndarray
    mean: float
    std: float
    alignment: RigidTransform


def ate(pred: Trajectory, gt: Trajectory) -> AteResult:
    """Absolute trajectory error: align pred to gt, then per-sample distance.

    Collinear or coincident tracks (a capsule run down a straight tube)
    cannot pin a rotation, so alignment degrades to translation only.
    """
    if len(pred) != len(gt):
        raise LengthMismatchError(f"trajectories differ: {len(pred)} vs {len(gt)}")
    p = pred.positions()
    q = gt.positions()
    try:
        transform = rigid_align(p, q)
    except DegenerateError:
        transform = RigidTransform(UnitQuat.identity(),
                                   q.mean(axis=0) - p.mean(axis=0))
    d = np.linalg.norm(transform.apply(p) - q, axis=1)
    return AteResult(distances=d, mean=float(d.mean()), std=float(d.std()),
                     alignment=transform)


def rpe_pair(p_i: RigidTransform, p_i1: RigidTransform,
             q_i: RigidTransform, q_i1: RigidTransform) -> tuple:
    """Relative pose error of one step; returns (trans m, rot rad).

    Error matrix R = (Q_i^-1 Q_{i+1})^-1 (P_i^-1 P_{i+1}); translation
    part is the norm of its last column, rotation the arccos of the
    clamped half trace-minus-one.
    """
    rel_p = p_i.inverse().compose(p_i1)
    rel_q = q_i.inverse().compose(q_i1)
    err = rel_q.inverse().compose(rel_p).matrix()
    trans = math.sqrt(err[0, 3] ** 2 + err[1, 3] ** 2 + err[2, 3] ** 2)
    p = 0.5 * (err[0, 0] + err[1, 1] + err[2, 2] - 1.0)
    rot = math.acos(min(1.0, max(-1.0, p)))
    return trans, rot


@dataclass(frozen=True)
class RpeResult:
    trans: np.ndarray
    rot: np.ndarray
    trans_mean: float
    trans_std: float
    rot_mean: float
    rot_std: float


def rpe_sequence(pred: Trajectory, gt: Trajectory) -> RpeResult:
    """RPE over consecutive pairs; mean and std of both components."""
    if len(pred) != len(gt):
        raise LengthMismatchError(f"trajectories differ: {len(pred)} vs {len(gt)}")
    if len(pred) < 2:
        raise LengthMismatchError("need at least 2 samples for relative errors")
    trans = []
    rot = []
    for i in range(len(pred) - 1):
        dt, dr = rpe_pair(pred.samples[i].pose, pred.samples[i + 1].pose,
                          gt.samples[i].pose, gt.samples[i + 1].pose)
        trans.append(dt)
        rot.append(dr)
    trans = np.array(trans)
    rot = np.array(rot)
    return RpeResult(trans=trans, rot=rot,
                     trans_mean=float(trans.mean()), trans_std=float(trans.std()),
                     rot_mean=float(rot.mean()), rot_std=float(rot.std()))


@dataclass
class PointCloud:
    """Bare 3-D points with an optional per-point scalar channel."""

    points: np.ndarray
    scalars: np.ndarray | None = None

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=float).reshape(-1, 3)
        if not np.all(np.isfinite(self.points)):
            raise ValidationError("points must be finite", field="points")

    def __len__(self):
        return len(self.points)

    def transformed(self, transform) -> "PointCloud":
        return PointCloud(transform.apply(self.points), self.scalars)

    def save(self, path, scalar_name: str = "c2c_dist", binary: bool = False):
        props = None
        if self.scalars is not None:
            props = {scalar_name: np.asarray(self.scalars, dtype=float)}
        save_ply(path, self.points, vertex_props=props, binary=binary)

    @classmethod
    def load(cls, path) -> "PointCloud":
        data = load_ply(path)
        scalars = None
        props = data.get("vertex_props") or {}
        for name, values in props.items():
            scalars = np.asarray(values, dtype=float)
            break
        return cls(points=data["vertices"], scalars=scalars)


@dataclass(frozen=True)
class IcpResult:
    transform: RigidTransform
    rmse: float
    iterations: int
    history: tuple


def icp_align(moving: PointCloud, fixed: PointCloud,
              init: RigidTransform | None = None, tol: float = 1e-8,
              max_iter: int = 100, max_pair_dist: float | None = None) -> IcpResult:
    """Point-to-point ICP of ``moving`` onto ``fixed``.

    Nearest-neighbor correspondences, closed-form rigid update, repeat
    until the RMSE improves by less than ``tol`` or ``max_iter`` is hit.
    RMSE is non-increasing by construction of the least-squares step.
    """
    if len(moving) < 3 or len(fixed) < 3:
        raise DegenerateError("both clouds need at least 3 points")
    transform = init or RigidTransform.identity()
    tree = cKDTree(fixed.points)
    src = moving.points

    history = []
    prev_rmse = math.inf
    iterations = 0
    for iterations in range(1, max_iter + 1):
        current = transform.apply(src)
        dists, idx = tree.query(current)
        if max_pair_dist is not None:
            keep = dists <= max_pair_dist
            if int(keep.sum()) < 3:
                raise DegenerateError("too few correspondences under max_pair_dist")
        else:
            keep = slice(None)
        rmse = float(np.sqrt(np.mean(dists[keep] ** 2)))
        history.append(rmse)
        if rmse == 0.0 or abs(prev_rmse - rmse) < tol:
            break
        prev_rmse = rmse
        transform = rigid_align(src[keep], fixed.points[idx[keep]])
    return IcpResult(transform=transform, rmse=history[-1], iterations=iterations,
                     history=tuple(history))


@dataclass(frozen=True)
class CloudDistanceResult:
    rmse: float
    distances: np.ndarray


def cloud_to_cloud_rmse(a: PointCloud, b: PointCloud) -> CloudDistanceResult:
    """Nearest-neighbor distance from each point of ``a`` into ``b``.

    Asymmetric by definition: a subset scores zero against its superset
    but not the other way around.  The per-point distances feed heatmap
    export.
    """
    if len(a) == 0 or len(b) == 0:
        raise ValidationError("clouds must be non-empty", field="points")
    dists, _ = cKDTree(b.points).query(a.points)
    return CloudDistanceResult(rmse=float(np.sqrt(np.mean(dists ** 2))),
                               distances=dists)
