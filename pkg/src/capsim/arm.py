"""7-DOF arm holding the external magnet: DH transforms, FK, and IK.

The per-joint transform follows an unusual sign convention (negated
translation entries, transposed rotation block relative to classic DH);
it is implemented verbatim because downstream poses were derived with
it.  Set ``convention="standard"`` on the model for classic DH interop.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, UnreachableError, ValidationError
from .geometry import RigidTransform

N_JOINTS = 7

IK_TOL_POS = 1e-4  # m
IK_TOL_ROT = 1e-3  # rad
IK_LAMBDA = 0.05
IK_MAX_ITER = 500
_JAC_STEP = 1e-6


@dataclass(frozen=True)
class DhJoint:
    """One revolute joint: fixed DH geometry plus motion limits.

    The commanded joint angle is added to ``theta_offset`` before the
    transform is evaluated.
    """

    alpha: float
    a: float
    d: float
    theta_offset: float = 0.0
    limit_min: float = -math.pi
    limit_max: float = math.pi

    def __post_init__(self):
        vals = (self.alpha, self.a, self.d, self.theta_offset,
                self.limit_min, self.limit_max)
        if not all(math.isfinite(v) for v in vals):
            raise ValidationError("joint parameters must be finite", field="dh")
        if not self.limit_min < self.limit_max:
            raise ValidationError("joint limit_min must be below limit_max", field="limits")


def dh_matrix(joint: DhJoint, theta: float, convention: str = "printed") -> np.ndarray:
    """Homogeneous transform of one joint at angle ``theta``.

    "printed" uses the published sign convention; "standard" the classic
    DH form.  Both rotation blocks are proper (determinant +1).
    """
    th = theta + joint.theta_offset
    ct, st = math.cos(th), math.sin(th)
    ca, sa = math.cos(joint.alpha), math.sin(joint.alpha)
    a, d = joint.a, joint.d
    if convention == "printed":
        return np.array([
            [ct, st, 0.0, -a],
            [-st * ca, ct * ca, sa, -d * sa],
            [st * sa, -ct * sa, ca, -d * ca],
            [0.0, 0.0, 0.0, 1.0],
        ])
    if convention == "standard":
        return np.array([
            [ct, -st * ca, st * sa, a * ct],
            [st, ct * ca, -ct * sa, a * st],
            [0.0, sa, ca, d],
            [0.0, 0.0, 0.0, 1.0],
        ])
    raise ValidationError(f"unknown DH convention {convention!r}", field="convention")


@dataclass(frozen=True)
class ArmModel:
    """Base pose, seven DH joints, and the magnet-mount tool transform."""

    joints: tuple
    base: RigidTransform = field(default_factory=RigidTransform.identity)
    tool: RigidTransform = field(default_factory=RigidTransform.identity)
    convention: str = "printed"

    def __post_init__(self):
        object.__setattr__(self, "joints", tuple(self.joints))
        if len(self.joints) != N_JOINTS:
            raise ValidationError(f"arm needs exactly {N_JOINTS} joints, "
                                  f"got {len(self.joints)}", field="joints")

    def clamp(self, q) -> np.ndarray:
        q = np.asarray(q, dtype=float)
        lo = np.array([j.limit_min for j in self.joints])
        hi = np.array([j.limit_max for j in self.joints])
        return np.clip(q, lo, hi)

    def within_limits(self, q) -> bool:
        q = np.asarray(q, dtype=float)
        return all(j.limit_min <= qi <= j.limit_max for j, qi in zip(self.joints, q))

    def to_dict(self) -> dict:
        return {
            "convention": self.convention,
            "base": self.base.to_dict(),
            "tool": self.tool.to_dict(),
            "joints": [
                {"alpha": j.alpha, "a": j.a, "d": j.d, "theta_offset": j.theta_offset,
                 "min": j.limit_min, "max": j.limit_max}
                for j in self.joints
            ],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ArmModel":
        joints = tuple(
            DhJoint(alpha=j["alpha"], a=j["a"], d=j["d"],
                    theta_offset=j.get("theta_offset", 0.0),
                    limit_min=j.get("min", -math.pi), limit_max=j.get("max", math.pi))
            for j in data["joints"]
        )
        base = RigidTransform.from_dict(data["base"]) if "base" in data else RigidTransform.identity()
        tool = RigidTransform.from_dict(data["tool"]) if "tool" in data else RigidTransform.identity()
        return cls(joints=joints, base=base, tool=tool,
                   convention=data.get("convention", "printed"))

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2)

    @classmethod
    def load(cls, path) -> "ArmModel":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def forward_kinematics(arm: ArmModel, q) -> RigidTransform:
    """End-point pose for joint angles ``q`` (length 7)."""
    q = np.asarray(q, dtype=float).ravel()
    if q.shape != (N_JOINTS,):
        raise DimensionError(f"expected {N_JOINTS} joint angles, got {q.shape}")
    m = arm.base.matrix()
    for joint, qi in zip(arm.joints, q):
        m = m @ dh_matrix(joint, float(qi), arm.convention)
    m = m @ arm.tool.matrix()
    return RigidTransform.from_matrix(m)


def _pose_error(target: RigidTransform, current: RigidTransform) -> np.ndarray:
    """6-D error: position difference and world-frame rotation vector."""
    e_pos = target.translation - current.translation
    e_rot = target.rotation.multiply(current.rotation.conjugate()).to_rotation_vector()
    return np.concatenate([e_pos, e_rot])


def _jacobian(arm: ArmModel, q: np.ndarray, target: RigidTransform) -> np.ndarray:
    jac = np.zeros((6, N_JOINTS))
    for i in range(N_JOINTS):
        dq = np.zeros(N_JOINTS)
        dq[i] = _JAC_STEP
        e_plus = _pose_error(target, forward_kinematics(arm, q + dq))
        e_minus = _pose_error(target, forward_kinematics(arm, q - dq))
        # derivative of the error, so the update solves J dq = e directly
        jac[:, i] = (e_minus - e_plus) / (2.0 * _JAC_STEP)
    return jac


def _dls_attempt(arm: ArmModel, target: RigidTransform, q: np.ndarray, tol_pos: float,
                 tol_rot: float, damp: np.ndarray, mid: np.ndarray, budget: int):
    """One damped-least-squares descent; (q, residual, converged, used)."""
    best = math.inf
    stall = 0
    for it in range(budget):
        err = _pose_error(target, forward_kinematics(arm, q))
        pos_err = float(np.linalg.norm(err[:3]))
        rot_err = float(np.linalg.norm(err[3:]))
        residual = pos_err + rot_err
        if residual < best * (1.0 - 1e-4):
            best = residual
            stall = 0
        else:
            stall += 1
            if stall > 25:  # wedged against a limit or a local minimum
                return q, best, False, it + 1
        if pos_err < tol_pos and rot_err < tol_rot:
            return q, best, True, it + 1
        jac = _jacobian(arm, q, target)
        dq = jac.T @ np.linalg.solve(jac @ jac.T + damp, err)
        # exact-nullspace pull toward mid-range keeps joints off their
        # stops without injecting task-space error
        _, _, vt = np.linalg.svd(jac)
        null_basis = vt[6:]
        dq += 0.1 * null_basis.T @ (null_basis @ (mid - q))
        q = arm.clamp(q + dq)
    return q, best, False, budget


def inverse_kinematics(arm: ArmModel, target: RigidTransform, q_init,
                       tol_pos: float = IK_TOL_POS, tol_rot: float = IK_TOL_ROT,
                       damping: float = IK_LAMBDA,
                       max_iter: float = IK_MAX_ITER) -> np.ndarray:
    """Damped-least-squares IK; returns 7 angles within joint limits.

    Iterates q += J^T (J J^T + lambda^2 I)^-1 e on the 6-D pose error,
    clamping to the joint limits every step.  A descent that stalls
    (limit wedging, local minimum) restarts from a deterministic jitter
    of the mid-range configuration until the ``max_iter`` total budget
    is spent.  Raises UnreachableError with the best residual seen.
    """
    q = arm.clamp(np.asarray(q_init, dtype=float).ravel())
    if q.shape != (N_JOINTS,):
        raise DimensionError(f"expected {N_JOINTS} joint angles, got {q.shape}")

    lo = np.array([j.limit_min for j in arm.joints])
    hi = np.array([j.limit_max for j in arm.joints])
    mid, span = 0.5 * (lo + hi), hi - lo

    damp = damping * damping * np.eye(6)
    budget = int(max_iter)
    best = math.inf
    attempt = 0
    while budget > 0:
        q_out, residual, converged, used = _dls_attempt(
            arm, target, q, tol_pos, tol_rot, damp, mid, budget)
        if converged:
            return q_out
        best = min(best, residual)
        budget -= used
        # fixed-seed jitter keeps the solver fully deterministic
        jitter = np.random.default_rng(attempt).uniform(-0.35, 0.35, N_JOINTS)
        q = arm.clamp(mid + jitter * span)
        attempt += 1

    raise UnreachableError(
        f"inverse kinematics did not reach the target (best residual {best:.3e})",
        best_residual=best,
    )


def default_arm() -> ArmModel:
    """Seven-joint table with workspace and limits shaped like a lab arm.

    The numbers are a self-consistent fixture for FK/IK round trips, not
    a calibrated model of any physical robot.
    """
    half = math.pi / 2.0
    joints = (
        DhJoint(alpha=0.0, a=0.0, d=0.333, limit_min=-2.8973, limit_max=2.8973),
        DhJoint(alpha=-half, a=0.0, d=0.0, limit_min=-1.7628, limit_max=1.7628),
        DhJoint(alpha=half, a=0.0, d=0.316, limit_min=-2.8973, limit_max=2.8973),
        DhJoint(alpha=half, a=0.0825, d=0.0, limit_min=-3.0718, limit_max=-0.0698),
        DhJoint(alpha=-half, a=-0.0825, d=0.384, limit_min=-2.8973, limit_max=2.8973),
        DhJoint(alpha=half, a=0.0, d=0.0, limit_min=-0.0175, limit_max=3.7525),
        DhJoint(alpha=half, a=0.088, d=0.107, limit_min=-2.8973, limit_max=2.8973),
    )
    return ArmModel(joints=joints)


#: a mid-range elbow-down configuration, well inside every joint limit
HOME_Q = np.array([0.0, -0.3, 0.0, -2.2, 0.0, 2.0, 0.79])
