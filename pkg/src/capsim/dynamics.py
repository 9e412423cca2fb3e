"""Fixed-timestep rigid-body loop for the capsule.

`step` is the single writer: it gathers magnetic, contact, friction,
peristaltic, and gravity forces, integrates the capsule with
semi-implicit Euler, and advances the wall state (deformation plus the
travelling contraction wave).  Everything is deterministic at fixed dt;
identical inputs give bit-identical trajectories on one platform.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import InstabilityError
from .friction import FrictionParams, coulomb_friction, lumen_friction_force, visco_adhesive
from .geometry import RigidTransform, TriMesh, UnitQuat
from .magnetics import MagneticDipole, dipole_force, dipole_torque, total_field
from .tissue import (
    DeformationState,
    MmcSchedule,
    PeristalsisParams,
    assign_segments,
    deform_step,
    mmc_phase,
    peristaltic_force,
    segment_direction,
    wall_wave_field,
)

GRAVITY = np.array([0.0, 0.0, -9.81])

DT_MAX = 1e-3  # s
U_MAX = 1.0  # m/s; faster than this inside a lumen means the setup blew up

#: axis sample count for capsule-vs-wall distance queries
AXIS_SAMPLES = 5


def capsule_inertia(mass: float, radius: float, length: float) -> np.ndarray:
    """Principal inertia of a solid cylinder stand-in for the capsule body."""
    transverse = mass * (3.0 * radius ** 2 + length ** 2) / 12.0
    axial = 0.5 * mass * radius ** 2
    return np.array([transverse, transverse, axial])


@dataclass(frozen=True)
class CapsuleState:
    """Rigid-body state plus the fixed body properties of the capsule.

    The dipole moment and the capsule axis are both +z in the body
    frame.  Inertia holds the three principal values (body frame).
    """

    pose: RigidTransform
    velocity: np.ndarray = field(default_factory=lambda: np.zeros(3))
    angular_velocity: np.ndarray = field(default_factory=lambda: np.zeros(3))
    mass: float = 0.005
    inertia: np.ndarray = field(default_factory=lambda: capsule_inertia(0.005, 0.0055, 0.026))
    moment_body: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0, 0.01]))
    radius: float = 0.0055
    length: float = 0.026

    def __post_init__(self):
        object.__setattr__(self, "velocity", np.asarray(self.velocity, dtype=float).reshape(3))
        object.__setattr__(self, "angular_velocity",
                           np.asarray(self.angular_velocity, dtype=float).reshape(3))
        object.__setattr__(self, "inertia", np.asarray(self.inertia, dtype=float).reshape(3))
        object.__setattr__(self, "moment_body",
                           np.asarray(self.moment_body, dtype=float).reshape(3))
        if self.mass <= 0:
            raise ValueError("mass must be positive")
        if np.any(self.inertia <= 0):
            raise ValueError("inertia values must be positive")

    def axis_points(self, n: int = AXIS_SAMPLES) -> np.ndarray:
        """Sample points along the core segment of the swept-sphere body."""
        half = max(self.length / 2.0 - self.radius, 0.0)
        ts = np.linspace(-half, half, n)
        axis = self.pose.rotation.rotate(np.array([0.0, 0.0, 1.0]))
        return self.pose.translation + ts[:, None] * axis

    def moment_world(self) -> np.ndarray:
        return self.pose.rotation.rotate(self.moment_body)


@dataclass(frozen=True)
class ContactResult:
    active: bool
    normal_force: np.ndarray
    normal: np.ndarray  # unit, pointing from wall into the lumen
    penetration: float
    point: np.ndarray
    triangle_id: int

    @classmethod
    def none(cls) -> "ContactResult":
        return cls(False, np.zeros(3), np.zeros(3), 0.0, np.zeros(3), -1)


@dataclass
class StepReport:
    """Telemetry for one step: per-source forces and the contact state."""

    t: float
    net_force: np.ndarray
    net_torque: np.ndarray
    contact: bool
    penetration: float
    breakdown: dict

    def to_dict(self) -> dict:
        return {
            "t": self.t,
            "net_force": list(self.net_force),
            "net_torque": list(self.net_torque),
            "contact": self.contact,
            "penetration": self.penetration,
            "breakdown": {k: list(v) for k, v in self.breakdown.items()},
        }


@dataclass
class World:
    """Everything the capsule interacts with, mutated only by `step`."""

    mesh: TriMesh | None = None
    magnets: list = field(default_factory=list)
    friction: FrictionParams = field(default_factory=FrictionParams)
    friction_mode: str = "curve"  # "curve" | "components"
    peristalsis: PeristalsisParams | None = None
    schedule: MmcSchedule | None = None
    segments: list | None = None
    deformation: DeformationState | None = None
    deform_influence_radius: float = 0.02
    rest_vertices: np.ndarray | None = None
    wave_inward_normals: np.ndarray | None = None
    wave_arc_coords: np.ndarray | None = None
    gravity: bool = False
    external_force: np.ndarray = field(default_factory=lambda: np.zeros(3))
    contact_stiffness: float = 500.0
    contact_damping: float = 1.0
    rotational_damping: float = 1e-5
    u_max: float = U_MAX
    time: float = 0.0
    #: bumped whenever the wall vertices actually change
    wall_version: int = 0


def inward_wall_normals(vertices: np.ndarray, segments) -> np.ndarray:
    """Per-vertex unit direction from the wall toward the centerline."""
    _, arc = assign_segments(segments, vertices)
    normals = np.zeros_like(vertices)
    # rebuild the closest axis point from the arc coordinate
    offsets = [0.0]
    for seg in segments:
        offsets.append(offsets[-1] + seg.length)
    for i, vert in enumerate(np.asarray(vertices, dtype=float)):
        s = arc[i]
        k = 0
        while k + 1 < len(segments) and s > offsets[k + 1]:
            k += 1
        seg = segments[k]
        t = (s - offsets[k]) / seg.length
        axis_pt = np.asarray(seg.start) + t * (np.asarray(seg.end) - np.asarray(seg.start))
        d = axis_pt - vert
        n = np.linalg.norm(d)
        normals[i] = d / n if n > 1e-12 else [0.0, 0.0, 0.0]
    return normals


def resolve_contact(capsule: CapsuleState, mesh: TriMesh, k_c: float = 500.0,
                    c_c: float = 1.0) -> ContactResult:
    """Penalty contact between the capsule body and the wall mesh.

    Takes the deepest of several closest-point queries along the capsule
    axis; penetration is radius minus wall distance.  The normal force
    is spring minus damping along the inward normal, clamped so it never
    pulls the capsule into the wall.
    """
    points = capsule.axis_points()
    best = None
    best_depth = 0.0
    for p, sp in zip(points, mesh.closest_points(points)):
        depth = capsule.radius - sp.distance
        if depth > best_depth:
            best = (p, sp)
            best_depth = depth
    if best is None:
        return ContactResult.none()

    axis_pt, sp = best
    away = axis_pt - sp.point
    dist = float(np.linalg.norm(away))
    if dist > 1e-12:
        normal = away / dist
    else:
        normal = mesh.triangle_normal(sp.triangle_id)  # axis exactly on the wall

    arm = sp.point - capsule.pose.translation
    point_velocity = capsule.velocity + np.cross(capsule.angular_velocity, arm)
    magnitude = k_c * best_depth - c_c * float(point_velocity @ normal)
    magnitude = max(0.0, magnitude)
    return ContactResult(True, magnitude * normal, normal, best_depth, sp.point,
                         sp.triangle_id)


def _segment_at(segments, point: np.ndarray):
    idx, _ = assign_segments(segments, point[None, :])
    return segments[int(idx[0])]


def step(state: CapsuleState, world: World, dt: float = 1e-3):
    """Advance capsule and wall by one fixed step; returns (state, report)."""
    if not 0.0 < dt <= DT_MAX:
        raise ValueError(f"dt must lie in (0, {DT_MAX}]")

    center = state.pose.translation
    m_world = state.moment_world()

    f_mag = np.zeros(3)
    tau_mag = np.zeros(3)
    if world.magnets:
        b = total_field(world.magnets, center)
        tau_mag = dipole_torque(m_world, b)
        f_mag = dipole_force(MagneticDipole(moment=m_world, position=center),
                             lambda p: total_field(world.magnets, p))

    contact = ContactResult.none()
    if world.mesh is not None:
        contact = resolve_contact(state, world.mesh, world.contact_stiffness,
                                  world.contact_damping)

    f_peri = np.zeros(3)
    if world.peristalsis is not None and world.segments:
        strength = 1.0
        if world.schedule is not None:
            strength = mmc_phase(world.schedule, world.time).strength
        seg = _segment_at(world.segments, center)
        f_peri = peristaltic_force(segment_direction(seg), world.peristalsis,
                                   state.velocity, strength)

    f_grav = state.mass * GRAVITY if world.gravity else np.zeros(3)
    f_ext = np.asarray(world.external_force, dtype=float)

    f_fric = np.zeros(3)
    if contact.active:
        n = contact.normal
        applied = f_mag + f_peri + f_grav + f_ext
        applied_t = applied - (applied @ n) * n
        v_t = state.velocity - (state.velocity @ n) * n
        if world.friction_mode == "curve":
            f_fric = lumen_friction_force(v_t, applied_t, world.friction, state.mass, dt)
        else:
            f_fric = (coulomb_friction(world.friction.mu_c, contact.normal_force, v_t)
                      + visco_adhesive(world.friction.gamma, state.velocity))

    f_net = f_mag + contact.normal_force + f_fric + f_peri + f_grav + f_ext

    velocity = state.velocity + f_net / state.mass * dt
    speed = float(np.linalg.norm(velocity))
    if speed > world.u_max:
        raise InstabilityError(
            f"capsule speed {speed:.3f} m/s exceeds {world.u_max} m/s; "
            "reduce dt or contact stiffness"
        )
    translation = state.pose.translation + velocity * dt

    tau_net = tau_mag - world.rotational_damping * state.angular_velocity
    # integrate in the principal (body) frame; the gyroscopic term is
    # negligible for near-equal transverse inertias at capsule scale
    rot = state.pose.rotation
    omega_body = rot.conjugate().rotate(state.angular_velocity)
    tau_body = rot.conjugate().rotate(tau_net)
    omega_body = omega_body + tau_body / state.inertia * dt
    angular_velocity = rot.rotate(omega_body)
    rotation = UnitQuat.from_rotation_vector(angular_velocity * dt).multiply(rot)

    _advance_wall(world, contact, dt)
    world.time += dt

    new_state = replace(state, pose=RigidTransform(rotation=rotation, translation=translation),
                        velocity=velocity, angular_velocity=angular_velocity)
    report = StepReport(
        t=world.time,
        net_force=f_net,
        net_torque=tau_net,
        contact=contact.active,
        penetration=contact.penetration,
        breakdown={
            "magnetic": f_mag,
            "contact": contact.normal_force,
            "friction": f_fric,
            "peristalsis": f_peri,
            "gravity": f_grav,
            "external": f_ext,
        },
    )
    return new_state, report


def _advance_wall(world: World, contact: ContactResult, dt: float):
    """Deform the wall under the contact reaction and the travelling wave."""
    if world.mesh is None or world.rest_vertices is None:
        return
    wave_on = (world.peristalsis is not None and world.schedule is not None
               and world.wave_inward_normals is not None
               and world.wave_arc_coords is not None)
    if world.deformation is None and not wave_on:
        return

    displaced = world.rest_vertices
    if world.deformation is not None:
        contacts = []
        if contact.active and np.any(contact.normal_force):
            contacts = [(contact.point, -contact.normal_force)]
        deform_step(world.deformation, world.rest_vertices, contacts, dt,
                    influence_radius=world.deform_influence_radius)
        displaced = displaced + world.deformation.displacement

    if wave_on:
        strength = mmc_phase(world.schedule, world.time).strength
        displaced = displaced + wall_wave_field(
            world.wave_inward_normals, world.wave_arc_coords, world.time,
            world.peristalsis, strength)

    # a quiescent wall (phase-I wave, relaxed tissue) skips the refit
    if not np.array_equal(world.mesh.vertices, displaced):
        world.mesh.update_vertices(displaced)
        world.wall_version += 1


def trajectory_line(t: float, pose: RigidTransform) -> str:
    """One trajectory sample: "timestamp tx ty tz qx qy qz qw"."""
    tx, ty, tz = pose.translation
    q = pose.rotation
    return (f"{t:.6f} {tx:.17g} {ty:.17g} {tz:.17g} "
            f"{q.x:.17g} {q.y:.17g} {q.z:.17g} {q.w:.17g}")
