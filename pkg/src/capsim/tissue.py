"""Soft-wall response and peristalsis.

Two independent effects live here:

* contact deformation: wall vertices near a contact receive the contact
  force attenuated by distance, integrate a damped spring, and relax
  back to rest when the capsule moves away;
* peristalsis: a migrating-motor-complex schedule gates a propulsive
  force on the capsule and a travelling sine wave on the wall itself.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateSegmentError, InstabilityError, ValidationError
from .geometry import CenterlineSegment

VERTEX_MASS = 1.0  # kg, fixed

PHASE_IDS = ("I", "II", "III", "IV")


def attenuated_force(force, distance: float) -> np.ndarray:
    """Contact force felt at a wall vertex ``distance`` meters away.

    F_v = F / (d^2 + 1): full strength at the contact point, quadratic
    falloff beyond it.
    """
    if distance < 0:
        raise ValueError("distance must be nonnegative")
    return np.asarray(force, dtype=float) / (distance * distance + 1.0)


@dataclass
class DeformationState:
    """Damped-spring state of every wall vertex.

    displacement and velocity are (N, 3) arrays relative to the rest
    mesh.  Each vertex is an independent unit mass on a linear spring
    with rate ``spring_factor`` (1/s^2) and velocity damping ``damping``
    (1/s).
    """

    displacement: np.ndarray
    velocity: np.ndarray
    spring_factor: float = 50.0
    damping: float = 10.0
    max_displacement: float = 0.05

    @classmethod
    def zeros(cls, n_vertices: int, spring_factor: float = 50.0, damping: float = 10.0,
              max_displacement: float = 0.05) -> "DeformationState":
        return cls(
            displacement=np.zeros((n_vertices, 3)),
            velocity=np.zeros((n_vertices, 3)),
            spring_factor=spring_factor,
            damping=damping,
            max_displacement=max_displacement,
        )


def deform_step(state: DeformationState, rest_vertices: np.ndarray, contacts, dt: float,
                influence_radius: float = 0.02) -> DeformationState:
    """Advance the wall deformation by one step of size ``dt``.

    ``contacts`` is a sequence of (point, force) pairs.  Each contact
    pushes on the vertices within ``influence_radius`` of it with the
    distance-attenuated force; all vertices feel the spring return and
    damping.  Update order per vertex (unit mass):

        dv = (F_v - k_s x) dt;  v <- (v + dv)(1 - mu dt);  x <- x + v dt

    Mutates ``state`` in place and returns it.  Raises InstabilityError
    when any vertex strays past ``state.max_displacement``.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    x = state.displacement
    v = state.velocity

    applied = np.zeros_like(x)
    if contacts:
        current = rest_vertices + x
        for point, force in contacts:
            point = np.asarray(point, dtype=float)
            d = np.linalg.norm(current - point, axis=1)
            near = d <= influence_radius
            if not np.any(near):
                continue
            applied[near] += np.asarray(force, dtype=float) / (d[near, None] ** 2 + 1.0)

    v += (applied - state.spring_factor * x) * dt
    v *= 1.0 - state.damping * dt
    x += v * dt

    worst = float(np.max(np.linalg.norm(x, axis=1))) if len(x) else 0.0
    if worst > state.max_displacement:
        raise InstabilityError(
            f"wall displacement {worst:.4f} m exceeds limit {state.max_displacement:.4f} m"
        )
    return state


def segment_direction(seg: CenterlineSegment) -> np.ndarray:
    """Unit vector from segment start to segment end."""
    delta = np.asarray(seg.end, dtype=float) - np.asarray(seg.start, dtype=float)
    norm = float(np.linalg.norm(delta))
    if norm == 0.0:
        raise DegenerateSegmentError("centerline segment has zero length")
    return delta / norm


@dataclass(frozen=True)
class PeristalsisParams:
    """Propulsion and wall-wave parameters.

    alpha scales the propagation velocity along the segment direction,
    beta couples the velocity mismatch into force.  No measured
    magnitudes exist for either, so the defaults here are tuning
    choices, not ground truth.
    """

    alpha: float = 0.02
    beta: float = 0.5
    wave_amplitude: float = 0.002
    wave_frequency: float = 20.0
    wave_speed: float = 0.01

    def __post_init__(self):
        if self.alpha < 0 or self.beta < 0:
            raise ValidationError("alpha and beta must be nonnegative", field="alpha/beta")


def peristaltic_force(seg_dir, params: PeristalsisParams, capsule_velocity,
                      phase_strength: float) -> np.ndarray:
    """Propulsive force on the capsule from the travelling contraction.

    F_p = beta * strength * (v_p - u), with propagation velocity
    v_p = alpha * seg_dir and capsule velocity u.  Strength 0 (the
    quiescent MMC phase) gives exactly zero force.
    """
    v_p = params.alpha * np.asarray(seg_dir, dtype=float)
    u = np.asarray(capsule_velocity, dtype=float)
    return params.beta * phase_strength * (v_p - u)


@dataclass(frozen=True)
class MmcPhase:
    phase_id: str
    duration_min: float
    strength: float


@dataclass(frozen=True)
class MmcSchedule:
    """One migrating-motor-complex cycle: four ordered phases.

    Defaults: 100 min cycle split 50/25/7.5/17.5 with contraction
    strengths 0/0.5/1.0/0.1 (phase I quiescent, phase III the burst).
    """

    phases: tuple = field(
        default_factory=lambda: (
            MmcPhase("I", 50.0, 0.0),
            MmcPhase("II", 25.0, 0.5),
            MmcPhase("III", 7.5, 1.0),
            MmcPhase("IV", 17.5, 0.1),
        )
    )

    def __post_init__(self):
        if tuple(p.phase_id for p in self.phases) != PHASE_IDS:
            raise ValidationError("schedule must list phases I, II, III, IV in order",
                                  field="phases")
        for p in self.phases:
            if p.duration_min <= 0:
                raise ValidationError(f"phase {p.phase_id} duration must be positive",
                                      field="phases")
            if not 0.0 <= p.strength <= 1.0:
                raise ValidationError(f"phase {p.phase_id} strength must lie in [0, 1]",
                                      field="phases")

    @property
    def cycle_minutes(self) -> float:
        return sum(p.duration_min for p in self.phases)

    @property
    def cycle_seconds(self) -> float:
        return 60.0 * self.cycle_minutes


def mmc_phase(schedule: MmcSchedule, t: float) -> MmcPhase:
    """Phase active at time ``t`` seconds; boundaries open into the next phase."""
    t_min = (t / 60.0) % schedule.cycle_minutes
    elapsed = 0.0
    for phase in schedule.phases:
        elapsed += phase.duration_min
        if t_min < elapsed:
            return phase
    return schedule.phases[-1]  # guards float roundoff at the wrap point


def wall_wave_phase(arc_coord: float, t: float, params: PeristalsisParams) -> float:
    return 2.0 * math.pi * params.wave_frequency * (arc_coord - params.wave_speed * t)


def wall_wave_displacement(inward_normal, arc_coord: float, t: float,
                           params: PeristalsisParams, strength: float) -> np.ndarray:
    """Travelling-sine wall displacement at one vertex.

    amplitude * strength * sin(2 pi f s - 2 pi f c t) along the inward
    vertex normal, where s is the arc-length coordinate of the vertex
    along the organ centerline.
    """
    scalar = params.wave_amplitude * strength * math.sin(wall_wave_phase(arc_coord, t, params))
    return scalar * np.asarray(inward_normal, dtype=float)


def wall_wave_field(inward_normals: np.ndarray, arc_coords: np.ndarray, t: float,
                    params: PeristalsisParams, strength: float) -> np.ndarray:
    """Vectorized wall wave for every vertex; (N, 3) displacement array."""
    phase = 2.0 * math.pi * params.wave_frequency * (
        np.asarray(arc_coords, dtype=float) - params.wave_speed * t)
    scale = params.wave_amplitude * strength * np.sin(phase)
    return scale[:, None] * np.asarray(inward_normals, dtype=float)


def assign_segments(segments, vertices: np.ndarray):
    """Nearest-axis segment assignment and arc-length coordinates.

    For each vertex, finds the closest point among all segment axes and
    returns (segment_index, arc_coord) arrays, where arc_coord is the
    cumulative centerline length up to that closest point.
    """
    verts = np.asarray(vertices, dtype=float)
    n = len(verts)
    best_d2 = np.full(n, np.inf)
    seg_idx = np.zeros(n, dtype=int)
    arc = np.zeros(n)

    offset = 0.0
    for i, seg in enumerate(segments):
        start = np.asarray(seg.start, dtype=float)
        axis = np.asarray(seg.end, dtype=float) - start
        length = float(np.linalg.norm(axis))
        if length == 0.0:
            raise DegenerateSegmentError(f"segment {i} has zero length")
        t = np.clip((verts - start) @ axis / (length * length), 0.0, 1.0)
        closest = start + t[:, None] * axis
        d2 = np.sum((verts - closest) ** 2, axis=1)
        better = d2 < best_d2
        best_d2[better] = d2[better]
        seg_idx[better] = i
        arc[better] = offset + t[better] * length
        offset += length
    return seg_idx, arc
