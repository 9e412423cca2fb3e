"""Point-dipole magnetics: field, torque on a dipole, force on a dipole.

The force is the gradient of m . B, evaluated by central finite
differences so that any field source (single magnet, superposition of
several, arm-mounted actuator) is handled by one code path.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import SingularityError

MU0 = 4.0e-7 * math.pi  # permeability of free space, N/A^2

#: closest approach allowed to a dipole center; physical magnets cannot overlap
R_MIN = 1e-3

#: finite-difference step for force evaluation, meters
DEFAULT_FD_STEP = 1e-5


@dataclass(frozen=True)
class MagneticDipole:
    """Point dipole with moment (A.m^2) at a world position (m)."""

    moment: np.ndarray
    position: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        object.__setattr__(self, "moment", np.asarray(self.moment, dtype=float).reshape(3))
        object.__setattr__(self, "position", np.asarray(self.position, dtype=float).reshape(3))
        if not (np.all(np.isfinite(self.moment)) and np.all(np.isfinite(self.position))):
            raise ValueError("dipole moment and position must be finite")


def dipole_field(source: MagneticDipole, point, r_min: float = R_MIN) -> np.ndarray:
    """Magnetic flux density (Tesla) of ``source`` at ``point``.

    B = (mu0 / 4 pi) (1 / r^3) [3 (m . rhat) rhat - m]

    Raises SingularityError when the evaluation point is closer than
    ``r_min`` to the dipole center.
    """
    r_vec = np.asarray(point, dtype=float) - source.position
    r = float(np.linalg.norm(r_vec))
    if r < r_min:
        raise SingularityError(f"field requested {r:.2e} m from dipole (guard {r_min:.0e} m)")
    rhat = r_vec / r
    m = source.moment
    return (MU0 / (4.0 * math.pi)) / r ** 3 * (3.0 * (m @ rhat) * rhat - m)


def total_field(sources, point, r_min: float = R_MIN) -> np.ndarray:
    """Superposition of several dipole sources."""
    b = np.zeros(3)
    for src in sources:
        b += dipole_field(src, point, r_min=r_min)
    return b


def dipole_torque(moment, b_field) -> np.ndarray:
    """Torque N = m x B (N.m) on a dipole in field B."""
    return np.cross(np.asarray(moment, dtype=float), np.asarray(b_field, dtype=float))


def dipole_force(target: MagneticDipole, field_fn, step: float = DEFAULT_FD_STEP) -> np.ndarray:
    """Force F = grad(m . B) on ``target`` in the field ``field_fn``.

    ``field_fn`` maps a world point to B. The gradient of the scalar
    m . B is taken by central differences with spacing ``step``.
    Singularities raised by ``field_fn`` propagate.
    """
    m = target.moment
    p = target.position
    force = np.zeros(3)
    for axis in range(3):
        dp = np.zeros(3)
        dp[axis] = step
        e_plus = m @ np.asarray(field_fn(p + dp), dtype=float)
        e_minus = m @ np.asarray(field_fn(p - dp), dtype=float)
        force[axis] = (e_plus - e_minus) / (2.0 * step)
    return force


def force_between(target: MagneticDipole, sources, step: float = DEFAULT_FD_STEP,
                  r_min: float = R_MIN) -> np.ndarray:
    """Force on ``target`` due to a list of source dipoles."""
    return dipole_force(target, lambda p: total_field(sources, p, r_min=r_min), step=step)


def coaxial_force_magnitude(m1: float, m2: float, separation: float) -> float:
    """Closed-form attraction between coaxial parallel dipoles.

    |F| = 3 mu0 m1 m2 / (2 pi d^4). Used as an independent oracle for
    the finite-difference force path.
    """
    return 3.0 * MU0 * m1 * m2 / (2.0 * math.pi * separation ** 4)
