"""Unit quaternions for orientation. Scalar-first (w, x, y, z) storage."""

from __future__ import annotations

import math

import numpy as np

_NORM_TOL = 1e-9


class UnitQuat:
    """Unit quaternion. Immutable; every constructor output is normalized."""

    __slots__ = ("w", "x", "y", "z")

    def __init__(self, w: float, x: float, y: float, z: float):
        n = math.sqrt(w * w + x * x + y * y + z * z)
        if not math.isfinite(n) or n < _NORM_TOL:
            raise ValueError(f"cannot normalize quaternion with norm {n}")
        object.__setattr__(self, "w", w / n)
        object.__setattr__(self, "x", x / n)
        object.__setattr__(self, "y", y / n)
        object.__setattr__(self, "z", z / n)

    def __setattr__(self, name, value):
        raise AttributeError("UnitQuat is immutable")

    def __repr__(self):
        return f"UnitQuat({self.w:.9g}, {self.x:.9g}, {self.y:.9g}, {self.z:.9g})"

    @classmethod
    def identity(cls) -> "UnitQuat":
        return cls(1.0, 0.0, 0.0, 0.0)

    @classmethod
    def from_axis_angle(cls, axis, angle: float) -> "UnitQuat":
        axis = np.asarray(axis, dtype=float)
        n = float(np.linalg.norm(axis))
        if n < _NORM_TOL:
            raise ValueError("rotation axis must be non-zero")
        half = 0.5 * angle
        s = math.sin(half) / n
        return cls(math.cos(half), axis[0] * s, axis[1] * s, axis[2] * s)

    @classmethod
    def from_rotation_vector(cls, v) -> "UnitQuat":
        """Exponential map: rotation by ``|v|`` radians about ``v``."""
        v = np.asarray(v, dtype=float)
        angle = float(np.linalg.norm(v))
        if angle < 1e-8:
            # second-order small-angle expansion keeps the map smooth at 0
            s = 0.5 - angle * angle / 48.0
        else:
            s = math.sin(0.5 * angle) / angle
        return cls(math.cos(0.5 * angle), s * v[0], s * v[1], s * v[2])

    @classmethod
    def from_matrix(cls, m) -> "UnitQuat":
        """Quaternion from a 3x3 rotation matrix (Shepperd's method)."""
        m = np.asarray(m, dtype=float)
        t = m[0, 0] + m[1, 1] + m[2, 2]
        if t > 0.0:
            s = math.sqrt(t + 1.0) * 2.0
            return cls(0.25 * s, (m[2, 1] - m[1, 2]) / s,
                       (m[0, 2] - m[2, 0]) / s, (m[1, 0] - m[0, 1]) / s)
        if m[0, 0] >= m[1, 1] and m[0, 0] >= m[2, 2]:
            s = math.sqrt(1.0 + m[0, 0] - m[1, 1] - m[2, 2]) * 2.0
            return cls((m[2, 1] - m[1, 2]) / s, 0.25 * s,
                       (m[0, 1] + m[1, 0]) / s, (m[0, 2] + m[2, 0]) / s)
        if m[1, 1] >= m[2, 2]:
            s = math.sqrt(1.0 + m[1, 1] - m[0, 0] - m[2, 2]) * 2.0
            return cls((m[0, 2] - m[2, 0]) / s, (m[0, 1] + m[1, 0]) / s,
                       0.25 * s, (m[1, 2] + m[2, 1]) / s)
        s = math.sqrt(1.0 + m[2, 2] - m[0, 0] - m[1, 1]) * 2.0
        return cls((m[1, 0] - m[0, 1]) / s, (m[0, 2] + m[2, 0]) / s,
                   (m[1, 2] + m[2, 1]) / s, 0.25 * s)

    def to_matrix(self) -> np.ndarray:
        w, x, y, z = self.w, self.x, self.y, self.z
        return np.array([
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ])

    def multiply(self, other: "UnitQuat") -> "UnitQuat":
        """Hamilton product self * other, renormalized."""
        w1, x1, y1, z1 = self.w, self.x, self.y, self.z
        w2, x2, y2, z2 = other.w, other.x, other.y, other.z
        return UnitQuat(
            w1 * w2 - x1 * x2 - y1 * y2 - z1 * z2,
            w1 * x2 + x1 * w2 + y1 * z2 - z1 * y2,
            w1 * y2 - x1 * z2 + y1 * w2 + z1 * x2,
            w1 * z2 + x1 * y2 - y1 * x2 + z1 * w2,
        )

    def conjugate(self) -> "UnitQuat":
        return UnitQuat(self.w, -self.x, -self.y, -self.z)

    def rotate(self, v) -> np.ndarray:
        """Rotate vector(s) of shape (3,) or (N, 3)."""
        v = np.asarray(v, dtype=float)
        q = np.array([self.x, self.y, self.z])
        t = 2.0 * np.cross(q, v)
        return v + self.w * t + np.cross(q, t)

    def to_rotation_vector(self) -> np.ndarray:
        """Log map. Angle in [0, pi] times the unit axis."""
        w = min(1.0, max(-1.0, self.w))
        sign = 1.0
        if w < 0.0:  # pick the representative with w >= 0 so angle <= pi
            w, sign = -w, -1.0
        angle = 2.0 * math.acos(w)
        s = math.sqrt(max(0.0, 1.0 - w * w))
        if s < 1e-12:
            return sign * 2.0 * np.array([self.x, self.y, self.z])
        return sign * (angle / s) * np.array([self.x, self.y, self.z])

    def angle_to(self, other: "UnitQuat") -> float:
        """Geodesic angle in radians between two orientations."""
        dot = abs(self.w * other.w + self.x * other.x
                  + self.y * other.y + self.z * other.z)
        return 2.0 * math.acos(min(1.0, dot))

    def as_array(self) -> np.ndarray:
        return np.array([self.w, self.x, self.y, self.z])

    def norm(self) -> float:
        return math.sqrt(self.w ** 2 + self.x ** 2 + self.y ** 2 + self.z ** 2)

    def allclose(self, other: "UnitQuat", atol: float = 1e-9) -> bool:
        """Equality as rotations: q and -q are the same orientation."""
        a, b = self.as_array(), other.as_array()
        return bool(np.allclose(a, b, atol=atol) or np.allclose(a, -b, atol=atol))
