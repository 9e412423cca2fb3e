"""Rigid transforms (rotation + translation), SE(3)."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .rotation import UnitQuat


@dataclass(frozen=True)
class RigidTransform:
    rotation: UnitQuat = field(default_factory=UnitQuat.identity)
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        t = np.asarray(self.translation, dtype=float).reshape(3)
        if not np.all(np.isfinite(t)):
            raise ValueError("translation must be finite")
        object.__setattr__(self, "translation", t)

    @classmethod
    def identity(cls) -> "RigidTransform":
        return cls()

    @classmethod
    def from_translation(cls, t) -> "RigidTransform":
        return cls(UnitQuat.identity(), np.asarray(t, dtype=float))

    @classmethod
    def from_matrix(cls, m) -> "RigidTransform":
        m = np.asarray(m, dtype=float)
        return cls(UnitQuat.from_matrix(m[:3, :3]), m[:3, 3].copy())

    def matrix(self) -> np.ndarray:
        out = np.eye(4)
        out[:3, :3] = self.rotation.to_matrix()
        out[:3, 3] = self.translation
        return out

    def apply(self, points) -> np.ndarray:
        """Map point(s) of shape (3,) or (N, 3) through the transform."""
        return self.rotation.rotate(points) + self.translation

    def apply_vector(self, v) -> np.ndarray:
        """Rotate direction vector(s); translation does not apply."""
        return self.rotation.rotate(v)

    def inverse(self) -> "RigidTransform":
        rc = self.rotation.conjugate()
        return RigidTransform(rc, -rc.rotate(self.translation))

    def compose(self, other: "RigidTransform") -> "RigidTransform":
        """self applied after other: (self @ other)(p) = self(other(p))."""
        return RigidTransform(
            self.rotation.multiply(other.rotation),
            self.rotation.rotate(other.translation) + self.translation,
        )

    def __matmul__(self, other: "RigidTransform") -> "RigidTransform":
        return self.compose(other)

    def allclose(self, other: "RigidTransform", atol: float = 1e-9) -> bool:
        return (np.allclose(self.translation, other.translation, atol=atol)
                and self.rotation.allclose(other.rotation, atol=atol))

    def to_dict(self) -> dict:
        q = self.rotation
        return {"translation": list(self.translation),
                "quaternion_wxyz": [q.w, q.x, q.y, q.z]}

    @classmethod
    def from_dict(cls, data: dict) -> "RigidTransform":
        w, x, y, z = data.get("quaternion_wxyz", [1.0, 0.0, 0.0, 0.0])
        return cls(UnitQuat(w, x, y, z),
                   np.asarray(data.get("translation", [0.0, 0.0, 0.0]), dtype=float))


def compose(a: RigidTransform, b: RigidTransform) -> RigidTransform:
    """Composition: result applies b first, then a."""
    return a.compose(b)
