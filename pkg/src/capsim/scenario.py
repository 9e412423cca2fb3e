"""Scenario configuration: one JSON file describing a complete run.

A scenario names the lumen mesh, the capsule, the external magnets, the
friction/peristalsis/camera settings, and the integrator budget.  Loading
fills documented defaults, rejects unknown keys, and verifies that every
referenced file exists.  The canonical form hashes stably regardless of
key order in the source file, so a config hash plus a seed pins down a
run completely.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .arm import ArmModel, default_arm
from .errors import MissingFileError, ParseError, ValidationError
from .friction import FrictionParams
from .geometry import RigidTransform, TriMesh, UnitQuat
from .geometry.mesh import CenterlineSegment, load_mesh as load_mesh_file
from .sensing import CameraIntrinsics, CameraRig, make_rig
from .tissue import MmcPhase, MmcSchedule, PeristalsisParams

DT_MAX = 1e-3  # matches the integrator bound

_REQUIRED = object()


class _Section:
    """Typed reader over one nested config object.

    Every getter pops its key, so whatever remains at ``finish`` is an
    unknown key and gets rejected by its full dotted path.
    """

    def __init__(self, data, prefix: str = ""):
        if not isinstance(data, dict):
            raise ValidationError("expected a JSON object", field=prefix or "<root>")
        self.data = dict(data)
        self.prefix = prefix

    def path(self, key: str) -> str:
        return f"{self.prefix}.{key}" if self.prefix else key

    def take(self, key: str, default=_REQUIRED):
        if key in self.data:
            return self.data.pop(key)
        if default is _REQUIRED:
            raise ValidationError("required key missing", field=self.path(key))
        return default

    def number(self, key, default=_REQUIRED, positive=False, nonneg=False) -> float:
        value = self.take(key, default)
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ValidationError("expected a number", field=self.path(key))
        value = float(value)
        if positive and value <= 0:
            raise ValidationError("must be positive", field=self.path(key))
        if nonneg and value < 0:
            raise ValidationError("must be non-negative", field=self.path(key))
        return value

    def integer(self, key, default=_REQUIRED, nonneg=False) -> int:
        value = self.take(key, default)
        if isinstance(value, bool) or not isinstance(value, int):
            raise ValidationError("expected an integer", field=self.path(key))
        if nonneg and value < 0:
            raise ValidationError("must be non-negative", field=self.path(key))
        return value

    def boolean(self, key, default=_REQUIRED) -> bool:
        value = self.take(key, default)
        if not isinstance(value, bool):
            raise ValidationError("expected true or false", field=self.path(key))
        return value

    def string(self, key, default=_REQUIRED, choices=None) -> str:
        value = self.take(key, default)
        if not isinstance(value, str):
            raise ValidationError("expected a string", field=self.path(key))
        if choices is not None and value not in choices:
            raise ValidationError(f"must be one of {sorted(choices)}",
                                  field=self.path(key))
        return value

    def vector(self, key, n: int, default=_REQUIRED) -> tuple:
        value = self.take(key, default)
        if isinstance(value, tuple):  # already normalized default
            return value
        if (not isinstance(value, list) or len(value) != n
                or any(isinstance(v, bool) or not isinstance(v, (int, float))
                       for v in value)):
            raise ValidationError(f"expected a list of {n} numbers",
                                  field=self.path(key))
        return tuple(float(v) for v in value)

    def section(self, key) -> "_Section | None":
        value = self.take(key, None)
        if value is None:
            return None
        return _Section(value, prefix=self.path(key))

    def finish(self):
        if self.data:
            key = sorted(self.data)[0]
            raise ValidationError("unknown key", field=self.path(key))


def _anchor_outputs(outputs: "OutputConfig", base_dir) -> "OutputConfig":
    """Pin a relative output dir to the scenario's own directory."""
    path = Path(outputs.dir)
    if path.is_absolute():
        return outputs
    return replace(outputs, dir=str(Path(base_dir) / path))


def _resolve(base_dir, name: str, key: str, must_exist: bool = True) -> str:
    path = Path(name)
    if not path.is_absolute():
        path = Path(base_dir) / path
    if must_exist and not path.is_file():
        raise MissingFileError(f"{key}: file not found: {path}")
    return str(path)


@dataclass(frozen=True)
class CapsuleConfig:
    mass: float = 0.005
    radius: float = 0.0055
    length: float = 0.026
    moment: float = 0.01  # dipole magnitude along the body +z axis, A m^2
    position: tuple = (0.0, 0.0, 0.0)
    quaternion_wxyz: tuple = (1.0, 0.0, 0.0, 0.0)

    def pose(self) -> RigidTransform:
        w, x, y, z = self.quaternion_wxyz
        return RigidTransform(UnitQuat(w, x, y, z), np.array(self.position))

    def to_dict(self) -> dict:
        return {"mass": self.mass, "radius": self.radius, "length": self.length,
                "moment": self.moment, "position": list(self.position),
                "quaternion_wxyz": list(self.quaternion_wxyz)}

    @classmethod
    def parse(cls, sec: _Section | None) -> "CapsuleConfig":
        if sec is None:
            return cls()
        out = cls(
            mass=sec.number("mass", cls.mass, positive=True),
            radius=sec.number("radius", cls.radius, positive=True),
            length=sec.number("length", cls.length, positive=True),
            moment=sec.number("moment", cls.moment, nonneg=True),
            position=sec.vector("position", 3, cls.position),
            quaternion_wxyz=sec.vector("quaternion_wxyz", 4, cls.quaternion_wxyz),
        )
        sec.finish()
        return out


@dataclass(frozen=True)
class MagnetConfig:
    """One external magnetic source.

    ``moment`` is the dipole vector in the magnet's body frame; commands
    that rotate the magnet rotate the moment with it.  Arm-mounted
    magnets move only through inverse kinematics.
    """

    moment: tuple = (0.0, 0.0, 8.0)
    position: tuple = (0.0, 0.1, 0.0)
    quaternion_wxyz: tuple = (1.0, 0.0, 0.0, 0.0)
    arm_mounted: bool = False

    def pose(self) -> RigidTransform:
        w, x, y, z = self.quaternion_wxyz
        return RigidTransform(UnitQuat(w, x, y, z), np.array(self.position))

    def to_dict(self) -> dict:
        return {"moment": list(self.moment), "position": list(self.position),
                "quaternion_wxyz": list(self.quaternion_wxyz),
                "arm_mounted": self.arm_mounted}

    @classmethod
    def parse(cls, sec: _Section) -> "MagnetConfig":
        out = cls(
            moment=sec.vector("moment", 3, cls.moment),
            position=sec.vector("position", 3, cls.position),
            quaternion_wxyz=sec.vector("quaternion_wxyz", 4, cls.quaternion_wxyz),
            arm_mounted=sec.boolean("arm_mounted", cls.arm_mounted),
        )
        sec.finish()
        return out


@dataclass(frozen=True)
class CameraConfig:
    kind: str = "surround"
    intrinsics: CameraIntrinsics = field(default_factory=CameraIntrinsics)
    tip_offset: float = 0.013
    baseline: float = 0.004

    def rig(self) -> CameraRig:
        return make_rig(self.kind, self.intrinsics, tip_offset=self.tip_offset,
                        baseline=self.baseline)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "intrinsics": self.intrinsics.to_dict(),
                "tip_offset": self.tip_offset, "baseline": self.baseline}

    @classmethod
    def parse(cls, sec: _Section | None) -> "CameraConfig | None":
        if sec is None:
            return None
        kind = sec.string("kind", cls.kind,
                          choices={"mono", "stereo", "dual", "panoramic", "surround"})
        intr_sec = sec.section("intrinsics")
        if intr_sec is None:
            intr = CameraIntrinsics()
        else:
            defaults = CameraIntrinsics()
            intr = CameraIntrinsics(
                fx=intr_sec.number("fx", defaults.fx, positive=True),
                fy=intr_sec.number("fy", defaults.fy, positive=True),
                cx=intr_sec.number("cx", defaults.cx),
                cy=intr_sec.number("cy", defaults.cy),
                skew=intr_sec.number("skew", defaults.skew),
                k1=intr_sec.number("k1", defaults.k1),
                k2=intr_sec.number("k2", defaults.k2),
                width=intr_sec.integer("width", defaults.width),
                height=intr_sec.integer("height", defaults.height),
                fov=intr_sec.number("fov", defaults.fov, positive=True),
                max_range=intr_sec.number("max_range", defaults.max_range, positive=True),
            )
            intr_sec.finish()
        out = cls(kind=kind, intrinsics=intr,
                  tip_offset=sec.number("tip_offset", cls.tip_offset),
                  baseline=sec.number("baseline", cls.baseline, positive=True))
        sec.finish()
        return out


@dataclass(frozen=True)
class TissueConfig:
    """Deformable-wall settings; the wall stays rigid when disabled."""

    deformable: bool = False
    spring_factor: float = 50.0
    damping: float = 10.0
    max_displacement: float = 0.05
    influence_radius: float = 0.02

    def to_dict(self) -> dict:
        return {"deformable": self.deformable, "spring_factor": self.spring_factor,
                "damping": self.damping, "max_displacement": self.max_displacement,
                "influence_radius": self.influence_radius}

    @classmethod
    def parse(cls, sec: _Section | None) -> "TissueConfig":
        if sec is None:
            return cls()
        out = cls(
            deformable=sec.boolean("deformable", cls.deformable),
            spring_factor=sec.number("spring_factor", cls.spring_factor, positive=True),
            damping=sec.number("damping", cls.damping, nonneg=True),
            max_displacement=sec.number("max_displacement", cls.max_displacement,
                                        positive=True),
            influence_radius=sec.number("influence_radius", cls.influence_radius,
                                        positive=True),
        )
        sec.finish()
        return out


@dataclass(frozen=True)
class OutputConfig:
    dir: str = "."
    trajectory: str = "trajectory.txt"
    coverage: str = "coverage.csv"
    reports: str = "steps.jsonl"
    commands: str = "commands.jsonl"

    def to_dict(self) -> dict:
        return {"dir": self.dir, "trajectory": self.trajectory,
                "coverage": self.coverage, "reports": self.reports,
                "commands": self.commands}

    @classmethod
    def parse(cls, sec: _Section | None) -> "OutputConfig":
        if sec is None:
            return cls()
        out = cls(
            dir=sec.string("dir", cls.dir),
            trajectory=sec.string("trajectory", cls.trajectory),
            coverage=sec.string("coverage", cls.coverage),
            reports=sec.string("reports", cls.reports),
            commands=sec.string("commands", cls.commands),
        )
        sec.finish()
        return out


def _parse_friction(sec: _Section | None) -> tuple:
    defaults = FrictionParams()
    if sec is None:
        return defaults, "curve"
    mode = sec.string("mode", "curve", choices={"curve", "components"})
    params = FrictionParams(
        mu_c=sec.number("mu_c", defaults.mu_c, nonneg=True),
        gamma=sec.number("gamma", defaults.gamma, nonneg=True),
        a=sec.number("a", defaults.a),
        b=sec.number("b", defaults.b),
        c=sec.number("c", defaults.c),
        big_c=sec.number("big_c", defaults.big_c),
    )
    sec.finish()
    return params, mode


def _parse_peristalsis(sec: _Section | None) -> PeristalsisParams | None:
    if sec is None:
        return None
    defaults = PeristalsisParams()
    params = PeristalsisParams(
        alpha=sec.number("alpha", defaults.alpha, nonneg=True),
        beta=sec.number("beta", defaults.beta, nonneg=True),
        wave_amplitude=sec.number("wave_amplitude", defaults.wave_amplitude, nonneg=True),
        wave_frequency=sec.number("wave_frequency", defaults.wave_frequency, positive=True),
        wave_speed=sec.number("wave_speed", defaults.wave_speed, positive=True),
    )
    sec.finish()
    return params


def _parse_mmc(value) -> MmcSchedule | None:
    if value is None:
        return None
    if value == "default":
        return MmcSchedule()
    if not isinstance(value, list):
        raise ValidationError('expected "default" or a list of phases', field="mmc")
    phases = []
    for i, entry in enumerate(value):
        sec = _Section(entry, prefix=f"mmc[{i}]")
        phases.append(MmcPhase(
            phase_id=sec.string("phase"),
            duration_min=sec.number("duration_min", positive=True),
            strength=sec.number("strength", nonneg=True),
        ))
        sec.finish()
    return MmcSchedule(phases=tuple(phases))


@dataclass(frozen=True)
class ScenarioConfig:
    """Validated, fully defaulted description of one simulation run.

    File paths are stored resolved (absolute), so a loaded config can be
    saved anywhere and reloaded unchanged.
    """

    mesh: str
    segments: str | None = None
    arm: str | None = None
    command_log: str | None = None
    capsule: CapsuleConfig = field(default_factory=CapsuleConfig)
    magnets: tuple = ()
    friction: FrictionParams = field(default_factory=FrictionParams)
    friction_mode: str = "curve"
    peristalsis: PeristalsisParams | None = None
    mmc: MmcSchedule | None = None
    camera: CameraConfig | None = None
    tissue: TissueConfig = field(default_factory=TissueConfig)
    contact_stiffness: float = 500.0
    contact_damping: float = 1.0
    gravity: bool = False
    dt: float = 1e-3
    steps: int = 1000
    seed: int = 0
    outputs: OutputConfig = field(default_factory=OutputConfig)

    def to_dict(self) -> dict:
        return {
            "mesh": self.mesh,
            "segments": self.segments,
            "arm": self.arm,
            "command_log": self.command_log,
            "capsule": self.capsule.to_dict(),
            "magnets": [m.to_dict() for m in self.magnets],
            "friction": {"mode": self.friction_mode, "mu_c": self.friction.mu_c,
                         "gamma": self.friction.gamma, "a": self.friction.a,
                         "b": self.friction.b, "c": self.friction.c,
                         "big_c": self.friction.big_c},
            "peristalsis": None if self.peristalsis is None else {
                "alpha": self.peristalsis.alpha, "beta": self.peristalsis.beta,
                "wave_amplitude": self.peristalsis.wave_amplitude,
                "wave_frequency": self.peristalsis.wave_frequency,
                "wave_speed": self.peristalsis.wave_speed},
            "mmc": None if self.mmc is None else [
                {"phase": p.phase_id, "duration_min": p.duration_min,
                 "strength": p.strength} for p in self.mmc.phases],
            "camera": None if self.camera is None else self.camera.to_dict(),
            "tissue": self.tissue.to_dict(),
            "contact_stiffness": self.contact_stiffness,
            "contact_damping": self.contact_damping,
            "gravity": self.gravity,
            "dt": self.dt,
            "steps": self.steps,
            "seed": self.seed,
            "outputs": self.outputs.to_dict(),
        }

    def config_hash(self) -> str:
        canon = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode()).hexdigest()

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2)
            fh.write("\n")

    @classmethod
    def from_dict(cls, data: dict, base_dir=".") -> "ScenarioConfig":
        root = _Section(data)
        mesh = _resolve(base_dir, root.string("mesh"), "mesh")

        segments = root.take("segments", None)
        if segments is not None:
            if not isinstance(segments, str):
                raise ValidationError("expected a path string", field="segments")
            segments = _resolve(base_dir, segments, "segments")

        arm = root.take("arm", None)
        if arm is not None:
            if not isinstance(arm, str):
                raise ValidationError("expected a path string", field="arm")
            arm = _resolve(base_dir, arm, "arm")

        command_log = root.take("command_log", None)
        if command_log is not None:
            if not isinstance(command_log, str):
                raise ValidationError("expected a path string", field="command_log")
            command_log = _resolve(base_dir, command_log, "command_log")

        capsule = CapsuleConfig.parse(root.section("capsule"))

        magnets_raw = root.take("magnets", [])
        if not isinstance(magnets_raw, list):
            raise ValidationError("expected a list", field="magnets")
        magnets = tuple(MagnetConfig.parse(_Section(m, prefix=f"magnets[{i}]"))
                        for i, m in enumerate(magnets_raw))

        friction, friction_mode = _parse_friction(root.section("friction"))
        peristalsis = _parse_peristalsis(root.section("peristalsis"))
        mmc = _parse_mmc(root.take("mmc", None))
        camera = CameraConfig.parse(root.section("camera"))
        tissue = TissueConfig.parse(root.section("tissue"))

        dt = root.number("dt", 1e-3, positive=True)
        if dt > DT_MAX:
            raise ValidationError(f"must not exceed {DT_MAX}", field="dt")

        config = cls(
            mesh=mesh,
            segments=segments,
            arm=arm,
            command_log=command_log,
            capsule=capsule,
            magnets=magnets,
            friction=friction,
            friction_mode=friction_mode,
            peristalsis=peristalsis,
            mmc=mmc,
            camera=camera,
            tissue=tissue,
            contact_stiffness=root.number("contact_stiffness", 500.0, positive=True),
            contact_damping=root.number("contact_damping", 1.0, nonneg=True),
            gravity=root.boolean("gravity", False),
            dt=dt,
            steps=root.integer("steps", 1000, nonneg=True),
            seed=root.integer("seed", 0),
            outputs=_anchor_outputs(OutputConfig.parse(root.section("outputs")),
                                    base_dir),
        )
        root.finish()
        if config.camera is not None:
            config.camera.rig()  # surfaces bad rig settings at load time
        return config

    # --- runtime object loaders ---

    def load_mesh(self) -> TriMesh:
        mesh, _ = load_mesh_file(self.mesh)
        if len(mesh.triangles) == 0:
            raise ValidationError("mesh file has no triangles", field="mesh")
        return mesh

    def load_segments(self) -> list | None:
        if self.segments is None:
            return None
        with open(self.segments) as fh:
            try:
                data = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ParseError(exc.msg, line=exc.lineno, column=exc.colno) from None
        entries = data.get("segments") if isinstance(data, dict) else None
        if not isinstance(entries, list) or not entries:
            raise ValidationError('expected {"segments": [...]}', field="segments")
        out = []
        for i, entry in enumerate(entries):
            sec = _Section(entry, prefix=f"segments[{i}]")
            ids = sec.take("vertex_ids")
            if not isinstance(ids, list) or any(
                    isinstance(v, bool) or not isinstance(v, int) for v in ids):
                raise ValidationError("expected a list of vertex indices",
                                      field=sec.path("vertex_ids"))
            out.append(CenterlineSegment(
                start=np.array(sec.vector("start", 3)),
                end=np.array(sec.vector("end", 3)),
                vertex_ids=np.asarray(ids, dtype=np.int64),
            ))
            sec.finish()
        return out

    def load_arm(self) -> ArmModel:
        if self.arm is None:
            return default_arm()
        return ArmModel.load(self.arm)


def load_scenario(path) -> ScenarioConfig:
    """Read and validate a scenario JSON file."""
    p = Path(path)
    if not p.is_file():
        raise MissingFileError(f"scenario file not found: {p}")
    try:
        data = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, line=exc.lineno, column=exc.colno) from None
    return ScenarioConfig.from_dict(data, base_dir=p.parent)


@dataclass(frozen=True)
class RunRecord:
    """Where one finished run put its outputs, plus its identity."""

    config_hash: str
    trajectory_path: str
    reports_path: str
    coverage_path: str | None
    commands_path: str | None
    steps: int
    duration_s: float

    def to_dict(self) -> dict:
        return {"config_hash": self.config_hash,
                "trajectory_path": self.trajectory_path,
                "reports_path": self.reports_path,
                "coverage_path": self.coverage_path,
                "commands_path": self.commands_path,
                "steps": self.steps,
                "duration_s": self.duration_s}
