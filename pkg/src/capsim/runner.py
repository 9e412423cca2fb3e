"""Run orchestration: a scenario in, deterministic log files out.

`Simulation` owns the world, the capsule, the magnets, and the coverage
state for one session; both the CLI runner and the teleoperation service
drive it.  Commands only ever move the external magnets (directly, or
through arm IK) or control session flow; the capsule itself is reached
exclusively through the physics step.

Determinism contract: a fixed scenario plus the same commands applied at
the same step indices produce byte-identical trajectory, report, and
coverage files.  Trajectory timestamps advance one dt per step across
the whole session, monotone even through resets.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .arm import HOME_Q, forward_kinematics, inverse_kinematics
from .dynamics import CapsuleState, World, capsule_inertia, step, trajectory_line
from .errors import InstabilityError, UnreachableError, ValidationError
from .magnetics import MagneticDipole
from .scenario import RunRecord, ScenarioConfig
from .sensing import (
    CoverageMap,
    VisibilityKernel,
    coverage_fraction,
    run_coverage_episode,
    visible_vertices,
)
from .tissue import DeformationState, assign_segments, mmc_phase
from .dynamics import inward_wall_normals
from .geometry import RigidTransform, UnitQuat

#: per-command magnet motion limits (m, rad)
MAX_DELTA_POS = 0.005
MAX_DELTA_ROT = 0.1

#: commands that change physics and therefore belong in the replay log
RECORDED_COMMANDS = ("magnet_delta", "set_magnet_pose", "reset")


@dataclass
class MagnetState:
    """Pose and body-frame moment of one controllable source."""

    pose: RigidTransform
    moment_body: np.ndarray
    arm_mounted: bool = False
    q: np.ndarray | None = None  # joint angles when arm-mounted

    def moment_world(self) -> np.ndarray:
        return self.pose.rotation.rotate(self.moment_body)

    def dipole(self) -> MagneticDipole:
        return MagneticDipole(moment=self.moment_world(),
                              position=self.pose.translation)


def _delta_rotation(droll: float, dpitch: float, dyaw: float) -> UnitQuat:
    """World-frame increment: yaw about z, then pitch about y, then roll about x."""
    qx = UnitQuat.from_axis_angle(np.array([1.0, 0.0, 0.0]), droll)
    qy = UnitQuat.from_axis_angle(np.array([0.0, 1.0, 0.0]), dpitch)
    qz = UnitQuat.from_axis_angle(np.array([0.0, 0.0, 1.0]), dyaw)
    return qx.multiply(qy).multiply(qz)


class Simulation:
    """Single-writer simulation session built from a scenario."""

    def __init__(self, config: ScenarioConfig,
                 max_delta_pos: float = MAX_DELTA_POS,
                 max_delta_rot: float = MAX_DELTA_ROT):
        self.config = config
        self.max_delta_pos = max_delta_pos
        self.max_delta_rot = max_delta_rot
        self.segments = config.load_segments()
        self.rig = config.camera.rig() if config.camera is not None else None
        self.arm = (config.load_arm()
                    if any(m.arm_mounted for m in config.magnets) else None)
        self.rate_hz = 20.0
        self.status = "running"
        self.reset()

    # --- lifecycle ---

    def reset(self):
        """Rebuild world, capsule, magnets, and coverage from the scenario."""
        cfg = self.config
        self.mesh = cfg.load_mesh()
        self.state = CapsuleState(
            pose=cfg.capsule.pose(),
            mass=cfg.capsule.mass,
            radius=cfg.capsule.radius,
            length=cfg.capsule.length,
            inertia=capsule_inertia(cfg.capsule.mass, cfg.capsule.radius,
                                    cfg.capsule.length),
            moment_body=np.array([0.0, 0.0, cfg.capsule.moment]),
        )
        self.magnets = []
        for m in cfg.magnets:
            state = MagnetState(pose=m.pose(), moment_body=np.array(m.moment),
                                arm_mounted=m.arm_mounted)
            if m.arm_mounted:
                state.q = inverse_kinematics(self.arm, state.pose, HOME_Q)
                state.pose = forward_kinematics(self.arm, state.q)
            self.magnets.append(state)

        rest = self.mesh.vertices.copy()
        deformation = None
        if cfg.tissue.deformable:
            deformation = DeformationState.zeros(
                len(rest), spring_factor=cfg.tissue.spring_factor,
                damping=cfg.tissue.damping,
                max_displacement=cfg.tissue.max_displacement)
        wave_normals = wave_arcs = None
        if cfg.peristalsis is not None and self.segments:
            wave_normals = inward_wall_normals(rest, self.segments)
            _, wave_arcs = assign_segments(self.segments, rest)

        self.world = World(
            mesh=self.mesh,
            magnets=[m.dipole() for m in self.magnets],
            friction=cfg.friction,
            friction_mode=cfg.friction_mode,
            peristalsis=cfg.peristalsis,
            schedule=cfg.mmc,
            segments=self.segments,
            deformation=deformation,
            deform_influence_radius=cfg.tissue.influence_radius,
            rest_vertices=rest,
            wave_inward_normals=wave_normals,
            wave_arc_coords=wave_arcs,
            gravity=cfg.gravity,
            contact_stiffness=cfg.contact_stiffness,
            contact_damping=cfg.contact_damping,
        )
        self._kernel = VisibilityKernel(self.mesh) if self.rig is not None else None
        self._kernel_wall = self.world.wall_version
        self.coverage = (CoverageMap.empty(len(self.mesh.vertices))
                         if self.rig is not None else None)
        self.last_report = None
        self.step_index = 0
        if self.rig is not None:
            self._observe()

    # --- commands ---

    def apply_command(self, cmd: dict) -> dict:
        """Validate and apply one command; returns {ok, cmd, reason?}.

        Malformed input is reported, never raised: a bad client message
        must not take the session down.
        """
        name = cmd.get("cmd")
        try:
            if name == "pause":
                self.status = "paused"
            elif name == "resume":
                self.status = "running"
            elif name == "reset":
                self.reset()
            elif name == "set_rate":
                hz = self._number(cmd, "hz")
                if not 1.0 <= hz <= 1000.0:
                    return self._reject(cmd, "hz must lie in [1, 1000]")
                self.rate_hz = hz
            elif name == "magnet_delta":
                return self._apply_delta(cmd)
            elif name == "set_magnet_pose":
                return self._apply_set_pose(cmd)
            else:
                return self._reject(cmd, f"unknown command {name!r}")
        except ValidationError as exc:
            return self._reject(cmd, str(exc))
        return {"ok": True, "cmd": name}

    def _reject(self, cmd: dict, reason: str) -> dict:
        return {"ok": False, "cmd": cmd.get("cmd"), "reason": reason}

    @staticmethod
    def _number(cmd: dict, key: str, default=None) -> float:
        value = cmd.get(key, default)
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ValidationError("expected a number", field=key)
        return float(value)

    def _magnet(self, cmd: dict) -> MagnetState:
        idx = cmd.get("magnet", 0)
        if not isinstance(idx, int) or not 0 <= idx < len(self.magnets):
            raise ValidationError(f"no magnet at index {idx!r}", field="magnet")
        return self.magnets[idx]

    def _apply_delta(self, cmd: dict) -> dict:
        magnet = self._magnet(cmd)
        d = np.array([self._number(cmd, k, 0.0) for k in ("dx", "dy", "dz")])
        r = [self._number(cmd, k, 0.0) for k in ("droll", "dpitch", "dyaw")]
        if np.linalg.norm(d) > self.max_delta_pos + 1e-12:
            return self._reject(
                cmd, f"translation delta exceeds {self.max_delta_pos} m per command")
        if max(abs(v) for v in r) > self.max_delta_rot + 1e-12:
            return self._reject(
                cmd, f"rotation delta exceeds {self.max_delta_rot} rad per command")
        target = RigidTransform(
            _delta_rotation(*r).multiply(magnet.pose.rotation),
            magnet.pose.translation + d)
        return self._move_magnet(cmd, magnet, target)

    def _apply_set_pose(self, cmd: dict) -> dict:
        magnet = self._magnet(cmd)
        pos = cmd.get("position")
        if (not isinstance(pos, list) or len(pos) != 3
                or any(isinstance(v, bool) or not isinstance(v, (int, float))
                       for v in pos)):
            return self._reject(cmd, "position must be a list of 3 numbers")
        quat = cmd.get("quaternion_wxyz")
        rotation = magnet.pose.rotation
        if quat is not None:
            if (not isinstance(quat, list) or len(quat) != 4
                    or any(isinstance(v, bool) or not isinstance(v, (int, float))
                           for v in quat)):
                return self._reject(cmd, "quaternion_wxyz must be a list of 4 numbers")
            try:
                rotation = UnitQuat(*[float(v) for v in quat])
            except ValueError as exc:
                return self._reject(cmd, str(exc))
        target = RigidTransform(rotation, np.array([float(v) for v in pos]))
        return self._move_magnet(cmd, magnet, target)

    def _move_magnet(self, cmd: dict, magnet: MagnetState,
                     target: RigidTransform) -> dict:
        if magnet.arm_mounted:
            try:
                q = inverse_kinematics(self.arm, target, magnet.q)
            except UnreachableError as exc:
                return self._reject(cmd, f"target unreachable ({exc})")
            magnet.q = q
            magnet.pose = forward_kinematics(self.arm, q)
        else:
            magnet.pose = target
        self.world.magnets = [m.dipole() for m in self.magnets]
        return {"ok": True, "cmd": cmd.get("cmd")}

    # --- stepping ---

    def step_once(self):
        """One physics step plus a coverage update; returns the StepReport."""
        try:
            self.state, report = step(self.state, self.world, self.config.dt)
        except InstabilityError as exc:
            raise InstabilityError(f"step {self.step_index}: {exc}") from None
        self.step_index += 1
        self.last_report = report
        if self.rig is not None:
            self._observe()
        return report

    def _observe(self):
        # coverage only grows, so probing already-seen vertices is wasted work
        unseen = np.nonzero(~self.coverage.seen)[0]
        if len(unseen) == 0:
            return
        if self._kernel_wall != self.world.wall_version:
            # the wave or tissue moved the wall; the cached occlusion
            # structure no longer matches it
            self._kernel = VisibilityKernel(self.mesh)
            self._kernel_wall = self.world.wall_version
        ids = visible_vertices(self.mesh, self.state.pose, self.rig,
                               kernel=self._kernel, candidates=unseen)
        self.coverage.mark(ids)

    def coverage_value(self) -> float:
        if self.coverage is None:
            return 0.0
        return coverage_fraction(self.coverage)

    # --- telemetry ---

    def state_frame(self) -> dict:
        """JSON-ready snapshot of everything a console needs to render."""
        pose = self.state.pose
        frame = {
            "type": "state",
            "t": self.world.time,
            "step": self.step_index,
            "status": self.status,
            "position": list(pose.translation),
            "quaternion_wxyz": [pose.rotation.w, pose.rotation.x,
                                pose.rotation.y, pose.rotation.z],
            "velocity": list(self.state.velocity),
            "angular_velocity": list(self.state.angular_velocity),
            "coverage": self.coverage_value(),
            "mmc_phase": (mmc_phase(self.world.schedule, self.world.time).phase_id
                          if self.world.schedule is not None else None),
            "magnets": [{"position": list(m.pose.translation),
                         "quaternion_wxyz": [m.pose.rotation.w, m.pose.rotation.x,
                                             m.pose.rotation.y, m.pose.rotation.z],
                         "moment": list(m.moment_world()),
                         "arm_mounted": m.arm_mounted}
                        for m in self.magnets],
            "arm_q": (list(self.magnets[0].q)
                      if self.magnets and self.magnets[0].q is not None else None),
            "forces": (self.last_report.to_dict()["breakdown"]
                       if self.last_report is not None else None),
        }
        return frame


def load_command_log(path) -> list:
    """Read a JSONL command log; each line is {"step": k, ...command}."""
    commands = []
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            try:
                entry = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValidationError(f"line {lineno}: {exc.msg}",
                                      field="command_log") from None
            if not isinstance(entry, dict) or not isinstance(entry.get("step"), int):
                raise ValidationError(f'line {lineno}: missing integer "step"',
                                      field="command_log")
            commands.append(entry)
    return commands


def _write_coverage_csv(path, rows):
    with open(path, "w") as fh:
        fh.write("t, covered_count, total, C\n")
        for t, covered, total, c in rows:
            fh.write(f"{t:.6f}, {covered}, {total}, {c:.9f}\n")


def _run_greedy(config: ScenarioConfig, sim: Simulation, paths: dict) -> int:
    """Kinematic coverage exploration: the planner moves the capsule pose
    directly; no forces are involved, so step reports record mode only."""
    if sim.rig is None:
        raise ValidationError("greedy controller needs a camera section",
                              field="camera")
    episode = run_coverage_episode(sim.mesh, sim.rig, sim.state.pose,
                                   max_steps=config.steps, target=0.99,
                                   dt=config.dt)
    with open(paths["trajectory"], "w") as fh:
        for t, pose in zip(episode.times[1:], episode.poses[1:]):
            fh.write(trajectory_line(t, pose) + "\n")
    with open(paths["reports"], "w") as fh:
        for t, covered, c, reward in zip(episode.times, episode.covered,
                                         episode.fractions, episode.rewards):
            fh.write(json.dumps({"t": t, "mode": "kinematic",
                                 "covered_count": covered,
                                 "total": episode.total,
                                 "C": c, "reward": reward}) + "\n")
    _write_coverage_csv(paths["coverage"],
                        [(t, n, episode.total, c) for t, n, c in
                         zip(episode.times, episode.covered, episode.fractions)])
    return len(episode.times) - 1


def run_simulation(config: ScenarioConfig, controller: str = "idle") -> RunRecord:
    """Execute one scenario and write its logs; returns the RunRecord.

    Controllers: "idle" steps physics with no commands, "scripted"
    replays the scenario's command log, "greedy" runs the kinematic
    coverage planner.  Identical config and controller give identical
    output bytes.
    """
    if controller not in ("idle", "scripted", "greedy"):
        raise ValidationError(f"unknown controller {controller!r}",
                              field="controller")
    t_start = time.perf_counter()
    out_dir = Path(config.outputs.dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = {
        "trajectory": out_dir / config.outputs.trajectory,
        "reports": out_dir / config.outputs.reports,
        "coverage": out_dir / config.outputs.coverage,
        "commands": out_dir / config.outputs.commands,
    }

    sim = Simulation(config)

    if controller == "greedy":
        steps_done = _run_greedy(config, sim, paths)
        return RunRecord(
            config_hash=config.config_hash(),
            trajectory_path=str(paths["trajectory"]),
            reports_path=str(paths["reports"]),
            coverage_path=str(paths["coverage"]),
            commands_path=None,
            steps=steps_done,
            duration_s=time.perf_counter() - t_start,
        )

    script = []
    if controller == "scripted":
        if config.command_log is None:
            raise ValidationError("scripted controller needs a command_log",
                                  field="command_log")
        script = load_command_log(config.command_log)

    coverage_rows = []
    applied = []
    with open(paths["trajectory"], "w") as traj_fh, \
            open(paths["reports"], "w") as report_fh:
        for k in range(config.steps):
            for entry in script:
                if entry["step"] == k:
                    cmd = {key: v for key, v in entry.items() if key != "step"}
                    result = sim.apply_command(cmd)
                    if result["ok"] and cmd.get("cmd") in RECORDED_COMMANDS:
                        applied.append({"step": k, **cmd})
            report = sim.step_once()
            t_log = (k + 1) * config.dt
            traj_fh.write(trajectory_line(t_log, sim.state.pose) + "\n")
            report_fh.write(json.dumps(report.to_dict()) + "\n")
            if sim.coverage is not None:
                coverage_rows.append((t_log, sim.coverage.covered_count,
                                      sim.coverage.total, sim.coverage_value()))

    coverage_path = None
    if sim.coverage is not None:
        _write_coverage_csv(paths["coverage"], coverage_rows)
        coverage_path = str(paths["coverage"])

    commands_path = None
    if controller == "scripted":
        with open(paths["commands"], "w") as fh:
            for entry in applied:
                fh.write(json.dumps(entry) + "\n")
        commands_path = str(paths["commands"])

    return RunRecord(
        config_hash=config.config_hash(),
        trajectory_path=str(paths["trajectory"]),
        reports_path=str(paths["reports"]),
        coverage_path=coverage_path,
        commands_path=commands_path,
        steps=config.steps,
        duration_s=time.perf_counter() - t_start,
    )
