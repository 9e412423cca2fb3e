"""Acceptance gate: one test per headline guarantee, at full tolerance.

Every test prints a single [PASS]/[FAIL] line with its measured margins
and wall time (run with ``pytest -s`` to see the lines as they happen;
on failure the line appears in the captured output).  Each check also
enforces its own runtime budget.

These tests intentionally re-derive expected values in-file rather than
calling back into the library, so a regression in shared helpers cannot
hide itself.
"""

import math
import time

import numpy as np

from capsim import fixtures
from capsim.arm import (HOME_Q, ArmModel, DhJoint, default_arm,
                        forward_kinematics, inverse_kinematics)
from capsim.dynamics import CapsuleState, World, step
from capsim.errors import UnreachableError
from capsim.friction import FrictionParams, fit_friction_params, total_friction_curve
from capsim.geometry.rotation import UnitQuat
from capsim.geometry.shapes import bent_tube, tube
from capsim.geometry.transform import RigidTransform
from capsim.magnetics import MagneticDipole, coaxial_force_magnitude, force_between
from capsim.metrics import (PointCloud, PoseSample, Trajectory, ate, icp_align,
                            rpe_pair)
from capsim.runner import run_simulation
from capsim.scenario import load_scenario
from capsim.sensing import (CameraIntrinsics, make_rig, run_coverage_episode,
                            visible_vertices)


def _report(name: str, problems: list, detail: str, elapsed: float, budget: float):
    if elapsed >= budget:
        problems.append(f"took {elapsed:.1f} s, budget {budget:.0f} s")
    ok = not problems
    body = detail if ok else "; ".join(problems)
    line = f"[{'PASS' if ok else 'FAIL'}] {name}: {body} ({elapsed:.2f} s)"
    print(line)
    assert ok, line


def _random_pose(rng) -> RigidTransform:
    axis = rng.normal(size=3)
    axis /= np.linalg.norm(axis)
    rot = UnitQuat.from_axis_angle(axis, rng.uniform(-math.pi, math.pi))
    return RigidTransform(rot, rng.uniform(-1.0, 1.0, 3))


# --- magnetics ---

def test_dipole_force_oracles():
    t0 = time.perf_counter()
    problems = []

    expected = 6e-7  # 3 mu0 / (2 pi) for unit moments at 1 m
    closed = coaxial_force_magnitude(1.0, 1.0, 1.0)
    if abs(closed - expected) > 1e-3 * expected:
        problems.append(f"closed form {closed:.6e} N != {expected:.0e} N")

    target = MagneticDipole(moment=[0.0, 0.0, 1.0], position=[0.0, 0.0, 1.0])
    source = MagneticDipole(moment=[0.0, 0.0, 1.0])
    fd = float(np.linalg.norm(force_between(target, [source])))
    if abs(fd - expected) > 1e-3 * expected:
        problems.append(f"finite difference {fd:.6e} N != {expected:.0e} N")

    rng = np.random.default_rng(7)
    worst = 0.0
    for _ in range(100):
        pa = rng.uniform(-0.2, 0.2, 3)
        direction = rng.normal(size=3)
        direction /= np.linalg.norm(direction)
        pb = pa + direction * rng.uniform(0.05, 0.3)
        a = MagneticDipole(moment=rng.uniform(-5.0, 5.0, 3), position=pa)
        b = MagneticDipole(moment=rng.uniform(-5.0, 5.0, 3), position=pb)
        f_ab = force_between(a, [b])
        f_ba = force_between(b, [a])
        scale = max(np.linalg.norm(f_ab), np.linalg.norm(f_ba))
        worst = max(worst, float(np.linalg.norm(f_ab + f_ba) / scale))
    if worst > 1e-6:
        problems.append(f"action-reaction relative residual {worst:.2e} > 1e-6")

    _report("magnetics", problems,
            f"coaxial oracle {closed:.3e} N both routes, "
            f"worst pair residual {worst:.1e}",
            time.perf_counter() - t0, 1.0)


# --- friction ---

def test_friction_fit_round_trip():
    t0 = time.perf_counter()
    problems = []

    true = FrictionParams(a=55.04, b=0.23, c=1.04, big_c=100.0)
    speeds = [0.2, 0.6, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0]
    samples = [(x, total_friction_curve(x, true)) for x in speeds]
    fitted, rmse = fit_friction_params(samples)
    for name, got, want in (("a", fitted.a, 55.04), ("b", fitted.b, 0.23),
                            ("c", fitted.c, 1.04), ("C", fitted.big_c, 100.0)):
        if abs(got - want) > 0.01 * abs(want):
            problems.append(f"{name}={got:.4f} off {want} by >1%")

    for x in (0.0, 0.5, 1.0):
        if total_friction_curve(x, true) != 100.0:
            problems.append(f"constant branch at {x} mm/s != 100 exactly")

    _report("friction fit", problems,
            f"a={fitted.a:.3f} b={fitted.b:.4f} c={fitted.c:.4f} "
            f"C={fitted.big_c:.3f}, fit rmse {rmse:.1e}, flat branch exact",
            time.perf_counter() - t0, 1.0)


# --- trajectory metrics and registration ---

def test_trajectory_metrics_and_icp():
    t0 = time.perf_counter()
    problems = []
    rng = np.random.default_rng(11)

    # ATE of a rigidly moved copy of an arbitrary trajectory
    poses = [_random_pose(rng) for _ in range(200)]
    traj = Trajectory([PoseSample(0.1 * k, p) for k, p in enumerate(poses)])
    moved = traj.transformed(_random_pose(rng))
    res = ate(moved, traj)
    worst_ate = float(np.max(res.distances))
    if worst_ate > 1e-9:
        problems.append(f"aligned ATE {worst_ate:.2e} > 1e-9")

    # relative rotation recovery over 1000 random pose pairs
    worst_rot = 0.0
    for _ in range(1000):
        q_i, q_i1, p_i = (_random_pose(rng) for _ in range(3))
        axis = rng.normal(size=3)
        axis /= np.linalg.norm(axis)
        theta = rng.uniform(0.05, math.pi - 0.05)
        err = RigidTransform(UnitQuat.from_axis_angle(axis, theta), np.zeros(3))
        p_i1 = p_i.compose(q_i.inverse().compose(q_i1).compose(err))
        _, rot = rpe_pair(p_i, p_i1, q_i, q_i1)
        worst_rot = max(worst_rot, abs(rot - theta))
    if worst_rot > 1e-9:
        problems.append(f"relative rotation error {worst_rot:.2e} > 1e-9")

    # registration of perturbed 1000-point clouds, 100 seeded trials
    wins = 0
    for trial in range(100):
        tr = np.random.default_rng(1000 + trial)
        pts = tr.uniform(-0.05, 0.05, (1000, 3))
        diam = float(np.linalg.norm(pts.max(axis=0) - pts.min(axis=0)))
        axis = tr.normal(size=3)
        axis /= np.linalg.norm(axis)
        pert = RigidTransform(
            UnitQuat.from_axis_angle(axis, tr.uniform(0.0, math.radians(10.0))),
            tr.normal(size=3) / math.sqrt(3.0) * 0.05 * diam * tr.uniform())
        result = icp_align(PointCloud(pert.apply(pts)), PointCloud(pts))
        wins += result.rmse < 1e-6
    if wins < 95:
        problems.append(f"registration recovered only {wins}/100 trials")

    _report("metrics", problems,
            f"ATE max {worst_ate:.1e}, rot recovery max {worst_rot:.1e}, "
            f"registration {wins}/100 under 1e-6 rmse",
            time.perf_counter() - t0, 30.0)


# --- coverage planning ---

def test_greedy_coverage_on_fixture_tube():
    t0 = time.perf_counter()
    problems = []

    mesh = tube(radius=fixtures.TUBE_RADIUS, length=fixtures.TUBE_LENGTH,
                n_rings=fixtures.N_RINGS, n_sectors=fixtures.N_SECTORS)
    if len(mesh.vertices) < 2000:
        problems.append(f"fixture tube has {len(mesh.vertices)} < 2000 vertices")
    rig = make_rig("surround", CameraIntrinsics(fx=80.0, fy=80.0, fov=2.618))
    episode = run_coverage_episode(
        mesh, rig, RigidTransform.from_translation([0.0, 0.0, 0.05]),
        max_steps=2000, target=0.95)

    steps = len(episode.fractions) - 1
    c0, c_final = episode.fractions[0], episode.fractions[-1]
    if c_final < 0.90 or steps > 2000:
        problems.append(f"reached C={c_final:.3f} after {steps} steps")
    if any(b < a for a, b in zip(episode.fractions, episode.fractions[1:])):
        problems.append("coverage fraction decreased during the run")
    reward_gap = abs(sum(episode.rewards) - 5.0 * (c_final - c0))
    if reward_gap > 1e-12:
        problems.append(f"sum of rewards off 5*(C_final-C_0) by {reward_gap:.2e}")

    _report("coverage", problems,
            f"C={c_final:.3f} in {steps} steps on {len(mesh.vertices)} vertices, "
            f"monotone, reward telescoping gap {reward_gap:.1e}",
            time.perf_counter() - t0, 120.0)


# --- dynamics determinism and timestep convergence ---

def test_determinism_and_dt_convergence(tmp_path):
    t0 = time.perf_counter()
    problems = []

    demo = tmp_path / "demo"
    demo.mkdir()
    fixtures.main([str(demo)])
    config = load_scenario(demo / "scenario.json")
    first = run_simulation(config, controller="scripted")
    bytes_a = open(first.trajectory_path, "rb").read()
    second = run_simulation(config, controller="scripted")
    bytes_b = open(second.trajectory_path, "rb").read()
    if not bytes_a or bytes_a != bytes_b:
        problems.append("repeated runs produced different trajectory logs")

    def pulled_position(dt):
        state = CapsuleState(pose=RigidTransform.identity(),
                             moment_body=[0.0, 0.0, 0.01])
        world = World(magnets=[MagneticDipole(moment=[0.0, 0.0, 0.5],
                                              position=[0.0, 0.0, 0.15])])
        for _ in range(int(round(1.0 / dt))):
            state, _ = step(state, world, dt=dt)
        return state.pose.translation.copy()

    x_full = pulled_position(1e-3)
    x_half = pulled_position(5e-4)
    drift = float(np.linalg.norm(x_full - x_half) / np.linalg.norm(x_half))
    if drift >= 0.01:
        problems.append(f"halved timestep moved the endpoint {drift:.2%}")

    _report("dynamics", problems,
            f"{first.steps}-step scripted run byte-identical "
            f"({len(bytes_a)} bytes), dt-halving drift {drift:.3%}",
            time.perf_counter() - t0, 60.0)


# --- arm kinematics ---

def test_fk_ik_round_trip():
    t0 = time.perf_counter()
    problems = []

    flat = ArmModel(joints=tuple(DhJoint(alpha=0.0, a=0.0, d=0.0)
                                 for _ in range(7)))
    home = forward_kinematics(flat, np.zeros(7))
    if not (np.array_equal(home.translation, np.zeros(3))
            and np.array_equal(home.rotation.as_array(), [1.0, 0.0, 0.0, 0.0])):
        problems.append("all-zero joint table does not give exact identity")

    arm = default_arm()
    lo = np.array([j.limit_min for j in arm.joints])
    hi = np.array([j.limit_max for j in arm.joints])
    rng = np.random.default_rng(3)
    wins = 0
    for _ in range(100):
        q_true = rng.uniform(lo + 0.05 * (hi - lo), hi - 0.05 * (hi - lo))
        pose = forward_kinematics(arm, q_true)
        try:
            q_sol = inverse_kinematics(arm, pose, HOME_Q)
        except UnreachableError:
            continue
        reached = forward_kinematics(arm, q_sol)
        pos_err = float(np.linalg.norm(reached.translation - pose.translation))
        rot_err = reached.rotation.angle_to(pose.rotation)
        wins += pos_err < 1e-4 and rot_err < 1e-3
    if wins < 95:
        problems.append(f"solved only {wins}/100 reachable targets")

    _report("kinematics", problems,
            f"identity table exact, {wins}/100 targets within 1e-4 m / 1e-3 rad",
            time.perf_counter() - t0, 30.0)


# --- visibility ---

def _exhaustive_visible(mesh, pose, rig) -> np.ndarray:
    """Reference visibility: per vertex, test every camera and every
    triangle with a from-scratch ray cast.  No shared kernel code."""
    tri = mesh.triangle_vertices()
    a = tri[:, 0]
    e1 = tri[:, 1] - a
    e2 = tri[:, 2] - a
    seen = np.zeros(len(mesh.vertices), dtype=bool)
    for mount, intr in rig.cameras:
        cam = pose.compose(mount)
        origin = cam.translation
        p_cam = cam.inverse().apply(mesh.vertices)
        cone = math.cos(intr.fov / 2.0)
        for vid, p in enumerate(p_cam):
            if seen[vid] or p[2] <= 0.0:
                continue
            dist = math.sqrt(p[0] * p[0] + p[1] * p[1] + p[2] * p[2])
            if dist > intr.max_range or p[2] / dist < cone:
                continue
            x, y = p[0] / p[2], p[1] / p[2]
            r2 = x * x + y * y
            scale = 1.0 + intr.k1 * r2 + intr.k2 * r2 * r2
            u = intr.fx * (x * scale) + intr.skew * (y * scale) + intr.cx
            v = intr.fy * (y * scale) + intr.cy
            if not (0.0 <= u < intr.width and 0.0 <= v < intr.height):
                continue
            ray = mesh.vertices[vid] - origin
            reach = float(np.linalg.norm(ray))
            d = ray / reach
            h = np.cross(np.broadcast_to(d, e2.shape), e2)
            det = np.einsum("ij,ij->i", e1, h)
            s = origin - a
            uu = np.einsum("ij,ij->i", s, h)
            q = np.cross(s, e1)
            vv = q @ d
            tt = np.einsum("ij,ij->i", e2, q)
            with np.errstate(divide="ignore", invalid="ignore"):
                uu, vv, tt = uu / det, vv / det, tt / det
            hit = ((np.abs(det) > 1e-12) & (uu >= 0.0) & (vv >= 0.0)
                   & (uu + vv <= 1.0) & (tt > 1e-12) & (tt < reach - 1e-4))
            seen[vid] = not hit.any()
    return np.nonzero(seen)[0]


def test_visibility_against_exhaustive_ray_cast():
    t0 = time.perf_counter()
    problems = []

    mesh = bent_tube(radius=0.01, bend_radius=0.08, n_rings=50, n_sectors=20)
    if len(mesh.vertices) != 1000:
        problems.append(f"bent tube has {len(mesh.vertices)} vertices, wanted 1000")
    wide = CameraIntrinsics(fx=80.0, fy=80.0, fov=math.radians(150.0))
    cases = [(make_rig("mono", wide), off)
             for off in ([0.0, 0.0, 0.005], [0.002, 0.0, 0.03],
                         [0.01, 0.005, 0.05])]
    cases.append((make_rig("surround", wide, tip_offset=0.0), [0.002, 0.0, 0.03]))

    checked = 0
    for rig, offset in cases:
        pose = RigidTransform.from_translation(offset)
        fast = visible_vertices(mesh, pose, rig)
        slow = _exhaustive_visible(mesh, pose, rig)
        if not np.array_equal(fast, slow):
            extra = np.setdiff1d(fast, slow)
            missing = np.setdiff1d(slow, fast)
            problems.append(f"pose {offset}: +{len(extra)}/-{len(missing)} vertices")
        checked += len(slow)

    _report("visibility", problems,
            f"{len(cases)} poses, {checked} visible vertices, fast == exhaustive",
            time.perf_counter() - t0, 10.0)
