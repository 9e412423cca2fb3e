"""Evaluation metrics: alignment, ATE, RPE, ICP, cloud distances."""

import math

import numpy as np
import pytest

from capsim.errors import (
    DegenerateError,
    LengthMismatchError,
    ParseError,
    ValidationError,
)
from capsim.geometry import RigidTransform, UnitQuat
from capsim.metrics import (
    PointCloud,
    PoseSample,
    Trajectory,
    associate,
    ate,
    cloud_to_cloud_rmse,
    icp_align,
    rigid_align,
    rpe_pair,
    rpe_sequence,
)


def random_pose(rng) -> RigidTransform:
    axis = rng.normal(size=3)
    axis /= np.linalg.norm(axis)
    angle = rng.uniform(-math.pi, math.pi)
    return RigidTransform(UnitQuat.from_axis_angle(axis, angle), rng.normal(size=3))


def make_trajectory(poses, t0=0.0, dt=0.1) -> Trajectory:
    return Trajectory(tuple(PoseSample(t0 + i * dt, p) for i, p in enumerate(poses)))


# --- rigid alignment ---


def test_align_identical_points_is_identity():
    rng = np.random.default_rng(0)
    pts = rng.normal(size=(40, 3))
    tf = rigid_align(pts, pts)
    assert np.allclose(tf.rotation.to_matrix(), np.eye(3), atol=1e-12)
    assert np.allclose(tf.translation, 0.0, atol=1e-12)


def test_align_recovers_synthetic_transform():
    rng = np.random.default_rng(1)
    gt = rng.normal(size=(60, 3))
    true = random_pose(rng)
    pred = true.apply(gt)
    tf = rigid_align(pred, gt)
    # tf must invert the synthetic motion
    assert np.max(np.abs(tf.apply(pred) - gt)) < 1e-9
    roundtrip = tf.compose(true).matrix()
    assert np.max(np.abs(roundtrip - np.eye(4))) < 1e-9


def test_align_never_returns_reflection():
    rng = np.random.default_rng(2)
    gt = rng.normal(size=(50, 3))
    mirrored = gt * np.array([-1.0, 1.0, 1.0])
    tf = rigid_align(mirrored, gt)
    assert np.linalg.det(tf.rotation.to_matrix()) > 0.0
    residual = np.linalg.norm(tf.apply(mirrored) - gt, axis=1)
    assert residual.max() > 1e-3


def test_align_rejects_degenerate_inputs():
    line = np.outer(np.arange(10.0), np.array([1.0, 0.0, 0.0]))
    with pytest.raises(DegenerateError):
        rigid_align(line, line)
    with pytest.raises(DegenerateError):
        rigid_align(np.zeros((5, 3)), np.zeros((5, 3)))
    with pytest.raises(LengthMismatchError):
        rigid_align(np.zeros((4, 3)), np.zeros((5, 3)))
    with pytest.raises(DegenerateError):
        rigid_align(np.zeros((2, 3)), np.zeros((2, 3)))


def test_align_with_scale_recovers_similarity():
    rng = np.random.default_rng(3)
    base = rng.normal(size=(80, 3))
    true = random_pose(rng)
    gt = 2.0 * true.rotation.rotate(base) + true.translation
    tf = rigid_align(base, gt, with_scale=True)
    assert abs(tf.scale - 2.0) < 1e-9
    assert np.max(np.abs(tf.apply(base) - gt)) < 1e-9


def test_align_residual_not_worse_than_identity():
    rng = np.random.default_rng(4)
    gt = rng.normal(size=(100, 3))
    pred = random_pose(rng).apply(gt) + 0.01 * rng.normal(size=gt.shape)
    tf = rigid_align(pred, gt)
    before = np.sum((pred - gt) ** 2)
    after = np.sum((tf.apply(pred) - gt) ** 2)
    assert after <= before + 1e-12


# --- ATE ---


def test_ate_identical_is_zero():
    rng = np.random.default_rng(5)
    traj = make_trajectory([random_pose(rng) for _ in range(20)])
    result = ate(traj, traj)
    assert result.mean < 1e-12
    assert result.std < 1e-12


def test_ate_absorbs_constant_offset():
    rng = np.random.default_rng(6)
    gt = make_trajectory([random_pose(rng) for _ in range(25)])
    offset = RigidTransform(UnitQuat.identity(), np.array([0.3, -0.1, 2.0]))
    pred = gt.transformed(offset)
    assert ate(pred, gt).mean < 1e-9


def test_ate_invariant_under_global_rigid_transform():
    rng = np.random.default_rng(7)
    gt = make_trajectory([random_pose(rng) for _ in range(30)])
    pred = make_trajectory(
        [RigidTransform(s.pose.rotation, s.pose.translation + 0.01 * rng.normal(size=3))
         for s in gt.samples])
    base = ate(pred, gt)
    moved = ate(pred.transformed(random_pose(rng)), gt)
    assert abs(base.mean - moved.mean) < 1e-9
    assert np.max(np.abs(base.distances - moved.distances)) < 1e-9


def test_ate_gaussian_noise_matches_expected_magnitude():
    # E|n| for isotropic Gaussian noise in 3-D is sigma * 2 * sqrt(2/pi)
    rng = np.random.default_rng(8)
    sigma = 1e-3
    gt = make_trajectory(
        [RigidTransform(UnitQuat.identity(), rng.uniform(-1, 1, size=3))
         for _ in range(500)])
    pred = make_trajectory(
        [RigidTransform(s.pose.rotation, s.pose.translation + sigma * rng.normal(size=3))
         for s in gt.samples])
    expected = sigma * 2.0 * math.sqrt(2.0 / math.pi)
    assert abs(ate(pred, gt).mean - expected) < 0.2 * expected


def test_ate_length_mismatch():
    rng = np.random.default_rng(9)
    a = make_trajectory([random_pose(rng) for _ in range(5)])
    b = make_trajectory([random_pose(rng) for _ in range(6)])
    with pytest.raises(LengthMismatchError):
        ate(a, b)


# --- RPE ---


def test_rpe_equal_steps_is_zero():
    rng = np.random.default_rng(10)
    p_i = random_pose(rng)
    rel = random_pose(rng)
    q_i = random_pose(rng)
    trans, rot = rpe_pair(p_i, p_i.compose(rel), q_i, q_i.compose(rel))
    assert trans < 1e-12
    assert rot < 1e-9


def test_rpe_unit_translation_step():
    ident = RigidTransform.identity()
    step = RigidTransform(UnitQuat.identity(), np.array([1.0, 0.0, 0.0]))
    trans, rot = rpe_pair(ident, step, ident, ident)
    assert abs(trans - 1.0) < 1e-12
    assert rot < 1e-12


def test_rpe_rotation_angle_recovered_about_any_axis():
    rng = np.random.default_rng(11)
    theta = 0.3
    for _ in range(200):
        axis = rng.normal(size=3)
        axis /= np.linalg.norm(axis)
        spin = RigidTransform(UnitQuat.from_axis_angle(axis, theta), np.zeros(3))
        q_i = random_pose(rng)
        q_i1 = q_i.compose(random_pose(rng))
        p_i = random_pose(rng)
        p_i1 = p_i.compose(q_i.inverse().compose(q_i1)).compose(spin)
        _, rot = rpe_pair(p_i, p_i1, q_i, q_i1)
        assert abs(rot - theta) < 1e-9


def test_rpe_rot_stays_in_domain():
    # half-turn relative mismatch sits exactly at the arccos boundary
    ident = RigidTransform.identity()
    flip = RigidTransform(UnitQuat.from_axis_angle(np.array([0.0, 0.0, 1.0]), math.pi),
                          np.zeros(3))
    _, rot = rpe_pair(ident, flip, ident, ident)
    assert 0.0 <= rot <= math.pi
    assert abs(rot - math.pi) < 1e-9


def test_rpe_sequence_identical_is_zero():
    rng = np.random.default_rng(12)
    traj = make_trajectory([random_pose(rng) for _ in range(15)])
    result = rpe_sequence(traj, traj)
    assert result.trans_mean < 1e-12
    assert result.rot_mean < 1e-9


def test_rpe_sequence_single_pair_has_zero_std():
    rng = np.random.default_rng(13)
    pred = make_trajectory([random_pose(rng) for _ in range(2)])
    gt = make_trajectory([random_pose(rng) for _ in range(2)])
    result = rpe_sequence(pred, gt)
    assert result.trans_std == 0.0
    assert result.rot_std == 0.0


def test_rpe_sequence_constant_offset_each_step():
    rng = np.random.default_rng(14)
    n = 12
    gt_poses = [RigidTransform.identity()]
    for _ in range(n - 1):
        gt_poses.append(gt_poses[-1].compose(random_pose(rng)))
    drift = RigidTransform(UnitQuat.from_axis_angle(np.array([0.0, 1.0, 0.0]), 0.05),
                           np.array([0.002, 0.0, 0.0]))
    pred_poses = [RigidTransform.identity()]
    for i in range(n - 1):
        rel = gt_poses[i].inverse().compose(gt_poses[i + 1])
        pred_poses.append(pred_poses[-1].compose(rel).compose(drift))
    result = rpe_sequence(make_trajectory(pred_poses), make_trajectory(gt_poses))
    expected_trans = np.linalg.norm(drift.translation)
    assert abs(result.trans_mean - expected_trans) < 1e-9
    assert result.trans_std < 1e-9
    assert abs(result.rot_mean - 0.05) < 1e-9
    assert result.rot_std < 1e-9


def test_rpe_invariant_under_independent_global_transforms():
    rng = np.random.default_rng(15)
    pred = make_trajectory([random_pose(rng) for _ in range(20)])
    gt = make_trajectory([random_pose(rng) for _ in range(20)])
    base = rpe_sequence(pred, gt)
    moved = rpe_sequence(pred.transformed(random_pose(rng)),
                         gt.transformed(random_pose(rng)))
    assert np.max(np.abs(base.trans - moved.trans)) < 1e-9
    assert np.max(np.abs(base.rot - moved.rot)) < 1e-9


def test_rpe_sequence_needs_two_samples():
    traj = make_trajectory([RigidTransform.identity()])
    with pytest.raises(LengthMismatchError):
        rpe_sequence(traj, traj)


# --- ICP ---


def test_icp_identical_clouds_converge_immediately():
    rng = np.random.default_rng(16)
    cloud = PointCloud(rng.normal(size=(200, 3)))
    result = icp_align(cloud, cloud)
    assert result.rmse == 0.0
    assert result.iterations == 1
    assert np.allclose(result.transform.matrix(), np.eye(4), atol=1e-12)


def test_icp_recovers_small_perturbation():
    rng = np.random.default_rng(17)
    fixed = PointCloud(rng.uniform(-0.5, 0.5, size=(1000, 3)))
    diameter = np.max(fixed.points.max(axis=0) - fixed.points.min(axis=0)) * math.sqrt(3)
    axis = rng.normal(size=3)
    axis /= np.linalg.norm(axis)
    pert = RigidTransform(UnitQuat.from_axis_angle(axis, math.radians(8.0)),
                          rng.uniform(-1, 1, size=3) * 0.04 * diameter)
    moving = fixed.transformed(pert)
    result = icp_align(moving, fixed)
    assert result.rmse < 1e-6
    assert np.max(np.abs(result.transform.apply(moving.points) - fixed.points)) < 1e-5
    recovered = result.transform.compose(pert).matrix()
    assert np.max(np.abs(recovered - np.eye(4))) < 1e-4


def test_icp_rmse_history_monotone_even_from_bad_init():
    # symmetric grid plus a gross initial guess: may hit a local minimum,
    # but each recorded RMSE must never increase
    xs = np.linspace(-0.1, 0.1, 6)
    grid = np.array([[x, y, 0.0] for x in xs for y in xs])
    fixed = PointCloud(grid)
    init = RigidTransform(
        UnitQuat.from_axis_angle(np.array([0.0, 0.0, 1.0]), math.radians(85.0)),
        np.array([0.15, 0.0, 0.0]))
    result = icp_align(PointCloud(grid.copy()), fixed, init=init)
    history = np.array(result.history)
    assert np.all(np.diff(history) <= 1e-12)


def test_icp_max_pair_distance_gate():
    rng = np.random.default_rng(18)
    pts = rng.uniform(-0.5, 0.5, size=(300, 3))
    fixed = PointCloud(np.vstack([pts, [[50.0, 50.0, 50.0]]]))
    moving = PointCloud(np.vstack([pts + np.array([0.001, 0.0, 0.0]),
                                   [[-60.0, 0.0, 0.0]]]))
    result = icp_align(moving, fixed, max_pair_dist=0.5)
    assert result.rmse < 1e-6
    with pytest.raises(DegenerateError):
        icp_align(moving, fixed, max_pair_dist=1e-12)


def test_icp_rejects_tiny_clouds():
    with pytest.raises(DegenerateError):
        icp_align(PointCloud(np.zeros((2, 3))), PointCloud(np.eye(3)))


# --- cloud-to-cloud ---


def test_cloud_rmse_identical_is_zero():
    rng = np.random.default_rng(19)
    cloud = PointCloud(rng.normal(size=(100, 3)))
    result = cloud_to_cloud_rmse(cloud, cloud)
    assert result.rmse == 0.0
    assert np.all(result.distances == 0.0)


def test_cloud_rmse_translated_plane_grid():
    ys = np.arange(0.0, 1.0, 0.05)
    grid = np.array([[0.0, y, z] for y in ys for z in ys])
    b = PointCloud(grid)
    d = 0.01
    a = PointCloud(grid + np.array([d, 0.0, 0.0]))
    result = cloud_to_cloud_rmse(a, b)
    assert abs(result.rmse - d) < 1e-12
    assert np.max(np.abs(result.distances - d)) < 1e-12


def test_cloud_rmse_is_asymmetric_for_subsets():
    rng = np.random.default_rng(20)
    big = rng.normal(size=(200, 3))
    small = PointCloud(big[:50])
    full = PointCloud(big)
    assert cloud_to_cloud_rmse(small, full).rmse == 0.0
    assert cloud_to_cloud_rmse(full, small).rmse > 0.0


def test_cloud_rmse_rejects_empty():
    with pytest.raises(ValidationError):
        cloud_to_cloud_rmse(PointCloud(np.zeros((0, 3))), PointCloud(np.eye(3)))


# --- trajectory and cloud files ---


def test_trajectory_requires_increasing_timestamps():
    pose = RigidTransform.identity()
    with pytest.raises(ValidationError):
        Trajectory((PoseSample(0.0, pose), PoseSample(0.0, pose)))


def test_trajectory_file_round_trip(tmp_path):
    rng = np.random.default_rng(21)
    traj = make_trajectory([random_pose(rng) for _ in range(10)], dt=0.05)
    path = tmp_path / "traj.txt"
    traj.save(path)
    loaded = Trajectory.load(path)
    assert np.allclose(loaded.times(), traj.times(), atol=1e-9)
    assert np.max(np.abs(loaded.positions() - traj.positions())) == 0.0
    for a, b in zip(loaded.samples, traj.samples):
        assert np.allclose(a.pose.matrix(), b.pose.matrix(), atol=1e-15)


def test_trajectory_load_skips_comments_and_blanks(tmp_path):
    path = tmp_path / "traj.txt"
    path.write_text("# header\n\n0.0 0 0 0 0 0 0 1\n0.1 1 0 0 0 0 0 1\n")
    traj = Trajectory.load(path)
    assert len(traj) == 2
    assert traj.samples[1].pose.translation[0] == 1.0


def test_trajectory_load_reports_bad_line(tmp_path):
    path = tmp_path / "bad.txt"
    path.write_text("0.0 0 0 0 0 0 0 1\n0.1 1 0 0\n")
    with pytest.raises(ParseError) as info:
        Trajectory.load(path)
    assert info.value.line == 2

    path.write_text("0.0 0 0 zero 0 0 0 1\n")
    with pytest.raises(ParseError) as info:
        Trajectory.load(path)
    assert info.value.line == 1


def test_associate_by_nearest_timestamp():
    pose = RigidTransform.identity()
    pred = Trajectory(tuple(PoseSample(t, pose) for t in (0.001, 0.099, 0.31)))
    gt = Trajectory(tuple(PoseSample(t, pose) for t in (0.0, 0.1, 0.2)))
    p, q = associate(pred, gt, max_dt=0.02)
    assert len(p) == len(q) == 2
    assert np.allclose(q.times(), [0.0, 0.1])
    assert np.allclose(p.times(), [0.001, 0.099])


def test_point_cloud_ply_round_trip(tmp_path):
    rng = np.random.default_rng(22)
    cloud = PointCloud(rng.normal(size=(30, 3)), scalars=rng.uniform(size=30))
    path = tmp_path / "cloud.ply"
    cloud.save(path)
    loaded = PointCloud.load(path)
    assert np.max(np.abs(loaded.points - cloud.points)) < 1e-12
    assert np.max(np.abs(loaded.scalars - cloud.scalars)) < 1e-12

    bare = PointCloud(rng.normal(size=(5, 3)))
    bare.save(tmp_path / "bare.ply")
    assert PointCloud.load(tmp_path / "bare.ply").scalars is None


def test_ate_straight_line_tracks_fall_back_to_translation():
    # a run down a straight tube has collinear positions; identical and
    # offset copies must still score zero
    pose = RigidTransform.identity()
    gt = Trajectory(tuple(
        PoseSample(0.1 * i, RigidTransform(UnitQuat.identity(),
                                           np.array([0.0, 0.0, 0.01 * i])))
        for i in range(10)))
    assert ate(gt, gt).mean == 0.0
    shifted = gt.transformed(RigidTransform(UnitQuat.identity(),
                                            np.array([0.5, 0.0, 0.0])))
    assert ate(shifted, gt).mean < 1e-12
