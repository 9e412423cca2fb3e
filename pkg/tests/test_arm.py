import math

import numpy as np
import pytest

from capsim.arm import (
    HOME_Q,
    ArmModel,
    DhJoint,
    default_arm,
    dh_matrix,
    forward_kinematics,
    inverse_kinematics,
)
from capsim.errors import DimensionError, UnreachableError, ValidationError
from capsim.geometry import RigidTransform


def zero_joint(**kw):
    return DhJoint(alpha=0.0, a=0.0, d=0.0, **kw)


def zero_arm():
    return ArmModel(joints=tuple(zero_joint() for _ in range(7)))


class TestDhMatrix:
    def test_all_zero_is_identity(self):
        np.testing.assert_allclose(dh_matrix(zero_joint(), 0.0), np.eye(4), atol=1e-15)

    def test_quarter_turn(self):
        m = dh_matrix(zero_joint(), math.pi / 2.0)
        expected = np.array([[0.0, 1.0, 0.0], [-1.0, 0.0, 0.0], [0.0, 0.0, 1.0]])
        np.testing.assert_allclose(m[:3, :3], expected, atol=1e-15)
        np.testing.assert_allclose(m[:3, 3], np.zeros(3), atol=1e-15)

    def test_rotation_block_proper(self):
        rng = np.random.default_rng(4)
        for conv in ("printed", "standard"):
            for _ in range(30):
                joint = DhJoint(alpha=rng.uniform(-math.pi, math.pi),
                                a=rng.uniform(-0.2, 0.2), d=rng.uniform(-0.4, 0.4))
                m = dh_matrix(joint, rng.uniform(-math.pi, math.pi), conv)
                r = m[:3, :3]
                assert np.linalg.det(r) == pytest.approx(1.0, abs=1e-10)
                np.testing.assert_allclose(r @ r.T, np.eye(3), atol=1e-10)

    def test_unknown_convention(self):
        with pytest.raises(ValidationError):
            dh_matrix(zero_joint(), 0.0, "modified")

    def test_theta_offset_applied(self):
        joint = zero_joint(theta_offset=0.25)
        np.testing.assert_allclose(dh_matrix(joint, 0.5), dh_matrix(zero_joint(), 0.75))


class TestForwardKinematics:
    def test_zero_arm_identity(self):
        fk = forward_kinematics(zero_arm(), np.zeros(7))
        assert fk.allclose(RigidTransform.identity(), atol=1e-15)

    def test_planar_arm_composes_rotations(self):
        # all a=d=alpha=0: the chain reduces to rotations about z only;
        # verified against an independent hand-built matrix product
        arm = zero_arm()
        q = np.array([0.3, -0.2, 0.5, 0.1, -0.4, 0.25, -0.15])
        fk = forward_kinematics(arm, q)

        manual = np.eye(4)
        for qi in q:
            c, s = math.cos(qi), math.sin(qi)
            step = np.array([
                [c, s, 0.0, 0.0],
                [-s, c, 0.0, 0.0],
                [0.0, 0.0, 1.0, 0.0],
                [0.0, 0.0, 0.0, 1.0],
            ])
            manual = manual @ step
        np.testing.assert_allclose(fk.matrix(), manual, atol=1e-12)
        np.testing.assert_allclose(fk.translation, np.zeros(3), atol=1e-15)

    def test_matches_fold_of_dh_matrices(self):
        arm = default_arm()
        rng = np.random.default_rng(8)
        q = rng.uniform(-1.0, 1.0, 7)
        manual = arm.base.matrix()
        for joint, qi in zip(arm.joints, q):
            manual = manual @ dh_matrix(joint, qi, arm.convention)
        manual = manual @ arm.tool.matrix()
        np.testing.assert_allclose(forward_kinematics(arm, q).matrix(), manual, atol=1e-12)

    def test_rotation_orthonormal_random_q(self):
        arm = default_arm()
        rng = np.random.default_rng(12)
        for _ in range(25):
            q = arm.clamp(rng.uniform(-3.0, 3.0, 7))
            r = forward_kinematics(arm, q).rotation.to_matrix()
            np.testing.assert_allclose(r @ r.T, np.eye(3), atol=1e-10)

    def test_wrong_length_rejected(self):
        with pytest.raises(DimensionError):
            forward_kinematics(default_arm(), np.zeros(6))


class TestInverseKinematics:
    def test_round_trip_near_init(self):
        arm = default_arm()
        rng = np.random.default_rng(3)
        for _ in range(10):
            q0 = arm.clamp(HOME_Q + rng.uniform(-0.4, 0.4, 7))
            target = forward_kinematics(arm, q0)
            q = inverse_kinematics(arm, target, q0 + rng.uniform(-0.05, 0.05, 7))
            fk = forward_kinematics(arm, q)
            assert np.linalg.norm(fk.translation - target.translation) < 1e-4
            assert fk.rotation.angle_to(target.rotation) < 1e-3
            assert arm.within_limits(q)

    def test_out_of_reach(self):
        arm = default_arm()
        target = RigidTransform.from_translation([10.0, 0.0, 0.0])
        with pytest.raises(UnreachableError) as exc:
            inverse_kinematics(arm, target, HOME_Q)
        assert exc.value.best_residual > 8.0

    def test_already_at_target(self):
        arm = default_arm()
        target = forward_kinematics(arm, HOME_Q)
        q = inverse_kinematics(arm, target, HOME_Q)
        np.testing.assert_allclose(q, HOME_Q, atol=1e-12)

    def test_success_rate_from_home(self):
        # the acceptance suite runs the full 100; this is a fast smoke check
        arm = default_arm()
        rng = np.random.default_rng(42)
        lo = np.array([j.limit_min for j in arm.joints])
        hi = np.array([j.limit_max for j in arm.joints])
        ok = 0
        for _ in range(20):
            q0 = lo + (hi - lo) * rng.uniform(0.05, 0.95, 7)
            target = forward_kinematics(arm, q0)
            try:
                q = inverse_kinematics(arm, target, HOME_Q)
            except UnreachableError:
                continue
            fk = forward_kinematics(arm, q)
            assert np.linalg.norm(fk.translation - target.translation) < 1e-4
            assert fk.rotation.angle_to(target.rotation) < 1e-3
            assert arm.within_limits(q)
            ok += 1
        assert ok >= 19


class TestModelIO:
    def test_json_round_trip(self, tmp_path):
        arm = default_arm()
        path = tmp_path / "arm.json"
        arm.save(path)
        loaded = ArmModel.load(path)
        assert loaded.convention == arm.convention
        q = np.array([0.1, -0.2, 0.3, -1.5, 0.2, 1.1, 0.4])
        assert forward_kinematics(loaded, q).allclose(forward_kinematics(arm, q), atol=1e-12)

    def test_joint_count_enforced(self):
        with pytest.raises(ValidationError):
            ArmModel(joints=tuple(zero_joint() for _ in range(6)))

    def test_limit_order_enforced(self):
        with pytest.raises(ValidationError):
            DhJoint(alpha=0.0, a=0.0, d=0.0, limit_min=1.0, limit_max=-1.0)
