import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from capsim.geometry import (
    RigidTransform,
    TriMesh,
    UnitQuat,
    closest_point_brute,
    compose,
    ray_cast_brute,
)
from capsim.geometry import shapes


def random_transform(rng):
    axis = rng.normal(size=3)
    angle = rng.uniform(-np.pi, np.pi)
    return RigidTransform(UnitQuat.from_axis_angle(axis, angle), rng.normal(size=3))


class TestQuaternion:
    def test_identity_rotates_nothing(self):
        q = UnitQuat.identity()
        v = np.array([1.0, 2.0, 3.0])
        assert np.allclose(q.rotate(v), v)

    def test_axis_angle_matches_matrix(self):
        q = UnitQuat.from_axis_angle([0, 0, 1], np.pi / 2)
        assert np.allclose(q.rotate([1, 0, 0]), [0, 1, 0], atol=1e-12)
        expected = np.array([[0, -1, 0], [1, 0, 0], [0, 0, 1]], dtype=float)
        assert np.allclose(q.to_matrix(), expected, atol=1e-12)

    def test_matrix_round_trip(self):
        rng = np.random.default_rng(3)
        for _ in range(50):
            q = UnitQuat.from_axis_angle(rng.normal(size=3), rng.uniform(-np.pi, np.pi))
            q2 = UnitQuat.from_matrix(q.to_matrix())
            assert q.allclose(q2, atol=1e-12)

    def test_rotation_vector_round_trip(self):
        rng = np.random.default_rng(4)
        for _ in range(50):
            axis = rng.normal(size=3)
            axis /= np.linalg.norm(axis)
            v = axis * rng.uniform(0, np.pi * 0.999)  # log map wraps beyond pi
            q = UnitQuat.from_rotation_vector(v)
            assert np.allclose(q.to_rotation_vector(), v, atol=1e-9)

    def test_rotation_vector_wraps_as_same_rotation(self):
        v = np.array([0.0, 0.0, 1.5 * np.pi])
        q = UnitQuat.from_rotation_vector(v)
        q2 = UnitQuat.from_rotation_vector(q.to_rotation_vector())
        assert q.allclose(q2, atol=1e-9)

    def test_norm_invariant_after_many_compositions(self):
        rng = np.random.default_rng(5)
        q = UnitQuat.identity()
        for _ in range(1000):
            q = q.multiply(UnitQuat.from_axis_angle(rng.normal(size=3), rng.uniform(-3, 3)))
        assert abs(q.norm() - 1.0) < 1e-9

    def test_zero_quaternion_rejected(self):
        with pytest.raises(ValueError):
            UnitQuat(0.0, 0.0, 0.0, 0.0)


class TestCompose:
    def test_identity_compose_identity(self):
        assert compose(RigidTransform.identity(), RigidTransform.identity()).allclose(
            RigidTransform.identity())

    def test_inverse_gives_identity(self):
        rng = np.random.default_rng(7)
        for _ in range(20):
            t = random_transform(rng)
            assert compose(t, t.inverse()).allclose(RigidTransform.identity(), atol=1e-9)

    def test_translation_compose(self):
        # manual matrix product oracle: translations add
        a = RigidTransform.from_translation([1, 0, 0])
        b = RigidTransform.from_translation([0, 2, 0])
        m = a.matrix() @ b.matrix()
        assert np.allclose(m[:3, 3], [1, 2, 0])
        assert np.allclose(compose(a, b).translation, [1, 2, 0])

    def test_compose_matches_matrix_product(self):
        rng = np.random.default_rng(8)
        for _ in range(30):
            a, b = random_transform(rng), random_transform(rng)
            assert np.allclose(compose(a, b).matrix(), a.matrix() @ b.matrix(), atol=1e-12)

    def test_apply_order(self):
        # result applies b first, then a
        rng = np.random.default_rng(9)
        a, b = random_transform(rng), random_transform(rng)
        p = rng.normal(size=3)
        assert np.allclose(compose(a, b).apply(p), a.apply(b.apply(p)), atol=1e-12)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(min_value=0, max_value=2 ** 31 - 1))
    def test_associativity(self, seed):
        rng = np.random.default_rng(seed)
        a, b, c = (random_transform(rng) for _ in range(3))
        left = compose(compose(a, b), c)
        right = compose(a, compose(b, c))
        assert np.allclose(left.matrix(), right.matrix(), atol=1e-9)


class TestRayCast:
    def test_sphere_from_center(self):
        mesh = shapes.uv_sphere(1.0, 24, 32)
        rng = np.random.default_rng(11)
        for _ in range(20):
            d = rng.normal(size=3)
            d /= np.linalg.norm(d)
            hit = mesh.ray_cast(np.zeros(3), d, 10.0)
            assert hit is not None
            # tessellated sphere: hit radius slightly below 1
            assert 0.97 < hit.distance <= 1.0 + 1e-12

    def test_miss_pointing_away(self):
        mesh = TriMesh([[0, 0, 1], [1, 0, 1], [0, 1, 1]], [[0, 1, 2]])
        assert mesh.ray_cast(np.zeros(3), np.array([0.0, 0.0, -1.0]), 10.0) is None

    def test_beyond_max_dist(self):
        mesh = TriMesh([[-1, -1, 2], [1, -1, 2], [0, 1, 2]], [[0, 1, 2]])
        assert mesh.ray_cast(np.zeros(3), np.array([0.0, 0.0, 1.0]), 1.0) is None
        hit = mesh.ray_cast(np.zeros(3), np.array([0.0, 0.0, 1.0]), 3.0)
        assert hit is not None and hit.distance == pytest.approx(2.0)

    def test_surface_offset_ray_hits_origin_triangle(self):
        mesh = shapes.uv_sphere(1.0, 12, 16)
        rng = np.random.default_rng(13)
        eps = 1e-4
        for tid in rng.integers(0, len(mesh.triangles), size=10):
            centroid = mesh.vertices[mesh.triangles[tid]].mean(axis=0)
            n = mesh.triangle_normal(int(tid))
            hit = mesh.ray_cast(centroid + eps * n, -n, 1.0)
            assert hit is not None
            assert hit.triangle_id == tid
            assert hit.distance == pytest.approx(eps, rel=1e-6)

    def test_bvh_equals_brute_force(self):
        mesh = shapes.bent_tube(n_rings=20, n_sectors=12)
        rng = np.random.default_rng(17)
        lo, hi = mesh.bounds()
        for _ in range(300):
            origin = rng.uniform(lo - 0.02, hi + 0.02)
            d = rng.normal(size=3)
            d /= np.linalg.norm(d)
            a = mesh.ray_cast(origin, d, 1.0)
            b = ray_cast_brute(mesh.vertices, mesh.triangles, origin, d, 1.0)
            if a is None:
                assert b is None
            else:
                assert b is not None
                assert a.distance == b[0] and a.triangle_id == b[1]


class TestClosestPoint:
    def test_query_on_vertex(self):
        mesh = shapes.unit_tetrahedron()
        sp = mesh.closest_point(mesh.vertices[2])
        assert sp.distance == pytest.approx(0.0, abs=1e-12)
        assert np.allclose(sp.point, mesh.vertices[2])

    def test_tetrahedron_centroid(self):
        mesh = shapes.unit_tetrahedron()
        # centroid-to-face distance for a regular tetrahedron with edge 1
        expected = 1.0 / np.sqrt(24.0)
        sp = mesh.closest_point(np.zeros(3))
        assert sp.distance == pytest.approx(expected, rel=1e-12)

    def test_tie_break_lowest_triangle_id(self):
        # two parallel triangles equidistant from the origin
        verts = [[-1, -1, 1], [1, -1, 1], [0, 1, 1], [-1, -1, -1], [1, -1, -1], [0, 1, -1]]
        mesh = TriMesh(verts, [[0, 1, 2], [3, 5, 4]])
        sp = mesh.closest_point(np.zeros(3))
        assert sp.triangle_id == 0

    def test_normal_is_unit_outward(self):
        mesh = shapes.uv_sphere(1.0, 12, 16)
        sp = mesh.closest_point(np.array([0.0, 0.0, 2.0]))
        assert np.linalg.norm(sp.normal) == pytest.approx(1.0)
        assert sp.normal @ np.array([0, 0, 1.0]) > 0.9

    def test_bvh_equals_brute_force(self):
        mesh = shapes.ellipsoid(n_lat=10, n_lon=14)
        rng = np.random.default_rng(19)
        for _ in range(300):
            q = rng.uniform(-0.12, 0.12, size=3)
            a = mesh.closest_point(q)
            p, d2, tid = closest_point_brute(mesh.vertices, mesh.triangles, q)
            assert a.triangle_id == tid
            assert a.distance == np.sqrt(d2)
            assert np.array_equal(a.point, p)

    def test_distance_bounded_by_vertices(self):
        mesh = shapes.bent_tube(n_rings=10, n_sectors=10)
        assert len(mesh) <= 500
        rng = np.random.default_rng(23)
        for _ in range(50):
            q = rng.uniform(-0.05, 0.15, size=3)
            sp = mesh.closest_point(q)
            vertex_min = np.linalg.norm(mesh.vertices - q, axis=1).min()
            assert sp.distance <= vertex_min + 1e-12

    def test_batch_equals_single_queries(self):
        mesh = shapes.ellipsoid(n_lat=10, n_lon=14)
        rng = np.random.default_rng(31)
        queries = rng.uniform(-0.12, 0.12, size=(40, 3))
        batch = mesh.closest_points(queries)
        for q, got in zip(queries, batch):
            one = mesh.closest_point(q)
            assert got.triangle_id == one.triangle_id
            assert got.distance == one.distance
            assert np.array_equal(got.point, one.point)
            assert np.array_equal(got.normal, one.normal)

    def test_batch_handles_empty_and_singleton(self):
        mesh = shapes.ellipsoid(n_lat=6, n_lon=8)
        assert mesh.closest_points(np.zeros((0, 3))) == []
        single = mesh.closest_points(np.array([[0.0, 0.0, 0.2]]))
        one = mesh.closest_point(np.array([0.0, 0.0, 0.2]))
        assert len(single) == 1
        assert single[0].triangle_id == one.triangle_id
        assert single[0].distance == one.distance


class TestMeshHygiene:
    def test_degenerate_triangles_dropped(self, caplog):
        verts = [[0, 0, 0], [1, 0, 0], [0, 1, 0], [2, 0, 0]]
        tris = [[0, 1, 2], [0, 1, 3], [1, 1, 2]]  # second is collinear, third repeats a vertex
        with caplog.at_level("WARNING"):
            mesh = TriMesh(verts, tris)
        assert len(mesh.triangles) == 1
        assert "degenerate" in caplog.text

    def test_update_vertices_refits_queries(self):
        mesh = shapes.tube(n_rings=10, n_sectors=8)
        mesh.ray_cast(np.array([0, 0, 0.2]), np.array([1.0, 0, 0]), 1.0)  # build BVH
        mesh.update_vertices(mesh.vertices * np.array([2.0, 2.0, 1.0]))
        hit = mesh.ray_cast(np.array([0, 0, 0.2]), np.array([1.0, 0, 0]), 1.0)
        assert hit is not None
        assert hit.distance == pytest.approx(0.02, rel=1e-9)
