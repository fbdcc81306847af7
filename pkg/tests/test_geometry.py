import numpy as np
import pytest

from dynslam import geometry as g


def random_rotation(rng):
    return g.so3_exp(rng.normal(size=3))


class TestIntrinsics:
    def test_validation(self):
        with pytest.raises(ValueError):
            g.Intrinsics(fx=-1, fy=1, cx=10, cy=10, width=64, height=48)
        with pytest.raises(ValueError):
            g.Intrinsics(fx=50, fy=50, cx=100, cy=10, width=64, height=48)

    def test_scaled_half_resolution(self):
        k = g.Intrinsics(fx=525, fy=525, cx=319.5, cy=239.5, width=640, height=480)
        k2 = k.scaled(0.5)
        assert k2.width == 320 and k2.height == 240
        assert k2.fx == pytest.approx(262.5)
        # pixel centers: the corner of the image must stay the corner
        assert k2.cx == pytest.approx((k.cx + 0.5) * 0.5 - 0.5)


class TestPose:
    def test_rejects_non_rotation(self):
        with pytest.raises(ValueError):
            g.Pose(np.eye(3) * 2.0, np.zeros(3))

    def test_rejects_reflection(self):
        with pytest.raises(ValueError):
            g.Pose(np.diag([1.0, 1.0, -1.0]), np.zeros(3))

    def test_compose_matches_matrix_product(self, rng):
        a = g.Pose(random_rotation(rng), rng.normal(size=3))
        b = g.Pose(random_rotation(rng), rng.normal(size=3))
        np.testing.assert_allclose(g.compose(a, b).matrix(),
                                   a.matrix() @ b.matrix(), atol=1e-12)

    def test_invert(self, rng):
        a = g.Pose(random_rotation(rng), rng.normal(size=3))
        np.testing.assert_allclose(g.compose(a, g.invert(a)).matrix(),
                                   np.eye(4), atol=1e-12)

    def test_apply_batch(self, rng):
        a = g.Pose(random_rotation(rng), rng.normal(size=3))
        pts = rng.normal(size=(10, 3))
        expected = (a.rotation @ pts.T).T + a.translation
        np.testing.assert_allclose(a.apply(pts), expected, atol=1e-12)


class TestProjection:
    k = g.Intrinsics(fx=525, fy=520, cx=319.5, cy=239.5, width=640, height=480)

    def test_backproject_project_roundtrip(self, rng):
        for _ in range(20):
            u, v = rng.uniform(0, 640), rng.uniform(0, 480)
            d = rng.uniform(0.5, 5.0)
            p = g.backproject(u, v, d, self.k)
            u2, v2, d2 = g.project(p, self.k)
            assert (u2, v2, d2) == pytest.approx((u, v, d), abs=1e-9)

    def test_depth_to_points_matches_backproject(self, rng):
        depth = rng.uniform(0.5, 3.0, (480, 640))
        pts = g.depth_to_points(depth, self.k)
        for u, v in [(0, 0), (321, 100), (639, 479)]:
            np.testing.assert_allclose(
                pts[v, u], g.backproject(u, v, depth[v, u], self.k)[:3],
                atol=1e-12)

    def test_invalid_depth(self):
        with pytest.raises(ValueError):
            g.backproject(10, 10, 0.0, self.k)
        with pytest.raises(ValueError):
            g.project(np.array([0.0, 0.0, -1.0]), self.k)


class TestLieOps:
    def test_exp_log_roundtrip(self, rng):
        for _ in range(50):
            xi = rng.normal(scale=0.8, size=6)
            np.testing.assert_allclose(g.se3_log(g.se3_exp(xi)), xi, atol=1e-9)

    def test_exp_small_angle(self):
        xi = np.array([1e-12, 0, 0, 0, 1e-12, 0])
        T = g.se3_exp(xi)
        np.testing.assert_allclose(T.rotation, np.eye(3), atol=1e-11)
        np.testing.assert_allclose(T.translation, xi[:3], atol=1e-11)

    def test_so3_log_identity(self):
        np.testing.assert_allclose(g.so3_log(np.eye(3)), np.zeros(3))

    def test_orthonormalize_projects_back(self, rng):
        R = random_rotation(rng) + rng.normal(scale=1e-4, size=(3, 3))
        Q = g.orthonormalize(R)
        np.testing.assert_allclose(Q.T @ Q, np.eye(3), atol=1e-12)
        assert np.linalg.det(Q) == pytest.approx(1.0)


class TestQuaternions:
    def test_roundtrip(self, rng):
        for _ in range(50):
            R = random_rotation(rng)
            q = g.rot_to_quat(R)
            assert q[3] >= 0
            np.testing.assert_allclose(g.quat_to_rot(*q), R, atol=1e-12)

    def test_slerp_endpoints_and_midpoint(self):
        q0 = g.rot_to_quat(np.eye(3))
        q1 = g.rot_to_quat(g.so3_exp(np.array([0, 0, np.pi / 2])))
        np.testing.assert_allclose(g.slerp(q0, q1, 0.0), q0, atol=1e-12)
        np.testing.assert_allclose(g.slerp(q0, q1, 1.0), q1, atol=1e-12)
        Rm = g.quat_to_rot(*g.slerp(q0, q1, 0.5))
        np.testing.assert_allclose(Rm, g.so3_exp(np.array([0, 0, np.pi / 4])),
                                   atol=1e-12)

    def test_rot_x_180_is_exact(self):
        assert np.array_equal(g.rot_x(180.0), np.diag([1.0, -1.0, -1.0]))
