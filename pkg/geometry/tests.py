import math

import numpy as np
from django.test import SimpleTestCase

from geometry.transforms import (
    Pose2, compose, inverse, normalize_angle, transform_error, transform_point,
    transform_state,
)
from geometry.uncertainty import (
    NoisyTransform, compose_with_covariance, is_psd, point_jacobian, propagate_into_local,
    propagate_into_neighbor, symmetrize,
)


def random_pose(rng, scale=3.0):
    return Pose2(*rng.uniform(-scale, scale, 2), rng.uniform(-math.pi, math.pi))


def random_cov(rng, dim, sigma_max):
    sigmas = rng.uniform(0.2, 1.0, dim) * sigma_max
    q, _ = np.linalg.qr(rng.normal(size=(dim, dim)))
    return q @ np.diag(sigmas ** 2) @ q.T


def homogeneous_point(transform, point):
    return (transform.as_matrix() @ np.array([point[0], point[1], 1.0]))[:2]


class PoseAlgebraTests(SimpleTestCase):
    def setUp(self):
        self.rng = np.random.default_rng(7)

    def test_identity_compose(self):
        p = Pose2(1.5, -2.0, 0.4)
        self.assertEqual(compose(Pose2.identity(), p), p)

    def test_quarter_turn_compose(self):
        result = compose(Pose2(1.0, 0.0, math.pi / 2), Pose2(1.0, 0.0, 0.0))
        self.assertAlmostEqual(result.x, 1.0, places=12)
        self.assertAlmostEqual(result.y, 1.0, places=12)
        self.assertAlmostEqual(result.theta, math.pi / 2, places=12)

    def test_compose_matches_homogeneous_product(self):
        for _ in range(100):
            p, q = random_pose(self.rng), random_pose(self.rng)
            expected = Pose2.from_matrix(p.as_matrix() @ q.as_matrix())
            result = compose(p, q)
            np.testing.assert_allclose(result.as_matrix(), expected.as_matrix(), atol=1e-12)

    def test_compose_is_associative(self):
        for _ in range(100):
            a, b, c = (random_pose(self.rng) for _ in range(3))
            left = compose(compose(a, b), c)
            right = compose(a, compose(b, c))
            self.assertLess(abs(left.x - right.x), 1e-10)
            self.assertLess(abs(left.y - right.y), 1e-10)
            self.assertLess(abs(normalize_angle(left.theta - right.theta)), 1e-10)

    def test_inverse_examples(self):
        self.assertEqual(inverse(Pose2.identity()), Pose2.identity())
        self.assertEqual(inverse(Pose2(1.0, 0.0, 0.0)), Pose2(-1.0, 0.0, 0.0))
        rotated = inverse(Pose2(0.0, 0.0, math.pi / 2))
        self.assertAlmostEqual(rotated.theta, -math.pi / 2, places=12)
        self.assertAlmostEqual(rotated.x, 0.0, places=12)

    def test_compose_with_inverse_is_identity(self):
        for _ in range(100):
            p = random_pose(self.rng)
            result = compose(p, inverse(p))
            self.assertLess(abs(result.x), 1e-12)
            self.assertLess(abs(result.y), 1e-12)
            self.assertLess(abs(result.theta), 1e-12)

    def test_heading_is_normalized(self):
        self.assertAlmostEqual(Pose2(0, 0, 3 * math.pi).theta, math.pi)
        self.assertAlmostEqual(Pose2(0, 0, -math.pi).theta, math.pi)
        self.assertAlmostEqual(compose(Pose2(0, 0, 3.0), Pose2(0, 0, 3.0)).theta, 6.0 - 2 * math.pi)

    def test_transform_point_examples(self):
        np.testing.assert_allclose(transform_point(Pose2.identity(), [3.0, 4.0]), [3.0, 4.0])
        np.testing.assert_allclose(transform_point(Pose2(0, 0, math.pi), [1.0, 0.0]), [-1.0, 0.0], atol=1e-15)

    def test_transform_point_matches_homogeneous_oracle(self):
        for _ in range(100):
            T = random_pose(self.rng)
            point = self.rng.uniform(-5, 5, 2)
            np.testing.assert_allclose(transform_point(T, point), homogeneous_point(T, point), atol=1e-12)

    def test_transform_point_accepts_stacks(self):
        T = random_pose(self.rng)
        points = self.rng.uniform(-5, 5, (6, 2))
        stacked = transform_point(T, points)
        for row, point in zip(stacked, points):
            np.testing.assert_allclose(row, transform_point(T, point), atol=1e-12)

    def test_transform_state_rotates_velocity_only(self):
        state = transform_state(Pose2(1.0, 2.0, math.pi / 2), [1.0, 0.0, 1.0, 0.0])
        np.testing.assert_allclose(state, [1.0, 3.0, 0.0, 1.0], atol=1e-12)


class TransformErrorTests(SimpleTestCase):
    def test_equal_poses(self):
        p = Pose2(1.0, 2.0, 0.3)
        trans, heading = transform_error(p, p)
        self.assertAlmostEqual(trans, 0.0, places=12)
        self.assertAlmostEqual(heading, 0.0, places=12)

    def test_three_four_five(self):
        truth = Pose2(2.0, -1.0, 0.7)
        est = compose(truth, Pose2(0.3, 0.4, 0.0))
        trans, heading = transform_error(est, truth)
        self.assertAlmostEqual(trans, 0.5, places=12)
        self.assertAlmostEqual(heading, 0.0, places=10)

    def test_pure_heading(self):
        truth = Pose2(2.0, -1.0, 0.7)
        est = compose(truth, Pose2(0.0, 0.0, math.pi / 6))
        trans, heading = transform_error(est, truth)
        self.assertAlmostEqual(trans, 0.0, places=12)
        self.assertAlmostEqual(heading, 30.0, places=9)

    def test_symmetric_in_arguments(self):
        rng = np.random.default_rng(3)
        for _ in range(50):
            a, b = random_pose(rng), random_pose(rng)
            forward, backward = transform_error(a, b), transform_error(b, a)
            self.assertAlmostEqual(forward[0], backward[0], places=10)
            self.assertAlmostEqual(forward[1], backward[1], places=8)


class JacobianTests(SimpleTestCase):
    def test_point_jacobian_matches_finite_differences(self):
        rng = np.random.default_rng(5)
        h = 1e-6
        for _ in range(20):
            pose = random_pose(rng)
            point = rng.uniform(-4.0, 4.0, 2)
            numeric = np.zeros((2, 3))
            for k in range(3):
                step = np.zeros(3)
                step[k] = h
                plus = Pose2(pose.x + step[0], pose.y + step[1], pose.theta + step[2])
                minus = Pose2(pose.x - step[0], pose.y - step[1], pose.theta - step[2])
                numeric[:, k] = (transform_point(plus, point) - transform_point(minus, point)) / (2 * h)
            np.testing.assert_allclose(point_jacobian(pose, point), numeric, atol=1e-6)

    def test_symmetrize(self):
        m = np.array([[1.0, 2.0], [4.0, 3.0]])
        np.testing.assert_allclose(symmetrize(m), [[1.0, 3.0], [3.0, 3.0]])


class PropagationTests(SimpleTestCase):
    samples = 100_000

    def setUp(self):
        self.rng = np.random.default_rng(11)

    def assertFrobeniusClose(self, estimate, reference, rel=0.10):
        error = np.linalg.norm(estimate - reference) / np.linalg.norm(reference)
        self.assertLess(error, rel)

    def test_local_zero_pose_uncertainty_returns_measurement_cov(self):
        R = np.array([[0.04, 0.01], [0.01, 0.09]])
        _, cov = propagate_into_local(Pose2.identity(), np.zeros((3, 3)), [2.0, 1.0], R)
        np.testing.assert_array_equal(cov, R)

    def test_local_translation_uncertainty_only(self):
        sigma = 0.2
        _, cov = propagate_into_local(Pose2.identity(), np.diag([sigma ** 2, sigma ** 2, 0.0]),
                                      [2.0, 1.0], np.zeros((2, 2)))
        np.testing.assert_allclose(cov, np.diag([sigma ** 2, sigma ** 2]), atol=1e-15)

    def test_neighbor_identity_alignment_is_passthrough(self):
        R = np.array([[0.04, 0.01], [0.01, 0.09]])
        point, cov = propagate_into_neighbor(NoisyTransform.exact(Pose2.identity()), [2.0, 1.0], R)
        np.testing.assert_allclose(point, [2.0, 1.0])
        np.testing.assert_allclose(cov, R, atol=1e-15)

    def test_neighbor_rotation_rotates_covariance(self):
        theta = 0.6
        R = np.array([[0.04, 0.01], [0.01, 0.09]])
        _, cov = propagate_into_neighbor(NoisyTransform.exact(Pose2(0, 0, theta)), [2.0, 1.0], R)
        rot = Pose2(0, 0, theta).rotation
        np.testing.assert_allclose(cov, rot @ R @ rot.T, atol=1e-15)

    def _sample_poses(self, pose, cov):
        deltas = self.rng.multivariate_normal(np.zeros(3), cov, self.samples)
        thetas = pose.theta + deltas[:, 2]
        cos, sin = np.cos(thetas), np.sin(thetas)
        return pose.x + deltas[:, 0], pose.y + deltas[:, 1], cos, sin

    def _push(self, pose, pose_cov, point, point_cov):
        tx, ty, cos, sin = self._sample_poses(pose, pose_cov)
        points = self.rng.multivariate_normal(point, point_cov, self.samples)
        out = np.column_stack([
            tx + cos * points[:, 0] - sin * points[:, 1],
            ty + sin * points[:, 0] + cos * points[:, 1],
        ])
        return np.cov(out.T)

    def test_local_matches_monte_carlo(self):
        for _ in range(20):
            pose = random_pose(self.rng)
            pose_cov = random_cov(self.rng, 3, 0.1) * np.array([[9, 9, 3], [9, 9, 3], [3, 3, 1]])
            pose_cov = pose_cov if is_psd(pose_cov) else np.diag([0.09, 0.09, 0.01])
            point = self.rng.uniform(-2.0, 2.0, 2)
            point_cov = random_cov(self.rng, 2, 0.3)
            _, cov = propagate_into_local(pose, pose_cov, point, point_cov)
            self.assertTrue(is_psd(cov))
            self.assertFrobeniusClose(cov, self._push(pose, pose_cov, point, point_cov))

    def test_neighbor_matches_monte_carlo(self):
        for _ in range(20):
            pose = random_pose(self.rng)
            align_cov = np.diag([self.rng.uniform(0.01, 0.3) ** 2, self.rng.uniform(0.01, 0.3) ** 2,
                                 self.rng.uniform(0.005, 0.1) ** 2])
            alignment = NoisyTransform(pose, align_cov)
            point = self.rng.uniform(-2.0, 2.0, 2)
            point_cov = random_cov(self.rng, 2, 0.3)
            _, cov = propagate_into_neighbor(alignment, point, point_cov)
            self.assertTrue(is_psd(cov))
            self.assertFrobeniusClose(cov, self._push(pose, align_cov, point, point_cov))

    def test_propagation_outputs_are_psd(self):
        for _ in range(200):
            pose = random_pose(self.rng)
            _, local_cov = propagate_into_local(pose, random_cov(self.rng, 3, 0.5),
                                                self.rng.uniform(-8, 8, 2), random_cov(self.rng, 2, 0.5))
            self.assertTrue(is_psd(local_cov))
            _, neighbor_cov = propagate_into_neighbor(NoisyTransform(pose, random_cov(self.rng, 3, 0.5)),
                                                      self.rng.uniform(-8, 8, 2), local_cov)
            self.assertTrue(is_psd(neighbor_cov))

    def test_compose_with_covariance_accumulates(self):
        step = Pose2(0.1, 0.0, 0.05)
        step_cov = np.diag([1e-4, 1e-4, 1e-4])
        pose, cov = Pose2.identity(), np.zeros((3, 3))
        for _ in range(10):
            pose, cov = compose_with_covariance(pose, cov, step, step_cov)
        self.assertAlmostEqual(cov[2, 2], 10 * 1e-4, places=12)
        self.assertTrue(is_psd(cov))
        self.assertGreater(cov[1, 1], 10 * 1e-4)
