import math

import numpy as np
from django.test import SimpleTestCase

from geometry.transforms import Pose2, compose, inverse, transform_error, transform_point
from geometry.uncertainty import NoisyTransform
from registration.exceptions import DegenerateInput, NoCorrespondences
from registration.frame_alignment import (
    AlignmentCovarianceScale, CoDetection, UNIFORM, align_dynamic, align_static,
    alignment_covariance, consistency_weight,
)
from registration.icp import icp_associate, icp_register
from registration.landmark_maps import LandmarkMap
from registration.point_registration import (
    WeightedPairs, arun_weighted, fit_statistics, recency_weight,
)

CONES = np.array([
    [-3.0, -3.0], [0.0, -3.5], [3.0, -3.0], [-3.5, 0.0], [0.5, 0.5],
    [3.5, 0.0], [-3.0, 3.0], [0.0, 3.5], [3.0, 3.0], [1.5, -1.5],
])


def unweighted_arun(source, target):
    """Textbook unweighted Arun, written out independently"""
    mu_a, mu_b = source.mean(axis=0), target.mean(axis=0)
    a, b = source - mu_a, target - mu_b
    sxx = np.sum(a[:, 0] * b[:, 0]) + np.sum(a[:, 1] * b[:, 1])
    sxy = np.sum(a[:, 0] * b[:, 1]) - np.sum(a[:, 1] * b[:, 0])
    theta = math.atan2(sxy, sxx)
    c, s = math.cos(theta), math.sin(theta)
    t = mu_b - np.array([c * mu_a[0] - s * mu_a[1], s * mu_a[0] + c * mu_a[1]])
    return Pose2(t[0], t[1], theta)


def assert_pose_close(case, result, expected, tol):
    trans, heading_deg = transform_error(result, expected)
    case.assertLess(trans, tol)
    case.assertLess(math.radians(heading_deg), tol)


def landmark_map(owner, points, frame=0):
    points = np.asarray(points, dtype=float)
    return LandmarkMap(owner, frame, points.copy(), np.full(len(points), frame))


class ArunTests(SimpleTestCase):
    def setUp(self):
        self.rng = np.random.default_rng(5)

    def test_identity_for_equal_sets(self):
        points = self.rng.uniform(-2, 2, (5, 2))
        result = arun_weighted(WeightedPairs.uniform(points, points))
        assert_pose_close(self, result, Pose2.identity(), 1e-12)

    def test_recovers_known_transform(self):
        truth = Pose2(0.5, -0.2, 0.3)
        source = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 2.0]])
        result = arun_weighted(WeightedPairs.uniform(source, transform_point(truth, source)))
        assert_pose_close(self, result, truth, 1e-9)

    def test_recovers_random_transforms(self):
        for _ in range(200):
            truth = Pose2(*self.rng.uniform(-5, 5, 2), self.rng.uniform(-math.pi, math.pi))
            source = self.rng.uniform(-3, 3, (int(self.rng.integers(3, 12)), 2))
            weights = self.rng.uniform(0.1, 2.0, len(source))
            result = arun_weighted(WeightedPairs(source, transform_point(truth, source), weights))
            self.assertLess(abs(result.x - truth.x), 1e-9)
            self.assertLess(abs(result.y - truth.y), 1e-9)
            self.assertLess(abs(math.remainder(result.theta - truth.theta, 2 * math.pi)), 1e-9)

    def test_zero_weight_outlier_is_excluded(self):
        truth = Pose2(0.5, -0.2, 0.3)
        source = np.array([[0.0, 0.0], [2.0, 1.0], [1.0, 1.0]])
        target = transform_point(truth, source)
        target[2] += [5.0, -3.0]
        result = arun_weighted(WeightedPairs(source, target, [1.0, 1.0, 0.0]))
        assert_pose_close(self, result, truth, 1e-9)

    def test_uniform_weights_match_unweighted_oracle(self):
        for _ in range(50):
            source = self.rng.uniform(-3, 3, (8, 2))
            target = self.rng.uniform(-3, 3, (8, 2))
            result = arun_weighted(WeightedPairs.uniform(source, target))
            oracle = unweighted_arun(source, target)
            self.assertLess(abs(result.x - oracle.x), 1e-12)
            self.assertLess(abs(result.y - oracle.y), 1e-12)
            self.assertLess(abs(math.remainder(result.theta - oracle.theta, 2 * math.pi)), 1e-12)

    def test_pre_transformed_source_composes_inverse(self):
        for _ in range(50):
            source = self.rng.uniform(-3, 3, (6, 2))
            target = self.rng.uniform(-3, 3, (6, 2))
            weights = self.rng.uniform(0.1, 1.0, 6)
            Q = Pose2(*self.rng.uniform(-2, 2, 2), self.rng.uniform(-math.pi, math.pi))
            base = arun_weighted(WeightedPairs(source, target, weights))
            moved = arun_weighted(WeightedPairs(transform_point(Q, source), target, weights))
            assert_pose_close(self, moved, compose(base, inverse(Q)), 1e-9)

    def test_collinear_input_gives_proper_rotation(self):
        truth = Pose2(1.0, 2.0, 2.5)
        source = np.array([[0.0, 0.0], [1.0, 1.0], [2.0, 2.0], [3.5, 3.5]])
        result = arun_weighted(WeightedPairs.uniform(source, transform_point(truth, source)))
        self.assertAlmostEqual(np.linalg.det(result.rotation), 1.0, places=12)
        assert_pose_close(self, result, truth, 1e-9)

    def test_degenerate_inputs(self):
        with self.assertRaises(DegenerateInput):
            arun_weighted(WeightedPairs([[0, 0], [1, 0]], [[0, 0], [1, 0]], [1.0, 0.0]))
        with self.assertRaises(DegenerateInput):
            arun_weighted(WeightedPairs.uniform([[1, 1], [1, 1], [1, 1]], [[0, 0], [1, 0], [2, 0]]))

    def test_negative_weights_rejected(self):
        with self.assertRaises(ValueError):
            WeightedPairs([[0, 0]], [[0, 0]], [-1.0])


class RecencyWeightTests(SimpleTestCase):
    def test_examples(self):
        self.assertEqual(recency_weight(0, 0), 1.0)
        self.assertEqual(recency_weight(1, 3), 0.125)
        self.assertAlmostEqual(recency_weight(9, 0), 0.1)

    def test_more_recent_is_heavier(self):
        self.assertGreater(recency_weight(0, 2), recency_weight(1, 2))

    def test_negative_age_rejected(self):
        with self.assertRaises(ValueError):
            recency_weight(-1, 0)


class LandmarkMapTests(SimpleTestCase):
    def test_repeated_detection_merges_into_one_entry(self):
        cone_map = LandmarkMap(owner=0)
        for frame in range(5):
            cone_map.observe([1.0, 2.0], frame, merge_radius=0.5)
        self.assertEqual(len(cone_map), 1)
        np.testing.assert_allclose(cone_map.positions[0], [1.0, 2.0])
        self.assertEqual(cone_map.last_seen[0], 4)
        self.assertEqual(cone_map.stamp, 4)

    def test_distant_cones_stay_separate(self):
        cone_map = LandmarkMap(owner=0)
        cone_map.observe([0.0, 0.0], 0, 0.5)
        cone_map.observe([3.0, 0.0], 0, 0.5)
        self.assertEqual(len(cone_map), 2)

    def test_running_mean(self):
        cone_map = LandmarkMap(owner=0)
        cone_map.observe([0.0, 0.0], 0, 0.5)
        cone_map.observe([0.2, 0.0], 1, 0.5)
        np.testing.assert_allclose(cone_map.positions[0], [0.1, 0.0])

    def test_drifting_entries_coalesce(self):
        cone_map = LandmarkMap(owner=0)
        cone_map.observe([0.0, 0.0], 0, 0.5)
        cone_map.observe([0.6, 0.0], 0, 0.5)
        cone_map.observe([0.35, 0.0], 1, 0.5)
        self.assertEqual(len(cone_map), 1)
        distances = np.linalg.norm(cone_map.positions[:, None] - cone_map.positions[None], axis=2)
        self.assertTrue(np.all(distances[np.triu_indices(len(cone_map), 1)] > 0.5))

    def test_prune_drops_old_entries(self):
        cone_map = LandmarkMap(owner=1)
        cone_map.observe([0.0, 0.0], 0, 0.5)
        cone_map.observe([3.0, 0.0], 20, 0.5)
        self.assertEqual(cone_map.prune(25, max_age_frames=10), 1)
        np.testing.assert_allclose(cone_map.positions, [[3.0, 0.0]])

    def test_record_round_trip(self):
        cone_map = landmark_map(2, CONES[:3], frame=7)
        restored = LandmarkMap.from_record(cone_map.to_record())
        self.assertEqual(restored.owner, 2)
        self.assertEqual(restored.stamp, 7)
        np.testing.assert_array_equal(restored.positions, cone_map.positions)
        self.assertEqual(cone_map.to_record().splitlines()[2], '-3.0 -3.0 7')


class IcpTests(SimpleTestCase):
    truth = Pose2(1.2, -0.7, 0.4)

    def test_recovers_all_correspondences(self):
        map_i = landmark_map(0, CONES)
        map_j = landmark_map(1, transform_point(self.truth, CONES))
        initial = compose(self.truth, Pose2(0.3, 0.2, math.radians(6)))
        pairs = icp_associate(map_i, map_j, initial, 20, 1e-4)
        self.assertEqual(len(pairs), len(CONES))
        assert_pose_close(self, arun_weighted(pairs), self.truth, 1e-6)

    def test_identical_maps_converge_in_one_iteration(self):
        map_i = landmark_map(0, CONES)
        outcome = icp_register(map_i, landmark_map(1, CONES), Pose2.identity())
        self.assertEqual(outcome.iterations, 1)
        np.testing.assert_array_equal(outcome.pairs.source, outcome.pairs.target)

    def test_disjoint_maps_raise(self):
        with self.assertRaises(NoCorrespondences):
            icp_associate(landmark_map(0, CONES), landmark_map(1, CONES + 50.0), Pose2.identity())

    def test_empty_map_raises(self):
        with self.assertRaises(NoCorrespondences):
            icp_associate(LandmarkMap(owner=0), landmark_map(1, CONES), Pose2.identity())

    def test_objective_never_increases(self):
        rng = np.random.default_rng(17)
        for _ in range(20):
            map_i = landmark_map(0, CONES + rng.normal(0, 0.03, CONES.shape))
            map_j = landmark_map(1, transform_point(self.truth, CONES) + rng.normal(0, 0.03, CONES.shape))
            initial = compose(self.truth, Pose2(*rng.uniform(-0.2, 0.2, 2), rng.uniform(-0.05, 0.05)))
            history = icp_register(map_i, map_j, initial).objective_history
            for before, after in zip(history, history[1:]):
                self.assertLessEqual(after, before + 1e-12)

    def test_weights_follow_recency(self):
        map_i = LandmarkMap(0, 10, CONES[:3].copy(), np.array([10, 9, 5]))
        map_j = LandmarkMap(1, 10, CONES[:3].copy(), np.array([10, 7, 10]))
        pairs = icp_associate(map_i, map_j, Pose2.identity())
        np.testing.assert_allclose(sorted(pairs.weights), sorted([1.0, 1 / 8, 1 / 6]))


class StaticAlignmentTests(SimpleTestCase):
    truth = Pose2(1.2, -0.7, 0.4)

    def maps(self, rng=None, sigma=0.0):
        noise_i = rng.normal(0, sigma, CONES.shape) if rng is not None else 0.0
        noise_j = rng.normal(0, sigma, CONES.shape) if rng is not None else 0.0
        return (landmark_map(0, CONES + noise_i),
                landmark_map(1, transform_point(self.truth, CONES) + noise_j))

    def test_prev_equal_to_truth(self):
        map_i, map_j = self.maps()
        result = align_static(map_i, map_j, NoisyTransform.exact(self.truth), k=12)
        assert_pose_close(self, result.pose, self.truth, 1e-9)
        self.assertLess(result.correction_magnitude.trans_m, 1e-9)
        self.assertLess(result.correction_magnitude.rot_rad, 1e-9)
        self.assertEqual(result.method, 'static')
        self.assertEqual(result.transform.stamp, 12)
        self.assertEqual(result.pair_count, len(CONES))

    def test_recovers_drifted_truth(self):
        map_i, map_j = self.maps()
        prev = NoisyTransform.exact(compose(self.truth, inverse(Pose2(0.3, 0.0, math.radians(5)))))
        result = align_static(map_i, map_j, prev, k=1)
        assert_pose_close(self, result.pose, self.truth, 1e-6)
        self.assertAlmostEqual(math.degrees(result.correction_magnitude.rot_rad), 5.0, places=6)

    def test_idempotent_on_noiseless_maps(self):
        map_i, map_j = self.maps()
        prev = NoisyTransform.exact(compose(self.truth, Pose2(-0.2, 0.1, -0.05)))
        first = align_static(map_i, map_j, prev, k=1)
        second = align_static(map_i, map_j, first.transform, k=2)
        self.assertLess(second.correction_magnitude.trans_m, 1e-9)
        self.assertLess(second.correction_magnitude.rot_rad, 1e-9)

    def test_noisy_landmarks_median_error(self):
        trans_errors, heading_errors = [], []
        for seed in range(100):
            map_i, map_j = self.maps(np.random.default_rng(seed), sigma=0.05)
            result = align_static(map_i, map_j, NoisyTransform.exact(self.truth), k=0)
            trans, heading = transform_error(result.pose, self.truth)
            trans_errors.append(trans)
            heading_errors.append(heading)
        self.assertLess(np.median(trans_errors), 0.05)
        self.assertLess(np.median(heading_errors), 1.0)

    def test_covariance_grows_with_correction(self):
        map_i, map_j = self.maps()
        still = align_static(map_i, map_j, NoisyTransform.exact(self.truth), k=1)
        moved = align_static(map_i, map_j, NoisyTransform.exact(compose(self.truth, Pose2(0.3, 0, 0))), k=1)
        self.assertGreater(moved.transform.cov[0, 0], still.transform.cov[0, 0])


class AlignmentCovarianceTests(SimpleTestCase):
    def test_floor_when_unchanged(self):
        scale = AlignmentCovarianceScale(c_t=1.0, c_theta=1.0, sigma_t0=0.01, sigma_theta0=0.002)
        pose = Pose2(1, 2, 0.3)
        np.testing.assert_allclose(alignment_covariance(pose, pose, scale), np.diag([1e-4, 1e-4, 4e-6]))

    def test_translation_jump(self):
        scale = AlignmentCovarianceScale(c_t=1.0, c_theta=1.0, sigma_t0=0.01, sigma_theta0=0.002)
        cov = alignment_covariance(Pose2(0.1, 0, 0), Pose2.identity(), scale)
        np.testing.assert_allclose(cov, np.diag([0.0121, 0.0121, 4e-6]), atol=1e-15)

    def test_quadratic_in_jump(self):
        scale = AlignmentCovarianceScale(c_t=2.0, c_theta=1.0, sigma_t0=0.0, sigma_theta0=0.002)
        single = alignment_covariance(Pose2(0.1, 0, 0), Pose2.identity(), scale)
        double = alignment_covariance(Pose2(0.2, 0, 0), Pose2.identity(), scale)
        self.assertAlmostEqual(double[0, 0], 4 * single[0, 0], places=14)


class ConsistencyWeightTests(SimpleTestCase):
    def test_equal_residuals(self):
        self.assertAlmostEqual(consistency_weight([0.1, 0, 0, 0], [0, 0], [0, 0]), 100.0)

    def test_orthogonal_residuals(self):
        self.assertEqual(consistency_weight([0, 0, 0, 0], [-0.1, 0], [0, -0.1]), 0.0)

    def test_perfect_fit_is_zero(self):
        self.assertEqual(consistency_weight([1.0, 2.0, 0.5, 0.5], [1.0, 2.0], [1.0, 2.0]), 0.0)

    def test_clamped_and_nonnegative(self):
        self.assertEqual(consistency_weight([0.0032, 0, 0, 0], [0, 0], [0, 0]), 1e4)
        self.assertEqual(consistency_weight([0, 0, 0, 0], [0.1, 0], [-0.1, 0]), 0.0)
        rng = np.random.default_rng(2)
        for _ in range(500):
            w = consistency_weight(rng.normal(size=4), rng.normal(size=2), rng.normal(size=2))
            self.assertTrue(0.0 <= w <= 1e4)


class DynamicAlignmentTests(SimpleTestCase):
    truth = Pose2(-0.4, 2.0, -0.8)
    objects_j = np.array([[2.0, 1.0], [-1.0, 3.0], [0.0, -2.0]])

    def codetections(self, prev):
        z_i = transform_point(self.truth, self.objects_j)
        z_tilde = transform_point(prev.pose, self.objects_j)
        out = []
        for a, b in zip(z_i, z_tilde):
            position = a + 0.5 * (a - b) + (np.array([0.05, 0.0]) if np.allclose(a, b) else 0.0)
            out.append(CoDetection(stamp=3, x_hat=np.r_[position, 0.0, 0.0], z_i=a, z_tilde_j=b))
        return out

    def test_prev_equal_to_truth_is_unchanged(self):
        prev = NoisyTransform.exact(self.truth)
        result = align_dynamic(self.codetections(prev), prev, k=3)
        assert_pose_close(self, result.pose, self.truth, 1e-9)
        self.assertLess(result.correction_magnitude.trans_m, 1e-9)
        self.assertEqual(result.method, 'dynamic')

    def test_recovers_truth_from_offset(self):
        prev = NoisyTransform.exact(compose(Pose2(0.2, -0.1, math.radians(3)), self.truth))
        result = align_dynamic(self.codetections(prev), prev, k=3)
        assert_pose_close(self, result.pose, self.truth, 1e-6)
        self.assertEqual(result.pair_count, 3)
        self.assertGreater(result.correction_magnitude.trans_m, 0.0)

    def test_uniform_weighting_recovers_truth(self):
        prev = NoisyTransform.exact(compose(Pose2(0.2, -0.1, math.radians(3)), self.truth))
        result = align_dynamic(self.codetections(prev), prev, k=3, weighting=UNIFORM)
        assert_pose_close(self, result.pose, self.truth, 1e-6)

    def test_single_object_is_degenerate(self):
        prev = NoisyTransform.exact(compose(Pose2(0.2, -0.1, 0.05), self.truth))
        with self.assertRaises(DegenerateInput):
            align_dynamic(self.codetections(prev)[:1], prev, k=3)

    def scattered(self, prev, sigma=0.0, seed=0, count=20):
        rng = np.random.default_rng(seed)
        objects = rng.uniform(-4.0, 4.0, (count, 2))
        z_i = transform_point(self.truth, objects) + rng.normal(0.0, sigma, (count, 2))
        z_tilde = transform_point(prev.pose, objects)
        return [CoDetection(3, np.r_[a, 0.0, 0.0], a, b) for a, b in zip(z_i, z_tilde)]

    def test_exact_fit_scores(self):
        prev = NoisyTransform.exact(self.truth)
        self.assertEqual(align_dynamic(self.codetections(prev), prev, k=3).score, 0.0)
        offset = NoisyTransform.exact(compose(Pose2(0.2, -0.1, math.radians(3)), self.truth))
        self.assertEqual(align_dynamic(self.codetections(offset), offset, k=3).score, math.inf)

    def test_noise_level_corrections_score_low(self):
        prev = NoisyTransform.exact(self.truth)
        for seed in range(20):
            result = align_dynamic(self.scattered(prev, sigma=0.05, seed=seed), prev, k=3, weighting=UNIFORM)
            self.assertLess(result.score, 3.0, f'seed {seed}')

    def test_real_corrections_score_high(self):
        prev = NoisyTransform.exact(compose(Pose2(0.5, 0.0, math.radians(2)), self.truth))
        for seed in range(5):
            result = align_dynamic(self.scattered(prev, sigma=0.05, seed=seed), prev, k=3, weighting=UNIFORM)
            self.assertGreater(result.score, 10.0, f'seed {seed}')

    def test_outlier_dropped_before_refit(self):
        prev = NoisyTransform.exact(compose(Pose2(0.2, -0.1, math.radians(3)), self.truth))
        codetections = self.scattered(prev)
        bad = codetections[4]
        codetections[4] = CoDetection(bad.stamp, bad.x_hat, bad.z_i + np.array([3.0, 0.0]), bad.z_tilde_j)
        result = align_dynamic(codetections, prev, k=3, weighting=UNIFORM)
        self.assertEqual(result.pair_count, 19)
        assert_pose_close(self, result.pose, self.truth, 1e-6)


class FitStatisticsTests(SimpleTestCase):
    def test_uniform_pairs(self):
        source = np.array([[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]])
        target = source + np.array([[0.1, 0.0], [-0.1, 0.0], [0.1, 0.0], [-0.1, 0.0]])
        stats = fit_statistics(Pose2.identity(), WeightedPairs.uniform(source, target))
        self.assertAlmostEqual(stats.residual_rms_m, 0.1)
        self.assertAlmostEqual(stats.effective_pairs, 4.0)
        self.assertAlmostEqual(stats.source_spread_m2, 1.0)
        np.testing.assert_allclose(stats.source_centroid, [0.0, 0.0], atol=1e-15)

    def test_zero_weights_do_not_count(self):
        source = np.array([[1.0, 0.0], [-1.0, 0.0], [5.0, 5.0]])
        pairs = WeightedPairs(source, source, [1.0, 1.0, 0.0])
        stats = fit_statistics(Pose2.identity(), pairs)
        self.assertAlmostEqual(stats.effective_pairs, 2.0)
        self.assertAlmostEqual(stats.source_spread_m2, 1.0)

    def test_all_zero_weights_raise(self):
        with self.assertRaises(DegenerateInput):
            fit_statistics(Pose2.identity(), WeightedPairs(np.zeros((2, 2)), np.zeros((2, 2)), [0.0, 0.0]))
