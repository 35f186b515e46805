import itertools
import math
from dataclasses import replace

import numpy as np
from django.test import SimpleTestCase

from geometry.transforms import Pose2
from geometry.uncertainty import NoisyTransform, is_psd
from registration.frame_alignment import CorrectionMagnitude
from tracking.association import gnn_associate, hungarian, mahalanobis
from tracking.exceptions import SingularCovariance, SingularInnovation
from tracking.gating import GateAdaptation, GateState, adapt_gate, initial_gate
from tracking.kcf import consensus_gain, kcf_update, to_information
from tracking.motion_models import MotionModel
from tracking.pipeline import LocalTracker
from tracking.track_manager import TrackBank, TrackLifecycle, manage_tracks
from tracking.tracks import InfoMessage, Measurement, Track, TrackId, TrackStatus, initial_track, predict


def track_at(position, P=None, velocity=(0.0, 0.0), track_id=TrackId(0, 0)):
    x = np.array([position[0], position[1], velocity[0], velocity[1]], dtype=float)
    return Track(track_id, x, np.zeros((4, 4)) if P is None else np.asarray(P, dtype=float))


def random_spd(rng, dim, scale=1.0):
    a = rng.normal(size=(dim, dim))
    return scale * (a @ a.T + dim * np.eye(dim))


def brute_force_assignment(cost):
    """Minimum cost over all full assignments of the smaller side"""
    n, m = cost.shape
    if n > m:
        return brute_force_assignment(cost.T)
    return min(sum(cost[r, c] for r, c in enumerate(cols)) for cols in itertools.permutations(range(m), n))


def brute_force_gated(cost, tau):
    """(cardinality, cost) of the best gated assignment: most pairs first, then least cost"""
    n, m = cost.shape
    best = (0, 0.0)
    for choice in itertools.product(range(-1, m), repeat=n):
        used = [c for c in choice if c >= 0]
        if len(used) != len(set(used)):
            continue
        if any(c >= 0 and cost[r, c] > tau for r, c in enumerate(choice)):
            continue
        total = sum(cost[r, c] for r, c in enumerate(choice) if c >= 0)
        if (len(used), -total) > (best[0], -best[1]):
            best = (len(used), total)
    return best


class TextbookKalman:
    """Covariance-form Kalman filter, independent of the information-form code"""

    def __init__(self, model, x, P):
        self.model, self.x, self.P = model, x.copy(), P.copy()

    def update(self, z, R):
        H = self.model.H
        S = H @ self.P @ H.T + R
        K = self.P @ H.T @ np.linalg.inv(S)
        self.x = self.x + K @ (z - H @ self.x)
        self.P = (np.eye(4) - K @ H) @ self.P

    def predict(self):
        self.x = self.model.A @ self.x
        self.P = self.model.A @ self.P @ self.model.A.T + self.model.Q


class MotionModelTests(SimpleTestCase):
    def test_block_structure(self):
        model = MotionModel.constant_velocity(0.1, 0.5)
        np.testing.assert_array_equal(model.A[:2, 2:], 0.1 * np.eye(2))
        np.testing.assert_array_equal(model.A[2:, :2], np.zeros((2, 2)))
        np.testing.assert_array_equal(model.H @ np.array([1.0, 2.0, 3.0, 4.0]), [1.0, 2.0])
        self.assertTrue(is_psd(model.Q))
        self.assertAlmostEqual(model.Q[0, 0], 0.5 * 0.1 ** 3 / 3)
        self.assertAlmostEqual(model.Q[0, 2], 0.5 * 0.1 ** 2 / 2)
        self.assertAlmostEqual(model.Q[2, 2], 0.5 * 0.1)

    def test_invalid_parameters(self):
        with self.assertRaises(ValueError):
            MotionModel.constant_velocity(0.0)


class PredictTests(SimpleTestCase):
    def test_stationary_state(self):
        result = predict(track_at((1.0, 2.0)), MotionModel.constant_velocity(0.7))
        np.testing.assert_allclose(result.position, [1.0, 2.0])
        self.assertEqual(result.lifetime, 1)

    def test_constant_velocity(self):
        result = predict(track_at((0.0, 0.0), velocity=(1.0, 0.0)), MotionModel.constant_velocity(0.5))
        np.testing.assert_allclose(result.position, [0.5, 0.0])

    def test_zero_covariance_becomes_process_noise(self):
        model = MotionModel(1.0, 0.3, np.eye(4), np.hstack([np.eye(2), np.zeros((2, 2))]), 0.3 * np.eye(4))
        np.testing.assert_allclose(predict(track_at((0, 0)), model).P, 0.3 * np.eye(4))


class InitialTrackTests(SimpleTestCase):
    model = MotionModel.constant_velocity(0.1)

    def test_zero_velocity_and_speed_prior(self):
        track = initial_track(Measurement([1.0, 2.0], 0.04 * np.eye(2)), TrackId(3, 7), max_speed=2.0)
        np.testing.assert_allclose(track.x, [1.0, 2.0, 0.0, 0.0])
        np.testing.assert_allclose(track.P[:2, :2], 0.04 * np.eye(2))
        np.testing.assert_allclose(track.P[2:, 2:], 4.0 * np.eye(2))
        np.testing.assert_allclose(track.P[:2, 2:], 0.0)
        self.assertEqual(track.status, TrackStatus.TENTATIVE)

    def test_unmatched_measurements_spawn_predicted_tracks(self):
        bank = TrackBank(2)
        measurements = [Measurement([1.0, 1.0], 0.01 * np.eye(2)), Measurement([4.0, 1.0], 0.01 * np.eye(2))]
        events = manage_tracks(bank, measurements, [], TrackLifecycle(), self.model, initial_gate(2.0))
        self.assertEqual(events.created, [TrackId(2, 0), TrackId(2, 1)])
        self.assertEqual(len(bank), 2)
        self.assertEqual(bank.confirmed(), [])
        track = bank.get(TrackId(2, 0))
        np.testing.assert_allclose(track.x, [1.0, 1.0, 0.0, 0.0])
        self.assertGreater(track.P[0, 0], 0.01)


class MahalanobisTests(SimpleTestCase):
    model = MotionModel.constant_velocity(0.1)

    def test_zero_residual(self):
        track = track_at((1.0, 1.0), P=np.eye(4))
        self.assertEqual(mahalanobis(Measurement([1.0, 1.0], np.eye(2)), track, self.model), 0.0)

    def test_unit_residual(self):
        d = mahalanobis(Measurement([1.0, 0.0], np.eye(2)), track_at((0, 0)), self.model)
        self.assertAlmostEqual(d, 1.0)

    def test_anisotropic(self):
        d = mahalanobis(Measurement([1.0, 1.0], np.diag([4.0, 1.0])), track_at((0, 0)), self.model)
        self.assertAlmostEqual(d, 1.25)

    def test_singular_innovation(self):
        with self.assertRaises(SingularInnovation):
            mahalanobis(Measurement([1.0, 0.0], np.zeros((2, 2))), track_at((0, 0)), self.model)


class HungarianTests(SimpleTestCase):
    def test_diagonal(self):
        cost = np.array([[1.0, 10.0], [10.0, 1.0]])
        assignment = hungarian(cost)
        self.assertEqual(assignment, {0: 0, 1: 1})
        self.assertEqual(sum(cost[r, c] for r, c in assignment.items()), 2.0)

    def test_matches_enumeration(self):
        rng = np.random.default_rng(21)
        for _ in range(500):
            n, m = rng.integers(1, 6, size=2)
            cost = rng.integers(0, 20, size=(n, m)).astype(float)
            assignment = hungarian(cost)
            self.assertEqual(len(assignment), min(n, m))
            total = sum(cost[r, c] for r, c in assignment.items())
            self.assertAlmostEqual(total, brute_force_assignment(cost))

    def test_rectangular_leaves_column_unassigned(self):
        cost = np.array([[4.0, 1.0, 3.0], [2.0, 0.0, 5.0]])
        assignment = hungarian(cost)
        self.assertEqual(len(assignment), 2)
        self.assertEqual(len(set(range(3)) - set(assignment.values())), 1)
        self.assertEqual(sum(cost[r, c] for r, c in assignment.items()), brute_force_assignment(cost))

    def test_gated_pairs_are_dropped(self):
        cost = np.array([[1e6, 1e6], [1e6, 0.5]])
        self.assertEqual(hungarian(cost), {1: 1})


class GnnTests(SimpleTestCase):
    model = MotionModel.constant_velocity(0.1)

    def test_exact_measurement_matches(self):
        tracks = [track_at((0, 0)), track_at((5, 5), track_id=TrackId(0, 1))]
        result = gnn_associate([Measurement([5.0, 5.0], np.eye(2))], tracks, GateState(2.0, 2.0), self.model)
        self.assertEqual(result.matches, [(0, 1)])
        self.assertEqual(result.unmatched_tracks, [0])

    def test_gate_boundary(self):
        gate = GateState(2.0, 2.0)
        outside = Measurement([math.sqrt(2.01), 0.0], np.eye(2))
        result = gnn_associate([outside], [track_at((0, 0))], gate, self.model)
        self.assertEqual(result.matches, [])
        self.assertEqual(result.unmatched_measurements, [0])
        self.assertEqual(result.unmatched_tracks, [0])
        inside = Measurement([math.sqrt(1.99), 0.0], np.eye(2))
        self.assertEqual(gnn_associate([inside], [track_at((0, 0))], gate, self.model).matches, [(0, 0)])

    def test_global_optimum_beats_greedy(self):
        tracks = [track_at((0, 0)), track_at((1, 0), track_id=TrackId(0, 1))]
        measurements = [Measurement([0.25, math.sqrt(0.4375)], np.eye(2)),
                        Measurement([-0.7, math.sqrt(0.11)], np.eye(2))]
        result = gnn_associate(measurements, tracks, GateState(5.0, 5.0), self.model)
        self.assertEqual(result.matches, [(0, 1), (1, 0)])

    def test_optimal_among_gated_assignments(self):
        rng = np.random.default_rng(8)
        for _ in range(100):
            n, m = rng.integers(1, 6, size=2)
            tracks = [track_at(rng.uniform(0, 3, 2), P=np.diag([0.1, 0.1, 1, 1]), track_id=TrackId(0, k))
                      for k in range(m)]
            measurements = [Measurement(rng.uniform(0, 3, 2), 0.05 * np.eye(2)) for _ in range(n)]
            tau = float(rng.uniform(1.0, 10.0))
            cost = np.array([[mahalanobis(z, t, self.model) for t in tracks] for z in measurements])
            result = gnn_associate(measurements, tracks, GateState(tau, tau), self.model)
            total = sum(cost[mi, ti] for mi, ti in result.matches)
            count, best = brute_force_gated(cost, tau)
            self.assertEqual(len(result.matches), count)
            self.assertLess(abs(total - best), 1e-9)


class InformationTests(SimpleTestCase):
    model = MotionModel.constant_velocity(0.1)

    def test_unit_covariance(self):
        u, U = to_information([1.0, 2.0], np.eye(2), self.model)
        np.testing.assert_allclose(u, [1.0, 2.0, 0.0, 0.0])
        self.assertEqual(np.linalg.matrix_rank(U), 2)
        np.testing.assert_array_equal(U[2:, 2:], np.zeros((2, 2)))

    def test_information_scales_inversely(self):
        u1, _ = to_information([1.0, 2.0], np.eye(2), self.model)
        u4, _ = to_information([1.0, 2.0], 4 * np.eye(2), self.model)
        np.testing.assert_allclose(u4, u1 / 4)

    def test_residual_identity(self):
        rng = np.random.default_rng(4)
        for _ in range(50):
            z, R, x = rng.normal(size=2), random_spd(rng, 2, 0.1), rng.normal(size=4)
            u, U = to_information(z, R, self.model)
            H = self.model.H
            np.testing.assert_allclose(H.T @ np.linalg.inv(R) @ (z - H @ x), u - U @ x, atol=1e-9)

    def test_singular_covariance(self):
        with self.assertRaises(SingularCovariance):
            to_information([0.0, 0.0], np.zeros((2, 2)), self.model)


class KcfTests(SimpleTestCase):
    model = MotionModel.constant_velocity(0.1, 0.5)

    def test_single_measurement_matches_textbook_filter(self):
        rng = np.random.default_rng(13)
        track = track_at((0.5, -0.3), P=random_spd(rng, 4, 0.1), velocity=(1.0, 0.2))
        oracle = TextbookKalman(self.model, track.x, track.P)
        for _ in range(30):
            z, R = rng.normal(size=2), random_spd(rng, 2, 0.02)
            u, U = to_information(z, R, self.model)
            track = kcf_update(track, u, U, [], self.model)
            oracle.update(z, R)
            oracle.predict()
            np.testing.assert_allclose(track.x, oracle.x, atol=1e-9)
            np.testing.assert_allclose(track.P, oracle.P, atol=1e-9)
        self.assertEqual(track.missed, 0)

    def test_no_information_is_prediction_only(self):
        track = track_at((1.0, 2.0), P=np.eye(4), velocity=(0.5, 0.0))
        result = kcf_update(track, np.zeros(4), np.zeros((4, 4)), [track.x.copy(), track.x.copy()], self.model)
        expected = predict(track, self.model)
        np.testing.assert_allclose(result.x, expected.x, atol=1e-12)
        np.testing.assert_allclose(result.P, expected.P, atol=1e-12)
        self.assertEqual(result.missed, 1)

    def test_information_additivity(self):
        rng = np.random.default_rng(3)
        for k in (2, 3, 5):
            track = track_at((0.0, 0.0), P=random_spd(rng, 4, 0.2))
            z, R = rng.normal(size=2), random_spd(rng, 2, 0.05)
            u, U = to_information(z, R, self.model)
            fused = kcf_update(track, k * u, k * U, [track.x.copy()] * (k - 1), self.model)
            oracle = TextbookKalman(self.model, track.x, track.P)
            oracle.update(z, R / k)
            oracle.predict()
            np.testing.assert_allclose(fused.x, oracle.x, atol=1e-9)
            np.testing.assert_allclose(fused.P, oracle.P, atol=1e-9)

    def test_consensus_contraction(self):
        rng = np.random.default_rng(9)
        model = MotionModel.static()
        P = random_spd(rng, 4, 0.5)
        tracks = [track_at(rng.uniform(-3, 3, 2), P=P, velocity=rng.uniform(-1, 1, 2)) for _ in range(4)]

        def spread(ts):
            return max(np.linalg.norm(a.x - b.x) for a, b in itertools.combinations(ts, 2))

        previous = spread(tracks)
        for _ in range(25):
            priors = [t.x.copy() for t in tracks]
            tracks = [
                kcf_update(t, np.zeros(4), np.zeros((4, 4)), [p for j, p in enumerate(priors) if j != i], model)
                for i, t in enumerate(tracks)
            ]
            current = spread(tracks)
            self.assertLessEqual(current, previous + 1e-12)
            previous = current

    def test_gain_cap(self):
        M = np.diag([4.0, 4.0, 1.0, 1.0])
        capped = consensus_gain(M, neighbor_count=3, cap=1.0)
        self.assertAlmostEqual(4 * np.linalg.norm(capped, 2), 1.0)
        np.testing.assert_allclose(consensus_gain(M, 3, cap=None), M / (1 + np.linalg.norm(M, 'fro')))

    def test_covariance_stays_psd(self):
        rng = np.random.default_rng(1)
        track = track_at((0, 0), P=np.diag([0.01, 0.01, 4.0, 4.0]))
        for frame in range(1000):
            if frame % 3:
                u, U = to_information(rng.normal(size=2), random_spd(rng, 2, 0.01), self.model)
            else:
                u, U = np.zeros(4), np.zeros((4, 4))
            track = kcf_update(track, u, U, [], self.model)
            self.assertTrue(is_psd(track.P))


class GateTests(SimpleTestCase):
    def test_inflation(self):
        params = GateAdaptation(alpha_t=2.0, alpha_theta=5.0, decay=0.9)
        gate = adapt_gate(GateState(2.0, 2.0), CorrectionMagnitude(1.0, 0.0), params)
        self.assertAlmostEqual(gate.tau, 6.0)

    def test_geometric_relaxation(self):
        params = GateAdaptation(decay=0.8)
        gate = GateState(10.0, 2.0)
        steps = math.ceil(math.log(0.01) / math.log(0.8))
        for _ in range(steps):
            gate = adapt_gate(gate, CorrectionMagnitude(), params)
        self.assertLessEqual(gate.tau - 2.0, 0.01 * 8.0)

    def test_never_below_baseline(self):
        rng = np.random.default_rng(0)
        gate = initial_gate(2.0, scale=3.0)
        self.assertEqual(gate.tau, 6.0)
        for _ in range(200):
            correction = CorrectionMagnitude(*rng.uniform(0, 0.5, 2)) if rng.random() < 0.3 else CorrectionMagnitude()
            gate = adapt_gate(gate, correction, GateAdaptation(decay=float(rng.uniform(0, 1))))
            self.assertGreaterEqual(gate.tau, gate.tau_base)


class TrackBankTests(SimpleTestCase):
    def test_alias_keeps_smallest_id(self):
        bank = TrackBank(owner=2)
        local = bank.new_id()
        bank.put(track_at((0, 0), track_id=local))
        keep = bank.alias(local, TrackId(0, 4))
        self.assertEqual(keep, TrackId(0, 4))
        self.assertEqual(bank.resolve(TrackId(2, 0)), TrackId(0, 4))
        self.assertEqual([t.id for t in bank], [TrackId(0, 4)])
        self.assertEqual(bank.alias(TrackId(1, 0), TrackId(0, 4)), TrackId(0, 4))
        self.assertEqual(bank.resolve(TrackId(1, 0)), TrackId(0, 4))

    def test_id_text_form(self):
        self.assertEqual(str(TrackId(3, 12)), '3-12')
        self.assertEqual(TrackId.parse('3-12'), TrackId(3, 12))

    def test_merge_keeps_smaller_id_and_confirmation(self):
        bank = TrackBank(owner=1)
        bank.put(track_at((1.0, 1.0), 0.05 * np.eye(4), track_id=TrackId(1, 0)))
        confirmed = replace(track_at((1.1, 1.0), 0.05 * np.eye(4), track_id=TrackId(0, 3)),
                            status=TrackStatus.CONFIRMED, hits=7, missed=2)
        bank.put(confirmed)
        keep = bank.merge(TrackId(1, 0), TrackId(0, 3))
        self.assertEqual(keep, TrackId(0, 3))
        self.assertEqual(len(bank), 1)
        merged = bank.get(TrackId(1, 0))
        self.assertEqual(merged.id, TrackId(0, 3))
        self.assertEqual(merged.status, TrackStatus.CONFIRMED)
        self.assertEqual(merged.hits, 7)
        # the track that was not missing detections keeps its state
        np.testing.assert_allclose(merged.position, [1.0, 1.0])

    def test_removed_track_forgets_aliases(self):
        bank = TrackBank(owner=0)
        bank.put(track_at((0, 0), track_id=TrackId(0, 0)))
        bank.alias(TrackId(0, 0), TrackId(1, 3))
        self.assertIn(TrackId(1, 3), bank)
        bank.remove(TrackId(0, 0))
        self.assertEqual(bank.resolve(TrackId(1, 3)), TrackId(1, 3))
        self.assertNotIn(TrackId(1, 3), bank)
        self.assertEqual(bank.aliases, {})


class LifecycleTests(SimpleTestCase):
    model = MotionModel.constant_velocity(0.1)
    identity = NoisyTransform.exact(Pose2.identity())

    def tracker(self, owner=0):
        return LocalTracker(owner, self.model, initial_gate(2.0), TrackLifecycle(n_confirm=3, n_miss_max=10))

    def step(self, trackers, detections, frame):
        for tracker, measurements in zip(trackers, detections):
            tracker.associate(measurements)
        outboxes = {t.owner: {o.owner: t.info_messages(o.owner, self.identity, frame)
                              for o in trackers if o is not t} for t in trackers}
        for tracker in trackers:
            inbox = [m for sender in sorted(outboxes) if sender != tracker.owner
                     for m in outboxes[sender][tracker.owner]]
            tracker.fuse(inbox, frame)

    def test_persistent_object_confirms_once(self):
        tracker = self.tracker()
        for frame in range(3):
            self.step([tracker], [[Measurement([2.0, 1.0], 0.01 * np.eye(2), frame)]], frame)
        self.assertEqual(len(tracker.bank), 1)
        self.assertEqual(len(tracker.bank.confirmed()), 1)

    def test_clutter_never_confirms(self):
        tracker = self.tracker()
        self.step([tracker], [[Measurement([2.0, 1.0], 0.01 * np.eye(2))]], 0)
        for frame in range(1, 11):
            self.step([tracker], [[]], frame)
            self.assertEqual(len(tracker.bank.confirmed()), 0)
        self.assertEqual(len(tracker.bank), 1)
        self.step([tracker], [[]], 11)
        self.assertEqual(len(tracker.bank), 0)

    def test_independent_tracks_agree_on_smallest_id(self):
        trackers = [self.tracker(0), self.tracker(1)]
        for frame in range(6):
            z = Measurement([2.0, 1.0], 0.01 * np.eye(2), frame)
            self.step(trackers, [[z], [z]], frame)
        for tracker in trackers:
            self.assertEqual([t.id for t in tracker.bank.confirmed()], [TrackId(0, 0)])
        self.assertEqual(trackers[1].bank.resolve(TrackId(1, 0)), TrackId(0, 0))

    def test_local_duplicates_merge(self):
        bank = TrackBank(0)
        bank.put(replace(track_at((1.0, 1.0), 0.05 * np.eye(4), velocity=(0.5, 0.0), track_id=TrackId(0, 0)),
                         status=TrackStatus.CONFIRMED))
        bank.put(track_at((1.05, 1.0), 0.05 * np.eye(4), velocity=(0.5, 0.0), track_id=TrackId(0, 1)))
        bank.put(track_at((4.0, 1.0), 0.05 * np.eye(4), velocity=(0.5, 0.0), track_id=TrackId(0, 2)))
        events = manage_tracks(bank, [], [], TrackLifecycle(), self.model, initial_gate(2.0))
        self.assertEqual(events.merged, [TrackId(0, 0)])
        self.assertEqual([t.id for t in bank], [TrackId(0, 0), TrackId(0, 2)])
        self.assertEqual(bank.resolve(TrackId(0, 1)), TrackId(0, 0))
        self.assertTrue(bank.get(TrackId(0, 0)).is_confirmed)

    def test_crossing_objects_stay_apart(self):
        bank = TrackBank(0)
        bank.put(track_at((1.0, 1.0), 0.01 * np.eye(4), velocity=(1.0, 0.0), track_id=TrackId(0, 0)))
        bank.put(track_at((1.05, 1.0), 0.01 * np.eye(4), velocity=(-1.0, 0.0), track_id=TrackId(0, 1)))
        events = manage_tracks(bank, [], [], TrackLifecycle(), self.model, initial_gate(2.0))
        self.assertEqual(events.merged, [])
        self.assertEqual(len(bank), 2)

    def test_one_message_per_sender_and_track(self):
        def tracker_with_track():
            tracker = self.tracker(0)
            tracker.bank.put(track_at((2.0, 1.0), 0.05 * np.eye(4), track_id=TrackId(0, 0)))
            tracker.bank.alias(TrackId(0, 0), TrackId(1, 5))
            tracker.associate([])
            return tracker

        u, U = to_information([2.1, 1.0], 0.01 * np.eye(2), self.model)
        prior = np.array([2.05, 1.0, 0.0, 0.0])
        first = InfoMessage(TrackId(0, 0), prior, u, U, 1, 0, np.array([2.1, 1.0]))
        duplicate = InfoMessage(TrackId(1, 5), prior, u, U, 1, 0, np.array([2.1, 1.0]))

        once, twice = tracker_with_track(), tracker_with_track()
        once.fuse([first], 0)
        twice.fuse([first, duplicate], 0)
        np.testing.assert_allclose(twice.bank.get(TrackId(0, 0)).x, once.bank.get(TrackId(0, 0)).x, atol=1e-12)
        np.testing.assert_allclose(twice.bank.get(TrackId(0, 0)).P, once.bank.get(TrackId(0, 0)).P, atol=1e-12)

    def test_single_robot_pipeline_matches_textbook_filter(self):
        rng = np.random.default_rng(30)
        tracker = LocalTracker(0, self.model, initial_gate(50.0), TrackLifecycle(n_confirm=3, n_miss_max=10))
        R = 0.01 * np.eye(2)
        oracle = None
        for frame in range(200):
            truth = np.array([0.1 * frame * 0.8, 1.0 + 0.1 * frame * 0.3])
            z = truth + rng.normal(0.0, 0.1, 2)
            observed = frame % 7 != 3
            self.step([tracker], [[Measurement(z, R, frame)] if observed else []], frame)
            if oracle is None:
                x0 = np.concatenate([z, np.zeros(2)])
                oracle = TextbookKalman(self.model, x0, np.diag([0.01, 0.01, 4.0, 4.0]))
            elif observed:
                oracle.update(z, R)
            oracle.predict()
            tracks = tracker.bank.ordered()
            self.assertEqual(len(tracks), 1)
            np.testing.assert_allclose(tracks[0].x, oracle.x, atol=1e-9)
            np.testing.assert_allclose(tracks[0].P, oracle.P, atol=1e-9)
        self.assertEqual(tracks[0].status, TrackStatus.CONFIRMED)
