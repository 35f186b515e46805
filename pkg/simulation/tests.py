import math
import tempfile
from pathlib import Path

import numpy as np
import pandas as pd
from django.test import SimpleTestCase, tag

from geometry.transforms import Pose2, inverse, transform_error, transform_point
from geometry.uncertainty import NoisyTransform
from metrics.alignment_stats import alignment_errors
from metrics.exceptions import RunLogError
from registration.frame_alignment import CoDetection, CorrectionMagnitude
from registration.landmark_maps import LandmarkMap
from simulation.agents import NO_REALIGN, AlignmentUpdate, RobotAgent, WindowEntry, select_realign_mode
from simulation.exceptions import ConfigError
from simulation.kinematics import pedestrian_position, robot_pose
from simulation.run_log import RunLog
from simulation.scenario import (
    DetectionNoise, FieldOfView, LandmarkNoise, OdometryNoise, PedestrianSpec, RobotSpec, Trajectory,
)
from simulation.scenario_runner import WorldState, communication_graph, run_scenario, true_alignment
from simulation.sensors import (
    detect_landmarks, detect_pedestrians, in_field_of_view, inject_alignment_error, step_odometry,
)
from simulation.serializers import load_scenario, parse_scenario, scenario_to_dict
from tracking.motion_models import MotionModel


def circle_waypoints(center=(5.0, 5.0), radius=2.0, sides=36):
    angles = np.linspace(0.0, 2 * math.pi, sides, endpoint=False)
    return [[center[0] + radius * math.cos(a), center[1] + radius * math.sin(a)] for a in angles]


def noiseless():
    return {
        'odom': {'sigma_v': 0.0, 'sigma_omega': 0.0},
        'detection': {'sigma_z_m': 0.0, 'p_detect': 1.0, 'clutter_rate': 0.0},
        'landmark_detection': {'sigma_l_m': 0.0, 'p_detect': 1.0},
    }


class OdometryTests(SimpleTestCase):
    def test_zero_noise_tracks_truth(self):
        rng = np.random.default_rng(0)
        estimate, cov = Pose2.identity(), np.zeros((3, 3))
        truth = Pose2.identity()
        for _ in range(50):
            increment = Pose2(0.1, 0.0, 0.05)
            estimate, cov = step_odometry(estimate, cov, increment, OdometryNoise(), rng)
            truth = truth @ increment
        self.assertAlmostEqual(estimate.x, truth.x, places=12)
        self.assertAlmostEqual(estimate.y, truth.y, places=12)
        self.assertAlmostEqual(estimate.theta, truth.theta, places=12)
        self.assertTrue(np.allclose(cov, 0.0))

    def test_stationary_robot_does_not_drift(self):
        rng = np.random.default_rng(1)
        estimate, cov = step_odometry(Pose2(1.0, 2.0, 0.3), np.zeros((3, 3)), Pose2.identity(),
                                      OdometryNoise(0.1, 0.1), rng)
        self.assertEqual(estimate, Pose2(1.0, 2.0, 0.3))
        self.assertTrue(np.allclose(cov, 0.0))

    def test_heading_variance_grows_linearly(self):
        n, sigma_omega = 20, 0.01
        headings = []
        for seed in range(1000):
            rng = np.random.default_rng(seed)
            estimate, cov = Pose2.identity(), np.zeros((3, 3))
            for _ in range(n):
                estimate, cov = step_odometry(estimate, cov, Pose2(0.0, 0.0, 0.05),
                                              OdometryNoise(0.0, sigma_omega), rng)
            headings.append(estimate.theta)
        variance = np.var(headings, ddof=1)
        self.assertLess(abs(variance - n * sigma_omega ** 2) / (n * sigma_omega ** 2), 0.15)
        self.assertAlmostEqual(cov[2, 2], n * sigma_omega ** 2)

    def test_covariance_trace_non_decreasing(self):
        rng = np.random.default_rng(2)
        estimate, cov = Pose2.identity(), np.zeros((3, 3))
        traces = []
        for _ in range(100):
            estimate, cov = step_odometry(estimate, cov, Pose2(0.1, 0.0, 0.02), OdometryNoise(0.01, 0.005), rng)
            traces.append(np.trace(cov))
        self.assertTrue(all(b >= a for a, b in zip(traces, traces[1:])))


class DetectionTests(SimpleTestCase):
    fov = FieldOfView(6.0, math.pi / 4)

    def test_field_of_view(self):
        pose = Pose2(0.0, 0.0, 0.0)
        self.assertTrue(in_field_of_view(pose, self.fov, (3.0, 1.0)))
        self.assertFalse(in_field_of_view(pose, self.fov, (-3.0, 0.0)))
        self.assertFalse(in_field_of_view(pose, self.fov, (7.0, 0.0)))
        self.assertFalse(in_field_of_view(pose, self.fov, (1.0, 3.0)))

    def test_pedestrian_behind_never_detected(self):
        rng = np.random.default_rng(3)
        for _ in range(100):
            detections = detect_pedestrians(Pose2(5.0, 5.0, 0.0), Pose2.identity(), np.zeros((3, 3)),
                                             self.fov, [(3.0, 5.0)], DetectionNoise(0.1, 1.0, 0.0), rng)
            self.assertEqual(detections, [])

    def test_noiseless_detection_is_local_position(self):
        rng = np.random.default_rng(4)
        true_pose = Pose2(2.0, 1.0, 0.5)
        detections = detect_pedestrians(true_pose, Pose2.identity(), np.zeros((3, 3)), self.fov,
                                         [(5.0, 3.0)], DetectionNoise(0.0, 1.0, 0.0), rng)
        self.assertEqual(len(detections), 1)
        expected = (Pose2(2.0, 1.0, 0.5).rotation.T @ (np.array([5.0, 3.0]) - np.array([2.0, 1.0])))
        np.testing.assert_allclose(detections[0].pos, expected, atol=1e-12)

    def test_clutter_rate(self):
        rng = np.random.default_rng(5)
        counts = []
        for _ in range(10000):
            detections = detect_pedestrians(Pose2.identity(), Pose2.identity(), np.zeros((3, 3)), self.fov,
                                            [], DetectionNoise(0.1, 0.95, 0.5), rng)
            for detection in detections:
                self.assertTrue(in_field_of_view(Pose2.identity(), self.fov, detection.pos))
            counts.append(len(detections))
        self.assertLess(abs(np.mean(counts) - 0.5) / 0.5, 0.05)

    def test_pose_uncertainty_inflates_measurement(self):
        rng = np.random.default_rng(6)
        pose_cov = np.diag([0.01, 0.01, 0.01])
        loose = detect_pedestrians(Pose2.identity(), Pose2.identity(), pose_cov, self.fov,
                                   [(4.0, 0.0)], DetectionNoise(0.1, 1.0, 0.0), rng)[0]
        tight = detect_pedestrians(Pose2.identity(), Pose2.identity(), np.zeros((3, 3)), self.fov,
                                   [(4.0, 0.0)], DetectionNoise(0.1, 1.0, 0.0), rng)[0]
        self.assertGreater(np.trace(loose.cov), np.trace(tight.cov))


class LandmarkDetectionTests(SimpleTestCase):
    fov = FieldOfView(6.0, math.pi / 4)

    def observe(self, estimate, landmarks, frames=10):
        rng = np.random.default_rng(7)
        landmark_map = LandmarkMap(0)
        for frame in range(frames):
            detect_landmarks(Pose2.identity(), estimate, self.fov, landmarks, LandmarkNoise(0.0, 1.0),
                             rng, landmark_map, frame, 0.5)
        return landmark_map

    def test_repeated_cone_single_entry(self):
        landmark_map = self.observe(Pose2.identity(), [(3.0, 0.5)])
        self.assertEqual(len(landmark_map), 1)
        np.testing.assert_allclose(landmark_map.positions[0], [3.0, 0.5], atol=1e-12)

    def test_two_cones_stay_apart(self):
        landmark_map = self.observe(Pose2.identity(), [(3.0, -1.5), (3.0, 1.5)])
        self.assertEqual(len(landmark_map), 2)

    def test_drift_moves_entries(self):
        landmark_map = self.observe(Pose2(0.2, 0.0, 0.0), [(3.0, 0.5)])
        np.testing.assert_allclose(landmark_map.positions[0], [3.2, 0.5], atol=1e-12)


class AlignmentErrorInjectionTests(SimpleTestCase):
    def test_zero_sigma_is_identity(self):
        self.assertEqual(inject_alignment_error(0.0, np.random.default_rng(0)), Pose2.identity())

    def test_heading_statistics(self):
        rng = np.random.default_rng(8)
        samples = [inject_alignment_error(0.5, rng) for _ in range(10000)]
        heading_std = np.std([math.degrees(s.theta) for s in samples], ddof=1)
        self.assertLess(abs(heading_std - 4.06) / 4.06, 0.03)
        magnitudes = np.array([math.hypot(s.x, s.y) for s in samples])
        # |N(0, σ)| has mean σ·sqrt(2/π)
        self.assertLess(abs(magnitudes.mean() - 0.5 * math.sqrt(2 / math.pi)) / (0.5 * math.sqrt(2 / math.pi)), 0.03)

    def test_negative_sigma_rejected(self):
        with self.assertRaises(ValueError):
            inject_alignment_error(-0.1, np.random.default_rng(0))


class RealignModeTests(SimpleTestCase):
    def test_threshold(self):
        self.assertEqual(select_realign_mode(100, 100, 'auto', True), 'dynamic')
        self.assertEqual(select_realign_mode(99, 100, 'auto', True), 'static')
        self.assertEqual(select_realign_mode(99, 100, 'auto', False), NO_REALIGN)

    def test_explicit_modes(self):
        self.assertEqual(select_realign_mode(1000, 100, 'off', True), NO_REALIGN)
        self.assertEqual(select_realign_mode(0, 100, 'dynamic', False), 'dynamic')
        self.assertEqual(select_realign_mode(1000, 100, 'static', True), 'static')


class KinematicsTests(SimpleTestCase):
    def test_circular_robot(self):
        robot = RobotSpec(Pose2(7.0, 5.0, math.pi / 2), Trajectory('circular', (5.0, 5.0), 2.0, 0.5))
        pose = robot_pose(robot, 2 * math.pi)
        self.assertAlmostEqual(pose.x, 3.0)
        self.assertAlmostEqual(pose.y, 5.0)
        self.assertAlmostEqual(pose.theta, -math.pi / 2)

    def test_pedestrian_loop(self):
        pedestrian = PedestrianSpec(((0.0, 0.0), (4.0, 0.0), (4.0, 3.0)), 1.0)
        np.testing.assert_allclose(pedestrian_position(pedestrian, 2.0), [2.0, 0.0])
        np.testing.assert_allclose(pedestrian_position(pedestrian, 5.0), [4.0, 1.0])
        np.testing.assert_allclose(pedestrian_position(pedestrian, 12.0), [0.0, 0.0], atol=1e-12)


class ScenarioSerializerTests(SimpleTestCase):
    def test_defaults(self):
        config = parse_scenario({'robots': [{'initial': {'x': 1.0, 'y': 1.0}}]})
        self.assertEqual(config.frame_rate_hz, 10.0)
        self.assertEqual(config.duration_s, 60.0)
        self.assertEqual(config.frame_count, 600)
        self.assertEqual(config.tracking.tau_gate, 2.0)
        self.assertEqual(config.realign.mode, 'off')
        self.assertEqual(config.realign.tau_eta, 100)
        self.assertIsNone(config.error_injection)
        self.assertAlmostEqual(config.robots[0].fov.half_angle_rad, math.pi / 4)

    def test_resolved_config_reparses(self):
        config = parse_scenario({
            'robots': [{'initial': {'x': 1.0, 'y': 1.0, 'theta_deg': 30.0}}],
            'error_injection': {'sigma_t_m': 0.5},
        })
        again = parse_scenario(scenario_to_dict(config))
        self.assertEqual(again.error_injection, config.error_injection)
        self.assertEqual(again.tracking, config.tracking)
        self.assertAlmostEqual(again.robots[0].initial.theta, config.robots[0].initial.theta)

    def test_robots_required(self):
        with self.assertRaises(ConfigError) as ctx:
            parse_scenario({'frame_rate_hz': 10})
        self.assertIn('robots', str(ctx.exception))

    def test_rates_must_be_positive(self):
        with self.assertRaises(ConfigError) as ctx:
            parse_scenario({'robots': [{'initial': {'x': 1.0, 'y': 1.0}}], 'frame_rate_hz': 0})
        self.assertIn('frame_rate_hz', str(ctx.exception))

    def test_disconnected_graph(self):
        robots = [{'initial': {'x': float(i + 1), 'y': 1.0}} for i in range(3)]
        with self.assertRaises(ConfigError) as ctx:
            parse_scenario({'robots': robots, 'communication': [[0, 1]]})
        self.assertIn('communication graph must be connected', str(ctx.exception))

    def test_circular_start_off_circle(self):
        robot = {'initial': {'x': 5.0, 'y': 5.0},
                 'trajectory': {'kind': 'circular', 'center': [5.0, 5.0], 'radius': 2.0, 'angular_rate': 0.1}}
        with self.assertRaises(ConfigError) as ctx:
            parse_scenario({'robots': [robot]})
        self.assertIn('circular path', str(ctx.exception))

    def test_outside_arena(self):
        with self.assertRaises(ConfigError) as ctx:
            parse_scenario({'robots': [{'initial': {'x': 11.0, 'y': 1.0}}]})
        self.assertIn('arena', str(ctx.exception))

    def test_missing_file(self):
        with self.assertRaises(ConfigError) as ctx:
            load_scenario('/nonexistent/scenario.yaml')
        self.assertIn('file not found', str(ctx.exception))

    def test_seed_override(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / 'scenario.yaml'
            path.write_text('robots:\n  - initial: {x: 1.0, y: 1.0}\nrng_seed: 3\n')
            self.assertEqual(load_scenario(path).rng_seed, 3)
            self.assertEqual(load_scenario(path, seed=11).rng_seed, 11)


def two_robot_config(**overrides):
    data = {
        'name': 'pair',
        'duration_s': 5.0,
        'rng_seed': 4,
        'robots': [
            {'initial': {'x': 0.0, 'y': 0.0, 'theta_deg': 45.0}, 'fov': {'range_m': 12.0, 'half_angle_deg': 60.0}},
            {'initial': {'x': 10.0, 'y': 0.0, 'theta_deg': 135.0}, 'fov': {'range_m': 12.0, 'half_angle_deg': 60.0}},
        ],
        'pedestrians': [{'waypoints': circle_waypoints(), 'speed_mps': 1.0}],
        'landmarks': [[2.0, 6.0], [8.0, 6.0], [5.0, 9.0], [3.5, 8.0]],
        'tracking': {'tau_gate': 50.0},
    }
    data.update(overrides)
    return parse_scenario(data)


class TrueAlignmentTests(SimpleTestCase):
    def test_maps_local_observations_between_robots(self):
        rng = np.random.default_rng(8)
        for _ in range(20):
            initial = [Pose2(*rng.uniform(0, 10, 2), rng.uniform(-3, 3)) for _ in range(2)]
            true = [Pose2(*rng.uniform(0, 10, 2), rng.uniform(-3, 3)) for _ in range(2)]
            estimated = [Pose2(*rng.uniform(-5, 5, 2), rng.uniform(-3, 3)) for _ in range(2)]
            world = WorldState(0, initial, true, estimated, [np.zeros((3, 3))] * 2, np.zeros((0, 2)))
            point = rng.uniform(0, 10, 2)
            local = [transform_point(estimated[k] @ inverse(true[k]), point) for k in range(2)]
            np.testing.assert_allclose(transform_point(true_alignment(world, 0, 1), local[0]), local[1], atol=1e-9)
            np.testing.assert_allclose(transform_point(true_alignment(world, 1, 0), local[1]), local[0], atol=1e-9)

    def test_identity_without_drift_for_one_start(self):
        start = Pose2(2.0, 3.0, 0.4)
        world = WorldState(5, [start, start], [Pose2(4.0, 1.0, 1.0), Pose2(6.0, 2.0, -1.0)],
                           [inverse(start) @ Pose2(4.0, 1.0, 1.0), inverse(start) @ Pose2(6.0, 2.0, -1.0)],
                           [np.zeros((3, 3))] * 2, np.zeros((0, 2)))
        translation, heading = transform_error(true_alignment(world, 0, 1), Pose2.identity())
        self.assertAlmostEqual(translation, 0.0, places=9)
        self.assertAlmostEqual(heading, 0.0, places=9)


class ScenarioRunnerTests(SimpleTestCase):
    def test_single_robot_sanity(self):
        config = parse_scenario({
            'duration_s': 10.0,
            'robots': [{'initial': {'x': 0.0, 'y': 0.0, 'theta_deg': 45.0},
                        'fov': {'range_m': 12.0, 'half_angle_deg': 50.0}}],
            'pedestrians': [{'waypoints': circle_waypoints(), 'speed_mps': 1.0}],
            'noise': {'detection': {'sigma_z_m': 0.1, 'p_detect': 1.0, 'clutter_rate': 0.0}},
            'tracking': {'tau_gate': 25.0},
        })
        run_log = run_scenario(config)
        gt = run_log.ground_truth[run_log.ground_truth['kind'] == 'pedestrian'].set_index('frame')
        confirmed = run_log.tracks[run_log.tracks['status'] == 'confirmed']
        for frame in range(10, config.frame_count):
            rows = confirmed[confirmed['frame'] == frame]
            self.assertEqual(len(rows), 1, f'frame {frame}')
            error = math.hypot(rows['world_x'].iloc[0] - gt.loc[frame, 'x'],
                               rows['world_y'].iloc[0] - gt.loc[frame, 'y'])
            self.assertLess(error, 0.3, f'frame {frame}')

    def test_deterministic(self):
        config = two_robot_config(
            noise={'odom': {'sigma_v': 0.01, 'sigma_omega': 0.005},
                   'detection': {'sigma_z_m': 0.1, 'p_detect': 0.9, 'clutter_rate': 0.3}},
            error_injection={'sigma_t_m': 0.5},
            realign={'mode': 'static'},
        )
        first, second = run_scenario(config), run_scenario(config)
        for name, table in first.tables().items():
            pd.testing.assert_frame_equal(table, second.tables()[name])

    def test_noiseless_alignment_stays_exact(self):
        config = two_robot_config(noise=noiseless(), realign={'mode': 'dynamic'})
        alignments = run_scenario(config).alignments
        for axis in ('x', 'y'):
            self.assertLess((alignments[f'est_{axis}'] - alignments[f'true_{axis}']).abs().max(), 1e-6)
        heading = np.angle(np.exp(1j * (alignments['est_theta'] - alignments['true_theta'])))
        self.assertLess(np.abs(heading).max(), 1e-6)
        self.assertEqual(set(alignments['method']), {'initial'})

    def test_dynamic_realignment_removes_injected_error(self):
        config = two_robot_config(noise=noiseless(), realign={'mode': 'dynamic'}, error_injection={'sigma_t_m': 0.15})
        alignments = run_scenario(config).alignments
        self.assertIn('dynamic', set(alignments['method']))
        last = alignments[alignments['frame'] == alignments['frame'].max()]
        self.assertLess((last['est_x'] - last['true_x']).abs().max(), 1e-6)
        self.assertLess((last['est_y'] - last['true_y']).abs().max(), 1e-6)

    def test_noiseless_static_realignment(self):
        config = two_robot_config(noise=noiseless(), realign={'mode': 'static'})
        alignments = run_scenario(config).alignments
        self.assertLess((alignments['est_x'] - alignments['true_x']).abs().max(), 1e-6)
        self.assertIn('static', set(alignments['method']))

    def test_static_realignment_removes_injected_error(self):
        config = two_robot_config(
            noise=noiseless(), realign={'mode': 'static'}, error_injection={'sigma_t_m': 0.15},
            duration_s=3.0,
        )
        alignments = run_scenario(config).alignments
        last = alignments[alignments['frame'] == alignments['frame'].max()]
        self.assertLess((last['est_x'] - last['true_x']).abs().max(), 1e-6)
        self.assertLess((last['est_y'] - last['true_y']).abs().max(), 1e-6)

    def test_ground_truth_localization(self):
        config = two_robot_config(
            noise={'odom': {'sigma_v': 0.05, 'sigma_omega': 0.02}},
            error_injection={'sigma_t_m': 1.0},
            ground_truth_localization=True,
        )
        alignments = run_scenario(config).alignments
        self.assertEqual(set(alignments['method']), {'truth'})
        self.assertLess((alignments['est_x'] - alignments['true_x']).abs().max(), 1e-9)


class AgentRealignmentTests(SimpleTestCase):
    def setUp(self):
        config = two_robot_config(realign={'mode': 'dynamic'})
        self.agent = RobotAgent(0, config, MotionModel.constant_velocity(config.dt), [1], np.random.default_rng(0))
        self.agent.set_alignment(1, NoisyTransform(Pose2(1.0, 0.0, 0.0), 0.01 * np.eye(3), 0), 'initial')
        self.agent.estimate_cov = np.diag([0.1, 0.1, 0.01])

    def test_applied_update_resets_pose_covariance(self):
        update = AlignmentUpdate(NoisyTransform.exact(Pose2(1.1, 0.0, 0.0), 5), 0, CorrectionMagnitude(0.1, 0.0))
        self.agent.apply_alignment_update(1, update)
        self.assertEqual(self.agent.alignments[1].method, 'dynamic')
        self.assertAlmostEqual(self.agent.alignments[1].transform.pose.x, 1.1)
        self.assertTrue(np.array_equal(self.agent.estimate_cov, np.zeros((3, 3))))
        self.assertEqual(self.agent.corrections, [CorrectionMagnitude(0.1, 0.0)])

    def test_stale_update_changes_nothing(self):
        update = AlignmentUpdate(NoisyTransform.exact(Pose2(1.1, 0.0, 0.0), 5), 3, CorrectionMagnitude(0.1, 0.0))
        self.agent.apply_alignment_update(1, update)
        self.assertEqual(self.agent.alignments[1].method, 'initial')
        self.assertAlmostEqual(self.agent.estimate_cov[0, 0], 0.1)
        self.assertEqual(self.agent.corrections, [])

    def test_degenerate_window_warns_and_keeps_alignment(self):
        point = np.array([2.0, 1.0])
        for frame in (4, 5):
            codetection = CoDetection(frame, np.array([2.0, 1.0, 0.0, 0.0]), point, point)
            self.agent.windows[1].append(WindowEntry(frame, codetection, point))
        self.agent.neighbor_alignments[1] = NoisyTransform.exact(Pose2.identity(), 3)
        with self.assertLogs('simulation.agents', level='WARNING') as logs:
            self.agent.realign_dynamic(1, 5)
        self.assertIn('dynamic realignment with 1 skipped', logs.output[0])
        self.assertEqual(self.agent.pending_updates, {})


def walkers_config(communication=None):
    """Three static robots that all see two slow walkers on straight paths"""
    fov = {'range_m': 12.0, 'half_angle_deg': 60.0}
    return parse_scenario({
        'name': 'walkers',
        'duration_s': 6.0,
        'rng_seed': 5,
        'robots': [
            {'initial': {'x': 0.5, 'y': 0.5, 'theta_deg': 45.0}, 'fov': fov},
            {'initial': {'x': 9.5, 'y': 0.5, 'theta_deg': 135.0}, 'fov': fov},
            {'initial': {'x': 5.0, 'y': 9.5, 'theta_deg': -90.0}, 'fov': fov},
        ],
        'pedestrians': [
            {'waypoints': [[3.0, 5.0], [7.0, 5.0]], 'speed_mps': 0.3},
            {'waypoints': [[4.0, 3.0], [6.0, 3.0]], 'speed_mps': 0.2},
        ],
        'noise': {'detection': {'sigma_z_m': 0.05, 'p_detect': 1.0, 'clutter_rate': 0.0}},
        'communication': communication,
        'tracking': {'tau_gate': 9.21},
    })


def confirmed_ids(tracks: pd.DataFrame, frame: int, robot: int) -> set:
    rows = tracks[(tracks['frame'] == frame) & (tracks['robot'] == robot) & (tracks['status'] == 'confirmed')]
    return set(rows['track_id'])


class TrackAgreementTests(SimpleTestCase):
    def test_one_shared_id_per_walker(self):
        config = walkers_config()
        tracks = run_scenario(config).tracks
        last = config.frame_count - 1
        ids = [confirmed_ids(tracks, last, robot) for robot in range(3)]
        self.assertEqual(len(ids[0]), 2)
        self.assertEqual(ids[0], ids[1])
        self.assertEqual(ids[0], ids[2])
        per_robot = tracks[tracks['frame'] == last].groupby('robot').size()
        self.assertEqual(per_robot.tolist(), [2, 2, 2])

    def test_line_graph_agrees_within_diameter(self):
        config = walkers_config(communication=[[0, 1], [1, 2]])
        diameter = communication_graph(config).diameter()
        self.assertEqual(diameter, 2)
        tracks = run_scenario(config).tracks
        first_confirmed = int(tracks.loc[tracks['status'] == 'confirmed', 'frame'].min())
        for frame in range(first_confirmed + diameter, config.frame_count):
            ids = [confirmed_ids(tracks, frame, robot) for robot in range(3)]
            self.assertEqual(len(ids[0]), 2, f'frame {frame}')
            self.assertEqual(ids[0], ids[1], f'frame {frame}')
            self.assertEqual(ids[0], ids[2], f'frame {frame}')


def circling_pair(seed: int):
    """Two robots on one circle with odometric drift, nothing to see and no realignment"""
    trajectory = {'kind': 'circular', 'center': [5.0, 5.0], 'radius': 3.5, 'angular_rate': 0.15}
    return parse_scenario({
        'name': 'drift',
        'duration_s': 81.0,
        'rng_seed': seed,
        'robots': [
            {'initial': {'x': 8.5, 'y': 5.0, 'theta_deg': 180.0}, 'trajectory': trajectory},
            {'initial': {'x': 3.25, 'y': 8.031089, 'theta_deg': -60.0}, 'trajectory': trajectory},
        ],
        'noise': {'odom': {'sigma_v': 0.004, 'sigma_omega': 0.002}},
        'realign': {'mode': 'off'},
    })


@tag('slow')
class DriftGrowthTests(SimpleTestCase):
    frames = [50, 200, 800]

    def test_alignment_error_grows_without_realignment(self):
        errors = []
        for seed in range(20):
            alignments = run_scenario(circling_pair(seed)).alignments
            table = alignment_errors(alignments[(alignments['i'] == 0) & (alignments['j'] == 1)])
            errors.append(table.set_index('frame').loc[self.frames, ['translation_m', 'heading_deg']])
        mean = pd.concat(errors).groupby(level=0).mean()
        for column in ['translation_m', 'heading_deg']:
            values = mean.loc[self.frames, column].tolist()
            self.assertLess(values[0], values[1], column)
            self.assertLess(values[1], values[2], column)


class RunLogTests(SimpleTestCase):
    def setUp(self):
        self.run_log = run_scenario(two_robot_config(duration_s=2.0), trace_messages=True)

    def test_write_then_load(self):
        with tempfile.TemporaryDirectory() as tmp:
            self.run_log.write(tmp)
            loaded = RunLog.load(tmp)
        for name, table in self.run_log.tables().items():
            pd.testing.assert_frame_equal(table.reset_index(drop=True), loaded.tables()[name], check_dtype=False)
        self.assertEqual(loaded.config['name'], 'pair')
        self.assertIsNone(loaded.timings)

    def test_truncated_table_named(self):
        with tempfile.TemporaryDirectory() as tmp:
            self.run_log.write(tmp)
            path = Path(tmp) / 'tracks.csv'
            lines = path.read_text().splitlines()
            path.write_text('\n'.join(lines[:len(lines) // 2]) + '\n')
            with self.assertRaises(RunLogError) as ctx:
                RunLog.load(tmp)
        self.assertIn('tracks.csv', str(ctx.exception))

    def test_missing_table_named(self):
        with tempfile.TemporaryDirectory() as tmp:
            self.run_log.write(tmp)
            (Path(tmp) / 'alignments.csv').unlink()
            with self.assertRaises(RunLogError) as ctx:
                RunLog.load(tmp)
        self.assertIn('alignments.csv', str(ctx.exception))
