import itertools
import math

import numpy as np
from django.test import SimpleTestCase

from geometry.transforms import Pose2, compose
from metrics.alignment_stats import alignment_stats
from metrics.clear_mot import MotAccumulator, distance_matrix, eval_frame, mota, sliding_mota
from metrics.exceptions import EmptyGroundTruth
from metrics.reports import alignment_hist_table, evaluate_run, mota_window_table, summary_table, team_tracks
from simulation.run_log import ALIGNMENTS, GROUND_TRUTH, TRACKS, RunLog, table_from_rows


def brute_force_frame(gt, tracks, prev_matches, d_match, last_matched):
    """Exhaustive CLEAR-MOT frame: carry-over, then the largest gated matching of least total distance"""
    gt_pos = dict(gt)
    track_pos = dict(tracks)

    def dist(g, t):
        return math.hypot(gt_pos[g][0] - track_pos[t][0], gt_pos[g][1] - track_pos[t][1])

    matches = {g: t for g, t in prev_matches.items()
               if g in gt_pos and t in track_pos and dist(g, t) <= d_match}
    free_gt = [g for g, _ in gt if g not in matches]
    free_tracks = [t for t, _ in tracks if t not in matches.values()]

    best, best_key = {}, (0, 0.0)
    options = [None] + free_tracks
    for choice in itertools.product(options, repeat=len(free_gt)):
        chosen = [c for c in choice if c is not None]
        if len(chosen) != len(set(chosen)):
            continue
        pairs = [(g, t) for g, t in zip(free_gt, choice) if t is not None]
        if any(dist(g, t) > d_match for g, t in pairs):
            continue
        key = (-len(pairs), sum(dist(g, t) for g, t in pairs))
        if key < best_key:
            best, best_key = dict(pairs), key
    matches.update(best)

    mme = sum(1 for g, t in matches.items() if g in last_matched and last_matched[g] != t)
    return len(gt_pos) - len(matches), len(track_pos) - len(matches), mme, matches


class EvalFrameTests(SimpleTestCase):
    def test_tracks_on_ground_truth(self):
        result = eval_frame([(0, (1.0, 1.0)), (1, (4.0, 2.0))], [('a', (1.0, 1.0)), ('b', (4.0, 2.0))], {})
        self.assertEqual((result.misses, result.false_positives, result.mismatches), (0, 0, 0))
        self.assertEqual(result.matches, {0: 'a', 1: 'b'})
        self.assertEqual(result.gt_count, 2)

    def test_carry_over_beats_closer_track(self):
        result = eval_frame([(0, (0.0, 0.0))], [('a', (0.8, 0.0)), ('b', (0.1, 0.0))], {0: 'a'})
        self.assertEqual(result.matches, {0: 'a'})
        self.assertEqual((result.false_positives, result.mismatches), (1, 0))

    def test_older_match_makes_a_mismatch(self):
        result = eval_frame([(0, (0.0, 0.0))], [('b', (0.1, 0.0))], {}, last_matched={0: 'a'})
        self.assertEqual(result.matches, {0: 'b'})
        self.assertEqual(result.mismatches, 1)

    def test_permuted_stable_assignment_with_infinite_gate(self):
        rng = np.random.default_rng(0)
        gt = [(g, tuple(rng.uniform(0, 10, 2))) for g in range(5)]
        tracks = [(f't{g}', tuple(rng.uniform(0, 10, 2))) for g in range(5)]
        prev = {g: f't{(g + 2) % 5}' for g in range(5)}
        result = eval_frame(gt, tracks, prev, math.inf)
        self.assertEqual((result.misses, result.false_positives, result.mismatches), (0, 0, 0))
        self.assertEqual(result.matches, prev)

    def test_matches_brute_force(self):
        rng = np.random.default_rng(1)
        for _ in range(200):
            gt = [(g, tuple(rng.uniform(0, 3, 2))) for g in range(rng.integers(0, 6))]
            tracks = [(f't{t}', tuple(rng.uniform(0, 3, 2))) for t in range(rng.integers(0, 6))]
            prev = {}
            track_ids = [t for t, _ in tracks] + ['gone']
            for g, _ in gt:
                if rng.random() < 0.5:
                    candidate = track_ids[rng.integers(0, len(track_ids))]
                    if candidate not in prev.values():
                        prev[g] = candidate
            last = dict(prev)
            for g, _ in gt:
                if g not in last and rng.random() < 0.3:
                    last[g] = 'old'
            result = eval_frame(gt, tracks, prev, 1.0, last)
            m, fp, mme, matches = brute_force_frame(gt, tracks, prev, 1.0, last)
            self.assertEqual((result.misses, result.false_positives, result.mismatches), (m, fp, mme))
            self.assertEqual(result.matches, matches)


def counts_of(acc, frame):
    row = acc.frame_counts().loc[frame]
    return int(row['misses']), int(row['false_positives']), int(row['mismatches'])


class ClearMotEventTests(SimpleTestCase):
    def test_tracks_on_ground_truth(self):
        acc = MotAccumulator()
        acc.update([(0, (1.0, 1.0)), (1, (4.0, 2.0))], [('a', (1.0, 1.0)), ('b', (4.0, 2.0))])
        self.assertEqual(counts_of(acc, 0), (0, 0, 0))
        self.assertEqual(acc.frame_counts().loc[0, 'gt_count'], 2)

    def test_one_track_two_objects(self):
        acc = MotAccumulator()
        acc.update([(0, (0.0, 0.0)), (1, (5.0, 5.0))], [('a', (0.2, 0.0))])
        self.assertEqual(counts_of(acc, 0), (1, 0, 0))
        self.assertEqual(acc.frame_counts().loc[0, 'gt_count'], 2)

    def test_track_outside_d_match(self):
        acc = MotAccumulator(d_match=1.0)
        acc.update([(0, (0.0, 0.0))], [('a', (1.5, 0.0))])
        self.assertEqual(counts_of(acc, 0), (1, 1, 0))

    def test_id_swap_is_one_mismatch(self):
        acc = MotAccumulator(1.0)
        acc.update([(0, (0.0, 0.0))], [('a', (0.1, 0.0))])
        acc.update([(0, (0.0, 0.0))], [('b', (0.1, 0.0))])
        acc.update([(0, (0.0, 0.0))], [('b', (0.1, 0.0))])
        self.assertEqual(acc.frame_counts()['mismatches'].tolist(), [0, 1, 0])

    def test_mismatch_after_gap(self):
        acc = MotAccumulator(1.0)
        acc.update([(0, (0.0, 0.0))], [('a', (0.0, 0.0))])
        acc.update([(0, (0.0, 0.0))], [])
        acc.update([(0, (0.0, 0.0))], [('b', (0.0, 0.0))])
        self.assertEqual(counts_of(acc, 1), (1, 0, 0))
        self.assertEqual(counts_of(acc, 2), (0, 0, 1))

    def test_carry_over_beats_closer_track(self):
        acc = MotAccumulator(1.0)
        acc.update([(0, (0.0, 0.0))], [('a', (0.1, 0.0))])
        acc.update([(0, (0.0, 0.0))], [('a', (0.8, 0.0)), ('b', (0.1, 0.0))])
        self.assertEqual(counts_of(acc, 1), (0, 1, 0))

    def test_empty_frames_are_counted(self):
        acc = MotAccumulator()
        acc.update([], [])
        acc.update([(0, (0.0, 0.0))], [('a', (0.0, 0.0))])
        acc.update([], [])
        counts = acc.frame_counts()
        self.assertEqual(len(counts), 3)
        self.assertEqual(counts['gt_count'].tolist(), [0, 1, 0])

    def test_frames_carry_matches(self):
        acc = MotAccumulator(1.0)
        acc.update([(0, (0.0, 0.0)), (1, (4.0, 0.0))], [('a', (0.1, 0.0)), ('b', (4.0, 0.2))])
        acc.update([(0, (0.0, 0.0))], [('b', (0.1, 0.0))])
        frames = acc.frames()
        self.assertEqual(frames[0].matches, {0: 'a', 1: 'b'})
        self.assertEqual(frames[1].matches, {0: 'b'})
        self.assertEqual(frames[1].mismatches, 1)

    def test_infinite_gate_matches_everything(self):
        rng = np.random.default_rng(0)
        acc = MotAccumulator(math.inf)
        acc.update([(g, tuple(rng.uniform(0, 10, 2))) for g in range(5)],
                   [(f't{g}', tuple(rng.uniform(0, 10, 2))) for g in range(5)])
        self.assertEqual(counts_of(acc, 0), (0, 0, 0))

    def test_totals_agree_with_frame_counts(self):
        rng = np.random.default_rng(1)
        acc = MotAccumulator(1.0)
        for _ in range(40):
            gt = [(g, tuple(rng.uniform(0, 3, 2))) for g in range(rng.integers(0, 5))]
            tracks = [(f't{t}', tuple(rng.uniform(0, 3, 2))) for t in range(rng.integers(0, 5))]
            acc.update(gt, tracks)
        totals = acc.totals()
        summed = acc.frame_counts().sum()
        for name in ('misses', 'false_positives', 'mismatches', 'gt_count'):
            self.assertEqual(totals[name], int(summed[name]), name)


class DistanceMatrixTests(SimpleTestCase):
    def test_gated_pairs_are_nan(self):
        distances = distance_matrix([(0, (0.0, 0.0)), (1, (3.0, 0.0))], [('a', (0.0, 0.6)), ('b', (3.0, 4.0))], 1.0)
        self.assertEqual(distances.shape, (2, 2))
        self.assertAlmostEqual(distances[0, 0], 0.6)
        self.assertTrue(np.isnan(distances[0, 1]))
        self.assertTrue(np.isnan(distances[1, 1]))

    def test_empty_side(self):
        self.assertEqual(distance_matrix([], [('a', (0.0, 0.0))], 1.0).shape, (0, 1))
        self.assertEqual(distance_matrix([(0, (0.0, 0.0))], [], 1.0).shape, (1, 0))


class MotaTests(SimpleTestCase):
    def test_perfect(self):
        acc = MotAccumulator()
        for _ in range(10):
            acc.update([(0, (0.0, 0.0)), (1, (3.0, 0.0))], [('a', (0.0, 0.0)), ('b', (3.0, 0.0))])
        self.assertEqual(mota(acc), 1.0)

    def test_half_missed(self):
        acc = MotAccumulator()
        for _ in range(10):
            acc.update([(g, (3.0 * g, 0.0)) for g in range(4)], [('a', (0.0, 0.0)), ('b', (3.0, 0.0))])
        self.assertEqual(mota(acc), 0.5)

    def test_half_missed_plus_phantoms(self):
        acc = MotAccumulator()
        for _ in range(10):
            acc.update([(g, (3.0 * g, 0.0)) for g in range(4)],
                       [('a', (0.0, 0.0)), ('b', (3.0, 0.0)), ('c', (6.0, 8.0)), ('d', (9.0, 8.0))])
        self.assertEqual(mota(acc), 0.0)

    def test_empty_ground_truth(self):
        acc = MotAccumulator()
        acc.update([], [('a', (0.0, 0.0))])
        with self.assertRaises(EmptyGroundTruth):
            mota(acc)

    def test_relabeling_invariance(self):
        rng = np.random.default_rng(2)
        frames = []
        for _ in range(30):
            gt = [(g, tuple(rng.uniform(0, 4, 2))) for g in range(3)]
            tracks = [(t, tuple(rng.uniform(0, 4, 2))) for t in ('a', 'b', 'c', 'd')]
            frames.append((gt, tracks))
        rename = {'a': 'z', 'b': 'y', 'c': 'x', 'd': 'w'}
        original, relabeled = MotAccumulator(), MotAccumulator()
        for gt, tracks in frames:
            original.update(gt, tracks)
            relabeled.update(gt, [(rename[t], p) for t, p in tracks])
        self.assertEqual(mota(original), mota(relabeled))


class SlidingMotaTests(SimpleTestCase):
    def accumulator(self, frames, error_frames=()):
        acc = MotAccumulator()
        for k in range(frames):
            tracks = [('a', (0.0, 0.0))] if k not in error_frames else []
            acc.update([(0, (0.0, 0.0)), (1, (5.0, 5.0))], tracks)
        return acc

    def test_constant_components(self):
        acc = self.accumulator(100)
        series = sliding_mota(acc, 1.0, 10.0)
        self.assertEqual(len(series), 91)
        np.testing.assert_allclose(series, mota(acc))

    def test_full_window_equals_global(self):
        acc = self.accumulator(50, error_frames=range(10, 20))
        series = sliding_mota(acc, 5.0, 10.0)
        self.assertEqual(len(series), 1)
        self.assertEqual(series[0], mota(acc))
        self.assertEqual(len(sliding_mota(acc, 60.0, 10.0)), 1)

    def test_errors_in_second_half(self):
        acc = self.accumulator(100, error_frames=range(50, 100))
        series = sliding_mota(acc, 1.0, 10.0)
        self.assertTrue(np.all(series[-10:] < series[0]))


class AlignmentStatsTests(SimpleTestCase):
    def table(self, pairs):
        rows = []
        for frame, (est, truth) in enumerate(pairs):
            rows.append({'frame': frame, 'i': 0, 'j': 1, 'est_x': est.x, 'est_y': est.y, 'est_theta': est.theta,
                         'true_x': truth.x, 'true_y': truth.y, 'true_theta': truth.theta,
                         'cov_x': 0.0, 'cov_y': 0.0, 'cov_theta': 0.0, 'method': 'static'})
        return table_from_rows(ALIGNMENTS, rows)

    def test_perfect(self):
        truth = [Pose2(float(k), 1.0, 0.1 * k) for k in range(20)]
        stats = alignment_stats(self.table(zip(truth, truth)))
        self.assertAlmostEqual(stats.median_heading_deg, 0.0)
        self.assertAlmostEqual(stats.median_translation_m, 0.0)

    def test_constant_offset(self):
        offset = Pose2(0.1, 0.0, math.radians(2.0))
        truth = [Pose2(float(k), -1.0, 0.2 * k) for k in range(20)]
        stats = alignment_stats(self.table((compose(t, offset), t) for t in truth))
        self.assertAlmostEqual(stats.median_translation_m, 0.1, places=9)
        self.assertAlmostEqual(stats.median_heading_deg, 2.0, places=9)
        self.assertEqual(int(stats.heading_hist['count'].sum()), 20)

    def test_median_of_sampled_errors(self):
        rng = np.random.default_rng(3)
        sigma = math.radians(2.0)
        pairs = [(Pose2(0.0, 0.0, rng.normal(0.0, sigma)), Pose2.identity()) for _ in range(10000)]
        stats = alignment_stats(self.table(pairs))
        # median of |N(0, σ)| is 0.6745 σ
        expected = 0.6745 * 2.0
        self.assertLess(abs(stats.median_heading_deg - expected) / expected, 0.05)


def synthetic_run_log():
    ground_truth, tracks = [], []
    for frame in range(20):
        for robot in (0, 1):
            ground_truth.append({'frame': frame, 'kind': 'robot', 'id': robot, 'x': 5.0 * robot, 'y': 0.0,
                                 'theta': 0.0, 'visible': 1})
        for ped, x in ((0, 2.0), (1, 6.0)):
            ground_truth.append({'frame': frame, 'kind': 'pedestrian', 'id': ped, 'x': x, 'y': 3.0,
                                 'theta': 0.0, 'visible': 1})
        held = [(0, '0-0', 2.1), (1, '0-0', 1.9), (1, '1-0', 6.0)]
        for robot, track_id, x in held:
            tracks.append({'frame': frame, 'robot': robot, 'track_id': track_id, 'status': 'confirmed',
                           'x': x, 'y': 3.0, 'vx': 0.0, 'vy': 0.0, 'trace_P': 0.1, 'world_x': x, 'world_y': 3.0})
    return RunLog(
        config={'frame_rate_hz': 10.0},
        ground_truth=table_from_rows(GROUND_TRUTH, ground_truth),
        tracks=table_from_rows(TRACKS, tracks),
    )


class EvaluateRunTests(SimpleTestCase):
    def test_team_tracks_merge_by_id(self):
        run_log = synthetic_run_log()
        merged = team_tracks(run_log.tracks[run_log.tracks['frame'] == 0])
        self.assertEqual([t for t, _ in merged], ['0-0', '1-0'])
        self.assertAlmostEqual(merged[0][1][0], 2.0)

    def test_team_and_per_robot_mota(self):
        summary = evaluate_run(synthetic_run_log(), d_match=1.0, window_s=1.0)
        self.assertEqual(summary.mota, 1.0)
        self.assertEqual(summary.per_robot_mota, {0: 0.5, 1: 1.0})
        self.assertEqual(summary.per_robot_mota_mean, 0.75)
        self.assertEqual(len(summary.mota_window), 11)
        self.assertTrue(math.isnan(summary.alignment.median_heading_deg))

    def test_tables(self):
        summary = evaluate_run(synthetic_run_log(), d_match=1.0, window_s=1.0)
        table = summary_table(summary).set_index('metric')['value']
        self.assertEqual(table['mota'], 1.0)
        self.assertEqual(table['mota_robot_0'], 0.5)
        self.assertEqual(len(mota_window_table(summary)), 11)
        self.assertEqual(list(alignment_hist_table(summary).columns), ['quantity', 'bin_start', 'bin_end', 'count'])

    def test_d_match_monotone(self):
        run_log = synthetic_run_log()
        shifted = run_log.tracks.copy()
        shifted['world_x'] = shifted['world_x'] + np.where(shifted['track_id'] == '1-0', 1.5, 0.6)
        run_log = RunLog(config=run_log.config, ground_truth=run_log.ground_truth, tracks=shifted)
        scores = [evaluate_run(run_log, d_match=d).mota for d in (0.25, 0.5, 1.0, 2.0, 4.0)]
        self.assertTrue(all(b >= a for a, b in zip(scores, scores[1:])))
        self.assertLess(scores[0], scores[-1])

    def test_no_visible_pedestrians(self):
        run_log = synthetic_run_log()
        gt = run_log.ground_truth.copy()
        gt['visible'] = 0
        with self.assertRaises(EmptyGroundTruth):
            evaluate_run(RunLog(config=run_log.config, ground_truth=gt, tracks=run_log.tracks))
