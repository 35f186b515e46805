import math
import os
import tempfile
from io import StringIO
from pathlib import Path

import numpy as np
import pandas as pd
import yaml
from django.apps import apps
from django.conf import settings
from django.core.management import call_command
from django.core.management.base import CommandError
from django.test import SimpleTestCase, tag

from experiments.sweeps import (MODE_GROUND_TRUTH, MODE_OFF, MODE_REACTIVE, SWEEP_COLUMNS, SweepSpec,
                                default_workers, expand_sweep, load_sweep, run_sweep, summarize_sweep,
                                write_atomic)
from metrics.alignment_stats import alignment_errors
from metrics.reports import SUMMARY_CSV, evaluate_run, mota_window_table
from simulation.scenario_runner import run_scenario
from simulation.serializers import load_scenario


def circle_waypoints(center=(5.0, 5.0), radius=2.0, sides=36):
    angles = np.linspace(0.0, 2 * math.pi, sides, endpoint=False)
    return [[float(center[0] + radius * math.cos(a)), float(center[1] + radius * math.sin(a))] for a in angles]


def single_robot_scenario():
    return {
        'name': 'single',
        'duration_s': 10.0,
        'rng_seed': 3,
        'robots': [{'initial': {'x': 0.0, 'y': 0.0, 'theta_deg': 45.0},
                    'fov': {'range_m': 12.0, 'half_angle_deg': 50.0}}],
        'pedestrians': [{'waypoints': circle_waypoints(), 'speed_mps': 1.0}],
        'noise': {'detection': {'sigma_z_m': 0.1, 'p_detect': 1.0, 'clutter_rate': 0.0}},
        'tracking': {'tau_gate': 25.0},
    }


def pair_scenario():
    return {
        'name': 'pair',
        'duration_s': 2.0,
        'rng_seed': 0,
        'robots': [
            {'initial': {'x': 0.0, 'y': 0.0, 'theta_deg': 45.0}, 'fov': {'range_m': 12.0, 'half_angle_deg': 60.0}},
            {'initial': {'x': 10.0, 'y': 0.0, 'theta_deg': 135.0}, 'fov': {'range_m': 12.0, 'half_angle_deg': 60.0}},
        ],
        'pedestrians': [{'waypoints': circle_waypoints(), 'speed_mps': 1.0}],
        'landmarks': [[2.0, 6.0], [8.0, 6.0], [5.0, 9.0], [3.5, 8.0]],
        'tracking': {'tau_gate': 50.0},
    }


def write_yaml(path: Path, data) -> Path:
    with open(path, 'w') as f:
        yaml.safe_dump(data, f, sort_keys=False)
    return path


class CommandTestCase(SimpleTestCase):
    def setUp(self):
        self._tmp = tempfile.TemporaryDirectory()
        self.tmp = Path(self._tmp.name)

    def tearDown(self):
        self._tmp.cleanup()

    def run_command(self, *args, **options):
        out = StringIO()
        call_command(*args, stdout=out, stderr=StringIO(), verbosity=0, **options)
        return out.getvalue()


class RunCommandTests(CommandTestCase):
    def test_single_robot_run_writes_log_and_summary(self):
        config = write_yaml(self.tmp / 'single.yaml', single_robot_scenario())
        out_dir = self.tmp / 'run'
        output = self.run_command('run', config=str(config), out=str(out_dir))

        for name in ('ground_truth.csv', 'tracks.csv', 'alignments.csv', 'config.yaml', 'manifest.csv',
                     SUMMARY_CSV, 'mota_window.csv', 'alignment_hist.csv'):
            self.assertTrue((out_dir / name).is_file(), name)
        self.assertFalse((out_dir / 'timings.csv').exists())
        self.assertIn('mota:', output)

        summary = pd.read_csv(out_dir / SUMMARY_CSV).set_index('metric')['value']
        self.assertGreaterEqual(summary['mota'], 0.95)
        self.assertEqual(summary['frames'], 100)

    def test_timings_and_message_trace_are_opt_in(self):
        config = write_yaml(self.tmp / 'pair.yaml', pair_scenario())
        out_dir = self.tmp / 'run'
        self.run_command('run', config=str(config), out=str(out_dir), timings=True, trace_messages=True)

        timings = pd.read_csv(out_dir / 'timings.csv')
        self.assertEqual(set(timings['stage']), {'local', 'fusion'})
        messages = pd.read_csv(out_dir / 'messages.csv')
        self.assertIn('track_info', set(messages['kind']))
        summary = pd.read_csv(out_dir / SUMMARY_CSV)
        self.assertIn('local_ms_mean', set(summary['metric']))

    def test_same_seed_gives_identical_logs(self):
        config = write_yaml(self.tmp / 'pair.yaml', pair_scenario())
        first, second = self.tmp / 'a', self.tmp / 'b'
        self.run_command('run', config=str(config), out=str(first))
        self.run_command('run', config=str(config), out=str(second))
        for name in ('ground_truth.csv', 'tracks.csv', 'alignments.csv', SUMMARY_CSV):
            self.assertEqual((first / name).read_bytes(), (second / name).read_bytes(), name)

    def test_seed_flag_overrides_scenario_seed(self):
        data = single_robot_scenario()
        data['noise']['detection']['clutter_rate'] = 2.0
        config = write_yaml(self.tmp / 'single.yaml', data)
        self.run_command('run', config=str(config), out=str(self.tmp / 'a'), seed=1)
        self.run_command('run', config=str(config), out=str(self.tmp / 'b'), seed=2)
        with open(self.tmp / 'b' / 'config.yaml') as f:
            self.assertEqual(yaml.safe_load(f)['rng_seed'], 2)
        self.assertNotEqual((self.tmp / 'a' / 'tracks.csv').read_bytes(),
                            (self.tmp / 'b' / 'tracks.csv').read_bytes())

    def test_missing_config_file(self):
        with self.assertRaises(CommandError) as ctx:
            self.run_command('run', config=str(self.tmp / 'nope.yaml'), out=str(self.tmp / 'run'))
        self.assertIn('file not found', str(ctx.exception))

    def test_disconnected_communication_graph(self):
        data = pair_scenario()
        data['robots'].append({'initial': {'x': 5.0, 'y': 0.0, 'theta_deg': 90.0}})
        data['communication'] = [[0, 1]]
        config = write_yaml(self.tmp / 'split.yaml', data)
        with self.assertRaises(CommandError) as ctx:
            self.run_command('run', config=str(config), out=str(self.tmp / 'run'))
        self.assertIn('communication graph must be connected', str(ctx.exception))
        self.assertFalse((self.tmp / 'run').exists())

    def test_invalid_field_is_named(self):
        data = pair_scenario()
        data['noise'] = {'detection': {'p_detect': 1.5}}
        config = write_yaml(self.tmp / 'bad.yaml', data)
        with self.assertRaises(CommandError) as ctx:
            self.run_command('run', config=str(config), out=str(self.tmp / 'run'))
        self.assertIn('p_detect', str(ctx.exception))


class EvalCommandTests(CommandTestCase):
    def setUp(self):
        super().setUp()
        config = write_yaml(self.tmp / 'pair.yaml', pair_scenario())
        self.run_dir = self.tmp / 'run'
        self.run_command('run', config=str(config), out=str(self.run_dir))

    def test_eval_reproduces_summary(self):
        out_dir = self.tmp / 'again'
        self.run_command('eval', str(self.run_dir), out=str(out_dir))
        for name in (SUMMARY_CSV, 'mota_window.csv', 'alignment_hist.csv'):
            self.assertEqual((self.run_dir / name).read_bytes(), (out_dir / name).read_bytes(), name)

    def test_eval_match_distance_flag(self):
        strict, loose = self.tmp / 'strict', self.tmp / 'loose'
        self.run_command('eval', str(self.run_dir), out=str(strict), d_match=0.2)
        self.run_command('eval', str(self.run_dir), out=str(loose), d_match=2.0)
        strict_summary = pd.read_csv(strict / SUMMARY_CSV).set_index('metric')['value']
        loose_summary = pd.read_csv(loose / SUMMARY_CSV).set_index('metric')['value']
        self.assertEqual(strict_summary['d_match_m'], 0.2)
        self.assertEqual(loose_summary['d_match_m'], 2.0)
        self.assertEqual(strict_summary['gt_count'], loose_summary['gt_count'])

    def test_truncated_tracks_table(self):
        path = self.run_dir / 'tracks.csv'
        lines = path.read_text().splitlines(keepends=True)
        path.write_text(''.join(lines[:-3]))
        with self.assertRaises(CommandError) as ctx:
            self.run_command('eval', str(self.run_dir), out=str(self.tmp / 'again'))
        self.assertIn('tracks.csv', str(ctx.exception))

    def test_missing_run_directory(self):
        with self.assertRaises(CommandError) as ctx:
            self.run_command('eval', str(self.tmp / 'nothing'))
        self.assertIn('not found', str(ctx.exception))


class SweepTests(CommandTestCase):
    def write_sweep(self, levels, seeds, modes):
        write_yaml(self.tmp / 'base.yaml', pair_scenario())
        return write_yaml(self.tmp / 'sweep.yaml', {
            'base_config': 'base.yaml',
            'levels': levels,
            'seeds_per_level': seeds,
            'modes': modes,
            'overrides': {'duration_s': 1.0},
        })

    def test_expand_applies_mode_level_and_seed(self):
        write_yaml(self.tmp / 'base.yaml', pair_scenario())
        spec = SweepSpec(self.tmp / 'base.yaml', (0.0, 0.5), 2, (MODE_OFF, MODE_REACTIVE, MODE_GROUND_TRUTH),
                         first_seed=10, overrides={'duration_s': 1.0})
        cells = expand_sweep(spec)
        self.assertEqual(len(cells), 12)
        self.assertEqual({c.seed for c in cells}, {10, 11})
        for cell in cells:
            self.assertEqual(cell.config.duration_s, 1.0)
            self.assertEqual(cell.config.rng_seed, cell.seed)
            self.assertEqual(cell.config.error_injection.sigma_t_m, cell.sigma_t_m)
        reactive = [c for c in cells if c.mode == MODE_REACTIVE][0].config
        self.assertEqual(reactive.realign.mode, 'dynamic')
        self.assertTrue(reactive.realign.reactive_gate)
        off = [c for c in cells if c.mode == MODE_OFF][0].config
        self.assertEqual(off.realign.mode, 'off')
        self.assertFalse(off.tracking.use_alignment_covariance)
        self.assertTrue(reactive.tracking.use_alignment_covariance)
        self.assertTrue([c for c in cells if c.mode == MODE_GROUND_TRUTH][0].config.ground_truth_localization)
        self.assertEqual(len({c.name for c in cells}), len(cells))

    def test_single_cell_sweep(self):
        config = self.write_sweep([0.0], 1, ['off'])
        out_dir = self.tmp / 'out'
        self.run_command('sweep', config=str(config), out=str(out_dir), threads=1)
        table = pd.read_csv(out_dir / 'sweep.csv')
        self.assertEqual(len(table), 1)
        self.assertEqual(list(table.columns), SWEEP_COLUMNS)
        self.assertEqual(len(list((out_dir / 'cells').glob('*.csv'))), 1)

    @tag('slow')
    def test_sweep_row_count(self):
        config = self.write_sweep([0.0, 0.25], 2, ['off', 'dynamic+reactive-gate'])
        out_dir = self.tmp / 'out'
        output = self.run_command('sweep', config=str(config), out=str(out_dir), threads=1)
        table = pd.read_csv(out_dir / 'sweep.csv')
        self.assertEqual(len(table), 8)
        self.assertEqual(table.groupby(['mode', 'sigma_t_m']).size().tolist(), [2, 2, 2, 2])
        self.assertEqual(len(summarize_sweep(table)), 4)
        self.assertIn('MOTA=', output)

    def test_unknown_mode_is_rejected(self):
        config = self.write_sweep([0.0], 1, ['sideways'])
        with self.assertRaises(CommandError) as ctx:
            self.run_command('sweep', config=str(config), out=str(self.tmp / 'out'))
        self.assertIn('modes', str(ctx.exception))

    def test_missing_base_config(self):
        config = write_yaml(self.tmp / 'sweep.yaml', {
            'base_config': 'absent.yaml', 'levels': [0.0], 'seeds_per_level': 1, 'modes': ['off'],
        })
        with self.assertRaises(CommandError) as ctx:
            self.run_command('sweep', config=str(config), out=str(self.tmp / 'out'))
        self.assertIn('file not found', str(ctx.exception))

    def test_atomic_write_leaves_no_temporary_files(self):
        path = self.tmp / 'deep' / 'table.csv'
        write_atomic(pd.DataFrame({'a': [1, 2]}), path)
        write_atomic(pd.DataFrame({'a': [3]}), path)
        self.assertEqual(pd.read_csv(path)['a'].tolist(), [3])
        self.assertEqual([p.name for p in path.parent.iterdir()], ['table.csv'])


class ProjectSettingsTests(SimpleTestCase):
    def test_no_model_backed_contrib_apps(self):
        self.assertFalse(apps.is_installed('django.contrib.auth'))
        self.assertFalse(apps.is_installed('django.contrib.contenttypes'))
        self.assertTrue(apps.is_installed('rest_framework'))


class ShippedScenarioTests(SimpleTestCase):
    scenario_dir = Path(settings.BASE_DIR) / 'scenarios'

    def test_scenarios_validate(self):
        for name in ('defaults.yaml', 'desk_static.yaml', 'desk_mobile.yaml'):
            config = load_scenario(self.scenario_dir / name)
            self.assertGreater(config.frame_count, 0, name)
        self.assertEqual(len(load_scenario(self.scenario_dir / 'desk_static.yaml').robots), 4)
        self.assertEqual(len(load_scenario(self.scenario_dir / 'desk_mobile.yaml').landmarks), 15)

    def test_sweep_expands_to_every_cell(self):
        spec = load_sweep(self.scenario_dir / 'sweep_desk_static.yaml')
        self.assertEqual(spec.base_config, self.scenario_dir / 'desk_static.yaml')
        self.assertEqual(len(expand_sweep(spec)), 5 * 5 * 2)


@tag('slow')
class DeskSweepTrendTests(SimpleTestCase):
    """The shipped injected-error sweep, realignment off against dynamic realignment with the reactive gate"""

    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        spec = load_sweep(Path(settings.BASE_DIR) / 'scenarios' / 'sweep_desk_static.yaml')
        with tempfile.TemporaryDirectory() as tmp:
            table = run_sweep(expand_sweep(spec), tmp, workers=default_workers(None, os.cpu_count() or 1),
                              progress=False)
        cls.means = summarize_sweep(table).set_index(['mode', 'sigma_t_m'])
        cls.levels = list(spec.levels)

    def column(self, mode, metric):
        return [float(self.means.loc[(mode, level), metric]) for level in self.levels]

    def test_mota_falls_with_error_when_off(self):
        mota = self.column(MODE_OFF, 'mota')
        for level, before, after in zip(self.levels[1:], mota, mota[1:]):
            self.assertGreater(before, after, f'sigma_t {level}')

    def test_false_positives_grow_with_error_when_off(self):
        false_positives = self.column(MODE_OFF, 'false_positives')
        self.assertGreaterEqual(false_positives[-1], 3 * false_positives[0])

    def test_realignment_holds_its_baseline(self):
        mota = self.column(MODE_REACTIVE, 'mota')
        for level, value in zip(self.levels, mota):
            if level <= 0.5:
                self.assertLessEqual(abs(value - mota[0]), 0.10, f'sigma_t {level}')

    def test_realignment_beats_off_at_large_error(self):
        pairs = zip(self.levels, self.column(MODE_REACTIVE, 'mota'), self.column(MODE_OFF, 'mota'))
        for level, reactive, off in pairs:
            if level >= 0.5:
                self.assertGreaterEqual(reactive, off + 0.15, f'sigma_t {level}')

    def test_realignment_costs_nothing_without_error(self):
        reactive, off = self.column(MODE_REACTIVE, 'mota')[0], self.column(MODE_OFF, 'mota')[0]
        self.assertLessEqual(abs(reactive - off), 0.02)


def final_quarter_mota(summary) -> float:
    """Mean sliding-window MOTA over windows ending in the last quarter of the run"""
    windows = mota_window_table(summary)
    return float(np.nanmean(windows.loc[windows['end_frame'] >= 0.75 * summary.frames, 'mota']))


@tag('slow')
class MobileScenarioTests(SimpleTestCase):
    """Three drifting robots sharing landmark maps for static realignment"""
    seeds = range(5)

    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        path = Path(settings.BASE_DIR) / 'scenarios' / 'desk_mobile.yaml'
        variants = {
            'static': ({}, cls.seeds),
            'covariance-off': ({'tracking': {'use_alignment_covariance': False}}, cls.seeds),
            'no-realign': ({'realign': {'mode': 'off'}}, [0]),
            MODE_GROUND_TRUTH: ({'ground_truth_localization': True}, [0]),
        }
        cls.runs = {}
        cls.alignments = []
        for variant, (overrides, seeds) in variants.items():
            for seed in seeds:
                run_log = run_scenario(load_scenario(path, overrides, seed=seed))
                cls.runs[variant, seed] = evaluate_run(run_log)
                if variant == 'static':
                    cls.alignments.append(alignment_errors(run_log.alignments))

    def test_realignment_close_to_ground_truth_localization(self):
        self.assertLessEqual(abs(self.runs['static', 0].mota - self.runs[MODE_GROUND_TRUTH, 0].mota), 0.10)

    def test_drift_hurts_without_realignment(self):
        realigned = final_quarter_mota(self.runs['static', 0])
        drifting = final_quarter_mota(self.runs['no-realign', 0])
        self.assertLessEqual(drifting, realigned - 0.25)

    def test_alignment_covariance_does_not_hurt(self):
        with_covariance = np.mean([self.runs['static', seed].mota for seed in self.seeds])
        without = np.mean([self.runs['covariance-off', seed].mota for seed in self.seeds])
        self.assertGreaterEqual(with_covariance, without)

    def test_realigned_estimates_are_accurate(self):
        errors = pd.concat(self.alignments)
        realigned = errors[errors['method'] == 'static']
        self.assertGreater(len(realigned), 0)
        self.assertLessEqual(realigned['heading_deg'].median(), 3.0)
        self.assertLessEqual(realigned['translation_m'].median(), 0.35)
