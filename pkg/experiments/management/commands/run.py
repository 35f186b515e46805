from pathlib import Path

from django.conf import settings
from django.core.management.base import BaseCommand, CommandError

from metrics.exceptions import EvaluationError
from metrics.reports import evaluate_run, write_summary
from simulation.exceptions import ConfigError
from simulation.run_log import RunLog
from simulation.scenario_runner import run_scenario
from simulation.serializers import load_scenario


class Command(BaseCommand):
    help = 'Simulate one scenario, write its run log and evaluation summary'

    def add_arguments(self, parser):
        parser.add_argument(
            '--config',
            type=str,
            required=True,
            help='Scenario YAML file',
        )
        parser.add_argument(
            '--out',
            type=str,
            default=None,
            help='Output directory (default: TEAMTRACK_OUTPUT_DIR/<scenario name>)',
        )
        parser.add_argument(
            '--seed',
            type=int,
            default=None,
            help='Override the scenario rng_seed',
        )
        parser.add_argument(
            '--timings',
            action='store_true',
            help='Record per-stage wall-clock timings (timings.csv)',
        )
        parser.add_argument(
            '--trace-messages',
            action='store_true',
            help='Record every delivered message (messages.csv)',
        )
        parser.add_argument(
            '--d-match',
            type=float,
            default=settings.TEAMTRACK_D_MATCH,
            help='MOTA matching distance in meters',
        )
        parser.add_argument(
            '--window-s',
            type=float,
            default=settings.TEAMTRACK_MOTA_WINDOW_S,
            help='Sliding MOTA window in seconds',
        )

    def handle(self, *args, **options):
        try:
            config = load_scenario(options['config'], seed=options['seed'])
        except ConfigError as e:
            raise CommandError(f'Invalid scenario: {e}')

        out_dir = Path(options['out']) if options['out'] else Path(settings.TEAMTRACK_OUTPUT_DIR) / config.name
        self.stdout.write(self.style.SUCCESS(
            f'Running "{config.name}" ({len(config.robots)} robots, {config.frame_count} frames, '
            f'seed {config.rng_seed})...'))

        run_log = run_scenario(
            config,
            timings=options['timings'] or None,
            trace_messages=options['trace_messages'] or None,
            progress=options['verbosity'] >= 2,
        )
        run_log.write(out_dir)

        try:
            summary = evaluate_run(RunLog.load(out_dir), options['d_match'], options['window_s'])
        except EvaluationError as e:
            raise CommandError(f'Evaluation failed: {e}')
        write_summary(summary, out_dir)

        for metric, value in summary.rows():
            self.stdout.write(f'  {metric}: {value}')
        self.stdout.write(self.style.SUCCESS(f'Run log and summary written to {out_dir}'))
