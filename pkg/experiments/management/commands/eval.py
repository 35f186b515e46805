from pathlib import Path

from django.conf import settings
from django.core.management.base import BaseCommand, CommandError

from metrics.exceptions import EvaluationError
from metrics.reports import evaluate_run, write_summary
from simulation.run_log import RunLog


class Command(BaseCommand):
    help = 'Recompute all metrics from a run log directory'

    def add_arguments(self, parser):
        parser.add_argument(
            'run_dir',
            type=str,
            help='Run log directory written by the run command',
        )
        parser.add_argument(
            '--out',
            type=str,
            default=None,
            help='Where to write summary CSVs (default: the run log directory)',
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
        run_dir = Path(options['run_dir'])
        try:
            run_log = RunLog.load(run_dir)
            summary = evaluate_run(run_log, options['d_match'], options['window_s'])
        except EvaluationError as e:
            raise CommandError(str(e))

        out_dir = Path(options['out']) if options['out'] else run_dir
        write_summary(summary, out_dir)
        for metric, value in summary.rows():
            self.stdout.write(f'  {metric}: {value}')
        self.stdout.write(self.style.SUCCESS(f'Summary written to {out_dir}'))
