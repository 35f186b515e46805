from pathlib import Path

from django.conf import settings
from django.core.management.base import BaseCommand, CommandError

from experiments.sweeps import default_workers, expand_sweep, load_sweep, run_sweep, summarize_sweep
from simulation.exceptions import ConfigError


class Command(BaseCommand):
    help = 'Run a sweep of realignment modes over injected alignment-error levels and seeds'

    def add_arguments(self, parser):
        parser.add_argument(
            '--config',
            type=str,
            required=True,
            help='Sweep spec YAML file',
        )
        parser.add_argument(
            '--out',
            type=str,
            default=None,
            help='Output directory (default: TEAMTRACK_OUTPUT_DIR/sweep)',
        )
        parser.add_argument(
            '--threads',
            type=int,
            default=None,
            help='Worker processes (default: TEAMTRACK_SWEEP_WORKERS)',
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
            spec = load_sweep(options['config'])
            cells = expand_sweep(spec)
        except ConfigError as e:
            raise CommandError(f'Invalid sweep: {e}')

        out_dir = Path(options['out']) if options['out'] else Path(settings.TEAMTRACK_OUTPUT_DIR) / 'sweep'
        workers = default_workers(options['threads'], settings.TEAMTRACK_SWEEP_WORKERS)
        self.stdout.write(self.style.SUCCESS(
            f'Running {len(cells)} cells ({len(spec.modes)} modes x {len(spec.levels)} levels x '
            f'{spec.seeds_per_level} seeds) on {workers} worker(s)...'))

        table = run_sweep(cells, out_dir, workers, options['d_match'], options['window_s'],
                          progress=options['verbosity'] >= 1)

        for row in summarize_sweep(table).itertuples(index=False):
            self.stdout.write(f'  {row.mode:<26} sigma_t={row.sigma_t_m:<5g} MOTA={row.mota:.3f} '
                              f'fp={row.false_positives:.1f} misses={row.misses:.1f}')
        self.stdout.write(self.style.SUCCESS(f'Sweep table written to {out_dir / "sweep.csv"}'))
