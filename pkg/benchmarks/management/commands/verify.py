import sys
from pathlib import Path

from django.core.management.base import BaseCommand, CommandError

from benchmarks.runner import EXIT_UNKNOWN, RunFlags, run_verification
from reachability.verdicts import FALSIFIED_CANDIDATE, VERIFIED
from solver.backends import BACKENDS


def parse_constants(values):
    """`c1=9.81` pairs from repeated --constant flags."""
    constants = {}
    for item in values or []:
        name, sep, number = item.partition('=')
        try:
            if not sep:
                raise ValueError
            constants[name.strip()] = float(number)
        except ValueError:
            raise CommandError(f'❌ --constant expects NAME=VALUE, got {item!r}', returncode=EXIT_UNKNOWN) from None
    return constants


class Command(BaseCommand):
    help = 'Verify the reach/avoid properties of a benchmark config'

    def add_arguments(self, parser):
        parser.add_argument('config', type=str, help='Benchmark config (TOML)')
        parser.add_argument(
            '--symbolic-window',
            type=int,
            default=None,
            help='Steps per symbolic window; 0 or 1 runs every step concretely',
        )
        parser.add_argument('--divisions', type=int, default=None, help='Grid cells per axis of each enclosure')
        parser.add_argument('--solver', choices=BACKENDS, default=None, help='MILP backend')
        parser.add_argument('--time-limit', type=float, default=None, help='Seconds per MILP solve')
        parser.add_argument('--out', type=str, default='results', help='Directory for result files')
        parser.add_argument(
            '--plot-dims',
            type=int,
            nargs=2,
            metavar=('I', 'J'),
            default=None,
            help='Also write box outlines in the (xI, xJ) plane',
        )
        parser.add_argument('--record', action='store_true', help='Store the run in the database')
        parser.add_argument(
            '--constant',
            action='append',
            metavar='NAME=VALUE',
            help='Value for a named dynamics constant, e.g. c1=0.5; may repeat',
        )
        parser.add_argument('--simulations', type=int, default=0, help='Exact rollouts to check against the boxes')
        parser.add_argument('--seed', type=int, default=0, help='Seed for the rollouts')

    def handle(self, *args, **options):
        flags = RunFlags(
            symbolic_window=options['symbolic_window'],
            divisions=options['divisions'],
            solver=options['solver'],
            time_limit=options['time_limit'],
            out_dir=Path(options['out']),
            plot_dims=tuple(options['plot_dims']) if options['plot_dims'] else None,
            record=options['record'],
            constants=parse_constants(options['constant']),
            simulations=options['simulations'],
            seed=options['seed'],
        )
        self.stdout.write(f'🔎 Verifying {options["config"]}')
        report = run_verification(options['config'], flags)

        if report.error:
            self.stdout.write(self.style.ERROR(f'❌ {report.summary}'))
        else:
            for verdict in report.verdicts:
                line = f'📊 {verdict.property}: {verdict.status}'
                if verdict.witness_step is not None:
                    line += f' at step {verdict.witness_step}'
                if verdict.status == VERIFIED:
                    self.stdout.write(self.style.SUCCESS(line))
                elif verdict.status == FALSIFIED_CANDIDATE:
                    self.stdout.write(self.style.ERROR(line))
                else:
                    self.stdout.write(self.style.WARNING(line))
            for kind, path in report.artifacts.items():
                self.stdout.write(f'📁 {kind}: {path}')
            style = self.style.SUCCESS if report.exit_code == 0 else self.style.WARNING
            icon = '✅' if report.exit_code == 0 else '⚠️'
            self.stdout.write(style(f'{icon} {report.summary}'))
        if report.run is not None:
            self.stdout.write(f'🗂️ Recorded as run {report.run.pk}')

        if report.exit_code:
            sys.exit(report.exit_code)
