from django.core.management.base import BaseCommand, CommandError

from benchmarks.artifacts import write_atomic
from benchmarks.loaders import load_benchmark_config
from benchmarks.management.commands.verify import parse_constants
from milp.graph import build_step_graph
from milp.model import MAXIMIZE, MINIMIZE
from reachability.reach import ReachOptions, build_enclosures
from solver.lp_format import export_lp_text
from utils.exceptions import VerifierError


def step_zero_model(config, dim, divisions=None):
    """The concrete model of x_dim at step 1 from the initial set."""
    spec = config.system
    options = ReachOptions(divisions=divisions or config.enclosure.get('divisions'))
    enclosures = {0: build_enclosures(spec, spec.initial, options)}
    _, step_models = build_step_graph(spec, [0], enclosures, {0: spec.initial})
    return step_models[dim - 1]


class Command(BaseCommand):
    help = 'Write the step-0 MILP of one state dimension in LP format'

    def add_arguments(self, parser):
        parser.add_argument('config', type=str, help='Benchmark config (TOML)')
        parser.add_argument('--dim', type=int, required=True, help='1-based state dimension')
        parser.add_argument('--sense', choices=[MAXIMIZE, MINIMIZE], default=MAXIMIZE, help='Objective sense')
        parser.add_argument('--output', type=str, default=None, help='LP file; stdout when omitted')
        parser.add_argument('--divisions', type=int, default=None, help='Grid cells per axis of each enclosure')
        parser.add_argument('--constant', action='append', metavar='NAME=VALUE',
                            help='Value for a named dynamics constant; may repeat')

    def handle(self, *args, **options):
        try:
            config = load_benchmark_config(options['config'], parse_constants(options['constant']))
            if not 1 <= options['dim'] <= config.n:
                raise CommandError(f'❌ --dim must be in 1..{config.n}', returncode=2)
            step_model = step_zero_model(config, options['dim'], options['divisions'])
        except VerifierError as exc:
            raise CommandError(f'❌ {exc}', returncode=2) from exc

        objective = step_model.maximize if options['sense'] == MAXIMIZE else step_model.minimize
        text = export_lp_text(step_model.model, objective)
        if options['output'] is None:
            self.stdout.write(text, ending='')
            return
        path = write_atomic(options['output'], text)
        model = step_model.model
        self.stdout.write(self.style.SUCCESS(f'✅ LP model written: {path}'))
        self.stdout.write(f'📊 {len(model.variables)} variables ({model.num_binaries} binary), '
                          f'{len(model.constraints)} constraints')
