"""
Schema for benchmark configs. A config document (parsed TOML, or the
`.data` of a loaded config) validates into a BenchmarkConfig holding the
SystemSpec it describes; failures become a ConfigurationError keyed by
dotted field paths such as `initial.2` or `avoid.0.polarity`.
"""
from dataclasses import dataclass, field
from pathlib import Path

from rest_framework import serializers
from rest_framework.settings import api_settings

from expressions.parser import parse
from milp.networks import NeuralNetwork
from reachability.reach import PREPASS_CONCRETE, PREPASS_INTERVAL
from reachability.system import INSIDE, POLARITIES, AvoidSet, Box, SystemSpec
from solver.backends import BACKENDS
from utils.exceptions import ConfigurationError, ExpressionSyntaxError, ModelError, NetworkFormatError
from utils.validators import (
    CONSTANT_NAME,
    validate_expression_source,
    validate_finite,
    validate_interval_pair,
    validate_positive,
)

from .models import VerificationRun
from .network_files import load_network

NON_FIELD = 'config'


@dataclass
class BenchmarkConfig:
    """
    A validated config: the declarative fields as written, plus the
    SystemSpec built from them.
    """
    name: str
    n: int
    delta: float
    horizon: int
    dynamics: list
    initial: list
    perturbation: list
    controller: dict
    goal: list = None
    constants: dict = field(default_factory=dict)
    avoid: list = field(default_factory=list)
    enclosure: dict = field(default_factory=dict)
    solver: dict = field(default_factory=dict)
    schedule: dict = field(default_factory=dict)
    system: SystemSpec = field(default=None, repr=False)
    base_dir: Path = None

    @property
    def network_path(self):
        return resolve_path(self.base_dir, self.controller['network'])


def resolve_path(base_dir, value):
    path = Path(value)
    return path if path.is_absolute() else Path(base_dir or Path.cwd()) / path


def flatten_errors(detail, prefix=''):
    """Serializer error detail as {dotted.path: [messages]}."""
    flat = {}
    if isinstance(detail, dict):
        for key, value in detail.items():
            if key == api_settings.NON_FIELD_ERRORS_KEY:
                key = ''
            path = '.'.join(part for part in (prefix, str(key)) if part)
            flat.update(flatten_errors(value, path))
    elif isinstance(detail, list) and all(isinstance(item, str) for item in detail):
        if detail:
            flat.setdefault(prefix or NON_FIELD, []).extend(str(item) for item in detail)
    elif isinstance(detail, list):
        for index, item in enumerate(detail):
            flat.update(flatten_errors(item, f'{prefix}.{index}' if prefix else str(index)))
    else:
        flat.setdefault(prefix or NON_FIELD, []).append(str(detail))
    return flat


class IntervalField(serializers.ListField):
    """A closed interval written as [lo, hi]."""
    child = serializers.FloatField()

    def __init__(self, **kwargs):
        kwargs.setdefault('validators', [validate_interval_pair])
        super().__init__(**kwargs)


class BoxField(serializers.ListField):
    """A hyperrectangle written as one [lo, hi] pair per dimension."""
    child = IntervalField()

    def __init__(self, **kwargs):
        kwargs.setdefault('allow_empty', False)
        super().__init__(**kwargs)


class AvoidSerializer(serializers.Serializer):
    """
    Unsafe region active for steps t_from..t_to: a box, or the halfspace
    normal . x >= offset; `outside` takes the complement
    """
    t_from = serializers.IntegerField(min_value=0)
    t_to = serializers.IntegerField(min_value=0)
    polarity = serializers.ChoiceField(choices=POLARITIES, default=INSIDE)
    box = BoxField(required=False)
    normal = serializers.ListField(child=serializers.FloatField(validators=[validate_finite]),
                                   allow_empty=False, required=False)
    offset = serializers.FloatField(default=0.0, validators=[validate_finite])

    def validate(self, attrs):
        if ('box' in attrs) == ('normal' in attrs):
            raise serializers.ValidationError({'box': ['Give either a box or a halfspace normal']})
        if attrs['t_from'] > attrs['t_to']:
            raise serializers.ValidationError({'t_to': ['Must not precede t_from']})
        return attrs


class ControllerSerializer(serializers.Serializer):
    """
    Controller network file, relative to the config, and outputs to hold
    at a constant value
    """
    network = serializers.CharField()
    constant_outputs = serializers.DictField(child=serializers.FloatField(validators=[validate_finite]),
                                             required=False)

    def validate_constant_outputs(self, value):
        errors = {key: ['Output index must be a positive integer'] for key in value
                  if not str(key).isdigit() or int(key) < 1}
        if errors:
            raise serializers.ValidationError(errors)
        return {str(int(key)): number for key, number in value.items()}


class EnclosureSerializer(serializers.Serializer):
    divisions = serializers.IntegerField(min_value=1, required=False)


class SolverSerializer(serializers.Serializer):
    backend = serializers.ChoiceField(choices=BACKENDS, required=False)
    cmd = serializers.CharField(required=False)
    time_limit_s = serializers.FloatField(min_value=0, required=False)
    mip_gap = serializers.FloatField(min_value=0, required=False)
    max_pivots = serializers.IntegerField(min_value=1, required=False)
    workers = serializers.IntegerField(min_value=1, required=False)


class ScheduleSerializer(serializers.Serializer):
    symbolic_window = serializers.IntegerField(min_value=0, required=False)
    prepass = serializers.ChoiceField(choices=[PREPASS_CONCRETE, PREPASS_INTERVAL], required=False)


class BenchmarkConfigSerializer(serializers.Serializer):
    """
    Serializer for benchmark configs
    """
    name = serializers.CharField(max_length=100, required=False)
    n = serializers.IntegerField(min_value=1)
    delta = serializers.FloatField(validators=[validate_positive])
    horizon = serializers.IntegerField(min_value=1)
    dynamics = serializers.ListField(child=serializers.CharField(validators=[validate_expression_source]),
                                     allow_empty=False)
    initial = BoxField()
    perturbation = BoxField(required=False)
    goal = BoxField(required=False, allow_null=True)
    constants = serializers.DictField(child=serializers.FloatField(validators=[validate_finite]),
                                      required=False)
    controller = ControllerSerializer()
    avoid = AvoidSerializer(many=True, required=False)
    enclosure = EnclosureSerializer(required=False)
    solver = SolverSerializer(required=False)
    schedule = ScheduleSerializer(required=False)

    def validate_constants(self, value):
        errors = {key: ['Constant names are c1, c2, ...'] for key in value if not CONSTANT_NAME.fullmatch(key)}
        if errors:
            raise serializers.ValidationError(errors)
        return value

    def validate(self, attrs):
        errors = {}
        n = attrs['n']
        if len(attrs['dynamics']) != n:
            errors['dynamics'] = [f'Expected {n} transition functions, got {len(attrs["dynamics"])}']
        for key in ('initial', 'perturbation', 'goal'):
            value = attrs.get(key)
            if value is not None and len(value) != n:
                errors[key] = [f'Expected {n} intervals, got {len(value)}']
        for i, entry in enumerate(attrs.get('avoid', [])):
            key = 'box' if 'box' in entry else 'normal'
            if len(entry[key]) != n:
                errors[f'avoid.{i}.{key}'] = [f'Expected {n} coordinates, got {len(entry[key])}']

        constants = attrs.get('constants', {})
        for i, source in enumerate(attrs['dynamics']):
            for name in CONSTANT_NAME.findall(source):
                if name not in constants:
                    errors.setdefault(f'constants.{name}', []).append(
                        f'Used by dynamics.{i} but has no value; benchmark constants have no defaults'
                    )
        if not errors:
            for i, source in enumerate(attrs['dynamics']):
                try:
                    tree = parse(source, constants)
                except ExpressionSyntaxError as exc:
                    errors[f'dynamics.{i}'] = [str(exc)]
                    continue
                outside = sorted(v for v in tree.free_vars if v > n)
                if outside:
                    errors[f'dynamics.{i}'] = [f'x{outside[0]} is not a state variable of an n={n} system']

        network = resolve_path(self.context.get('base_dir'), attrs['controller']['network'])
        if not network.is_file():
            errors['controller.network'] = [f'No such network file: {network}']
        if errors:
            raise serializers.ValidationError(errors)
        return attrs

    def create(self, validated_data):
        base_dir = self.context.get('base_dir')
        n = validated_data['n']
        data = {
            'name': validated_data.get('name') or self.context.get('name', 'system'),
            'n': n,
            'delta': validated_data['delta'],
            'horizon': validated_data['horizon'],
            'dynamics': list(validated_data['dynamics']),
            'initial': validated_data['initial'],
            'perturbation': validated_data.get('perturbation') or [[0.0, 0.0]] * n,
            'goal': validated_data.get('goal'),
            'constants': dict(validated_data.get('constants', {})),
            'controller': dict(validated_data['controller']),
            'avoid': [dict(entry) for entry in validated_data.get('avoid', [])],
            'enclosure': dict(validated_data.get('enclosure', {})),
            'solver': dict(validated_data.get('solver', {})),
            'schedule': dict(validated_data.get('schedule', {})),
        }
        config = BenchmarkConfig(**data, base_dir=base_dir)
        config.system = build_system(config)
        return config

    def load(self):
        """Validate and build, raising ConfigurationError on any failure."""
        if not self.is_valid():
            raise ConfigurationError(flatten_errors(self.errors))
        return self.save()


def load_controller(path, constant_outputs=None):
    """The controller network with the config's constant outputs applied."""
    try:
        network = load_network(path)
        if constant_outputs:
            overrides = {int(index): value for index, value in constant_outputs.items()}
            network = NeuralNetwork(network.layers, {**network.constant_outputs, **overrides})
    except NetworkFormatError as exc:
        raise ConfigurationError({'controller.network': [str(exc)]}) from exc
    except ModelError as exc:
        raise ConfigurationError({'controller.constant_outputs': [str(exc)]}) from exc
    return network


def build_avoid(entry):
    box = Box.from_pairs(entry['box']) if 'box' in entry else None
    return AvoidSet(entry['t_from'], entry['t_to'], entry.get('polarity', INSIDE), box=box,
                    normal=entry.get('normal'), offset=entry.get('offset', 0.0))


def build_system(config):
    """SystemSpec for a validated config."""
    controller = load_controller(config.network_path, config.controller.get('constant_outputs'))
    try:
        return SystemSpec(
            n=config.n,
            initial=Box.from_pairs(config.initial),
            dynamics=[parse(source, config.constants) for source in config.dynamics],
            perturbation=Box.from_pairs(config.perturbation),
            controller=controller,
            delta=config.delta,
            horizon=config.horizon,
            goal=Box.from_pairs(config.goal) if config.goal is not None else None,
            avoid=[build_avoid(entry) for entry in config.avoid],
            name=config.name,
        )
    except ConfigurationError as exc:
        errors = {('controller.network' if key == 'network' else key): messages
                  for key, messages in exc.errors.items()}
        raise ConfigurationError(errors) from exc


def config_document(config):
    """Plain dict form of a loaded config; loading it again gives the same system."""
    return _plain(BenchmarkConfigSerializer(config).data)


def _plain(value):
    if isinstance(value, dict):
        return {key: _plain(item) for key, item in value.items() if item is not None}
    if isinstance(value, list):
        return [_plain(item) for item in value]
    return value


class VerificationRunSerializer(serializers.ModelSerializer):
    """
    Serializer for recorded verification runs
    """
    exit_status = serializers.CharField(source='get_exit_code_display', read_only=True)

    class Meta:
        model = VerificationRun
        fields = [
            'id', 'benchmark', 'slug', 'mode', 'exit_code', 'exit_status', 'verdicts',
            'final_box', 'final_volume', 'wall_time_s', 'results_path', 'error', 'created_at'
        ]
        read_only_fields = fields
