import io
import json
import logging
import os
import tempfile
from pathlib import Path
from unittest import mock

import numpy as np
from decouple import config as env
from django.core.management import call_command
from django.core.management.base import CommandError
from django.test import SimpleTestCase, TestCase
from django.urls import reverse
from rest_framework import status
from rest_framework.test import APITestCase

from expressions.evaluation import evaluate
from milp.networks import LINEAR, RELU, Layer, NeuralNetwork
from reachability.reach import CONCRETE, ReachTrajectory, compute_trajectory
from reachability.simulation import simulate
from reachability.system import OUTSIDE, Box
from reachability.verdicts import AVOID, FALSIFIED_CANDIDATE, REACH, UNKNOWN, VERIFIED, Verdict
from utils.exceptions import ConfigurationError, NetworkFormatError

from .artifacts import emit_plot_data, results_document, steps_csv, write_artifacts
from .loaders import load_benchmark_config, load_document, load_system_config, read_config_file
from .models import VerificationRun
from .network_files import dump_network, load_network, parse_network
from .runner import (EXIT_FALSIFIED, EXIT_UNKNOWN, EXIT_VERIFIED, RunFlags, exit_code_for, reach_settings,
                     run_verification)
from .serializers import config_document, flatten_errors

logger = logging.getLogger(__name__)

APP_DIR = Path(__file__).resolve().parent
CONFIGS = APP_DIR / 'configs'
NETWORKS = APP_DIR / 'networks'
FIXTURES = APP_DIR.parent / 'fixtures'
ZERO_NETWORK = NETWORKS / 'zero_2.nnet'

IDENTITY_FILE = b"""// x = relu(x) - relu(-x), coordinate by coordinate
2
2,4,2
relu,linear
1,0
0,1
-1,0
0,-1
0
0
0
0
1,0,-1,0
0,1,0,-1
0
0
"""


def forward_by_hand(network_file, x):
    """Matrix-multiply forward pass over the parsed records."""
    a = np.atleast_2d(x)
    for weights, biases, activation in zip(network_file.weights, network_file.biases, network_file.activations):
        a = a @ weights.T + biases
        if activation == RELU:
            a = np.maximum(a, 0.0)
    for index, value in network_file.constant_outputs.items():
        a[:, index - 1] = value
    return a


def random_network(rng, sizes, constants=None):
    layers = [Layer(rng.normal(size=(b, a)), rng.normal(size=b), RELU) for a, b in zip(sizes[:-2], sizes[1:-1])]
    layers.append(Layer(rng.normal(size=(sizes[-1], sizes[-2])), rng.normal(size=sizes[-1]), LINEAR))
    return NeuralNetwork(layers, constants or {})


def base_document(**overrides):
    document = {
        'name': 'doc',
        'n': 2,
        'delta': 0.1,
        'horizon': 2,
        'dynamics': ['x2', '0 - x1'],
        'initial': [[0.0, 1.0], [0.0, 1.0]],
        'controller': {'network': str(ZERO_NETWORK)},
    }
    document.update(overrides)
    return document


def error_paths(callable_, *args):
    try:
        callable_(*args)
    except ConfigurationError as exc:
        return exc.errors
    raise AssertionError('No ConfigurationError raised')


class TemporaryDirectoryMixin:
    def make_tmp(self):
        directory = tempfile.TemporaryDirectory()
        self.addCleanup(directory.cleanup)
        return Path(directory.name)


class NetworkFileTest(TemporaryDirectoryMixin, SimpleTestCase):
    """Test the controller network file reader"""

    def test_identity_network(self):
        """Test the 2-layer identity file maps x to x"""
        network = parse_network(IDENTITY_FILE).to_network()
        x = np.random.default_rng(0).uniform(-5, 5, (50, 2))
        np.testing.assert_allclose(network.forward(x), x, atol=1e-12)

    def test_trailing_commas_and_blank_lines(self):
        """Test trailing commas and blank lines are accepted"""
        text = IDENTITY_FILE.replace(b'1,0\n0,1\n', b'1,0,\n\n0,1,\n', 1)
        network = parse_network(text).to_network()
        np.testing.assert_allclose(network.forward(np.array([-2.0, 3.0])), [-2.0, 3.0])

    def test_constant_outputs_section(self):
        """Test the constants section holds outputs at their values"""
        network = parse_network(IDENTITY_FILE + b'constants\n2,-4\n').to_network()
        np.testing.assert_allclose(network.forward(np.array([1.5, 7.0])), [1.5, -4.0])
        self.assertEqual(network.constant_outputs, {2: -4.0})

    def test_truncated_file(self):
        """Test a truncated file reports the end-of-file byte offset"""
        data = IDENTITY_FILE[:IDENTITY_FILE.index(b'1,0,-1,0')]
        with self.assertRaises(NetworkFormatError) as caught:
            parse_network(data)
        self.assertEqual(caught.exception.offset, len(data))

    def test_non_finite_weight(self):
        """Test a NaN weight reports the offset of its line"""
        data = IDENTITY_FILE.replace(b'0,-1\n', b'0,nan\n', 1)
        with self.assertRaises(NetworkFormatError) as caught:
            parse_network(data)
        self.assertEqual(caught.exception.offset, data.index(b'0,nan'))

    def test_row_length_mismatch(self):
        """Test a weight row with the wrong length is refused at its line"""
        data = IDENTITY_FILE.replace(b'1,0,-1,0\n', b'1,0,-1\n', 1)
        with self.assertRaises(NetworkFormatError) as caught:
            parse_network(data)
        self.assertEqual(caught.exception.offset, data.index(b'1,0,-1\n'))

    def test_unknown_activation(self):
        """Test activations other than relu and linear are refused"""
        with self.assertRaises(NetworkFormatError):
            parse_network(IDENTITY_FILE.replace(b'relu,linear', b'tanh,linear'))

    def test_final_layer_must_be_linear(self):
        """Test a ReLU output layer is refused"""
        with self.assertRaises(NetworkFormatError):
            parse_network(IDENTITY_FILE.replace(b'relu,linear', b'relu,relu'))

    def test_constant_index_out_of_range(self):
        """Test a constant output beyond the output size is refused"""
        with self.assertRaises(NetworkFormatError):
            parse_network(IDENTITY_FILE + b'constants\n3,0\n')

    def test_trailing_content(self):
        """Test content after the last bias is refused"""
        with self.assertRaises(NetworkFormatError):
            parse_network(IDENTITY_FILE + b'1,2,3\n')

    def test_written_networks_match_matrix_product(self):
        """Test written random networks load and agree with a by-hand forward pass"""
        rng = np.random.default_rng(11)
        tmp = self.make_tmp()
        for trial in range(5):
            sizes = [int(s) for s in rng.integers(1, 7, size=rng.integers(2, 5))]
            constants = {1: float(rng.normal())} if trial % 2 else None
            path = tmp / f'net{trial}.nnet'
            path.write_text(dump_network(random_network(rng, sizes, constants), comment=f'trial {trial}'))
            network = load_network(path)
            records = parse_network(path.read_bytes())
            x = rng.uniform(-3, 3, (100, sizes[0]))
            np.testing.assert_allclose(network.forward(x), forward_by_hand(records, x), atol=1e-9)

    def test_shipped_networks_match_matrix_product(self):
        """Test every shipped network agrees with a by-hand forward pass"""
        rng = np.random.default_rng(12)
        for path in sorted(NETWORKS.glob('*.nnet')):
            records = parse_network(path.read_bytes())
            network = load_network(path)
            x = rng.uniform(-10, 10, (100, network.input_size))
            np.testing.assert_allclose(network.forward(x), forward_by_hand(records, x), atol=1e-9,
                                       err_msg=path.name)

    def test_zero_network(self):
        """Test the shipped zero controller returns zeros"""
        network = load_network(ZERO_NETWORK)
        self.assertTrue(network.all_constant)
        np.testing.assert_array_equal(network.forward(np.array([3.0, -1.0])), [0.0, 0.0])


class ConfigSchemaTest(TemporaryDirectoryMixin, SimpleTestCase):
    """Test config validation and its error paths"""

    def test_valid_document(self):
        """Test a minimal document builds its system"""
        config = load_document(base_document())
        system = config.system
        self.assertEqual(system.n, 2)
        self.assertEqual(system.delta, 0.1)
        self.assertEqual(system.perturbation, Box(np.zeros(2), np.zeros(2)))
        self.assertIsNone(system.goal)
        self.assertEqual(system.avoid, ())

    def test_load_system_config(self):
        """Test a config file loads straight to its system"""
        system = load_system_config(FIXTURES / 'verified.toml')
        self.assertEqual(system.n, 2)
        self.assertEqual(system.horizon, 3)
        self.assertEqual(system.initial, Box(np.zeros(2), np.ones(2)))
        self.assertEqual(len(system.avoid), 1)

    def test_missing_delta(self):
        """Test a missing step size is reported at delta"""
        document = base_document()
        del document['delta']
        self.assertIn('delta', error_paths(load_document, document))

    def test_reversed_interval(self):
        """Test a reversed interval is reported with its index"""
        errors = error_paths(load_document, base_document(initial=[[0.0, 1.0], [2.0, 1.0]]))
        self.assertIn('initial.1', errors)

    def test_bad_polarity(self):
        """Test an unknown polarity is reported on its avoid entry"""
        avoid = [{'t_from': 0, 't_to': 1, 'box': [[0, 1], [0, 1]]},
                 {'t_from': 0, 't_to': 1, 'box': [[0, 1], [0, 1]], 'polarity': 'sideways'}]
        self.assertIn('avoid.1.polarity', error_paths(load_document, base_document(avoid=avoid)))

    def test_box_and_halfspace_together(self):
        """Test an avoid entry may not be both a box and a halfspace"""
        avoid = [{'t_from': 0, 't_to': 1, 'box': [[0, 1], [0, 1]], 'normal': [1, 0]}]
        self.assertIn('avoid.0.box', error_paths(load_document, base_document(avoid=avoid)))

    def test_avoid_dimension(self):
        """Test an avoid box of the wrong dimension is reported"""
        avoid = [{'t_from': 0, 't_to': 1, 'box': [[0, 1]]}]
        self.assertIn('avoid.0.box', error_paths(load_document, base_document(avoid=avoid)))

    def test_constant_without_value(self):
        """Test constants used by the dynamics need explicit values"""
        errors = error_paths(load_document, base_document(dynamics=['x2', 'c1 * x1 - c2 * x2']))
        self.assertIn('constants.c1', errors)
        self.assertIn('constants.c2', errors)

    def test_constants_bind(self):
        """Test declared constants are substituted into the dynamics"""
        config = load_document(base_document(dynamics=['x2', 'c1 * x1'], constants={'c1': -2.5}))
        self.assertAlmostEqual(evaluate(config.system.dynamics[1], np.array([2.0, 0.0])), -5.0)

    def test_bad_constant_name(self):
        """Test constant names follow c1, c2, ..."""
        self.assertIn('constants.gravity', error_paths(load_document, base_document(constants={'gravity': 9.8})))

    def test_dynamics_count(self):
        """Test the number of transition functions must equal n"""
        self.assertIn('dynamics', error_paths(load_document, base_document(dynamics=['x1'])))

    def test_dynamics_syntax(self):
        """Test a syntax error is reported on its transition function"""
        self.assertIn('dynamics.1', error_paths(load_document, base_document(dynamics=['x1', 'x1 +'])))

    def test_variable_outside_system(self):
        """Test x3 in a 2-state system is refused"""
        self.assertIn('dynamics.0', error_paths(load_document, base_document(dynamics=['x3', 'x1'])))

    def test_missing_network_file(self):
        """Test a missing network file is reported at controller.network"""
        errors = error_paths(load_document, base_document(controller={'network': 'nowhere.nnet'}), self.make_tmp())
        self.assertIn('controller.network', errors)

    def test_bad_constant_output_index(self):
        """Test constant output indices must be positive integers"""
        controller = {'network': str(ZERO_NETWORK), 'constant_outputs': {'0': 1.0}}
        self.assertIn('controller.constant_outputs.0', error_paths(load_document, base_document(controller=controller)))

    def test_controller_dimension(self):
        """Test a controller of the wrong size is reported at controller.network"""
        path = self.make_tmp() / 'three.nnet'
        path.write_text(dump_network(NeuralNetwork.zeros(3)))
        errors = error_paths(load_document, base_document(controller={'network': str(path)}))
        self.assertIn('controller.network', errors)

    def test_invalid_toml(self):
        """Test unreadable TOML is a config error"""
        path = self.make_tmp() / 'broken.toml'
        path.write_text('n = = 2\n')
        self.assertIn('config', error_paths(read_config_file, path))

    def test_flatten_errors(self):
        """Test nested serializer errors flatten to dotted paths"""
        detail = {'avoid': [{}, {'polarity': ['bad']}], 'initial': {2: ['reversed']},
                  'non_field_errors': ['whole config']}
        self.assertEqual(flatten_errors(detail), {
            'avoid.1.polarity': ['bad'],
            'initial.2': ['reversed'],
            'config': ['whole config'],
        })

    def test_round_trip(self):
        """Test load, serialize and load again gives the same system"""
        avoid = [{'t_from': 1, 't_to': 2, 'polarity': OUTSIDE, 'box': [[-2, 2], [-2, 2]]},
                 {'t_from': 0, 't_to': 2, 'normal': [1.0, -1.4], 'offset': 10.0}]
        first = load_document(base_document(
            dynamics=['x2', 'c1 * sin(x1) - x2 / 2'],
            constants={'c1': 0.3},
            goal=[[-1, 1], [-1, 1]],
            perturbation=[[0, 0], [-1e-4, 1e-4]],
            avoid=avoid,
            controller={'network': str(ZERO_NETWORK), 'constant_outputs': {'2': 0.5}},
            solver={'backend': 'builtin', 'time_limit_s': 5},
            schedule={'symbolic_window': 3},
        ))
        second = load_document(config_document(first))
        a, b = first.system, second.system
        self.assertEqual((a.n, a.delta, a.horizon, a.name), (b.n, b.delta, b.horizon, b.name))
        self.assertEqual(a.dynamics, b.dynamics)
        for key in ('initial', 'perturbation', 'goal'):
            self.assertEqual(getattr(a, key), getattr(b, key))
        self.assertEqual(len(a.avoid), len(b.avoid))
        for x, y in zip(a.avoid, b.avoid):
            self.assertEqual((x.t_from, x.t_to, x.polarity, x.kind, x.offset), (y.t_from, y.t_to, y.polarity, y.kind, y.offset))
            self.assertEqual(x.box, y.box)
        self.assertEqual(a.controller.constant_outputs, b.controller.constant_outputs)
        self.assertEqual((first.solver, first.schedule), (second.solver, second.schedule))


class ShippedConfigTest(TemporaryDirectoryMixin, SimpleTestCase):
    """Test the shipped benchmark configs"""

    def load_with_zero_controller(self, name, constants=None):
        document = read_config_file(CONFIGS / name)
        path = self.make_tmp() / 'zero.nnet'
        path.write_text(dump_network(NeuralNetwork.zeros(document['n'])))
        document['controller']['network'] = str(path)
        if constants:
            document['constants'] = constants
        return load_document(document, CONFIGS)

    def test_unicycle(self):
        """Test the unicycle config carries its initial set, step and noise"""
        config = self.load_with_zero_controller('unicycle.toml')
        system = config.system
        self.assertEqual(system.n, 4)
        self.assertEqual(system.initial, Box.from_pairs([[9.5, 9.55], [-4.5, -4.45], [2.1, 2.11], [1.5, 1.51]]))
        self.assertEqual((system.delta, system.horizon), (0.2, 50))
        self.assertEqual(system.perturbation.as_pairs()[3], [-1e-4, 1e-4])
        self.assertEqual(system.goal.as_pairs()[0], [-0.6, 0.6])
        self.assertEqual(set(system.controller.constant_outputs), {1, 2})
        x = np.array([0.0, 0.0, 0.3, 2.0])
        self.assertAlmostEqual(evaluate(system.dynamics[0], x), 2.0 * np.cos(0.3))
        self.assertAlmostEqual(evaluate(system.dynamics[1], x), 2.0 * np.sin(0.3))

    def test_tora(self):
        """Test the TORA dynamics and its complement avoid set up to step 20"""
        system = self.load_with_zero_controller('tora.toml').system
        x = np.array([0.4, -0.2, 1.1, 0.7])
        expected = [-0.2, -0.4 + 0.1 * np.sin(1.1), 0.7, 0.0]
        np.testing.assert_allclose([evaluate(f, x) for f in system.dynamics], expected)
        self.assertEqual(len(system.avoid_at(20)), 1)
        self.assertEqual(system.avoid_at(21), [])
        region = system.avoid[0]
        self.assertEqual(region.polarity, OUTSIDE)
        self.assertTrue(region.contains_points(np.array([2.5, 0, 0, 0]))[0])
        self.assertFalse(region.contains_points(np.array([1.5, 0, 0, 0]))[0])

    def test_pendulum_needs_constants(self):
        """Test the pendulum config refuses to load without c1 and c2"""
        errors = error_paths(self.load_with_zero_controller, 'pendulum.toml')
        self.assertIn('constants.c1', errors)
        self.assertIn('constants.c2', errors)

    def test_pendulum_avoid(self):
        """Test the pendulum angle must stay in [0, 1] from step 10"""
        system = self.load_with_zero_controller('pendulum.toml', {'c1': 1.0, 'c2': 0.5}).system
        self.assertEqual(system.avoid_at(9), [])
        def unsafe(x):
            return any(region.contains_points(np.array(x))[0] for region in system.avoid_at(10))

        self.assertTrue(unsafe([1.5, 0.0]))
        self.assertTrue(unsafe([-0.1, 0.0]))
        self.assertFalse(unsafe([0.5, 3.0]))

    def test_acc_safe_distance(self):
        """Test the ACC safe-distance halfspace"""
        system = self.load_with_zero_controller('acc.toml', {'c1': 1e-4}).system
        region = system.avoid[0]
        self.assertEqual(region.kind, 'halfspace')
        self.assertFalse(region.contains_points(np.array([100.0, 32.0, 0.0, 10.5, 30.1, 0.0]))[0])
        self.assertTrue(region.contains_points(np.array([50.0, 32.0, 0.0, 10.5, 30.1, 0.0]))[0])
        self.assertEqual(system.controller.constant_outputs[3], -4.0)

    def test_external_networks_reported(self):
        """Test a config whose controller file is absent fails at controller.network"""
        path = NETWORKS / 'unicycle_controller.nnet'
        if path.exists():
            self.skipTest('unicycle controller weights are installed')
        self.assertIn('controller.network', error_paths(load_benchmark_config, CONFIGS / 'unicycle.toml'))


class ArtifactsTest(TemporaryDirectoryMixin, SimpleTestCase):
    """Test results, step and plot files"""

    def trajectory(self):
        boxes = [Box.from_pairs([[0, 1], [2, 3], [4, 5]]), Box.from_pairs([[0.5, 1.5], [2, 4], [4, 6]])]
        return ReachTrajectory(boxes, ['initial', CONCRETE], [[], [0.0, float('inf')]], [0.0, 12.5])

    def test_plot_rows(self):
        """Test a 1-step trajectory gives two rows of four corners"""
        rows = emit_plot_data(self.trajectory(), (1, 2)).splitlines()
        self.assertTrue(rows[0].startswith('#'))
        self.assertEqual(len(rows), 3)
        self.assertEqual([float(v) for v in rows[2].split(',')], [1, 0.5, 2, 1.5, 2, 1.5, 4, 0.5, 4])

    def test_plot_dims_out_of_range(self):
        """Test plot dimensions outside 1..n are refused"""
        with self.assertRaises(ConfigurationError):
            emit_plot_data(self.trajectory(), (1, 4))
        with self.assertRaises(ConfigurationError):
            emit_plot_data(self.trajectory(), (0, 2))

    def test_steps_csv(self):
        """Test the step CSV has a header and one row per box"""
        rows = steps_csv(self.trajectory()).splitlines()
        self.assertEqual(rows[0], 't,mode,volume,ms,lo1,hi1,lo2,hi2,lo3,hi3')
        self.assertEqual(len(rows), 3)
        self.assertTrue(rows[2].startswith('1,concrete,4.0,12.500,'))

    def test_results_are_strict_json(self):
        """Test infinite gaps are written as null"""
        verdicts = [Verdict(AVOID, VERIFIED)]
        document = results_document('demo', CONCRETE, self.trajectory(), verdicts, 0.5)
        text = json.dumps(document, allow_nan=False)
        self.assertEqual(json.loads(text)['steps'][1]['gaps'], [0.0, None])
        self.assertEqual(document['final_volume'], 4.0)
        self.assertNotIn('simulation', document)

    def test_write_artifacts(self):
        """Test the files land under their final names with no temporaries left"""
        tmp = self.make_tmp()
        paths = write_artifacts(tmp / 'out', 'demo', {'benchmark': 'demo'}, 'a,b\n', '# t\n')
        self.assertEqual(set(paths), {'results', 'steps', 'plot'})
        self.assertEqual(json.loads(paths['results'].read_text()), {'benchmark': 'demo'})
        self.assertEqual(list((tmp / 'out').glob('.*')), [])


class RunVerificationTest(TemporaryDirectoryMixin, TestCase):
    """Test end-to-end runs and the exit-code contract"""

    def run_fixture(self, name, **flags):
        flags.setdefault('out_dir', self.make_tmp())
        return run_verification(FIXTURES / name, RunFlags(**flags))

    def test_verified_fixture(self):
        """Test the verified fixture exits 0"""
        report = self.run_fixture('verified.toml')
        self.assertEqual(report.exit_code, EXIT_VERIFIED)
        self.assertEqual({v.property: v.status for v in report.verdicts}, {AVOID: VERIFIED, REACH: VERIFIED})
        results = json.loads(report.artifacts['results'].read_text())
        self.assertEqual(len(results['steps']), 4)
        self.assertEqual(results['mode'], CONCRETE)

    def test_falsified_fixture(self):
        """Test the falsified fixture exits 1 with the avoid witness at step 3"""
        report = self.run_fixture('falsified.toml')
        self.assertEqual(report.exit_code, EXIT_FALSIFIED)
        avoid = report.verdicts[0]
        self.assertEqual((avoid.status, avoid.witness_step), (FALSIFIED_CANDIDATE, 3))

    def test_unknown_fixture(self):
        """Test the unknown fixture exits 2 without an error"""
        report = self.run_fixture('unknown.toml')
        self.assertEqual(report.exit_code, EXIT_UNKNOWN)
        self.assertEqual(report.error, '')
        self.assertEqual(report.verdicts[1].status, UNKNOWN)

    def test_invalid_fixture(self):
        """Test a schema error exits 2 with a diagnostic and no artifacts"""
        report = self.run_fixture('invalid.toml')
        self.assertEqual(report.exit_code, EXIT_UNKNOWN)
        self.assertIn('delta', report.error)
        self.assertEqual(report.artifacts, {})

    def test_unwritable_out_dir(self):
        """Test a result directory that is a regular file exits 2, not 1"""
        blocker = self.make_tmp() / 'results'
        blocker.write_text('not a directory')
        report = self.run_fixture('falsified.toml', out_dir=blocker, record=True)
        self.assertEqual(report.exit_code, EXIT_UNKNOWN)
        self.assertIn('I/O error', report.error)
        self.assertEqual(report.artifacts, {})
        self.assertEqual(VerificationRun.objects.get().exit_code, EXIT_UNKNOWN)

    def test_smoke_config(self):
        """Test the zero-dynamics smoke config keeps every box at the initial set"""
        report = run_verification(CONFIGS / 'smoke.toml', RunFlags(out_dir=self.make_tmp()))
        self.assertEqual(report.exit_code, EXIT_VERIFIED)
        self.assertEqual([v.property for v in report.verdicts], [AVOID])
        initial = report.trajectory.boxes[0]
        for box in report.trajectory.boxes:
            self.assertTrue(box.contains_box(initial))
            np.testing.assert_allclose(box.widths, initial.widths, atol=1e-6)

    def test_symbolic_mode(self):
        """Test a symbolic window is reflected in the mode"""
        report = self.run_fixture('falsified.toml', symbolic_window=2)
        results = json.loads(report.artifacts['results'].read_text())
        self.assertEqual(results['mode'], 'symbolic(2)')
        self.assertEqual(report.exit_code, EXIT_FALSIFIED)

    def test_plot_data(self):
        """Test --plot-dims writes T + 1 box outlines"""
        report = self.run_fixture('falsified.toml', plot_dims=(1, 2))
        rows = report.artifacts['plot'].read_text().splitlines()
        self.assertEqual(len(rows), 1 + 5)

    def test_plot_dims_out_of_range(self):
        """Test plot dimensions outside the system exit 2"""
        report = self.run_fixture('falsified.toml', plot_dims=(1, 3))
        self.assertEqual(report.exit_code, EXIT_UNKNOWN)
        self.assertIn('plot_dims', report.error)

    def test_simulation_stays_inside(self):
        """Test exact rollouts stay in the boxes and reach the unsafe set"""
        report = self.run_fixture('falsified.toml', simulations=200, seed=3)
        simulation = json.loads(report.artifacts['results'].read_text())['simulation']
        self.assertEqual(simulation['states_outside_boxes'], 0)
        self.assertGreater(simulation['unsafe_states'], 0)

    def test_record(self):
        """Test --record stores the run"""
        report = self.run_fixture('falsified.toml', record=True)
        run = VerificationRun.objects.get()
        self.assertEqual(run.pk, report.run.pk)
        self.assertEqual(run.exit_code, EXIT_FALSIFIED)
        self.assertEqual(run.slug, 'fixture-falsified')
        self.assertEqual(len(run.final_box), 2)

    def test_record_error(self):
        """Test failed runs are recorded with their diagnostic"""
        self.run_fixture('invalid.toml', record=True)
        run = VerificationRun.objects.get()
        self.assertEqual(run.exit_code, EXIT_UNKNOWN)
        self.assertIn('delta', run.error)

    def test_exit_code_for(self):
        """Test falsified-candidate outranks unknown"""
        self.assertEqual(exit_code_for([Verdict(AVOID, VERIFIED)]), EXIT_VERIFIED)
        self.assertEqual(exit_code_for([Verdict(AVOID, VERIFIED), Verdict(REACH, UNKNOWN)]), EXIT_UNKNOWN)
        self.assertEqual(exit_code_for([Verdict(AVOID, FALSIFIED_CANDIDATE), Verdict(REACH, UNKNOWN)]),
                         EXIT_FALSIFIED)

    def test_settings_precedence(self):
        """Test flags override the config and the environment overrides the solver command"""
        config = load_document(base_document(solver={'backend': 'builtin', 'cmd': 'from-config', 'workers': 2},
                                             schedule={'symbolic_window': 3}, enclosure={'divisions': 4}))
        with mock.patch.dict(os.environ, {'POLYVERIFY_SOLVER_CMD': 'from-env {lp} {sol}'}):
            window, options = reach_settings(config, RunFlags(solver='external', time_limit=7.0, divisions=3))
        self.assertEqual(window, 3)
        self.assertEqual(options.divisions, 3)
        self.assertEqual(options.workers, 2)
        self.assertEqual(options.solver, {'BACKEND': 'external', 'CMD': 'from-env {lp} {sol}', 'TIME_LIMIT_S': 7.0})
        window, options = reach_settings(config, RunFlags(symbolic_window=0))
        self.assertEqual((window, options.divisions), (0, 4))

    def test_tora_volume(self):
        """Test the TORA run verifies with a final volume near 6.434e-1"""
        if not (NETWORKS / 'tora_controller.nnet').exists():
            logger.warning('TORA controller weights not installed; skipping the volume comparison')
            self.skipTest('TORA controller weights not installed')
        report = run_verification(CONFIGS / 'tora.toml', RunFlags(out_dir=self.make_tmp()))
        self.assertEqual(report.exit_code, EXIT_VERIFIED)
        volume = json.loads(report.artifacts['results'].read_text())['final_volume']
        self.assertLess(abs(np.log(volume / 6.434e-1)), np.log(2.0))

    def test_pendulum_falsified(self):
        """Test the pendulum run ends in a falsified-candidate"""
        c1, c2 = env('POLYVERIFY_PENDULUM_C1', default=''), env('POLYVERIFY_PENDULUM_C2', default='')
        if not (NETWORKS / 'pendulum_controller.nnet').exists() or not (c1 and c2):
            logger.warning('Pendulum controller weights or constants missing; skipping the pendulum run')
            self.skipTest('pendulum controller weights or POLYVERIFY_PENDULUM_C1/C2 not available')
        flags = RunFlags(out_dir=self.make_tmp(), constants={'c1': float(c1), 'c2': float(c2)})
        report = run_verification(CONFIGS / 'pendulum.toml', flags)
        self.assertEqual(report.exit_code, EXIT_FALSIFIED)

    def test_unicycle_short_horizon(self):
        """Test five unicycle steps contain exact rollouts"""
        if not (NETWORKS / 'unicycle_controller.nnet').exists():
            logger.warning('Unicycle controller weights not installed; skipping the short run')
            self.skipTest('unicycle controller weights not installed')
        document = read_config_file(CONFIGS / 'unicycle.toml')
        document['horizon'] = 5
        config = load_document(document, CONFIGS)
        trajectory = compute_trajectory(config.system)
        states = simulate(config.system, 1000, np.random.default_rng(0))
        for t, box in enumerate(trajectory.boxes):
            self.assertTrue(np.all(box.contains_points(states[:, t], 1e-9)))


class VerifyCommandTest(TemporaryDirectoryMixin, TestCase):
    """Test the verify management command"""

    def call(self, name, *args):
        out = io.StringIO()
        call_command('verify', str(FIXTURES / name), '--out', str(self.make_tmp()), *args, stdout=out)
        return out.getvalue()

    def test_verified(self):
        """Test a verified run prints its summary and returns normally"""
        output = self.call('verified.toml')
        self.assertIn('📊 avoid: verified', output)
        self.assertIn('✅ fixture-verified [concrete]', output)

    def test_falsified_exit_code(self):
        """Test a falsified-candidate exits with status 1"""
        with self.assertRaises(SystemExit) as caught:
            self.call('falsified.toml')
        self.assertEqual(caught.exception.code, 1)

    def test_error_exit_code(self):
        """Test a config error exits with status 2"""
        out = io.StringIO()
        with self.assertRaises(SystemExit) as caught:
            call_command('verify', str(FIXTURES / 'invalid.toml'), '--out', str(self.make_tmp()), stdout=out)
        self.assertEqual(caught.exception.code, 2)
        self.assertIn('❌', out.getvalue())

    def test_unwritable_out_dir_exit_code(self):
        """Test an --out path that is a file exits with status 2"""
        blocker = self.make_tmp() / 'results'
        blocker.write_text('')
        out = io.StringIO()
        with self.assertRaises(SystemExit) as caught:
            call_command('verify', str(FIXTURES / 'falsified.toml'), '--out', str(blocker), stdout=out)
        self.assertEqual(caught.exception.code, 2)
        self.assertIn('❌', out.getvalue())

    def test_bad_constant_flag(self):
        """Test --constant needs NAME=VALUE"""
        with self.assertRaises(CommandError):
            self.call('verified.toml', '--constant', 'c1')

    def test_record_flag(self):
        """Test --record stores a run"""
        output = self.call('verified.toml', '--record')
        run = VerificationRun.objects.get()
        self.assertIn(f'run {run.pk}', output)


class ExportLpCommandTest(TemporaryDirectoryMixin, SimpleTestCase):
    """Test the export_lp management command"""

    def test_stdout(self):
        """Test the model is printed in LP format"""
        out = io.StringIO()
        call_command('export_lp', str(CONFIGS / 'smoke.toml'), '--dim', '1', stdout=out)
        text = out.getvalue()
        self.assertTrue(text.startswith('\\ Model'))
        self.assertIn('Maximize', text)
        self.assertTrue(text.rstrip().endswith('End'))

    def test_output_file(self):
        """Test --output writes the minimisation model to a file"""
        path = self.make_tmp() / 'model.lp'
        out = io.StringIO()
        call_command('export_lp', str(FIXTURES / 'falsified.toml'), '--dim', '2', '--sense', 'min',
                     '--output', str(path), stdout=out)
        self.assertIn('Minimize', path.read_text())
        self.assertIn('✅', out.getvalue())

    def test_dimension_out_of_range(self):
        """Test --dim outside 1..n is refused"""
        with self.assertRaises(CommandError):
            call_command('export_lp', str(CONFIGS / 'smoke.toml'), '--dim', '3', stdout=io.StringIO())


class VerificationRunApiTest(APITestCase):
    """Test the run ledger API"""

    def setUp(self):
        VerificationRun.objects.create(benchmark='tora', mode='concrete', exit_code=0, final_volume=0.6)
        VerificationRun.objects.create(benchmark='pendulum', mode='symbolic(3)', exit_code=1)
        VerificationRun.objects.create(benchmark='pendulum', mode='concrete', exit_code=2, error='boom')

    def test_list(self):
        """Test the list is paginated"""
        response = self.client.get(reverse('run-list'))
        self.assertEqual(response.status_code, status.HTTP_200_OK)
        self.assertEqual(response.data['count'], 3)
        self.assertEqual(response.data['current_page'], 1)

    def test_filter_by_exit_code(self):
        """Test filtering by exit code"""
        response = self.client.get(reverse('run-list'), {'exit_code': 1})
        self.assertEqual([run['benchmark'] for run in response.data['results']], ['pendulum'])

    def test_filter_symbolic(self):
        """Test `mode=symbolic` matches every window width"""
        response = self.client.get(reverse('run-list'), {'mode': 'symbolic'})
        self.assertEqual([run['mode'] for run in response.data['results']], ['symbolic(3)'])

    def test_filter_by_benchmark(self):
        """Test filtering by benchmark name ignores case"""
        response = self.client.get(reverse('run-list'), {'benchmark': 'PENDULUM'})
        self.assertEqual(response.data['count'], 2)

    def test_detail(self):
        """Test a single run with its exit status label"""
        run = VerificationRun.objects.get(benchmark='tora')
        response = self.client.get(reverse('run-detail', args=[run.pk]))
        self.assertEqual(response.status_code, status.HTTP_200_OK)
        self.assertEqual(response.data['exit_status'], 'Verified')
        self.assertEqual(response.data['slug'], 'tora')

    def test_missing_run(self):
        """Test an unknown id is 404"""
        response = self.client.get(reverse('run-detail', args=[9999]))
        self.assertEqual(response.status_code, status.HTTP_404_NOT_FOUND)

    def test_read_only(self):
        """Test the ledger cannot be written through the API"""
        response = self.client.post(reverse('run-list'), {'benchmark': 'x'})
        self.assertEqual(response.status_code, status.HTTP_405_METHOD_NOT_ALLOWED)

    def test_schema(self):
        """Test the OpenAPI schema is served"""
        response = self.client.get(reverse('schema'))
        self.assertEqual(response.status_code, status.HTTP_200_OK)
