from types import SimpleNamespace

import numpy as np
from django.test import SimpleTestCase

from enclosures.bounding_set import BoundingSet
from enclosures.function_bound import bound_expression
from expressions.nodes import Const
from expressions.parser import parse
from solver.branch_and_bound import OPTIMAL, solve_milp
from univariate.bounds import bound_univariate
from utils.exceptions import ModelError

from .encoding import encode_enclosure, encode_relu_network
from .graph import CONTROLLER, DependencyGraph, build_step_graph
from .model import EQ, LE, MAXIMIZE, MINIMIZE, MilpModel
from .networks import LINEAR, RELU, Layer, NeuralNetwork, propagate_preactivation_bounds


def enclosure_model(bounding_set):
    """A model holding one enclosure whose inputs range over its domain."""
    model = MilpModel('enclosure')
    inputs = {}
    for variable, (lo, hi) in bounding_set.domain().items():
        inputs[variable] = model.add_variable(f'x_{variable}', lo, hi)
    encoding = encode_enclosure(model, bounding_set, inputs, '0_1')
    return model, inputs, encoding


def optimum(model, terms, sense):
    result = solve_milp(model, model.make_objective(terms, sense), mip_gap=0.0)
    assert result.status == OPTIMAL, result.status
    return result


def random_network(rng, sizes):
    layers = []
    for depth, (fan_in, fan_out) in enumerate(zip(sizes, sizes[1:])):
        activation = LINEAR if depth == len(sizes) - 2 else RELU
        layers.append(Layer(rng.normal(size=(fan_out, fan_in)), rng.normal(scale=0.5, size=fan_out), activation))
    return NeuralNetwork(layers)


class MilpModelTest(SimpleTestCase):
    """Test the model builder"""

    def test_duplicate_names(self):
        """Test variable names are unique"""
        model = MilpModel()
        model.add_variable('x')
        with self.assertRaises(ModelError):
            model.add_variable('x')

    def test_unknown_variable_in_constraint(self):
        """Test constraints only reference declared variables"""
        model = MilpModel()
        with self.assertRaises(ModelError):
            model.add_constraint({'ghost': 1.0}, LE, 0.0)

    def test_frozen_model(self):
        """Test a frozen model rejects new rows but still makes objectives"""
        model = MilpModel()
        x = model.add_variable('x', 0, 1)
        model.freeze()
        with self.assertRaises(ModelError):
            model.add_constraint({x: 1.0}, LE, 1.0)
        self.assertEqual(model.make_objective({x: 2.0}, MINIMIZE).terms, {x: 2.0})

    def test_to_arrays_negates_ge_rows(self):
        """Test >= rows become negated <= rows"""
        model = MilpModel()
        x, y = model.add_variable('x'), model.add_variable('y')
        model.add_constraint({x: 1.0, y: 2.0}, '>=', 3.0)
        model.add_constraint({x: 1.0}, EQ, 1.0)
        a_ub, b_ub, a_eq, b_eq = model.to_arrays()
        np.testing.assert_array_equal(a_ub, [[-1.0, -2.0]])
        np.testing.assert_array_equal(b_ub, [-3.0])
        np.testing.assert_array_equal(a_eq, [[1.0, 0.0]])

    def test_binary_bounds(self):
        """Test binaries are clamped to [0, 1]"""
        model = MilpModel()
        b = model.add_binary('b')
        self.assertEqual((model.variables[b].lb, model.variables[b].ub), (0.0, 1.0))
        self.assertEqual(model.binary_indices, [b])


class EncodeEnclosureTest(SimpleTestCase):
    """Test the convex-combination enclosure encoding"""

    def test_square_extremes(self):
        """Test the square set with bounds -5 and 5 has max 5 and min -5"""
        square = BoundingSet.from_axes((1, 2), [[-5, 5], [-5, 5]], [-5.0] * 4, [5.0] * 4)
        model, _, encoding = enclosure_model(square)
        self.assertAlmostEqual(optimum(model, {encoding.upper: 1.0}, MAXIMIZE).objective, 5.0, places=9)
        self.assertAlmostEqual(optimum(model, {encoding.lower: 1.0}, MINIMIZE).objective, -5.0, places=9)

    def test_sloped_square_constraints(self):
        """Test a sloped set emits one lambda per point and one binary per simplex"""
        sloped = BoundingSet.from_axes((1, 2), [[-5, 5], [-5, 5]], [-5.0, 0.0, 0.0, 1.0], [1.0, 2.0, 3.0, 5.0])
        model, _, encoding = enclosure_model(sloped)
        self.assertEqual(len(encoding.lam), 4)
        self.assertEqual(len(encoding.binaries), 2)
        names = {c.name for c in model.constraints}
        for name in ('cc1lam_0_1', 'cc1b_0_1', 'cc2_0_1_0', 'cc3_0_1_x1', 'cc3_0_1_x2', 'cc4u_0_1', 'cc5l_0_1'):
            self.assertIn(name, names)
        self.assertAlmostEqual(optimum(model, {encoding.upper: 1.0}, MAXIMIZE).objective, 5.0, places=9)
        self.assertAlmostEqual(optimum(model, {encoding.lower: 1.0}, MINIMIZE).objective, -5.0, places=9)

    def test_vertex_input_selects_unit_lambda(self):
        """Test fixing x at a grid point gives a unit lambda and U at that point"""
        rng = np.random.default_rng(41)
        lower = rng.uniform(-1, 0, 9)
        bounding_set = BoundingSet.from_axes((1, 2), [[0, 1, 2], [0, 0.5, 1]], lower, lower + rng.uniform(0, 1, 9))
        model, inputs, encoding = enclosure_model(bounding_set)
        j = 5
        point = bounding_set.point_set.points[j]
        for axis, variable in enumerate(bounding_set.variables):
            model.set_bounds(inputs[variable], point[axis], point[axis])
        result = optimum(model, {encoding.upper: 1.0}, MAXIMIZE)
        self.assertAlmostEqual(result.objective, bounding_set.upper[j], places=9)
        expected = np.zeros(9)
        expected[j] = 1.0
        np.testing.assert_allclose(result.x[encoding.lam], expected, atol=1e-7)

    def test_random_sets_match_vertex_oracle(self):
        """Test MILP extremes over random 2-D sets equal the grid extremes"""
        rng = np.random.default_rng(42)
        for _ in range(50):
            axes = [np.sort(rng.uniform(-2, 2, int(rng.integers(2, 5)))) for _ in range(2)]
            size = len(axes[0]) * len(axes[1])
            lower = rng.uniform(-3, 3, size)
            upper = lower + rng.uniform(0, 2, size)
            bounding_set = BoundingSet.from_axes((1, 2), axes, lower, upper)
            model, _, encoding = enclosure_model(bounding_set)
            top = optimum(model, {encoding.upper: 1.0}, MAXIMIZE).objective
            bottom = optimum(model, {encoding.lower: 1.0}, MINIMIZE).objective
            self.assertAlmostEqual(top, upper.max(), delta=1e-6)
            self.assertAlmostEqual(bottom, lower.min(), delta=1e-6)

    def test_fixed_input_matches_interpolated_surface(self):
        """Test y_hi and y_lo at a fixed x equal the interpolated surfaces"""
        rng = np.random.default_rng(43)
        bounding_set = bound_expression(parse('sin(x1) + x1 * cos(x2)'), {1: (-1.0, 1.0), 2: (0.0, 1.5)})
        for point in rng.uniform([-1.0, 0.0], [1.0, 1.5], (10, 2)):
            model, inputs, encoding = enclosure_model(bounding_set)
            for axis, variable in enumerate(bounding_set.variables):
                model.set_bounds(inputs[variable], point[axis], point[axis])
            lower, upper = bounding_set.evaluate_bounds(point)
            self.assertAlmostEqual(optimum(model, {encoding.upper: 1.0}, MAXIMIZE).objective, upper[0], delta=1e-6)
            self.assertAlmostEqual(optimum(model, {encoding.lower: 1.0}, MINIMIZE).objective, lower[0], delta=1e-6)

    def test_output_lies_between_surfaces(self):
        """Test y is free to range between y_lo and y_hi"""
        bounding_set = bound_univariate(parse('exp(x1)'), 0.0, 1.0)
        model, inputs, encoding = enclosure_model(bounding_set)
        model.set_bounds(inputs[1], 0.5, 0.5)
        top = optimum(model, {encoding.output: 1.0}, MAXIMIZE).objective
        bottom = optimum(model, {encoding.output: 1.0}, MINIMIZE).objective
        self.assertLessEqual(bottom, np.exp(0.5))
        self.assertGreaterEqual(top, np.exp(0.5))

    def test_flat_set_needs_no_binaries(self):
        """Test a constant set is encoded by bounds alone"""
        flat = BoundingSet.constant(2.0, (1,), [[0.0, 1.0]])
        model, _, encoding = enclosure_model(flat)
        self.assertEqual(model.num_binaries, 0)
        self.assertEqual(encoding.lam, [])

    def test_missing_input(self):
        """Test every grid axis needs a model variable"""
        bounding_set = bound_univariate(parse('exp(x1)'), 0.0, 1.0)
        with self.assertRaises(ModelError):
            encode_enclosure(MilpModel(), bounding_set, {}, '0_1')

    def test_monotone_tightening(self):
        """Test denser tangent grids never raise the maximum of y_hi"""
        previous = np.inf
        for k in (2, 3, 5, 9):
            bounding_set = bound_univariate(parse('sin(x1)'), 0.2, 1.4, k=k)
            model, _, encoding = enclosure_model(bounding_set)
            top = optimum(model, {encoding.upper: 1.0}, MAXIMIZE).objective
            self.assertLessEqual(top, previous + 1e-8)
            previous = top


class PropagateBoundsTest(SimpleTestCase):
    """Test interval bounds on pre-activations"""

    def test_identity_layer(self):
        """Test the identity layer keeps the unit box"""
        network = NeuralNetwork([Layer(np.eye(3), np.zeros(3), LINEAR)])
        bounds = propagate_preactivation_bounds(network, np.zeros(3), np.ones(3))
        np.testing.assert_allclose(bounds[0].lower, 0.0, atol=1e-8)
        np.testing.assert_allclose(bounds[0].upper, 1.0, atol=1e-8)

    def test_difference_neuron(self):
        """Test w = (1, -1) over the unit square gives [-1, 1]"""
        network = NeuralNetwork([Layer([[1.0, -1.0]], [0.0], LINEAR)])
        bounds = propagate_preactivation_bounds(network, [0.0, 0.0], [1.0, 1.0])
        self.assertAlmostEqual(bounds[0].lower[0], -1.0, places=7)
        self.assertAlmostEqual(bounds[0].upper[0], 1.0, places=7)

    def test_contains_sampled_preactivations(self):
        """Test bounds contain the pre-activations of sampled inputs"""
        rng = np.random.default_rng(51)
        network = random_network(rng, (3, 6, 5, 2))
        lo, hi = -np.ones(3), np.array([1.0, 2.0, 0.5])
        bounds = propagate_preactivation_bounds(network, lo, hi)
        activations = rng.uniform(lo, hi, (10_000, 3))
        for layer, layer_bounds in zip(network.layers, bounds):
            z = layer.preactivation(activations)
            self.assertTrue(np.all(z >= layer_bounds.lower[None, :]))
            self.assertTrue(np.all(z <= layer_bounds.upper[None, :]))
            activations = layer.activate(z)

    def test_rejects_empty_box(self):
        """Test an inverted input box is refused"""
        network = NeuralNetwork([Layer([[1.0]], [0.0], LINEAR)])
        with self.assertRaises(ModelError):
            propagate_preactivation_bounds(network, [1.0], [0.0])


class NeuralNetworkTest(SimpleTestCase):
    """Test the controller container"""

    def test_layers_must_chain(self):
        """Test mismatched layer sizes are refused"""
        with self.assertRaises(ModelError):
            NeuralNetwork([Layer(np.ones((3, 2)), np.zeros(3)), Layer(np.ones((1, 2)), np.zeros(1), LINEAR)])

    def test_final_layer_linear(self):
        """Test a ReLU output layer is refused"""
        with self.assertRaises(ModelError):
            NeuralNetwork([Layer(np.ones((1, 1)), np.zeros(1), RELU)])

    def test_constant_outputs_override_forward(self):
        """Test constant outputs replace the network's value"""
        network = NeuralNetwork([Layer(np.eye(2), np.zeros(2), LINEAR)], {1: 0.5})
        np.testing.assert_allclose(network.forward([3.0, 4.0]), [0.5, 4.0])
        self.assertFalse(network.all_constant)
        self.assertTrue(NeuralNetwork.zeros(3).all_constant)


class EncodeReluNetworkTest(SimpleTestCase):
    """Test the big-M ReLU encoding"""

    def network_model(self, network, lo, hi, fixed=None):
        model = MilpModel('network')
        inputs = [model.add_variable(f'x_0_{j + 1}', lo[j], hi[j]) for j in range(network.input_size)]
        bounds = propagate_preactivation_bounds(network, lo, hi)
        outputs = encode_relu_network(model, network, bounds, inputs, '0')
        if fixed is not None:
            for index, value in zip(inputs, fixed):
                model.set_bounds(index, value, value)
        return model, outputs

    def test_single_relu(self):
        """Test max relu(x) over [-1, 1] is 1"""
        network = NeuralNetwork([Layer([[1.0]], [0.0], RELU), Layer([[1.0]], [0.0], LINEAR)])
        model, outputs = self.network_model(network, [-1.0], [1.0])
        self.assertEqual(model.num_binaries, 1)
        self.assertAlmostEqual(optimum(model, {outputs[0]: 1.0}, MAXIMIZE).objective, 1.0, places=6)
        self.assertAlmostEqual(optimum(model, {outputs[0]: 1.0}, MINIMIZE).objective, 0.0, places=6)

    def test_stable_identity_network(self):
        """Test a network with stably active neurons reproduces its input"""
        network = NeuralNetwork([Layer(np.eye(2), [1.0, 1.0], RELU), Layer(np.eye(2), [-1.0, -1.0], LINEAR)])
        model, outputs = self.network_model(network, [0.0, 0.0], [1.0, 1.0], fixed=[0.25, 0.75])
        self.assertEqual(model.num_binaries, 0)
        for output, expected in zip(outputs, (0.25, 0.75)):
            self.assertAlmostEqual(optimum(model, {output: 1.0}, MAXIMIZE).objective, expected, places=9)

    def test_constant_outputs_are_fixed(self):
        """Test constant outputs become fixed variables"""
        network = NeuralNetwork([Layer(np.ones((2, 2)), np.zeros(2), RELU), Layer(np.eye(2), np.zeros(2), LINEAR)],
                                {2: 0.0})
        model, outputs = self.network_model(network, [-1.0, -1.0], [1.0, 1.0])
        variable = model.variables[outputs[1]]
        self.assertEqual((variable.name, variable.lb, variable.ub), ('u_0_2', 0.0, 0.0))

    def test_matches_forward_pass(self):
        """Test fixed inputs give the forward-pass output"""
        rng = np.random.default_rng(61)
        for _ in range(30):
            hidden = [int(h) for h in rng.integers(1, 9, int(rng.integers(1, 3)))]
            network = random_network(rng, (2, *hidden, 2))
            lo, hi = -np.ones(2), np.ones(2)
            for point in rng.uniform(lo, hi, (100, 2)):
                model, outputs = self.network_model(network, lo, hi, fixed=point)
                expected = network.forward(point)
                result = optimum(model, {outputs[0]: 1.0}, MAXIMIZE)
                np.testing.assert_allclose(result.x[outputs], expected, atol=1e-6)

    def test_box_maximum_dominates_samples(self):
        """Test the MILP maximum over the box exceeds every sampled output"""
        rng = np.random.default_rng(62)
        for _ in range(30):
            network = random_network(rng, (2, 8, 8, 2))
            lo, hi = -np.ones(2), np.ones(2)
            model, outputs = self.network_model(network, lo, hi)
            top = optimum(model, {outputs[0]: 1.0}, MAXIMIZE).bound
            sampled = network.forward(rng.uniform(lo, hi, (10_000, 2)))[:, 0].max()
            self.assertGreaterEqual(top, sampled - 1e-6)

    def test_input_count_checked(self):
        """Test the input list must match the network"""
        network = NeuralNetwork.zeros(2)
        bounds = propagate_preactivation_bounds(network, [0.0, 0.0], [1.0, 1.0])
        with self.assertRaises(ModelError):
            encode_relu_network(MilpModel(), network, bounds, [0], '0')


def unicycle_reads():
    return {1: {3, 4}, 2: {3, 4}, 3: set(), 4: set()}


class DependencyGraphTest(SimpleTestCase):
    """Test the dependency graph shape"""

    def test_unicycle_single_step(self):
        """Test one concrete Unicycle step has five vertices joined to the controller"""
        graph = DependencyGraph(4, [0], unicycle_reads())
        self.assertEqual(len(graph.vertices), 5)
        self.assertEqual(graph.state_edges, [((0, i), (0, CONTROLLER)) for i in range(1, 5)])
        self.assertEqual(graph.temporal_edges, [])

    def test_symbolic_window_has_temporal_edges(self):
        """Test a two-step window links each model to its successor"""
        graph = DependencyGraph(4, [1, 2], unicycle_reads())
        for i in range(0, 5):
            self.assertIn(((1, i), (2, i)), graph.temporal_edges)
        self.assertIn(((1, 3), (2, 1)), graph.temporal_edges)
        self.assertNotIn(((1, 1), (2, 3)), graph.temporal_edges)
        self.assertTrue(all(after[0] == before[0] + 1 for before, after in graph.temporal_edges))

    def test_scalar_system(self):
        """Test n = 1 gives two vertices and one edge"""
        graph = DependencyGraph(1, [0], {1: set()})
        self.assertEqual(len(graph.vertices), 2)
        self.assertEqual(len(graph.state_edges), 1)

    def test_vertex_count_scales_with_window(self):
        """Test the vertex count is (n + 1) times the window length"""
        for window in range(1, 5):
            graph = DependencyGraph(3, range(window), {1: {2}, 2: {3}, 3: {1}})
            self.assertEqual(len(graph.vertices), 4 * window)

    def test_constant_controller_dropped_from_dependencies(self):
        """Test a constant output does not pull in the controller"""
        graph = DependencyGraph(2, [0], {1: {2}, 2: set()}, constant_outputs={1})
        self.assertEqual(graph.dependencies(1), {(0, 1)})
        self.assertEqual(graph.dependencies(2), {(0, 2), (0, CONTROLLER)})


def scalar_spec(source, network=None, delta=0.1):
    return SimpleNamespace(
        n=1,
        dynamics=[parse(source) if isinstance(source, str) else source],
        controller=network or NeuralNetwork.zeros(1),
        delta=delta,
        perturbation=SimpleNamespace(lower=np.zeros(1), upper=np.zeros(1)),
    )


def box(lo, hi):
    return SimpleNamespace(lower=np.atleast_1d(np.asarray(lo, dtype=float)),
                           upper=np.atleast_1d(np.asarray(hi, dtype=float)))


class BuildStepGraphTest(SimpleTestCase):
    """Test assembly of the per-dimension reach models"""

    def test_concrete_sine_step(self):
        """Test the step model bounds x + sin(x) * delta over the box"""
        spec = scalar_spec('sin(x1)')
        domain = box(0.0, 0.1)
        enclosures = {0: [bound_expression(spec.dynamics[0], {1: (0.0, 0.1)})]}
        graph, models = build_step_graph(spec, [0], enclosures, {0: domain})
        self.assertEqual(len(graph.vertices), 2)
        step = models[0]
        self.assertTrue(step.model.frozen)
        self.assertNotIn((0, CONTROLLER), step.vertices)
        top = solve_milp(step.model, step.maximize, mip_gap=0.0).outer_value()
        bottom = solve_milp(step.model, step.minimize, mip_gap=0.0).outer_value()
        xs = np.linspace(0.0, 0.1, 101)
        successors = xs + 0.1 * np.sin(xs)
        self.assertGreaterEqual(top, successors.max() - 1e-12)
        self.assertLessEqual(bottom, successors.min() + 1e-12)
        self.assertLess(top - successors.max(), 1e-3)

    def test_constant_dynamics_shift(self):
        """Test f = c shifts the box by c * delta"""
        spec = scalar_spec(Const(2.0))
        enclosures = {0: [bound_expression(spec.dynamics[0], {1: (1.0, 1.5)})]}
        _, models = build_step_graph(spec, [0], enclosures, {0: box(1.0, 1.5)})
        step = models[0]
        self.assertAlmostEqual(solve_milp(step.model, step.maximize).outer_value(), 1.7, places=7)
        self.assertAlmostEqual(solve_milp(step.model, step.minimize).outer_value(), 1.2, places=7)

    def test_controller_enters_update(self):
        """Test a non-constant controller output is added to the update"""
        network = NeuralNetwork([Layer([[1.0]], [0.0], RELU), Layer([[-1.0]], [0.0], LINEAR)])
        spec = scalar_spec(Const(0.0), network=network, delta=0.5)
        enclosures = {0: [bound_expression(spec.dynamics[0], {1: (-1.0, 1.0)})]}
        _, models = build_step_graph(spec, [0], enclosures, {0: box(-1.0, 1.0)})
        step = models[0]
        self.assertIn((0, CONTROLLER), step.vertices)
        # x - 0.5 relu(x) peaks at x = 1 with 0.5 and bottoms out at x = -1
        self.assertAlmostEqual(solve_milp(step.model, step.maximize).outer_value(), 0.5, places=6)
        self.assertAlmostEqual(solve_milp(step.model, step.minimize).outer_value(), -1.0, places=6)

    def test_symbolic_window_chains_updates(self):
        """Test a two-step window ties x at step 1 to the step-0 update"""
        spec = scalar_spec(Const(1.0))
        boxes = {0: box(0.0, 1.0), 1: box(0.1, 1.1)}
        enclosures = {t: [bound_expression(spec.dynamics[0], {1: (b.lower[0], b.upper[0])})] for t, b in boxes.items()}
        graph, models = build_step_graph(spec, [0, 1], enclosures, boxes)
        step = models[0]
        self.assertIn(((0, 1), (1, 1)), graph.temporal_edges)
        self.assertIn('next_1_1', {c.name for c in step.model.constraints})
        self.assertAlmostEqual(solve_milp(step.model, step.maximize).outer_value(), 1.2, places=7)
        self.assertAlmostEqual(solve_milp(step.model, step.minimize).outer_value(), 0.2, places=7)

    def test_dimension_mismatch(self):
        """Test the controller must map R^n to R^n"""
        spec = scalar_spec('sin(x1)', network=NeuralNetwork.zeros(2))
        with self.assertRaises(ModelError):
            build_step_graph(spec, [0], {0: []}, {0: box(0.0, 1.0)})
