import numpy as np
from django.test import SimpleTestCase

from expressions.generators import random_expression
from expressions.nodes import Const
from expressions.parser import parse
from milp.graph import build_step_graph
from milp.networks import LINEAR, RELU, Layer, NeuralNetwork
from utils.exceptions import ConfigurationError

from .reach import (CONCRETE, INITIAL, PREPASS_INTERVAL, ReachOptions, ReachTrajectory, build_enclosures,
                    compute_trajectory, interval_step, make_schedule, next_set)
from .simulation import simulate
from .system import INSIDE, OUTSIDE, AvoidSet, Box, SystemSpec, box_volume
from .verdicts import AVOID, FALSIFIED_CANDIDATE, REACH, UNKNOWN, VERIFIED, check_reach_avoid


def make_system(sources, initial, controller=None, delta=0.1, horizon=3, perturbation=None, **extra):
    n = len(sources)
    return SystemSpec(
        n=n,
        initial=Box.from_pairs(initial),
        dynamics=[parse(s) if isinstance(s, str) else s for s in sources],
        perturbation=Box.from_pairs(perturbation or [[0.0, 0.0]] * n),
        controller=controller or NeuralNetwork.zeros(n),
        delta=delta,
        horizon=horizon,
        **extra,
    )


def tiny_controller(rng, n, hidden=3):
    return NeuralNetwork([
        Layer(rng.normal(scale=0.5, size=(hidden, n)), rng.normal(scale=0.1, size=hidden), RELU),
        Layer(rng.normal(scale=0.5, size=(n, hidden)), np.zeros(n), LINEAR),
    ])


def assert_contains(test, trajectory, states, tol=1e-9):
    for t, box in enumerate(trajectory.boxes):
        inside = box.contains_points(states[:, t], tol)
        test.assertTrue(np.all(inside), f'{np.count_nonzero(~inside)} rollouts leave the box at step {t}')


class BoxTest(SimpleTestCase):
    """Test boxes and unsafe regions"""

    def test_unit_hypercube_volume(self):
        """Test the unit hypercube in R^4 has volume 1"""
        self.assertEqual(box_volume(Box(np.zeros(4), np.ones(4))), 1.0)

    def test_zero_width_volume(self):
        """Test a zero-width side gives volume 0"""
        self.assertEqual(box_volume(Box.from_pairs([[0, 1], [2, 2]])), 0.0)

    def test_empty_box_rejected(self):
        """Test lower > upper is refused"""
        with self.assertRaises(ValueError):
            Box([1.0], [0.0])

    def test_intersection(self):
        """Test overlapping and disjoint boxes"""
        a = Box.from_pairs([[0, 2], [0, 2]])
        b = Box.from_pairs([[1, 3], [1, 3]])
        self.assertEqual(a.intersection(b), Box.from_pairs([[1, 2], [1, 2]]))
        self.assertIsNone(a.intersection(Box.from_pairs([[5, 6], [0, 1]])))

    def test_box_regions(self):
        """Test inside and outside polarity of box regions"""
        region = Box.from_pairs([[-2, 2], [-2, 2]])
        inside = AvoidSet(0, 5, INSIDE, box=region)
        outside = AvoidSet(0, 5, OUTSIDE, box=region)
        small = Box.from_pairs([[0, 1], [0, 1]])
        straddling = Box.from_pairs([[1, 3], [0, 1]])
        self.assertTrue(inside.intersects(small))
        self.assertFalse(outside.intersects(small))
        self.assertTrue(outside.intersects(straddling))
        self.assertTrue(inside.active(5))
        self.assertFalse(inside.active(6))

    def test_halfspace_regions(self):
        """Test a safe-distance halfspace used as the complement of the safe set"""
        region = AvoidSet(0, 10, OUTSIDE, normal=[1.0, -1.0], offset=10.0)
        self.assertFalse(region.intersects(Box.from_pairs([[100, 110], [20, 30]])))
        self.assertTrue(region.intersects(Box.from_pairs([[30, 40], [20, 30]])))
        np.testing.assert_array_equal(region.contains_points([[100, 20], [25, 20]]), [False, True])


class SystemSpecTest(SimpleTestCase):
    """Test system validation"""

    def test_dynamics_count(self):
        """Test the number of transition functions must equal n"""
        with self.assertRaises(ConfigurationError) as ctx:
            SystemSpec(2, Box.from_pairs([[0, 1], [0, 1]]), [parse('x1')], Box.from_pairs([[0, 0], [0, 0]]),
                       NeuralNetwork.zeros(2), 0.1, 3)
        self.assertIn('dynamics', ctx.exception.errors)

    def test_unknown_state_variable(self):
        """Test dynamics may only read x1..xn"""
        with self.assertRaises(ConfigurationError) as ctx:
            make_system(['x3'], [[0, 1]])
        self.assertIn('dynamics.0', ctx.exception.errors)

    def test_step_size_positive(self):
        """Test delta must be positive"""
        with self.assertRaises(ConfigurationError) as ctx:
            make_system(['x1'], [[0, 1]], delta=0.0)
        self.assertIn('delta', ctx.exception.errors)

    def test_controller_shape(self):
        """Test the controller must map R^n to R^n"""
        with self.assertRaises(ConfigurationError) as ctx:
            make_system(['x1'], [[0, 1]], controller=NeuralNetwork.zeros(2))
        self.assertIn('network', ctx.exception.errors)


class NextSetTest(SimpleTestCase):
    """Test one-step successor boxes"""

    def test_zero_dynamics_keep_the_box(self):
        """Test f = 0, u = 0, E = {0} leaves the box unchanged"""
        spec = make_system([Const(0.0), Const(0.0)], [[0, 1], [-1, 0.5]])
        outcome = next_set(spec, spec.initial)
        np.testing.assert_allclose(outcome.box.lower, spec.initial.lower, atol=1e-8)
        np.testing.assert_allclose(outcome.box.upper, spec.initial.upper, atol=1e-8)
        self.assertEqual(len(outcome.gaps), 4)

    def test_constant_dynamics_shift(self):
        """Test f = c shifts the box by c * delta"""
        spec = make_system([Const(3.0)], [[0.5, 0.75]], delta=0.2)
        outcome = next_set(spec, spec.initial)
        np.testing.assert_allclose(outcome.box.lower, [1.1], atol=1e-8)
        np.testing.assert_allclose(outcome.box.upper, [1.35], atol=1e-8)

    def test_sine_successors_contained(self):
        """Test the successor box of sin dynamics contains sampled successors"""
        spec = make_system(['sin(x1)'], [[0.0, 0.1]], horizon=1)
        outcome = next_set(spec, spec.initial)
        states = simulate(spec, 1000, np.random.default_rng(71))
        self.assertTrue(np.all(outcome.box.contains_points(states[:, 1])))
        self.assertLess(outcome.box.widths[0], 0.12)

    def test_perturbation_widens(self):
        """Test the perturbation box adds delta * E to the successor"""
        spec = make_system([Const(0.0)], [[0.0, 1.0]], perturbation=[[-1.0, 2.0]], delta=0.5)
        outcome = next_set(spec, spec.initial)
        np.testing.assert_allclose([outcome.box.lower[0], outcome.box.upper[0]], [-0.5, 2.0], atol=1e-8)

    def test_interval_step_contains_successors(self):
        """Test the interval pre-pass is a sound successor box"""
        rng = np.random.default_rng(72)
        spec = make_system(['x2 * cos(x1)', 'sin(x1) - x2'], [[0, 0.5], [1, 1.2]],
                           controller=tiny_controller(rng, 2), horizon=1)
        states = simulate(spec, 1000, rng)
        self.assertTrue(np.all(interval_step(spec, spec.initial).contains_points(states[:, 1])))

    def test_enclosures_cover_padded_box(self):
        """Test enclosure domains include the padding"""
        spec = make_system(['sin(x1)'], [[0.0, 0.1]])
        (enclosure,) = build_enclosures(spec, spec.initial, ReachOptions(padding=1e-6))
        lo, hi = enclosure.domain()[1]
        self.assertLess(lo, 0.0)
        self.assertGreater(hi, 0.1)


class ComputeTrajectoryTest(SimpleTestCase):
    """Test trajectory assembly"""

    def test_schedule(self):
        """Test windows cover the horizon in order"""
        self.assertEqual(make_schedule(3), [[0], [1], [2]])
        self.assertEqual(make_schedule(7, 3), [[0, 1, 2], [3, 4, 5], [6]])

    def test_bad_schedule(self):
        """Test a schedule with a gap is refused"""
        spec = make_system([Const(0.0)], [[0, 1]], horizon=2)
        with self.assertRaises(ValueError):
            compute_trajectory(spec, [[0]])

    def test_zero_dynamics_constant_trajectory(self):
        """Test zero dynamics give a constant concrete trajectory"""
        spec = make_system([Const(0.0), Const(0.0)], [[0, 1], [2, 3]], horizon=3)
        trajectory = compute_trajectory(spec, make_schedule(3))
        self.assertEqual(len(trajectory), 4)
        self.assertEqual(trajectory.modes, [INITIAL, CONCRETE, CONCRETE, CONCRETE])
        for box in trajectory.boxes:
            np.testing.assert_allclose(box.as_pairs(), spec.initial.as_pairs(), atol=1e-7)

    def test_symbolic_matches_concrete_on_linear_system(self):
        """Test a decoupled linear system gives the same boxes in both modes"""
        spec = make_system(['x1', '0 - x2'], [[0.9, 1.0], [0.0, 0.1]], horizon=2)
        concrete = compute_trajectory(spec, make_schedule(2))
        symbolic = compute_trajectory(spec, make_schedule(2, 2))
        self.assertEqual(symbolic.modes[-1], 'symbolic(2)')
        for a, b in zip(concrete.boxes, symbolic.boxes):
            np.testing.assert_allclose(a.as_pairs(), b.as_pairs(), atol=1e-7)

    def test_symbolic_no_wider_than_concrete(self):
        """Test a width-3 symbolic window is at least as tight as concrete steps"""
        controller = NeuralNetwork([Layer([[1.0]], [0.0], RELU), Layer([[-0.5]], [0.0], LINEAR)])
        spec = make_system(['sin(x1)'], [[0.0, 0.5]], controller=controller, delta=0.2, horizon=3)
        concrete = compute_trajectory(spec, make_schedule(3))
        for prepass in ('concrete', PREPASS_INTERVAL):
            symbolic = compute_trajectory(spec, make_schedule(3, 3), ReachOptions(prepass=prepass))
            if prepass == 'concrete':
                self.assertTrue(np.all(symbolic.final.widths <= concrete.final.widths + 1e-8))
            states = simulate(spec, 1000, np.random.default_rng(73))
            assert_contains(self, symbolic, states)

    def test_window_model_grows_with_depth(self):
        """Test the symbolic model gets larger with every extra step in the window"""
        controller = NeuralNetwork([Layer([[1.0]], [0.0], RELU), Layer([[-0.5]], [0.0], LINEAR)])
        spec = make_system(['sin(x1)'], [[0.0, 0.5]], controller=controller)
        options = ReachOptions()
        enclosures = build_enclosures(spec, spec.initial, options)
        sizes = []
        for depth in range(1, 7):
            steps = list(range(depth))
            _, (step,) = build_step_graph(spec, steps, {t: enclosures for t in steps},
                                          {t: spec.initial for t in steps})
            sizes.append(len(step.model.variables) + step.model.num_binaries + len(step.model.constraints))
        self.assertEqual(sizes, sorted(set(sizes)))

    def test_fuzzed_systems_contain_rollouts(self):
        """Test simulated trajectories of fuzzed closed-loop systems stay inside the boxes"""
        rng = np.random.default_rng(74)
        for _ in range(10):
            n = int(rng.integers(1, 3))
            variables = tuple(range(1, n + 1))
            sources = [random_expression(rng, 2, variables, functions=('sin', 'cos')) for _ in range(n)]
            initial = [[c, c + w] for c, w in zip(rng.uniform(-0.5, 0.5, n), rng.uniform(0.01, 0.1, n))]
            spec = make_system(sources, initial, controller=tiny_controller(rng, n), delta=0.05, horizon=10,
                               perturbation=[[-1e-3, 1e-3]] * n)
            trajectory = compute_trajectory(spec, make_schedule(10))
            assert_contains(self, trajectory, simulate(spec, 1000, rng))

    def test_time_limit_keeps_containment(self):
        """Test tiny solver time limits only widen the boxes"""
        rng = np.random.default_rng(75)
        spec = make_system(['x2 * cos(x1)', 'sin(x1)'], [[0, 0.2], [0.5, 0.6]],
                           controller=tiny_controller(rng, 2, hidden=4), horizon=3)
        rushed = compute_trajectory(spec, make_schedule(3), ReachOptions(solver={'TIME_LIMIT_S': 0.0}))
        assert_contains(self, rushed, simulate(spec, 1000, rng))

    def test_smaller_initial_set_never_widens(self):
        """Test halving the initial box keeps every step inside the original run"""
        spec = make_system(['x2', '0 - x1'], [[0.0, 1.0], [0.0, 1.0]], horizon=3)
        half = make_system(['x2', '0 - x1'], [[0.25, 0.75], [0.25, 0.75]], horizon=3)
        wide = compute_trajectory(spec, make_schedule(3))
        narrow = compute_trajectory(half, make_schedule(3))
        for big, small in zip(wide.boxes, narrow.boxes):
            self.assertTrue(big.contains_box(small, tol=1e-8))


def trajectory_of(pairs):
    boxes = [Box.from_pairs(p) for p in pairs]
    return ReachTrajectory(boxes, [INITIAL] + [CONCRETE] * (len(boxes) - 1), [[]] * len(boxes), [0.0] * len(boxes))


class CheckReachAvoidTest(SimpleTestCase):
    """Test reach-avoid verdicts"""

    def test_reach_verified_at_first_contained_step(self):
        """Test the goal is reached at the first box inside it"""
        pairs = [[[t, t + 1]] for t in range(7)]
        spec = make_system(['x1'], pairs[0], goal=Box.from_pairs([[4.5, 10]]))
        verdicts = {v.property: v for v in check_reach_avoid(trajectory_of(pairs), spec)}
        self.assertEqual(verdicts[REACH].status, VERIFIED)
        self.assertEqual(verdicts[REACH].witness_step, 5)
        self.assertEqual(verdicts[AVOID].status, VERIFIED)

    def test_avoid_overlap_is_a_candidate(self):
        """Test an overlap at step 3 falsifies avoid with witness 3"""
        pairs = [[[t, t + 1]] for t in range(6)]
        avoid = [AvoidSet(3, 3, INSIDE, box=Box.from_pairs([[3.5, 3.6]])), AvoidSet(0, 2, INSIDE, box=Box.from_pairs([[9, 10]]))]
        spec = make_system(['x1'], pairs[0], avoid=avoid)
        (verdict,) = check_reach_avoid(trajectory_of(pairs), spec)
        self.assertEqual(verdict.status, FALSIFIED_CANDIDATE)
        self.assertEqual(verdict.witness_step, 3)
        self.assertEqual(verdict.witness_box, [[3.0, 4.0]])

    def test_reach_unknown_when_only_overlapping(self):
        """Test a goal that is touched but never contains a box is unknown"""
        pairs = [[[0, 2]], [[1, 3]]]
        spec = make_system(['x1'], pairs[0], goal=Box.from_pairs([[2.5, 2.8]]))
        verdicts = {v.property: v for v in check_reach_avoid(trajectory_of(pairs), spec)}
        self.assertEqual(verdicts[REACH].status, UNKNOWN)

    def test_reach_missed_entirely(self):
        """Test a goal no box meets is a falsified-candidate"""
        pairs = [[[0, 1]], [[1, 2]]]
        spec = make_system(['x1'], pairs[0], goal=Box.from_pairs([[5, 6]]))
        verdicts = {v.property: v for v in check_reach_avoid(trajectory_of(pairs), spec)}
        self.assertEqual(verdicts[REACH].status, FALSIFIED_CANDIDATE)


class SimulateTest(SimpleTestCase):
    """Test exact rollouts"""

    def test_shape_and_start(self):
        """Test rollouts start in the initial box and have T + 1 states"""
        spec = make_system(['x2', '0 - x1'], [[0, 1], [2, 3]], horizon=4)
        states = simulate(spec, 50, np.random.default_rng(81))
        self.assertEqual(states.shape, (50, 5, 2))
        self.assertTrue(np.all(spec.initial.contains_points(states[:, 0])))

    def test_matches_update_rule(self):
        """Test one step follows x + (f + u + eps) * delta"""
        spec = make_system(['sin(x1)'], [[0.3, 0.3]], horizon=1, delta=0.5)
        states = simulate(spec, 3, np.random.default_rng(82))
        np.testing.assert_allclose(states[:, 1, 0], 0.3 + 0.5 * np.sin(0.3))
