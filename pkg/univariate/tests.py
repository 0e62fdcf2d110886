import math
from unittest import mock

import numpy as np
from django.test import SimpleTestCase

from enclosures.function_bound import check_enclosure_sampled
from expressions.calculus import SignChanges
from expressions.evaluation import evaluate
from expressions.parser import parse

from .bounds import (CONCAVE, CONVEX, LINEAR, LOWER, MIXED, UPPER, PwlBound, bound_convex_piece,
                     bound_univariate, convexity_partition, total_gap)

INFLATION = 1e-9


def sampled(f, a, b, count=10_000):
    xs = np.linspace(a, b, count)
    return xs, evaluate(f, xs.reshape(-1, 1))


class ConvexityPartitionTest(SimpleTestCase):
    """Test splitting intervals by the sign of the second derivative"""

    def test_cos_is_concave(self):
        """Test cos on [-1, 1] is a single concave piece"""
        partition = convexity_partition(parse('cos(x1)'), -1.0, 1.0)
        self.assertEqual(partition.tags, (CONCAVE,))
        self.assertEqual(partition.endpoints, (-1.0, 1.0))

    def test_sin_splits_at_zero(self):
        """Test sin on [-1, 1] splits into convex then concave"""
        partition = convexity_partition(parse('sin(x1)'), -1.0, 1.0)
        self.assertEqual(partition.tags, (CONVEX, CONCAVE))
        self.assertAlmostEqual(partition.endpoints[1], 0.0, places=8)

    def test_linear(self):
        """Test a linear function is one linear piece"""
        partition = convexity_partition(parse('x1'), 0.0, 1.0)
        self.assertEqual(len(partition), 1)
        self.assertEqual(partition.tags, (LINEAR,))

    def test_empty_interval(self):
        """Test a reversed interval is rejected"""
        with self.assertRaises(ValueError):
            convexity_partition(parse('sin(x1)'), 1.0, 1.0)


class BoundConvexPieceTest(SimpleTestCase):
    """Test one-sided bounds on pieces of uniform convexity"""

    def test_concave_chord(self):
        """Test the lower bound of sin on [0, pi] with one division is the zero chord"""
        bound = bound_convex_piece(parse('sin(x1)'), (0.0, math.pi), 1, LOWER, CONCAVE)
        np.testing.assert_allclose(bound.breakpoints, [0.0, math.pi])
        np.testing.assert_allclose(bound.values, [0.0, 0.0], atol=1e-12)

    def test_convex_chord(self):
        """Test the upper bound of x*x on [0, 1] with one division is y = x"""
        bound = bound_convex_piece(parse('x1*x1'), (0.0, 1.0), 1, UPPER)
        np.testing.assert_allclose(bound.values, [0.0, 1.0])
        xs = np.linspace(0, 1, 101)
        self.assertTrue(np.all(xs * xs <= bound(xs) + 1e-12))

    def test_exp_tangents(self):
        """Test tangent segments stay below exp and pin its end values"""
        f = parse('exp(x1)')
        bound = bound_convex_piece(f, (0.0, 1.0), 2, LOWER)
        xs, values = sampled(f, 0.0, 1.0)
        self.assertTrue(np.all(bound(xs) <= values + 1e-12))
        self.assertAlmostEqual(bound.values[0], 1.0)
        self.assertAlmostEqual(bound.values[-1], math.e)

    def test_chord_descent_beats_uniform(self):
        """Test optimised chord breakpoints do not enlarge the area gap"""
        f = parse('exp(x1)')
        optimised = bound_convex_piece(f, (0.0, 2.0), 3, UPPER)
        uniform = bound_convex_piece(f, (0.0, 2.0), 3, UPPER, rounds=0)
        xs, values = sampled(f, 0.0, 2.0)
        self.assertLessEqual(np.sum(optimised(xs) - values), np.sum(uniform(xs) - values) + 1e-9)
        self.assertTrue(np.all(optimised(xs) >= values - 1e-12))

    def test_pwl_bound_validation(self):
        """Test breakpoints must increase"""
        with self.assertRaises(ValueError):
            PwlBound([0.0, 0.0], [1.0, 2.0])


class BoundUnivariateTest(SimpleTestCase):
    """Test stitched univariate bounding sets"""

    def assertEncloses(self, bounding_set, f, a, b):
        xs, values = sampled(f, a, b)
        lower, upper = bounding_set.evaluate_bounds(xs.reshape(-1, 1))
        self.assertTrue(np.all(lower <= values), f'lower bound violated for {f}')
        self.assertTrue(np.all(values <= upper), f'upper bound violated for {f}')

    def test_identity_is_exact(self):
        """Test the identity gets its own values on the two end points"""
        result = bound_univariate(parse('x1'), -1.0, 1.0, k=1, inflation=0.0)
        np.testing.assert_allclose(result.axes[0], [-1.0, 1.0])
        np.testing.assert_allclose(result.lower, [-1.0, 1.0])
        np.testing.assert_allclose(result.upper, [-1.0, 1.0])

    def test_cos_end_values(self):
        """Test cos bounds bracket cos(1) at the left end and reach 1 at zero"""
        result = bound_univariate(parse('cos(x1)'), -1.0, 1.0)
        self.assertLessEqual(result.lower[0], math.cos(1.0))
        self.assertGreaterEqual(result.upper[0], math.cos(1.0))
        _, upper = result.evaluate_bounds([[0.0]])
        self.assertGreaterEqual(upper[0], 1.0)

    def test_sampled_enclosure(self):
        """Test enclosure of assorted functions at dense samples"""
        cases = [
            ('sin(x1)', 0.0, math.pi, 2),
            ('sin(x1)', -2.0, 3.0, 3),
            ('cos(x1)', -1.0, 1.0, 2),
            ('exp(x1)', -1.0, 1.0, 4),
            ('x1*x1*x1', -1.5, 1.0, 2),
            ('atan(x1)', -3.0, 3.0, 2),
            ('log(x1 + 2)', -1.0, 2.0, 3),
            ('0.5*sin(2*x1) - x1', -1.0, 1.0, 2),
        ]
        for source, a, b, k in cases:
            f = parse(source)
            self.assertEncloses(bound_univariate(f, a, b, k=k), f, a, b)

    def test_monotone_tightening(self):
        """Test the total gap does not grow with the division count"""
        xs = np.linspace(-1.0, 1.0, 2001)
        for source in ('sin(x1)', 'cos(x1)', 'exp(x1)'):
            f = parse(source)
            gaps = [total_gap(bound_univariate(f, -1.0, 1.0, k=k), xs) for k in (2, 3, 5, 9)]
            for before, after in zip(gaps, gaps[1:]):
                self.assertLessEqual(after, before + 1e-9, source)

    def test_lower_bound_pinned_at_ends(self):
        """Test the lower bound of a convex function equals it at the ends"""
        f = parse('exp(x1)')
        result = bound_univariate(f, 0.0, 1.0, k=3)
        epsilon = INFLATION * (1 + math.e)
        self.assertAlmostEqual(result.lower[0], 1.0, delta=2 * epsilon)
        self.assertAlmostEqual(result.lower[-1], math.e, delta=2 * epsilon)

    def test_constant(self):
        """Test a constant gets equal bounds up to the inflation"""
        result = bound_univariate(parse('3'), 0.0, 1.0, variable=2)
        self.assertEqual(result.variables, (2,))
        np.testing.assert_allclose(result.lower, 3.0, atol=1e-8)
        np.testing.assert_allclose(result.upper, 3.0, atol=1e-8)

    def test_inflation_setting(self):
        """Test the configured inflation widens the bounds"""
        with self.settings(POLYVERIFY={'ENCLOSURE': {'INFLATION': 1e-3}}):
            result = bound_univariate(parse('x1'), 0.0, 1.0, k=1)
        np.testing.assert_allclose(result.upper - result.lower, 2e-3 * 2, rtol=1e-9)

    def test_arctan_around_zero(self):
        """Test atan is bounded across its inflection for several division counts"""
        f = parse('atan(x1)')
        for a, b in ((-1.0, 1.0), (-10.0, 10.0)):
            self.assertEqual(convexity_partition(f, a, b).tags, (CONVEX, CONCAVE))
            for k in (1, 2, 3, 5):
                report = check_enclosure_sampled(bound_univariate(f, a, b, k=k), f)
                self.assertTrue(report.passed, f'[{a}, {b}] k={k}: {report}')

    def test_reciprocal_of_square(self):
        """Test 1/(1 + x1*x1) splits at its two inflections and stays enclosed"""
        f = parse('1 / (1 + x1*x1)')
        partition = convexity_partition(f, -1.0, 1.0)
        self.assertEqual(partition.tags, (CONVEX, CONCAVE, CONVEX))
        np.testing.assert_allclose(partition.endpoints[1:3], [-1 / math.sqrt(3), 1 / math.sqrt(3)], atol=1e-8)
        self.assertTrue(check_enclosure_sampled(bound_univariate(f, -1.0, 1.0, k=2), f).passed)

    def test_every_function_around_zero(self):
        """Test each elementary function is enclosed on an interval around zero"""
        cases = [
            ('sin(x1)', -2.0, 2.0),
            ('cos(x1)', -2.0, 2.0),
            ('tan(x1)', -1.2, 1.2),
            ('asin(x1)', -0.9, 0.9),
            ('acos(x1)', -0.9, 0.9),
            ('atan(x1)', -5.0, 5.0),
            ('exp(x1)', -2.0, 2.0),
            ('log(x1 + 2.5)', -2.0, 2.0),
        ]
        for source, a, b in cases:
            f = parse(source)
            for k in (1, 3):
                report = check_enclosure_sampled(bound_univariate(f, a, b, k=k), f)
                self.assertTrue(report.passed, f'{source} k={k}: {report}')


class MixedCurvatureTest(SimpleTestCase):
    """Test pieces whose second derivative keeps changing sign"""

    def test_hull_polyline(self):
        """Test hull bounds of x^3 on [-1, 1] bracket it and pin the outer hull ends"""
        f = parse('x1*x1*x1')
        lower = bound_convex_piece(f, (-1.0, 1.0), 4, LOWER, MIXED)
        upper = bound_convex_piece(f, (-1.0, 1.0), 4, UPPER, MIXED)
        np.testing.assert_allclose(lower.breakpoints, np.linspace(-1.0, 1.0, 5))
        xs, values = sampled(f, -1.0, 1.0)
        self.assertTrue(np.all(lower(xs) <= values))
        self.assertTrue(np.all(values <= upper(xs)))
        self.assertLessEqual(lower.values[0], -1.0)
        self.assertGreaterEqual(upper.values[-1], 1.0)

    def test_unisolated_inflection(self):
        """Test a piece with an inflection the root search missed gets sound bounds"""
        f = parse('sin(x1)')
        with mock.patch('univariate.bounds.find_sign_changes', return_value=SignChanges()):
            partition = convexity_partition(f, -2.0, 3.0)
            result = bound_univariate(f, -2.0, 3.0, k=3)
        self.assertEqual(partition.tags, (MIXED,))
        report = check_enclosure_sampled(result, f)
        self.assertTrue(report.passed, str(report))
