import math

import numpy as np
from django.test import SimpleTestCase

from expressions.generators import random_box, random_expression
from expressions.nodes import Binary, Const, Unary
from expressions.parser import parse, to_source
from univariate.bounds import bound_univariate
from utils.exceptions import BoundingSetError

from .bounding_set import BoundingSet, polyhedron_vertices
from .function_bound import bound_expression, check_enclosure_sampled
from .operations import LiftSpec, align_domains, compose, expand_and_interpolate, lift


def example_box_set():
    """The square [-5, 5]^2 with constant bounds -5 and 5."""
    return BoundingSet.from_axes((1, 2), [[-5, 5], [-5, 5]], [-5.0] * 4, [5.0] * 4)


class BoundingSetTest(SimpleTestCase):
    """Test the bounding-set container"""

    def test_polyhedron_vertices_of_cube(self):
        """Test the square with bounds -5 and 5 spans the eight cube corners"""
        vertices = polyhedron_vertices(example_box_set())
        expected = {(x, y, z) for x in (-5.0, 5.0) for y in (-5.0, 5.0) for z in (-5.0, 5.0)}
        self.assertEqual({tuple(v) for v in vertices.tolist()}, expected)

    def test_polyhedron_vertices_merge_equal_bounds(self):
        """Test equal bounds contribute one vertex per grid point"""
        identity = BoundingSet.from_axes((1,), [[0, 1]], [0.0, 1.0], [0.0, 1.0])
        self.assertEqual(polyhedron_vertices(identity).tolist(), [[0.0, 0.0], [1.0, 1.0]])

    def test_polyhedron_vertices_of_cos_bound(self):
        """Test each cos grid point yields its lower and upper vertex"""
        result = bound_univariate(parse('cos(x1)'), -1.0, 1.0)
        vertices = polyhedron_vertices(result)
        self.assertEqual(len(vertices), 2 * len(result))
        self.assertTrue(np.all(vertices[:len(result), 1] <= vertices[len(result):, 1]))

    def test_crossed_bounds_name_the_point(self):
        """Test L > U is rejected with the offending grid point"""
        with self.assertRaises(BoundingSetError) as ctx:
            BoundingSet.from_axes((1,), [[0, 1]], [0.0, 2.0], [1.0, 1.0])
        np.testing.assert_allclose(ctx.exception.point, [1.0])

    def test_json_dump(self):
        """Test the debug dump lists axes and bounds in row-major order"""
        data = example_box_set()
        restored = BoundingSet.from_json(data.to_json())
        self.assertEqual(restored.variables, (1, 2))
        np.testing.assert_allclose(restored.upper, data.upper)
        np.testing.assert_allclose(restored.axes[1], [-5.0, 5.0])


class LiftTest(SimpleTestCase):
    """Test lifting into higher dimensions"""

    def test_square_to_cube(self):
        """Test lifting the square into three dimensions pads the new axis"""
        lifted = lift(example_box_set(), LiftSpec(3, (1, 2), (0, 0, -5), (0, 0, 5)))
        self.assertEqual(lifted.shape, (2, 2, 2))
        np.testing.assert_allclose(lifted.axes[2], [-5.0, 5.0])
        np.testing.assert_allclose(lifted.lower, -5.0)
        np.testing.assert_allclose(lifted.upper, 5.0)

    def test_restriction_reproduces_bounds(self):
        """Test lifted bounds restricted to the old axes equal the originals"""
        source = bound_univariate(parse('sin(x1)'), -1.0, 2.0)
        lifted = lift(source, LiftSpec(3, (2,), (-1, 0, 4), (1, 0, 6)))
        lower = lifted.lower.reshape(lifted.shape)
        for i in range(2):
            for j in range(2):
                np.testing.assert_array_equal(lower[i, :, j], source.lower)

    def test_cos_ruled_along_new_axis(self):
        """Test a cos bound lifted into the (x3, x4) plane is constant along x4"""
        source = bound_univariate(parse('cos(x3)'), -1.0, 1.0)
        lifted = lift(source, LiftSpec(2, (1,), (0, -1), (0, 1), variables=(3, 4)))
        self.assertEqual(lifted.variables, (3, 4))
        upper = lifted.upper.reshape(lifted.shape)
        np.testing.assert_array_equal(upper[:, 0], upper[:, 1])

    def test_lift_preserves_enclosure(self):
        """Test lifted sets still enclose the lifted functions"""
        rng = np.random.default_rng(21)
        for _ in range(10):
            f = random_expression(rng, 3, functions=('sin', 'cos', 'exp', 'atan'))
            source = bound_univariate(f, -1.0, 1.5)
            if not check_enclosure_sampled(source, f).passed:
                continue
            lifted = lift(source, LiftSpec(2, (1,), (0, -2), (0, 3)))
            self.assertTrue(check_enclosure_sampled(lifted, f, rng=rng).passed, to_source(f))

    def test_empty_padding(self):
        """Test a new axis needs lower padding below upper padding"""
        with self.assertRaises(BoundingSetError):
            LiftSpec(3, (1, 2), (0, 0, 5), (0, 0, 5))


class ExpandAndInterpolateTest(SimpleTestCase):
    """Test gridded insertion with interpolation"""

    def test_insert_origin(self):
        """Test inserting the origin adds its star with interpolated bounds"""
        expanded = expand_and_interpolate(example_box_set(), (0.0, 0.0))
        self.assertEqual(len(expanded), 9)
        points = {tuple(p) for p in expanded.point_set.points.tolist()}
        added = points - {(x, y) for x in (-5.0, 5.0) for y in (-5.0, 5.0)}
        self.assertEqual(added, {(-5.0, 0.0), (0.0, 0.0), (5.0, 0.0), (0.0, -5.0), (0.0, 5.0)})
        index = expanded.point_set.grid_index((-5.0, 0.0))
        self.assertAlmostEqual(expanded.upper[index], 5.0)

    def test_existing_point(self):
        """Test inserting a grid point changes nothing"""
        data = example_box_set()
        self.assertIs(expand_and_interpolate(data, (5.0, -5.0)), data)

    def test_linear_interpolation(self):
        """Test 1-D insertion interpolates linearly"""
        data = BoundingSet.from_axes((1,), [[0, 2]], [0.0, 2.0], [1.0, 3.0])
        expanded = expand_and_interpolate(data, (1.0,))
        np.testing.assert_allclose(expanded.lower, [0.0, 1.0, 2.0])
        np.testing.assert_allclose(expanded.upper, [1.0, 2.0, 3.0])

    def test_outside_domain(self):
        """Test points outside the domain are rejected"""
        with self.assertRaises(BoundingSetError):
            expand_and_interpolate(example_box_set(), (6.0, 0.0))

    def test_interpolation_preserves_enclosure(self):
        """Test random insertions keep sums of univariate bounds enclosing"""
        rng = np.random.default_rng(33)
        f = parse('sin(x1) + exp(x2)')
        data = bound_expression(f, {1: (-1.0, 2.0), 2: (-1.0, 1.0)})
        for _ in range(100):
            q = rng.uniform([-1.0, -1.0], [2.0, 1.0])
            expanded = expand_and_interpolate(data, q)
            self.assertTrue(check_enclosure_sampled(expanded, f, samples=2000, rng=rng).passed)
            added = {tuple(p) for p in expanded.point_set.points.tolist()} - \
                {tuple(p) for p in data.point_set.points.tolist()}
            star = {tuple(p) for p in expanded.point_set.points.tolist() if any(np.isclose(p, q, rtol=0, atol=1e-12))}
            self.assertTrue(added <= star)


class AlignDomainsTest(SimpleTestCase):
    """Test merging two bounding sets onto one grid"""

    def test_product_grid(self):
        """Test univariate sets in x3 and x4 meet on the product grid"""
        bf = bound_univariate(parse('cos(x3)'), -1.0, 1.0)
        bg = bound_univariate(parse('x4'), -1.0, 1.0)
        af, ag = align_domains(bf, bg)
        self.assertEqual(af.variables, (3, 4))
        self.assertEqual(af.shape, (len(bf), len(bg)))
        for a, b in zip(af.axes, ag.axes):
            np.testing.assert_array_equal(a, b)

    def test_identity(self):
        """Test aligning a set with itself changes nothing"""
        data = bound_univariate(parse('sin(x1)'), 0.0, 1.0)
        af, ag = align_domains(data, data)
        np.testing.assert_array_equal(af.lower, data.lower)
        np.testing.assert_array_equal(ag.upper, data.upper)

    def test_random_pairs_stay_enclosing(self):
        """Test aligned random pairs still enclose their functions"""
        rng = np.random.default_rng(5)
        for _ in range(10):
            f = random_expression(rng, 3, variables=(1,), functions=('sin', 'cos', 'atan'))
            g = random_expression(rng, 3, variables=(2,), functions=('sin', 'exp'))
            box = random_box(rng, (1, 2))
            bf = bound_univariate(f, *box[1], variable=1)
            bg = bound_univariate(g, *box[2], variable=2)
            af, ag = align_domains(bf, bg)
            self.assertTrue(check_enclosure_sampled(af, f, rng=rng).passed, to_source(f))
            self.assertTrue(check_enclosure_sampled(ag, g, rng=rng).passed, to_source(g))


class ComposeTest(SimpleTestCase):
    """Test pointwise composition"""

    def test_sum(self):
        """Test adding the square set to itself"""
        data = example_box_set()
        total = compose(data, data, '+')
        np.testing.assert_allclose(total.lower, -10.0)
        np.testing.assert_allclose(total.upper, 10.0)

    def test_product(self):
        """Test the four-product rule on constant bounds"""
        data = example_box_set()
        product = compose(data, data, '*')
        np.testing.assert_allclose(product.lower, -25.0)
        np.testing.assert_allclose(product.upper, 25.0)

    def test_difference_pairs_opposite_bounds(self):
        """Test subtraction pairs lower with upper"""
        data = BoundingSet.from_axes((1,), [[0, 1]], [0.0, 0.0], [1.0, 1.0])
        difference = compose(data, data, '-')
        np.testing.assert_allclose(difference.lower, -1.0)
        np.testing.assert_allclose(difference.upper, 1.0)

    def test_cos_times_identity(self):
        """Test the product of cos(x3) and x4 over the unit square"""
        bf = bound_univariate(parse('cos(x3)'), -1.0, 1.0)
        bg = bound_univariate(parse('x4'), -1.0, 1.0)
        product = compose(*align_domains(bf, bg), '*')
        corner = product.point_set.grid_index((-1.0, -1.0))
        self.assertLessEqual(product.lower[corner], -math.cos(1.0))
        self.assertGreaterEqual(product.upper[corner], -math.cos(1.0))
        self.assertTrue(check_enclosure_sampled(product, parse('x4*cos(x3)')).passed)

    def test_division(self):
        """Test division by a set bounded away from zero"""
        bf = bound_univariate(parse('sin(x1)'), 0.0, 2.0)
        bg = bound_univariate(parse('x2*x2 + 1'), -1.0, 1.0)
        quotient = compose(*align_domains(bf, bg), '/')
        self.assertTrue(check_enclosure_sampled(quotient, parse('sin(x1)/(x2*x2 + 1)')).passed)

    def test_random_pairs_every_operator(self):
        """Test composing random aligned pairs with each operator stays enclosing"""
        rng = np.random.default_rng(23)
        for op in ('+', '-', '*', '/'):
            for _ in range(10):
                f = random_expression(rng, 3, variables=(1,), functions=('sin', 'cos', 'exp'))
                g = random_expression(rng, 3, variables=(2,), functions=('sin', 'cos'))
                if op == '/':
                    g = Binary('+', Const(1.5), Unary('exp', g))
                box = random_box(rng, (1, 2))
                bf = bound_univariate(f, *box[1], variable=1)
                bg = bound_univariate(g, *box[2], variable=2)
                result = compose(*align_domains(bf, bg), op)
                h = Binary(op, f, g)
                report = check_enclosure_sampled(result, h, rng=rng)
                self.assertTrue(report.passed, f'{to_source(h)}: {report}')

    def test_division_by_zero_range(self):
        """Test a divisor range containing zero names the grid point"""
        bf = bound_univariate(parse('x1'), 0.0, 1.0)
        bg = bound_univariate(parse('x2'), -1.0, 1.0)
        with self.assertRaises(BoundingSetError) as ctx:
            compose(*align_domains(bf, bg), '/')
        self.assertIsNotNone(ctx.exception.point)

    def test_mismatched_grids(self):
        """Test composition refuses unaligned sets"""
        bf = bound_univariate(parse('x1'), 0.0, 1.0)
        bg = bound_univariate(parse('x2'), 0.0, 1.0)
        with self.assertRaises(BoundingSetError):
            compose(bf, bg, '+')


class BoundExpressionTest(SimpleTestCase):
    """Test bottom-up bounding of expressions"""

    def test_constant(self):
        """Test a constant gets equal bounds on the box corners"""
        result = bound_expression(parse('0'), {1: (-1, 1), 2: (0, 3)})
        self.assertEqual(result.shape, (2, 2))
        np.testing.assert_array_equal(result.lower, 0.0)
        np.testing.assert_array_equal(result.upper, 0.0)

    def test_product_of_leaves(self):
        """Test x4*cos(x3) over the unit square"""
        f = parse('x4 * cos(x3)')
        result = bound_expression(f, {3: (-1, 1), 4: (-1, 1)})
        self.assertEqual(result.variables, (3, 4))
        self.assertTrue(check_enclosure_sampled(result, f).passed)

    def test_sum_of_leaves(self):
        """Test sin(x1) + cos(x2) over the unit square"""
        f = parse('sin(x1) + cos(x2)')
        self.assertTrue(check_enclosure_sampled(bound_expression(f, [(0, 1), (0, 1)]), f).passed)

    def test_unsupported_operator(self):
        """Test a function of a multivariate argument is rejected"""
        with self.assertRaises(BoundingSetError):
            bound_expression(parse('sin(x1*x2)'), {1: (0, 1), 2: (0, 1)})

    def test_box_must_cover_variables(self):
        """Test every free variable needs a box entry"""
        with self.assertRaises(BoundingSetError):
            bound_expression(parse('x1 + x3'), {1: (0, 1)})

    def test_fuzzed_expressions(self):
        """Test random expressions with all four operators over random boxes stay enclosed"""
        rng = np.random.default_rng(17)
        checked = quotients = 0
        for _ in range(200):
            f = random_expression(rng, 4, variables=(1, 2, 3), functions=('sin', 'cos', 'exp', 'atan'),
                                  operators=('+', '-', '*', '/'), denominator_offset=(0.5, 2.0))
            box = random_box(rng, (1, 2, 3), max_width=1.5)
            try:
                result = bound_expression(f, box)
            except BoundingSetError:
                continue
            if not f.free_vars:
                continue
            checked += 1
            quotients += '/' in to_source(f)
            report = check_enclosure_sampled(result, f, rng=rng)
            self.assertTrue(report.passed, f'{to_source(f)}: {report}')
        self.assertGreater(checked, 50)
        self.assertGreater(quotients, 5)

    def test_arctan_factor(self):
        """Test x2 * atan(x1) over a box straddling the inflection of atan"""
        f = parse('x2 * atan(x1)')
        for radius in (1.0, 10.0):
            result = bound_expression(f, {1: (-radius, radius), 2: (-1.0, 2.0)})
            self.assertTrue(check_enclosure_sampled(result, f).passed)

    def test_reciprocal_of_square(self):
        """Test x2 / (1 + x1*x1) over a box around the origin"""
        f = parse('x2 / (1 + x1*x1)')
        result = bound_expression(f, {1: (-1.0, 1.0), 2: (-1.0, 1.0)})
        self.assertTrue(check_enclosure_sampled(result, f).passed)


class CheckEnclosureSampledTest(SimpleTestCase):
    """Test the sampling oracle"""

    def test_square_encloses_bounded_product(self):
        """Test the square set encloses x2*cos(x1)"""
        self.assertTrue(check_enclosure_sampled(example_box_set(), parse('x2*cos(x1)')).passed)

    def test_exact_linear(self):
        """Test exact bounds of a linear function report no violation"""
        data = BoundingSet.from_axes((1, 2), [[0, 1], [0, 1]], [0.0, 1.0, 2.0, 3.0], [0.0, 1.0, 2.0, 3.0])
        report = check_enclosure_sampled(data, parse('2*x1 + x2'))
        self.assertEqual(report.max_violation, 0.0)

    def test_shrunk_upper_bound(self):
        """Test a shrunk upper bound is caught"""
        data = BoundingSet.from_axes((1, 2), [[-5, 5], [-5, 5]], [-5.0] * 4, [1.0] * 4)
        report = check_enclosure_sampled(data, parse('x2*cos(x1)'))
        self.assertFalse(report.passed)
        self.assertGreater(report.upper_violation, 0.0)
