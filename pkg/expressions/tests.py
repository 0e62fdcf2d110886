import math

import numpy as np
from django.test import SimpleTestCase

from utils.exceptions import DomainError, ExpressionSyntaxError

from .calculus import differentiate, find_sign_changes
from .evaluation import evaluate
from .generators import random_expression
from .intervals import Interval, interval_evaluate
from .nodes import Binary, Const, Neg, Unary, Var
from .parser import parse, to_source
from .syntax_tree import decompose_to_syntax_tree


class ParserTest(SimpleTestCase):
    """Test parsing and printing of dynamics expressions"""

    def test_product_with_function(self):
        """Test a product of a variable and a function call"""
        self.assertEqual(parse('x4 * cos(x3)'), Binary('*', Var(4), Unary('cos', Var(3))))

    def test_constant(self):
        """Test a bare constant"""
        self.assertEqual(parse('0'), Const(0))

    def test_unary_minus_and_precedence(self):
        """Test unary minus binds tighter than addition"""
        expected = Binary('+', Neg(Var(1)), Binary('*', Const(0.1), Unary('sin', Var(3))))
        self.assertEqual(parse('-x1 + 0.1*sin(x3)'), expected)

    def test_left_associativity(self):
        """Test subtraction chains associate to the left"""
        self.assertEqual(parse('x1 - x2 - x3'), Binary('-', Binary('-', Var(1), Var(2)), Var(3)))

    def test_function_aliases(self):
        """Test arc-function spellings map to the canonical names"""
        self.assertEqual(parse('arctan(x1)'), parse('atan(x1)'))

    def test_named_constants(self):
        """Test config constants resolve to constant nodes"""
        self.assertEqual(parse('c1*x1', {'c1': 2.5}), Binary('*', Const(2.5), Var(1)))

    def test_syntax_error_position(self):
        """Test syntax errors carry the offending position"""
        with self.assertRaises(ExpressionSyntaxError) as ctx:
            parse('x1 + * x2')
        self.assertEqual(ctx.exception.position, 5)

    def test_unknown_function(self):
        """Test unknown function names are rejected"""
        with self.assertRaises(ExpressionSyntaxError):
            parse('sqrt(x1)')

    def test_bad_variable_index(self):
        """Test variable index zero and non-integer indices are rejected"""
        with self.assertRaises(ExpressionSyntaxError):
            parse('x0 + 1')
        with self.assertRaises(ExpressionSyntaxError):
            parse('x1.5')

    def test_unknown_constant(self):
        """Test an undeclared name is a syntax error"""
        with self.assertRaises(ExpressionSyntaxError):
            parse('c2*x1', {'c1': 1.0})

    def test_round_trip(self):
        """Test parse(to_source(e)) reproduces generated expressions"""
        rng = np.random.default_rng(7)
        for _ in range(300):
            expr = random_expression(rng, 5, variables=(1, 2, 3),
                                     functions=('sin', 'cos', 'tan', 'asin', 'acos', 'atan', 'exp', 'log'),
                                     operators=('+', '-', '*', '/'))
            self.assertEqual(parse(to_source(expr)), expr, to_source(expr))


class EvaluateTest(SimpleTestCase):
    """Test point evaluation"""

    def test_examples(self):
        """Test simple evaluations against hand-computed values"""
        self.assertEqual(evaluate(parse('cos(x1)'), [0.0]), 1.0)
        self.assertAlmostEqual(evaluate(parse('x4*cos(x3)'), [0, 0, 2.1, 1.5]), 1.5 * math.cos(2.1))
        self.assertEqual(evaluate(parse('x1+x2'), [2, 3]), 5.0)

    def test_vectorised(self):
        """Test evaluation over a batch of states"""
        values = evaluate(parse('x1*x2'), np.array([[1.0, 2.0], [3.0, 4.0]]))
        np.testing.assert_allclose(values, [2.0, 12.0])

    def test_domain_errors(self):
        """Test log and division domain errors"""
        with self.assertRaises(DomainError):
            evaluate(parse('log(x1)'), [0.0])
        with self.assertRaises(DomainError):
            evaluate(parse('1/x1'), [0.0])


class DifferentiateTest(SimpleTestCase):
    """Test symbolic differentiation"""

    def test_rules(self):
        """Test derivatives of elementary examples"""
        self.assertEqual(differentiate(parse('cos(x1)'), 1), Neg(Unary('sin', Var(1))))
        self.assertEqual(differentiate(differentiate(parse('sin(x1)'), 1), 1), Neg(Unary('sin', Var(1))))
        self.assertEqual(differentiate(parse('x1*exp(x1)'), 1), parse('exp(x1) + x1*exp(x1)'))

    def test_other_variable_is_constant(self):
        """Test differentiation with respect to an absent variable gives zero"""
        self.assertEqual(differentiate(parse('sin(x2)*x2'), 1), Const(0))

    def test_finite_difference_agreement(self):
        """Test derivatives against central finite differences"""
        rng = np.random.default_rng(11)
        h = 1e-6
        for _ in range(100):
            expr = random_expression(rng, 4, functions=('sin', 'cos', 'exp', 'atan'), operators=('+', '-', '*'))
            derivative = differentiate(expr, 1)
            points = rng.uniform(-1.5, 1.5, size=(100, 1))
            exact = evaluate(derivative, points)
            numeric = (evaluate(expr, points + h) - evaluate(expr, points - h)) / (2 * h)
            tolerance = 1e-4 * (1 + np.abs(exact))
            self.assertTrue(np.all(np.abs(exact - numeric) <= tolerance), to_source(expr))

    def test_inverse_trig(self):
        """Test asin, acos and tan derivatives numerically"""
        for source in ('asin(x1)', 'acos(0.5*x1)', 'tan(x1)', 'log(x1 + 2)'):
            expr = parse(source)
            derivative = differentiate(expr, 1)
            for x in (-0.4, 0.1, 0.7):
                numeric = (evaluate(expr, [x + 1e-6]) - evaluate(expr, [x - 1e-6])) / 2e-6
                self.assertAlmostEqual(evaluate(derivative, [x]), numeric, places=5)


class IntervalTest(SimpleTestCase):
    """Test interval evaluation"""

    def test_cos(self):
        """Test cos over a symmetric interval"""
        result = interval_evaluate(parse('cos(x1)'), [Interval(-1, 1)])
        self.assertLessEqual(result.lo, math.cos(1))
        self.assertGreaterEqual(result.hi, 1.0)

    def test_product(self):
        """Test four-corner product rule"""
        result = interval_evaluate(parse('x1*x2'), [Interval(-1, 1), Interval(-1, 1)])
        self.assertAlmostEqual(result.lo, -1.0)
        self.assertAlmostEqual(result.hi, 1.0)

    def test_zero_stays_zero(self):
        """Test outward inflation keeps an exact zero"""
        self.assertTrue(interval_evaluate(parse('0*x1'), [Interval(-3, 2)]).is_zero)

    def test_domain_error(self):
        """Test log over an interval reaching zero"""
        with self.assertRaises(DomainError):
            interval_evaluate(parse('log(x1)'), [Interval(-1, 1)])

    def test_repeated_factor_is_a_square(self):
        """Test x1*x1 over [-1, 1] is [0, 1] rather than the product [-1, 1]"""
        result = interval_evaluate(parse('x1*x1'), [Interval(-1, 1)])
        self.assertEqual(result.lo, 0.0)
        self.assertAlmostEqual(result.hi, 1.0)

    def test_powers(self):
        """Test even powers stay non-negative and odd powers keep their sign"""
        self.assertEqual((Interval(-2, 1) ** 2).lo, 0.0)
        self.assertAlmostEqual((Interval(-2, 1) ** 2).hi, 4.0)
        self.assertAlmostEqual((Interval(-3, -1) ** 2).lo, 1.0)
        cube = Interval(-3, 1) ** 3
        self.assertAlmostEqual(cube.lo, -27.0)
        self.assertAlmostEqual(cube.hi, 1.0)
        with self.assertRaises(ValueError):
            Interval(0, 1) ** 0.5

    def test_arctan_curvature_is_defined(self):
        """Test the second derivative of atan encloses over an interval around zero"""
        second = differentiate(differentiate(parse('atan(x1)'), 1), 1)
        for radius in (1.0, 10.0):
            result = interval_evaluate(second, [Interval(-radius, radius)])
            self.assertTrue(result.contains_zero())

    def test_sampled_soundness(self):
        """Test interval images contain sampled values of fuzzed expressions"""
        rng = np.random.default_rng(3)
        for _ in range(60):
            expr = random_expression(rng, 3, variables=(1, 2), functions=('sin', 'cos', 'exp', 'atan'))
            lows = rng.uniform(-2, 1, size=2)
            highs = lows + rng.uniform(0.01, 2, size=2)
            box = [Interval(lo, hi) for lo, hi in zip(lows, highs)]
            result = interval_evaluate(expr, box)
            samples = rng.uniform(lows, highs, size=(10_000, 2))
            values = evaluate(expr, samples)
            self.assertTrue(np.all(values >= result.lo) and np.all(values <= result.hi), to_source(expr))


class SignChangeTest(SimpleTestCase):
    """Test root isolation"""

    def test_examples(self):
        """Test roots of simple trigonometric expressions"""
        roots = find_sign_changes(parse('-sin(x1)'), Interval(-1, 1)).roots
        self.assertEqual(len(roots), 1)
        self.assertAlmostEqual(roots[0], 0.0, places=8)
        self.assertEqual(find_sign_changes(parse('-sin(x1)'), Interval(0.5, 1)).roots, [])
        roots = find_sign_changes(parse('-cos(x1)'), Interval(0, math.pi)).roots
        self.assertEqual(len(roots), 1)
        self.assertAlmostEqual(roots[0], math.pi / 2, places=8)

    def test_identically_zero(self):
        """Test a zero expression is flagged rather than rooted"""
        result = find_sign_changes(Const(0.0), Interval(0, 1))
        self.assertTrue(result.identically_zero)
        self.assertEqual(result.roots, [])

    def test_arctan_curvature_root(self):
        """Test the inflection of atan is found at zero on wide intervals"""
        second = differentiate(differentiate(parse('atan(x1)'), 1), 1)
        for radius in (1.0, 10.0):
            roots = find_sign_changes(second, Interval(-radius, radius)).roots
            self.assertEqual(len(roots), 1)
            self.assertAlmostEqual(roots[0], 0.0, places=8)

    def test_whole_range_enclosure_undefined(self):
        """Test a loose whole-range enclosure dividing by zero falls back to subdivision"""
        expr = parse('1 / (x1 - x1 + 1)')
        with self.assertRaises(DomainError):
            interval_evaluate(expr, [Interval(-1, 1)])
        self.assertEqual(find_sign_changes(expr, Interval(-1, 1)).roots, [])

    def test_roots_are_sign_changes(self):
        """Test every returned root is a small-residual sign change"""
        expr = parse('sin(3*x1) - 0.2')
        result = find_sign_changes(expr, Interval(-2, 2))
        self.assertEqual(len(result.roots), 3)
        for root in result.roots:
            self.assertLessEqual(abs(evaluate(expr, [root])), 1e-6 * 2)
            left = interval_evaluate(expr, [Interval(root - 1e-4, root - 1e-6)])
            right = interval_evaluate(expr, [Interval(root + 1e-6, root + 1e-4)])
            self.assertTrue((left.hi < 0 < right.lo) or (right.hi < 0 < left.lo))


class SyntaxTreeTest(SimpleTestCase):
    """Test decomposition into univariate leaves"""

    def test_product_leaves(self):
        """Test x4*cos(x3) splits into two leaves"""
        tree = decompose_to_syntax_tree(parse('x4 * cos(x3)'))
        self.assertEqual(tree.get_op(), '*')
        self.assertEqual(tree.get_arity(), 2)
        self.assertEqual([leaf.get_func() for leaf in tree.children], [Var(4), Unary('cos', Var(3))])

    def test_univariate_expression_is_one_leaf(self):
        """Test a univariate sum stays a single leaf"""
        tree = decompose_to_syntax_tree(parse('sin(x1) + x1*x1'))
        self.assertTrue(tree.is_leaf)

    def test_constant_leaf(self):
        """Test a constant is a single leaf"""
        tree = decompose_to_syntax_tree(parse('3'))
        self.assertTrue(tree.is_leaf)
        self.assertIsNone(tree.variable)

    def test_chain_flattening_and_reassembly(self):
        """Test left chains flatten and reassemble to the source"""
        rng = np.random.default_rng(5)
        tree = decompose_to_syntax_tree(parse('sin(x1) + x2 + cos(x3) * x1'))
        self.assertEqual(tree.get_op(), '+')
        self.assertEqual(tree.get_arity(), 3)
        for _ in range(100):
            expr = random_expression(rng, 5, variables=(1, 2, 3))
            tree = decompose_to_syntax_tree(expr)
            self.assertEqual(tree.reassemble(), expr)
            for leaf in tree.leaves():
                self.assertLessEqual(len(leaf.get_func().free_vars), 1)
