import itertools
import logging
import shutil

import numpy as np
from django.test import SimpleTestCase
from scipy.optimize import Bounds, LinearConstraint, linprog, milp

from milp.model import GE, LE, MAXIMIZE, MINIMIZE, MilpModel
from utils.exceptions import SolutionParseError, SolverConfigurationError

from .backends import solve
from .branch_and_bound import INFEASIBLE_STATUS, OPTIMAL, TIME_LIMIT, solve_milp
from .external import parse_solution, solve_external
from .lp_format import export_lp_text
from .simplex import INFEASIBLE, UNBOUNDED, solve_lp

logger = logging.getLogger(__name__)


def dense_model(c, a_ub, b_ub, lb, ub, sense=MAXIMIZE, binaries=()):
    """A model over x0, x1, ... from dense arrays."""
    model = MilpModel('dense')
    for j in range(len(c)):
        if j in binaries:
            model.add_binary(f'x{j}')
        else:
            model.add_variable(f'x{j}', lb[j], ub[j])
    for row, rhs in zip(a_ub, b_ub):
        model.add_constraint(dict(enumerate(row)), LE, rhs)
    model.set_objective(dict(enumerate(c)), sense)
    return model


def random_lp(rng, max_vars=8, max_rows=12):
    n = int(rng.integers(2, max_vars + 1))
    m = int(rng.integers(1, max_rows + 1))
    c = rng.uniform(-3, 3, n)
    a = rng.uniform(-2, 3, (m, n))
    b = rng.uniform(0.5, 5, m)
    lb = rng.uniform(-1, 0, n)
    ub = rng.uniform(0.5, 3, n)
    return c, a, b, lb, ub


def vertex_enumeration_max(c, a, b, lb, ub):
    """Best objective over all basic feasible points of a small LP."""
    n = len(c)
    rows = np.vstack([a, np.eye(n), -np.eye(n)])
    rhs = np.concatenate([b, ub, -lb])
    best = -np.inf
    for active in itertools.combinations(range(len(rows)), n):
        sub = rows[list(active)]
        if abs(np.linalg.det(sub)) < 1e-10:
            continue
        x = np.linalg.solve(sub, rhs[list(active)])
        if np.all(rows @ x <= rhs + 1e-9):
            best = max(best, float(c @ x))
    return best


class SolveLpTest(SimpleTestCase):
    """Test the simplex LP solver"""

    def test_single_bound(self):
        """Test max x with x <= 3 is 3"""
        model = MilpModel()
        x = model.add_variable('x')
        model.add_constraint({x: 1.0}, LE, 3.0)
        model.set_objective({x: 1.0}, MAXIMIZE)
        result = solve_lp(model)
        self.assertTrue(result.is_optimal)
        self.assertAlmostEqual(result.objective, 3.0, places=9)

    def test_simplex_corner(self):
        """Test max x + y with x + y <= 1 is 1"""
        model = MilpModel()
        x, y = model.add_variable('x'), model.add_variable('y')
        model.add_constraint({x: 1.0, y: 1.0}, LE, 1.0)
        model.set_objective({x: 1.0, y: 1.0}, MAXIMIZE)
        self.assertAlmostEqual(solve_lp(model).objective, 1.0, places=9)

    def test_infeasible(self):
        """Test x <= -1 with x >= 0 is infeasible"""
        model = MilpModel()
        x = model.add_variable('x')
        model.add_constraint({x: 1.0}, LE, -1.0)
        model.set_objective({x: 1.0})
        self.assertEqual(solve_lp(model).status, INFEASIBLE)

    def test_unbounded(self):
        """Test an unbounded ray is reported"""
        model = MilpModel()
        x, y = model.add_variable('x'), model.add_variable('y')
        model.add_constraint({x: 1.0, y: -1.0}, LE, 1.0)
        model.set_objective({x: 1.0}, MAXIMIZE)
        self.assertEqual(solve_lp(model).status, UNBOUNDED)

    def test_free_and_upper_only_variables(self):
        """Test free and upper-bounded variables are handled"""
        model = MilpModel()
        x = model.add_variable('x', -np.inf, np.inf)
        y = model.add_variable('y', -np.inf, 2.0)
        model.add_constraint({x: 1.0, y: 1.0}, GE, -4.0)
        model.add_constraint({x: 1.0}, LE, 5.0)
        model.set_objective({x: 2.0, y: 1.0}, MINIMIZE)
        result = solve_lp(model)
        oracle = linprog([2, 1], A_ub=[[-1, -1], [1, 0]], b_ub=[4, 5], bounds=[(None, None), (None, 2)])
        self.assertAlmostEqual(result.objective, oracle.fun, places=7)

    def test_random_lps_match_vertex_enumeration(self):
        """Test random small LPs match brute-force vertex enumeration"""
        rng = np.random.default_rng(11)
        for _ in range(40):
            c, a, b, lb, ub = random_lp(rng, max_vars=4, max_rows=6)
            result = solve_lp(dense_model(c, a, b, lb, ub))
            expected = vertex_enumeration_max(c, a, b, lb, ub)
            if not np.isfinite(expected):
                self.assertEqual(result.status, INFEASIBLE)
                continue
            self.assertTrue(result.is_optimal)
            self.assertAlmostEqual(result.objective, expected, places=6)

    def test_random_lps_match_linprog(self):
        """Test random LPs agree with scipy's linprog"""
        rng = np.random.default_rng(12)
        for _ in range(40):
            c, a, b, lb, ub = random_lp(rng)
            model = dense_model(c, a, b, lb, ub, MINIMIZE)
            result = solve_lp(model)
            oracle = linprog(c, A_ub=a, b_ub=b, bounds=list(zip(lb, ub)), method='highs')
            if oracle.status == 2:
                self.assertEqual(result.status, INFEASIBLE)
                continue
            self.assertAlmostEqual(result.objective, oracle.fun, places=6)
            self.assertLessEqual(model.check_assignment(result.x), 1e-7)

    def test_complementary_slackness(self):
        """Test primal values and reduced costs are complementary at optimality"""
        rng = np.random.default_rng(13)
        for _ in range(30):
            c, a, b, lb, ub = random_lp(rng)
            result = solve_lp(dense_model(c, a, b, lb, ub))
            if not result.is_optimal:
                continue
            self.assertTrue(np.all(result.reduced_costs >= -1e-6))
            self.assertLessEqual(float(np.max(np.abs(result.standard_x * result.reduced_costs))), 1e-6)

    def test_deterministic(self):
        """Test the same model gives identical pivots and bits"""
        c, a, b, lb, ub = random_lp(np.random.default_rng(14))
        first = solve_lp(dense_model(c, a, b, lb, ub))
        second = solve_lp(dense_model(c, a, b, lb, ub))
        self.assertEqual(first.pivots, second.pivots)
        np.testing.assert_array_equal(first.x, second.x)


class SolveMilpTest(SimpleTestCase):
    """Test branch and bound"""

    def test_without_binaries_equals_lp(self):
        """Test a model with no binaries solves to its LP optimum"""
        c, a, b, lb, ub = random_lp(np.random.default_rng(21))
        model = dense_model(c, a, b, lb, ub)
        lp = solve_lp(model)
        result = solve_milp(model)
        if lp.is_optimal:
            self.assertEqual(result.status, OPTIMAL)
            self.assertAlmostEqual(result.objective, lp.objective, places=9)

    def test_knapsack(self):
        """Test max 3a + 2b with a + b <= 1 over binaries is 3"""
        model = MilpModel('knapsack')
        a, b = model.add_binary('a'), model.add_binary('b')
        model.add_constraint({a: 1.0, b: 1.0}, LE, 1.0)
        model.set_objective({a: 3.0, b: 2.0}, MAXIMIZE)
        result = solve_milp(model)
        self.assertEqual(result.status, OPTIMAL)
        self.assertAlmostEqual(result.objective, 3.0, places=9)
        np.testing.assert_allclose(result.x, [1.0, 0.0])

    def test_infeasible(self):
        """Test x <= -1 with x >= 0 is infeasible"""
        model = MilpModel()
        x = model.add_variable('x')
        model.add_binary('b')
        model.add_constraint({x: 1.0}, LE, -1.0)
        model.set_objective({x: 1.0})
        self.assertEqual(solve_milp(model).status, INFEASIBLE_STATUS)

    def test_matches_enumeration(self):
        """Test pure binary programs match exhaustive enumeration"""
        rng = np.random.default_rng(22)
        for _ in range(100):
            k = int(rng.integers(2, 11))
            c = rng.uniform(-2, 4, k)
            a = rng.uniform(0, 3, (3, k))
            b = rng.uniform(1, 2 * k, 3)
            model = dense_model(c, a, b, None, None, binaries=range(k))
            best = max(
                (float(c @ np.array(bits)) for bits in itertools.product((0, 1), repeat=k)
                 if np.all(a @ np.array(bits) <= b + 1e-9)),
                default=None,
            )
            result = solve_milp(model, mip_gap=0.0)
            self.assertEqual(result.status, OPTIMAL)
            self.assertAlmostEqual(result.objective, best, places=6)
            self.assertGreaterEqual(result.bound, best - 1e-9)

    def test_mixed_programs_match_scipy(self):
        """Test mixed programs agree with scipy's milp"""
        rng = np.random.default_rng(23)
        for _ in range(20):
            c, a, b, lb, ub = random_lp(rng)
            k = min(3, len(c))
            binaries = range(k)
            model = dense_model(c, a, b, lb, ub, binaries=binaries)
            lb, ub = model.bounds()
            integrality = np.array([1 if j in binaries else 0 for j in range(len(c))])
            oracle = milp(-c, constraints=LinearConstraint(a, -np.inf, b),
                          bounds=Bounds(lb, ub), integrality=integrality)
            result = solve_milp(model, mip_gap=0.0)
            if oracle.status == 2:
                self.assertEqual(result.status, INFEASIBLE_STATUS)
                continue
            self.assertAlmostEqual(result.objective, -oracle.fun, places=6)

    def test_time_limit_keeps_a_valid_bound(self):
        """Test a solve cut off after the root still bounds the optimum"""
        rng = np.random.default_rng(24)
        c = rng.uniform(1, 4, 10)
        a = rng.uniform(1, 3, (2, 10))
        b = np.array([7.5, 6.5])
        model = dense_model(c, a, b, None, None, binaries=range(10))
        best = max(float(c @ np.array(bits)) for bits in itertools.product((0, 1), repeat=10)
                   if np.all(a @ np.array(bits) <= b))
        result = solve_milp(model, time_limit=0.0)
        self.assertIn(result.status, (OPTIMAL, TIME_LIMIT))
        self.assertGreaterEqual(result.outer_value(), best - 1e-9)

    def test_bound_never_below_optimum_with_gap(self):
        """Test a loose gap still reports a valid upper bound"""
        rng = np.random.default_rng(25)
        c = rng.uniform(1, 4, 8)
        a = rng.uniform(1, 3, (2, 8))
        model = dense_model(c, a, [5.0, 5.0], None, None, binaries=range(8))
        best = max(float(c @ np.array(bits)) for bits in itertools.product((0, 1), repeat=8)
                   if np.all(a @ np.array(bits) <= 5.0))
        result = solve_milp(model, mip_gap=0.2)
        self.assertGreaterEqual(result.bound, best - 1e-9)
        self.assertLessEqual(result.objective, best + 1e-9)


class ExportLpTextTest(SimpleTestCase):
    """Test LP-format export"""

    def test_empty_model(self):
        """Test an empty model is a header and End"""
        text = export_lp_text(MilpModel('empty'))
        self.assertTrue(text.startswith('\\ Model empty\nMinimize'))
        self.assertTrue(text.rstrip().endswith('End'))
        self.assertNotIn('Bounds', text)

    def test_single_constraint(self):
        """Test x <= 3 is written as c1 under Subject To"""
        model = MilpModel()
        x = model.add_variable('x')
        model.add_constraint({x: 1.0}, LE, 3.0)
        model.set_objective({x: 1.0}, MAXIMIZE)
        lines = export_lp_text(model).splitlines()
        subject = lines.index('Subject To')
        self.assertEqual(lines[subject + 1], ' c1: x <= 3')
        self.assertIn(' obj: x', lines)
        self.assertIn('Maximize', lines)

    def test_coefficients_and_sections(self):
        """Test coefficient printing, bounds and binaries"""
        model = MilpModel()
        x = model.add_variable('x', -1.0, 2.5)
        y = model.add_variable('y', -np.inf, np.inf)
        z = model.fixed('z', 0.1)
        b = model.add_binary('b')
        model.add_constraint({x: -1.0, y: 0.1, b: 2.0}, GE, -3.0, 'mix')
        model.set_objective({x: 1.0, z: -1.0})
        lines = export_lp_text(model).splitlines()
        self.assertIn(' mix: - x + 0.10000000000000001 y + 2 b >= -3', lines)
        self.assertIn(' -1 <= x <= 2.5', lines)
        self.assertIn(' y free', lines)
        self.assertIn(' z = 0.10000000000000001', lines)
        self.assertEqual(lines[lines.index('Binaries') + 1], ' b')

    def test_long_rows_wrap(self):
        """Test long expressions are split over continuation lines"""
        model = MilpModel()
        indices = [model.add_variable(f'v{j}') for j in range(20)]
        model.add_constraint({j: 1.0 for j in indices}, LE, 1.0)
        text = export_lp_text(model)
        self.assertIn('\n   + v8', text)


class ExternalSolverTest(SimpleTestCase):
    """Test the external solver adapter"""

    def knapsack(self):
        model = MilpModel('knapsack')
        a, b = model.add_binary('a'), model.add_binary('b')
        model.add_constraint({a: 1.0, b: 1.0}, LE, 1.0)
        model.set_objective({a: 3.0, b: 2.0}, MAXIMIZE)
        return model

    def test_missing_binary(self):
        """Test a solver missing from PATH is a configuration error"""
        with self.assertRaises(SolverConfigurationError):
            solve_external(self.knapsack(), solver_cmd='no-such-solver-binary {lp} {sol}')

    def test_parse_solution(self):
        """Test a CBC solution file is read into an assignment"""
        text = ('Optimal - objective value 3.00000000\n'
                '      0 a                      1                       -3\n'
                '**    1 b                      0                       -2\n')
        status, x = parse_solution(text, self.knapsack())
        self.assertEqual(status, OPTIMAL)
        np.testing.assert_allclose(x, [1.0, 0.0])

    def test_parse_infeasible(self):
        """Test solver-reported infeasibility maps to the infeasible status"""
        status, _ = parse_solution('Infeasible - objective value 0.00000000\n', self.knapsack())
        self.assertEqual(status, INFEASIBLE_STATUS)

    def test_malformed_solution(self):
        """Test a malformed line is reported with its line number"""
        text = 'Optimal - objective value 3\n      0 a 1 0\n  garbage\n'
        with self.assertRaises(SolutionParseError) as ctx:
            parse_solution(text, self.knapsack())
        self.assertEqual(ctx.exception.line_number, 3)

    def test_unknown_header(self):
        """Test an unrecognised status line is a parse error"""
        with self.assertRaises(SolutionParseError) as ctx:
            parse_solution('Something else\n', self.knapsack())
        self.assertEqual(ctx.exception.line_number, 1)

    def test_unknown_backend(self):
        """Test an unknown backend name is rejected"""
        with self.assertRaises(SolverConfigurationError):
            solve(self.knapsack(), None, {'BACKEND': 'gurobi'})

    def test_agrees_with_builtin(self):
        """Test CBC and the built-in solver agree on fuzzed models"""
        if shutil.which('cbc') is None:
            logger.info('cbc not on PATH, skipping the external cross-check')
            self.skipTest('cbc not on PATH')
        rng = np.random.default_rng(31)
        for _ in range(20):
            c, a, b, lb, ub = random_lp(rng)
            model = dense_model(c, a, b, lb, ub, binaries=range(min(3, len(c))))
            builtin = solve(model, None, {'BACKEND': 'builtin', 'MIP_GAP': 0.0})
            external = solve(model, None, {'BACKEND': 'external'})
            self.assertEqual(builtin.status, external.status)
            if builtin.status == OPTIMAL:
                self.assertAlmostEqual(builtin.objective, external.objective, places=6)
