"""
Bounding sets for multivariate expressions, built bottom-up over the
syntax tree, and the sampling check used to validate them.
"""
import logging
from collections.abc import Mapping
from dataclasses import dataclass

import numpy as np

from expressions.evaluation import evaluate
from expressions.intervals import Interval
from expressions.nodes import Expr
from expressions.syntax_tree import SyntaxTree, decompose_to_syntax_tree
from triangulation.point_sets import merge_axes
from univariate.bounds import bound_univariate
from utils.exceptions import BoundingSetError

from .bounding_set import BoundingSet
from .operations import COMPOSE_OPERATORS, compose, conform

logger = logging.getLogger(__name__)


def _normalise_box(box):
    if isinstance(box, Mapping):
        items = box.items()
    else:
        items = enumerate(box, start=1)
    normalised = {}
    for var, bounds in items:
        lo, hi = (bounds.lo, bounds.hi) if isinstance(bounds, Interval) else bounds
        if not lo < hi:
            raise BoundingSetError(f'Box for x{var} is empty: [{lo}, {hi}]')
        normalised[int(var)] = (float(lo), float(hi))
    return normalised


def _constant_value(expr):
    return evaluate(expr, np.zeros(1))


def bound_expression(tree, box, k=None, inflation=None):
    """
    Enclose the expression behind `tree` (a SyntaxTree or an Expr) over
    `box`, a {variable: (lo, hi)} mapping or a sequence indexed by
    variable - 1.

    Leaves are bounded one variable at a time. Their breakpoints are merged
    into one axis per variable before composing, so every alignment is an
    exact extension of a set along axes it does not depend on. A constant
    expression gets the corner grid of the whole box.
    """
    if isinstance(tree, Expr):
        tree = decompose_to_syntax_tree(tree)
    box = _normalise_box(box)
    variables = sorted(tree.func.free_vars)
    missing = [v for v in variables if v not in box]
    if missing:
        raise BoundingSetError(f'Box does not cover x{missing[0]}')

    if not variables:
        if not box:
            raise BoundingSetError('A constant needs a non-empty box to live on')
        corner = sorted(box)
        value = _constant_value(tree.func)
        return BoundingSet.constant(value, corner, [list(box[v]) for v in corner])

    leaf_sets = {}
    for leaf in tree.leaves():
        if leaf.variable is None or leaf.func in leaf_sets:
            continue
        lo, hi = box[leaf.variable]
        leaf_sets[leaf.func] = bound_univariate(leaf.func, lo, hi, k=k, variable=leaf.variable, inflation=inflation)

    axes = {}
    for v in variables:
        axes[v] = merge_axes(*[b.axes[0] for b in leaf_sets.values() if b.variables == (v,)])
    for func, leaf_set in leaf_sets.items():
        leaf_sets[func] = conform(leaf_set, list(leaf_set.variables), axes)

    def combine(left, right, op):
        if not isinstance(left, BoundingSet) and not isinstance(right, BoundingSet):
            return _scalar(left, right, op)
        if not isinstance(left, BoundingSet):
            left = BoundingSet.constant(left, right.variables, right.axes)
        if not isinstance(right, BoundingSet):
            right = BoundingSet.constant(right, left.variables, left.axes)
        target = sorted(set(left.variables) | set(right.variables))
        return compose(conform(left, target, axes), conform(right, target, axes), op)

    def visit(node):
        if node.is_leaf:
            if node.variable is None:
                return _constant_value(node.func)
            return leaf_sets[node.func]
        if node.op == 'neg':
            child = visit(node.children[0])
            return child.negated() if isinstance(child, BoundingSet) else -child
        if node.op not in COMPOSE_OPERATORS:
            raise BoundingSetError(f'Unsupported operator {node.op!r} over {node.func}')
        result = visit(node.children[0])
        for child in node.children[1:]:
            result = combine(result, visit(child), node.op)
        return result

    result = visit(tree)
    if not isinstance(result, BoundingSet):
        result = BoundingSet.constant(result, variables, [list(box[v]) for v in variables])
    result = conform(result, variables, axes)
    logger.debug('Bounded %s over %s: grid %s', tree.func, variables, result.shape)
    return result


def _scalar(left, right, op):
    if op == '+':
        return left + right
    if op == '-':
        return left - right
    if op == '*':
        return left * right
    if right == 0:
        raise BoundingSetError('Division by a constant zero')
    return left / right


@dataclass
class EnclosureReport:
    samples: int
    lower_violation: float
    upper_violation: float
    worst_point: tuple = None

    @property
    def max_violation(self):
        return max(self.lower_violation, self.upper_violation)

    @property
    def passed(self):
        return self.max_violation <= 0.0


def check_enclosure_sampled(bounding_set, f, samples=10_000, rng=None, tol=1e-9):
    """
    Sample the domain (grid points included) and measure how far f leaves
    the interpolated bounds, beyond `tol`. Violations are reported, not
    raised.
    """
    if isinstance(f, SyntaxTree):
        f = f.func
    extra = [v for v in f.free_vars if v not in bounding_set.variables]
    if extra:
        raise BoundingSetError(f'Expression uses x{extra[0]} which the bounding set does not cover')
    rng = rng if rng is not None else np.random.default_rng(0)
    lows = np.array([a[0] for a in bounding_set.axes])
    highs = np.array([a[-1] for a in bounding_set.axes])
    xs = np.vstack([rng.uniform(lows, highs, size=(samples, bounding_set.dimension)),
                    bounding_set.point_set.points])
    width = max(max(bounding_set.variables), max(f.free_vars, default=0))
    states = np.zeros((len(xs), width))
    states[:, [v - 1 for v in bounding_set.variables]] = xs
    values = evaluate(f, states)
    lower, upper = bounding_set.evaluate_bounds(xs)
    below = lower - tol - values
    above = values - upper - tol
    worst = int(np.argmax(np.maximum(below, above)))
    report = EnclosureReport(len(xs), float(max(np.max(below), 0.0)), float(max(np.max(above), 0.0)),
                             tuple(xs[worst].tolist()))
    if not report.passed:
        logger.warning('Enclosure check failed: violation %g at %s', report.max_violation, report.worst_point)
    return report
