"""
Piecewise-linear lower and upper bounds of univariate functions.

[a, b] is split where the second derivative changes sign. On a convex piece
chords through optimised breakpoints bound the function from above and a
polyline of tangents bounds it from below; concave pieces swap the roles.
A piece whose curvature cannot be settled is bounded by interval hulls.
"""
import logging
from dataclasses import dataclass

import numpy as np
from scipy.integrate import trapezoid
from scipy.optimize import minimize_scalar

from enclosures.bounding_set import BoundingSet
from expressions.calculus import differentiate, find_sign_changes, neg
from expressions.evaluation import evaluate
from expressions.intervals import Interval, interval_evaluate
from expressions.nodes import Const
from triangulation.point_sets import merge_axes
from utils.conf import verifier_settings
from utils.exceptions import DomainError

logger = logging.getLogger(__name__)

CONVEX = 'convex'
CONCAVE = 'concave'
LINEAR = 'linear'
# f'' changes sign inside the piece without an isolated root
MIXED = 'mixed'

UPPER = 'upper'
LOWER = 'lower'

MIN_PIECE_WIDTH = 1e-8
SLOPE_TOL = 1e-12
BREAKPOINT_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class PwlBound:
    """The piecewise-linear function through (breakpoints[i], values[i])."""
    breakpoints: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        breakpoints = np.asarray(self.breakpoints, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if breakpoints.ndim != 1 or breakpoints.size < 2 or breakpoints.shape != values.shape:
            raise ValueError('A piecewise-linear bound needs matching breakpoint and value lists of length >= 2')
        if np.any(np.diff(breakpoints) <= 0):
            raise ValueError('Breakpoints must be strictly increasing')
        if not np.all(np.isfinite(values)):
            raise ValueError('Bound values must be finite')
        object.__setattr__(self, 'breakpoints', breakpoints)
        object.__setattr__(self, 'values', values)

    def __call__(self, x):
        return np.interp(x, self.breakpoints, self.values)

    def negated(self):
        return PwlBound(self.breakpoints, -self.values)

    def __len__(self):
        return len(self.breakpoints)


@dataclass(frozen=True)
class ConvexityPartition:
    endpoints: tuple
    tags: tuple

    @property
    def pieces(self):
        return [(self.endpoints[i], self.endpoints[i + 1], tag) for i, tag in enumerate(self.tags)]

    def __len__(self):
        return len(self.tags)


def _variable_of(f, variable=None):
    if f.free_vars:
        return f.free_vars[0]
    return variable or 1


def _at(f, var, xs):
    """Evaluate a univariate expression on a 1-D array of abscissae."""
    xs = np.atleast_1d(np.asarray(xs, dtype=float))
    states = np.zeros((xs.size, var))
    states[:, var - 1] = xs
    return evaluate(f, states)


def convexity_partition(f, a, b, root_tol=None):
    """
    Split [a, b] into pieces on which f'' keeps one sign. Roots of f'' closer
    than MIN_PIECE_WIDTH to each other or to an end are merged away.
    """
    if not a < b:
        raise ValueError(f'Empty interval [{a}, {b}]')
    if not f.free_vars:
        return ConvexityPartition((a, b), (LINEAR,))
    var = f.free_vars[0]
    second = differentiate(differentiate(f, var), var)
    if isinstance(second, Const) and second.value == 0.0:
        return ConvexityPartition((a, b), (LINEAR,))
    root_tol = root_tol or verifier_settings.ENCLOSURE['ROOT_TOL']
    changes = find_sign_changes(second, Interval(a, b), tol=root_tol)
    if changes.identically_zero:
        return ConvexityPartition((a, b), (LINEAR,))

    roots = _merge_roots(changes.roots, a, b)
    endpoints = [a, *roots, b]
    tags = [_piece_tag(second, var, endpoints[i], endpoints[i + 1]) for i in range(len(endpoints) - 1)]

    merged_ends, merged_tags = [endpoints[0]], []
    for hi, tag in zip(endpoints[1:], tags):
        if merged_tags and merged_tags[-1] == tag:
            merged_ends[-1] = hi
        else:
            merged_ends.append(hi)
            merged_tags.append(tag)
    logger.debug('Convexity partition of %s on [%g, %g]: %s', f, a, b, merged_tags)
    return ConvexityPartition(tuple(merged_ends), tuple(merged_tags))


def _merge_roots(roots, a, b):
    clusters = []
    for root in sorted(roots):
        if clusters and root - clusters[-1][-1] < MIN_PIECE_WIDTH:
            clusters[-1].append(root)
        else:
            clusters.append([root])
    merged = [float(np.mean(c)) for c in clusters]
    return [r for r in merged if a + MIN_PIECE_WIDTH < r < b - MIN_PIECE_WIDTH]


def _piece_tag(second, var, lo, hi):
    try:
        image = interval_evaluate(second, {var: Interval(lo, hi)})
    except DomainError:
        image = None
    if image is not None:
        if image.is_zero:
            return LINEAR
        if image.lo >= 0:
            return CONVEX
        if image.hi <= 0:
            return CONCAVE
    samples = _at(second, var, lo + (hi - lo) * np.arange(1, 6) / 6)
    if np.all(samples == 0):
        return LINEAR
    if np.all(samples >= 0):
        return CONVEX
    if np.all(samples <= 0):
        return CONCAVE
    logger.warning("Second derivative changes sign inside [%g, %g] without an isolated root; "
                   "using interval hull bounds", lo, hi)
    return MIXED


def bound_convex_piece(f, piece, k, side, convexity=CONVEX, rounds=None, nodes=None):
    """
    One-sided bound of f on `piece` with `k` segments. For a convex f the
    upper side is a chord polyline and the lower side a tangent polyline;
    a concave f is handled by mirroring, a linear one gets its chord and a
    mixed one the hull polyline.
    """
    lo, hi = (piece.lo, piece.hi) if isinstance(piece, Interval) else piece
    if k < 1:
        raise ValueError('Division count must be at least 1')
    if side not in (UPPER, LOWER):
        raise ValueError(f'Unknown bound side {side!r}')
    var = _variable_of(f)
    if convexity == LINEAR or not f.free_vars:
        return PwlBound([lo, hi], _at(f, var, [lo, hi]))
    if convexity == MIXED:
        return _hull_bound(f, var, lo, hi, k, side)
    if convexity == CONCAVE:
        mirrored = bound_convex_piece(neg(f), (lo, hi), k, LOWER if side == UPPER else UPPER,
                                      CONVEX, rounds, nodes)
        return mirrored.negated()
    if side == UPPER:
        return _chord_bound(f, var, lo, hi, k, rounds, nodes)
    return _tangent_bound(f, var, lo, hi, k)


def _chord_bound(f, var, lo, hi, k, rounds=None, nodes=None):
    """
    Chords through k+1 breakpoints. Interior breakpoints move by coordinate
    descent, one bounded scalar minimisation each, on the trapezoid-rule
    area between the chords and f.
    """
    rounds = verifier_settings.ENCLOSURE['DESCENT_ROUNDS'] if rounds is None else rounds
    nodes = nodes or verifier_settings.ENCLOSURE['QUADRATURE_NODES']
    s = np.linspace(lo, hi, k + 1)
    width = hi - lo
    gap = 1e-9 * width

    def local_area(left, x, right):
        total = 0.0
        for a, b in ((left, x), (x, right)):
            grid = np.linspace(a, b, nodes)
            values = _at(f, var, grid)
            chord = np.interp(grid, [a, b], [values[0], values[-1]])
            total += trapezoid(chord - values, grid)
        return total

    for round_no in range(rounds):
        moved = 0.0
        for i in range(1, k):
            left, right = s[i - 1] + gap, s[i + 1] - gap
            if right <= left:
                continue
            current = local_area(s[i - 1], s[i], s[i + 1])
            result = minimize_scalar(lambda x: local_area(s[i - 1], x, s[i + 1]),
                                     bounds=(left, right), method='bounded',
                                     options={'xatol': 1e-10 * width})
            if result.fun < current:
                moved = max(moved, abs(result.x - s[i]))
                s[i] = result.x
        if moved <= 1e-12 * width:
            logger.debug('Chord descent converged after %d rounds', round_no + 1)
            break
    return PwlBound(s, _at(f, var, s))


def _hull_bound(f, var, lo, hi, k, side):
    """
    Polyline through the interval hulls of f on k equal sub-pieces. Each
    breakpoint takes the lower (upper) hull end of its neighbouring
    sub-pieces that is furthest out, so every segment stays on the safe side
    of its own hull.
    """
    s = np.linspace(lo, hi, k + 1)
    hulls = [interval_evaluate(f, {var: Interval(a, b)}) for a, b in zip(s[:-1], s[1:])]
    ends = np.array([h.lo if side == LOWER else h.hi for h in hulls])
    pick = np.minimum if side == LOWER else np.maximum
    values = np.concatenate([ends[:1], pick(ends[:-1], ends[1:]), ends[-1:]])
    return PwlBound(s, values)


def _tangent_bound(f, var, lo, hi, k):
    """
    Tangents at max(k, 2) evenly spaced points including both ends; the
    bound runs through consecutive tangent intersections.
    """
    derivative = differentiate(f, var)
    points = np.linspace(lo, hi, max(k, 2))
    values = _at(f, var, points)
    slopes = _at(derivative, var, points)
    if slopes[-1] - slopes[0] <= SLOPE_TOL * (1.0 + np.max(np.abs(slopes))):
        return PwlBound([lo, hi], values[[0, -1]])

    kept = [0]
    for j in range(1, len(points)):
        if slopes[j] - slopes[kept[-1]] > SLOPE_TOL * (1.0 + abs(slopes[j])):
            kept.append(j)
        elif j == len(points) - 1:
            kept[-1] = j
    if kept[0] != 0:
        kept.insert(0, 0)

    breakpoints, bound_values = [lo], [values[0]]
    for i, j in zip(kept[:-1], kept[1:]):
        p_i, p_j = points[i], points[j]
        x = (values[j] - values[i] + slopes[i] * p_i - slopes[j] * p_j) / (slopes[i] - slopes[j])
        x = min(max(x, p_i), p_j)
        value = min(values[i] + slopes[i] * (x - p_i), values[j] + slopes[j] * (x - p_j))
        if x - breakpoints[-1] <= BREAKPOINT_TOL * max(1.0, abs(x)):
            bound_values[-1] = min(bound_values[-1], value)
            continue
        breakpoints.append(x)
        bound_values.append(value)
    if hi - breakpoints[-1] <= BREAKPOINT_TOL * max(1.0, abs(hi)):
        breakpoints.pop()
        bound_values.pop()
    breakpoints.append(hi)
    bound_values.append(values[-1])
    return PwlBound(breakpoints, bound_values)


def bound_univariate(f, a, b, k=None, variable=None, inflation=None):
    """
    1-D bounding set of f on [a, b]: per-piece bounds stitched together on
    the union of their breakpoints, then widened by the safety inflation.
    """
    k = k or verifier_settings.ENCLOSURE['DIVISIONS']
    inflation = verifier_settings.ENCLOSURE['INFLATION'] if inflation is None else inflation
    var = _variable_of(f, variable)
    partition = convexity_partition(f, a, b)

    bounds = []
    for lo, hi, tag in partition.pieces:
        if hi - lo < MIN_PIECE_WIDTH:
            bounds.append((lo, hi, _hull_bound(f, var, lo, hi, 1, LOWER), _hull_bound(f, var, lo, hi, 1, UPPER)))
            continue
        lower = bound_convex_piece(f, (lo, hi), k, LOWER, tag)
        upper = bound_convex_piece(f, (lo, hi), k, UPPER, tag)
        bounds.append((lo, hi, lower, upper))

    grid = merge_axes(*[np.concatenate([lower.breakpoints, upper.breakpoints]) for _, _, lower, upper in bounds])
    lows = np.full(grid.size, np.inf)
    highs = np.full(grid.size, -np.inf)
    for lo, hi, lower, upper in bounds:
        tol = BREAKPOINT_TOL * max(1.0, abs(lo), abs(hi))
        inside = (grid >= lo - tol) & (grid <= hi + tol)
        lows[inside] = np.minimum(lows[inside], lower(grid[inside]))
        highs[inside] = np.maximum(highs[inside], upper(grid[inside]))

    epsilon = inflation * (1.0 + float(np.max(np.abs(_at(f, var, grid)))))
    logger.debug('Bounded %s on [%g, %g] with %d pieces, %d grid points', f, a, b, len(partition), grid.size)
    return BoundingSet.from_axes((var,), [grid], lows - epsilon, highs + epsilon)


def total_gap(bounding_set, xs):
    """Sum of U - L of a 1-D bounding set over the abscissae xs."""
    lower, upper = bounding_set.evaluate_bounds(np.asarray(xs, dtype=float).reshape(-1, 1))
    return float(np.sum(upper - lower))
