"""
Lifting, gridded interpolation, domain alignment and composition of
bounding sets.
"""
import itertools
import logging
from dataclasses import dataclass

import numpy as np

from triangulation.point_sets import AXIS_TOL, PointSet, merge_axes
from utils.exceptions import BoundingSetError

from .bounding_set import BoundingSet

logger = logging.getLogger(__name__)

COMPOSE_OPERATORS = ('+', '-', '*', '/')


@dataclass(frozen=True)
class LiftSpec:
    """
    Lift a k-dimensional bounding set into `dimension` dimensions. Its axes
    land on the 1-based target positions `indices`; every other position i
    gets the two-value axis {lower_pad[i], upper_pad[i]}. `variables`
    names the target axes and defaults to 1..dimension.
    """
    dimension: int
    indices: tuple
    lower_pad: tuple
    upper_pad: tuple
    variables: tuple = None

    def __post_init__(self):
        indices = tuple(int(i) for i in self.indices)
        if list(indices) != sorted(set(indices)) or not indices:
            raise BoundingSetError(f'Lift indices must be strictly increasing, got {indices}')
        if indices[0] < 1 or indices[-1] > self.dimension:
            raise BoundingSetError(f'Lift indices {indices} fall outside 1..{self.dimension}')
        if self.dimension <= len(indices):
            raise BoundingSetError('A lift must add at least one dimension')
        if len(self.lower_pad) != self.dimension or len(self.upper_pad) != self.dimension:
            raise BoundingSetError(f'Padding points must have {self.dimension} coordinates')
        for i in self.new_positions(indices):
            if not self.lower_pad[i] < self.upper_pad[i]:
                raise BoundingSetError(
                    f'Padding on new axis {i + 1} is empty: {self.lower_pad[i]} >= {self.upper_pad[i]}'
                )
        variables = tuple(self.variables) if self.variables is not None else tuple(range(1, self.dimension + 1))
        if len(variables) != self.dimension:
            raise BoundingSetError('Lift variables do not match the target dimension')
        object.__setattr__(self, 'indices', indices)
        object.__setattr__(self, 'variables', variables)

    def new_positions(self, indices=None):
        indices = self.indices if indices is None else indices
        return [i for i in range(self.dimension) if i + 1 not in indices]


def _extend(bounding_set, variables, axes):
    """
    Place `bounding_set` on a grid over `variables` whose axes for the
    variables it already has are its own; bounds are constant along the
    other axes.
    """
    own = bounding_set.variables
    positions = [variables.index(v) for v in own]
    new_shape = tuple(len(a) for a in axes)

    def broadcast(values):
        arr = values.reshape(bounding_set.shape)
        for pos in range(len(variables)):
            if pos not in positions:
                arr = np.expand_dims(arr, pos)
        return np.broadcast_to(arr, new_shape).reshape(-1).copy()

    return BoundingSet(tuple(variables), PointSet.from_axes(axes),
                       broadcast(bounding_set.lower), broadcast(bounding_set.upper))


def lift(bounding_set, spec):
    """Lifted bounding set; bounds do not change along the added axes."""
    if len(spec.indices) != bounding_set.dimension:
        raise BoundingSetError(
            f'Lift places {len(spec.indices)} axes but the bounding set has {bounding_set.dimension}'
        )
    axes = []
    source_axes = iter(bounding_set.axes)
    for i in range(spec.dimension):
        if i + 1 in spec.indices:
            axes.append(next(source_axes))
        else:
            axes.append(np.array([spec.lower_pad[i], spec.upper_pad[i]], dtype=float))
    relabelled = BoundingSet(tuple(spec.variables[i - 1] for i in spec.indices), bounding_set.point_set,
                             bounding_set.lower, bounding_set.upper)
    return _extend(relabelled, list(spec.variables), axes)


def _axis_map(old_axis, new_axis):
    """Index of each new axis value in the old axis, or -1 when it is new."""
    idx = np.searchsorted(old_axis, new_axis)
    tol = AXIS_TOL * np.maximum(1.0, np.abs(new_axis))
    found = np.full(len(new_axis), -1, dtype=np.int64)
    for shift in (0, -1):
        candidate = np.clip(idx + shift, 0, len(old_axis) - 1)
        close = (found < 0) & (np.abs(old_axis[candidate] - new_axis) <= tol)
        found[close] = candidate[close]
    return found


def expand_and_interpolate(bounding_set, q, triangulation=None):
    """
    Insert every coordinate of q into the grid. Points already on the grid
    keep their bounds; the new points (the star of q minus the old grid)
    get barycentric interpolants of the old bounds.
    """
    q = np.asarray(q, dtype=float).reshape(-1)
    if q.size != bounding_set.dimension:
        raise BoundingSetError(f'Point {tuple(q)} does not have {bounding_set.dimension} coordinates')
    triangulation = triangulation or bounding_set.triangulation
    axes = []
    for axis, value in zip(bounding_set.axes, q):
        slack = 1e-9 * max(1.0, abs(axis[0]), abs(axis[-1]))
        if value < axis[0] - slack or value > axis[-1] + slack:
            raise BoundingSetError(f'Cannot insert {tuple(q)} outside the bounding-set domain', q)
        value = min(max(value, axis[0]), axis[-1])
        if np.any(np.abs(axis - value) <= AXIS_TOL * max(1.0, abs(value))):
            axes.append(axis)
        else:
            axes.append(np.sort(np.append(axis, value)))
    if all(len(a) == len(b) for a, b in zip(axes, bounding_set.axes)):
        return bounding_set

    point_set = PointSet.from_axes(axes)
    maps = np.meshgrid(*[_axis_map(old, new) for old, new in zip(bounding_set.axes, axes)], indexing='ij')
    maps = np.stack([m.reshape(-1) for m in maps], axis=-1)
    is_old = np.all(maps >= 0, axis=1)

    lower = np.empty(len(point_set))
    upper = np.empty(len(point_set))
    lower[is_old] = bounding_set.lower[maps[is_old] @ bounding_set.point_set.strides]
    upper[is_old] = bounding_set.upper[maps[is_old] @ bounding_set.point_set.strides]
    fresh = point_set.points[~is_old]
    simplices, theta = triangulation.locate_many(fresh)
    vertex_ids = triangulation.simplices[simplices]
    lower[~is_old] = np.sum(theta * bounding_set.lower[vertex_ids], axis=1)
    upper[~is_old] = np.sum(theta * bounding_set.upper[vertex_ids], axis=1)
    return BoundingSet(bounding_set.variables, point_set, lower, upper)


def _insert_axis_values(bounding_set, variable, values):
    """Insert values on one axis, one at a time."""
    for value in values:
        axis = bounding_set.axis_for(variable)
        if np.any(np.abs(axis - value) <= AXIS_TOL * max(1.0, abs(value))):
            continue
        q = np.array([a[0] for a in bounding_set.axes])
        q[bounding_set.variables.index(variable)] = value
        bounding_set = expand_and_interpolate(bounding_set, q)
    return bounding_set


def conform(bounding_set, variables, axes):
    """
    Re-grid a bounding set onto the target `axes` (a {variable: axis}
    mapping): insert missing values on its own axes, then extend it along
    the target axes of the variables it lacks.
    """
    for variable in bounding_set.variables:
        target = axes[variable]
        own = bounding_set.axis_for(variable)
        slack = 1e-9 * max(1.0, abs(own[0]), abs(own[-1]))
        if target[0] < own[0] - slack or target[-1] > own[-1] + slack:
            raise BoundingSetError(
                f'Target axis for x{variable} [{target[0]}, {target[-1]}] leaves the domain [{own[0]}, {own[-1]}]'
            )
        bounding_set = _insert_axis_values(bounding_set, variable, target)
    variables = sorted(variables)
    if tuple(variables) == bounding_set.variables:
        return bounding_set
    return _extend(bounding_set, variables, [bounding_set.axis_for(v) if v in bounding_set.variables else axes[v]
                                             for v in variables])


def align_domains(bf, bg, dimension=None):
    """
    Put two bounding sets on one grid over the union of their variables;
    each axis carries the union of both sets' values on it.
    """
    variables = sorted(set(bf.variables) | set(bg.variables))
    if dimension is not None and len(variables) != dimension:
        raise BoundingSetError(f'Bounding sets cover {len(variables)} variables, expected {dimension}')
    axes = {}
    for v in variables:
        owned = [b.axis_for(v) for b in (bf, bg) if v in b.variables]
        axes[v] = merge_axes(*owned)
    aligned_f = conform(bf, variables, axes)
    aligned_g = conform(bg, variables, axes)
    logger.debug('Aligned bounding sets onto grid %s over %s', aligned_f.shape, variables)
    return aligned_f, aligned_g


def _same_grid(bf, bg):
    return bf.variables == bg.variables and all(
        len(a) == len(b) and np.allclose(a, b, rtol=AXIS_TOL, atol=AXIS_TOL) for a, b in zip(bf.axes, bg.axes)
    )


def _curvature_margins(triangulation, factors_f, factors_g, size):
    """
    Per-vertex margins covering the gap between the interpolated product of
    two affine pieces and the product itself. On a simplex the gap is
    sum_{i<j} theta_i theta_j (a_i - a_j)(b_i - b_j), and sum_{i<j} theta_i
    theta_j is at most n / (2(n + 1)).
    """
    simplices = triangulation.simplices
    n = simplices.shape[1] - 1
    factor = n / (2.0 * (n + 1))
    below = np.zeros(len(simplices))
    above = np.zeros(len(simplices))
    for h1, h2 in itertools.product(factors_f, factors_g):
        a = h1[simplices]
        b = h2[simplices]
        cross = (a[:, :, None] - a[:, None, :]) * (b[:, :, None] - b[:, None, :])
        below = np.maximum(below, np.max(np.maximum(cross, 0.0), axis=(1, 2)))
        above = np.maximum(above, np.max(np.maximum(-cross, 0.0), axis=(1, 2)))
    return _vertex_max(simplices, factor * below, size), _vertex_max(simplices, factor * above, size)


def _vertex_max(simplices, per_simplex, size):
    margins = np.zeros(size)
    for k in range(simplices.shape[1]):
        np.maximum.at(margins, simplices[:, k], per_simplex)
    return margins


def _reciprocal(bg):
    """
    Bounding set of 1/g. 1/t is convex for t > 0 and concave for t < 0, so
    on one side the interpolant of the reciprocal overshoots 1/g; the
    largest Jensen gap of 1/t on [m, M] is (1/sqrt(m) - 1/sqrt(M))^2.
    """
    points = bg.point_set.points
    straddles = (bg.lower <= 0.0) & (bg.upper >= 0.0)
    if np.any(straddles):
        raise BoundingSetError('Division by a bound range containing zero', points[np.flatnonzero(straddles)[0]])
    positive = bg.lower > 0
    if not (np.all(positive) or not np.any(positive)):
        raise BoundingSetError('Division by bounds that change sign across the grid',
                               points[np.flatnonzero(~positive)[0]])
    simplices = bg.triangulation.simplices
    chord_side = bg.upper if np.all(positive) else bg.lower
    magnitudes = np.abs(chord_side[simplices])
    lo, hi = magnitudes.min(axis=1), magnitudes.max(axis=1)
    jensen = (1.0 / np.sqrt(lo) - 1.0 / np.sqrt(hi)) ** 2
    margin = _vertex_max(simplices, jensen, len(bg))
    lower = 1.0 / bg.upper
    upper = 1.0 / bg.lower
    if np.all(positive):
        lower = lower - margin
    else:
        upper = upper + margin
    return BoundingSet(bg.variables, bg.point_set, lower, upper)


def compose(bf, bg, op):
    """Pointwise composition of two bounding sets on the same grid."""
    if op not in COMPOSE_OPERATORS:
        raise BoundingSetError(f'Unsupported operator {op!r}')
    if not _same_grid(bf, bg):
        raise BoundingSetError('Composition needs bounding sets on identical grids; align them first')
    if op == '+':
        return BoundingSet(bf.variables, bf.point_set, bf.lower + bg.lower, bf.upper + bg.upper)
    if op == '-':
        return BoundingSet(bf.variables, bf.point_set, bf.lower - bg.upper, bf.upper - bg.lower)
    if op == '/':
        bg = _reciprocal(bg)
    products = np.stack([h1 * h2 for h1 in (bf.lower, bf.upper) for h2 in (bg.lower, bg.upper)])
    below, above = _curvature_margins(bf.triangulation, (bf.lower, bf.upper), (bg.lower, bg.upper), len(bf))
    return BoundingSet(bf.variables, bf.point_set, products.min(axis=0) - below, products.max(axis=0) + above)
