"""
Bounding sets: a grid point set with lower and upper values at every grid
point. The enclosure of a bounding set is the region between the two
piecewise-linear interpolants over the grid's Kuhn triangulation.
"""
import json
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from triangulation.delaunay import delaunay_triangulate
from triangulation.point_sets import PointSet
from utils.exceptions import BoundingSetError

ORDER_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class BoundingSet:
    """
    `variables` lists the 1-based state variables the grid axes range over,
    in axis order. `lower` and `upper` are indexed like `point_set.points`
    (row-major over the axes).
    """
    variables: tuple
    point_set: PointSet
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        if not self.point_set.is_grid:
            raise BoundingSetError('Bounding sets live on grid point sets')
        variables = tuple(int(v) for v in self.variables)
        if len(variables) != self.point_set.dimension:
            raise BoundingSetError(
                f'{len(variables)} variables given for a {self.point_set.dimension}-D grid'
            )
        if list(variables) != sorted(set(variables)) or min(variables) < 1:
            raise BoundingSetError(f'Variables must be strictly increasing and 1-based, got {variables}')
        lower = np.asarray(self.lower, dtype=float).reshape(-1)
        upper = np.asarray(self.upper, dtype=float).reshape(-1)
        if lower.shape != (len(self.point_set),) or upper.shape != lower.shape:
            raise BoundingSetError('Bound arrays do not match the grid size')
        if not (np.all(np.isfinite(lower)) and np.all(np.isfinite(upper))):
            bad = np.flatnonzero(~(np.isfinite(lower) & np.isfinite(upper)))[0]
            raise BoundingSetError('Bounds must be finite', self.point_set.points[bad])
        scale = np.maximum(1.0, np.maximum(np.abs(lower), np.abs(upper)))
        crossed = lower > upper + ORDER_TOL * scale
        if np.any(crossed):
            bad = np.flatnonzero(crossed)[0]
            raise BoundingSetError(
                f'Lower bound {lower[bad]} exceeds upper bound {upper[bad]}', self.point_set.points[bad]
            )
        object.__setattr__(self, 'variables', variables)
        object.__setattr__(self, 'lower', np.minimum(lower, upper))
        object.__setattr__(self, 'upper', upper)

    @classmethod
    def from_axes(cls, variables, axes, lower, upper):
        return cls(tuple(variables), PointSet.from_axes(axes), lower, upper)

    @classmethod
    def constant(cls, value, variables, axes):
        point_set = PointSet.from_axes(axes)
        values = np.full(len(point_set), float(value))
        return cls(tuple(variables), point_set, values, values.copy())

    @property
    def dimension(self):
        return self.point_set.dimension

    @property
    def axes(self):
        return self.point_set.axes

    @property
    def shape(self):
        return self.point_set.resolution

    def __len__(self):
        return len(self.point_set)

    @cached_property
    def triangulation(self):
        return delaunay_triangulate(self.point_set)

    def domain(self):
        """Per-variable (lo, hi) extent of the grid."""
        return {v: (float(a[0]), float(a[-1])) for v, a in zip(self.variables, self.axes)}

    def axis_for(self, variable):
        return self.axes[self.variables.index(variable)]

    def evaluate_bounds(self, xs):
        """
        Interpolated (lower, upper) at each row of `xs`, whose columns follow
        `variables`.
        """
        xs = np.atleast_2d(np.asarray(xs, dtype=float))
        tri = self.triangulation
        simplices, theta = tri.locate_many(xs)
        vertex_ids = tri.simplices[simplices]
        lower = np.sum(theta * self.lower[vertex_ids], axis=1)
        upper = np.sum(theta * self.upper[vertex_ids], axis=1)
        return lower, upper

    def negated(self):
        return BoundingSet(self.variables, self.point_set, -self.upper, -self.lower)

    def widened(self, margin_lower, margin_upper):
        return BoundingSet(self.variables, self.point_set, self.lower - margin_lower, self.upper + margin_upper)

    def to_json(self):
        return json.dumps({
            'n': self.dimension,
            'variables': list(self.variables),
            'axes': [a.tolist() for a in self.axes],
            'L': self.lower.tolist(),
            'U': self.upper.tolist(),
        })

    @classmethod
    def from_json(cls, text):
        data = json.loads(text)
        axes = data['axes']
        if data.get('n', len(axes)) != len(axes):
            raise BoundingSetError(f"JSON dump declares n={data['n']} but lists {len(axes)} axes")
        variables = data.get('variables') or list(range(1, len(axes) + 1))
        return cls.from_axes(variables, axes, data['L'], data['U'])

    def __repr__(self):
        return f'BoundingSet(variables={self.variables}, shape={self.shape})'


def polyhedron_vertices(bounding_set):
    """
    The points (p, L(p)) and (p, U(p)) in R^(n+1); a grid point with equal
    bounds contributes a single vertex.
    """
    points = bounding_set.point_set.points
    lows = np.column_stack([points, bounding_set.lower])
    highs = np.column_stack([points, bounding_set.upper])
    distinct = bounding_set.lower != bounding_set.upper
    return np.vstack([lows, highs[distinct]])
