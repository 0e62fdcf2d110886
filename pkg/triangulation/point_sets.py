from dataclasses import dataclass
from functools import cached_property

import numpy as np

from utils.exceptions import TriangulationError

AXIS_TOL = 1e-12
MAX_DIMENSION = 6


def dedupe_axis(values, tol=AXIS_TOL):
    """Sort axis values and drop near-duplicates (relative to the axis span)."""
    values = np.unique(np.asarray(values, dtype=float))
    if values.size < 2:
        return values
    scale = max(1.0, float(np.max(np.abs(values))))
    keep = np.concatenate(([True], np.diff(values) > tol * scale))
    return values[keep]


def merge_axes(*axes):
    return dedupe_axis(np.concatenate([np.asarray(a, dtype=float) for a in axes]))


@dataclass(frozen=True, eq=False)
class PointSet:
    """
    Finite point set in R^n. Grid point sets keep their per-axis coordinate
    lists; points are then listed in row-major order of the axes.
    """
    points: np.ndarray
    axes: tuple = None

    @classmethod
    def from_axes(cls, axes):
        axes = tuple(np.asarray(a, dtype=float) for a in axes)
        for i, axis in enumerate(axes):
            if axis.ndim != 1 or axis.size < 2:
                raise TriangulationError(f'Grid axis {i} needs at least two values')
            if np.any(np.diff(axis) <= 0):
                raise TriangulationError(f'Grid axis {i} must be strictly increasing')
        mesh = np.meshgrid(*axes, indexing='ij')
        points = np.stack([m.reshape(-1) for m in mesh], axis=-1)
        return cls(points, axes)

    @classmethod
    def from_points(cls, points):
        points = np.atleast_2d(np.asarray(points, dtype=float))
        if len(np.unique(points, axis=0)) != len(points):
            raise TriangulationError('Point set contains duplicate points')
        return cls(points, None)

    @property
    def is_grid(self):
        return self.axes is not None

    @property
    def dimension(self):
        return self.points.shape[1]

    @property
    def resolution(self):
        return tuple(len(a) for a in self.axes)

    def __len__(self):
        return len(self.points)

    @cached_property
    def strides(self):
        shape = self.resolution
        strides = [1] * len(shape)
        for i in range(len(shape) - 2, -1, -1):
            strides[i] = strides[i + 1] * shape[i + 1]
        return np.array(strides, dtype=np.int64)

    def lower(self):
        return self.points.min(axis=0)

    def upper(self):
        return self.points.max(axis=0)

    def grid_index(self, point):
        """Row-major index of a grid point; raises when it is not on the grid."""
        point = np.asarray(point, dtype=float)
        position = []
        for axis, value in zip(self.axes, point):
            hits = np.flatnonzero(np.abs(axis - value) <= AXIS_TOL * max(1.0, abs(value)))
            if hits.size == 0:
                raise TriangulationError(f'{tuple(point)} is not a grid point')
            position.append(hits[0])
        return int(np.dot(position, self.strides))

    def check_full_dimensional(self):
        if self.dimension > MAX_DIMENSION:
            raise TriangulationError(f'Dimension {self.dimension} exceeds the cap of {MAX_DIMENSION}')
        if self.is_grid:
            return
        if len(self.points) < self.dimension + 1:
            raise TriangulationError('Point set is not full-dimensional')
        spread = self.points[1:] - self.points[0]
        if np.linalg.matrix_rank(spread) < self.dimension:
            raise TriangulationError('Point set is not full-dimensional')
