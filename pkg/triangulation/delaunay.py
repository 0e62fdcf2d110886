"""
Delaunay triangulations of grid and scattered point sets.

Grids get the Freudenthal (Kuhn) triangulation: every grid cell is split
into n! simplices, one per ordering of the axes, each running from the
cell's lower corner to its upper corner one axis step at a time. All
corners of a cell lie on one sphere and every other grid point lies
strictly outside it, so this is a Delaunay triangulation; it is the one a
symbolic perturbation favouring lower point indices selects among the
cospherical ties. Scattered point sets are handed to Qhull.
"""
import itertools
import logging
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.spatial import Delaunay

from utils.exceptions import TriangulationError

from .point_sets import AXIS_TOL, PointSet

logger = logging.getLogger(__name__)

LOCATE_SLACK = 1e-9


@dataclass(frozen=True)
class Barycentric:
    simplex: int
    theta: np.ndarray


@dataclass(frozen=True, eq=False)
class Triangulation:
    point_set: PointSet
    simplices: np.ndarray
    _qhull: object = None

    @property
    def dimension(self):
        return self.point_set.dimension

    def __len__(self):
        return len(self.simplices)

    def vertices(self, simplex):
        return self.point_set.points[self.simplices[simplex]]

    @cached_property
    def adjacency(self):
        """Map simplex index to the tuple of simplices sharing a facet with it."""
        facets = {}
        for s, simplex in enumerate(self.simplices):
            for drop in range(len(simplex)):
                key = tuple(sorted(np.delete(simplex, drop).tolist()))
                facets.setdefault(key, []).append(s)
        neighbours = {s: set() for s in range(len(self.simplices))}
        for owners in facets.values():
            for a, b in itertools.combinations(owners, 2):
                neighbours[a].add(b)
                neighbours[b].add(a)
        return {s: tuple(sorted(n)) for s, n in neighbours.items()}

    def locate(self, x):
        simplex, theta = self.locate_many(np.asarray(x, dtype=float)[np.newaxis, :])
        return Barycentric(int(simplex[0]), theta[0])

    def locate_many(self, xs):
        """
        Containing simplex and barycentric coordinates for each row of xs.
        Points on shared faces resolve to the lowest-index simplex (grids).
        """
        xs = np.atleast_2d(np.asarray(xs, dtype=float))
        if self.point_set.is_grid:
            return _locate_grid(self, xs)
        return _locate_scattered(self, xs)

    def volumes(self):
        pts = self.point_set.points[self.simplices]
        edges = pts[:, 1:, :] - pts[:, :1, :]
        return np.abs(np.linalg.det(edges)) / math.factorial(self.dimension)

    def circumball_violation(self):
        """
        Largest (r^2 - |p - c|^2) / r^2 over simplices and non-vertex points p;
        a Delaunay triangulation keeps this at or below zero.
        """
        points = self.point_set.points
        pts = points[self.simplices]
        base = pts[:, 0, :]
        lhs = 2.0 * (pts[:, 1:, :] - base[:, np.newaxis, :])
        rhs = np.sum(pts[:, 1:, :] ** 2, axis=2) - np.sum(base ** 2, axis=1)[:, np.newaxis]
        centres = np.linalg.solve(lhs, rhs[..., np.newaxis])[..., 0]
        radii2 = np.sum((base - centres) ** 2, axis=1)
        worst = -np.inf
        for s in range(len(self.simplices)):
            dist2 = np.sum((points - centres[s]) ** 2, axis=1)
            dist2[self.simplices[s]] = np.inf
            worst = max(worst, float(np.max((radii2[s] - dist2) / radii2[s])))
        return worst


def delaunay_triangulate(point_set):
    point_set.check_full_dimensional()
    if point_set.is_grid:
        simplices = _kuhn_simplices(point_set)
        logger.debug('Kuhn triangulation: %d simplices over grid %s', len(simplices), point_set.resolution)
        return Triangulation(point_set, simplices)
    if point_set.dimension == 1:
        order = np.argsort(point_set.points[:, 0], kind='stable')
        simplices = np.stack([order[:-1], order[1:]], axis=1)
        return Triangulation(point_set, simplices)
    try:
        qhull = Delaunay(point_set.points)
    except Exception as exc:
        raise TriangulationError(f'Delaunay triangulation failed: {exc}') from exc
    return Triangulation(point_set, np.asarray(qhull.simplices, dtype=np.int64), qhull)


def _permutations(n):
    return np.array(list(itertools.permutations(range(n))), dtype=np.int64).reshape(-1, n)


def _kuhn_simplices(point_set):
    n = point_set.dimension
    shape = np.array(point_set.resolution) - 1
    strides = point_set.strides
    cells = np.stack(np.meshgrid(*[np.arange(s) for s in shape], indexing='ij'), axis=-1).reshape(-1, n)
    corner = cells @ strides
    perms = _permutations(n)
    # chain offsets: vertex k adds the unit steps of the first k axes of the permutation
    steps = strides[perms]
    offsets = np.concatenate([np.zeros((len(perms), 1), dtype=np.int64), np.cumsum(steps, axis=1)], axis=1)
    simplices = corner[:, np.newaxis, np.newaxis] + offsets[np.newaxis, :, :]
    return simplices.reshape(-1, n + 1)


def _permutation_rank(perms):
    """Lexicographic rank of each row of an (N, n) permutation array."""
    n = perms.shape[1]
    rank = np.zeros(len(perms), dtype=np.int64)
    for i in range(n):
        smaller = np.sum(perms[:, i + 1:] < perms[:, i:i + 1], axis=1)
        rank += smaller * math.factorial(n - 1 - i)
    return rank


def _locate_grid(triangulation, xs):
    point_set = triangulation.point_set
    n = point_set.dimension
    cells = np.empty(xs.shape, dtype=np.int64)
    local = np.empty(xs.shape)
    for d, axis in enumerate(point_set.axes):
        span = axis[-1] - axis[0]
        slack = LOCATE_SLACK * max(1.0, abs(span), abs(axis[0]), abs(axis[-1]))
        outside = (xs[:, d] < axis[0] - slack) | (xs[:, d] > axis[-1] + slack)
        if np.any(outside):
            bad = xs[np.argmax(outside)]
            raise TriangulationError(f'Point {tuple(bad)} lies outside the triangulated domain')
        cell = np.clip(np.searchsorted(axis, xs[:, d], side='left') - 1, 0, len(axis) - 2)
        lo, hi = axis[cell], axis[cell + 1]
        cells[:, d] = cell
        local[:, d] = np.clip((xs[:, d] - lo) / (hi - lo), 0.0, 1.0)
    perms = np.argsort(-local, axis=1, kind='stable')
    rank = _permutation_rank(perms)
    cell_shape = np.array(point_set.resolution) - 1
    cell_strides = np.ones(n, dtype=np.int64)
    for i in range(n - 2, -1, -1):
        cell_strides[i] = cell_strides[i + 1] * cell_shape[i + 1]
    simplex = (cells @ cell_strides) * math.factorial(n) + rank
    ordered = np.take_along_axis(local, perms, axis=1)
    theta = np.empty((len(xs), n + 1))
    theta[:, 0] = 1.0 - ordered[:, 0]
    theta[:, 1:n] = ordered[:, :-1] - ordered[:, 1:]
    theta[:, n] = ordered[:, -1]
    return simplex, theta


def _locate_scattered(triangulation, xs):
    points = triangulation.point_set.points
    n = triangulation.dimension
    if n == 1:
        simplices = triangulation.simplices
        lo = points[simplices[:, 0], 0]
        hi = points[simplices[:, 1], 0]
        order = np.argsort(lo)
        found = np.empty(len(xs), dtype=np.int64)
        theta = np.empty((len(xs), 2))
        for row, x in enumerate(xs[:, 0]):
            pos = np.clip(np.searchsorted(lo[order], x, side='left') - 1, 0, len(order) - 1)
            s = order[pos]
            if not (lo[s] - LOCATE_SLACK <= x <= hi[s] + LOCATE_SLACK):
                raise TriangulationError(f'Point ({x},) lies outside the triangulated domain')
            t = np.clip((x - lo[s]) / (hi[s] - lo[s]), 0.0, 1.0)
            found[row] = s
            theta[row] = (1.0 - t, t)
        return found, theta
    qhull = triangulation._qhull
    found = qhull.find_simplex(xs, tol=LOCATE_SLACK)
    if np.any(found < 0):
        bad = xs[np.argmax(found < 0)]
        raise TriangulationError(f'Point {tuple(bad)} lies outside the triangulated domain')
    transform = qhull.transform[found]
    partial = np.einsum('ijk,ik->ij', transform[:, :n, :], xs - transform[:, n, :])
    theta = np.concatenate([partial, 1.0 - partial.sum(axis=1, keepdims=True)], axis=1)
    theta = np.clip(theta, 0.0, 1.0)
    theta /= theta.sum(axis=1, keepdims=True)
    return found, theta


def grid_star(point_set, q):
    """Grid points sharing at least one coordinate with the grid point q."""
    if not point_set.is_grid:
        raise TriangulationError('grid_star needs a grid point set')
    q = np.asarray(q, dtype=float)
    point_set.grid_index(q)
    tol = AXIS_TOL * np.maximum(1.0, np.abs(q))
    mask = np.any(np.abs(point_set.points - q) <= tol, axis=1)
    return point_set.points[mask]
