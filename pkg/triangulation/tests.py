import math

import numpy as np
from django.test import SimpleTestCase

from utils.exceptions import TriangulationError

from .delaunay import delaunay_triangulate, grid_star
from .point_sets import PointSet


def containing_simplices(triangulation, x, tol=1e-12):
    """Brute-force list of simplices whose barycentric solve is non-negative."""
    found = []
    for s, simplex in enumerate(triangulation.simplices):
        verts = triangulation.point_set.points[simplex]
        system = np.vstack([verts.T, np.ones(len(simplex))])
        theta = np.linalg.solve(system, np.append(x, 1.0))
        if np.all(theta >= -tol):
            found.append(s)
    return found


class DelaunayTriangulateTest(SimpleTestCase):
    """Test triangulation construction"""

    def test_square_grid(self):
        """Test the 2x2 grid splits into two triangles sharing an edge"""
        tri = delaunay_triangulate(PointSet.from_axes([[-5, 5], [-5, 5]]))
        self.assertEqual(len(tri), 2)
        shared = set(tri.simplices[0]) & set(tri.simplices[1])
        self.assertEqual(len(shared), 2)
        self.assertEqual(tri.adjacency, {0: (1,), 1: (0,)})

    def test_one_dimensional(self):
        """Test a 1-D grid becomes consecutive segments"""
        tri = delaunay_triangulate(PointSet.from_axes([[0, 1, 2]]))
        self.assertEqual(tri.simplices.tolist(), [[0, 1], [1, 2]])

    def test_scattered_triangle(self):
        """Test three non-collinear points give a single simplex"""
        tri = delaunay_triangulate(PointSet.from_points([[0, 0], [1, 0], [0, 1]]))
        self.assertEqual(len(tri), 1)
        self.assertEqual(sorted(tri.simplices[0].tolist()), [0, 1, 2])

    def test_volume_partition(self):
        """Test simplex volumes add up to the grid box volume"""
        rng = np.random.default_rng(1)
        for n in (1, 2, 3):
            axes = [np.sort(rng.uniform(-3, 3, size=rng.integers(2, 5))) for _ in range(n)]
            tri = delaunay_triangulate(PointSet.from_axes(axes))
            expected = math.prod(a[-1] - a[0] for a in axes)
            self.assertAlmostEqual(tri.volumes().sum() / expected, 1.0, delta=1e-9)
            self.assertEqual(len(tri), math.factorial(n) * math.prod(len(a) - 1 for a in axes))

    def test_empty_circumball(self):
        """Test no grid point lies strictly inside any circumscribing ball"""
        rng = np.random.default_rng(2)
        for n in (2, 3):
            axes = [np.sort(rng.uniform(-2, 2, size=4)) for _ in range(n)]
            tri = delaunay_triangulate(PointSet.from_axes(axes))
            self.assertLessEqual(tri.circumball_violation(), 1e-9)
        scattered = PointSet.from_points(rng.uniform(-1, 1, size=(30, 2)))
        self.assertLessEqual(delaunay_triangulate(scattered).circumball_violation(), 1e-9)

    def test_rejects_degenerate_sets(self):
        """Test collinear points and oversized dimensions are rejected"""
        with self.assertRaises(TriangulationError):
            delaunay_triangulate(PointSet.from_points([[0, 0], [1, 1], [2, 2]]))
        with self.assertRaises(TriangulationError):
            delaunay_triangulate(PointSet.from_axes([[0, 1]] * 7))
        with self.assertRaises(TriangulationError):
            PointSet.from_axes([[0.0], [0.0, 1.0]])


class LocateTest(SimpleTestCase):
    """Test point location and barycentric coordinates"""

    def setUp(self):
        self.square = PointSet.from_axes([[-5, 5], [-5, 5]])
        self.tri = delaunay_triangulate(self.square)

    def test_edge_midpoint(self):
        """Test the midpoint of the left edge has weights one half on its end points"""
        found = self.tri.locate([-5.0, 0.0])
        verts = self.tri.vertices(found.simplex)
        weights = {tuple(v): t for v, t in zip(verts.tolist(), found.theta)}
        self.assertAlmostEqual(weights[(-5.0, -5.0)], 0.5)
        self.assertAlmostEqual(weights[(-5.0, 5.0)], 0.5)
        self.assertAlmostEqual(sum(weights.values()), 1.0)

    def test_vertex_and_centroid(self):
        """Test a vertex gets a unit vector and a centroid equal weights"""
        found = self.tri.locate([5.0, -5.0])
        self.assertEqual(sorted(found.theta.tolist()), [0.0, 0.0, 1.0])
        centroid = self.tri.vertices(1).mean(axis=0)
        found = self.tri.locate(centroid)
        self.assertEqual(found.simplex, 1)
        np.testing.assert_allclose(found.theta, [1 / 3] * 3)

    def test_reconstruction(self):
        """Test barycentric coordinates reconstruct random points"""
        rng = np.random.default_rng(4)
        axes = [np.sort(rng.uniform(-1, 1, size=4)) for _ in range(3)]
        tri = delaunay_triangulate(PointSet.from_axes(axes))
        xs = rng.uniform([a[0] for a in axes], [a[-1] for a in axes], size=(500, 3))
        simplices, theta = tri.locate_many(xs)
        rebuilt = np.einsum('ij,ijk->ik', theta, tri.point_set.points[tri.simplices[simplices]])
        self.assertLessEqual(np.max(np.abs(rebuilt - xs)), 1e-9)
        self.assertTrue(np.all(theta >= 0))
        np.testing.assert_allclose(theta.sum(axis=1), 1.0)

    def test_boundary_points_take_lowest_index(self):
        """Test points on shared faces resolve to the lowest-index simplex"""
        tri = delaunay_triangulate(PointSet.from_axes([[0, 1, 2], [0, 1, 2]]))
        for x in ([1.0, 0.5], [0.5, 0.5], [1.0, 1.0], [2.0, 1.0], [1.5, 1.0]):
            self.assertEqual(tri.locate(x).simplex, min(containing_simplices(tri, np.array(x))))

    def test_scattered_locate(self):
        """Test location in a scattered triangulation reconstructs the point"""
        rng = np.random.default_rng(8)
        tri = delaunay_triangulate(PointSet.from_points(np.vstack([
            [[0, 0], [1, 0], [0, 1], [1, 1]], rng.uniform(0.1, 0.9, size=(6, 2))])))
        xs = rng.uniform(0, 1, size=(50, 2))
        simplices, theta = tri.locate_many(xs)
        rebuilt = np.einsum('ij,ijk->ik', theta, tri.point_set.points[tri.simplices[simplices]])
        self.assertLessEqual(np.max(np.abs(rebuilt - xs)), 1e-9)

    def test_outside_domain(self):
        """Test points outside the hull raise"""
        with self.assertRaises(TriangulationError):
            self.tri.locate([6.0, 0.0])


class GridStarTest(SimpleTestCase):
    """Test grid stars"""

    def test_centre_star(self):
        """Test the star of the centre of a 3x3 grid"""
        grid = PointSet.from_axes([[-5, 0, 5], [-5, 0, 5]])
        star = {tuple(p) for p in grid_star(grid, [0, 0]).tolist()}
        self.assertEqual(star, {(-5.0, 0.0), (0.0, 0.0), (5.0, 0.0), (0.0, -5.0), (0.0, 5.0)})

    def test_corner_star(self):
        """Test the star of a corner matches a set comprehension"""
        grid = PointSet.from_axes([[0, 1, 2], [0, 3], [1, 2]])
        q = np.array([0.0, 3.0, 2.0])
        expected = {tuple(p) for p in grid.points.tolist() if any(a == b for a, b in zip(p, q))}
        self.assertEqual({tuple(p) for p in grid_star(grid, q).tolist()}, expected)

    def test_one_dimensional(self):
        """Test a 1-D star is just the point itself"""
        grid = PointSet.from_axes([[0, 1, 2]])
        self.assertEqual(grid_star(grid, [1]).tolist(), [[1.0]])

    def test_point_not_on_grid(self):
        """Test a point off the grid is rejected"""
        with self.assertRaises(TriangulationError):
            grid_star(PointSet.from_axes([[0, 1], [0, 1]]), [0.5, 0])
