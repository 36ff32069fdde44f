import unittest
from unittest.mock import patch

import numpy as np
from parameterized import parameterized

from curvflow.errors import DomainError, RegionTooLargeError, VertexIndexError
from curvflow.isoperimetry import (
    _minimum_ratio,
    boundary_measure,
    candidate_radii,
    dirichlet_constant,
    green_residual,
    in_radius,
    laplacian_margin,
)
from curvflow.metric import limit_distance
from curvflow.spectral import mean_transition_kernel
from tests.graph_factory import complete, cycle, path, random_strongly_connected, symmetric_pair


class TestBoundaryMeasure(unittest.TestCase):
    @parameterized.expand([([0],), ([1, 2],), ([2],)])
    def test_triangle(self, omega):
        self.assertAlmostEqual(boundary_measure(mean_transition_kernel(complete(3)), omega), 1 / 3)

    def test_pair(self):
        self.assertAlmostEqual(boundary_measure(mean_transition_kernel(symmetric_pair()), [0]), 0.5)

    @parameterized.expand([(6, 0.3, 101), (9, 0.3, 102)])
    def test_reflected_is_equal(self, n, p, seed):
        """Mass leaving a set equals mass entering it"""
        k = mean_transition_kernel(random_strongly_connected(n, p, seed))
        omega = [0, 2, 3]
        self.assertAlmostEqual(boundary_measure(k, omega), boundary_measure(k, omega, reflected=True), places=12)

    @parameterized.expand([([],), ([0, 1, 2],)])
    def test_must_be_proper(self, omega):
        with self.assertRaises(DomainError):
            boundary_measure(mean_transition_kernel(complete(3)), omega)

    def test_index_range(self):
        with self.assertRaises(VertexIndexError):
            boundary_measure(mean_transition_kernel(complete(3)), [5])


class TestDirichletConstant(unittest.TestCase):
    def test_triangle(self):
        """The whole far region is the minimizer, and the bound is inactive"""
        result = dirichlet_constant(complete(3), 0, 1.0)

        self.assertEqual(result.region, [1, 2])
        self.assertAlmostEqual(result.I, 0.5)
        self.assertEqual(result.argmin_subset, [1, 2])
        self.assertAlmostEqual(result.K, 0.5)
        self.assertAlmostEqual(result.Lambda, -1.0)
        self.assertAlmostEqual(result.D, 1.0)
        self.assertAlmostEqual(result.bound, -0.5)
        self.assertFalse(result.bound_active)

    def test_pair(self):
        result = dirichlet_constant(symmetric_pair(), 0, 1.0)
        self.assertEqual(result.argmin_subset, [1])
        self.assertAlmostEqual(result.I, 1.0)

    def test_ties_pick_first_subset(self):
        """Both ends of a path, alone or together, all have ratio one and the first subset wins"""
        result = dirichlet_constant(path(5), 2, 2.0)
        self.assertEqual(result.region, [0, 4])
        self.assertEqual(result.I, 1.0)
        self.assertEqual(result.argmin_subset, [0])

    @parameterized.expand([("one block", 14), ("many blocks", 1)])
    def test_ties_are_lexicographic(self, _, chunk_bits):
        """{1}, {0, 3} and {0, 1, 3} all reach 0.5, and (0, 1, 3) sorts first"""
        mass = np.ones(4)
        flow = np.zeros((4, 4))
        flow[1, 1] = 0.5
        flow[0, 3] = flow[3, 0] = 0.5

        with patch("curvflow.isoperimetry.CHUNK_BITS", chunk_bits):
            ratio, mask = _minimum_ratio(mass, flow, workers=2)

        self.assertEqual(ratio, 0.5)
        self.assertEqual(mask, 0b1011)

    @parameterized.expand([(6, 0.4, 111), (8, 0.3, 112), (10, 0.3, 113)])
    def test_bound_holds(self, n, p, seed):
        """The curvature bound never exceeds the brute-force constant"""
        g = random_strongly_connected(n, p, seed)
        d = limit_distance(g)
        for R in candidate_radii(d, 0):
            result = dirichlet_constant(g, 0, R)
            self.assertLessEqual(result.bound, result.I + 1e-9)
            self.assertTrue(all(d.d[0, y] >= R for y in result.argmin_subset))

    def test_block_size_does_not_matter(self):
        """Splitting the enumeration into blocks finds the same subset"""
        g = cycle(9)
        whole = dirichlet_constant(g, 0, 1.0)
        with patch("curvflow.isoperimetry.CHUNK_BITS", 2):
            split = dirichlet_constant(g, 0, 1.0, workers=3)

        self.assertAlmostEqual(split.I, whole.I)
        self.assertEqual(split.argmin_subset, whole.argmin_subset)

    def test_empty_region(self):
        with self.assertRaises(DomainError):
            dirichlet_constant(complete(3), 0, 5.0)

    def test_region_too_large(self):
        with patch("curvflow.isoperimetry.MAX_REGION", 3):
            with self.assertRaises(RegionTooLargeError):
                dirichlet_constant(cycle(6), 0, 1.0)

    def test_radius_must_be_positive(self):
        with self.assertRaises(ValueError):
            dirichlet_constant(complete(3), 0, 0.0)

    def test_to_dict(self):
        document = dirichlet_constant(complete(3), 0, 1.0).to_dict()
        self.assertEqual(
            sorted(document), ["D", "I", "K", "Lambda", "R", "argmin_subset", "bound", "bound_active", "region", "x"]
        )


class TestRadii(unittest.TestCase):
    def test_in_radius(self):
        self.assertEqual(in_radius(cycle(6), 0), 3.0)

    def test_candidate_radii_are_observed(self):
        d = limit_distance(cycle(6))
        radii = candidate_radii(d, 0)
        self.assertEqual(radii, [1.0, 2.0, 3.0])
        self.assertTrue(all(r in d.d[0] for r in radii))


class TestLaplacianComparison(unittest.TestCase):
    @parameterized.expand([(6, 0.3, 121), (8, 0.4, 122)])
    def test_green_identity(self, n, p, seed):
        g = random_strongly_connected(n, p, seed)
        k = mean_transition_kernel(g)
        d = limit_distance(g)
        for omega in ([1], [1, 2, 3], list(range(1, n))):
            self.assertLess(green_residual(k, d, omega, 0), 1e-10)

    def test_triangle_margin(self):
        self.assertAlmostEqual(laplacian_margin(complete(3), 0), 1.0)

    @parameterized.expand([(6, 0.3, 123), (9, 0.3, 124)])
    def test_margin_nonnegative(self, n, p, seed):
        """L rho stays above the comparison function when K is the smallest CURC"""
        g = random_strongly_connected(n, p, seed)
        for x in (0, n - 1):
            self.assertGreaterEqual(laplacian_margin(g, x), -1e-9)

    def test_margin_with_explicit_constant(self):
        """A larger curvature constant tightens the margin"""
        g = complete(3)
        self.assertAlmostEqual(laplacian_margin(g, 0, K=1.5), 0.0)
        self.assertLess(laplacian_margin(g, 0, K=2.0), 0.0)
        np.testing.assert_allclose(laplacian_margin(g, 0, K=0.0), 1.5)
