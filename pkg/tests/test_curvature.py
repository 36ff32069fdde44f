import unittest

import networkx as nx
import numpy as np
from parameterized import parameterized

from curvflow.curvature import (
    CurvatureKind,
    CurvatureReport,
    asymptotic_mean_curvature,
    curc,
    curc_eps,
    forman,
    forman_report,
    idle_curc,
    idle_curc_alpha,
    lb1,
    lb2,
    ollivier,
    resolve_pairs,
    reverse_mean_curvature,
)
from curvflow.errors import DomainError, NotStronglyConnectedError, VertexIndexError
from curvflow.graph_core import DirectedWeightedGraph
from curvflow.metric import epsilon_star
from tests.graph_factory import (
    asymmetric_pair,
    complete,
    cycle,
    directed_cycle,
    double_star,
    from_undirected,
    path,
    random_strongly_connected,
    random_two_way,
    symmetric_pair,
)


class TestResolvePairs(unittest.TestCase):
    def test_all(self):
        self.assertEqual(resolve_pairs(complete(3)), [(0, 1), (0, 2), (1, 0), (1, 2), (2, 0), (2, 1)])

    def test_edges(self):
        self.assertEqual(resolve_pairs(directed_cycle(3), "edges"), [(0, 1), (1, 2), (2, 0)])

    def test_explicit_order_kept(self):
        self.assertEqual(resolve_pairs(complete(3), [(2, 0), (0, 1)]), [(2, 0), (0, 1)])

    def test_out_of_range(self):
        with self.assertRaises(VertexIndexError):
            resolve_pairs(complete(3), [(0, 3)])

    def test_repeated_vertex(self):
        with self.assertRaises(ValueError):
            resolve_pairs(complete(3), [(1, 1)])

    def test_unknown_selection(self):
        with self.assertRaises(ValueError):
            resolve_pairs(complete(3), "some")


class TestCurvatureReport(unittest.TestCase):
    def test_summary(self):
        report = CurvatureReport(CurvatureKind.CURC, {(0, 1): -1.0, (1, 0): 0.5, (0, 2): 0.0})
        summary = report.summary

        self.assertEqual(summary["count"], 3)
        self.assertEqual(summary["min"], -1.0)
        self.assertEqual(summary["max"], 0.5)
        self.assertAlmostEqual(summary["mean"], -1 / 6)
        self.assertEqual(summary["quantiles"]["p50"], 0.0)

    def test_to_dict_keeps_pair_order(self):
        report = CurvatureReport(CurvatureKind.LB1, {(1, 0): 0.5, (0, 1): -1.0}, {"eps": 0.1})
        document = report.to_dict()

        self.assertEqual(document["kind"], "lb1")
        self.assertEqual(document["parameters"], {"eps": 0.1})
        self.assertEqual(document["pairs"][0], {"x": 1, "y": 0, "kappa": 0.5})

    def test_to_frame(self):
        frame = CurvatureReport(CurvatureKind.CURC, {(0, 1): 0.25}).to_frame()
        self.assertEqual(frame.columns, ["x", "y", "kappa"])
        self.assertEqual(frame.row(0), (0, 1, 0.25))

    def test_empty(self):
        with self.assertRaises(ValueError):
            CurvatureReport(CurvatureKind.CURC, {})


class TestCurc(unittest.TestCase):
    def test_symmetric_pair(self):
        """Two vertices swapping places have zero curvature"""
        values = curc(symmetric_pair()).values
        self.assertAlmostEqual(values[(0, 1)], 0.0)
        self.assertAlmostEqual(values[(1, 0)], 0.0)

    def test_asymmetric_pair(self):
        """Curvature depends on the direction of the pair"""
        values = curc(asymmetric_pair()).values
        self.assertAlmostEqual(values[(0, 1)], -1.0)
        self.assertAlmostEqual(values[(1, 0)], 0.5)

    def test_triangle(self):
        for kappa in curc(complete(3)).values.values():
            self.assertAlmostEqual(kappa, 0.5)

    def test_workers_do_not_change_values(self):
        g = random_strongly_connected(7, 0.3, 61)
        self.assertEqual(curc(g, workers=1).values, curc(g, workers=4).values)

    def test_pair_selection(self):
        report = curc(complete(4), [(3, 1)])
        self.assertEqual(list(report.values), [(3, 1)])

    @parameterized.expand([(6, 0.3, 62), (8, 0.25, 63)])
    def test_upper_bound(self, n, p, seed):
        """kappa <= 1 everywhere"""
        for kappa in curc(random_strongly_connected(n, p, seed)).values.values():
            self.assertLessEqual(kappa, 1.0 + 1e-9)

    def test_relabeling(self):
        """Relabeling the vertices relabels the curvature"""
        g = random_strongly_connected(6, 0.4, 64)
        permutation = [3, 5, 0, 1, 4, 2]
        original = curc(g).values
        moved = curc(g.relabeled(permutation)).values

        for (x, y), kappa in original.items():
            self.assertAlmostEqual(moved[(permutation[x], permutation[y])], kappa, places=9)

    def test_scaling(self):
        """Scaling every weight leaves curvature unchanged"""
        g = random_strongly_connected(6, 0.4, 65)
        scaled = curc(g.scaled(3.0)).values
        for pair, kappa in curc(g).values.items():
            self.assertAlmostEqual(scaled[pair], kappa, places=9)

    def test_not_strongly_connected(self):
        g = DirectedWeightedGraph(3, ((0, 1, 1.0), (1, 0, 1.0), (1, 2, 1.0)))
        with self.assertRaises(NotStronglyConnectedError) as ctx:
            curc(g)
        self.assertEqual(ctx.exception.module, "curvature")


class TestHopCurc(unittest.TestCase):
    def test_matches_limit_when_unweighted(self):
        g = cycle(5)
        limit = curc(g).values
        report = curc(g, metric="hop")

        self.assertEqual(report.parameters, {"metric": "hop"})
        for pair, kappa in report.values.items():
            self.assertAlmostEqual(kappa, limit[pair], places=9)

    def test_asymmetric_pair(self):
        """Both directions are one hop, so point-mass transport gives zero either way"""
        values = curc(asymmetric_pair(), metric="hop").values
        self.assertAlmostEqual(values[(0, 1)], 0.0)
        self.assertAlmostEqual(values[(1, 0)], 0.0)

    def test_epsilon_mode_is_rejected(self):
        with self.assertRaises(DomainError):
            curc(complete(3), metric="epsilon")


class TestCurcEps(unittest.TestCase):
    def test_matches_curc_below_threshold(self):
        """With eps at or below eps* the masked metric gives the same curvature"""
        g = random_strongly_connected(7, 0.3, 71)
        report = curc_eps(g, epsilon_star(g))
        exact = curc(g).values

        self.assertEqual(report.parameters, {"eps": epsilon_star(g)})
        for pair, kappa in report.values.items():
            self.assertAlmostEqual(kappa, exact[pair], places=9)

    def test_eps_must_be_positive(self):
        with self.assertRaises(DomainError):
            curc_eps(complete(3), 0.0)

    def test_huge_eps_on_triangle(self):
        """Every distance becomes 1/eps, which cancels out of the ratio"""
        for kappa in curc_eps(complete(3), 50.0).values.values():
            self.assertAlmostEqual(kappa, 0.5)

    @parameterized.expand(
        [
            ("below both weights", 0.5, -1.0, 0.5),
            ("between the weights", 1.5, -1 / 3, 0.25),
            ("at the heavier weight", 2.0, 0.0, 0.0),
            ("above both weights", 4.0, 0.0, 0.0),
        ]
    )
    def test_two_weights(self, _, eps, forward, backward):
        """Masking omega(1, 0) = 1 shortens d(1, 0) to 1/eps while d(0, 1) stays 1/2"""
        values = curc_eps(asymmetric_pair(), eps).values
        self.assertAlmostEqual(values[(0, 1)], forward)
        self.assertAlmostEqual(values[(1, 0)], backward)

    def test_not_monotone_in_eps(self):
        """Raising eps can raise the curvature of one direction while lowering the other"""
        sweep = [curc_eps(asymmetric_pair(), eps).values for eps in (0.5, 1.25, 1.5, 1.75, 2.0)]
        forward = [values[(0, 1)] for values in sweep]
        backward = [values[(1, 0)] for values in sweep]

        self.assertEqual(forward, sorted(forward))
        self.assertEqual(backward, sorted(backward, reverse=True))
        self.assertLess(forward[0], forward[-1])


class TestBaselines(unittest.TestCase):
    @parameterized.expand([(3, 0.5), (4, 0.0), (6, 0.0)])
    def test_ollivier_on_cycles(self, n, expected):
        """Triangles are positively curved and longer cycles are flat"""
        g = complete(3) if n == 3 else cycle(n)
        for kappa in ollivier(g, "edges").values.values():
            self.assertAlmostEqual(kappa, expected)

    @parameterized.expand([("C4 antipodes", 4, 1.0), ("C6 two apart", 6, 0.5)])
    def test_ollivier_off_edges(self, _, n, expected):
        self.assertAlmostEqual(ollivier(cycle(n), [(0, 2)]).values[(0, 2)], expected)

    def test_ollivier_on_tree(self):
        self.assertAlmostEqual(ollivier(double_star(), [(0, 1)]).values[(0, 1)], -2 / 3)

    def test_ollivier_idleness(self):
        """Half the mass stays home, so only a quarter has to move"""
        report = ollivier(complete(3), [(0, 1)], alpha=0.5)
        self.assertEqual(report.parameters, {"alpha": 0.5})
        self.assertAlmostEqual(report.values[(0, 1)], 0.75)

    def test_ollivier_needs_unweighted(self):
        with self.assertRaises(DomainError):
            ollivier(asymmetric_pair())

    @parameterized.expand([("K3", complete(3), 3), ("P2", path(2), 2), ("C4", cycle(4), 0)])
    def test_forman(self, _, g, expected):
        self.assertEqual(forman(g, (0, 1)), expected)

    def test_forman_non_edge(self):
        with self.assertRaises(DomainError):
            forman(cycle(4), (0, 2))

    def test_forman_report(self):
        report = forman_report(complete(4))
        self.assertEqual(len(report.values), 12)
        self.assertEqual(set(report.values.values()), {4 - 3 - 3 + 3 * 2.0})


class TestLowerBounds(unittest.TestCase):
    def test_lb1_pairs(self):
        self.assertAlmostEqual(lb1(symmetric_pair()).values[(0, 1)], 0.0)

        values = lb1(asymmetric_pair()).values
        self.assertAlmostEqual(values[(0, 1)], -1.0)
        self.assertAlmostEqual(values[(1, 0)], 0.0)

    @parameterized.expand([(6, 0.3, 81), (8, 0.3, 82), (10, 0.2, 83)])
    def test_lb1_below_curc(self, n, p, seed):
        g = random_strongly_connected(n, p, seed)
        exact = curc(g).values
        for pair, bound in lb1(g).values.items():
            self.assertLessEqual(bound, exact[pair] + 1e-9)

    @parameterized.expand([("K3", complete(3), 0.5), ("C4", cycle(4), 0.0), ("C6", cycle(6), 0.0)])
    def test_lb2_values(self, _, g, expected):
        for kappa in lb2(g).values.values():
            self.assertAlmostEqual(kappa, expected)

    def test_lb2_tree(self):
        self.assertAlmostEqual(lb2(double_star(), [(0, 1)]).values[(0, 1)], -2 / 3)

    def test_lb2_four_cycles_help(self):
        """On the cube every edge sits in two squares, which lift the bound to zero"""
        cube = from_undirected(nx.convert_node_labels_to_integers(nx.hypercube_graph(3)), "Q3")
        with_squares = lb2(cube).values
        without = lb2(cube, use_four_cycles=False).values

        self.assertEqual(len(with_squares), 24)
        for pair, bound in without.items():
            self.assertAlmostEqual(bound, -2 / 3)
            self.assertAlmostEqual(with_squares[pair], 0.0)

    @parameterized.expand([("K4", complete(4)), ("C5", cycle(5)), ("star", double_star())])
    def test_lb2_below_curc_when_unweighted(self, _, g):
        """Without weights the hop and limit distances agree, so lb2 bounds plain CURC"""
        exact = curc(g).values
        for pair, bound in lb2(g).values.items():
            self.assertLessEqual(bound, exact[pair] + 1e-9)

    def test_lb2_below_hop_curc(self):
        """lb2 bounds hop curvature on weighted graphs with two-way edges"""
        for seed in range(50):
            g = random_two_way(4 + seed % 5, 0.35, 200 + seed)
            exact = curc(g, "edges", metric="hop").values
            bounds = lb2(g)

            self.assertEqual(bounds.parameters["metric"], "hop")
            for pair, bound in bounds.values.items():
                self.assertLessEqual(bound, exact[pair] + 1e-7, f"seed {200 + seed}, pair {pair}")

    def test_lb2_needs_symmetric_support(self):
        with self.assertRaises(DomainError):
            lb2(directed_cycle(3))

    def test_lb2_needs_adjacent_pairs(self):
        with self.assertRaises(DomainError):
            lb2(cycle(4), [(0, 2)])


class TestIdleCurvature(unittest.TestCase):
    def test_triangle(self):
        for kappa in idle_curc(complete(3)).values.values():
            self.assertAlmostEqual(kappa, 1.5, places=8)

    def test_symmetric_pair(self):
        self.assertAlmostEqual(idle_curc(symmetric_pair()).values[(0, 1)], 2.0, places=8)

    @parameterized.expand([(6, 0.3, 91), (8, 0.3, 92)])
    def test_above_curc(self, n, p, seed):
        """Idle curvature is at least CURC"""
        g = random_strongly_connected(n, p, seed)
        exact = curc(g).values
        for pair, kappa in idle_curc(g).values.items():
            self.assertGreaterEqual(kappa, exact[pair] - 1e-8)

    def test_alpha_one_is_curc(self):
        g = random_strongly_connected(6, 0.3, 93)
        exact = curc(g).values
        for pair, kappa in idle_curc_alpha(g, 1.0).values.items():
            self.assertAlmostEqual(kappa, exact[pair], places=9)

    def test_monotone_in_alpha(self):
        """Less movement means more curvature, approaching the idle limit"""
        g = random_strongly_connected(6, 0.4, 94)
        pairs = [(0, 1), (2, 5), (4, 3)]
        limit = idle_curc(g, pairs).values
        previous = {pair: -np.inf for pair in pairs}
        for alpha in (1.0, 0.5, 0.1, 0.01):
            current = idle_curc_alpha(g, alpha, pairs).values
            for pair in pairs:
                self.assertGreaterEqual(current[pair], previous[pair] - 1e-8)
                self.assertLessEqual(current[pair], limit[pair] + 1e-8)
            previous = current

    @parameterized.expand([(0.0,), (1.5,)])
    def test_alpha_range(self, alpha):
        with self.assertRaises(ValueError):
            idle_curc_alpha(complete(3), alpha)


class TestMeanCurvature(unittest.TestCase):
    def test_triangle(self):
        self.assertAlmostEqual(asymptotic_mean_curvature(complete(3), 0), -1.0)
        self.assertAlmostEqual(reverse_mean_curvature(complete(3), 0), -1.0)

    def test_asymmetric_pair(self):
        self.assertAlmostEqual(asymptotic_mean_curvature(asymmetric_pair(), 0), -0.5)
        self.assertAlmostEqual(reverse_mean_curvature(asymmetric_pair(), 0), -1.0)

    def test_vertex_range(self):
        with self.assertRaises(VertexIndexError):
            asymptotic_mean_curvature(complete(3), 3)
