import json
import tempfile
import unittest
from pathlib import Path

import numpy as np
from parameterized import parameterized

from curvflow.errors import (
    DimensionError,
    EmptyGraphError,
    GraphFormatError,
    NonPositiveWeightError,
    NotStronglyConnectedError,
    VertexIndexError,
)
from curvflow.graph_core import (
    DirectedWeightedGraph,
    as_dense_matrix,
    assert_strongly_connected,
    from_dense,
    load_graph,
    random_walk_matrix,
    save_graph,
    strongly_connected_components,
)
from tests.graph_factory import asymmetric_pair, complete, directed_cycle, path


class TestDirectedWeightedGraph(unittest.TestCase):
    def test_edges_are_sorted(self):
        """Edges come back sorted by (src, dst) whatever the input order"""
        g = DirectedWeightedGraph(3, ((2, 0, 1.0), (0, 2, 1.0), (0, 1, 1.0)))
        self.assertEqual(g.edges, ((0, 1, 1.0), (0, 2, 1.0), (2, 0, 1.0)))

    @parameterized.expand([(0.0,), (-1.0,), (float("inf"),), (float("nan"),)])
    def test_nonpositive_weight_rejected(self, weight):
        """Weights must be finite and strictly positive"""
        with self.assertRaises(NonPositiveWeightError):
            DirectedWeightedGraph(2, ((0, 1, weight),))

    def test_index_out_of_range(self):
        """Indices must lie in [0, n)"""
        with self.assertRaises(VertexIndexError):
            DirectedWeightedGraph(2, ((0, 2, 1.0),))

    def test_duplicate_edge(self):
        with self.assertRaises(GraphFormatError):
            DirectedWeightedGraph(2, ((0, 1, 1.0), (0, 1, 2.0)))

    def test_zero_vertices(self):
        with self.assertRaises(GraphFormatError):
            DirectedWeightedGraph(0, ())

    def test_from_edges_drops_self_loops(self):
        """Self-loops are dropped and counted"""
        with self.assertLogs("curvflow.graph_core", level="WARNING"):
            g = DirectedWeightedGraph.from_edges(2, [(0, 0, 5.0), (0, 1, 1.0), (1, 0, 1.0)])

        self.assertEqual(len(g.edges), 2)
        self.assertEqual(g.metadata["self_loops_dropped"], 1)

    def test_weight_matrix(self):
        np.testing.assert_array_equal(asymmetric_pair().weight_matrix(), [[0.0, 2.0], [1.0, 0.0]])

    def test_relabeled_moves_edges(self):
        g = asymmetric_pair().relabeled([1, 0])
        np.testing.assert_array_equal(g.weight_matrix(), [[0.0, 1.0], [2.0, 0.0]])

    def test_relabeled_rejects_non_permutation(self):
        with self.assertRaises(ValueError):
            asymmetric_pair().relabeled([0, 0])

    def test_scaled(self):
        np.testing.assert_array_equal(asymmetric_pair().scaled(3).weight_matrix(), [[0.0, 6.0], [3.0, 0.0]])

    def test_symmetric_support(self):
        self.assertTrue(complete(3).has_symmetric_support())
        self.assertFalse(directed_cycle(3).has_symmetric_support())

    def test_unweighted_undirected(self):
        self.assertTrue(path(3).is_unweighted_undirected())
        self.assertFalse(asymmetric_pair().is_unweighted_undirected())

    def test_out_neighbors(self):
        self.assertEqual(complete(4).out_neighbors(2), [0, 1, 3])

    def test_edge_lookups(self):
        g = directed_cycle(4)
        self.assertTrue(g.has_edge(3, 0))
        self.assertFalse(g.has_edge(0, 3))
        self.assertEqual(g.out_neighbors(3), [0])
        self.assertEqual(g.out_neighbors(7), [])


class TestConnectivity(unittest.TestCase):
    def test_strongly_connected(self):
        """A directed cycle is one component"""
        assert_strongly_connected(directed_cycle(4))

    def test_components_are_reported(self):
        """The error lists every component, sorted"""
        g = DirectedWeightedGraph(3, ((0, 1, 1.0), (1, 0, 1.0), (1, 2, 1.0)))
        with self.assertRaises(NotStronglyConnectedError) as ctx:
            assert_strongly_connected(g, "spectral")

        self.assertEqual(ctx.exception.components, [[0, 1], [2]])
        self.assertEqual(ctx.exception.module, "spectral")
        self.assertEqual(strongly_connected_components(g), [[0, 1], [2]])

    def test_random_walk_rows_sum_to_one(self):
        W = random_walk_matrix(asymmetric_pair())
        np.testing.assert_allclose(W.sum(axis=1), 1.0)

    def test_random_walk_needs_out_edges(self):
        g = DirectedWeightedGraph(2, ((0, 1, 1.0),))
        with self.assertRaises(DimensionError):
            random_walk_matrix(g)


class TestDenseMatrices(unittest.TestCase):
    def test_not_square(self):
        with self.assertRaises(DimensionError):
            as_dense_matrix(np.ones((2, 3)))

    def test_wrong_dimension(self):
        with self.assertRaises(DimensionError):
            as_dense_matrix(np.ones((2, 2)), n=3)

    def test_non_finite(self):
        with self.assertRaises(GraphFormatError):
            as_dense_matrix([[0.0, np.nan], [1.0, 0.0]])

    def test_from_dense_threshold(self):
        """Entries under the threshold and the diagonal are dropped and counted"""
        matrix = [[0.5, 0.3, 0.2], [0.4, 0.1, 0.5], [0.6, 0.05, 0.35]]
        g = from_dense(matrix, threshold=0.2)

        self.assertEqual(g.edges, ((0, 1, 0.3), (0, 2, 0.2), (1, 0, 0.4), (1, 2, 0.5), (2, 0, 0.6)))
        self.assertEqual(g.metadata["below_threshold_dropped"], 1)
        self.assertEqual(g.metadata["self_loops_dropped"], 3)

    def test_from_dense_warns_about_diagonal(self):
        with self.assertLogs("curvflow.graph_core", level="WARNING") as logs:
            g = from_dense([[0.5, 1.0], [1.0, 0.0]], name="attention")

        self.assertEqual(g.metadata["self_loops_dropped"], 1)
        self.assertIn("Dropped 1 self-loop(s) while building graph 'attention'", logs.output[0])

    def test_from_dense_threshold_is_inclusive(self):
        g = from_dense([[0.0, 0.25], [0.25, 0.0]], threshold=0.25)
        self.assertEqual(len(g.edges), 2)

    def test_from_dense_empty(self):
        with self.assertRaises(EmptyGraphError):
            from_dense(np.eye(3))

    def test_from_dense_negative(self):
        with self.assertRaises(NonPositiveWeightError):
            from_dense([[0.0, -1.0], [1.0, 0.0]])


class TestGraphFiles(unittest.TestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.dir = Path(self.tmp.name)

    def tearDown(self):
        self.tmp.cleanup()

    def test_save_and_load(self):
        """A saved graph loads back equal, weights included"""
        g = DirectedWeightedGraph.from_edges(3, [(0, 1, 0.1 + 0.2), (1, 2, 1 / 3), (2, 0, 7.0)], "tri")
        target = self.dir / "tri.json"
        save_graph(g, target)

        self.assertEqual(load_graph(target), g)

    def test_edge_list_format(self):
        """Edge lists skip comments and blank lines, and n comes from the largest index"""
        target = self.dir / "g.txt"
        target.write_text("# a comment\n0 1 2.5\n\n1 0 1\n")

        g = load_graph(target)
        self.assertEqual(g.n, 2)
        self.assertEqual(g.edges, ((0, 1, 2.5), (1, 0, 1.0)))

    def test_json_missing_n(self):
        target = self.dir / "bad.json"
        target.write_text(json.dumps({"edges": [[0, 1, 1.0]]}))
        with self.assertRaises(GraphFormatError):
            load_graph(target)

    def test_missing_file(self):
        with self.assertRaises(GraphFormatError):
            load_graph(self.dir / "nope.json")
