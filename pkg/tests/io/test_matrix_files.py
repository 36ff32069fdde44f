import json
import tempfile
import unittest
from pathlib import Path
from unittest.mock import patch

import numpy as np
import polars as pl
from parameterized import parameterized

from curvflow.errors import GraphFormatError
from curvflow.io.matrix_files import MatrixCsvReader, MatrixCsvWriter, MatrixJsonReader, TableCsvWriter, read_matrix


class TestMatrixReaders(unittest.TestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.dir = Path(self.tmp.name)

    def tearDown(self):
        self.tmp.cleanup()

    def test_csv(self):
        target = self.dir / "m.csv"
        target.write_text("# epoch 3\n0,0.25\n1,0\n")
        np.testing.assert_array_equal(MatrixCsvReader().read(target), [[0.0, 0.25], [1.0, 0.0]])

    def test_csv_ragged(self):
        target = self.dir / "m.csv"
        target.write_text("0,1\n1\n")
        with self.assertRaises(GraphFormatError):
            MatrixCsvReader().read(target)

    def test_csv_non_numeric(self):
        target = self.dir / "m.csv"
        target.write_text("0,a\n1,0\n")
        with self.assertRaises(GraphFormatError):
            MatrixCsvReader().read(target)

    def test_csv_missing(self):
        with self.assertLogs("curvflow.io.matrix_files", level="ERROR"):
            with self.assertRaises(GraphFormatError):
                MatrixCsvReader().read(self.dir / "missing.csv")

    @patch("curvflow.io.matrix_files.pl.read_csv")
    def test_half_written_file_is_retried(self, mock):
        """A parse failure is retried before the matrix is accepted"""
        mock.side_effect = [pl.exceptions.ComputeError("truncated"), pl.DataFrame({"a": [0.0, 1.0], "b": [1.0, 0.0]})]

        matrix = MatrixCsvReader().read(self.dir / "m.csv")

        self.assertEqual(mock.call_count, 2)
        np.testing.assert_array_equal(matrix, [[0.0, 1.0], [1.0, 0.0]])

    @patch("curvflow.io.matrix_files.pl.read_csv")
    def test_retries_give_up(self, mock):
        mock.side_effect = pl.exceptions.ComputeError("truncated")

        with self.assertLogs("curvflow.io.matrix_files", level="ERROR"):
            with self.assertRaises(GraphFormatError):
                MatrixCsvReader().read(self.dir / "m.csv")
        self.assertEqual(mock.call_count, 3)

    def test_json(self):
        target = self.dir / "m.json"
        target.write_text(json.dumps({"n": 2, "rows": [[0, 0.5], [0.5, 0]]}))
        np.testing.assert_array_equal(read_matrix(target), [[0.0, 0.5], [0.5, 0.0]])

    @parameterized.expand(
        [
            ("no rows", {"n": 2}),
            ("wrong n", {"n": 3, "rows": [[0, 1], [1, 0]]}),
            ("ragged", {"rows": [[0, 1], [1]]}),
            ("text", {"rows": [[0, "x"], [1, 0]]}),
        ]
    )
    def test_json_malformed(self, _, document):
        target = self.dir / "m.json"
        target.write_text(json.dumps(document))
        with self.assertRaises(GraphFormatError):
            MatrixJsonReader().read(target)


class TestCsvWriters(unittest.TestCase):
    def test_table(self):
        frame = pl.DataFrame({"x": [0], "y": [1], "kappa": [1 / 3]})
        self.assertEqual(TableCsvWriter().render(frame), "x,y,kappa\n0,1,0.333333333333\n")

    def test_matrix_has_no_header(self):
        text = MatrixCsvWriter().render(np.array([[0.0, 2 / 3], [1.0, 0.0]]))
        self.assertEqual(text, "0.0,0.666666666667\n1.0,0.0\n")
