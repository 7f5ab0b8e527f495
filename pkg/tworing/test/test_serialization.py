"""
Tests for the serialization module.
"""
import json
import shutil
import tempfile
import unittest
from pathlib import Path

import numpy as np
import sympy

from tworing import serialization
from tworing.errors import InvalidParamsError


class TestComplexValues(unittest.TestCase):
    """Test cases for complex number encoding."""

    def test_complex_to_json(self):
        """Test the {"re", "im"} layout."""
        self.assertEqual(serialization.complex_to_json(1.5 - 2j), {'re': 1.5, 'im': -2.0})
        self.assertEqual(serialization.complex_to_json(sympy.Rational(1, 4)), {'re': 0.25, 'im': 0.0})

    def test_negative_zero(self):
        """Test that -0.0 is written as 0.0."""
        encoded = serialization.complex_to_json(complex(-0.0, -0.0))
        self.assertEqual(json.dumps(encoded), '{"re": 0.0, "im": 0.0}')

    def test_complex_from_json(self):
        """Test the accepted input forms."""
        self.assertEqual(serialization.complex_from_json({'re': 1, 'im': 2}), 1 + 2j)
        self.assertEqual(serialization.complex_from_json({'re': 3}), 3 + 0j)
        self.assertEqual(serialization.complex_from_json([0.5, -1]), 0.5 - 1j)
        self.assertEqual(serialization.complex_from_json(4), 4 + 0j)

    def test_malformed_complex(self):
        """Test that malformed values are rejected."""
        for value in ({'im': 1}, '1+2j', True, [1, 2, 3]):
            with self.assertRaises(InvalidParamsError, msg=repr(value)):
                serialization.complex_from_json(value)


class TestReports(unittest.TestCase):
    """Test cases for JSON reports."""

    def test_report_header(self):
        """Test that reports carry schema and kind."""
        doc = serialization.report('eta', {'basis': 'monomial'})
        self.assertEqual(doc['schema'], serialization.SCHEMA)
        self.assertEqual(doc['kind'], 'eta')

    def test_to_jsonable(self):
        """Test conversion of numpy, sympy and complex values."""
        doc = serialization.to_jsonable(
            {
                'int': np.int64(3),
                'flag': np.bool_(True),
                'nan': float('nan'),
                'exact': sympy.Rational(-13, 36),
                'z': 1j,
                'mask': np.array([True, False]),
                'vector': np.array([1.0, -0.0]),
            }
        )
        self.assertEqual(doc['int'], 3)
        self.assertIs(doc['flag'], True)
        self.assertIsNone(doc['nan'])
        self.assertAlmostEqual(doc['exact'], -13 / 36)
        self.assertEqual(doc['z'], {'re': 0.0, 'im': 1.0})
        self.assertEqual(doc['mask'], [True, False])
        self.assertEqual(doc['vector'], [1.0, 0.0])
        json.dumps(doc)

    def test_matrix_to_json_is_row_major(self):
        """Test that the outer list holds rows."""
        encoded = serialization.matrix_to_json(np.array([[1, 2], [3, 4]]))
        self.assertEqual(encoded[0][1], {'re': 2.0, 'im': 0.0})
        self.assertEqual(encoded[1][0], {'re': 3.0, 'im': 0.0})


class TestTables(unittest.TestCase):
    """Test cases for CSV tables."""

    def test_matrix_frame(self):
        """Test the long-format matrix table."""
        frame = serialization.matrix_frame(np.array([[1, 2j], [0, -1]]))
        self.assertEqual(list(frame.columns), ['row', 'col', 're', 'im'])
        self.assertEqual(len(frame), 4)
        self.assertEqual(frame.loc[1, 'im'], 2.0)
        self.assertEqual(frame.loc[3, 're'], -1.0)

    def test_matrix_frame_exact(self):
        """Test that exact entries are evaluated."""
        frame = serialization.matrix_frame(np.array([[sympy.Rational(1, 2)]], dtype=object))
        self.assertEqual(frame.loc[0, 're'], 0.5)

    def test_solution_frame(self):
        """Test one row per (r, j) with block entries and residual."""
        blocks = np.broadcast_to(np.eye(2, dtype=complex), (2, 3, 2, 2)).copy()
        blocks[1, :, 0, 1] = 0.5j
        r = np.array([0.5, 1.0, 1.5])
        frame = serialization.solution_frame(blocks, r, np.zeros(6))
        self.assertEqual(len(frame), 6)
        self.assertIn('g01_im', frame.columns)
        self.assertIn('residual', frame.columns)
        self.assertEqual(list(frame['j']), [0, 0, 0, 1, 1, 1])
        self.assertEqual(frame.loc[4, 'g01_im'], 0.5)
        self.assertEqual(frame.loc[4, 'r'], 1.0)

    def test_pretty_matrix(self):
        """Test the aligned rendering."""
        text = serialization.pretty_matrix(np.array([[1, 0.5j], [-2, 0]]))
        self.assertEqual(len(text.splitlines()), 2)
        self.assertIn('0+0.5i', text)


class TestBoundaryFile(unittest.TestCase):
    """Test cases for reading boundary data."""

    def setUp(self):
        """Set up a temporary directory."""
        self.test_dir = tempfile.mkdtemp()

    def tearDown(self):
        """Clean up the temporary directory."""
        shutil.rmtree(self.test_dir)

    def write(self, name, content):
        path = Path(self.test_dir) / name
        path.write_text(content if isinstance(content, str) else json.dumps(content))
        return str(path)

    def test_load(self):
        """Test loading left and right blocks."""
        block = [[{'re': 2, 'im': 0}, {'re': 0, 'im': 1}], [{'re': 0, 'im': -1}, 1]]
        path = self.write('bc.json', {'left': [block, block], 'right': [block, block]})
        data = serialization.load_boundary_json(path)
        self.assertEqual(data['left'].shape, (2, 2, 2))
        self.assertEqual(data['right'][1, 0, 1], 1j)
        self.assertNotIn('initial', data)

    def test_missing_file(self):
        """Test that a missing file is reported."""
        with self.assertRaises(InvalidParamsError):
            serialization.load_boundary_json(str(Path(self.test_dir) / 'missing.json'))

    def test_malformed_json(self):
        """Test that invalid JSON is reported with its position."""
        path = self.write("bad.json", '{"left": [')
        with self.assertRaises(InvalidParamsError) as ctx:
            serialization.load_boundary_json(path)
        self.assertIn('line 1', str(ctx.exception))

    def test_missing_keys(self):
        """Test that left and right are required."""
        path = self.write('half.json', {'left': [[[1, 0], [0, 1]]]})
        with self.assertRaises(InvalidParamsError):
            serialization.load_boundary_json(path)

    def test_shape_mismatch(self):
        """Test that left and right must hold the same number of blocks."""
        eye = [[1, 0], [0, 1]]
        path = self.write('mismatch.json', {'left': [eye], 'right': [eye, eye]})
        with self.assertRaises(InvalidParamsError):
            serialization.load_boundary_json(path)

    def test_not_blocks(self):
        """Test that entries must be 2x2 blocks."""
        path = self.write('flat.json', {'left': [1, 2], 'right': [1, 2]})
        with self.assertRaises(InvalidParamsError):
            serialization.load_boundary_json(path)


class TestWriteText(unittest.TestCase):
    """Test cases for file output."""

    def setUp(self):
        """Set up a temporary directory."""
        self.test_dir = tempfile.mkdtemp()

    def tearDown(self):
        """Clean up the temporary directory."""
        shutil.rmtree(self.test_dir)

    def test_trailing_newline(self):
        """Test that written files end with a newline."""
        path = Path(self.test_dir) / 'out.txt'
        serialization.write_text('a,b', str(path))
        self.assertEqual(path.read_text(), 'a,b\n')


if __name__ == '__main__':
    unittest.main()
