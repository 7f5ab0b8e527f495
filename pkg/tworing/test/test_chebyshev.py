"""
Tests for the chebyshev module.
"""
import math
import unittest

import sympy

from tworing import chebyshev
from tworing.chebyshev import ChebyshevKind
from tworing.errors import InvalidParamsError


class TestPolynomials(unittest.TestCase):
    """Test cases for the two Chebyshev families."""

    def test_u_low_degrees(self):
        """Test U_0 = 1, U_1 = 2t, U_2 = 4t^2 - 1, U_3 = 8t^3 - 4t."""
        self.assertEqual(chebyshev.u_poly(0), (1,))
        self.assertEqual(chebyshev.u_poly(1), (0, 2))
        self.assertEqual(chebyshev.u_poly(2), (-1, 0, 4))
        self.assertEqual(chebyshev.u_poly(3), (0, -4, 0, 8))

    def test_u_tilde_low_degrees(self):
        """Test U~_1 = -2t and U~_2 = 4t^2 + 1."""
        self.assertEqual(chebyshev.u_tilde_poly(0), (1,))
        self.assertEqual(chebyshev.u_tilde_poly(1), (0, -2))
        self.assertEqual(chebyshev.u_tilde_poly(2), (1, 0, 4))

    def test_tilde_identity(self):
        """Test U~_k(t) = i^k U_k(it) for k up to 14."""
        for k in range(15):
            self.assertTrue(chebyshev.tilde_identity_holds(k), f'k={k}')

    def test_trigonometric_identity(self):
        """Test U_k(cos theta) sin theta = sin((k+1) theta)."""
        theta = 0.9
        for k in range(12):
            value = chebyshev.evaluate(chebyshev.u_poly(k), math.cos(theta)) * math.sin(theta)
            self.assertAlmostEqual(value, math.sin((k + 1) * theta), places=12)

    def test_tilde_trigonometric_identity(self):
        """Test U~_k(-i cos theta) = i^k sin((k+1) theta) / sin theta at theta = 0.4."""
        theta = 0.4
        for k in range(9):
            value = chebyshev.evaluate(chebyshev.u_tilde_poly(k), -1j * math.cos(theta))
            expected = 1j ** k * math.sin((k + 1) * theta) / math.sin(theta)
            self.assertAlmostEqual(abs(value - expected), 0.0, places=12, msg=f'k={k}')

    def test_sequence_table(self):
        """Test that the sequence table agrees with single lookups."""
        seq = chebyshev.chebyshev_sequence(ChebyshevKind.U_TILDE, 6)
        self.assertEqual(len(seq.coeff_table), 7)
        self.assertEqual(seq.coeff_table[5], chebyshev.u_tilde_poly(5))

    def test_negative_degree(self):
        """Test that negative degrees are rejected."""
        with self.assertRaises(InvalidParamsError):
            chebyshev.u_poly(-1)

    def test_as_expr(self):
        """Test the sympy rendering."""
        t = sympy.Symbol('t')
        self.assertEqual(chebyshev.as_expr(chebyshev.u_poly(2), t), 4 * t ** 2 - 1)

    def test_generating_function(self):
        """Test the partial sums against 1/(1 - 2tz + z^2)."""
        t, z = 0.3, 0.2
        self.assertAlmostEqual(chebyshev.generating_partial_sum(t, z, 60), 1 / (1 - 2 * t * z + z * z), places=12)


class TestDivisionLemma(unittest.TestCase):
    """Test cases for the division of x^{d+2} by x^2 + 2tx - 1."""

    def test_d0(self):
        """Test x^2 = 1 (x^2 + 2tx - 1) - 2t x + 1."""
        t = sympy.Symbol('t')
        result = chebyshev.division_lemma(0)
        self.assertEqual(result.quotient, (1,))
        self.assertEqual(result.remainder, (-2 * t, 1))

    def test_symbolic_identity(self):
        """Test the lemma for d = 0..12 against polynomial long division."""
        for d in range(13):
            self.assertTrue(chebyshev.verify_division_lemma(d), f'd={d}')

    def test_rational_value(self):
        """Test the lemma at a rational t."""
        self.assertTrue(chebyshev.verify_division_lemma(5, sympy.Rational(2, 3)))

    def test_negative_d(self):
        """Test that negative d is rejected."""
        with self.assertRaises(InvalidParamsError):
            chebyshev.division_lemma(-1)

    def test_reduce_by_lemma(self):
        """Test y^2 = 1 - 2c y modulo y^2 + 2cy - 1."""
        c = sympy.Rational(1, 2)
        self.assertEqual(chebyshev.reduce_by_lemma([0, 0, 1], c), (1, -1))
        # y^3 = -2c + (1 + 4c^2) y
        self.assertEqual(chebyshev.reduce_by_lemma([0, 0, 0, 1], c), (-1, 2))


if __name__ == '__main__':
    unittest.main()
