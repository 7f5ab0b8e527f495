"""
Tests for the crt_symmetry module.
"""
import unittest

import numpy as np
import sympy

from tworing.crt_symmetry import (
    apply_theta,
    delta_basis,
    delta_coordinate_matrix,
    invariant_pattern,
    lagrange_matches_crt,
    theta_average,
    theta_delta_from_vandermonde,
    theta_matrix,
    vandermonde,
)
from tworing.errors import BasisMismatchError
from tworing.model_core import BasisTag, ModelParams, RingElement, monomial, ring_add, ring_mul, ring_one, roots
from tworing.pairing import eta_matrix


class TestDeltaBasis(unittest.TestCase):
    """Test cases for the idempotent basis."""

    def setUp(self):
        """Set up a deformed n=3 model."""
        self.params = ModelParams(n=3, c=0.5, t=1.2)

    def test_partition_of_unity(self):
        """Test that the idempotents sum to 1."""
        basis = delta_basis(self.params)
        total = basis[0]
        for element in basis[1:]:
            total = ring_add(total, element)
        self.assertTrue(total.allclose(ring_one(self.params), atol=1e-12))

    def test_orthogonal_idempotents(self):
        """Test delta_i delta_j = 0 for i != j and delta_i^2 = delta_i."""
        basis = delta_basis(self.params)
        for i, u in enumerate(basis):
            for j, v in enumerate(basis):
                product = ring_mul(u, v, self.params)
                expected = u.coeffs if i == j else np.zeros(6)
                np.testing.assert_allclose(product.coeffs, expected, atol=1e-10)

    def test_lagrange_is_crt_element(self):
        """Test that x delta = root delta for each idempotent."""
        self.assertTrue(lagrange_matches_crt(self.params))
        self.assertTrue(lagrange_matches_crt(ModelParams(n=1, c=0)))

    def test_vandermonde_undeformed(self):
        """Test V = [[1, 1], [1, -1]] for n=1, c=0."""
        np.testing.assert_allclose(vandermonde(ModelParams(n=1, c=0)), [[1, 1], [1, -1]], atol=1e-15)

    def test_vandermonde_exact(self):
        """Test the exact Vandermonde matrix for n=1, c=0."""
        self.assertEqual(vandermonde(ModelParams(n=1, c=0), exact=True), sympy.Matrix([[1, 1], [1, -1]]))

    def test_first_row_ones(self):
        """Test that row 0 of V is all ones."""
        np.testing.assert_allclose(vandermonde(self.params)[0], np.ones(6))

    def test_inverse_relation(self):
        """Test that V times the idempotent coordinate matrix is the identity."""
        product = vandermonde(self.params) @ delta_coordinate_matrix(self.params)
        np.testing.assert_allclose(product, np.eye(6), atol=1e-10)


class TestTheta(unittest.TestCase):
    """Test cases for the automorphism x -> omega x."""

    def setUp(self):
        """Set up a deformed n=3 model."""
        self.params = ModelParams(n=3, c=0.5)

    def test_theta_on_x(self):
        """Test theta(x) = omega x."""
        omega = roots(self.params).omega
        image = apply_theta(monomial(1, self.params), self.params)
        np.testing.assert_allclose(image.coeffs, [0, omega, 0, 0, 0, 0], atol=1e-15)

    def test_theta_is_homomorphism(self):
        """Test theta(uv) = theta(u) theta(v) on random elements."""
        rng = np.random.default_rng(3)
        for _ in range(10):
            u = RingElement(rng.normal(size=6) + 1j * rng.normal(size=6))
            v = RingElement(rng.normal(size=6) + 1j * rng.normal(size=6))
            lhs = apply_theta(ring_mul(u, v, self.params), self.params)
            rhs = ring_mul(apply_theta(u, self.params), apply_theta(v, self.params), self.params)
            self.assertTrue(lhs.allclose(rhs, atol=1e-12))

    def test_monomial_matrix(self):
        """Test Theta = diag(1, omega, omega^2) repeated twice."""
        omega = roots(self.params).omega
        expected = np.diag([1, omega, omega ** 2] * 2)
        np.testing.assert_allclose(theta_matrix(BasisTag.MONOMIAL, self.params), expected, atol=1e-15)

    def test_delta_matrix_cycles(self):
        """Test that theta permutes the idempotents in two 3-cycles."""
        cycle = theta_matrix(BasisTag.DELTA, self.params)
        np.testing.assert_array_equal(cycle[0].real, [0, 0, 1, 0, 0, 0])
        np.testing.assert_array_equal(np.linalg.matrix_power(cycle, 3), np.eye(6))
        self.assertFalse(np.allclose(cycle @ cycle, np.eye(6)))

    def test_delta_matrix_from_vandermonde(self):
        """Test the tabulated cycles against V^{-1} Theta V."""
        np.testing.assert_allclose(
            theta_delta_from_vandermonde(self.params), theta_matrix(BasisTag.DELTA, self.params), atol=1e-10
        )

    def test_pairing_covariance(self):
        """Test Theta eta Theta^T = omega^{-1} eta."""
        theta = theta_matrix(BasisTag.MONOMIAL, self.params)
        eta = eta_matrix(BasisTag.MONOMIAL, self.params).to_float()
        omega = roots(self.params).omega
        np.testing.assert_allclose(theta @ eta @ theta.T, eta / omega, atol=1e-13)

    def test_unsupported_basis(self):
        """Test that theta is not tabulated in the shifted basis."""
        with self.assertRaises(BasisMismatchError):
            theta_matrix(BasisTag.SHIFTED, self.params)

    def test_theta_needs_monomial(self):
        """Test that theta acts on monomial coordinates only."""
        with self.assertRaises(BasisMismatchError):
            apply_theta(RingElement([1, 0, 0, 0, 0, 0], BasisTag.DELTA), self.params)


class TestInvariantPattern(unittest.TestCase):
    """Test cases for the theta-invariant metric pattern."""

    def test_n1_all_allowed(self):
        """Test that every entry is allowed for n=1."""
        self.assertTrue(invariant_pattern(1).all())

    def test_n2_count(self):
        """Test that 8 of 16 entries are allowed for n=2."""
        mask = invariant_pattern(2)
        self.assertEqual(int(mask.sum()), 8)
        self.assertFalse(mask[0, 1])
        self.assertTrue(mask[0, 2])

    def test_average_lands_on_pattern(self):
        """Test that the theta average is supported on the pattern and idempotent."""
        params = ModelParams(n=4, c=0.2)
        rng = np.random.default_rng(4)
        raw = rng.normal(size=(8, 8)) + 1j * rng.normal(size=(8, 8))
        projected = theta_average(raw, params)
        self.assertLess(np.max(np.abs(projected[~invariant_pattern(4)])), 1e-13)
        np.testing.assert_allclose(projected[invariant_pattern(4)], raw[invariant_pattern(4)], atol=1e-13)
        np.testing.assert_allclose(theta_average(projected, params), projected, atol=1e-13)


if __name__ == '__main__':
    unittest.main()
