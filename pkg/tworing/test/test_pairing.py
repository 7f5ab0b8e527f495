"""
Tests for the pairing module.
"""
import unittest

import numpy as np
import sympy

from tworing.crt_symmetry import vandermonde
from tworing.errors import BasisMismatchError, InvalidParamsError, SingularMatrixError
from tworing.model_core import Backend, BasisTag, ModelParams, monomial, ring_one
from tworing.pairing import (
    PairingMatrix,
    change_basis,
    delta_coupling_direct,
    delta_coupling_formula,
    eta_matrix,
    exchange_matrix,
    grothendieck_residue,
    reality_residual,
    residue_closed_form,
    shifted_basis_matrix,
    so_j_metric,
)


class TestResidues(unittest.TestCase):
    """Test cases for the residue pairing."""

    def test_residue_of_x_undeformed(self):
        """Test Res(x) = 1 for n=1, c=0, t=1."""
        params = ModelParams(n=1, c=0)
        self.assertAlmostEqual(grothendieck_residue(monomial(1, params), params), 1.0, places=14)

    def test_residue_of_one_vanishes(self):
        """Test Res(1) = 0 for any n and c."""
        for n in (1, 2, 3, 4):
            for c in (0, 0.3, 1.5):
                params = ModelParams(n=n, c=c)
                self.assertLess(abs(grothendieck_residue(ring_one(params), params)), 1e-13)

    def test_top_residue(self):
        """Test Res(x^3) = 1 for n=2, c=0.3, t=1."""
        params = ModelParams(n=2, c=0.3)
        self.assertAlmostEqual(grothendieck_residue(monomial(3, params), params), 1.0, places=13)

    def test_closed_forms(self):
        """Test the closed form at k = n-1, 2n-1 and 3n-1."""
        for n in (1, 2, 3):
            params = ModelParams(n=n, c=0.7, t=0.5 - 0.5j)
            t = params.t_complex
            if n > 1:
                self.assertEqual(residue_closed_form(n - 1, params), 0)
            self.assertAlmostEqual(residue_closed_form(2 * n - 1, params), 1 / t, places=13)
            self.assertAlmostEqual(residue_closed_form(3 * n - 1, params), -1.4 / t, places=12)

    def test_closed_form_zero_unless_divisible(self):
        """Test Res(x^k) = 0 unless n divides k + 1."""
        params = ModelParams(n=3, c=0.2)
        for k in (0, 1, 3, 4, 6, 7):
            self.assertEqual(residue_closed_form(k, params), 0)

    def test_closed_form_exact(self):
        """Test the exact closed form Res(x^{3n-1}) = -2c/t."""
        params = ModelParams(n=2, c='1/2')
        self.assertEqual(residue_closed_form(5, params, Backend.EXACT), -1)
        self.assertEqual(residue_closed_form(3, params, Backend.EXACT), 1)

    def test_direct_sum_matches_closed_form(self):
        """Test the residue sum against the closed form for many degrees."""
        params = ModelParams(n=3, c=0.45, t=1.3 + 0.4j)
        for k in range(4 * params.n):
            direct = grothendieck_residue(monomial(k, params), params)
            closed = residue_closed_form(k, params)
            self.assertLess(abs(direct - closed), 1e-11 * max(1.0, abs(closed)))

    def test_negative_degree(self):
        """Test that negative degrees are rejected."""
        with self.assertRaises(InvalidParamsError):
            residue_closed_form(-1, ModelParams(n=1))


class TestEtaMatrix(unittest.TestCase):
    """Test cases for the pairing matrices."""

    def test_monomial_n1(self):
        """Test eta_monomial = [[0, 1], [1, -2c]] for n=1."""
        pairing = eta_matrix(BasisTag.MONOMIAL, ModelParams(n=1, c='1/4'), Backend.EXACT)
        self.assertTrue(pairing.is_exact)
        self.assertEqual(pairing.entries.tolist(), [[0, 1], [1, sympy.Rational(-1, 2)]])

    def test_monomial_undeformed(self):
        """Test eta_monomial = [[0, 1], [1, 0]] for n=1, c=0."""
        pairing = eta_matrix(BasisTag.MONOMIAL, ModelParams(n=1, c=0))
        np.testing.assert_allclose(pairing.to_float(), [[0, 1], [1, 0]], atol=1e-15)

    def test_monomial_block_form(self):
        """Test the exchange-matrix block form for n=3."""
        params = ModelParams(n=3, c=0.25, t=2 + 1j)
        j = exchange_matrix(3)
        expected = np.block([[np.zeros((3, 3)), j], [j, -0.5 * j]])
        np.testing.assert_allclose(eta_matrix(BasisTag.MONOMIAL, params).to_float(), expected, atol=1e-13)

    def test_shifted(self):
        """Test eta_shifted = [[0, J], [J, 0]] exactly."""
        for n in (1, 2, 3):
            pairing = eta_matrix(BasisTag.SHIFTED, ModelParams(n=n, c='1/3'), Backend.EXACT)
            j = exchange_matrix(n)
            expected = np.block([[np.zeros((n, n)), j], [j, np.zeros((n, n))]])
            self.assertEqual(pairing.basis_tag, BasisTag.SHIFTED)
            self.assertTrue(all(sympy.simplify(v) == e for v, e in zip(pairing.entries.ravel(), expected.ravel())))

    def test_delta_undeformed(self):
        """Test eta_delta = diag(1/2, -1/2) for n=1, c=0."""
        pairing = eta_matrix(BasisTag.DELTA, ModelParams(n=1, c=0))
        np.testing.assert_allclose(pairing.to_float(), np.diag([0.5, -0.5]), atol=1e-14)

    def test_delta_formula_matches_residues(self):
        """Test the idempotent coupling formula against direct residues."""
        params = ModelParams(n=3, c=0.5, t=0.7 + 0.2j)
        np.testing.assert_allclose(delta_coupling_formula(params), delta_coupling_direct(params), atol=1e-10)

    def test_delta_exact_unavailable(self):
        """Test that the idempotent pairing has no exact backend."""
        with self.assertRaises(BasisMismatchError):
            eta_matrix(BasisTag.DELTA, ModelParams(n=2, c=0), Backend.EXACT)

    def test_symmetric_and_nondegenerate(self):
        """Test symmetry and invertibility in every float basis."""
        params = ModelParams(n=2, c=0.5)
        for tag in BasisTag:
            pairing = eta_matrix(tag, params)
            self.assertLess(pairing.symmetry_defect(), 1e-10)
            self.assertGreater(abs(np.linalg.det(pairing.to_float())), 1e-8)

    def test_non_square(self):
        """Test that pairing matrices must be square."""
        with self.assertRaises(InvalidParamsError):
            PairingMatrix(np.zeros((2, 3)), BasisTag.MONOMIAL)


class TestChangeBasis(unittest.TestCase):
    """Test cases for congruence transformations."""

    def test_identity(self):
        """Test that the identity leaves the pairing unchanged."""
        pairing = eta_matrix(BasisTag.MONOMIAL, ModelParams(n=2, c=0.3))
        np.testing.assert_allclose(change_basis(pairing, np.eye(4)).entries, pairing.entries)

    def test_vandermonde_congruence(self):
        """Test V eta_delta V^T = eta_monomial."""
        params = ModelParams(n=3, c=0.6, t=1.5)
        delta = eta_matrix(BasisTag.DELTA, params)
        monomial_eta = eta_matrix(BasisTag.MONOMIAL, params).to_float()
        congruent = change_basis(delta, vandermonde(params), BasisTag.MONOMIAL)
        np.testing.assert_allclose(congruent.to_float(), monomial_eta, atol=1e-10)

    def test_shifted_congruence(self):
        """Test that the shifted basis removes the -2cJ block."""
        params = ModelParams(n=2, c='3/7')
        monomial_eta = eta_matrix(BasisTag.MONOMIAL, params, Backend.EXACT)
        shifted = change_basis(monomial_eta, shifted_basis_matrix(params, Backend.EXACT), BasisTag.SHIFTED)
        self.assertEqual(shifted.entries[2, 3], 0)
        self.assertEqual(shifted.entries[3, 2], 0)
        self.assertEqual(shifted.entries[0, 3], 1)

    def test_singular(self):
        """Test that a singular change of basis is rejected."""
        pairing = eta_matrix(BasisTag.MONOMIAL, ModelParams(n=1, c=0))
        with self.assertRaises(SingularMatrixError):
            change_basis(pairing, np.array([[1.0, 1.0], [1.0, 1.0]]))

    def test_shape_mismatch(self):
        """Test that the change of basis must match the pairing size."""
        pairing = eta_matrix(BasisTag.MONOMIAL, ModelParams(n=1, c=0))
        with self.assertRaises(InvalidParamsError):
            change_basis(pairing, np.eye(3))


class TestRealityResidual(unittest.TestCase):
    """Test cases for the reality constraint."""

    def setUp(self):
        """Set up the shifted pairing for n=2."""
        self.eta = eta_matrix(BasisTag.SHIFTED, ModelParams(n=2, c=0.5))

    def test_eta_itself(self):
        """Test that g = eta satisfies the constraint."""
        self.assertLess(reality_residual(self.eta.to_float(), self.eta), 1e-14)

    def test_violation(self):
        """Test that g = 2 eta violates the constraint."""
        self.assertAlmostEqual(reality_residual(2 * self.eta.to_float(), self.eta), 3.0, places=12)

    def test_so_j_metrics(self):
        """Test random SO(J) metrics satisfy the constraint."""
        rng = np.random.default_rng(7)
        for n in (1, 2, 3):
            eta = eta_matrix(BasisTag.SHIFTED, ModelParams(n=n, c=0))
            for _ in range(5):
                self.assertLess(reality_residual(so_j_metric(n, rng), eta), 1e-10)

    def test_singular_eta(self):
        """Test that a singular pairing is reported."""
        with self.assertRaises(SingularMatrixError):
            reality_residual(np.eye(2), np.zeros((2, 2)))


if __name__ == '__main__':
    unittest.main()
