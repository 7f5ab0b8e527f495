"""
Chinese-remainder (idempotent) basis of R, the Vandermonde change of basis
and the Z_n automorphism theta: x -> omega x.

Matrices follow the row convention used throughout the package: row i of
the matrix of a linear map holds the coordinates of the image of basis
vector i.
"""
import math
from typing import List

import numpy as np
import sympy

from tworing.errors import BasisMismatchError
from tworing.model_core import (
    BasisTag,
    ModelParams,
    RingElement,
    check_separation,
    coefficient_rows,
    exact_ring_radii,
    monomial,
    ring_mul,
    ring_scale,
    roots,
)


def delta_basis(params: ModelParams) -> List[RingElement]:
    """
    Lagrange idempotents delta_0..delta_{n-1}, delta'_0..delta'_{n-1}.

    delta_j takes the value 1 at a_j and 0 at every other critical point;
    delta'_j does the same for b_j. Each equals the Chinese-remainder
    element with component x/a_j (resp. x/b_j) at its own root, since x is
    congruent to the root there.

    Raises:
        IllConditionedError: If two critical points nearly coincide
    """
    points = np.array(roots(params).all_roots)
    check_separation(points)
    basis = []
    for idx, root in enumerate(points):
        others = np.delete(points, idx)
        numerator = np.polynomial.polynomial.polyfromroots(others)
        value = np.polynomial.polynomial.polyval(root, numerator)
        basis.append(RingElement(numerator / value))
    return basis


def delta_coordinate_matrix(params: ModelParams) -> np.ndarray:
    """Rows are the monomial coordinates of the idempotents."""
    return coefficient_rows(delta_basis(params))


def vandermonde(params: ModelParams, exact: bool = False):
    """
    Matrix V with (1, x, ..., x^{2n-1})^T = V (delta_0, ..., delta'_{n-1})^T.

    Row k is (a_j^k ; (b eps omega^j)^k). With exact=True a sympy matrix is
    returned in which omega and eps are exp(2 pi i/n), exp(i pi/n) and the
    radii are the n-th roots of the exact a^n, b^n.
    """
    n = params.n
    if exact:
        a_power, b_power = exact_ring_radii(params)
        a = sympy.root(a_power, n)
        b = sympy.root(b_power, n)
        omega = sympy.exp(2 * sympy.pi * sympy.I / n)
        eps = sympy.exp(sympy.pi * sympy.I / n)
        points = [a * omega ** j for j in range(n)] + [b * eps * omega ** j for j in range(n)]
        return sympy.ImmutableMatrix(2 * n, 2 * n, lambda k, r: points[r] ** k)
    points = np.array(roots(params).all_roots)
    return points[None, :] ** np.arange(2 * n)[:, None]


def theta_matrix(basis_tag: BasisTag, params: ModelParams) -> np.ndarray:
    """
    Matrix of theta in the monomial or idempotent basis.

    MONOMIAL: diag(1, omega, ..., omega^{n-1}) repeated twice.
    DELTA: two n-cycles, theta(delta_j) = delta_{j-1} and likewise for the
    primed family (row 0 is (0, ..., 0, 1)).
    """
    n = params.n
    if basis_tag is BasisTag.MONOMIAL:
        phases = np.exp(2j * math.pi * (np.arange(2 * n) % n) / n)
        return np.diag(phases)
    if basis_tag is BasisTag.DELTA:
        cycle = np.zeros((n, n), dtype=complex)
        for j in range(n):
            cycle[j, (j - 1) % n] = 1.0
        out = np.zeros((2 * n, 2 * n), dtype=complex)
        out[:n, :n] = cycle
        out[n:, n:] = cycle
        return out
    raise BasisMismatchError(f'theta is tabulated for monomial and delta bases, got {basis_tag.value}')


def theta_delta_from_vandermonde(params: ModelParams) -> np.ndarray:
    """theta in the idempotent basis computed as V^{-1} Theta_mono V."""
    v = vandermonde(params)
    return np.linalg.solve(v, theta_matrix(BasisTag.MONOMIAL, params) @ v)


def apply_theta(u: RingElement, params: ModelParams, power: int = 1) -> RingElement:
    """theta^power applied to an element in monomial coordinates."""
    if u.basis_tag is not BasisTag.MONOMIAL:
        raise BasisMismatchError('theta acts on monomial coordinates')
    n = params.n
    phases = np.exp(2j * math.pi * power * (np.arange(2 * n) % n) / n)
    return RingElement(u.to_float().coeffs * phases)


def invariant_pattern(n: int) -> np.ndarray:
    """
    Support allowed for a theta-invariant metric: (i, k) with i = k mod n.
    """
    idx = np.arange(2 * n)
    return (idx[:, None] % n) == (idx[None, :] % n)


def theta_average(matrix: np.ndarray, params: ModelParams) -> np.ndarray:
    """Projection onto the commutant of theta: mean of Theta^m X Theta^{-m}."""
    theta = theta_matrix(BasisTag.MONOMIAL, params)
    theta_inv = theta.conj()
    acc = np.zeros_like(matrix, dtype=complex)
    power = np.eye(len(theta), dtype=complex)
    power_inv = np.eye(len(theta), dtype=complex)
    for _ in range(params.n):
        acc += power @ matrix @ power_inv
        power = power @ theta
        power_inv = theta_inv @ power_inv
    return acc / params.n


def lagrange_matches_crt(params: ModelParams, atol: float = 1e-10) -> bool:
    """
    Check that x * delta = root * delta for each idempotent, i.e. the
    Lagrange idempotent is the element with component x/root at its root.
    """
    x = monomial(1, params)
    for root, delta in zip(roots(params).all_roots, delta_basis(params)):
        lhs = ring_mul(x, delta, params)
        if not lhs.allclose(ring_scale(delta, root), atol=atol):
            return False
    return True
