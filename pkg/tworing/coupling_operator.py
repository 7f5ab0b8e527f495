"""
The multiplication operator C = x - c/(n+1) x^{n+1} on the chiral ring.

C^n maps span{1, x^n} into itself:

    C^n(1)   = A + B x^n
    C^n(x^n) = B + (A - 2cB) x^n

with (A, B) computed by direct reduction and, independently, through the
Chebyshev division lemma in the variable y = x^n. The eigen-elements
phi, phi' of C^n generate the interleaved basis in which C is block-cyclic
with 2x2 blocks D = diag(lambda^{1/n}, mu^{1/n}).
"""
import cmath
import logging
import math
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np
import sympy

from tworing.chebyshev import reduce_by_lemma
from tworing.crt_symmetry import theta_matrix
from tworing.errors import (
    BasisMismatchError,
    BranchError,
    DegenerateSplittingError,
    InconsistencyError,
    SingularMatrixError,
)
from tworing.model_core import (
    Backend,
    BasisTag,
    ModelParams,
    RingElement,
    coefficient_rows,
    monomial,
    ring_add,
    ring_mul,
    ring_power,
    ring_scale,
    roots,
)


logger = logging.getLogger(__name__)

# Tolerance for the span{1, x^n} condition and for B_n = 0 in the float backend.
SPAN_TOLERANCE = 1e-12
# Largest condition number accepted for the interleaved change of basis.
MAX_BASIS_CONDITION = 1e12


@dataclass(frozen=True)
class ClosureData:
    """Coordinates (A_n, B_n) of C^n(1) in span{1, x^n}."""

    a_n: object
    b_n: object
    c: object
    off_span: float = 0.0

    def closure_matrix(self) -> np.ndarray:
        """Matrix of C^n on (1, x^n), rows are images: [[A, B], [B, A - 2cB]]."""
        a, b, c = self.a_n, self.b_n, self.c
        dtype = object if isinstance(a, sympy.Basic) else complex
        return np.array([[a, b], [b, a - 2 * c * b]], dtype=dtype)


@dataclass(frozen=True)
class EigenSplit:
    """Eigenvalues of C^n on span{1, x^n} and the matching eigen-elements."""

    lambda_n: complex
    mu_n: complex
    phi: RingElement
    phi_prime: RingElement


@dataclass(frozen=True, eq=False)
class CouplingOperator:
    """
    Matrix of C in a tagged basis together with its closure and eigen data.

    ``prefactor`` is the scalar -2nt/(2n+1) in front of C. It is only
    multiplied into ``matrix`` when ``prefactor_applied`` is set.
    ``eigen`` is None when B_n vanishes.
    """

    matrix: np.ndarray
    basis_tag: BasisTag
    closure: ClosureData
    eigen: Optional[EigenSplit]
    prefactor: complex
    prefactor_applied: bool = False
    branch: int = 0


@dataclass(frozen=True, eq=False)
class InterleavedBasis:
    """
    Basis phi_0, phi'_0, phi_1, phi'_1, ... (or phi_0..phi_{n-1}, phi'_0..
    when grouped) with phi_j = C^j(phi) / (lambda^{1/n})^j.

    ``basis_matrix`` rows are monomial coordinates of the elements and
    ``c_matrix`` is C expressed in this basis.
    """

    elements: Tuple[RingElement, ...]
    basis_matrix: np.ndarray
    c_matrix: np.ndarray
    lambda_root: complex
    mu_root: complex
    grouped: bool = False

    @property
    def block(self) -> np.ndarray:
        """The 2x2 block D = diag(lambda^{1/n}, mu^{1/n})."""
        return np.diag([self.lambda_root, self.mu_root])


def mult_matrix(p: RingElement, params: ModelParams) -> np.ndarray:
    """
    Matrix of v -> p v in the monomial basis.

    Row i holds the coordinates of p x^i, so M_1 is the identity and
    for n = 1, M_x = [[0, 1], [1, -2c]].
    """
    if p.basis_tag is not BasisTag.MONOMIAL:
        raise BasisMismatchError('Multiplication matrices are built from monomial coordinates')
    backend = Backend.EXACT if p.is_exact else Backend.FLOAT
    rows = [ring_mul(p, monomial(i, params, backend), params) for i in range(params.dim)]
    return coefficient_rows(rows)


def c_element(params: ModelParams, backend: Backend = Backend.FLOAT) -> RingElement:
    """The ring element x - c/(n+1) x^{n+1}."""
    n = params.n
    coeff = -params.c_value(backend) / (n + 1)
    return ring_add(monomial(1, params, backend), ring_scale(monomial(n + 1, params, backend), coeff))


def c_prefactor(params: ModelParams) -> complex:
    """Scalar -2nt/(2n+1) multiplying C."""
    n = params.n
    return -2 * n * params.t_complex / (2 * n + 1)


def closure_data(params: ModelParams, backend: Backend = Backend.FLOAT) -> ClosureData:
    """
    (A_n, B_n) with C^n(1) = A_n + B_n x^n.

    C^n(1) = (1 - c/(n+1) x^n)^n x^n is reduced in R, checked to lie in
    span{1, x^n}, and compared with the remainder of y (1 - c/(n+1) y)^n
    modulo y^2 + 2cy - 1 obtained from the division lemma.

    Raises:
        InconsistencyError: If the reduction leaves span{1, x^n} or the two
                            computations disagree
    """
    n = params.n
    power = ring_power(c_element(params, backend), n, params)
    coeffs = power.coeffs
    others = [k for k in range(params.dim) if k not in (0, n)]
    if backend is Backend.EXACT:
        stray = [k for k in others if sympy.simplify(coeffs[k]) != 0]
        if stray:
            raise InconsistencyError(f'C^n(1) has components outside span{{1, x^n}} at degrees {stray}')
        off_span = 0.0
        a_n, b_n = sympy.simplify(coeffs[0]), sympy.simplify(coeffs[n])
    else:
        off_span = float(np.max(np.abs(coeffs[others]))) if others else 0.0
        scale = max(1.0, float(np.max(np.abs(coeffs))))
        if off_span > SPAN_TOLERANCE * scale:
            raise InconsistencyError(f'C^n(1) leaves span{{1, x^n}}: off-span magnitude {off_span:.3e}')
        a_n, b_n = complex(coeffs[0]), complex(coeffs[n])

    lemma_a, lemma_b = closure_by_lemma(params)
    if backend is Backend.EXACT:
        agree = sympy.simplify(lemma_a - a_n) == 0 and sympy.simplify(lemma_b - b_n) == 0
    else:
        scale = max(1.0, abs(a_n), abs(b_n))
        agree = abs(complex(lemma_a) - a_n) <= 1e-10 * scale and abs(complex(lemma_b) - b_n) <= 1e-10 * scale
    if not agree:
        raise InconsistencyError(
            f'Closure data disagree: reduction gives ({a_n}, {b_n}), division lemma gives ({lemma_a}, {lemma_b})'
        )
    return ClosureData(a_n=a_n, b_n=b_n, c=params.c_value(backend), off_span=off_span)


def closure_by_lemma(params: ModelParams) -> Tuple[sympy.Expr, sympy.Expr]:
    """(A_n, B_n) from the binomial expansion in y = x^n and the division lemma (exact)."""
    n = params.n
    c = params.c_exact
    ratio = -c / (n + 1)
    coeffs = [sympy.Integer(0)] * (n + 2)
    for m in range(n + 1):
        coeffs[m + 1] = sympy.binomial(n, m) * ratio ** m
    return reduce_by_lemma(coeffs, c)


def eigen_split(params: ModelParams, closure: Optional[ClosureData] = None) -> EigenSplit:
    """
    Eigenvalues and eigen-elements of C^n on span{1, x^n}.

    lambda = A - (c - s) B, mu = A - (c + s) B with s = sqrt(1 + c^2);
    phi = 1 + (s - c) x^n and phi' = 1 - (s + c) x^n.

    Raises:
        DegenerateSplittingError: If B_n = 0, i.e. lambda = mu
    """
    closure = closure if closure is not None else closure_data(params)
    a_n, b_n = complex(closure.a_n), complex(closure.b_n)
    if abs(b_n) <= SPAN_TOLERANCE * max(1.0, abs(a_n)):
        raise DegenerateSplittingError(f'B_n = {b_n} vanishes; C^n has a single eigenvalue on span{{1, x^n}}')
    n = params.n
    c = params.c_float
    s = math.hypot(1.0, c)
    lambda_n = a_n - (c - s) * b_n
    mu_n = a_n - (c + s) * b_n
    phi = np.zeros(params.dim, dtype=complex)
    phi[0] = 1.0
    phi[n] = s - c
    phi_prime = np.zeros(params.dim, dtype=complex)
    phi_prime[0] = 1.0
    phi_prime[n] = -(s + c)
    return EigenSplit(lambda_n=lambda_n, mu_n=mu_n, phi=RingElement(phi), phi_prime=RingElement(phi_prime))


def c_operator(
    params: ModelParams,
    backend: Backend = Backend.FLOAT,
    include_prefactor: bool = False,
    branch: int = 0,
) -> CouplingOperator:
    """
    C = M_x - c/(n+1) M_{x^{n+1}} in the monomial basis.

    Args:
        params: Model parameters
        backend: Arithmetic backend of the matrix and closure data
        include_prefactor: Multiply the matrix by -2nt/(2n+1)
        branch: n-th root branch recorded for later interleaved constructions
    """
    n = params.n
    m_x = mult_matrix(monomial(1, params, backend), params)
    m_shift = mult_matrix(monomial(n + 1, params, backend), params)
    matrix = m_x - (params.c_value(backend) / (n + 1)) * m_shift
    if backend is Backend.EXACT:
        matrix = np.array([[sympy.expand(v) for v in row] for row in matrix], dtype=object)
    prefactor = c_prefactor(params)
    if include_prefactor:
        if backend is Backend.EXACT:
            n_exact = sympy.Integer(n)
            matrix = matrix * (-2 * n_exact * params.t_exact / (2 * n_exact + 1))
        else:
            matrix = matrix * prefactor
    closure = closure_data(params, backend)
    try:
        eigen = eigen_split(params, closure)
    except DegenerateSplittingError:
        logger.warning('B_n vanishes for n=%d, c=%s; eigen data unavailable', n, params.c)
        eigen = None
    return CouplingOperator(
        matrix=matrix,
        basis_tag=BasisTag.MONOMIAL,
        closure=closure,
        eigen=eigen,
        prefactor=prefactor,
        prefactor_applied=include_prefactor,
        branch=branch,
    )


def nth_root(value: complex, n: int, branch: int = 0) -> complex:
    """
    Principal n-th root of value times exp(2 pi i branch / n).

    Raises:
        BranchError: If value is zero
    """
    if value == 0:
        raise BranchError('Cannot take an n-th root branch of a zero eigenvalue')
    return cmath.exp(cmath.log(complex(value)) / n) * cmath.exp(2j * math.pi * branch / n)


def interleaved_basis(params: ModelParams, branch: int = 0, grouped: bool = False) -> InterleavedBasis:
    """
    Build phi_j = C^j(phi)/(lambda^{1/n})^j, phi'_j = C^j(phi')/(mu^{1/n})^j.

    Args:
        params: Model parameters
        branch: Branch index of the n-th roots (0 is the principal branch)
        grouped: Order as phi_0..phi_{n-1}, phi'_0..phi'_{n-1} instead of
                 interleaving

    Raises:
        DegenerateSplittingError: If B_n = 0
        BranchError: If lambda or mu is zero
        SingularMatrixError: If the resulting elements are not a basis
    """
    n = params.n
    operator = c_operator(params)
    if operator.eigen is None:
        raise DegenerateSplittingError(f'Interleaved basis needs B_n != 0 (n={n}, c={params.c})')
    eigen = operator.eigen
    lam_root = nth_root(eigen.lambda_n, n, branch)
    mu_root = nth_root(eigen.mu_n, n, branch)
    c_mono = np.asarray(operator.matrix, dtype=complex)

    phis: List[np.ndarray] = []
    phi_primes: List[np.ndarray] = []
    v, w = eigen.phi.coeffs.copy(), eigen.phi_prime.coeffs.copy()
    for _ in range(n):
        phis.append(v)
        phi_primes.append(w)
        v = (v @ c_mono) / lam_root
        w = (w @ c_mono) / mu_root

    if grouped:
        rows = phis + phi_primes
    else:
        rows = [vec for pair in zip(phis, phi_primes) for vec in pair]
    basis_matrix = np.array(rows)
    cond = np.linalg.cond(basis_matrix)
    if not np.isfinite(cond) or cond > MAX_BASIS_CONDITION:
        raise SingularMatrixError(f'Interleaved elements do not form a basis (condition number {cond:.3e})')
    # row convention: C in the new basis is P C P^{-1}
    c_new = np.linalg.solve(basis_matrix.T, (basis_matrix @ c_mono).T).T
    return InterleavedBasis(
        elements=tuple(RingElement(r) for r in rows),
        basis_matrix=basis_matrix,
        c_matrix=c_new,
        lambda_root=lam_root,
        mu_root=mu_root,
        grouped=grouped,
    )


def expected_interleaved_matrix(block: np.ndarray, n: int, grouped: bool = False) -> np.ndarray:
    """
    Block-cyclic matrix with ``block`` at positions (j, j+1 mod n).

    In the grouped ordering the two diagonal entries of the block act on
    separate n-cycles.
    """
    out = np.zeros((2 * n, 2 * n), dtype=complex)
    if grouped:
        for j in range(n):
            k = (j + 1) % n
            out[j, k] = block[0, 0]
            out[n + j, n + k] = block[1, 1]
        return out
    for j in range(n):
        k = (j + 1) % n
        out[2 * j : 2 * j + 2, 2 * k : 2 * k + 2] = block
    return out


def eta_block_pattern(n: int) -> np.ndarray:
    """
    Allowed support of eta in the interleaved basis: 2x2 blocks (j, k) with
    j + k = n - 1.
    """
    mask = np.zeros((2 * n, 2 * n), dtype=bool)
    for j in range(n):
        k = n - 1 - j
        mask[2 * j : 2 * j + 2, 2 * k : 2 * k + 2] = True
    return mask


def c_power_closure_float(params: ModelParams) -> Tuple[complex, complex, float]:
    """
    (A_n, B_n, off-span magnitude) read from row 0 of the n-th matrix power of C.
    """
    c_mono = np.asarray(c_operator(params).matrix, dtype=complex)
    image = np.linalg.matrix_power(c_mono, params.n)[0]
    n = params.n
    others = [k for k in range(params.dim) if k not in (0, n)]
    off_span = float(np.max(np.abs(image[others]))) if others else 0.0
    return complex(image[0]), complex(image[n]), off_span


def cayley_hamilton_residual(params: ModelParams) -> float:
    """
    Max entry of (C^n)^2 - 2(A - cB) C^n + (A^2 - 2cAB - B^2) acting on R.
    """
    operator = c_operator(params)
    a_n, b_n = complex(operator.closure.a_n), complex(operator.closure.b_n)
    c = params.c_float
    c_power = np.linalg.matrix_power(np.asarray(operator.matrix, dtype=complex), params.n)
    quadratic = (
        c_power @ c_power
        - 2 * (a_n - c * b_n) * c_power
        + (a_n ** 2 - 2 * c * a_n * b_n - b_n ** 2) * np.eye(params.dim)
    )
    return float(np.max(np.abs(quadratic)))


def eigen_residual(params: ModelParams) -> float:
    """Largest |C^n phi - lambda phi| and |C^n phi' - mu phi'| coordinate."""
    operator = c_operator(params)
    if operator.eigen is None:
        raise DegenerateSplittingError('Eigen data unavailable')
    c_power = np.linalg.matrix_power(np.asarray(operator.matrix, dtype=complex), params.n)
    eigen = operator.eigen
    phi, phi_prime = eigen.phi.coeffs, eigen.phi_prime.coeffs
    lhs = np.abs(phi @ c_power - eigen.lambda_n * phi)
    rhs = np.abs(phi_prime @ c_power - eigen.mu_n * phi_prime)
    return float(max(lhs.max(), rhs.max()))


def weight_relation_residual(params: ModelParams) -> float:
    """Max entry of Theta C Theta^{-1} - omega^{-1} C in the monomial basis."""
    theta = theta_matrix(BasisTag.MONOMIAL, params)
    c_mono = np.asarray(c_operator(params).matrix, dtype=complex)
    omega = roots(params).omega
    conjugated = theta @ c_mono @ theta.conj()
    return float(np.max(np.abs(conjugated - c_mono / omega)))


def interleaved_pattern_defect(params: ModelParams, branch: int = 0, grouped: bool = False) -> float:
    """Largest deviation of C in the interleaved basis from the block-cyclic form."""
    basis = interleaved_basis(params, branch=branch, grouped=grouped)
    expected = expected_interleaved_matrix(basis.block, params.n, grouped=grouped)
    return float(np.max(np.abs(basis.c_matrix - expected)))

