"""
Topological pairing eta_ij = Res_w[phi_i phi_j].

The pairing is computed two ways: by summing phi/w'' over the critical
points, and by the closed forms for Res_w(x^k). Basis vectors carry the
sqrt(t) normalisation, so eta in any named basis is t * Res_w of the
product of the un-normalised basis vectors.
"""
import math
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np
import scipy.linalg
import sympy

from tworing.crt_symmetry import delta_basis
from tworing.errors import BasisMismatchError, InvalidParamsError, SingularMatrixError
from tworing.model_core import (
    Backend,
    BasisTag,
    ModelParams,
    RingElement,
    check_separation,
    evaluate,
    exact_ring_radii,
    eval_w2,
    ring_mul,
    roots,
)


SQRT_T_NOTE = 'basis vectors scaled by sqrt(t); eta = t * Res_w'


@dataclass(frozen=True, eq=False)
class PairingMatrix:
    """
    Bilinear pairing in a tagged basis.

    ``entries`` is complex128 in the float backend and a numpy object array
    of sympy numbers in the exact backend.
    """

    entries: np.ndarray
    basis_tag: BasisTag
    scale_note: str = SQRT_T_NOTE

    def __post_init__(self):
        arr = np.array(self.entries, copy=True)
        if arr.dtype != object:
            arr = arr.astype(complex)
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
            raise InvalidParamsError(f'Pairing matrix must be square, got shape {arr.shape}')
        arr.flags.writeable = False
        object.__setattr__(self, 'entries', arr)

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    @property
    def is_exact(self) -> bool:
        return self.entries.dtype == object

    def to_float(self) -> np.ndarray:
        if not self.is_exact:
            return np.array(self.entries)
        return np.array([[complex(sympy.N(v)) for v in row] for row in self.entries])

    def symmetry_defect(self) -> float:
        values = self.to_float()
        return float(np.max(np.abs(values - values.T)))


def grothendieck_residue(phi: RingElement, params: ModelParams) -> complex:
    """
    Res_w[phi] = sum over critical points of phi(x) / w''(x).

    Terms are added in order of increasing |root|, then increasing arg, and
    real and imaginary parts are summed with math.fsum, so the result does
    not depend on how the roots were enumerated.

    Raises:
        IllConditionedError: If two critical points are closer than 1e-8
    """
    if phi.basis_tag is not BasisTag.MONOMIAL:
        raise BasisMismatchError('Residues are taken of monomial coordinates')
    points = roots(params).all_roots
    check_separation(points)
    ordered = sorted(points, key=lambda r: (round(abs(r), 12), math.atan2(r.imag, r.real)))
    terms = [complex(evaluate(phi, r)) / eval_w2(r, params) for r in ordered]
    return complex(math.fsum(z.real for z in terms), math.fsum(z.imag for z in terms))


def residue_closed_form(k: int, params: ModelParams, backend: Backend = Backend.FLOAT):
    """
    Closed form of Res_w(x^k).

    Zero unless n divides k + 1; otherwise, with m = (k+1)/n,
    (a^{k+1-n} + (-1)^m b^{k+1-n}) / (t (a^n + b^n)).
    """
    if k < 0:
        raise InvalidParamsError(f'k must be non-negative, got {k}')
    n = params.n
    if (k + 1) % n:
        return sympy.Integer(0) if backend is Backend.EXACT else 0j
    m = (k + 1) // n
    sign = -1 if m % 2 else 1
    if backend is Backend.EXACT:
        a_power, b_power = exact_ring_radii(params)
        numerator = sympy.expand(a_power ** (m - 1) + sign * b_power ** (m - 1))
        return sympy.simplify(numerator / (params.t_exact * (a_power + b_power)))
    rd = roots(params)
    numerator = rd.a_power ** (m - 1) + sign * rd.b_power ** (m - 1)
    return complex(numerator / (params.t_complex * (rd.a_power + rd.b_power)))


def exchange_matrix(n: int) -> np.ndarray:
    """The n x n anti-diagonal matrix J."""
    return np.fliplr(np.eye(n))


def shifted_basis_matrix(params: ModelParams, backend: Backend = Backend.FLOAT) -> np.ndarray:
    """
    Rows: monomial coordinates of 1, ..., x^{n-1}, x^n + c, ..., x^{2n-1} + c x^{n-1}.
    """
    n = params.n
    c = params.c_value(backend)
    if backend is Backend.EXACT:
        out = np.array([[sympy.Integer(int(i == j)) for j in range(2 * n)] for i in range(2 * n)], dtype=object)
    else:
        out = np.eye(2 * n, dtype=complex)
    for i in range(n, 2 * n):
        out[i, i - n] = out[i, i - n] + c
    return out


def _monomial_eta(params: ModelParams, backend: Backend) -> np.ndarray:
    n = params.n
    dim = 2 * n
    t = params.t_value(backend)
    by_degree = {}
    for k in range(2 * dim - 1):
        value = t * residue_closed_form(k, params, backend)
        by_degree[k] = sympy.simplify(value) if backend is Backend.EXACT else complex(value)
    dtype = object if backend is Backend.EXACT else complex
    return np.array([[by_degree[i + j] for j in range(dim)] for i in range(dim)], dtype=dtype)


def delta_coupling_formula(params: ModelParams) -> np.ndarray:
    """
    Pairing of the sqrt(t)-normalised idempotents from the printed formula:
    diag(a^{-(n-1)} omega^j, b^{-(n-1)} eps omega^j) / (n (a^n + b^n)).
    """
    n = params.n
    rd = roots(params)
    phases = np.exp(2j * math.pi * np.arange(n) / n)
    diagonal = np.concatenate([rd.a ** (1 - n) * phases, rd.b ** (1 - n) * rd.epsilon * phases])
    return np.diag(diagonal / (n * (rd.a_power + rd.b_power)))


def delta_coupling_direct(params: ModelParams) -> np.ndarray:
    """Pairing of the sqrt(t)-normalised idempotents from residues of their products."""
    basis = delta_basis(params)
    dim = params.dim
    t = params.t_complex
    out = np.zeros((dim, dim), dtype=complex)
    for i in range(dim):
        for j in range(i, dim):
            value = t * grothendieck_residue(ring_mul(basis[i], basis[j], params), params)
            out[i, j] = out[j, i] = value
    return out


def eta_matrix(basis_tag: BasisTag, params: ModelParams, backend: Backend = Backend.FLOAT) -> PairingMatrix:
    """
    eta in a named basis.

    MONOMIAL gives [[0, J], [J, -2cJ]], SHIFTED gives [[0, J], [J, 0]],
    DELTA gives the diagonal idempotent coupling and INTERLEAVED the
    congruence of the monomial pairing with the eigen-basis of C^n.
    DELTA and INTERLEAVED exist only in the float backend.
    """
    if basis_tag is BasisTag.MONOMIAL:
        return PairingMatrix(_monomial_eta(params, backend), BasisTag.MONOMIAL)
    if basis_tag is BasisTag.SHIFTED:
        mono = PairingMatrix(_monomial_eta(params, backend), BasisTag.MONOMIAL)
        return change_basis(mono, shifted_basis_matrix(params, backend), BasisTag.SHIFTED)
    if backend is Backend.EXACT:
        raise BasisMismatchError(f'The {basis_tag.value} pairing is only available in the float backend')
    if basis_tag is BasisTag.DELTA:
        return PairingMatrix(delta_coupling_formula(params), BasisTag.DELTA)
    if basis_tag is BasisTag.INTERLEAVED:
        from tworing.coupling_operator import interleaved_basis

        mono = PairingMatrix(_monomial_eta(params, backend), BasisTag.MONOMIAL)
        return change_basis(mono, interleaved_basis(params).basis_matrix, BasisTag.INTERLEAVED)
    raise BasisMismatchError(f'Unsupported basis {basis_tag}')


def change_basis(p: PairingMatrix, m: np.ndarray, basis_tag: Optional[BasisTag] = None) -> PairingMatrix:
    """
    Congruence transform M eta M^T.

    Args:
        p: Pairing in the old basis
        m: Rows hold the new basis vectors in old coordinates
        basis_tag: Tag of the new basis (defaults to the old tag)

    Raises:
        SingularMatrixError: If M is not invertible
    """
    m = np.asarray(m)
    if m.shape != p.entries.shape:
        raise InvalidParamsError(f'Change of basis has shape {m.shape}, pairing has {p.entries.shape}')
    tag = basis_tag if basis_tag is not None else p.basis_tag
    if m.dtype == object or p.is_exact:
        m_obj = m.astype(object)
        if sympy.Matrix(m_obj.tolist()).det() == 0:
            raise SingularMatrixError('Change-of-basis matrix is singular')
        entries = m_obj.dot(p.entries.astype(object)).dot(m_obj.T)
        entries = np.array([[sympy.expand(v) for v in row] for row in entries], dtype=object)
        return PairingMatrix(entries, tag, p.scale_note)
    if np.linalg.matrix_rank(m) < m.shape[0]:
        raise SingularMatrixError('Change-of-basis matrix is singular')
    return PairingMatrix(m @ p.entries @ m.T, tag, p.scale_note)


def reality_residual(g: np.ndarray, eta: Union[PairingMatrix, np.ndarray]) -> float:
    """
    Operator norm of eta^{-1} g (eta^{-1} g)^* - 1, where * is complex conjugation.

    Raises:
        SingularMatrixError: If eta is singular
    """
    eta_values = eta.to_float() if isinstance(eta, PairingMatrix) else np.asarray(eta, dtype=complex)
    g = np.asarray(g, dtype=complex)
    if g.shape != eta_values.shape:
        raise InvalidParamsError(f'Metric has shape {g.shape}, pairing has {eta_values.shape}')
    try:
        k = np.linalg.solve(eta_values, g)
    except np.linalg.LinAlgError:
        raise SingularMatrixError('Pairing matrix is singular')
    return float(np.linalg.norm(k @ k.conj() - np.eye(len(g)), 2))


def so_j_metric(n: int, rng: np.random.Generator, scale: float = 0.3) -> np.ndarray:
    """
    Random g = exp(i [[A, B], [B*, A*]]) with J A J = A and J B J = B.

    Such g satisfies eta^{-1} g (eta^{-1} g)^* = 1 for eta = [[0, J], [J, 0]].
    """
    j = exchange_matrix(n)

    def persymmetric():
        raw = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
        return scale * (raw + j @ raw @ j) / 2

    a, b = persymmetric(), persymmetric()
    generator = np.block([[a, b], [b.conj(), a.conj()]])
    return scipy.linalg.expm(1j * generator)
