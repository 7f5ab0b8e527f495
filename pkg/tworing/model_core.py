"""
Deformed superpotential, two-ring critical points and arithmetic in the
chiral ring R = C[x]/(x^{2n} + 2c x^n - 1).

Two arithmetic backends are available. The float backend works with
complex128 numpy arrays; the exact backend works with numpy object arrays
holding sympy numbers (rational c, symbolic parameters). Every function
that builds numbers takes a ``backend`` argument; functions that consume
ring elements follow the backend of their operands.
"""
import cmath
import math
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from functools import cached_property
from typing import Any, List, Sequence, Tuple, Union

import numpy as np
import sympy

from tworing.errors import BasisMismatchError, IllConditionedError, InvalidParamsError


# Minimum distance between two critical points before the residue and
# Chinese-remainder constructions refuse to run.
SEPARATION_THRESHOLD = 1e-8


class Backend(Enum):
    """Arithmetic backend."""

    FLOAT = 'float'
    EXACT = 'exact'


class BasisTag(Enum):
    """Named bases of the chiral ring."""

    MONOMIAL = 'monomial'
    SHIFTED = 'shifted'
    DELTA = 'delta'
    INTERLEAVED = 'interleaved'

    @classmethod
    def parse(cls, name: str) -> 'BasisTag':
        """Look up a tag by its lower-case name."""
        try:
            return cls(name.strip().lower())
        except ValueError:
            choices = ', '.join(tag.value for tag in cls)
            raise BasisMismatchError(f"Unknown basis '{name}'. Expected one of: {choices}")


def _to_rational(value: Any) -> sympy.Rational:
    """Convert a real scalar to an exact sympy Rational (0.3 -> 3/10)."""
    if isinstance(value, (complex, np.complexfloating)):
        raise InvalidParamsError(f'c must be real, got complex value {value!r}')
    if isinstance(value, sympy.Basic):
        if not value.is_real:
            raise InvalidParamsError(f'c must be real, got {value}')
        return sympy.Rational(value)
    if isinstance(value, Fraction):
        return sympy.Rational(value.numerator, value.denominator)
    if isinstance(value, bool):
        raise InvalidParamsError('c must be a number, got a boolean')
    if isinstance(value, (int, np.integer)):
        return sympy.Integer(int(value))
    if isinstance(value, (float, np.floating)):
        if not math.isfinite(value):
            raise InvalidParamsError(f'c must be finite, got {value!r}')
        return sympy.Rational(repr(float(value)))
    if isinstance(value, str):
        try:
            result = sympy.Rational(value.strip())
        except (TypeError, ValueError, sympy.SympifyError):
            raise InvalidParamsError(f"Could not parse c = '{value}' as a real number")
        return result
    raise InvalidParamsError(f'Unsupported type for c: {type(value).__name__}')


@dataclass(frozen=True)
class ModelParams:
    """
    Parameters (n, c, t) of the superpotential
    w(x) = t (x^{2n+1}/(2n+1) + 2c x^{n+1}/(n+1) - x).

    Args:
        n: Half the ring dimension (number of critical points on each ring)
        c: Real deformation parameter; accepts int, float, Fraction, str or
           a sympy rational. Floats are read through their decimal repr, so
           0.3 is the rational 3/10 in the exact backend.
        t: Nonzero complex overall coupling
    """

    n: int
    c: Union[int, float, str, Fraction, sympy.Rational] = 0
    t: complex = 1.0

    def __post_init__(self):
        if isinstance(self.n, bool) or not isinstance(self.n, (int, np.integer)) or self.n < 1:
            raise InvalidParamsError(f'n must be a positive integer, got {self.n!r}')
        _to_rational(self.c)
        try:
            t_value = complex(self.t)
        except (TypeError, ValueError):
            raise InvalidParamsError(f't must be a complex number, got {self.t!r}')
        if t_value == 0 or not (math.isfinite(t_value.real) and math.isfinite(t_value.imag)):
            raise InvalidParamsError(f't must be finite and nonzero, got {self.t!r}')

    @property
    def dim(self) -> int:
        """Dimension 2n of the chiral ring."""
        return 2 * self.n

    @cached_property
    def c_exact(self) -> sympy.Rational:
        return _to_rational(self.c)

    @cached_property
    def c_float(self) -> float:
        return float(self.c_exact)

    @property
    def t_complex(self) -> complex:
        return complex(self.t)

    @cached_property
    def t_exact(self) -> sympy.Expr:
        t_value = self.t_complex
        return sympy.Rational(repr(t_value.real)) + sympy.I * sympy.Rational(repr(t_value.imag))

    def c_value(self, backend: Backend):
        """c in the requested backend."""
        return self.c_exact if backend is Backend.EXACT else self.c_float

    def t_value(self, backend: Backend):
        """t in the requested backend."""
        return self.t_exact if backend is Backend.EXACT else self.t_complex


@dataclass(frozen=True)
class RootData:
    """
    Critical points of w and the constants attached to them.

    ``a_power`` and ``b_power`` are a^n and b^n. ``alpha`` and ``beta`` are
    defined without the coupling t, so that w''(a_j) a_j = t alpha and
    w''(b_j) b_j = t beta.
    """

    a: float
    b: float
    a_power: float
    b_power: float
    omega: complex
    epsilon: complex
    alpha: float
    beta: float
    a_roots: Tuple[complex, ...]
    b_roots: Tuple[complex, ...]

    @property
    def all_roots(self) -> Tuple[complex, ...]:
        """Roots in the order a_0..a_{n-1}, b_0..b_{n-1}."""
        return self.a_roots + self.b_roots


def _zeros(size: int, exact: bool) -> np.ndarray:
    if exact:
        return np.array([sympy.Integer(0)] * size, dtype=object)
    return np.zeros(size, dtype=complex)


def _as_coeff_array(coeffs: Sequence) -> np.ndarray:
    arr = np.asarray(coeffs)
    if arr.dtype == object:
        return np.array([sympy.sympify(v) for v in arr], dtype=object)
    return arr.astype(complex)


def _expand_exact(arr: np.ndarray) -> np.ndarray:
    return np.array([sympy.expand(v) for v in arr], dtype=object)


def modulus(params: ModelParams, backend: Backend = Backend.FLOAT) -> np.ndarray:
    """
    Coefficients of x^{2n} + 2c x^n - 1 in ascending order of degree.

    Args:
        params: Model parameters
        backend: FLOAT returns complex128, EXACT returns sympy rationals

    Returns:
        Array of length 2n + 1
    """
    n = params.n
    exact = backend is Backend.EXACT
    coeffs = _zeros(2 * n + 1, exact)
    coeffs[0] = coeffs[0] - 1
    coeffs[n] = coeffs[n] + 2 * params.c_value(backend)
    coeffs[2 * n] = coeffs[2 * n] + 1
    return coeffs


def exact_ring_radii(params: ModelParams) -> Tuple[sympy.Expr, sympy.Expr]:
    """Exact a^n = sqrt(1+c^2) - c and b^n = sqrt(1+c^2) + c."""
    c = params.c_exact
    root = sympy.sqrt(1 + c ** 2)
    return root - c, root + c


def roots(params: ModelParams) -> RootData:
    """
    Locate the 2n critical points of w on the two rings |x| = a and |x| = b.

    a^n and b^n are the positive solutions of A B = 1, B - A = 2c. The
    smaller of the two is obtained as the reciprocal of the larger so that
    large |c| does not cancel catastrophically.

    Returns:
        RootData with a_j = a omega^j and b_j = b omega^j epsilon
    """
    n = params.n
    c = params.c_float
    hyp = math.hypot(1.0, c)
    if c >= 0:
        b_power = hyp + c
        a_power = 1.0 / b_power
    else:
        a_power = hyp - c
        b_power = 1.0 / a_power
    a = a_power ** (1.0 / n)
    b = b_power ** (1.0 / n)
    a_roots = tuple(a * cmath.exp(2j * math.pi * j / n) for j in range(n))
    b_roots = tuple(b * cmath.exp(1j * math.pi * (2 * j + 1) / n) for j in range(n))
    return RootData(
        a=a,
        b=b,
        a_power=a_power,
        b_power=b_power,
        omega=cmath.exp(2j * math.pi / n),
        epsilon=cmath.exp(1j * math.pi / n),
        alpha=n * a_power * (a_power + b_power),
        beta=n * b_power * (a_power + b_power),
        a_roots=a_roots,
        b_roots=b_roots,
    )


def check_separation(points: Sequence[complex], threshold: float = SEPARATION_THRESHOLD) -> float:
    """
    Return the minimum pairwise distance between points.

    Raises:
        IllConditionedError: If two points are closer than threshold
    """
    pts = np.asarray(points, dtype=complex)
    if len(pts) < 2:
        return math.inf
    dist = np.abs(pts[:, None] - pts[None, :])
    dist[np.diag_indices(len(pts))] = np.inf
    smallest = float(dist.min())
    if smallest < threshold:
        raise IllConditionedError(
            f'Critical points are nearly degenerate: minimum distance {smallest:.3e} < {threshold:.1e}'
        )
    return smallest


def eval_w(x: complex, params: ModelParams) -> complex:
    """Superpotential w(x)."""
    n, c, t = params.n, params.c_float, params.t_complex
    return t * (x ** (2 * n + 1) / (2 * n + 1) + 2 * c * x ** (n + 1) / (n + 1) - x)


def eval_w1(x: complex, params: ModelParams) -> complex:
    """First derivative w'(x) = t (x^{2n} + 2c x^n - 1)."""
    n, c, t = params.n, params.c_float, params.t_complex
    return t * (x ** (2 * n) + 2 * c * x ** n - 1)


def eval_w2(x: complex, params: ModelParams) -> complex:
    """Second derivative w''(x) = t n x^{n-1} (2 x^n + 2c)."""
    n, c, t = params.n, params.c_float, params.t_complex
    return t * n * x ** (n - 1) * (2 * x ** n + 2 * c)


def critical_point_residual(params: ModelParams) -> float:
    """Largest relative |w'(r)| over the stored roots."""
    rd = roots(params)
    worst = 0.0
    for r in rd.all_roots:
        scale = abs(params.t_complex) * max(1.0, abs(r) ** (2 * params.n))
        worst = max(worst, abs(eval_w1(r, params)) / scale)
    return worst


@dataclass(frozen=True, eq=False)
class RingElement:
    """
    Class of a polynomial in R, stored as 2n coordinates.

    In the MONOMIAL tag the coordinates are the coefficients of
    1, x, ..., x^{2n-1}. Other tags mark coordinates with respect to the
    corresponding named basis; arithmetic is only defined on MONOMIAL.
    """

    coeffs: np.ndarray
    basis_tag: BasisTag = BasisTag.MONOMIAL

    def __post_init__(self):
        arr = np.array(_as_coeff_array(self.coeffs), copy=True)
        if arr.ndim != 1 or len(arr) == 0 or len(arr) % 2:
            raise InvalidParamsError(f'Ring coordinates must be a vector of even length, got shape {arr.shape}')
        arr.flags.writeable = False
        object.__setattr__(self, 'coeffs', arr)

    @property
    def dim(self) -> int:
        return len(self.coeffs)

    @property
    def is_exact(self) -> bool:
        return self.coeffs.dtype == object

    def to_float(self) -> 'RingElement':
        if not self.is_exact:
            return self
        return RingElement(np.array([complex(sympy.N(v)) for v in self.coeffs]), self.basis_tag)

    def allclose(self, other: 'RingElement', atol: float = 1e-12) -> bool:
        if self.basis_tag is not other.basis_tag:
            return False
        return bool(np.allclose(self.to_float().coeffs, other.to_float().coeffs, rtol=0.0, atol=atol))

    def __repr__(self) -> str:
        return f'RingElement({list(self.coeffs)}, {self.basis_tag.value})'


def _check_dim(u: RingElement, params: ModelParams):
    if u.dim != params.dim:
        raise InvalidParamsError(f'Ring element has {u.dim} coordinates, expected {params.dim}')


def _common_tag(u: RingElement, v: RingElement, operation: str) -> BasisTag:
    if u.basis_tag is not v.basis_tag:
        raise BasisMismatchError(
            f'Cannot {operation} elements in different bases ({u.basis_tag.value} vs {v.basis_tag.value})'
        )
    return u.basis_tag


def _coerce_pair(u: RingElement, v: RingElement) -> Tuple[np.ndarray, np.ndarray]:
    if u.is_exact and v.is_exact:
        return u.coeffs, v.coeffs
    return u.to_float().coeffs, v.to_float().coeffs


def _polymul(p: np.ndarray, q: np.ndarray) -> np.ndarray:
    if p.dtype != object and q.dtype != object:
        return np.polynomial.polynomial.polymul(p, q)
    out = _zeros(len(p) + len(q) - 1, True)
    for i, pi in enumerate(p):
        if pi == 0:
            continue
        for j, qj in enumerate(q):
            out[i + j] = out[i + j] + pi * qj
    return out


def reduce_poly(coeffs: Sequence, params: ModelParams) -> np.ndarray:
    """
    Reduce a polynomial modulo x^{2n} + 2c x^n - 1.

    Leading terms are eliminated from the top degree down with
    x^{2n} = 1 - 2c x^n. Object arrays are reduced exactly (and expanded, so
    symbolic coefficients come back in canonical form).

    Args:
        coeffs: Ascending coefficients of any length
        params: Model parameters

    Returns:
        Array of length 2n holding the reduced representative
    """
    arr = _as_coeff_array(coeffs)
    exact = arr.dtype == object
    n = params.n
    two_c = 2 * (params.c_exact if exact else params.c_float)
    work = _zeros(max(len(arr), 2 * n), exact)
    work[: len(arr)] = arr
    for k in range(len(work) - 1, 2 * n - 1, -1):
        lead = work[k]
        if lead == 0:
            continue
        work[k] = 0 if not exact else sympy.Integer(0)
        work[k - n] = work[k - n] - two_c * lead
        work[k - 2 * n] = work[k - 2 * n] + lead
    reduced = work[: 2 * n]
    return _expand_exact(reduced) if exact else reduced


def from_poly(coeffs: Sequence, params: ModelParams) -> RingElement:
    """Class in R of an arbitrary polynomial (monomial coordinates)."""
    return RingElement(reduce_poly(coeffs, params))


def monomial(k: int, params: ModelParams, backend: Backend = Backend.FLOAT) -> RingElement:
    """Class of x^k."""
    if k < 0:
        raise InvalidParamsError(f'Monomial degree must be non-negative, got {k}')
    coeffs = _zeros(k + 1, backend is Backend.EXACT)
    coeffs[k] = coeffs[k] + 1
    return from_poly(coeffs, params)


def ring_one(params: ModelParams, backend: Backend = Backend.FLOAT) -> RingElement:
    """Unit element."""
    return monomial(0, params, backend)


def ring_zero(params: ModelParams, backend: Backend = Backend.FLOAT) -> RingElement:
    """Zero element."""
    return RingElement(_zeros(params.dim, backend is Backend.EXACT))


def ring_add(u: RingElement, v: RingElement) -> RingElement:
    """Sum of two elements carrying the same basis tag."""
    tag = _common_tag(u, v, 'add')
    p, q = _coerce_pair(u, v)
    total = p + q
    if total.dtype == object:
        total = _expand_exact(total)
    return RingElement(total, tag)


def ring_scale(u: RingElement, scalar) -> RingElement:
    """Scalar multiple of an element."""
    if u.is_exact and isinstance(scalar, (sympy.Basic, int, Fraction)):
        return RingElement(_expand_exact(u.coeffs * sympy.sympify(scalar)), u.basis_tag)
    return RingElement(u.to_float().coeffs * complex(scalar), u.basis_tag)


def ring_mul(u: RingElement, v: RingElement, params: ModelParams) -> RingElement:
    """
    Product of two classes in R.

    Raises:
        BasisMismatchError: If either operand is not in the MONOMIAL basis
    """
    tag = _common_tag(u, v, 'multiply')
    if tag is not BasisTag.MONOMIAL:
        raise BasisMismatchError(f'Ring multiplication is defined on monomial coordinates, got {tag.value}')
    _check_dim(u, params)
    _check_dim(v, params)
    p, q = _coerce_pair(u, v)
    return from_poly(_polymul(p, q), params)


def ring_power(u: RingElement, k: int, params: ModelParams) -> RingElement:
    """k-th power of an element by repeated squaring."""
    if k < 0:
        raise InvalidParamsError(f'Exponent must be non-negative, got {k}')
    result = ring_one(params, Backend.EXACT if u.is_exact else Backend.FLOAT)
    base = u
    while k:
        if k & 1:
            result = ring_mul(result, base, params)
        k >>= 1
        if k:
            base = ring_mul(base, base, params)
    return result


def evaluate(u: RingElement, x):
    """Value at x of the degree < 2n representative of u (Horner)."""
    if u.basis_tag is not BasisTag.MONOMIAL:
        raise BasisMismatchError('Only monomial coordinates can be evaluated at a point')
    coeffs = u.coeffs if u.is_exact and isinstance(x, sympy.Basic) else u.to_float().coeffs
    value = 0
    for coeff in coeffs[::-1]:
        value = value * x + coeff
    return value


def coefficient_rows(elements: List[RingElement]) -> np.ndarray:
    """Stack the monomial coordinates of several elements as matrix rows."""
    exact = all(e.is_exact for e in elements)
    rows = [e.coeffs if exact else e.to_float().coeffs for e in elements]
    return np.array(rows, dtype=object if exact else complex)
