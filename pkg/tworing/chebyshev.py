"""
Chebyshev polynomials of the second kind U_k, the tilde family
U~_k(t) = i^k U_k(i t), and the division lemma

    x^{d+2} = (sum_{k<=d} U~_k(t) x^{d-k}) (x^2 + 2t x - 1) + U~_{d+1}(t) x + U~_d(t)

used as an independent oracle for reductions modulo y^2 + 2c y - 1.

All coefficient tables are exact Python integers, memoized per family
behind a lock.
"""
import threading
from dataclasses import dataclass
from enum import Enum
from typing import Dict, List, Optional, Sequence, Tuple

import sympy

from tworing.errors import InvalidParamsError


class ChebyshevKind(Enum):
    U = 'U'
    U_TILDE = 'UTilde'


@dataclass(frozen=True)
class ChebyshevSeq:
    """Coefficient table of one family; coeff_table[k] is ascending in t."""

    kind: ChebyshevKind
    coeff_table: Tuple[Tuple[int, ...], ...]


@dataclass(frozen=True)
class DivisionResult:
    """Quotient U~_0..U~_d and remainder (U~_{d+1}, U~_d) of the division lemma."""

    d: int
    quotient: Tuple[sympy.Expr, ...]
    remainder: Tuple[sympy.Expr, sympy.Expr]


# sign of the 2t term and of the k-1 term in the three-term recurrence
_RECURRENCE = {
    ChebyshevKind.U: (2, -1),
    ChebyshevKind.U_TILDE: (-2, 1),
}

_TABLES: Dict[ChebyshevKind, List[Tuple[int, ...]]] = {
    ChebyshevKind.U: [(1,), (0, 2)],
    ChebyshevKind.U_TILDE: [(1,), (0, -2)],
}
_TABLE_LOCK = threading.Lock()


def _coefficients(kind: ChebyshevKind, k: int) -> Tuple[int, ...]:
    if k < 0:
        raise InvalidParamsError(f'Chebyshev degree must be non-negative, got {k}')
    with _TABLE_LOCK:
        table = _TABLES[kind]
        lead, tail = _RECURRENCE[kind]
        while len(table) <= k:
            current, previous = table[-1], table[-2]
            nxt = [0] * (len(current) + 1)
            for m, coeff in enumerate(current):
                nxt[m + 1] += lead * coeff
            for m, coeff in enumerate(previous):
                nxt[m] += tail * coeff
            table.append(tuple(nxt))
        return table[k]


def u_poly(k: int) -> Tuple[int, ...]:
    """
    Exact coefficients of U_k(t), ascending in t.

    U_0 = 1, U_1 = 2t, U_{k+1} = 2t U_k - U_{k-1}.
    """
    return _coefficients(ChebyshevKind.U, k)


def u_tilde_poly(k: int) -> Tuple[int, ...]:
    """
    Exact coefficients of U~_k(t), ascending in t.

    U~_0 = 1, U~_1 = -2t, U~_{k+1} = -2t U~_k + U~_{k-1}.
    """
    return _coefficients(ChebyshevKind.U_TILDE, k)


def chebyshev_sequence(kind: ChebyshevKind, kmax: int) -> ChebyshevSeq:
    """Table of degrees 0..kmax of one family."""
    fetch = u_poly if kind is ChebyshevKind.U else u_tilde_poly
    return ChebyshevSeq(kind=kind, coeff_table=tuple(fetch(k) for k in range(kmax + 1)))


def evaluate(coeffs: Sequence, t):
    """Evaluate ascending coefficients at t (numbers or sympy expressions)."""
    value = 0
    for coeff in reversed(coeffs):
        value = value * t + coeff
    return value


def as_expr(coeffs: Sequence[int], symbol: Optional[sympy.Symbol] = None) -> sympy.Expr:
    """Coefficients as a sympy polynomial expression."""
    symbol = symbol if symbol is not None else sympy.Symbol('t')
    return sympy.expand(sum(sympy.Integer(c) * symbol ** m for m, c in enumerate(coeffs)))


def tilde_identity_holds(k: int) -> bool:
    """Check U~_k(t) = i^k U_k(i t) as an exact polynomial identity."""
    t = sympy.Symbol('t')
    rotated = sympy.expand(sympy.I ** k * as_expr(u_poly(k), t).subs(t, sympy.I * t))
    return sympy.expand(rotated - as_expr(u_tilde_poly(k), t)) == 0


def division_lemma(d: int, t_value=None) -> DivisionResult:
    """
    Quotient and remainder of x^{d+2} by x^2 + 2t x - 1.

    Args:
        d: Degree offset, d >= 0
        t_value: Value of t (number, rational or sympy expression); a free
                 symbol t when omitted

    Returns:
        DivisionResult with quotient coefficients U~_0(t)..U~_d(t) (quotient
        term k multiplies x^{d-k}) and remainder (U~_{d+1}(t), U~_d(t)),
        i.e. remainder[0] x + remainder[1]
    """
    if d < 0:
        raise InvalidParamsError(f'd must be non-negative, got {d}')
    t = sympy.Symbol('t') if t_value is None else sympy.sympify(t_value)
    quotient = tuple(sympy.expand(evaluate(u_tilde_poly(k), t)) for k in range(d + 1))
    remainder = (
        sympy.expand(evaluate(u_tilde_poly(d + 1), t)),
        sympy.expand(evaluate(u_tilde_poly(d), t)),
    )
    return DivisionResult(d=d, quotient=quotient, remainder=remainder)


def verify_division_lemma(d: int, t_value=None) -> bool:
    """
    Check the lemma for one d two ways: by expanding the right-hand side,
    and against sympy's polynomial long division.
    """
    x = sympy.Symbol('x')
    t = sympy.Symbol('t') if t_value is None else sympy.sympify(t_value)
    result = division_lemma(d, t)
    divisor = x ** 2 + 2 * t * x - 1
    quotient = sum(q * x ** (d - k) for k, q in enumerate(result.quotient))
    remainder = result.remainder[0] * x + result.remainder[1]
    if sympy.expand(quotient * divisor + remainder - x ** (d + 2)) != 0:
        return False
    q_ref, r_ref = sympy.div(x ** (d + 2), divisor, x)
    return sympy.expand(q_ref - quotient) == 0 and sympy.expand(r_ref - remainder) == 0


def reduce_by_lemma(coeffs: Sequence, c) -> Tuple[sympy.Expr, sympy.Expr]:
    """
    Reduce sum_m coeffs[m] y^m modulo y^2 + 2c y - 1 using the lemma.

    Returns:
        (constant, linear) coefficients of the remainder
    """
    c = sympy.sympify(c)
    constant = sympy.Integer(0)
    linear = sympy.Integer(0)
    for m, coeff in enumerate(coeffs):
        coeff = sympy.sympify(coeff)
        if coeff == 0:
            continue
        if m == 0:
            constant += coeff
        elif m == 1:
            linear += coeff
        else:
            rem_linear, rem_constant = division_lemma(m - 2, c).remainder
            constant += coeff * rem_constant
            linear += coeff * rem_linear
    return sympy.expand(constant), sympy.expand(linear)


def generating_partial_sum(t: complex, z: complex, kmax: int) -> complex:
    """Partial sum sum_{k<=kmax} U_k(t) z^k of the generating function 1/(1 - 2tz + z^2)."""
    total = 0j
    for k in range(kmax + 1):
        total += complex(evaluate(u_poly(k), t)) * z ** k
    return total
