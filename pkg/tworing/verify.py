"""
Verification suites behind ``tworing verify``.

Each suite runs a list of numbered identity checks and returns a
SuiteResult. A failing check records the module and operation it
exercises and an anchor naming the identity that was violated.
"""
import logging
import math
import time
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional

import numpy as np
import sympy

from tworing import chebyshev
from tworing.coupling_operator import (
    c_operator,
    c_power_closure_float,
    cayley_hamilton_residual,
    closure_data,
    eigen_residual,
    eta_block_pattern,
    interleaved_basis,
    interleaved_pattern_defect,
    weight_relation_residual,
)
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
from tworing.errors import TworingError
from tworing.manufactured import DiagonalFamily, HermitianFamily, manufactured_state, perturb_interior
from tworing.model_core import (
    Backend,
    BasisTag,
    ModelParams,
    RingElement,
    critical_point_residual,
    eval_w2,
    monomial,
    ring_add,
    ring_mul,
    ring_one,
    roots,
)
from tworing.pairing import (
    change_basis,
    delta_coupling_direct,
    delta_coupling_formula,
    eta_matrix,
    exchange_matrix,
    grothendieck_residue,
    reality_residual,
    residue_closed_form,
    so_j_metric,
)
from tworing.toda_solver import (
    RadialGrid,
    SolverConfig,
    TodaState,
    abelian_reduce,
    reality_completion,
    scalar_toda_solve,
    solve,
    toda_residual,
)


logger = logging.getLogger(__name__)

DEFAULT_SEED = 20240611
DEFAULT_DMAX = 12
CONVERGENCE_GRIDS = (65, 129, 257)


@dataclass
class Check:
    """Outcome of one identity check."""

    module: str
    operation: str
    anchor: str
    passed: bool
    value: Optional[float] = None
    tolerance: Optional[float] = None
    message: str = ''

    def to_dict(self) -> dict:
        return {
            'module': self.module,
            'operation': self.operation,
            'anchor': self.anchor,
            'passed': self.passed,
            'value': self.value,
            'tolerance': self.tolerance,
            'message': self.message,
        }


@dataclass
class SuiteResult:
    """All checks of one suite."""

    name: str
    checks: List[Check] = field(default_factory=list)
    seconds: float = 0.0

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    @property
    def failures(self) -> List[Check]:
        return [c for c in self.checks if not c.passed]

    def to_dict(self) -> dict:
        return {
            'suite': self.name,
            'passed': self.passed,
            'checks': len(self.checks),
            'failed': len(self.failures),
            'seconds': round(self.seconds, 3),
            'failures': [c.to_dict() for c in self.failures],
        }


class _Recorder:
    def __init__(self, suite: SuiteResult, module: str):
        self.suite = suite
        self.module = module

    def below(self, operation: str, anchor: str, value: float, tol: float, message: str = ''):
        passed = bool(np.isfinite(value) and value <= tol)
        self.suite.checks.append(Check(self.module, operation, anchor, passed, float(value), tol, message))

    def holds(self, operation: str, anchor: str, condition: bool, message: str = ''):
        self.suite.checks.append(Check(self.module, operation, anchor, bool(condition), message=message))

    def guard(self, operation: str, anchor: str, fn: Callable[[], None]) -> bool:
        """Run fn, recording any library error as a failed check."""
        try:
            fn()
        except TworingError as e:
            self.holds(operation, anchor, False, f'{type(e).__name__}: {e}')
            return False
        return True


def _exact_equal(a: np.ndarray, b: np.ndarray) -> bool:
    return all(sympy.simplify(x - y) == 0 for x, y in zip(np.ravel(a), np.ravel(b)))


def _expected_monomial_eta(params: ModelParams) -> np.ndarray:
    n = params.n
    c = params.c_exact
    zero = sympy.Integer(0)
    out = np.array([[zero] * (2 * n) for _ in range(2 * n)], dtype=object)
    for i in range(n):
        out[i, 2 * n - 1 - i] = sympy.Integer(1)
        out[n + i, n - 1 - i] = sympy.Integer(1)
        out[n + i, 2 * n - 1 - i] = -2 * c
    return out


def _expected_shifted_eta(n: int) -> np.ndarray:
    j = exchange_matrix(n)
    zero = np.zeros((n, n))
    return np.block([[zero, j], [j, zero]])


def _random_element(rng: np.random.Generator, dim: int) -> RingElement:
    return RingElement(rng.normal(size=dim) + 1j * rng.normal(size=dim))


def suite_residue(params: ModelParams, seed: int = DEFAULT_SEED, **_) -> SuiteResult:
    """Residue sum against the closed forms, critical points and w''."""
    suite = SuiteResult('residue')
    rec = _Recorder(suite, 'pairing')
    n = params.n

    def run():
        for k in range(4 * n - 1):
            direct = grothendieck_residue(monomial(k, params), params)
            closed = residue_closed_form(k, params)
            rec.below(
                'grothendieck_residue',
                f'Res_w(x^{k}) residue sum = closed form',
                abs(direct - closed),
                1e-10 * max(1.0, abs(closed)),
            )
        rec.holds(
            'residue_closed_form',
            'Res_w(x^{2n-1}) = 1/t',
            abs(residue_closed_form(2 * n - 1, params) - 1 / params.t_complex) < 1e-12,
        )

    rec.guard('grothendieck_residue', 'residue sum over critical points', run)
    core = _Recorder(suite, 'model_core')
    core.below("roots", "w'(r) = 0 at critical points", critical_point_residual(params), 1e-12)
    rd = roots(params)
    t = params.t_complex
    core.below(
        'eval_w2',
        "w''(a_j) a_j = t alpha",
        max(abs(eval_w2(a, params) * a - t * rd.alpha) for a in rd.a_roots),
        1e-12 * max(1.0, abs(t * rd.alpha)),
    )
    core.below(
        'eval_w2',
        "w''(b_j) b_j = t beta",
        max(abs(eval_w2(b, params) * b - t * rd.beta) for b in rd.b_roots),
        1e-12 * max(1.0, abs(t * rd.beta)),
    )
    core.below('roots', 'a^n b^n = 1', abs(rd.a_power * rd.b_power - 1), 1e-12)
    core.below('roots', 'b^n - a^n = 2c', abs(rd.b_power - rd.a_power - 2 * params.c_float), 1e-12 * max(1.0, abs(params.c_float)))
    return suite


def suite_eta(params: ModelParams, seed: int = DEFAULT_SEED, **_) -> SuiteResult:
    """Exact and floating pairing matrices in the named bases."""
    suite = SuiteResult('eta')
    rec = _Recorder(suite, 'pairing')
    n = params.n

    def run():
        mono = eta_matrix(BasisTag.MONOMIAL, params, Backend.EXACT)
        rec.holds(
            'eta_matrix',
            'eta_monomial = [[0, J], [J, -2cJ]]',
            _exact_equal(mono.entries, _expected_monomial_eta(params)),
        )
        shifted = eta_matrix(BasisTag.SHIFTED, params, Backend.EXACT)
        rec.holds(
            'eta_matrix',
            'eta_shifted = [[0, J], [J, 0]]',
            _exact_equal(shifted.entries, _expected_shifted_eta(n).astype(int)),
        )
        values = shifted.to_float()
        rec.below('eta_matrix', 'eta_shifted = eta_shifted^-1', float(np.max(np.abs(values @ values - np.eye(2 * n)))), 1e-12)
        mono_float = eta_matrix(BasisTag.MONOMIAL, params)
        rec.below('eta_matrix', 'eta symmetric', mono_float.symmetry_defect(), 1e-12)
        rec.holds('eta_matrix', 'eta nondegenerate', abs(np.linalg.det(mono_float.to_float())) > 1e-10)
        support = np.abs(mono_float.to_float()) > 0
        idx = np.arange(2 * n)
        allowed = ((idx[:, None] + idx[None, :] + 1) % n) == 0
        rec.holds('eta_matrix', 'eta_ij = 0 unless n | i+j+1', not np.any(support & ~allowed))
        formula = delta_coupling_formula(params)
        direct = delta_coupling_direct(params)
        rec.below(
            'eta_matrix',
            'delta coupling formula = residues of idempotents',
            float(np.max(np.abs(formula - direct))),
            1e-10 * max(1.0, float(np.max(np.abs(formula)))),
        )

    rec.guard('eta_matrix', 'pairing in named bases', run)

    rng = np.random.default_rng(seed)
    metric = so_j_metric(n, rng)
    eta_shifted = _expected_shifted_eta(n)
    rec.below('reality_residual', 'SO(J) metrics satisfy the reality constraint', reality_residual(metric, eta_shifted), 1e-10)
    return suite


def suite_crt(params: ModelParams, seed: int = DEFAULT_SEED, **_) -> SuiteResult:
    """Idempotent basis, Vandermonde congruence and delta coupling."""
    suite = SuiteResult('crt')
    rec = _Recorder(suite, 'crt_symmetry')
    n = params.n

    def run():
        basis = delta_basis(params)
        total = basis[0]
        for element in basis[1:]:
            total = ring_add(total, element)
        rec.below('delta_basis', 'sum of idempotents = 1', float(np.max(np.abs(total.coeffs - ring_one(params).coeffs))), 1e-10)
        worst = 0.0
        for i, u in enumerate(basis):
            for j, v in enumerate(basis):
                product = ring_mul(u, v, params).coeffs
                expected = u.coeffs if i == j else 0
                worst = max(worst, float(np.max(np.abs(product - expected))))
        rec.below('delta_basis', 'delta_i delta_j = delta_ij delta_i', worst, 1e-9)
        rec.holds('delta_basis', 'idempotent has component x/root at its root', lagrange_matches_crt(params))
        v = vandermonde(params)
        w = delta_coordinate_matrix(params)
        rec.below('vandermonde', 'V W = 1', float(np.max(np.abs(v @ w - np.eye(2 * n)))), 1e-9)
        rec.below('vandermonde', 'first row of V is all ones', float(np.max(np.abs(v[0] - 1))), 1e-15)
        mono = eta_matrix(BasisTag.MONOMIAL, params).to_float()
        delta = eta_matrix(BasisTag.DELTA, params)
        congruent = change_basis(delta, v, BasisTag.MONOMIAL).to_float()
        rec.below(
            'change_basis',
            'V eta_delta V^T = eta_monomial',
            float(np.max(np.abs(congruent - mono))),
            1e-10 * max(1.0, float(np.max(np.abs(mono)))),
        )

    rec.guard('delta_basis', 'Chinese-remainder basis', run)
    return suite


def suite_lemma(params: ModelParams, seed: int = DEFAULT_SEED, dmax: int = DEFAULT_DMAX, **_) -> SuiteResult:
    """Exact Chebyshev identities and the two routes to (A_n, B_n)."""
    suite = SuiteResult('lemma')
    rec = _Recorder(suite, 'chebyshev')
    for d in range(dmax + 1):
        rec.holds('division_lemma', f'x^{d + 2} division by x^2 + 2tx - 1', chebyshev.verify_division_lemma(d))
    for k in range(dmax + 2):
        rec.holds('u_tilde_poly', f'U~_{k}(t) = i^{k} U_{k}(it)', chebyshev.tilde_identity_holds(k))
    theta = 0.7
    rec.below(
        'u_poly',
        'U_k(cos theta) sin theta = sin((k+1) theta)',
        max(
            abs(chebyshev.evaluate(chebyshev.u_poly(k), math.cos(theta)) * math.sin(theta) - math.sin((k + 1) * theta))
            for k in range(11)
        ),
        1e-12,
    )
    c = params.c_exact
    y = sympy.Symbol('y')
    for d in range(min(dmax, 8) + 1):
        modulus = sympy.Poly(y ** 2 + 2 * c * y - 1, y)
        reference = sympy.Poly(y ** (d + 2), y).rem(modulus)
        linear, constant = chebyshev.division_lemma(d, c).remainder
        expected = sympy.Poly(linear * y + constant, y)
        rec.holds('division_lemma', f'remainder of y^{d + 2} mod y^2 + 2cy - 1', (reference - expected).is_zero)
    coupling = _Recorder(suite, 'coupling_operator')
    anchor = 'C^n(1) by reduction = C^n(1) by division lemma'
    if coupling.guard('closure_data', anchor, lambda: closure_data(params, Backend.EXACT)):
        coupling.holds('closure_data', anchor, True)
    return suite


def suite_eigen(params: ModelParams, seed: int = DEFAULT_SEED, **_) -> SuiteResult:
    """Closure, eigen-splitting and interleaved structure of C."""
    suite = SuiteResult('eigen')
    rec = _Recorder(suite, 'coupling_operator')
    n = params.n

    def run():
        operator = c_operator(params)
        a_n, b_n, off_span = c_power_closure_float(params)
        rec.below('closure_data', 'C^n(1) in span{1, x^n}', off_span, 1e-12 * max(1.0, abs(a_n), abs(b_n)))
        closure = operator.closure
        rec.below(
            'closure_data',
            'matrix power agrees with closure data',
            abs(a_n - complex(closure.a_n)) + abs(b_n - complex(closure.b_n)),
            1e-10 * max(1.0, abs(a_n), abs(b_n)),
        )
        c_power = np.linalg.matrix_power(np.asarray(operator.matrix, dtype=complex), n)
        power_scale = max(1.0, float(np.max(np.abs(c_power))))
        rec.below(
            'c_operator',
            'Cayley-Hamilton for C^n on span{1, x^n}',
            cayley_hamilton_residual(params),
            1e-9 * power_scale ** 2,
        )
        if operator.eigen is None:
            rec.holds('eigen_split', 'B_n != 0', False, 'B_n vanishes')
            return
        eigen = operator.eigen
        c = params.c_float
        a, b = complex(closure.a_n), complex(closure.b_n)
        rec.below('eigen_split', 'lambda + mu = 2(A - cB)', abs(eigen.lambda_n + eigen.mu_n - 2 * (a - c * b)), 1e-10 * max(1.0, abs(a), abs(b)))
        rec.below(
            'eigen_split',
            'lambda mu = A^2 - 2cAB - B^2',
            abs(eigen.lambda_n * eigen.mu_n - (a * a - 2 * c * a * b - b * b)),
            1e-10 * max(1.0, abs(a), abs(b)) ** 2,
        )
        rec.below('eigen_split', 'C^n phi = lambda phi', eigen_residual(params), 1e-10 * max(1.0, abs(eigen.lambda_n), abs(eigen.mu_n)))
        basis = interleaved_basis(params)
        scale = max(1.0, float(np.max(np.abs(basis.c_matrix))))
        # the basis is built from repeated products by C, so errors grow with |C^n|
        rec.below(
            'interleaved_basis',
            'C is block-cyclic with blocks D',
            interleaved_pattern_defect(params),
            1e-12 * scale * power_scale * np.linalg.cond(basis.basis_matrix),
        )
        eta_interleaved = eta_matrix(BasisTag.INTERLEAVED, params).to_float()
        outside = np.abs(eta_interleaved[~eta_block_pattern(n)])
        rec.below(
            'interleaved_basis',
            'eta pairs block j with block n-1-j',
            float(outside.max()) if outside.size else 0.0,
            1e-10 * max(1.0, float(np.max(np.abs(eta_interleaved)))),
        )

    rec.guard('c_operator', 'closure and eigen-splitting of C', run)
    return suite


def suite_theta(params: ModelParams, seed: int = DEFAULT_SEED, **_) -> SuiteResult:
    """The automorphism x -> omega x and the invariant metric pattern."""
    suite = SuiteResult('theta')
    rec = _Recorder(suite, 'crt_symmetry')
    n = params.n
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(100):
        u, v = _random_element(rng, 2 * n), _random_element(rng, 2 * n)
        lhs = apply_theta(ring_mul(u, v, params), params)
        rhs = ring_mul(apply_theta(u, params), apply_theta(v, params), params)
        worst = max(worst, float(np.max(np.abs(lhs.coeffs - rhs.coeffs))))
    rec.below('theta_matrix', 'theta(uv) = theta(u) theta(v)', worst, 1e-12 * 100)
    theta = theta_matrix(BasisTag.MONOMIAL, params)
    rec.below('theta_matrix', 'theta^n = 1', float(np.max(np.abs(np.linalg.matrix_power(theta, n) - np.eye(2 * n)))), 1e-12)
    cycle = theta_matrix(BasisTag.DELTA, params)
    rec.holds('theta_matrix', 'theta^n = 1 on idempotents', np.array_equal(np.linalg.matrix_power(cycle, n).real, np.eye(2 * n)))

    def run():
        rec.below(
            'theta_matrix',
            'theta permutes idempotents j -> j-1',
            float(np.max(np.abs(theta_delta_from_vandermonde(params) - cycle))),
            1e-9,
        )
        eta = eta_matrix(BasisTag.MONOMIAL, params).to_float()
        omega = roots(params).omega
        rec.below('theta_matrix', 'Theta eta Theta^T = omega^-1 eta', float(np.max(np.abs(theta @ eta @ theta.T - eta / omega))), 1e-12 * max(1.0, float(np.max(np.abs(eta)))))
        rec.below('c_operator', 'Theta C Theta^-1 = omega^-1 C', weight_relation_residual(params), 1e-12 * max(1.0, abs(params.c_float)))
        raw = rng.normal(size=(2 * n, 2 * n)) + 1j * rng.normal(size=(2 * n, 2 * n))
        projected = theta_average(raw, params)
        support = np.abs(projected) > 1e-12
        rec.holds('invariant_pattern', 'theta-invariant matrices live on the invariant pattern', not np.any(support & ~invariant_pattern(n)))
        basis = interleaved_basis(params)
        blocks = np.zeros((2 * n, 2 * n), dtype=complex)
        for j in range(n):
            a = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
            blocks[2 * j : 2 * j + 2, 2 * j : 2 * j + 2] = a @ a.conj().T + np.eye(2)
        p_inv = np.linalg.inv(basis.basis_matrix)
        monomial_metric = p_inv @ blocks @ p_inv.conj().T
        stray = np.abs(monomial_metric[~invariant_pattern(n)])
        rec.below(
            'invariant_pattern',
            'block-diagonal interleaved metric is theta-invariant in monomial basis',
            float(stray.max()) if stray.size else 0.0,
            1e-9 * max(1.0, float(np.max(np.abs(monomial_metric)))),
        )

    rec.guard('theta_matrix', 'automorphism structure', run)
    return suite


def suite_solver(params: ModelParams, seed: int = DEFAULT_SEED, threads: int = 1, **_) -> SuiteResult:
    """Discretisation order and manufactured-solution recovery."""
    suite = SuiteResult('solver')
    rec = _Recorder(suite, 'toda_solver')
    n = params.n if params.n in (2, 3) else 2
    for family in (DiagonalFamily(n), HermitianFamily(n)):
        name = type(family).__name__
        errors = []
        for points in CONVERGENCE_GRIDS:
            state = manufactured_state(family, RadialGrid(0.5, 1.5, points), source='analytic')
            errors.append(float(np.max(toda_residual(state, threads))))
        for coarse, fine in zip(errors, errors[1:]):
            rec.below('toda_residual', f'{name}: second-order truncation (ratio 4)', abs(coarse / fine - 4.0), 0.5)

    rng = np.random.default_rng(seed)
    family = HermitianFamily(n)
    grid = RadialGrid(0.5, 1.5, 65)
    exact = manufactured_state(family, grid)

    def recover():
        start = perturb_interior(exact, rng, 0.1)
        state, report = solve(start, SolverConfig(tol=1e-10, max_iter=50, threads=threads))
        rec.holds('solve', 'perturbed manufactured solution converges', report.converged, f'{report.iterations} sweeps')
        rec.below('solve', 'recovers manufactured blocks', float(np.max(np.abs(state.blocks - exact.blocks))), 1e-6)
        rec.below('solve', 'Hermiticity preserved', report.hermiticity_drift, 1e-12)
        _, fixed = solve(exact, SolverConfig(tol=1e-10, max_iter=2, threads=threads))
        rec.holds('solve', 'exact manufactured solution is a fixed point', fixed.converged and fixed.iterations <= 2)

    rec.guard('solve', 'manufactured-solution recovery', recover)
    return suite


def abelian_setup(points: int = 33) -> tuple:
    """
    n = 2, c = 0 boundary data from a diagonal family, completed so that it
    satisfies the reality constraint, with a linearly interpolated interior.

    Returns:
        (initial TodaState, interleaved pairing)
    """
    params = ModelParams(n=2, c=0)
    eta = eta_matrix(BasisTag.INTERLEAVED, params).to_float()
    grid = RadialGrid(0.5, 1.5, points)
    family = DiagonalFamily(2)
    ends = family.evaluate(np.array([grid.r_min, grid.r_max]))[0]
    ends = reality_completion(ends, eta)
    q_ends = np.log(np.stack([ends[..., 0, 0].real, ends[..., 1, 1].real], axis=-1))
    frac = np.linspace(0.0, 1.0, points)[None, :, None]
    q = (1 - frac) * q_ends[:, :1] + frac * q_ends[:, 1:]
    blocks = np.zeros((2, points, 2, 2), dtype=complex)
    blocks[..., 0, 0] = np.exp(q[..., 0])
    blocks[..., 1, 1] = np.exp(q[..., 1])
    return TodaState(blocks, grid), eta


def suite_abelian(params: ModelParams, seed: int = DEFAULT_SEED, threads: int = 1, **_) -> SuiteResult:
    """c -> 0 regression against an independent scalar Toda solve."""
    suite = SuiteResult('abelian')
    rec = _Recorder(suite, 'toda_solver')

    def run():
        initial, eta = abelian_setup()
        state, report = solve(initial, SolverConfig(tol=1e-11, max_iter=100, threads=threads, reality_eta=eta))
        rec.holds('solve', 'abelian boundary data converges', report.converged)
        off = float(np.max(np.abs(state.blocks[..., 0, 1])))
        rec.below('solve', 'diagonal data stays diagonal', off, 1e-10)
        reduced = abelian_reduce(state)
        rec.below('abelian_reduce', 'scalar Toda residual of the solution', reduced.max_residual, 1e-9)
        q_scalar = scalar_toda_solve(reduced.q[:, 0], reduced.q[:, -1], state.grid)
        rec.below('abelian_reduce', 'matches scalar Toda solve', float(np.max(np.abs(reduced.q - q_scalar))), 1e-8)
        rec.below('solve', 'reality constraint along the solution', report.reality_residual, 1e-8)

    rec.guard('abelian_reduce', 'c -> 0 regression', run)
    return suite


SUITES: Dict[str, Callable[..., SuiteResult]] = {
    'residue': suite_residue,
    'eta': suite_eta,
    'crt': suite_crt,
    'lemma': suite_lemma,
    'eigen': suite_eigen,
    'theta': suite_theta,
    'solver': suite_solver,
    'abelian': suite_abelian,
}


def run_suites(names: List[str], params: ModelParams, **options) -> List[SuiteResult]:
    """Run the named suites ("all" expands to every suite) in a fixed order."""
    if 'all' in names:
        names = list(SUITES)
    results = []
    for name in names:
        started = time.perf_counter()
        logger.info("Running suite '%s'", name)
        result = SUITES[name](params, **options)
        result.seconds = time.perf_counter() - started
        logger.info("Suite '%s': %s (%d checks)", name, "passed" if result.passed else "FAILED", len(result.checks))
        results.append(result)
    return results
