"""
Radial relaxation solver for the periodic 2x2 block Toda system

    d-bar(G_j d G_j^{-1}) - D G_{j+1} D^+ G_j^{-1} + G_j D^+ G_{j-1}^{-1} D = S_j,
    G_{j+n} = G_j,

on r in [r_min, r_max], with d d-bar reduced to FLOW_PREFACTOR (d^2/dr^2 + (1/r) d/dr).
D = 1 gives the plain non-Abelian Toda chain; D = diag(lambda^{1/n}, mu^{1/n})
makes the block residual coincide with the full zero-curvature residual of
the block-diagonal metric against the interleaved C. S_j is an optional
source used by manufactured solutions.

Unknowns are Hermitian positive-definite blocks, stored on every grid point;
the first and last points hold fixed boundary data.
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import List, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg
import scipy.optimize
import scipy.sparse
import scipy.sparse.linalg

from tworing.errors import (
    DivergenceError,
    InvalidParamsError,
    NonDiagonalError,
    SingularMatrixError,
)
from tworing.pairing import reality_residual


logger = logging.getLogger(__name__)

# d d-bar acting on radial functions of r = |t|
FLOW_PREFACTOR = 0.25

HERMITIAN_TOLERANCE = 1e-12
DIAGONAL_TOLERANCE = 1e-10
FD_STEP = 5e-6
MIN_DAMPING = 1e-8
# sufficient decrease for the line search; blocks already this far below tol are left alone
ARMIJO_SLOPE = 1e-4
ARMIJO_FLOOR = 1e-2
STRATEGIES = ('gauss_seidel', 'newton')


@dataclass(frozen=True)
class RadialGrid:
    """Uniform grid of ``points`` values on [r_min, r_max], r_min > 0."""

    r_min: float
    r_max: float
    points: int

    def __post_init__(self):
        if not (np.isfinite(self.r_min) and np.isfinite(self.r_max)):
            raise InvalidParamsError('Grid bounds must be finite')
        if self.r_min <= 0:
            raise InvalidParamsError(f'r_min must be positive (the radial operator has a 1/r term), got {self.r_min}')
        if self.r_max <= self.r_min:
            raise InvalidParamsError(f'r_max must exceed r_min, got [{self.r_min}, {self.r_max}]')
        if isinstance(self.points, bool) or not isinstance(self.points, (int, np.integer)) or self.points < 3:
            raise InvalidParamsError(f'A grid needs at least 3 points, got {self.points!r}')

    @classmethod
    def parse(cls, text: str) -> 'RadialGrid':
        """Parse ``r_min:r_max:points``, e.g. ``0.5:1.5:65``."""
        parts = text.split(':')
        if len(parts) != 3:
            raise InvalidParamsError(f"Grid must look like r_min:r_max:points, got '{text}'")
        try:
            return cls(float(parts[0]), float(parts[1]), int(parts[2]))
        except ValueError:
            raise InvalidParamsError(f"Could not parse grid '{text}'")

    @property
    def spacing(self) -> float:
        return (self.r_max - self.r_min) / (self.points - 1)

    @property
    def r(self) -> np.ndarray:
        return np.linspace(self.r_min, self.r_max, self.points)

    def refined(self) -> 'RadialGrid':
        """Same interval with the spacing halved."""
        return RadialGrid(self.r_min, self.r_max, 2 * self.points - 1)


def hermitian_defect(blocks: np.ndarray) -> float:
    """Largest |G - G^+| entry over a stack of blocks."""
    return float(np.max(np.abs(blocks - np.conj(np.swapaxes(blocks, -1, -2))))) if blocks.size else 0.0


def is_positive_definite(blocks: np.ndarray) -> bool:
    """Sylvester test on a stack of Hermitian 2x2 blocks."""
    g11 = blocks[..., 0, 0].real
    det = (blocks[..., 0, 0] * blocks[..., 1, 1] - blocks[..., 0, 1] * blocks[..., 1, 0]).real
    return bool(np.all(g11 > 0) and np.all(det > 0) and np.all(np.isfinite(blocks)))


@dataclass(frozen=True, eq=False)
class MetricBlock:
    """A Hermitian positive-definite 2x2 block."""

    g: np.ndarray

    def __post_init__(self):
        g = np.array(self.g, dtype=complex)
        if g.shape != (2, 2):
            raise InvalidParamsError(f'A metric block is 2x2, got shape {g.shape}')
        if hermitian_defect(g) > HERMITIAN_TOLERANCE:
            raise InvalidParamsError('Metric block is not Hermitian')
        if not is_positive_definite(g):
            raise InvalidParamsError('Metric block is not positive-definite')
        g.flags.writeable = False
        object.__setattr__(self, 'g', g)

    @property
    def det(self) -> float:
        return float(np.linalg.det(self.g).real)


@dataclass(frozen=True, eq=False)
class TodaState:
    """
    Blocks G_j(r_i) stored as an array of shape (n, points, 2, 2).

    ``coupling`` is the 2x2 block D; ``source`` (same shape as ``blocks``)
    is subtracted from the residual when present.
    """

    blocks: np.ndarray
    grid: RadialGrid
    coupling: Optional[np.ndarray] = None
    source: Optional[np.ndarray] = None

    def __post_init__(self):
        blocks = np.array(self.blocks, dtype=complex)
        if blocks.ndim != 4 or blocks.shape[2:] != (2, 2) or blocks.shape[0] < 1:
            raise InvalidParamsError(f'Blocks must have shape (n, points, 2, 2), got {blocks.shape}')
        if blocks.shape[1] != self.grid.points:
            raise InvalidParamsError(f'Blocks have {blocks.shape[1]} grid points, grid has {self.grid.points}')
        if hermitian_defect(blocks) > HERMITIAN_TOLERANCE:
            raise InvalidParamsError('Blocks are not Hermitian')
        if not is_positive_definite(blocks):
            raise InvalidParamsError('Blocks are not positive-definite')
        coupling = np.eye(2, dtype=complex) if self.coupling is None else np.array(self.coupling, dtype=complex)
        if coupling.shape != (2, 2):
            raise InvalidParamsError(f'Coupling block must be 2x2, got {coupling.shape}')
        object.__setattr__(self, 'blocks', blocks)
        object.__setattr__(self, 'coupling', coupling)
        if self.source is not None:
            source = np.array(self.source, dtype=complex)
            if source.shape != blocks.shape:
                raise InvalidParamsError(f'Source has shape {source.shape}, blocks have {blocks.shape}')
            object.__setattr__(self, 'source', source)

    @property
    def period_n(self) -> int:
        return self.blocks.shape[0]

    def block(self, j: int, i: int) -> MetricBlock:
        """G_j at grid index i, with j taken modulo n."""
        return MetricBlock(self.blocks[j % self.period_n, i])

    def with_blocks(self, blocks: np.ndarray) -> 'TodaState':
        return TodaState(blocks, self.grid, self.coupling, self.source)


class BoundaryMode(Enum):
    """Where the fixed blocks at r_min and r_max come from."""

    MANUFACTURED = 'manufactured'
    USER_SUPPLIED = 'user_supplied'


@dataclass(frozen=True, eq=False)
class SolverConfig:
    """
    Relaxation settings.

    Args:
        tol: Target for the largest per-site residual
        max_iter: Maximum number of sweeps
        damping: Starting Newton step length in (0, 1], restored at every
                 update; a trial step is halved until the blocks stay
                 positive-definite and the block residual decreases
        bc_mode: MANUFACTURED keeps the boundary points of the initial
                 state; USER_SUPPLIED writes boundary_left/boundary_right
                 (arrays of shape (n, 2, 2)) into them
        patience: Consecutive residual increases tolerated before giving up
        renormalize_det: Rescale every interior block to unit determinant
                         after each accepted step
        threads: Worker threads for residual evaluation
        strategy: "gauss_seidel" (one Newton line solve per block, ascending j)
                  or "newton" (all blocks at once)
        reality_eta: Pairing in the interleaved basis; when given, the
                     reality residual of the solution is reported
    """

    tol: float = 1e-9
    max_iter: int = 50
    damping: float = 1.0
    bc_mode: BoundaryMode = BoundaryMode.MANUFACTURED
    boundary_left: Optional[np.ndarray] = None
    boundary_right: Optional[np.ndarray] = None
    patience: int = 5
    renormalize_det: bool = False
    threads: int = 1
    strategy: str = 'gauss_seidel'
    reality_eta: Optional[np.ndarray] = None

    def __post_init__(self):
        if not (self.tol > 0):
            raise InvalidParamsError(f'tol must be positive, got {self.tol}')
        if self.max_iter < 0:
            raise InvalidParamsError(f'max_iter must be non-negative, got {self.max_iter}')
        if not (0 < self.damping <= 1):
            raise InvalidParamsError(f'damping must lie in (0, 1], got {self.damping}')
        if self.patience < 1:
            raise InvalidParamsError(f'patience must be at least 1, got {self.patience}')
        if self.threads < 1:
            raise InvalidParamsError(f'threads must be at least 1, got {self.threads}')
        if self.strategy not in STRATEGIES:
            raise InvalidParamsError(f"strategy must be one of {', '.join(STRATEGIES)}, got '{self.strategy}'")
        if self.bc_mode is BoundaryMode.USER_SUPPLIED and (self.boundary_left is None or self.boundary_right is None):
            raise InvalidParamsError('User-supplied boundary mode needs both boundary_left and boundary_right')


@dataclass
class SolveReport:
    """Convergence report returned by solve()."""

    iterations: int
    converged: bool
    final_residual: float
    determinant_drift: float
    hermiticity_drift: float
    damping: float
    rejected_steps: int = 0
    history: List[float] = field(default_factory=list)
    reality_residual: Optional[float] = None

    def to_dict(self) -> dict:
        return {
            'iterations': self.iterations,
            'converged': self.converged,
            'final_residual': self.final_residual,
            'determinant_drift': self.determinant_drift,
            'hermiticity_drift': self.hermiticity_drift,
            'damping': self.damping,
            'rejected_steps': self.rejected_steps,
            'history': list(self.history),
            'reality_residual': self.reality_residual,
        }


def _inverses(blocks: np.ndarray) -> np.ndarray:
    det = blocks[..., 0, 0] * blocks[..., 1, 1] - blocks[..., 0, 1] * blocks[..., 1, 0]
    if not np.all(np.isfinite(det)) or np.any(np.abs(det) < 1e-300):
        raise SingularMatrixError('A metric block is singular')
    return np.linalg.inv(blocks)


def logm_2x2(m: np.ndarray) -> np.ndarray:
    """
    Principal logarithm of a stack of 2x2 matrices with eigenvalues off the
    negative real axis, via log M = log(l2) + f[l1, l2] (M - l2).
    """
    half_trace = 0.5 * (m[..., 0, 0] + m[..., 1, 1])
    det = m[..., 0, 0] * m[..., 1, 1] - m[..., 0, 1] * m[..., 1, 0]
    # principal sqrt has Re >= 0, so half_trace + disc is the larger eigenvalue
    disc = np.sqrt(half_trace * half_trace - det + 0j)
    large = half_trace + disc
    small = det / large
    ratio = disc / half_trace
    near = np.abs(ratio) < 1e-6
    safe_disc = np.where(near, 1.0, disc)
    # divided difference (log l1 - log l2) / (l1 - l2) = artanh(d/a) / d
    divided = np.where(near, (1 + ratio * ratio / 3) / half_trace, np.arctanh(np.where(near, 0, ratio)) / safe_disc)
    eye = np.eye(2)
    shifted = m - small[..., None, None] * eye
    return np.log(small)[..., None, None] * eye + divided[..., None, None] * shifted


def _log_ratio(ahead: np.ndarray, behind_inv: np.ndarray) -> np.ndarray:
    """log(G_{i+1} G_i^{-1}) for stacks of consecutive metrics."""
    ratio = ahead @ behind_inv
    if ratio.shape[-1] == 2:
        return logm_2x2(ratio)
    return np.array([scipy.linalg.logm(m) for m in ratio], dtype=complex)


def flow_term(g: np.ndarray, g_inv: np.ndarray, r: np.ndarray, h: float) -> np.ndarray:
    """
    Discrete d-bar(G d G^{-1}) at interior points in flux form.

    With the half-point fluxes L_{i+1/2} = log(G_{i+1} G_i^{-1}) / h, which
    approximate G' G^{-1} to second order,

        flow_i = -FLOW_PREFACTOR ((L_{i+1/2} - L_{i-1/2}) / h + (L_{i+1/2} + L_{i-1/2}) / (2 r_i)).

    For commuting metrics this is the standard stencil applied to log G, so
    it is odd under G -> G^{-1}. Works on stacks of any square size; the
    grid runs along axis 0.
    """
    flux = _log_ratio(g[1:], g_inv[:-1]) / h
    ahead, behind = flux[1:], flux[:-1]
    radius = r[1:-1, None, None]
    return -FLOW_PREFACTOR * ((ahead - behind) / h + (ahead + behind) / (2 * radius))


def _block_residual(
    blocks: np.ndarray,
    inverses: np.ndarray,
    j: int,
    grid: RadialGrid,
    coupling: np.ndarray,
    source: Optional[np.ndarray],
) -> np.ndarray:
    n = blocks.shape[0]
    g, g_inv = blocks[j], inverses[j]
    ahead = blocks[(j + 1) % n, 1:-1]
    behind_inv = inverses[(j - 1) % n, 1:-1]
    d, d_dag = coupling, coupling.conj().T
    out = flow_term(g, g_inv, grid.r, grid.spacing)
    out = out - d @ ahead @ d_dag @ g_inv[1:-1] + g[1:-1] @ d_dag @ behind_inv @ d
    if source is not None:
        out = out - source[j, 1:-1]
    return out


def _interior_residuals(state_blocks, grid, coupling, source, js: Sequence[int], threads: int = 1) -> np.ndarray:
    inverses = _inverses(state_blocks)

    def one(j):
        return _block_residual(state_blocks, inverses, j, grid, coupling, source)

    if threads > 1 and len(js) > 1:
        with ThreadPoolExecutor(max_workers=threads) as executor:
            results = list(executor.map(one, js))
    else:
        results = [one(j) for j in js]
    return np.stack(results)


def toda_residual_blocks(state: TodaState, threads: int = 1) -> np.ndarray:
    """
    Residual matrices R_j at every grid point, shape (n, points, 2, 2).

    Boundary points carry zeros. Blocks are evaluated independently, so the
    result does not depend on ``threads``.

    Raises:
        SingularMatrixError: If any block is singular
    """
    n = state.period_n
    out = np.zeros_like(state.blocks)
    out[:, 1:-1] = _interior_residuals(state.blocks, state.grid, state.coupling, state.source, range(n), threads)
    return out


def toda_residual(state: TodaState, threads: int = 1) -> np.ndarray:
    """
    Per-site residual: at each grid point the Frobenius norm of the stacked
    R_0..R_{n-1} (zero at the two boundary points).
    """
    blocks = toda_residual_blocks(state, threads)
    return np.sqrt(np.sum(np.abs(blocks) ** 2, axis=(0, 2, 3)))


def toda_residual_per_block(state: TodaState, threads: int = 1) -> np.ndarray:
    """Frobenius norm of R_j at each grid point, shape (n, points)."""
    blocks = toda_residual_blocks(state, threads)
    return np.sqrt(np.sum(np.abs(blocks) ** 2, axis=(2, 3)))


def _to_params(blocks: np.ndarray) -> np.ndarray:
    return np.stack(
        [blocks[..., 0, 0].real, blocks[..., 1, 1].real, blocks[..., 0, 1].real, blocks[..., 0, 1].imag], axis=-1
    )


def _from_params(params: np.ndarray) -> np.ndarray:
    out = np.empty(params.shape[:-1] + (2, 2), dtype=complex)
    off = params[..., 2] + 1j * params[..., 3]
    out[..., 0, 0] = params[..., 0]
    out[..., 1, 1] = params[..., 1]
    out[..., 0, 1] = off
    out[..., 1, 0] = np.conj(off)
    return out


class _Equations:
    """
    Real equations herm(R_j M_j) for a subset of blocks. M_j is G_j itself
    unless a fixed multiplier is passed; the Jacobian freezes it at the
    current iterate so that its columns only carry the variation of R_j.
    """

    def __init__(self, grid: RadialGrid, coupling: np.ndarray, source: Optional[np.ndarray], threads: int):
        self.grid = grid
        self.coupling = coupling
        self.source = source
        self.threads = threads

    def residuals(self, blocks: np.ndarray, js: Sequence[int]) -> np.ndarray:
        return _interior_residuals(blocks, self.grid, self.coupling, self.source, js, self.threads)

    def __call__(self, blocks: np.ndarray, js: Sequence[int], multiplier: Optional[np.ndarray] = None) -> np.ndarray:
        if multiplier is None:
            multiplier = blocks[list(js), 1:-1]
        product = self.residuals(blocks, js) @ multiplier
        off = 0.5 * (product[..., 0, 1] + np.conj(product[..., 1, 0]))
        return np.stack([product[..., 0, 0].real, product[..., 1, 1].real, off.real, off.imag], axis=-1)


def _jacobian(equations: _Equations, blocks: np.ndarray, js: Sequence[int]) -> scipy.sparse.csc_matrix:
    """
    Central-difference Jacobian of the equations for blocks ``js`` with
    respect to their interior parameters. Points are coloured mod 3, so each
    evaluation perturbs a whole colour class of one parameter of one block.
    """
    count = len(js)
    interior = blocks.shape[1] - 2
    size = 4 * count * interior
    multiplier = blocks[list(js), 1:-1].copy()
    params = _to_params(multiplier)
    steps = FD_STEP * np.maximum(1.0, np.abs(params))
    rows, cols, vals = [], [], []
    eq_index = np.arange(4)
    for jj, j in enumerate(js):
        for k in range(4):
            for color in range(3):
                pts = np.arange(color, interior, 3)
                if len(pts) == 0:
                    continue
                delta = np.zeros((interior, 4))
                delta[pts, k] = steps[jj, pts, k]
                plus = blocks.copy()
                plus[j, 1:-1] = _from_params(params[jj] + delta)
                minus = blocks.copy()
                minus[j, 1:-1] = _from_params(params[jj] - delta)
                diff = equations(plus, js, multiplier) - equations(minus, js, multiplier)
                for offset in (-1, 0, 1):
                    target = pts + offset
                    valid = (target >= 0) & (target < interior)
                    src, target = pts[valid], target[valid]
                    if len(src) == 0:
                        continue
                    scale = 2 * steps[jj, src, k]
                    block_vals = diff[:, target, :] / scale[None, :, None]
                    row = (np.arange(count)[:, None, None] * interior + target[None, :, None]) * 4 + eq_index
                    col = np.broadcast_to(((jj * interior + src) * 4 + k)[None, :, None], row.shape)
                    rows.append(row.ravel())
                    cols.append(col.ravel())
                    vals.append(block_vals.ravel())
    matrix = scipy.sparse.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(size, size)
    )
    return matrix.tocsc()


def _renormalize(blocks: np.ndarray) -> np.ndarray:
    det = (blocks[..., 0, 0] * blocks[..., 1, 1] - blocks[..., 0, 1] * blocks[..., 1, 0]).real
    return blocks / np.sqrt(det)[..., None, None]


def _newton_step(
    equations: _Equations, blocks: np.ndarray, js: Sequence[int], damping: float, renormalize: bool, tol: float
) -> Tuple[np.ndarray, float, int]:
    """
    One line-searched Newton update of blocks ``js``.

    The step starts at ``damping`` and is halved until the trial blocks are
    positive-definite and the residual norm of blocks ``js`` decreases.

    Returns:
        (blocks, accepted step length, rejected trials)
    """
    merit = float(np.linalg.norm(equations.residuals(blocks, js)))
    if merit <= ARMIJO_FLOOR * tol:
        return blocks, damping, 0
    rhs = equations(blocks, js)
    jac = _jacobian(equations, blocks, js)
    try:
        delta = scipy.sparse.linalg.spsolve(jac, -rhs.ravel())
    except RuntimeError as e:
        raise SingularMatrixError(f'Newton system is singular: {e}')
    if not np.all(np.isfinite(delta)):
        raise DivergenceError('Newton update is not finite')
    delta = delta.reshape(rhs.shape)
    base = _to_params(blocks[list(js), 1:-1])
    step = damping
    rejected = 0
    while True:
        trial = _from_params(base + step * delta)
        if is_positive_definite(trial):
            if renormalize:
                trial = _renormalize(trial)
            candidate = blocks.copy()
            candidate[list(js), 1:-1] = trial
            trial_merit = float(np.linalg.norm(equations.residuals(candidate, js)))
            if trial_merit <= (1 - ARMIJO_SLOPE * step) * merit:
                return candidate, step, rejected
            reason = f'residual {merit:.3e} -> {trial_merit:.3e}'
        else:
            reason = 'step leaves the positive-definite cone'
        rejected += 1
        step *= 0.5
        logger.debug('Rejected trial (%s); step reduced to %.3e', reason, step)
        if step < MIN_DAMPING:
            if merit < tol:
                return blocks, step, rejected
            raise DivergenceError(f'Step length fell below {MIN_DAMPING:.0e} without reducing the residual ({merit:.3e})')


def _apply_boundaries(blocks: np.ndarray, cfg: SolverConfig) -> np.ndarray:
    if cfg.bc_mode is not BoundaryMode.USER_SUPPLIED:
        return blocks
    n = blocks.shape[0]
    out = blocks.copy()
    for index, data in ((0, cfg.boundary_left), (-1, cfg.boundary_right)):
        data = np.asarray(data, dtype=complex)
        if data.shape != (n, 2, 2):
            raise InvalidParamsError(f'Boundary data must have shape ({n}, 2, 2), got {data.shape}')
        out[:, index] = data
    return out


def solve(initial: TodaState, cfg: SolverConfig) -> Tuple[TodaState, SolveReport]:
    """
    Relax the interior blocks until the largest per-site residual drops
    below cfg.tol or cfg.max_iter sweeps have been made.

    Each sweep makes one line-searched Newton update per block in ascending
    j (Gauss-Seidel), or one update of all blocks together with the "newton"
    strategy. Newton systems use a sparse finite-difference Jacobian. The
    report's ``damping`` is the step length of the last update.

    Returns:
        (final state, SolveReport)

    Raises:
        DivergenceError: If the residual grows for cfg.patience consecutive
                         sweeps, becomes non-finite, or the line search
                         cannot reduce it
        SingularMatrixError: If a block or a Newton system is singular
    """
    blocks = _apply_boundaries(initial.blocks, cfg)
    state = initial.with_blocks(blocks)
    n = state.period_n
    equations = _Equations(state.grid, state.coupling, state.source, cfg.threads)
    groups = [[j] for j in range(n)] if cfg.strategy == 'gauss_seidel' else [list(range(n))]

    damping = cfg.damping
    rejected = 0
    history: List[float] = []
    increases = 0
    iterations = 0
    converged = False
    while True:
        residual = float(np.max(toda_residual(state, cfg.threads)))
        history.append(residual)
        if not np.isfinite(residual):
            raise DivergenceError(f'Residual became non-finite after {iterations} sweeps')
        logger.info('sweep %d: max residual %.3e, damping %.3e', iterations, residual, damping)
        if residual < cfg.tol:
            converged = True
            break
        if iterations >= cfg.max_iter:
            break
        if len(history) > 1 and residual > history[-2]:
            increases += 1
            if increases >= cfg.patience:
                raise DivergenceError(f'Residual increased for {increases} consecutive sweeps (now {residual:.3e})')
        else:
            increases = 0
        for js in groups:
            blocks, damping, step_rejected = _newton_step(
                equations, blocks, js, cfg.damping, cfg.renormalize_det, cfg.tol
            )
            rejected += step_rejected
        state = state.with_blocks(blocks)
        iterations += 1

    if not converged:
        logger.warning('Solver stopped after %d sweeps with residual %.3e', iterations, history[-1])
    det = np.linalg.det(state.blocks)
    report = SolveReport(
        iterations=iterations,
        converged=converged,
        final_residual=history[-1],
        determinant_drift=float(np.max(np.abs(det - 1.0))),
        hermiticity_drift=hermitian_defect(state.blocks),
        damping=damping,
        rejected_steps=rejected,
        history=history,
    )
    if cfg.reality_eta is not None:
        report.reality_residual = float(np.max(reality_residual_field(state, cfg.reality_eta)))
    return state, report


def assemble_metric(state: TodaState) -> np.ndarray:
    """Block-diagonal 2n x 2n metric at each grid point (interleaved layout)."""
    n, points = state.period_n, state.grid.points
    out = np.zeros((points, 2 * n, 2 * n), dtype=complex)
    for j in range(n):
        out[:, 2 * j : 2 * j + 2, 2 * j : 2 * j + 2] = state.blocks[j]
    return out


def zero_curvature_field(metric: np.ndarray, c_matrix: np.ndarray, grid: RadialGrid) -> np.ndarray:
    """
    Frobenius norm of d-bar(g d g^{-1}) - [C, g C^+ g^{-1}] at each grid
    point (zero at the boundary points).
    """
    metric = np.asarray(metric, dtype=complex)
    c = np.asarray(c_matrix, dtype=complex)
    try:
        inverse = np.linalg.inv(metric)
    except np.linalg.LinAlgError:
        raise SingularMatrixError('Metric is singular')
    inner, inner_inv = metric[1:-1], inverse[1:-1]
    conj_c = c.conj().T
    rotated = inner @ conj_c @ inner_inv
    commutator = c @ rotated - rotated @ c
    field_values = np.zeros(len(metric))
    field_values[1:-1] = np.linalg.norm(flow_term(metric, inverse, grid.r, grid.spacing) - commutator, axis=(1, 2))
    return field_values


def zero_curvature_residual(metric: np.ndarray, c_matrix, grid: Optional[RadialGrid] = None) -> float:
    """
    Largest zero-curvature residual.

    Args:
        metric: A single 2n x 2n metric (taken as r-independent, so only
                the commutator term remains) or a field of shape
                (points, 2n, 2n) sampled on ``grid``
        c_matrix: C in the same basis as the metric (array or CouplingOperator)
        grid: Radial grid, required for fields

    Raises:
        SingularMatrixError: If g is singular
    """
    c = np.asarray(getattr(c_matrix, 'matrix', c_matrix), dtype=complex)
    metric = np.asarray(metric, dtype=complex)
    if metric.ndim == 2:
        try:
            inverse = np.linalg.inv(metric)
        except np.linalg.LinAlgError:
            raise SingularMatrixError('Metric is singular')
        rotated = metric @ c.conj().T @ inverse
        return float(np.linalg.norm(c @ rotated - rotated @ c))
    if grid is None:
        raise InvalidParamsError('A radial grid is needed for a metric field')
    return float(np.max(zero_curvature_field(metric, c, grid)))


def reality_residual_field(state: TodaState, eta) -> np.ndarray:
    """Reality residual of the assembled metric at each grid point."""
    metric = assemble_metric(state)
    return np.array([reality_residual(g, eta) for g in metric])


def reality_completion(blocks: np.ndarray, eta: np.ndarray) -> np.ndarray:
    """
    Fill in blocks so that the assembled metric satisfies the reality
    constraint for an interleaved-basis pairing eta.

    eta pairs block a with a* = n - 1 - a. For a < a*, G_{a*} is replaced by
    E conj(G_a)^{-1} E^+, E being the (a*, a) block of eta. A self-paired
    block (odd n) is left unchanged.

    Args:
        blocks: Array of shape (n, ..., 2, 2)
        eta: 2n x 2n pairing in the interleaved basis
    """
    eta = np.asarray(eta, dtype=complex)
    out = np.array(blocks, dtype=complex, copy=True)
    n = out.shape[0]
    for a in range(n):
        partner = n - 1 - a
        if partner <= a:
            continue
        e = eta[2 * partner : 2 * partner + 2, 2 * a : 2 * a + 2]
        out[partner] = e @ np.linalg.inv(np.conj(out[a])) @ e.conj().T
    if n % 2:
        logger.info('Block %d is self-paired and left as is', n // 2)
    return out


@dataclass(frozen=True, eq=False)
class AbelianReduction:
    """Scalar fields q (shape (n, points, 2)) and their Toda residual."""

    q: np.ndarray
    residual: np.ndarray

    @property
    def max_residual(self) -> float:
        return float(np.max(np.abs(self.residual)))


def _scalar_residual(
    q: np.ndarray, grid: RadialGrid, weights: np.ndarray, source: Optional[np.ndarray]
) -> np.ndarray:
    """
    Interior residual of the scalar chain
    -FLOW_PREFACTOR (q'' + q'/r) - w e^{q_{j+1} - q_j} + w e^{q_j - q_{j-1}} - s
    for q of shape (n, points, 2).
    """
    h = grid.spacing
    r = grid.r[1:-1][None, :, None]
    second = (q[:, 2:] - 2 * q[:, 1:-1] + q[:, :-2]) / (h * h)
    first = (q[:, 2:] - q[:, :-2]) / (2 * h)
    flow = -FLOW_PREFACTOR * (second + first / r)
    inner = q[:, 1:-1]
    ahead = np.roll(q, -1, axis=0)[:, 1:-1]
    behind = np.roll(q, 1, axis=0)[:, 1:-1]
    out = flow - weights * np.exp(ahead - inner) + weights * np.exp(inner - behind)
    if source is not None:
        out = out - source[:, 1:-1]
    return out


def abelian_reduce(state: TodaState) -> AbelianReduction:
    """
    q_j = log of the diagonal entries of diagonal blocks, with the residual
    of the scalar periodic Toda chain they obey.

    Raises:
        NonDiagonalError: If any off-diagonal entry exceeds 1e-10
    """
    blocks = state.blocks
    off = max(np.max(np.abs(blocks[..., 0, 1])), np.max(np.abs(blocks[..., 1, 0])))
    if off > DIAGONAL_TOLERANCE:
        raise NonDiagonalError(f'Blocks are not diagonal (largest off-diagonal entry {off:.3e})')
    u = np.stack([blocks[..., 0, 0].real, blocks[..., 1, 1].real], axis=-1)
    weights = np.abs(np.diag(state.coupling)) ** 2
    source = None
    if state.source is not None:
        source = np.stack([state.source[..., 0, 0].real, state.source[..., 1, 1].real], axis=-1)
    q = np.log(u)
    residual = np.zeros_like(q)
    residual[:, 1:-1] = _scalar_residual(q, state.grid, weights, source)
    return AbelianReduction(q=q, residual=residual)


def scalar_toda_solve(
    q_left: np.ndarray,
    q_right: np.ndarray,
    grid: RadialGrid,
    weights: Optional[np.ndarray] = None,
    source: Optional[np.ndarray] = None,
    q_init: Optional[np.ndarray] = None,
    tol: float = 1e-13,
) -> np.ndarray:
    """
    Solve the scalar periodic Toda chain for q of shape (n, points, 2) with
    fixed values at both ends, using scipy.optimize.root (hybrid Powell).

    Args:
        q_left, q_right: Boundary values, shape (n, 2)
        grid: Radial grid
        weights: |D_aa|^2 per component (ones by default)
        source: Optional scalar source, shape (n, points, 2)
        q_init: Starting guess (linear interpolation by default)
        tol: Relative step tolerance passed to the root finder

    Raises:
        DivergenceError: If the root finder does not converge
    """
    q_left = np.asarray(q_left, dtype=float)
    q_right = np.asarray(q_right, dtype=float)
    n = q_left.shape[0]
    weights = np.ones(2) if weights is None else np.asarray(weights, dtype=float)
    points = grid.points
    if q_init is None:
        frac = np.linspace(0.0, 1.0, points)[None, :, None]
        q_init = (1 - frac) * q_left[:, None, :] + frac * q_right[:, None, :]
    q = np.array(q_init, dtype=float, copy=True)
    q[:, 0], q[:, -1] = q_left, q_right
    shape = (n, points - 2, 2)

    def equations(x):
        q[:, 1:-1] = x.reshape(shape)
        return _scalar_residual(q, grid, weights, source).ravel()

    result = scipy.optimize.root(equations, q[:, 1:-1].ravel(), method='hybr', options={'xtol': tol})
    if not result.success:
        raise DivergenceError(f'Scalar Toda solve failed: {result.message}')
    q[:, 1:-1] = result.x.reshape(shape)
    return q
