"""
Manufactured metric families with closed-form derivatives.

Each family returns G_j(r), G_j'(r), G_j''(r) as arrays of shape
(n, points, 2, 2). Substituting them into the block equations gives either
an analytic source (exact derivatives) or a discrete source (the residual
of the sampled family), the latter making the samples an exact fixed point
of the discretised system.
"""
import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from tworing.errors import InvalidParamsError
from tworing.toda_solver import FLOW_PREFACTOR, RadialGrid, TodaState, toda_residual_blocks

SOURCE_KINDS = ('discrete', 'analytic', 'none')


@dataclass(frozen=True)
class DiagonalFamily:
    """G_j = diag(e^{q_j}, e^{-q_j}) with q_j = amp sin(freq r + 2 pi j / n) + slope r."""

    n: int
    amp: float = 0.3
    freq: float = 2.0
    slope: float = 0.1

    def phases(self) -> np.ndarray:
        return 2 * math.pi * np.arange(self.n) / self.n

    def q(self, r: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """q_j and its first two derivatives, shape (n, points)."""
        arg = self.freq * r[None, :] + self.phases()[:, None]
        q0 = self.amp * np.sin(arg) + self.slope * r[None, :]
        q1 = self.amp * self.freq * np.cos(arg) + self.slope
        q2 = -self.amp * self.freq ** 2 * np.sin(arg)
        return q0, q1, q2

    def evaluate(self, r: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        q0, q1, q2 = self.q(r)
        up, down = np.exp(q0), np.exp(-q0)
        shape = q0.shape + (2, 2)
        g, g1, g2 = (np.zeros(shape, dtype=complex) for _ in range(3))
        g[..., 0, 0], g[..., 1, 1] = up, down
        g1[..., 0, 0], g1[..., 1, 1] = q1 * up, -q1 * down
        g2[..., 0, 0], g2[..., 1, 1] = (q2 + q1 ** 2) * up, (q1 ** 2 - q2) * down
        return g, g1, g2


@dataclass(frozen=True)
class HermitianFamily:
    """
    Unit-determinant Hermitian blocks
    G_j = [[e^q, z], [conj(z), (1 + |z|^2) e^{-q}]] with q_j as in
    DiagonalFamily and z_j = kappa (cos(nu1 r + j) + i sin(nu2 r + j/2)).
    """

    n: int
    amp: float = 0.3
    freq: float = 2.0
    slope: float = 0.1
    kappa: float = 0.2
    nu1: float = 1.5
    nu2: float = 2.5

    def z(self, r: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        j = np.arange(self.n)[:, None]
        a1 = self.nu1 * r[None, :] + j
        a2 = self.nu2 * r[None, :] + 0.5 * j
        z0 = self.kappa * (np.cos(a1) + 1j * np.sin(a2))
        z1 = self.kappa * (-self.nu1 * np.sin(a1) + 1j * self.nu2 * np.cos(a2))
        z2 = self.kappa * (-(self.nu1 ** 2) * np.cos(a1) - 1j * self.nu2 ** 2 * np.sin(a2))
        return z0, z1, z2

    def evaluate(self, r: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        q0, q1, q2 = DiagonalFamily(self.n, self.amp, self.freq, self.slope).q(r)
        z0, z1, z2 = self.z(r)
        m0 = 1 + np.abs(z0) ** 2
        m1 = 2 * np.real(np.conj(z0) * z1)
        m2 = 2 * (np.abs(z1) ** 2 + np.real(np.conj(z0) * z2))
        up, down = np.exp(q0), np.exp(-q0)
        s0 = m0 * down
        s1 = (m1 - m0 * q1) * down
        s2 = (m2 - 2 * m1 * q1 - m0 * q2 + m0 * q1 ** 2) * down

        shape = q0.shape + (2, 2)
        g, g1, g2 = (np.zeros(shape, dtype=complex) for _ in range(3))
        for out, diag_up, corner, diag_down in (
            (g, up, z0, s0),
            (g1, q1 * up, z1, s1),
            (g2, (q2 + q1 ** 2) * up, z2, s2),
        ):
            out[..., 0, 0] = diag_up
            out[..., 0, 1] = corner
            out[..., 1, 0] = np.conj(corner)
            out[..., 1, 1] = diag_down
        return g, g1, g2


def analytic_residual(family, r: np.ndarray, coupling: Optional[np.ndarray] = None) -> np.ndarray:
    """
    Block residual of the family with exact derivatives at every r,
    shape (n, points, 2, 2).
    """
    d = np.eye(2, dtype=complex) if coupling is None else np.asarray(coupling, dtype=complex)
    d_dag = d.conj().T
    g, g1, g2 = family.evaluate(r)
    g_inv = np.linalg.inv(g)
    log_derivative = g1 @ g_inv
    radius = r[None, :, None, None]
    flow = FLOW_PREFACTOR * (-(g2 @ g_inv) + log_derivative @ log_derivative - log_derivative / radius)
    ahead = np.roll(g, -1, axis=0)
    behind_inv = np.roll(g_inv, 1, axis=0)
    return flow - d @ ahead @ d_dag @ g_inv + g @ d_dag @ behind_inv @ d


def manufactured_state(
    family, grid: RadialGrid, coupling: Optional[np.ndarray] = None, source: str = 'discrete'
) -> TodaState:
    """
    Sample a family on the grid and attach a source.

    Args:
        family: DiagonalFamily or HermitianFamily
        grid: Radial grid
        coupling: 2x2 block D (identity by default)
        source: "discrete" makes the samples an exact solution of the
                discrete equations, "analytic" uses the exact-derivative
                residual (the discrete residual then measures truncation
                error), "none" leaves the equations unsourced
    """
    if source not in SOURCE_KINDS:
        raise InvalidParamsError(f"source must be one of {', '.join(SOURCE_KINDS)}, got '{source}'")
    r = grid.r
    blocks = family.evaluate(r)[0]
    state = TodaState(blocks, grid, coupling)
    if source == 'none':
        return state
    if source == 'analytic':
        return TodaState(blocks, grid, state.coupling, analytic_residual(family, r, state.coupling))
    return TodaState(blocks, grid, state.coupling, toda_residual_blocks(state))


def perturb_interior(state: TodaState, rng: np.random.Generator, level: float = 0.1) -> TodaState:
    """Multiply every interior block by 1 + level * xi, xi uniform on [-1, 1]."""
    if not (0 <= level < 1):
        raise InvalidParamsError(f'Noise level must lie in [0, 1), got {level}')
    n, points = state.blocks.shape[:2]
    factors = 1 + level * rng.uniform(-1.0, 1.0, size=(n, points))
    factors[:, 0] = factors[:, -1] = 1.0
    return state.with_blocks(state.blocks * factors[..., None, None])
