"""Velocity-discretized junction operators and their closed-form norm bounds.

All operators act on junction flux data indexed by (circle, velocity cell)
with the weighted l1 norm sum_{j,k} |g[j,k]| * dv_k. Velocity quadrature is
the midpoint rule on uniform cells, which keeps every operator entrywise
nonnegative.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, PreconditionError
from .model import (CircleSpec, NetworkSpec, measure_laplace, network_bounds)


@dataclass(frozen=True, eq=False)
class VelocityGrid:
    """Midpoint quadrature cells over [v_min, v_max]."""

    edges: np.ndarray
    centers: np.ndarray
    widths: np.ndarray

    @classmethod
    def uniform(cls, v_min: float, v_max: float, k: int) -> "VelocityGrid":
        if k < 1:
            raise DomainError("velocity grid needs at least one cell")
        edges = np.linspace(v_min, v_max, k + 1)
        centers = 0.5 * (edges[:-1] + edges[1:])
        widths = np.diff(edges)
        for a in (edges, centers, widths):
            a.setflags(write=False)
        return cls(edges=edges, centers=centers, widths=widths)

    @classmethod
    def for_spec(cls, spec: NetworkSpec, k: int = 16) -> "VelocityGrid":
        return cls.uniform(spec.v_min, spec.v_max, k)

    @property
    def k(self) -> int:
        return len(self.centers)


@dataclass(frozen=True, eq=False)
class BlockOperator:
    """Nonnegative dense matrix over flattened (circle, velocity cell) indices.

    weights holds the dv quadrature weight of each flattened index; the
    operator norm is the induced norm on the correspondingly weighted l1 space.
    """

    matrix: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        if self.matrix.shape[0] != self.matrix.shape[1]:
            raise DomainError("block operator matrix must be square")
        if self.matrix.shape[0] != len(self.weights):
            raise DomainError("weights length must match matrix dimension")

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def norm(self) -> float:
        """Max over columns of weighted column sums (weighted l1 induced norm)."""
        if self.dim == 0:
            return 0.0
        col = self.weights @ np.abs(self.matrix)  # sum_r |A[r,c]| * w_r
        return float(np.max(col / self.weights))

    def apply(self, g: np.ndarray) -> np.ndarray:
        return self.matrix @ g

    def vector_norm(self, g: np.ndarray) -> float:
        return float(np.sum(np.abs(g) * self.weights))


@dataclass(frozen=True, eq=False)
class GainAssemblyReport:
    lam: float
    operator: BlockOperator
    quadrature_residual: float
    delay_factor_norm: float
    trace_factor_norm: float


def survival_factor(circle: CircleSpec, lam: float, v: float, x: float) -> float:
    """Transport survival exp(-int_0^x (lam + q(y,v))/v dy) along a circle."""
    if not (0.0 <= x <= circle.length + 1e-12):
        raise DomainError(f"position {x} outside [0, {circle.length}]")
    exponent = (lam * x + circle.absorption.integral_x(x, v)) / v
    # clamp to stay finite for extreme shifts probed during bracketing
    return math.exp(min(-exponent, 700.0))


def _delay_block(spec: NetworkSpec, grid: VelocityGrid, lam: float) -> np.ndarray:
    """Routing + delayed scattering: maps trace data of incoming circle j to
    inflow of outgoing circle i.

    Entry [(i,k),(j,k')] = w_ij * laplace_j(lam) * (1/v_k) beta_j(v_k, v_k')
    * v_k' * dv_k'.
    """
    J, K = spec.n_circles, grid.k
    v = grid.centers
    dv = grid.widths
    out = np.zeros((J * K, J * K))
    for j, c in enumerate(spec.circles):
        lap = measure_laplace(c.delay_measure, lam)
        if lap == 0.0 or c.scattering.is_zero():
            scat = None
        else:
            beta = np.array([[c.scattering.beta(v[k], v[kp]) for kp in range(K)]
                             for k in range(K)])
            scat = lap * beta * (v * dv)[None, :] / v[:, None]
        if scat is None:
            continue
        for i in range(J):
            w = spec.routing[i, j]
            if w != 0.0:
                out[i * K:(i + 1) * K, j * K:(j + 1) * K] = w * scat
    return out


def _trace_block(spec: NetworkSpec, grid: VelocityGrid, lam: float) -> np.ndarray:
    """Diagonal transport-survival: junction data through circle j to its trace
    at x = l_j."""
    J, K = spec.n_circles, grid.k
    d = np.empty(J * K)
    for j, c in enumerate(spec.circles):
        for k in range(K):
            d[j * K + k] = survival_factor(c, lam, grid.centers[k], c.length)
    return np.diag(d)


def _flux_weights(spec: NetworkSpec, grid: VelocityGrid) -> np.ndarray:
    return np.tile(grid.widths, spec.n_circles)


def assemble_gain(spec: NetworkSpec, grid: VelocityGrid, lam: float) -> GainAssemblyReport:
    """Discretized junction gain operator at shift lam.

    Composition delayed-scatter-route (incoming circle's measure and kernel)
    after transport survival, per the transmission conditions.
    """
    delay = _delay_block(spec, grid, lam)
    trace = _trace_block(spec, grid, lam)
    w = _flux_weights(spec, grid)
    mat = delay @ trace
    op = BlockOperator(matrix=mat, weights=w)
    residual = _quadrature_residual(spec, grid, lam, op)
    return GainAssemblyReport(
        lam=lam, operator=op, quadrature_residual=residual,
        delay_factor_norm=BlockOperator(delay, w).norm(),
        trace_factor_norm=BlockOperator(trace, w).norm(),
    )


def _quadrature_residual(spec, grid, lam, op) -> float:
    """First-order Richardson estimate of the velocity-quadrature error of the
    gain norm; 0 when the grid cannot be coarsened."""
    if grid.k < 2 or grid.k % 2 != 0:
        return 0.0
    coarse = VelocityGrid.uniform(float(grid.edges[0]), float(grid.edges[-1]), grid.k // 2)
    cmat = _delay_block(spec, coarse, lam) @ _trace_block(spec, coarse, lam)
    cnorm = BlockOperator(cmat, _flux_weights(spec, coarse)).norm()
    return abs(op.norm() - cnorm)


def assemble_pd(spec: NetworkSpec, grid: VelocityGrid, lam: float) -> BlockOperator:
    """Antidiagonal junction block operator [[0, s*B_delay], [B_trace/s, 0]].

    The scalar s balances the two block norms: a diagonal similarity that
    leaves the spectrum and the block product unchanged, so the squared
    spectral radius still equals the gain radius while the operator norm is
    the geometric mean of the block norms.
    """
    b_delay = _delay_block(spec, grid, lam)
    b_trace = _trace_block(spec, grid, lam)
    w = _flux_weights(spec, grid)
    n_delay = BlockOperator(b_delay, w).norm()
    n_trace = BlockOperator(b_trace, w).norm()
    if n_delay > 0.0 and n_trace > 0.0:
        s = math.sqrt(n_trace / n_delay)
    else:
        s = 1.0
    n = b_delay.shape[0]
    mat = np.zeros((2 * n, 2 * n))
    mat[:n, n:] = s * b_delay
    mat[n:, :n] = b_trace / s
    return BlockOperator(matrix=mat, weights=np.concatenate([w, w]))


def pd_norm_closed_form(spec: NetworkSpec) -> float:
    """Closed-form bound max{var_bar * v_max/v_min, e^{l_bar*gamma_bar/v_min} * ||M||}.

    Valid only for mass-preserving scattering.
    """
    if not spec.mass_preserving:
        raise PreconditionError(
            "junction norm bound requires the mass_preserving flag")
    b = network_bounds(spec)
    return max(b.var_bar * spec.v_max / spec.v_min,
               math.exp(b.l_bar * b.gamma_bar / spec.v_min) * b.routing_norm)


def dirichlet_norm_closed_form(spec: NetworkSpec) -> tuple[float, float]:
    """Closed-form bounds (||D_0|| <= e^{l_bar*gamma_bar/v_min}, ||K|| <= ||M||)."""
    b = network_bounds(spec)
    return (math.exp(b.l_bar * b.gamma_bar / spec.v_min), b.routing_norm)


def apply_delay_kernel(circle: CircleSpec, grid: VelocityGrid, flux_history,
                       v_out_cell: int, n_theta: int = 257) -> float:
    """Delayed scattering read for one outgoing velocity cell.

    flux_history maps theta in [-r, 0] to the incoming velocity vector (length
    K, values at cell centers). The velocity integral uses the midpoint rule;
    the theta integral uses quadrature weights consistent with the measure's
    Laplace transform (atoms sampled pointwise, densities integrated against
    piecewise-linear interpolation of the history samples).
    """
    from .delayquad import delay_quadrature  # local import: avoids cycle

    if circle.scattering.is_zero():
        return 0.0
    v = grid.centers
    dv = grid.widths
    k = v_out_cell
    beta_row = np.array([circle.scattering.beta(v[k], v[kp]) for kp in range(grid.k)])

    dt = circle.delay / (n_theta - 1)
    offsets, weights = delay_quadrature(circle.delay_measure, dt, n_theta)
    total = np.zeros(grid.k)
    for s, wgt in zip(offsets, weights):
        if wgt == 0.0:
            continue
        theta = -s * dt
        h = np.asarray(flux_history(theta), dtype=float)
        if h.shape != (grid.k,):
            raise DomainError("flux history must return a velocity vector")
        total += wgt * h
    return float(np.dot(beta_row * v * dv, total) / v[k])
