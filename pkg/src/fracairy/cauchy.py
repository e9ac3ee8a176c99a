"""Cauchy problem on a star graph with semi-infinite bonds.

On bond j the solution is sought as

    u_j = R_j + int_0^t G(x, t - s) phi_j(s) ds + [outgoing] int_0^t V(x, t - s) psi_j(s) ds

with G, V of superscript 2 alpha/3 anchored at the vertex and R_j the free
field of the data. The three vertex conditions become, after applying the
Caputo derivative that undoes the fractional integral at the anchor, an
algebraic system M Phi(t) = h(t) with a constant matrix M, solved node by node.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from . import fraccalc
from .fraccalc import TimeGrid, TraceGrid
from .graph import ProblemData, StarGraph
from .potentials import free_field, layer_field, trace_values

__all__ = [
    "CauchySolution",
    "DensitySetCauchy",
    "RTraces",
    "SolverError",
    "assemble_M",
    "assemble_h",
    "compute_R_traces",
    "eval_solution",
    "solve",
    "solve_densities",
]

COND_LIMIT = 1e12
SQ3_2 = math.sqrt(3.0) / 2.0


class SolverError(RuntimeError):
    """The linear algebra of a solver is singular or too ill-conditioned."""


@dataclass(frozen=True)
class RTraces:
    """Free-field traces at the vertex, one column per bond."""

    R0: TraceGrid
    Rx0: TraceGrid
    Rxx0: TraceGrid


@dataclass(frozen=True)
class DensitySetCauchy:
    phi_minus: TraceGrid
    phi_plus: TraceGrid
    psi_plus: TraceGrid

    @classmethod
    def from_stacked(cls, graph: StarGraph, grid: TimeGrid, phi: np.ndarray) -> "DensitySetCauchy":
        k, m = graph.k, graph.m
        return cls(
            TraceGrid(grid, phi[:, :k]),
            TraceGrid(grid, phi[:, k:k + m]),
            TraceGrid(grid, phi[:, k + m:]),
        )

    def stacked(self) -> np.ndarray:
        return np.hstack([self.phi_minus.values, self.phi_plus.values, self.psi_plus.values])

    @property
    def grid(self) -> TimeGrid:
        return self.phi_minus.grid

    def phi(self, graph: StarGraph, j: int) -> TraceGrid:
        if graph.incoming(j):
            return TraceGrid(self.grid, self.phi_minus.values[:, j])
        return TraceGrid(self.grid, self.phi_plus.values[:, j - graph.k])

    def psi(self, graph: StarGraph, j: int) -> TraceGrid:
        if graph.incoming(j):
            raise ValueError("incoming bonds carry no V density")
        return TraceGrid(self.grid, self.psi_plus.values[:, j - graph.k])


def assemble_M(graph: StarGraph, form: str = "printed") -> np.ndarray:
    """Vertex-condition matrix acting on (phi^-, phi^+, psi^+).

    Rows: k-1 continuity rows of the incoming bonds 2..k, m continuity rows
    of the outgoing bonds, m derivative-coupling rows, one flux row.
    ``form="printed"`` puts +sqrt(3)/2 a_j on psi in the outgoing continuity
    rows; ``form="derived"`` puts -sqrt(3)/2 a_j there, which is what the
    anchor values of G and V give and what the solvers use.
    """
    if form not in ("printed", "derived"):
        raise ValueError("form must be 'printed' or 'derived'")
    k, m = graph.k, graph.m
    a = graph.a_vector
    n = k + 2 * m
    M = np.zeros((n, n))
    row = 0
    for j in range(1, k):
        M[row, 0] = 1.0
        M[row, j] = -a[j]
        row += 1
    sign = 1.0 if form == "printed" else -1.0
    for i in range(m):
        j = k + i
        M[row, 0] += 1.0
        M[row, j] -= a[j]
        M[row, k + m + i] = sign * SQ3_2 * a[j]
        row += 1
    Bm = graph.B_matrix
    for i in range(m):
        M[row, :k] = Bm[i]
        M[row, k + i] = -1.0
        M[row, k + m + i] = SQ3_2
        row += 1
    M[row, :k] = 1.0 / a[:k]
    M[row, k:k + m] = 2.0 / a[k:]
    return M


def compute_R_traces(graph: StarGraph, data: ProblemData, grid: TimeGrid) -> RTraces:
    """Free field of every bond and its first two x-derivatives at the vertex."""
    t = grid.nodes
    cols = [[], [], []]
    for j in range(graph.n_bonds):
        dom = graph.domain(j)
        for r in range(3):
            cols[r].append(free_field(data.u0[j], data.f[j], dom, 0.0, t, data.alpha, r))
    return RTraces(*(TraceGrid(grid, np.column_stack(c)) for c in cols))


def assemble_h(graph: StarGraph, traces: RTraces, alpha: float, grid: TimeGrid,
               scheme: str = "l1") -> TraceGrid:
    """Right-hand side of M Phi = h, one row per vertex condition.

    ``scheme`` selects the Caputo discretization. The solver uses
    ``"rl_inverse"``, which makes the fractional integral of the vertex
    traces reproduce the data differences exactly at the nodes.
    """
    if traces.R0.grid != grid:
        raise ValueError("traces were computed on a different grid")
    k, m = graph.k, graph.m
    a = graph.a_vector
    R, Rx, Rxx = traces.R0.values, traces.Rx0.values, traces.Rxx0.values
    cont = a[1:] * R[:, 1:] - R[:, :1]
    deriv = Rx[:, k:] - Rx[:, :k] @ graph.B_matrix.T
    rows_c = fraccalc.caputo_derivative(TraceGrid(grid, cont), 2 * alpha / 3, scheme).values
    rows_d = fraccalc.caputo_derivative(TraceGrid(grid, deriv), alpha / 3, scheme).values
    flux = Rxx[:, k:] @ (1.0 / a[k:]) - Rxx[:, :k] @ (1.0 / a[:k])
    h = 3.0 * np.column_stack([rows_c, rows_d, flux])
    assert h.shape[1] == k + 2 * m
    return TraceGrid(grid, h)


def solve_densities(M: np.ndarray, h: TraceGrid, graph: StarGraph,
                    cond_limit: float = COND_LIMIT) -> DensitySetCauchy:
    """Phi(t_i) = M^{-1} h(t_i) with a single pivoted factorization."""
    cond = np.linalg.cond(M)
    if not np.isfinite(cond) or cond > cond_limit:
        raise SolverError(f"vertex matrix is ill-conditioned (cond = {cond:.3g})")
    lu = scipy.linalg.lu_factor(M)
    H = h.values
    phi = scipy.linalg.lu_solve(lu, H.T).T
    res = np.abs(phi @ M.T - H).max(axis=1)
    scale = np.abs(H).max(axis=1)
    if np.any(res > 1e-10 * np.maximum(scale, 1e-300) + 1e-300):
        raise SolverError("vertex system residual above 1e-10 relative")
    return DensitySetCauchy.from_stacked(graph, h.grid, phi)


@dataclass(frozen=True)
class CauchySolution:
    graph: StarGraph
    data: ProblemData
    grid: TimeGrid
    M: np.ndarray
    traces: RTraces
    h: TraceGrid
    densities: DensitySetCauchy

    def bond_field(self, j: int, x) -> np.ndarray:
        """u_j at points ``x`` of bond j and every node; shape (len(x), n+1)."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        dom = self.graph.domain(j)
        if np.any(x < dom.a) or np.any(x > dom.b):
            raise ValueError(f"points outside bond {j + 1}")
        alpha = self.data.alpha
        t = self.grid.nodes
        u = free_field(self.data.u0[j], self.data.f[j], dom, x[:, None], t[None, :], alpha)
        off = x != 0.0
        if off.any():
            u[off] += layer_field("G", self.densities.phi(self.graph, j), 0.0, x[off], alpha)
            if not self.graph.incoming(j):
                u[off] += layer_field("V", self.densities.psi(self.graph, j), 0.0, x[off], alpha)
        if (~off).any():
            u[~off] += self.vertex_layer_trace(j)
        return u

    def vertex_layer_trace(self, j: int) -> np.ndarray:
        """Layer part of u_j at the vertex, from the anchor values of G and V."""
        alpha = self.data.alpha
        side = "left" if self.graph.incoming(j) else "right"
        v = trace_values("G", self.densities.phi(self.graph, j), side, alpha).values
        if not self.graph.incoming(j):
            v = v + trace_values("V", self.densities.psi(self.graph, j), "right", alpha).values
        return v


def solve(graph: StarGraph, data: ProblemData, grid: TimeGrid,
          cond_limit: float = COND_LIMIT) -> CauchySolution:
    traces = compute_R_traces(graph, data, grid)
    M = assemble_M(graph, form="derived")
    h = assemble_h(graph, traces, data.alpha, grid, scheme="rl_inverse")
    dens = solve_densities(M, h, graph, cond_limit)
    return CauchySolution(graph, data, grid, M, traces, h, dens)


def eval_solution(graph: StarGraph, data: ProblemData, densities: DensitySetCauchy,
                  j: int, x: float, t: float) -> float:
    """u_j(x, t) at a grid time ``t``."""
    grid = densities.grid
    n = int(round(t / grid.dt))
    if not 0 <= n <= grid.n_steps or abs(n * grid.dt - t) > 1e-9 * max(1.0, t):
        raise ValueError("t must be a node of the density grid")
    sol = CauchySolution(graph, data, grid, None, None, None, densities)
    return float(sol.bond_field(j, [x])[0, n])
