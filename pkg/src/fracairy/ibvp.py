"""Initial-boundary value problem on a star graph with finite bonds.

Bond j carries four layer potentials of superscript 2 alpha/3,

    u_j = G(x - L_j) * alpha_j + [in] V(x - L_j) * beta_j
        + G(x) * gamma_j + [out] V(x) * rho_j + F_j,

where ``*`` is time convolution and F_j the free field of the data. The
vertex conditions (continuity, derivative coupling, flux) and the boundary
conditions u_j(L_j) = varphi_j, u_x(L_j) = phi_j on incoming bonds become the
second-kind Volterra system

    Q Lambda(t) + int_0^t K(t - s) Lambda(s) ds = H(t),

Lambda = (alpha^-, alpha^+, beta^-, gamma^-, gamma^+, rho^+). K couples the
vertex rows to the end densities and the boundary rows to the vertex
densities, with kernels shifted in order by the Caputo derivative applied to
each condition.
"""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from . import fraccalc
from .cauchy import SolverError, assemble_M
from .fraccalc import TimeGrid, TraceGrid
from .fundsol import FundOrder, kernel
from .graph import ProblemData, StarGraph
from .potentials import free_field, layer_field, layer_moments, trace_values

__all__ = [
    "DensitySetIBVP",
    "FTraces",
    "IBVPSolution",
    "VolterraSystem",
    "assemble_H",
    "assemble_K",
    "assemble_Q",
    "compute_F_traces",
    "eval_solution_ibvp",
    "kernel_entries",
    "row_orders",
    "solve",
    "solve_volterra",
]

SQ3_2 = math.sqrt(3.0) / 2.0
COND_LIMIT = 1e12

_KIND = {("G", 0): "G", ("G", 1): "Gx", ("G", 2): "Gxx", ("V", 0): "V", ("V", 1): "Vx", ("V", 2): "Vxx"}


class _Layout:
    """Index bookkeeping for Lambda and the equation rows."""

    def __init__(self, graph: StarGraph):
        k, m = graph.k, graph.m
        self.k, self.m = k, m
        self.n = 3 * k + 3 * m
        # columns
        self.alpha = list(range(0, k + m))
        self.beta = list(range(k + m, 2 * k + m))
        self.gamma = list(range(2 * k + m, 3 * k + 2 * m))
        self.rho = list(range(3 * k + 2 * m, 3 * k + 3 * m))
        # rows
        self.cont = list(range(0, k + m - 1))
        self.deriv = list(range(k + m - 1, k + 2 * m - 1))
        self.flux = k + 2 * m - 1
        self.value = list(range(k + 2 * m, 2 * k + 3 * m))
        self.slope = list(range(2 * k + 3 * m, 3 * k + 3 * m))


@dataclass(frozen=True)
class FTraces:
    """Free-field traces, one column per bond (slopes at L: incoming only)."""

    F0: TraceGrid
    Fx0: TraceGrid
    Fxx0: TraceGrid
    FL: TraceGrid
    FxL: TraceGrid


@dataclass(frozen=True)
class DensitySetIBVP:
    alpha_d: TraceGrid
    beta_d: TraceGrid
    gamma_d: TraceGrid
    rho_d: TraceGrid

    @classmethod
    def from_stacked(cls, graph: StarGraph, grid: TimeGrid, lam: np.ndarray) -> "DensitySetIBVP":
        lay = _Layout(graph)
        return cls(*(TraceGrid(grid, lam[:, cols]) for cols in (lay.alpha, lay.beta, lay.gamma, lay.rho)))

    def stacked(self) -> np.ndarray:
        return np.hstack([self.alpha_d.values, self.beta_d.values, self.gamma_d.values, self.rho_d.values])

    @property
    def grid(self) -> TimeGrid:
        return self.alpha_d.grid


@dataclass(frozen=True)
class VolterraSystem:
    """Q, the kernel entries of K, and both forms of the right-hand side.

    ``H`` is the differentiated right-hand side. ``G`` holds the conditions
    before the Caputo derivative of order ``row_orders[i]`` was applied to
    row i; the integrated stepping uses it.
    """

    Q: np.ndarray
    entries: tuple
    H: TraceGrid
    alpha: float
    G: TraceGrid | None = None
    row_orders: tuple = ()


def assemble_Q(graph: StarGraph, form: str = "printed") -> np.ndarray:
    """Constant block matrix [[0, M], [Q1, 0]]; the solver uses the derived M."""
    lay = _Layout(graph)
    k, m = graph.k, graph.m
    Q = np.zeros((lay.n, lay.n))
    nv = k + 2 * m
    Q[:nv, lay.gamma[0]:] = assemble_M(graph, form)
    Ik = np.eye(k)
    Q1 = np.zeros((2 * k + m, 2 * k + m))
    Q1[:k, :k] = Ik
    Q1[:k, k + m:] = SQ3_2 * Ik
    Q1[k:k + m, k:k + m] = np.eye(m)
    Q1[k + m:, :k] = Ik
    Q1[k + m:, k + m:] = -SQ3_2 * Ik
    Q[nv:, :2 * k + m] = Q1
    return Q


def row_orders(graph: StarGraph, alpha: float) -> tuple:
    """Caputo order applied to each condition row to reach the Q form."""
    lay = _Layout(graph)
    nu = np.zeros(lay.n)
    nu[lay.cont] = 2 * alpha / 3
    nu[lay.deriv] = alpha / 3
    nu[lay.value] = 2 * alpha / 3
    nu[lay.slope] = alpha / 3
    return tuple(float(v) for v in nu)


def kernel_entries(graph: StarGraph, alpha: float) -> tuple:
    """Nonzero K entries as (row, col, coef, family, r, nu, X).

    Each entry stands for coef * d^r/dx^r K_family^{2 alpha/3 - nu}(X, s).
    """
    lay = _Layout(graph)
    k = graph.k
    a = graph.a_vector
    L = graph.lengths
    Bm = graph.B_matrix
    nu_c, nu_d = 2 * alpha / 3, alpha / 3
    ent = []

    def end_terms(row, j, coef, r, nu):
        # the end-anchored densities of bond j seen at the vertex, x - L_j = -L_j
        ent.append((row, lay.alpha[j], coef, "G", r, nu, -L[j]))
        if graph.incoming(j):
            ent.append((row, lay.beta[j], coef, "V", r, nu, -L[j]))

    for i, j in enumerate(range(1, graph.n_bonds)):
        row = lay.cont[i]
        end_terms(row, j, -3.0 * a[j], 0, nu_c)
        end_terms(row, 0, 3.0, 0, nu_c)
    for i in range(graph.m):
        row = lay.deriv[i]
        end_terms(row, k + i, -3.0, 1, nu_d)
        for j in range(k):
            if Bm[i, j] != 0.0:
                end_terms(row, j, 3.0 * Bm[i, j], 1, nu_d)
    for j in range(graph.n_bonds):
        sgn = 1.0 if graph.incoming(j) else -1.0
        end_terms(lay.flux, j, 3.0 * sgn / a[j], 2, 0.0)
    # the vertex-anchored densities of bond j seen at its far end, x = L_j
    for j in range(graph.n_bonds):
        row = lay.value[j]
        ent.append((row, lay.gamma[j], 3.0, "G", 0, nu_c, L[j]))
        if not graph.incoming(j):
            ent.append((row, lay.rho[j - k], 3.0, "V", 0, nu_c, L[j]))
    for j in range(k):
        ent.append((lay.slope[j], lay.gamma[j], 3.0, "G", 1, nu_d, L[j]))
    return tuple(ent)


def assemble_K(graph: StarGraph, alpha: float, s: float) -> np.ndarray:
    """Kernel matrix K(s) of the Volterra system at elapsed time s > 0."""
    if not s > 0:
        raise ValueError("K is evaluated at s > 0")
    n = _Layout(graph).n
    K = np.zeros((n, n))
    for row, col, coef, fam, r, nu, X in kernel_entries(graph, alpha):
        order = FundOrder(alpha, 2 * alpha / 3 - nu)
        K[row, col] += coef * float(kernel(fam, order, X, s, r))
    return K


def _kernel_moments(graph, alpha, grid, shifted=True):
    """Cell moments of K, each of shape (n_steps, N, N).

    With ``shifted=False`` the kernels keep superscript 2 alpha/3, i.e. the
    conditions are taken before the Caputo derivative.
    """
    n = _Layout(graph).n
    m0 = np.zeros((grid.n_steps, n, n))
    m1 = np.zeros((grid.n_steps, n, n))
    groups = defaultdict(list)
    for e in kernel_entries(graph, alpha):
        groups[(e[3], e[4], e[5])].append(e)
    for (fam, r, nu), items in sorted(groups.items()):
        X = np.array([e[6] for e in items])
        mu = 2 * alpha / 3 - (nu if shifted else 0.0)
        a0, a1 = layer_moments(_KIND[(fam, r)], X, grid, alpha, mu)
        for i, (row, col, coef, *_rest) in enumerate(items):
            m0[:, row, col] += coef * a0[i]
            m1[:, row, col] += coef * a1[i]
    return m0, m1


def compute_F_traces(graph: StarGraph, data: ProblemData, grid: TimeGrid) -> FTraces:
    """Free field and its x-derivatives at the vertex and at the bond ends."""
    if graph.lengths is None:
        raise ValueError("the finite-bond problem needs bond lengths")
    t = grid.nodes
    alpha = data.alpha
    c0, c1, c2, cL, cxL = [], [], [], [], []
    for j in range(graph.n_bonds):
        dom = graph.domain(j)
        u0, f = data.u0[j], data.f[j]
        c0.append(free_field(u0, f, dom, 0.0, t, alpha, 0))
        c1.append(free_field(u0, f, dom, 0.0, t, alpha, 1))
        c2.append(free_field(u0, f, dom, 0.0, t, alpha, 2))
        cL.append(free_field(u0, f, dom, graph.lengths[j], t, alpha, 0))
        if graph.incoming(j):
            cxL.append(free_field(u0, f, dom, graph.lengths[j], t, alpha, 1))
    stack = lambda cols: TraceGrid(grid, np.column_stack(cols))
    return FTraces(stack(c0), stack(c1), stack(c2), stack(cL), stack(cxL))


def _condition_rows(graph, data, traces, grid):
    """The conditions' data side before any Caputo derivative, times 3."""
    k = graph.k
    a = graph.a_vector
    t = grid.nodes
    F, Fx, Fxx = traces.F0.values, traces.Fx0.values, traces.Fxx0.values
    cont = a[1:] * F[:, 1:] - F[:, :1]
    deriv = Fx[:, k:] - Fx[:, :k] @ graph.B_matrix.T
    flux = Fxx[:, k:] @ (1.0 / a[k:]) - Fxx[:, :k] @ (1.0 / a[:k])
    varphi = np.column_stack([np.broadcast_to(g(t), t.shape) for g in data.varphi])
    phi = np.column_stack([np.broadcast_to(g(t), t.shape) for g in data.phi])
    value = varphi - traces.FL.values
    slope = phi - traces.FxL.values
    return 3.0 * np.column_stack([cont, deriv, flux, value, slope])


def assemble_H(graph: StarGraph, data: ProblemData, traces: FTraces, grid: TimeGrid,
               scheme: str = "l1") -> TraceGrid:
    """Right-hand side: vertex rows from F, boundary rows from the boundary data."""
    if traces.F0.grid != grid:
        raise ValueError("traces were computed on a different grid")
    G = _condition_rows(graph, data, traces, grid)
    nu = row_orders(graph, data.alpha)
    H = G.copy()
    for order in sorted(set(nu) - {0.0}):
        cols = [i for i, v in enumerate(nu) if v == order]
        H[:, cols] = fraccalc.caputo_derivative(TraceGrid(grid, G[:, cols]), order, scheme).values
    return TraceGrid(grid, H)


def _march(lead, A, B, rhs, lam0, cond_limit=COND_LIMIT):
    """Node n solves lead Lambda_n = rhs_n - sum_{k>=1} A_k Lambda_{n-k} - sum_{k>=0} B_k Lambda_{n-k-1}."""
    cond = np.linalg.cond(lead)
    if not np.isfinite(cond) or cond > cond_limit:
        raise SolverError(f"step matrix is ill-conditioned (cond = {cond:.3g})")
    lu = scipy.linalg.lu_factor(lead)
    N = rhs.shape[0] - 1
    lam = np.zeros((N + 1, lead.shape[0]))
    lam[0] = lam0
    for n in range(1, N + 1):
        hist = np.einsum("kij,kj->i", B[:n], lam[n - 1::-1])
        if n > 1:
            hist = hist + np.einsum("kij,kj->i", A[1:n], lam[n - 1:0:-1])
        lam[n] = scipy.linalg.lu_solve(lu, rhs[n] - hist)
    return lam


def solve_volterra(system: VolterraSystem, grid: TimeGrid, graph: StarGraph,
                   formulation: str = "integrated", cond_limit: float = COND_LIMIT) -> DensitySetIBVP:
    """Product-integration time stepping of the Volterra system.

    Lambda is linear between nodes and the cell moments of every kernel are
    exact for that interpolant. ``formulation="differentiated"`` marches
    Q Lambda + K * Lambda = H with the order-shifted kernels.
    ``formulation="integrated"`` marches the conditions themselves,
    J^nu_i (Q Lambda)_i + (K * Lambda)_i = G_i, with the product-trapezoid
    fractional integral, so the discrete field satisfies the vertex and
    boundary conditions at the nodes. Lambda_0 solves Q Lambda_0 = H_0.
    """
    Q = system.Q
    condQ = np.linalg.cond(Q)
    if not np.isfinite(condQ) or condQ > cond_limit:
        raise SolverError(f"Q is ill-conditioned (cond = {condQ:.3g})")
    lam0 = scipy.linalg.lu_solve(scipy.linalg.lu_factor(Q), system.H.values[0])
    if formulation == "differentiated":
        m0, m1 = _kernel_moments(graph, system.alpha, grid, shifted=True)
        A = m0 - m1
        lam = _march(Q + A[0], A, m1, system.H.values, lam0, cond_limit)
    elif formulation == "integrated":
        if system.G is None:
            raise ValueError("integrated stepping needs the undifferentiated rows G")
        m0, m1 = _kernel_moments(graph, system.alpha, grid, shifted=False)
        A = m0 - m1
        lead = A[0].copy()
        for i, nu in enumerate(system.row_orders):
            if nu == 0.0:
                lead[i] += Q[i]
                continue
            # product-trapezoid weights of J^nu in lag form
            a, c = fraccalc._rl_weights(float(nu), grid.n_steps)
            scale = grid.dt**nu / math.gamma(nu)
            A[:, i, :] += scale * c[:, None] * Q[i][None, :]
            m1[:, i, :] += scale * a[:, None] * Q[i][None, :]
            lead[i] += scale * c[0] * Q[i]
        lam = _march(lead, A, m1, system.G.values, lam0, cond_limit)
    else:
        raise ValueError("formulation must be 'integrated' or 'differentiated'")
    return DensitySetIBVP.from_stacked(graph, grid, lam)


@dataclass(frozen=True)
class IBVPSolution:
    graph: StarGraph
    data: ProblemData
    grid: TimeGrid
    system: VolterraSystem
    traces: FTraces
    densities: DensitySetIBVP

    def _density(self, block, j):
        lay = _Layout(self.graph)
        cols = getattr(lay, block)
        lam = self.densities.stacked()
        idx = {"alpha": j, "beta": j, "gamma": j, "rho": j - self.graph.k}[block]
        return TraceGrid(self.grid, lam[:, cols[idx]])

    def bond_field(self, j: int, x) -> np.ndarray:
        """u_j at points ``x`` of bond j and every node; shape (len(x), n+1)."""
        g = self.graph
        x = np.atleast_1d(np.asarray(x, dtype=float))
        dom = g.domain(j)
        if np.any(x < dom.a) or np.any(x > dom.b):
            raise ValueError(f"points outside bond {j + 1}")
        alpha = self.data.alpha
        t = self.grid.nodes
        L = g.lengths[j]
        u = free_field(self.data.u0[j], self.data.f[j], dom, x[:, None], t[None, :], alpha)
        parts = [("G", "alpha", L)]
        if g.incoming(j):
            parts.append(("V", "beta", L))
        parts.append(("G", "gamma", 0.0))
        if not g.incoming(j):
            parts.append(("V", "rho", 0.0))
        for kind, block, anchor in parts:
            dens = self._density(block, j)
            at = x == anchor
            if (~at).any():
                u[~at] += layer_field(kind, dens, anchor, x[~at], alpha)
            if at.any():
                # the bond lies to the right of an anchor at its left end
                side = "right" if anchor == dom.a else "left"
                u[at] += trace_values(kind, dens, side, alpha).values
        return u


def solve(graph: StarGraph, data: ProblemData, grid: TimeGrid,
          cond_limit: float = COND_LIMIT) -> IBVPSolution:
    traces = compute_F_traces(graph, data, grid)
    Q = assemble_Q(graph, form="derived")
    H = assemble_H(graph, data, traces, grid)
    G = TraceGrid(grid, _condition_rows(graph, data, traces, grid))
    system = VolterraSystem(Q, kernel_entries(graph, data.alpha), H, data.alpha,
                            G, row_orders(graph, data.alpha))
    dens = solve_volterra(system, grid, graph, cond_limit=cond_limit)
    return IBVPSolution(graph, data, grid, system, traces, dens)


def eval_solution_ibvp(solution: IBVPSolution, j: int, x: float, t: float) -> float:
    """u_j(x, t) at a grid time ``t``."""
    grid = solution.grid
    n = int(round(t / grid.dt))
    if not 0 <= n <= grid.n_steps or abs(n * grid.dt - t) > 1e-9 * max(1.0, t):
        raise ValueError("t must be a grid node")
    return float(solution.bond_field(j, [x])[0, n])
