"""Residual and estimate checks on sampled solution fields.

Everything here works on the samples alone: the PDE residual uses the L1
Caputo derivative in time and central differences in space, the vertex and
boundary residuals use one-sided difference stencils, and the energy check
compares trapezoid norms with the a-priori bound.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import fraccalc
from .fraccalc import TimeGrid, TraceGrid
from .graph import StarGraph

__all__ = [
    "EDGE_NODES",
    "INITIAL_NODES",
    "ResidualReport",
    "SolutionField",
    "boundary_residuals",
    "convergence_study",
    "energy_check",
    "fit_order",
    "one_sided_derivative",
    "pde_residual",
    "sample_field",
    "vertex_residuals",
]

# nodes excluded from the PDE residual near t = 0 and near bond ends
INITIAL_NODES = 3
EDGE_NODES = 3
STENCIL_POINTS = 7


@dataclass(frozen=True)
class SolutionField:
    """Samples u_j(x_i, t_n) of a solution on every bond.

    ``x`` holds one increasing grid per bond and ``u`` one array of shape
    (len(x_j), n_steps + 1) per bond.
    """

    graph: StarGraph | None
    alpha: float
    grid: TimeGrid
    x: tuple
    u: tuple
    provenance: str = ""
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(self.x) != len(self.u):
            raise ValueError("one space grid per bond")
        for xj, uj in zip(self.x, self.u):
            if uj.shape != (len(xj), self.grid.n_steps + 1):
                raise ValueError("field samples do not match the grids")
            if not np.all(np.isfinite(uj)):
                raise ValueError("field samples must be finite")


@dataclass
class ResidualReport:
    pde_residual_max: float = 0.0
    vertex_residuals: dict = field(default_factory=dict)
    boundary_residuals: dict = field(default_factory=dict)
    energy_margin: float = 0.0
    energy_margin_relative: float = 0.0
    det_margin: float = 0.0

    def as_dict(self) -> dict:
        return {
            "boundary_residuals": dict(self.boundary_residuals),
            "det_margin": self.det_margin,
            "energy_margin": self.energy_margin,
            "energy_margin_relative": self.energy_margin_relative,
            "pde_residual_max": self.pde_residual_max,
            "vertex_residuals": dict(self.vertex_residuals),
        }


def sample_field(solution, x_grids, provenance: str) -> SolutionField:
    """Evaluate a solver result on per-bond grids."""
    u = tuple(solution.bond_field(j, np.asarray(xj, dtype=float)) for j, xj in enumerate(x_grids))
    return SolutionField(solution.graph, solution.data.alpha, solution.grid,
                         tuple(np.asarray(xj, dtype=float) for xj in x_grids), u, provenance)


def _third_derivative(u, h):
    """Fourth-order central third difference along axis 0, interior rows 3..-3."""
    return (u[:-6] - 8 * u[1:-5] + 13 * u[2:-4] - 13 * u[4:-2] + 8 * u[5:-1] - u[6:]) / (8 * h**3)


def pde_residual(fld: SolutionField, f=None) -> float:
    """max |D^alpha u - u_xxx - f| over interior samples.

    ``f`` is a list of callables f_j(x, t) or None for a zero source. Each
    bond grid must be uniform with at least 7 + 2 * EDGE_NODES points.
    """
    worst = 0.0
    t = fld.grid.nodes
    for j, (xj, uj) in enumerate(zip(fld.x, fld.u)):
        if len(xj) < 7 + 2 * EDGE_NODES:
            raise ValueError("need at least 7 interior points per bond")
        h = np.diff(xj)
        if not np.allclose(h, h[0], rtol=1e-9, atol=0):
            raise ValueError("pde_residual needs uniform space grids")
        if fld.grid.n_steps <= INITIAL_NODES:
            raise ValueError("time grid too coarse for the residual")
        d3 = _third_derivative(uj, h[0])
        # the stencil half-width equals EDGE_NODES, so d3 covers exactly the kept rows
        dt = fraccalc.caputo_derivative(TraceGrid(fld.grid, uj.T), fld.alpha).values.T[3:-3]
        res = dt - d3
        if f is not None and not getattr(f[j], "is_zero", False):
            res = res - f[j](xj[3:-3, None], t[None, :])
        worst = max(worst, float(np.abs(res[:, INITIAL_NODES:]).max(initial=0.0)))
    return worst


def one_sided_derivative(x, u, at: str, order: int, points: int = STENCIL_POINTS):
    """d^order u / dx^order at the first (``at="start"``) or last grid point.

    Uses the interpolating polynomial through the ``points`` nearest samples;
    ``u`` may carry trailing axes (time).
    """
    if at == "start":
        xs, us = x[:points], u[:points]
    elif at == "end":
        xs, us = x[-points:][::-1], u[-points:][::-1]
    else:
        raise ValueError("at must be 'start' or 'end'")
    if len(xs) < points:
        raise ValueError("not enough samples for the one-sided stencil")
    z = xs - xs[0]
    # weights w with sum_i w_i z_i^p = p! delta_{p, order}
    V = np.vander(z, points, increasing=True).T
    rhs = np.zeros(points)
    rhs[order] = math.factorial(order)
    w = np.linalg.solve(V, rhs)
    return np.tensordot(w, us, axes=(0, 0))


def _vertex_side(fld, j):
    return "end" if fld.graph.incoming(j) else "start"


def vertex_residuals(fld: SolutionField) -> dict:
    """Max-in-time residuals of continuity, derivative coupling and flux at the vertex."""
    g = fld.graph
    if g is None:
        return {}
    vals, d1, d2 = [], [], []
    for j in range(g.n_bonds):
        xj, uj = fld.x[j], fld.u[j]
        side = _vertex_side(fld, j)
        if (side == "end" and xj[-1] != 0.0) or (side == "start" and xj[0] != 0.0):
            raise ValueError(f"bond {j + 1} grid must contain the vertex")
        vals.append(uj[-1] if side == "end" else uj[0])
        d1.append(one_sided_derivative(xj, uj, side, 1))
        d2.append(one_sided_derivative(xj, uj, side, 2))
    a = g.a_vector
    k = g.k
    vals, d1, d2 = np.array(vals), np.array(d1), np.array(d2)
    cont = np.abs(a[1:, None] * vals[1:] - vals[:1]).max(initial=0.0)
    deriv = np.abs(d1[k:] - g.B_matrix @ d1[:k]).max(initial=0.0)
    flux = np.abs((d2[:k] / a[:k, None]).sum(0) - (d2[k:] / a[k:, None]).sum(0)).max(initial=0.0)
    return {"continuity": float(cont), "derivative": float(deriv), "flux": float(flux)}


def boundary_residuals(fld: SolutionField, varphi, phi) -> dict:
    """Residuals of u_j(L_j) = varphi_j and u_x(L_j) = phi_j (incoming bonds)."""
    g = fld.graph
    t = fld.grid.nodes
    value, slope = 0.0, 0.0
    for j in range(g.n_bonds):
        xj, uj = fld.x[j], fld.u[j]
        side = "start" if g.incoming(j) else "end"
        L = g.lengths[j]
        if (side == "start" and xj[0] != L) or (side == "end" and xj[-1] != L):
            raise ValueError(f"bond {j + 1} grid must contain its end point")
        uL = uj[0] if side == "start" else uj[-1]
        value = max(value, float(np.abs(uL - varphi[j](t)).max()))
        if g.incoming(j):
            ux = one_sided_derivative(xj, uj, "start", 1)
            slope = max(slope, float(np.abs(ux - phi[j](t)).max()))
    return {"slope": slope, "value": value}


def _norm_sq(x_grids, values):
    return sum(np.trapezoid(v**2, xj, axis=0) for xj, v in zip(x_grids, values))


def energy_check(fld: SolutionField, data, source_operator: str = "integral") -> tuple[float, float]:
    """min over t of apriori_rhs(t) - |u(t)|^2, absolute and relative to the bound.

    Norms are trapezoid sums on the field's own grids, for u, u0 and f alike.
    """
    t = fld.grid.nodes
    u_sq = _norm_sq(fld.x, fld.u)
    u0_sq = float(_norm_sq(fld.x, [np.asarray(u0(xj), dtype=float) for u0, xj in zip(data.u0, fld.x)]))
    f_sq = _norm_sq(fld.x, [np.asarray(fj(xj[:, None], t[None, :]), dtype=float) * np.ones((1, t.size))
                            for fj, xj in zip(data.f, fld.x)])
    f_trace = TraceGrid(fld.grid, np.broadcast_to(f_sq, t.shape).astype(float))
    margin, rel = math.inf, math.inf
    for n, tn in enumerate(t):
        bound = fraccalc.apriori_rhs(u0_sq, f_trace, fld.alpha, float(tn), source_operator)
        gap = bound - float(u_sq[n])
        margin = min(margin, gap)
        if bound > 0:
            rel = min(rel, gap / bound)
        elif gap < 0:
            # a zero bound is violated by any nonzero field
            rel = -math.inf
    if rel == math.inf:
        rel = 0.0
    return float(margin), float(rel)


def fit_order(steps, errors) -> float:
    """Least-squares slope of log(error) against log(step)."""
    steps = np.asarray(steps, dtype=float)
    errors = np.asarray(errors, dtype=float)
    keep = errors > 0
    if keep.sum() < 2:
        return math.inf
    return float(np.polyfit(np.log(steps[keep]), np.log(errors[keep]), 1)[0])


def convergence_study(run_level, levels) -> dict:
    """Residuals and fitted orders over refinement levels.

    ``run_level(level)`` returns ``(dt, dx, residuals)`` with ``residuals`` a
    flat dict of named nonnegative numbers. Non-monotone residual sequences
    are flagged, not rejected.
    """
    levels = list(levels)
    if len(levels) < 3:
        raise ValueError("a convergence study needs at least 3 levels")
    rows = [dict(zip(("dt", "dx", "residuals"), run_level(lv)), level=lv) for lv in levels]
    names = sorted(rows[0]["residuals"])
    orders, flags = {}, []
    for name in names:
        errs = [r["residuals"][name] for r in rows]
        orders[name] = fit_order([r["dt"] for r in rows], errs)
        if any(b > a for a, b in zip(errs, errs[1:])):
            flags.append(name)
    return {"levels": rows, "non_monotone": flags, "orders": orders}
