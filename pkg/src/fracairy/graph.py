"""Star graphs, their coupling data and the hypothesis checks of both problems.

Bonds are numbered 0..k-1 (incoming, ending at the vertex x = 0) followed by
k..k+m-1 (outgoing, starting there). The vertex conditions are

    a_j u_j(0, t) = u_1(0, t)                               (continuity)
    d/dx u^+(0, t) = B d/dx u^-(0, t)                       (derivative coupling)
    sum_in u_j,xx(0, t) / a_j = sum_out u_j,xx(0, t) / a_j  (flux)
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .potentials import BondDomain
from .presets import Zero, ZeroSource

__all__ = [
    "ProblemData",
    "StarGraph",
    "ValidationReport",
    "definiteness",
    "random_cauchy_graph",
    "validate",
]

DEFINITENESS_TOL = 1e-10
COMPAT_TOL = 1e-8
DECAY_TOL = 1e-8


@dataclass(frozen=True)
class StarGraph:
    k: int
    m: int
    a: tuple
    B: tuple
    lengths: tuple | None = None

    def __post_init__(self):
        object.__setattr__(self, "a", tuple(float(v) for v in self.a))
        B = np.asarray(self.B, dtype=float)
        # a mis-sized B is kept as one row so that structural_errors can report it
        B = B.reshape(self.m, self.k) if B.size == self.m * self.k else B.reshape(1, -1)
        object.__setattr__(self, "B", tuple(map(tuple, B)))
        if self.lengths is not None:
            object.__setattr__(self, "lengths", tuple(float(v) for v in self.lengths))
        if self.k < 1 or self.m < 1:
            raise ValueError("a star graph needs k >= 1 incoming and m >= 1 outgoing bonds")

    @property
    def n_bonds(self) -> int:
        return self.k + self.m

    @property
    def B_matrix(self) -> np.ndarray:
        return np.array(self.B, dtype=float).reshape(self.m, self.k)

    @property
    def a_vector(self) -> np.ndarray:
        return np.array(self.a, dtype=float)

    @property
    def is_finite(self) -> bool:
        return self.lengths is not None

    def incoming(self, j: int) -> bool:
        return j < self.k

    def domain(self, j: int) -> BondDomain:
        """Space interval of bond j in its own coordinate."""
        if self.lengths is None:
            return BondDomain(-np.inf, 0.0) if self.incoming(j) else BondDomain(0.0, np.inf)
        L = self.lengths[j]
        return BondDomain(L, 0.0) if self.incoming(j) else BondDomain(0.0, L)

    def structural_errors(self) -> list[str]:
        errs = []
        if len(self.a) != self.n_bonds:
            errs.append(f"a must have k+m = {self.n_bonds} entries, got {len(self.a)}")
        else:
            if self.a[0] != 1.0:
                errs.append("a_1 = 1 violated")
            for j, v in enumerate(self.a[1:], start=2):
                if v == 0.0:
                    errs.append(f"a_j != 0 violated (a_{j} = 0)")
        if np.array(self.B, dtype=float).size != self.m * self.k:
            errs.append(f"B must be m x k = {self.m} x {self.k}")
        if self.lengths is not None:
            if len(self.lengths) != self.n_bonds:
                errs.append(f"lengths must have k+m = {self.n_bonds} entries")
            else:
                for j, L in enumerate(self.lengths):
                    if self.incoming(j) and not L < 0:
                        errs.append(f"incoming bond {j + 1} needs L < 0, got {L}")
                    if not self.incoming(j) and not L > 0:
                        errs.append(f"outgoing bond {j + 1} needs L > 0, got {L}")
        return errs


@dataclass(frozen=True)
class ProblemData:
    """Per-bond data; ``u0`` are space profiles, ``f`` space-time sources.

    ``varphi`` (k+m callables of t) and ``phi`` (k callables of t) are the
    boundary values of the finite-bond problem.
    """

    alpha: float
    u0: tuple = ()
    f: tuple = ()
    varphi: tuple = ()
    phi: tuple = ()

    def __post_init__(self):
        if not 0 < self.alpha < 1:
            raise ValueError("alpha must lie in (0,1)")

    @classmethod
    def zero(cls, graph: StarGraph, alpha: float) -> "ProblemData":
        n = graph.n_bonds
        return cls(alpha, (Zero(),) * n, (ZeroSource(),) * n)


def definiteness(mtx) -> str:
    """Classify a symmetric matrix by the signs of its eigenvalues."""
    mtx = np.asarray(mtx, dtype=float)
    if mtx.ndim != 2 or mtx.shape[0] != mtx.shape[1]:
        raise ValueError("definiteness needs a square matrix")
    if not np.allclose(mtx, mtx.T, rtol=0, atol=1e-12 * max(1.0, np.abs(mtx).max())):
        raise ValueError("definiteness needs a symmetric matrix")
    ev = np.linalg.eigvalsh(mtx)
    if np.all(ev > DEFINITENESS_TOL):
        return "positive"
    if np.all(ev < -DEFINITENESS_TOL):
        return "negative"
    if np.any(ev > DEFINITENESS_TOL) and np.any(ev < -DEFINITENESS_TOL):
        return "indefinite"
    return "semidefinite"


@dataclass
class ValidationReport:
    errors: list = field(default_factory=list)
    hypothesis: list = field(default_factory=list)
    warnings: list = field(default_factory=list)
    definiteness: str = ""

    @property
    def ok(self) -> bool:
        return not self.errors and not self.hypothesis

    def as_dict(self) -> dict:
        return {
            "definiteness": self.definiteness,
            "errors": list(self.errors),
            "hypothesis": list(self.hypothesis),
            "warnings": list(self.warnings),
        }


def _vertex_values(graph, u0):
    """u0_j and its first two derivatives at the vertex."""
    return np.array([[float(np.asarray(u0[j](0.0, r))) for r in range(3)] for j in range(graph.n_bonds)])


def validate(graph: StarGraph, data: ProblemData, problem: str,
             compat_tol: float = COMPAT_TOL, compat_severity: str = "warning") -> ValidationReport:
    """Check coefficients, definiteness of B^T B - I_k and compatibility of the data.

    Hard errors are structural; a wrong definiteness sign is a violated
    hypothesis. Data that break the vertex conditions at t = 0 are warnings,
    or violated hypotheses with ``compat_severity="error"``; non-decaying
    Cauchy data are always warnings.
    """
    if compat_severity not in ("warning", "error"):
        raise ValueError("compat_severity must be 'warning' or 'error'")
    rep = ValidationReport()
    if problem not in ("cauchy", "ibvp"):
        rep.errors.append(f"problem must be 'cauchy' or 'ibvp', got {problem!r}")
        return rep
    rep.errors.extend(graph.structural_errors())
    if problem == "ibvp" and graph.lengths is None:
        rep.errors.append("ibvp needs bond lengths")
    if problem == "cauchy" and graph.lengths is not None:
        rep.errors.append("cauchy bonds are semi-infinite; lengths must be absent")
    n = graph.n_bonds
    if len(data.u0) != n or len(data.f) != n:
        rep.errors.append(f"u0 and f need one entry per bond ({n})")
    if problem == "ibvp":
        if len(data.varphi) != n:
            rep.errors.append(f"varphi needs one entry per bond ({n})")
        if len(data.phi) != graph.k:
            rep.errors.append(f"phi needs one entry per incoming bond ({graph.k})")
    if rep.errors:
        return rep

    Bm = graph.B_matrix
    rep.definiteness = definiteness(Bm.T @ Bm - np.eye(graph.k))
    want = "positive" if problem == "cauchy" else "negative"
    if rep.definiteness != want:
        rep.hypothesis.append(
            f"B^T B - I_k must be {want} definite for {problem}, found {rep.definiteness}"
        )

    compat = rep.warnings if compat_severity == "warning" else rep.hypothesis
    v = _vertex_values(graph, data.u0)
    a = graph.a_vector
    cont = np.abs(a[1:] * v[1:, 0] - v[0, 0])
    if cont.size and cont.max() > compat_tol:
        compat.append(f"u0 violates vertex continuity by {cont.max():.3g}")
    deriv = np.abs(v[graph.k:, 1] - Bm @ v[: graph.k, 1])
    if deriv.max() > compat_tol:
        compat.append(f"u0 violates derivative coupling by {deriv.max():.3g}")
    inv = 1.0 / a
    flux = abs(np.dot(inv[: graph.k], v[: graph.k, 2]) - np.dot(inv[graph.k:], v[graph.k:, 2]))
    if flux > compat_tol:
        compat.append(f"u0 violates the flux condition by {flux:.3g}")

    if problem == "cauchy":
        for j in range(n):
            for name, prof in (("u0", data.u0[j]), ("f", data.f[j].space)):
                lo, hi = prof.support
                if getattr(prof, "is_zero", False):
                    continue
                if (graph.incoming(j) and lo == -np.inf) or (not graph.incoming(j) and hi == np.inf):
                    rep.warnings.append(f"{name} on bond {j + 1} has unbounded support")
    return rep


def random_cauchy_graph(rng, max_k=4, max_m=4) -> StarGraph:
    """A random graph with B^T B - I positive definite and a_1 = 1."""
    while True:
        k = int(rng.integers(1, max_k + 1))
        m = int(rng.integers(1, max_m + 1))
        a = np.concatenate([[1.0], rng.uniform(0.3, 3.0, k + m - 1) * rng.choice([-1, 1], k + m - 1)])
        B = rng.normal(size=(m, k)) * rng.uniform(1.0, 3.0)
        if m >= k and definiteness(B.T @ B - np.eye(k)) == "positive":
            return StarGraph(k, m, tuple(a), tuple(B.ravel()))
