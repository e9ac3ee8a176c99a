"""Fundamental solutions of the time-fractional Airy equation.

For sigma in (0, 1) and any real superscript mu the kernels are

    G(x, t) = t**(mu-1) / 3 * phi(-sigma/3, mu; y)                        x < 0
    G(x, t) = -2/3 * t**(mu-1) * Re[w phi(-sigma/3, mu; w y)]              x > 0
    V(x, t) =  1/3 * t**(mu-1) * Im[w phi(-sigma/3, mu; w y)]              x > 0

with y = x t**(-sigma/3) and w = exp(2 pi i / 3). The r-th x-derivative keeps
the same form with mu -> mu - r sigma / 3, an extra factor t**(-r sigma/3)
and w -> w**(r+1) in front of phi on the x > 0 branch.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import fraccalc
from .specfun import DEFAULT_ACCURACY, AccuracySpec, decay_radius, rgamma, wright

__all__ = [
    "FundOrder",
    "anchor_coefficient",
    "eval_G",
    "eval_G_dx",
    "eval_V",
    "eval_V_dx",
    "kernel",
    "order_shift_check",
    "profile",
    "profile_radius",
    "ProfileTable",
    "profile_table",
]

W = np.exp(2j * np.pi / 3)


@dataclass(frozen=True)
class FundOrder:
    sigma: float
    mu: float

    def __post_init__(self):
        if not 0 < self.sigma < 1:
            raise ValueError(f"sigma must lie in (0, 1), got {self.sigma}")

    def shifted(self, nu: float) -> "FundOrder":
        """Order after a Caputo derivative of order ``nu`` in time."""
        return FundOrder(self.sigma, self.mu - nu)


def _check_r(r):
    if r not in (0, 1, 2, 3):
        raise ValueError(f"derivative order must be 0..3, got {r}")


def anchor_coefficient(kind: str, r: int, side: str) -> float:
    """Constant c with kernel(0 side, t) = c * t**(mu_r - 1) / Gamma(mu_r).

    ``kind`` is ``"G"`` or ``"V"``, ``side`` is ``"left"`` or ``"right"``.
    """
    _check_r(r)
    if kind == "G":
        if side == "left":
            return 1.0 / 3.0
        return -2.0 / 3.0 * (W ** (r + 1)).real
    if kind == "V":
        if side != "right":
            raise ValueError("V is only defined to the right of its anchor")
        return (W ** (r + 1)).imag / 3.0
    raise ValueError(f"unknown kernel kind {kind!r}")


def profile(kind: str, order: FundOrder, y, r: int = 0,
            acc: AccuracySpec = DEFAULT_ACCURACY, side: str | None = None) -> np.ndarray:
    """Similarity profile g with kernel(x, t) = t**(mu - 1 - r sigma/3) g(x t**(-sigma/3)).

    At ``y == 0`` the one-sided limit on ``side`` is used; for G and r <= 1
    both sides agree and ``side`` may be omitted.
    """
    _check_r(r)
    lam = -order.sigma / 3.0
    mu_r = order.mu - r * order.sigma / 3.0
    y = np.asarray(y, dtype=float)
    out = np.zeros(y.shape)
    neg = y < 0
    pos = y > 0
    zero = y == 0
    if kind == "G":
        if neg.any():
            out[neg] = wright(lam, mu_r, y[neg], acc).real / 3.0
        if pos.any():
            val = wright(lam, mu_r, W * y[pos], acc)
            out[pos] = -2.0 / 3.0 * (W ** (r + 1) * val).real
    elif kind == "V":
        if neg.any():
            raise ValueError("V is defined for x > 0 only")
        if pos.any():
            val = wright(lam, mu_r, W * y[pos], acc)
            out[pos] = (W ** (r + 1) * val).imag / 3.0
    else:
        raise ValueError(f"unknown kernel kind {kind!r}")
    if zero.any():
        if side is None:
            if kind == "V":
                side = "right"
            elif r >= 2:
                raise ValueError("G with r >= 2 jumps at x = 0; pass side")
            else:
                side = "left"
        out[zero] = anchor_coefficient(kind, r, side) * float(rgamma(mu_r))
    return out


def kernel(kind: str, order: FundOrder, x, t, r: int = 0,
           acc: AccuracySpec = DEFAULT_ACCURACY, side: str | None = None) -> np.ndarray:
    """Kernel ``kind`` or its r-th x-derivative at broadcast (x, t), t > 0."""
    x, t = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(t, dtype=float))
    if np.any(t <= 0):
        raise ValueError("kernels need t > 0")
    s = order.sigma / 3.0
    scale = t ** (order.mu - 1.0 - r * s)
    y = x * t ** (-s)
    return scale * profile(kind, order, y, r, acc, side)


def eval_G(order: FundOrder, x, t, acc: AccuracySpec = DEFAULT_ACCURACY):
    """G_sigma^mu(x, t); at x = 0 the common one-sided limit."""
    out = kernel("G", order, x, t, 0, acc)
    return float(out) if out.ndim == 0 else out


def eval_V(order: FundOrder, x, t, acc: AccuracySpec = DEFAULT_ACCURACY):
    """V_sigma^mu(x, t) for x > 0."""
    if np.any(np.asarray(x) <= 0):
        raise ValueError("V is defined for x > 0 only")
    out = kernel("V", order, x, t, 0, acc)
    return float(out) if out.ndim == 0 else out


def eval_G_dx(order: FundOrder, x, t, r: int, acc: AccuracySpec = DEFAULT_ACCURACY,
              side: str | None = None):
    """r-th x-derivative of G, r in {1, 2} (3 is also accepted)."""
    if r not in (1, 2, 3):
        raise ValueError("r must be 1, 2 or 3")
    out = kernel("G", order, x, t, r, acc, side)
    return float(out) if out.ndim == 0 else out


def eval_V_dx(order: FundOrder, x, t, r: int, acc: AccuracySpec = DEFAULT_ACCURACY):
    """r-th x-derivative of V for x > 0."""
    if r not in (1, 2, 3):
        raise ValueError("r must be 1, 2 or 3")
    if np.any(np.asarray(x) <= 0):
        raise ValueError("V is defined for x > 0 only")
    out = kernel("V", order, x, t, r, acc)
    return float(out) if out.ndim == 0 else out


def profile_radius(order: FundOrder, r: int = 0, level: float = 1e-14) -> tuple[float, float]:
    """(left, right) radii in y beyond which the kernel profile is below ``level``.

    Uses the calibrated decay bound of the Wright function on the negative
    real axis and on the exp(2 pi i / 3) ray.
    """
    lam = -order.sigma / 3.0
    mu_r = order.mu - r * order.sigma / 3.0
    left = decay_radius(lam, mu_r, math.pi, level)
    right = decay_radius(lam, mu_r, 2 * math.pi / 3, level)
    return left, right


def order_shift_check(order: FundOrder, nu: float, x: float, grid: "fraccalc.TimeGrid",
                      graded: bool = True, ratio: float = 1.005):
    """Discrete Caputo nu-derivative of G(x, .) next to G with superscript mu - nu.

    Negative ``nu`` means the fractional integral of order ``-nu``. Returns
    (lhs, rhs) on the grid nodes; node 0 holds the t -> 0 limit, 0 for x != 0.

    The kernel has an initial layer on t ~ (|x| / y)**(3 / sigma) that a
    uniform step cannot resolve for small sigma. With ``graded`` the L1 sums
    run over a mesh that adds geometric nodes (``ratio``) below 40 steps to
    the uniform grid; the outputs are still reported on the uniform nodes.
    """
    t = grid.nodes
    rhs = np.zeros_like(t)
    rhs[1:] = eval_G(order.shifted(nu), x, t[1:])
    if nu == 0:
        lhs = np.zeros_like(t)
        lhs[1:] = eval_G(order, x, t[1:])
        return lhs, rhs
    if not graded or x == 0:
        vals = np.zeros_like(t)
        vals[1:] = eval_G(order, x, t[1:])
        f = fraccalc.TraceGrid(grid, vals)
        if nu > 0:
            return fraccalc.caputo_derivative(f, nu).values, rhs
        return fraccalc.rl_integral(f, -nu).values, rhs
    left, right = profile_radius(order, 0, 1e-18)
    reach = left if x < 0 else right
    s_min = (abs(x) / reach) ** (3.0 / order.sigma)
    top = min(40, grid.n_steps) * grid.dt
    fine = [np.array([0.0])]
    if s_min < top:
        count = int(math.ceil(math.log(top / s_min) / math.log(ratio))) + 1
        fine.append(np.geomspace(s_min, top, count)[:-1])
    fine.append(t)
    nodes = np.unique(np.concatenate(fine))
    vals = np.zeros_like(nodes)
    vals[1:] = eval_G(order, x, nodes[1:])
    idx = np.searchsorted(nodes, t)
    if nu > 0:
        lhs = fraccalc.caputo_on_nodes(nodes, vals, nu, idx)
    else:
        lhs = fraccalc.rl_on_nodes(nodes, vals, -nu, idx)
    return lhs, rhs


# ---------------------------------------------------------------------------
# cached similarity profiles


_PANEL = 1.0
_CHEB_DEG = 24


class ProfileTable:
    """Piecewise Chebyshev interpolant of a kernel profile.

    The profile of ``kind`` with superscript ``mu`` and x-derivative ``r`` is
    tabulated on unit panels covering [-left, right], split at y = 0 so that
    the one-sided branches stay separate. Outside that range the profile is
    below ``level`` and evaluates to 0.
    """

    def __init__(self, kind: str, order: FundOrder, r: int = 0, level: float = 1e-18):
        self.kind, self.order, self.r = kind, order, r
        left, right = profile_radius(order, r, level)
        if kind == "V":
            left = 0.0
        self.n_left = int(math.ceil(left / _PANEL))
        self.n_right = int(math.ceil(right / _PANEL))
        self.left = self.n_left * _PANEL
        self.right = self.n_right * _PANEL
        k = np.arange(_CHEB_DEG + 1)
        self._nodes = np.cos(np.pi * (k + 0.5) / (_CHEB_DEG + 1))
        self.coef_left = self._fit(-self.left, self.n_left, "left")
        self.coef_right = self._fit(0.0, self.n_right, "right")
        self.at_zero = {
            side: anchor_coefficient(kind, r, side) * float(rgamma(order.mu - r * order.sigma / 3.0))
            for side in (("right",) if kind == "V" else ("left", "right"))
        }

    def _fit(self, start, count, side):
        if count == 0:
            return np.zeros((0, _CHEB_DEG + 1))
        lo = start + _PANEL * np.arange(count)
        y = lo[:, None] + 0.5 * _PANEL * (self._nodes[None, :] + 1.0)
        vals = profile(self.kind, self.order, y.ravel(), self.r, side=side).reshape(y.shape)
        return np.polynomial.chebyshev.chebfit(self._nodes, vals.T, _CHEB_DEG).T

    def __call__(self, y, side: str | None = None) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        out = np.zeros(y.shape)
        for coef, mask, origin in (
            (self.coef_left, (y < 0) & (y >= -self.left), -self.left),
            (self.coef_right, (y > 0) & (y < self.right), 0.0),
        ):
            if not mask.any():
                continue
            yy = y[mask]
            idx = np.minimum(((yy - origin) // _PANEL).astype(int), coef.shape[0] - 1)
            u = 2.0 * (yy - origin - idx * _PANEL) / _PANEL - 1.0
            c = coef[idx]
            # Clenshaw recurrence, vectorized over points
            b1 = np.zeros_like(u)
            b2 = np.zeros_like(u)
            for j in range(_CHEB_DEG, 0, -1):
                b1, b2 = 2.0 * u * b1 - b2 + c[:, j], b1
            out[mask] = u * b1 - b2 + c[:, 0]
        zero = y == 0
        if zero.any():
            if side is None:
                if self.kind == "G" and self.r >= 2:
                    raise ValueError("G with r >= 2 jumps at y = 0; pass side")
                side = "right" if self.kind == "V" else "left"
            out[zero] = self.at_zero[side]
        return out


_TABLE_LOCK = threading.Lock()


@lru_cache(maxsize=64)
def _cached_table(kind, sigma, mu, r):
    return ProfileTable(kind, FundOrder(sigma, mu), r)


def profile_table(kind: str, order: FundOrder, r: int = 0) -> ProfileTable:
    """Shared :class:`ProfileTable`; concurrent callers may build it redundantly."""
    with _TABLE_LOCK:
        return _cached_table(kind, float(order.sigma), float(order.mu), int(r))
