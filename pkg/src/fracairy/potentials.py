"""Layer, initial and volume potentials.

Every potential is evaluated in the similarity variable of its kernel, where
the integrand is a smooth, super-exponentially decaying profile:

* layer potentials  int_0^t K(x - a, s) tau(t - s) ds  use product
  integration on the time grid; the cell moments of the kernel are integrated
  in y = |x - a| s**(-sigma/3);
* the initial potential  int K(x - xi, t) u0(xi) dxi  is integrated in
  y = (x - xi) t**(-sigma/3);
* the volume potential substitutes s = q**(3/sigma) and xi = x - q y.

Densities are taken to be continuous and bounded on [0, T] and are treated as
piecewise linear between grid nodes; nothing stronger is assumed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import lambertw

from . import fraccalc
from .fraccalc import TimeGrid, TraceGrid
from .fundsol import FundOrder, anchor_coefficient, profile_table
from .specfun import rgamma

__all__ = [
    "BondDomain",
    "LAYER_KINDS",
    "free_field",
    "initial_potential",
    "layer_field",
    "layer_moments",
    "layer_potential",
    "potential_trace",
    "trace_values",
    "profile_mass",
    "volume_potential",
]

# kind -> (kernel family, x-derivative order)
LAYER_KINDS = {
    "G": ("G", 0),
    "Gx": ("G", 1),
    "Gxx": ("G", 2),
    "V": ("V", 0),
    "Vx": ("V", 1),
    "Vxx": ("V", 2),
}

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(10)
_LOG_STEP = 0.5


@dataclass(frozen=True)
class BondDomain:
    """Space interval [a, b] of a bond; either end may be infinite."""

    a: float
    b: float

    def __post_init__(self):
        if not self.a < self.b:
            raise ValueError("bond domain needs a < b")

    def clipped(self, lo: float, hi: float) -> tuple[float, float]:
        return max(self.a, lo), min(self.b, hi)


def _kind(kind):
    try:
        return LAYER_KINDS[kind]
    except KeyError:
        raise ValueError(f"unknown layer kernel {kind!r}") from None


def _layer_order(alpha, mu):
    return FundOrder(alpha, 2 * alpha / 3 if mu is None else mu)


# ---------------------------------------------------------------------------
# layer potentials


def _warp(v):
    """Smooth monotone map u = ln v + v: logarithmic below 1, linear above."""
    return np.log(v) + v


def _unwarp(u):
    # v = W(e^u); the Newton polish keeps large u from overflowing
    v = lambertw(np.exp(np.minimum(u, 600.0))).real
    for _ in range(3):
        v = v - (np.log(v) + v - u) * v / (1.0 + v)
    return v


def _unwarp_slope(v):
    return v / (1.0 + v)


def layer_moments(kind: str, X, grid: TimeGrid, alpha: float, mu: float | None = None):
    """Cell moments of the layer kernel at offsets ``X = x - anchor``.

    Returns ``(m0, m1)`` of shape ``(len(X), n_steps)`` with

        m0[i, k] = int_{k dt}^{(k+1) dt} K(X_i, s) ds
        m1[i, k] = int_{k dt}^{(k+1) dt} K(X_i, s) (s - k dt) / dt ds.

    At X = 0 the kernel is a pure power and the moments are closed form; a
    kernel whose superscript after differentiation is 0 vanishes there.
    """
    family, r = _kind(kind)
    order = _layer_order(alpha, mu)
    sig3 = order.sigma / 3.0
    mu_r = order.mu - r * sig3
    X = np.atleast_1d(np.asarray(X, dtype=float))
    n = grid.n_steps
    dt = grid.dt
    m0 = np.zeros((X.size, n))
    m1 = np.zeros((X.size, n))
    if family == "V" and np.any(X < 0):
        raise ValueError("V layer kernels need x > anchor")
    table = profile_table(family, order, r)
    k = np.arange(n, dtype=float)
    for i, xi in enumerate(X):
        if xi == 0.0:
            side = "right" if family == "V" else "left"
            c = anchor_coefficient(family, r, side) * float(rgamma(mu_r))
            if c == 0.0:
                continue
            if mu_r <= 0:
                raise ValueError("kernel at the anchor is not integrable")
            p0 = ((k + 1) ** mu_r - k**mu_r) / mu_r
            p1 = ((k + 1) ** (mu_r + 1) - k ** (mu_r + 1)) / (mu_r + 1)
            m0[i] = c * dt**mu_r * p0
            m1[i] = c * dt**mu_r * (p1 - k * p0)
            continue
        sign = 1.0 if xi > 0 else -1.0
        reach = table.right if xi > 0 else table.left
        ax = abs(xi)
        # cell k covers v in [ax ((k+1) dt)^-s, ax (k dt)^-s], capped at reach
        with np.errstate(divide="ignore"):
            v_top = np.where(k > 0, ax * (k * dt) ** (-sig3), np.inf)
        v_bot = ax * ((k + 1) * dt) ** (-sig3)
        v_top = np.minimum(v_top, reach)
        live = v_bot < v_top
        if not live.any():
            continue
        cells = np.nonzero(live)[0]
        ua = _warp(v_bot[cells])
        ub = _warp(v_top[cells])
        npan = np.maximum(1, np.ceil((ub - ua) / _LOG_STEP).astype(int))
        cell_of_panel = np.repeat(cells, npan)
        first = np.repeat(np.cumsum(npan) - npan, npan)
        j = np.arange(cell_of_panel.size) - first
        width = np.repeat((ub - ua) / npan, npan)
        lo = np.repeat(ua, npan) + j * width
        u = lo[:, None] + 0.5 * width[:, None] * (_GL_NODES[None, :] + 1.0)
        v = _unwarp(u)
        wts = 0.5 * width[:, None] * _GL_WEIGHTS[None, :] * _unwarp_slope(v)
        s = (ax / v) ** (1.0 / sig3)
        g = table(sign * v.ravel()).reshape(v.shape)
        dens = (1.0 / sig3) * s**mu_r * g / v * wts
        kk = cell_of_panel[:, None] * dt
        a0 = dens.sum(axis=1)
        a1 = (dens * (s - kk) / dt).sum(axis=1)
        m0[i] = np.bincount(cell_of_panel, a0, minlength=n)
        m1[i] = np.bincount(cell_of_panel, a1, minlength=n)
    return m0, m1


def _apply_moments(m0, m1, tau):
    """u[:, n] = sum_k (m0 - m1)[:, k] tau[n-k] + m1[:, k] tau[n-k-1]."""
    nx, n = m0.shape
    a = m0 - m1
    out = np.zeros((nx, n + 1))
    for step in range(1, n + 1):
        out[:, step] = a[:, :step] @ tau[step:0:-1] + m1[:, :step] @ tau[step - 1::-1]
    return out


def layer_field(kind: str, density: TraceGrid, anchor: float, x, alpha: float,
                mu: float | None = None) -> np.ndarray:
    """Layer potential at points ``x`` and every grid node; shape (len(x), n+1).

    Points at the anchor must be handled by :func:`potential_trace`, because
    the one-sided limits differ there.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if np.any(x == anchor):
        raise ValueError("use potential_trace at the anchor")
    m0, m1 = layer_moments(kind, x - anchor, density.grid, alpha, mu)
    return _apply_moments(m0, m1, np.asarray(density.values, dtype=float))


def layer_potential(kind: str, density: TraceGrid, anchor: float, x: float, t: float,
                    alpha: float, mu: float | None = None) -> float:
    """Layer potential at a single point ``x`` and grid time ``t``."""
    family, _ = _kind(kind)
    if family == "V" and x <= anchor:
        raise ValueError("V layer kernels need x > anchor")
    n = _node_index(density.grid, t)
    return float(layer_field(kind, density, anchor, [x], alpha, mu)[0, n])


def _node_index(grid, t):
    n = int(round(t / grid.dt))
    if not 0 <= n <= grid.n_steps or abs(n * grid.dt - t) > 1e-9 * max(1.0, abs(t)):
        raise ValueError(f"t = {t} is not a grid node")
    return n


def trace_values(kind: str, density: TraceGrid, side: str, alpha: float,
                 mu: float | None = None) -> TraceGrid:
    """One-sided limit of the layer potential at its anchor, at every node.

    The limit equals ``c * J^{mu_r} tau`` with ``c`` the analytic anchor
    constant of the kernel and ``mu_r`` its superscript after the
    x-derivatives; for ``mu_r = 0`` the operator is the identity, which is
    the jump term of the second-derivative kernels.
    """
    family, r = _kind(kind)
    if side not in ("left", "right"):
        raise ValueError("side must be 'left' or 'right'")
    order = _layer_order(alpha, mu)
    mu_r = order.mu - r * order.sigma / 3.0
    c = anchor_coefficient(family, r, side)
    if abs(mu_r) < 1e-14:
        return TraceGrid(density.grid, c * density.values)
    if mu_r < 0:
        raise ValueError(f"{kind} has no finite trace at the anchor")
    return TraceGrid(density.grid, c * fraccalc.rl_integral(density, mu_r).values)


def potential_trace(kind: str, density: TraceGrid, anchor: float, side: str, t: float,
                    alpha: float, mu: float | None = None) -> float:
    """One-sided limit at ``anchor`` of the layer potential at grid time ``t``.

    The anchor position does not enter the value; it is accepted so that the
    call reads like :func:`layer_potential`.
    """
    n = _node_index(density.grid, t)
    return float(trace_values(kind, density, side, alpha, mu).values[n])


# ---------------------------------------------------------------------------
# initial potential


def _panel_nodes(lo, hi, width):
    """Gauss nodes on [lo_i, hi_i] split into panels of width <= width_i.

    Returns (owner, nodes, weights) flattened over all rows.
    """
    span = np.maximum(hi - lo, 0.0)
    npan = np.where(span > 0, np.maximum(1, np.ceil(span / width).astype(int)), 0)
    owner = np.repeat(np.arange(lo.size), npan)
    first = np.repeat(np.cumsum(npan) - npan, npan)
    j = np.arange(owner.size) - first
    w = np.repeat(span / np.maximum(npan, 1), npan)
    left = np.repeat(lo, npan) + j * w
    nodes = left[:, None] + 0.5 * w[:, None] * (_GL_NODES[None, :] + 1.0)
    weights = 0.5 * w[:, None] * _GL_WEIGHTS[None, :]
    owner = np.repeat(owner, _GL_NODES.size)
    return owner, nodes.ravel(), weights.ravel()


_MAX_LEVEL = 10
_MAX_Q_PANELS = 256
_ALIGNED_CACHE: dict = {}


def _aligned_nodes(table, level):
    """Gauss nodes and profile-weighted weights on panels of width 2**-level.

    Panel edges are multiples of the width, so y = 0 is always an edge and the
    profile is evaluated once per table and level.
    """
    key = (id(table), level)
    hit = _ALIGNED_CACHE.get(key)
    if hit is not None and hit[0] is table:
        return hit[1], hit[2]
    width = 2.0**-level
    count = int(round((table.left + table.right) / width))
    lo = -table.left + width * np.arange(count)
    y = (lo[:, None] + 0.5 * width * (_GL_NODES[None, :] + 1.0)).ravel()
    gw = np.tile(0.5 * width * _GL_WEIGHTS, count) * table(y)
    _ALIGNED_CACHE[key] = (table, y, gw)
    return y, gw


def _profile_quadrature(table, y_lo, y_hi, width_cap, sample):
    """Integrals of g(y) * sample(i, y) over [y_lo[i], y_hi[i]] for a tabulated g.

    Whole aligned panels reuse cached profile values; the clipped pieces at
    either end are integrated with direct table evaluation.
    """
    n = y_lo.size
    acc = np.zeros(n)
    y_lo = np.maximum(y_lo, -table.left)
    y_hi = np.minimum(y_hi, table.right)
    live = y_hi > y_lo
    level = np.clip(np.ceil(-np.log2(np.maximum(width_cap, 1e-300))), 0, _MAX_LEVEL).astype(int)
    ng = _GL_NODES.size
    for lv in np.unique(level[live]):
        idx = np.nonzero(live & (level == lv))[0]
        lo_i, hi_i = y_lo[idx], y_hi[idx]
        width = 2.0**-lv
        ynod, gw = _aligned_nodes(table, lv)
        p0 = np.ceil((lo_i + table.left) / width - 1e-12).astype(int)
        p1 = np.floor((hi_i + table.left) / width + 1e-12).astype(int)
        full = np.maximum(p1 - p0, 0)
        cnt = full * ng
        if cnt.sum():
            owner = np.repeat(idx, cnt)
            first = np.repeat(np.cumsum(cnt) - cnt, cnt)
            k = np.repeat(p0 * ng, cnt) + np.arange(owner.size) - first
            acc += np.bincount(owner, gw[k] * sample(owner, ynod[k]), minlength=n)
        inside = p0 > p1
        edge_lo = np.where(inside, hi_i, -table.left + p0 * width)
        edge_hi = np.where(inside, hi_i, -table.left + p1 * width)
        for a, b in ((lo_i, np.minimum(edge_lo, hi_i)), (np.maximum(edge_hi, lo_i), hi_i)):
            span = b - a
            keep = span > 0
            if not keep.any():
                continue
            own = np.repeat(idx[keep], ng)
            yy = (a[keep, None] + 0.5 * span[keep, None] * (_GL_NODES[None, :] + 1.0)).ravel()
            ww = (0.5 * span[keep, None] * _GL_WEIGHTS[None, :]).ravel()
            acc += np.bincount(own, ww * table(yy) * sample(own, yy), minlength=n)
    return acc


def initial_potential(u0, domain: BondDomain, x, t, alpha: float,
                      with_frac_derivative: bool = True, r: int = 0,
                      chunk: int = 20000) -> np.ndarray:
    """int_domain d^r/dx^r K(x - xi, t) u0(xi) dxi at broadcast points (x, t).

    The kernel is G with superscript 1 - alpha/3 when ``with_frac_derivative``
    (the initial-trace kernel, which tends to u0 as t -> 0) and 2 alpha/3
    otherwise. ``u0`` is a space profile from :mod:`fracairy.presets` or any
    callable with ``support`` and ``feature_length`` attributes.
    """
    mu = 1 - alpha / 3 if with_frac_derivative else 2 * alpha / 3
    order = FundOrder(alpha, mu)
    x, t = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(t, dtype=float))
    shape = x.shape
    x = x.ravel()
    t = t.ravel()
    if np.any(t <= 0):
        raise ValueError("initial potential needs t > 0")
    out = np.zeros(x.size)
    if getattr(u0, "is_zero", False):
        return out.reshape(shape)
    sig3 = alpha / 3.0
    table = profile_table("G", order, r)
    lo_xi, hi_xi = domain.clipped(*u0.support)
    if not lo_xi < hi_xi:
        return out.reshape(shape)
    feat = u0.feature_length
    for start in range(0, x.size, chunk):
        xs = x[start:start + chunk]
        ts = t[start:start + chunk]
        scale = ts**sig3

        def sample(owner, y):
            vals = u0(xs[owner] - scale[owner] * y)
            if not np.all(np.isfinite(vals)):
                raise ValueError("u0 has non-finite values")
            return vals

        acc = _profile_quadrature(table, (xs - hi_xi) / scale, (xs - lo_xi) / scale,
                                  np.minimum(0.5, 0.25 * feat / scale), sample)
        out[start:start + chunk] = ts ** (mu - 1.0 + sig3 - r * sig3) * acc
    return out.reshape(shape)


def profile_mass(kind: str, order: FundOrder, r: int, side: str) -> float:
    """Integral of a tabulated profile over y < 0 (``side="left"``) or y > 0."""
    table = profile_table(kind, order, r)
    lo, hi = (-table.left, 0.0) if side == "left" else (0.0, table.right)
    owner, y, w = _panel_nodes(np.array([lo]), np.array([hi]), np.array([0.5]))
    return float(np.dot(w, table(y)))


# ---------------------------------------------------------------------------
# volume potential


def _q_panels(tops, feat, n_q):
    """Gauss nodes in q with a panel edge at every upper limit in ``tops``."""
    edges = np.unique(np.concatenate([[0.0], tops]))
    cap = 0.125 * feat
    lo_e, hi_e = [], []
    for a, b in zip(edges[:-1], edges[1:]):
        cnt = max(1, math.ceil((b - a) / cap))
        cuts = np.linspace(a, b, cnt + 1)
        lo_e.append(cuts[:-1])
        hi_e.append(cuts[1:])
    lo_e = np.concatenate(lo_e)
    hi_e = np.concatenate(hi_e)
    qn, qw = np.polynomial.legendre.leggauss(n_q)
    half = 0.5 * (hi_e - lo_e)[:, None]
    q = (lo_e[:, None] + half * (qn[None, :] + 1.0)).ravel()
    w = (half * qw[None, :]).ravel()
    right = np.repeat(hi_e, n_q)
    return q, w, right


def _volume_separable(space, time_fn, table, lo_xi, hi_xi, ux, ut, alpha, r, n_q, feat,
                      chunk=200000):
    """Volume potential of f = space(x) time(t) on the product grid ux x ut.

    The y-integral depends on (x, q) only, so it is computed once on q nodes
    shared by all times; time t then sums the panels below t**(alpha/3).
    """
    out = np.zeros((ux.size, ut.size))
    live = ut > 0
    if not live.any():
        return out
    tops = ut[live] ** (alpha / 3)
    q, wq, right = _q_panels(tops, feat, n_q)
    base = np.zeros((ux.size, q.size))
    per = max(1, chunk // q.size)
    for start in range(0, ux.size, per):
        xs = ux[start:start + per]
        X = np.repeat(xs, q.size)
        Q = np.tile(q, xs.size)

        def sample(owner, y):
            return space(X[owner] - Q[owner] * y)

        inner = _profile_quadrature(table, (X - hi_xi) / Q, (X - lo_xi) / Q,
                                    np.minimum(0.5, 0.25 * feat / Q), sample)
        base[start:start + per] = inner.reshape(xs.size, q.size)
    base *= (wq * (3.0 / alpha) * q ** (2 - r))[None, :]
    below = right[:, None] <= tops[None, :] * (1 + 1e-13)
    lag = np.where(below, ut[live][None, :] - q[:, None] ** (3.0 / alpha), 0.0)
    weights = np.where(below, time_fn(np.maximum(lag, 0.0)), 0.0)
    out[:, live] = base @ weights
    return out


def volume_potential(f, domain: BondDomain, x, t, alpha: float, r: int = 0,
                     n_q: int = 16, chunk: int = 4000) -> np.ndarray:
    """int_0^t int_domain d^r/dx^r G(x - xi, t - s) f(xi, s) dxi ds, G of superscript 2 alpha/3.

    With s = t - q**(3/alpha) and xi = x - q y the integrand becomes
    (3/alpha) q**(2 - r) g_r(y) f(x - q y, t - q**(3/alpha)), smooth in q on
    [0, t**(alpha/3)]. It is integrated by ``n_q``-point Gauss-Legendre on
    panels no wider than an eighth of the feature length of f, since x - q y
    sweeps the features of f at a rate set by the profile reach. ``f`` is a
    callable f(x, t) whose ``space`` attribute carries support and feature
    length (see :class:`fracairy.presets.SeparableSource`).
    """
    if r not in (0, 1, 2):
        raise ValueError("volume potential derivatives limited to r <= 2")
    order = FundOrder(alpha, 2 * alpha / 3)
    x, t = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(t, dtype=float))
    shape = x.shape
    x = x.ravel()
    t = t.ravel()
    out = np.zeros(x.size)
    if getattr(f, "is_zero", False):
        return out.reshape(shape)
    table = profile_table("G", order, r)
    space = f.space
    lo_xi, hi_xi = domain.clipped(*space.support)
    if not lo_xi < hi_xi:
        return out.reshape(shape)
    feat = space.feature_length
    time_fn = getattr(f, "time", None)
    ux, xinv = np.unique(x, return_inverse=True)
    ut, tinv = np.unique(t, return_inverse=True)
    if time_fn is not None and ux.size * ut.size <= 4 * x.size + 64:
        grid = _volume_separable(space, time_fn, table, lo_xi, hi_xi, ux, ut, alpha, r, n_q, feat)
        return grid[xinv, tinv].reshape(shape)
    qn, qw = np.polynomial.legendre.leggauss(n_q)
    pos = t > 0
    top_max = float(np.max(np.where(pos, t, 0.0), initial=0.0)) ** (alpha / 3)
    panels = max(1, min(_MAX_Q_PANELS, math.ceil(top_max / (0.125 * feat))))
    # nodes on [0, 1], scaled by each point's own upper limit
    unit = (np.arange(panels)[:, None] + 0.5 * (qn[None, :] + 1.0)).ravel() / panels
    unit_w = np.tile(0.5 * qw, panels) / panels
    for start in range(0, x.size, chunk):
        sl = slice(start, start + chunk)
        xs, ts = x[sl], t[sl]
        live = pos[sl]
        acc = np.zeros(xs.size)
        top = np.where(live, ts, 0.0) ** (alpha / 3)
        for node, weight in zip(unit, unit_w):
            q = top * node
            wq = top * weight
            s_left = ts - q ** (3.0 / alpha)
            safe = np.where(q > 0, q, 1.0)

            def sample(owner, y):
                return f(xs[owner] - q[owner] * y, s_left[owner])

            inner = _profile_quadrature(table, np.where(q > 0, (xs - hi_xi) / safe, 0.0),
                                        np.where(q > 0, (xs - lo_xi) / safe, 0.0),
                                        np.minimum(0.5, 0.25 * feat / safe), sample)
            acc += wq * (3.0 / alpha) * q ** (2 - r) * inner
        out[sl] = np.where(live, acc, 0.0)
    return out.reshape(shape)


def free_field(u0, f, domain: BondDomain, x, t, alpha: float, r: int = 0) -> np.ndarray:
    """Initial plus volume potential and their x-derivatives, including t = 0.

    This is the part of a bond solution driven by the data alone. At t = 0
    it takes its limit: u0^(r)(x) inside the domain and, at an end point,
    u0^(r) times the kernel mass lying on the domain side. The end-point
    limit of a derivative is exact when the lower derivatives of u0 vanish
    there, which vertex-compatible data satisfy.
    """
    x, t = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(t, dtype=float))
    out = np.zeros(x.shape)
    pos = t > 0
    if pos.any():
        out[pos] = initial_potential(u0, domain, x[pos], t[pos], alpha, True, r)
        out[pos] += volume_potential(f, domain, x[pos], t[pos], alpha, r)
    zero = ~pos
    if zero.any() and not getattr(u0, "is_zero", False):
        xz = x[zero]
        val = np.asarray(u0(xz, r), dtype=float)
        inside = (xz > domain.a) & (xz < domain.b)
        order = FundOrder(alpha, 1 - alpha / 3)
        # the kernel is evaluated at x - xi, so a domain below x sees y > 0
        at_b = xz == domain.b
        at_a = xz == domain.a
        scale = np.where(inside, 1.0, 0.0)
        if at_b.any():
            scale[at_b] = profile_mass("G", order, 0, "right")
        if at_a.any():
            scale[at_a] = profile_mass("G", order, 0, "left")
        out[zero] = scale * val
    return out
