"""Gamma, Wright and Mittag-Leffler functions.

The Wright function

    phi(lam, mu; z) = sum_n z**n / (n! Gamma(lam*n + mu))

is the building block of every kernel in the package. Three evaluators are
combined:

* the power series in double precision, used whenever the sum of absolute
  term values shows that cancellation costs less than the requested accuracy;
* a steepest-descent Hankel contour integral for ``-1 < lam < 0`` on the
  decaying sector ``(1 - lam) * pi / 2 < |arg z| <= pi``, where the series
  suffers catastrophic cancellation;
* the series summed with mpmath at a working precision chosen from the
  largest term, for everything else.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import mpmath
import numpy as np
from scipy import special

__all__ = [
    "AccuracySpec",
    "DEFAULT_ACCURACY",
    "GammaPoleError",
    "MittagLefflerOverflowError",
    "SectorError",
    "WrightArgs",
    "WrightConvergenceError",
    "gamma_fn",
    "in_decay_sector",
    "mittag_leffler",
    "rgamma",
    "tail_bound_constant",
    "wright",
    "wright_integral_identity",
    "wright_tail_bound",
]


class GammaPoleError(ValueError):
    """Raised when Gamma is requested at zero or a negative integer."""


class WrightConvergenceError(ArithmeticError):
    """Raised when a series exhausts ``max_terms`` before its tail is negligible."""


class SectorError(ValueError):
    """Raised when a decay estimate is requested outside its sector."""


class MittagLefflerOverflowError(OverflowError):
    """Raised when a Mittag-Leffler value exceeds the double range."""


@dataclass(frozen=True)
class AccuracySpec:
    abs_tol: float = 1e-12
    rel_tol: float = 1e-10
    max_terms: int = 400

    def __post_init__(self):
        if not (self.abs_tol > 0 and self.rel_tol > 0):
            raise ValueError("abs_tol and rel_tol must be positive")
        if self.max_terms < 1:
            raise ValueError("max_terms must be at least 1")


DEFAULT_ACCURACY = AccuracySpec()


@dataclass(frozen=True)
class WrightArgs:
    lam: float
    mu: float
    z: complex = 0j

    def __post_init__(self):
        if not self.lam > -1:
            raise ValueError(f"Wright series needs lam > -1, got {self.lam}")


def _is_pole(x: float) -> bool:
    return x <= 0 and float(x).is_integer()


def gamma_fn(x: float) -> float:
    """Gamma function on the real line, refusing its poles."""
    x = float(x)
    if _is_pole(x):
        raise GammaPoleError(f"Gamma has a pole at {x:g}")
    return math.gamma(x)


def rgamma(x):
    """Reciprocal Gamma, zero at the poles (vectorized)."""
    return special.rgamma(x)


# ---------------------------------------------------------------------------
# series


@lru_cache(maxsize=256)
def _series_coefficients(lam: float, mu: float, nterms: int):
    """log|c_n| and sign(c_n) for c_n = 1 / (n! Gamma(lam n + mu))."""
    n = np.arange(nterms, dtype=float)
    arg = lam * n + mu
    pole = (arg <= 0) & (arg == np.round(arg))
    with np.errstate(all="ignore"):
        logc = -special.gammaln(n + 1) - special.gammaln(arg)
        sign = special.gammasgn(arg)
    logc[pole] = -np.inf
    sign[pole] = 0.0
    logc.setflags(write=False)
    sign.setflags(write=False)
    return logc, sign


def _log_max_term(lam, mu, radius, nterms):
    logc, _ = _series_coefficients(lam, mu, nterms)
    n = np.arange(nterms)
    # radius 0 gives 0 * -inf in the n = 0 column, which is overwritten below
    with np.errstate(divide="ignore", invalid="ignore"):
        lr = np.log(np.asarray(radius, dtype=float))[..., None]
        t = logc + n * lr
    t[..., 0] = logc[0] if np.isfinite(logc[0]) else -np.inf
    return np.max(t, axis=-1), t


def _series_double(lam, mu, z, nterms):
    """Horner evaluation; returns (sum, sum of |terms|)."""
    logc, sign = _series_coefficients(lam, mu, nterms)
    c = sign * np.exp(logc)
    s = np.zeros_like(z)
    a = np.zeros(z.shape)
    az = np.abs(z)
    for cn in c[::-1]:
        s = s * z + cn
        a = a * az + abs(cn)
    return s, a


def _terms_needed(lam, mu, radius, acc):
    """Smallest count whose tail is below abs_tol, or None if beyond max_terms."""
    nmax = max(acc.max_terms, 2)
    _, logt = _log_max_term(lam, mu, radius, nmax)
    cut = math.log(acc.abs_tol) - 8.0
    # the tail is negligible once every remaining term is tiny and decreasing
    big = np.nonzero(logt > cut)[0]
    need = (big[-1] + 2) if big.size else 1
    if need >= nmax - 1:
        return None
    return int(need)


def _series_mp(lam, mu, z, acc):
    """Series in mpmath with digits chosen from the largest term."""
    radius = abs(z)
    nmax = acc.max_terms
    need = _terms_needed(lam, mu, radius, acc)
    if need is None:
        raise WrightConvergenceError(
            f"Wright series for lam={lam}, mu={mu}, |z|={radius:.3g} "
            f"needs more than {nmax} terms"
        )
    logmax, _ = _log_max_term(lam, mu, radius, need + 1)
    dps = 20 + max(0, int(logmax / math.log(10))) + 5
    with mpmath.workdps(dps):
        zz = mpmath.mpc(z)
        lam_m, mu_m = mpmath.mpf(lam), mpmath.mpf(mu)
        total = mpmath.mpc(0)
        power = mpmath.mpc(1)
        fact = mpmath.mpf(1)
        for n in range(need + 8):
            if n:
                power *= zz
                fact *= n
            total += power / fact * mpmath.rgamma(lam_m * n + mu_m)
        return complex(total)


# ---------------------------------------------------------------------------
# Hankel contour on the decaying sector


def in_decay_sector(lam: float, z) -> np.ndarray:
    """True where ``z`` lies in the sector in which phi(lam, mu; z) decays."""
    rho = -lam
    ang = np.abs(np.angle(np.asarray(z, dtype=complex)))
    return (ang > (1 + rho) * np.pi / 2) & (np.abs(z) > 0)


_CONTOUR_BEND = 0.25
_CONTOUR_CUT = 45.0
_CHUNK = 4096


def _contour(rho, mu, z):
    """phi(-rho, mu; z) for z in the decaying sector, 0 < rho < 1.

    With s = R w the Hankel representation reads

        phi = R**(1-mu) / (2 pi i) * int exp(R (w + c w**rho)) w**(-mu) dw,
        c = z R**(rho - 1).

    For R = (rho |z|)**(1/(1-rho)) >= 1 the parabola passes through the saddle
    at unit modulus along the steepest-descent direction; for small R a fixed
    parabola around w = 1 is used. The trapezoid rule converges geometrically.
    """
    out = np.empty(z.shape, dtype=complex)
    flat_z = z.ravel()
    flat_out = out.ravel()
    for lo in range(0, flat_z.size, _CHUNK):
        zc = flat_z[lo:lo + _CHUNK]
        flat_out[lo:lo + _CHUNK] = _contour_chunk(rho, mu, zc)
    return out


def _contour_chunk(rho, mu, z):
    b = _CONTOUR_BEND
    flip = np.angle(z) < 0
    z = np.where(flip, np.conj(z), z)
    th = np.angle(z)
    r = (rho * np.abs(z)) ** (1.0 / (1.0 - rho))
    near = r >= 1.0
    R = np.where(near, r, 1.0)
    psi = np.where(near, (th - np.pi) / (1.0 - rho), 0.0)
    w0 = np.exp(1j * psi)
    d = 1j * np.exp(0.5j * psi)
    h = np.where(near, np.minimum(0.15, 0.35 / np.sqrt(R * (1.0 - rho))), 0.15)
    c = z * R ** (rho - 1.0)

    def logf(u):
        w = w0[:, None] + d[:, None] * u - b * u * u
        lw = np.log(w)
        return R[:, None] * (w + c[:, None] * np.exp(rho * lw)) - mu * lw

    ref = logf(np.zeros((1, 1)) + np.zeros((z.size, 1)))[:, 0].real
    U = np.full(z.size, 4.0)
    for _ in range(40):
        ends = logf(np.stack([-U, U], axis=1)).real
        bad = np.any(ends > (ref - _CONTOUR_CUT)[:, None], axis=1)
        if not bad.any():
            break
        U = np.where(bad, U * 1.3, U)
    n = int(np.ceil(np.max(2.0 * U / h))) + 1
    n += n % 2 == 0
    s = np.linspace(-1.0, 1.0, n)
    u = U[:, None] * s[None, :]
    step = 2.0 * U / (n - 1)
    f = np.exp(logf(u)) * (d[:, None] - 2.0 * b * u)
    val = R ** (1.0 - mu) * step * f.sum(axis=1) / (2j * np.pi)
    return np.where(flip, np.conj(val), val)


# ---------------------------------------------------------------------------
# public evaluator


@lru_cache(maxsize=256)
def _series_radius(lam: float, mu: float, acc: AccuracySpec) -> float:
    """Largest |z| whose series settles within ``acc.max_terms`` terms."""
    lo, hi = 0.0, 1.0
    while _terms_needed(lam, mu, hi, acc) is not None and hi < 1e6:
        lo, hi = hi, 2 * hi
    for _ in range(50):
        mid = 0.5 * (lo + hi)
        if _terms_needed(lam, mu, mid, acc) is None:
            hi = mid
        else:
            lo = mid
    return lo


def wright(lam: float, mu: float, z, acc: AccuracySpec = DEFAULT_ACCURACY):
    """Wright function phi(lam, mu; z), vectorized over ``z``.

    Terms whose Gamma argument is a pole contribute zero. Returns a complex
    scalar for scalar input and a complex array otherwise.
    """
    WrightArgs(lam, mu)
    lam, mu = float(lam), float(mu)
    scalar = np.ndim(z) == 0
    shape = np.shape(z)
    z = np.asarray(z, dtype=complex).ravel()
    out = np.empty(z.shape, dtype=complex)
    az = np.abs(z)
    ok = np.zeros(z.shape, dtype=bool)
    inside = az <= _series_radius(lam, mu, acc)
    if inside.any():
        zi = z[inside]
        nterms = _terms_needed(lam, mu, float(np.max(np.abs(zi))), acc)
        s, a = _series_double(lam, mu, zi, nterms)
        # rounding in the double series is about eps * sum|terms|
        tol = np.maximum(acc.abs_tol, acc.rel_tol * np.abs(s))
        good = (a * 64 * np.finfo(float).eps <= tol) & np.isfinite(a)
        idx = np.nonzero(inside)[0][good]
        out[idx] = s[good]
        ok[idx] = True

    rest = ~ok
    if rest.any() and -0.5 <= lam < 0:
        sect = rest & in_decay_sector(lam, z)
        if sect.any():
            out[sect] = _contour(-lam, mu, z[sect])
            rest &= ~sect
    for i in np.nonzero(rest)[0]:
        out[i] = _series_mp(lam, mu, complex(z[i]), acc)
    return out[0] if scalar else out.reshape(shape)


# ---------------------------------------------------------------------------
# decay estimate


def _nu_max(lam0: float, argz: float) -> float:
    p = 1.0 / (1.0 - lam0)
    return (1.0 - lam0) * lam0 ** (lam0 * p) * math.cos((math.pi - abs(argz)) * p)


@lru_cache(maxsize=128)
def tail_bound_constant(lam0: float, mu: float, argz: float, shrink: float = 0.9) -> float:
    """Empirical constant C of the decay estimate on the ray ``arg z = argz``.

    The estimate only asserts existence of C. Here it is calibrated as
    1.5 times the largest ratio |phi| / exp(-nu |z|**p) seen on a radial sweep
    out to |z| = 60, so the resulting bound is conservative on that sweep but
    carries no proof.
    """
    p = 1.0 / (1.0 - lam0)
    nu = shrink * _nu_max(lam0, argz)
    radii = np.linspace(0.0, 60.0, 601)
    zs = radii * np.exp(1j * argz)
    vals = np.abs(wright(-lam0, mu, zs))
    ratio = vals * np.exp(nu * radii**p)
    return 1.5 * float(np.max(ratio)) + 1e-300


def wright_tail_bound(lam: float, mu: float, z, shrink: float = 0.9) -> float:
    """Upper bound C exp(-nu |z|**(1/(1-lam0))) on |phi(lam, mu; z)|, lam = -lam0.

    ``nu`` is ``shrink`` times its admissible supremum; C comes from
    :func:`tail_bound_constant`.
    """
    lam0 = -float(lam)
    if not 0 < lam0 < 1:
        raise ValueError("the decay estimate needs lam in (-1, 0)")
    z = complex(z)
    argz = abs(math.atan2(z.imag, z.real))
    if not (1 + lam0) * math.pi / 2 < argz <= math.pi:
        raise SectorError(
            f"|arg z| = {argz:.4f} outside ({(1 + lam0) * math.pi / 2:.4f}, pi]"
        )
    p = 1.0 / (1.0 - lam0)
    nu = shrink * _nu_max(lam0, argz)
    C = tail_bound_constant(lam0, float(mu), round(argz, 12), shrink)
    return C * math.exp(-nu * abs(z) ** p)


def decay_radius(lam: float, mu: float, argz: float, level: float) -> float:
    """Radius beyond which the decay bound on the ray ``argz`` is below ``level``."""
    lam0 = -float(lam)
    p = 1.0 / (1.0 - lam0)
    nu = 0.9 * _nu_max(lam0, argz)
    C = tail_bound_constant(lam0, float(mu), round(abs(argz), 12), 0.9)
    return max(0.0, math.log(C / level) / nu) ** (1.0 / p)


def wright_integral_identity(lam: float, mu: float, a: complex = -1.0,
                             acc: AccuracySpec = DEFAULT_ACCURACY):
    """Quadrature of int_0^inf phi(-lam, mu; a z) dz next to -1 / (a Gamma(mu + lam)).

    Returns ``(numeric, analytic)``; both are real when ``a`` is real and
    complex otherwise.
    """
    from scipy import integrate

    if not 0 < lam < 1:
        raise ValueError("lam must lie in (0, 1)")
    a = complex(a)
    argz = abs(math.atan2(a.imag, a.real))
    top = decay_radius(-lam, mu, argz, 1e-16) / abs(a)
    edges = np.linspace(0.0, top, 65)
    xs, ws = np.polynomial.legendre.leggauss(40)
    total = 0j
    for lo, hi in zip(edges[:-1], edges[1:]):
        nodes = 0.5 * (hi - lo) * xs + 0.5 * (hi + lo)
        total += 0.5 * (hi - lo) * np.dot(ws, wright(-lam, mu, a * nodes, acc))
    # the panel rule is checked against an adaptive rule on a coarse cut
    check, _ = integrate.quad(lambda s: wright(-lam, mu, a * s, acc).real, 0.0, min(top, 2.0), limit=200)
    if not np.isfinite(check):
        raise ArithmeticError("quadrature of the Wright integral failed")
    analytic = -1.0 / (a * gamma_fn(mu + lam))
    if a.imag == 0:
        return float(total.real), float(analytic.real)
    return complex(total), complex(analytic)


# ---------------------------------------------------------------------------
# Mittag-Leffler


def mittag_leffler(alpha: float, beta: float, z: float,
                   acc: AccuracySpec = DEFAULT_ACCURACY) -> float:
    """E_{alpha, beta}(z) = sum z**n / Gamma(alpha n + beta) for real ``z``."""
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    z = float(z)
    if z == 0.0:
        return float(rgamma(beta))
    # double series when terms do not cancel badly
    n = np.arange(0, 4000)
    with np.errstate(all="ignore"):
        logt = n * math.log(abs(z)) - special.gammaln(alpha * n + beta)
    peak = float(np.max(logt))
    if peak > 700:
        raise MittagLefflerOverflowError(
            f"E_{{{alpha},{beta}}}({z}) exceeds the double range"
        )
    small = np.nonzero(logt > math.log(acc.abs_tol) - 10)[0]
    nterms = int(small[-1]) + 3 if small.size else 1
    if nterms >= n.size - 1:
        raise WrightConvergenceError("Mittag-Leffler series did not settle")
    arg = alpha * np.arange(nterms) + beta
    terms = z ** np.arange(nterms) * rgamma(arg)
    total = float(np.sum(terms))
    if z > 0 or np.sum(np.abs(terms)) * 64 * np.finfo(float).eps <= max(acc.abs_tol, acc.rel_tol * abs(total)):
        return total
    dps = 20 + int(peak / math.log(10))
    with mpmath.workdps(dps):
        zz = mpmath.mpf(z)
        s = mpmath.fsum(zz**k * mpmath.rgamma(alpha * k + beta) for k in range(nterms + 10))
        return float(s)
