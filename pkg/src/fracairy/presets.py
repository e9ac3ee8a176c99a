"""Closed-form data functions used by the scenario files.

Each space profile knows its derivatives, an interval outside of which it is
negligible (``support``) and the length scale of its features, which sets the
quadrature panel width of the potentials.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "Bump",
    "Gaussian",
    "PowerTime",
    "SeparableSource",
    "Zero",
    "ZeroSource",
    "source_profile",
    "space_profile",
    "time_profile",
]

_NEGLIGIBLE = 1e-18


@dataclass(frozen=True)
class Zero:
    """The zero function."""

    def __call__(self, x, r: int = 0):
        return np.zeros(np.shape(x))

    support = (0.0, 0.0)
    feature_length = math.inf
    is_zero = True


@dataclass(frozen=True)
class Gaussian:
    """amp * exp(-((x - center) / width)**2)."""

    center: float
    width: float
    amp: float = 1.0
    is_zero = False

    def __post_init__(self):
        if not self.width > 0:
            raise ValueError("gaussian width must be positive")

    def __call__(self, x, r: int = 0):
        s = (np.asarray(x, dtype=float) - self.center) / self.width
        e = self.amp * np.exp(-s * s)
        if r == 0:
            return e
        # derivatives through the physicists' Hermite polynomials
        h = np.polynomial.hermite.hermval(s, [0] * r + [1])
        return (-1) ** r * h * e / self.width**r

    @property
    def support(self):
        reach = self.width * math.sqrt(math.log(max(abs(self.amp), 1e-300) / _NEGLIGIBLE) + 40.0)
        return (self.center - reach, self.center + reach)

    @property
    def feature_length(self):
        return self.width


@dataclass(frozen=True)
class Bump:
    """Smooth compactly supported bump exp(1 - 1/(1 - s**2)), s the scaled offset."""

    lo: float
    hi: float
    amp: float = 1.0
    is_zero = False

    def __post_init__(self):
        if not self.hi > self.lo:
            raise ValueError("bump support must have lo < hi")

    def __call__(self, x, r: int = 0):
        x = np.asarray(x, dtype=float)
        c = 0.5 * (self.lo + self.hi)
        w = 0.5 * (self.hi - self.lo)
        s = (x - c) / w
        inside = np.abs(s) < 1
        out = np.zeros(x.shape)
        si = s[inside]
        q = 1.0 - si * si
        e = np.exp(1.0 - 1.0 / q)
        if r == 0:
            val = e
        else:
            val = _bump_derivative(si, q, r) * e
        out[inside] = self.amp * val / w**r
        return out

    @property
    def support(self):
        return (self.lo, self.hi)

    @property
    def feature_length(self):
        return 0.25 * (self.hi - self.lo)


def _bump_derivative(s, q, r):
    """Ratio d^r/ds^r exp(-1/q) / exp(-1/q) with q = 1 - s**2.

    Writing the ratio as N_r(s) / q**(2r), the product rule gives
    N_{r+1} = N_r' q**2 + 4 r s q N_r - 2 s N_r.
    """
    P = np.polynomial.Polynomial
    qpoly = P([1.0, 0.0, -1.0])
    spoly = P([0.0, 1.0])
    num = P([1.0])
    for k in range(r):
        num = num.deriv() * qpoly**2 + 4 * k * spoly * qpoly * num - 2 * spoly * num
    return num(s) / q ** (2 * r)


def space_profile(spec) -> object:
    """Build a space profile from a config entry."""
    if spec in (None, "zero", 0):
        return Zero()
    if isinstance(spec, dict) and len(spec) == 1:
        (name, args), = spec.items()
        if name == "gaussian":
            return Gaussian(float(args["center"]), float(args["width"]), float(args.get("amp", 1.0)))
        if name == "bump":
            lo, hi = args["support"]
            return Bump(float(lo), float(hi), float(args.get("amp", 1.0)))
    raise ValueError(f"unknown space profile {spec!r}")


@dataclass(frozen=True)
class PowerTime:
    """amp * t**power, power >= 0."""

    power: float
    amp: float = 1.0

    def __call__(self, t):
        return self.amp * np.asarray(t, dtype=float) ** self.power


def time_profile(spec):
    """Build a time profile from a config entry."""
    if spec in (None, "zero", 0):
        return PowerTime(0.0, 0.0)
    if isinstance(spec, dict) and len(spec) == 1:
        (name, args), = spec.items()
        if name == "power":
            p = float(args["power"])
            if p < 0:
                raise ValueError("time power must be nonnegative")
            return PowerTime(p, float(args.get("amp", 1.0)))
    raise ValueError(f"unknown time profile {spec!r}")


@dataclass(frozen=True)
class ZeroSource:
    is_zero = True

    def __call__(self, x, t):
        return np.zeros(np.broadcast(np.asarray(x), np.asarray(t)).shape)

    space = Zero()


@dataclass(frozen=True)
class SeparableSource:
    """f(x, t) = space(x) * time(t)."""

    space: object
    time: PowerTime
    is_zero = False

    def __call__(self, x, t):
        return self.space(x) * self.time(t)


def source_profile(spec):
    """Build a space-time source from ``zero`` or ``{space: ..., time: ...}``."""
    if spec in (None, "zero", 0):
        return ZeroSource()
    if isinstance(spec, dict) and set(spec) == {"space", "time"}:
        space = space_profile(spec["space"])
        if space.is_zero:
            return ZeroSource()
        return SeparableSource(space, time_profile(spec["time"]))
    raise ValueError(f"unknown source {spec!r}")
