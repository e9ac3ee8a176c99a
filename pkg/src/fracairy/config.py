"""Scenario files: YAML parsing, validation and the resolved configuration.

A scenario is a YAML mapping::

    problem: cauchy            # or ibvp
    alpha: 0.5
    graph:
      k: 1
      m: 1
      a: [1, 1]
      B: [2.0]                 # row-major, m x k entries (nested rows also accepted)
      lengths: [-1, 1]         # ibvp only
    grids:
      t_end: 1.0
      n_steps: 128
      n_x: 601                 # one value for all bonds or one per bond
      radius: 60               # cauchy only: bonds are cut at |x| = radius
    data:
      u0: [{bump: {support: [-33, -3]}}, zero]
      f: [zero, {space: {gaussian: {center: 0.5, width: 0.2}}, time: {power: {power: 2}}}]
      varphi: [{power: {power: 2}}, zero]   # ibvp only, one per bond
      phi: [zero]                           # ibvp only, one per incoming bond
    tolerances: {...}          # optional, see DEFAULT_TOLERANCES
    output: {...}              # optional, see DEFAULT_OUTPUT

Every diagnostic names the offending field and the line it was found on (or
the line of the enclosing block when the field is missing).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import yaml

from .fraccalc import TimeGrid
from .graph import ProblemData, StarGraph
from .presets import source_profile, space_profile, time_profile

__all__ = [
    "DEFAULT_OUTPUT",
    "DEFAULT_TOLERANCES",
    "ConfigError",
    "ScenarioConfig",
    "load_config",
    "validate_config",
]

DEFAULT_TOLERANCES = {
    "boundary": 5e-3,
    "compat": 1e-8,
    "compat_severity": "warning",
    "cond_limit": 1e12,
    "energy_relative": 0.05,
    "pde": 5e-3,
    "vertex": 1e-3,
}
DEFAULT_OUTPUT = {
    "field_csv": "field.csv",
    "summary": "summary.json",
    "t_stride": 1,
    "x_stride": 1,
}
MIN_NX = 13
_TOP_KEYS = {"problem", "alpha", "graph", "grids", "data", "tolerances", "output"}


class ConfigError(ValueError):
    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("\n".join(self.errors))


@dataclass(frozen=True)
class ScenarioConfig:
    problem: str
    graph: StarGraph
    data: ProblemData
    t_end: float
    n_steps: int
    n_x: tuple
    radius: float | None
    tolerances: dict
    output: dict
    resolved: dict = field(default_factory=dict)

    @property
    def alpha(self) -> float:
        return self.data.alpha

    def time_grid(self) -> TimeGrid:
        return TimeGrid(self.t_end, self.n_steps)

    def x_grids(self) -> list:
        """Uniform per-bond grids from the far end to the vertex or back."""
        grids = []
        for j in range(self.graph.n_bonds):
            if self.graph.is_finite:
                far = self.graph.lengths[j]
            else:
                far = -self.radius if self.graph.incoming(j) else self.radius
            lo, hi = (far, 0.0) if self.graph.incoming(j) else (0.0, far)
            grids.append(np.linspace(lo, hi, self.n_x[j]))
        return grids


class _Locator:
    """Line numbers of YAML nodes by key path."""

    def __init__(self, root):
        self.root = root

    def line(self, *path) -> int:
        node = self.root
        for key in path:
            nxt = None
            if isinstance(node, yaml.MappingNode):
                for k, v in node.value:
                    if k.value == key:
                        nxt = v
                        break
            elif isinstance(node, yaml.SequenceNode) and isinstance(key, int) and key < len(node.value):
                nxt = node.value[key]
            if nxt is None:
                break
            node = nxt
        return node.start_mark.line + 1 if node is not None else 1


def _dotted(path) -> str:
    out = ""
    for p in path:
        out += f"[{p}]" if isinstance(p, int) else (f".{p}" if out else str(p))
    return out


class _Checker:
    def __init__(self, raw, locator):
        self.raw = raw
        self.loc = locator
        self.errors = []

    def error(self, path, msg):
        self.errors.append(f"line {self.loc.line(*path)}: {_dotted(path)}: {msg}")

    def get(self, path, required=True):
        node = self.raw
        for p in path:
            if isinstance(node, dict) and p in node:
                node = node[p]
            elif isinstance(node, list) and isinstance(p, int) and p < len(node):
                node = node[p]
            else:
                if required:
                    self.error(path, "missing required field")
                return None
        return node

    def number(self, path, required=True, integer=False):
        v = self.get(path, required)
        if v is None:
            return None
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            self.error(path, f"expected a number, got {v!r}")
            return None
        if integer:
            if int(v) != v:
                self.error(path, f"expected an integer, got {v!r}")
                return None
            return int(v)
        if not math.isfinite(v):
            self.error(path, "must be finite")
            return None
        return float(v)

    def number_list(self, path, required=True):
        v = self.get(path, required)
        if v is None:
            return None
        if isinstance(v, (int, float)) and not isinstance(v, bool):
            v = [v]
        if not isinstance(v, list):
            self.error(path, "expected a list of numbers")
            return None
        flat = []
        for i, item in enumerate(v):
            if isinstance(item, list):
                for jj, sub in enumerate(item):
                    x = self.number(path + (i, jj))
                    flat.append(x)
            else:
                flat.append(self.number(path + (i,)))
        if any(x is None for x in flat):
            return None
        return flat


def _profiles(chk, path, count, build, what):
    raw = chk.get(path, required=False)
    if raw is None or raw == "zero":
        return [build("zero") for _ in range(count)]
    if not isinstance(raw, list):
        chk.error(path, f"expected a list of {count} {what} entries or 'zero'")
        return None
    if len(raw) != count:
        chk.error(path, f"expected {count} entries, got {len(raw)}")
        return None
    out = []
    for i, spec in enumerate(raw):
        try:
            out.append(build(spec))
        except (ValueError, KeyError, TypeError) as exc:
            chk.error(path + (i,), f"invalid {what}: {exc}")
            out.append(None)
    return None if any(o is None for o in out) else out


def validate_config(text: str):
    """Parse scenario text; return a ScenarioConfig or the list of all errors."""
    try:
        root = yaml.compose(text)
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        line = mark.line + 1 if mark is not None else 1
        return [f"line {line}: invalid YAML: {getattr(exc, 'problem', exc)}"]
    if not isinstance(raw, dict):
        return ["line 1: the scenario must be a mapping"]
    chk = _Checker(raw, _Locator(root))
    for key in sorted(set(raw) - _TOP_KEYS):
        chk.error((key,), "unknown field")

    problem = chk.get(("problem",))
    if problem is not None and problem not in ("cauchy", "ibvp"):
        chk.error(("problem",), f"must be 'cauchy' or 'ibvp', got {problem!r}")
        problem = None
    alpha = chk.number(("alpha",))
    if alpha is not None and not 0 < alpha < 1:
        chk.error(("alpha",), f"alpha = {alpha} out of range, (0,1) required")
        alpha = None

    k = chk.number(("graph", "k"), integer=True)
    m = chk.number(("graph", "m"), integer=True)
    for name, v in (("k", k), ("m", m)):
        if v is not None and v < 1:
            chk.error(("graph", name), "must be at least 1")
    if k is not None and k < 1:
        k = None
    if m is not None and m < 1:
        m = None
    a = chk.number_list(("graph", "a"))
    B = chk.number_list(("graph", "B"))
    lengths = chk.number_list(("graph", "lengths"), required=False)
    graph = None
    if k is not None and m is not None:
        if a is not None and len(a) != k + m:
            chk.error(("graph", "a"), f"needs k+m = {k + m} entries, got {len(a)}")
            a = None
        if B is not None and len(B) != m * k:
            chk.error(("graph", "B"), f"B must be m x k = {m} x {k} ({m * k} entries), got {len(B)}")
            B = None
        if lengths is not None and len(lengths) != k + m:
            chk.error(("graph", "lengths"), f"needs k+m = {k + m} entries, got {len(lengths)}")
            lengths = None
        if problem == "cauchy" and chk.get(("graph", "lengths"), required=False) is not None:
            chk.error(("graph", "lengths"), "cauchy bonds are semi-infinite; remove lengths")
        if problem == "ibvp" and lengths is None and chk.get(("graph", "lengths"), required=False) is None:
            chk.error(("graph", "lengths"), "missing required field (ibvp needs bond lengths)")
        if a is not None and B is not None:
            use_len = lengths if problem == "ibvp" else None
            if problem != "ibvp" or use_len is not None:
                graph = StarGraph(k, m, tuple(a), tuple(B), None if use_len is None else tuple(use_len))
                for msg in graph.structural_errors():
                    chk.error(("graph",), msg)

    t_end = chk.number(("grids", "t_end"))
    if t_end is not None and not t_end > 0:
        chk.error(("grids", "t_end"), "must be positive")
    n_steps = chk.number(("grids", "n_steps"), integer=True)
    if n_steps is not None and n_steps < 4:
        chk.error(("grids", "n_steps"), "must be at least 4")
    n_x = chk.get(("grids", "n_x"))
    nxs = None
    if n_x is not None and k is not None and m is not None:
        vals = n_x if isinstance(n_x, list) else [n_x] * (k + m)
        if len(vals) != k + m:
            chk.error(("grids", "n_x"), f"needs one value or k+m = {k + m} values")
        else:
            nxs = []
            for i, v in enumerate(vals):
                ok = isinstance(v, int) and not isinstance(v, bool) and v >= MIN_NX
                if not ok:
                    where = ("grids", "n_x", i) if isinstance(n_x, list) else ("grids", "n_x")
                    chk.error(where, f"each bond needs an integer of at least {MIN_NX} points, got {v!r}")
                nxs.append(v)
    radius = chk.number(("grids", "radius"), required=False)
    if problem == "cauchy":
        if radius is None and chk.get(("grids", "radius"), required=False) is None:
            radius = _default_radius(raw)
        elif radius is not None and not radius > 0:
            chk.error(("grids", "radius"), "must be positive")
    elif problem == "ibvp" and chk.get(("grids", "radius"), required=False) is not None:
        chk.error(("grids", "radius"), "only cauchy scenarios take a truncation radius")

    data = None
    if k is not None and m is not None:
        n = k + m
        u0 = _profiles(chk, ("data", "u0"), n, space_profile, "space profile")
        f = _profiles(chk, ("data", "f"), n, source_profile, "source")
        varphi = phi = ()
        if problem == "ibvp":
            varphi = _profiles(chk, ("data", "varphi"), n, time_profile, "time profile")
            phi = _profiles(chk, ("data", "phi"), k, time_profile, "time profile")
        else:
            for name in ("varphi", "phi"):
                if chk.get(("data", name), required=False) is not None:
                    chk.error(("data", name), "boundary data only apply to ibvp")
        if alpha is not None and None not in (u0, f, varphi, phi):
            data = ProblemData(alpha, tuple(u0), tuple(f), tuple(varphi or ()), tuple(phi or ()))

    tolerances = dict(DEFAULT_TOLERANCES)
    for key, val in (chk.get(("tolerances",), required=False) or {}).items():
        if key not in DEFAULT_TOLERANCES:
            chk.error(("tolerances", key), "unknown tolerance")
        elif key == "compat_severity":
            if val not in ("warning", "error"):
                chk.error(("tolerances", key), "must be 'warning' or 'error'")
            tolerances[key] = val
        else:
            v = chk.number(("tolerances", key))
            if v is not None and not v > 0:
                chk.error(("tolerances", key), "must be positive")
            tolerances[key] = v
    output = dict(DEFAULT_OUTPUT)
    for key, val in (chk.get(("output",), required=False) or {}).items():
        if key not in DEFAULT_OUTPUT:
            chk.error(("output", key), "unknown output option")
        elif key.endswith("_stride"):
            v = chk.number(("output", key), integer=True)
            if v is not None and v < 1:
                chk.error(("output", key), "must be at least 1")
            output[key] = v
        elif not isinstance(val, str) or not val or "/" in val:
            chk.error(("output", key), "must be a plain file name")
        else:
            output[key] = val

    if chk.errors:
        return chk.errors
    resolved = {
        "alpha": alpha,
        "data": {key: raw.get("data", {}).get(key, "zero") for key in
                 (("u0", "f", "varphi", "phi") if problem == "ibvp" else ("u0", "f"))},
        "graph": {"B": B, "a": a, "k": k, "m": m,
                  **({"lengths": lengths} if problem == "ibvp" else {})},
        "grids": {"n_steps": n_steps, "n_x": nxs, "t_end": t_end,
                  **({"radius": radius} if problem == "cauchy" else {})},
        "output": output,
        "problem": problem,
        "tolerances": tolerances,
    }
    return ScenarioConfig(problem, graph, data, t_end, n_steps, tuple(nxs),
                          radius if problem == "cauchy" else None, tolerances, output, resolved)


def _default_radius(raw) -> float:
    """Twice the farthest data feature from the vertex, at least 20."""
    reach = 10.0
    data = raw.get("data") if isinstance(raw.get("data"), dict) else {}
    for key in ("u0", "f"):
        specs = data.get(key)
        if not isinstance(specs, list):
            continue
        for spec in specs:
            try:
                prof = space_profile(spec) if key == "u0" else source_profile(spec).space
            except (ValueError, KeyError, TypeError):
                continue
            if not prof.is_zero:
                reach = max(reach, *(abs(v) for v in prof.support))
    return float(2 * reach)


def load_config(path) -> ScenarioConfig:
    with open(path, encoding="utf-8") as fh:
        out = validate_config(fh.read())
    if isinstance(out, list):
        raise ConfigError(out)
    return out
