"""Command line entry point.

    fracairy run <scenario.yaml> [--out-dir DIR] [--levels 0,1,2]
    fracairy validate <scenario.yaml>
    fracairy sweep [--seed N] [--count N]
    fracairy plot <field.csv> [--out FILE]

Exit codes: 0 success, 1 invalid scenario, 2 violated hypothesis,
3 solver failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__, cauchy, ibvp, verify
from .config import ConfigError, ScenarioConfig, load_config
from .fraccalc import TimeGrid
from .graph import random_cauchy_graph, validate

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_HYPOTHESIS = 2
EXIT_SOLVER = 3


def _dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2, allow_nan=True) + "\n"


def config_digest(cfg: ScenarioConfig) -> str:
    return hashlib.sha256(json.dumps(cfg.resolved, sort_keys=True).encode()).hexdigest()


def solve_scenario(cfg: ScenarioConfig, refine: int = 0):
    """Solve on the scenario grids refined ``refine`` times by halving."""
    n_steps = cfg.n_steps * 2**refine
    grid = TimeGrid(cfg.t_end, n_steps)
    cond = cfg.tolerances["cond_limit"]
    if cfg.problem == "cauchy":
        sol = cauchy.solve(cfg.graph, cfg.data, grid, cond_limit=cond)
    else:
        sol = ibvp.solve(cfg.graph, cfg.data, grid, cond_limit=cond)
    xs = []
    for xj in cfg.x_grids():
        n = (len(xj) - 1) * 2**refine + 1
        xs.append(np.linspace(xj[0], xj[-1], n))
    return sol, verify.sample_field(sol, xs, cfg.problem)


def residual_report(cfg: ScenarioConfig, sol, fld) -> verify.ResidualReport:
    data = cfg.data
    rep = verify.ResidualReport()
    rep.pde_residual_max = verify.pde_residual(fld, data.f)
    rep.vertex_residuals = verify.vertex_residuals(fld)
    if cfg.problem == "ibvp":
        rep.boundary_residuals = verify.boundary_residuals(fld, data.varphi, data.phi)
    rep.energy_margin, rep.energy_margin_relative = verify.energy_check(fld, data)
    mat = sol.M if cfg.problem == "cauchy" else sol.system.Q
    rep.det_margin = float(abs(np.linalg.det(_equilibrate(mat))))
    return rep


def _equilibrate(mat):
    """Scale rows to unit max norm so that det is comparable across graphs."""
    mat = np.asarray(mat, dtype=float)
    return mat / np.abs(mat).max(axis=1, keepdims=True)


def _checks(cfg, rep) -> dict:
    tol = cfg.tolerances
    out = {
        "pde": rep.pde_residual_max < tol["pde"],
        "vertex": max(rep.vertex_residuals.values(), default=0.0) < tol["vertex"],
    }
    if cfg.problem == "cauchy":
        out["energy"] = rep.energy_margin_relative >= -tol["energy_relative"]
    else:
        out["boundary"] = max(rep.boundary_residuals.values(), default=0.0) < tol["boundary"]
    return out


def write_field_csv(path: Path, cfg: ScenarioConfig, fld) -> None:
    xs, ts = cfg.output["x_stride"], cfg.output["t_stride"]
    t = fld.grid.nodes
    lines = [f"# fracairy {__version__} config-sha256 {config_digest(cfg)}", "bond_id,x,t,u"]
    for j, (xj, uj) in enumerate(zip(fld.x, fld.u)):
        xi = np.arange(0, len(xj), xs)
        if xi[-1] != len(xj) - 1:
            xi = np.append(xi, len(xj) - 1)
        ti = np.arange(0, len(t), ts)
        if ti[-1] != len(t) - 1:
            ti = np.append(ti, len(t) - 1)
        for i in xi:
            for n in ti:
                lines.append(f"{j + 1},{xj[i]:.17g},{t[n]:.17g},{uj[i, n]:.17g}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _convergence(cfg, levels):
    """Residuals per refinement level plus density self-convergence."""
    sols = {}

    def run_level(level):
        sol, fld = solve_scenario(cfg, level)
        sols[level] = sol
        rep = residual_report(cfg, sol, fld)
        res = {"pde": rep.pde_residual_max}
        res.update({f"vertex_{k}": v for k, v in rep.vertex_residuals.items()})
        res.update({f"boundary_{k}": v for k, v in rep.boundary_residuals.items()})
        return sol.grid.dt, float(fld.x[0][1] - fld.x[0][0]), res

    study = verify.convergence_study(run_level, levels)
    # successive differences of the densities on the coarsest time nodes
    dens = [sols[lv].densities.stacked() for lv in levels]
    diffs, steps = [], []
    for lv, fine, coarse in zip(levels[1:], dens[1:], dens[:-1]):
        stride = 2 ** (lv - levels[levels.index(lv) - 1])
        diffs.append(float(np.abs(fine[::stride] - coarse).max()))
        steps.append(sols[levels[levels.index(lv) - 1]].grid.dt)
    study["density_differences"] = diffs
    study["density_order"] = verify.fit_order(steps, diffs) if len(diffs) >= 2 else None
    return study


def cmd_validate(args) -> int:
    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        for msg in exc.errors:
            print(f"error: {msg}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    rep = validate(cfg.graph, cfg.data, cfg.problem, cfg.tolerances["compat"],
                   cfg.tolerances["compat_severity"])
    for msg in rep.warnings:
        print(f"warning: {msg}", file=sys.stderr)
    for msg in rep.errors:
        print(f"error: {msg}", file=sys.stderr)
    for msg in rep.hypothesis:
        print(f"hypothesis violated: {msg}", file=sys.stderr)
    if rep.errors:
        return EXIT_CONFIG
    if rep.hypothesis:
        return EXIT_HYPOTHESIS
    print(f"ok: {cfg.problem} scenario, B^T B - I is {rep.definiteness} definite")
    return EXIT_OK


def cmd_run(args) -> int:
    code = cmd_validate(args)
    if code != EXIT_OK:
        return code
    cfg = load_config(args.config)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    timings = {}
    try:
        t0 = time.perf_counter()
        sol, fld = solve_scenario(cfg)
        timings["solve_and_sample"] = time.perf_counter() - t0
        t0 = time.perf_counter()
        rep = residual_report(cfg, sol, fld)
        timings["residuals"] = time.perf_counter() - t0
        study = None
        if args.levels:
            t0 = time.perf_counter()
            study = _convergence(cfg, args.levels)
            timings["convergence"] = time.perf_counter() - t0
    except cauchy.SolverError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    vrep = validate(cfg.graph, cfg.data, cfg.problem, cfg.tolerances["compat"],
                    cfg.tolerances["compat_severity"])
    mat = sol.M if cfg.problem == "cauchy" else sol.system.Q
    summary = {
        "checks": _checks(cfg, rep),
        "config": cfg.resolved,
        "config_sha256": config_digest(cfg),
        "convergence": study,
        "determinant": {
            "det": float(np.linalg.det(mat)),
            "det_equilibrated": rep.det_margin,
            "cond": float(np.linalg.cond(mat)),
        },
        "report": rep.as_dict(),
        "validation": vrep.as_dict(),
        "version": __version__,
    }
    write_field_csv(out / cfg.output["field_csv"], cfg, fld)
    (out / cfg.output["summary"]).write_text(_dumps(summary), encoding="utf-8")
    # wall-clock times vary between runs, so they live apart from the summary
    (out / "timings.json").write_text(_dumps({"seconds": timings, "version": __version__}),
                                      encoding="utf-8")
    failed = sorted(k for k, ok in summary["checks"].items() if not ok)
    status = "all checks passed" if not failed else "failed checks: " + ", ".join(failed)
    print(f"wrote {out / cfg.output['field_csv']} and {out / cfg.output['summary']}; {status}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    rng = np.random.default_rng(args.seed)
    dets = []
    for _ in range(args.count):
        g = random_cauchy_graph(rng)
        dets.append(abs(np.linalg.det(_equilibrate(cauchy.assemble_M(g, "derived")))))
    result = {"count": args.count, "min_abs_det_equilibrated": float(min(dets)), "seed": args.seed}
    print(_dumps(result), end="")
    return EXIT_OK if min(dets) > 1e-8 else EXIT_SOLVER


def cmd_plot(args) -> int:
    try:
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError:
        print("error: plotting needs matplotlib (pip install fracairy[plot])", file=sys.stderr)
        return EXIT_CONFIG
    rows = np.loadtxt(args.field, delimiter=",", comments="#", skiprows=2, ndmin=2)
    times = np.unique(rows[:, 2])
    pick = times[np.linspace(0, len(times) - 1, min(5, len(times))).astype(int)]
    fig, ax = plt.subplots(figsize=(8, 4))
    for tv in pick:
        for b in np.unique(rows[:, 0]):
            sel = (rows[:, 0] == b) & (rows[:, 2] == tv)
            ax.plot(rows[sel, 1], rows[sel, 3], color=plt.cm.viridis(tv / max(times[-1], 1e-300)),
                    label=f"t = {tv:.3g}" if b == 1 else None)
    ax.set_xlabel("x (bond coordinate)")
    ax.set_ylabel("u")
    ax.legend()
    out = args.out or str(Path(args.field).with_suffix(".png"))
    fig.savefig(out, dpi=120, bbox_inches="tight")
    print(f"wrote {out}")
    return EXIT_OK


def _levels(text):
    try:
        vals = [int(v) for v in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError("levels are comma-separated integers") from None
    if len(vals) < 3 or vals != sorted(set(vals)) or vals[0] < 0:
        raise argparse.ArgumentTypeError("need at least 3 increasing nonnegative levels")
    return vals


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fracairy", description=__doc__.split("\n")[0] if __doc__ else None)
    p.add_argument("--version", action="version", version=f"fracairy {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="solve a scenario and write the field and summary")
    r.add_argument("config")
    r.add_argument("--out-dir", default="out")
    r.add_argument("--levels", type=_levels, default=None,
                   help="refinement levels for a convergence study, e.g. 0,1,2")
    r.set_defaults(func=cmd_run)
    v = sub.add_parser("validate", help="check a scenario without solving")
    v.add_argument("config")
    v.set_defaults(func=cmd_validate)
    s = sub.add_parser("sweep", help="vertex-matrix determinants of random Cauchy graphs")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--count", type=int, default=100)
    s.set_defaults(func=cmd_sweep)
    pl = sub.add_parser("plot", help="plot a field CSV (needs matplotlib)")
    pl.add_argument("field")
    pl.add_argument("--out", default=None)
    pl.set_defaults(func=cmd_plot)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
