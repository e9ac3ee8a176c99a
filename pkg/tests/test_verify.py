import math

import numpy as np
import pytest

from fracairy import verify
from fracairy.fraccalc import TimeGrid
from fracairy.graph import ProblemData, StarGraph
from fracairy.presets import PowerTime, Zero, ZeroSource


def make_field(fn, graph, grids, grid, alpha=0.5):
    t = grid.nodes
    u = tuple(fn(j, xj[:, None], t[None, :]) * np.ones((len(xj), len(t))) for j, xj in enumerate(grids))
    return verify.SolutionField(graph, alpha, grid, tuple(grids), u, "test")


def test_field_shape_checks():
    grid = TimeGrid(1.0, 4)
    with pytest.raises(ValueError):
        verify.SolutionField(None, 0.5, grid, (np.zeros(3),), (np.zeros((3, 4)),))
    with pytest.raises(ValueError):
        verify.SolutionField(None, 0.5, grid, (np.zeros(3),), (np.full((3, 5), np.inf),))


@pytest.mark.parametrize("order", [1, 2])
def test_one_sided_derivative_exact_on_polynomials(order):
    x = np.linspace(-1, 0, 21)
    u = 2 * x**5 - x**3 + 4 * x
    d = {1: 10 * x**4 - 3 * x**2 + 4, 2: 40 * x**3 - 6 * x}[order]
    assert verify.one_sided_derivative(x, u, "end", order) == pytest.approx(d[-1], abs=1e-9)
    assert verify.one_sided_derivative(x, u, "start", order) == pytest.approx(d[0], abs=1e-8)
    with pytest.raises(ValueError):
        verify.one_sided_derivative(x, u, "middle", order)


def test_pde_residual_of_a_manufactured_solution():
    # u = t^2 + x^3 solves D^a u - u_xxx = f with f = 2 t^(2-a) / Gamma(3-a) - 6
    a = 0.5
    grid = TimeGrid(1.0, 256)
    x = np.linspace(-1, 1, 41)
    fld = make_field(lambda j, xx, tt: tt**2 + xx**3, None, [x], grid, a)
    f = [lambda xx, tt: 2 * tt ** (2 - a) / math.gamma(3 - a) - 6 + 0 * xx]
    assert verify.pde_residual(fld, f) < 1e-3
    assert verify.pde_residual(fld, None) > 5.0


def test_pde_residual_needs_uniform_grids():
    grid = TimeGrid(1.0, 16)
    x = np.sort(np.concatenate([np.linspace(0, 1, 20), [0.013]]))
    fld = make_field(lambda j, xx, tt: xx + tt, None, [x], grid)
    with pytest.raises(ValueError):
        verify.pde_residual(fld)


def test_vertex_residuals_detect_a_kink():
    g = StarGraph(1, 1, (1, 1), (2.0,))
    grid = TimeGrid(1.0, 4)
    grids = [np.linspace(-1, 0, 21), np.linspace(0, 1, 21)]
    # u = x on the left, 2x on the right satisfies continuity and u^+' = 2 u^-'
    fld = make_field(lambda j, xx, tt: (1.0 if j == 0 else 2.0) * xx, g, grids, grid)
    res = verify.vertex_residuals(fld)
    assert max(res.values()) < 1e-10
    fld = make_field(lambda j, xx, tt: xx + (0.1 if j else 0.0), g, grids, grid)
    res = verify.vertex_residuals(fld)
    assert res["continuity"] == pytest.approx(0.1)
    assert res["derivative"] == pytest.approx(1.0)


def test_boundary_residuals():
    g = StarGraph(1, 1, (1, 1), (0.5,), lengths=(-1, 1))
    grid = TimeGrid(1.0, 4)
    grids = [np.linspace(-1, 0, 21), np.linspace(0, 1, 21)]
    fld = make_field(lambda j, xx, tt: tt * (xx + 1) if j == 0 else 0 * xx, g, grids, grid)
    varphi = (PowerTime(0.0, 0.0), PowerTime(0.0, 0.0))
    phi = (PowerTime(1.0),)
    res = verify.boundary_residuals(fld, varphi, phi)
    assert res["value"] < 1e-14 and res["slope"] < 1e-10


def test_energy_check_sign():
    g = StarGraph(1, 1, (1, 1), (2.0,))
    grid = TimeGrid(1.0, 8)
    grids = [np.linspace(-3, 0, 31), np.linspace(0, 3, 31)]
    data = ProblemData(0.5, (Zero(), Zero()), (ZeroSource(), ZeroSource()))
    quiet = make_field(lambda j, xx, tt: 0 * xx * tt, g, grids, grid)
    loud = make_field(lambda j, xx, tt: tt + 0 * xx, g, grids, grid)
    assert verify.energy_check(quiet, data) == (0.0, 0.0)
    margin, rel = verify.energy_check(loud, data)
    assert margin == pytest.approx(-6.0) and rel == -math.inf


def test_fit_order():
    steps = [0.1, 0.05, 0.025]
    assert verify.fit_order(steps, [s**2 for s in steps]) == pytest.approx(2.0)
    assert verify.fit_order(steps, [0.0, 0.0, 0.0]) == math.inf


def test_convergence_study_flags_non_monotone():
    def run(level):
        h = 2.0**-level
        return h, h, {"clean": h**2, "noisy": [1.0, 2.0, 0.5][level]}

    out = verify.convergence_study(run, [0, 1, 2])
    assert out["orders"]["clean"] == pytest.approx(2.0)
    assert out["non_monotone"] == ["noisy"]
    with pytest.raises(ValueError):
        verify.convergence_study(run, [0, 1])
