import math

import numpy as np
import pytest

from fracairy import cauchy, verify
from fracairy.fraccalc import TimeGrid, TraceGrid
from fracairy.graph import ProblemData, StarGraph, random_cauchy_graph
from fracairy.presets import Bump, Zero, ZeroSource

SQ3 = math.sqrt(3.0)


@pytest.fixture(scope="module")
def reference():
    g = StarGraph(1, 1, (1, 1), (2.0,))
    data = ProblemData(0.5, (Bump(-4.0, -0.5), Zero()), (ZeroSource(), ZeroSource()))
    sol = cauchy.solve(g, data, TimeGrid(0.5, 32))
    xs = [np.linspace(-6, 0, 121), np.linspace(0, 6, 121)]
    return g, data, sol, verify.sample_field(sol, xs, "cauchy")


def test_reference_determinants():
    g = StarGraph(1, 1, (1, 1), (2.0,))
    assert np.linalg.det(cauchy.assemble_M(g, "printed")) == pytest.approx(SQ3, abs=1e-12)
    assert np.linalg.det(cauchy.assemble_M(g, "derived")) == pytest.approx(-4 * SQ3, abs=1e-12)
    with pytest.raises(ValueError):
        cauchy.assemble_M(g, "other")


def test_matrix_shape_for_larger_graphs(rng):
    g = random_cauchy_graph(rng)
    M = cauchy.assemble_M(g)
    assert M.shape == (g.k + 2 * g.m, g.k + 2 * g.m)


def test_zero_data_give_zero_densities():
    g = StarGraph(1, 2, (1, 1, -2), (2.0, 1.5))
    grid = TimeGrid(1.0, 8)
    sol = cauchy.solve(g, ProblemData.zero(g, 0.4), grid)
    assert np.all(sol.densities.stacked() == 0)


def test_singular_matrix_is_a_solver_error():
    g = StarGraph(1, 1, (1, 1), (2.0,))
    h = TraceGrid(TimeGrid(1.0, 4), np.ones((5, 3)))
    with pytest.raises(cauchy.SolverError):
        cauchy.solve_densities(np.zeros((3, 3)), h, g)
    with pytest.raises(cauchy.SolverError):
        cauchy.solve_densities(np.diag([1.0, 1.0, 1e-14]), h, g)


def test_h_needs_matching_grid(reference):
    g, data, sol, _ = reference
    with pytest.raises(ValueError):
        cauchy.assemble_h(g, sol.traces, 0.5, TimeGrid(0.5, 16))


def test_vertex_conditions_hold(reference):
    _, _, _, fld = reference
    res = verify.vertex_residuals(fld)
    assert res["continuity"] < 1e-12
    assert res["derivative"] < 1e-6
    assert res["flux"] < 1e-4


def test_densities_satisfy_the_vertex_system(reference):
    _, _, sol, _ = reference
    phi = sol.densities.stacked()
    assert np.abs(phi @ sol.M.T - sol.h.values).max() < 1e-12


def test_printed_sign_breaks_continuity(reference):
    g, data, sol, _ = reference
    M = cauchy.assemble_M(g, "printed")
    dens = cauchy.solve_densities(M, sol.h, g)
    other = cauchy.CauchySolution(g, data, sol.grid, M, sol.traces, sol.h, dens)
    fld = verify.sample_field(other, [np.linspace(-6, 0, 121), np.linspace(0, 6, 121)], "cauchy")
    assert verify.vertex_residuals(fld)["continuity"] > 1e-3


def test_energy_bound_holds(reference):
    _, data, _, fld = reference
    margin, rel = verify.energy_check(fld, data)
    assert rel >= -1e-12


def test_point_evaluation_matches_field(reference):
    g, data, sol, fld = reference
    val = cauchy.eval_solution(g, data, sol.densities, 1, 0.5, 0.5)
    assert val == pytest.approx(float(sol.bond_field(1, [0.5])[0, -1]), rel=1e-13)
    with pytest.raises(ValueError):
        cauchy.eval_solution(g, data, sol.densities, 1, 0.5, 0.51)
    with pytest.raises(ValueError):
        sol.bond_field(0, [0.5])


def test_density_accessors(reference):
    g, _, sol, _ = reference
    assert sol.densities.phi(g, 0).values.shape == (33,)
    with pytest.raises(ValueError):
        sol.densities.psi(g, 0)
