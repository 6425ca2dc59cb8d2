import math

import numpy as np
import pytest

from src.distributions import DeterministicPermuted, DirichletSymmetric, UniformSpacings, constants
from src.renewal import (
    GeneralRenewalProblem,
    Grid,
    GridError,
    LatticeError,
    dump_grid,
    expected_heavy_count,
    predicted_W_limit,
    solve_general,
    solve_split_renewal,
)
from tests.oracles import bst_renewal_U, bst_renewal_U_hat, bst_W

BST = DirichletSymmetric(1.0, 2)


def exp_cdf(t):
    return 1.0 - np.exp(-np.asarray(t, dtype=float))


@pytest.fixture(scope="module")
def bst_solution():
    return solve_split_renewal(BST, Grid(1e-2, 10.0))


def test_bst_tilted_renewal_function(bst_solution):
    t = bst_solution.U_hat.t
    assert np.max(np.abs(bst_solution.U_hat.values - bst_renewal_U_hat(t))) <= 0.01
    assert bst_solution.mu_used == pytest.approx(0.5)


def test_bst_renewal_function_relative_error(bst_solution):
    for x in (0.5, 2.0, 5.0, 9.0):
        assert bst_solution.U.at(x) == pytest.approx(float(bst_renewal_U(x)), rel=0.01)


def test_bst_W_converges(bst_solution):
    w = bst_solution.W
    assert w.values[0] == 0.0
    assert w.at(3.0) == pytest.approx(float(bst_W(3.0)), abs=0.02)
    assert w.values[-1] == pytest.approx(-2.0, abs=0.02)
    assert bst_solution.diagnostics["W_limit_predicted"] == pytest.approx(-2.0)


def test_diagnostics(bst_solution):
    d = bst_solution.diagnostics
    assert d["omega_mass"] == pytest.approx(1.0, abs=1e-3)
    assert abs(d["tail_slope_U_hat"]) < 1e-3
    assert d["U_hat_defect"] < 0.01


def test_expected_heavy_count_bst():
    sol = solve_split_renewal(BST, Grid(1e-3, 6.0))
    assert expected_heavy_count(sol, 1e4, 100) == pytest.approx(199.0, rel=1e-3)
    assert expected_heavy_count(sol, 100, 100) == pytest.approx(1.0)


def test_expected_heavy_count_bounds(bst_solution):
    with pytest.raises(GridError):
        expected_heavy_count(bst_solution, 10, 11)
    with pytest.raises(GridError):
        expected_heavy_count(bst_solution, 1e6, 0.5)
    # ln(1e9) liegt hinter t_max = 10
    with pytest.raises(GridError):
        expected_heavy_count(bst_solution, 1e9, 1)


def test_spacings_limit_matches_constants():
    source = UniformSpacings(3)
    sol = solve_split_renewal(source, Grid(1e-2, 12.0))
    assert sol.U_hat.values[-1] == pytest.approx(1 / constants(source).mu, abs=0.01)


def test_lattice_source_is_refused():
    with pytest.raises(LatticeError, match="lattice_suspect"):
        solve_split_renewal(DeterministicPermuted((0.5, 0.5)), Grid(1e-2, 5.0))


def test_predicted_W_limit():
    assert predicted_W_limit(constants(BST)) == pytest.approx(-2.0)
    # sigma^2 = 0, mu = ln 2
    uniform = constants(DeterministicPermuted((0.5, 0.5)))
    assert predicted_W_limit(uniform) == pytest.approx(-0.5 - 1 / math.log(2))


@pytest.mark.parametrize("h,t_max", [(0.0, 1.0), (-1e-3, 1.0), (1e-2, 0.0), (0.3, 1.0)])
def test_invalid_grids(h, t_max):
    with pytest.raises(GridError):
        Grid(h, t_max)


def test_grid_lookup():
    g = Grid(0.5, 2.0).with_values(np.array([0.0, 1.0, 2.0, 3.0, 4.0]))
    assert g.size == 5
    assert g.at(0.75) == pytest.approx(1.5)
    assert g.at(2.0) == pytest.approx(4.0)
    with pytest.raises(GridError):
        g.at(-0.1)
    with pytest.raises(GridError):
        g.at(2.5)


def test_general_exponential_kernel_with_exponential_input():
    problem = GeneralRenewalProblem(z=lambda u: np.exp(-u), F=exp_cdf, mu_F=1.0, sigma2_F=1.0)
    Z, G, g_limit = solve_general(problem, Grid(1e-3, 8.0))
    assert g_limit == pytest.approx(0.0, abs=1e-6)
    # Z ist konstant 1
    assert np.max(np.abs(Z.values - 1.0)) <= 1e-3
    assert G.values[-1] == pytest.approx(0.0, abs=0.01)


def test_general_exponential_kernel_with_indicator_input():
    problem = GeneralRenewalProblem(z=lambda u: (np.asarray(u) <= 1.0).astype(float), F=exp_cdf,
                                    mu_F=1.0, sigma2_F=1.0)
    Z, G, g_limit = solve_general(problem, Grid(1e-3, 8.0))
    assert g_limit == pytest.approx(0.5, abs=1e-6)
    assert G.values[-1] == pytest.approx(0.5, abs=0.02)
    assert Z.at(5.0) == pytest.approx(1.0, abs=0.01)


def test_general_divergent_first_moment():
    problem = GeneralRenewalProblem(z=lambda u: 1.0 / (1.0 + np.asarray(u)) ** 2, F=exp_cdf,
                                    mu_F=1.0, sigma2_F=1.0)
    _, _, g_limit = solve_general(problem, Grid(1e-2, 5.0))
    assert g_limit == -math.inf


def test_general_grid_input():
    grid = Grid(1e-2, 4.0)
    z = grid.with_values(np.exp(-grid.t))
    _, _, g_limit = solve_general(GeneralRenewalProblem(z, exp_cdf, 1.0, 1.0), grid)
    # ohne Rest jenseits t_max: a und m1 nur auf [0, 4]
    assert math.isfinite(g_limit)
    with pytest.raises(GridError):
        solve_general(GeneralRenewalProblem(z, exp_cdf, 1.0, 1.0), Grid(1e-2, 2.0))


def test_general_rejects_invalid_input():
    with pytest.raises(ValueError):
        solve_general(GeneralRenewalProblem(lambda u: -np.ones_like(u), exp_cdf, 1.0, 1.0), Grid(0.1, 1.0))
    with pytest.raises(ValueError):
        solve_general(GeneralRenewalProblem(lambda u: np.exp(-u), lambda t: 1 + 0 * t, 1.0, 1.0),
                      Grid(0.1, 1.0))


def test_dump_grid(tmp_path):
    path = tmp_path / "out" / "u.csv"
    dump_grid(path, Grid(0.5, 1.0).with_values(np.array([0.0, 1 / 3, 2.0])))
    lines = path.read_text(encoding="utf-8").splitlines()
    assert lines == ["t,value", "0,0", "0.5,0.333333333333", "1,2"]


def test_halving_h_halves_the_defect():
    defects = [solve_split_renewal(BST, Grid(h, 15.0)).diagnostics["U_hat_defect"] for h in (0.02, 0.01)]
    assert defects[1] <= 0.5 * defects[0]
