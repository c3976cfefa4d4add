import logging

import numpy as np
import pytest

from engine.cohomology.solver import CohomologySolver, invariant_distributions, solve_ce, solve_ce_vanishing
from engine.dynamics.hamiltonian import Hamiltonian
from engine.errors import InsufficientRegularity, NonZeroAverage, SmallDivisor
from engine.solver.obstruction import default_directions
from engine.spectral.grid import Grid
from engine.surface.origami import load_origami_file
from models.field import Field
from models.surface import Direction
from utils.path_helper import get_config_path

from tests.conftest import GOLDEN, L3_CE


def diagonal_cosine(grid):
    return Field.from_function(grid, lambda x, y, sq: np.cos(2.0 * np.pi * (x - y)))


def test_golden_closed_form(fine_torus_grid, golden):
    solution = solve_ce(fine_torus_grid, golden, diagonal_cosine(fine_torus_grid))
    expected = Field.from_function(fine_torus_grid, lambda x, y, sq: -GOLDEN * np.sin(2.0 * np.pi * (x - y)) / (2.0 * np.pi))
    np.testing.assert_allclose(solution.u.values, expected.values, atol=1e-12)
    assert solution.counterterms.shape == (1, 1, 1)
    assert abs(solution.counterterms[0, 0, 0]) <= 1e-14
    assert solution.residual <= 1e-12


def test_constant_is_all_counterterm(torus_grid, golden):
    solution = solve_ce(torus_grid, golden, Field.constant(torus_grid, 2.5))
    assert solution.u.sup_norm() <= 1e-14
    assert solution.counterterms[0, 0, 0] == pytest.approx(2.5)
    assert len(solution.dual_fields) == 1
    np.testing.assert_allclose(solution.dual_fields[0].values, 1.0)


def test_round_trip_on_random_data(fine_torus_grid, golden):
    solver = CohomologySolver(fine_torus_grid, golden)
    for f in solver.random_samples(10, seed=3):
        f = f + 0.7
        solution = solver.solve_ce(f)
        lhs = fine_torus_grid.lie_derivative(solution.u, golden)
        assert (lhs - (f - 0.7)).sup_norm() <= 1e-10
        assert solution.counterterms[0, 0, 0] == pytest.approx(0.7, abs=1e-12)


def test_matrix_valued_data_is_solved_entrywise(torus_grid, golden):
    f = Field.from_function(torus_grid, lambda x, y, sq: [[np.cos(2 * np.pi * x) + 1.0], [np.sin(2 * np.pi * y) - 2.0]])
    solution = solve_ce(torus_grid, golden, f)
    assert solution.u.shape == (2, 1)
    np.testing.assert_allclose(solution.counterterms[0, :, 0], [1.0, -2.0], atol=1e-12)


def test_exact_resonance_is_a_small_divisor(torus_grid):
    with pytest.raises(SmallDivisor):
        solve_ce(torus_grid, Direction((1.0, 1.0)), diagonal_cosine(torus_grid))


def test_resonant_mode_absent_from_data_is_harmless(torus_grid):
    f = Field.from_function(torus_grid, lambda x, y, sq: np.cos(2.0 * np.pi * x))
    solution = solve_ce(torus_grid, Direction((1.0, 1.0)), f)
    assert solution.residual <= 1e-12


def test_torus_has_one_invariant_distribution(golden, torus):
    grid = Grid(torus, 16)
    dist = invariant_distributions(grid, golden, 2.0, n_candidates=25)
    assert dist.count == 1
    dual = dist.dual_fields[0].values
    np.testing.assert_allclose(dual, dual.mean(), atol=1e-10)


def test_zero_threshold_keeps_no_distribution(golden, torus):
    grid = Grid(torus, 16)
    dist = invariant_distributions(grid, golden, 2.0, n_candidates=25, gap_threshold=0.0)
    assert dist.count == 0


def test_vanishing_solve_on_torus_is_plain_solve(torus_grid, golden):
    f = diagonal_cosine(torus_grid) + 0.3
    plain = solve_ce(torus_grid, golden, f)
    vanishing = solve_ce_vanishing(torus_grid, golden, f, order=0, s=2.0)
    np.testing.assert_allclose(vanishing.u.values, plain.u.values)
    np.testing.assert_allclose(vanishing.counterterms, plain.counterterms)


def test_vanishing_order_needs_regularity(torus_grid, golden):
    with pytest.raises(InsufficientRegularity):
        solve_ce_vanishing(torus_grid, golden, diagonal_cosine(torus_grid), order=2, s=2.0)


def test_apriori_constant_is_measured(torus_grid, golden):
    solver = CohomologySolver(torus_grid, golden)
    constant = solver.apriori_probe(2.0, 1.0, 5, seed=1)
    assert np.isfinite(constant) and constant > 0.0
    assert solver.apriori_constants[(2.0, 1.0)] == constant


def test_apriori_constant_rejects_nonzero_average(torus_grid, golden):
    solver = CohomologySolver(torus_grid, golden)
    with pytest.raises(NonZeroAverage):
        solver.apriori_probe(2.0, 1.0, [Field.constant(torus_grid, 1.0)])


def smooth_l3_data(grid):
    return Field.from_function(grid, lambda x, y, sq: np.cos(2.0 * np.pi * x) + 0.5 * np.sin(2.0 * np.pi * (x + y)))


def test_nyquist_data_is_logged_and_left_in_the_residual(torus_grid, golden, caplog):
    caplog.set_level(logging.DEBUG, logger='Cohomology')
    f = Field.from_function(torus_grid, lambda x, y, sq: np.cos(2.0 * np.pi * 16 * x))
    solution = solve_ce(torus_grid, golden, f)
    assert 'Dropped 1 Nyquist coefficient(s)' in caplog.text
    assert solution.u.sup_norm() <= 1e-14
    assert solution.residual == pytest.approx(1.0, rel=1e-12)


def test_solution_norm_of_golden_closed_form(fine_torus_grid, golden):
    solution = solve_ce(fine_torus_grid, golden, diagonal_cosine(fine_torus_grid), t=1.0)
    expected = GOLDEN / (4.0 * np.pi) * np.sqrt(2.0 * (1.0 + 8.0 * np.pi ** 2))
    assert solution.norm == pytest.approx(expected, rel=1e-10)
    assert solve_ce(fine_torus_grid, golden, diagonal_cosine(fine_torus_grid)).norm is None


def test_apriori_constant_of_a_single_mode(torus_grid, golden):
    solver = CohomologySolver(torus_grid, golden)
    constant = solver.apriori_probe(2.0, 1.0, [diagonal_cosine(torus_grid)])
    expected = (1.0 + 8.0 * np.pi ** 2) ** ((1.0 - 2.0) / 2.0) / (2.0 * np.pi * abs(1.0 - GOLDEN))
    assert constant == pytest.approx(expected, rel=1e-10)


def test_torus_solve_is_linear(torus_grid, golden):
    solver = CohomologySolver(torus_grid, golden)
    f, g = solver.random_samples(2, seed=5)
    f, g = f + 0.3, g - 1.1
    both = solver.solve_ce(f + 2.0 * g)
    one, two = solver.solve_ce(f), solver.solve_ce(g)
    np.testing.assert_allclose(both.u.values, one.u.values + 2.0 * two.u.values, atol=1e-12)
    np.testing.assert_allclose(both.counterterms, one.counterterms + 2.0 * two.counterterms, atol=1e-12)


def test_counterterm_carries_the_average(torus_grid, golden):
    f = diagonal_cosine(torus_grid) + 0.4
    solution = solve_ce(torus_grid, golden, f)
    xu = torus_grid.lie_derivative(solution.u, golden)
    assert np.max(np.abs(xu.mean())) <= 1e-13
    assert (xu - f).l2_norm() >= 0.2
    assert (xu + solution.counterterm_field() - f).l2_norm() <= 1e-12


def test_origami_residual_is_measured_on_the_grid(l3_grid, golden):
    f = smooth_l3_data(l3_grid)
    solution = CohomologySolver(l3_grid, golden, L3_CE).solve_ce(f, t=1.0)
    equation = l3_grid.lie_derivative(solution.u, golden) + solution.counterterm_field() - f
    assert solution.residual == pytest.approx(equation.l2_norm(), rel=1e-12, abs=1e-15)
    # u = 0 is admissible, so the least-squares solve never does worse
    assert solution.residual <= (f - solution.counterterm_field()).l2_norm() + 1e-10
    assert np.max(np.abs(solution.u.mean())) <= 1e-12
    assert np.isfinite(solution.norm) and solution.norm > 0.0


def test_origami_solve_is_linear(l3_grid, golden):
    solver = CohomologySolver(l3_grid, golden, L3_CE)
    f = smooth_l3_data(l3_grid)
    g = Field.from_function(l3_grid, lambda x, y, sq: np.sin(2.0 * np.pi * y) + 0.2)
    both = solver.solve_ce(f - 3.0 * g)
    one, two = solver.solve_ce(f), solver.solve_ce(g)
    scale = max(one.u.sup_norm(), two.u.sup_norm(), 1.0)
    np.testing.assert_allclose(both.u.values, one.u.values - 3.0 * two.u.values, rtol=0, atol=1e-9 * scale)
    np.testing.assert_allclose(both.counterterms, one.counterterms - 3.0 * two.counterterms, rtol=0, atol=1e-9)


def test_vanishing_solve_vanishes_at_the_cone_point(l3_grid, golden):
    solver = CohomologySolver(l3_grid, golden, L3_CE)
    f = smooth_l3_data(l3_grid)
    solution = solver.solve_ce_vanishing(f, order=0, s=2.0)
    bound = 1e-9 * max(1.0, solution.u.sup_norm())
    assert solution.vanishing_defect <= bound
    for sq in range(l3_grid.surface.n_squares):
        assert abs(solution.u.values[0, 0, sq, 0, 0]) <= bound
    # one counterterm block per distribution; the cone values are reported apart
    assert solution.counterterms.shape[0] == solver.invariant_distributions(2.0).count
    assert solution.vanishing_values.shape[0] == 3
    equation = l3_grid.lie_derivative(solution.u, golden) + solution.counterterm_field() - f
    assert solution.residual == pytest.approx(equation.l2_norm(), rel=1e-12, abs=1e-15)


def test_first_order_vanishing_solve(l3_grid, golden):
    solver = CohomologySolver(l3_grid, golden, L3_CE)
    solution = solver.solve_ce_vanishing(smooth_l3_data(l3_grid), order=1, s=3.0)
    assert solution.vanishing_defect <= 1e-9 * max(1.0, solution.u.sup_norm())
    assert solution.vanishing_values.shape[0] == 9


def test_gap_ratio_compares_kept_and_rejected(l3_grid, golden):
    dist = CohomologySolver(l3_grid, golden, L3_CE).invariant_distributions(2.0)
    kept = dist.spectrum.size - dist.count
    assert dist.count >= 1
    if kept and dist.spectrum[kept] > 0.0:
        assert dist.gap_ratio == pytest.approx(dist.spectrum[kept - 1] / dist.spectrum[kept])
    else:
        assert dist.gap_ratio == float('inf')
    assert dist.gap_ratio >= 1.0


def test_smaller_truncation_keeps_the_basis(golden):
    grid = Grid(load_origami_file(get_config_path('surfaces/l3.origami')), 16)
    grid.build_basis(61)
    basis, version = grid.basis, grid.basis_version
    wide = CohomologySolver(grid, golden, L3_CE)
    f = smooth_l3_data(grid)
    first = wide.solve_ce(f)

    narrow = CohomologySolver(grid, golden, {'n_candidates': 30, 'min_gap_ratio': 1.0})
    narrow.invariant_distributions(2.0)
    assert grid.build_basis(31) is basis
    assert grid.basis is basis and grid.basis_version == version
    np.testing.assert_array_equal(wide.solve_ce(f).u.values, first.u.values)

    before = wide.invariant_distributions(2.0)
    grid.build_basis(80)
    assert grid.basis_version == version + 1
    after = wide.invariant_distributions(2.0)
    assert after is not before
    assert np.isfinite(wide.solve_ce(f).residual)


def test_correction_directions_follow_the_distributions(l3_grid, golden, torus_grid):
    solver = CohomologySolver(l3_grid, golden, L3_CE)
    directions = default_directions(Hamiltonian.flat(l3_grid.surface), solver)
    count = solver.invariant_distributions(2.0).count
    assert len(directions) == 2 * min(count, 25)
    assert len(set(directions)) == len(directions)
    assert all('fiber_poly' in d for d in directions)
    torus = default_directions(Hamiltonian.flat(torus_grid.surface), CohomologySolver(torus_grid, golden))
    assert torus == ['fiber_poly(1,0)', 'fiber_poly(0,1)']
