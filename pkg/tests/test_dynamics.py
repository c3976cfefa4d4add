import numpy as np
import pytest

from engine.dynamics.embedding import Embedding
from engine.dynamics.hamiltonian import Hamiltonian, HamiltonianTerm, hamiltonian_field, parse_term
from engine.dynamics.identities import (check_linearization_identity, energy_defect, lagrangian_identity_residual,
                                        run_identity_suites, symplectic_defect, trivial_section_error)
from engine.dynamics.invariance import invariance_residual
from engine.dynamics.linearization import linearization
from engine.errors import ConfigError, EvaluationAtSingularity, IllConditioned
from engine.spectral.grid import Grid
from models.field import Field


def perturbed(surface, eps=1e-3, expr='cos_base(1,-1)*fiber_poly(1,0)', mask_radius=0.1):
    return Hamiltonian(surface, (HamiltonianTerm(eps, expr),), mask_radius)


def test_flat_field_is_the_drift(torus, golden):
    x = np.array([0.1, 0.6])
    field = hamiltonian_field(Hamiltonian.flat(torus), (np.zeros(2, dtype=int), x, x, golden.xi[0], golden.xi[1]))
    np.testing.assert_allclose(field[:, 0], [golden.xi[0], golden.xi[1], 0.0, 0.0])
    np.testing.assert_allclose(field[:, 1], [golden.xi[0], golden.xi[1], 0.0, 0.0])


def test_cosine_potential_force(torus):
    eps = 0.01
    H = perturbed(torus, eps, 'cos_base(1,0)')
    x = np.linspace(0.0, 0.9, 7)
    field = hamiltonian_field(H, (np.zeros(7, dtype=int), x, 0.3, 1.0, 0.5))
    np.testing.assert_allclose(field[0], 1.0)
    np.testing.assert_allclose(field[1], 0.5)
    np.testing.assert_allclose(field[2], 2.0 * np.pi * eps * np.sin(2.0 * np.pi * x), atol=1e-15)
    np.testing.assert_allclose(field[3], 0.0, atol=1e-15)


def test_epsilon_scales_configured_terms(torus):
    H = Hamiltonian.from_config(torus, {'epsilon': 1e-3, 'terms': [{'coefficient': 2.0, 'expr': 'fiber_poly(1,0)'}]})
    assert H.terms[0].coefficient == pytest.approx(2e-3)
    assert not H.is_flat
    assert Hamiltonian.from_config(torus, {}).is_flat


@pytest.mark.parametrize('expression', ['z*fiber_poly(1,0)', 'cos_base(1,'])
def test_bad_terms_are_config_errors(expression):
    with pytest.raises(ConfigError):
        parse_term(expression)


def test_perturbation_is_masked_near_cone_points(l3):
    H = perturbed(l3, 1.0, 'cos_base(1,0)')
    assert float(H.value(0, 0.05, 0.05, 0.0, 0.0)) == pytest.approx(0.0)
    assert float(H.value(0, 0.5, 0.5, 0.0, 0.0)) == pytest.approx(-1.0)


def test_unmasked_perturbation_at_cone_point(l3):
    H = perturbed(l3, 1.0, 'cos_base(1,0)', mask_radius=0.0)
    with pytest.raises(EvaluationAtSingularity):
        H.value(0, 0.0, 0.0, 1.0, 0.0)


def test_trivial_section_is_invariant_for_flat_flow(torus_grid, golden):
    u0 = Embedding.trivial(torus_grid, golden)
    assert invariance_residual(Hamiltonian.flat(torus_grid.surface), u0).sup_norm() == 0.0


def test_fiber_shift_shows_up_as_drift_mismatch(torus_grid, golden):
    delta = 0.01
    shift = Field.constant(torus_grid, np.array([[0.0], [0.0], [delta], [0.0]]))
    u = Embedding(shift, golden)
    residual = invariance_residual(Hamiltonian.flat(torus_grid.surface), u)
    expected = np.array([delta, 0.0, 0.0, 0.0])[:, None, None, None, None]
    np.testing.assert_allclose(residual.values, np.broadcast_to(expected, residual.values.shape), atol=1e-15)


def test_closed_forms_at_trivial_section(torus_grid, golden):
    assert trivial_section_error(Hamiltonian.flat(torus_grid.surface), torus_grid, golden) <= 1e-14
    assert trivial_section_error(perturbed(torus_grid.surface), torus_grid, golden) <= 1e-14


def test_lagrangian_identity_at_trivial_section(torus_grid, golden):
    u0 = Embedding.trivial(torus_grid, golden)
    assert lagrangian_identity_residual(Hamiltonian.flat(torus_grid.surface), u0) <= 1e-14


def test_linearization_identity_for_zero_direction(torus_grid, golden, rng):
    u = Embedding.random(torus_grid, golden, 0.01, rng)
    assert check_linearization_identity(perturbed(torus_grid.surface), u, Field.zeros(torus_grid, (4, 1))) == 0.0


def test_linearization_identity_step_range(torus_grid, golden):
    u0 = Embedding.trivial(torus_grid, golden)
    with pytest.raises(ValueError):
        check_linearization_identity(Hamiltonian.flat(torus_grid.surface), u0, u0.w, h=1e-2)


def test_hamiltonian_flow_is_symplectic_and_conservative(torus_grid, golden, rng):
    H = perturbed(torus_grid.surface, 1e-2)
    u = Embedding.random(torus_grid, golden, 0.01, rng)
    assert symplectic_defect(H, u, 200, rng) <= 1e-12
    assert energy_defect(H, 200, rng) <= 1e-12


def test_degenerate_jacobian_is_ill_conditioned(torus_grid, golden):
    w = Field.from_function(torus_grid, lambda x, y, sq: [[np.sin(2 * np.pi * x) / (2 * np.pi)], [0.0], [0.0], [0.0]])
    with pytest.raises(IllConditioned):
        linearization(Hamiltonian.flat(torus_grid.surface), Embedding(w, golden))


def test_identity_suites_pass_on_the_torus(fine_torus_grid, golden, rng):
    rows = run_identity_suites(perturbed(fine_torus_grid.surface), fine_torus_grid, golden, rng,
                               {'n_samples': 2, 'n_points': 200})
    assert [r.suite for r in rows][:2] == ['trivial_section', 'energy']
    assert all(r.status == 'pass' for r in rows), [r.to_dict() for r in rows]


def test_random_embedding_keeps_cone_points_fixed(l3, golden, rng):
    u = Embedding.random(Grid(l3, 16), golden, 0.01, rng)
    assert u.check_displacement() < 1.0
