import numpy as np
import pytest

from engine.errors import BasisUnavailable, NoConvergence, ShapeMismatch
from engine.spectral.basis import laplacian_eigenbasis, torus_eigenbasis
from engine.spectral.grid import Grid
from engine.spectral.norms import c1_norm, friedrichs_norm, sobolev_norm
from engine.spectral.paraproduct import (LocalNonlinearity, composition_remainder, decompose, lowpass,
                                         para_linearize, paraproduct, paraproduct_inverse)
from models.field import Field


def cos_x(grid, k=1):
    return Field.from_function(grid, lambda x, y, sq: np.cos(2.0 * np.pi * k * x))


def test_resolution_must_be_power_of_two(torus):
    with pytest.raises(ValueError):
        Grid(torus, 12)


def test_constant_has_unit_norm(torus_grid):
    one = Field.constant(torus_grid, 1.0)
    for s in (-1.0, 0.0, 1.5, 3.0):
        assert sobolev_norm(one, s) == pytest.approx(1.0)
        assert sobolev_norm(one, s, 'weighted') == pytest.approx(1.0)


def test_parseval_for_a_cosine(torus_grid):
    f = cos_x(torus_grid)
    assert sobolev_norm(f, 0.0) == pytest.approx(np.sqrt(0.5))
    assert sobolev_norm(f, 1.0, 'friedrichs') == pytest.approx(np.sqrt((1.0 + 4.0 * np.pi ** 2) / 2.0))
    assert sobolev_norm(f, 1.0, 'weighted') == pytest.approx(np.sqrt((1.0 + 4.0 * np.pi ** 2) / 2.0))


def test_unknown_norm_flavor(torus_grid):
    with pytest.raises(ValueError):
        sobolev_norm(cos_x(torus_grid), 1.0, 'sobolev')


def test_c1_norm_of_cosine(torus_grid):
    assert c1_norm(cos_x(torus_grid)) == pytest.approx(1.0 + 2.0 * np.pi)


def test_spectral_derivative_is_exact(torus_grid):
    f = Field.from_function(torus_grid, lambda x, y, sq: np.sin(2.0 * np.pi * (2 * x + 3 * y)))
    expected = Field.from_function(torus_grid, lambda x, y, sq: 6.0 * np.pi * np.cos(2.0 * np.pi * (2 * x + 3 * y)))
    np.testing.assert_allclose(torus_grid.partial(f, 0, 1).values, expected.values, atol=1e-10)


def test_torus_eigenvalues_closed_form():
    basis = torus_eigenbasis(5, 16)
    np.testing.assert_allclose(basis.eigenvalues, [0.0] + [4.0 * np.pi ** 2] * 4)


def test_torus_eigenfields_are_orthonormal():
    basis = torus_eigenbasis(13, 16)
    flat = basis.fields.reshape(basis.n_modes, -1)
    np.testing.assert_allclose(flat @ flat.T / 16 ** 2, np.eye(basis.n_modes), atol=1e-12)


def test_origami_ground_state_is_constant(l3):
    basis = laplacian_eigenbasis(l3, 12, 16)
    assert basis.eigenvalues[0] == 0.0
    assert np.all(np.diff(basis.eigenvalues) >= 0.0)
    np.testing.assert_allclose(basis.fields[0], 1.0 / np.sqrt(3.0), atol=1e-10)


def test_origami_eigenfields_are_orthonormal(l3):
    grid = Grid(l3, 16)
    basis = grid.build_basis(10)
    gram = grid.project(basis.fields)
    np.testing.assert_allclose(gram, np.eye(10), atol=1e-8)


def test_origami_norms_need_a_basis(l3):
    grid = Grid(l3, 16)
    with pytest.raises(BasisUnavailable):
        friedrichs_norm(Field.constant(grid, 1.0), 1.0)


def test_dyadic_blocks_sum_to_field(torus_grid, rng):
    f = Field(torus_grid, rng.standard_normal((1, 1, 1, 32, 32)))
    np.testing.assert_allclose(decompose(f).total().values, f.values, atol=1e-12)


def test_paraproduct_of_separated_frequencies_is_the_product(torus):
    grid = Grid(torus, 256)
    a = Field.from_function(grid, lambda x, y, sq: 1.0 + 0.3 * np.cos(2 * np.pi * x) + 0.2 * np.sin(2 * np.pi * (x + y)))
    f = cos_x(grid, 64)
    np.testing.assert_allclose(paraproduct(a, f).values, (a * f).values, atol=1e-12)


def test_inverse_of_identity_symbol(torus_grid, rng):
    a = Field.constant(torus_grid, np.eye(4))
    g = Field(torus_grid, torus_grid.dealias(rng.standard_normal((4, 1, 1, 32, 32))))
    v = paraproduct_inverse(a, g, tol=1e-10)
    residual = paraproduct(a, v, completed=True) - g
    assert residual.l2_norm() <= 1e-10


def test_inverse_of_perturbed_diagonal_symbol(torus_grid, rng):
    bump = Field.from_function(torus_grid, lambda x, y, sq: np.exp(np.cos(2 * np.pi * x) + np.sin(2 * np.pi * y)))
    diag = Field.constant(torus_grid, np.diag([1.0, 1.0, -1.0, -1.0]))
    a = diag + Field(torus_grid, 0.01 * np.eye(4)[:, :, None, None, None] * bump.values[0, 0])
    g = Field.from_function(torus_grid, lambda x, y, sq: [[np.cos(2 * np.pi * x)], [np.sin(2 * np.pi * y)],
                                                          [np.cos(2 * np.pi * (x + y))], [1.0]])
    v = paraproduct_inverse(a, g, tol=1e-10, max_terms=20)
    assert (paraproduct(a, v, completed=True) - Field(torus_grid, torus_grid.dealias(g.values))).l2_norm() <= 1e-10


def test_inverse_of_oscillating_symbol_fails(torus_grid):
    a = Field.from_function(torus_grid, lambda x, y, sq: 10.0 * np.cos(2 * np.pi * 3 * x))
    with pytest.raises(NoConvergence):
        paraproduct_inverse(a, cos_x(torus_grid))


def test_constant_symbols_compose(torus_grid):
    sweep = composition_remainder(Field.constant(torus_grid, 2.0), Field.constant(torus_grid, 3.0))
    assert len(sweep.remainders) == 3
    assert max(r.l2_norm() for r in sweep.remainders) <= 1e-12


def test_composition_shape_mismatch(torus_grid):
    with pytest.raises(ShapeMismatch):
        composition_remainder(Field.constant(torus_grid, np.eye(2)), Field.constant(torus_grid, np.eye(3)))


def test_para_linearization_of_identity(torus_grid):
    u = Field.from_function(torus_grid, lambda x, y, sq: np.cos(2 * np.pi * x) + 0.5 * np.sin(2 * np.pi * 3 * y))
    symbol, remainder = para_linearize(LocalNonlinearity.from_expression('u'), u)
    np.testing.assert_allclose(symbol.values, 1.0)
    np.testing.assert_allclose(remainder.values, lowpass(u, 1).values, atol=1e-12)


def test_para_linearization_is_exact_by_construction(torus_grid):
    F = LocalNonlinearity.from_expression('u**2/2 + cos(2*pi*x)')
    u = Field.from_function(torus_grid, lambda x, y, sq: 0.1 * np.sin(2 * np.pi * y))
    symbol, remainder = para_linearize(F, u)
    sq, x, y = torus_grid.nodes()
    lhs = F.value(u.values, x, y, sq) - F.value(np.zeros_like(u.values), x, y, sq)
    np.testing.assert_allclose((paraproduct(symbol, u) + remainder).values, lhs, atol=1e-12)


def test_paraproduct_is_bilinear(torus_grid, rng):
    a, b, f, g = (Field(torus_grid, torus_grid.dealias(rng.standard_normal((1, 1, 1, 32, 32)))) for _ in range(4))
    np.testing.assert_allclose(paraproduct(a, f + 2.0 * g).values,
                               (paraproduct(a, f) + 2.0 * paraproduct(a, g)).values, atol=1e-11)
    np.testing.assert_allclose(paraproduct(a - 0.5 * b, f).values,
                               (paraproduct(a, f) - 0.5 * paraproduct(b, f)).values, atol=1e-11)


def test_friedrichs_norm_grows_with_order(torus_grid, rng):
    f = Field(torus_grid, rng.standard_normal((1, 1, 1, 32, 32)))
    norms = [friedrichs_norm(f, s) for s in (-1.0, 0.0, 0.5, 1.0, 2.0)]
    assert all(lo <= hi for lo, hi in zip(norms, norms[1:]))


def test_bony_product_has_no_inverse(torus_grid):
    with pytest.raises(ValueError):
        paraproduct_inverse(Field.constant(torus_grid, 1.0), cos_x(torus_grid), completed=False)


def test_para_linearization_remainder_is_quadratic(torus_grid):
    F = LocalNonlinearity.from_expression('u**2/2')
    sizes = np.array([1e-1, 1e-2, 1e-3])
    remainders = [para_linearize(F, eps * cos_x(torus_grid))[1].l2_norm() for eps in sizes]
    slope = np.polyfit(np.log(sizes), np.log(remainders), 1)[0]
    assert slope == pytest.approx(2.0, abs=0.1)


def test_torus_spectrum_follows_weyl_law():
    basis = torus_eigenbasis(200, 64)
    n = basis.n_modes - 1
    assert 0.85 <= n * 4.0 * np.pi / basis.eigenvalues[n] <= 1.15


def test_origami_spectrum_follows_weyl_law(l3):
    basis = laplacian_eigenbasis(l3, 60, 16)
    n = basis.n_modes - 1
    # area 3
    assert 0.6 <= 4.0 * np.pi * n / (3.0 * basis.eigenvalues[n]) <= 1.6


def test_composition_remainder_decays_for_smooth_symbols(torus):
    grid = Grid(torus, 128)
    a = Field.from_function(grid, lambda x, y, sq: np.exp(np.cos(2.0 * np.pi * x)))
    b = Field.from_function(grid, lambda x, y, sq: np.exp(np.sin(2.0 * np.pi * x)))
    sweep = composition_remainder(a, b)
    assert len(sweep.ratios) >= 3
    assert np.all(np.isfinite(sweep.ratios))
    assert sweep.ratios[-1] <= sweep.ratios[0]
