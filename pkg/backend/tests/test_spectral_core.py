"""
Tests for the periodic grid, the field containers and the spectral operators.
"""
import math

import numpy as np
import pytest
from pydantic import ValidationError

from solver.errors import ContractViolation, MeanCompatibilityError
from solver.spectral_core import (
    GridSpec,
    ScalarField,
    SymTensorField2,
    VectorField2,
    biot_savart,
    curl2d,
    dealias,
    divergence,
    gradient,
    inner,
    inverse_laplacian,
    laplacian,
    leray_project,
    max_divergence,
    partial,
    perp_gradient,
    pointwise_magnitude,
    product,
    quadrature_lp,
    riesz_R,
    spectral_energy,
    gradient_energy,
)


def scalar(grid, fn):
    return ScalarField(grid, fn(grid.tables.x1, grid.tables.x2))


class TestGridSpec:

    def test_defaults(self):
        grid = GridSpec(n=32)
        assert grid.box_length == pytest.approx(2 * math.pi)
        assert grid.dealias_fraction == pytest.approx(2.0 / 3.0)
        assert grid.k0 == pytest.approx(1.0)
        assert grid.dx == pytest.approx(2 * math.pi / 32)

    @pytest.mark.parametrize("n", [8, 12, 24, 15])
    def test_rejects_bad_resolution(self, n):
        with pytest.raises(ValidationError):
            GridSpec(n=n)

    def test_rejects_dealias_fraction_keeping_too_few_modes(self):
        with pytest.raises(ValidationError, match="fewer than 4 modes"):
            GridSpec(n=16, dealias_fraction=0.3)

    def test_is_frozen(self):
        grid = GridSpec(n=16)
        with pytest.raises(ValidationError):
            grid.n = 32

    def test_dealias_mask_is_square(self):
        t = GridSpec(n=16).tables
        kept = t.dealias_mask
        assert kept[5, 5] and kept[-5, 5]
        assert not kept[6, 0] and not kept[0, -6]


class TestScalarField:

    def test_constant_has_single_zero_mode(self, grid16):
        f = ScalarField.from_values(grid16, 3.0).to_spectral()
        assert f.data[0, 0] == pytest.approx(3.0 * 16 ** 2)
        rest = f.data.copy()
        rest[0, 0] = 0.0
        assert np.max(np.abs(rest)) < 1e-10

    def test_transform_round_trip(self, grid16):
        rng = np.random.default_rng(0)
        values = rng.standard_normal((16, 16))
        back = ScalarField(grid16, values).to_spectral().to_real()
        assert np.allclose(back.data, values, atol=1e-13)

    def test_double_transform_is_a_contract_violation(self, grid16):
        f = ScalarField.zeros(grid16, spectral=True)
        with pytest.raises(ContractViolation):
            f.to_spectral()
        with pytest.raises(ContractViolation):
            ScalarField.zeros(grid16).to_real()

    def test_shape_must_match_grid(self, grid16):
        with pytest.raises(ContractViolation, match="shape"):
            ScalarField(grid16, np.zeros((8, 8)))

    def test_mixed_grids_rejected(self, grid16, grid32):
        with pytest.raises(ContractViolation):
            ScalarField.zeros(grid16) + ScalarField.zeros(grid32)

    def test_scalar_addition_in_spectral_form(self, grid16):
        f = (ScalarField.zeros(grid16, spectral=True) + 2.0).to_real()
        assert np.allclose(f.data, 2.0)


class TestDerivatives:

    def test_partial_of_sine(self, grid16):
        f = scalar(grid16, lambda x, y: np.sin(2 * x) * np.cos(y))
        d1 = partial(f, 0)
        d2 = partial(f, 1)
        x, y = grid16.tables.x1, grid16.tables.x2
        assert np.allclose(d1.values(), 2 * np.cos(2 * x) * np.cos(y), atol=1e-12)
        assert np.allclose(d2.values(), -np.sin(2 * x) * np.sin(y), atol=1e-12)

    def test_nyquist_mode_has_zero_derivative(self, grid16):
        f = scalar(grid16, lambda x, y: np.cos(8 * x))
        assert np.max(np.abs(partial(f, 0).values())) < 1e-12

    def test_derivatives_keep_representation(self, grid16):
        f = scalar(grid16, lambda x, y: np.sin(x)).to_spectral()
        assert gradient(f).spectral
        assert not gradient(f.to_real()).spectral

    def test_laplacian_and_inverse(self, grid16):
        f = scalar(grid16, lambda x, y: np.sin(2 * x) * np.cos(3 * y) + 1.0)
        lap = laplacian(f)
        expected = -13.0 * np.sin(2 * grid16.tables.x1) * np.cos(3 * grid16.tables.x2)
        assert np.allclose(lap.values(), expected, atol=1e-11)
        # the inverse drops the mean
        assert np.allclose(inverse_laplacian(lap).values(), f.values() - 1.0, atol=1e-12)

    def test_curl_of_perp_gradient_is_laplacian(self, grid16):
        psi = scalar(grid16, lambda x, y: np.sin(x) * np.sin(2 * y))
        assert np.allclose(curl2d(perp_gradient(psi)).values(), laplacian(psi).values(), atol=1e-11)
        assert max_divergence(perp_gradient(psi)) < 1e-12


class TestLerayProjection:

    def test_projection_is_divergence_free_and_idempotent(self, grid16):
        rng = np.random.default_rng(3)
        v = VectorField2(ScalarField(grid16, rng.standard_normal((16, 16))),
                         ScalarField(grid16, rng.standard_normal((16, 16))))
        p = leray_project(v)
        assert max_divergence(p) < 1e-11
        again = leray_project(p)
        assert np.allclose(again.u1.values(), p.u1.values(), atol=1e-12)
        assert np.allclose(again.u2.values(), p.u2.values(), atol=1e-12)

    def test_gradients_are_removed(self, grid16):
        g = gradient(scalar(grid16, lambda x, y: np.cos(x + 2 * y)))
        p = leray_project(g)
        assert math.sqrt(spectral_energy(p)) < 1e-12

    def test_zero_mode_passes_through(self, grid16):
        v = VectorField2(ScalarField.from_values(grid16, 1.5), ScalarField.from_values(grid16, -0.5))
        p = leray_project(v)
        assert np.allclose(p.u1.values(), 1.5)
        assert np.allclose(p.u2.values(), -0.5)


class TestBiotSavart:

    def test_recovers_vorticity(self, grid16):
        omega = scalar(grid16, lambda x, y: np.sin(x) * np.cos(2 * y))
        u = biot_savart(omega, mean_velocity=(0.25, 0.0))
        assert np.allclose(curl2d(u).values(), omega.values(), atol=1e-12)
        assert max_divergence(u) < 1e-12
        assert np.mean(u.u1.values()) == pytest.approx(0.25)

    def test_rejects_vorticity_with_mean(self, grid16):
        with pytest.raises(MeanCompatibilityError):
            biot_savart(ScalarField.from_values(grid16, 1.0))


class TestDealiasing:

    def test_product_is_exact_inside_the_cutoff(self, grid16):
        f = scalar(grid16, lambda x, y: np.sin(2 * x))
        g = scalar(grid16, lambda x, y: np.sin(3 * x))
        expected = 0.5 * (np.cos(grid16.tables.x1) - np.cos(5 * grid16.tables.x1))
        assert np.allclose(product(f, g).values(), expected, atol=1e-12)

    def test_product_drops_modes_beyond_the_cutoff(self, grid16):
        f = scalar(grid16, lambda x, y: np.cos(3 * x))
        # cos^2(3x) = (1 + cos 6x)/2; |m| = 6 lies above the cutoff 16/3
        assert np.allclose(product(f, f).values(), 0.5, atol=1e-12)

    def test_dealias_requires_spectral_input(self, grid16):
        with pytest.raises(ContractViolation):
            dealias(ScalarField.zeros(grid16))


class TestQuadrature:

    def test_constant_field_norms(self, grid16):
        ones = np.ones((16, 16))
        area = grid16.cell_area
        assert quadrature_lp(ones, 2.0, area) == pytest.approx(2 * math.pi)
        assert quadrature_lp(ones, 1.0, area) == pytest.approx(4 * math.pi ** 2)
        assert quadrature_lp(ones, math.inf, area) == pytest.approx(1.0)

    def test_rejects_exponent_below_one(self, grid16):
        with pytest.raises(ContractViolation):
            quadrature_lp(np.ones((16, 16)), 0.5, grid16.cell_area)

    def test_parseval(self, grid16):
        f = scalar(grid16, lambda x, y: np.sin(x) + 0.5 * np.cos(3 * y))
        assert spectral_energy(f) == pytest.approx(inner(f, f), rel=1e-12)
        assert spectral_energy(f) == pytest.approx(2 * math.pi ** 2 * 1.25, rel=1e-12)
        assert gradient_energy(f) == pytest.approx(2 * math.pi ** 2 * (1.0 + 0.25 * 9), rel=1e-12)

    def test_tensor_magnitude_counts_off_diagonal_twice(self, grid16):
        one = ScalarField.from_values(grid16, 1.0)
        tau = SymTensorField2(ScalarField.zeros(grid16), one, ScalarField.zeros(grid16))
        assert np.allclose(pointwise_magnitude(tau), math.sqrt(2.0))
        assert spectral_energy(tau) == pytest.approx(2.0 * 4 * math.pi ** 2)


class TestRieszOperator:

    def test_isotropic_stress_is_in_the_kernel(self, grid16):
        g = scalar(grid16, lambda x, y: np.cos(x) * np.sin(2 * y))
        r = riesz_R(SymTensorField2.isotropic(g))
        assert np.max(np.abs(r.values())) < 1e-12

    def test_off_diagonal_mode(self, grid16):
        # curl div of an off-diagonal stress carries k1^2 - k2^2, which vanishes on the diagonal
        zero = ScalarField.zeros(grid16)
        tau = SymTensorField2(zero, scalar(grid16, lambda x, y: np.cos(x + y)), zero)
        assert np.max(np.abs(riesz_R(tau).values())) < 1e-12
        # along x1 only, R tau12 = tau12
        tau = SymTensorField2(zero, scalar(grid16, lambda x, y: np.cos(2 * x)), zero)
        assert np.allclose(riesz_R(tau).values(), np.cos(2 * grid16.tables.x1), atol=1e-12)
