"""
Tests for the Oldroyd-B right-hand sides and the structural identities they satisfy.
"""
import math

import numpy as np
import pytest
from pydantic import ValidationError

from solver.linear_analysis import single_mode_state
from solver.model import (
    ModelParams,
    State,
    bilinear_Q,
    deformation,
    energy_rate_balance,
    gamma_field,
    gamma_residual,
    pressure_recover,
    rhs_stress,
    rhs_velocity,
    time_derivative,
    vorticity_part,
)
from solver.spectral_core import (
    GridSpec,
    ScalarField,
    SymTensorField2,
    VectorField2,
    inner,
    max_divergence,
    spectral_energy,
)
from tests.helpers import analytic_state, band_state, taylor_green_state


class TestModelParams:

    def test_full_mode_requires_positive_alpha(self):
        with pytest.raises(ValidationError, match="alpha"):
            ModelParams(alpha=0.0, rotation_mode="full")

    def test_corotation_allows_zero_alpha_and_ignores_slip(self):
        params = ModelParams(alpha=0.0, b=0.7, rotation_mode="corotation")
        assert params.slip == 0.0

    @pytest.mark.parametrize("b", [-1.5, 1.01])
    def test_slip_range(self, b):
        with pytest.raises(ValidationError):
            ModelParams(b=b)

    def test_presets(self):
        assert ModelParams.corotation_inviscid().rotation_mode == "corotation"
        full = ModelParams.noncorotation_inviscid()
        assert (full.a, full.nu, full.alpha, full.b) == (0.0, 0.0, 1.0, 1.0)


class TestState:

    def test_coefficient_stack_round_trip(self, tg_state):
        coeffs = tg_state.to_coefficients()
        assert coeffs.shape == (5, 32, 32)
        back = State.from_coefficients(tg_state.grid, coeffs, 0.5).as_real()
        assert back.t == 0.5
        assert np.allclose(back.tau.t12.values(), tg_state.tau.t12.values())

    def test_is_finite(self, tg_state):
        assert tg_state.is_finite()
        bad = tg_state.u.u1.data.copy()
        bad[0, 0] = np.nan
        broken = State(0.0, VectorField2(ScalarField(tg_state.grid, bad), tg_state.u.u2), tg_state.tau)
        assert not broken.is_finite()


class TestKinematics:

    def test_deformation_and_vorticity_of_shear(self, grid32):
        # u = (sin x2, 0): D12 = cos(x2)/2, w = -cos(x2)
        x2 = grid32.tables.x2
        u = VectorField2(ScalarField(grid32, np.sin(x2)), ScalarField.zeros(grid32))
        d = deformation(u)
        assert np.allclose(d.t11.values(), 0.0, atol=1e-12)
        assert np.allclose(d.t12.values(), 0.5 * np.cos(x2), atol=1e-12)
        assert np.allclose(vorticity_part(u).values(), -np.cos(x2), atol=1e-12)

    def test_corotational_part_vanishes_for_isotropic_stress(self, grid32, corotation_params):
        state = band_state(grid32)
        g = ScalarField(grid32, np.cos(grid32.tables.x1))
        q = bilinear_Q(state.u, SymTensorField2.isotropic(g), corotation_params)
        assert max(float(np.max(np.abs(c.values()))) for c in q.components()) < 1e-12

    def test_corotational_part_is_orthogonal_to_stress(self, grid32, corotation_params):
        # tau W - W tau is traceless against tau itself
        state = band_state(grid32)
        q = bilinear_Q(state.u, state.tau, corotation_params)
        scale = math.sqrt(spectral_energy(q) * spectral_energy(state.tau))
        assert abs(inner(q, state.tau)) <= 1e-10 * scale

    def test_slip_term_of_isotropic_stress(self, grid32, full_params):
        # Q(grad u, g Id) = 2 b g D(u) for divergence-free u
        x1, x2 = grid32.tables.x1, grid32.tables.x2
        u = VectorField2(ScalarField(grid32, np.sin(x2)), ScalarField.zeros(grid32))
        g = ScalarField.from_values(grid32, 0.5)
        q = bilinear_Q(u, SymTensorField2.isotropic(g), full_params)
        assert np.allclose(q.t12.values(), 0.5 * np.cos(x2), atol=1e-12)
        assert np.allclose(q.t11.values(), 0.0, atol=1e-12)


class TestRightHandSides:

    def test_velocity_tendency_is_divergence_free(self, grid32, full_params):
        state = band_state(grid32)
        assert max_divergence(rhs_velocity(state, full_params)) < 1e-10

    def test_taylor_green_is_a_steady_euler_flow(self, grid32):
        state = taylor_green_state(grid32, amplitude=1.0, epsilon=0.0)
        params = ModelParams(a=0.0, mu=0.0, alpha=0.0, rotation_mode="corotation")
        du = rhs_velocity(state, params)
        assert math.sqrt(spectral_energy(du)) < 1e-12

    def test_viscous_decay_of_a_mode(self, grid32):
        x1 = grid32.tables.x1
        u = VectorField2(ScalarField.zeros(grid32), ScalarField(grid32, np.sin(2 * x1)))
        state = State(0.0, u, SymTensorField2.zeros(grid32))
        params = ModelParams(nu=0.1, alpha=0.0, rotation_mode="corotation")
        du = rhs_velocity(state, params)
        assert np.allclose(du.u2.values(), -0.4 * np.sin(2 * x1), atol=1e-12)

    def test_stress_damping_and_diffusion(self, grid32):
        g = ScalarField(grid32, np.cos(grid32.tables.x1))
        state = State(0.0, VectorField2.zeros(grid32), SymTensorField2.isotropic(g))
        params = ModelParams(a=2.0, mu=0.5, alpha=0.0, rotation_mode="corotation")
        dtau = rhs_stress(state, params)
        assert np.allclose(dtau.t11.values(), -2.5 * g.values(), atol=1e-12)
        assert np.allclose(dtau.t12.values(), 0.0, atol=1e-12)

    def test_time_derivative_bundles_both(self, tg_state, full_params):
        d = time_derivative(tg_state, full_params)
        assert isinstance(d, State)
        assert np.allclose(d.u.u1.values(), rhs_velocity(tg_state, full_params).u1.values())

    def test_pressure_of_taylor_green(self, grid32):
        # steady Euler: grad P balances -u.grad u, P = (cos 2x1 + cos 2x2) / 4
        state = taylor_green_state(grid32, epsilon=0.0)
        params = ModelParams(mu=0.0, alpha=0.0, rotation_mode="corotation")
        p = pressure_recover(state, params)
        x1, x2 = grid32.tables.x1, grid32.tables.x2
        assert np.allclose(p.values(), 0.25 * (np.cos(2 * x1) + np.cos(2 * x2)), atol=1e-12)


class TestStructuralIdentities:

    @pytest.mark.parametrize("mode", ["corotation", "full"])
    def test_gamma_transport_identity(self, grid32, mode):
        params = ModelParams(a=0.3, mu=0.8, nu=0.05, alpha=1.5, b=0.6, rotation_mode=mode)
        state = band_state(grid32, seed=11)
        dstate = time_derivative(state, params)
        residual = gamma_residual(state, dstate, params)
        scale = math.sqrt(spectral_energy(gamma_field(state, params))) + 1.0
        assert residual < 1e-10 * scale

    def test_gamma_residual_converges_under_refinement(self):
        params = ModelParams(a=0.3, mu=1.0, nu=0.0, alpha=1.0, b=0.5, rotation_mode="full")
        residuals = []
        for n in (64, 128):
            state = analytic_state(GridSpec(n=n))
            residuals.append(gamma_residual(state, time_derivative(state, params), params))
        assert residuals[0] > 0.0
        assert residuals[0] >= 8.0 * residuals[1]

    def test_gamma_residual_in_the_linear_regime(self, grid32, full_params):
        state = single_mode_state(grid32, (2, 1), amplitude=1e-8, epsilon=1e-8)
        residual = gamma_residual(state, time_derivative(state, full_params), full_params)
        scale = math.sqrt(spectral_energy(gamma_field(state, full_params)))
        assert scale > 0.0
        assert residual <= 1e-8 * scale

    def test_gamma_of_pure_vorticity(self, grid32):
        state = taylor_green_state(grid32, epsilon=0.0)
        params = ModelParams(mu=2.0, alpha=1.0)
        assert np.allclose(gamma_field(state, params).values(),
                           2.0 * vorticity_part(state.u).values(), atol=1e-12)

    @pytest.mark.parametrize("mode", ["corotation", "full"])
    def test_energy_rate_balance(self, grid32, mode):
        params = ModelParams(a=0.2, mu=0.5, nu=0.1, alpha=1.0, b=0.5, rotation_mode=mode)
        observed, predicted, residual = energy_rate_balance(band_state(grid32, seed=5), params)
        assert residual < 1e-9
        assert observed == pytest.approx(predicted, rel=1e-9, abs=1e-14)

    def test_gamma_identity_without_diffusion(self, grid32):
        state = band_state(grid32, seed=2)
        params = ModelParams(mu=0.0, nu=0.3, alpha=2.0)
        assert gamma_residual(state, time_derivative(state, params), params) < 1e-10
