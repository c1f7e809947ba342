"""
Tests for the single-mode oracle of the linearized noncorotation system.
"""
import cmath
import math

import numpy as np
import pytest
from scipy.linalg import expm

from solver.errors import ContractViolation
from solver.linear_analysis import (
    ModeState,
    dispersion_table,
    evolve_mode,
    linear_regime_check,
    mode_eigenvalues,
    mode_from_state,
    mode_propagator,
    single_mode_state,
)
from solver.model import ModelParams
from solver.spectral_core import GridSpec, max_divergence


def system_matrix(k, coupling, diffusivity):
    return np.array([[0.0, 1.0], [-coupling * k * k, -diffusivity * k * k]])


class TestEigenvalues:

    def test_double_root(self):
        plus, minus = mode_eigenvalues(2.0, coupling=1.0, diffusivity=1.0)
        assert plus == pytest.approx(-2.0)
        assert minus == pytest.approx(-2.0)

    def test_oscillatory_branch(self):
        plus, minus = mode_eigenvalues(1.0, coupling=1.0, diffusivity=1.0)
        assert plus == pytest.approx(complex(-0.5, math.sqrt(3) / 2))
        assert minus == pytest.approx(plus.conjugate())

    @pytest.mark.parametrize("k", [3.0, 10.0, 1e3])
    def test_overdamped_roots(self, k):
        plus, minus = mode_eigenvalues(k, coupling=1.0, diffusivity=1.0)
        assert plus.imag == 0.0 and minus.imag == 0.0
        assert plus.real > minus.real
        assert plus * minus == pytest.approx(k * k, rel=1e-12)
        assert plus + minus == pytest.approx(-k * k, rel=1e-12)
        # the slow root tends to -coupling/diffusivity
        if k > 100:
            assert plus.real == pytest.approx(-1.0, rel=1e-5)

    def test_matches_matrix_eigenvalues(self):
        for k in (0.5, 1.7, 2.0, 4.2):
            expected = sorted(np.linalg.eigvals(system_matrix(k, 0.7, 0.3)), key=lambda z: (z.real, z.imag))
            got = sorted(mode_eigenvalues(k, 0.7, 0.3), key=lambda z: (z.real, z.imag))
            assert got == pytest.approx(expected, rel=1e-7, abs=1e-7)

    def test_rejects_zero_wavenumber(self):
        with pytest.raises(ContractViolation):
            mode_eigenvalues(0.0)

    def test_dispersion_table_rows(self):
        rows = dispersion_table([1.0, 2.0], coupling=1.0, diffusivity=1.0)
        assert [r[0] for r in rows] == [1.0, 2.0]
        assert rows[0][2] == pytest.approx(math.sqrt(3) / 2)
        assert rows[1][1] == pytest.approx(-2.0) and rows[1][3] == pytest.approx(-2.0)


class TestPropagator:

    @pytest.mark.parametrize("k", [0.3, 1.0, 2.0, 2.0 + 1e-9, 5.0])
    @pytest.mark.parametrize("t", [0.0, 0.1, 1.0, 4.0])
    def test_matches_matrix_exponential(self, k, t):
        expected = expm(system_matrix(k, 1.0, 1.0) * t)
        assert np.allclose(mode_propagator(k, t, 1.0, 1.0), expected, rtol=1e-10, atol=1e-12)

    def test_stiff_mode_does_not_overflow(self):
        prop = mode_propagator(300.0, 10.0, coupling=1.0, diffusivity=1.0)
        assert np.all(np.isfinite(prop))
        assert prop[0, 0] == pytest.approx(math.exp(-10.0), rel=1e-4)

    def test_semigroup_property(self):
        m0 = ModeState((2.0, 0.0), 0.5 + 0.1j, -0.2j)
        once = evolve_mode(m0, 1.5, 1.0, 1.0)
        twice = evolve_mode(evolve_mode(m0, 0.7, 1.0, 1.0), 0.8, 1.0, 1.0)
        assert once.uhat == pytest.approx(twice.uhat, rel=1e-12)
        assert once.vhat == pytest.approx(twice.vhat, rel=1e-12)

    def test_defective_mode_keeps_the_secular_term(self):
        # at the double root the solution with v0 = 0 is u0 (1 + 2t) e^{-2t}
        m0 = ModeState((2.0, 0.0), 1.0 + 0j, 0j)
        out = evolve_mode(m0, 1.0, coupling=1.0, diffusivity=1.0)
        assert out.uhat == pytest.approx(3.0 * math.exp(-2.0), rel=1e-12)

    def test_rejects_negative_time(self):
        with pytest.raises(ContractViolation):
            evolve_mode(ModeState((1.0, 0.0), 1 + 0j, 0j), -1.0)


class TestModeExtraction:

    def test_single_mode_amplitudes(self, grid32):
        state = single_mode_state(grid32, (1, 0), amplitude=0.4, epsilon=0.2)
        assert max_divergence(state.u) < 1e-13
        m = mode_from_state(state, (1, 0))
        assert m.uhat == pytest.approx(0.2)
        assert m.vhat == pytest.approx(0.1j)

    def test_diagonal_mode(self, grid32):
        state = single_mode_state(grid32, (1, 1), amplitude=1.0, epsilon=0.0)
        m = mode_from_state(state, (1, 1))
        assert m.k_mag == pytest.approx(math.sqrt(2))
        assert abs(m.uhat) == pytest.approx(0.5)
        assert cmath.isclose(m.vhat, 0j, abs_tol=1e-15)

    def test_zero_mode_rejected(self, grid32):
        with pytest.raises(ContractViolation):
            single_mode_state(grid32, (0, 0), 1.0, 1.0)


class TestLinearRegime:

    @pytest.mark.parametrize("mode", [(1, 0), (2, 0), (1, 1)])
    def test_solver_follows_the_oracle(self, mode):
        deviation = linear_regime_check(GridSpec(n=32), mode=mode, t_end=2.0, dt=1e-2, samples=20)
        assert deviation < 1e-4

    def test_requires_undamped_inviscid_model(self):
        params = ModelParams(a=1.0, mu=1.0, alpha=2.0)
        with pytest.raises(ContractViolation):
            linear_regime_check(GridSpec(n=16), params)
