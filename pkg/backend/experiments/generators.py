"""Initial-data library.

Every generator returns a State at t = 0 with real fields, a symmetric stress
and a velocity that is divergence-free by construction (built from a stream
function or a Leray projection). ``amplitude`` scales the velocity and
``epsilon`` scales the stress throughout.
"""
import logging
import math
from typing import Callable, Dict, Literal, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from solver.errors import ConfigError, ResolutionError
from solver.integrator import h1_norm_coefficients
from solver.linear_analysis import single_mode_state
from solver.model import State
from solver.spectral_core import (
    GridSpec,
    ScalarField,
    SymTensorField2,
    VectorField2,
    fft2,
    ifft2,
    leray_project,
    perp_gradient,
    spectral_energy,
)

logger = logging.getLogger(__name__)

GeneratorName = Literal[
    "taylor_green", "localized_vortex", "localized_isotropic_tau", "random_band", "single_mode", "constant_tau",
]

MIN_POINTS_PER_WIDTH = 4
# Gaussian profiles are treated as compactly supported when they fall below this at the box edge
EDGE_TOLERANCE = 1e-12


class GeneratorSpec(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    name: GeneratorName = Field(..., description="initial-data generator")
    amplitude: float = Field(1.0, description="velocity scale A")
    epsilon: float = Field(0.0, description="stress scale")
    width: Optional[float] = Field(None, gt=0, description="Gaussian width w of localized data (default L/20)")
    mode: Tuple[int, int] = Field((1, 0), description="integer wavevector of single_mode")
    band_low: int = Field(2, ge=1, description="lowest shell |m| of random_band")
    band_high: int = Field(4, ge=1, description="highest shell |m| of random_band")
    h1_norm: Optional[float] = Field(None, gt=0, description="rescale (u, tau) to this H1 norm")

    @model_validator(mode="after")
    def _check_band(self) -> "GeneratorSpec":
        if self.band_high < self.band_low:
            raise ValueError(f"band_high ({self.band_high}) must be >= band_low ({self.band_low})")
        return self


def _centered_radius_sq(grid: GridSpec) -> np.ndarray:
    t = grid.tables
    c = 0.5 * grid.box_length
    return (t.x1 - c) ** 2 + (t.x2 - c) ** 2


def _gaussian(grid: GridSpec, spec: GeneratorSpec) -> np.ndarray:
    width = spec.width if spec.width is not None else grid.box_length / 20.0
    points = width / grid.dx
    if points < MIN_POINTS_PER_WIDTH:
        raise ResolutionError(
            f"width {width:.4g} spans {points:.2f} grid points; at least {MIN_POINTS_PER_WIDTH} are needed at n={grid.n}"
        )
    edge = math.exp(-(0.5 * grid.box_length / width) ** 2)
    if edge > EDGE_TOLERANCE:
        logger.warning(f"Gaussian of width {width:.4g} is {edge:.2e} at the box edge; it is not effectively localized")
    return np.exp(-_centered_radius_sq(grid) / width ** 2)


def _zero_u(grid: GridSpec) -> VectorField2:
    return VectorField2.zeros(grid)


def _isotropic(grid: GridSpec, values: np.ndarray) -> SymTensorField2:
    return SymTensorField2.isotropic(ScalarField(grid, values))


def _taylor_green(grid: GridSpec, spec: GeneratorSpec, rng) -> State:
    t = grid.tables
    k = grid.k0
    s1, c1 = np.sin(k * t.x1), np.cos(k * t.x1)
    s2, c2 = np.sin(k * t.x2), np.cos(k * t.x2)
    u = VectorField2(ScalarField(grid, spec.amplitude * s1 * c2), ScalarField(grid, -spec.amplitude * c1 * s2))
    eps = spec.epsilon
    tau = SymTensorField2(
        ScalarField(grid, eps * c1 * c2),
        ScalarField(grid, eps * s1 * s2),
        ScalarField(grid, -eps * c1 * c2),
    )
    return State(0.0, u, tau)


def _localized_vortex(grid: GridSpec, spec: GeneratorSpec, rng) -> State:
    g = _gaussian(grid, spec)
    u = perp_gradient(ScalarField(grid, spec.amplitude * g))
    return State(0.0, u, _isotropic(grid, spec.epsilon * g))


def _localized_isotropic_tau(grid: GridSpec, spec: GeneratorSpec, rng) -> State:
    return State(0.0, _zero_u(grid), _isotropic(grid, spec.epsilon * _gaussian(grid, spec)))


def _band_noise(grid: GridSpec, spec: GeneratorSpec, rng) -> np.ndarray:
    t = grid.tables
    shell = np.maximum(np.abs(t.m1), np.abs(t.m2))
    band = (shell >= spec.band_low) & (shell <= spec.band_high) & t.dealias_mask
    coeffs = fft2(rng.standard_normal((grid.n, grid.n)))
    return ifft2(np.where(band, coeffs, 0.0))


def _scaled(f, target: float):
    energy = spectral_energy(f)
    if energy == 0.0:
        return f * 0.0
    return f * (target / math.sqrt(energy))


def _random_band(grid: GridSpec, spec: GeneratorSpec, rng) -> State:
    if spec.band_high > grid.cutoff:
        raise ResolutionError(f"random_band shell {spec.band_high} exceeds the dealiasing cutoff {grid.cutoff:.1f}")
    psi = ScalarField(grid, _band_noise(grid, spec, rng))
    u = leray_project(perp_gradient(psi))
    tau = SymTensorField2(*(ScalarField(grid, _band_noise(grid, spec, rng)) for _ in range(3)))
    return State(0.0, _scaled(u, spec.amplitude), _scaled(tau, spec.epsilon))


def _single_mode(grid: GridSpec, spec: GeneratorSpec, rng) -> State:
    return single_mode_state(grid, spec.mode, spec.amplitude, spec.epsilon)


def _constant_tau(grid: GridSpec, spec: GeneratorSpec, rng) -> State:
    return State(0.0, _zero_u(grid), _isotropic(grid, np.full((grid.n, grid.n), spec.epsilon)))


GENERATORS: Dict[str, Callable[[GridSpec, GeneratorSpec, np.random.Generator], State]] = {
    "taylor_green": _taylor_green,
    "localized_vortex": _localized_vortex,
    "localized_isotropic_tau": _localized_isotropic_tau,
    "random_band": _random_band,
    "single_mode": _single_mode,
    "constant_tau": _constant_tau,
}


def generate_initial(spec: GeneratorSpec, grid: GridSpec, seed: int = 0) -> State:
    """Build the t = 0 state named by ``spec``; ``seed`` fixes randomized data."""
    builder = GENERATORS.get(spec.name)
    if builder is None:
        raise ConfigError(f"unknown generator '{spec.name}'", key="initial_data.name")
    rng = np.random.default_rng(seed)
    state = builder(grid, spec, rng).as_real()
    if spec.h1_norm is not None:
        current = h1_norm_coefficients(state.to_coefficients(), grid)
        if current == 0.0:
            raise ConfigError("initial_data.h1_norm cannot rescale an all-zero state", key="initial_data.h1_norm")
        factor = spec.h1_norm / current
        state = State(0.0, state.u * factor, state.tau * factor)
    logger.info(f"Generated '{spec.name}' initial data on n={grid.n}, L={grid.box_length:.4g}")
    return state
