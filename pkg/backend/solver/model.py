"""Right-hand sides of the Oldroyd-B family in projected, divergence-free form.

    du/dt   = P(-u.grad u + div tau) + nu Lap u
    dtau/dt = -u.grad tau - a tau - Q(grad u, tau) + alpha D(u) + mu Lap tau

with Q(grad u, tau) = tau W - W tau + b (D tau + tau D). Co-rotation drops the
b-part of Q. Index convention: (grad u)_ij = d_j u_i, so grad u = D + W with
W = [[0, -w/2], [w/2, 0]] and w = d1 u2 - d2 u1.
"""
import logging
from dataclasses import dataclass, replace
from typing import Literal, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from solver.spectral_core import (
    GridSpec,
    ScalarField,
    SymTensorField2,
    VectorField2,
    advect,
    advect_tensor,
    advect_vector,
    curl2d,
    dealias_any,
    divergence,
    divergence_tensor,
    fft2,
    gradient,
    gradient_energy,
    inner,
    inverse_laplacian,
    laplacian,
    leray_project,
    riesz_R,
    spectral_energy,
    truncate,
)
from solver.littlewood_paley import riesz_commutator

logger = logging.getLogger(__name__)

RotationMode = Literal["corotation", "full"]


class ModelParams(BaseModel):
    """Coefficients of the stress equation and the momentum equation."""
    model_config = ConfigDict(frozen=True, extra="forbid")

    a: float = Field(0.0, ge=0, description="damping coefficient")
    mu: float = Field(1.0, ge=0, description="stress diffusivity")
    nu: float = Field(0.0, ge=0, description="viscosity")
    alpha: float = Field(1.0, ge=0, description="coupling of D(u) into the stress equation")
    b: float = Field(1.0, ge=-1, le=1, description="slip parameter")
    rotation_mode: RotationMode = Field("full", description="corotation drops the b-part of Q")

    @model_validator(mode="after")
    def _check_alpha(self) -> "ModelParams":
        if self.rotation_mode == "full" and self.alpha <= 0:
            raise ValueError(f"model.alpha must be > 0 in full mode, got {self.alpha}")
        return self

    @classmethod
    def corotation_inviscid(cls, a: float = 1.0, mu: float = 1.0) -> "ModelParams":
        return cls(a=a, mu=mu, nu=0.0, alpha=0.0, b=0.0, rotation_mode="corotation")

    @classmethod
    def noncorotation_inviscid(cls) -> "ModelParams":
        return cls(a=0.0, mu=1.0, nu=0.0, alpha=1.0, b=1.0, rotation_mode="full")

    @property
    def slip(self) -> float:
        """Effective b: zero in co-rotation mode."""
        return 0.0 if self.rotation_mode == "corotation" else self.b


@dataclass(frozen=True, eq=False)
class State:
    t: float
    u: VectorField2
    tau: SymTensorField2

    @property
    def grid(self) -> GridSpec:
        return self.u.grid

    def as_spectral(self) -> "State":
        return State(self.t, self.u.as_spectral(), self.tau.as_spectral())

    def as_real(self) -> "State":
        return State(self.t, self.u.as_real(), self.tau.as_real())

    def dealiased(self) -> "State":
        return State(self.t, dealias_any(self.u), dealias_any(self.tau))

    def at_time(self, t: float) -> "State":
        return replace(self, t=t)

    def to_coefficients(self) -> np.ndarray:
        """Stacked spectral coefficients (u1, u2, t11, t12, t22), shape (5, n, n)."""
        comps = (*self.u.components(), *self.tau.components())
        return np.stack([c.coefficients() for c in comps])

    @classmethod
    def from_coefficients(cls, grid: GridSpec, coeffs: np.ndarray, t: float) -> "State":
        f = [ScalarField(grid, coeffs[i], True) for i in range(5)]
        return cls(t, VectorField2(f[0], f[1]), SymTensorField2(f[2], f[3], f[4]))

    def is_finite(self) -> bool:
        comps = (*self.u.components(), *self.tau.components())
        return all(np.all(np.isfinite(c.data)) for c in comps)


# --- Kinematics ---

def deformation(u: VectorField2) -> SymTensorField2:
    """D(u) = (grad u + grad u^T) / 2."""
    g1 = gradient(u.u1)
    g2 = gradient(u.u2)
    return SymTensorField2(g1.u1, (g1.u2 + g2.u1) * 0.5, g2.u2)


def vorticity_part(u: VectorField2) -> ScalarField:
    """Scalar w with W(u) = [[0, -w/2], [w/2, 0]]."""
    return curl2d(u)


def bilinear_Q(u: VectorField2, tau: SymTensorField2, params: ModelParams) -> SymTensorField2:
    """tau W - W tau + b (D tau + tau D), dealiased, in tau's representation."""
    half_w = 0.5 * vorticity_part(u.as_spectral()).values()
    p, q, r = (c.values() for c in tau.components())
    q11 = 2.0 * q * half_w
    q12 = half_w * (r - p)
    q22 = -q11
    b = params.slip
    if b != 0.0:
        d = deformation(u.as_spectral())
        d11, d12, d22 = (c.values() for c in d.components())
        q11 = q11 + b * 2.0 * (d11 * p + d12 * q)
        q12 = q12 + b * (q * (d11 + d22) + d12 * (p + r))
        q22 = q22 + b * 2.0 * (d12 * q + d22 * r)
    grid = tau.grid
    return SymTensorField2(*(tau.t11.like(truncate(fft2(v), grid)) for v in (q11, q12, q22)))


# --- Right-hand sides ---

def velocity_nonlinear(state: State) -> VectorField2:
    """P(-u.grad u + div tau)."""
    forcing = divergence_tensor(state.tau) - advect_vector(state.u, state.u)
    return leray_project(forcing)


def stress_nonlinear(state: State, params: ModelParams) -> SymTensorField2:
    """-u.grad tau - Q + alpha D(u); the linear damping and diffusion are excluded."""
    out = -advect_tensor(state.u, state.tau) - bilinear_Q(state.u, state.tau, params)
    if params.alpha != 0.0:
        out = out + deformation(state.u) * params.alpha
    return out


def rhs_velocity(state: State, params: ModelParams) -> VectorField2:
    out = velocity_nonlinear(state)
    if params.nu != 0.0:
        out = out + VectorField2(laplacian(state.u.u1), laplacian(state.u.u2)) * params.nu
    return out


def rhs_stress(state: State, params: ModelParams) -> SymTensorField2:
    out = stress_nonlinear(state, params)
    if params.a != 0.0:
        out = out - state.tau * params.a
    if params.mu != 0.0:
        out = out + SymTensorField2(*(laplacian(c) for c in state.tau.components())) * params.mu
    return out


def time_derivative(state: State, params: ModelParams) -> State:
    return State(state.t, rhs_velocity(state, params), rhs_stress(state, params))


def pressure_recover(state: State, params: ModelParams) -> ScalarField:
    """Mean-zero P solving Lap P = div(div tau - u.grad u)."""
    forcing = divergence_tensor(state.tau) - advect_vector(state.u, state.u)
    return inverse_laplacian(divergence(forcing))


# --- Structural field ---

def gamma_field(state: State, params: ModelParams) -> ScalarField:
    """Gamma = mu w - R tau."""
    return vorticity_part(state.u) * params.mu - riesz_R(state.tau)


def gamma_transport_source(state: State, params: ModelParams) -> ScalarField:
    """a R tau + R Q + [R, u.grad] tau - (alpha/2) w + mu nu Lap w."""
    tau = state.tau
    w = vorticity_part(state.u)
    source = riesz_R(tau) * params.a + riesz_R(bilinear_Q(state.u, tau, params))
    source = source + riesz_commutator(state.u, tau)
    source = source - w * (0.5 * params.alpha)
    if params.nu != 0.0 and params.mu != 0.0:
        source = source + laplacian(w) * (params.mu * params.nu)
    return source


def gamma_residual(state: State, dstate: State, params: ModelParams) -> float:
    """L^2 norm of dGamma/dt + u.grad Gamma minus its transport source."""
    d_gamma = vorticity_part(dstate.u) * params.mu - riesz_R(dstate.tau)
    gamma = gamma_field(state, params)
    lhs = d_gamma + advect(state.u, gamma)
    residual = lhs - gamma_transport_source(state, params)
    return float(np.sqrt(spectral_energy(residual)))


# --- Energy balance ---

def energy_rate_balance(state: State, params: ModelParams) -> Tuple[float, float, float]:
    """(observed, predicted, relative residual) for d/dt (|u|^2/2 + |tau|^2/2).

    Observed pairs the state with its time derivative; predicted is
    -nu|grad u|^2 - a|tau|^2 - mu|grad tau|^2 - <Q, tau> + (alpha - 1)<D(u), tau>.
    """
    dstate = time_derivative(state, params)
    observed = inner(state.u, dstate.u) + inner(state.tau, dstate.tau)
    predicted = (
        -params.nu * gradient_energy(state.u)
        - params.a * spectral_energy(state.tau)
        - params.mu * gradient_energy(state.tau)
        - inner(bilinear_Q(state.u, state.tau, params), state.tau)
        + (params.alpha - 1.0) * inner(deformation(state.u), state.tau)
    )
    scale = max(abs(observed), abs(predicted), np.finfo(float).tiny)
    return observed, predicted, abs(observed - predicted) / scale
