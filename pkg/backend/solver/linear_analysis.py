"""Closed-form oracle for the linearized noncorotation system.

Dropping the quadratic terms (a = nu = 0) leaves, for u and v = P div tau,

    du/dt = v,    dv/dt = c Lap u + mu Lap v,    c = alpha / 2,

because div D(u) = Lap u / 2 for divergence-free u. On one Fourier mode of
wavenumber |k| this is the 2x2 system A = [[0, 1], [-c k^2, -mu k^2]], whose
characteristic polynomial is lambda^2 + mu k^2 lambda + c k^2. With alpha = 2
and mu = 1 the mode at |k| = 2 is a double root.
"""
import logging
import math
from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np

from solver.errors import ContractViolation
from solver.integrator import StepperConfig, run
from solver.model import ModelParams, State
from solver.spectral_core import GridSpec, ScalarField, SymTensorField2, VectorField2

logger = logging.getLogger(__name__)

# Below this |d| t the exponential uses its power series in d^2 t^2
SERIES_THRESHOLD = 1e-3


@dataclass(frozen=True)
class ModeState:
    """Amplitudes of u and P div tau along k_perp/|k| for the mode exp(i k.x)."""
    k: Tuple[float, float]
    uhat: complex
    vhat: complex

    @property
    def k_mag(self) -> float:
        return math.hypot(*self.k)


def mode_eigenvalues(k_mag: float, coupling: float = 1.0, diffusivity: float = 1.0) -> Tuple[complex, complex]:
    """Roots of lambda^2 + diffusivity k^2 lambda + coupling k^2, larger real part first."""
    if k_mag <= 0:
        raise ContractViolation(f"mode_eigenvalues needs k_mag > 0, got {k_mag}")
    b = diffusivity * k_mag ** 2
    c = coupling * k_mag ** 2
    disc = b * b - 4.0 * c
    if disc < 0:
        re, im = -0.5 * b, 0.5 * math.sqrt(-disc)
        return complex(re, im), complex(re, -im)
    q = -0.5 * (b + math.copysign(math.sqrt(disc), b))
    if q == 0.0:
        return 0j, 0j
    roots = sorted((complex(q), complex(c / q)), key=lambda z: z.real, reverse=True)
    return roots[0], roots[1]


def dispersion_table(k_values: Sequence[float], coupling: float = 1.0,
                     diffusivity: float = 1.0) -> List[Tuple[float, float, float, float, float]]:
    """Rows (k, Re l+, Im l+, Re l-, Im l-)."""
    rows = []
    for k in k_values:
        lp, lm = mode_eigenvalues(k, coupling, diffusivity)
        rows.append((float(k), lp.real, lp.imag, lm.real, lm.imag))
    return rows


def mode_propagator(k_mag: float, t: float, coupling: float = 1.0, diffusivity: float = 1.0) -> np.ndarray:
    """exp(A t) for A = [[0, 1], [-c k^2, -mu k^2]].

    Written as e^{mt}[cosh(dt) I + sinh(dt)/d (A - mI)] with m = tr A / 2 and
    d^2 = m^2 - det A; both scalar factors are entire in d^2, so the defective
    case d = 0 needs no special branch beyond the series.
    """
    if t < 0:
        raise ContractViolation(f"evolve_mode needs t >= 0, got {t}")
    k2 = k_mag ** 2
    a = np.array([[0.0, 1.0], [-coupling * k2, -diffusivity * k2]])
    m = -0.5 * diffusivity * k2
    det = coupling * k2
    d_sq = m * m - det
    z = d_sq * t * t
    if abs(z) < SERIES_THRESHOLD ** 2:
        grow = math.exp(m * t)
        ch = grow * (1.0 + z / 2.0 + z * z / 24.0 + z ** 3 / 720.0)
        sh = grow * t * (1.0 + z / 6.0 + z * z / 120.0 + z ** 3 / 5040.0)
    elif d_sq > 0:
        s = math.sqrt(d_sq)
        # m + s computed without cancellation: (m + s)(m - s) = det
        fast = math.exp((m - s) * t)
        slow = math.exp(-det / (s - m) * t) if s - m != 0 else 1.0
        ch = 0.5 * (slow + fast)
        sh = 0.5 * (slow - fast) / s
    else:
        s = math.sqrt(-d_sq)
        grow = math.exp(m * t)
        ch = grow * math.cos(s * t)
        sh = grow * math.sin(s * t) / s
    return ch * np.eye(2) + sh * (a - m * np.eye(2))


def evolve_mode(m0: ModeState, t: float, coupling: float = 1.0, diffusivity: float = 1.0) -> ModeState:
    if m0.k_mag == 0:
        raise ContractViolation("evolve_mode needs a nonzero wavevector")
    prop = mode_propagator(m0.k_mag, t, coupling, diffusivity)
    uhat = prop[0, 0] * m0.uhat + prop[0, 1] * m0.vhat
    vhat = prop[1, 0] * m0.uhat + prop[1, 1] * m0.vhat
    return ModeState(m0.k, complex(uhat), complex(vhat))


def _perp(k: Tuple[float, float]) -> Tuple[float, float]:
    mag = math.hypot(*k)
    return -k[1] / mag, k[0] / mag


def mode_from_state(state: State, mode: Tuple[int, int]) -> ModeState:
    """Projected amplitudes of the grid mode (m1, m2), normalized so cos(k.x) has amplitude 1/2."""
    grid = state.grid
    n = grid.n
    i, j = mode[0] % n, mode[1] % n
    k = (grid.k0 * mode[0], grid.k0 * mode[1])
    if k == (0.0, 0.0):
        raise ContractViolation("mode_from_state needs a nonzero mode")
    e1, e2 = _perp(k)
    u1, u2 = (c.coefficients()[i, j] for c in state.u.components())
    t11, t12, t22 = (c.coefficients()[i, j] for c in state.tau.components())
    div1 = 1j * (k[0] * t11 + k[1] * t12)
    div2 = 1j * (k[0] * t12 + k[1] * t22)
    scale = 1.0 / n ** 2
    return ModeState(k, complex((e1 * u1 + e2 * u2) * scale), complex((e1 * div1 + e2 * div2) * scale))


def single_mode_state(grid: GridSpec, mode: Tuple[int, int], amplitude: float, epsilon: float) -> State:
    """u = A k_perp/|k| cos(k.x), tau = eps cos(k.x) [[0, 1], [1, 0]]."""
    t = grid.tables
    k = (grid.k0 * mode[0], grid.k0 * mode[1])
    if k == (0.0, 0.0):
        raise ContractViolation("single_mode_state needs a nonzero mode")
    e1, e2 = _perp(k)
    wave = np.cos(k[0] * t.x1 + k[1] * t.x2)
    u = VectorField2(ScalarField(grid, amplitude * e1 * wave), ScalarField(grid, amplitude * e2 * wave))
    zero = ScalarField.zeros(grid)
    tau = SymTensorField2(zero, ScalarField(grid, epsilon * wave), zero)
    return State(0.0, u, tau)


def linear_regime_check(grid: GridSpec, params: ModelParams = None, amplitude: float = 1e-8,
                        mode: Tuple[int, int] = (1, 0), t_end: float = 5.0, dt: float = 1e-2,
                        samples: int = 50) -> float:
    """Run the full solver on a tiny single mode and return the max deviation from the oracle.

    The deviation is |(u, v)_solver - (u, v)_oracle| normalized by the initial
    amplitude of the mode, maximized over ``samples`` equally spaced times.
    """
    params = params or ModelParams(a=0.0, mu=1.0, nu=0.0, alpha=2.0, b=1.0, rotation_mode="full")
    if params.a != 0.0 or params.nu != 0.0:
        raise ContractViolation("linear_regime_check compares against the undamped inviscid oracle (a = nu = 0)")
    if amplitude > 1e-6 * grid.box_length:
        logger.warning(f"Amplitude {amplitude} is outside the linear regime for L={grid.box_length}")
    initial = single_mode_state(grid, mode, amplitude, amplitude)
    m0 = mode_from_state(initial, mode)
    scale = math.hypot(abs(m0.uhat), abs(m0.vhat))
    if scale == 0.0:
        return 0.0
    coupling = 0.5 * params.alpha
    cfg = StepperConfig(dt=dt, t_end=t_end, scheme="IF-RK4")
    worst = 0.0
    for event in run(initial, params, cfg, cadence=t_end / samples):
        if not event.is_record:
            continue
        observed = mode_from_state(event.state, mode)
        expected = evolve_mode(m0, event.state.t, coupling, params.mu)
        deviation = math.hypot(abs(observed.uhat - expected.uhat), abs(observed.vhat - expected.vhat)) / scale
        worst = max(worst, deviation)
    logger.info(f"Linear regime check for mode {mode}: max relative deviation {worst:.3e}")
    return worst
