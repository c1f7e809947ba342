"""Integrating-factor Runge-Kutta time stepping.

The state is advanced as a stack of dealiased spectral coefficients. The
diagonal linear part (nu Lap on u, -a + mu Lap on tau) is integrated exactly
through exponential factors; the nonlinear remainder goes through the explicit
tableau in Lawson form. Velocity is re-projected onto divergence-free fields
after every step.
"""
import logging
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterator, Literal, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from solver.errors import BlowUpError, ConfigError
from solver.model import ModelParams, State, stress_nonlinear, velocity_nonlinear
from solver.spectral_core import GridSpec

logger = logging.getLogger(__name__)

Scheme = Literal["IF-RK4", "IF-SSPRK3"]

SPEED_FLOOR = 1e-12
# IF-SSPRK3 needs exp(+|L| dt/2) on retained modes; beyond this exponent the stage blows up in roundoff
INVERSE_EXPONENT_LIMIT = 30.0
_COMPONENT_WEIGHTS = np.array([1.0, 1.0, 1.0, 2.0, 1.0])


class StepperConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    dt: float = Field(1e-3, gt=0, description="time step (initial step when adapt is on)")
    scheme: Scheme = Field("IF-RK4", description="IF-RK4 or IF-SSPRK3")
    t_end: float = Field(1.0, ge=0, description="final time")
    cfl_safety: float = Field(0.5, gt=0, le=1, description="CFL safety factor")
    adapt: bool = Field(False, description="adjust dt from the CFL condition every step")
    max_dt: Optional[float] = Field(None, gt=0, description="cap for adaptive dt (defaults to dt)")
    hold_velocity: bool = Field(False, description="freeze u and evolve tau only")
    norm_ceiling_factor: float = Field(1e8, gt=1, description="blow-up ceiling as a multiple of the initial H1 norm")

    @property
    def dt_cap(self) -> float:
        return self.max_dt if self.max_dt is not None else self.dt


@dataclass(frozen=True, eq=False)
class StepEvent:
    """One state emitted by ``run``; the flags say what the consumer should do with it."""
    state: State
    step_index: int
    dt: float
    is_record: bool
    is_snapshot: bool
    is_final: bool


@lru_cache(maxsize=32)
def _linear_factors(grid: GridSpec, a: float, mu: float, nu: float, dt: float,
                    hold_velocity: bool, need_inverse: bool) -> Tuple[np.ndarray, np.ndarray, Optional[np.ndarray]]:
    """exp(L dt), exp(L dt/2) and, for IF-SSPRK3, exp(-L dt/2) restricted to retained modes."""
    t = grid.tables
    lin = np.empty((5, grid.n, grid.n))
    lin[0] = lin[1] = 0.0 if hold_velocity else -nu * t.k_sq
    lin[2] = lin[3] = lin[4] = -a - mu * t.k_sq
    full = np.exp(lin * dt)
    half = np.exp(lin * (0.5 * dt))
    inverse = None
    if need_inverse:
        exponent = np.where(t.dealias_mask, -lin * (0.5 * dt), 0.0)
        worst = float(np.max(exponent))
        if worst > INVERSE_EXPONENT_LIMIT:
            raise ConfigError(
                f"IF-SSPRK3 needs exp({worst:.1f}) on retained modes at dt={dt}; reduce stepper.dt or use IF-RK4",
                key="stepper.scheme",
            )
        inverse = np.where(t.dealias_mask, np.exp(exponent), 0.0)
    logger.debug(f"Integrating factors built for dt={dt} (hold_velocity={hold_velocity})")
    return full, half, inverse


def _project_velocity(coeffs: np.ndarray, grid: GridSpec) -> np.ndarray:
    t = grid.tables
    k_dot = (t.kd1 * coeffs[0] + t.kd2 * coeffs[1]) * t.kd_sq_inv
    coeffs[0] = coeffs[0] - t.kd1 * k_dot
    coeffs[1] = coeffs[1] - t.kd2 * k_dot
    return coeffs


def _nonlinear(coeffs: np.ndarray, grid: GridSpec, params: ModelParams, hold_velocity: bool) -> np.ndarray:
    state = State.from_coefficients(grid, coeffs, 0.0)
    out = np.empty_like(coeffs)
    if hold_velocity:
        out[0] = out[1] = 0.0
    else:
        du = velocity_nonlinear(state)
        out[0], out[1] = du.u1.data, du.u2.data
    dtau = stress_nonlinear(state, params)
    out[2], out[3], out[4] = dtau.t11.data, dtau.t12.data, dtau.t22.data
    return np.where(grid.tables.dealias_mask, out, 0.0)


def h1_norm_coefficients(coeffs: np.ndarray, grid: GridSpec) -> float:
    """H1 norm of the stacked (u, tau) coefficients."""
    t = grid.tables
    weight = 1.0 + t.kd1 ** 2 + t.kd2 ** 2
    power = np.abs(coeffs) ** 2 * _COMPONENT_WEIGHTS[:, None, None]
    return math.sqrt(float(np.sum(power * weight)) * grid.box_length ** 2 / grid.n ** 4)


def _advance(x: np.ndarray, dt: float, grid: GridSpec, params: ModelParams, cfg: StepperConfig) -> np.ndarray:
    hold = cfg.hold_velocity
    scheme_needs_inverse = cfg.scheme == "IF-SSPRK3"
    e_full, e_half, e_half_inv = _linear_factors(grid, params.a, params.mu, params.nu, dt, hold, scheme_needs_inverse)

    def n_of(y):
        return _nonlinear(y, grid, params, hold)

    if cfg.scheme == "IF-RK4":
        k1 = n_of(x)
        k2 = n_of(e_half * (x + 0.5 * dt * k1))
        k3 = n_of(e_half * x + 0.5 * dt * k2)
        k4 = n_of(e_full * x + dt * e_half * k3)
        x_new = e_full * x + (dt / 6.0) * (e_full * k1 + 2.0 * e_half * (k2 + k3) + k4)
    else:
        k1 = n_of(x)
        k2 = n_of(e_full * (x + dt * k1))
        k3 = n_of(e_half * x + 0.25 * dt * (e_half * k1 + e_half_inv * k2))
        x_new = e_full * x + dt * (e_full * k1 / 6.0 + k2 / 6.0 + 2.0 * e_half * k3 / 3.0)

    x_new = np.where(grid.tables.dealias_mask, x_new, 0.0)
    if hold:
        x_new[0], x_new[1] = x[0], x[1]
    else:
        x_new = _project_velocity(x_new, grid)
    return x_new


def step(state: State, params: ModelParams, cfg: StepperConfig, dt: Optional[float] = None,
         norm_ceiling: Optional[float] = None) -> State:
    """Advance ``state`` by ``dt`` (default ``cfg.dt``)."""
    dt = cfg.dt if dt is None else dt
    grid = state.grid
    x = np.where(grid.tables.dealias_mask, state.as_spectral().to_coefficients(), 0.0)
    x_new = _advance(x, dt, grid, params, cfg)
    t_new = state.t + dt
    if not np.all(np.isfinite(x_new)):
        raise BlowUpError(f"non-finite field values at t={t_new:.6g}", last_state=state, t=t_new)
    if norm_ceiling is not None:
        h1 = h1_norm_coefficients(x_new, grid)
        if h1 > norm_ceiling:
            raise BlowUpError(
                f"H1 norm {h1:.3e} exceeded the ceiling {norm_ceiling:.3e} at t={t_new:.6g}",
                last_state=state, t=t_new,
            )
    return State.from_coefficients(grid, x_new, t_new)


def max_speed(state: State) -> float:
    u1, u2 = state.u.u1.values(), state.u.u2.values()
    return float(np.max(np.sqrt(u1 ** 2 + u2 ** 2)))


def cfl_dt(state: State, cfg: StepperConfig, previous_dt: Optional[float] = None) -> float:
    """safety * dx / (max|u| + floor), capped by max_dt and by twice the previous dt."""
    dt = cfg.cfl_safety * state.grid.dx / (max_speed(state) + SPEED_FLOOR)
    dt = min(dt, cfg.dt_cap)
    if previous_dt is not None:
        dt = min(dt, 2.0 * previous_dt)
    return dt


def _due(t: float, target: float, dt: float) -> bool:
    """True when ``t`` is the completed step nearest to ``target``."""
    return t >= target - 0.5 * dt - 1e-12 * max(1.0, abs(target))


def run(initial: State, params: ModelParams, cfg: StepperConfig, cadence: float,
        snapshot_times: Sequence[float] = ()) -> Iterator[StepEvent]:
    """Yield the initial state, every recorded or snapshotted state and the final state.

    Records fall on the completed step nearest to each multiple of ``cadence``;
    snapshots likewise for each requested time. Blow-up propagates as
    BlowUpError; events already yielded stay valid.
    """
    grid = initial.grid
    state = State.from_coefficients(
        grid, np.where(grid.tables.dealias_mask, initial.as_spectral().to_coefficients(), 0.0), initial.t
    )
    if not cfg.hold_velocity:
        state = State.from_coefficients(grid, _project_velocity(state.to_coefficients(), grid), state.t)
    t0, t_end = state.t, cfg.t_end
    h1_initial = h1_norm_coefficients(state.to_coefficients(), grid)
    ceiling = cfg.norm_ceiling_factor * h1_initial if h1_initial > 0 else None
    pending_snapshots = sorted(s for s in snapshot_times if s >= t0)
    if pending_snapshots and pending_snapshots[-1] > t_end:
        logger.warning(f"Snapshot times beyond t_end={t_end} are ignored: {[s for s in pending_snapshots if s > t_end]}")
        pending_snapshots = [s for s in pending_snapshots if s <= t_end]

    logger.info(f"Integrating {cfg.scheme} from t={t0} to t={t_end}, dt={cfg.dt}, adapt={cfg.adapt}")
    dt = cfl_dt(state, cfg) if cfg.adapt else cfg.dt
    next_record = t0 + cadence if cadence > 0 else math.inf
    snap_now = bool(pending_snapshots) and _due(t0, pending_snapshots[0], dt)
    if snap_now:
        pending_snapshots.pop(0)
    finished = t_end - t0 <= 1e-12 * max(1.0, abs(t_end))
    yield StepEvent(state, 0, 0.0, True, snap_now, finished)

    index = 0
    while not finished:
        if cfg.adapt:
            dt = cfl_dt(state, cfg, previous_dt=dt)
        remaining = t_end - state.t
        dt_step = min(dt, remaining)
        state = step(state, params, cfg, dt=dt_step, norm_ceiling=ceiling)
        index += 1
        finished = t_end - state.t <= 1e-12 * max(1.0, abs(t_end))
        if finished:
            state = state.at_time(t_end)

        is_record = False
        while _due(state.t, next_record, dt_step):
            is_record = True
            next_record += cadence
        is_snapshot = False
        while pending_snapshots and _due(state.t, pending_snapshots[0], dt_step):
            is_snapshot = True
            pending_snapshots.pop(0)
        if is_record or is_snapshot or finished:
            yield StepEvent(state, index, dt_step, is_record or finished, is_snapshot, finished)
    logger.info(f"Integration finished after {index} steps at t={state.t}")
