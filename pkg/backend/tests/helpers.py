"""State builders shared by the test modules."""
import json

import numpy as np

from solver.diagnostics import DiagnosticsRecord
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
)


def taylor_green_state(grid: GridSpec, amplitude: float = 1.0, epsilon: float = 0.5) -> State:
    """Taylor-Green velocity with a stress built from the same modes."""
    x1, x2 = grid.tables.x1, grid.tables.x2
    k = grid.k0
    s1, c1, s2, c2 = np.sin(k * x1), np.cos(k * x1), np.sin(k * x2), np.cos(k * x2)
    u = VectorField2(ScalarField(grid, amplitude * s1 * c2), ScalarField(grid, -amplitude * c1 * s2))
    tau = SymTensorField2(
        ScalarField(grid, epsilon * c1 * c2),
        ScalarField(grid, epsilon * s1 * s2),
        ScalarField(grid, -epsilon * c1 * c2),
    )
    return State(0.0, u, tau)


def analytic_state(grid: GridSpec, c: float = 1.1) -> State:
    """Smooth state whose Fourier coefficients decay like (c - sqrt(c^2 - 1))^|m|, so no grid resolves it exactly."""
    x1, x2 = grid.k0 * grid.tables.x1, grid.k0 * grid.tables.x2
    psi = ScalarField(grid, np.sin(x2) / (c - np.cos(x1)) + np.cos(x1) / (c - np.cos(x2)))
    tau = SymTensorField2(
        ScalarField(grid, 0.1 / (c - np.cos(x1 + x2))),
        ScalarField(grid, 0.1 * np.sin(x1) / (c - np.cos(x2))),
        ScalarField(grid, 0.1 * np.cos(x2) / (c - np.sin(x1))),
    )
    return State(0.0, perp_gradient(psi), tau)


def band_noise(grid: GridSpec, rng: np.random.Generator, shell: int = 3) -> np.ndarray:
    """Mean-zero real noise on modes with max(|m1|, |m2|) <= shell."""
    t = grid.tables
    band = (np.maximum(np.abs(t.m1), np.abs(t.m2)) <= shell) & (t.k_sq > 0)
    return ifft2(np.where(band, fft2(rng.standard_normal((grid.n, grid.n))), 0.0))


def band_state(grid: GridSpec, seed: int = 1, scale: float = 0.1, shell: int = 3) -> State:
    """Random divergence-free velocity and symmetric stress inside the dealiased band."""
    rng = np.random.default_rng(seed)
    psi = ScalarField(grid, band_noise(grid, rng, shell))
    u = leray_project(perp_gradient(psi))
    u = u * (scale / float(np.max(np.abs(u.u1.values()))))
    tau = SymTensorField2(*(ScalarField(grid, scale * band_noise(grid, rng, shell)) for _ in range(3)))
    return State(0.0, u, tau)


def synthetic(times, **columns):
    """Records whose named attributes follow the given callables of t."""
    records = []
    for t in times:
        rec = DiagnosticsRecord(t=float(t))
        for name, fn in columns.items():
            value = fn(t)
            if name == "l2_u":
                rec.lp_norms_u[2.0] = value
            elif name == "l2_tau":
                rec.lp_norms_tau[2.0] = value
            else:
                setattr(rec, name, value)
        records.append(rec)
    return records


# Corotation run with alpha = 0 that finishes in a handful of steps.
RUN_CONFIG = """
grid.n = 32
model.rotation_mode = corotation
model.a = 1.0
model.mu = 1.0
model.alpha = 0.0
model.b = 0.0
stepper.dt = 0.01
stepper.t_end = 0.2
initial_data.name = taylor_green
initial_data.amplitude = 0.1
initial_data.epsilon = 0.1
diagnostics.cadence = 0.05
outputs.snapshot_times = 0.1
"""


def write_config(directory, text=RUN_CONFIG, name="run.cfg"):
    directory.mkdir(parents=True, exist_ok=True)
    path = directory / name
    path.write_text(text, encoding="utf-8")
    return path


def write_check(directory, name, **fields):
    path = directory / f"{name}.json"
    path.write_text(json.dumps(fields), encoding="utf-8")
    return path
