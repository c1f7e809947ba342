"""Dyadic frequency decompositions on the periodic grid.

The radial profiles follow the usual construction: chi is 1 on |xi| <= 3/4 and
vanishes for |xi| >= 4/3, and phi(xi) = chi(xi/2) - chi(xi) is supported in the
annulus 3/4 <= |xi| <= 8/3. Block j multiplies the spectrum by phi(2^-j |k|),
where |k| is the physical wavenumber (rad/length). Sums of consecutive phi
blocks telescope, so the partition of unity is exact up to rounding on every
grid mode.

Nonhomogeneous decompositions use the low block j = -1 (chi) and j = 0..j_max.
Homogeneous decompositions use j = j_min..j_max, where j_min is the lowest
shell that still sees the smallest nonzero wavenumber 2*pi/L. Frequencies below
2*pi/L do not exist on the torus, so homogeneous norms carry that infrared
cutoff.
"""
import logging
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Dict, List, Literal, Sequence, Tuple, Union

import numpy as np

from solver.errors import ContractViolation, PartitionError
from solver.spectral_core import (
    AnyField,
    GridSpec,
    ScalarField,
    SymTensorField2,
    VectorField2,
    advect_tensor,
    divergence,
    fft2,
    gradient,
    ifft2,
    pointwise_magnitude,
    quadrature_lp,
    riesz_R,
    truncate,
    advect,
)

logger = logging.getLogger(__name__)

TransitionProfile = Literal["smooth", "cosine"]

CHI_INNER = 0.75
CHI_OUTER = 4.0 / 3.0
# Relative tolerance for the divergence-free precondition of the commutator
DIVERGENCE_TOLERANCE = 1e-10


def _smooth_step(x: np.ndarray) -> np.ndarray:
    """C-infinity step: 0 for x <= 0, 1 for x >= 1, built from exp(-1/x)."""
    x = np.asarray(x, dtype=float)
    inside = (x > 0) & (x < 1)
    left = np.where(inside, x, 0.5)
    right = 1.0 - left
    f_left = np.exp(-1.0 / left)
    f_right = np.exp(-1.0 / right)
    return np.where(x >= 1, 1.0, np.where(inside, f_left / (f_left + f_right), 0.0))


def _cosine_step(x: np.ndarray) -> np.ndarray:
    """C^1 raised-cosine step with the same endpoints as the smooth one."""
    x = np.clip(np.asarray(x, dtype=float), 0.0, 1.0)
    return 0.5 * (1.0 - np.cos(np.pi * x))


_STEPS = {"smooth": _smooth_step, "cosine": _cosine_step}


@dataclass(frozen=True, eq=False)
class DyadicPartition:
    grid: GridSpec
    j_min: int
    j_max: int
    profile: str
    # phi(2^-j |k|) for every j the grid needs, and chi(|k|) for the low block
    multipliers: Dict[int, np.ndarray] = field(repr=False)
    low_multiplier: np.ndarray = field(repr=False)

    def chi(self, r) -> np.ndarray:
        step = _STEPS[self.profile]
        return 1.0 - step((np.asarray(r, dtype=float) - CHI_INNER) / (CHI_OUTER - CHI_INNER))

    def phi(self, r) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        return self.chi(r / 2.0) - self.chi(r)

    def shell_indices(self, homogeneous: bool) -> List[int]:
        if homogeneous:
            return list(range(self.j_min, self.j_max + 1))
        return list(range(-1, self.j_max + 1))

    def multiplier(self, j: int, homogeneous: bool) -> np.ndarray:
        """Spectral multiplier of block j; zeros outside the covered range."""
        if not homogeneous and j == -1:
            return self.low_multiplier
        lowest = self.j_min if homogeneous else 0
        if j < lowest or j > self.j_max:
            return np.zeros_like(self.low_multiplier)
        return self.multipliers[j]

    def low_pass(self, j: int) -> np.ndarray:
        """Multiplier of S_j = sum of nonhomogeneous blocks below j, i.e. chi(2^-j |k|)."""
        if j <= -1:
            return np.zeros_like(self.low_multiplier)
        return self.chi(self.grid.tables.k_mag / 2.0 ** j)


@dataclass(frozen=True, eq=False)
class ShellDecomposition:
    blocks: Dict[int, AnyField]
    homogeneous: bool

    def reconstruct(self) -> AnyField:
        total = None
        for block in self.blocks.values():
            total = block if total is None else total + block
        return total


@lru_cache(maxsize=8)
def make_partition(grid: GridSpec, transition_profile: TransitionProfile = "smooth") -> DyadicPartition:
    """Build the partition for ``grid``; raises PartitionError if fewer than three shells fit."""
    if transition_profile not in _STEPS:
        raise ContractViolation(f"unknown transition profile '{transition_profile}', expected one of {sorted(_STEPS)}")
    k_mag = grid.tables.k_mag
    k_max = float(np.max(k_mag))
    j_max = math.ceil(math.log2(k_max / CHI_INNER))
    j_min = math.floor(math.log2(CHI_INNER * grid.k0))
    if j_max < 1:
        raise PartitionError(
            f"grid n={grid.n}, L={grid.box_length} hosts fewer than 3 nonhomogeneous shells (j_max={j_max})"
        )
    step = _STEPS[transition_profile]

    def chi(r):
        return 1.0 - step((r - CHI_INNER) / (CHI_OUTER - CHI_INNER))

    multipliers = {}
    for j in range(min(j_min, 0), j_max + 1):
        scaled = k_mag / 2.0 ** j
        mult = chi(scaled / 2.0) - chi(scaled)
        mult.setflags(write=False)
        multipliers[j] = mult
    low = chi(k_mag)
    low.setflags(write=False)
    logger.debug(f"Dyadic partition for n={grid.n}, L={grid.box_length}: j_min={j_min}, j_max={j_max}, profile={transition_profile}")
    return DyadicPartition(grid, j_min, j_max, transition_profile, multipliers, low)


def _apply(f: AnyField, mult: np.ndarray) -> AnyField:
    if isinstance(f, ScalarField):
        return f.like(mult * f.coefficients())
    return type(f)(*(_apply(c, mult) for c in f.components()))


def dyadic_block(f: AnyField, j: int, homogeneous: bool = False,
                 partition: DyadicPartition = None) -> AnyField:
    """Delta_j f (nonhomogeneous, j = -1 is the chi block) or the homogeneous block."""
    partition = partition or make_partition(f.grid)
    return _apply(f, partition.multiplier(j, homogeneous))


def low_frequency_cutoff(f: AnyField, j: int, partition: DyadicPartition = None) -> AnyField:
    """S_j f, the sum of the nonhomogeneous blocks Delta_j' f with j' <= j - 1."""
    partition = partition or make_partition(f.grid)
    return _apply(f, partition.low_pass(j))


def shell_decomposition(f: AnyField, homogeneous: bool = False,
                        partition: DyadicPartition = None) -> ShellDecomposition:
    partition = partition or make_partition(f.grid)
    blocks = {j: _apply(f, partition.multiplier(j, homogeneous)) for j in partition.shell_indices(homogeneous)}
    return ShellDecomposition(blocks, homogeneous)


def _block_lp_norms(fields: Sequence[AnyField], p: float, homogeneous: bool,
                    partition: DyadicPartition) -> List[Tuple[int, float]]:
    """L^p norm of the combined block (|f1|^2 + |f2|^2 + ...)^(1/2) for every shell."""
    grid = partition.grid
    out = []
    if p == 2:
        weights = []
        for f in fields:
            if isinstance(f, ScalarField):
                weights.append((1.0, f.coefficients()))
            elif isinstance(f, VectorField2):
                weights.extend((1.0, c.coefficients()) for c in f.components())
            else:
                weights.extend(zip((1.0, 2.0, 1.0), (c.coefficients() for c in f.components())))
        power = sum(w * np.abs(c) ** 2 for w, c in weights)
        scale = grid.box_length ** 2 / grid.n ** 4
        for j in partition.shell_indices(homogeneous):
            mult = partition.multiplier(j, homogeneous)
            out.append((j, math.sqrt(float(np.sum(mult ** 2 * power)) * scale)))
        return out
    for j in partition.shell_indices(homogeneous):
        mult = partition.multiplier(j, homogeneous)
        sq = sum(pointwise_magnitude(_apply(f, mult)) ** 2 for f in fields)
        out.append((j, quadrature_lp(np.sqrt(sq), p, grid.cell_area)))
    return out


def besov_norm(f: Union[AnyField, Sequence[AnyField]], s: float, p: float, r: float,
               homogeneous: bool = False, partition: DyadicPartition = None) -> float:
    """|| 2^{js} ||Delta_j f||_{L^p} ||_{l^r} over the shells the grid resolves.

    ``f`` may be a tuple of fields, in which case the pointwise magnitudes are
    combined, e.g. the pair (u, tau).
    """
    fields = tuple(f) if isinstance(f, (tuple, list)) else (f,)
    partition = partition or make_partition(fields[0].grid)
    if r < 1 or p < 1:
        raise ContractViolation(f"Besov exponents must be >= 1, got p={p}, r={r}")
    terms = np.array([2.0 ** (j * s) * norm for j, norm in _block_lp_norms(fields, p, homogeneous, partition)])
    if math.isinf(r):
        return float(np.max(terms))
    return float(np.sum(terms ** r) ** (1.0 / r))


def b0_infty1_norm(f: AnyField, partition: DyadicPartition = None) -> float:
    """Sum over nonhomogeneous shells of ||Delta_j f||_{L^inf}."""
    return besov_norm(f, 0.0, math.inf, 1.0, homogeneous=False, partition=partition)


# --- Bony decomposition ---

def _block_values(f: ScalarField, partition: DyadicPartition) -> Dict[int, np.ndarray]:
    coeffs = f.coefficients()
    return {j: ifft2(partition.multiplier(j, False) * coeffs) for j in partition.shell_indices(False)}


def paraproduct(u: ScalarField, v: ScalarField, partition: DyadicPartition = None) -> ScalarField:
    """T_u v = sum_j S_{j-1}u Delta_j v, dealiased, in v's representation."""
    if u.grid != v.grid:
        raise ContractViolation("paraproduct operands live on different grids")
    partition = partition or make_partition(u.grid)
    u_blocks = _block_values(u, partition)
    v_blocks = _block_values(v, partition)
    total = np.zeros((u.grid.n, u.grid.n))
    low = np.zeros_like(total)  # running S_{j-1} u
    for j in partition.shell_indices(False):
        if j - 2 >= -1:
            low = low + u_blocks[j - 2]
        total += low * v_blocks[j]
    return v.like(truncate(fft2(total), v.grid))


def remainder(u: ScalarField, v: ScalarField, partition: DyadicPartition = None) -> ScalarField:
    """R(u, v) = sum over |k - j| <= 1 of Delta_k u Delta_j v, dealiased."""
    if u.grid != v.grid:
        raise ContractViolation("remainder operands live on different grids")
    partition = partition or make_partition(u.grid)
    u_blocks = _block_values(u, partition)
    v_blocks = _block_values(v, partition)
    total = np.zeros((u.grid.n, u.grid.n))
    for k, uk in u_blocks.items():
        near = sum(v_blocks[j] for j in (k - 1, k, k + 1) if j in v_blocks)
        total += uk * near
    return v.like(truncate(fft2(total), v.grid))


def bony_decomposition(u: ScalarField, v: ScalarField,
                       partition: DyadicPartition = None) -> Tuple[ScalarField, ScalarField, ScalarField]:
    """(T_u v, T_v u, R(u, v)); their sum is the dealiased product uv."""
    partition = partition or make_partition(u.grid)
    return paraproduct(u, v, partition), paraproduct(v, u, partition), remainder(u, v, partition)


# --- Riesz commutator ---

def _gradient_magnitude(u: VectorField2) -> np.ndarray:
    g1 = gradient(u.u1.as_spectral())
    g2 = gradient(u.u2.as_spectral())
    sq = sum(c.values() ** 2 for c in (g1.u1, g1.u2, g2.u1, g2.u2))
    return np.sqrt(sq)


def riesz_commutator(u: VectorField2, tau: SymTensorField2) -> ScalarField:
    """[R, u.grad] tau = R(u.grad tau) - u.grad(R tau) for divergence-free u."""
    div_u = np.abs(divergence(u).values())
    scale = max(1.0, float(np.max(_gradient_magnitude(u))))
    if float(np.max(div_u)) > DIVERGENCE_TOLERANCE * scale:
        raise ContractViolation(
            f"riesz_commutator requires a divergence-free velocity, max|div u| = {float(np.max(div_u)):.3e}"
        )
    transported = riesz_R(advect_tensor(u, tau))
    return transported - advect(u, riesz_R(tau))


def grad_lp_norm(u: VectorField2, p: float) -> float:
    """L^p norm of the pointwise Frobenius norm of grad u."""
    return quadrature_lp(_gradient_magnitude(u), p, u.grid.cell_area)


def commutator_ratio(u: VectorField2, tau: SymTensorField2, p: float, q: float = None,
                     partition: DyadicPartition = None) -> float:
    """||[R,u.grad]tau||_{L^p} / (||grad u||_{L^p} (||tau||_{L^q} + ||tau||_{B^0_{inf,1}}))."""
    q = p if q is None else q
    grid = u.grid
    numerator = quadrature_lp(np.abs(riesz_commutator(u, tau).values()), p, grid.cell_area)
    tau_size = quadrature_lp(pointwise_magnitude(tau), q, grid.cell_area) + b0_infty1_norm(tau, partition)
    denominator = grad_lp_norm(u, p) * tau_size
    if denominator == 0.0:
        return 0.0 if numerator == 0.0 else math.inf
    return numerator / denominator


def partition_residual(partition: DyadicPartition, homogeneous: bool = False) -> float:
    """Max deviation from 1 of the summed multipliers on the grid (nonzero modes when homogeneous)."""
    total = sum(partition.multiplier(j, homogeneous) for j in partition.shell_indices(homogeneous))
    if homogeneous:
        nonzero = partition.grid.tables.k_sq > 0
        return float(np.max(np.abs(total[nonzero] - 1.0)))
    return float(np.max(np.abs(total - 1.0)))

