"""Periodic-box fields and the spectral operators every other module builds on.

Fields live on the torus [0, L)^2 sampled on an n x n grid. Array axis 0 runs
along x1 and axis 1 along x2, so ``data[i, j]`` is the sample at
``(i*dx, j*dx)``.

Transform convention: the forward transform is unscaled and the inverse is
scaled by 1/n^2 (``scipy.fft`` "backward" normalization). A constant field c
therefore has the single coefficient ``c * n**2`` at the zero mode.

Derivatives multiply by ``i*k`` with the Nyquist coefficient (m = -n/2) of the
differentiated direction set to zero. The Laplacian and its inverse use the
full |k|^2; identities that mix the two (curl of Biot-Savart, for instance)
are exact on fields without Nyquist content, which includes every dealiased
field.
"""
import logging
import math
import os
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterator, Sequence, Tuple, Union

import numpy as np
import scipy.fft as spfft
from pydantic import BaseModel, ConfigDict, Field, model_validator

from solver.errors import ContractViolation, MeanCompatibilityError

logger = logging.getLogger(__name__)

# --- Configuration ---
FFT_WORKERS = int(os.getenv("SOLVER_FFT_WORKERS", 1))
# Relative tolerance for the zero-mean precondition of biot_savart
MEAN_TOLERANCE = 1e-10

logger.debug(f"spectral_core: scipy.fft workers = {FFT_WORKERS}")


class GridSpec(BaseModel):
    """Discretization of the periodic box."""
    model_config = ConfigDict(frozen=True, extra="forbid")

    n: int = Field(..., description="modes per dimension (power of two, >= 16)")
    box_length: float = Field(2 * math.pi, gt=0, description="physical period L")
    dealias_fraction: float = Field(2.0 / 3.0, gt=0, le=1, description="retained fraction of n/2 per dimension")

    @model_validator(mode="after")
    def _check_resolution(self) -> "GridSpec":
        if self.n < 16 or self.n % 2:
            raise ValueError(f"grid.n must be even and >= 16, got {self.n}")
        if self.n & (self.n - 1):
            raise ValueError(f"grid.n must be a power of two, got {self.n}")
        if math.floor(self.dealias_fraction * self.n / 2) < 4:
            raise ValueError(
                f"dealias_fraction={self.dealias_fraction} keeps fewer than 4 modes per dimension at n={self.n}"
            )
        return self

    @property
    def dx(self) -> float:
        return self.box_length / self.n

    @property
    def cell_area(self) -> float:
        return self.dx * self.dx

    @property
    def k0(self) -> float:
        """Smallest nonzero wavenumber 2*pi/L."""
        return 2.0 * math.pi / self.box_length

    @property
    def cutoff(self) -> float:
        """Largest retained |m| per dimension after dealiasing."""
        return self.dealias_fraction * self.n / 2

    @property
    def tables(self) -> "SpectralTables":
        return _spectral_tables(self.n, self.box_length, self.dealias_fraction)


@dataclass(frozen=True, eq=False)
class SpectralTables:
    """Wavenumber and coordinate arrays shared by every field on one grid."""
    m1: np.ndarray
    m2: np.ndarray
    k1: np.ndarray
    k2: np.ndarray
    kd1: np.ndarray  # k1 with the Nyquist row zeroed (derivatives)
    kd2: np.ndarray
    k_sq: np.ndarray
    k_sq_inv: np.ndarray  # 1/|k|^2, 0 at k = 0
    kd_sq_inv: np.ndarray  # 1/|kd|^2, 0 where kd = 0
    k_mag: np.ndarray
    dealias_mask: np.ndarray
    x1: np.ndarray
    x2: np.ndarray


@lru_cache(maxsize=16)
def _spectral_tables(n: int, box_length: float, dealias_fraction: float) -> SpectralTables:
    m = np.rint(spfft.fftfreq(n, d=1.0 / n)).astype(int)
    m1, m2 = np.meshgrid(m, m, indexing="ij")
    k0 = 2.0 * np.pi / box_length
    k1 = k0 * m1
    k2 = k0 * m2
    nyquist = -n // 2
    kd1 = np.where(m1 == nyquist, 0.0, k1)
    kd2 = np.where(m2 == nyquist, 0.0, k2)
    k_sq = k1 ** 2 + k2 ** 2
    kd_sq = kd1 ** 2 + kd2 ** 2
    with np.errstate(divide="ignore"):
        k_sq_inv = np.where(k_sq > 0, 1.0 / np.where(k_sq > 0, k_sq, 1.0), 0.0)
        kd_sq_inv = np.where(kd_sq > 0, 1.0 / np.where(kd_sq > 0, kd_sq, 1.0), 0.0)
    cutoff = dealias_fraction * n / 2
    dealias_mask = (np.abs(m1) <= cutoff) & (np.abs(m2) <= cutoff)
    x = np.arange(n) * (box_length / n)
    x1, x2 = np.meshgrid(x, x, indexing="ij")
    for arr in (m1, m2, k1, k2, kd1, kd2, k_sq, k_sq_inv, kd_sq_inv, dealias_mask, x1, x2):
        arr.setflags(write=False)
    logger.debug(f"Built spectral tables for n={n}, L={box_length}, dealias={dealias_fraction}")
    return SpectralTables(
        m1=m1, m2=m2, k1=k1, k2=k2, kd1=kd1, kd2=kd2, k_sq=k_sq,
        k_sq_inv=k_sq_inv, kd_sq_inv=kd_sq_inv, k_mag=np.sqrt(k_sq),
        dealias_mask=dealias_mask, x1=x1, x2=x2,
    )


def fft2(values: np.ndarray) -> np.ndarray:
    return spfft.fft2(values, workers=FFT_WORKERS)


def ifft2(coeffs: np.ndarray) -> np.ndarray:
    return spfft.ifft2(coeffs, workers=FFT_WORKERS).real


# --- Field types ---

@dataclass(frozen=True, eq=False)
class ScalarField:
    """Real scalar field stored either as samples or as spectral coefficients."""
    grid: GridSpec
    data: np.ndarray
    spectral: bool = False

    def __post_init__(self):
        shape = (self.grid.n, self.grid.n)
        if self.data.shape != shape:
            raise ContractViolation(f"field data has shape {self.data.shape}, grid expects {shape}")

    @classmethod
    def zeros(cls, grid: GridSpec, spectral: bool = False) -> "ScalarField":
        dtype = complex if spectral else float
        return cls(grid, np.zeros((grid.n, grid.n), dtype=dtype), spectral)

    @classmethod
    def from_values(cls, grid: GridSpec, values) -> "ScalarField":
        return cls(grid, np.broadcast_to(np.asarray(values, dtype=float), (grid.n, grid.n)).copy(), False)

    @property
    def representation(self) -> str:
        return "spectral" if self.spectral else "real"

    def to_spectral(self) -> "ScalarField":
        if self.spectral:
            raise ContractViolation("to_spectral called on a field already in spectral representation")
        return ScalarField(self.grid, fft2(self.data), True)

    def to_real(self) -> "ScalarField":
        if not self.spectral:
            raise ContractViolation("to_real called on a field already in real-space representation")
        return ScalarField(self.grid, ifft2(self.data), False)

    def as_spectral(self) -> "ScalarField":
        return self if self.spectral else self.to_spectral()

    def as_real(self) -> "ScalarField":
        return self.to_real() if self.spectral else self

    def values(self) -> np.ndarray:
        """Real-space samples regardless of the stored representation."""
        return ifft2(self.data) if self.spectral else self.data

    def coefficients(self) -> np.ndarray:
        """Spectral coefficients regardless of the stored representation."""
        return self.data if self.spectral else fft2(self.data)

    def like(self, coeffs: np.ndarray) -> "ScalarField":
        """Wrap spectral ``coeffs`` in this field's representation."""
        if self.spectral:
            return ScalarField(self.grid, coeffs, True)
        return ScalarField(self.grid, ifft2(coeffs), False)

    def _other_data(self, other) -> Union[np.ndarray, float]:
        if isinstance(other, ScalarField):
            if other.grid != self.grid:
                raise ContractViolation("fields live on different grids")
            return other.coefficients() if self.spectral else other.values()
        return other

    def __add__(self, other) -> "ScalarField":
        if not isinstance(other, ScalarField) and self.spectral:
            coeffs = self.data.copy()
            coeffs[0, 0] += other * self.grid.n ** 2
            return ScalarField(self.grid, coeffs, True)
        return ScalarField(self.grid, self.data + self._other_data(other), self.spectral)

    def __sub__(self, other) -> "ScalarField":
        return self + (-other)

    def __neg__(self) -> "ScalarField":
        return ScalarField(self.grid, -self.data, self.spectral)

    def __mul__(self, scalar: float) -> "ScalarField":
        if isinstance(scalar, ScalarField):
            raise ContractViolation("use spectral_core.product for field products")
        return ScalarField(self.grid, self.data * scalar, self.spectral)

    __rmul__ = __mul__
    __radd__ = __add__


@dataclass(frozen=True, eq=False)
class VectorField2:
    u1: ScalarField
    u2: ScalarField

    def __post_init__(self):
        if self.u1.grid != self.u2.grid:
            raise ContractViolation("vector components live on different grids")
        if self.u1.spectral != self.u2.spectral:
            raise ContractViolation("vector components carry different representation tags")

    @classmethod
    def zeros(cls, grid: GridSpec, spectral: bool = False) -> "VectorField2":
        return cls(ScalarField.zeros(grid, spectral), ScalarField.zeros(grid, spectral))

    @property
    def grid(self) -> GridSpec:
        return self.u1.grid

    @property
    def spectral(self) -> bool:
        return self.u1.spectral

    def components(self) -> Tuple[ScalarField, ScalarField]:
        return self.u1, self.u2

    def as_spectral(self) -> "VectorField2":
        return VectorField2(self.u1.as_spectral(), self.u2.as_spectral())

    def as_real(self) -> "VectorField2":
        return VectorField2(self.u1.as_real(), self.u2.as_real())

    def __add__(self, other: "VectorField2") -> "VectorField2":
        return VectorField2(self.u1 + other.u1, self.u2 + other.u2)

    def __sub__(self, other: "VectorField2") -> "VectorField2":
        return VectorField2(self.u1 - other.u1, self.u2 - other.u2)

    def __neg__(self) -> "VectorField2":
        return VectorField2(-self.u1, -self.u2)

    def __mul__(self, scalar: float) -> "VectorField2":
        return VectorField2(self.u1 * scalar, self.u2 * scalar)

    __rmul__ = __mul__


@dataclass(frozen=True, eq=False)
class SymTensorField2:
    """Symmetric 2x2 tensor field; t21 is t12 by storage."""
    t11: ScalarField
    t12: ScalarField
    t22: ScalarField

    def __post_init__(self):
        comps = (self.t11, self.t12, self.t22)
        if any(c.grid != self.t11.grid for c in comps):
            raise ContractViolation("tensor components live on different grids")
        if any(c.spectral != self.t11.spectral for c in comps):
            raise ContractViolation("tensor components carry different representation tags")

    @classmethod
    def zeros(cls, grid: GridSpec, spectral: bool = False) -> "SymTensorField2":
        return cls(*(ScalarField.zeros(grid, spectral) for _ in range(3)))

    @classmethod
    def isotropic(cls, g: ScalarField) -> "SymTensorField2":
        """g * Id."""
        return cls(g, ScalarField.zeros(g.grid, g.spectral), g)

    @property
    def grid(self) -> GridSpec:
        return self.t11.grid

    @property
    def spectral(self) -> bool:
        return self.t11.spectral

    def components(self) -> Tuple[ScalarField, ScalarField, ScalarField]:
        return self.t11, self.t12, self.t22

    def as_spectral(self) -> "SymTensorField2":
        return SymTensorField2(*(c.as_spectral() for c in self.components()))

    def as_real(self) -> "SymTensorField2":
        return SymTensorField2(*(c.as_real() for c in self.components()))

    def __add__(self, other: "SymTensorField2") -> "SymTensorField2":
        return SymTensorField2(*(a + b for a, b in zip(self.components(), other.components())))

    def __sub__(self, other: "SymTensorField2") -> "SymTensorField2":
        return SymTensorField2(*(a - b for a, b in zip(self.components(), other.components())))

    def __neg__(self) -> "SymTensorField2":
        return SymTensorField2(*(-c for c in self.components()))

    def __mul__(self, scalar: float) -> "SymTensorField2":
        return SymTensorField2(*(c * scalar for c in self.components()))

    __rmul__ = __mul__


AnyField = Union[ScalarField, VectorField2, SymTensorField2]

# Pairing weights: the off-diagonal entry of a symmetric tensor counts twice.
_TENSOR_WEIGHTS = (1.0, 2.0, 1.0)


def _weighted_components(f: AnyField) -> Iterator[Tuple[float, ScalarField]]:
    if isinstance(f, ScalarField):
        yield 1.0, f
    elif isinstance(f, VectorField2):
        yield from ((1.0, c) for c in f.components())
    else:
        yield from zip(_TENSOR_WEIGHTS, f.components())


# --- Transforms ---

def to_spectral(f: ScalarField) -> ScalarField:
    return f.to_spectral()


def to_real(f: ScalarField) -> ScalarField:
    return f.to_real()


# --- Differential operators ---

def partial(f: ScalarField, axis: int) -> ScalarField:
    t = f.grid.tables
    kd = t.kd1 if axis == 0 else t.kd2
    return f.like(1j * kd * f.coefficients())


def gradient(f: ScalarField) -> VectorField2:
    coeffs = f.coefficients()
    t = f.grid.tables
    return VectorField2(f.like(1j * t.kd1 * coeffs), f.like(1j * t.kd2 * coeffs))


def perp_gradient(psi: ScalarField) -> VectorField2:
    """(-d2 psi, d1 psi); its curl is the Laplacian of psi."""
    coeffs = psi.coefficients()
    t = psi.grid.tables
    return VectorField2(psi.like(-1j * t.kd2 * coeffs), psi.like(1j * t.kd1 * coeffs))


def divergence(v: VectorField2) -> ScalarField:
    t = v.grid.tables
    coeffs = 1j * t.kd1 * v.u1.coefficients() + 1j * t.kd2 * v.u2.coefficients()
    return v.u1.like(coeffs)


def divergence_tensor(tau: SymTensorField2) -> VectorField2:
    """Row-wise divergence: component i is d1 t_i1 + d2 t_i2."""
    t = tau.grid.tables
    c11, c12, c22 = (c.coefficients() for c in tau.components())
    first = 1j * t.kd1 * c11 + 1j * t.kd2 * c12
    second = 1j * t.kd1 * c12 + 1j * t.kd2 * c22
    return VectorField2(tau.t11.like(first), tau.t11.like(second))


def curl2d(v: VectorField2) -> ScalarField:
    t = v.grid.tables
    coeffs = 1j * t.kd1 * v.u2.coefficients() - 1j * t.kd2 * v.u1.coefficients()
    return v.u1.like(coeffs)


def laplacian(f: ScalarField) -> ScalarField:
    return f.like(-f.grid.tables.k_sq * f.coefficients())


def inverse_laplacian(f: ScalarField) -> ScalarField:
    """Delta^{-1} with the zero mode of the result set to 0."""
    return f.like(-f.grid.tables.k_sq_inv * f.coefficients())


def leray_project(v: VectorField2) -> VectorField2:
    """Projection onto divergence-free fields; the zero mode passes through."""
    t = v.grid.tables
    c1, c2 = v.u1.coefficients(), v.u2.coefficients()
    k_dot_v = (t.kd1 * c1 + t.kd2 * c2) * t.kd_sq_inv
    return VectorField2(v.u1.like(c1 - t.kd1 * k_dot_v), v.u2.like(c2 - t.kd2 * k_dot_v))


def riesz_R(tau: SymTensorField2) -> ScalarField:
    """The operator Delta^{-1} curl div mapping symmetric tensors to scalars."""
    return inverse_laplacian(curl2d(divergence_tensor(tau)))


def biot_savart(omega: ScalarField, mean_velocity: Sequence[float] = (0.0, 0.0)) -> VectorField2:
    """Divergence-free velocity with curl ``omega`` and zero mode ``mean_velocity``."""
    grid = omega.grid
    coeffs = omega.coefficients()
    mean = coeffs[0, 0].real / grid.n ** 2
    scale = max(1.0, float(np.max(np.abs(omega.values()))))
    if abs(mean) > MEAN_TOLERANCE * scale:
        raise MeanCompatibilityError(
            f"vorticity mean {mean:.3e} is not zero; a periodic velocity field has mean-zero curl"
        )
    u = perp_gradient(inverse_laplacian(omega))
    c1, c2 = u.u1.coefficients().copy(), u.u2.coefficients().copy()
    c1[0, 0] = mean_velocity[0] * grid.n ** 2
    c2[0, 0] = mean_velocity[1] * grid.n ** 2
    return VectorField2(omega.like(c1), omega.like(c2))


# --- Dealiasing and quadratic terms ---

def truncate(coeffs: np.ndarray, grid: GridSpec) -> np.ndarray:
    return np.where(grid.tables.dealias_mask, coeffs, 0.0)


def dealias(f: ScalarField) -> ScalarField:
    """Zero every coefficient with max(|m1|, |m2|) above the dealiasing cutoff."""
    if not f.spectral:
        raise ContractViolation("dealias expects a field in spectral representation")
    return ScalarField(f.grid, truncate(f.data, f.grid), True)


def dealias_any(f: AnyField) -> AnyField:
    """Representation-preserving dealiasing for scalar, vector and tensor fields."""
    if isinstance(f, ScalarField):
        return f.like(truncate(f.coefficients(), f.grid))
    return type(f)(*(dealias_any(c) for c in f.components()))


def product(f: ScalarField, g: ScalarField) -> ScalarField:
    """Pointwise product with the result dealiased; keeps f's representation."""
    coeffs = truncate(fft2(f.values() * g.values()), f.grid)
    return f.like(coeffs)


def advect(u: VectorField2, f: ScalarField) -> ScalarField:
    """Dealiased u . grad f."""
    grad_f = gradient(f.as_spectral())
    u1, u2 = u.u1.values(), u.u2.values()
    values = u1 * grad_f.u1.values() + u2 * grad_f.u2.values()
    return f.like(truncate(fft2(values), f.grid))


def advect_vector(u: VectorField2, v: VectorField2) -> VectorField2:
    return VectorField2(advect(u, v.u1), advect(u, v.u2))


def advect_tensor(u: VectorField2, tau: SymTensorField2) -> SymTensorField2:
    return SymTensorField2(*(advect(u, c) for c in tau.components()))


# --- Quadrature ---

def quadrature_lp(magnitude: np.ndarray, p: float, cell_area: float) -> float:
    """(sum |f|^p * cell_area)^(1/p); p = inf is the grid maximum."""
    if p < 1:
        raise ContractViolation(f"L^p exponent must be >= 1, got {p}")
    if math.isinf(p):
        return float(np.max(magnitude))
    if p == 2:
        return float(math.sqrt(np.sum(magnitude ** 2) * cell_area))
    return float((np.sum(magnitude ** p) * cell_area) ** (1.0 / p))


def pointwise_magnitude(f: AnyField) -> np.ndarray:
    """|f| for scalars, Euclidean norm for vectors, Frobenius norm for tensors."""
    total = None
    for weight, comp in _weighted_components(f):
        sq = weight * comp.values() ** 2
        total = sq if total is None else total + sq
    return np.sqrt(total)


def inner(a: AnyField, b: AnyField) -> float:
    """L^2 pairing of two fields of the same shape."""
    total = 0.0
    for (weight, ca), (_, cb) in zip(_weighted_components(a), _weighted_components(b)):
        total += weight * float(np.sum(ca.values() * cb.values()))
    return total * a.grid.cell_area


def spectral_energy(f: AnyField) -> float:
    """||f||_{L^2}^2 computed from the coefficients (Parseval)."""
    grid = f.grid
    total = 0.0
    for weight, comp in _weighted_components(f):
        total += weight * float(np.sum(np.abs(comp.coefficients()) ** 2))
    return total * grid.box_length ** 2 / grid.n ** 4


def gradient_energy(f: AnyField) -> float:
    """||grad f||_{L^2}^2 summed over components, computed spectrally."""
    grid = f.grid
    t = grid.tables
    kd_sq = t.kd1 ** 2 + t.kd2 ** 2
    total = 0.0
    for weight, comp in _weighted_components(f):
        total += weight * float(np.sum(kd_sq * np.abs(comp.coefficients()) ** 2))
    return total * grid.box_length ** 2 / grid.n ** 4


def hessian_energy(f: AnyField) -> float:
    """||grad^2 f||_{L^2}^2 summed over components, computed spectrally."""
    grid = f.grid
    t = grid.tables
    kd4 = (t.kd1 ** 2 + t.kd2 ** 2) ** 2
    total = 0.0
    for weight, comp in _weighted_components(f):
        total += weight * float(np.sum(kd4 * np.abs(comp.coefficients()) ** 2))
    return total * grid.box_length ** 2 / grid.n ** 4


def max_divergence(v: VectorField2) -> float:
    return float(np.max(np.abs(divergence(v).values())))
