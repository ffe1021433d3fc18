"""
Fourier representation of vector fields on the periodic box [0, L]^3.

Coefficients follow the unitary Plancherel convention, so that

    sum_k |f_hat(k)|^2 * cell_volume == integral |f(x)|^2 dx

with cell_volume = (2 pi / L)^3. Arrays are stored in FFT order with shape
(3, n, n, n); the k = 0 mode is always pinned to zero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.fft

from .errors import GridMismatchError

CONVENTION = "unitary-Plancherel"
_FFT_AXES = (1, 2, 3)


@dataclass(frozen=True)
class GridSpec:
    """Periodic cube of side ``box_length`` sampled with ``n`` points per axis."""

    box_length: float
    n: int
    convention: str = field(default=CONVENTION, init=False)

    def __post_init__(self):
        if not self.box_length > 0:
            raise ValueError(f"box_length must be positive, got {self.box_length}")
        if self.n < 8 or self.n % 2:
            raise ValueError(f"n must be even and >= 8, got {self.n}")

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.n, self.n, self.n)

    @property
    def dx(self) -> float:
        return self.box_length / self.n

    @property
    def dk(self) -> float:
        return 2 * math.pi / self.box_length

    @property
    def cell_volume(self) -> float:
        return self.dk**3

    @property
    def coeff_scale(self) -> float:
        """Factor taking raw ``fftn`` output to unitary coefficients."""
        return self.box_length**3 / (self.n**3 * (2 * math.pi) ** 1.5)

    @cached_property
    def mode_index(self) -> np.ndarray:
        """Integer lattice index m in [-n/2, n/2) along one axis, FFT order."""
        return np.fft.fftfreq(self.n, d=1.0 / self.n).astype(np.int64)

    @cached_property
    def k(self) -> np.ndarray:
        """Wavevector components, shape (3, n, n, n)."""
        k1 = self.dk * self.mode_index.astype(float)
        return np.stack(np.meshgrid(k1, k1, k1, indexing="ij"))

    @cached_property
    def k_deriv(self) -> np.ndarray:
        """Wavevectors for differentiation; the unpaired Nyquist index is zeroed."""
        k1 = self.dk * self.mode_index.astype(float)
        k1[self.n // 2] = 0.0
        return np.stack(np.meshgrid(k1, k1, k1, indexing="ij"))

    @cached_property
    def k2(self) -> np.ndarray:
        return np.sum(self.k**2, axis=0)

    @cached_property
    def kmag(self) -> np.ndarray:
        return np.sqrt(self.k2)

    @cached_property
    def dealias_mask(self) -> np.ndarray:
        m = np.abs(self.mode_index)
        keep = m <= self.n / 3
        return keep[:, None, None] & keep[None, :, None] & keep[None, None, :]

    @property
    def dealias_cutoff(self) -> float:
        """Largest |k| such that the whole ball |k| < cutoff survives dealiasing."""
        return self.dk * (math.floor(self.n / 3) + 1)

    def reflect(self, a: np.ndarray) -> np.ndarray:
        """Return a(-k) for an array indexed over the lattice on its last three axes."""
        return np.roll(np.flip(a, axis=(-3, -2, -1)), 1, axis=(-3, -2, -1))


@dataclass(frozen=True, eq=False)
class SpectralVectorField:
    grid: GridSpec
    coeffs: np.ndarray

    def __post_init__(self):
        if self.coeffs.shape != (3,) + self.grid.shape:
            raise GridMismatchError(
                f"coefficient shape {self.coeffs.shape} does not match grid n={self.grid.n}"
            )

    @classmethod
    def zeros(cls, grid: GridSpec) -> SpectralVectorField:
        return cls(grid, np.zeros((3,) + grid.shape, dtype=complex))

    def with_coeffs(self, coeffs: np.ndarray) -> SpectralVectorField:
        return SpectralVectorField(self.grid, coeffs)

    def _same_grid(self, other: SpectralVectorField):
        if other.grid != self.grid:
            raise GridMismatchError(f"fields live on different grids: {self.grid} vs {other.grid}")

    def __add__(self, other: SpectralVectorField) -> SpectralVectorField:
        self._same_grid(other)
        return self.with_coeffs(self.coeffs + other.coeffs)

    def __sub__(self, other: SpectralVectorField) -> SpectralVectorField:
        self._same_grid(other)
        return self.with_coeffs(self.coeffs - other.coeffs)

    def __mul__(self, scalar) -> SpectralVectorField:
        return self.with_coeffs(self.coeffs * scalar)

    __rmul__ = __mul__

    def hermitian_defect(self) -> float:
        """Largest |c(-k) - conj(c(k))| relative to the largest coefficient."""
        scale = np.max(np.abs(self.coeffs))
        if scale == 0:
            return 0.0
        gap = self.grid.reflect(self.coeffs) - np.conj(self.coeffs)
        return float(np.max(np.abs(gap)) / scale)

    def divergence_defect(self) -> float:
        """max_k |k . u(k)| / |k|, relative to max_k |u(k)|.

        Normalizing by the largest coefficient rather than mode by mode keeps
        roundoff-sized modes from reporting a spurious defect of order one.
        """
        kmag = self.grid.kmag
        nz = kmag > 0
        size = np.sqrt(np.sum(np.abs(self.coeffs) ** 2, axis=0))
        peak = float(np.max(size))
        if peak == 0:
            return 0.0
        dot = np.abs(np.sum(self.grid.k * self.coeffs, axis=0))
        return float(np.max(dot[nz] / kmag[nz]) / peak)


@dataclass(frozen=True)
class MultiplierKind:
    """A Fourier multiplier tag with its parameters.

    Use the classmethod constructors rather than building tags by hand.
    """

    tag: str
    alpha: float | None = None
    delta: float | None = None
    coefficient: float | None = None
    dt: float | None = None

    _TAGS = ("leray_projection", "fractional_laplacian", "mollifier", "dealias_two_thirds", "heat_factor")

    def __post_init__(self):
        if self.tag not in self._TAGS:
            raise ValueError(f"unknown multiplier tag {self.tag!r}")
        if self.tag == "fractional_laplacian" and not (self.alpha is not None and 0 < self.alpha < 4):
            raise ValueError(f"fractional exponent must lie in (0, 4), got {self.alpha}")
        if self.tag == "mollifier" and not (self.delta is not None and self.delta >= 0):
            raise ValueError(f"mollification length must be >= 0, got {self.delta}")
        if self.tag == "heat_factor" and (self.coefficient is None or self.dt is None):
            raise ValueError("heat_factor needs coefficient and dt")

    @classmethod
    def leray_projection(cls):
        return cls("leray_projection")

    @classmethod
    def fractional_laplacian(cls, alpha: float):
        return cls("fractional_laplacian", alpha=alpha)

    @classmethod
    def mollifier(cls, delta: float):
        return cls("mollifier", delta=delta)

    @classmethod
    def dealias_two_thirds(cls):
        return cls("dealias_two_thirds")

    @classmethod
    def heat_factor(cls, coefficient: float, dt: float):
        return cls("heat_factor", coefficient=coefficient, dt=dt)


def fractional_symbol(grid: GridSpec, alpha: float) -> np.ndarray:
    """|k|^alpha on the lattice. alpha = 2 reproduces ``grid.k2`` exactly."""
    return grid.k2 ** (alpha / 2)


def _check_samples(physical: np.ndarray, grid: GridSpec):
    if physical.shape != (3,) + grid.shape:
        raise GridMismatchError(
            f"expected samples of shape {(3,) + grid.shape}, got {physical.shape}"
        )


def forward_transform(physical: np.ndarray, grid: GridSpec) -> SpectralVectorField:
    """Transform real samples of shape (3, n, n, n) to unitary coefficients.

    The mean (k = 0) is discarded.
    """
    physical = np.asarray(physical)
    _check_samples(physical, grid)
    coeffs = scipy.fft.fftn(physical, axes=_FFT_AXES, workers=-1) * grid.coeff_scale
    coeffs[:, 0, 0, 0] = 0.0
    return SpectralVectorField(grid, coeffs)


def inverse_transform(v: SpectralVectorField) -> np.ndarray:
    """Real physical samples of shape (3, n, n, n)."""
    return _to_physical(v.coeffs, v.grid)


def _to_physical(coeffs: np.ndarray, grid: GridSpec) -> np.ndarray:
    out = scipy.fft.ifftn(coeffs, axes=tuple(range(coeffs.ndim - 3, coeffs.ndim)), workers=-1)
    return out.real / grid.coeff_scale


def _to_spectral(physical: np.ndarray, grid: GridSpec) -> np.ndarray:
    axes = tuple(range(physical.ndim - 3, physical.ndim))
    return scipy.fft.fftn(physical, axes=axes, workers=-1) * grid.coeff_scale


def _half_to_physical(half: np.ndarray, grid: GridSpec) -> np.ndarray:
    """Real samples from the non-negative half of the last lattice axis."""
    axes = tuple(range(half.ndim - 3, half.ndim))
    return scipy.fft.irfftn(half, s=grid.shape, axes=axes, workers=-1) / grid.coeff_scale


def _physical_to_half(physical: np.ndarray, grid: GridSpec) -> np.ndarray:
    axes = tuple(range(physical.ndim - 3, physical.ndim))
    return scipy.fft.rfftn(physical, axes=axes, workers=-1) * grid.coeff_scale


def _expand_half(half: np.ndarray, grid: GridSpec) -> np.ndarray:
    """Rebuild the full FFT-order array of a real field from its half spectrum."""
    n = grid.n
    h = n // 2 + 1
    full = np.empty(half.shape[:-1] + (n,), dtype=complex)
    full[..., :h] = half
    # c(i, j, l) = conj(c(-i, -j, n - l)) for the negative frequencies on the last axis
    neg = half[..., n - np.arange(h, n)]
    neg = np.roll(np.flip(neg, axis=(-3, -2)), 1, axis=(-3, -2))
    full[..., h:] = np.conj(neg)
    return full


def leray_project(v: SpectralVectorField) -> SpectralVectorField:
    """Apply I - k k^T / |k|^2 mode by mode."""
    return v.with_coeffs(_project(v.coeffs, v.grid))


def _project(coeffs: np.ndarray, grid: GridSpec) -> np.ndarray:
    return _project_with(coeffs, grid.k, grid.k2)


def _project_with(coeffs: np.ndarray, k: np.ndarray, k2: np.ndarray) -> np.ndarray:
    safe = np.where(k2 == 0, 1.0, k2)
    kdotv = np.sum(k * coeffs, axis=0) / safe
    out = coeffs - k * kdotv
    out[:, 0, 0, 0] = 0.0
    return out


def multiplier_symbol(kind: MultiplierKind, grid: GridSpec) -> np.ndarray:
    """Scalar symbol of a diagonal multiplier, shape (n, n, n)."""
    if kind.tag == "fractional_laplacian":
        return fractional_symbol(grid, kind.alpha)
    if kind.tag == "mollifier":
        if kind.delta == 0:
            return np.ones(grid.shape)
        return np.exp(-(kind.delta**2) * grid.k2)
    if kind.tag == "dealias_two_thirds":
        return grid.dealias_mask.astype(float)
    if kind.tag == "heat_factor":
        return np.exp(-kind.coefficient * kind.dt * grid.k2)
    raise ValueError(f"{kind.tag} is not a diagonal multiplier")


def apply_multiplier(kind: MultiplierKind, v: SpectralVectorField) -> SpectralVectorField:
    if kind.tag == "leray_projection":
        return leray_project(v)
    return v.with_coeffs(v.coeffs * multiplier_symbol(kind, v.grid))


def dealias(v: SpectralVectorField) -> SpectralVectorField:
    return v.with_coeffs(v.coeffs * v.grid.dealias_mask)


def inner_product(u: SpectralVectorField, v: SpectralVectorField) -> float:
    """Real L^2 pairing <u, v> computed from coefficients."""
    return float(np.sum(np.conj(u.coeffs) * v.coeffs).real * u.grid.cell_volume)


def sobolev_norm(v: SpectralVectorField, s: float) -> float:
    """Homogeneous Sobolev norm (sum_k |k|^{2s} |v(k)|^2 * cell_volume)^{1/2}."""
    return math.sqrt(sobolev_norm_sq(v, s))


def sobolev_norm_sq(v: SpectralVectorField, s: float) -> float:
    power = np.sum(np.abs(v.coeffs) ** 2, axis=0)
    if s == 0:
        total = np.sum(power)
    else:
        k2 = v.grid.k2
        nz = k2 > 0
        total = np.sum(k2[nz] ** s * power[nz])
    return float(total * v.grid.cell_volume)


def physical_l2_norm(samples: np.ndarray, grid: GridSpec) -> float:
    """Grid quadrature of (integral |x|^2)^{1/2} for real samples."""
    return math.sqrt(float(np.sum(samples**2)) * grid.dx**3)


def gradient_tensor(v: SpectralVectorField) -> np.ndarray:
    """Physical samples of d_j v_i, shape (3, 3, n, n, n) indexed [i, j]."""
    kd = v.grid.k_deriv
    coeffs = 1j * v.coeffs[:, None] * kd[None, :]
    return _to_physical(coeffs, v.grid)


def max_gradient_norm(v: SpectralVectorField) -> float:
    """Max over grid points of the Frobenius norm of the velocity gradient."""
    grad = gradient_tensor(v)
    frob = np.sqrt(np.sum(grad**2, axis=(0, 1)))
    return float(np.max(frob))


def hermitian_symmetrize(coeffs: np.ndarray, grid: GridSpec) -> np.ndarray:
    return 0.5 * (coeffs + np.conj(grid.reflect(coeffs)))


def random_lowpass(grid: GridSpec, seed: int, energy: float, cutoff: float) -> SpectralVectorField:
    """Seeded divergence-free random field supported in 0 < |k| < cutoff.

    Args:
        grid: target grid.
        seed: generator seed; identical seeds give identical fields.
        energy: requested ||u||_{L^2}^2.
        cutoff: wavenumber cutoff (same units as ``grid.k``).
    """
    rng = np.random.default_rng(seed)
    shape = (3,) + grid.shape
    coeffs = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    mask = (grid.kmag < cutoff) & grid.dealias_mask
    coeffs = hermitian_symmetrize(coeffs * mask, grid)
    coeffs = _project(coeffs, grid)
    v = SpectralVectorField(grid, coeffs)
    current = sobolev_norm_sq(v, 0)
    if current == 0:
        if energy == 0:
            return v
        raise ValueError(f"no lattice modes below cutoff {cutoff}")
    return v * math.sqrt(energy / current)
