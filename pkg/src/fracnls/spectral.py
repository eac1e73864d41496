"""Fourier representation of periodic fields on the torus [0, 2pi)^N.

Coefficients are stored in numpy FFT order (wavenumbers 0, 1, ..., M/2-1,
-M/2, ..., -1 along each axis); the Nyquist mode is represented by its
negative index, so every multiplier uses |k| of -M/2.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np

SNAPSHOT_MAGIC = b"FNLS"
SNAPSHOT_VERSION = 1
_HEADER = struct.Struct("<4sHBIdd")


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=np.complex128, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class TorusGrid:
    dim: int
    points_per_dim: int

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError(f"dimension must be positive, got {self.dim}")
        if self.points_per_dim < 4 or self.points_per_dim % 2:
            raise ValueError(f"points_per_dim must be even and >= 4, got {self.points_per_dim}")

    @property
    def spacing(self) -> float:
        return 2 * np.pi / self.points_per_dim

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.points_per_dim,) * self.dim

    @property
    def size(self) -> int:
        return self.points_per_dim ** self.dim

    @cached_property
    def wavenumbers(self) -> tuple[np.ndarray, ...]:
        """Integer wavenumber arrays, one per axis, broadcast to the full grid."""
        k1 = np.fft.fftfreq(self.points_per_dim, d=1.0 / self.points_per_dim).round().astype(np.int64)
        return tuple(np.meshgrid(*([k1] * self.dim), indexing="ij"))

    @cached_property
    def k_squared(self) -> np.ndarray:
        return sum(k.astype(float) ** 2 for k in self.wavenumbers)

    @cached_property
    def k_abs(self) -> np.ndarray:
        return np.sqrt(self.k_squared)

    def nodes(self) -> tuple[np.ndarray, ...]:
        x1 = self.spacing * np.arange(self.points_per_dim)
        return tuple(np.meshgrid(*([x1] * self.dim), indexing="ij"))

    def symbol(self, s: float) -> np.ndarray:
        """|k|^s with the convention |0|^s = 0."""
        out = np.zeros(self.shape)
        nz = self.k_abs > 0
        out[nz] = self.k_abs[nz] ** s
        return out

    def refine(self, factor: int) -> "TorusGrid":
        return TorusGrid(self.dim, self.points_per_dim * factor)


@dataclass(frozen=True, eq=False)
class PhysicalField:
    grid: TorusGrid
    samples: np.ndarray = field(repr=False)

    def __post_init__(self):
        samples = np.asarray(self.samples)
        if samples.size != self.grid.size:
            raise ValueError(f"expected {self.grid.size} samples, got {samples.size}")
        object.__setattr__(self, "samples", _frozen(samples.reshape(self.grid.shape)))


@dataclass(frozen=True, eq=False)
class SpectralField:
    grid: TorusGrid
    coeffs: np.ndarray = field(repr=False)

    def __post_init__(self):
        coeffs = np.asarray(self.coeffs)
        if coeffs.shape != self.grid.shape:
            raise ValueError(f"coefficient array shape {coeffs.shape} does not match grid {self.grid.shape}")
        object.__setattr__(self, "coeffs", _frozen(coeffs))

    def with_coeffs(self, coeffs: np.ndarray) -> "SpectralField":
        return SpectralField(self.grid, coeffs)

    def __add__(self, other: "SpectralField") -> "SpectralField":
        return self.with_coeffs(self.coeffs + other.coeffs)

    def __sub__(self, other: "SpectralField") -> "SpectralField":
        return self.with_coeffs(self.coeffs - other.coeffs)

    def __mul__(self, scalar: complex) -> "SpectralField":
        return self.with_coeffs(scalar * self.coeffs)

    __rmul__ = __mul__

    def shifted_coeffs(self) -> np.ndarray:
        """Coefficients reordered so each axis runs from -M/2 to M/2-1."""
        return np.fft.fftshift(self.coeffs)

    def coefficient(self, k) -> complex:
        """Coefficient of the mode exp(i k.x) for an integer wavenumber tuple."""
        k = np.atleast_1d(k)
        M = self.grid.points_per_dim
        if np.any(k < -M // 2) or np.any(k >= M // 2):
            raise IndexError(f"wavenumber {tuple(k)} outside the retained band")
        return complex(self.coeffs[tuple(np.mod(k, M))])


def forward_transform(f: PhysicalField) -> SpectralField:
    return SpectralField(f.grid, np.fft.fftn(f.samples) / f.grid.size)


def inverse_transform(F: SpectralField) -> PhysicalField:
    return PhysicalField(F.grid, np.fft.ifftn(F.coeffs) * F.grid.size)


def from_function(grid: TorusGrid, func) -> SpectralField:
    """Sample ``func(*nodes)`` on the grid and transform."""
    return forward_transform(PhysicalField(grid, func(*grid.nodes())))


def fractional_laplacian(F: SpectralField, s: float) -> SpectralField:
    if s <= 0:
        raise ValueError("fractional order s must be positive")
    return F.with_coeffs(F.grid.symbol(s) * F.coeffs)


def propagator_phase(grid: TorusGrid, s: float, t: float) -> np.ndarray:
    return np.exp(-1j * t * grid.symbol(s))


def free_propagator(F: SpectralField, s: float, t: float) -> SpectralField:
    """Exact linear flow exp(-it(-Delta)^{s/2}) applied mode by mode."""
    if s <= 0:
        raise ValueError("fractional order s must be positive")
    return F.with_coeffs(propagator_phase(F.grid, s, t) * F.coeffs)


def pad_coeffs(coeffs: np.ndarray, M: int, factor: int) -> np.ndarray:
    """Embed band-limited coefficients (FFT order) into a grid ``factor`` times finer."""
    if factor == 1:
        return np.array(coeffs)
    dim = coeffs.ndim
    Mf = M * factor
    out = np.zeros((Mf,) * dim, dtype=np.complex128)
    idx = np.r_[0 : M // 2, Mf - M // 2 : Mf]
    out[np.ix_(*([idx] * dim))] = coeffs
    return out


def truncate_coeffs(coeffs_fine: np.ndarray, M: int) -> np.ndarray:
    """Project fine-grid coefficients (FFT order) onto the band {-M/2..M/2-1}^N."""
    Mf = coeffs_fine.shape[0]
    if Mf == M:
        return np.array(coeffs_fine)
    idx = np.r_[0 : M // 2, Mf - M // 2 : Mf]
    return coeffs_fine[np.ix_(*([idx] * coeffs_fine.ndim))]


def oversample(F: SpectralField, factor: int) -> PhysicalField:
    if factor < 1:
        raise ValueError("oversampling factor must be >= 1")
    fine = F.grid.refine(factor)
    padded = pad_coeffs(F.coeffs, F.grid.points_per_dim, factor)
    return PhysicalField(fine, np.fft.ifftn(padded) * fine.size)


def project(samples_fine: np.ndarray, grid: TorusGrid) -> SpectralField:
    """Transform samples on a refined grid and keep the coarse band."""
    coeffs_fine = np.fft.fftn(samples_fine) / samples_fine.size
    return SpectralField(grid, truncate_coeffs(coeffs_fine, grid.points_per_dim))


def evaluate_at(F: SpectralField, points: np.ndarray) -> np.ndarray:
    """Direct trigonometric summation at arbitrary points, shape (n_points, N)."""
    points = np.atleast_2d(points)
    ks = np.stack([k.ravel() for k in F.grid.wavenumbers], axis=1).astype(float)
    phases = np.exp(1j * points @ ks.T)
    return phases @ F.coeffs.ravel()


# -- binary snapshots ---------------------------------------------------------

def write_snapshot(path, F: SpectralField, s: float, t: float) -> None:
    header = _HEADER.pack(SNAPSHOT_MAGIC, SNAPSHOT_VERSION, F.grid.dim, F.grid.points_per_dim, float(s), float(t))
    body = np.ascontiguousarray(F.shifted_coeffs(), dtype="<c16").tobytes()
    Path(path).write_bytes(header + body)


def read_snapshot(path) -> tuple[SpectralField, float, float]:
    """Returns (field, s, t)."""
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise ValueError("snapshot truncated before end of header")
    magic, version, dim, M, s, t = _HEADER.unpack_from(raw)
    if magic != SNAPSHOT_MAGIC:
        raise ValueError(f"bad snapshot magic {magic!r}")
    if version != SNAPSHOT_VERSION:
        raise ValueError(f"unsupported snapshot version {version}")
    grid = TorusGrid(dim, M)
    expected = grid.size * 16
    body = raw[_HEADER.size :]
    if len(body) != expected:
        raise ValueError(f"snapshot body has {len(body)} bytes, expected {expected}")
    shifted = np.frombuffer(body, dtype="<c16").reshape(grid.shape)
    return SpectralField(grid, np.fft.ifftshift(shifted)), s, t
