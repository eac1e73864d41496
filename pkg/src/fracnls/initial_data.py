"""Initial-data generators."""
from __future__ import annotations

import math

import numpy as np

from .spectral import SpectralField, TorusGrid, read_snapshot


def constant(grid: TorusGrid, c: complex) -> SpectralField:
    coeffs = np.zeros(grid.shape, dtype=complex)
    coeffs[(0,) * grid.dim] = c
    return SpectralField(grid, coeffs)


def plane_wave(grid: TorusGrid, amplitude: complex, k) -> SpectralField:
    k = tuple(int(v) for v in np.atleast_1d(k))
    if len(k) != grid.dim:
        raise ValueError("wavenumber length must match the dimension")
    M = grid.points_per_dim
    if any(not -M // 2 <= v < M // 2 for v in k):
        raise ValueError(f"wavenumber {k} outside the retained band")
    coeffs = np.zeros(grid.shape, dtype=complex)
    coeffs[tuple(v % M for v in k)] = amplitude
    return SpectralField(grid, coeffs)


def amplitude_for_floor(grid: TorusGrid, c0: complex, rho: float, max_mode: int, oversample_factor: int = 2) -> float:
    """Total perturbation size sum|eps_k| that keeps the certified infimum >= |c0|(1-rho).

    The certified bound loses at most sum|eps| + max_mode*sum|eps|*h/2 with h the
    refined-cell diagonal.
    """
    h = 2 * math.pi / (grid.points_per_dim * oversample_factor) * math.sqrt(grid.dim)
    return rho * abs(c0) / (1 + max_mode * math.sqrt(grid.dim) * h / 2)


def perturbed_constant(grid: TorusGrid, c0: complex, epsilon: float | None = None, rho: float | None = None, max_mode: int = 3, seed: int | None = None, rng: np.random.Generator | None = None) -> SpectralField:
    """c0 + sum_{0<|k|_inf<=max_mode} eps_k e^{ik.x} with random phases.

    ``epsilon`` fixes sum|eps_k| directly; ``rho`` sizes it so the certified
    infimum stays >= |c0|(1-rho).
    """
    if (epsilon is None) == (rho is None):
        raise ValueError("give exactly one of epsilon and rho")
    if max_mode < 1 or max_mode >= grid.points_per_dim // 2:
        raise ValueError("max_mode must lie in [1, M/2)")
    rng = rng if rng is not None else np.random.default_rng(seed)
    total = epsilon if epsilon is not None else amplitude_for_floor(grid, c0, rho, max_mode)
    M = grid.points_per_dim
    modes = [k for k in np.ndindex(*(2 * max_mode + 1,) * grid.dim)]
    modes = [tuple(v - max_mode for v in k) for k in modes]
    modes = [k for k in modes if any(k)]
    raw = rng.standard_normal(len(modes)) + 1j * rng.standard_normal(len(modes))
    raw *= total / np.sum(np.abs(raw))
    coeffs = np.zeros(grid.shape, dtype=complex)
    coeffs[(0,) * grid.dim] = c0
    for k, e in zip(modes, raw):
        coeffs[tuple(v % M for v in k)] += e
    return SpectralField(grid, coeffs)


def from_snapshot(path, grid: TorusGrid | None = None) -> SpectralField:
    F, _, _ = read_snapshot(path)
    if grid is not None and F.grid != grid:
        raise ValueError(f"snapshot grid {F.grid} does not match configured grid {grid}")
    return F


def random_smooth(grid: TorusGrid, rng: np.random.Generator, decay: float = 1.0, max_mode: int | None = None) -> SpectralField:
    """Random field with coefficients decaying like exp(-decay |k|)."""
    max_mode = grid.points_per_dim // 4 if max_mode is None else max_mode
    raw = rng.standard_normal(grid.shape) + 1j * rng.standard_normal(grid.shape)
    weight = np.exp(-decay * grid.k_abs)
    weight[np.max(np.abs(np.stack(grid.wavenumbers)), axis=0) > max_mode] = 0
    return SpectralField(grid, raw * weight)
