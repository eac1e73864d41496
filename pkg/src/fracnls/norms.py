"""Sobolev/Lebesgue norms, the L-infinity embedding constant and certified infima.

Norm convention: ||f||_{H^r}^2 = (2pi)^N sum_k <k>^{2r} |f_k|^2, so that r = 0
reproduces the quadrature value of the integral of |f|^2 over the torus.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, astuple
from enum import Enum

import numpy as np

from .spectral import SpectralField, TorusGrid, oversample, inverse_transform


@dataclass(frozen=True)
class NormReport:
    l2: float
    h_spectral: float
    h_derivative_sum: float
    l_inf: float
    inf_lower_bound: float

    CSV_HEADER = ("t", "l2", "h_spectral", "h_derivative_sum", "l_inf", "inf_lower_bound")

    def csv_row(self, t: float) -> str:
        return ",".join(repr(float(v)) for v in (t, *astuple(self)))


class C1Source(str, Enum):
    computed_bound = "computed_bound"
    user_supplied = "user_supplied"


@dataclass(frozen=True)
class EmbeddingConstants:
    c1: float
    c1_source: C1Source = C1Source.computed_bound


def _volume_factor(dim: int) -> float:
    return (2 * np.pi) ** dim


def sobolev_norm_spectral(F: SpectralField, r: float) -> float:
    weights = (1.0 + F.grid.k_squared) ** r
    return math.sqrt(_volume_factor(F.grid.dim) * float(np.sum(weights * np.abs(F.coeffs) ** 2)))


def sobolev_norms_spectral(coeffs: np.ndarray, grid: TorusGrid, r: float) -> np.ndarray:
    """Vectorised H^r norms of a stack of coefficient arrays (leading axis = stack)."""
    weights = (1.0 + grid.k_squared) ** r
    axes = tuple(range(1, coeffs.ndim))
    return np.sqrt(_volume_factor(grid.dim) * np.sum(weights * np.abs(coeffs) ** 2, axis=axes))


def l2_norm(F: SpectralField) -> float:
    return sobolev_norm_spectral(F, 0.0)


def multi_indices(dim: int, max_order: int, min_order: int = 0):
    """All multi-indices beta in N_0^dim with min_order <= |beta| <= max_order."""
    for beta in itertools.product(range(max_order + 1), repeat=dim):
        if min_order <= sum(beta) <= max_order:
            yield beta


def sobolev_norm_derivative_sum(F: SpectralField, J: int) -> float:
    if J < 0 or int(J) != J:
        raise ValueError("J must be a nonnegative integer")
    vol = _volume_factor(F.grid.dim)
    power = np.abs(F.coeffs) ** 2
    total = 0.0
    for beta in multi_indices(F.grid.dim, int(J)):
        mult = np.ones(F.grid.shape)
        for k, b in zip(F.grid.wavenumbers, beta):
            if b:
                mult = mult * np.abs(k.astype(float)) ** (2 * b)
        total += math.sqrt(vol * float(np.sum(mult * power)))
    return total


def embedding_constant_c1(J: float, N: int, grid: TorusGrid) -> float:
    """Constant C1 with ||f||_inf <= C1 ||f||_{H^J} for fields band-limited to ``grid``.

    Cauchy-Schwarz on sum_k |f_k|: C1 = (2pi)^{-N/2} (sum_k <k>^{-2J})^{1/2}.
    """
    if J <= N / 2:
        raise ValueError(f"embedding H^J -> L^inf needs J > N/2 (got J={J}, N={N})")
    if grid.dim != N:
        raise ValueError("grid dimension does not match N")
    s = float(np.sum((1.0 + grid.k_squared) ** (-J)))
    return math.sqrt(s) / math.sqrt(_volume_factor(N))


def lemma_c1(N: int, grid: TorusGrid) -> float:
    """The c1 >= 1 used by the power-type estimates (regularity floor(N/2)+1)."""
    return max(1.0, embedding_constant_c1(N // 2 + 1, N, grid))


def gradient_bound(F: SpectralField) -> float:
    """sum_k |k| |f_k|, an upper bound for sup |grad f|."""
    return float(np.sum(F.grid.k_abs * np.abs(F.coeffs)))


def certified_infimum(F: SpectralField, oversample_factor: int = 4) -> float:
    """Rigorous lower bound for inf |u| of the band-limited field.

    Minimum of |u| on a refined grid minus L*h/2, where L bounds |grad u| and h
    is the diagonal of a fine-grid cell.
    """
    if oversample_factor < 2:
        raise ValueError("certified infimum needs oversample_factor >= 2")
    fine = oversample(F, oversample_factor)
    g_min = float(np.min(np.abs(fine.samples)))
    h = fine.grid.spacing * math.sqrt(F.grid.dim)
    return max(0.0, g_min - gradient_bound(F) * h / 2)


def eta_of(F: SpectralField, oversample_factor: int = 4) -> float | None:
    bound = certified_infimum(F, oversample_factor)
    return 1.0 / bound if bound > 0 else None


def sup_norm(F: SpectralField, oversample_factor: int = 4) -> float:
    return float(np.max(np.abs(oversample(F, oversample_factor).samples)))


def norm_report(F: SpectralField, J: int, oversample_factor: int = 4) -> NormReport:
    return NormReport(
        l2=l2_norm(F),
        h_spectral=sobolev_norm_spectral(F, J),
        h_derivative_sum=sobolev_norm_derivative_sum(F, J),
        l_inf=sup_norm(F, oversample_factor),
        inf_lower_bound=certified_infimum(F, max(2, oversample_factor)),
    )


def quadrature_l2(F: SpectralField) -> float:
    """L2 norm by grid quadrature (independent of Parseval)."""
    u = inverse_transform(F).samples
    return math.sqrt(float(np.sum(np.abs(u) ** 2)) * F.grid.spacing ** F.grid.dim)
