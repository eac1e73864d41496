"""Nonlinear potentials N(|u|): C^J-class functions and (truncated) power series."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Union

import numpy as np
from numpy.polynomial import polynomial as P
from scipy import integrate, special

from .spectral import SpectralField, TorusGrid, pad_coeffs, truncate_coeffs

DEFAULT_MAX_DERIV = 8


class NonVanishingError(ValueError):
    """A singular nonlinearity was evaluated on a field that touches zero."""


@dataclass(frozen=True, eq=False)
class CJNonlinearity:
    label: str
    func: Callable[[np.ndarray], np.ndarray]
    deriv: Callable[[int, np.ndarray], np.ndarray]
    gamma: float
    decay_constants: tuple[float, ...]
    singular: bool = False
    endpoint_sup: bool = False  # |N| attains its sup over any interval at an endpoint
    antiderivative: Callable[[np.ndarray], np.ndarray] | None = None
    antiderivative_base: float = 1.0
    source: dict = field(default_factory=dict, compare=False)

    @property
    def is_real(self) -> bool:
        return True

    @property
    def max_order(self) -> int:
        return len(self.decay_constants)


@dataclass(frozen=True, eq=False)
class SeriesNonlinearity:
    label: str
    terms: tuple[tuple[complex, float], ...]
    max_terms: int = 64
    tail_tol: float = 1e-16
    infinite: bool = False  # terms are the head of an infinite series
    source: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        terms = tuple((complex(a), float(g)) for a, g in self.terms)
        object.__setattr__(self, "terms", terms[: self.max_terms])

    @property
    def singular(self) -> bool:
        return any(g < 0 and a != 0 for a, g in self.terms)

    @property
    def is_real(self) -> bool:
        return all(a.imag == 0 for a, _ in self.terms)

    @property
    def truncation(self) -> dict:
        return {"max_terms": self.max_terms, "tail_tol": self.tail_tol}

    def active_terms(self, x_min: float, x_max: float) -> tuple[tuple[complex, float], ...]:
        """Leading terms kept for moduli in [x_min, x_max]: stop after three
        consecutive terms whose size bound falls below tail_tol."""
        kept = []
        small = 0
        for a, g in self.terms:
            kept.append((a, g))
            bound = abs(a) * max(_pow(x_min, g), _pow(x_max, g))
            small = small + 1 if bound < self.tail_tol else 0
            if small >= 3:
                break
        return tuple(kept)


NonlinearitySpec = Union[CJNonlinearity, SeriesNonlinearity]


def _pow(x: float, g: float) -> float:
    if x == 0:
        return 0.0 if g > 0 else (1.0 if g == 0 else math.inf)
    return x ** g


def falling(g: float, n: int, step: float = 1.0) -> float:
    """g (g - step) ... (g - (n-1) step); 1 for n = 0."""
    out = 1.0
    for i in range(n):
        out *= g - i * step
    return out


# -- power family -----------------------------------------------------------------

def _power(gamma: float, coeff: float, label: str, source: dict) -> CJNonlinearity:
    def func(x):
        with np.errstate(divide="ignore"):
            return coeff * np.power(np.asarray(x, dtype=float), gamma)

    def deriv(n, x):
        with np.errstate(divide="ignore"):
            return coeff * falling(gamma, n) * np.power(np.asarray(x, dtype=float), gamma - n)

    def anti(tau):
        tau = np.asarray(tau, dtype=float)
        if gamma > -2:
            return coeff * tau ** (gamma + 2) / (gamma + 2)
        if gamma == -2:
            return coeff * np.log(tau)
        return coeff * (tau ** (gamma + 2) - 1.0) / (gamma + 2)

    decay = tuple(abs(coeff * falling(gamma, n)) or 1.0 for n in range(1, DEFAULT_MAX_DERIV + 1))
    return CJNonlinearity(
        label=label,
        func=func,
        deriv=deriv,
        gamma=gamma,
        decay_constants=decay,
        singular=gamma < 0,
        endpoint_sup=True,
        antiderivative=anti,
        antiderivative_base=0.0 if gamma > -2 else 1.0,
        source=source,
    )


def _log(source: dict) -> CJNonlinearity:
    def func(x):
        return np.log(np.asarray(x, dtype=float))

    def deriv(n, x):
        x = np.asarray(x, dtype=float)
        return (-1) ** (n - 1) * math.factorial(n - 1) * x ** (-n)

    def anti(tau):
        tau = np.asarray(tau, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = tau ** 2 * (2 * np.log(tau) - 1) / 4
        return np.where(tau == 0, 0.0, out)

    decay = tuple(float(math.factorial(n - 1)) for n in range(1, DEFAULT_MAX_DERIV + 1))
    return CJNonlinearity(
        label="log",
        func=func,
        deriv=deriv,
        gamma=0.0,
        decay_constants=decay,
        singular=True,
        endpoint_sup=True,
        antiderivative=anti,
        antiderivative_base=0.0,
        source=source,
    )


@lru_cache(maxsize=None)
def stirling_first(n: int, j: int) -> int:
    """Signed Stirling numbers of the first kind."""
    if n == j:
        return 1
    if j == 0 or j > n:
        return 0
    return stirling_first(n - 1, j - 1) - (n - 1) * stirling_first(n - 1, j)


@lru_cache(maxsize=None)
def logistic_derivative_poly(m: int) -> tuple[float, ...]:
    """Coefficients (ascending) of the polynomial p with sigma^{(m)} = p(sigma)."""
    p = np.array([0.0, 1.0])
    for _ in range(m):
        p = P.polymul(P.polyder(p), [0.0, 1.0, -1.0])
    return tuple(p)


def _poly_max_abs_unit(coef) -> float:
    coef = np.asarray(coef)
    cands = [0.0, 1.0]
    if len(coef) > 2:
        roots = P.polyroots(P.polyder(coef))
        cands += [r.real for r in roots if abs(r.imag) < 1e-12 and 0 <= r.real <= 1]
    return float(max(abs(P.polyval(c, coef)) for c in cands))


def _log1p_power(gamma: float, source: dict) -> CJNonlinearity:
    # N(x) = softplus(gamma*y), y = log x; d^n/dx^n = x^{-n} sum_j s(n,j) (d/dy)^j
    def func(x):
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.logaddexp(0.0, gamma * np.log(x))

    def deriv(n, x):
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            sig = special.expit(gamma * np.log(x))
            total = np.zeros_like(sig)
            for j in range(1, n + 1):
                total = total + stirling_first(n, j) * gamma ** j * P.polyval(sig, logistic_derivative_poly(j - 1))
            return total * x ** (-n)

    decay = []
    for n in range(1, DEFAULT_MAX_DERIV + 1):
        c = sum(
            abs(stirling_first(n, j)) * abs(gamma) ** j * _poly_max_abs_unit(logistic_derivative_poly(j - 1))
            for j in range(1, n + 1)
        )
        decay.append(c or 1.0)

    def anti(tau):
        tau = np.asarray(tau, dtype=float)
        flat = tau.ravel()
        uniq, inv = np.unique(flat, return_inverse=True)
        vals = np.array([_quad(lambda v: float(func(v)) * v, 0.0, t) for t in uniq])
        return vals[inv].reshape(tau.shape)

    return CJNonlinearity(
        label=f"log1p({gamma:g})",
        func=func,
        deriv=deriv,
        gamma=0.0,
        decay_constants=tuple(decay),
        singular=gamma < 0,
        endpoint_sup=True,
        antiderivative=anti,
        antiderivative_base=0.0,
        source=source,
    )


def _quad(f, a, b) -> float:
    if a == b:
        return 0.0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        val, _ = integrate.quad(f, a, b, limit=200, epsabs=1e-14, epsrel=1e-13)
    return val


def custom(label, func, deriv, gamma, decay_constants, singular=True) -> CJNonlinearity:
    """User-supplied C^J potential; the antiderivative falls back to quadrature from 1."""
    return CJNonlinearity(
        label=label,
        func=func,
        deriv=deriv,
        gamma=float(gamma),
        decay_constants=tuple(float(c) for c in decay_constants),
        singular=singular,
        source={"kind": "custom", "label": label},
    )


# -- series family ----------------------------------------------------------------

def _series(label, terms, max_terms, tail_tol, source, infinite=False) -> SeriesNonlinearity:
    return SeriesNonlinearity(
        label=label, terms=tuple(terms), max_terms=max_terms, tail_tol=tail_tol, infinite=infinite, source=source
    )


def builtin(name: str, **params) -> NonlinearitySpec:
    """Build one of the named potentials.

    power(gamma), log, log1p(gamma), inverse_power(nu), exp(r), sin_quotient(r1, r2),
    combined(a_k, nu_k), series(a_k, gamma_k), zero.
    """
    max_terms = int(params.get("max_terms", 64))
    tail_tol = float(params.get("tail_tol", 1e-16))
    source = {"kind": name, **params}
    if name == "power":
        g = float(params["gamma"])
        return _power(g, float(params.get("coeff", 1.0)), f"power({g:g})", source)
    if name == "inverse_power":
        nu = float(params["nu"])
        return _power(-nu, -1.0, f"inverse_power({nu:g})", source)
    if name == "log":
        return _log(source)
    if name in ("log1p", "log1p_gamma"):
        return _log1p_power(float(params["gamma"]), source)
    if name in ("exp", "exp_r"):
        r = float(params["r"])
        terms = [(1.0 / math.factorial(k), r * k) for k in range(max_terms)]
        return _series(f"exp(|u|^{r:g})", terms, max_terms, tail_tol, source, infinite=True)
    if name == "sin_quotient":
        r1, r2 = float(params["r1"]), float(params["r2"])
        terms = [((-1) ** k / math.factorial(2 * k + 1), 2 * r1 * k + r1 - r2) for k in range(max_terms)]
        return _series(f"sin(|u|^{r1:g})/|u|^{r2:g}", terms, max_terms, tail_tol, source, infinite=True)
    if name == "combined":
        a_k = _complex_list(params["a_k"])
        nu_k = [float(v) for v in params["nu_k"]]
        if len(a_k) != len(nu_k):
            raise ValueError("combined nonlinearity needs equally long a_k and nu_k")
        return _series("combined", [(a, -nu) for a, nu in zip(a_k, nu_k)], max_terms, tail_tol, source)
    if name == "series":
        a_k = _complex_list(params["a_k"])
        g_k = [float(v) for v in params["gamma_k"]]
        if len(a_k) != len(g_k):
            raise ValueError("series nonlinearity needs equally long a_k and gamma_k")
        return _series("series", list(zip(a_k, g_k)), max_terms, tail_tol, source)
    if name == "zero":
        return _series("zero", [], max_terms, tail_tol, source)
    raise ValueError(f"unknown nonlinearity {name!r}")


def _complex_list(values) -> list[complex]:
    out = []
    for v in values:
        if isinstance(v, (list, tuple)):
            out.append(complex(v[0], v[1]))
        else:
            out.append(complex(v))
    return out


# -- evaluation -------------------------------------------------------------------

def potential_values(spec: NonlinearitySpec, x: np.ndarray, terms=None) -> np.ndarray:
    """N(x) elementwise; series use ``terms`` (default: truncated to the range of x)."""
    x = np.asarray(x, dtype=float)
    if isinstance(spec, CJNonlinearity):
        return spec.func(x)
    if terms is None:
        terms = spec.active_terms(float(np.min(x)), float(np.max(x))) if x.size else ()
    out = np.zeros(x.shape, dtype=complex)
    with np.errstate(divide="ignore"):
        for a, g in terms:
            out = out + a * np.power(x, g)
    return out


def evaluate_series(spec: SeriesNonlinearity, x: float) -> tuple[complex, float]:
    """Value of the truncated series at x and a size estimate of the omitted tail."""
    terms = spec.active_terms(x, x)
    value = complex(potential_values(spec, np.array(x), terms))
    if len(terms) < len(spec.terms):
        tail = sum(abs(a) * _pow(x, g) for a, g in terms[-3:])
    else:
        tail = 0.0
    return value, tail


def evaluate_potential(spec: NonlinearitySpec, x: float) -> complex:
    if x < 0 or (x == 0 and spec.singular):
        raise NonVanishingError(f"{spec.label} is singular at x={x}")
    if isinstance(spec, SeriesNonlinearity):
        return evaluate_series(spec, x)[0]
    return complex(spec.func(np.array(x, dtype=float)))


def nonlinear_term_coeffs(spec: NonlinearitySpec, coeffs: np.ndarray, grid: TorusGrid, factor: int = 2) -> np.ndarray:
    """Coefficients of P[N(|u|)u] for a stack of fields (leading axis = stack).

    Pointwise evaluation on a grid ``factor`` times finer, then projection onto the band.
    """
    M = grid.points_per_dim
    stack = coeffs.reshape((-1,) + grid.shape)
    axes = tuple(range(1, grid.dim + 1))
    fine_coeffs = np.stack([pad_coeffs(c, M, factor) for c in stack])
    n_fine = (M * factor) ** grid.dim
    u = np.fft.ifftn(fine_coeffs, axes=axes) * n_fine
    mod = np.abs(u)
    if spec.singular and np.min(mod) <= 0:
        raise NonVanishingError(f"{spec.label} evaluated on a field with a zero")
    nu = potential_values(spec, mod) * u
    out_fine = np.fft.fftn(nu, axes=axes) / n_fine
    out = np.stack([truncate_coeffs(c, M) for c in out_fine])
    return out.reshape(coeffs.shape)


def apply_nonlinear_term(spec: NonlinearitySpec, F: SpectralField, oversample_factor: int = 2, certify: bool = True) -> SpectralField:
    if spec.singular and certify:
        from .norms import certified_infimum

        if certified_infimum(F, max(2, oversample_factor)) <= 0:
            raise NonVanishingError(f"{spec.label} needs a field with certified positive infimum")
    return F.with_coeffs(nonlinear_term_coeffs(spec, F.coeffs, F.grid, oversample_factor))


# -- antiderivative N(tau) = int_0^tau N(v) v dv ------------------------------------

def antiderivative_base(spec: NonlinearitySpec) -> float:
    """Lower limit used for the antiderivative (0, or 1 when 0 is not integrable)."""
    if isinstance(spec, CJNonlinearity):
        return spec.antiderivative_base if spec.antiderivative is not None else 1.0
    return 1.0 if any(g <= -2 for _, g in spec.terms) else 0.0


def big_n_values(spec: NonlinearitySpec, tau: np.ndarray, terms=None) -> np.ndarray:
    tau = np.asarray(tau, dtype=float)
    if isinstance(spec, CJNonlinearity):
        if spec.antiderivative is not None:
            return spec.antiderivative(tau)
        flat = tau.ravel()
        uniq, inv = np.unique(flat, return_inverse=True)
        vals = np.array([_quad(lambda v: float(np.real(spec.func(np.array(v)))) * v, 1.0, t) for t in uniq])
        return vals[inv].reshape(tau.shape)
    if terms is None:
        terms = spec.active_terms(float(np.min(tau)), float(np.max(tau))) if tau.size else ()
    out = np.zeros(tau.shape, dtype=complex)
    for a, g in terms:
        if g > -2:
            out = out + a * tau ** (g + 2) / (g + 2)
        elif g == -2:
            out = out + a * np.log(tau)
        else:
            out = out + a * (tau ** (g + 2) - 1.0) / (g + 2)
    return out


def big_N_antiderivative(spec: NonlinearitySpec, tau: float) -> float:
    if tau <= 0:
        raise ValueError("antiderivative is evaluated at tau > 0")
    val = big_n_values(spec, np.array(tau))
    return float(np.real(val))
