"""Explicit nonlinear estimate functions and certified local-existence windows.

Everything here evaluates closed-form expressions: the sup of |N| over the
admissible modulus range, the exponent K(J, gamma), the C^J-class bounds G1/G2,
the power-type bounds Gamma1/Gamma2, the series condition, and the three
linear-in-T inequalities that size a contraction window.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Sequence, Union

import numpy as np

from .nonlinearity import (
    CJNonlinearity,
    NonlinearitySpec,
    SeriesNonlinearity,
    apply_nonlinear_term,
    falling,
    potential_values,
)
from .norms import certified_infimum, embedding_constant_c1, lemma_c1, sobolev_norm_spectral
from .spectral import SpectralField

CBetaPolicy = Union[None, str, float, Callable[[tuple], float]]


class EstimateError(ValueError):
    pass


class SeriesDivergenceError(EstimateError):
    pass


@dataclass(frozen=True)
class WellPosednessWindow:
    T: float
    R: float
    eta: float
    conditions: tuple[bool, bool, bool]  # map-into-self, contraction, infimum
    family: str
    bounds: tuple[float, float, float]
    estimates: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {
            "T": self.T,
            "R": self.R,
            "eta": self.eta,
            "family": self.family,
            "T_map_into_self": self.bounds[0],
            "T_contraction": self.bounds[1],
            "T_infimum": self.bounds[2],
            "conditions": list(self.conditions),
            **self.estimates,
        }


@dataclass(frozen=True)
class SeriesConvergenceReport:
    r0: float
    partial_sums: tuple[float, ...]
    converged: bool
    bound: float
    diverged: bool = False

    @property
    def n_terms(self) -> int:
        return len(self.partial_sums)


@dataclass
class EstimateReport:
    sn: float
    k_constant: float
    g1: float
    g2: float | None = None
    gamma1: float | None = None
    gamma2: float | None = None
    c_fit: float | None = None
    inputs: dict = field(default_factory=dict)


# -- sup of |N| -------------------------------------------------------------------

def _series_endpoint(spec: SeriesNonlinearity, terms) -> bool:
    if not terms:
        return True
    if any(a.imag != 0 or a.real < 0 for a, _ in terms):
        return False
    gs = [g for a, g in terms if a != 0]
    return all(g >= 0 for g in gs) or all(g <= 0 for g in gs)


def _abs_potential(spec, x, terms):
    return np.abs(potential_values(spec, x, terms))


def sup_n(spec: NonlinearitySpec, eta: float, upper: float, upper_bound: bool = False, n_samples: int = 4096) -> float:
    """sup |N(x)| over x in [1/eta, upper]."""
    lo = 1.0 / eta
    if not lo <= upper * (1 + 1e-12):
        raise EstimateError(f"empty modulus interval [{lo:g}, {upper:g}]")
    upper = max(upper, lo)
    terms = spec.active_terms(lo, upper) if isinstance(spec, SeriesNonlinearity) else None
    ends = np.array([lo, upper])
    endpoint = spec.endpoint_sup if isinstance(spec, CJNonlinearity) else _series_endpoint(spec, terms)
    if endpoint or lo == upper:
        return float(np.max(_abs_potential(spec, ends, terms)))
    xs = np.geomspace(lo, upper, n_samples)
    vals = _abs_potential(spec, xs, terms)
    i = int(np.argmax(vals))
    best = float(vals[i])
    # local refinement on the bracket around the sampled maximiser
    a, b = xs[max(i - 1, 0)], xs[min(i + 1, n_samples - 1)]
    for _ in range(3):
        fine = np.linspace(a, b, 33)
        fv = _abs_potential(spec, fine, terms)
        j = int(np.argmax(fv))
        best = max(best, float(fv[j]))
        a, b = fine[max(j - 1, 0)], fine[min(j + 1, 32)]
    if upper_bound:
        gaps = np.diff(xs)
        best += float(np.max(_abs_derivative(spec, xs, terms)[1:] * gaps)) / 2
    return best


def _abs_derivative(spec, x, terms):
    if isinstance(spec, CJNonlinearity):
        return np.abs(spec.deriv(1, x))
    out = np.zeros(x.shape, dtype=complex)
    for a, g in terms:
        out = out + a * g * x ** (g - 1)
    return np.abs(out)


# -- K(J, gamma) ------------------------------------------------------------------

def k_constant(J: int, gamma: float) -> float:
    if J < 1:
        raise EstimateError("K(J, gamma) needs J >= 1")
    best = -math.inf
    for p1 in range(J + 1):
        for p2 in range(J + 1):
            best = max(
                best,
                abs(gamma - 2 * p2) + 2 * p2,
                abs(gamma - p1 - 1) + abs(p1 - 2 * p2) + 2 * p2 + 1,
                abs(p1 - 2 * p2 - 1) + 2 * p2 + 2,
            )
    return float(best)


# -- G1 / G2 (C^J class) ----------------------------------------------------------

def _require_cj(spec):
    if not isinstance(spec, CJNonlinearity):
        raise EstimateError("G1/G2 are defined for C^J-class nonlinearities")


def g1_base(spec, eta, norm_u, c1) -> float:
    return 1 + eta + norm_u + sup_n(spec, eta, c1 * norm_u)


def g2_base(spec, eta, norm_u, norm_v, c1) -> float:
    return 1 + eta + norm_u + norm_v + sup_n(spec, eta, c1 * norm_u) + sup_n(spec, eta, c1 * norm_v)


def g1(spec: CJNonlinearity, eta: float, norm_u: float, J: int, N: int, c: float, c1: float) -> float:
    _require_cj(spec)
    if J <= N / 2:
        raise EstimateError("G1 needs J > N/2")
    out = c * g1_base(spec, eta, norm_u, c1) ** k_constant(J, spec.gamma)
    if not math.isfinite(out):
        raise EstimateError("G1 overflowed")
    return out


def g2(spec: CJNonlinearity, eta: float, norm_u: float, norm_v: float, J: int, N: int, c: float, c1: float) -> float:
    _require_cj(spec)
    if J <= N / 2:
        raise EstimateError("G2 needs J > N/2")
    out = c * g2_base(spec, eta, norm_u, norm_v, c1) ** k_constant(J, spec.gamma)
    if not math.isfinite(out):
        raise EstimateError("G2 overflowed")
    return out


# -- combinatorics ----------------------------------------------------------------

def c_coeff(gamma: float, p: int) -> float:
    """|gamma (gamma-2) ... (gamma-2(p-1))|, and 1 for p = 0."""
    if p < 0:
        raise ValueError("p must be nonnegative")
    return abs(falling(gamma, p, step=2.0))


def enumerate_compositions(beta: Sequence[int], p: int) -> list[tuple[tuple[int, ...], ...]]:
    """Ordered p-tuples of nonzero multi-indices summing to beta."""
    beta = tuple(int(b) for b in beta)
    if p < 1 or sum(beta) < p:
        return []
    return list(_compositions(beta, p))


@lru_cache(maxsize=None)
def _compositions(beta: tuple[int, ...], p: int) -> tuple:
    if p == 1:
        return ((beta,),) if sum(beta) >= 1 else ()
    out = []
    for first in itertools.product(*(range(b + 1) for b in beta)):
        if sum(first) == 0:
            continue
        rest = tuple(b - f for b, f in zip(beta, first))
        if sum(rest) < p - 1:
            continue
        for tail in _compositions(rest, p - 1):
            out.append((first,) + tail)
    return tuple(out)


@lru_cache(maxsize=None)
def _composition_table(J: int, N: int) -> tuple[tuple[int, int, int, tuple], ...]:
    """(|beta|, p, number of compositions, beta) for 0 < |beta| <= J, 1 <= p <= |beta|."""
    rows = []
    for beta in itertools.product(range(J + 1), repeat=N):
        order = sum(beta)
        if not 0 < order <= J:
            continue
        for p in range(1, order + 1):
            rows.append((order, p, len(_compositions(beta, p)), beta))
    return tuple(rows)


def c_beta_value(policy: CBetaPolicy, beta: tuple) -> float:
    if policy is None or policy == "binomial":
        return 2.0 ** sum(beta)
    if callable(policy):
        return float(policy(beta))
    return float(policy)


def coefficient_bound(gamma: float, order: int, p: int) -> float:
    """Upper bound 2^{|beta|} |(g/2)(g/2-1)...(g/2-(p-1))| for the chain-rule coefficients."""
    return 2.0 ** order * abs(falling(gamma / 2, p))


# -- Gamma1 / Gamma2 (power type) -------------------------------------------------

def _gamma1_parts(gamma, eta, nu, J, N, c1, c_beta_policy):
    g = abs(gamma)
    first = c1 ** g * (eta ** g + nu ** g) * nu
    comp = 0.0
    for order, p, count, beta in _composition_table(J, N):
        e = abs(gamma - 2 * p)
        comp += (
            count
            * c_beta_value(c_beta_policy, beta)
            * c1 ** e
            * coefficient_bound(gamma, order, p)
            * (eta ** e + nu ** e)
            * nu ** (2 * p + 1)
        )
    return first, comp


def gamma1(gamma: float, eta: float, norm_u: float, J: int, N: int, c0: float = 1.0, c1: float = 1.0, c_beta_policy: CBetaPolicy = None) -> float:
    if J <= N / 2:
        raise EstimateError("Gamma1 needs J > N/2")
    first, comp = _gamma1_parts(gamma, eta, norm_u, J, N, c1, c_beta_policy)
    return c0 * first + comp


def _gamma2_parts(gamma, eta, nu, nv, J, N, c1, c_beta_policy):
    g1e = abs(gamma - 1)
    g0e = abs(gamma)
    first = c1 ** g1e * abs(gamma) * (eta ** g1e + nu ** g1e + nv ** g1e) * (nu + nv)
    first += c1 ** g0e * (eta ** g0e + nu ** g0e + nv ** g0e)
    comp = 0.0
    for order, p, count, beta in _composition_table(J, N):
        ea = abs(gamma - 2 * p - 1)
        eb = abs(gamma - 2 * p)
        inner = c1 ** ea * abs(gamma - 2 * p) * (eta ** ea + nu ** ea + nv ** ea) * (nu ** (2 * p + 1) + nv ** (2 * p + 1))
        inner += c1 ** eb * (eta ** eb + nu ** eb + nv ** eb) * (nu ** (2 * p) + nv ** (2 * p))
        comp += count * c_beta_value(c_beta_policy, beta) * coefficient_bound(gamma, order, p) * inner
    return first, comp


def gamma2(gamma: float, eta: float, norm_u: float, norm_v: float, J: int, N: int, c0: float = 1.0, c1: float = 1.0, c_beta_policy: CBetaPolicy = None) -> float:
    if J <= N / 2:
        raise EstimateError("Gamma2 needs J > N/2")
    first, comp = _gamma2_parts(gamma, eta, norm_u, norm_v, J, N, c1, c_beta_policy)
    return c0 * first + comp


# -- series condition -------------------------------------------------------------

def series_condition(series: SeriesNonlinearity, r0: float, J: int) -> SeriesConvergenceReport:
    if r0 <= 0:
        raise EstimateError("series condition needs R0 > 0")
    partial = []
    increments = []
    total = 0.0
    for a, g in series.terms:
        inc = 0.0
        for p in range(J + 1):
            e = abs(g - 2 * p)
            inc += c_coeff(g, p) * abs(a) * (r0 ** e + e * r0 ** abs(g - 2 * p - 1))
        increments.append(inc)
        total += inc
        partial.append(total)
        if series.infinite and len(increments) >= 3 and all(x < series.tail_tol for x in increments[-3:]):
            return SeriesConvergenceReport(r0, tuple(partial), True, total)
    if not series.infinite:
        return SeriesConvergenceReport(r0, tuple(partial), True, total)
    tail = increments[-8:]
    diverged = len(tail) == 8 and all(b > a for a, b in zip(tail, tail[1:]))
    return SeriesConvergenceReport(r0, tuple(partial), False, total, diverged)


# -- existence windows ------------------------------------------------------------

def _check_conditions(T, lhs_rates, rhs):
    # each inequality reads T * rate <= rhs; tolerate rounding of the closed form
    return tuple(bool(T * r <= b * (1 + 1e-12)) for r, b in zip(lhs_rates, rhs))


def existence_window_cj(spec: CJNonlinearity, u0_norm: float, eta: float, J: int, N: int, c: float = 1.0, c1: float = 1.0) -> WellPosednessWindow:
    """T solving   T G1(2eta,R) R <= R/2,  T G2(2eta,R,R) <= 1/2,
    T (c R/2 + G1(2eta,R) R) <= 1/(2 eta),   with R = 2 ||u0||."""
    if u0_norm <= 0:
        raise EstimateError("existence window needs a nonzero initial norm")
    R = 2 * u0_norm
    G1 = g1(spec, 2 * eta, R, J, N, c, c1)
    G2 = g2(spec, 2 * eta, R, R, J, N, c, c1)
    rates = (G1 * R, G2, c * R / 2 + G1 * R)
    rhs = (R / 2, 0.5, 0.5 / eta)
    bounds = tuple(b / r for r, b in zip(rates, rhs))
    T = min(bounds)
    if not (math.isfinite(T) and T > 0):
        raise EstimateError("existence window is degenerate")
    return WellPosednessWindow(
        T=T, R=R, eta=eta, conditions=_check_conditions(T, rates, rhs), family="cj", bounds=bounds,
        estimates={"G1": G1, "G2": G2, "K": k_constant(J, spec.gamma), "c": c, "c1": c1},
    )


def _series_terms_for(series: SeriesNonlinearity, r0: float, J: int):
    report = series_condition(series, r0, J)
    if not report.converged:
        raise SeriesDivergenceError(f"series condition not met at R0={r0:g} (diverged={report.diverged})")
    return series.terms[: report.n_terms], report


def gamma_sums(series: SeriesNonlinearity, eta: float, R: float, J: int, N: int, c0=1.0, c1=1.0, c_beta_policy=None, terms=None):
    terms = series.terms if terms is None else terms
    s1 = sum(abs(a) * gamma1(g, eta, R, J, N, c0, c1, c_beta_policy) for a, g in terms)
    s2 = sum(abs(a) * gamma2(g, eta, R, R, J, N, c0, c1, c_beta_policy) for a, g in terms)
    return s1, s2


def existence_window_series(series: SeriesNonlinearity, u0_norm: float, eta: float, J: int, N: int, c: float = 1.0, c0: float = 1.0, c1: float = 1.0, c_beta_policy: CBetaPolicy = None) -> WellPosednessWindow:
    """T solving   T S1 <= R/2,  T S2 <= 1/2,  T (c R/2 + c S1) <= 1/(2 eta),
    with S1, S2 the |a_k|-weighted Gamma1/Gamma2 sums at (2eta, R)."""
    if u0_norm <= 0:
        raise EstimateError("existence window needs a nonzero initial norm")
    R = 2 * u0_norm
    r0 = max(2 * eta, R)
    terms, report = _series_terms_for(series, r0, J)
    S1, S2 = (float(v) for v in gamma_sums(series, 2 * eta, R, J, N, c0, c1, c_beta_policy, terms))
    rates = (S1, S2, c * R / 2 + c * S1)
    rhs = (R / 2, 0.5, 0.5 / eta)
    bounds = tuple(float(b / r) if r > 0 else math.inf for r, b in zip(rates, rhs))
    T = min(bounds)
    if not (math.isfinite(T) and T > 0):
        raise EstimateError("existence window is degenerate")
    return WellPosednessWindow(
        T=T, R=R, eta=eta, conditions=_check_conditions(T, rates, rhs), family="series", bounds=bounds,
        estimates={"Gamma1_sum": S1, "Gamma2_sum": S2, "series_terms": len(terms), "series_bound": report.bound,
                   "c": c, "c0": c0, "c1": c1},
    )


def as_power_series(spec: NonlinearitySpec) -> SeriesNonlinearity | None:
    """Single-term series view of a power-type C^J spec (None for non-power specs)."""
    if isinstance(spec, SeriesNonlinearity):
        return spec
    src = spec.source
    if src.get("kind") == "power":
        return SeriesNonlinearity(spec.label, ((float(src.get("coeff", 1.0)), float(src["gamma"])),))
    if src.get("kind") == "inverse_power":
        return SeriesNonlinearity(spec.label, ((-1.0, -float(src["nu"])),))
    return None


# -- empirical constants ----------------------------------------------------------

def _sample_stats(F: SpectralField, J: int, oversample_factor: int):
    inf = certified_infimum(F, max(2, oversample_factor))
    if inf <= 0:
        raise EstimateError("sample field has no certified positive infimum")
    return 1.0 / inf, sobolev_norm_spectral(F, J)


def fit_empirical_constant(spec: NonlinearitySpec, samples, J: int, N: int, mode: str = "g1", c1: float | None = None, c_beta_policy: CBetaPolicy = None, oversample_factor: int = 2) -> float:
    """Smallest constant making the selected estimate hold on every sample.

    mode "g1": c in ||N(|u|)u|| <= c base^K ||u||; "g2": c in the difference bound
    (samples are (u, v) pairs); "gamma1"/"gamma2": c0 in the power-type bounds,
    summed over series terms with |a_k| weights.
    """
    samples = list(samples)
    if not samples:
        raise EstimateError("cannot fit a constant on an empty sample set")
    grid = (samples[0][0] if mode in ("g2", "gamma2") else samples[0]).grid
    best = 0.0
    if mode in ("g1", "g2"):
        _require_cj(spec)
        c1 = embedding_constant_c1(J, N, grid) if c1 is None else c1
        K = k_constant(J, spec.gamma)
    else:
        series = as_power_series(spec)
        if series is None:
            raise EstimateError(f"{spec.label} has no power-series form for mode {mode!r}")
        c1 = lemma_c1(N, grid) if c1 is None else c1
    for item in samples:
        if mode == "g1":
            eta, nu = _sample_stats(item, J, oversample_factor)
            lhs = sobolev_norm_spectral(apply_nonlinear_term(spec, item, oversample_factor), J)
            best = max(best, lhs / (g1_base(spec, eta, nu, c1) ** K * nu))
        elif mode == "g2":
            u, v = item
            eu, nu = _sample_stats(u, J, oversample_factor)
            ev, nv = _sample_stats(v, J, oversample_factor)
            eta = max(eu, ev)
            diff = sobolev_norm_spectral(u - v, J)
            lhs = sobolev_norm_spectral(
                apply_nonlinear_term(spec, u, oversample_factor) - apply_nonlinear_term(spec, v, oversample_factor), J
            )
            best = max(best, lhs / (g2_base(spec, eta, nu, nv, c1) ** K * diff))
        elif mode == "gamma1":
            eta, nu = _sample_stats(item, J, oversample_factor)
            lhs = sobolev_norm_spectral(apply_nonlinear_term(spec, item, oversample_factor), J)
            A = B = 0.0
            for a, g in series.terms:
                f, comp = _gamma1_parts(g, eta, nu, J, N, c1, c_beta_policy)
                A += abs(a) * f
                B += abs(a) * comp
            if A > 0:
                best = max(best, (lhs - B) / A)
        elif mode == "gamma2":
            u, v = item
            eu, nu = _sample_stats(u, J, oversample_factor)
            ev, nv = _sample_stats(v, J, oversample_factor)
            eta = max(eu, ev)
            diff = sobolev_norm_spectral(u - v, J)
            lhs = sobolev_norm_spectral(
                apply_nonlinear_term(spec, u, oversample_factor) - apply_nonlinear_term(spec, v, oversample_factor), J
            ) / diff
            A = B = 0.0
            for a, g in series.terms:
                f, comp = _gamma2_parts(g, eta, nu, nv, J, N, c1, c_beta_policy)
                A += abs(a) * f
                B += abs(a) * comp
            if A > 0:
                best = max(best, (lhs - B) / A)
        else:
            raise ValueError(f"unknown fitting mode {mode!r}")
    # a nonpositive requirement means any positive constant works
    return max(best, np.finfo(float).tiny)


def estimate_report(spec: NonlinearitySpec, eta: float, norm_u: float, J: int, N: int, c: float, c1: float, norm_v: float | None = None, c0: float = 1.0, c1_lemma: float = 1.0, c_fit: float | None = None) -> EstimateReport:
    inputs = {"eta": eta, "norm_u": norm_u, "norm_v": norm_v, "J": J, "N": N}
    if isinstance(spec, CJNonlinearity):
        inputs["gamma"] = spec.gamma
        rep = EstimateReport(
            sn=sup_n(spec, eta, c1 * norm_u),
            k_constant=k_constant(J, spec.gamma),
            g1=g1(spec, eta, norm_u, J, N, c, c1),
            g2=None if norm_v is None else g2(spec, eta, norm_u, norm_v, J, N, c, c1),
            c_fit=c_fit,
            inputs=inputs,
        )
        series = as_power_series(spec)
    else:
        inputs["series"] = spec.label
        series = spec
        rep = EstimateReport(sn=sup_n(spec, eta, c1 * norm_u), k_constant=math.nan, g1=math.nan, c_fit=c_fit, inputs=inputs)
    if series is not None:
        nv = norm_u if norm_v is None else norm_v
        rep.gamma1 = sum(abs(a) * gamma1(g, eta, norm_u, J, N, c0, c1_lemma) for a, g in series.terms)
        rep.gamma2 = sum(abs(a) * gamma2(g, eta, norm_u, nv, J, N, c0, c1_lemma) for a, g in series.terms)
    return rep
