"""Picard iteration on the Duhamel formulation, window by window.

The integral is taken in the interaction picture: with w(sigma) = e^{i sigma L} u(t0 + sigma),
w' = i e^{i sigma L} N(|u|)u, so the stiff multiplier L = (-Delta)^{s/2} never enters the
quadrature error. Node values of the integrand are combined with a fixed integration
matrix (Gauss-Lobatto collocation or composite trapezoid).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Sequence

import numpy as np
from numpy.polynomial import legendre as L

from .estimates import (
    EstimateError,
    WellPosednessWindow,
    existence_window_cj,
    existence_window_series,
)
from .nonlinearity import (
    CJNonlinearity,
    NonlinearitySpec,
    NonVanishingError,
    nonlinear_term_coeffs,
)
from .norms import (
    NormReport,
    certified_infimum,
    embedding_constant_c1,
    lemma_c1,
    norm_report,
    sobolev_norm_spectral,
    sobolev_norms_spectral,
)
from .spectral import SpectralField, TorusGrid


class SolverError(RuntimeError):
    pass


class PicardConvergenceError(SolverError):
    def __init__(self, message, report=None, trajectory=None):
        super().__init__(message)
        self.report = report
        self.trajectory = trajectory


class MembershipError(SolverError):
    def __init__(self, message, failed: str, report=None):
        super().__init__(message)
        self.failed = failed
        self.report = report


class StepSizeError(ValueError):
    pass


QUADRATURE_RULES = ("lobatto", "trapezoid")


@dataclass(frozen=True)
class SolverConfig:
    s: float
    J: int
    M: int = 32
    use_certified_T: bool = True
    max_window: float = 0.1
    quad_nodes: int = 8
    quadrature: str = "lobatto"
    picard_tol: float = 1e-12
    picard_max_iters: int = 200
    oversample_factor: int = 2
    max_windows: int = 100_000
    eta: float | None = None  # first-window eta; None means 1/certified inf
    c: float = 1.0
    c0: float = 1.0
    c1: float | None = None  # None: computed embedding constant
    c_beta_policy: object = None
    store_nodes: bool = False

    def __post_init__(self):
        problems = self.violations()
        if problems:
            raise ValueError("; ".join(problems))

    def violations(self, N: int | None = None) -> list[str]:
        out = []
        if not self.s > 0:
            out.append("s must be positive")
        if int(self.J) != self.J or self.J < 1:
            out.append("J must be a positive integer")
        if not self.picard_tol > 0:
            out.append("picard_tol must be positive")
        if self.quad_nodes < 2:
            out.append("quad_nodes must be >= 2")
        if self.quadrature not in QUADRATURE_RULES:
            out.append(f"quadrature must be one of {QUADRATURE_RULES}")
        if not self.max_window > 0:
            out.append("max_window must be positive")
        if self.picard_max_iters < 1:
            out.append("picard_max_iters must be >= 1")
        if self.oversample_factor < 2:
            out.append("oversample_factor must be >= 2")
        if self.M < 4 or self.M % 2:
            out.append("M must be even and >= 4")
        if N is not None and self.use_certified_T and not self.J > N / 2 + self.s:
            out.append(f"certified windows need J > N/2 + s (J={self.J}, N={N}, s={self.s})")
        return out

    def check_dimension(self, N: int) -> None:
        problems = self.violations(N)
        if problems:
            raise ValueError("; ".join(problems))


@dataclass
class PicardReport:
    t0: float
    T: float
    iterations: int = 0
    differences: list[float] = field(default_factory=list)
    ratios: list[float] = field(default_factory=list)  # rho_m for m >= 2
    converged: bool = False
    noise_floor: float = 0.0
    membership: dict = field(default_factory=dict)

    @property
    def max_ratio(self) -> float:
        return max(self.ratios, default=0.0)

    def as_dict(self) -> dict:
        return {
            "t0": self.t0,
            "T": self.T,
            "iterations": self.iterations,
            "differences": self.differences,
            "ratios": self.ratios,
            "converged": self.converged,
            "membership": self.membership,
        }


@dataclass
class Trajectory:
    times: list[float] = field(default_factory=list)
    fields: list[SpectralField] = field(default_factory=list)
    diagnostics: list[NormReport] = field(default_factory=list)
    windows: list[WellPosednessWindow | None] = field(default_factory=list)
    etas: list[float | None] = field(default_factory=list)
    stop_reason: str | None = None
    direction: int = 1

    @property
    def final(self) -> SpectralField:
        return self.fields[-1] if self.direction > 0 else self.fields[0]

    @property
    def final_time(self) -> float:
        return self.times[-1] if self.direction > 0 else self.times[0]

    @property
    def completed(self) -> bool:
        return self.stop_reason is None


# -- quadrature -------------------------------------------------------------------

@lru_cache(maxsize=None)
def lobatto_rule(q: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Lobatto nodes on [0, 1] and the matrix S with int_0^{x_j} f ~ sum_l S_jl f(x_l)."""
    interior = L.legroots(L.legder([0] * (q - 1) + [1])) if q > 2 else np.array([])
    x = np.concatenate([[-1.0], np.sort(np.real(interior)), [1.0]])
    V = L.legvander(x, q - 1)
    W = np.empty((q, q))
    for n in range(q):
        e = np.zeros(q)
        e[n] = 1
        W[:, n] = L.legval(x, L.legint(e, lbnd=-1))
    S = W @ np.linalg.inv(V) / 2  # dx = 2 d(sigma)
    return (x + 1) / 2, S


@lru_cache(maxsize=None)
def trapezoid_rule(q: int) -> tuple[np.ndarray, np.ndarray]:
    x = np.linspace(0.0, 1.0, q)
    h = 1.0 / (q - 1)
    S = np.zeros((q, q))
    for j in range(1, q):
        S[j, :j + 1] = h
        S[j, 0] = S[j, j] = h / 2
    return x, S


def quadrature_rule(config: SolverConfig) -> tuple[np.ndarray, np.ndarray]:
    rule = lobatto_rule if config.quadrature == "lobatto" else trapezoid_rule
    return rule(config.quad_nodes)


# -- one window ---------------------------------------------------------------------

def _phases(grid: TorusGrid, s: float, sigmas: np.ndarray) -> np.ndarray:
    symbol = grid.symbol(s)
    shape = (len(sigmas),) + (1,) * grid.dim
    return np.exp(-1j * sigmas.reshape(shape) * symbol)


def _sweep_coeffs(path: np.ndarray, start: np.ndarray, spec, grid, config, sigmas, S, T):
    back = _phases(grid, config.s, sigmas)  # e^{-i sigma L}
    twisted = np.conj(back) * nonlinear_term_coeffs(spec, path, grid, config.oversample_factor)
    integral = np.tensordot(S, twisted, axes=(1, 0)) * T
    return back * (start[None] + 1j * integral)


def picard_sweep(u_path: Sequence[SpectralField], u_start: SpectralField, spec: NonlinearitySpec, config: SolverConfig, window: tuple[float, float]) -> list[SpectralField]:
    """One application of the Duhamel map at the window's quadrature nodes."""
    t0, t1 = window
    T = t1 - t0
    x, S = quadrature_rule(config)
    if len(u_path) != len(x):
        raise ValueError(f"u_path needs {len(x)} node values, got {len(u_path)}")
    grid = u_start.grid
    path = np.stack([F.coeffs for F in u_path])
    out = _sweep_coeffs(path, u_start.coeffs, spec, grid, config, x * T, S, T)
    return [SpectralField(grid, c) for c in out]


def _noise_floor(path: np.ndarray, grid, J) -> float:
    return 64 * np.finfo(float).eps * float(np.max(sobolev_norms_spectral(path, grid, J)))


def solve_window(u_start: SpectralField, spec: NonlinearitySpec, config: SolverConfig, window: tuple[float, float], R: float | None = None, eta: float | None = None, check_infimum: bool | None = None) -> tuple[list[SpectralField], PicardReport]:
    """Picard iteration from the free flow until the sup-node H^J update falls below picard_tol.

    Membership of the converged path is checked against R (default 2||u_start||_{H^J}) and,
    for singular specs, the infimum floor eta * inf|u| >= 1/2.
    """
    t0, t1 = window
    T = t1 - t0
    grid = u_start.grid
    x, S = quadrature_rule(config)
    sigmas = x * T
    start = u_start.coeffs
    path = _phases(grid, config.s, sigmas) * start[None]
    report = PicardReport(t0=t0, T=T)
    floor = _noise_floor(path, grid, config.J)
    report.noise_floor = floor
    tol = max(config.picard_tol, floor)
    prev = None
    for m in range(1, config.picard_max_iters + 1):
        new = _sweep_coeffs(path, start, spec, grid, config, sigmas, S, T)
        d = float(np.max(sobolev_norms_spectral(new - path, grid, config.J)))
        path = new
        report.iterations = m
        report.differences.append(d)
        # ratios of differences already at rounding level carry no information
        if prev is not None and prev > 1e3 * floor:
            report.ratios.append(d / prev)
        prev = d
        if d <= tol:
            report.converged = True
            break
    fields = [SpectralField(grid, c) for c in path]
    if not report.converged:
        raise PicardConvergenceError(
            f"Picard iteration did not converge in {config.picard_max_iters} sweeps on [{t0:g}, {t1:g}]", report
        )
    R = 2 * sobolev_norm_spectral(u_start, config.J) if R is None else R
    sup_norm = float(np.max(sobolev_norms_spectral(path, grid, config.J)))
    report.membership = {"R": R, "sup_norm": sup_norm, "ball": sup_norm <= R}
    if check_infimum is None:
        check_infimum = spec.singular
    if check_infimum and eta is not None:
        infs = [certified_infimum(F, config.oversample_factor) for F in fields]
        report.membership["eta"] = eta
        report.membership["min_eta_inf"] = eta * min(infs)
        report.membership["floor"] = eta * min(infs) >= 0.5
    if not report.membership["ball"]:
        raise MembershipError(f"sup ||u||_H^J = {sup_norm:.6g} exceeds R = {R:.6g}", "ball", report)
    if not report.membership.get("floor", True):
        raise MembershipError(
            f"eta * inf|u| fell to {report.membership['min_eta_inf']:.6g} < 1/2", "infimum", report
        )
    return fields, report


# -- certified windows ------------------------------------------------------------

def resolve_c1(spec: NonlinearitySpec, config: SolverConfig, grid: TorusGrid) -> float:
    if config.c1 is not None:
        return config.c1
    if isinstance(spec, CJNonlinearity):
        return embedding_constant_c1(config.J, grid.dim, grid)
    return lemma_c1(grid.dim, grid)


def certified_window(u: SpectralField, spec: NonlinearitySpec, config: SolverConfig, eta: float) -> WellPosednessWindow:
    N = u.grid.dim
    norm = sobolev_norm_spectral(u, config.J)
    c1 = resolve_c1(spec, config, u.grid)
    if isinstance(spec, CJNonlinearity):
        return existence_window_cj(spec, norm, eta, config.J, N, config.c, c1)
    return existence_window_series(spec, norm, eta, config.J, N, config.c, config.c0, c1, config.c_beta_policy)


def _initial_eta(u0: SpectralField, spec, config) -> float | None:
    inf = certified_infimum(u0, config.oversample_factor)
    if spec.singular:
        if inf <= 0:
            raise NonVanishingError(f"{spec.label} needs initial data with a certified positive infimum")
        if config.eta is not None and config.eta * inf < 1:
            raise NonVanishingError(f"eta * inf|u0| = {config.eta * inf:.6g} < 1")
    if config.eta is not None:
        return config.eta
    return 1.0 / inf if inf > 0 else None


# -- continuation -----------------------------------------------------------------

def _record(traj: Trajectory, t, F, config, eta, window):
    traj.times.append(t)
    traj.fields.append(F)
    traj.diagnostics.append(norm_report(F, config.J, config.oversample_factor))
    traj.etas.append(eta)
    traj.windows.append(window)


def integrate(u0: SpectralField, spec: NonlinearitySpec, config: SolverConfig, total_T: float, schedule: Sequence[float] | None = None, t_start: float = 0.0) -> tuple[Trajectory, list[PicardReport]]:
    """Chain windows from t_start to t_start + total_T (either sign).

    Each window is min(certified T at its start, max_window, remaining); eta is
    re-certified at every window start. ``schedule`` fixes the window lengths instead.
    A membership failure ends continuation and is recorded as the stop reason.
    """
    if config.use_certified_T:
        config.check_dimension(u0.grid.dim)
    direction = -1 if total_T < 0 else 1
    traj = Trajectory(direction=direction)
    reports: list[PicardReport] = []
    eta = _initial_eta(u0, spec, config)
    _record(traj, t_start, u0, config, eta, None)
    t, u = t_start, u0
    remaining = abs(total_T)
    x, _ = quadrature_rule(config)
    schedule = list(schedule) if schedule is not None else None
    n_windows = 0
    while remaining > 1e-14 * max(1.0, abs(total_T)):
        if n_windows >= config.max_windows:
            traj.stop_reason = "window budget exhausted"
            break
        if n_windows > 0:
            inf = certified_infimum(u, config.oversample_factor)
            if inf > 0:
                eta = 1.0 / inf
            elif spec.singular:
                traj.stop_reason = "certified infimum vanished"
                break
            else:
                eta = None
        window = None
        if schedule is not None:
            if n_windows >= len(schedule):
                break
            length = min(abs(schedule[n_windows]), remaining)
        else:
            length = min(config.max_window, remaining)
            if config.use_certified_T:
                if eta is None:
                    traj.stop_reason = "window not certifiable: data touches zero"
                    break
                try:
                    window = certified_window(u, spec, config, eta)
                except EstimateError as exc:
                    traj.stop_reason = f"window not certifiable: {exc}"
                    break
                length = min(length, window.T)
        if remaining - length < 1e-12 * length:
            length = remaining
        t_end = t + direction * length
        try:
            fields, report = solve_window(u, spec, config, (t, t_end), eta=eta)
        except MembershipError as exc:
            reports.append(exc.report)
            traj.stop_reason = f"membership failure ({exc.failed}): {exc}"
            break
        except NonVanishingError as exc:
            traj.stop_reason = f"non-vanishing failure: {exc}"
            break
        except PicardConvergenceError as exc:
            exc.trajectory = traj
            raise
        reports.append(report)
        if config.store_nodes:
            for sig, F in zip(x[1:], fields[1:]):
                _record(traj, t + direction * length * sig, F, config, eta, window)
        else:
            _record(traj, t_end, fields[-1], config, eta, window)
        t, u = t_end, fields[-1]
        remaining -= length
        n_windows += 1
    if direction < 0:
        for name in ("times", "fields", "diagnostics", "windows", "etas"):
            getattr(traj, name).reverse()
    return traj, reports


# -- method-of-lines oracle -------------------------------------------------------

def _rhs(coeffs, spec, grid, s, factor):
    return -1j * grid.symbol(s) * coeffs + 1j * nonlinear_term_coeffs(spec, coeffs[None], grid, factor)[0]


def rk4_oracle(u0: SpectralField, spec: NonlinearitySpec, config: SolverConfig, T: float, dt: float) -> SpectralField:
    """Classical RK4 on the truncated Fourier system (independent cross-check)."""
    if not dt > 0:
        raise StepSizeError("dt must be positive")
    grid = u0.grid
    stiff = float(np.max(grid.symbol(config.s)))
    if dt * stiff > 0.5:
        raise StepSizeError(f"dt * max|k|^s = {dt * stiff:.4g} > 0.5")
    n = max(1, math.ceil(abs(T) / dt - 1e-9))
    h = T / n
    u = np.array(u0.coeffs)
    f = config.oversample_factor
    for _ in range(n):
        k1 = _rhs(u, spec, grid, config.s, f)
        k2 = _rhs(u + h / 2 * k1, spec, grid, config.s, f)
        k3 = _rhs(u + h / 2 * k2, spec, grid, config.s, f)
        k4 = _rhs(u + h * k3, spec, grid, config.s, f)
        u = u + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
    return SpectralField(grid, u)


# -- Lipschitz probe --------------------------------------------------------------

def lipschitz_probe(u0: SpectralField, v0: SpectralField, spec: NonlinearitySpec, config: SolverConfig, T: float) -> float:
    """sup_{t<=T} ||u(t)-v(t)||_{H^J} / ||u0-v0||_{H^J}, both runs on the same windows."""
    denom = sobolev_norm_spectral(u0 - v0, config.J)
    if denom == 0:
        raise ValueError("Lipschitz probe needs distinct initial data")
    cfg = replace(config, store_nodes=True)
    tu, reports = integrate(u0, spec, cfg, T)
    if not tu.completed:
        raise SolverError(f"reference run stopped early: {tu.stop_reason}")
    tv, _ = integrate(v0, spec, cfg, T, schedule=[r.T for r in reports])
    if not tv.completed or len(tv.fields) != len(tu.fields):
        raise SolverError(f"perturbed run stopped early: {tv.stop_reason}")
    return max(sobolev_norm_spectral(a - b, config.J) for a, b in zip(tu.fields, tv.fields)) / denom
