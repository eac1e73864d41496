"""Run configuration: TOML text in, validated RunConfig out (and back).

Every constraint is checked and all violations are reported together.
"""
from __future__ import annotations

import math
import re
from dataclasses import asdict, dataclass, field, fields, replace
from typing import Any

import tomli
import tomli_w

from .nonlinearity import builtin
from .solver import QUADRATURE_RULES, SolverConfig

INITIAL_KINDS = ("constant", "plane_wave", "perturbed_constant", "from_snapshot")
DIAGNOSTIC_FORMATS = ("csv", "jsonl")
C1_MODES = ("computed", "user")
DEFAULT_SWEEP_CAP = 256


class ConfigError(ValueError):
    def __init__(self, violations: list[str], line: int | None = None):
        self.violations = list(violations)
        self.line = line
        super().__init__("; ".join(self.violations))


@dataclass(frozen=True)
class Equation:
    s: float
    N: int
    M: int


@dataclass(frozen=True)
class SolverSection:
    J: int | None = None  # None: floor(N/2 + s) + 1
    total_T: float = 0.1
    use_certified_T: bool = False
    max_window: float = 0.05
    quad_nodes: int = 8
    quadrature: str = "lobatto"
    picard_tol: float = 1e-12
    picard_max_iters: int = 200
    oversample_factor: int = 2
    max_windows: int = 100_000
    eta: float | None = None


@dataclass(frozen=True)
class Outputs:
    snapshot_every: int = 0
    diagnostics: str = "csv"


@dataclass(frozen=True)
class Constants:
    c: float = 1.0
    c0: float = 1.0
    c1_mode: str = "computed"
    c1: float | None = None
    c_beta_policy: Any = "binomial"
    fit: bool = False
    fit_samples: int = 20


@dataclass(frozen=True)
class SweepSpec:
    axes: dict = field(default_factory=dict)
    max_parallel: int = 1
    cap: int = DEFAULT_SWEEP_CAP

    def size(self) -> int:
        return math.prod(len(v) for v in self.axes.values()) if self.axes else 1


@dataclass(frozen=True)
class RunConfig:
    equation: Equation
    nonlinearity: dict
    initial_data: dict
    solver: SolverSection = SolverSection()
    outputs: Outputs = Outputs()
    constants: Constants = Constants()
    seed: int = 0
    sweep: SweepSpec | None = None

    @property
    def J(self) -> int:
        if self.solver.J is not None:
            return self.solver.J
        return int(math.floor(self.equation.N / 2 + self.equation.s)) + 1

    def spec(self):
        params = {k: v for k, v in self.nonlinearity.items() if k != "kind"}
        return builtin(self.nonlinearity["kind"], **params)

    def solver_config(self) -> SolverConfig:
        s = self.solver
        policy = self.constants.c_beta_policy
        return SolverConfig(
            s=self.equation.s,
            J=self.J,
            M=self.equation.M,
            use_certified_T=s.use_certified_T,
            max_window=s.max_window,
            quad_nodes=s.quad_nodes,
            quadrature=s.quadrature,
            picard_tol=s.picard_tol,
            picard_max_iters=s.picard_max_iters,
            oversample_factor=s.oversample_factor,
            max_windows=s.max_windows,
            eta=s.eta,
            c=self.constants.c,
            c0=self.constants.c0,
            c1=self.constants.c1 if self.constants.c1_mode == "user" else None,
            c_beta_policy=None if policy == "binomial" else policy,
        )


# -- parsing ----------------------------------------------------------------------

_LINE_RE = re.compile(r"line (\d+)")


def _section(data: dict, name: str, cls, problems: list[str]):
    raw = data.get(name, {})
    if not isinstance(raw, dict):
        problems.append(f"[{name}] must be a table")
        return None
    known = {f.name for f in fields(cls)}
    for key in raw:
        if key not in known:
            problems.append(f"unknown key {name}.{key}")
    kwargs = {k: v for k, v in raw.items() if k in known}
    try:
        return cls(**kwargs)
    except TypeError as exc:
        problems.append(f"[{name}]: {exc}")
        return None


def _is_int(v) -> bool:
    return isinstance(v, int) and not isinstance(v, bool)


def _is_num(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def parse_config(text: str) -> RunConfig:
    try:
        data = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        m = _LINE_RE.search(str(exc))
        line = int(m.group(1)) if m else None
        raise ConfigError([f"syntax error at line {line}: {exc}"], line=line) from None
    return config_from_dict(data)


def config_from_dict(data: dict) -> RunConfig:
    problems: list[str] = []
    allowed = {"equation", "nonlinearity", "initial_data", "solver", "outputs", "constants", "seed", "sweep"}
    for key in data:
        if key not in allowed:
            problems.append(f"unknown top-level key {key}")
    for required in ("equation", "nonlinearity", "initial_data"):
        if required not in data:
            problems.append(f"missing [{required}] section")
    if problems and any(p.startswith("missing") for p in problems):
        raise ConfigError(problems)

    eq = _section(data, "equation", Equation, problems)
    solver = _section(data, "solver", SolverSection, problems)
    outputs = _section(data, "outputs", Outputs, problems)
    constants = _section(data, "constants", Constants, problems)
    nonlin = dict(data["nonlinearity"])
    init = dict(data["initial_data"])
    seed = data.get("seed", 0)
    if not _is_int(seed):
        problems.append("seed must be an integer")
    sweep = None
    if "sweep" in data:
        sweep = _section(data, "sweep", SweepSpec, problems)

    spec = None
    if eq is not None:
        _check_equation(eq, problems)
    try:
        params = {k: v for k, v in nonlin.items() if k != "kind"}
        if "kind" not in nonlin:
            problems.append("nonlinearity.kind is required")
        else:
            spec = builtin(nonlin["kind"], **params)
    except (KeyError, ValueError, TypeError) as exc:
        problems.append(f"nonlinearity: {exc}")
    if solver is not None:
        _check_solver(solver, eq, problems)
    if outputs is not None:
        if outputs.diagnostics not in DIAGNOSTIC_FORMATS:
            problems.append(f"outputs.diagnostics must be one of {DIAGNOSTIC_FORMATS}")
        if not _is_int(outputs.snapshot_every) or outputs.snapshot_every < 0:
            problems.append("outputs.snapshot_every must be a nonnegative integer")
    if constants is not None:
        _check_constants(constants, problems)
    _check_initial(init, spec, eq, problems)
    if sweep is not None:
        _check_sweep(sweep, problems)
    if problems:
        raise ConfigError(problems)
    return RunConfig(eq, nonlin, init, solver, outputs, constants, seed, sweep)


def _check_equation(eq: Equation, problems):
    if not _is_num(eq.s) or eq.s <= 0:
        problems.append("equation.s must be positive")
    if not _is_int(eq.N) or eq.N < 1:
        problems.append("equation.N must be a positive integer")
    if not _is_int(eq.M) or eq.M < 4 or eq.M % 2:
        problems.append("equation.M must be an even integer >= 4")


def _check_solver(s: SolverSection, eq: Equation | None, problems):
    if s.J is not None and (not _is_int(s.J) or s.J < 1):
        problems.append("solver.J must be a positive integer")
    if not _is_num(s.total_T) or not math.isfinite(s.total_T):
        problems.append("solver.total_T must be a finite number")
    if not _is_num(s.max_window) or s.max_window <= 0:
        problems.append("solver.max_window must be positive")
    if not _is_int(s.quad_nodes) or s.quad_nodes < 2:
        problems.append("solver.quad_nodes must be an integer >= 2")
    if s.quadrature not in QUADRATURE_RULES:
        problems.append(f"solver.quadrature must be one of {QUADRATURE_RULES}")
    if not _is_num(s.picard_tol) or s.picard_tol <= 0:
        problems.append("solver.picard_tol must be positive")
    if not _is_int(s.picard_max_iters) or s.picard_max_iters < 1:
        problems.append("solver.picard_max_iters must be a positive integer")
    if not _is_int(s.oversample_factor) or s.oversample_factor < 2:
        problems.append("solver.oversample_factor must be an integer >= 2")
    if s.eta is not None and (not _is_num(s.eta) or s.eta <= 0):
        problems.append("solver.eta must be positive")
    if eq is not None and _is_num(eq.s) and _is_int(eq.N) and s.use_certified_T:
        J = s.J if s.J is not None else int(math.floor(eq.N / 2 + eq.s)) + 1
        if _is_int(J) and not J > eq.N / 2 + eq.s:
            problems.append(
                f"certified windows require the well-posedness hypothesis J > N/2 + s (J={J}, N={eq.N}, s={eq.s})"
            )


def _check_constants(c: Constants, problems):
    for name in ("c", "c0"):
        v = getattr(c, name)
        if not _is_num(v) or v <= 0:
            problems.append(f"constants.{name} must be positive")
    if c.c1_mode not in C1_MODES:
        problems.append(f"constants.c1_mode must be one of {C1_MODES}")
    elif c.c1_mode == "user" and (c.c1 is None or not _is_num(c.c1) or c.c1 <= 0):
        problems.append("constants.c1 must be a positive number when c1_mode = 'user'")
    p = c.c_beta_policy
    if not (p == "binomial" or (_is_num(p) and p > 0)):
        problems.append("constants.c_beta_policy must be 'binomial' or a positive number")
    if not _is_int(c.fit_samples) or c.fit_samples < 2:
        problems.append("constants.fit_samples must be an integer >= 2")


def _check_initial(init: dict, spec, eq, problems):
    kind = init.get("kind")
    if kind not in INITIAL_KINDS:
        problems.append(f"initial_data.kind must be one of {INITIAL_KINDS}")
        return
    expected = {
        "constant": {"c"},
        "plane_wave": {"amplitude", "k"},
        "perturbed_constant": {"c0", "epsilon", "rho", "max_mode", "seed"},
        "from_snapshot": {"path"},
    }[kind] | {"kind", "allow_vanishing"}
    for key in init:
        if key not in expected:
            problems.append(f"unknown key initial_data.{key} for kind {kind}")
    singular = spec is not None and spec.singular and not init.get("allow_vanishing", False)
    if kind == "constant":
        c = init.get("c")
        if not _is_num(c):
            problems.append("initial_data.c must be a number")
        elif singular and c == 0:
            problems.append("non-vanishing required: constant initial data is zero for a singular nonlinearity")
    elif kind == "plane_wave":
        a, k = init.get("amplitude"), init.get("k")
        if not _is_num(a):
            problems.append("initial_data.amplitude must be a number")
        elif singular and a == 0:
            problems.append("non-vanishing required: plane-wave amplitude is zero for a singular nonlinearity")
        ks = [k] if _is_int(k) else k
        if not isinstance(ks, list) or not all(_is_int(v) for v in ks):
            problems.append("initial_data.k must be an integer or a list of integers")
        elif eq is not None and _is_int(eq.N) and len(ks) != eq.N:
            problems.append("initial_data.k must have N components")
    elif kind == "perturbed_constant":
        c0 = init.get("c0")
        has_eps, has_rho = "epsilon" in init, "rho" in init
        if not _is_num(c0):
            problems.append("initial_data.c0 must be a number")
        if has_eps == has_rho:
            problems.append("initial_data needs exactly one of epsilon and rho")
        elif _is_num(c0):
            if has_rho and not (_is_num(init["rho"]) and 0 <= init["rho"] < 1):
                problems.append("initial_data.rho must lie in [0, 1)")
            if has_eps and not (_is_num(init["epsilon"]) and init["epsilon"] >= 0):
                problems.append("initial_data.epsilon must be nonnegative")
            elif has_eps and singular and init["epsilon"] >= abs(c0):
                problems.append("non-vanishing required: epsilon >= |c0| can reach zero for a singular nonlinearity")
            if singular and c0 == 0:
                problems.append("non-vanishing required: c0 = 0 for a singular nonlinearity")
        mm = init.get("max_mode", 3)
        if not _is_int(mm) or mm < 1 or (eq is not None and _is_int(eq.M) and mm >= eq.M // 2):
            problems.append("initial_data.max_mode must be an integer in [1, M/2)")
    elif kind == "from_snapshot":
        if not isinstance(init.get("path"), str):
            problems.append("initial_data.path must be a string")


def _check_sweep(sweep: SweepSpec, problems):
    if not isinstance(sweep.axes, dict):
        problems.append("sweep.axes must be a table of lists")
        return
    for name, values in sweep.axes.items():
        if name not in SWEEP_ALIASES and "." not in name:
            problems.append(f"sweep axis {name!r} is neither an alias nor a dotted key")
        if not isinstance(values, list) or not values:
            problems.append(f"sweep axis {name!r} must be a nonempty list")
    if not _is_int(sweep.max_parallel) or sweep.max_parallel < 1:
        problems.append("sweep.max_parallel must be a positive integer")
    if sweep.size() > sweep.cap:
        problems.append(f"sweep has {sweep.size()} runs, above the cap {sweep.cap}")


SWEEP_ALIASES = {
    "s": "equation.s",
    "M": "equation.M",
    "gamma": "nonlinearity.gamma",
    "eta": "solver.eta",
}


# -- serialization ----------------------------------------------------------------

def _strip_none(d: dict) -> dict:
    return {k: (_strip_none(v) if isinstance(v, dict) else v) for k, v in d.items() if v is not None}


def config_to_dict(config: RunConfig) -> dict:
    out = {
        "seed": config.seed,
        "equation": asdict(config.equation),
        "nonlinearity": dict(config.nonlinearity),
        "initial_data": dict(config.initial_data),
        "solver": asdict(config.solver),
        "outputs": asdict(config.outputs),
        "constants": asdict(config.constants),
    }
    if config.sweep is not None:
        out["sweep"] = asdict(config.sweep)
    return _strip_none(out)


def serialize_config(config: RunConfig) -> str:
    return tomli_w.dumps(config_to_dict(config))


def with_override(config: RunConfig, dotted: str, value) -> RunConfig:
    """Copy of ``config`` with one dotted key replaced (validated again)."""
    dotted = SWEEP_ALIASES.get(dotted, dotted)
    data = config_to_dict(config)
    data.pop("sweep", None)
    section, key = dotted.split(".", 1)
    data.setdefault(section, {})[key] = value
    return config_from_dict(data)
