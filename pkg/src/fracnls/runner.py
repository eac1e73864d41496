"""Run orchestration: directories, manifests, exit codes and parameter sweeps."""
from __future__ import annotations

import csv
import hashlib
import io
import itertools
import json
import os
import platform
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigError, RunConfig, serialize_config, with_override
from .diagnostics import conservation_expected, drift, timeline, timeline_csv
from .estimates import EstimateError
from .initial_data import constant, from_snapshot, perturbed_constant, plane_wave
from .nonlinearity import NonVanishingError, evaluate_potential
from .norms import NormReport, certified_infimum, sobolev_norm_spectral
from .solver import PicardConvergenceError, SolverConfig, certified_window, integrate
from .spectral import SpectralField, TorusGrid, from_function, write_snapshot

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_NON_VANISHING = 2
EXIT_PICARD = 3
EXIT_IO = 4


@dataclass
class RunResult:
    exit_code: int
    run_dir: Path | None
    summary: dict = field(default_factory=dict)


def config_hash(config: RunConfig) -> str:
    return hashlib.sha256(serialize_config(config).encode()).hexdigest()


def manifest(config: RunConfig) -> dict:
    import scipy

    return {
        "config_hash": config_hash(config),
        "seed": config.seed,
        "versions": {
            "fracnls": __version__,
            "python": platform.python_version(),
            "numpy": np.__version__,
            "scipy": scipy.__version__,
        },
    }


def build_initial_data(config: RunConfig) -> SpectralField:
    grid = TorusGrid(config.equation.N, config.equation.M)
    init = config.initial_data
    kind = init["kind"]
    if kind == "constant":
        return constant(grid, init["c"])
    if kind == "plane_wave":
        return plane_wave(grid, init["amplitude"], init["k"])
    if kind == "perturbed_constant":
        seed = init.get("seed", config.seed)
        return perturbed_constant(
            grid, init["c0"], epsilon=init.get("epsilon"), rho=init.get("rho"), max_mode=init.get("max_mode", 3), seed=seed
        )
    return from_snapshot(init["path"], grid)


def exact_solution(config: RunConfig, spec, t: float) -> SpectralField | None:
    """Closed form for constant and plane-wave data."""
    grid = TorusGrid(config.equation.N, config.equation.M)
    init = config.initial_data
    if init["kind"] == "constant":
        c = init["c"]
        if c == 0:
            return constant(grid, 0.0)
        return constant(grid, c * np.exp(1j * evaluate_potential(spec, abs(c)) * t))
    if init["kind"] == "plane_wave":
        a = init["amplitude"]
        k = np.atleast_1d(init["k"])
        if a == 0:
            return constant(grid, 0.0)
        omega = evaluate_potential(spec, abs(a)) - float(np.linalg.norm(k)) ** config.equation.s
        return plane_wave(grid, a * np.exp(1j * omega * t), k)
    return None


def resolved_solver_config(config: RunConfig, spec, u0: SpectralField) -> SolverConfig:
    cfg = config.solver_config()
    if config.constants.fit:
        from .verification import fitted_config

        rng = np.random.default_rng(config.seed)
        cfg = fitted_config(spec, cfg, u0.grid, rng, n=config.constants.fit_samples)
    return cfg


def _stop_code(reason: str | None) -> int:
    if reason is None:
        return EXIT_OK
    if "infimum" in reason or "non-vanishing" in reason:
        return EXIT_NON_VANISHING
    return EXIT_PICARD


def simulate(config: RunConfig, output_dir, snapshot_every: int | None = None, diagnostics: str | None = None) -> RunResult:
    snapshot_every = config.outputs.snapshot_every if snapshot_every is None else snapshot_every
    diagnostics = config.outputs.diagnostics if diagnostics is None else diagnostics
    try:
        run_dir = Path(output_dir) / f"run-{config_hash(config)[:12]}"
        (run_dir / "snapshots").mkdir(parents=True, exist_ok=True)
        (run_dir / "reports").mkdir(exist_ok=True)
        (run_dir / "config.toml").write_text(serialize_config(config))
        (run_dir / "manifest.json").write_text(json.dumps(manifest(config), indent=2, sort_keys=True) + "\n")
    except OSError as exc:
        return RunResult(EXIT_IO, None, {"error": f"cannot create run directory: {exc}"})
    try:
        u0 = build_initial_data(config)
    except (OSError, ValueError) as exc:
        return RunResult(EXIT_IO, run_dir, {"error": f"initial data: {exc}"})
    spec = config.spec()
    summary: dict = {"spec": spec.label, "conservation_expected": conservation_expected(spec)}
    try:
        cfg = resolved_solver_config(config, spec, u0)
        summary["constants"] = {"c": cfg.c, "c0": cfg.c0}
        traj, reports = integrate(u0, spec, cfg, config.solver.total_T)
    except NonVanishingError as exc:
        summary["error"] = str(exc)
        return _finish(run_dir, RunResult(EXIT_NON_VANISHING, run_dir, summary))
    except PicardConvergenceError as exc:
        summary["error"] = str(exc)
        return _finish(run_dir, RunResult(EXIT_PICARD, run_dir, summary))
    except EstimateError as exc:
        summary["error"] = str(exc)
        return _finish(run_dir, RunResult(EXIT_PICARD, run_dir, summary))

    records = timeline(traj, spec, cfg.s, cfg.J, max(2, cfg.oversample_factor))
    try:
        if diagnostics == "csv":
            (run_dir / "timeline.csv").write_text(timeline_csv(records))
        else:
            (run_dir / "timeline.jsonl").write_text("".join(json.dumps(asdict(r)) + "\n" for r in records))
        norms = io.StringIO()
        norms.write(",".join(NormReport.CSV_HEADER) + "\n")
        for t, rep in zip(traj.times, traj.diagnostics):
            norms.write(rep.csv_row(t) + "\n")
        (run_dir / "reports" / "norms.csv").write_text(norms.getvalue())
        (run_dir / "reports" / "picard.jsonl").write_text("".join(json.dumps(r.as_dict(), default=float) + "\n" for r in reports))
        last = len(traj.fields) - 1
        for i, (t, F) in enumerate(zip(traj.times, traj.fields)):
            if (snapshot_every and i % snapshot_every == 0) or i == last:
                write_snapshot(run_dir / "snapshots" / f"state_{i:06d}.fnls", F, cfg.s, t)
    except OSError as exc:
        summary["error"] = f"writing outputs: {exc}"
        return RunResult(EXIT_IO, run_dir, summary)

    summary.update(
        {
            "final_time": traj.final_time,
            "windows": len(reports),
            "stop_reason": traj.stop_reason,
            "max_picard_ratio": max((r.max_ratio for r in reports), default=0.0),
            "certified_T": next((w.T for w in traj.windows if w is not None), None),
            **{f"drift_{k}": v for k, v in drift(records).items()},
        }
    )
    exact = exact_solution(config, spec, traj.final_time)
    if exact is not None:
        summary["final_error"] = sobolev_norm_spectral(traj.final - exact, cfg.J)
    return _finish(run_dir, RunResult(_stop_code(traj.stop_reason), run_dir, summary))


def _finish(run_dir: Path, result: RunResult) -> RunResult:
    result.summary["exit_code"] = result.exit_code
    try:
        (run_dir / "reports" / "summary.json").write_text(json.dumps(result.summary, indent=2, sort_keys=True, default=str) + "\n")
    except OSError:
        result.exit_code = EXIT_IO
    return result


def estimate_window_report(config: RunConfig) -> tuple[dict, str]:
    spec = config.spec()
    u0 = build_initial_data(config)
    cfg = resolved_solver_config(config, spec, u0)
    inf = certified_infimum(u0, cfg.oversample_factor)
    if inf <= 0:
        raise NonVanishingError("initial data has no certified positive infimum")
    eta = cfg.eta if cfg.eta is not None else 1.0 / inf
    window = certified_window(u0, spec, cfg, eta)
    data = {"spec": spec.label, "J": cfg.J, "norm_u0": sobolev_norm_spectral(u0, cfg.J), "inf_u0": inf,
            "c": cfg.c, "c0": cfg.c0, **window.as_dict()}
    lines = [f"{k:>16}: {v}" for k, v in data.items()]
    return data, "\n".join(lines) + "\n"


# -- sweeps -----------------------------------------------------------------------

def thread_cap() -> int:
    raw = os.environ.get("FNLS_THREADS")
    try:
        cap = int(raw) if raw else os.cpu_count() or 1
    except ValueError:
        cap = 1
    return max(1, cap)


def expand_sweep(config: RunConfig) -> list[tuple[dict, RunConfig]]:
    sweep = config.sweep
    if sweep is None or not sweep.axes:
        return [({}, config)]
    names = list(sweep.axes)
    out = []
    for values in itertools.product(*(sweep.axes[n] for n in names)):
        point = dict(zip(names, values))
        cfg = config
        for n, v in point.items():
            cfg = with_override(cfg, n, v)
        out.append((point, cfg))
    return out


def _sweep_one(args):
    index, point, cfg, root = args
    try:
        res = simulate(cfg, Path(root) / f"{index:04d}")
        s = res.summary
        return {"index": index, **point, "exit_code": res.exit_code, "certified_T": s.get("certified_T"),
                "final_time": s.get("final_time"), "mass_drift": s.get("drift_mass_rel"),
                "energy_drift": s.get("drift_energy_rel"), "final_error": s.get("final_error"),
                "status": "pass" if res.exit_code == 0 else "fail", "error": s.get("error", "")}
    except Exception as exc:  # a failed run must not stop the sweep
        return {"index": index, **point, "exit_code": -1, "status": "fail", "error": repr(exc)}


def sweep(config: RunConfig, output_dir, max_parallel: int | None = None) -> tuple[list[dict], Path]:
    points = expand_sweep(config)
    root = Path(output_dir)
    root.mkdir(parents=True, exist_ok=True)
    limit = max_parallel or (config.sweep.max_parallel if config.sweep else 1)
    workers = max(1, min(limit, thread_cap(), len(points)))
    jobs = [(i, p, c, str(root)) for i, (p, c) in enumerate(points)]
    if workers == 1:
        rows = [_sweep_one(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_sweep_one, jobs))
    rows.sort(key=lambda r: r["index"])
    header = ["index", *(config.sweep.axes if config.sweep else {}), "exit_code", "status", "certified_T",
              "final_time", "mass_drift", "energy_drift", "final_error", "error"]
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=header, extrasaction="ignore", lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    path = root / "summary.csv"
    path.write_text(buf.getvalue())
    return rows, path
