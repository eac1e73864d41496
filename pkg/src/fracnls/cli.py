"""Command-line entry point: ``fnls <subcommand>``."""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .config import ConfigError, parse_config
from .nonlinearity import NonVanishingError
from .estimates import EstimateError
from .runner import EXIT_CONFIG, EXIT_IO, EXIT_NON_VANISHING, EXIT_OK, EXIT_PICARD, estimate_window_report, simulate, sweep
from .spectral import read_snapshot
from .norms import certified_infimum, sobolev_norm_spectral


def _load(path: str):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        print(f"error: cannot read config: {exc}", file=sys.stderr)
        return None, EXIT_IO
    try:
        return parse_config(text), EXIT_OK
    except ConfigError as exc:
        for v in exc.violations:
            print(f"config: {v}", file=sys.stderr)
        return None, EXIT_CONFIG


def cmd_simulate(args) -> int:
    config, code = _load(args.config)
    if config is None:
        return code
    result = simulate(config, args.output_dir, args.snapshot_every, args.diagnostics)
    print(json.dumps({"run_dir": str(result.run_dir), **result.summary}, indent=2, sort_keys=True, default=str))
    return result.exit_code


def cmd_estimate(args) -> int:
    config, code = _load(args.config)
    if config is None:
        return code
    if args.fit:
        from dataclasses import replace

        config = replace(config, constants=replace(config.constants, fit=True))
    try:
        _, text = estimate_window_report(config)
    except NonVanishingError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NON_VANISHING
    except EstimateError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PICARD
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    sys.stdout.write(text)
    return EXIT_OK


def cmd_verify(args) -> int:
    from .verification import CHECKS, run_verification_suite

    checks = [c.strip() for c in args.checks.split(",")] if args.checks else None
    unknown = [c for c in checks or [] if c not in CHECKS]
    if unknown:
        print(f"unknown checks: {', '.join(unknown)}; known: {', '.join(CHECKS)}", file=sys.stderr)
        return EXIT_CONFIG
    result = run_verification_suite(args.seed, checks, args.scale)
    text = result.to_jsonl()
    if args.output:
        try:
            Path(args.output).write_text(text)
        except OSError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_IO
    else:
        sys.stdout.write(text)
    for line in result.summary_lines():
        print(line, file=sys.stderr)
    return EXIT_OK if result.passed else 5


def cmd_sweep(args) -> int:
    config, code = _load(args.config)
    if config is None:
        return code
    try:
        rows, path = sweep(config, args.output_dir, args.max_parallel)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    print(path.read_text(), end="")
    return EXIT_OK


def cmd_inspect(args) -> int:
    try:
        F, s, t = read_snapshot(args.path)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"error: invalid snapshot: {exc}", file=sys.stderr)
        return EXIT_IO
    print(f"N: {F.grid.dim}\nM: {F.grid.points_per_dim}\ns: {s}\nt: {t}")
    print(f"l2: {sobolev_norm_spectral(F, 0)}")
    print(f"inf_lower_bound: {certified_infimum(F, 2)}")
    mags = np.abs(F.coeffs).ravel()
    order = np.argsort(-mags, kind="stable")[: args.top]
    ks = np.stack([k.ravel() for k in F.grid.wavenumbers], axis=1)
    for i in order:
        c = F.coeffs.ravel()[i]
        print(f"k={tuple(int(v) for v in ks[i])} coeff={c.real:.12g}{c.imag:+.12g}j")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fnls", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="integrate one configuration")
    s.add_argument("--config", required=True)
    s.add_argument("--output-dir", required=True)
    s.add_argument("--snapshot-every", type=int, default=None)
    s.add_argument("--diagnostics", choices=("csv", "jsonl"), default=None)
    s.set_defaults(func=cmd_simulate)

    e = sub.add_parser("estimate-window", help="print the certified existence window")
    e.add_argument("--config", required=True)
    e.add_argument("--fit", action="store_true", help="fit the estimate constants empirically first")
    e.set_defaults(func=cmd_estimate)

    v = sub.add_parser("verify", help="run the verification suite")
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--checks", default=None, help="comma-separated check names")
    v.add_argument("--scale", type=float, default=1.0, help="fraction of the default sample counts")
    v.add_argument("--output", default=None, help="JSON-lines output path (default stdout)")
    v.set_defaults(func=cmd_verify)

    w = sub.add_parser("sweep", help="run a parameter sweep")
    w.add_argument("--config", required=True)
    w.add_argument("--output-dir", required=True)
    w.add_argument("--max-parallel", type=int, default=None)
    w.set_defaults(func=cmd_sweep)

    i = sub.add_parser("inspect-snapshot", help="summarize a binary snapshot")
    i.add_argument("path")
    i.add_argument("--top", type=int, default=5, help="number of largest coefficients to list")
    i.set_defaults(func=cmd_inspect)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
