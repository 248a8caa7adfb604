"""Command-line interface: run, sweep, acoustic-bench, validate.

Every subcommand takes ``--config <json>`` plus flag overrides; any config
key can be overridden with ``--set dotted.key=value`` where the value is
parsed as JSON (falling back to a bare string).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import compressible, figures
from .harness import (
    DEFAULT_CONFIG,
    ConfigError,
    RunConfig,
    acoustic_bench,
    run_single,
    sweep,
    validate,
    write_rows_csv,
)
from .initialdata import build_initial_3d
from .snapshots import write_fluid_snapshot

__all__ = ["main"]


def _apply_override(cfg: dict, key: str, value: str):
    try:
        parsed = json.loads(value)
    except json.JSONDecodeError:
        parsed = value
    parts = key.split(".")
    node = cfg
    for p in parts[:-1]:
        node = node.setdefault(p, {})
        if not isinstance(node, dict):
            raise ConfigError(f"cannot descend into config key {key!r}")
    node[parts[-1]] = parsed


def _load_config(args) -> RunConfig:
    raw = dict(DEFAULT_CONFIG) if args.config is None else json.loads(
        Path(args.config).read_text()
    )
    for item in args.set or []:
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        key, value = item.split("=", 1)
        _apply_override(raw, key, value)
    if args.out is not None:
        raw["output_dir"] = args.out
    if args.seed is not None:
        raw["seed"] = args.seed
    if args.threads is not None:
        raw["threads"] = args.threads
    return RunConfig.from_dict(raw)


def _add_common(sub):
    sub.add_argument("--config", help="JSON configuration file")
    sub.add_argument("--out", help="output directory (overrides config)")
    sub.add_argument("--seed", type=int, help="RNG seed (overrides config)")
    sub.add_argument("--threads", type=int, help="concurrent sweep workers")
    sub.add_argument("--set", action="append", metavar="KEY=VALUE",
                     help="override any config key (JSON value)")


def _cmd_run(args):
    config = _load_config(args)
    config.check()
    epsilon = config.epsilon_list[0]
    eta = config.eta_list[0]
    rows = run_single(config, epsilon, eta)
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_rows_csv(rows, out / "rows.csv")

    law = config.law()
    state0 = build_initial_3d(config.recipe(epsilon, eta), config.grid3(epsilon), law)
    params = compressible.SolverParams(
        epsilon=epsilon, law=law, cfl=config.cfl,
        end_time=config.end_time, snapshot_interval=config.snapshot_interval,
    )
    if args.snapshots:
        result = compressible.run(state0, params)
        for i, st in enumerate(result.series.entries):
            write_fluid_snapshot(out / f"snapshot_{i:04d}", st, epsilon,
                                 epsilon**config.delta_beta, config.law_params)
        if config.figures:
            figures.conservation_figure(result.log, out / "conservation.png")
    if config.figures:
        figures.history_figure(rows, out / "history.png")
    print(f"run: eps = {epsilon:g}, eta = {eta:g}, {len(rows)} rows -> {out/'rows.csv'}")
    return 0


def _cmd_sweep(args):
    config = _load_config(args)
    result = sweep(config)
    n_gaps = len(result.summary["gaps"])
    print(f"sweep: {len(result.rows)} rows -> {result.csv_path}")
    if n_gaps:
        print(f"sweep: {n_gaps} member(s) failed; see summary.json gaps")
    print(f"summary -> {result.summary_path}")
    return 0 if n_gaps == 0 else 1


def _cmd_bench(args):
    config = _load_config(args)
    report = acoustic_bench(config)
    print(f"acoustic bench: q = {report['q']:g}, p = {report['p']:g}, "
          f"k = {report['k']}, horizon = {report['horizon']:g}")
    print("epsilon      value          normalized     envelope monotone")
    for row in report["rows"]:
        print(f"{row['epsilon']:<12g} {row['value']:<14.6g} {row['normalized']:<14.6g} "
              f"{'ok' if row['envelope_ok'] else 'FAIL':<8} "
              f"{'ok' if row['monotone_ok'] else 'FAIL'}")
    print(f"bench: {'PASS' if report['passed'] else 'FAIL'}")
    return 0 if report["passed"] else 1


def _cmd_validate(args):
    config = _load_config(args)
    report = validate(config)
    print(report)
    return 0 if report.passed else 1


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="thinmach",
        description="Low-Mach / thin-layer limit verification for the "
                    "compressible Euler system",
    )
    subs = parser.add_subparsers(dest="command", required=True)

    p_run = subs.add_parser("run", help="single (epsilon, eta) run")
    _add_common(p_run)
    p_run.add_argument("--snapshots", action="store_true",
                       help="persist fluid snapshots (binary + JSON sidecar)")
    p_run.set_defaults(func=_cmd_run)

    p_sweep = subs.add_parser("sweep", help="epsilon x eta convergence sweep")
    _add_common(p_sweep)
    p_sweep.set_defaults(func=_cmd_sweep)

    p_bench = subs.add_parser("acoustic-bench", help="dispersive scaling study")
    _add_common(p_bench)
    p_bench.set_defaults(func=_cmd_bench)

    p_val = subs.add_parser("validate", help="invariant suite on small grids")
    _add_common(p_val)
    p_val.set_defaults(func=_cmd_validate)

    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
