"""Command-line entry point: ``geocbf run|check|sweep``.

Exit codes: 0 success, 1 failed checks, 2 configuration error,
3 divergence, 4 barrier condition violated or state outside the filter
domain at runtime.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .errors import CBFConditionViolated, ConfigError, OutsideDomain

EXIT_OK, EXIT_CHECK_FAILED, EXIT_CONFIG, EXIT_DIVERGED, EXIT_CBF = 0, 1, 2, 3, 4


def _parse_values(text):
    try:
        vals = [float(v) for v in text.replace(" ", "").split(",") if v]
    except ValueError:
        raise ConfigError(f"--values must be a comma-separated list of numbers, got {text!r}") from None
    if not vals:
        raise ConfigError("--values is empty")
    return vals


def cmd_run(args):
    from . import scenario as sc

    cfg = sc.load_config(args.config) if args.config else sc.ScenarioConfig()
    if args.filter:
        cfg = cfg.replace(filter=args.filter)
    out = sc.resolve_output_dir(cfg, args.output_dir)
    traj, report = sc.run_scenario(cfg)
    sc.atomic_write(out / "report.json", report.to_json())
    if args.csv:
        sc.atomic_write(out / "trajectory.csv", sc.trajectory_to_csv(traj))
    if args.svg:
        sc.write_plots(traj, cfg, out)
    print(f"filter={cfg.filter} min_h={report.min_h:.6g} min_h0={report.min_h0:.6g} "
          f"active={report.constraint_active_fraction:.3f} max_torque={report.max_torque_norm:.6g} "
          f"wall={report.wall_time:.2f}s -> {out}")
    if report.divergence_flag:
        print(f"diverged at t={report.divergence_time}", file=sys.stderr)
        return EXIT_DIVERGED
    return EXIT_OK


def cmd_check(args):
    from .checks import CheckContext, format_table, mutated_context, run_checks

    ctx = mutated_context(args.mutate, quick=args.quick) if args.mutate else CheckContext(quick=args.quick)
    try:
        results = run_checks(ctx, args.module)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    print(format_table(results))
    failed = [r for r in results if not r.passed]
    for r in failed:
        print(f"FAILED: {r.module}/{r.name}: {r.detail}", file=sys.stderr)
    return EXIT_CHECK_FAILED if failed else EXIT_OK


def cmd_sweep(args):
    from . import scenario as sc

    if args.param not in sc.SWEEP_PARAMS:
        raise ConfigError(f"unknown sweep parameter {args.param!r}; choose from {', '.join(sc.SWEEP_PARAMS)}")
    cfg = sc.load_config(args.config) if args.config else sc.ScenarioConfig()
    if args.filter:
        cfg = cfg.replace(filter=args.filter)
    values = _parse_values(args.values)
    out = sc.resolve_output_dir(cfg, args.output_dir)
    results = sc.run_sweep(cfg, args.param, values, workers=args.workers)
    for i, (value, report) in enumerate(results):
        sc.atomic_write(out / f"{args.param}_{i}" / "report.json", report.to_json())
        print(f"{args.param}={value:g} min_h={report.min_h:.6g} min_h0={report.min_h0:.6g} "
              f"max_torque={report.max_torque_norm:.6g}")
    sc.atomic_write(out / "sweep_summary.csv", sc.sweep_summary_csv(results))
    if any(r.divergence_flag for _, r in results):
        return EXIT_DIVERGED
    return EXIT_OK


def build_parser():
    p = argparse.ArgumentParser(prog="geocbf", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="simulate one scenario")
    r.add_argument("--config", help="scenario file (defaults: satellite example)")
    r.add_argument("--filter", choices=("qp", "hs", "none"))
    r.add_argument("--csv", action="store_true", help="write trajectory.csv")
    r.add_argument("--svg", action="store_true", help="write SVG plots")
    r.add_argument("--output-dir", help="overrides the config and $GEOCBF_OUTPUT_DIR")
    r.set_defaults(func=cmd_run)

    c = sub.add_parser("check", help="run the invariant suites")
    c.add_argument("--module", help="restrict to one module")
    c.add_argument("--quick", action="store_true", help="fewer samples, shorter runs")
    c.add_argument("--mutate", choices=("connection", "dh0"),
                   help="flip a sign in the geometry under test; the suite should then fail")
    c.set_defaults(func=cmd_check)

    s = sub.add_parser("sweep", help="run one scenario per parameter value")
    s.add_argument("--param", required=True, help="epsilon, delta, alpha-gain or theta-safe")
    s.add_argument("--values", required=True, help="comma-separated values")
    s.add_argument("--config")
    s.add_argument("--filter", choices=("qp", "hs", "none"))
    s.add_argument("--output-dir")
    s.add_argument("--workers", type=int, default=None)
    s.set_defaults(func=cmd_sweep)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (CBFConditionViolated, OutsideDomain) as exc:
        print(f"barrier condition violated: {exc}", file=sys.stderr)
        return EXIT_CBF


if __name__ == "__main__":
    sys.exit(main())
