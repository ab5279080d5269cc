"""Command-line entry points: serve, script, replay, validate, check-reqs."""

from __future__ import annotations

import argparse
import os
import sys

from .episodes import RequirementThresholds, check_requirements, replay, validate
from .scripts import OperatorScript, peg_in_hole_script, run_script
from .session import SessionConfig, load_scenario, save_scenario


def _load_cfg(path) -> SessionConfig:
    if path is None:
        return SessionConfig()
    return load_scenario(path)


def _cmd_serve(args) -> int:
    from .gateway import serve

    cfg = _load_cfg(args.scenario)
    serve(
        cfg,
        host=os.environ.get("TELEIMP_BIND", "127.0.0.1"),
        ws_port=args.port,
        tcp_port=args.tcp_port,
        rate=args.rate if args.rate is not None else cfg.telemetry_hz,
        log_dir=args.log_dir,
    )
    return 0


def _cmd_script(args) -> int:
    cfg = _load_cfg(args.scenario)
    if args.script is not None:
        script = OperatorScript.load(args.script)
    else:
        script = peg_in_hole_script(cfg)
    result = run_script(script, cfg, args.out, cap=args.cap)
    print(f"status={result.status} success={result.success} phase={result.final_phase} "
          f"sim_time={result.sim_time:.3f}s episodes={result.episode_paths}")
    return result.exit_code


def _cmd_make_script(args) -> int:
    cfg = _load_cfg(args.scenario)
    peg_in_hole_script(cfg).save(args.out)
    print(f"wrote {args.out}")
    return 0


def _cmd_make_scenario(args) -> int:
    save_scenario(args.out, SessionConfig())
    print(f"wrote {args.out}")
    return 0


def _cmd_replay(args) -> int:
    report = replay(args.file)
    print(f"steps={report.n_steps} max_position_divergence={report.max_position_divergence:.3e} m "
          f"max_orientation_divergence={report.max_orientation_divergence:.3e} rad")
    for w in report.warnings:
        print(f"warning: {w}")
    return 0 if report.max_position_divergence <= args.tolerance else 1


def _cmd_validate(args) -> int:
    report = validate(args.file)
    if report.clean:
        print(f"clean: {report.n_records} records, no violations")
        return 0
    for v in report.violations:
        print(f"line {v.line}: {v.fieldname}: {v.message}")
    print(f"{len(report.violations)} violations in {report.n_records} records")
    return 1


def _cmd_check_reqs(args) -> int:
    thresholds = RequirementThresholds(kt_low=args.kt_low, kt_high=args.kt_high, kr_low=args.kr_low)
    report = check_requirements(args.file, thresholds)
    for c in report.checks:
        state = "satisfied" if c.satisfied else ("incomplete" if not c.complete else "UNSATISFIED")
        stats = c.stats
        mean_kt = f"{stats['mean_kt']:.1f}" if stats["mean_kt"] is not None else "-"
        mean_kr = f"{stats['mean_kr']:.1f}" if stats["mean_kr"] is not None else "-"
        print(f"requirement {c.requirement} [{state}] {c.description}: "
              f"n={stats['n']} mean_kt={mean_kt} mean_kr={mean_kr}")
    return 0 if report.all_satisfied else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="teleimp", description="tele-impedance teleoperation suite")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("serve", help="run the operator gateway")
    p.add_argument("--port", type=int, default=8765)
    p.add_argument("--tcp-port", type=int, default=None)
    p.add_argument("--scenario", default=None)
    p.add_argument("--rate", type=float, default=None, help="telemetry rate, Hz")
    p.add_argument("--log-dir", default="episodes")
    p.set_defaults(func=_cmd_serve)

    p = sub.add_parser("script", help="run a scripted operator headless")
    p.add_argument("--scenario", default=None)
    p.add_argument("--script", default=None, help="script file; bundled peg-in-hole when omitted")
    p.add_argument("--out", required=True)
    p.add_argument("--cap", type=float, default=None, help="episode duration cap, s")
    p.set_defaults(func=_cmd_script)

    p = sub.add_parser("make-script", help="write the bundled peg-in-hole script")
    p.add_argument("--scenario", default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_make_script)

    p = sub.add_parser("make-scenario", help="write the default scenario file")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_make_scenario)

    p = sub.add_parser("replay", help="re-simulate an episode and report divergence")
    p.add_argument("--file", required=True)
    p.add_argument("--tolerance", type=float, default=1e-9)
    p.set_defaults(func=_cmd_replay)

    p = sub.add_parser("validate", help="check an episode file's invariants")
    p.add_argument("--file", required=True)
    p.set_defaults(func=_cmd_validate)

    p = sub.add_parser("check-reqs", help="score the four phase-stiffness requirements")
    p.add_argument("--file", required=True)
    p.add_argument("--kt-low", type=float, default=RequirementThresholds.kt_low)
    p.add_argument("--kt-high", type=float, default=RequirementThresholds.kt_high)
    p.add_argument("--kr-low", type=float, default=RequirementThresholds.kr_low)
    p.set_defaults(func=_cmd_check_reqs)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
