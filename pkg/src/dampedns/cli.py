"""Command line entry point: ``dampedns run|preset|audit|sweep|algebra``."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from .bounds import BoundReport, algebraic_regime_sweep, audit, calibrate_appendix_c_constant, check_appendix_c
from .config import PRESETS, load_config, preset, to_ini
from .errors import ConfigError
from .runner import EXIT_CONFIG, EXIT_DISK, EXIT_OK, OUTPUT_ROOT_ENV, RunResult, run_experiment

log = logging.getLogger("dampedns")

FIELD_SEP = "\t"
REPORT_BEGIN = "# --- report ---"
REPORT_END = "# --- end report ---"


def format_report(report: BoundReport) -> str:
    """Tab-delimited table of report entries between fixed marker lines."""
    lines = [REPORT_BEGIN, f"# regime: {report.regime}"]
    lines.append(FIELD_SEP.join(("name", "lhs", "rhs", "satisfied", "margin", "note")))
    for e in report.entries:
        lines.append(
            FIELD_SEP.join((e.name, repr(e.lhs), repr(e.rhs), str(e.satisfied).lower(), repr(e.margin), e.note))
        )
    lines.append(REPORT_END)
    return "\n".join(lines)


def _finish(result: RunResult) -> int:
    if result.report is not None:
        print(format_report(result.report))
    for path in result.files:
        print(f"wrote {path}")
    stream = sys.stdout if result.exit_code == EXIT_OK else sys.stderr
    print(result.message, file=stream)
    return result.exit_code


def cmd_run(args) -> int:
    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        print(f"config invalid: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"cannot read config: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return _finish(run_experiment(cfg, args.output, figures=not args.no_figures))


def cmd_preset(args) -> int:
    try:
        cfg = preset(args.name)
    except ConfigError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_CONFIG
    if args.emit_config:
        print(to_ini(cfg), end="")
        return EXIT_OK
    return _finish(run_experiment(cfg, args.output, figures=not args.no_figures))


def cmd_audit(args) -> int:
    try:
        report = BoundReport.from_dict(json.loads(Path(args.report).read_text()))
    except (OSError, ValueError, KeyError) as exc:
        print(f"cannot read report: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    problems = audit(report, rtol=args.rtol)
    print(format_report(report))
    for p in problems:
        print(f"MISMATCH {p}")
    print(f"audit: {len(report.entries)} entries, {len(problems)} discrepancies")
    return 1 if problems else EXIT_OK


def _sweep_one(job: tuple[str, str, bool]) -> dict:
    config_path, out_dir, figures = job
    try:
        cfg = load_config(config_path)
    except (ConfigError, OSError) as exc:
        return {"config": config_path, "exit_code": EXIT_CONFIG, "message": str(exc)}
    result = run_experiment(cfg, out_dir, figures=figures)
    row = {
        "config": config_path,
        "output_dir": str(result.output_dir) if result.output_dir else None,
        "exit_code": result.exit_code,
        "message": result.message,
    }
    if result.report is not None:
        row["inputs"] = {k: result.report.inputs.get(k) for k in ("F", "U", "E", "ell0", "nu", "Gr", "Re", "damping_rule")}
        row["regimes"] = result.report.inputs.get("regimes")
        row["unsatisfied"] = [e.name for e in result.report.entries if not e.satisfied]
    return row


def cmd_sweep(args) -> int:
    configs = sorted(Path(args.config_dir).glob("*.ini"))
    if not configs:
        print(f"no *.ini files in {args.config_dir}", file=sys.stderr)
        return EXIT_CONFIG
    root = Path(args.output) if args.output else Path("runs") / "sweep"
    if os.environ.get(OUTPUT_ROOT_ENV) and not root.is_absolute():
        root = Path(os.environ[OUTPUT_ROOT_ENV]) / root
    # each config writes to its own directory named after the file
    jobs = [(str(c), str(root / c.stem), not args.no_figures) for c in configs]
    with ProcessPoolExecutor(max_workers=args.workers) as pool:
        rows = list(pool.map(_sweep_one, jobs))

    summary = {"runs": rows}
    c_runs = [r["inputs"] for r in rows if r.get("inputs") and "appendix_c" in (r.get("regimes") or [])]
    if c_runs:
        c = calibrate_appendix_c_constant(c_runs)
        summary["appendix_c_constant"] = c
        summary["appendix_c_recheck"] = [
            {e.name: e.satisfied for e in check_appendix_c(
                x["U"], x["E"], x["F"], x["ell0"], x["nu"], x["Gr"], x["Re"], c_const=c,
                damping_rule=x["damping_rule"])}
            for x in c_runs
        ]
    try:
        root.mkdir(parents=True, exist_ok=True)
        (root / "sweep_summary.json").write_text(json.dumps(summary, indent=2))
    except OSError as exc:
        print(f"write failed: {exc}", file=sys.stderr)
        return EXIT_DISK

    print(FIELD_SEP.join(("config", "exit_code", "unsatisfied", "message")))
    for r in rows:
        print(FIELD_SEP.join((r["config"], str(r["exit_code"]), ",".join(r.get("unsatisfied", [])), r["message"])))
    if "appendix_c_constant" in summary:
        print(f"appendix_c constant calibrated over {len(c_runs)} runs: {summary['appendix_c_constant']!r}")
    print(f"wrote {root / 'sweep_summary.json'}")
    return max(r["exit_code"] for r in rows)


def cmd_algebra(args) -> int:
    result = algebraic_regime_sweep()
    print(f"points={result.points} hypotheses_true={result.hypotheses_true} counterexamples={len(result.counterexamples)}")
    for cx in result.counterexamples:
        print(f"COUNTEREXAMPLE {cx}")
    return 1 if result.counterexamples else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dampedns", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run an experiment from an INI config")
    run.add_argument("config")
    run.add_argument("-o", "--output", help="output directory (overrides [output] directory)")
    run.add_argument("--no-figures", action="store_true")
    run.set_defaults(func=cmd_run)

    pre = sub.add_parser("preset", help=f"run or print a named preset ({', '.join(PRESETS)})")
    pre.add_argument("name", help="preset name; fractional_demo:<alpha> picks the exponent")
    pre.add_argument("--emit-config", action="store_true", help="print the INI and exit")
    pre.add_argument("-o", "--output")
    pre.add_argument("--no-figures", action="store_true")
    pre.set_defaults(func=cmd_preset)

    aud = sub.add_parser("audit", help="recompute every entry of a report.json")
    aud.add_argument("report")
    aud.add_argument("--rtol", type=float, default=0.0)
    aud.set_defaults(func=cmd_audit)

    sw = sub.add_parser("sweep", help="run every *.ini in a directory in parallel")
    sw.add_argument("config_dir")
    sw.add_argument("-o", "--output", help="sweep root (default runs/sweep)")
    sw.add_argument("-j", "--workers", type=int, default=None)
    sw.add_argument("--no-figures", action="store_true")
    sw.set_defaults(func=cmd_sweep)

    alg = sub.add_parser("algebra", help="brute-force the algebraic implications on a parameter grid")
    alg.set_defaults(func=cmd_algebra)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
