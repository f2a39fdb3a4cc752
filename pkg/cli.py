"""
Semigroup Lab command line.

    python cli.py verify --seed 7 --dim 8
    python cli.py sweep-main --dim 2 --reference --t 0.5,1,2 --z -10,-50,-250 --out run.csv
    python cli.py counterexample

Exit codes: 0 all hard assertions passed, 1 an assertion failed (or a
numerical failure aborted the run), 2 usage or configuration error.
"""
import argparse
import json
import os
import sys
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional

from dotenv import load_dotenv
from pydantic import ValidationError

from bounds import compute_bound_params
from errors import InsufficientDeltaError, SemigroupLabError, ValidityRegionError
from experiments import (
    build_instances,
    counterexample_records,
    counterexample_run,
    main_sweep,
    run_verification,
    spectrum_localization_suite,
    zeno_sup_by_k,
    zeno_sweep,
)
from experiments.sweeps import instance_bound_params
from observability import LogLevel, configure_logging, get_logger, get_metrics
from schemas import OutputFormat, ProjectionKind, RunConfig, Subcommand, parse_complex
from storage import reports_path_for, write_bound_params, write_records, write_reports
from workers import default_workers

logger = get_logger("semigroup_lab.cli")

SEED_ENV = "SEMIGROUP_LAB_SEED"
EXIT_OK = 0
EXIT_ASSERTION = 1
EXIT_USAGE = 2
# flags whose values may start with '-'
_VALUE_FLAGS = ("--z", "--t", "--k", "--delta")


# ============================================================================
# Parsing
# ============================================================================

def _attach_negative_values(argv: List[str]) -> List[str]:
    """Rewrite `--z -10,-50` as `--z=-10,-50` so argparse does not read an option."""
    out: List[str] = []
    i = 0
    while i < len(argv):
        arg = argv[i]
        if arg in _VALUE_FLAGS and i + 1 < len(argv) and argv[i + 1].startswith("-"):
            out.append(f"{arg}={argv[i + 1]}")
            i += 2
            continue
        out.append(arg)
        i += 1
    return out


def _split(text: str) -> List[str]:
    parts = [p.strip() for p in text.split(",")]
    if not parts or any(not p for p in parts):
        raise ValueError(f"malformed list: {text!r}")
    return parts


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, help=f"64-bit seed (fallback: ${SEED_ENV})")
    common.add_argument("--dim", type=int, help="Matrix dimension")
    common.add_argument("--t", help="Comma list of times")
    common.add_argument("--z", help="Comma list of complex z values, e.g. -10,-50-10i")
    common.add_argument("--k", help="Comma list of Zeno product lengths")
    common.add_argument("--delta", type=float, help="Fixed delta (selected automatically otherwise)")
    common.add_argument("--projection", choices=[k.value for k in ProjectionKind])
    common.add_argument("--scale", type=float, help="Operator norm of the random A")
    common.add_argument("--p-norm", type=float, help="Exact ||P|| for oblique projections (>= 1)")
    common.add_argument("--instances", type=int, help="Seeded instances per run")
    common.add_argument("--reference", action="store_true", default=None, help="Use the 2x2 Reference Instance")
    common.add_argument("--out", help="Output file")
    common.add_argument("--format", choices=[f.value for f in OutputFormat])
    common.add_argument("--threads", type=int, help="Worker cap (default: machine parallelism)")
    common.add_argument("--config", help="JSON config mirroring RunConfig")
    common.add_argument("--timing", action="store_true", default=None, help="Render wall_time_s")
    common.add_argument("--metrics", action="store_true", help="Print collected metrics on stderr")
    common.add_argument("--log-level", choices=[lvl.value for lvl in LogLevel])
    common.add_argument("--log-json", action="store_true", help="JSON log lines on stderr")

    parser = argparse.ArgumentParser(
        prog="semigroup-lab",
        description="Numerical verification of projection-coupled semigroup limits",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)
    for command in Subcommand:
        sub.add_parser(command.value, parents=[common])
    return parser


def load_run_config(args: argparse.Namespace) -> RunConfig:
    """defaults < --config file < $SEMIGROUP_LAB_SEED (seed only) < flags."""
    data: Dict[str, Any] = {}
    if args.config:
        data = json.loads(Path(args.config).read_text(encoding="utf-8"))
        if not isinstance(data, dict):
            raise ValueError("config file must hold a JSON object")
    sweep: Dict[str, Any] = dict(data.get("sweep") or {})

    env_seed = os.getenv(SEED_ENV)
    if args.seed is None and "seed" not in sweep and env_seed:
        sweep["seed"] = int(env_seed)

    flag_values = {
        "seed": args.seed,
        "dim": args.dim,
        "t_grid": [float(v) for v in _split(args.t)] if args.t else None,
        "z_list": [parse_complex(v) for v in _split(args.z)] if args.z else None,
        "k_list": [int(v) for v in _split(args.k)] if args.k else None,
        "delta": args.delta,
        "projection_kind": args.projection,
        "scale": args.scale,
        "p_norm": args.p_norm,
        "instances": args.instances,
        "reference": args.reference,
    }
    sweep.update({k: v for k, v in flag_values.items() if v is not None})

    data["subcommand"] = args.subcommand
    data["sweep"] = sweep
    run_values = {"output_path": args.out, "format": args.format, "threads": args.threads, "timing": args.timing}
    data.update({k: v for k, v in run_values.items() if v is not None})
    return RunConfig.model_validate(data)


# ============================================================================
# Commands
# ============================================================================

def _banner(title: str):
    print("\n" + "=" * 50)
    print(title)
    print("=" * 50)


def _threads(cfg: RunConfig) -> int:
    return cfg.threads or default_workers()


def cmd_verify(cfg: RunConfig) -> int:
    result = run_verification(cfg.sweep, _threads(cfg))
    _banner(f"Verification (seed {cfg.sweep.seed}, dim {cfg.sweep.effective_dim})")
    for report in result.reports:
        print(report.summary_line())
    print(f"Status: {result.status.value} ({result.metrics.suites_failed} failed, "
          f"{result.metrics.suites_warned} warnings)")

    if cfg.output_path:
        write_records(cfg.output_path, result.records, cfg.format, cfg.timing)
        write_reports(reports_path_for(cfg.output_path), result.reports, cfg.format)
    return EXIT_OK if result.passed else EXIT_ASSERTION


def cmd_sweep_main(cfg: RunConfig) -> int:
    records = main_sweep(cfg.sweep, _threads(cfg))
    bounded = [r for r in records if r.bound is not None]
    violations = [r for r in bounded if r.ratio is not None and r.ratio > 1.0]
    overflows = sum(1 for r in records if r.overflow)

    _banner("Main sweep")
    print(f"Records: {len(records)} ({len(bounded)} within the bound's validity region)")
    if bounded:
        print(f"Max error/bound ratio: {max(r.ratio for r in bounded):.3e}")
    if overflows:
        print(f"Overflow-flagged cells: {overflows}")
    for rec in violations:
        print(f"  BOUND VIOLATED: seed={rec.seed} z={rec.z} t={rec.t} ratio={rec.ratio:.6g}")

    if cfg.output_path:
        write_records(cfg.output_path, records, cfg.format, cfg.timing)
    return EXIT_ASSERTION if violations else EXIT_OK


def cmd_sweep_zeno(cfg: RunConfig) -> int:
    records = zeno_sweep(cfg.sweep, _threads(cfg))
    _banner("Zeno sweep")
    for seed in sorted({r.seed for r in records}):
        sups = zeno_sup_by_k(r for r in records if r.seed == seed)
        print(f"seed {seed}: " + ", ".join(f"k={k}: {e:.3e}" for k, e in sups.items()))

    if cfg.output_path:
        write_records(cfg.output_path, records, cfg.format, cfg.timing)
    return EXIT_OK


def cmd_bound_constants(cfg: RunConfig) -> int:
    rows = []
    _banner("Bound constants")
    for inst in build_instances(cfg.sweep):
        bp = instance_bound_params(inst, cfg.sweep, _threads(cfg))
        if bp is None:
            raise ValueError("bound constants need at least one t > 0")
        rows.append({"seed": inst.seed, **bp.model_dump()})
        print(f"seed {inst.seed}: delta={bp.delta:g} r={bp.r:.6g} R={bp.big_r:.6g} "
              f"C1={bp.c1:.6g} C2={bp.c2:.6g} sup_m={bp.sup_m_raw:.6g} (x1.05)")
        if bp.sup_m_neumann is not None:
            print(f"  closed upper estimate of sup_m: {bp.sup_m_neumann:.6g}")

    if cfg.output_path:
        write_bound_params(cfg.output_path, rows, cfg.format)
    return EXIT_OK


def cmd_localize_spectrum(cfg: RunConfig) -> int:
    report = spectrum_localization_suite(cfg.sweep, max_workers=_threads(cfg))
    _banner("Spectrum localization")
    print(report.summary_line())
    if cfg.output_path:
        write_reports(cfg.output_path, [report], cfg.format)
    return EXIT_OK if report.passed else EXIT_ASSERTION


def cmd_counterexample(cfg: RunConfig) -> int:
    report = counterexample_run()
    _banner("Counterexample (X = C, A = 0, P = 1)")
    for rec in counterexample_records():
        print(f"t={rec.t:+g} z={rec.z.real:g}: error = {rec.error:.10g}")
    print(report.summary_line())
    if cfg.output_path:
        write_records(cfg.output_path, counterexample_records(), cfg.format, cfg.timing)
    return EXIT_OK if report.passed else EXIT_ASSERTION


COMMANDS: Dict[Subcommand, Callable[[RunConfig], int]] = {
    Subcommand.VERIFY: cmd_verify,
    Subcommand.SWEEP_MAIN: cmd_sweep_main,
    Subcommand.SWEEP_ZENO: cmd_sweep_zeno,
    Subcommand.BOUND_CONSTANTS: cmd_bound_constants,
    Subcommand.LOCALIZE_SPECTRUM: cmd_localize_spectrum,
    Subcommand.COUNTEREXAMPLE: cmd_counterexample,
}


# ============================================================================
# Entry point
# ============================================================================

def run(argv: Optional[List[str]] = None) -> int:
    """Parse, configure and dispatch; returns the process exit code."""
    load_dotenv()
    argv = _attach_negative_values(list(sys.argv[1:] if argv is None else argv))
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code in (0, None) else EXIT_USAGE

    if args.log_level or args.log_json:
        level = LogLevel(args.log_level) if args.log_level else LogLevel.WARNING
        configure_logging(level, args.log_json)

    try:
        cfg = load_run_config(args)
    except (ValidationError, ValueError, OSError) as e:
        print(f"Error: {e}", file=sys.stderr)
        return EXIT_USAGE

    try:
        code = COMMANDS[cfg.subcommand](cfg)
    except (InsufficientDeltaError, ValidityRegionError, ValueError) as e:
        print(f"Error: {e}", file=sys.stderr)
        code = EXIT_USAGE
    except SemigroupLabError as e:
        logger.exception("Run aborted", e, subcommand=cfg.subcommand.value)
        print(f"Error: {e}", file=sys.stderr)
        code = EXIT_ASSERTION

    if args.metrics:
        print(json.dumps(get_metrics().get_stats(), indent=2, default=str), file=sys.stderr)
    return code


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
