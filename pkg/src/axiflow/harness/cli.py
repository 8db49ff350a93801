"""Command line entry point: ``axiflow run | converge | verify``."""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

from axiflow.errors import AxiflowError
from axiflow.harness.config import load_config, save_config
from axiflow.harness.convergence import DEFAULT_JS, run_convergence_study
from axiflow.harness.outputs import emit_outputs
from axiflow.harness.runner import COMPLETED, NEGATIVE_RADIUS, PINCH_OFF, run_simulation
from axiflow.harness.verify import TAGS, verify_suite

# terminal statuses that describe the flow rather than a failure of the method
CLEAN_STATUSES = (COMPLETED, NEGATIVE_RADIUS, PINCH_OFF)


def _int_list(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(v) for v in text.split(","))
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma separated integers, got {text!r}") from exc


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="axiflow", description="Axisymmetric curvature flows of surfaces.")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run one experiment")
    run.add_argument("config", help="JSON or key = value experiment file")
    run.add_argument("--out", help="output directory (default: output.directory or .)")
    run.add_argument("--dump-matrices", action="store_true", help="write each step system as triplets")
    run.add_argument("--snapshot-every", type=int, metavar="N", help="store the curve every N steps")
    run.add_argument("--svg", action="store_true", help="plot the snapshots to curves.svg")
    run.add_argument("--png", action="store_true", help="plot the snapshots to curves.png")
    run.add_argument("--seed", type=int, help="accepted for interface stability; runs are deterministic")

    conv = sub.add_parser("converge", help="refinement study against the exact sphere radius")
    conv.add_argument("config", help="JSON or key = value experiment file")
    conv.add_argument("--out", default=".", help="output directory for convergence.csv")
    conv.add_argument("--J", type=_int_list, default=DEFAULT_JS, metavar="J1,J2,...", help="meshes to run")
    conv.add_argument("--workers", type=int, help="worker processes (default: one per CPU)")
    conv.add_argument("--seed", type=int, help="accepted for interface stability; runs are deterministic")

    ver = sub.add_parser("verify", help="run a canned verification suite")
    ver.add_argument("tag", choices=TAGS + ("all",))
    ver.add_argument("--quick", action="store_true", help="shortened runs for smoke testing")
    ver.add_argument("--seed", type=int, help="accepted for interface stability; runs are deterministic")
    return parser


def _cmd_run(args) -> int:
    config = load_config(args.config)
    output = config.output
    if args.snapshot_every is not None:
        output = replace(output, snapshot_every=args.snapshot_every)
    if args.dump_matrices:
        output = replace(output, dump_matrices=True)
    if args.svg:
        output = replace(output, svg=True)
    if args.png:
        output = replace(output, png=True)
    out = Path(args.out or output.directory or ".")
    config = replace(config, output=replace(output, directory=str(out)))
    result = run_simulation(config, matrix_dir=out / "matrices")
    emit_outputs(result, directory=out)
    save_config(config, out / "config.json")
    print(f"{result.status} after {result.steps} steps at t={result.time:.6g}"
          + (f": {result.reason}" if result.reason else ""))
    return 0 if result.status in CLEAN_STATUSES else 1


def _cmd_converge(args) -> int:
    config = load_config(args.config)
    report = run_convergence_study(config, args.J, workers=args.workers)
    emit_outputs(None, report, directory=args.out)
    print(f"{'J':>5} {'h':>12} {'error':>12} {'EOC':>8}  status")
    for row in report.rows:
        order = "" if row.eoc is None else f"{row.eoc:.4f}"
        print(f"{row.J:>5} {row.h:>12.4e} {row.error:>12.4e} {order:>8}  {row.status}")
    return 0 if all(r.status == COMPLETED for r in report.rows) else 1


def _cmd_verify(args) -> int:
    tags = TAGS if args.tag == "all" else (args.tag,)
    ok = True
    for tag in tags:
        report = verify_suite(tag, quick=args.quick)
        for line in report.lines():
            print(line, flush=True)
        ok &= report.passed
    print("verify:", "passed" if ok else "FAILED")
    return 0 if ok else 1


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    handler = {"run": _cmd_run, "converge": _cmd_converge, "verify": _cmd_verify}[args.command]
    try:
        return handler(args)
    except AxiflowError as exc:
        print(f"axiflow: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
