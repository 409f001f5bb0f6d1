"""Operator command line.

Exit codes are a scripting contract:
0 success, 1 validation error, 2 run failed, 3 awaiting a manual flag,
4 budget exhausted, 5 I/O or environment error.

Relative workdir paths resolve under $SPIRAL_HOME when it is set, so
schedulers can address runs by short name. Every subcommand accepts
``--json`` for line-oriented machine-readable output.
"""

from __future__ import annotations

import argparse
import json
import os
import shutil
import sys
from pathlib import Path

from . import ledger as lg
from . import report as report_mod
from .engine import (
    AWAITING_FLAG,
    EXITED_FORCED,
    EXITED_TRUE,
    FAILED,
    RUNNING,
    resolve_manual_flag,
    resume,
    run_to_completion,
    start_run,
)
from .errors import (
    CorruptLedger,
    InvalidDecision,
    InvalidTraverseTarget,
    LockBusy,
    NotAwaitingFlag,
    SpecValidationError,
    SpiralError,
    UnknownRun,
    WorkdirNotEmpty,
)
from .flags import parse_decision
from .scenarios import covid_spec, install_covid_fixtures, turnover_spec
from .specs import (
    Command,
    SpiralSpec,
    StageSpec,
    load_spec,
    save_spec,
    spec_digest,
    validate_spec,
    with_budget,
)
from .gates import Always, Manual, Never

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_RUN_FAILED = 2
EXIT_AWAITING = 3
EXIT_BUDGET = 4
EXIT_IO = 5

STATUS_EXIT = {
    EXITED_TRUE: EXIT_OK,
    RUNNING: EXIT_OK,
    AWAITING_FLAG: EXIT_AWAITING,
    EXITED_FORCED: EXIT_BUDGET,
    FAILED: EXIT_RUN_FAILED,
}

DECISION_LABELS = {
    "continue": "Continue",
    "traverse-back": "TraverseBack",
    "periodic-exit": "PeriodicExit",
    "true-exit": "TrueExit",
    "forced-exit": "ForcedExit",
}


def _resolve_workdir(path: str) -> Path:
    p = Path(path)
    home = os.environ.get("SPIRAL_HOME")
    if not p.is_absolute() and home:
        return Path(home) / p
    return p


def _emit(args, doc: dict, human: str) -> None:
    if args.json:
        print(json.dumps(doc, sort_keys=True))
    else:
        print(human)


def _fail(args, code: int, message: str, **extra) -> int:
    if args.json:
        print(json.dumps({"error": message, "exit_code": code, **extra}, sort_keys=True))
    else:
        print(f"error: {message}", file=sys.stderr)
    return code


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def cmd_init(args) -> int:
    target = Path(args.dir)
    if target.exists() and any(target.iterdir()):
        return _fail(args, EXIT_IO, f"{target} is not empty")
    target.mkdir(parents=True, exist_ok=True)

    if args.template == "covid":
        spec = covid_spec()
        install_covid_fixtures(target)
    elif args.template == "turnover":
        spec = turnover_spec()
    else:
        spec = _blank_spec()
    spec_path = target / "spiral.json"
    save_spec(spec, spec_path)
    _emit(
        args,
        {"written": str(spec_path), "template": args.template},
        f"wrote {spec_path}",
    )
    return EXIT_OK


def _blank_spec() -> SpiralSpec:
    """Editable skeleton: one command stage, a manual true-exit gate."""
    return SpiralSpec(
        goal="Describe the business problem this spiral solves",
        stages=(
            StageSpec(
                name="work",
                kind="custom",
                runner=Command(argv=("sh", "-c", 'echo {} > "$SPIRAL_METRICS_FILE"')),
            ),
        ),
        flag_gate=Always(),
        true_exit_gate=Manual("Is the business goal met?"),
        periodic_exit_gate=Never(),
        max_revolutions=3,
    )


def cmd_validate(args) -> int:
    try:
        spec = load_spec(args.spec)
    except OSError as exc:
        return _fail(args, EXIT_IO, f"cannot read {args.spec}: {exc}")
    except SpecValidationError as exc:
        for err in exc.errors:
            print(str(err))
        if args.json:
            print(json.dumps({"ok": False, "errors": [str(e) for e in exc.errors]}))
        return EXIT_VALIDATION

    result = validate_spec(spec)
    if isinstance(result, list):
        for err in result:
            print(str(err))
        if args.json:
            print(json.dumps({"ok": False, "errors": [str(e) for e in result]}))
        return EXIT_VALIDATION
    _emit(args, {"ok": True, "digest": spec_digest(spec)}, "OK")
    return EXIT_OK


def cmd_run(args) -> int:
    workdir = _resolve_workdir(args.workdir)

    if args.resume:
        try:
            state = resume(workdir)
        except CorruptLedger as exc:
            return _fail(args, EXIT_IO, str(exc), sequence=exc.sequence)
        except (UnknownRun, OSError) as exc:
            return _fail(args, EXIT_IO, str(exc))
    else:
        try:
            spec = load_spec(args.spec)
        except OSError as exc:
            return _fail(args, EXIT_IO, f"cannot read {args.spec}: {exc}")
        except SpecValidationError as exc:
            return _fail(args, EXIT_VALIDATION, str(exc))
        if args.max_revolutions is not None:
            spec = with_budget(spec, args.max_revolutions)
        result = validate_spec(spec)
        if isinstance(result, list):
            for err in result:
                print(str(err), file=sys.stderr)
            return _fail(args, EXIT_VALIDATION, f"{len(result)} validation error(s)")
        try:
            state = start_run(result, workdir)
        except WorkdirNotEmpty as exc:
            return _fail(args, EXIT_VALIDATION, str(exc))
        except LockBusy as exc:
            return _fail(args, EXIT_IO, str(exc))
        _stage_inputs(Path(args.spec).parent, workdir)

    try:
        state = run_to_completion(state)
    except LockBusy as exc:
        return _fail(args, EXIT_IO, str(exc))
    except CorruptLedger as exc:
        return _fail(args, EXIT_IO, str(exc), sequence=exc.sequence)

    return _report_outcome(args, state)


def _stage_inputs(spec_dir: Path, workdir: Path) -> None:
    # `init` drops input files next to the spec; a fresh run gets a copy so
    # relative runner paths resolve inside its own workdir.
    source = spec_dir / "incoming"
    target = workdir / "incoming"
    if source.is_dir() and not target.exists():
        shutil.copytree(source, target)


def _report_outcome(args, state) -> int:
    code = STATUS_EXIT[state.status]
    doc = state.summary()
    if state.status == EXITED_TRUE:
        human = f"TrueExit at revolution {state.revolution}"
    elif state.status == EXITED_FORCED:
        human = f"ForcedExit at revolution {state.revolution}: budget exhausted"
    elif state.status == FAILED:
        failure = state.failure or {}
        doc["failure"] = failure
        human = f"run failed at revolution {state.revolution}: {failure.get('cause')}"
    elif state.status == AWAITING_FLAG:
        human = (
            f"awaiting manual flag at revolution {state.revolution}; resolve with:\n"
            f"  spiral resolve {state.workdir} "
            "<continue|back:<stage>|periodic-exit|true-exit|forced-exit>"
        )
    else:
        human = f"revolution {state.revolution}, {state.status}"
    _emit(args, doc, human)
    return code


def cmd_status(args) -> int:
    workdir = _resolve_workdir(args.workdir)
    try:
        state = resume(workdir)
    except CorruptLedger as exc:
        return _fail(args, EXIT_IO, str(exc), sequence=exc.sequence)
    except (UnknownRun, OSError) as exc:
        return _fail(args, EXIT_IO, str(exc))

    doc = state.summary()
    lines = [
        f"revolution {state.revolution}, {state.status}, "
        f"{state.periodic_checkpoint_count()} periodic checkpoints"
    ]
    if state.status == AWAITING_FLAG and state.awaiting_context:
        doc["pending_flag"] = state.awaiting_context
        lines.append("pending flag:")
        for name, text in state.awaiting_context.get("gates", {}).items():
            outcome = state.awaiting_context["outcomes"][name]["kind"]
            lines.append(f"  {name}: {text} -> {outcome}")
        for prompt in state.awaiting_context.get("prompts", []):
            lines.append(f"  manual: {prompt}")
    if state.status == FAILED and state.failure:
        doc["failure"] = state.failure
        lines.append(f"failure: {state.failure.get('cause')}")
    _emit(args, doc, "\n".join(lines))
    return EXIT_OK


def cmd_resolve(args) -> int:
    workdir = _resolve_workdir(args.workdir)
    try:
        decision = parse_decision(args.decision)
    except (SpiralError, ValueError) as exc:
        return _fail(args, EXIT_VALIDATION, str(exc))

    try:
        state = resolve_manual_flag(workdir, decision, resolver=args.resolver)
    except NotAwaitingFlag as exc:
        return _fail(args, EXIT_RUN_FAILED, str(exc))
    except (InvalidTraverseTarget, InvalidDecision) as exc:
        return _fail(args, EXIT_VALIDATION, str(exc))
    except (UnknownRun, CorruptLedger, OSError, LockBusy) as exc:
        return _fail(args, EXIT_IO, str(exc))

    label = DECISION_LABELS[decision.kind]
    _emit(
        args,
        {**state.summary(), "decision": decision.to_json()},
        f"{label} recorded; run is now {state.status}",
    )
    return EXIT_OK


def cmd_history(args) -> int:
    workdir = _resolve_workdir(args.workdir)
    path = lg.ledger_path(workdir)
    try:
        events = lg.read_ledger(path)
    except CorruptLedger as exc:
        return _fail(args, EXIT_IO, str(exc), sequence=exc.sequence)
    except OSError as exc:
        return _fail(args, EXIT_IO, str(exc))

    for event in events:
        if args.json:
            print(json.dumps(event.to_json(), sort_keys=True))
        else:
            print(f"{event.sequence:>4}  {event.timestamp}  {event.kind:<18} {_brief(event)}")
    return EXIT_OK


def _brief(event: lg.LedgerEvent) -> str:
    p = event.payload
    if event.kind == lg.RUN_STARTED:
        return f"run_id={p['run_id']}"
    if event.kind in (lg.REVOLUTION_STARTED, lg.FLAG_EVALUATED):
        return f"revolution={p['revolution']}"
    if event.kind in (lg.STAGE_STARTED, lg.STAGE_COMPLETED):
        extra = ""
        if event.kind == lg.STAGE_COMPLETED and p["metrics"]:
            extra = " " + json.dumps(p["metrics"], sort_keys=True)
        return f"stage={p['stage']}{extra}"
    if event.kind == lg.STAGE_FAILED:
        return f"stage={p.get('stage')} cause={p['cause']!r}"
    if event.kind == lg.FLAG_RESOLVED:
        return f"decision={p['decision']['kind']} resolver={p.get('resolver')}"
    if event.kind == lg.CHECKPOINT_EMITTED:
        return f"kind={p['kind']} revolution={p['revolution']}"
    if event.kind == lg.TRAVERSED_BACK:
        return f"target={p['target']}"
    if event.kind == lg.RUN_EXITED:
        return f"kind={p['kind']}"
    return ""


def cmd_export(args) -> int:
    workdir = _resolve_workdir(args.workdir)
    out_dir = Path(args.out) if args.out else workdir / "report"
    try:
        written = report_mod.export_run(workdir, out_dir, fmt=args.format)
    except CorruptLedger as exc:
        return _fail(args, EXIT_IO, str(exc), sequence=exc.sequence)
    except (UnknownRun, OSError) as exc:
        return _fail(args, EXIT_IO, str(exc))
    except ValueError as exc:
        return _fail(args, EXIT_VALIDATION, str(exc))

    _emit(
        args,
        {"written": [str(p) for p in written]},
        "\n".join(f"wrote {p}" for p in written),
    )
    return EXIT_OK


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spiral",
        description="Budgeted lifecycle runs with flag checkpoints and gated exits.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--json", action="store_true", help="machine-readable output")

    p = sub.add_parser("init", parents=[common], help="write a starter spec into a directory")
    p.add_argument("template", choices=("covid", "turnover", "blank"))
    p.add_argument("dir")
    p.set_defaults(fn=cmd_init)

    p = sub.add_parser("validate", parents=[common], help="check a spec document")
    p.add_argument("spec")
    p.set_defaults(fn=cmd_validate)

    p = sub.add_parser("run", parents=[common], help="start or resume a run and drive it")
    p.add_argument("spec", nargs="?", help="spec document (not needed with --resume)")
    p.add_argument("--workdir", "-w", required=True, help="run directory")
    p.add_argument("--max-revolutions", type=int, default=None, help="budget override")
    p.add_argument("--resume", action="store_true", help="continue from the ledger")
    p.set_defaults(fn=cmd_run)

    p = sub.add_parser("status", parents=[common], help="print run state and pending flag")
    p.add_argument("workdir")
    p.set_defaults(fn=cmd_status)

    p = sub.add_parser("resolve", parents=[common], help="apply a manual flag decision")
    p.add_argument("workdir")
    p.add_argument(
        "decision", help="continue | back:<stage> | periodic-exit | true-exit | forced-exit"
    )
    p.add_argument(
        "--resolver",
        default=os.environ.get("USER", "operator"),
        help="operator identity recorded in the ledger",
    )
    p.set_defaults(fn=cmd_resolve)

    p = sub.add_parser("history", parents=[common], help="print the event ledger")
    p.add_argument("workdir")
    p.set_defaults(fn=cmd_history)

    p = sub.add_parser("export", parents=[common], help="write report tables and figures")
    p.add_argument("workdir")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--out", default=None, help="output directory (default: <workdir>/report)")
    p.set_defaults(fn=cmd_export)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "run" and not args.resume and not args.spec:
        print("error: a spec document is required unless --resume is given", file=sys.stderr)
        return EXIT_VALIDATION
    try:
        return args.fn(args)
    except SpiralError as exc:
        # Anything a subcommand did not map explicitly is an internal error;
        # surface it loudly rather than mislabeling it.
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUN_FAILED


if __name__ == "__main__":
    raise SystemExit(main())
