"""Command-line driver for the full pipeline.

Exit codes: 0 success, 1 runtime/provider/IO failure, 2 validation
failure (recovery could not produce a conforming value), 3 usage error.
Nonzero exits print one machine-parseable ``error: <code>: <message>``
line on stderr.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import (
    json_recovery,
    render_export,
    session_engine,
    store as store_mod,
)
from .errors import ScenarioForgeError
from .llm_gateway import ProviderConfig
from .prompt_forge import GenerationConstraints
from .render_export import RenderOptions
from .schema_model import load_builtin_template

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_VALIDATION = 2
EXIT_USAGE = 3

VALIDATION_CODES = {
    "NoJsonFound", "Unrepairable", "StillInvalid", "AmbiguousEnvelope",
    "BindFailure", "DuplicatePhaseId", "NonMonotonicIds", "ApprovalBlocked",
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # argparse exits 2 by default; we map usage to 3
        raise UsageError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="scenarioforge", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    new = sub.add_parser("new", help="create a session and optionally drive it to Complete")
    new.add_argument("--topic", required=True)
    new.add_argument("--provider", choices=["scripted", "http"], default="scripted")
    new.add_argument("--script", help="script file for the scripted provider")
    new.add_argument("--endpoint-url", help="chat-completion endpoint for the http provider")
    new.add_argument("--model", default="default")
    new.add_argument("--secret-env", help="name of the env var holding the provider secret")
    new.add_argument("--min-steps", type=int, default=3)
    new.add_argument("--max-steps", type=int, default=6)
    new.add_argument("--auto-approve", action="store_true")
    new.add_argument("--yes-really", action="store_true",
                     help="allow --auto-approve with a live http provider")
    new.add_argument("--store", default=None)
    new.add_argument("--json", action="store_true")

    ingest = sub.add_parser("ingest", help="paste raw model output into a session phase")
    ingest.add_argument("--session", required=True)
    ingest.add_argument("--phase", choices=["general", "progression"], required=True)
    ingest.add_argument("--file", required=True)
    ingest.add_argument("--store", default=None)
    ingest.add_argument("--json", action="store_true")

    validate = sub.add_parser("validate", help="run recovery + validation on raw text")
    validate.add_argument("--file", required=True)
    validate.add_argument("--template", choices=["general", "progression"], default="general")
    validate.add_argument("--json", action="store_true")

    render = sub.add_parser("render", help="render a completed session to a document")
    render.add_argument("--session", required=True)
    render.add_argument("--format", choices=["markdown", "html"], default="markdown")
    render.add_argument("--out", required=True)
    render.add_argument("--store", default=None)

    export = sub.add_parser("export", help="write the manikin-programming XML")
    export.add_argument("--session", required=True)
    export.add_argument("--out", required=True)
    export.add_argument("--store", default=None)

    serve = sub.add_parser("serve", help="start the HTTP API")
    serve.add_argument("--config", default=None)

    return parser


def _store(args) -> store_mod.StoreRoot:
    root = args.store or os.environ.get("SCENARIOFORGE_STORE") or "./scenario_store"
    return store_mod.open_store(root)


def _print_repair_report(report: json_recovery.RepairReport, as_json: bool) -> None:
    if as_json:
        print(json.dumps(report.to_dict(), indent=2))
        return
    print(f"repair outcome: {report.outcome}")
    if not report.steps:
        print("  no corrections applied")
    for step in report.steps:
        print(f"  {step.rule:<24} at {step.location!s:<40} {step.detail}")


def _print_validation_report(report, as_json: bool) -> None:
    if as_json:
        print(json.dumps(report.to_dict(), indent=2))
        return
    print(f"validation: {len(report.errors)} errors, {len(report.warnings)} warnings")
    for issue in report.issues:
        print(f"  {issue.severity:<8} {issue.code:<16} {issue.path}  (expected {issue.expected!r}, got {issue.got!r})")


def _template_pair():
    return (load_builtin_template("general_info"), load_builtin_template("progression"))


def _cmd_new(args) -> int:
    if args.auto_approve and args.provider == "http" and not args.yes_really:
        raise UsageError("--auto-approve with a live http provider requires --yes-really "
                         "(unreviewed output must be opt-in)")
    if args.provider == "scripted":
        config = ProviderConfig(kind="scripted", script_path=args.script)
    else:
        config = ProviderConfig(
            kind="http", endpoint_url=args.endpoint_url,
            model_name=args.model, auth_secret_ref=args.secret_env,
        )
    constraints = GenerationConstraints(min_steps=args.min_steps, max_steps=args.max_steps)
    store = _store(args)
    session = session_engine.create_session(args.topic, config, _template_pair(), constraints)
    store_mod.save_session(store, session)
    if args.auto_approve:
        try:
            session_engine.advance(session, session_engine.GenerateGeneral())
            session_engine.advance(session, session_engine.ApproveGeneral())
            session_engine.advance(session, session_engine.GenerateProgression())
            session_engine.advance(session, session_engine.ApproveProgression())
        finally:
            store_mod.save_session(store, session)
    summary = {
        "session_id": session.session_id,
        "state": session.state.value,
        "topic": session.topic,
    }
    if session.scenario is not None:
        summary["scenario_title"] = session.scenario.general.scenario_title
        summary["phases"] = len(session.scenario.phases)
    if args.json:
        print(json.dumps(summary, indent=2))
    else:
        for key, value in summary.items():
            print(f"{key}: {value}")
    return EXIT_OK


def _cmd_ingest(args) -> int:
    store = _store(args)
    session = store_mod.load_session(store, args.session)
    text = Path(args.file).read_text("utf-8")
    expected = "general" if session.state == session_engine.SessionState.NEW else "progression"
    if args.phase != expected:
        raise session_engine.IllegalTransition(
            f"session in state {session.state.value} ingests the {expected} phase, not {args.phase}"
        )
    session_engine.advance(session, session_engine.IngestRaw(text=text))
    store_mod.save_session(store, session)
    proposal = session.proposals[args.phase]
    _print_repair_report(proposal.repair_report, args.json)
    _print_validation_report(proposal.validation_report, args.json)
    print(f"state: {session.state.value}")
    return EXIT_OK


def _cmd_validate(args) -> int:
    text = Path(args.file).read_text("utf-8")
    template = load_builtin_template("general_info" if args.template == "general" else "progression")
    try:
        _, repair_report, validation_report = json_recovery.recover(text, template)
    except json_recovery.StillInvalid as exc:
        _print_repair_report(exc.repair_report, args.json)
        _print_validation_report(exc.validation_report, args.json)
        raise
    _print_repair_report(repair_report, args.json)
    _print_validation_report(validation_report, args.json)
    return EXIT_OK


def _cmd_render(args) -> int:
    store = _store(args)
    session = store_mod.load_session(store, args.session)
    scenario = session_engine.scenario_of(session)
    text = render_export.render(scenario, RenderOptions(format=args.format))
    Path(args.out).write_text(text, encoding="utf-8")
    print(f"wrote {args.out}")
    return EXIT_OK


def _cmd_export(args) -> int:
    store = _store(args)
    session = store_mod.load_session(store, args.session)
    scenario = session_engine.scenario_of(session)
    document = render_export.export_manikin(scenario)
    Path(args.out).write_bytes(document.data)
    print(f"wrote {args.out}")
    return EXIT_OK


def _cmd_serve(args) -> int:
    from .api_service import ServiceConfig, serve

    serve(ServiceConfig.load(args.config))
    return EXIT_OK


_COMMANDS = {
    "new": _cmd_new,
    "ingest": _cmd_ingest,
    "validate": _cmd_validate,
    "render": _cmd_render,
    "export": _cmd_export,
    "serve": _cmd_serve,
}


def run(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        return _COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"error: Usage: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ScenarioForgeError as exc:
        print(f"error: {exc.code}: {exc}", file=sys.stderr)
        return EXIT_VALIDATION if exc.code in VALIDATION_CODES else EXIT_RUNTIME
    except OSError as exc:
        print(f"error: IoFailure: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
