"""Filesystem persistence for sessions, transcripts, and scenarios.

Layout: ``{root}/sessions/{session_id}/session.json`` plus
``transcript.json``, ``scenario.scenario.json`` once complete, and an
``exports/`` directory. Writes go to a temp file in the same directory
and are renamed into place, so a crash never leaves a corrupt visible
snapshot; ``*.tmp`` leftovers are ignored on load. Provider secrets are
never persisted — only the name of the environment variable that holds
them.
"""

from __future__ import annotations

import json
import os
import tempfile
from dataclasses import dataclass
from pathlib import Path

from . import llm_gateway, scenario_domain, schema_model
from .errors import ScenarioForgeError
from .llm_gateway import ChatTranscript, ProviderConfig
from .prompt_forge import GenerationConstraints
from .session_engine import Proposal, Session, SessionState


class IoFailure(ScenarioForgeError):
    pass


class NotFound(ScenarioForgeError):
    pass


class CorruptSnapshot(ScenarioForgeError):
    pass


@dataclass(frozen=True)
class StoreRoot:
    root_dir: Path

    def session_dir(self, session_id: str) -> Path:
        return self.root_dir / "sessions" / session_id


@dataclass(frozen=True)
class SessionListing:
    session_id: str
    topic: str
    state: str
    updated: float


def open_store(root_dir: str | Path) -> StoreRoot:
    root = Path(root_dir)
    try:
        (root / "sessions").mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise IoFailure(f"cannot create store at {root}: {exc}") from exc
    return StoreRoot(root)


def _write_atomic(path: Path, text: str) -> None:
    try:
        fd, tmp_name = tempfile.mkstemp(dir=path.parent, suffix=".tmp")
        try:
            with os.fdopen(fd, "w", encoding="utf-8") as handle:
                handle.write(text)
            os.replace(tmp_name, path)
        except BaseException:
            os.unlink(tmp_name)
            raise
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


def _session_snapshot(session: Session) -> dict:
    config = session.provider_config
    return {
        "session_id": session.session_id,
        "topic": session.topic,
        "state": session.state.value,
        "provider": config.to_dict() if config else None,
        "general_template": {
            "source_name": session.general_template.source_name,
            "text": schema_model.serialize_schema(session.general_template),
        },
        "progression_template": {
            "source_name": session.progression_template.source_name,
            "text": schema_model.serialize_schema(session.progression_template),
        },
        "constraints": session.constraints.to_dict(),
        "retry_budget": session.retry_budget,
        "renumber": session.renumber,
        "proposals": {phase: p.to_dict() for phase, p in session.proposals.items()},
        "approved_general": (
            scenario_domain.general_to_dict(session.approved_general)
            if session.approved_general is not None else None
        ),
        "approved_phases": (
            [scenario_domain.phase_to_dict(p) for p in session.approved_phases]
            if session.approved_phases is not None else None
        ),
        "error_log": list(session.error_log),
        "created": session.created,
        "updated": session.updated,
    }


def save_session(store: StoreRoot, session: Session) -> None:
    """Persist the session snapshot, transcript, and scenario (atomic per file)."""
    directory = store.session_dir(session.session_id)
    try:
        directory.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise IoFailure(f"cannot create {directory}: {exc}") from exc
    _write_atomic(directory / "session.json", json.dumps(_session_snapshot(session), indent=2))
    _write_atomic(directory / "transcript.json", json.dumps(session.transcript().to_dict(), indent=2))
    if session.scenario is not None:
        _write_atomic(
            directory / "scenario.scenario.json", scenario_domain.canonical_serialize(session.scenario)
        )


def load_session(store: StoreRoot, session_id: str) -> Session:
    """Rebuild a session; scripted conversations re-bind to their script."""
    directory = store.session_dir(session_id)
    snapshot_path = directory / "session.json"
    if not snapshot_path.exists():
        raise NotFound(f"no session {session_id!r} in {store.root_dir}")
    try:
        data = json.loads(snapshot_path.read_text("utf-8"))
        transcript_path = directory / "transcript.json"
        transcript = ChatTranscript()
        if transcript_path.exists():
            transcript = ChatTranscript.from_dict(json.loads(transcript_path.read_text("utf-8")))

        config = ProviderConfig.from_dict(data["provider"]) if data.get("provider") else None
        conversation = llm_gateway.resume_conversation(config, transcript) if config else None
        general_template = schema_model.parse_schema(
            data["general_template"]["text"], data["general_template"]["source_name"]
        )
        progression_template = schema_model.parse_schema(
            data["progression_template"]["text"], data["progression_template"]["source_name"]
        )
        session = Session(
            session_id=data["session_id"],
            topic=data["topic"],
            state=SessionState(data["state"]),
            conversation=conversation,
            general_template=general_template,
            progression_template=progression_template,
            constraints=GenerationConstraints.from_dict(data["constraints"]),
            retry_budget=data["retry_budget"],
            renumber=data.get("renumber", False),
            proposals={phase: Proposal.from_dict(p) for phase, p in data["proposals"].items()},
            approved_general=(
                scenario_domain.general_from_dict(data["approved_general"])
                if data.get("approved_general") is not None else None
            ),
            approved_phases=(
                [scenario_domain.phase_from_dict(p) for p in data["approved_phases"]]
                if data.get("approved_phases") is not None else None
            ),
            error_log=list(data.get("error_log", [])),
            created=data["created"],
            updated=data["updated"],
        )
    except (KeyError, TypeError, ValueError, json.JSONDecodeError) as exc:
        raise CorruptSnapshot(f"{snapshot_path}: {exc}") from exc
    except ScenarioForgeError as exc:
        raise CorruptSnapshot(f"{snapshot_path}: {exc}") from exc

    scenario_path = directory / "scenario.scenario.json"
    if session.state == SessionState.COMPLETE and scenario_path.exists():
        session.scenario = scenario_domain.parse_scenario(scenario_path.read_text("utf-8"))
    return session


def list_sessions(store: StoreRoot) -> list[SessionListing]:
    """All sessions, newest first; corrupt entries are marked, not fatal."""
    sessions_dir = store.root_dir / "sessions"
    listings: list[SessionListing] = []
    try:
        entries = sorted(p for p in sessions_dir.iterdir() if p.is_dir())
    except OSError as exc:
        raise IoFailure(f"cannot list {sessions_dir}: {exc}") from exc
    for entry in entries:
        snapshot_path = entry / "session.json"
        try:
            data = json.loads(snapshot_path.read_text("utf-8"))
            listings.append(
                SessionListing(
                    session_id=data["session_id"],
                    topic=data["topic"],
                    state=data["state"],
                    updated=float(data["updated"]),
                )
            )
        except (OSError, KeyError, TypeError, ValueError, json.JSONDecodeError):
            updated = snapshot_path.stat().st_mtime if snapshot_path.exists() else 0.0
            listings.append(
                SessionListing(session_id=entry.name, topic="", state=SessionState.FAILED.value, updated=updated)
            )
    listings.sort(key=lambda item: item.updated, reverse=True)
    return listings


def exports_dir(store: StoreRoot, session_id: str) -> Path:
    directory = store.session_dir(session_id) / "exports"
    directory.mkdir(parents=True, exist_ok=True)
    return directory
