"""HTTP facade over the session engine, renderer, and store.

A thin adapter: every behavior here is also reachable through the engine
directly, and no business rule lives only in a handler. Mutating requests
are serialized per session id to honor the engine's single-writer
contract; error bodies always carry a machine code and message, never a
stack trace.

Routes:
    POST /sessions
    GET  /sessions
    GET  /sessions/{id}
    POST /sessions/{id}/actions
    GET  /sessions/{id}/scenario
    GET  /sessions/{id}/render?format=markdown|html
    GET  /sessions/{id}/export
"""

from __future__ import annotations

import json
import os
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse, Response

from . import (
    json_recovery,
    llm_gateway,
    render_export,
    scenario_domain,
    session_engine,
    store as store_mod,
)
from .errors import ScenarioForgeError
from .llm_gateway import ProviderConfig
from .prompt_forge import GenerationConstraints
from .render_export import RenderOptions
from .session_engine import Session, SessionState

# engine error code -> HTTP status; anything unmapped is a 500
STATUS_BY_CODE = {
    "EmptyTopic": 400,
    "BadConfig": 400,
    "ScriptUnreadable": 400,
    "BadConstraints": 400,
    "EmptyInstruction": 400,
    "NotFound": 404,
    "IllegalTransition": 409,
    "NotComplete": 409,
    "NoJsonFound": 422,
    "Unrepairable": 422,
    "StillInvalid": 422,
    "AmbiguousEnvelope": 422,
    "BindFailure": 422,
    "DuplicatePhaseId": 422,
    "NonMonotonicIds": 422,
    "ApprovalBlocked": 422,
    "RetriesExhausted": 410,
    "OutOfOrder": 502,
    "ScriptExhausted": 502,
    "ScriptMismatch": 502,
    "Timeout": 502,
    "AuthFailed": 502,
    "RemoteError": 502,
    "IoFailure": 500,
    "CorruptSnapshot": 500,
}

ACTIONS = {
    "generate_general": lambda body: session_engine.GenerateGeneral(),
    "ingest_raw": lambda body: session_engine.IngestRaw(text=body.get("raw_text") or ""),
    "refine": lambda body: session_engine.Refine(instruction=body.get("instruction") or ""),
    "approve_general": lambda body: session_engine.ApproveGeneral(),
    "generate_progression": lambda body: session_engine.GenerateProgression(),
    "approve_progression": lambda body: session_engine.ApproveProgression(),
}


@dataclass
class ServiceConfig:
    store_root: str = "./scenario_store"
    default_provider: str = "scripted"
    script_path: str | None = None
    endpoint_url: str | None = None
    model_name: str = "default"
    auth_secret_ref: str | None = None
    cors_origin: str | None = None
    listen_host: str = "127.0.0.1"
    listen_port: int = 8740

    @classmethod
    def load(cls, path: str | Path | None = None) -> "ServiceConfig":
        """Config file (JSON) with SCENARIOFORGE_* environment overrides."""
        data: dict[str, Any] = {}
        if path is not None:
            data = json.loads(Path(path).read_text("utf-8"))
        config = cls(**{k: v for k, v in data.items() if k in cls.__dataclass_fields__})
        for name in cls.__dataclass_fields__:
            env = os.environ.get(f"SCENARIOFORGE_{name.upper()}")
            if env is not None:
                current = getattr(config, name)
                setattr(config, name, int(env) if isinstance(current, int) and not isinstance(current, bool) else env)
        return config


def _error_payload(exc: ScenarioForgeError) -> dict:
    payload: dict[str, Any] = {"code": exc.code, "message": str(exc)}
    detail: dict[str, Any] = dict(exc.detail or {})
    if isinstance(exc, json_recovery.StillInvalid):
        if exc.repair_report is not None:
            detail["repair_report"] = exc.repair_report.to_dict()
        if exc.validation_report is not None:
            detail["validation_report"] = exc.validation_report.to_dict()
    if detail:
        payload["detail"] = detail
    return payload


@dataclass
class _Registry:
    """In-memory session cache with a per-session mutation lock."""

    store: store_mod.StoreRoot
    sessions: dict[str, Session] = field(default_factory=dict)
    locks: dict[str, threading.Lock] = field(default_factory=dict)
    guard: threading.Lock = field(default_factory=threading.Lock)

    def lock_for(self, session_id: str) -> threading.Lock:
        with self.guard:
            return self.locks.setdefault(session_id, threading.Lock())

    def get(self, session_id: str) -> Session:
        with self.guard:
            cached = self.sessions.get(session_id)
        if cached is not None:
            return cached
        session = store_mod.load_session(self.store, session_id)
        with self.guard:
            return self.sessions.setdefault(session_id, session)

    def put(self, session: Session) -> None:
        with self.guard:
            self.sessions[session.session_id] = session


def _provider_config(config: ServiceConfig, body: dict) -> ProviderConfig:
    kind = body.get("provider") or config.default_provider
    if kind == "scripted":
        return ProviderConfig(kind="scripted", script_path=body.get("script") or config.script_path)
    if kind == "http":
        return ProviderConfig(
            kind="http",
            endpoint_url=body.get("endpoint_url") or config.endpoint_url,
            model_name=body.get("model_name") or config.model_name,
            auth_secret_ref=config.auth_secret_ref,
        )
    raise llm_gateway.BadConfig(f"unknown provider kind {kind!r}")


def _session_view(session: Session, include_proposals: bool = False) -> dict:
    view: dict[str, Any] = {
        "session_id": session.session_id,
        "topic": session.topic,
        "state": session.state.value,
        "created": session.created,
        "updated": session.updated,
    }
    if include_proposals:
        view["proposals"] = {phase: p.to_dict() for phase, p in session.proposals.items()}
        view["error_log"] = list(session.error_log)
    return view


def create_app(config: ServiceConfig | None = None) -> FastAPI:
    config = config or ServiceConfig()
    app = FastAPI(title="scenarioforge", version="0.1.0")
    registry = _Registry(store=store_mod.open_store(config.store_root))

    if config.cors_origin:
        from fastapi.middleware.cors import CORSMiddleware

        app.add_middleware(
            CORSMiddleware,
            allow_origins=[config.cors_origin],
            allow_methods=["*"],
            allow_headers=["*"],
        )

    @app.exception_handler(ScenarioForgeError)
    async def _handle_engine_error(request: Request, exc: ScenarioForgeError):
        status = STATUS_BY_CODE.get(exc.code, 500)
        return JSONResponse(status_code=status, content=_error_payload(exc))

    @app.post("/sessions", status_code=201)
    def handle_create(body: dict):
        topic = (body.get("topic") or "").strip()
        provider = _provider_config(config, body)
        constraints = GenerationConstraints(**body["constraints"]) if body.get("constraints") else None
        session = session_engine.create_session(
            topic,
            provider,
            constraints=constraints,
            retry_budget=int(body.get("retry_budget", 2)),
            renumber=bool(body.get("renumber", False)),
        )
        store_mod.save_session(registry.store, session)
        registry.put(session)
        return {"session_id": session.session_id, "state": session.state.value}

    @app.get("/sessions")
    def handle_list():
        return {"sessions": [vars(item) for item in store_mod.list_sessions(registry.store)]}

    @app.get("/sessions/{session_id}")
    def handle_get(session_id: str):
        return _session_view(registry.get(session_id), include_proposals=True)

    @app.post("/sessions/{session_id}/actions")
    def handle_action(session_id: str, body: dict):
        action_name = body.get("action") or ""
        if action_name not in ACTIONS:
            raise session_engine.IllegalTransition(f"unknown action {action_name!r}")
        action = ACTIONS[action_name](body)
        with registry.lock_for(session_id):
            session = registry.get(session_id)
            try:
                session_engine.advance(session, action)
            finally:
                # Failed transitions still changed the error log (and possibly
                # the transcript); persist whatever the engine left behind.
                store_mod.save_session(registry.store, session)
        response: dict[str, Any] = {"state": session.state.value}
        phase = session.current_phase()
        proposal = session.proposals.get(phase)
        if proposal is not None and session.state in (
            SessionState.GENERAL_PROPOSED, SessionState.PROGRESSION_PROPOSED
        ):
            response["proposal"] = proposal.value
            response["repair_report"] = proposal.repair_report.to_dict()
            response["validation_report"] = proposal.validation_report.to_dict()
        return response

    @app.get("/sessions/{session_id}/scenario")
    def handle_scenario(session_id: str):
        session = registry.get(session_id)
        scenario = _scenario_for(session)
        return Response(
            content=scenario_domain.canonical_serialize(scenario),
            media_type="application/json",
        )

    @app.get("/sessions/{session_id}/render")
    def handle_render(session_id: str, format: str = "markdown"):
        session = registry.get(session_id)
        scenario = session_engine.scenario_of(session)
        options = RenderOptions(format=format)
        text = render_export.render(scenario, options)
        media = "text/html" if format == "html" else "text/markdown"
        return Response(content=text, media_type=f"{media}; charset=utf-8")

    @app.get("/sessions/{session_id}/export")
    def handle_export(session_id: str):
        session = registry.get(session_id)
        scenario = session_engine.scenario_of(session)
        document = render_export.export_manikin(scenario)
        return Response(
            content=document.data,
            media_type="application/xml",
            headers={
                "Content-Disposition": f'attachment; filename="{session.session_id}.manikin.xml"'
            },
        )

    return app


def _scenario_for(session: Session) -> scenario_domain.Scenario:
    """Scenario artifact: full once Complete, general-only once approved."""
    if session.state == SessionState.COMPLETE and session.scenario is not None:
        return session.scenario
    if session.approved_general is not None:
        return scenario_domain.Scenario(general=session.approved_general, phases=session.approved_phases or [])
    raise session_engine.NotComplete(
        f"scenario is not available in state {session.state.value}"
    )


def serve(config: ServiceConfig) -> None:
    import uvicorn

    uvicorn.run(create_app(config), host=config.listen_host, port=config.listen_port)
