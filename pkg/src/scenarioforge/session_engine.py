"""The approve/refine workflow as an explicit state machine.

Flow: compile the phase prompt, send it, recover a structured proposal,
then the user approves or refines; after general information is approved
the progression phase runs in the same conversation. Recovery failures
trigger a bounded automatic re-prompt with a fixed correction instruction
before the session fails.

State changes are atomic: when an action raises, the session keeps its
prior state and proposals and only gains an error-log entry (the provider
transcript does record any sends that happened, including retries).
"""

from __future__ import annotations

import time
import uuid
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Union

from . import json_recovery, llm_gateway, prompt_forge, scenario_domain
from .errors import ScenarioForgeError
from .json_recovery import NoJsonFound, RepairReport, StillInvalid, Unrepairable
from .llm_gateway import Conversation, ProviderConfig
from .prompt_forge import GenerationConstraints, PromptPackage
from .scenario_domain import GeneralInfo, Phase, Scenario
from .schema_model import AnnotatedSchema, ValidationReport

CORRECTION_INSTRUCTION = (
    "Your previous output was not valid JSON conforming to the schema. "
    "Return only the corrected JSON object."
)

GENERAL = "general"
PROGRESSION = "progression"


class EmptyTopic(ScenarioForgeError):
    pass


class IllegalTransition(ScenarioForgeError):
    pass


class RetriesExhausted(ScenarioForgeError):
    pass


class NotComplete(ScenarioForgeError):
    pass


class ApprovalBlocked(ScenarioForgeError):
    pass


class SessionState(str, Enum):
    NEW = "New"
    GENERAL_PROPOSED = "GeneralProposed"
    GENERAL_APPROVED = "GeneralApproved"
    PROGRESSION_PROPOSED = "ProgressionProposed"
    COMPLETE = "Complete"
    FAILED = "Failed"


@dataclass(frozen=True)
class GenerateGeneral:
    pass


@dataclass(frozen=True)
class IngestRaw:
    text: str


@dataclass(frozen=True)
class Refine:
    instruction: str


@dataclass(frozen=True)
class ApproveGeneral:
    pass


@dataclass(frozen=True)
class GenerateProgression:
    pass


@dataclass(frozen=True)
class ApproveProgression:
    pass


Action = Union[GenerateGeneral, IngestRaw, Refine, ApproveGeneral, GenerateProgression, ApproveProgression]

ACTION_NAMES = {
    GenerateGeneral: "generate_general",
    IngestRaw: "ingest_raw",
    Refine: "refine",
    ApproveGeneral: "approve_general",
    GenerateProgression: "generate_progression",
    ApproveProgression: "approve_progression",
}

# The complete transition table; anything else is IllegalTransition.
TRANSITIONS: dict[tuple[SessionState, type], SessionState] = {
    (SessionState.NEW, GenerateGeneral): SessionState.GENERAL_PROPOSED,
    (SessionState.NEW, IngestRaw): SessionState.GENERAL_PROPOSED,
    (SessionState.GENERAL_PROPOSED, Refine): SessionState.GENERAL_PROPOSED,
    (SessionState.GENERAL_PROPOSED, ApproveGeneral): SessionState.GENERAL_APPROVED,
    (SessionState.GENERAL_APPROVED, GenerateProgression): SessionState.PROGRESSION_PROPOSED,
    (SessionState.GENERAL_APPROVED, IngestRaw): SessionState.PROGRESSION_PROPOSED,
    (SessionState.PROGRESSION_PROPOSED, Refine): SessionState.PROGRESSION_PROPOSED,
    (SessionState.PROGRESSION_PROPOSED, ApproveProgression): SessionState.COMPLETE,
}


@dataclass
class Proposal:
    value: Any
    repair_report: RepairReport
    validation_report: ValidationReport

    def to_dict(self) -> dict:
        return {
            "value": self.value,
            "repair_report": self.repair_report.to_dict(),
            "validation_report": self.validation_report.to_dict(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Proposal":
        return cls(
            value=data["value"],
            repair_report=RepairReport.from_dict(data["repair_report"]),
            validation_report=ValidationReport.from_dict(data["validation_report"]),
        )


@dataclass
class Session:
    """One workflow instance. Single-writer: serialize advance() calls."""

    session_id: str
    topic: str
    state: SessionState
    conversation: Conversation | None
    general_template: AnnotatedSchema
    progression_template: AnnotatedSchema
    constraints: GenerationConstraints = field(default_factory=GenerationConstraints)
    retry_budget: int = 2
    renumber: bool = False
    proposals: dict[str, Proposal] = field(default_factory=dict)
    approved_general: GeneralInfo | None = None
    approved_phases: list[Phase] | None = None
    scenario: Scenario | None = None
    error_log: list[str] = field(default_factory=list)
    created: float = field(default_factory=time.time)
    updated: float = field(default_factory=time.time)

    @property
    def provider_config(self) -> ProviderConfig | None:
        return self.conversation.config if self.conversation else None

    def transcript(self) -> llm_gateway.ChatTranscript:
        if self.conversation is None:
            return llm_gateway.ChatTranscript()
        return llm_gateway.transcript(self.conversation)

    def current_phase(self) -> str:
        return PROGRESSION if self.state in (
            SessionState.GENERAL_APPROVED, SessionState.PROGRESSION_PROPOSED, SessionState.COMPLETE
        ) else GENERAL


def create_session(
    topic: str,
    provider_config: ProviderConfig,
    templates: tuple[AnnotatedSchema, AnnotatedSchema] | None = None,
    constraints: GenerationConstraints | None = None,
    retry_budget: int = 2,
    renumber: bool = False,
) -> Session:
    """Open a conversation and start a session in the New state."""
    if not topic.strip():
        raise EmptyTopic("topic must not be empty")
    if templates is None:
        from .schema_model import load_builtin_template

        templates = (load_builtin_template("general_info"), load_builtin_template("progression"))
    constraints = constraints or GenerationConstraints()
    constraints.validate()
    conversation = llm_gateway.open_conversation(provider_config)
    return Session(
        session_id=uuid.uuid4().hex,
        topic=topic,
        state=SessionState.NEW,
        conversation=conversation,
        general_template=templates[0],
        progression_template=templates[1],
        constraints=constraints,
        retry_budget=retry_budget,
        renumber=renumber,
    )


def advance(session: Session, action: Action) -> Session:
    """Apply one action; returns the same (mutated) session on success.

    On failure the session's state and proposals are untouched and the
    error is re-raised after being appended to the error log.
    """
    key = (session.state, type(action))
    try:
        if key not in TRANSITIONS:
            raise IllegalTransition(
                f"action {ACTION_NAMES[type(action)]} is not valid in state {session.state.value}"
            )
        handler = _HANDLERS[type(action)]
        handler(session, action)
        session.updated = time.time()
        return session
    except ScenarioForgeError as exc:
        session.error_log.append(f"{ACTION_NAMES.get(type(action), '?')}: {exc.code}: {exc}")
        raise


def _template_for(session: Session, phase: str) -> AnnotatedSchema:
    return session.general_template if phase == GENERAL else session.progression_template


def _send_and_recover(session: Session, package: PromptPackage, phase: str) -> Proposal:
    """Send, recover, and re-prompt with the fixed correction up to retry_budget times."""
    schema = _template_for(session, phase)
    response = llm_gateway.send(session.conversation, package)
    attempts = 0
    while True:
        try:
            value, repair_report, validation_report = json_recovery.recover(response.text, schema)
            return Proposal(value, repair_report, validation_report)
        except (NoJsonFound, Unrepairable, StillInvalid) as exc:
            if attempts >= session.retry_budget:
                session.state = SessionState.FAILED
                raise RetriesExhausted(
                    f"recovery still failing after {attempts} correction re-prompts: {exc.code}"
                ) from exc
            attempts += 1
            correction = PromptPackage(phase=prompt_forge.REFINEMENT, tier1=CORRECTION_INSTRUCTION)
            response = llm_gateway.send(session.conversation, correction)


def _handle_generate_general(session: Session, action: GenerateGeneral) -> None:
    package = prompt_forge.build_general_prompt(session.topic, session.general_template)
    proposal = _send_and_recover(session, package, GENERAL)
    session.proposals[GENERAL] = proposal
    session.state = SessionState.GENERAL_PROPOSED


def _handle_ingest_raw(session: Session, action: IngestRaw) -> None:
    phase = GENERAL if session.state == SessionState.NEW else PROGRESSION
    schema = _template_for(session, phase)
    value, repair_report, validation_report = json_recovery.recover(action.text, schema)
    session.proposals[phase] = Proposal(value, repair_report, validation_report)
    session.state = (
        SessionState.GENERAL_PROPOSED if phase == GENERAL else SessionState.PROGRESSION_PROPOSED
    )


def _handle_refine(session: Session, action: Refine) -> None:
    package = prompt_forge.build_refinement_prompt(action.instruction)
    phase = GENERAL if session.state == SessionState.GENERAL_PROPOSED else PROGRESSION
    proposal = _send_and_recover(session, package, phase)
    session.proposals[phase] = proposal  # replaces the current proposal


def _handle_approve_general(session: Session, action: ApproveGeneral) -> None:
    proposal = session.proposals.get(GENERAL)
    if proposal is None:
        raise IllegalTransition("no general proposal to approve")
    session.approved_general = scenario_domain.bind_general_info(proposal.value)
    session.state = SessionState.GENERAL_APPROVED


def _handle_generate_progression(session: Session, action: GenerateProgression) -> None:
    package = prompt_forge.build_progression_prompt(
        session.topic, session.progression_template, session.constraints
    )
    proposal = _send_and_recover(session, package, PROGRESSION)
    session.proposals[PROGRESSION] = proposal
    session.state = SessionState.PROGRESSION_PROPOSED


def _handle_approve_progression(session: Session, action: ApproveProgression) -> None:
    proposal = session.proposals.get(PROGRESSION)
    if proposal is None:
        raise IllegalTransition("no progression proposal to approve")
    phases = scenario_domain.bind_progression(proposal.value, renumber=session.renumber)
    assert session.approved_general is not None
    scenario = Scenario(general=session.approved_general, phases=phases)
    blocking = [f for f in scenario_domain.lint_scenario(scenario) if f.severity == scenario_domain.ERROR]
    if blocking:
        raise ApprovalBlocked(
            "; ".join(f.message for f in blocking),
            findings=[vars(f) for f in blocking],
        )
    session.approved_phases = phases
    session.scenario = scenario
    session.state = SessionState.COMPLETE


_HANDLERS = {
    GenerateGeneral: _handle_generate_general,
    IngestRaw: _handle_ingest_raw,
    Refine: _handle_refine,
    ApproveGeneral: _handle_approve_general,
    GenerateProgression: _handle_generate_progression,
    ApproveProgression: _handle_approve_progression,
}


def scenario_of(session: Session) -> Scenario:
    """The assembled, linted scenario of a completed session."""
    if session.state != SessionState.COMPLETE or session.scenario is None:
        raise NotComplete(f"session is in state {session.state.value}, not Complete")
    return session.scenario
