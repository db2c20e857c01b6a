"""Schema-guided generation of medical simulation scenarios.

An annotated schema template plus a free-text topic drive a two-phase
conversation with a text-generation provider; imperfect model output is
recovered into structured scenario data through extraction, repair, and
validation; a human approves or refines each phase; approved scenarios
render to documents and export to a simulator-programming file.
"""

from .errors import ScenarioForgeError
from .json_recovery import RepairReport, recover
from .llm_gateway import ChatTranscript, ProviderConfig, open_conversation, send, transcript
from .prompt_forge import (
    GenerationConstraints,
    PromptPackage,
    build_general_prompt,
    build_progression_prompt,
    build_refinement_prompt,
    estimate_tokens,
)
from .render_export import ManikinDocument, RenderOptions, export_manikin, render
from .scenario_domain import (
    GeneralInfo,
    Phase,
    Scenario,
    Vitals,
    bind_general_info,
    bind_progression,
    canonical_serialize,
    lint_scenario,
    parse_scenario,
)
from .schema_model import (
    AnnotatedSchema,
    SchemaNode,
    ValidationReport,
    lint_schema,
    load_builtin_template,
    node_at,
    parse_schema,
    validate_instance,
)
from .session_engine import (
    ApproveGeneral,
    ApproveProgression,
    GenerateGeneral,
    GenerateProgression,
    IngestRaw,
    Refine,
    Session,
    SessionState,
    advance,
    create_session,
    scenario_of,
)
from .store import StoreRoot, list_sessions, load_session, open_store, save_session

__version__ = "0.1.0"

__all__ = [
    "AnnotatedSchema", "ApproveGeneral", "ApproveProgression", "ChatTranscript",
    "GeneralInfo", "GenerateGeneral", "GenerateProgression", "GenerationConstraints",
    "IngestRaw", "ManikinDocument", "Phase", "PromptPackage", "ProviderConfig",
    "Refine", "RenderOptions", "RepairReport", "Scenario", "ScenarioForgeError",
    "SchemaNode", "Session", "SessionState", "StoreRoot", "ValidationReport", "Vitals",
    "advance", "bind_general_info", "bind_progression", "build_general_prompt",
    "build_progression_prompt", "build_refinement_prompt", "canonical_serialize",
    "create_session", "estimate_tokens", "export_manikin", "lint_scenario",
    "lint_schema", "list_sessions", "load_builtin_template", "load_session",
    "node_at", "open_conversation", "open_store", "parse_scenario", "parse_schema",
    "recover", "render", "save_session", "scenario_of", "send", "transcript",
    "validate_instance",
]
