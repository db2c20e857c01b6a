from __future__ import annotations

from pathlib import Path

import pytest

from scenarioforge import llm_gateway, session_engine
from scenarioforge.schema_model import AnnotatedSchema, load_builtin_template, parse_schema

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"

# Tier-1 sentences as recorded in the original conversation transcripts.
RECORDED_GENERAL_TIER1 = (
    "Adhering strictly to the following schema, fill in the values to create a complete "
    "medical simulation. Output should be the JSON object without any schema elements. "
    "The simulation will be about a myocardial infarction:"
)
RECORDED_PROGRESSION_TIER1 = (
    "Based on the general information context established above, fill in the values to "
    "create a complete medical simulation. Provide at least 3 to 5 scenario progression "
    "steps. Scenario progression should have a clear beginning, middle and end. Beginning "
    "should be initial assessment. Output should be the JSON object without any schema "
    "elements. The simulation will be about a myocardial infarction:"
)


def fixture_text(name: str) -> str:
    return (FIXTURES / name).read_text("utf-8")


@pytest.fixture(scope="session")
def general_template() -> AnnotatedSchema:
    return load_builtin_template("general_info")


@pytest.fixture(scope="session")
def progression_template() -> AnnotatedSchema:
    return load_builtin_template("progression")


@pytest.fixture(scope="session")
def recorded_general_schema() -> AnnotatedSchema:
    """The worked-example general template (PascalCase, five fields)."""
    return parse_schema(fixture_text("methods_general_schema.json"), "methods_general")


@pytest.fixture(scope="session")
def recorded_reduced_general_schema() -> AnnotatedSchema:
    """The reduced lowercase general template from the recorded session."""
    return parse_schema(fixture_text("appendix_b_general_schema.json"), "reduced_general")


@pytest.fixture(scope="session")
def recorded_progression_schema() -> AnnotatedSchema:
    """The reduced progression template (steps / stepnumber / vitals)."""
    return parse_schema(fixture_text("appendix_b_progression_schema.json"), "reduced_progression")


@pytest.fixture
def response1_raw() -> str:
    return fixture_text("appendix_b_response1.txt")


@pytest.fixture
def response2_raw() -> str:
    return fixture_text("appendix_b_response2.txt")


@pytest.fixture
def methods_raw() -> str:
    return fixture_text("methods_mi_response.txt")


def scripted_config(script: str = "appendix_b_script.json") -> llm_gateway.ProviderConfig:
    return llm_gateway.ProviderConfig(kind="scripted", script_path=str(FIXTURES / script))


def make_session(script: str = "appendix_b_script.json", **kwargs) -> session_engine.Session:
    return session_engine.create_session("myocardial infarction", scripted_config(script), **kwargs)


def complete_session(**kwargs) -> session_engine.Session:
    session = make_session(**kwargs)
    for action in (
        session_engine.GenerateGeneral(),
        session_engine.ApproveGeneral(),
        session_engine.GenerateProgression(),
        session_engine.ApproveProgression(),
    ):
        session_engine.advance(session, action)
    return session


@pytest.fixture
def appendix_session() -> session_engine.Session:
    return complete_session()
