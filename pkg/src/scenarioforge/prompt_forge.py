"""Two-tier prompt assembly.

Tier 1 is a fixed instruction sentence; tier 2 is the serialized template
whose description texts steer the model at specific points. The tier-1
sentences are frozen verbatim (including the slightly awkward "about a
{topic}" phrasing) so recorded conversations replay byte-for-byte.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import ScenarioForgeError
from .schema_model import AnnotatedSchema, serialize_schema

GENERAL = "general"
PROGRESSION = "progression"
REFINEMENT = "refinement"

GENERAL_TIER1 = (
    "Adhering strictly to the following schema, fill in the values to create a complete "
    "medical simulation. Output should be the JSON object without any schema elements. "
    "The simulation will be about a {topic}:"
)
PROGRESSION_TIER1 = (
    "Based on the general information context established above, fill in the values to "
    "create a complete medical simulation. Provide at least {min_steps} to {max_steps} "
    "scenario progression steps. Scenario progression should have a clear beginning, "
    "middle and end. Beginning should be initial assessment. Output should be the JSON "
    "object without any schema elements. The simulation will be about a {topic}:"
)
REFINEMENT_SUFFIX = " Return the full corrected JSON object."


class EmptyTopic(ScenarioForgeError):
    pass


class EmptyInstruction(ScenarioForgeError):
    pass


class BadConstraints(ScenarioForgeError):
    pass


@dataclass(frozen=True)
class GenerationConstraints:
    min_steps: int = 3
    max_steps: int = 6
    require_arc: bool = True

    def validate(self) -> None:
        if not 1 <= self.min_steps <= self.max_steps:
            raise BadConstraints(f"need 1 <= min_steps <= max_steps, got {self.min_steps}..{self.max_steps}")

    def to_dict(self) -> dict:
        return {"min_steps": self.min_steps, "max_steps": self.max_steps, "require_arc": self.require_arc}

    @classmethod
    def from_dict(cls, data: dict) -> "GenerationConstraints":
        return cls(**data)


@dataclass(frozen=True)
class PromptPackage:
    phase: str  # general | progression | refinement
    tier1: str
    schema_text: str | None = None

    @property
    def full_text(self) -> str:
        if self.schema_text is None:
            return self.tier1
        return f"{self.tier1}\n{self.schema_text}"

    @property
    def estimated_tokens(self) -> int:
        return estimate_tokens(self.full_text)


def estimate_tokens(text: str) -> int:
    """Heuristic upper-bound guide (not a tokenizer): ceil(UTF-8 bytes / 4)."""
    return math.ceil(len(text.encode("utf-8")) / 4)


def build_general_prompt(topic: str, schema: AnnotatedSchema) -> PromptPackage:
    if not topic.strip():
        raise EmptyTopic("topic must not be empty")
    return PromptPackage(
        phase=GENERAL,
        tier1=GENERAL_TIER1.format(topic=topic),
        schema_text=serialize_schema(schema),
    )


def build_progression_prompt(
    topic: str, schema: AnnotatedSchema, constraints: GenerationConstraints | None = None
) -> PromptPackage:
    if not topic.strip():
        raise EmptyTopic("topic must not be empty")
    constraints = constraints or GenerationConstraints()
    constraints.validate()
    return PromptPackage(
        phase=PROGRESSION,
        tier1=PROGRESSION_TIER1.format(
            min_steps=constraints.min_steps, max_steps=constraints.max_steps, topic=topic
        ),
        schema_text=serialize_schema(schema),
    )


def build_refinement_prompt(instruction: str) -> PromptPackage:
    if not instruction.strip():
        raise EmptyInstruction("instruction must not be empty")
    return PromptPackage(phase=REFINEMENT, tier1=instruction + REFINEMENT_SUFFIX)
