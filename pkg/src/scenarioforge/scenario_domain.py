"""Typed scenario model: binding, plausibility lint, canonical serialization.

A Scenario is the approved artifact of a session: general information plus
an ordered list of progression phases. Binding accepts both value shapes
seen in practice — the full template layout (Phase/Id/Title/Vitals/...)
and the reduced layout (steps/stepnumber/patientstatus with an HR/BP/SpO2
vitals subset). Values are kept verbatim: temperature stays text with its
unit, an unparseable GCS readout is preserved in ``other`` rather than
silently dropped.

The canonical file format is byte-stable UTF-8 JSON (fixed key order,
2-space indent, LF), extension ``.scenario.json``, ``format_version``
first.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from typing import Any

from .errors import ScenarioForgeError

FORMAT_VERSION = "1"

ERROR = "error"
WARNING = "warning"

_BP_RE = re.compile(r"\d+\s*/\s*\d+")
_GCS_RE = re.compile(
    r"E:?\s*(\d+)\s*(?:\(([^)]*)\))?\s*,?\s*"
    r"V:?\s*(\d+)\s*(?:\(([^)]*)\))?\s*,?\s*"
    r"M:?\s*(\d+)\s*(?:\(([^)]*)\))?",
    re.IGNORECASE,
)


class BindFailure(ScenarioForgeError):
    pass


class DuplicatePhaseId(ScenarioForgeError):
    pass


class NonMonotonicIds(ScenarioForgeError):
    pass


class ParseFailure(ScenarioForgeError):
    pass


class VersionUnsupported(ScenarioForgeError):
    pass


@dataclass
class LabTest:
    test: str
    result: str = ""
    normal_range: str = ""


@dataclass
class GcsScore:
    eye: int | None = None
    verbal: int | None = None
    motor: int | None = None
    eye_note: str | None = None
    verbal_note: str | None = None
    motor_note: str | None = None


@dataclass
class Vitals:
    bp: str | None = None
    hr: int | None = None
    rr: int | None = None
    spo2: int | None = None
    temp: str | None = None
    rhythm: str | None = None
    gcs: GcsScore | None = None
    other: str | None = None


@dataclass
class StateModifier:
    modifier: str
    result: str = ""


@dataclass
class TransitionTrigger:
    trigger: str
    result: str = ""


@dataclass
class Phase:
    id: int
    title: str = ""
    patient_status: str | None = None
    vitals: Vitals = field(default_factory=Vitals)
    state_modifiers: list[StateModifier] = field(default_factory=list)
    learner_actions: list[str] = field(default_factory=list)
    transition_triggers: list[TransitionTrigger] = field(default_factory=list)


@dataclass
class GeneralInfo:
    author: str = ""
    facility: str = ""
    scenario_title: str = ""
    scenario_description: str = ""
    simulation_objective: str = ""
    target_audience: str = ""
    case_summary: str = ""
    learning_objectives: list[str] = field(default_factory=list)
    equipment_props: list[str] = field(default_factory=list)
    environment: str = ""
    case_presentation: str = ""
    debriefing_points: list[str] = field(default_factory=list)
    lab_results: list[LabTest] = field(default_factory=list)
    extras: dict[str, str] = field(default_factory=dict)


@dataclass
class Scenario:
    general: GeneralInfo
    phases: list[Phase] = field(default_factory=list)
    format_version: str = FORMAT_VERSION


@dataclass(frozen=True)
class LintFinding:
    path: str
    severity: str  # error | warning
    code: str
    message: str


# ---------------------------------------------------------------------------
# binding helpers

def _ci_get(value: dict, *names: str) -> Any:
    """Case-insensitive lookup trying each candidate name in turn."""
    folded = {str(k).casefold(): k for k in value}
    for name in names:
        key = folded.get(name.casefold())
        if key is not None:
            return value[key]
    return None


def _dig(value: Any, *names: str) -> Any:
    """Descend through optional wrapper levels, tolerating their absence."""
    cur = value
    for name in names:
        if isinstance(cur, dict):
            nxt = _ci_get(cur, name)
            if nxt is not None:
                cur = nxt
    return cur


def _text(value: Any, path: str) -> str:
    if value is None:
        return ""
    if not isinstance(value, str):
        raise BindFailure(f"{path}: expected text, got {type(value).__name__}")
    return value


def _text_list(value: Any, wrapper_key: str | None, path: str) -> list[str]:
    if value is None:
        return []
    if isinstance(value, dict) and wrapper_key is not None:
        value = _ci_get(value, wrapper_key)
        if value is None:
            return []
    if not isinstance(value, list):
        raise BindFailure(f"{path}: expected a list")
    out = []
    for i, item in enumerate(value):
        if not isinstance(item, str):
            raise BindFailure(f"{path}[{i}]: expected text, got {type(item).__name__}")
        if item.strip():
            out.append(item)
    return out


def _whole(value: Any, path: str) -> int:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise BindFailure(f"{path}: expected a whole number, got {type(value).__name__}")
    if isinstance(value, float):
        if not value.is_integer():
            raise BindFailure(f"{path}: expected a whole number, got {value}")
        value = int(value)
    return value


def bind_general_info(value: Any) -> GeneralInfo:
    """Map a recovered value onto GeneralInfo; unrecognized siblings land in extras."""
    content = _dig(value, "Scenario", "GeneralInfo")
    if content is None:
        content = {}
    if not isinstance(content, dict):
        raise BindFailure("GeneralInfo: expected an object")

    recognized = {
        "author", "facility", "scenariotitle", "scenariodescription", "simulationobjective",
        "targetaudience", "casesummary", "learningobjectives", "equipmentprops",
        "environment", "casepresentation", "debriefingpoints", "labresults",
    }
    info = GeneralInfo(
        author=_text(_ci_get(content, "Author"), "Author"),
        facility=_text(_ci_get(content, "Facility"), "Facility"),
        scenario_title=_text(_ci_get(content, "ScenarioTitle"), "ScenarioTitle"),
        scenario_description=_text(_ci_get(content, "ScenarioDescription"), "ScenarioDescription"),
        simulation_objective=_text(_ci_get(content, "SimulationObjective"), "SimulationObjective"),
        target_audience=_text(_ci_get(content, "TargetAudience"), "TargetAudience"),
        case_summary=_text(_ci_get(content, "CaseSummary"), "CaseSummary"),
        learning_objectives=_text_list(_ci_get(content, "LearningObjectives"), "Objective", "LearningObjectives"),
        equipment_props=_text_list(_ci_get(content, "EquipmentProps"), "Equipment", "EquipmentProps"),
        environment=_text(_ci_get(content, "Environment"), "Environment"),
        case_presentation=_text(_ci_get(content, "CasePresentation"), "CasePresentation"),
        debriefing_points=_text_list(_ci_get(content, "DebriefingPoints"), "Point", "DebriefingPoints"),
        lab_results=_bind_lab_results(_ci_get(content, "LabResults")),
    )
    for key, val in content.items():
        if str(key).casefold() in recognized:
            continue
        info.extras[str(key)] = val if isinstance(val, str) else json.dumps(val, ensure_ascii=False)
    return info


def _bind_lab_results(value: Any) -> list[LabTest]:
    if value is None:
        return []
    if isinstance(value, dict):
        value = _ci_get(value, "Test") or []
    if not isinstance(value, list):
        raise BindFailure("LabResults: expected a list of tests")
    tests = []
    for i, item in enumerate(value):
        if not isinstance(item, dict):
            raise BindFailure(f"LabResults/Test[{i}]: expected an object")
        name = _text(_ci_get(item, "Test", "Name"), f"LabResults/Test[{i}]/Test")
        if not name.strip():
            continue
        tests.append(
            LabTest(
                test=name,
                result=_text(_ci_get(item, "Result", "Results"), f"LabResults/Test[{i}]/Result"),
                normal_range=_text(_ci_get(item, "NormalRange", "Normal"), f"LabResults/Test[{i}]/NormalRange"),
            )
        )
    return tests


def parse_gcs(text: str) -> GcsScore | None:
    """Parse readouts like ``E: 4 (Opens eyes...) V: 4 (...) M: 6 (...)``.

    Returns None when the text does not carry one full in-range E/V/M set;
    callers keep the original text in ``other`` in that case.
    """
    match = _GCS_RE.search(text)
    if not match:
        return None
    eye, verbal, motor = int(match.group(1)), int(match.group(3)), int(match.group(5))
    if not (1 <= eye <= 4 and 1 <= verbal <= 5 and 1 <= motor <= 6):
        return None

    def note(group: str | None) -> str | None:
        return group.strip() if group and group.strip() else None

    return GcsScore(
        eye=eye, verbal=verbal, motor=motor,
        eye_note=note(match.group(2)), verbal_note=note(match.group(4)), motor_note=note(match.group(6)),
    )


def _bind_vitals(value: Any, path: str) -> Vitals:
    if value is None:
        return Vitals()
    if not isinstance(value, dict):
        raise BindFailure(f"{path}: expected an object")
    vitals = Vitals()
    bp = _ci_get(value, "BP")
    if bp is not None:
        vitals.bp = _text(bp, f"{path}/BP")
    for attr, key in (("hr", "HR"), ("rr", "RR"), ("spo2", "SpO2")):
        raw = _ci_get(value, key)
        if raw is not None:
            setattr(vitals, attr, _whole(raw, f"{path}/{key}"))
    temp = _ci_get(value, "Temp", "Temperature")
    if temp is not None:
        vitals.temp = temp if isinstance(temp, str) else json.dumps(temp)
    rhythm = _ci_get(value, "Rhythm")
    if rhythm is not None:
        vitals.rhythm = _text(rhythm, f"{path}/Rhythm")
    other = _ci_get(value, "Other")
    if other is not None:
        vitals.other = _text(other, f"{path}/Other")
    gcs = _ci_get(value, "GCS")
    if gcs is not None:
        gcs_text = _text(gcs, f"{path}/GCS")
        parsed = parse_gcs(gcs_text)
        if parsed is not None:
            vitals.gcs = parsed
        elif gcs_text.strip():
            vitals.other = f"{vitals.other}; GCS: {gcs_text}" if vitals.other else f"GCS: {gcs_text}"
    return vitals


def _bind_pairs(value: Any, wrapper_key: str, first: str, second: str, path: str) -> list[tuple[str, str]]:
    if value is None:
        return []
    if isinstance(value, dict):
        value = _ci_get(value, wrapper_key) or []
    if not isinstance(value, list):
        raise BindFailure(f"{path}: expected a list")
    pairs = []
    for i, item in enumerate(value):
        if isinstance(item, str):
            if item.strip():
                pairs.append((item, ""))
            continue
        if not isinstance(item, dict):
            raise BindFailure(f"{path}[{i}]: expected an object")
        head = _text(_ci_get(item, first), f"{path}[{i}]/{first}")
        tail = _text(_ci_get(item, second), f"{path}[{i}]/{second}")
        if head.strip() or tail.strip():
            pairs.append((head, tail))
    return pairs


def bind_progression(value: Any, renumber: bool = False) -> list[Phase]:
    """Bind either the full template shape or the reduced steps shape.

    Ids must be unique and strictly increasing; with ``renumber`` set,
    non-monotonic ids are rewritten 1..n instead of rejected.
    """
    content = _dig(value, "Scenario", "ScenarioProgression")
    steps = None
    if isinstance(content, dict):
        steps = _ci_get(content, "Phase", "Phases", "Steps", "Step")
    elif isinstance(content, list):
        steps = content
    if steps is None:
        steps = []
    if not isinstance(steps, list):
        raise BindFailure("ScenarioProgression: expected a list of phases")

    phases: list[Phase] = []
    for i, raw in enumerate(steps):
        path = f"Phase[{i}]"
        if not isinstance(raw, dict):
            raise BindFailure(f"{path}: expected an object")
        raw_id = _ci_get(raw, "Id", "StepNumber")
        if raw_id is None:
            raise BindFailure(f"{path}: missing Id")
        phase_id = _whole(raw_id, f"{path}/Id")
        if phase_id < 1:
            raise BindFailure(f"{path}: phase id must be >= 1, got {phase_id}")
        status = _ci_get(raw, "PatientStatus")
        phases.append(
            Phase(
                id=phase_id,
                title=_text(_ci_get(raw, "Title"), f"{path}/Title"),
                patient_status=_text(status, f"{path}/PatientStatus") if status is not None else None,
                vitals=_bind_vitals(_ci_get(raw, "Vitals"), f"{path}/Vitals"),
                state_modifiers=[
                    StateModifier(m, r)
                    for m, r in _bind_pairs(_ci_get(raw, "StateModifiers"), "Modifier", "Modifier", "Result", f"{path}/StateModifiers")
                ],
                learner_actions=_text_list(_ci_get(raw, "LearnerActions"), "Action", f"{path}/LearnerActions"),
                transition_triggers=[
                    TransitionTrigger(t, r)
                    for t, r in _bind_pairs(_ci_get(raw, "TransitionTriggers"), "Trigger", "Trigger", "Result", f"{path}/TransitionTriggers")
                ],
            )
        )

    ids = [p.id for p in phases]
    if len(set(ids)) != len(ids):
        raise DuplicatePhaseId(f"duplicate phase ids: {sorted(i for i in ids if ids.count(i) > 1)}")
    if any(b <= a for a, b in zip(ids, ids[1:])):
        if not renumber:
            raise NonMonotonicIds(f"phase ids not strictly increasing: {ids}")
        for n, phase in enumerate(phases, start=1):
            phase.id = n
    return phases


# ---------------------------------------------------------------------------
# plausibility lint

def lint_scenario(scenario: Scenario) -> list[LintFinding]:
    """Mechanical aid to the human review; warn-only except impossible SpO2."""
    findings: list[LintFinding] = []
    if len(scenario.phases) < 3:
        findings.append(
            LintFinding(
                "phases", WARNING, "missing_arc",
                f"only {len(scenario.phases)} phases; a clear beginning, middle and end needs at least 3",
            )
        )
    last = len(scenario.phases) - 1
    for i, phase in enumerate(scenario.phases):
        base = f"phases[{i}]"
        v = phase.vitals
        if v.spo2 is not None and v.spo2 > 100:
            findings.append(
                LintFinding(f"{base}/vitals/spo2", ERROR, "spo2_impossible", f"SpO2 {v.spo2}% is impossible (>100)")
            )
        if v.hr is not None and v.hr > 300:
            findings.append(
                LintFinding(f"{base}/vitals/hr", WARNING, "hr_implausible", f"HR {v.hr} bpm is implausible (>300)")
            )
        if v.bp is not None and not _BP_RE.search(v.bp):
            findings.append(
                LintFinding(f"{base}/vitals/bp", WARNING, "bp_unparseable", f"BP {v.bp!r} does not look like systolic/diastolic")
            )
        if i != last:
            if not phase.learner_actions:
                findings.append(
                    LintFinding(base, WARNING, "no_learner_actions", f"phase {phase.id} has no learner actions")
                )
            if not phase.transition_triggers:
                findings.append(
                    LintFinding(base, WARNING, "no_transition_triggers", f"phase {phase.id} has no transition triggers")
                )
    return findings


# ---------------------------------------------------------------------------
# canonical serialization

def _gcs_to_dict(gcs: GcsScore) -> dict:
    out: dict[str, Any] = {}
    for key in ("eye", "verbal", "motor", "eye_note", "verbal_note", "motor_note"):
        val = getattr(gcs, key)
        if val is not None:
            out[key] = val
    return out


def _vitals_to_dict(vitals: Vitals) -> dict:
    out: dict[str, Any] = {}
    for key in ("bp", "hr", "rr", "spo2", "temp", "rhythm"):
        val = getattr(vitals, key)
        if val is not None:
            out[key] = val
    if vitals.gcs is not None:
        out["gcs"] = _gcs_to_dict(vitals.gcs)
    if vitals.other is not None:
        out["other"] = vitals.other
    return out


def phase_to_dict(phase: Phase) -> dict:
    out: dict[str, Any] = {"id": phase.id, "title": phase.title}
    if phase.patient_status is not None:
        out["patient_status"] = phase.patient_status
    out["vitals"] = _vitals_to_dict(phase.vitals)
    out["state_modifiers"] = [{"modifier": m.modifier, "result": m.result} for m in phase.state_modifiers]
    out["learner_actions"] = list(phase.learner_actions)
    out["transition_triggers"] = [{"trigger": t.trigger, "result": t.result} for t in phase.transition_triggers]
    return out


def general_to_dict(general: GeneralInfo) -> dict:
    return {
        "author": general.author,
        "facility": general.facility,
        "scenario_title": general.scenario_title,
        "scenario_description": general.scenario_description,
        "simulation_objective": general.simulation_objective,
        "target_audience": general.target_audience,
        "case_summary": general.case_summary,
        "learning_objectives": list(general.learning_objectives),
        "equipment_props": list(general.equipment_props),
        "environment": general.environment,
        "case_presentation": general.case_presentation,
        "debriefing_points": list(general.debriefing_points),
        "lab_results": [
            {"test": t.test, "result": t.result, "normal_range": t.normal_range}
            for t in general.lab_results
        ],
        "extras": dict(general.extras),
    }


def canonical_serialize(scenario: Scenario) -> str:
    doc = {
        "format_version": scenario.format_version,
        "general": general_to_dict(scenario.general),
        "phases": [phase_to_dict(p) for p in scenario.phases],
    }
    return json.dumps(doc, indent=2, ensure_ascii=False) + "\n"


def general_from_dict(data: dict) -> GeneralInfo:
    try:
        return GeneralInfo(
            author=data.get("author", ""),
            facility=data.get("facility", ""),
            scenario_title=data.get("scenario_title", ""),
            scenario_description=data.get("scenario_description", ""),
            simulation_objective=data.get("simulation_objective", ""),
            target_audience=data.get("target_audience", ""),
            case_summary=data.get("case_summary", ""),
            learning_objectives=list(data.get("learning_objectives", [])),
            equipment_props=list(data.get("equipment_props", [])),
            environment=data.get("environment", ""),
            case_presentation=data.get("case_presentation", ""),
            debriefing_points=list(data.get("debriefing_points", [])),
            lab_results=[LabTest(**t) for t in data.get("lab_results", [])],
            extras=dict(data.get("extras", {})),
        )
    except TypeError as exc:
        raise ParseFailure(f"general: {exc}") from exc


def phase_from_dict(data: dict) -> Phase:
    try:
        vitals_data = dict(data.get("vitals", {}))
        gcs_data = vitals_data.pop("gcs", None)
        vitals = Vitals(**vitals_data)
        if gcs_data is not None:
            vitals.gcs = GcsScore(**gcs_data)
        return Phase(
            id=data["id"],
            title=data.get("title", ""),
            patient_status=data.get("patient_status"),
            vitals=vitals,
            state_modifiers=[StateModifier(**m) for m in data.get("state_modifiers", [])],
            learner_actions=list(data.get("learner_actions", [])),
            transition_triggers=[TransitionTrigger(**t) for t in data.get("transition_triggers", [])],
        )
    except (KeyError, TypeError) as exc:
        raise ParseFailure(f"phase: {exc}") from exc


def parse_scenario(text: str) -> Scenario:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseFailure(f"not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ParseFailure("scenario file must be a JSON object")
    version = doc.get("format_version")
    if version is None:
        raise ParseFailure("missing format_version")
    if version != FORMAT_VERSION:
        raise VersionUnsupported(f"format_version {version!r} is not supported")
    if not isinstance(doc.get("general"), dict) or not isinstance(doc.get("phases"), list):
        raise ParseFailure("scenario file needs 'general' object and 'phases' list")
    return Scenario(
        general=general_from_dict(doc["general"]),
        phases=[phase_from_dict(p) for p in doc["phases"]],
        format_version=version,
    )


def scenario_to_dict(scenario: Scenario) -> dict:
    return json.loads(canonical_serialize(scenario))


def scenario_from_dict(data: dict) -> Scenario:
    return parse_scenario(json.dumps(data))
