from __future__ import annotations

import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from scenarioforge.json_recovery import recover
from scenarioforge.scenario_domain import (
    DuplicatePhaseId,
    GcsScore,
    GeneralInfo,
    LabTest,
    NonMonotonicIds,
    ParseFailure,
    Phase,
    Scenario,
    StateModifier,
    TransitionTrigger,
    VersionUnsupported,
    Vitals,
    bind_general_info,
    bind_progression,
    canonical_serialize,
    lint_scenario,
    parse_gcs,
    parse_scenario,
)


class TestBindGeneralInfo:
    def test_recorded_session_response(self, general_template, response1_raw):
        value, _, _ = recover(response1_raw, general_template)
        info = bind_general_info(value)
        assert info.scenario_title == "Acute myocardial infarction management"
        assert len(info.debriefing_points) == 4
        assert len(info.learning_objectives) == 4

    def test_methods_output_after_relocation(self, general_template, methods_raw):
        value, _, _ = recover(methods_raw, general_template)
        info = bind_general_info(value)
        assert len(info.debriefing_points) == 3
        assert len(info.learning_objectives) == 3
        assert "HR 110 bpm, BP 160/100 mmHg" in info.case_presentation

    def test_empty_object(self):
        info = bind_general_info({})
        assert info == GeneralInfo()

    def test_extras_capture_unrecognized_fields(self):
        value = {
            "Scenario": {
                "GeneralInfo": {
                    "ScenarioTitle": "T",
                    "SimulatorPlatform": "SP or Manikin",
                    "ScenarioDuration": "30 minutes",
                }
            }
        }
        info = bind_general_info(value)
        assert info.extras == {"SimulatorPlatform": "SP or Manikin", "ScenarioDuration": "30 minutes"}

    def test_lab_results(self):
        value = {
            "Scenario": {
                "GeneralInfo": {
                    "LabResults": {
                        "Test": [
                            {"Test": "CT Head Scan", "Result": "No acute findings", "NormalRange": "Normal"}
                        ]
                    }
                }
            }
        }
        info = bind_general_info(value)
        assert info.lab_results == [LabTest("CT Head Scan", "No acute findings", "Normal")]


class TestBindProgression:
    def test_recorded_six_step_response(self, progression_template, response2_raw):
        value, _, _ = recover(response2_raw, progression_template)
        phases = bind_progression(value)
        assert [p.vitals.hr for p in phases] == [110, 120, 0, 90, 80, 70]
        assert len(phases) == 6

    def test_cardiac_arrest_phase(self, progression_template, response2_raw):
        value, _, _ = recover(response2_raw, progression_template)
        phases = bind_progression(value)
        arrest = phases[2]
        assert arrest.vitals.bp == "0/0"
        assert arrest.vitals.spo2 == 85
        assert arrest.vitals.rr is None  # absent stays absent, not zero

    def test_duplicate_ids(self):
        value = {"Scenario": {"ScenarioProgression": {"steps": [
            {"stepnumber": 1}, {"stepnumber": 1},
        ]}}}
        with pytest.raises(DuplicatePhaseId):
            bind_progression(value)

    def test_non_monotonic_ids_rejected_by_default(self):
        value = {"Scenario": {"ScenarioProgression": {"steps": [
            {"stepnumber": 2}, {"stepnumber": 1},
        ]}}}
        with pytest.raises(NonMonotonicIds):
            bind_progression(value)

    def test_non_monotonic_ids_renumbered_on_request(self):
        value = {"Scenario": {"ScenarioProgression": {"steps": [
            {"stepnumber": 2}, {"stepnumber": 1},
        ]}}}
        phases = bind_progression(value, renumber=True)
        assert [p.id for p in phases] == [1, 2]

    def test_full_template_shape(self):
        value = {"Scenario": {"ScenarioProgression": {"Phase": [
            {
                "Id": 1,
                "Title": "Initial Assessment",
                "Vitals": {"BP": "130/80", "HR": 90, "RR": 18, "SpO2": 95, "Temp": "37°C",
                           "Rhythm": "SINUS", "GCS": "E: 4 (Opens eyes in response to voice) V: 4 (Confused) M: 6 (Obeys commands)",
                           "Other": "Patient appears dazed."},
                "StateModifiers": {"Modifier": [{"Modifier": "Administered oxygen", "Result": "SpO2 increased to 98%"}]},
                "LearnerActions": {"Action": ["Perform initial patient assessment"]},
                "TransitionTriggers": [{"Trigger": "Completion of initial assessment", "Result": "Transition to Phase 2"}],
            }
        ]}}}
        phases = bind_progression(value)
        phase = phases[0]
        assert phase.title == "Initial Assessment"
        assert phase.vitals.gcs == GcsScore(4, 4, 6, "Opens eyes in response to voice", "Confused", "Obeys commands")
        assert phase.state_modifiers == [StateModifier("Administered oxygen", "SpO2 increased to 98%")]
        assert phase.learner_actions == ["Perform initial patient assessment"]
        assert phase.transition_triggers == [TransitionTrigger("Completion of initial assessment", "Transition to Phase 2")]

    def test_order_and_count_preserved(self, progression_template, response2_raw):
        value, _, _ = recover(response2_raw, progression_template)
        steps = value["Scenario"]["ScenarioProgression"]["steps"]
        phases = bind_progression(value)
        assert len(phases) == len(steps)
        assert [p.id for p in phases] == [s["stepnumber"] for s in steps]


class TestParseGcs:
    def test_full_readout(self):
        gcs = parse_gcs("E: 4 (Opens eyes in response to voice) V: 4 (Confused) M: 6 (Obeys commands)")
        assert gcs == GcsScore(4, 4, 6, "Opens eyes in response to voice", "Confused", "Obeys commands")

    def test_without_notes(self):
        assert parse_gcs("E: 3 V: 2 M: 5") == GcsScore(3, 2, 5)

    def test_out_of_range_is_unparseable(self):
        assert parse_gcs("E: 9 V: 4 M: 6") is None

    def test_prose_is_unparseable(self):
        assert parse_gcs("alert and oriented") is None


class TestLintScenario:
    def _scenario(self, phases):
        return Scenario(general=GeneralInfo(scenario_title="T"), phases=phases)

    def test_recorded_scenario_has_no_arc_warning(self, appendix_session):
        findings = lint_scenario(appendix_session.scenario)
        assert not [f for f in findings if f.code == "missing_arc"]

    def test_two_phases_warn_about_arc(self):
        scenario = self._scenario([Phase(id=1), Phase(id=2)])
        arc = [f for f in lint_scenario(scenario) if f.code == "missing_arc"]
        assert len(arc) == 1
        assert "3" in arc[0].message

    def test_implausible_hr(self):
        scenario = self._scenario([Phase(id=1, vitals=Vitals(hr=500))])
        findings = lint_scenario(scenario)
        assert any(f.code == "hr_implausible" and f.severity == "warning" for f in findings)

    def test_impossible_spo2_is_error(self):
        scenario = self._scenario([Phase(id=1, vitals=Vitals(spo2=130))])
        findings = lint_scenario(scenario)
        errors = [f for f in findings if f.severity == "error"]
        assert len(errors) == 1
        assert errors[0].code == "spo2_impossible"

    def test_cardiac_arrest_values_are_legal(self):
        scenario = self._scenario([Phase(id=1, vitals=Vitals(hr=0, bp="0/0"))])
        assert not [f for f in lint_scenario(scenario) if f.severity == "error"]

    def test_unparseable_bp(self):
        scenario = self._scenario([Phase(id=1, vitals=Vitals(bp="high"))])
        assert any(f.code == "bp_unparseable" for f in lint_scenario(scenario))

    def test_final_phase_exempt_from_action_checks(self):
        phases = [
            Phase(id=1, learner_actions=["a"], transition_triggers=[TransitionTrigger("t")]),
            Phase(id=2, learner_actions=["a"], transition_triggers=[TransitionTrigger("t")]),
            Phase(id=3),
        ]
        findings = lint_scenario(self._scenario(phases))
        assert not [f for f in findings if f.code in ("no_learner_actions", "no_transition_triggers")]


class TestCanonicalSerialization:
    def test_round_trip_recorded_scenario(self, appendix_session):
        scenario = appendix_session.scenario
        assert parse_scenario(canonical_serialize(scenario)) == scenario

    def test_unsupported_version(self):
        with pytest.raises(VersionUnsupported):
            parse_scenario('{"format_version": "999", "general": {}, "phases": []}')

    def test_missing_version(self):
        with pytest.raises(ParseFailure):
            parse_scenario('{"general": {}, "phases": []}')

    def test_not_json(self):
        with pytest.raises(ParseFailure):
            parse_scenario("definitely not json")

    def test_golden_file_byte_identical(self, appendix_session):
        from .conftest import FIXTURES

        golden = (FIXTURES / "golden" / "appendix_b.scenario.json").read_text("utf-8")
        assert canonical_serialize(appendix_session.scenario) == golden

    def test_format_version_first(self, appendix_session):
        text = canonical_serialize(appendix_session.scenario)
        assert text.splitlines()[1].strip().startswith('"format_version"')


# --- property suite -----------------------------------------------------

_text = st.text(
    alphabet=st.characters(blacklist_categories=("Cs",), blacklist_characters="\r"),
    max_size=40,
)
_nonempty = _text.filter(lambda s: bool(s.strip()))
_opt_int = st.none() | st.integers(min_value=0, max_value=250)


def _gcs():
    return st.builds(
        GcsScore,
        eye=st.integers(1, 4), verbal=st.integers(1, 5), motor=st.integers(1, 6),
        eye_note=st.none() | _nonempty, verbal_note=st.none() | _nonempty, motor_note=st.none() | _nonempty,
    )


def _vitals():
    return st.builds(
        Vitals,
        bp=st.none() | st.from_regex(r"[0-9]{1,3}/[0-9]{1,3}", fullmatch=True),
        hr=_opt_int, rr=_opt_int, spo2=st.none() | st.integers(0, 100),
        temp=st.none() | _nonempty, rhythm=st.none() | _nonempty,
        gcs=st.none() | _gcs(), other=st.none() | _nonempty,
    )


def _phases():
    bodies = st.builds(
        Phase,
        id=st.just(0),  # ids rewritten below to keep them strictly increasing
        title=_text,
        patient_status=st.none() | _nonempty,
        vitals=_vitals(),
        state_modifiers=st.lists(st.builds(StateModifier, modifier=_nonempty, result=_text), max_size=3),
        learner_actions=st.lists(_nonempty, max_size=3),
        transition_triggers=st.lists(st.builds(TransitionTrigger, trigger=_nonempty, result=_text), max_size=3),
    )

    def renumber(items):
        for n, phase in enumerate(items, start=1):
            phase.id = n
        return items

    return st.lists(bodies, max_size=4).map(renumber)


def scenarios():
    general = st.builds(
        GeneralInfo,
        author=_text, facility=_text, scenario_title=_nonempty,
        scenario_description=_text, simulation_objective=_text, target_audience=_text,
        case_summary=_text,
        learning_objectives=st.lists(_nonempty, max_size=4),
        equipment_props=st.lists(_nonempty, max_size=4),
        environment=_text, case_presentation=_text,
        debriefing_points=st.lists(_nonempty, max_size=4),
        lab_results=st.lists(st.builds(LabTest, test=_nonempty, result=_text, normal_range=_text), max_size=3),
        extras=st.dictionaries(_nonempty, _text, max_size=3),
    )
    return st.builds(Scenario, general=general, phases=_phases())


@settings(max_examples=250, deadline=None)
@given(scenario=scenarios())
def test_serialize_parse_round_trip(scenario):
    assert parse_scenario(canonical_serialize(scenario)) == scenario


@settings(max_examples=100, deadline=None)
@given(a=scenarios(), b=scenarios())
def test_serialization_injective(a, b):
    if a != b:
        assert canonical_serialize(a) != canonical_serialize(b)


@settings(max_examples=100, deadline=None)
@given(scenario=scenarios())
def test_canonical_bytes_stable(scenario):
    first = canonical_serialize(scenario)
    second = canonical_serialize(parse_scenario(first))
    assert first == second
    assert "\r" not in first
    json.loads(first)
