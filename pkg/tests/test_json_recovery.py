from __future__ import annotations

import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from scenarioforge.errors import ScenarioForgeError
from scenarioforge.json_recovery import (
    CLEAN,
    REPAIRED,
    NoJsonFound,
    StillInvalid,
    Unrepairable,
    extract_candidate,
    normalize_envelope,
    recover,
    repair,
)


class TestExtractCandidate:
    def test_fence_and_prose(self):
        raw = 'Here is your scenario:\n```json\n{"a":1}\n```'
        assert extract_candidate(raw) == '{"a":1}'

    def test_identity(self):
        assert extract_candidate('{"a":1}') == '{"a":1}'

    def test_no_json(self):
        with pytest.raises(NoJsonFound):
            extract_candidate("no data here")

    def test_largest_region_wins(self):
        raw = 'small {"x":1} then {"a":1,"b":{"c":2}} trailing'
        assert extract_candidate(raw) == '{"a":1,"b":{"c":2}}'

    def test_braces_inside_strings_do_not_confuse(self):
        raw = '{"a":"closing } inside"}'
        assert extract_candidate(raw) == raw

    def test_steps_recorded_via_recover(self, general_template):
        raw = 'Sure! Here it is:\n```json\n{"Scenario":{"GeneralInfo":{"ScenarioTitle":"T"}}}\n```'
        _, report, _ = recover(raw, general_template)
        rules = {s.rule for s in report.steps}
        assert "strip_fence" in rules
        assert "strip_prose" in rules


class TestRepair:
    def test_recorded_progression_comments(self, response2_raw):
        candidate = extract_candidate(response2_raw)
        value, report = repair(candidate)
        assert report.outcome == REPAIRED
        assert report.count("strip_line_comment") == 6
        steps = value["scenarioprogression"]["steps"]
        assert steps[2]["vitals"]["HR"] == 0
        assert steps[2]["vitals"]["BP"] == "0/0"  # the slash pair must survive comment stripping

    def test_already_valid_is_clean(self, methods_raw):
        # Re-serialized form of the recorded output: valid JSON stays untouched.
        value, _ = repair(methods_raw)
        clean_text = json.dumps(value, indent=2)
        again, report = repair(clean_text)
        assert report.outcome == CLEAN
        assert report.steps == []
        assert again == value

    def test_trailing_comma(self):
        value, report = repair('{"a":1,}')
        assert value == {"a": 1}
        assert report.count("remove_trailing_comma") == 1

    def test_methods_output_trailing_comma(self, methods_raw):
        value, report = repair(methods_raw)
        assert report.count("remove_trailing_comma") == 1
        assert set(value["Scenario"]) == {"GeneralInfo", "LearningObjectives"}

    def test_single_quotes(self):
        value, report = repair("{'a': 'it is'}")
        assert value == {"a": "it is"}
        assert report.count("single_to_double_quote") >= 1

    def test_bare_keys(self):
        value, report = repair('{alpha: 1, beta_2: "x"}')
        assert value == {"alpha": 1, "beta_2": "x"}
        assert report.count("quote_bare_key") == 2

    def test_block_comment(self):
        value, report = repair('{"a": /* note */ 1}')
        assert value == {"a": 1}
        assert report.count("strip_block_comment") == 1

    def test_unrepairable(self):
        with pytest.raises(Unrepairable):
            repair('{"a": <<<definitely broken>>>}')


class TestNormalizeEnvelope:
    def test_response1_wrap_and_fold(self, general_template, response1_raw):
        value = json.loads(response1_raw)
        normalized, steps = normalize_envelope(value, general_template)
        rules = [s.rule for s in steps]
        assert "wrap_envelope" in rules
        assert "case_fold_key" in rules
        assert list(normalized) == ["Scenario"]
        assert list(normalized["Scenario"]) == ["GeneralInfo"]

    def test_aligned_value_untouched(self, general_template):
        value = {"Scenario": {"GeneralInfo": {"ScenarioTitle": "T"}}}
        normalized, steps = normalize_envelope(value, general_template)
        assert steps == []
        assert normalized == value

    def test_response2_wrap_and_fold(self, progression_template, response2_raw):
        value, _ = repair(extract_candidate(response2_raw))
        normalized, steps = normalize_envelope(value, progression_template)
        assert list(normalized) == ["Scenario"]
        assert list(normalized["Scenario"]) == ["ScenarioProgression"]
        assert any(s.rule == "wrap_envelope" for s in steps)
        assert any(s.rule == "case_fold_key" and "ScenarioProgression" in s.detail for s in steps)

    def test_duplicated_wrapper_unwrapped(self, general_template):
        value = {"Scenario": {"Scenario": {"GeneralInfo": {"ScenarioTitle": "T"}}}}
        normalized, steps = normalize_envelope(value, general_template)
        assert any(s.rule == "unwrap_envelope" for s in steps)
        assert list(normalized["Scenario"]) == ["GeneralInfo"]


class TestRecover:
    def test_methods_relocation(self, general_template, methods_raw):
        value, report, validation = recover(methods_raw, general_template)
        assert report.count("relocate_key") == 1
        assert "LearningObjectives" in value["Scenario"]["GeneralInfo"]
        assert "LearningObjectives" not in value["Scenario"]
        assert validation.errors == []

    def test_recorded_progression_full_pipeline(self, progression_template, response2_raw):
        value, report, validation = recover(response2_raw, progression_template)
        assert report.outcome == REPAIRED
        assert report.count("strip_line_comment") == 6
        steps = value["Scenario"]["ScenarioProgression"]["steps"]
        assert len(steps) == 6
        assert validation.errors == []

    def test_refusal_text(self, general_template):
        with pytest.raises(NoJsonFound):
            recover("Sorry, I can't help with that.", general_template)

    def test_conservative_on_conforming_input(self, general_template):
        value = {"Scenario": {"GeneralInfo": {"ScenarioTitle": "T", "CaseSummary": "S"}}}
        text = json.dumps(value)
        recovered, report, _ = recover(text, general_template)
        assert report.outcome == CLEAN
        assert recovered == json.loads(text)

    def test_idempotent_on_own_output(self, general_template, methods_raw):
        value, _, _ = recover(methods_raw, general_template)
        again, report, _ = recover(json.dumps(value, indent=2), general_template)
        assert report.outcome == CLEAN
        assert again == value

    def test_type_error_still_invalid(self, general_template):
        raw = '{"Scenario": {"GeneralInfo": {"ScenarioTitle": 42}}}'
        with pytest.raises(StillInvalid) as exc_info:
            recover(raw, general_template)
        err = exc_info.value
        assert err.repair_report is not None
        assert err.repair_report.outcome == "failed"
        assert err.validation_report is not None
        assert err.validation_report.errors

    def test_step_locations_within_bounds(self, progression_template, response2_raw):
        _, report, _ = recover(response2_raw, progression_template)
        for step in report.steps:
            if isinstance(step.location, int):
                assert 0 <= step.location <= len(response2_raw)

    def test_relocate_requires_unique_destination(self, progression_template):
        # "Result" appears in two template positions: never relocated.
        raw = json.dumps({"Scenario": {"Result": "x", "ScenarioProgression": {"Phase": []}}})
        value, report, validation = recover(raw, progression_template)
        assert report.count("relocate_key") == 0
        assert value["Scenario"]["Result"] == "x"


_FRAGMENTS = st.sampled_from(
    ['{"a"', ":", "1", "}", "{", "]", "[", '"x"', ",", "//c\n", "/*c*/", "'y'", "null",
     "True", '{"Scenario":', '{"generalinfo":{}}', "prose ", "```", '\\', '"unterminated']
)
_RAW_TEXTS = st.one_of(
    st.text(max_size=200),
    st.lists(_FRAGMENTS, max_size=20).map("".join),
    st.dictionaries(st.text(max_size=8), st.integers() | st.text(max_size=8), max_size=5).map(json.dumps),
)


@settings(max_examples=300, deadline=None)
@given(raw=_RAW_TEXTS)
def test_recover_never_crashes(raw, general_template):
    try:
        value, report, validation = recover(raw, general_template)
    except ScenarioForgeError:
        return  # typed errors are the contract
    assert report.outcome in (CLEAN, REPAIRED)
    assert validation.errors == []
    json.dumps(value)  # recovered values are plain data
