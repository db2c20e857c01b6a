from __future__ import annotations

import xml.etree.ElementTree as ET

import pytest

from scenarioforge.json_recovery import recover
from scenarioforge.render_export import (
    ManikinDocument,
    NoPhases,
    RenderOptions,
    export_manikin,
    render,
)
from scenarioforge.scenario_domain import (
    GcsScore,
    GeneralInfo,
    LabTest,
    Phase,
    Scenario,
    TransitionTrigger,
    Vitals,
    bind_general_info,
)

from .conftest import FIXTURES

# The printable output recorded for the worked MI example.
TABLE3_DEBRIEFING = [
    "Recognition of myocardial infarction symptoms",
    "Interpretation of ECG findings",
    "Initiation of appropriate treatment protocols",
]
TABLE3_OBJECTIVES = [
    "Identify classic symptoms of myocardial infarction",
    "Recognize ECG changes associated with myocardial infarction",
    "Understand initial management strategies for acute myocardial infarction",
]


@pytest.fixture
def methods_scenario(general_template, methods_raw):
    value, _, _ = recover(methods_raw, general_template)
    return Scenario(general=bind_general_info(value), phases=[])


class TestRender:
    def test_methods_debriefing_points_verbatim(self, methods_scenario):
        text = render(methods_scenario, RenderOptions(format="markdown"))
        for line in TABLE3_DEBRIEFING:
            assert f"- {line}" in text
        for line in TABLE3_OBJECTIVES:
            assert f"- {line}" in text

    def test_empty_sections_omitted_and_numbering_contiguous(self):
        scenario = Scenario(
            general=GeneralInfo(scenario_title="T", case_summary="S", debriefing_points=["d"]),
            phases=[],
        )
        text = render(scenario)
        assert "Lab Results" not in text
        assert "EquipmentProps" not in text
        # General Information, Case Summary, Debriefing Points -> 1, 2, 3
        assert "## 1. General Information" in text
        assert "## 2. Case Summary:" in text
        assert "## 3. Debriefing Points:" in text

    def test_recorded_phase3_vitals(self, appendix_session):
        text = render(appendix_session.scenario, RenderOptions(format="markdown"))
        phase3 = text.split("### 3)")[1].split("### 4)")[0]
        assert "BP: 0/0" in phase3
        assert "SpO2: 85" in phase3
        assert "HR: 0" in phase3

    def test_vitals_order_fixed(self):
        scenario = Scenario(
            general=GeneralInfo(scenario_title="T"),
            phases=[Phase(id=1, title="Check", vitals=Vitals(
                bp="130/80", hr=90, rr=18, spo2=95, temp="37°C", rhythm="SINUS",
                gcs=GcsScore(4, 4, 6, "Opens eyes in response to voice", "Confused", "Obeys commands"),
                other="Dazed.",
            ))],
        )
        text = render(scenario)
        lines = [l for l in text.splitlines() if ":" in l and l[:3] in ("BP:", "HR:", "RR:", "Sp0", "SpO", "Tem", "Rhy", "GCS", "Oth")]
        labels = [l.split(":")[0] for l in lines]
        assert labels == ["BP", "HR", "RR", "SpO2", "Temp", "Rhythm", "GCS", "Other"]
        assert "GCS: E: 4 (Opens eyes in response to voice) V: 4 (Confused) M: 6 (Obeys commands)" in text

    def test_title_upcased_by_default(self, appendix_session):
        text = render(appendix_session.scenario)
        assert "# ACUTE MYOCARDIAL INFARCTION MANAGEMENT" in text
        plain = render(appendix_session.scenario, RenderOptions(title_upcase=False))
        assert "# Acute myocardial infarction management" in plain

    def test_lab_results_flag(self):
        scenario = Scenario(
            general=GeneralInfo(scenario_title="T", lab_results=[LabTest("CBC", "Normal", "Normal")]),
            phases=[],
        )
        assert "Lab Results" in render(scenario)
        assert "Lab Results" not in render(scenario, RenderOptions(include_lab_results=False))

    def test_extras_rendered_in_general_block(self):
        scenario = Scenario(
            general=GeneralInfo(scenario_title="T", extras={"ScenarioDuration": "30 minutes"}),
            phases=[],
        )
        assert "ScenarioDuration: 30 minutes" in render(scenario)

    def test_html_document(self, appendix_session):
        text = render(appendix_session.scenario, RenderOptions(format="html"))
        assert text.startswith("<!DOCTYPE html>")
        assert "Debriefing Points" in text
        assert "<style>" in text
        assert "BP: 0/0" in text

    def test_html_escapes_content(self):
        scenario = Scenario(
            general=GeneralInfo(scenario_title="Chest <pain> & more", case_summary="a<b"),
            phases=[],
        )
        text = render(scenario, RenderOptions(format="html"))
        assert "Chest <pain>" not in text
        assert "CHEST &lt;PAIN&gt; &amp; MORE" in text

    def test_deterministic(self, appendix_session):
        assert render(appendix_session.scenario) == render(appendix_session.scenario)


class TestExportManikin:
    def test_recorded_scenario_structure(self, appendix_session):
        document = export_manikin(appendix_session.scenario)
        root = ET.fromstring(document.data)
        phases = root.findall("phase")
        assert len(phases) == 6
        first = phases[0]
        hr = first.find("vital[@name='HR']")
        assert hr is not None and hr.get("value") == "110"

    def test_single_vital(self):
        scenario = Scenario(general=GeneralInfo(scenario_title="T"),
                            phases=[Phase(id=1, vitals=Vitals(hr=80))])
        document = export_manikin(scenario)
        root = ET.fromstring(document.data)
        assert len(root.findall(".//vital")) == 1

    def test_no_phases(self):
        with pytest.raises(NoPhases):
            export_manikin(Scenario(general=GeneralInfo(scenario_title="T"), phases=[]))

    def test_golden_bytes(self, appendix_session):
        golden = (FIXTURES / "golden" / "appendix_b.manikin.xml").read_bytes()
        assert export_manikin(appendix_session.scenario).data == golden

    def test_gcs_splits_into_three_vitals(self):
        scenario = Scenario(
            general=GeneralInfo(scenario_title="T"),
            phases=[Phase(id=1, vitals=Vitals(gcs=GcsScore(4, 5, 6)))],
        )
        root = ET.fromstring(export_manikin(scenario).data)
        names = [v.get("name") for v in root.findall(".//vital")]
        assert names == ["GCS_E", "GCS_V", "GCS_M"]

    def test_triggers_exported(self):
        scenario = Scenario(
            general=GeneralInfo(scenario_title="T"),
            phases=[Phase(id=1, transition_triggers=[TransitionTrigger("Airway secured", "Go to 2")])],
        )
        root = ET.fromstring(export_manikin(scenario).data)
        trigger = root.find(".//trigger")
        assert trigger.get("text") == "Airway secured"
        assert trigger.get("result") == "Go to 2"

    def test_escaping_and_wellformedness(self):
        scenario = Scenario(
            general=GeneralInfo(scenario_title='Title with "quotes" & <angle>'),
            phases=[Phase(id=1, title="a<b>&c", vitals=Vitals(bp='12"0/80'))],
        )
        document = export_manikin(scenario)
        root = ET.fromstring(document.data)  # must stay well-formed
        assert root.get("title") == 'Title with "quotes" & <angle>'

    def test_every_numeric_vital_appears_once(self, appendix_session):
        root = ET.fromstring(export_manikin(appendix_session.scenario).data)
        for phase, element in zip(appendix_session.scenario.phases, root.findall("phase")):
            hr_elements = element.findall("vital[@name='HR']")
            assert len(hr_elements) == 1
            assert hr_elements[0].get("value") == str(phase.vitals.hr)

    def test_returns_manikin_document(self, appendix_session):
        document = export_manikin(appendix_session.scenario)
        assert isinstance(document, ManikinDocument)
        assert document.data.decode("utf-8").endswith("</scenario>\n")
