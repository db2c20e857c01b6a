"""Deterministic document rendering and simulator-programming export.

Rendering mirrors the application's printable layout: a General
Information block, the numbered content sections, then the phase-by-phase
progression. Markdown and HTML carry the same content; the HTML document
embeds a print-oriented stylesheet so a browser's print-to-PDF reproduces
the paper form.

The manikin export is an open XML format that preloads each phase and its
vitals into a simulator application: one ``<phase>`` per progression
phase, one ``<vital>`` per present reading, ``<trigger>`` elements for
the transition conditions. Output is byte-deterministic (UTF-8, LF,
2-space indent, fixed attribute order).
"""

from __future__ import annotations

import html
from dataclasses import dataclass

from .errors import ScenarioForgeError
from .scenario_domain import GcsScore, Phase, Scenario, Vitals

MARKDOWN = "markdown"
HTML = "html"

class NoPhases(ScenarioForgeError):
    pass


@dataclass(frozen=True)
class RenderOptions:
    format: str = MARKDOWN
    include_lab_results: bool = True
    title_upcase: bool = True


@dataclass(frozen=True)
class ManikinDocument:
    data: bytes


def _gcs_text(gcs: GcsScore) -> str:
    parts = []
    for label, value, note in (
        ("E", gcs.eye, gcs.eye_note), ("V", gcs.verbal, gcs.verbal_note), ("M", gcs.motor, gcs.motor_note),
    ):
        if value is None:
            continue
        parts.append(f"{label}: {value} ({note})" if note else f"{label}: {value}")
    return " ".join(parts)


def _pair_text(head: str, tail: str) -> str:
    return f"{head}: {tail}" if tail else head


def _vitals_lines(vitals: Vitals) -> list[str]:
    lines = []
    for label, value in (
        ("BP", vitals.bp), ("HR", vitals.hr), ("RR", vitals.rr), ("SpO2", vitals.spo2),
        ("Temp", vitals.temp), ("Rhythm", vitals.rhythm),
    ):
        if value is not None:
            lines.append(f"{label}: {value}")
    if vitals.gcs is not None:
        lines.append(f"GCS: {_gcs_text(vitals.gcs)}")
    if vitals.other is not None:
        lines.append(f"Other: {vitals.other}")
    return lines


@dataclass(frozen=True)
class _Section:
    title: str
    kind: str  # fields | text | bullets | table
    content: object


def _general_fields(scenario: Scenario) -> list[tuple[str, str]]:
    g = scenario.general
    fields = [
        ("Author", g.author), ("Facility", g.facility), ("ScenarioTitle", g.scenario_title),
        ("ScenarioDescription", g.scenario_description), ("SimulationObjective", g.simulation_objective),
        ("TargetAudience", g.target_audience),
    ]
    fields.extend(g.extras.items())
    return [(label, value) for label, value in fields if value]


def _sections(scenario: Scenario, options: RenderOptions) -> list[_Section]:
    g = scenario.general
    candidates: list[_Section] = [
        _Section("General Information", "fields", _general_fields(scenario)),
        _Section("Case Summary:", "text", g.case_summary),
        _Section("Learning Objectives:", "bullets", g.learning_objectives),
        _Section("EquipmentProps:", "bullets", g.equipment_props),
        _Section("Environment:", "text", g.environment),
        _Section("Case Presentation:", "text", g.case_presentation),
        _Section("Debriefing Points:", "bullets", g.debriefing_points),
    ]
    if options.include_lab_results:
        candidates.append(_Section("Lab Results:", "table", g.lab_results))
    return [s for s in candidates if s.content]


def _doc_title(scenario: Scenario, options: RenderOptions) -> str:
    title = scenario.general.scenario_title
    return title.upper() if options.title_upcase else title


def render(scenario: Scenario, options: RenderOptions | None = None) -> str:
    """Render the approved scenario; pure and byte-deterministic."""
    options = options or RenderOptions()
    if options.format == HTML:
        return _render_html(scenario, options)
    return _render_markdown(scenario, options)


def _render_markdown(scenario: Scenario, options: RenderOptions) -> str:
    out: list[str] = []
    title = _doc_title(scenario, options)
    if title:
        out += [f"# {title}", ""]
    for number, section in enumerate(_sections(scenario, options), start=1):
        out += [f"## {number}. {section.title}", ""]
        if section.kind == "fields":
            out += [f"{label}: {value}" for label, value in section.content]
        elif section.kind == "text":
            out.append(str(section.content))
        elif section.kind == "bullets":
            out += [f"- {item}" for item in section.content]
        else:  # lab table
            out += ["| Test | Result | Normal Range |", "| --- | --- | --- |"]
            out += [f"| {t.test} | {t.result} | {t.normal_range} |" for t in section.content]
        out.append("")
    if scenario.phases:
        out += ["## Scenario Progression", ""]
        for phase in scenario.phases:
            heading = f"### {phase.id}) {phase.title}".rstrip()
            out += [heading, ""]
            if phase.patient_status:
                out += [phase.patient_status, ""]
            vitals = _vitals_lines(phase.vitals)
            if vitals:
                out += vitals + [""]
            if phase.learner_actions:
                out += ["Learner Actions:"] + [f"- {a}" for a in phase.learner_actions] + [""]
            if phase.state_modifiers:
                out += ["Modifiers:"] + [f"- {_pair_text(m.modifier, m.result)}" for m in phase.state_modifiers] + [""]
            if phase.transition_triggers:
                out += ["Triggers:"] + [f"- {_pair_text(t.trigger, t.result)}" for t in phase.transition_triggers] + [""]
    while out and out[-1] == "":
        out.pop()
    return "\n".join(out) + "\n"


_STYLESHEET = """\
body { font-family: Georgia, serif; margin: 2rem auto; max-width: 50rem; color: #1a1a1a; }
h1 { font-size: 1.5rem; border-bottom: 2px solid #1a1a1a; padding-bottom: .3rem; }
h2 { font-size: 1.15rem; margin-top: 1.4rem; }
h3 { font-size: 1rem; margin-top: 1.1rem; }
table { border-collapse: collapse; }
td, th { border: 1px solid #888; padding: .25rem .6rem; text-align: left; }
dt { font-weight: bold; }
dd { margin: 0 0 .4rem 0; }
.vitals { white-space: pre-line; }
@media print { body { margin: 0; max-width: none; } }
"""


def _render_html(scenario: Scenario, options: RenderOptions) -> str:
    esc = html.escape
    out: list[str] = [
        "<!DOCTYPE html>", "<html lang=\"en\">", "<head>", "<meta charset=\"utf-8\">",
        f"<title>{esc(scenario.general.scenario_title)}</title>",
        "<style>", _STYLESHEET.rstrip(), "</style>", "</head>", "<body>",
    ]
    title = _doc_title(scenario, options)
    if title:
        out.append(f"<h1>{esc(title)}</h1>")
    for number, section in enumerate(_sections(scenario, options), start=1):
        out.append(f"<h2>{number}. {esc(section.title)}</h2>")
        if section.kind == "fields":
            out.append("<dl>")
            for label, value in section.content:
                out.append(f"<dt>{esc(label)}</dt><dd>{esc(value)}</dd>")
            out.append("</dl>")
        elif section.kind == "text":
            out.append(f"<p>{esc(str(section.content))}</p>")
        elif section.kind == "bullets":
            out.append("<ul>")
            out += [f"<li>{esc(item)}</li>" for item in section.content]
            out.append("</ul>")
        else:
            out.append("<table><tr><th>Test</th><th>Result</th><th>Normal Range</th></tr>")
            for t in section.content:
                out.append(
                    f"<tr><td>{esc(t.test)}</td><td>{esc(t.result)}</td><td>{esc(t.normal_range)}</td></tr>"
                )
            out.append("</table>")
    if scenario.phases:
        out.append("<h2>Scenario Progression</h2>")
        for phase in scenario.phases:
            out.append(f"<h3>{esc(f'{phase.id}) {phase.title}'.rstrip())}</h3>")
            if phase.patient_status:
                out.append(f"<p>{esc(phase.patient_status)}</p>")
            vitals = _vitals_lines(phase.vitals)
            if vitals:
                out.append(f"<p class=\"vitals\">{esc(chr(10).join(vitals))}</p>")
            for label, items in (
                ("Learner Actions:", [a for a in phase.learner_actions]),
                ("Modifiers:", [_pair_text(m.modifier, m.result) for m in phase.state_modifiers]),
                ("Triggers:", [_pair_text(t.trigger, t.result) for t in phase.transition_triggers]),
            ):
                if items:
                    out.append(f"<p>{esc(label)}</p><ul>")
                    out += [f"<li>{esc(item)}</li>" for item in items]
                    out.append("</ul>")
    out += ["</body>", "</html>"]
    return "\n".join(out) + "\n"


# ---------------------------------------------------------------------------
# manikin export

def _xml_escape(text: str) -> str:
    return (
        text.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")
        .replace('"', "&quot;")
    )


def _phase_vitals(phase: Phase) -> list[tuple[str, str]]:
    v = phase.vitals
    named: list[tuple[str, str]] = []
    for name, value in (
        ("HR", v.hr), ("BP", v.bp), ("RR", v.rr), ("SpO2", v.spo2), ("Temp", v.temp), ("Rhythm", v.rhythm),
    ):
        if value is not None:
            named.append((name, str(value)))
    if v.gcs is not None:
        for name, value in (("GCS_E", v.gcs.eye), ("GCS_V", v.gcs.verbal), ("GCS_M", v.gcs.motor)):
            if value is not None:
                named.append((name, str(value)))
    return named


def export_manikin(scenario: Scenario) -> ManikinDocument:
    """Simulator-programming file preloading every phase's vitals."""
    if not scenario.phases:
        raise NoPhases("cannot export a scenario without phases")
    lines = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<scenario title="{_xml_escape(scenario.general.scenario_title)}" version="1">',
    ]
    for phase in scenario.phases:
        lines.append(f'  <phase id="{phase.id}" title="{_xml_escape(phase.title)}">')
        for name, value in _phase_vitals(phase):
            lines.append(f'    <vital name="{name}" value="{_xml_escape(value)}"/>')
        for trigger in phase.transition_triggers:
            lines.append(
                f'    <trigger text="{_xml_escape(trigger.trigger)}" result="{_xml_escape(trigger.result)}"/>'
            )
        lines.append("  </phase>")
    lines.append("</scenario>")
    return ManikinDocument(("\n".join(lines) + "\n").encode("utf-8"))
