"""Recovery of structured values from raw model text.

Pipeline: extract the largest brace-balanced candidate, repair mechanical
defects in fixed pass order (comments, then trailing commas, then
quoting), align the envelope with the template, relocate misplaced keys
reported by the validator, and validate. Every mutation is recorded in a
RepairReport so a reviewer can see exactly what was changed — the repair
grammar is a closed set, never speculative free-form fixing.

The comment lexer is string-aware: a ``//`` inside a quoted literal (a
blood pressure of "0/0" is the canonical case) is content, not a comment.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any

from .errors import ScenarioForgeError
from .schema_model import AnnotatedSchema, SchemaNode, ValidationReport, validate_instance

RULES = frozenset({
    "strip_fence", "strip_prose", "strip_line_comment", "strip_block_comment",
    "remove_trailing_comma", "quote_bare_key", "single_to_double_quote",
    "wrap_envelope", "unwrap_envelope", "relocate_key", "case_fold_key",
})

CLEAN = "clean"
REPAIRED = "repaired"
FAILED = "failed"


class NoJsonFound(ScenarioForgeError):
    pass


class Unrepairable(ScenarioForgeError):
    def __init__(self, message: str = "", report: "RepairReport | None" = None):
        super().__init__(message)
        self.report = report


class AmbiguousEnvelope(ScenarioForgeError):
    pass


class StillInvalid(ScenarioForgeError):
    def __init__(
        self,
        message: str = "",
        repair_report: "RepairReport | None" = None,
        validation_report: ValidationReport | None = None,
    ):
        super().__init__(message)
        self.repair_report = repair_report
        self.validation_report = validation_report


@dataclass(frozen=True)
class RepairStep:
    rule: str
    location: int | str  # text offset for lexical rules, value path for structural ones
    detail: str = ""

    def to_dict(self) -> dict:
        return {"rule": self.rule, "location": self.location, "detail": self.detail}


@dataclass
class RepairReport:
    steps: list[RepairStep] = field(default_factory=list)
    outcome: str = CLEAN

    def add(self, rule: str, location: int | str, detail: str = "") -> None:
        self.steps.append(RepairStep(rule, location, detail))

    def count(self, rule: str) -> int:
        return sum(1 for s in self.steps if s.rule == rule)

    def to_dict(self) -> dict:
        return {"steps": [s.to_dict() for s in self.steps], "outcome": self.outcome}

    @classmethod
    def from_dict(cls, data: dict) -> "RepairReport":
        return cls(
            steps=[RepairStep(**s) for s in data.get("steps", [])],
            outcome=data.get("outcome", CLEAN),
        )


# ---------------------------------------------------------------------------
# candidate extraction

def _balanced_spans(text: str) -> list[tuple[int, int]]:
    """Spans of brace-balanced regions; string/comment-aware inside braces."""
    spans: list[tuple[int, int]] = []
    depth = 0
    start = -1
    in_str: str | None = None
    escaped = False
    in_line = False
    in_block = False
    i = 0
    n = len(text)
    while i < n:
        c = text[i]
        if depth == 0:
            if c == "{":
                depth = 1
                start = i
                in_str = None
                in_line = in_block = False
            i += 1
            continue
        if in_line:
            if c == "\n":
                in_line = False
        elif in_block:
            if c == "*" and text[i + 1 : i + 2] == "/":
                in_block = False
                i += 1
        elif in_str is not None:
            if escaped:
                escaped = False
            elif c == "\\":
                escaped = True
            elif c == in_str:
                in_str = None
        else:
            if c in "\"'":
                in_str = c
                escaped = False
            elif c == "/" and text[i + 1 : i + 2] == "/":
                in_line = True
                i += 1
            elif c == "/" and text[i + 1 : i + 2] == "*":
                in_block = True
                i += 1
            elif c == "{":
                depth += 1
            elif c == "}":
                depth -= 1
                if depth == 0:
                    spans.append((start, i + 1))
        i += 1
    return spans


_FENCE = "```"


def _extract(raw: str) -> tuple[str, list[RepairStep]]:
    spans = _balanced_spans(raw)
    if not spans:
        raise NoJsonFound("no brace-balanced region in the model output")
    start, end = max(spans, key=lambda s: s[1] - s[0])
    candidate = raw[start:end]
    steps: list[RepairStep] = []
    for side, chunk, offset in (("before", raw[:start], 0), ("after", raw[end:], end)):
        rest = chunk
        fence_at = rest.find(_FENCE)
        while fence_at != -1:
            steps.append(RepairStep("strip_fence", offset + fence_at, f"code fence {side} payload"))
            rest = rest[:fence_at] + "   " + rest[fence_at + len(_FENCE):]
            fence_at = rest.find(_FENCE)
        # Whatever non-whitespace remains once fences (and any fence language
        # tag on the same line) are gone counts as surrounding prose.
        remaining = "\n".join(
            line for line in rest.splitlines()
            if line.strip() and not _is_fence_tag(chunk, line)
        )
        if remaining.strip():
            steps.append(RepairStep("strip_prose", offset, f"prose {side} payload"))
    steps.sort(key=lambda s: s.location)
    return candidate, steps


def _is_fence_tag(chunk: str, line: str) -> bool:
    stripped = line.strip()
    return stripped.isidentifier() and f"{_FENCE}{stripped}" in chunk


def extract_candidate(raw: str) -> str:
    """Largest brace-balanced region with fences and prose stripped."""
    candidate, _ = _extract(raw)
    return candidate


# ---------------------------------------------------------------------------
# lexical repair

def _scan(text: str):
    """Yield (offset, char, context) with context in {code, string, line, block}."""
    in_str: str | None = None
    escaped = False
    in_line = False
    in_block = False
    i = 0
    n = len(text)
    while i < n:
        c = text[i]
        if in_line:
            if c == "\n":
                in_line = False
                yield i, c, "code"
            else:
                yield i, c, "line"
        elif in_block:
            if c == "*" and text[i + 1 : i + 2] == "/":
                yield i, c, "block"
                yield i + 1, "/", "block"
                in_block = False
                i += 1
            else:
                yield i, c, "block"
        elif in_str is not None:
            yield i, c, "string"
            if escaped:
                escaped = False
            elif c == "\\":
                escaped = True
            elif c == in_str:
                in_str = None
        else:
            if c in "\"'":
                in_str = c
                yield i, c, "string"
            elif c == "/" and text[i + 1 : i + 2] == "/":
                yield i, c, "line"
                yield i + 1, "/", "line"
                in_line = True
                i += 1
            elif c == "/" and text[i + 1 : i + 2] == "*":
                yield i, c, "block"
                yield i + 1, "*", "block"
                in_block = True
                i += 1
            else:
                yield i, c, "code"
        i += 1


def _strip_comments(text: str, report: RepairReport) -> str:
    out: list[str] = []
    removing: str | None = None
    start = 0
    for offset, char, context in _scan(text):
        if context == "line":
            if removing != "line":
                removing = "line"
                start = offset
            continue
        if context == "block":
            if removing != "block":
                removing = "block"
                start = offset
            continue
        if removing == "line":
            report.add("strip_line_comment", start, text[start:offset].rstrip())
            removing = None
        elif removing == "block":
            report.add("strip_block_comment", start, text[start:offset])
            removing = None
        out.append(char)
    if removing == "line":
        report.add("strip_line_comment", start, text[start:].rstrip())
    elif removing == "block":
        report.add("strip_block_comment", start, text[start:])
    return "".join(out)


def _remove_trailing_commas(text: str, report: RepairReport) -> str:
    removals: list[int] = []
    pending: int | None = None  # offset of a comma whose successor is not seen yet
    for offset, char, context in _scan(text):
        if context in ("line", "block"):
            continue
        if context == "string":
            pending = None
            continue
        if char.isspace():
            continue
        if char == ",":
            pending = offset
            continue
        if char in "}]" and pending is not None:
            removals.append(pending)
        pending = None
    for offset in removals:
        report.add("remove_trailing_comma", offset, "")
    for offset in reversed(removals):
        text = text[:offset] + text[offset + 1 :]
    return text


def _requote(text: str, report: RepairReport) -> str:
    """Convert single-quoted strings and quote bare object keys."""
    out: list[str] = []
    edits = 0
    in_str: str | None = None
    escaped = False
    prev_sig = ""
    i = 0
    n = len(text)
    while i < n:
        c = text[i]
        if in_str is not None:
            if escaped:
                escaped = False
                out.append(c)
            elif c == "\\":
                escaped = True
                out.append(c)
            elif c == in_str:
                out.append('"')
                in_str = None
            elif c == '"' and in_str == "'":
                out.append('\\"')
            else:
                out.append(c)
            i += 1
            continue
        if c == "'":
            report.add("single_to_double_quote", i, "")
            edits += 1
            in_str = "'"
            out.append('"')
            i += 1
            continue
        if c == '"':
            in_str = '"'
            out.append(c)
            prev_sig = '"'
            i += 1
            continue
        if (c.isalpha() or c == "_") and prev_sig in "{,":
            j = i
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            k = j
            while k < n and text[k].isspace():
                k += 1
            if k < n and text[k] == ":":
                report.add("quote_bare_key", i, text[i:j])
                edits += 1
                out.append(f'"{text[i:j]}"')
                prev_sig = '"'
                i = j
                continue
        out.append(c)
        if not c.isspace():
            prev_sig = c
        i += 1
    return "".join(out)


def _try_parse(text: str) -> tuple[bool, Any]:
    try:
        return True, json.loads(text)
    except json.JSONDecodeError:
        return False, None


def repair(candidate: str) -> tuple[Any, RepairReport]:
    """Apply the repair passes until the text parses or no rule fires."""
    report = RepairReport()
    ok, value = _try_parse(candidate)
    if ok:
        return value, report

    text = candidate
    passes = (_strip_comments, _remove_trailing_commas, _requote)
    for _ in range(3):  # passes can expose work for earlier ones; bounded re-sweep
        before_cycle = text
        for apply_pass in passes:
            text = apply_pass(text, report)
            ok, value = _try_parse(text)
            if ok:
                report.outcome = REPAIRED if report.steps else CLEAN
                return value, report
        if text == before_cycle:
            break
    report.outcome = FAILED
    raise Unrepairable("text does not parse after all repair rules", report=report)


# ---------------------------------------------------------------------------
# envelope normalization

def normalize_envelope(value: Any, schema: AnnotatedSchema) -> tuple[Any, list[RepairStep]]:
    """Align the value's wrapper keys and key casing with the template.

    A single root key naming a non-root node (case-insensitively) gets
    wrapped under the node's ancestors; duplicated wrappers are removed;
    key-name case differences to template names are folded to the
    template's spelling throughout the known subtree.
    """
    steps: list[RepairStep] = []
    if not isinstance(value, dict):
        return value, steps
    root = schema.root

    if len(value) == 1:
        key = next(iter(value))
        inner = value[key]
        if str(key).casefold() != root.name.casefold():
            matches = schema.names.get(str(key).casefold(), ())
            if len(matches) > 1:
                raise AmbiguousEnvelope(
                    f"root key {key!r} matches {len(matches)} template nodes"
                )
            if len(matches) == 1:
                node = matches[0]
                ancestors = [schema.index[p] for p in _ancestor_paths(node.path)]
                if all(a.kind == "object" for a in ancestors):
                    if str(key) != node.name:
                        steps.append(RepairStep("case_fold_key", node.name, f"{key} -> {node.name}"))
                    wrapped: Any = {node.name: inner}
                    for ancestor in reversed(ancestors):
                        steps.append(
                            RepairStep("wrap_envelope", ancestor.path, f"added wrapper {ancestor.name!r}")
                        )
                        wrapped = {ancestor.name: wrapped}
                    value = wrapped

    folded = _fold(schema, root, value, "", steps, at_root=True)
    return folded, steps


def _ancestor_paths(path: str) -> list[str]:
    """Paths of the ancestors of ``path``, root ("") first, excluding itself."""
    segments = path.split("/")
    out = [""]
    for i in range(1, len(segments)):
        out.append("/".join(segments[:i]))
    return out


def _fold(
    schema: AnnotatedSchema,
    node: SchemaNode,
    value: Any,
    vpath: str,
    steps: list[RepairStep],
    at_root: bool = False,
) -> Any:
    if at_root:
        if not isinstance(value, dict) or len(value) != 1:
            return value
        key = next(iter(value))
        if str(key).casefold() != node.name.casefold():
            return value
        if str(key) != node.name:
            steps.append(RepairStep("case_fold_key", node.name, f"{key} -> {node.name}"))
        return {node.name: _fold(schema, node, value[key], node.name, steps)}

    if node.kind == "object" and isinstance(value, dict):
        # Duplicated wrapper: the node's own name repeated one level down.
        while (
            len(value) == 1
            and str(next(iter(value))).casefold() == node.name.casefold()
            and isinstance(next(iter(value.values())), dict)
            and node.name.casefold() not in (c.casefold() for c in node.children)
        ):
            steps.append(RepairStep("unwrap_envelope", vpath, f"removed duplicated wrapper {next(iter(value))!r}"))
            value = next(iter(value.values()))
        by_fold = {name.casefold(): child for name, child in node.children.items()}
        out = {}
        for key, val in value.items():
            child = node.children.get(key)
            if child is None:
                child = by_fold.get(str(key).casefold())
                if child is not None and str(key) != child.name:
                    steps.append(
                        RepairStep("case_fold_key", _join_vpath(vpath, child.name), f"{key} -> {child.name}")
                    )
            if child is None:
                out[key] = val
            else:
                out[child.name] = _fold(schema, child, val, _join_vpath(vpath, child.name), steps)
        return out
    if node.kind == "array" and isinstance(value, list) and node.item is not None:
        return [
            _fold(schema, node.item, element, f"{vpath}[{i}]", steps)
            for i, element in enumerate(value)
        ]
    return value


def _join_vpath(vpath: str, key: str) -> str:
    return key if not vpath else f"{vpath}/{key}"


# ---------------------------------------------------------------------------
# relocation and the full pipeline

def _navigate(value: Any, segments: list[str]) -> Any:
    cur = value
    for seg in segments:
        if not isinstance(cur, dict) or seg not in cur:
            return None
        cur = cur[seg]
    return cur


def _relocate(value: Any, validation: ValidationReport, schema: AnnotatedSchema, report: RepairReport) -> bool:
    """Single pass moving misplaced keys to their unique template position."""
    moved = False
    for issue in validation.issues:
        if issue.code != "misplaced_key":
            continue
        src_segments = issue.path.split("/")
        if any("[" in seg for seg in src_segments):
            continue  # destinations inside array elements are ambiguous
        container = _navigate(value, src_segments[:-1])
        key = src_segments[-1]
        if not isinstance(container, dict) or key not in container:
            continue  # already moved along with an ancestor
        dest_node = schema.index.get(issue.expected)
        if dest_node is None:
            continue
        dest_chain = [schema.index[p] for p in _ancestor_paths(issue.expected)] + [dest_node]
        if any(n.kind != "object" for n in dest_chain[:-1]):
            continue
        cur = value
        ok = True
        for node in dest_chain[:-1]:
            nxt = cur.get(node.name)
            if nxt is None:
                nxt = {}
                cur[node.name] = nxt
            if not isinstance(nxt, dict):
                ok = False
                break
            cur = nxt
        if not ok or dest_node.name in cur:
            continue
        cur[dest_node.name] = container.pop(key)
        report.add("relocate_key", issue.path, f"moved to {issue.expected}")
        moved = True
    return moved


def recover(raw: str, schema: AnnotatedSchema) -> tuple[Any, RepairReport, ValidationReport]:
    """Full pipeline; succeeds when the final validation has zero errors."""
    report = RepairReport()
    try:
        candidate, extract_steps = _extract(raw)
    except NoJsonFound:
        report.outcome = FAILED
        raise
    report.steps.extend(extract_steps)

    try:
        value, repair_report = repair(candidate)
    except Unrepairable as exc:
        if exc.report is not None:
            report.steps.extend(exc.report.steps)
        report.outcome = FAILED
        raise Unrepairable(str(exc), report=report) from None
    report.steps.extend(repair_report.steps)

    value, envelope_steps = normalize_envelope(value, schema)
    report.steps.extend(envelope_steps)

    validation = validate_instance(schema, value)
    if _relocate(value, validation, schema, report):
        validation = validate_instance(schema, value)

    if validation.errors:
        report.outcome = FAILED
        raise StillInvalid(
            f"{len(validation.errors)} validation errors remain after repair",
            repair_report=report,
            validation_report=validation,
        )
    report.outcome = REPAIRED if report.steps else CLEAN
    return value, report, validation
