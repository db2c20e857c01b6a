"""Annotated-schema templates: parsing, linting, and instance validation.

A generation template is a JSON document describing a tree of typed nodes.
Each node may carry a ``description`` whose text doubles as an embedded
prompt, and an opaque ``$id`` locator. Two document forms are accepted:

* a single wrapper key naming the root, ``{"Scenario": {...schema...}}``
* a bare schema object carrying ``"title"``

Node paths are slash-delimited and relative to the root (the root itself
has the empty path), e.g. ``GeneralInfo/CasePresentation``. Array item
schemas are anonymous pass-throughs: the named children of an array's
item object live directly under the array's path.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from importlib import resources
from typing import Any

from .errors import ScenarioForgeError

SUPPORTED_KEYWORDS = frozenset({"type", "properties", "items", "description", "$id", "title"})
KINDS = frozenset({"object", "array", "string", "integer", "number"})
LEAF_KINDS = frozenset({"string", "integer", "number"})

ERROR = "error"
WARNING = "warning"


class MalformedDocument(ScenarioForgeError):
    pass


class UnsupportedRoot(ScenarioForgeError):
    pass


class UnknownKind(ScenarioForgeError):
    pass


class NoSuchPath(ScenarioForgeError):
    pass


@dataclass(frozen=True)
class LintWarning:
    path: str
    code: str  # ignored_keyword | missing_description | skipped_property | assumed_kind
    message: str


@dataclass(frozen=True)
class SchemaNode:
    """One node of the template tree; immutable after construction."""

    name: str
    path: str
    kind: str
    description: str | None = None
    id_tag: str | None = None
    children: dict[str, "SchemaNode"] = field(default_factory=dict)
    item: "SchemaNode | None" = None

    @property
    def is_leaf(self) -> bool:
        return self.kind in LEAF_KINDS


@dataclass(frozen=True)
class AnnotatedSchema:
    root: SchemaNode
    source_name: str
    raw: dict = field(repr=False)
    parse_warnings: tuple[LintWarning, ...] = field(default=(), repr=False)
    # path -> named node; casefolded name -> non-root named nodes
    index: dict[str, SchemaNode] = field(default_factory=dict, repr=False)
    names: dict[str, tuple[SchemaNode, ...]] = field(default_factory=dict, repr=False)

    def nodes(self) -> list[SchemaNode]:
        """All named nodes in document order, root first."""
        return list(self.index.values())


@dataclass(frozen=True)
class ValidationIssue:
    path: str  # location in the value, or the schema path of a missing node
    severity: str  # error | warning
    code: str  # type_mismatch | unknown_key | missing_key | misplaced_key | bad_array_item
    expected: str
    got: str


@dataclass(frozen=True)
class ValidationReport:
    issues: tuple[ValidationIssue, ...] = ()

    @property
    def errors(self) -> list[ValidationIssue]:
        return [i for i in self.issues if i.severity == ERROR]

    @property
    def warnings(self) -> list[ValidationIssue]:
        return [i for i in self.issues if i.severity == WARNING]

    @property
    def ok(self) -> bool:
        """Conformance: zero errors (warnings allowed)."""
        return not self.errors

    def to_dict(self) -> dict:
        return {"issues": [vars(i) for i in self.issues]}

    @classmethod
    def from_dict(cls, data: dict) -> "ValidationReport":
        return cls(tuple(ValidationIssue(**i) for i in data.get("issues", [])))


def parse_schema(text: str, source_name: str) -> AnnotatedSchema:
    """Parse an annotated-schema document into a node tree.

    Keywords outside the supported set are recorded as lint warnings, not
    errors. Missing ``type`` is inferred from ``properties``/``items``
    (string otherwise, with a warning) so the dialect's own slightly
    irregular templates still parse.
    """
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise MalformedDocument(f"{source_name}: not valid JSON: {exc}") from exc
    if not isinstance(doc, dict) or not doc:
        raise MalformedDocument(f"{source_name}: document must be a non-empty JSON object")

    warnings: list[LintWarning] = []
    if "type" in doc or "properties" in doc:
        root_name = str(doc.get("title") or source_name or "Scenario")
        root_spec = doc
    elif len(doc) == 1:
        root_name, root_spec = next(iter(doc.items()))
        if not isinstance(root_spec, dict):
            raise UnsupportedRoot(f"{source_name}: root value under {root_name!r} is not a schema object")
    else:
        raise UnsupportedRoot(f"{source_name}: expected a single named root or a titled schema")

    root = _build_node(root_name, root_spec, "", warnings, source_name)
    if root.kind != "object":
        raise UnsupportedRoot(f"{source_name}: root kind is {root.kind}, expected object")

    index: dict[str, SchemaNode] = {}
    names: dict[str, list[SchemaNode]] = {}
    _register(root, index, names, is_root=True)
    return AnnotatedSchema(
        root=root,
        source_name=source_name,
        raw=doc,
        parse_warnings=tuple(warnings),
        index=index,
        names={k: tuple(v) for k, v in names.items()},
    )


def _build_node(
    name: str, spec: dict, path: str, warnings: list[LintWarning], source_name: str
) -> SchemaNode:
    for key in spec:
        if key not in SUPPORTED_KEYWORDS:
            warnings.append(
                LintWarning(path, "ignored_keyword", f"keyword {key!r} is not supported and was ignored")
            )

    kind = spec.get("type")
    if kind is None:
        if isinstance(spec.get("properties"), dict):
            kind = "object"
        elif "items" in spec:
            kind = "array"
        else:
            kind = "string"
            warnings.append(
                LintWarning(path, "assumed_kind", "node has no type and no structure; assumed string")
            )
    if kind not in KINDS:
        raise UnknownKind(f"{source_name}: {path or '<root>'}: unsupported type {kind!r}")

    description = spec.get("description") if isinstance(spec.get("description"), str) else None
    id_tag = spec.get("$id") if isinstance(spec.get("$id"), str) else None

    children: dict[str, SchemaNode] = {}
    item: SchemaNode | None = None
    if kind == "object":
        for child_name, child_spec in (spec.get("properties") or {}).items():
            if not isinstance(child_spec, dict):
                warnings.append(
                    LintWarning(
                        _join(path, child_name),
                        "skipped_property",
                        f"property {child_name!r} is not a schema object and was skipped",
                    )
                )
                continue
            children[child_name] = _build_node(
                child_name, child_spec, _join(path, child_name), warnings, source_name
            )
    elif kind == "array":
        item_spec = spec.get("items")
        if not isinstance(item_spec, dict):
            item_spec = {"type": "string"}
            warnings.append(LintWarning(path, "assumed_kind", "array without items; assumed string items"))
        # Item nodes are anonymous: they share the array's path so that the
        # item object's children sit directly under the array.
        item = _build_node("", item_spec, path, warnings, source_name)

    return SchemaNode(
        name=name, path=path, kind=kind, description=description, id_tag=id_tag,
        children=children, item=item,
    )


def _join(path: str, name: str) -> str:
    return name if not path else f"{path}/{name}"


def _register(
    node: SchemaNode, index: dict[str, SchemaNode], names: dict[str, list[SchemaNode]], is_root: bool = False
) -> None:
    if node.name or is_root:
        index[node.path] = node
        if not is_root:
            names.setdefault(node.name.casefold(), []).append(node)
    for child in node.children.values():
        _register(child, index, names)
    if node.item is not None:
        for child in node.item.children.values():
            _register(child, index, names)


def node_at(schema: AnnotatedSchema, path: str) -> SchemaNode:
    """Return the named node at ``path`` ("" addresses the root)."""
    try:
        return schema.index[path]
    except KeyError:
        raise NoSuchPath(f"{schema.source_name}: no node at {path!r}") from None


def lint_schema(schema: AnnotatedSchema) -> list[LintWarning]:
    """Parse-time warnings plus leaf nodes lacking an embedded prompt."""
    found = list(schema.parse_warnings)
    for node in schema.nodes():
        if node.is_leaf and node.name and not node.description:
            found.append(
                LintWarning(node.path, "missing_description", f"leaf {node.name!r} has no description")
            )
    return found


def serialize_schema(schema: AnnotatedSchema) -> str:
    """Render the template back to text, preserving original key order."""
    return json.dumps(schema.raw, indent=2, ensure_ascii=False)


def load_builtin_template(name: str) -> AnnotatedSchema:
    """Load a shipped template: ``general_info`` or ``progression``."""
    text = resources.files(__package__).joinpath(f"templates/{name}.json").read_text("utf-8")
    return parse_schema(text, name)


def _kind_of(value: Any) -> str:
    if isinstance(value, bool):
        return "boolean"
    if isinstance(value, str):
        return "string"
    if isinstance(value, int):
        return "integer"
    if isinstance(value, float):
        return "number"
    if isinstance(value, dict):
        return "object"
    if isinstance(value, list):
        return "array"
    if value is None:
        return "null"
    return type(value).__name__


def _leaf_conforms(kind: str, value: Any) -> bool:
    if isinstance(value, bool):
        return False
    if kind == "string":
        return isinstance(value, str)
    if kind == "integer":
        if isinstance(value, int):
            return True
        return isinstance(value, float) and math.isfinite(value) and value.is_integer()
    if kind == "number":
        return isinstance(value, (int, float)) and math.isfinite(value)
    return False


def validate_instance(schema: AnnotatedSchema, value: Any) -> ValidationReport:
    """Check a generic structured value against the template.

    The canonical instance shape wraps the payload in the root node's name
    (``{"Scenario": {...}}``). Type mismatches and bad array items are
    errors; unknown, missing, and misplaced keys are warnings. An unknown
    key whose name matches exactly one schema node elsewhere is reported
    as ``misplaced_key`` with the suggested path, and its subtree is
    checked against that node so nested defects still surface.
    """
    issues: list[ValidationIssue] = []
    if not isinstance(value, dict):
        issues.append(ValidationIssue("", ERROR, "type_mismatch", "object", _kind_of(value)))
        return ValidationReport(tuple(issues))
    _check_keys(schema, {schema.root.name: schema.root}, value, "", issues)
    return ValidationReport(tuple(issues))


def _check_keys(
    schema: AnnotatedSchema,
    expected: dict[str, SchemaNode],
    actual: dict,
    vpath: str,
    issues: list[ValidationIssue],
) -> None:
    for key, val in actual.items():
        child_path = _join(vpath, str(key))
        if key in expected:
            _check_node(schema, expected[key], val, child_path, issues)
            continue
        matches = schema.names.get(str(key).casefold(), ())
        if len(matches) == 1:
            issues.append(
                ValidationIssue(child_path, WARNING, "misplaced_key", matches[0].path, str(key))
            )
            _check_node(schema, matches[0], val, child_path, issues)
        else:
            issues.append(ValidationIssue(child_path, WARNING, "unknown_key", "", str(key)))
    for name, node in expected.items():
        if name not in actual:
            issues.append(ValidationIssue(node.path, WARNING, "missing_key", name, "absent"))


def _check_node(
    schema: AnnotatedSchema, node: SchemaNode, value: Any, vpath: str, issues: list[ValidationIssue]
) -> None:
    if node.kind == "object":
        if not isinstance(value, dict):
            issues.append(ValidationIssue(vpath, ERROR, "type_mismatch", "object", _kind_of(value)))
            return
        _check_keys(schema, node.children, value, vpath, issues)
    elif node.kind == "array":
        if not isinstance(value, list):
            issues.append(ValidationIssue(vpath, ERROR, "type_mismatch", "array", _kind_of(value)))
            return
        item = node.item
        assert item is not None
        for i, element in enumerate(value):
            epath = f"{vpath}[{i}]"
            if item.kind == "object":
                if not isinstance(element, dict):
                    issues.append(ValidationIssue(epath, ERROR, "bad_array_item", "object", _kind_of(element)))
                else:
                    _check_keys(schema, item.children, element, epath, issues)
            elif item.kind == "array":
                _check_node(schema, item, element, epath, issues)
            elif not _leaf_conforms(item.kind, element):
                issues.append(ValidationIssue(epath, ERROR, "bad_array_item", item.kind, _kind_of(element)))
    elif not _leaf_conforms(node.kind, value):
        issues.append(ValidationIssue(vpath, ERROR, "type_mismatch", node.kind, _kind_of(value)))
