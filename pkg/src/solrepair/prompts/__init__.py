"""Prompt templates and structured-reply parsing.

Each template is a data file with a two-line header (``id:`` and
``slots:``, trailing ``?`` marking a slot optional) followed by three
marked sections::

    === role_playing ===
    === task_description ===
    === expected_output ===

Rendering emits four labeled sections in fixed order (Role-Playing, Task
Description, Expected Output, External Information); the external section
lists every bound slot under its own ``### name`` header in declared
order. Rendering is deterministic: the binding digest hashes the template
id plus all sorted slot names and values.

Replies that carry data for the next stage must contain a fenced JSON
block; :func:`parse_structured_reply` validates it against a fixed schema
per stage.
"""
from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass
from pathlib import Path

from ..errors import FormatError, MissingSlot

TEMPLATE_IDS = ("Q1", "Q2", "Q3", "Q4", "Q5", "Q6", "VALIDATOR")

SCHEMAS = ("q1_entities", "q3_strategies", "q5_pair", "q6_pair",
           "validator_verdict")

_SECTION_RE = re.compile(r"^===\s*(\w+)\s*===\s*$", re.MULTILINE)
_PLACEHOLDER_RE = re.compile(r"\{([a-z][a-z0-9_]*)\}")


@dataclass(frozen=True)
class SlotSpec:
    name: str
    required: bool = True


@dataclass(frozen=True)
class PromptTemplate:
    id: str
    role_playing: str
    task_description: str
    expected_output: str
    slots: tuple[SlotSpec, ...]

    def required_slots(self) -> list[str]:
        return [s.name for s in self.slots if s.required]


@dataclass(frozen=True)
class RenderedPrompt:
    template_id: str
    text: str
    digest: str
    role_text: str = ""  # role-playing part, for system-message placement
    body_text: str = ""


def _parse_template(text: str, source: str) -> PromptTemplate:
    header, *rest = _SECTION_RE.split(text)
    head_fields: dict[str, str] = {}
    for line in header.strip().splitlines():
        key, _, value = line.partition(":")
        head_fields[key.strip()] = value.strip()
    if "id" not in head_fields:
        raise ValueError(f"{source}: template header missing 'id:'")
    slots = []
    for raw in filter(None, (s.strip() for s in
                             head_fields.get("slots", "").split(","))):
        if raw.endswith("?"):
            slots.append(SlotSpec(raw[:-1], required=False))
        else:
            slots.append(SlotSpec(raw))
    sections = dict(zip(rest[0::2], (part.strip() for part in rest[1::2])))
    missing = {"role_playing", "task_description",
               "expected_output"} - set(sections)
    if missing:
        raise ValueError(f"{source}: template missing sections {missing}")
    return PromptTemplate(head_fields["id"], sections["role_playing"],
                          sections["task_description"],
                          sections["expected_output"], tuple(slots))


def load_templates(directory: str | Path | None = None
                   ) -> dict[str, PromptTemplate]:
    """Load all ``*.tmpl`` files; defaults to the built-in template set."""
    directory = Path(directory) if directory else \
        Path(__file__).parent / "templates"
    templates: dict[str, PromptTemplate] = {}
    for path in sorted(directory.glob("*.tmpl")):
        template = _parse_template(path.read_text(encoding="utf-8"),
                                   str(path))
        templates[template.id] = template
    if not templates:
        raise ValueError(f"no *.tmpl files under {directory}")
    return templates


_DEFAULT_TEMPLATES: dict[str, PromptTemplate] | None = None


def default_templates() -> dict[str, PromptTemplate]:
    global _DEFAULT_TEMPLATES
    if _DEFAULT_TEMPLATES is None:
        _DEFAULT_TEMPLATES = load_templates()
    return _DEFAULT_TEMPLATES


def render(template_id: str, bindings: dict[str, str],
           templates: dict[str, PromptTemplate] | None = None
           ) -> RenderedPrompt:
    templates = templates or default_templates()
    if template_id not in templates:
        raise KeyError(f"unknown template {template_id!r}")
    template = templates[template_id]

    for slot in template.required_slots():
        if slot not in bindings:
            raise MissingSlot(slot, template_id)

    def fill(text: str) -> str:
        def sub(match):
            name = match.group(1)
            if name not in bindings:
                raise MissingSlot(name, template_id)
            return bindings[name]
        return _PLACEHOLDER_RE.sub(sub, text)

    # scalar bindings not declared as slots fill task placeholders only
    external_lines: list[str] = []
    for spec in template.slots:
        if spec.name in bindings:
            external_lines.append(f"### {spec.name}")
            external_lines.append(bindings[spec.name].rstrip("\n"))
            external_lines.append("")

    role = template.role_playing
    body = "\n".join([
        "## Task Description",
        fill(template.task_description),
        "",
        "## Expected Output",
        template.expected_output,
        "",
        "## External Information",
        *external_lines,
    ]).rstrip("\n") + "\n"
    text = f"## Role-Playing\n{role}\n\n{body}"

    digest_input = template_id + "\x00" + "\x00".join(
        f"{name}\x1f{bindings[name]}" for name in sorted(bindings))
    digest = hashlib.sha256(digest_input.encode("utf-8")).hexdigest()
    return RenderedPrompt(template_id, text, digest,
                          role_text=f"## Role-Playing\n{role}",
                          body_text=body)


# --- structured replies ---

_FENCE_BLOCK_RE = re.compile(r"```[a-zA-Z]*\s*\n(.*?)```", re.DOTALL)


def _first_fenced_block(text: str) -> str:
    match = _FENCE_BLOCK_RE.search(text)
    if not match:
        raise FormatError("reply contains no fenced structured block")
    return match.group(1)


def parse_structured_reply(text: str, schema_id: str):
    """Validate the first fenced block of ``text`` against ``schema_id``.

    Schemas: ``q1_entities`` (three string arrays), ``q3_strategies``
    (ordered list of title/rationale objects), ``q5_pair``/``q6_pair``
    (file, original_snippet, fixed_snippet, explanation) and
    ``validator_verdict`` (fixed flag plus recommendations).
    """
    if schema_id not in SCHEMAS:
        raise ValueError(f"unknown schema {schema_id!r}")
    block = _first_fenced_block(text)
    try:
        value = json.loads(block)
    except json.JSONDecodeError as exc:
        raise FormatError(f"invalid JSON: {exc.msg}",
                          position=f"line {exc.lineno} col {exc.colno}")

    if schema_id == "q1_entities":
        if not isinstance(value, dict):
            raise FormatError("expected an object with three arrays")
        out: dict[str, list[str]] = {}
        for key in ("contracts", "functions", "state_variables"):
            if key not in value:
                raise FormatError(f"missing field {key!r}", position=key)
            items = value[key]
            if (not isinstance(items, list)
                    or not all(isinstance(i, str) for i in items)):
                raise FormatError(f"field {key!r} must be a string array",
                                  position=key)
            out[key] = items
        return out

    if schema_id == "q3_strategies":
        if not isinstance(value, list):
            raise FormatError("expected an array of strategies")
        strategies = []
        for i, item in enumerate(value):
            if not isinstance(item, dict):
                raise FormatError("strategy must be an object",
                                  position=f"index {i}")
            for key in ("title", "rationale"):
                if not isinstance(item.get(key), str) or not item[key]:
                    raise FormatError(
                        f"strategy missing text field {key!r}",
                        position=f"index {i}")
            strategies.append({"title": item["title"],
                               "rationale": item["rationale"]})
        return strategies

    if schema_id in ("q5_pair", "q6_pair"):
        if not isinstance(value, dict):
            raise FormatError("expected a patch object")
        for key in ("file", "original_snippet", "fixed_snippet",
                    "explanation"):
            if key not in value:
                raise FormatError(f"missing field {key!r}", position=key)
            if not isinstance(value[key], str):
                raise FormatError(f"field {key!r} must be a string",
                                  position=key)
        return {key: value[key] for key in ("file", "original_snippet",
                                            "fixed_snippet", "explanation")}

    # validator_verdict
    if not isinstance(value, dict):
        raise FormatError("expected a verdict object")
    if not isinstance(value.get("fixed"), bool):
        raise FormatError("missing boolean field 'fixed'", position="fixed")
    recommendations = value.get("recommendations", [])
    if (not isinstance(recommendations, list)
            or not all(isinstance(r, str) for r in recommendations)):
        raise FormatError("'recommendations' must be a string array",
                          position="recommendations")
    return {"fixed": value["fixed"], "recommendations": recommendations}


def format_reply(value, schema_id: str) -> str:
    """Inverse of :func:`parse_structured_reply`: a minimal valid reply."""
    if schema_id not in SCHEMAS:
        raise ValueError(f"unknown schema {schema_id!r}")
    return "```json\n" + json.dumps(value, indent=2, sort_keys=True) \
        + "\n```\n"


def parse_numbered_steps(text: str) -> list[str]:
    """Ordered steps from a numbered-list reply (used by the attack-analysis
    stage, whose output is prose rather than JSON)."""
    steps: list[tuple[int, str]] = []
    for line in text.splitlines():
        match = re.match(r"^\s*(\d+)[.)]\s+(.*\S)\s*$", line)
        if match:
            steps.append((int(match.group(1)), match.group(2)))
    if not steps:
        raise FormatError("reply contains no numbered steps")
    return [step for _, step in steps]
