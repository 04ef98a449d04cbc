"""Audit-report parsing and entity extraction.

The canonical input is a Markdown report with one heading per finding
(see docs/report-format.md). Severity is read from heading markers like
``[H-01]``/``(High)`` or a ``Severity:`` line; fenced code blocks and
inline code become code references; a "Recommended Mitigation" /
"Recommendation" subsection populates the finding's recommendation, which
only the evaluation harness consumes as ground truth.

A file without headings is treated as a single plain-text finding.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path

from .errors import FindingNotFound, FormatError, ReportError

SEVERITIES = ("High", "Medium", "Low", "Informational", "Unknown")

_SEVERITY_BY_LETTER = {"H": "High", "M": "Medium", "L": "Low",
                       "I": "Informational", "G": "Informational",
                       "Q": "Informational", "C": "High"}

_HEADING_RE = re.compile(r"^(#{1,6})\s+(.*?)\s*$")
_FENCE_RE = re.compile(r"^(```+|~~~+)(.*)$")
_SEVERITY_LINE_RE = re.compile(
    r"^\*{0,2}Severity\*{0,2}\s*[:=]\s*\*{0,2}\s*(\w+)", re.IGNORECASE)
_RECOMMENDATION_HEAD_RE = re.compile(
    r"recommended mitigation|recommendation", re.IGNORECASE)


@dataclass
class CodeRef:
    text: str
    file_hint: str | None = None
    line_hint: int | None = None


@dataclass
class Finding:
    title: str
    severity: str
    description: str
    code_refs: list[CodeRef] = field(default_factory=list)
    recommendation: str | None = None
    raw: str = ""  # heading line plus body, exactly as read


@dataclass
class AuditReport:
    source_path: str
    findings: list[Finding]
    preamble: str = ""


@dataclass
class EntityMention:
    kind: str  # Contract | Function | StateVariable
    name: str
    confidence: str  # explicit | recognized


def parse_report(path: str | Path) -> AuditReport:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except FileNotFoundError:
        raise ReportError(f"report not found: {path}")
    except (UnicodeDecodeError, ValueError) as exc:
        raise ReportError(f"report is not readable UTF-8 text: {exc}")
    if "\x00" in text:
        raise ReportError(f"report looks binary: {path}")

    lines = text.splitlines(keepends=True)
    split_level = _finding_heading_level(lines)
    if split_level is None:
        finding = _build_finding("(untitled finding)", text)
        if not finding.description.strip():
            raise ReportError(f"report has no headings and no text: {path}")
        finding.raw = text
        return AuditReport(str(path), [finding], preamble="")

    preamble_parts: list[str] = []
    sections: list[tuple[str, list[str]]] = []  # (title, raw lines)
    current: list[str] | None = None
    in_fence = None
    for line in lines:
        fence = _FENCE_RE.match(line.strip())
        if fence and not in_fence:
            in_fence = fence.group(1)[0] * 3
        elif in_fence and line.strip().startswith(in_fence):
            in_fence = None
        heading = None if in_fence else _HEADING_RE.match(line)
        if heading and len(heading.group(1)) == split_level:
            current = [line]
            sections.append((heading.group(2), current))
        elif current is not None:
            current.append(line)
        else:
            preamble_parts.append(line)

    findings = []
    for title, raw_lines in sections:
        raw = "".join(raw_lines)
        body = "".join(raw_lines[1:])
        finding = _build_finding(title, body)
        finding.raw = raw
        findings.append(finding)
    if not findings:
        raise ReportError(f"no findings in report: {path}")
    return AuditReport(str(path), findings, preamble="".join(preamble_parts))


def _finding_heading_level(lines: list[str]) -> int | None:
    """Shallowest of levels 2 and 3 that appears; findings split there."""
    levels = set()
    in_fence = None
    for line in lines:
        fence = _FENCE_RE.match(line.strip())
        if fence and not in_fence:
            in_fence = fence.group(1)[0] * 3
            continue
        if in_fence:
            if line.strip().startswith(in_fence):
                in_fence = None
            continue
        match = _HEADING_RE.match(line)
        if match:
            levels.add(len(match.group(1)))
    for level in (2, 3):
        if level in levels:
            return level
    return None


def _build_finding(title: str, body: str) -> Finding:
    severity = _severity_from_title(title)
    lines = body.splitlines()

    code_refs: list[CodeRef] = []
    description_parts: list[str] = []
    recommendation_parts: list[str] = []
    in_recommendation = False
    fence_lang = None
    fence_lines: list[str] = []
    file_hint: str | None = None

    i = 0
    while i < len(lines):
        line = lines[i]
        stripped = line.strip()
        fence = _FENCE_RE.match(stripped)
        if fence_lang is None and fence:
            fence_lang = fence.group(2).strip() or "text"
            fence_lines = []
            i += 1
            continue
        if fence_lang is not None:
            if fence and not fence.group(2).strip():
                hint = file_hint or _file_hint_in(fence_lines)
                code_refs.append(CodeRef("\n".join(fence_lines),
                                         file_hint=hint,
                                         line_hint=_first_line_hint(
                                             fence_lines)))
                fence_lang = None
                file_hint = None
            else:
                fence_lines.append(line)
            i += 1
            continue

        heading = _HEADING_RE.match(line)
        if heading and _RECOMMENDATION_HEAD_RE.search(heading.group(2)):
            in_recommendation = True
            i += 1
            continue
        if heading and in_recommendation:
            in_recommendation = False  # next subsection ends it
        bold_label = re.match(r"^\*\*(.+?)[:]?\*\*:?\s*$", stripped)
        if bold_label and _RECOMMENDATION_HEAD_RE.search(bold_label.group(1)):
            in_recommendation = True
            i += 1
            continue

        severity_line = _SEVERITY_LINE_RE.match(stripped)
        if severity_line and severity == "Unknown":
            candidate = severity_line.group(1).capitalize()
            if candidate in SEVERITIES:
                severity = candidate

        hint = re.match(r"^File:\s*(\S+)", stripped)
        if hint:
            file_hint = hint.group(1)

        if in_recommendation:
            recommendation_parts.append(line)
        else:
            description_parts.append(line)
        i += 1

    if fence_lang is not None:  # unterminated fence: keep what we saw
        code_refs.append(CodeRef("\n".join(fence_lines)))

    for inline in re.findall(r"`([^`\n]+)`", body):
        code_refs.append(CodeRef(inline))

    recommendation = "\n".join(recommendation_parts).strip() or None
    return Finding(title=title.strip(), severity=severity,
                   description="\n".join(description_parts).strip(),
                   code_refs=code_refs, recommendation=recommendation)


def _severity_from_title(title: str) -> str:
    tag = re.search(r"\[([A-Z])-?\d*\]", title)
    if tag and tag.group(1) in _SEVERITY_BY_LETTER:
        return _SEVERITY_BY_LETTER[tag.group(1)]
    word = re.search(r"\((High|Medium|Low|Informational)(?:\s+Risk)?\)",
                     title, re.IGNORECASE)
    if word:
        return word.group(1).capitalize()
    return "Unknown"


def _file_hint_in(code_lines: list[str]) -> str | None:
    for line in code_lines:
        match = re.match(r"^\s*(?://\s*)?File:\s*(\S+)", line)
        if match:
            return match.group(1)
    return None


def _first_line_hint(code_lines: list[str]) -> int | None:
    for line in code_lines:
        match = re.match(r"^\s*(?://\s*)?[Ll](?:ine)?\s*[:.]?\s*(\d+)", line)
        if match:
            return int(match.group(1))
    return None


def select_finding(report: AuditReport, vul_name: str
                   ) -> tuple[Finding, list[str]]:
    """First finding whose title contains ``vul_name`` (case-insensitive).

    Returns the finding and a warning list naming all matches when more
    than one title matched.
    """
    needle = vul_name.lower()
    matches = [f for f in report.findings if needle in f.title.lower()]
    if not matches:
        raise FindingNotFound(vul_name, [f.title for f in report.findings])
    warnings = []
    if len(matches) > 1:
        warnings.append(
            f"{len(matches)} findings match {vul_name!r}: "
            + "; ".join(f.title for f in matches)
            + " -- using the first")
    return matches[0], warnings


# --- explicit entity extraction ---

_QUALIFIED_CALL_RE = re.compile(
    r"\b([A-Z][A-Za-z0-9_]*)\.([a-zA-Z_][A-Za-z0-9_]*)(\()?")
_BACKTICK_RE = re.compile(r"`([^`\n]+)`")
_CALLISH_RE = re.compile(r"^([A-Za-z_][A-Za-z0-9_]*)\(\)?$")
_SIGNATURE_RE = re.compile(r"\bfunction\s+([A-Za-z_][A-Za-z0-9_]*)\s*\(")


def extract_explicit_functions(finding: Finding) -> list[EntityMention]:
    """Entities the report names outright, in order of first mention."""
    mentions: list[EntityMention] = []
    seen: set[tuple[str, str]] = set()

    def add(kind: str, name: str):
        key = (kind, name.lower())
        if name and key not in seen:
            seen.add(key)
            mentions.append(EntityMention(kind, name, "explicit"))

    texts = [finding.description] + [ref.text for ref in finding.code_refs]
    for text in texts:
        for match in _SIGNATURE_RE.finditer(text):
            add("Function", match.group(1))
        for match in _QUALIFIED_CALL_RE.finditer(text):
            contract, member, paren = match.groups()
            if paren:
                add("Function", f"{contract}.{member}")
            else:
                add("StateVariable", f"{contract}.{member}")

    for snippet in _BACKTICK_RE.findall(finding.description):
        snippet = snippet.strip()
        call = _CALLISH_RE.match(snippet)
        if call and "(" in snippet:
            add("Function", call.group(1))
        elif re.fullmatch(r"[A-Z][A-Za-z0-9_]*", snippet):
            add("Contract", snippet)
        elif _QUALIFIED_CALL_RE.fullmatch(snippet):
            pass  # already collected above
    return mentions


# --- LLM entity recognition ---

def recognize_entities(finding: Finding, gateway,
                       templates=None) -> list[EntityMention]:
    """Ask the backend for entities the prose implies (retries once).

    Falls back by raising: the caller proceeds with explicit mentions when
    this raises :class:`FormatError`.
    """
    from .prompts import render, parse_structured_reply

    explicit = {m.name.lower() for m in extract_explicit_functions(finding)}
    prompt = render("Q1", {"description": finding.description},
                    templates=templates)
    last_error: FormatError | None = None
    for _ in range(2):
        reply = gateway.complete(prompt)
        try:
            parsed = parse_structured_reply(reply, "q1_entities")
        except FormatError as exc:
            last_error = exc
            continue
        mentions = []
        for kind, key in (("Contract", "contracts"),
                          ("Function", "functions"),
                          ("StateVariable", "state_variables")):
            for name in parsed[key]:
                name = name.strip().rstrip("()")
                if name and name.lower() not in explicit:
                    mentions.append(EntityMention(kind, name, "recognized"))
        deduped = []
        seen: set[tuple[str, str]] = set()
        for mention in mentions:
            key = (mention.kind, mention.name.lower())
            if key not in seen:
                seen.add(key)
                deduped.append(mention)
        return deduped
    raise last_error or FormatError("entity recognition returned no reply")
