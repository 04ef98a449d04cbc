"""Locating a generated snippet in a source file and applying the fix.

Anchoring tiers: exact substring, whitespace-normalized substring, then a
fuzzy line-window search that must find a unique best window above a
similarity threshold (default 0.9 on whitespace-normalized text).
Ambiguity at any tier is an error rather than a guess; the source project
is never modified in place.
"""
from __future__ import annotations

import difflib
import re
from dataclasses import dataclass
from pathlib import Path

from .errors import AnchorError
from .solidity.project import ProjectAst
from .source import SourceSpan

DEFAULT_FUZZY_THRESHOLD = 0.9


@dataclass
class AnchoredPatch:
    rel_path: str
    original_text: str   # whole file before
    patched_text: str    # whole file after
    matched_snippet: str  # exact text that was replaced
    anchor: SourceSpan
    diff: str
    method: str  # exact | whitespace | fuzzy


def _normalize_ws(text: str) -> str:
    return " ".join(text.split())


def _offset_to_linecol(text: str, offset: int) -> tuple[int, int]:
    line = text.count("\n", 0, offset) + 1
    last_nl = text.rfind("\n", 0, offset)
    return line, offset - last_nl


def _span_from_offsets(file_id: int, text: str, start: int,
                       end: int) -> SourceSpan:
    start_line, start_col = _offset_to_linecol(text, start)
    end_line, end_col = _offset_to_linecol(text, max(end - 1, start))
    return SourceSpan(file_id, start_line, start_col, end_line, end_col)


def _find_all(haystack: str, needle: str) -> list[int]:
    found = []
    start = 0
    while True:
        pos = haystack.find(needle, start)
        if pos < 0:
            return found
        found.append(pos)
        start = pos + 1


def _ws_normalized_matches(text: str, snippet: str) -> list[tuple[int, int]]:
    """Occurrences of ``snippet`` ignoring whitespace runs; returns
    (start, end) offsets into the original text."""
    tokens = snippet.split()
    if not tokens:
        return []
    pattern = r"[ \t\r\n]*".join(re.escape(token) for token in tokens)
    return [(m.start(), m.end())
            for m in re.finditer(pattern, text)]


def find_anchor(text: str, snippet: str,
                threshold: float = DEFAULT_FUZZY_THRESHOLD
                ) -> tuple[int, int, str]:
    """(start, end, method) of the unique location of ``snippet``."""
    snippet = snippet.strip("\n")
    if not snippet.strip():
        raise AnchorError.not_found()

    exact = _find_all(text, snippet)
    if len(exact) == 1:
        return exact[0], exact[0] + len(snippet), "exact"
    if len(exact) > 1:
        raise AnchorError.ambiguous(len(exact))

    ws = _ws_normalized_matches(text, snippet)
    if len(ws) == 1:
        return ws[0][0], ws[0][1], "whitespace"
    if len(ws) > 1:
        raise AnchorError.ambiguous(len(ws))

    return _fuzzy_anchor(text, snippet, threshold)


def _fuzzy_anchor(text: str, snippet: str,
                  threshold: float) -> tuple[int, int, str]:
    lines = text.splitlines()
    window = max(len(snippet.splitlines()), 1)
    target = _normalize_ws(snippet)
    if not lines or window > len(lines):
        raise AnchorError.not_found()

    # line offsets for mapping a window back to character positions
    offsets = [0]
    for line in lines:
        offsets.append(offsets[-1] + len(line) + 1)

    scored: list[tuple[float, int]] = []
    for start in range(len(lines) - window + 1):
        candidate = _normalize_ws("\n".join(lines[start:start + window]))
        ratio = difflib.SequenceMatcher(None, target, candidate,
                                        autojunk=False).ratio()
        if ratio >= threshold:
            scored.append((ratio, start))
    if not scored:
        raise AnchorError.not_found()
    scored.sort(key=lambda item: (-item[0], item[1]))
    best_ratio = scored[0][0]
    # near-ties (overlapping windows aside) mean the anchor is not unique
    contenders = sorted(start for ratio, start in scored
                        if best_ratio - ratio < 1e-9)
    distinct: list[int] = []
    for start in contenders:
        if not distinct or start - distinct[-1] >= window:
            distinct.append(start)
    if len(distinct) > 1:
        raise AnchorError.ambiguous(len(distinct))
    start_line = scored[0][1]
    start = offsets[start_line]
    end = offsets[start_line + window] - 1
    end = min(end, len(text))
    return start, end, "fuzzy"


def resolve_pair_file(project: ProjectAst, named: str) -> str:
    """Match a pair's file name against project files (exact path first,
    then unique basename)."""
    named = named.strip().replace("\\", "/").lstrip("./")
    paths = [f.path for f in project.files]
    if named in paths:
        return named
    base = named.split("/")[-1]
    matches = [p for p in paths if p.split("/")[-1] == base]
    if len(matches) == 1:
        return matches[0]
    if not matches:
        raise AnchorError.not_found()
    raise AnchorError.ambiguous(len(matches))


def anchor_and_apply(pair, project: ProjectAst,
                     output_dir: str | Path | None = None,
                     threshold: float = DEFAULT_FUZZY_THRESHOLD
                     ) -> AnchoredPatch:
    """Locate ``pair.original_snippet`` and produce the patched file copy.

    Writes the patched file under ``output_dir``/patched/ when an output
    directory is given; the input project tree is never touched.
    """
    rel_path = resolve_pair_file(project, pair.file)
    source = project.file_by_path(rel_path)
    text = source.text

    start, end, method = find_anchor(text, pair.original_snippet, threshold)
    matched = text[start:end]
    replacement = pair.fixed_snippet.strip("\n")
    patched = text[:start] + replacement + text[end:]

    diff = "".join(difflib.unified_diff(
        text.splitlines(keepends=True), patched.splitlines(keepends=True),
        fromfile=f"a/{rel_path}", tofile=f"b/{rel_path}"))

    anchor = _span_from_offsets(source.file_id, text, start, end)
    result = AnchoredPatch(rel_path, text, patched, matched, anchor, diff,
                           method)
    if output_dir is not None:
        target = Path(output_dir) / "patched" / rel_path
        target.parent.mkdir(parents=True, exist_ok=True)
        target.write_text(patched, encoding="utf-8")
    return result


def apply_unified_diff(text: str, diff: str) -> str:
    """Apply a unified diff produced by :func:`anchor_and_apply` to
    ``text``. Context and deleted lines must match exactly."""
    lines = text.splitlines(keepends=True)
    out: list[str] = []
    cursor = 0  # index into lines
    hunk_re = re.compile(r"^@@ -(\d+)(?:,(\d+))? \+\d+(?:,\d+)? @@")
    diff_lines = diff.splitlines(keepends=True)
    i = 0
    while i < len(diff_lines):
        line = diff_lines[i]
        match = hunk_re.match(line)
        if not match:
            i += 1
            continue
        old_start = int(match.group(1))
        out.extend(lines[cursor:old_start - 1])
        cursor = old_start - 1
        i += 1
        while i < len(diff_lines) and not diff_lines[i].startswith("@@"):
            hunk_line = diff_lines[i]
            if hunk_line.startswith("---") or hunk_line.startswith("+++"):
                i += 1
                continue
            tag, body = hunk_line[:1], hunk_line[1:]
            if tag == " ":
                if cursor >= len(lines) or lines[cursor].rstrip("\n") \
                        != body.rstrip("\n"):
                    raise AnchorError.not_found()
                out.append(lines[cursor])
                cursor += 1
            elif tag == "-":
                if cursor >= len(lines) or lines[cursor].rstrip("\n") \
                        != body.rstrip("\n"):
                    raise AnchorError.not_found()
                cursor += 1
            elif tag == "+":
                out.append(body)
            elif tag == "\\":
                pass  # "No newline at end of file"
            else:
                break
            i += 1
    out.extend(lines[cursor:])
    return "".join(out)
