"""Source files and source spans.

Spans are 1-based and inclusive on both ends; the end column points at the
last character of the spanned text, so slicing helpers convert to offsets.
"""
from __future__ import annotations

from dataclasses import dataclass, field

from .errors import SpanOutOfRange


@dataclass(frozen=True)
class SourceSpan:
    file_id: int
    start_line: int
    start_col: int
    end_line: int
    end_col: int

    def __post_init__(self):
        if (self.start_line, self.start_col) > (self.end_line, self.end_col):
            raise ValueError(f"span start after end: {self}")

    def __str__(self) -> str:
        return (f"{self.file_id}:{self.start_line}:{self.start_col}"
                f"-{self.end_line}:{self.end_col}")

    @classmethod
    def parse(cls, text: str) -> "SourceSpan":
        head, _, tail = text.partition("-")
        fid, sl, sc = head.split(":")
        el, ec = tail.split(":")
        return cls(int(fid), int(sl), int(sc), int(el), int(ec))

    def merge(self, other: "SourceSpan") -> "SourceSpan":
        assert self.file_id == other.file_id
        start = min((self.start_line, self.start_col),
                    (other.start_line, other.start_col))
        end = max((self.end_line, self.end_col),
                  (other.end_line, other.end_col))
        return SourceSpan(self.file_id, *start, *end)


@dataclass(frozen=True)
class SourceFile:
    path: str  # project-relative, normalized with forward slashes
    text: str
    file_id: int

    def __post_init__(self):
        parts = self.path.replace("\\", "/").split("/")
        if "." in parts or ".." in parts:
            raise ValueError(f"path not normalized: {self.path}")

    # line starts are derived, not stored, to keep the dataclass frozen-cheap
    def _line_starts(self) -> list[int]:
        starts = [0]
        for i, ch in enumerate(self.text):
            if ch == "\n":
                starts.append(i + 1)
        return starts

    def offset(self, line: int, col: int) -> int:
        """1-based (line, col) to 0-based character offset."""
        starts = self._line_starts()
        if not 1 <= line <= len(starts):
            raise SpanOutOfRange(f"line {line} outside {self.path}")
        off = starts[line - 1] + (col - 1)
        if off > len(self.text):
            raise SpanOutOfRange(f"{line}:{col} outside {self.path}")
        return off

    def slice(self, span: SourceSpan) -> str:
        """Text addressed by ``span`` (end position inclusive)."""
        if span.file_id != self.file_id:
            raise SpanOutOfRange(
                f"span file {span.file_id} != {self.file_id} ({self.path})")
        start = self.offset(span.start_line, span.start_col)
        end = self.offset(span.end_line, span.end_col) + 1
        if end > len(self.text):
            raise SpanOutOfRange(f"span {span} beyond end of {self.path}")
        return self.text[start:end]

    def line_text(self, line: int) -> str:
        starts = self._line_starts()
        if not 1 <= line <= len(starts):
            raise SpanOutOfRange(f"line {line} outside {self.path}")
        start = starts[line - 1]
        end = starts[line] - 1 if line < len(starts) else len(self.text)
        return self.text[start:end]


def normalize_rel_path(path: str) -> str:
    """Collapse ``.``/``..`` segments and backslashes in a relative path."""
    parts: list[str] = []
    for part in path.replace("\\", "/").split("/"):
        if part in ("", "."):
            continue
        if part == "..":
            if parts:
                parts.pop()
            continue
        parts.append(part)
    return "/".join(parts)
