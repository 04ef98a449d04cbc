"""Exception hierarchy shared across the package.

Every error a caller is expected to branch on gets its own class; plumbing
failures reuse the nearest parent.
"""


class SolRepairError(Exception):
    """Base class for all package errors."""


# --- parsing Solidity sources ---

class ParseError(SolRepairError):
    def __init__(self, message: str, file_id: int = -1, line: int = 0):
        super().__init__(message)
        self.file_id = file_id
        self.line = line

    def __str__(self) -> str:
        base = super().__str__()
        if self.line:
            return f"line {self.line}: {base}"
        return base


class ProjectError(SolRepairError):
    """Raised when a project cannot be analyzed at all (no sources, or
    every source failed to parse). Carries per-file failures."""

    def __init__(self, message: str, failures: list | None = None):
        super().__init__(message)
        self.failures = failures or []


# --- dependency graph ---

class UnknownNode(SolRepairError):
    pass


class GraphIntegrityError(SolRepairError):
    """Adjacency index and edge multiset disagree (test-time audit)."""


# --- audit reports ---

class ReportError(SolRepairError):
    pass


class FindingNotFound(SolRepairError):
    def __init__(self, vul_name: str, titles: list[str]):
        super().__init__(
            f"no finding title contains {vul_name!r}; available: "
            + "; ".join(titles)
        )
        self.vul_name = vul_name
        self.titles = titles


# --- localization ---

class EmptySeedSet(SolRepairError):
    def __init__(self, near_misses: list[str]):
        msg = "no report entity resolved to a graph node"
        if near_misses:
            msg += "; close names: " + ", ".join(near_misses)
        super().__init__(msg)
        self.near_misses = near_misses


class SpanOutOfRange(SolRepairError):
    pass


# --- prompts ---

class MissingSlot(SolRepairError):
    def __init__(self, slot: str, template_id: str = ""):
        where = f" in template {template_id}" if template_id else ""
        super().__init__(f"missing required slot {slot!r}{where}")
        self.slot = slot


class FormatError(SolRepairError):
    """A structured LLM reply failed validation."""

    def __init__(self, message: str, position: str = ""):
        if position:
            message = f"{message} (at {position})"
        super().__init__(message)
        self.position = position


# --- LLM backend ---

class LlmUnavailable(SolRepairError):
    pass


class ReplayMiss(SolRepairError):
    def __init__(self, digest: str):
        super().__init__(f"transcript has no entry for prompt digest {digest}")
        self.digest = digest


class TranscriptCorrupt(SolRepairError):
    def __init__(self, path: str, line: int, reason: str):
        super().__init__(f"{path}:{line}: {reason}")
        self.line = line


# --- patching ---

class AnchorError(SolRepairError):
    """Original snippet could not be located uniquely in the target file."""

    NOT_FOUND = "NotFound"

    def __init__(self, reason: str, count: int = 0):
        self.reason = reason
        self.count = count
        if reason == "Ambiguous":
            super().__init__(f"snippet matches {count} locations")
        else:
            super().__init__("snippet not found in target file")

    @classmethod
    def ambiguous(cls, count: int) -> "AnchorError":
        return cls("Ambiguous", count)

    @classmethod
    def not_found(cls) -> "AnchorError":
        return cls(cls.NOT_FOUND)


class CompilerMissing(SolRepairError):
    pass


# --- evaluation ---

class EmptyCorpus(SolRepairError):
    pass
