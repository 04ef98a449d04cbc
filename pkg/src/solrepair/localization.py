"""Seed resolution, contextual dependency graph, and program slices.

Report entities are matched to graph nodes in three tiers: exact qualified
name, unique unqualified name, then case-insensitive unqualified name.
The contextual graph is the induced subgraph within a hop radius of the
seeds (default 2, edges undirected); slices collect the full source of
every function in it plus the declaration line of every state variable,
with a character budget that drops the furthest-from-seed snippets first.
"""
from __future__ import annotations

import difflib
from dataclasses import dataclass, field

from .depgraph import DependencyGraph, DepNode, EdgeKind, NodeKind
from .errors import EmptySeedSet, SpanOutOfRange
from .report import EntityMention
from .solidity.project import ProjectAst
from .source import SourceSpan

DEFAULT_RADIUS = 2
DEFAULT_SLICE_BUDGET = 24_000

_KIND_BY_NAME = {"Contract": NodeKind.CONTRACT,
                 "Function": NodeKind.FUNCTION,
                 "StateVariable": NodeKind.STATE_VARIABLE}


@dataclass
class SeedSet:
    resolved: list[DepNode] = field(default_factory=list)
    unresolved: list[EntityMention] = field(default_factory=list)
    provenance: dict[tuple, str] = field(default_factory=dict)

    def add(self, node: DepNode, provenance: str) -> bool:
        if node.key in self.provenance:
            return False
        self.resolved.append(node)
        self.provenance[node.key] = provenance
        return True


@dataclass
class ContextualDependencyGraph:
    graph: DependencyGraph  # induced subgraph
    seeds: list[DepNode]
    radius: int
    distance: dict[tuple, int]  # node key -> hops from nearest seed

    @property
    def nodes(self) -> list[DepNode]:
        return self.graph.nodes

    @property
    def edges(self):
        return self.graph.edges

    def serialize(self) -> str:
        lines = [f"# radius {self.radius}"]
        lines += [f"# seed {node.kind.value} {node.qualified_name}"
                  for node in sorted(self.seeds,
                                     key=lambda s: s.qualified_name)]
        return "\n".join(lines) + "\n" + self.graph.serialize()


@dataclass
class SliceSnippet:
    qualified_name: str
    span: SourceSpan
    text: str
    path: str = ""


@dataclass
class ProgramSlice:
    snippets: list[SliceSnippet]
    contract_headers: list[tuple[str, str]]  # (contract name, file path)
    total_size: int = 0

    def render(self) -> str:
        """Plain-text dump grouped by file, as embedded in prompts."""
        paths = sorted({s.path for s in self.snippets}
                       | {path for _, path in self.contract_headers})
        parts: list[str] = []
        for path in paths:
            parts.append(f"// file: {path}")
            for name, header_path in self.contract_headers:
                if header_path == path:
                    parts.append(f"// contract {name}")
            for snippet in self.snippets:
                if snippet.path == path:
                    parts.append(snippet.text)
            parts.append("")
        return "\n\n".join(parts).rstrip("\n") + ("\n" if parts else "")


def resolve_seeds(mentions: list[EntityMention],
                  graph: DependencyGraph) -> SeedSet:
    """Match report mentions to graph nodes; explicit mentions first.

    Raises :class:`EmptySeedSet` (with close-name suggestions) when nothing
    resolves.
    """
    seed_set = SeedSet()
    ordered = ([m for m in mentions if m.confidence == "explicit"]
               + [m for m in mentions if m.confidence != "explicit"])
    for mention in ordered:
        matches = _match_mention(mention, graph)
        if matches:
            for node in matches:
                seed_set.add(node, mention.confidence)
        else:
            seed_set.unresolved.append(mention)
    if not seed_set.resolved:
        short_names = {node.short_name for node in graph.nodes}
        near: list[str] = []
        for mention in mentions:
            wanted = _normalize_name(mention.name).split(".")[-1]
            near.extend(difflib.get_close_matches(wanted, short_names, n=2))
        raise EmptySeedSet(sorted(set(near)))
    return seed_set


def _normalize_name(name: str) -> str:
    name = name.strip().strip("`")
    if "(" in name:
        name = name.split("(", 1)[0]
    return name


def _match_mention(mention: EntityMention,
                   graph: DependencyGraph) -> list[DepNode]:
    wanted = _normalize_name(mention.name)
    kind = _KIND_BY_NAME.get(mention.kind)

    def pick(candidates: list[DepNode]) -> list[DepNode]:
        if not candidates:
            return []
        same_kind = [node for node in candidates if node.kind is kind]
        return same_kind or candidates

    nodes = graph.nodes
    # tier 1: exact qualified name (parameter list ignored for functions)
    exact = [node for node in nodes
             if node.qualified_name == wanted
             or node.qualified_name.split("(")[0] == wanted]
    if exact:
        return pick(exact)
    # tier 2: unqualified name, exact case
    short = wanted.split(".")[-1]
    unqualified = [node for node in nodes if node.short_name == short]
    if unqualified:
        return pick(unqualified)
    # tier 3: unqualified, case-insensitive
    lowered = [node for node in nodes
               if node.short_name.lower() == short.lower()]
    return pick(lowered)


def supplement_seeds(seed_set: SeedSet, new_mentions: list[EntityMention],
                     graph: DependencyGraph) -> SeedSet:
    """Fold later-stage mentions into an existing seed set (idempotent;
    never removes seeds). New resolutions get provenance ``supplemented``."""
    merged = SeedSet(resolved=list(seed_set.resolved),
                     unresolved=list(seed_set.unresolved),
                     provenance=dict(seed_set.provenance))
    unresolved_names = {(m.kind, m.name.lower()) for m in merged.unresolved}
    for mention in new_mentions:
        matches = _match_mention(mention, graph)
        if matches:
            for node in matches:
                merged.add(node, "supplemented")
        elif (mention.kind, mention.name.lower()) not in unresolved_names:
            merged.unresolved.append(mention)
            unresolved_names.add((mention.kind, mention.name.lower()))
    return merged


def build_cdg(graph: DependencyGraph, seeds: SeedSet,
              radius: int = DEFAULT_RADIUS) -> ContextualDependencyGraph:
    """Induced subgraph of all nodes within ``radius`` hops of the seeds."""
    keep = graph.neighbors(seeds.resolved, radius)
    induced = graph.induced_subgraph(keep)
    distance = {key: hops
                for key, hops in graph.distances(seeds.resolved).items()
                if key in {node.key for node in keep}}
    return ContextualDependencyGraph(induced, list(seeds.resolved), radius,
                                     distance)


def extract_slices(cdg: ContextualDependencyGraph, project: ProjectAst,
                   max_chars: int | None = DEFAULT_SLICE_BUDGET
                   ) -> ProgramSlice:
    """Source snippets for every CDG function and state variable.

    Functions contribute their full declaration text, state variables their
    declaration line; contracts with included members contribute a header
    comment. When the rendered size exceeds ``max_chars``, snippets
    furthest from the seeds are dropped first (ties by name); seed
    snippets are never dropped.
    """
    candidates: list[tuple[int, str, SliceSnippet]] = []
    header_contracts: dict[str, str] = {}

    for node in cdg.nodes:
        if node.kind is NodeKind.CONTRACT:
            continue
        source = project.file_by_id(node.span.file_id)
        try:
            text = source.slice(node.span)
        except SpanOutOfRange:
            raise SpanOutOfRange(
                f"{node.qualified_name}: span {node.span} no longer "
                f"fits {source.path}; reparse the project")
        snippet = SliceSnippet(node.qualified_name, node.span, text,
                               source.path)
        hops = cdg.distance.get(node.key, cdg.radius)
        candidates.append((hops, node.qualified_name, snippet))
        header_contracts.setdefault(node.contract_name, source.path)

    # dedupe identical spans (one function reachable through two nodes)
    unique: dict[tuple, tuple[int, str, SliceSnippet]] = {}
    for hops, name, snippet in candidates:
        key = (snippet.path, str(snippet.span))
        if key not in unique or hops < unique[key][0]:
            unique[key] = (hops, name, snippet)
    kept = sorted(unique.values(), key=lambda item: (item[0], item[1]))

    def assemble(items) -> ProgramSlice:
        snippets = [snippet for _, _, snippet in items]
        snippets.sort(key=lambda s: (s.path, s.span.start_line,
                                     s.span.start_col))
        contracts = {snippet.qualified_name.split(".")[0]
                     for snippet in snippets}
        headers = sorted((name, path) for name, path
                         in header_contracts.items() if name in contracts)
        result = ProgramSlice(snippets, headers)
        result.total_size = len(result.render())
        return result

    program_slice = assemble(kept)
    while (max_chars is not None and program_slice.total_size > max_chars
           and kept and kept[-1][0] > 0):
        kept = kept[:-1]
        program_slice = assemble(kept)
    return program_slice
