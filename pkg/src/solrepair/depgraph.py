"""Typed dependency graph over contracts, functions, and state variables.

Node kinds: Contract (C), Function (F), StateVariable (V).
Edge kinds and their endpoint signatures:

    Call      F -> F
    Read      F -> V
    Write     F -> V
    DataFlow  V -> V
    Contains  C -> F or C -> V

Edges are directed (caller->callee, function->variable, source->sink);
traversal chooses directedness, and :meth:`DependencyGraph.neighbors`
treats edges as undirected.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

from .errors import GraphIntegrityError, UnknownNode
from .source import SourceSpan


class NodeKind(Enum):
    CONTRACT = "C"
    FUNCTION = "F"
    STATE_VARIABLE = "V"


class EdgeKind(Enum):
    CALL = "Call"
    READ = "Read"
    WRITE = "Write"
    DATA_FLOW = "DataFlow"
    CONTAINS = "Contains"


EDGE_SIGNATURES: dict[EdgeKind, tuple[set[NodeKind], set[NodeKind]]] = {
    EdgeKind.CALL: ({NodeKind.FUNCTION}, {NodeKind.FUNCTION}),
    EdgeKind.READ: ({NodeKind.FUNCTION}, {NodeKind.STATE_VARIABLE}),
    EdgeKind.WRITE: ({NodeKind.FUNCTION}, {NodeKind.STATE_VARIABLE}),
    EdgeKind.DATA_FLOW: ({NodeKind.STATE_VARIABLE},
                         {NodeKind.STATE_VARIABLE}),
    EdgeKind.CONTAINS: ({NodeKind.CONTRACT},
                        {NodeKind.FUNCTION, NodeKind.STATE_VARIABLE}),
}

NodeKey = tuple[NodeKind, str]


@dataclass(frozen=True)
class DepNode:
    kind: NodeKind
    qualified_name: str
    span: SourceSpan = field(compare=False)

    @property
    def key(self) -> NodeKey:
        return (self.kind, self.qualified_name)

    @property
    def contract_name(self) -> str:
        return self.qualified_name.split(".")[0]

    @property
    def short_name(self) -> str:
        """Member name without contract prefix or parameter list."""
        tail = self.qualified_name.split(".")[-1]
        return tail.split("(")[0]


@dataclass(frozen=True)
class DepEdge:
    kind: EdgeKind
    src: DepNode
    dst: DepNode
    site: SourceSpan

    def check_signature(self):
        src_kinds, dst_kinds = EDGE_SIGNATURES[self.kind]
        if self.src.kind not in src_kinds or self.dst.kind not in dst_kinds:
            raise GraphIntegrityError(
                f"{self.kind.value} edge cannot join {self.src.kind.value} "
                f"-> {self.dst.kind.value}")


class DependencyGraph:
    """Node set plus edge multiset with a per-kind adjacency index."""

    def __init__(self):
        self._nodes: dict[NodeKey, DepNode] = {}
        self._edges: set[DepEdge] = set()
        self._out: dict[NodeKey, dict[EdgeKind, list[DepEdge]]] = {}
        self._in: dict[NodeKey, dict[EdgeKind, list[DepEdge]]] = {}

    # --- construction ---

    def add_node(self, node: DepNode) -> DepNode:
        existing = self._nodes.get(node.key)
        if existing is not None:
            return existing
        self._nodes[node.key] = node
        self._out[node.key] = {}
        self._in[node.key] = {}
        return node

    def add_edge(self, edge: DepEdge) -> bool:
        """Insert ``edge``; returns False when an equal edge already exists."""
        edge.check_signature()
        for endpoint in (edge.src, edge.dst):
            if endpoint.key not in self._nodes:
                raise UnknownNode(f"edge endpoint not in graph: "
                                  f"{endpoint.qualified_name}")
        if edge in self._edges:
            return False
        self._edges.add(edge)
        self._out[edge.src.key].setdefault(edge.kind, []).append(edge)
        self._in[edge.dst.key].setdefault(edge.kind, []).append(edge)
        return True

    # --- queries ---

    @property
    def nodes(self) -> list[DepNode]:
        return sorted(self._nodes.values(),
                      key=lambda node: (node.kind.value, node.qualified_name))

    @property
    def edges(self) -> list[DepEdge]:
        return sorted(self._edges, key=_edge_sort_key)

    def __contains__(self, key) -> bool:
        if isinstance(key, DepNode):
            key = key.key
        return key in self._nodes

    def get(self, kind: NodeKind, qualified_name: str) -> DepNode | None:
        return self._nodes.get((kind, qualified_name))

    def node_count(self, kind: NodeKind | None = None) -> int:
        if kind is None:
            return len(self._nodes)
        return sum(1 for k, _ in self._nodes if k is kind)

    def edges_at(self, node: DepNode,
                 kinds: set[EdgeKind] | None = None) -> list[DepEdge]:
        """All edges touching ``node`` (either direction), optionally
        filtered by kind."""
        if node.key not in self._nodes:
            raise UnknownNode(node.qualified_name)
        found: list[DepEdge] = []
        for index in (self._out, self._in):
            for kind, edges in index[node.key].items():
                if kinds is None or kind in kinds:
                    found.extend(edges)
        return found

    def neighbors(self, start, radius: int,
                  kinds: set[EdgeKind] | None = None) -> set[DepNode]:
        """Nodes within ``radius`` undirected hops of ``start`` (inclusive).

        ``start`` is an iterable of DepNode. Raises :class:`UnknownNode`
        when any start node is missing from the graph.
        """
        frontier: set[DepNode] = set()
        for node in start:
            if node.key not in self._nodes:
                raise UnknownNode(node.qualified_name)
            frontier.add(self._nodes[node.key])
        seen = set(frontier)
        for _ in range(radius):
            next_frontier: set[DepNode] = set()
            for node in frontier:
                for edge in self.edges_at(node, kinds):
                    other = edge.dst if edge.src.key == node.key else edge.src
                    if other not in seen:
                        next_frontier.add(other)
            if not next_frontier:
                break
            seen |= next_frontier
            frontier = next_frontier
        return seen

    def distances(self, start, kinds: set[EdgeKind] | None = None
                  ) -> dict[NodeKey, int]:
        """Undirected hop distance from the nearest node in ``start``."""
        dist: dict[NodeKey, int] = {}
        frontier: list[DepNode] = []
        for node in start:
            if node.key not in self._nodes:
                raise UnknownNode(node.qualified_name)
            dist[node.key] = 0
            frontier.append(self._nodes[node.key])
        hops = 0
        while frontier:
            hops += 1
            next_frontier: list[DepNode] = []
            for node in frontier:
                for edge in self.edges_at(node, kinds):
                    other = edge.dst if edge.src.key == node.key else edge.src
                    if other.key not in dist:
                        dist[other.key] = hops
                        next_frontier.append(other)
            frontier = next_frontier
        return dist

    def induced_subgraph(self, keep: set[DepNode]) -> "DependencyGraph":
        sub = DependencyGraph()
        keys = {node.key for node in keep}
        for key in keys:
            if key not in self._nodes:
                raise UnknownNode(str(key))
            sub.add_node(self._nodes[key])
        for edge in self._edges:
            if edge.src.key in keys and edge.dst.key in keys:
                sub.add_edge(edge)
        return sub

    # --- integrity / io ---

    def audit(self):
        """Verify the adjacency index matches the edge multiset."""
        indexed_out = [e for by_kind in self._out.values()
                       for edges in by_kind.values() for e in edges]
        indexed_in = [e for by_kind in self._in.values()
                      for edges in by_kind.values() for e in edges]
        if not (len(indexed_out) == len(indexed_in) == len(self._edges)):
            raise GraphIntegrityError(
                f"index sizes out={len(indexed_out)} in={len(indexed_in)} "
                f"edges={len(self._edges)}")
        if set(indexed_out) != self._edges or set(indexed_in) != self._edges:
            raise GraphIntegrityError("adjacency index disagrees with edges")
        for edge in self._edges:
            edge.check_signature()
            for endpoint in (edge.src, edge.dst):
                if endpoint.key not in self._nodes:
                    raise GraphIntegrityError(
                        f"dangling endpoint {endpoint.qualified_name}")

    def serialize(self) -> str:
        """Line-oriented text form: one node or edge per line.

        ``N <kind> <qualified_name> <span>`` and
        ``E <kind> <src> <dst> <span>``, sorted for stable output.
        """
        lines = [f"N {node.kind.value} {node.qualified_name} {node.span}"
                 for node in self.nodes]
        lines += [f"E {edge.kind.value} {edge.src.qualified_name} "
                  f"{edge.dst.qualified_name} {edge.site}"
                  for edge in self.edges]
        return "\n".join(lines) + ("\n" if lines else "")


def _edge_sort_key(edge: DepEdge):
    return (edge.kind.value, edge.src.qualified_name,
            edge.dst.qualified_name, str(edge.site))
