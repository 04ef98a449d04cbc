"""Dependency extraction from a parsed project.

Three passes feed the dependency graph:

* call graph: one Call edge per call site whose callee resolves to a
  function declared in the project, plus Contains edges for declared
  functions; calls to addresses or out-of-project code land in a side list.
* read/write: Write edges for assignments (compound included, plus ``++``,
  ``--``, ``delete`` and array ``push``/``pop``), Read edges for every other
  state-variable occurrence, plus Contains edges for state variables.
* data flow: intra-procedural, flow-insensitive reaching definitions over
  locals; a value read from state variable V that reaches an assignment to
  state variable V' yields a DataFlow edge V -> V'.

Resolution rules shared by all passes:

* a bare callee name resolves in the contract's inheritance chain (the
  contract itself, then bases in declared order, transitively);
* ``Target.f(...)`` resolves when Target is a project contract or a state
  variable whose declared type names one; ``this``/``super`` as usual;
* identifiers shadowed by parameters or any local declared in the body do
  not resolve to state variables;
* modifiers are functions: each invocation becomes a Call edge;
* members inherited from a base keep their base-qualified node; the child
  contract gains a Contains edge to members it references.

Edge sites are the enclosing statement's span (modifier invocations use the
invocation span, member declarations their own span, inherited-reference
Contains edges the child contract's span).
"""
from __future__ import annotations

from dataclasses import dataclass

from .depgraph import (DependencyGraph, DepEdge, DepNode, EdgeKind, NodeKind)
from .solidity.project import ProjectAst
from .solidity import nodes as n
from .source import SourceSpan

BUILTIN_FUNCTIONS = {
    "require", "assert", "revert", "keccak256", "sha256", "ripemd160",
    "ecrecover", "addmod", "mulmod", "selfdestruct", "blockhash", "gasleft",
    "payable", "address",
}
BUILTIN_OBJECTS = {"abi", "string", "bytes", "type", "block", "tx"}
BUILTIN_IDENTIFIERS = {"msg", "block", "tx", "this", "super", "now", "_",
                       "true", "false"}
ARRAY_MUTATORS = {"push", "pop"}

_ELEMENTARY_PREFIXES = ("uint", "int", "bytes", "fixed", "ufixed")


def _is_type_name(name: str) -> bool:
    if name in ("address", "bool", "string", "byte", "payable"):
        return True
    return name.startswith(_ELEMENTARY_PREFIXES) and name not in ("bytes",)


@dataclass(frozen=True)
class UnresolvedCall:
    caller: str  # qualified name of the calling function
    callee_text: str
    site: SourceSpan


@dataclass
class _ContractInfo:
    decl: n.ContractDecl
    node: DepNode
    functions: dict[str, list[tuple[n.FunctionDecl, DepNode]]]
    variables: dict[str, tuple[n.StateVarDecl, DepNode]]


class ProjectIndex:
    """Symbol table: contract/member nodes and inheritance chains.

    When two files declare the same contract name the first (file order)
    wins; later duplicates are ignored.
    """

    def __init__(self, project: ProjectAst):
        self.project = project
        self.contracts: dict[str, _ContractInfo] = {}
        for source, contract in project.iter_contracts():
            if contract.name in self.contracts:
                continue
            cnode = DepNode(NodeKind.CONTRACT, contract.name, contract.span)
            functions: dict[str, list[tuple[n.FunctionDecl, DepNode]]] = {}
            for fdecl in contract.functions:
                qualified = f"{contract.name}.{fdecl.signature()}"
                fnode = DepNode(NodeKind.FUNCTION, qualified, fdecl.span)
                functions.setdefault(fdecl.name, []).append((fdecl, fnode))
            variables = {
                v.name: (v, DepNode(NodeKind.STATE_VARIABLE,
                                    f"{contract.name}.{v.name}", v.span))
                for v in contract.state_vars
            }
            self.contracts[contract.name] = _ContractInfo(
                contract, cnode, functions, variables)

    def chain(self, name: str) -> list[str]:
        """Contract name plus transitive bases, declaration order, deduped."""
        ordered: list[str] = []

        def visit(current: str):
            if current in ordered or current not in self.contracts:
                return
            ordered.append(current)
            for base in self.contracts[current].decl.inheritance:
                visit(base)

        visit(name)
        return ordered

    def lookup_function(self, contract: str, name: str,
                        arity: int | None = None) -> DepNode | None:
        for owner in self.chain(contract):
            candidates = self.contracts[owner].functions.get(name)
            if not candidates:
                continue
            if arity is not None:
                for fdecl, fnode in candidates:
                    if len(fdecl.params) == arity:
                        return fnode
            return candidates[0][1]
        return None

    def lookup_var(self, contract: str, name: str) -> DepNode | None:
        for owner in self.chain(contract):
            found = self.contracts[owner].variables.get(name)
            if found:
                return found[1]
        return None

    def var_contract_type(self, contract: str, name: str) -> str | None:
        """Contract named by a state variable's declared type, if any."""
        for owner in self.chain(contract):
            found = self.contracts[owner].variables.get(name)
            if found:
                type_name = found[0].type_text.split("[")[0].strip()
                if type_name in self.contracts:
                    return type_name
                return None
        return None

    def all_nodes(self) -> list[DepNode]:
        out: list[DepNode] = []
        for info in self.contracts.values():
            out.append(info.node)
            for overloads in info.functions.values():
                out.extend(fnode for _, fnode in overloads)
            out.extend(vnode for _, vnode in info.variables.values())
        return out


# --- shared body-walking helpers ---

def _statement_exprs(stmt: n.Statement) -> list[tuple[n.Expr, bool]]:
    """Direct expressions of one statement as (expr, is_write_target)."""
    if isinstance(stmt, n.ExprStatement):
        return [(stmt.expr, False)]
    if isinstance(stmt, n.Assignment):
        return [(stmt.target, True), (stmt.value, False)]
    if isinstance(stmt, n.VarDeclStatement):
        return [(stmt.initializer, False)] if stmt.initializer else []
    if isinstance(stmt, (n.IfStatement, n.WhileStatement)):
        return [(stmt.condition, False)]
    if isinstance(stmt, n.ForStatement):
        return [(stmt.condition, False)] if stmt.condition else []
    if isinstance(stmt, n.ReturnStatement):
        return [(stmt.value, False)] if stmt.value else []
    if isinstance(stmt, n.EmitStatement):
        return [(arg, False) for arg in stmt.call.args]
    return []


def _write_roots(target: n.Expr) -> list[n.Identifier]:
    """Root identifiers assigned by a write target; index/member writes
    write their base (``m[k] = v`` writes ``m``, ``s.f = v`` writes ``s``)."""
    if isinstance(target, n.Identifier):
        return [target]
    if isinstance(target, n.IndexAccess):
        return _write_roots(target.base)
    if isinstance(target, n.MemberAccess):
        if isinstance(target.obj, n.Identifier) and target.obj.name == "this":
            return [n.Identifier(target.span, target.member)]
        return _write_roots(target.obj)
    if isinstance(target, n.TupleExpr):
        roots = []
        for item in target.items:
            roots.extend(_write_roots(item))
        return roots
    return []


def _read_index_exprs(target: n.Expr) -> list[n.Expr]:
    """Sub-expressions of a write target that are still reads (indices)."""
    out: list[n.Expr] = []
    if isinstance(target, n.IndexAccess):
        if target.index is not None:
            out.append(target.index)
        out.extend(_read_index_exprs(target.base))
    elif isinstance(target, n.MemberAccess):
        out.extend(_read_index_exprs(target.obj))
    elif isinstance(target, n.TupleExpr):
        for item in target.items:
            out.extend(_read_index_exprs(item))
    return out


def _local_names(fdecl: n.FunctionDecl) -> set[str]:
    names = {p.name for p in fdecl.params if p.name}
    names |= {p.name for p in fdecl.returns if p.name}
    for stmt in n.walk_statements(fdecl.body):
        if isinstance(stmt, n.VarDeclStatement):
            names.add(stmt.name)
        elif isinstance(stmt, n.ForStatement) and isinstance(
                stmt.init, n.VarDeclStatement):
            names.add(stmt.init.name)
    return names


def _state_reads_in(expr: n.Expr, index: ProjectIndex, contract: str,
                    locals_: set[str]) -> list[DepNode]:
    """State-variable nodes read anywhere inside ``expr``."""
    found: list[DepNode] = []
    for sub in n.walk_expr(expr):
        name = None
        if isinstance(sub, n.Identifier):
            name = sub.name
        elif (isinstance(sub, n.MemberAccess)
              and isinstance(sub.obj, n.Identifier)
              and sub.obj.name == "this"):
            name = sub.member
        if name is None or name in locals_ or name in BUILTIN_IDENTIFIERS:
            continue
        node = index.lookup_var(contract, name)
        if node is not None:
            found.append(node)
    return found


def _local_reads_in(expr: n.Expr, locals_: set[str]) -> list[str]:
    return [sub.name for sub in n.walk_expr(expr)
            if isinstance(sub, n.Identifier) and sub.name in locals_]


def _callee_text(expr: n.Expr, project: ProjectAst) -> str:
    source = project.file_by_id(expr.span.file_id)
    try:
        return " ".join(source.slice(expr.span).split())
    except Exception:
        return "<unknown>"


def _iter_function_bodies(index: ProjectIndex):
    """Yield (contract name, FunctionDecl, function node) in project order."""
    for info in index.contracts.values():
        for fdecl in info.decl.functions:
            fnode = None
            for cand_decl, cand_node in info.functions[fdecl.name]:
                if cand_decl is fdecl:
                    fnode = cand_node
            yield info.decl.name, fdecl, fnode


# --- pass 1: call graph ---

def build_call_graph(project: ProjectAst,
                     index: ProjectIndex | None = None
                     ) -> tuple[list[DepEdge], list[UnresolvedCall]]:
    """Call and Contains(C->F) edges, plus the unresolved-call side list."""
    index = index or ProjectIndex(project)
    edges: list[DepEdge] = []
    unresolved: list[UnresolvedCall] = []

    for info in index.contracts.values():
        for overloads in info.functions.values():
            for fdecl, fnode in overloads:
                edges.append(DepEdge(EdgeKind.CONTAINS, info.node, fnode,
                                     fdecl.span))

    for contract, fdecl, fnode in _iter_function_bodies(index):
        cnode = index.contracts[contract].node
        for inv in fdecl.modifiers:
            target = index.lookup_function(contract, inv.name,
                                           len(inv.args) or None)
            if target is not None:
                edges.append(DepEdge(EdgeKind.CALL, fnode, target, inv.span))
                _note_inherited(edges, index, contract, cnode, target)
            elif inv.name not in index.contracts:
                # base-constructor invocations are not call sites
                unresolved.append(UnresolvedCall(
                    fnode.qualified_name, inv.name, inv.span))
        locals_ = _local_names(fdecl)
        for stmt in n.walk_statements(fdecl.body):
            exempt: set[int] = set()
            for expr, _ in _statement_exprs(stmt):
                for sub in n.walk_expr(expr):
                    if not isinstance(sub, n.CallExpr):
                        continue
                    if id(sub) in exempt:
                        continue
                    _resolve_call(sub, stmt, contract, fnode, locals_, index,
                                  edges, unresolved, exempt, project)
    return edges, unresolved


def _resolve_call(call: n.CallExpr, stmt: n.Statement, contract: str,
                  fnode: DepNode, locals_: set[str], index: ProjectIndex,
                  edges: list[DepEdge], unresolved: list[UnresolvedCall],
                  exempt: set[int], project: ProjectAst):
    callee = call.callee
    cnode = index.contracts[contract].node
    site = stmt.span

    if isinstance(callee, n.Identifier):
        name = callee.name
        if name == "revert":
            # custom-error argument is not a call site
            for arg in call.args:
                if isinstance(arg, n.CallExpr):
                    exempt.add(id(arg))
            return
        if name in BUILTIN_FUNCTIONS or _is_type_name(name):
            return
        target = index.lookup_function(contract, name, len(call.args))
        if target is not None:
            edges.append(DepEdge(EdgeKind.CALL, fnode, target, site))
            _note_inherited(edges, index, contract, cnode, target)
            return
        if name in index.contracts:
            return  # struct-like constructor / cast to a contract type
        unresolved.append(UnresolvedCall(
            fnode.qualified_name, _callee_text(callee, project), site))
        return

    if isinstance(callee, n.MemberAccess):
        member = callee.member
        obj = callee.obj
        if isinstance(obj, n.Identifier):
            if obj.name in BUILTIN_OBJECTS:
                return
            if obj.name == "this":
                target = index.lookup_function(contract, member,
                                               len(call.args))
                if target is not None:
                    edges.append(DepEdge(EdgeKind.CALL, fnode, target, site))
                    _note_inherited(edges, index, contract, cnode, target)
                    return
            elif obj.name == "super":
                for base in index.chain(contract)[1:]:
                    target = index.lookup_function(base, member,
                                                   len(call.args))
                    if target is not None:
                        edges.append(DepEdge(EdgeKind.CALL, fnode, target,
                                             site))
                        return
            elif obj.name in index.contracts:
                target = index.lookup_function(obj.name, member,
                                               len(call.args))
                if target is not None:
                    edges.append(DepEdge(EdgeKind.CALL, fnode, target, site))
                    return
            else:
                if obj.name not in locals_:
                    target_contract = index.var_contract_type(contract,
                                                              obj.name)
                    if target_contract is not None:
                        target = index.lookup_function(target_contract,
                                                       member,
                                                       len(call.args))
                        if target is not None:
                            edges.append(DepEdge(EdgeKind.CALL, fnode,
                                                 target, site))
                            return
                    if (member in ARRAY_MUTATORS
                            and index.lookup_var(contract, obj.name)
                            is not None):
                        return  # array push/pop: handled as a Write
        unresolved.append(UnresolvedCall(
            fnode.qualified_name, _callee_text(callee, project), site))


def _note_inherited(edges: list[DepEdge], index: ProjectIndex,
                    contract: str, cnode: DepNode, member: DepNode):
    """Contains edge from a contract to an inherited member it references."""
    if member.contract_name != contract:
        edge = DepEdge(EdgeKind.CONTAINS, cnode, member,
                       index.contracts[contract].decl.span)
        if edge not in edges:
            edges.append(edge)


# --- pass 2: reads and writes ---

def extract_read_write(project: ProjectAst,
                       index: ProjectIndex | None = None) -> list[DepEdge]:
    """Read, Write, and Contains(C->V) edges."""
    index = index or ProjectIndex(project)
    edges: list[DepEdge] = []
    seen: set[DepEdge] = set()

    def add(edge: DepEdge):
        if edge not in seen:
            seen.add(edge)
            edges.append(edge)

    for info in index.contracts.values():
        for vdecl, vnode in info.variables.values():
            add(DepEdge(EdgeKind.CONTAINS, info.node, vnode, vdecl.span))

    for contract, fdecl, fnode in _iter_function_bodies(index):
        cnode = index.contracts[contract].node
        locals_ = _local_names(fdecl)

        def add_member_ref(kind: EdgeKind, vnode: DepNode, site: SourceSpan):
            add(DepEdge(kind, fnode, vnode, site))
            if vnode.contract_name != contract:
                add(DepEdge(EdgeKind.CONTAINS, cnode, vnode,
                            index.contracts[contract].decl.span))

        for stmt in n.walk_statements(fdecl.body):
            read_exprs: list[n.Expr] = []
            for expr, is_write in _statement_exprs(stmt):
                if is_write:
                    for root in _write_roots(expr):
                        vnode = (None if root.name in locals_
                                 else index.lookup_var(contract, root.name))
                        if vnode is not None:
                            add_member_ref(EdgeKind.WRITE, vnode, stmt.span)
                    read_exprs.extend(_read_index_exprs(expr))
                else:
                    read_exprs.append(expr)

            # ++/--/delete and array push/pop are writes, not reads
            mutated: set[int] = set()
            for expr in read_exprs:
                for sub in n.walk_expr(expr):
                    targets: list[n.Identifier] = []
                    if isinstance(sub, n.UnaryOp) and sub.op in ("++", "--",
                                                                 "delete"):
                        targets = _write_roots(sub.operand)
                    elif (isinstance(sub, n.CallExpr)
                          and isinstance(sub.callee, n.MemberAccess)
                          and sub.callee.member in ARRAY_MUTATORS):
                        targets = _write_roots(sub.callee.obj)
                    for root in targets:
                        mutated.add(id(root))
                        if root.name not in locals_:
                            vnode = index.lookup_var(contract, root.name)
                            if vnode is not None:
                                add_member_ref(EdgeKind.WRITE, vnode,
                                               stmt.span)

            for expr in read_exprs:
                for sub in n.walk_expr(expr):
                    name = None
                    if isinstance(sub, n.Identifier) and id(sub) not in mutated:
                        name = sub.name
                    elif (isinstance(sub, n.MemberAccess)
                          and isinstance(sub.obj, n.Identifier)
                          and sub.obj.name == "this"):
                        name = sub.member
                    if (name is None or name in locals_
                            or name in BUILTIN_IDENTIFIERS):
                        continue
                    vnode = index.lookup_var(contract, name)
                    if vnode is not None:
                        add_member_ref(EdgeKind.READ, vnode, stmt.span)
    return edges


# --- pass 3: data flow ---

def extract_data_flow(project: ProjectAst,
                      index: ProjectIndex | None = None) -> list[DepEdge]:
    """DataFlow edges V -> V' from flow-insensitive local reaching defs."""
    index = index or ProjectIndex(project)
    edges: list[DepEdge] = []
    seen: set[DepEdge] = set()

    for contract, fdecl, _fnode in _iter_function_bodies(index):
        locals_ = _local_names(fdecl)
        local_assigns: list[tuple[str, list[DepNode], list[str]]] = []
        sinks: list[tuple[DepNode, list[DepNode], list[str],
                          SourceSpan]] = []

        for stmt in n.walk_statements(fdecl.body):
            target_names: list[str] = []
            value: n.Expr | None = None
            if isinstance(stmt, n.VarDeclStatement):
                target_names = [stmt.name]
                value = stmt.initializer
            elif isinstance(stmt, n.Assignment):
                target_names = [r.name for r in _write_roots(stmt.target)]
                value = stmt.value
            if value is None:
                continue
            state_reads = _state_reads_in(value, index, contract, locals_)
            local_reads = _local_reads_in(value, locals_)
            for name in target_names:
                if name in locals_:
                    local_assigns.append((name, state_reads, local_reads))
                else:
                    vnode = index.lookup_var(contract, name)
                    if vnode is not None:
                        sinks.append((vnode, state_reads, local_reads,
                                      stmt.span))

        sources: dict[str, set] = {name: set() for name in locals_}
        changed = True
        while changed:
            changed = False
            for name, state_reads, local_reads in local_assigns:
                incoming = {node.key for node in state_reads}
                for local in local_reads:
                    incoming |= sources.get(local, set())
                if not incoming <= sources[name]:
                    sources[name] |= incoming
                    changed = True

        by_key = {node.key: node for info in index.contracts.values()
                  for _, node in info.variables.values()}
        for vnode, state_reads, local_reads, site in sinks:
            flowing = {node.key for node in state_reads}
            for local in local_reads:
                flowing |= sources.get(local, set())
            for key in flowing:
                edge = DepEdge(EdgeKind.DATA_FLOW, by_key[key], vnode, site)
                if edge not in seen:
                    seen.add(edge)
                    edges.append(edge)
    return edges


# --- assembly ---

@dataclass
class AnalysisResult:
    graph: DependencyGraph
    unresolved_calls: list[UnresolvedCall]


def analyze_project(project: ProjectAst) -> AnalysisResult:
    index = ProjectIndex(project)
    graph = DependencyGraph()
    for node in index.all_nodes():
        graph.add_node(node)
    call_edges, unresolved = build_call_graph(project, index)
    for edge in call_edges:
        graph.add_edge(edge)
    for edge in extract_read_write(project, index):
        graph.add_edge(edge)
    for edge in extract_data_flow(project, index):
        graph.add_edge(edge)
    return AnalysisResult(graph, unresolved)


def build_dependency_graph(project: ProjectAst) -> DependencyGraph:
    """Union of the call, read/write, and data-flow extractions, with a
    node for every contract, function, and state variable."""
    return analyze_project(project).graph


def neighbors(graph: DependencyGraph, start, radius: int,
              kinds=None) -> set[DepNode]:
    return graph.neighbors(start, radius, kinds)
