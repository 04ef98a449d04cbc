"""Dependency extraction: per-fixture assertions, oracle equivalence, and
randomized property tests."""
import random

import pytest
from hypothesis import given, settings, strategies as st

from solrepair.analyzer import (analyze_project, build_call_graph,
                                build_dependency_graph, extract_data_flow,
                                extract_read_write)
from solrepair.depgraph import EdgeKind, NodeKind
from solrepair.solidity.project import parse_project

from genlib import project_from_source, random_contract_source
from oracle import graph_nodes_edges, oracle_nodes_edges


def project_of(text: str):
    return project_from_source(text)


def edge_triples(edges):
    return {(e.kind.value, e.src.qualified_name, e.dst.qualified_name)
            for e in edges}


# ---------------------------------------------------------------------------
# build_call_graph
# ---------------------------------------------------------------------------

def test_internal_call_and_contains():
    project = project_of(
        "contract A { function f() public { g(); } "
        "function g() internal {} }")
    edges, unresolved = build_call_graph(project)
    assert ("Call", "A.f()", "A.g()") in edge_triples(edges)
    assert ("Contains", "A", "A.f()") in edge_triples(edges)
    assert ("Contains", "A", "A.g()") in edge_triples(edges)
    assert unresolved == []


def test_no_calls_means_contains_only():
    project = project_of("contract A { function f() public {} }")
    edges, _ = build_call_graph(project)
    assert edge_triples(edges) == {("Contains", "A", "A.f()")}


def test_external_interface_call_lands_in_side_list():
    project = project_of("""
interface IToken { function transfer(address to, uint a) external; }
contract A {
    IOther public token;
    function f(address to) public { token.transfer(to, 1); }
}
""")
    edges, unresolved = build_call_graph(project)
    assert not any(e.kind is EdgeKind.CALL for e in edges)
    assert len(unresolved) == 1
    assert unresolved[0].caller == "A.f(address)"
    assert "token.transfer" in unresolved[0].callee_text


def test_cross_contract_call_via_typed_state_var():
    project = project_of("""
contract Oracle { function read() public view returns (uint) { return 1; } }
contract Feed {
    Oracle public oracle;
    function refresh() public { oracle.read(); }
}
""")
    edges, unresolved = build_call_graph(project)
    assert ("Call", "Feed.refresh()", "Oracle.read()") in edge_triples(edges)
    assert unresolved == []


def test_modifier_invocation_is_call_edge():
    project = project_of("""
contract A {
    modifier guard() { _; }
    function f() public guard {}
}
""")
    edges, _ = build_call_graph(project)
    assert ("Call", "A.f()", "A.guard()") in edge_triples(edges)


def test_overload_resolution_by_arity():
    project = project_of("""
contract A {
    function add(uint a) public {}
    function add(uint a, uint b) public {}
    function run() public { add(1, 2); }
}
""")
    edges, _ = build_call_graph(project)
    calls = [e for e in edges if e.kind is EdgeKind.CALL]
    assert [e.dst.qualified_name for e in calls] == ["A.add(uint,uint)"]


def test_recursion_recorded():
    project = project_of(
        "contract A { function f(uint d) public { if (d > 0) { f(d - 1); } } }")
    edges, _ = build_call_graph(project)
    assert ("Call", "A.f(uint)", "A.f(uint)") in edge_triples(edges)


# ---------------------------------------------------------------------------
# extract_read_write
# ---------------------------------------------------------------------------

def test_compound_assignment_with_rhs_read():
    """x = x + 1 yields both the Write and the Read."""
    project = project_of(
        "contract A { uint x; function f() public { x = x + 1; } }")
    triples = edge_triples(extract_read_write(project))
    assert ("Write", "A.f()", "A.x") in triples
    assert ("Read", "A.f()", "A.x") in triples


def test_locals_only_function_has_no_rw_edges():
    project = project_of(
        "contract A { uint x; function f() public "
        "{ uint t = 1; t = t + 2; } }")
    triples = edge_triples(extract_read_write(project))
    assert triples == {("Contains", "A", "A.x")}


def test_require_argument_is_read_only():
    project = project_of(
        "contract A { uint x; function f() public { require(x > 0); } }")
    triples = edge_triples(extract_read_write(project))
    assert ("Read", "A.f()", "A.x") in triples
    assert not any(kind == "Write" for kind, *_ in triples)


def test_mapping_write_and_index_read():
    project = project_of("""
contract A {
    mapping(address => uint) public m;
    uint k;
    function f(address who) public { m[k] = 1; }
}
""")
    triples = edge_triples(extract_read_write(project))
    assert ("Write", "A.f(address)", "A.m") in triples
    assert ("Read", "A.f(address)", "A.k") in triples


def test_increment_delete_push_are_writes():
    project = project_of("""
contract A {
    uint x;
    uint[] items;
    function f() public { x++; }
    function g() public { delete x; }
    function h(uint v) public { items.push(v); }
}
""")
    triples = edge_triples(extract_read_write(project))
    assert ("Write", "A.f()", "A.x") in triples
    assert ("Write", "A.g()", "A.x") in triples
    assert ("Write", "A.h(uint)", "A.items") in triples
    assert not any(kind == "Read" for kind, *_ in triples)


def test_inherited_variable_reference_adds_contains():
    project = project_of("""
contract Base { uint stock; }
contract Child is Base {
    function take() public { stock -= 1; }
}
""")
    triples = edge_triples(extract_read_write(project))
    assert ("Write", "Child.take()", "Base.stock") in triples
    assert ("Contains", "Child", "Base.stock") in triples
    assert ("Contains", "Base", "Base.stock") in triples


# ---------------------------------------------------------------------------
# extract_data_flow
# ---------------------------------------------------------------------------

def test_direct_state_to_state_flow():
    project = project_of(
        "contract A { uint x; uint y; function f() public { y = x; } }")
    triples = edge_triples(extract_data_flow(project))
    assert triples == {("DataFlow", "A.x", "A.y")}


def test_flow_through_local():
    """uint t = x; y = t; routes x into y (hand-computed reaching defs:
    sources(t) = {x}; sink y gets sources(t))."""
    project = project_of(
        "contract A { uint x; uint y; function f() public "
        "{ uint t = x; y = t; } }")
    triples = edge_triples(extract_data_flow(project))
    assert triples == {("DataFlow", "A.x", "A.y")}


def test_flow_insensitive_reaches_later_definitions():
    """Assignment order does not matter for the flow-insensitive pass."""
    project = project_of(
        "contract A { uint x; uint y; function f() public "
        "{ uint t = 0; y = t; t = x; } }")
    triples = edge_triples(extract_data_flow(project))
    assert ("DataFlow", "A.x", "A.y") in triples


def test_no_state_assignment_no_flow():
    project = project_of(
        "contract A { uint x; function f() public { uint t = x; t = t + 1; } }")
    assert extract_data_flow(project) == []


def test_chained_locals():
    project = project_of("""
contract A {
    uint source; uint sink;
    function f() public {
        uint a = source;
        uint b = a + 1;
        sink = b;
    }
}
""")
    triples = edge_triples(extract_data_flow(project))
    assert triples == {("DataFlow", "A.source", "A.sink")}


# ---------------------------------------------------------------------------
# build_dependency_graph: oracle equivalence and node coverage
# ---------------------------------------------------------------------------

def test_corpus_matches_oracle_exactly(corpus_dir):
    project = parse_project(corpus_dir)
    graph = build_dependency_graph(project)
    graph.audit()
    assert graph_nodes_edges(graph) == oracle_nodes_edges(project)


def test_node_coverage_counts(corpus_dir):
    project = parse_project(corpus_dir)
    graph = build_dependency_graph(project)
    contracts = functions = variables = 0
    for _, contract in project.iter_contracts():
        contracts += 1
        functions += len(contract.functions)
        variables += len(contract.state_vars)
    assert graph.node_count(NodeKind.CONTRACT) == contracts
    assert graph.node_count(NodeKind.FUNCTION) == functions
    assert graph.node_count(NodeKind.STATE_VARIABLE) == variables


def test_unresolved_calls_on_corpus(corpus_dir):
    project = parse_project(corpus_dir)
    result = analyze_project(project)
    # token.transfer resolves: the IERC20 interface is in the project
    assert ("Call", "Treasury.payout(uint256)",
            "IERC20.transfer(address,uint256)") \
        in edge_triples(result.graph.edges)
    # a call through a cast expression cannot resolve to a state variable
    texts = {u.callee_text for u in result.unresolved_calls}
    assert any("IERC20(other).transfer" in t for t in texts)


def test_empty_contract_graph():
    project = project_of("contract A {}")
    graph = build_dependency_graph(project)
    assert graph.node_count() == 1
    assert graph.edges == []


# ---------------------------------------------------------------------------
# randomized properties
# ---------------------------------------------------------------------------

@settings(max_examples=120, deadline=None)
@given(st.integers(min_value=0, max_value=10_000))
def test_random_contracts_match_oracle(seed):
    text = random_contract_source(random.Random(seed))
    project = project_from_source(text)
    graph = build_dependency_graph(project)
    assert graph_nodes_edges(graph) == oracle_nodes_edges(project), text


@settings(max_examples=60, deadline=None)
@given(st.integers(min_value=0, max_value=10_000))
def test_random_contracts_edge_signatures_and_audit(seed):
    text = random_contract_source(random.Random(seed))
    graph = build_dependency_graph(project_from_source(text))
    graph.audit()  # covers signature soundness for every edge
    for edge in graph.edges:
        edge.check_signature()


@settings(max_examples=40, deadline=None)
@given(st.integers(min_value=0, max_value=10_000),
       st.integers(min_value=0, max_value=4))
def test_random_neighbors_monotone(seed, radius):
    graph = build_dependency_graph(
        project_from_source(random_contract_source(random.Random(seed))))
    nodes = graph.nodes
    start = [nodes[seed % len(nodes)]]
    smaller = graph.neighbors(start, radius)
    bigger = graph.neighbors(start, radius + 1)
    assert smaller <= bigger


def test_determinism_same_bytes_same_graph(corpus_dir):
    project_a = parse_project(corpus_dir)
    project_b = parse_project(corpus_dir)
    assert build_dependency_graph(project_a).serialize() \
        == build_dependency_graph(project_b).serialize()
