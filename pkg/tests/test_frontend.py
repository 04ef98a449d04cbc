"""Lexer/parser/project tests: subset coverage, spans, error reporting."""
import pytest

from solrepair.errors import ParseError, ProjectError
from solrepair.source import SourceFile, SourceSpan
from solrepair.solidity import parse_source, parse_project
from solrepair.solidity import nodes as n


def parse_text(text: str, file_id: int = 0) -> n.Ast:
    return parse_source(SourceFile("test.sol", text, file_id))


# ---------------------------------------------------------------------------
# parse_source basics
# ---------------------------------------------------------------------------

def test_empty_contract():
    ast = parse_text("contract A {}")
    assert len(ast.contracts) == 1
    contract = ast.contracts[0]
    assert contract.name == "A"
    assert contract.state_vars == ()
    assert contract.functions == ()


def test_state_var_and_assignment():
    """Hand-constructed expected AST, checked node by node."""
    ast = parse_text("contract A { uint x; function f() public { x = 1; } }")
    contract = ast.contracts[0]
    assert contract.name == "A"

    assert len(contract.state_vars) == 1
    var = contract.state_vars[0]
    assert var.name == "x"
    assert var.type_text == "uint"
    assert var.visibility == ""
    assert var.initializer is None

    assert len(contract.functions) == 1
    fn = contract.functions[0]
    assert fn.name == "f"
    assert fn.kind == "function"
    assert fn.visibility == "public"
    assert fn.params == ()

    assert len(fn.body) == 1
    stmt = fn.body[0]
    assert isinstance(stmt, n.Assignment)
    assert stmt.op == "="
    assert isinstance(stmt.target, n.Identifier)
    assert stmt.target.name == "x"
    assert isinstance(stmt.value, n.Literal)
    assert stmt.value.value == "1"


def test_malformed_parameter_list_reports_line():
    with pytest.raises(ParseError) as excinfo:
        parse_text("contract A { function f( }")
    assert excinfo.value.line == 1
    assert "parameter list" in str(excinfo.value)


def test_interface_and_library_treated_as_contracts():
    ast = parse_text("""
interface IThing { function poke() external; }
library Math { function add(uint a, uint b) internal pure returns (uint) { return a + b; } }
""")
    kinds = {c.name: c.kind for c in ast.contracts}
    assert kinds == {"IThing": "interface", "Math": "library"}
    assert ast.contracts[0].functions[0].body is None  # unimplemented


def test_function_signature_and_modifiers():
    ast = parse_text("""
contract A {
    modifier onlyOwner() { _; }
    function f(uint256 a, address b) public view onlyOwner returns (bool) {
        return true;
    }
}
""")
    contract = ast.contracts[0]
    modifier, fn = contract.functions
    assert modifier.kind == "modifier"
    assert fn.signature() == "f(uint256,address)"
    assert fn.mutability == "view"
    assert [m.name for m in fn.modifiers] == ["onlyOwner"]
    assert [p.type_text for p in fn.returns] == ["bool"]


def test_constructor_receive_fallback():
    ast = parse_text("""
contract A {
    constructor() {}
    receive() external payable {}
    fallback() external {}
}
""")
    kinds = [f.kind for f in ast.contracts[0].functions]
    assert kinds == ["constructor", "receive", "fallback"]


def test_mapping_type_text():
    ast = parse_text(
        "contract A { mapping(address => mapping(uint => bool)) public m; }")
    assert ast.contracts[0].state_vars[0].type_text \
        == "mapping(address=>mapping(uint=>bool))"


def test_inheritance_names_only():
    ast = parse_text("contract A is B, C(1, 2) {}")
    assert ast.contracts[0].inheritance == ("B", "C")


def test_unsupported_statements_become_opaque_with_text():
    ast = parse_text("""
contract A {
    uint x;
    function f() public {
        assembly { let y := 1 }
        x = 2;
        (bool ok, ) = msg.sender.call{value: x}("");
    }
}
""")
    body = ast.contracts[0].functions[0].body
    assert [type(s).__name__ for s in body] \
        == ["OpaqueStatement", "Assignment", "OpaqueStatement"]
    assert body[0].text == "assembly { let y := 1 }"
    assert body[2].text == '(bool ok, ) = msg.sender.call{value: x}("");'


def test_events_structs_retained_as_opaque_members():
    ast = parse_text("""
contract A {
    event Ping(address indexed who);
    struct S { uint a; }
    uint x;
}
""")
    contract = ast.contracts[0]
    assert {o.keyword for o in contract.others} == {"event", "struct"}
    assert [v.name for v in contract.state_vars] == ["x"]


def test_duplicate_contract_names_rejected():
    with pytest.raises(ParseError):
        parse_text("contract A {} contract A {}")


# ---------------------------------------------------------------------------
# spans
# ---------------------------------------------------------------------------

def test_every_declaration_has_valid_span(corpus_dir):
    project = parse_project(corpus_dir)
    for source, contract in project.iter_contracts():
        assert source.slice(contract.span).startswith(
            ("contract", "interface", "library", "abstract"))
        for var in contract.state_vars:
            text = source.slice(var.span)
            assert text.endswith(";") and var.name in text
        for fn in contract.functions:
            text = source.slice(fn.span)
            assert text.endswith(("}", ";"))


def test_statement_spans_cover_statement_text():
    text = """contract A {
    uint x;
    function f() public {
        x = x + 1;
        require(x > 0, "positive");
    }
}
"""
    source = SourceFile("a.sol", text, 0)
    ast = parse_source(source)
    body = ast.contracts[0].functions[0].body
    assert source.slice(body[0].span) == "x = x + 1;"
    assert source.slice(body[1].span) == 'require(x > 0, "positive");'


def test_declaration_roundtrip_through_spans(corpus_dir):
    """Slicing a declaration by its span and re-parsing yields a
    structurally equal node."""
    project = parse_project(corpus_dir)
    checked = 0
    for source, contract in project.iter_contracts():
        reparsed = parse_source(
            SourceFile(source.path, source.slice(contract.span),
                       source.file_id))
        assert n.strip_spans(reparsed.contracts[0]) \
            == n.strip_spans(contract)
        checked += 1
        for fn in contract.functions:
            wrapped = parse_source(SourceFile(
                source.path,
                "contract W { " + source.slice(fn.span) + " }",
                source.file_id))
            assert n.strip_spans(wrapped.contracts[0].functions[0]) \
                == n.strip_spans(fn)
            checked += 1
    assert checked > 20


def test_parse_determinism(corpus_dir):
    for path in sorted(corpus_dir.glob("*.sol")):
        text = path.read_text()
        first = parse_source(SourceFile(path.name, text, 0))
        second = parse_source(SourceFile(path.name, text, 0))
        assert first == second


def test_corpus_totality_except_marked_files(corpus_dir):
    """Every corpus fixture parses without opaque fallback unless its
    header marks it as exercising unsupported constructs."""
    for path in sorted(corpus_dir.glob("*.sol")):
        text = path.read_text()
        marked = "outside the parser subset" in text
        ast = parse_source(SourceFile(path.name, text, 0))
        opaque = []
        for contract in ast.contracts:
            for fn in contract.functions:
                opaque.extend(s for s in n.walk_statements(fn.body)
                              if isinstance(s, n.OpaqueStatement))
        if marked:
            assert opaque, f"{path.name} is marked but fully parsed"
        else:
            assert not opaque, \
                f"{path.name}: unexpected opaque fallback: {opaque}"


# ---------------------------------------------------------------------------
# parse_project
# ---------------------------------------------------------------------------

def test_parse_project_single_file(tmp_path):
    (tmp_path / "A.sol").write_text("contract A {}")
    project = parse_project(tmp_path)
    assert len(project.files) == 1
    assert project.files[0].path == "A.sol"
    assert project.asts[0].contracts[0].name == "A"


def test_parse_project_empty_directory(tmp_path):
    with pytest.raises(ProjectError, match="no Solidity sources"):
        parse_project(tmp_path)


def test_import_resolution_with_remap(tmp_path):
    (tmp_path / "vendor").mkdir()
    (tmp_path / "vendor" / "A.sol").write_text("contract A {}")
    (tmp_path / "B.sol").write_text(
        'import "lib/A.sol";\ncontract B is A {}')
    project = parse_project(tmp_path, ["lib/=vendor/"])
    assert project.import_table[("B.sol", "lib/A.sol")] == "vendor/A.sol"


def test_import_resolution_relative_then_root(tmp_path):
    sub = tmp_path / "src"
    sub.mkdir()
    (sub / "A.sol").write_text("contract A {}")
    (sub / "B.sol").write_text('import "./A.sol";\ncontract B {}')
    (tmp_path / "C.sol").write_text('import "src/A.sol";\ncontract C {}')
    project = parse_project(tmp_path)
    assert project.import_table[("src/B.sol", "./A.sol")] == "src/A.sol"
    assert project.import_table[("C.sol", "src/A.sol")] == "src/A.sol"


def test_unresolved_import_recorded_not_fatal(tmp_path):
    (tmp_path / "A.sol").write_text(
        'import "@openzeppelin/token.sol";\ncontract A {}')
    project = parse_project(tmp_path)
    assert project.import_table[("A.sol", "@openzeppelin/token.sol")] is None


def test_parse_failures_listed_but_analysis_proceeds(tmp_path):
    (tmp_path / "good.sol").write_text("contract Good {}")
    (tmp_path / "bad.sol").write_text("contract Bad { function ( }")
    project = parse_project(tmp_path)
    assert [f.path for f in project.files] == ["good.sol"]
    assert len(project.parse_failures) == 1
    assert project.parse_failures[0][0] == "bad.sol"


def test_all_files_failing_raises(tmp_path):
    (tmp_path / "bad.sol").write_text("contract Bad { function ( }")
    with pytest.raises(ProjectError, match="every Solidity source"):
        parse_project(tmp_path)
