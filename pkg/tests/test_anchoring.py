"""Snippet anchoring tiers, diff emission, and diff application."""
import pytest

from solrepair.anchoring import (anchor_and_apply, apply_unified_diff,
                                 find_anchor, resolve_pair_file)
from solrepair.errors import AnchorError
from solrepair.pipeline import VulFixPair
from solrepair.solidity.project import parse_project

FILE_TEXT = """contract A {
    uint256 public x;

    function f() public {
        x = x + 1;
        emit Done(x);
    }

    function g() public {
        x = 0;
    }
}
"""


def test_exact_match():
    start, end, method = find_anchor(FILE_TEXT, "x = x + 1;")
    assert method == "exact"
    assert FILE_TEXT[start:end] == "x = x + 1;"


def test_exact_multiline():
    snippet = "        x = x + 1;\n        emit Done(x);"
    start, end, method = find_anchor(FILE_TEXT, snippet)
    assert method == "exact"
    assert FILE_TEXT[start:end] == snippet


def test_whitespace_normalized_match():
    snippet = "x  =  x   + 1 ;".replace(" ;", ";")
    start, end, method = find_anchor(FILE_TEXT, "x  =  x   + 1;")
    assert method == "whitespace"
    assert FILE_TEXT[start:end] == "x = x + 1;"


def test_indentation_difference_anchors():
    snippet = "function g() public {\n  x = 0;\n}"
    start, end, method = find_anchor(FILE_TEXT, snippet)
    assert method == "whitespace"
    assert FILE_TEXT[start:end].startswith("function g() public {")
    assert FILE_TEXT[start:end].endswith("}")


def test_ambiguous_exact_match():
    text = "a();\nb();\na();\n"
    with pytest.raises(AnchorError) as excinfo:
        find_anchor(text, "a();")
    assert excinfo.value.reason == "Ambiguous"
    assert excinfo.value.count == 2


def test_fuzzy_match_above_threshold():
    # one character drifted; similarity stays above 0.9
    snippet = "        x = x + 2;\n        emit Done(x);"
    start, end, method = find_anchor(FILE_TEXT, snippet)
    assert method == "fuzzy"
    assert "x = x + 1;" in FILE_TEXT[start:end]
    assert "emit Done(x);" in FILE_TEXT[start:end]


def test_fuzzy_below_threshold_not_found():
    with pytest.raises(AnchorError) as excinfo:
        find_anchor(FILE_TEXT, "completely unrelated text that shares "
                               "nothing with the file")
    assert excinfo.value.reason == "NotFound"


def test_empty_snippet_not_found():
    with pytest.raises(AnchorError):
        find_anchor(FILE_TEXT, "   \n  ")


# ---------------------------------------------------------------------------
# anchor_and_apply
# ---------------------------------------------------------------------------

@pytest.fixture
def mini_project(tmp_path):
    src = tmp_path / "src"
    src.mkdir()
    (src / "A.sol").write_text(FILE_TEXT, encoding="utf-8")
    return parse_project(src)


def test_apply_produces_single_hunk_diff(mini_project, tmp_path):
    pair = VulFixPair("A.sol", "x = x + 1;", "x += 2;", "test")
    out = tmp_path / "out"
    result = anchor_and_apply(pair, mini_project, output_dir=out)
    assert result.method == "exact"
    assert result.diff.count("@@") == 2  # one hunk header
    assert "+        x += 2;" in result.diff
    assert (out / "patched" / "A.sol").read_text() == result.patched_text
    # source untouched
    assert (tmp_path / "src" / "A.sol").read_text() == FILE_TEXT


def test_apply_diff_to_pristine_copy(mini_project):
    pair = VulFixPair("A.sol", "x = x + 1;", "x += 2;", "test")
    result = anchor_and_apply(pair, mini_project)
    assert apply_unified_diff(FILE_TEXT, result.diff) == result.patched_text


def test_anchor_span_matches_location(mini_project):
    pair = VulFixPair("A.sol", "x = x + 1;", "x += 2;", "test")
    result = anchor_and_apply(pair, mini_project)
    assert result.anchor.start_line == 5
    source = mini_project.file_by_path("A.sol")
    assert source.slice(result.anchor) == "x = x + 1;"


def test_file_resolved_by_basename(mini_project):
    pair = VulFixPair("contracts/A.sol", "x = 0;", "x = 1;", "test")
    result = anchor_and_apply(pair, mini_project)
    assert result.rel_path == "A.sol"


def test_unknown_file_not_found(mini_project):
    pair = VulFixPair("Missing.sol", "x = 0;", "x = 1;", "test")
    with pytest.raises(AnchorError):
        anchor_and_apply(pair, mini_project)


def test_resolve_pair_file_ambiguous_basename(tmp_path):
    for sub in ("a", "b"):
        (tmp_path / sub).mkdir()
        (tmp_path / sub / "Dup.sol").write_text("contract D {}")
    project = parse_project(tmp_path)
    with pytest.raises(AnchorError) as excinfo:
        resolve_pair_file(project, "Dup.sol")
    assert excinfo.value.reason == "Ambiguous"


def test_apply_unified_diff_context_mismatch_rejected(mini_project):
    pair = VulFixPair("A.sol", "x = x + 1;", "x += 2;", "test")
    result = anchor_and_apply(pair, mini_project)
    with pytest.raises(AnchorError):
        apply_unified_diff(FILE_TEXT.replace("emit Done", "emit Gone"),
                           result.diff)
