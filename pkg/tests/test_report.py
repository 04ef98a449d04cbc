"""Audit report parsing, finding selection, entity extraction."""
import pytest

from solrepair.errors import FindingNotFound, FormatError, ReportError
from solrepair.gateway import BackendConfig, LlmGateway, save_transcript
from solrepair.prompts import format_reply, render
from solrepair.report import (Finding, extract_explicit_functions,
                              parse_report, recognize_entities,
                              select_finding)

TWO_FINDINGS = """# Demo Audit

Intro text before any finding.

## [H-01] Reentrancy in `withdraw()`

The `withdraw()` function in `Vault` lacks a reentrancy check.

### Recommended Mitigation Steps

Use checks-effects-interactions.

## [H-02] Oracle staleness in withdraw path

Price data is trusted forever.

Severity: High
"""


def write_report(tmp_path, text, name="report.md"):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return path


# ---------------------------------------------------------------------------
# parse_report
# ---------------------------------------------------------------------------

def test_two_h_findings(tmp_path):
    report = parse_report(write_report(tmp_path, TWO_FINDINGS))
    assert len(report.findings) == 2
    assert [f.severity for f in report.findings] == ["High", "High"]
    assert report.findings[0].title.startswith("[H-01]")


def test_no_severity_marker_defaults_unknown(tmp_path):
    report = parse_report(write_report(
        tmp_path, "## Something odd\n\nBody text.\n"))
    assert report.findings[0].severity == "Unknown"


def test_binary_file_rejected(tmp_path):
    path = tmp_path / "report.md"
    path.write_bytes(b"\x00\x01\x02binary\x00")
    with pytest.raises(ReportError):
        parse_report(path)


def test_missing_file_rejected(tmp_path):
    with pytest.raises(ReportError):
        parse_report(tmp_path / "absent.md")


def test_plain_text_fallback_single_finding(tmp_path):
    report = parse_report(write_report(
        tmp_path, "No headings here, just one paragraph of prose.\n"))
    assert len(report.findings) == 1
    assert report.findings[0].severity == "Unknown"


def test_recommendation_section_extracted(tmp_path):
    report = parse_report(write_report(tmp_path, TWO_FINDINGS))
    assert "checks-effects-interactions" \
        in report.findings[0].recommendation
    assert "checks-effects-interactions" \
        not in report.findings[0].description


def test_severity_line_in_body(tmp_path):
    report = parse_report(write_report(
        tmp_path, "## Finding without tag\n\nSeverity: Medium\n\nBody.\n"))
    assert report.findings[0].severity == "Medium"


def test_fenced_code_becomes_code_ref_with_file_hint(tmp_path):
    text = """## [M-01] Example

Before.

```solidity
File: contracts/Vault.sol
function stake(uint256 amount) external {}
```
"""
    report = parse_report(write_report(tmp_path, text))
    fenced = [ref for ref in report.findings[0].code_refs
              if "function stake" in ref.text]
    assert fenced and fenced[0].file_hint == "contracts/Vault.sol"


def test_finding_partition_reconstructs_body(tmp_path, vault_report):
    for source in (write_report(tmp_path, TWO_FINDINGS), vault_report):
        report = parse_report(source)
        rebuilt = report.preamble + "".join(f.raw for f in report.findings)
        assert rebuilt == source.read_text(encoding="utf-8")


def test_headings_inside_fences_do_not_split(tmp_path):
    text = """## [L-01] Only finding

```text
## not a heading
```

Tail prose.
"""
    report = parse_report(write_report(tmp_path, text))
    assert len(report.findings) == 1
    assert "Tail prose." in report.findings[0].description


# ---------------------------------------------------------------------------
# select_finding
# ---------------------------------------------------------------------------

def test_select_by_id(tmp_path):
    report = parse_report(write_report(tmp_path, TWO_FINDINGS))
    finding, warnings = select_finding(report, "H-01")
    assert finding.title.startswith("[H-01]")
    assert warnings == []


def test_select_multiple_matches_warns_with_all_titles(tmp_path):
    report = parse_report(write_report(tmp_path, TWO_FINDINGS))
    finding, warnings = select_finding(report, "withdraw")
    assert finding.title.startswith("[H-01]")
    assert len(warnings) == 1
    assert "[H-01]" in warnings[0] and "[H-02]" in warnings[0]


def test_select_not_found_lists_titles(tmp_path):
    report = parse_report(write_report(tmp_path, TWO_FINDINGS))
    with pytest.raises(FindingNotFound) as excinfo:
        select_finding(report, "nonexistent")
    assert len(excinfo.value.titles) == 2


def test_select_case_insensitive(tmp_path):
    report = parse_report(write_report(tmp_path, TWO_FINDINGS))
    finding, _ = select_finding(report, "reentrancy")
    assert finding.title.startswith("[H-01]")


# ---------------------------------------------------------------------------
# extract_explicit_functions
# ---------------------------------------------------------------------------

def test_backticked_function_and_contract():
    finding = Finding(
        title="t", severity="High",
        description="`withdraw()` in `Vault` lacks a check")
    mentions = {(m.kind, m.name) for m in extract_explicit_functions(finding)}
    assert mentions == {("Function", "withdraw"), ("Contract", "Vault")}
    assert all(m.confidence == "explicit"
               for m in extract_explicit_functions(finding))


def test_plain_prose_yields_nothing():
    finding = Finding(title="t", severity="Low",
                      description="The protocol trusts stale price data.")
    assert extract_explicit_functions(finding) == []


def test_signature_inside_code_block():
    from solrepair.report import CodeRef
    finding = Finding(
        title="t", severity="High", description="see code",
        code_refs=[CodeRef("function stake(uint256 amount) external {}")])
    mentions = extract_explicit_functions(finding)
    assert ("Function", "stake") in {(m.kind, m.name) for m in mentions}


def test_qualified_member_without_parens_is_state_variable():
    finding = Finding(title="t", severity="High",
                      description="`Vault.totalDeposits` drifts from "
                                  "`Vault.balanceOf()` accounting")
    mentions = {(m.kind, m.name) for m in extract_explicit_functions(finding)}
    assert ("StateVariable", "Vault.totalDeposits") in mentions
    assert ("Function", "Vault.balanceOf") in mentions


def test_extraction_idempotent_and_deduplicated():
    finding = Finding(title="t", severity="High",
                      description="`withdraw()` and again `withdraw()`")
    first = extract_explicit_functions(finding)
    second = extract_explicit_functions(finding)
    assert first == second
    assert len(first) == 1


# ---------------------------------------------------------------------------
# recognize_entities
# ---------------------------------------------------------------------------

def q1_reply(contracts=(), functions=(), state_variables=()):
    return format_reply({"contracts": list(contracts),
                         "functions": list(functions),
                         "state_variables": list(state_variables)},
                        "q1_entities")


def test_recognize_entities_from_stub():
    finding = Finding(title="t", severity="High",
                      description="withdraw lacks a guard")
    gateway = LlmGateway(BackendConfig(mode="stub"),
                         stub_replies={"Q1": q1_reply(
                             contracts=["Vault"], functions=["withdraw"])})
    mentions = recognize_entities(finding, gateway)
    assert {(m.kind, m.name) for m in mentions} \
        == {("Contract", "Vault"), ("Function", "withdraw")}
    assert all(m.confidence == "recognized" for m in mentions)


def test_recognize_entities_malformed_twice_raises():
    finding = Finding(title="t", severity="High", description="prose")
    gateway = LlmGateway(BackendConfig(mode="stub"),
                         stub_replies={"Q1": "no json here"})
    with pytest.raises(FormatError):
        recognize_entities(finding, gateway)
    assert gateway.calls == 2  # exactly one retry


def test_recognize_entities_dedupes_against_explicit():
    finding = Finding(title="t", severity="High",
                      description="`withdraw()` is unsafe")
    gateway = LlmGateway(BackendConfig(mode="stub"),
                         stub_replies={"Q1": q1_reply(
                             functions=["Withdraw"],
                             state_variables=["balances"])})
    mentions = recognize_entities(finding, gateway)
    # "Withdraw" duplicates the explicit mention case-insensitively
    assert {(m.kind, m.name) for m in mentions} \
        == {("StateVariable", "balances")}


def test_recognize_entities_replayed_transcript(tmp_path):
    finding = Finding(title="t", severity="High",
                      description="withdraw lacks a guard")
    stub = LlmGateway(BackendConfig(mode="stub"),
                      stub_replies={"Q1": q1_reply(functions=["withdraw"])})
    recorded = recognize_entities(finding, stub)
    transcript_path = tmp_path / "transcript.jsonl"
    save_transcript(stub.transcript, transcript_path)

    replay = LlmGateway(BackendConfig(
        mode="replay", transcript_path=str(transcript_path)))
    replayed = recognize_entities(finding, replay)
    assert replayed == recorded
